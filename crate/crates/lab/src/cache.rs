//! Binary cache for spectral tables.
//!
//! Layout (little endian): magic `GIBBSTBL`, format version `u32`, record
//! tag `u8` (1 space, 2 Green), space kind `u8`, resolution `u64`, basis
//! order `u64`, Green order `u64`, background-charge hash `u64`, payload,
//! then the first 8 bytes of the SHA-256 of everything before them. Any
//! mismatch makes the loader rebuild and rewrite the entry.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use gibbs_core::spaces::{BackgroundCharge, GreenModel, GreenTables, SpaceTables};
use gibbs_core::{Point, Space, SpaceKind, SpaceSpec};
use sha2::{Digest, Sha256};

pub const MAGIC: &[u8; 8] = b"GIBBSTBL";
pub const VERSION: u32 = 1;

const TAG_SPACE: u8 = 1;
const TAG_GREEN: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub tag: u8,
    pub kind: u8,
    pub resolution: u64,
    pub basis_order: u64,
    pub green_order: u64,
    pub charge_hash: u64,
}

#[derive(Debug, PartialEq, Eq)]
pub enum CacheError {
    BadMagic,
    Version(u32),
    HeaderMismatch,
    Truncated,
    Checksum,
    Invalid(String),
}

impl std::fmt::Display for CacheError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CacheError::BadMagic => write!(f, "not a table cache file"),
            CacheError::Version(v) => write!(f, "cache format version {v}, expected {VERSION}"),
            CacheError::HeaderMismatch => write!(f, "cache header does not match the request"),
            CacheError::Truncated => write!(f, "cache file is truncated"),
            CacheError::Checksum => write!(f, "cache checksum mismatch"),
            CacheError::Invalid(m) => write!(f, "cached tables rejected: {m}"),
        }
    }
}

impl std::error::Error for CacheError {}

fn kind_code(kind: SpaceKind) -> Option<u8> {
    match kind {
        SpaceKind::Circle => Some(0),
        SpaceKind::Torus => Some(1),
        SpaceKind::Sphere => Some(2),
        SpaceKind::Box { .. } => None,
    }
}

fn kind_from(code: u8) -> Option<SpaceKind> {
    match code {
        0 => Some(SpaceKind::Circle),
        1 => Some(SpaceKind::Torus),
        2 => Some(SpaceKind::Sphere),
        _ => None,
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn new(h: &Header) -> Self {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.0.extend_from_slice(&VERSION.to_le_bytes());
        w.0.push(h.tag);
        w.0.push(h.kind);
        for v in [h.resolution, h.basis_order, h.green_order, h.charge_hash] {
            w.u64(v);
        }
        w
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_bits().to_le_bytes());
    }

    fn finish(mut self) -> Vec<u8> {
        let digest = Sha256::digest(&self.0);
        self.0.extend_from_slice(&digest[..8]);
        self.0
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CacheError> {
        let end = self.at.checked_add(n).ok_or(CacheError::Truncated)?;
        let s = self.bytes.get(self.at..end).ok_or(CacheError::Truncated)?;
        self.at = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, CacheError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CacheError> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn len(&mut self, item_bytes: usize) -> Result<usize, CacheError> {
        let n = self.u64()? as usize;
        if n.saturating_mul(item_bytes) > self.bytes.len() {
            return Err(CacheError::Truncated);
        }
        Ok(n)
    }
}

/// Checks magic, version, checksum and header; returns the payload reader.
fn open<'a>(bytes: &'a [u8], expected: &Header) -> Result<Reader<'a>, CacheError> {
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        return Err(CacheError::BadMagic);
    }
    let mut r = Reader { bytes, at: 8 };
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(CacheError::Version(version));
    }
    if bytes.len() < 8 + 4 + 2 + 32 + 8 {
        return Err(CacheError::Truncated);
    }
    let (body, sum) = bytes.split_at(bytes.len() - 8);
    if Sha256::digest(body)[..8] != *sum {
        return Err(CacheError::Checksum);
    }
    let t = r.take(2)?;
    let header = Header {
        tag: t[0],
        kind: t[1],
        resolution: r.u64()?,
        basis_order: r.u64()?,
        green_order: r.u64()?,
        charge_hash: r.u64()?,
    };
    if header != *expected {
        return Err(CacheError::HeaderMismatch);
    }
    r.bytes = body;
    Ok(r)
}

fn space_header(kind: SpaceKind, resolution: usize, basis_order: usize) -> Option<Header> {
    Some(Header {
        tag: TAG_SPACE,
        kind: kind_code(kind)?,
        resolution: resolution as u64,
        basis_order: basis_order as u64,
        green_order: 0,
        charge_hash: 0,
    })
}

pub fn encode_space(space: &Space) -> Option<Vec<u8>> {
    let t = space.tables();
    let mut w = Writer::new(&space_header(t.kind, t.resolution, t.basis_order)?);
    w.u64(t.nodes.len() as u64);
    for p in &t.nodes {
        for c in p.0 {
            w.f64(c);
        }
    }
    for v in t.weights.iter().chain(&t.cell_sides) {
        w.f64(*v);
    }
    Some(w.finish())
}

pub fn decode_space(bytes: &[u8], spec: &SpaceSpec) -> Result<Arc<Space>, CacheError> {
    let expected = space_header(spec.kind, spec.resolution, spec.basis_order).ok_or(CacheError::HeaderMismatch)?;
    let mut r = open(bytes, &expected)?;
    let n = r.len(40)?;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        nodes.push(Point([r.f64()?, r.f64()?, r.f64()?]));
    }
    let weights = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
    let cell_sides = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
    let kind = kind_from(expected.kind).ok_or(CacheError::HeaderMismatch)?;
    Space::from_tables(SpaceTables {
        kind,
        resolution: spec.resolution,
        basis_order: spec.basis_order,
        nodes,
        weights,
        cell_sides,
    })
    .map_err(|e| CacheError::Invalid(e.to_string()))
}

fn green_header(space: &Space, order: usize, charge: &BackgroundCharge) -> Option<Header> {
    Some(Header {
        tag: TAG_GREEN,
        green_order: order as u64,
        charge_hash: charge.hash(),
        ..space_header(space.kind(), space.resolution(), space.basis_order())?
    })
}

pub fn encode_green(g: &GreenModel) -> Option<Vec<u8>> {
    let t = g.tables();
    let mut w = Writer::new(&green_header(g.space(), t.order, g.charge())?);
    w.u64(t.phi_coeffs.len() as u64);
    for (k, c) in &t.phi_coeffs {
        w.u64(*k as u64);
        w.f64(*c);
    }
    w.f64(t.offset);
    w.f64(t.phi_max);
    w.f64(t.lower_bound);
    Some(w.finish())
}

pub fn decode_green(
    bytes: &[u8],
    space: Arc<Space>,
    charge: BackgroundCharge,
    order: usize,
) -> Result<GreenModel, CacheError> {
    let expected = green_header(&space, order, &charge).ok_or(CacheError::HeaderMismatch)?;
    let mut r = open(bytes, &expected)?;
    let n = r.len(16)?;
    let mut phi_coeffs = Vec::with_capacity(n);
    for _ in 0..n {
        phi_coeffs.push((r.u64()? as usize, r.f64()?));
    }
    let tables = GreenTables { order, phi_coeffs, offset: r.f64()?, phi_max: r.f64()?, lower_bound: r.f64()? };
    GreenModel::from_tables(space, charge, tables).map_err(|e| CacheError::Invalid(e.to_string()))
}

fn space_path(dir: &Path, spec: &SpaceSpec) -> PathBuf {
    dir.join(format!("space-{}-{}-{}.bin", spec.kind.name(), spec.resolution, spec.basis_order))
}

fn store(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Builds a space, reading and refreshing the cache when a directory is
/// given and the space is a manifold.
pub fn space(dir: Option<&Path>, spec: SpaceSpec) -> anyhow::Result<Arc<Space>> {
    let dir = match dir {
        Some(d) if spec.kind.is_manifold() => d,
        _ => return Ok(Space::build(spec)?),
    };
    let path = space_path(dir, &spec);
    if let Ok(bytes) = fs::read(&path) {
        match decode_space(&bytes, &spec) {
            Ok(s) => return Ok(s),
            Err(e) => eprintln!("warning: {}: {e}; rebuilding", path.display()),
        }
    }
    let s = Space::build(spec)?;
    if let Some(bytes) = encode_space(&s) {
        store(&path, &bytes)?;
    }
    Ok(s)
}

pub fn green(
    dir: Option<&Path>,
    space: Arc<Space>,
    charge: BackgroundCharge,
    order: usize,
) -> anyhow::Result<GreenModel> {
    let Some(dir) = dir else {
        return Ok(GreenModel::new(space, charge, order)?);
    };
    let path = dir.join(format!(
        "green-{}-{}-{}-{}-{:016x}.bin",
        space.kind().name(),
        space.resolution(),
        space.basis_order(),
        order,
        charge.hash()
    ));
    if let Ok(bytes) = fs::read(&path) {
        match decode_green(&bytes, space.clone(), charge.clone(), order) {
            Ok(g) => return Ok(g),
            Err(e) => eprintln!("warning: {}: {e}; rebuilding", path.display()),
        }
    }
    let g = GreenModel::new(space, charge, order)?;
    if let Some(bytes) = encode_green(&g) {
        store(&path, &bytes)?;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_round_trips_bitwise() {
        let spec = SpaceSpec::sphere(2, 4);
        let s = Space::build(spec.clone()).unwrap();
        let bytes = encode_space(&s).unwrap();
        let t = decode_space(&bytes, &spec).unwrap();
        assert_eq!(s.tables(), t.tables());
        assert_eq!(s.fingerprint(), t.fingerprint());
    }

    #[test]
    fn guards_reject_drift() {
        let spec = SpaceSpec::circle(64, 8);
        let s = Space::build(spec.clone()).unwrap();
        let mut bytes = encode_space(&s).unwrap();
        assert_eq!(decode_space(&bytes, &SpaceSpec::circle(64, 7)).unwrap_err(), CacheError::HeaderMismatch);
        assert_eq!(decode_space(&bytes[..bytes.len() - 20], &spec).unwrap_err(), CacheError::Checksum);
        bytes[8] = 9;
        assert_eq!(decode_space(&bytes, &spec).unwrap_err(), CacheError::Version(9));
        bytes[0] = b'X';
        assert_eq!(decode_space(&bytes, &spec).unwrap_err(), CacheError::BadMagic);
        let mut flipped = encode_space(&s).unwrap();
        let mid = flipped.len() / 2;
        flipped[mid] ^= 1;
        assert_eq!(decode_space(&flipped, &spec).unwrap_err(), CacheError::Checksum);
    }

    #[test]
    fn green_tables_round_trip() {
        let s = Space::build(SpaceSpec::torus(16, 4)).unwrap();
        let charge = BackgroundCharge::from_field(&s, "1+u", |p| 1.0 + 0.5 * p.0[0]).unwrap();
        let g = GreenModel::new(s.clone(), charge.clone(), 4).unwrap();
        let bytes = encode_green(&g).unwrap();
        let h = decode_green(&bytes, s.clone(), charge, 4).unwrap();
        assert_eq!(g.tables(), h.tables());
        let other = BackgroundCharge::uniform(&s);
        assert_eq!(decode_green(&bytes, s, other, 4).unwrap_err(), CacheError::HeaderMismatch);
    }
}
