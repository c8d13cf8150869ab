//! Deterministic SVG 1.1 rendering of result CSV files.
//!
//! Coordinates are printed with two decimals, so identical inputs give
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Result};

use crate::expr::Expr;
use crate::output::read_csv;

const W: f64 = 480.0;
const H: f64 = 360.0;
const M: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    /// `chart_x, chart_y, density` columns: line plot on 1D grids, colored
    /// dots otherwise.
    Density,
    /// `n, gap` columns: log-log gap plot.
    Convergence,
    /// `chart_x, chart_y` columns: scatter of a configuration.
    Points,
}

impl std::str::FromStr for PlotKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "density" => Ok(PlotKind::Density),
            "convergence" => Ok(PlotKind::Convergence),
            "points" => Ok(PlotKind::Points),
            _ => bail!("unknown plot kind `{s}` (density, convergence, points)"),
        }
    }
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Result<Vec<f64>> {
    let i = header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| anyhow!("result file has no `{name}` column for this plot kind"))?;
    rows.iter()
        .map(|r| r.get(i).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| anyhow!("bad `{name}` value")))
        .collect()
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: &[f64], ys: &[f64], equal: bool) -> Frame {
        let span = |v: &[f64]| {
            let lo = v.iter().copied().filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        let (mut x0, mut x1) = span(xs);
        let (mut y0, mut y1) = span(ys);
        if equal {
            // same units per pixel on both axes
            let sx = (x1 - x0) / (W - 2.0 * M);
            let sy = (y1 - y0) / (H - 2.0 * M);
            let s = sx.max(sy);
            let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
            x0 = cx - 0.5 * s * (W - 2.0 * M);
            x1 = cx + 0.5 * s * (W - 2.0 * M);
            y0 = cy - 0.5 * s * (H - 2.0 * M);
            y1 = cy + 0.5 * s * (H - 2.0 * M);
        }
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        M + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * M)
    }

    fn py(&self, y: f64) -> f64 {
        H - M - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * M)
    }
}

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(s, "<rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
        W / 2.0,
        escape(title)
    );
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(s: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        s,
        "<rect x=\"{M:.2}\" y=\"{M:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\"/>",
        W - 2.0 * M,
        H - 2.0 * M
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let x = f.x0 + t * (f.x1 - f.x0);
        let y = f.y0 + t * (f.y1 - f.y0);
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{}</text>",
            f.px(x),
            H - M + 14.0,
            tick(x)
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{}</text>",
            M - 4.0,
            f.py(y) + 3.0,
            tick(y)
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
        W / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        "<text x=\"14\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.2})\">{}</text>",
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
}

fn tick(v: f64) -> String {
    let v = if v.abs() < 1e-12 { 0.0 } else { v };
    format!("{v:.3}")
}

fn polyline(s: &mut String, f: &Frame, xs: &[f64], ys: &[f64], style: &str) {
    let mut pts = String::new();
    for (x, y) in xs.iter().zip(ys) {
        if x.is_finite() && y.is_finite() {
            let _ = write!(pts, "{:.2},{:.2} ", f.px(*x), f.py(*y));
        }
    }
    let _ = writeln!(s, "<polyline points=\"{}\" fill=\"none\" {style}/>", pts.trim_end());
}

/// Blue to yellow ramp for `t` in `[0, 1]`.
fn color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let r = (30.0 + 220.0 * t).round() as u8;
    let g = (60.0 + 170.0 * t).round() as u8;
    let b = (160.0 - 130.0 * t).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Renders `rows` as an SVG document.
pub fn render(
    kind: PlotKind,
    header: &[String],
    rows: &[Vec<String>],
    overlay: Option<&Expr>,
    title: &str,
) -> Result<String> {
    if rows.is_empty() {
        bail!("result file has no rows");
    }
    let mut s;
    match kind {
        PlotKind::Density => {
            let xs = column(header, rows, "chart_x")?;
            let ys = column(header, rows, "chart_y")?;
            let d = column(header, rows, "density")?;
            let flat = ys.iter().all(|y| *y == ys[0]);
            if flat {
                let mut order: Vec<usize> = (0..xs.len()).collect();
                order.sort_by(|a, b| xs[*a].total_cmp(&xs[*b]));
                let x: Vec<f64> = order.iter().map(|&i| xs[i]).collect();
                let y: Vec<f64> = order.iter().map(|&i| d[i]).collect();
                let over: Option<Vec<f64>> = overlay.map(|e| x.iter().map(|x| e.eval(&[*x])).collect());
                let mut all = y.clone();
                all.extend(over.iter().flatten().copied());
                all.push(0.0);
                let f = Frame::new(&x, &all, false);
                s = open(title);
                axes(&mut s, &f, "x", "density");
                polyline(&mut s, &f, &x, &y, "stroke=\"#1f4e9c\" stroke-width=\"1.5\"");
                if let Some(o) = over {
                    polyline(&mut s, &f, &x, &o, "stroke=\"#c0392b\" stroke-width=\"1\" stroke-dasharray=\"4 3\"");
                }
            } else {
                if overlay.is_some() {
                    bail!("overlays are only drawn on one-dimensional densities");
                }
                let f = Frame::new(&xs, &ys, true);
                s = open(title);
                axes(&mut s, &f, "chart x", "chart y");
                let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let span = if hi > lo { hi - lo } else { 1.0 };
                for i in 0..xs.len() {
                    let _ = writeln!(
                        s,
                        "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{}\"/>",
                        f.px(xs[i]),
                        f.py(ys[i]),
                        color((d[i] - lo) / span)
                    );
                }
            }
        }
        PlotKind::Convergence => {
            let n = column(header, rows, "n")?;
            let gap = column(header, rows, "gap")?;
            let lx: Vec<f64> = n.iter().map(|v| v.log10()).collect();
            let ly: Vec<f64> = gap.iter().map(|g| g.max(1e-16).log10()).collect();
            let f = Frame::new(&lx, &ly, false);
            s = open(title);
            axes(&mut s, &f, "log10 n", "log10 gap");
            polyline(&mut s, &f, &lx, &ly, "stroke=\"#1f4e9c\" stroke-width=\"1.5\"");
            for (x, y) in lx.iter().zip(&ly) {
                let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#1f4e9c\"/>", f.px(*x), f.py(*y));
            }
        }
        PlotKind::Points => {
            if overlay.is_some() {
                bail!("overlays apply to density plots");
            }
            let xs = column(header, rows, "chart_x")?;
            let ys = column(header, rows, "chart_y")?;
            let f = Frame::new(&xs, &ys, true);
            s = open(title);
            axes(&mut s, &f, "chart x", "chart y");
            for (x, y) in xs.iter().zip(&ys) {
                let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#c0392b\"/>", f.px(*x), f.py(*y));
            }
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Reads a result CSV and writes the SVG; on any error no file is written.
pub fn plot_file(input: &Path, kind: PlotKind, output: &Path, overlay: Option<&str>) -> Result<()> {
    let (header, rows) = read_csv(input)?;
    let overlay = overlay.map(|src| Expr::parse(src, &["x"])).transpose()?;
    let title = input.file_stem().and_then(|s| s.to_str()).unwrap_or("result");
    let svg = render(kind, &header, &rows, overlay.as_ref(), title)?;
    fs::write(output, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(header: &[&str]) -> Vec<String> {
        header.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn points_plot_has_one_circle_per_row() {
        let rows: Vec<Vec<String>> = (0..12)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / 12.0;
                vec![t.cos().to_string(), t.sin().to_string()]
            })
            .collect();
        let h = strings(&["chart_x", "chart_y"]);
        let a = render(PlotKind::Points, &h, &rows, None, "t").unwrap();
        let b = render(PlotKind::Points, &h, &rows, None, "t").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matches("r=\"4\"").count(), 12);
    }

    #[test]
    fn mismatched_kind_is_an_error() {
        let h = strings(&["n", "gap"]);
        let rows = vec![vec!["2".into(), "0.1".into()]];
        assert!(render(PlotKind::Points, &h, &rows, None, "t").is_err());
        assert!(render(PlotKind::Convergence, &h, &[], None, "t").is_err());
    }
}
