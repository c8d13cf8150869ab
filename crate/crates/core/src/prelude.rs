// Local prelude: `alloc` collections plus `Float` for math on `f64` without std.
#[allow(unused_imports)]
pub(crate) use alloc::{
    boxed::Box,
    format,
    string::{String, ToString},
    sync::Arc,
    vec,
    vec::Vec,
};
#[allow(unused_imports)]
pub(crate) use num_traits::Float;
