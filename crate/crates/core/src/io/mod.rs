//! File formats, synthetic data and evaluation reports.

pub mod params;
pub mod ply;
pub mod report;
pub mod synth;

pub use params::ParamsFile;
pub use ply::{parse_ply, write_ply};
pub use report::{evaluate, EvalOptions, EvalReport};
pub use synth::{gen_synthetic, GenConfig};
