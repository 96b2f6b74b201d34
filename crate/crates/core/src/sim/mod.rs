//! Simulated data and the benchmark harness.

mod bench;
mod config;
mod generate;
mod rotation;

pub use bench::{run_benchmark, BenchResult, Method, MethodSummary};
pub use config::{BetweenScale, HierarchicalConfig, SizeLaw, PRESETS};
pub use generate::{gen_rotational, gen_sup, gen_unsup, SupDraw, UnsupDraw};
pub use rotation::{rotation_region, rotation_supervised_set, RotationRegion};
