//! Thresholds and prediction sets.
//!
//! A candidate `y` for the unobserved part of the data is kept when the test
//! function of the transformed completion does not exceed the `1 - α`
//! quantile of its values over the calibration elements. Decisions are made
//! by counting values strictly below `ψ`, which is equivalent to comparing
//! against the quantile and avoids sorting per candidate.

mod bounds;
mod calibrator;
mod fast;
mod quantile;
mod randomsize;
mod set;
mod weighted;

pub use bounds::{default_probes, estimate_shift_gap, estimate_shift_gap_weighted, overcoverage_bound};
pub use calibrator::{randomized_set, symmpi_keep, symmpi_set, CalibrationMode, Calibrator};
pub use fast::{SupLastEntry, UnsupLastEntry};
pub use quantile::{finite_quantile, keeps_unweighted, keeps_weighted, quantile_rank, Threshold};
pub use randomsize::{
    hcp_first_obs_keep, hcp_first_obs_set, hcp_first_obs_sup_keep, hcp_first_obs_sup_set, randomsize_keep, randomsize_threshold, randomsize_weights,
    symmpi_set_randomsize,
};
pub use set::{CandidateGrid, PredictionSet, DEFAULT_GRID_POINTS, DEFAULT_GRID_SDS};
pub use weighted::{nonsym_keep, nonsym_set, WeightSpec};

pub(crate) use calibrator::map_candidates;
pub(crate) use fast::count_centered;
pub(crate) use quantile::check_alpha;
