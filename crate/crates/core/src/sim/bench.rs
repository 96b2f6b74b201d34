use std::fmt::{self, Write as _};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::HierarchicalConfig;
use super::generate::{gen_sup, gen_unsup};
use crate::baselines::{ConformalBaseline, PluginHcp};
use crate::calibrate::{
    hcp_first_obs_keep, hcp_first_obs_set, hcp_first_obs_sup_keep, hcp_first_obs_sup_set, CandidateGrid,
    PredictionSet, SupLastEntry, UnsupLastEntry,
};
use crate::error::{invalid, Result};
use crate::stats::{mean, sample_sd};
use crate::transforms::fit_regressors;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    SymmPI,
    Conformal,
    Subsampling,
    SingleTree,
    /// Plug-in hierarchical conformal baseline ([`PluginHcp`]).
    Hcp,
    /// Hierarchical conformal set with mass `1/K` on the candidate.
    HcpFull,
}

impl Method {
    pub const ALL: [Method; 6] = [Self::SymmPI, Self::Conformal, Self::Subsampling, Self::SingleTree, Self::Hcp, Self::HcpFull];

    /// The methods of the published comparison tables.
    pub const TABLE: [Method; 5] = [Self::SymmPI, Self::Conformal, Self::Subsampling, Self::SingleTree, Self::Hcp];

    pub fn name(self) -> &'static str {
        match self {
            Self::SymmPI => "SymmPI",
            Self::Conformal => "Conformal",
            Self::Subsampling => "Subsampling",
            Self::SingleTree => "SingleTree",
            Self::Hcp => "HCP",
            Self::HcpFull => "HCP-full",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(name))
            .ok_or_else(|| invalid(format!("unknown method '{name}'")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Across-trial summary of one method. Standard errors are the sample
/// standard deviation of the per-trial averages. `mean_length` averages
/// bounded sets only and is `∞` when no set was bounded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub alpha: f64,
    pub sigma2: f64,
    pub mean_length: f64,
    pub se_length: f64,
    pub mean_coverage: f64,
    pub se_coverage: f64,
    pub unbounded_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub config: HierarchicalConfig,
    pub rows: Vec<MethodSummary>,
}

impl BenchResult {
    pub fn row(&self, method: Method) -> Option<&MethodSummary> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// Plain-text table. A length prints as `Inf` whenever some set was
    /// unbounded, since its average is then infinite.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "alpha = {}, sigma2 = {}, trials = {}, tests = {}", self.config.alpha, self.config.sigma2, self.config.trials, self.config.tests);
        let _ = writeln!(out, "{:<12} {:>18} {:>18} {:>10}", "method", "length (se)", "coverage (se)", "unbounded");
        for r in &self.rows {
            let length = if r.unbounded_rate > 0.0 { "Inf".to_string() } else { format!("{:.3} ({:.3})", r.mean_length, r.se_length) };
            let _ = writeln!(
                out,
                "{:<12} {:>18} {:>18} {:>10.3}",
                r.method.name(),
                length,
                format!("{:.3} ({:.3})", r.mean_coverage, r.se_coverage),
                r.unbounded_rate
            );
        }
        out
    }
}

#[derive(Clone, Copy, Default)]
struct Tally {
    length_sum: f64,
    bounded: usize,
    covered: usize,
    unbounded: usize,
}

impl Tally {
    fn record(&mut self, set: &PredictionSet, covered: bool) {
        if set.unbounded {
            self.unbounded += 1;
        } else {
            self.length_sum += set.length();
            self.bounded += 1;
        }
        self.covered += usize::from(covered);
    }
}

fn one_test(config: &HierarchicalConfig, methods: &[Method], data_rng: &mut ChaCha20Rng, method_rng: &mut ChaCha20Rng, tallies: &mut [Tally]) -> Result<()> {
    let alpha = config.alpha;
    if config.supervised {
        let d = gen_sup(config, data_rng)?;
        let reg = fit_regressors(&d.train)?;
        let ys: Vec<f64> = d.calib.iter().chain(&d.train).flat_map(|b| b.y.iter().copied()).collect();
        let grid = CandidateGrid::around(&ys, config.grid_points, config.grid_sds)?;
        let k = d.calib.len();
        for (m, tally) in methods.iter().zip(tallies.iter_mut()) {
            let (set, covered) = match m {
                Method::SymmPI => {
                    let fast = SupLastEntry::with_scale(&d.calib, &d.x_star, &reg, config.c, config.scale)?;
                    (fast.set(&grid, alpha)?, fast.keep(d.truth, alpha))
                }
                Method::Hcp => {
                    let h = PluginHcp::sup(&d.calib[..k - 1], &d.x_star, &reg)?;
                    (h.set(&grid, alpha)?, h.keep(d.truth, alpha))
                }
                Method::HcpFull => {
                    let others = &d.calib[..k - 1];
                    let mu = &*reg.pooled_mu;
                    (hcp_first_obs_sup_set(others, &d.x_star, mu, &grid, alpha)?, hcp_first_obs_sup_keep(others, &d.x_star, mu, d.truth, alpha)?)
                }
                _ => {
                    let b = match m {
                        Method::Conformal => ConformalBaseline::split_sup(&d.calib, &d.x_star, &reg)?,
                        Method::Subsampling => ConformalBaseline::subsample_sup(&d.calib, &d.x_star, &reg, method_rng)?,
                        _ => ConformalBaseline::single_tree_sup(&d.calib[k - 1], &d.x_star, &reg)?,
                    };
                    (b.set(&grid, alpha)?, b.keep(d.truth, alpha))
                }
            };
            tally.record(&set, set.unbounded || covered);
        }
    } else {
        let d = gen_unsup(config, data_rng)?;
        let grid = CandidateGrid::around(&d.observed.concat(), config.grid_points, config.grid_sds)?;
        let k = d.observed.len();
        for (m, tally) in methods.iter().zip(tallies.iter_mut()) {
            let (set, covered) = match m {
                Method::SymmPI => {
                    let fast = UnsupLastEntry::with_scale(&d.observed, config.c, config.scale)?;
                    (fast.set(&grid, alpha)?, fast.keep(d.truth, alpha))
                }
                Method::Hcp => {
                    let h = PluginHcp::unsup(&d.observed[..k - 1])?;
                    (h.set(&grid, alpha)?, h.keep(d.truth, alpha))
                }
                Method::HcpFull => {
                    let others = &d.observed[..k - 1];
                    (hcp_first_obs_set(others, &grid, alpha)?, hcp_first_obs_keep(others, d.truth, alpha)?)
                }
                _ => {
                    let b = match m {
                        Method::Conformal => ConformalBaseline::split(&d.observed)?,
                        Method::Subsampling => ConformalBaseline::subsample(&d.observed, method_rng)?,
                        _ => ConformalBaseline::single_tree(&d.observed[k - 1]),
                    };
                    (b.set(&grid, alpha)?, b.keep(d.truth, alpha))
                }
            };
            tally.record(&set, set.unbounded || covered);
        }
    }
    Ok(())
}

fn run_trial(config: &HierarchicalConfig, methods: &[Method], trial: u64) -> Result<Vec<Tally>> {
    let mut data_rng = ChaCha20Rng::seed_from_u64(config.seed);
    data_rng.set_stream(2 * trial);
    let mut method_rng = ChaCha20Rng::seed_from_u64(config.seed);
    method_rng.set_stream(2 * trial + 1);
    let mut tallies = vec![Tally::default(); methods.len()];
    for _ in 0..config.tests {
        one_test(config, methods, &mut data_rng, &mut method_rng, &mut tallies)?;
    }
    Ok(tallies)
}

/// Runs `config.trials` independent trials of `config.tests` fresh data
/// sets each. Trial `t` draws data from ChaCha stream `2t` and method
/// randomness from stream `2t + 1` of `config.seed`, so results do not
/// depend on the thread count.
pub fn run_benchmark(config: &HierarchicalConfig, methods: &[Method]) -> Result<BenchResult> {
    config.validate()?;
    if methods.is_empty() {
        return Err(invalid("no methods requested"));
    }
    if config.branches < 2 && methods.iter().any(|m| matches!(m, Method::Subsampling | Method::Hcp | Method::HcpFull)) {
        return Err(invalid("subsampling and HCP need at least two branches"));
    }
    let trials = 0..config.trials as u64;
    #[cfg(feature = "parallel")]
    let per_trial: Vec<Vec<Tally>> = trials.into_par_iter().map(|t| run_trial(config, methods, t)).collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let per_trial: Vec<Vec<Tally>> = trials.map(|t| run_trial(config, methods, t)).collect::<Result<_>>()?;

    let tests = config.tests as f64;
    let rows = methods
        .iter()
        .enumerate()
        .map(|(i, &method)| {
            let lengths: Vec<f64> = per_trial.iter().filter(|t| t[i].bounded > 0).map(|t| t[i].length_sum / t[i].bounded as f64).collect();
            let coverage: Vec<f64> = per_trial.iter().map(|t| t[i].covered as f64 / tests).collect();
            let unbounded: usize = per_trial.iter().map(|t| t[i].unbounded).sum();
            let (mean_length, se_length) = match lengths.len() {
                0 => (f64::INFINITY, 0.0),
                1 => (lengths[0], 0.0),
                _ => (mean(&lengths), sample_sd(&lengths)),
            };
            MethodSummary {
                method,
                alpha: config.alpha,
                sigma2: config.sigma2,
                mean_length,
                se_length,
                mean_coverage: mean(&coverage),
                se_coverage: if coverage.len() > 1 { sample_sd(&coverage) } else { 0.0 },
                unbounded_rate: unbounded as f64 / (tests * config.trials as f64),
            }
        })
        .collect();
    Ok(BenchResult { config: config.clone(), rows })
}
