use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::calibrate::{DEFAULT_GRID_POINTS, DEFAULT_GRID_SDS};
use crate::error::{invalid, Result};
use crate::transforms::Scale;
use crate::DEFAULT_C;

/// Law of the number of points per branch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeLaw {
    Fixed(usize),
    /// Uniform over the listed sizes.
    OneOf(Vec<usize>),
    /// Uniform over `lo..=hi`.
    Range { lo: usize, hi: usize },
}

impl SizeLaw {
    pub fn sample(&self, rng: &mut dyn RngCore) -> usize {
        match self {
            Self::Fixed(n) => *n,
            Self::OneOf(v) => v[rng.random_range(0..v.len())],
            Self::Range { lo, hi } => rng.random_range(*lo..=*hi),
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, Self::Fixed(_))
    }

    fn min(&self) -> usize {
        match self {
            Self::Fixed(n) => *n,
            Self::OneOf(v) => v.iter().copied().min().unwrap_or(0),
            Self::Range { lo, .. } => *lo,
        }
    }
}

/// How `sigma2` sets the spread of branch locations (or slopes).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetweenScale {
    /// Locations drawn from `N(0, sigma2)`.
    Variance,
    /// Locations drawn with standard deviation `sigma2`; the published
    /// tables are reproduced under this reading.
    StandardDeviation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalConfig {
    /// Number of branches `K`.
    pub branches: usize,
    /// Points per branch. In supervised mode this counts training and
    /// calibration points together; the first half (rounded up) trains.
    pub sizes: SizeLaw,
    pub sigma2: f64,
    pub between: BetweenScale,
    pub noise_sd: f64,
    pub supervised: bool,
    pub trials: usize,
    pub tests: usize,
    pub alpha: f64,
    pub c: f64,
    /// Standardization of SymmPI scores.
    #[serde(default)]
    pub scale: Scale,
    pub grid_points: usize,
    pub grid_sds: f64,
    pub seed: u64,
}

/// Names accepted by [`HierarchicalConfig::preset`].
pub const PRESETS: [&str; 4] = ["table1", "table2", "random-n-unsup", "random-n-sup"];

impl HierarchicalConfig {
    fn base(sizes: SizeLaw, supervised: bool, sigma2: f64, alpha: f64) -> Self {
        Self {
            branches: 20,
            sizes,
            sigma2,
            between: BetweenScale::StandardDeviation,
            noise_sd: 0.5,
            supervised,
            trials: 40,
            tests: 100,
            alpha,
            c: DEFAULT_C,
            scale: Scale::Raw,
            grid_points: DEFAULT_GRID_POINTS,
            grid_sds: DEFAULT_GRID_SDS,
            seed: 0,
        }
    }

    /// Unsupervised, `K = 20`, `M = 15`.
    pub fn table1(sigma2: f64, alpha: f64) -> Self {
        Self::base(SizeLaw::Fixed(15), false, sigma2, alpha)
    }

    /// Supervised, `K = 20`, 30 points per branch split 15/15.
    pub fn table2(sigma2: f64, alpha: f64) -> Self {
        Self::base(SizeLaw::Fixed(30), true, sigma2, alpha)
    }

    /// Unsupervised with `N_k` uniform on `{10, 20}`.
    pub fn random_n_unsup(sigma2: f64, alpha: f64) -> Self {
        Self::base(SizeLaw::OneOf(vec![10, 20]), false, sigma2, alpha)
    }

    /// Supervised with `N_k` uniform on `{20, 40}`.
    pub fn random_n_sup(sigma2: f64, alpha: f64) -> Self {
        Self::base(SizeLaw::OneOf(vec![20, 40]), true, sigma2, alpha)
    }

    pub fn preset(name: &str, sigma2: f64, alpha: f64) -> Result<Self> {
        let cfg = match name {
            "table1" => Self::table1(sigma2, alpha),
            "table2" => Self::table2(sigma2, alpha),
            "random-n-unsup" => Self::random_n_unsup(sigma2, alpha),
            "random-n-sup" => Self::random_n_sup(sigma2, alpha),
            other => return Err(invalid(format!("unknown preset '{other}'; expected one of {}", PRESETS.join(", ")))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Standard deviation of branch locations.
    pub fn between_sd(&self) -> f64 {
        match self.between {
            BetweenScale::Variance => self.sigma2.sqrt(),
            BetweenScale::StandardDeviation => self.sigma2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.branches == 0 {
            return Err(invalid("need at least one branch"));
        }
        let min = self.sizes.min();
        let needed = if self.supervised { 4 } else { 1 };
        if min < needed {
            return Err(invalid(format!("branches need at least {needed} points, got {min}")));
        }
        if let SizeLaw::OneOf(v) = &self.sizes {
            if v.is_empty() {
                return Err(invalid("size list is empty"));
            }
        }
        if let SizeLaw::Range { lo, hi } = self.sizes {
            if lo > hi {
                return Err(invalid(format!("size range {lo}..={hi} is empty")));
            }
        }
        if !(self.sigma2.is_finite() && self.sigma2 >= 0.0) {
            return Err(invalid(format!("sigma2 must be finite and non-negative, got {}", self.sigma2)));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd > 0.0) {
            return Err(invalid(format!("noise_sd must be positive, got {}", self.noise_sd)));
        }
        if self.trials == 0 || self.tests == 0 {
            return Err(invalid("trials and tests must be positive"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if self.c.is_nan() || self.c < 0.0 {
            return Err(invalid(format!("c must be non-negative, got {}", self.c)));
        }
        if self.grid_points < 2 || !(self.grid_sds.is_finite() && self.grid_sds >= 0.0) {
            return Err(invalid("grid needs at least two points and a non-negative width"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESETS {
            assert!(HierarchicalConfig::preset(name, 10.0, 0.05).is_ok());
        }
        assert!(HierarchicalConfig::preset("table9", 1.0, 0.05).is_err());
        let mut c = HierarchicalConfig::table1(1.0, 0.05);
        c.noise_sd = 0.0;
        assert!(c.validate().is_err());
        c.noise_sd = 0.5;
        c.sigma2 = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn between_conventions() {
        let mut c = HierarchicalConfig::table1(4.0, 0.05);
        assert_eq!(c.between_sd(), 4.0);
        c.between = BetweenScale::Variance;
        assert_eq!(c.between_sd(), 2.0);
    }
}
