use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stats::sample_sd;

pub const DEFAULT_GRID_POINTS: usize = 2001;
pub const DEFAULT_GRID_SDS: f64 = 4.0;

/// Candidate target values. `spacing` is the length credited to each
/// member when measuring a set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateGrid {
    points: Vec<f64>,
    spacing: f64,
}

impl CandidateGrid {
    /// `n` evenly spaced points on `[lo, hi]`. A degenerate interval gives a
    /// single point with zero spacing.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi < lo {
            return Err(invalid(format!("grid bounds must be finite with lo ≤ hi, got [{lo}, {hi}]")));
        }
        if n == 0 {
            return Err(Error::Empty("candidate grid"));
        }
        if hi == lo || n == 1 {
            return Ok(Self { points: vec![lo], spacing: 0.0 });
        }
        let spacing = (hi - lo) / (n - 1) as f64;
        let points = (0..n).map(|i| if i + 1 == n { hi } else { lo + spacing * i as f64 }).collect();
        Ok(Self { points, spacing })
    }

    /// Grid over the range of `data` widened by `sds` sample standard
    /// deviations on each side.
    pub fn around(data: &[f64], n: usize, sds: f64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("grid data"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("grid data must be finite".into()));
        }
        let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pad = if data.len() > 1 { sds * sample_sd(data) } else { 0.0 };
        Self::uniform(lo - pad, hi + pad, n)
    }

    pub fn from_points(points: Vec<f64>, spacing: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("candidate grid"));
        }
        if !(spacing.is_finite() && spacing >= 0.0) {
            return Err(invalid(format!("grid spacing must be finite and non-negative, got {spacing}")));
        }
        Ok(Self { points, spacing })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn lo(&self) -> f64 {
        self.points[0]
    }

    pub fn hi(&self) -> f64 {
        self.points[self.points.len() - 1]
    }
}

/// Membership of every candidate in a prediction set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub candidates: Vec<f64>,
    pub member: Vec<bool>,
    pub spacing: f64,
    pub unbounded: bool,
}

impl PredictionSet {
    /// An unbounded set keeps every candidate regardless of `member`.
    pub fn new(grid: &CandidateGrid, mut member: Vec<bool>, unbounded: bool) -> Result<Self> {
        if member.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: member.len() });
        }
        if unbounded {
            member.iter_mut().for_each(|m| *m = true);
        }
        Ok(Self { candidates: grid.points().to_vec(), member, spacing: grid.spacing(), unbounded })
    }

    pub fn count(&self) -> usize {
        self.member.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// `count · spacing`, or `∞` when unbounded.
    pub fn length(&self) -> f64 {
        if self.unbounded {
            f64::INFINITY
        } else {
            self.count() as f64 * self.spacing
        }
    }

    /// Maximal runs of consecutive members as `(first, last)` candidates.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        let mut runs = Vec::new();
        let mut start: Option<usize> = None;
        for (i, &m) in self.member.iter().enumerate() {
            match (m, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    runs.push((self.candidates[s], self.candidates[i - 1]));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push((self.candidates[s], self.candidates[self.member.len() - 1]));
        }
        runs
    }

    /// Whether `value` falls inside one of the runs of members.
    pub fn covers(&self, value: f64) -> bool {
        self.unbounded || self.intervals().iter().any(|&(a, b)| a <= value && value <= b)
    }

    pub fn is_subset_of(&self, other: &PredictionSet) -> bool {
        self.member.len() == other.member.len() && self.member.iter().zip(&other.member).all(|(a, b)| !a || *b)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let intervals: Vec<[f64; 2]> = self.intervals().into_iter().map(|(a, b)| [a, b]).collect();
        let length = if self.unbounded { serde_json::Value::Null } else { serde_json::json!(self.length()) };
        serde_json::json!({
            "candidates": self.candidates,
            "member": self.member,
            "intervals": intervals,
            "length": length,
            "unbounded": self.unbounded,
        })
    }
}
