//! Sensing-error and travel-cost metrics.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AllocationPlan, CostModel, GridGeometry, MeasurementStore};

/// Floor for a degenerate ground-truth range.
pub const RANGE_FLOOR: f64 = 1e-9;

pub fn sensing_error(is_val: f64, rs_val: f64) -> f64 {
    (is_val - rs_val).abs()
}

/// Per-attribute min-max normalization `e / (max RS - min RS)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorNormalizer {
    pub ranges: Vec<f64>,
}

impl ErrorNormalizer {
    /// Ranges from the ground truth over `cycles`.
    pub fn from_truth(store: &MeasurementStore, cycles: Range<usize>) -> Self {
        let ranges = (0..store.attributes())
            .map(|a| {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for x in 0..store.cells() {
                    for y in cycles.clone() {
                        let v = store.rs(a, x, y);
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
                let range = hi - lo;
                if !(range > RANGE_FLOOR) {
                    log::warn!("attribute {a} has a degenerate ground-truth range; flooring at {RANGE_FLOOR}");
                    RANGE_FLOOR
                } else {
                    range
                }
            })
            .collect();
        Self { ranges }
    }

    pub fn normalize(&self, a: usize, e: f64) -> f64 {
        e / self.ranges[a]
    }
}

/// Mean absolute error of one (attribute, cycle) over all cells.
pub fn cycle_attribute_error(store: &MeasurementStore, a: usize, y: usize) -> Result<f64> {
    let mut sum = 0.0;
    for x in 0..store.cells() {
        let is = store
            .is(a, x, y)
            .ok_or_else(|| Error::Domain(format!("IS missing at attribute {a}, cell {x}, cycle {y}")))?;
        sum += sensing_error(is, store.rs(a, x, y));
    }
    Ok(sum / store.cells() as f64)
}

/// Normalized per-cycle error summed over attributes.
pub fn cycle_error(store: &MeasurementStore, norm: &ErrorNormalizer, y: usize) -> Result<f64> {
    (0..store.attributes())
        .map(|a| Ok(norm.normalize(a, cycle_attribute_error(store, a, y)?)))
        .sum()
}

/// `Σ_a Γ_a(mean over cycles of mean over cells of SE)`.
pub fn aggregated_sensing_error(store: &MeasurementStore, cycles: Range<usize>, norm: &ErrorNormalizer) -> Result<f64> {
    if cycles.is_empty() {
        return Err(Error::Domain("empty evaluation horizon".into()));
    }
    let len = cycles.len() as f64;
    let mut total = 0.0;
    for a in 0..store.attributes() {
        let mut sum = 0.0;
        for y in cycles.clone() {
            sum += cycle_attribute_error(store, a, y)?;
        }
        total += norm.normalize(a, sum / len);
    }
    Ok(total)
}

/// Streaming form of [`aggregated_sensing_error`]: feed cycles as they finish.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorAccumulator {
    per_attribute: Vec<f64>,
    cycles: usize,
}

impl ErrorAccumulator {
    pub fn push_cycle(&mut self, store: &MeasurementStore, y: usize) -> Result<()> {
        if self.per_attribute.is_empty() {
            self.per_attribute = vec![0.0; store.attributes()];
        }
        for (a, acc) in self.per_attribute.iter_mut().enumerate() {
            *acc += cycle_attribute_error(store, a, y)?;
        }
        self.cycles += 1;
        Ok(())
    }

    pub fn value(&self, norm: &ErrorNormalizer) -> f64 {
        if self.cycles == 0 {
            return 0.0;
        }
        self.per_attribute
            .iter()
            .enumerate()
            .map(|(a, s)| norm.normalize(a, s / self.cycles as f64))
            .sum()
    }
}

/// Mean over plans of the mean per-participant travel cost; participants
/// without an assignment contribute 0.
pub fn average_cost(plans: &[AllocationPlan], model: &CostModel, geom: &GridGeometry, participants: usize) -> Result<f64> {
    if plans.is_empty() {
        return Err(Error::Domain("no plans to average".into()));
    }
    if participants == 0 {
        return Err(Error::Domain("participant count must be positive".into()));
    }
    let total: f64 = plans.iter().map(|p| p.total_cost(model, geom) / participants as f64).sum();
    Ok(total / plans.len() as f64)
}
