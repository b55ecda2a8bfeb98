//! Multi-attribute priority integration: attribute-weighted unified scores,
//! quantile loss estimation from collected residuals, and the exponential
//! weight update.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::CellId;
use crate::spe::PriorityScores;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeWeights {
    pub w: Vec<f64>,
    pub cycle: usize,
    pub eta: f64,
    pub delta: f64,
}

impl AttributeWeights {
    /// Uniform weights `1/A`.
    pub fn uniform(attributes: usize, eta: f64, delta: f64) -> Result<Self> {
        if attributes == 0 {
            return Err(Error::Domain("need at least one attribute".into()));
        }
        if !(eta >= 0.0) || !(delta > 0.5 && delta < 1.0) {
            return Err(Error::Config(format!("invalid eta {eta} or delta {delta}")));
        }
        Ok(Self { w: vec![1.0 / attributes as f64; attributes], cycle: 0, eta, delta })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnifiedScores {
    pub cycle: usize,
    pub ups: Vec<f64>,
}

/// `UPS[x] = Σ_a w[a] · PS[a][x]`.
pub fn unified_priority(ps: &[PriorityScores], weights: &AttributeWeights) -> Result<UnifiedScores> {
    let rows: Vec<&[f64]> = ps.iter().map(|p| p.ps.as_slice()).collect();
    let cycle = ps.first().map_or(weights.cycle, |p| p.cycle);
    Ok(UnifiedScores { cycle, ups: weighted_sum(&rows, &weights.w)? })
}

/// Per-cell weighted sum of equally long score vectors.
pub fn weighted_sum(rows: &[&[f64]], w: &[f64]) -> Result<Vec<f64>> {
    if rows.len() != w.len() || rows.is_empty() {
        return Err(Error::Domain(format!("{} score vectors but {} weights", rows.len(), w.len())));
    }
    let x = rows[0].len();
    if rows.iter().any(|r| r.len() != x) {
        return Err(Error::Domain("priority vectors differ in length".into()));
    }
    Ok((0..x).map(|c| rows.iter().zip(w).map(|(r, wa)| wa * r[c]).sum()).collect())
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// δ-quantile of a normal fitted to `residuals` (sample mean and sample sd,
/// sd 0 for a single residual), clamped at 0. `None` without residuals.
pub fn quantile_loss(residuals: &[f64], delta: f64) -> Option<f64> {
    let n = residuals.len();
    if n == 0 {
        return None;
    }
    let mu = residuals.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (residuals.iter().map(|r| (r - mu).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let loss = if sd > 0.0 { mu + sd * normal_quantile(delta) } else { mu };
    Some(loss.max(0.0))
}

/// Loss from the absolute residuals between collected values and an IS row
/// at the collected cells.
pub fn estimate_loss(is_row: &[f64], collected: &[(CellId, f64)], delta: f64) -> Result<Option<f64>> {
    let mut residuals = Vec::with_capacity(collected.len());
    for &(x, cs) in collected {
        let is = is_row
            .get(x)
            .ok_or_else(|| Error::Domain(format!("collected cell {x} outside IS row")))?;
        residuals.push((cs - is).abs());
    }
    Ok(quantile_loss(&residuals, delta))
}

/// Exponential update `w[a] · exp(-η · loss[a])`, renormalized to sum 1.
/// Falls back to uniform weights if every weight underflows.
pub fn update_weights(weights: &AttributeWeights, losses: &[f64]) -> Result<AttributeWeights> {
    if losses.len() != weights.len() {
        return Err(Error::Domain(format!("{} losses for {} weights", losses.len(), weights.len())));
    }
    if losses.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::Domain(format!("losses must be finite and >= 0: {losses:?}")));
    }
    let raw: Vec<f64> = weights.w.iter().zip(losses).map(|(w, l)| w * (-weights.eta * l).exp()).collect();
    let total: f64 = raw.iter().sum();
    let w = if total > 0.0 && total.is_finite() && raw.iter().all(|v| *v > 0.0) {
        raw.iter().map(|v| v / total).collect()
    } else {
        log::warn!("attribute weights underflowed; resetting to uniform");
        vec![1.0 / weights.len() as f64; weights.len()]
    };
    Ok(AttributeWeights { w, cycle: weights.cycle + 1, ..weights.clone() })
}

/// Running per-attribute min-max scaling of raw losses into [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossNormalizer {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl LossNormalizer {
    pub fn new(attributes: usize) -> Self {
        Self { lo: vec![f64::INFINITY; attributes], hi: vec![f64::NEG_INFINITY; attributes] }
    }

    /// Folds `raw` into the running range of attribute `a` and returns the
    /// scaled loss (0 while the range is still degenerate).
    pub fn observe(&mut self, a: usize, raw: f64) -> f64 {
        self.lo[a] = self.lo[a].min(raw);
        self.hi[a] = self.hi[a].max(raw);
        let range = self.hi[a] - self.lo[a];
        if range > 0.0 {
            (raw - self.lo[a]) / range
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ps(v: Vec<f64>) -> PriorityScores {
        PriorityScores { attribute: 0, cycle: 1, te: vec![], smi: vec![], ps: v, alpha_te: 0.5, alpha_smi: 0.5 }
    }

    #[test]
    fn ups_examples() {
        let w = AttributeWeights { w: vec![0.4, 0.6], cycle: 1, eta: 0.5, delta: 0.95 };
        let u = unified_priority(&[ps(vec![1.0, 0.0]), ps(vec![2.0, 1.0])], &w).unwrap();
        assert_abs_diff_eq!(u.ups[0], 1.6, epsilon = 1e-15);
        let one = AttributeWeights::uniform(1, 0.5, 0.95).unwrap();
        assert_eq!(unified_priority(&[ps(vec![3.0, 4.0])], &one).unwrap().ups, vec![3.0, 4.0]);
        assert!(unified_priority(&[ps(vec![1.0]), ps(vec![1.0, 2.0])], &w).is_err());
    }

    #[test]
    fn loss_examples() {
        assert_eq!(quantile_loss(&[0.0, 0.0, 0.0], 0.95), Some(0.0));
        assert_eq!(quantile_loss(&[0.7], 0.99), Some(0.7));
        assert_eq!(quantile_loss(&[], 0.95), None);
        assert_abs_diff_eq!(normal_quantile(0.95), 1.644_853_626_951_472_2, epsilon = 1e-9);
        // residuals with mean 1 and sample sd 0.5
        assert_abs_diff_eq!(quantile_loss(&[0.5, 1.5, 1.0, 1.0], 0.95).unwrap().max(0.0), {
            let sd = (0.5f64 / 3.0).sqrt();
            1.0 + sd * 1.644_853_626_951_472_2
        }, epsilon = 1e-9);
        let is_row = [1.0, 2.0, 3.0];
        assert_eq!(estimate_loss(&is_row, &[(1, 2.7)], 0.95).unwrap().map(|l| (l * 1e9).round() / 1e9), Some(0.7));
    }

    #[test]
    fn update_examples() {
        let w = AttributeWeights::uniform(2, 0.5, 0.95).unwrap();
        let u = update_weights(&w, &[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(u.w[0], 0.622_459_331_201_854_6, epsilon = 1e-9);
        assert_abs_diff_eq!(u.w[1], 0.377_540_668_798_145_4, epsilon = 1e-9);
        let same = update_weights(&w, &[0.3, 0.3]).unwrap();
        assert_abs_diff_eq!(same.w[0], 0.5, epsilon = 1e-15);
        let frozen = AttributeWeights { eta: 0.0, w: vec![0.3, 0.7], ..w.clone() };
        assert_eq!(update_weights(&frozen, &[5.0, 0.0]).unwrap().w, vec![0.3, 0.7]);
    }

    #[test]
    fn underflow_resets_to_uniform() {
        let w = AttributeWeights { w: vec![1e-300, 1.0 - 1e-300], cycle: 0, eta: 1e3, delta: 0.95 };
        let u = update_weights(&w, &[1.0, 1.0]).unwrap();
        assert_eq!(u.w, vec![0.5, 0.5]);
        assert!(update_weights(&w, &[f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn normalizer_tracks_running_range() {
        let mut n = LossNormalizer::new(1);
        assert_eq!(n.observe(0, 2.0), 0.0);
        assert_eq!(n.observe(0, 4.0), 1.0);
        assert_eq!(n.observe(0, 3.0), 0.5);
    }
}
