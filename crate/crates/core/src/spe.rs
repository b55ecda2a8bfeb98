//! Single-attribute priority estimation: temporal entropy (uncertainty) and
//! spatial mutual information (representativeness) of each cell's inferred
//! series, blended into a per-cell priority score.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cap on squared correlation so that a perfect correlation gives a finite MI.
pub const RHO2_CAP: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeParams {
    pub alpha_te: f64,
    pub alpha_smi: f64,
    /// Trailing window for the entropy fit; the full history when `None`.
    pub window: Option<usize>,
    pub sigma_floor: f64,
    pub normalize: bool,
}

impl Default for SpeParams {
    fn default() -> Self {
        Self { alpha_te: 0.5, alpha_smi: 0.5, window: None, sigma_floor: 1e-6, normalize: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityScores {
    pub attribute: usize,
    pub cycle: usize,
    /// Temporal entropy per cell, after normalization when enabled.
    pub te: Vec<f64>,
    /// Spatial mutual information per cell, after normalization when enabled.
    pub smi: Vec<f64>,
    pub ps: Vec<f64>,
    pub alpha_te: f64,
    pub alpha_smi: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (denominator `n - 1`); 0 for fewer than two values.
fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Differential entropy of a normal fitted to the last `window` values:
/// `0.5 ln(2πe σ²)` with σ floored at `sigma_floor`.
pub fn temporal_entropy(series: &[f64], window: Option<usize>, sigma_floor: f64) -> f64 {
    if series.is_empty() {
        return gaussian_entropy(sigma_floor);
    }
    let start = window.map_or(0, |w| series.len().saturating_sub(w.max(1)));
    gaussian_entropy(sample_sd(&series[start..]).max(sigma_floor))
}

pub fn gaussian_entropy(sigma: f64) -> f64 {
    0.5 * (2.0 * PI * E * sigma * sigma).ln()
}

/// Pearson correlation; `None` when either series has zero variance.
pub fn pearson(u: &[f64], v: &[f64]) -> Option<f64> {
    let (mu, mv) = (mean(u), mean(v));
    let (mut suv, mut suu, mut svv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        let (da, db) = (a - mu, b - mv);
        suv += da * db;
        suu += da * da;
        svv += db * db;
    }
    if suu <= 0.0 || svv <= 0.0 {
        return None;
    }
    Some((suv / (suu * svv).sqrt()).clamp(-1.0, 1.0))
}

/// Mutual information of two series under a bivariate Gaussian model:
/// `-0.5 ln(1 - ρ²)`, ρ² capped at `1 - 1e-9`; zero-variance series give 0.
pub fn gaussian_mutual_information(u: &[f64], v: &[f64]) -> f64 {
    match pearson(u, v) {
        Some(r) => -0.5 * (1.0 - (r * r).min(RHO2_CAP)).ln(),
        None => 0.0,
    }
}

/// Sum of pairwise Gaussian MI between `target` and each of `others`.
pub fn spatial_mutual_information(target: &[f64], others: &[&[f64]]) -> Result<f64> {
    if others.iter().any(|o| o.len() != target.len()) {
        return Err(Error::Domain("SMI series must share a length".into()));
    }
    if target.len() < 2 {
        return Ok(0.0);
    }
    Ok(others.iter().map(|o| gaussian_mutual_information(target, o)).sum())
}

/// Min-max scales to [0, 1]; a constant vector maps to zeros.
pub fn min_max_normalize(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (x - lo) / range).collect()
}

/// Priority scores for one attribute from each cell's IS history
/// (`history[x]` = cycles `0..=y`).
pub fn compute_priorities(
    history: &[Vec<f64>],
    attribute: usize,
    cycle: usize,
    params: &SpeParams,
) -> Result<PriorityScores> {
    let n = history.len();
    let len = history.first().map_or(0, Vec::len);
    if len == 0 {
        return Err(Error::Domain("priority estimation needs at least one cycle of history".into()));
    }
    if history.iter().any(|h| h.len() != len) {
        return Err(Error::Domain("IS histories differ in length".into()));
    }
    let te: Vec<f64> = history.iter().map(|h| temporal_entropy(h, params.window, params.sigma_floor)).collect();

    // Pairwise MI is symmetric; fill the upper triangle once.
    let mut smi = vec![0.0; n];
    if len >= 2 {
        for i in 0..n {
            for j in (i + 1)..n {
                let mi = gaussian_mutual_information(&history[i], &history[j]);
                smi[i] += mi;
                smi[j] += mi;
            }
        }
    }
    let (te, smi) = if params.normalize { (min_max_normalize(&te), min_max_normalize(&smi)) } else { (te, smi) };
    let ps = te.iter().zip(&smi).map(|(t, s)| params.alpha_te * t + params.alpha_smi * s).collect();
    Ok(PriorityScores { attribute, cycle, te, smi, ps, alpha_te: params.alpha_te, alpha_smi: params.alpha_smi })
}
