//! ε-insensitive support vector regression with an RBF kernel on cell
//! coordinates, trained by SMO with second-order working-set selection.
//!
//! The dual is posed over `2n` variables: `alpha[i]` (sign +1) and
//! `alpha[i + n]` (sign -1) for each training point, minimising
//! `0.5 aᵀQa + pᵀa` subject to `yᵀa = 0` and `0 <= a <= C`, where
//! `Q[s][t] = y_s y_t K(s mod n, t mod n)`, `p[i] = ε - z_i` and
//! `p[i + n] = ε + z_i`.

use crate::error::{Error, Result};
use crate::model::{CellId, GridGeometry};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    /// RBF width σ in `exp(-d² / (2σ²))`; median pairwise training distance when `None`.
    pub width_km: Option<f64>,
    /// KKT violation tolerance of the stopping rule.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvrParams {
    fn default() -> Self {
        Self { c: 10.0, epsilon: 0.1, width_km: None, tol: 1e-3, max_iter: 100_000 }
    }
}

#[derive(Debug, Clone)]
pub struct SvrModel {
    points: Vec<[f64; 2]>,
    /// `alpha[i] - alpha[i + n]` per training point.
    coef: Vec<f64>,
    rho: f64,
    gamma: f64,
    pub iterations: usize,
}

fn sq_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Median of pairwise distances between points; 1.0 when degenerate.
pub(crate) fn median_pairwise_distance(points: &[[f64; 2]]) -> f64 {
    let mut d: Vec<f64> = Vec::new();
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            d.push(sq_dist(points[i], points[j]).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let med = if m % 2 == 1 { d[m / 2] } else { 0.5 * (d[m / 2 - 1] + d[m / 2]) };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

impl SvrModel {
    pub fn fit(points: &[[f64; 2]], targets: &[f64], params: &SvrParams) -> Result<Self> {
        let n = points.len();
        if n == 0 || n != targets.len() {
            return Err(Error::Domain("SVR needs matching, non-empty points and targets".into()));
        }
        let width = params.width_km.unwrap_or_else(|| median_pairwise_distance(points));
        let gamma = 1.0 / (2.0 * width * width);
        let kernel: Vec<f64> = (0..n * n)
            .map(|ij| (-gamma * sq_dist(points[ij / n], points[ij % n])).exp())
            .collect();
        let k = |s: usize, t: usize| kernel[(s % n) * n + (t % n)];

        let l = 2 * n;
        let c = params.c;
        let sign: Vec<f64> = (0..l).map(|t| if t < n { 1.0 } else { -1.0 }).collect();
        let q = |s: usize, t: usize| sign[s] * sign[t] * k(s, t);
        let mut alpha = vec![0.0; l];
        let mut grad: Vec<f64> = (0..l)
            .map(|t| if t < n { params.epsilon - targets[t] } else { params.epsilon + targets[t - n] })
            .collect();
        let upper = |a: f64| a >= c;
        let lower = |a: f64| a <= 0.0;

        let mut iterations = 0;
        while iterations < params.max_iter {
            // i: maximal violating index in I_up
            let mut gmax = f64::NEG_INFINITY;
            let mut i = usize::MAX;
            for t in 0..l {
                let in_up = if sign[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
                if in_up && -sign[t] * grad[t] >= gmax {
                    gmax = -sign[t] * grad[t];
                    i = t;
                }
            }
            // j: second-order choice in I_low
            let mut gmax2 = f64::NEG_INFINITY;
            let mut j = usize::MAX;
            let mut best = f64::INFINITY;
            if i != usize::MAX {
                for t in 0..l {
                    let in_low = if sign[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
                    if !in_low {
                        continue;
                    }
                    let yg = sign[t] * grad[t];
                    gmax2 = gmax2.max(yg);
                    let diff = gmax + yg;
                    if diff > 0.0 {
                        let quad = q(i, i) + q(t, t) - 2.0 * sign[i] * sign[t] * q(i, t);
                        let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                        if obj <= best {
                            best = obj;
                            j = t;
                        }
                    }
                }
            }
            if i == usize::MAX || j == usize::MAX || gmax + gmax2 < params.tol {
                break;
            }
            iterations += 1;

            let (old_i, old_j) = (alpha[i], alpha[j]);
            if sign[i] != sign[j] {
                let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(TAU);
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(TAU);
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = sum;
                    }
                    if alpha[i] < 0.0 {
                        alpha[i] = 0.0;
                        alpha[j] = sum;
                    }
                }
            }
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            for t in 0..l {
                grad[t] += q(t, i) * di + q(t, j) * dj;
            }
        }
        if iterations >= params.max_iter {
            log::warn!("SVR solver hit the iteration cap ({})", params.max_iter);
        }

        // Bias from free variables, or the midpoint of the feasible interval.
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut free_sum, mut free_n) = (0.0, 0usize);
        for t in 0..l {
            let yg = sign[t] * grad[t];
            if upper(alpha[t]) {
                if sign[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if lower(alpha[t]) {
                if sign[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free_sum += yg;
                free_n += 1;
            }
        }
        let rho = if free_n > 0 { free_sum / free_n as f64 } else { 0.5 * (ub + lb) };
        let coef = (0..n).map(|i| alpha[i] - alpha[i + n]).collect();
        Ok(Self { points: points.to_vec(), coef, rho, gamma, iterations })
    }

    /// Trains on cell coordinates → collected values.
    pub fn fit_cells(collected: &[(CellId, f64)], geom: &GridGeometry, params: &SvrParams) -> Result<Self> {
        let mut points = Vec::with_capacity(collected.len());
        for &(cell, _) in collected {
            let c = geom.cell(cell)?;
            points.push([c.x_km, c.y_km]);
        }
        let targets: Vec<f64> = collected.iter().map(|cv| cv.1).collect();
        if collected.len() < 2 {
            // Single point: constant model at its value.
            let mean = targets.iter().sum::<f64>() / targets.len().max(1) as f64;
            return Ok(Self { points, coef: vec![0.0; targets.len()], rho: -mean, gamma: 1.0, iterations: 0 });
        }
        Self::fit(&points, &targets, params)
    }

    pub fn predict(&self, x: [f64; 2]) -> f64 {
        self.points
            .iter()
            .zip(&self.coef)
            .map(|(p, c)| c * (-self.gamma * sq_dist(*p, x)).exp())
            .sum::<f64>()
            - self.rho
    }

    pub fn dual_coefficients(&self) -> &[f64] {
        &self.coef
    }

    pub fn bias(&self) -> f64 {
        -self.rho
    }
}

/// SVR prediction at `target` trained on `collected`; falls back to the mean
/// of collected values with fewer than two training cells.
pub fn svr_estimate(
    collected: &[(CellId, f64)],
    geom: &GridGeometry,
    params: &SvrParams,
    target: CellId,
) -> Result<f64> {
    if collected.is_empty() {
        return Err(Error::Domain("SVR needs at least one collected value".into()));
    }
    let t = geom.cell(target)?;
    if collected.len() < 2 {
        return Ok(collected.iter().map(|cv| cv.1).sum::<f64>() / collected.len() as f64);
    }
    let model = SvrModel::fit_cells(collected, geom, params)?;
    Ok(model.predict([t.x_km, t.y_km]))
}
