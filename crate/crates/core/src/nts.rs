//! Nonuniform-cost-aware task selection.
//!
//! Each cell is a state and moving between cells is an action. The reward for
//! moving `x' -> x''` is `UPS[x''] + γ / max(d(x', x''), d_floor)`; synchronous
//! Bellman sweeps starting from `V = UPS` give the ranking score QRS = V*.
//! Cells are then allocated in descending QRS order, each to the nearest free
//! participant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AllocationPlan, Assignment, CellId, GridGeometry, Participant};

pub const MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NtsParams {
    pub gamma: f64,
    pub beta: f64,
    pub theta_conv: f64,
    pub d_floor_km: f64,
    /// Reward is `γ / distance` only, without the destination's UPS.
    pub literal: bool,
}

/// Default distance floor: half the smallest nonzero inter-cell distance.
pub fn default_distance_floor(geom: &GridGeometry) -> f64 {
    geom.min_nonzero_distance().map_or(1.0, |d| 0.5 * d)
}

/// `ups_dest + γ / max(dist_km, d_floor_km)`.
pub fn reward(ups_dest: f64, dist_km: f64, gamma: f64, d_floor_km: f64) -> f64 {
    ups_dest + gamma / dist_km.max(d_floor_km)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    /// Initial state values.
    pub init: Vec<f64>,
    /// Row-major `rewards[from * X + to]`.
    pub rewards: Vec<f64>,
    pub beta: f64,
    pub theta_conv: f64,
}

impl Mdp {
    pub fn new(ups: &[f64], geom: &GridGeometry, params: &NtsParams) -> Result<Self> {
        let n = geom.len();
        if ups.len() != n {
            return Err(Error::Domain(format!("UPS has {} entries for {n} cells", ups.len())));
        }
        if !(params.beta > 0.0 && params.beta < 1.0) {
            return Err(Error::Config(format!("beta must lie in (0, 1), got {}", params.beta)));
        }
        if !(params.theta_conv > 0.0) || !(params.d_floor_km > 0.0) {
            return Err(Error::Config("theta_conv and d_floor_km must be > 0".into()));
        }
        let mut rewards = Vec::with_capacity(n * n);
        for from in 0..n {
            for (to, &u) in ups.iter().enumerate() {
                let quality = if params.literal { 0.0 } else { u };
                rewards.push(reward(quality, geom.d(from, to), params.gamma, params.d_floor_km));
            }
        }
        if rewards.iter().chain(ups).any(|r| !r.is_finite()) {
            return Err(Error::Domain("non-finite reward or UPS".into()));
        }
        Ok(Self { init: ups.to_vec(), rewards, beta: params.beta, theta_conv: params.theta_conv })
    }

    pub fn states(&self) -> usize {
        self.init.len()
    }

    pub fn reward(&self, from: CellId, to: CellId) -> f64 {
        self.rewards[from * self.states() + to]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrsRanking {
    pub cycle: usize,
    pub qrs: Vec<f64>,
    /// Max per-state change of each sweep.
    pub deltas: Vec<f64>,
}

impl QrsRanking {
    pub fn sweeps(&self) -> usize {
        self.deltas.len()
    }
}

/// Synchronous value iteration `V[s] <- max_t (β V[t] + R[s][t])` until the
/// largest per-state change drops below `theta_conv`.
pub fn value_iteration(mdp: &Mdp, cycle: usize) -> Result<QrsRanking> {
    let n = mdp.states();
    let mut v = mdp.init.clone();
    let mut next = vec![0.0; n];
    let mut deltas = Vec::new();
    for _ in 0..MAX_SWEEPS {
        let mut delta: f64 = 0.0;
        for (s, slot) in next.iter_mut().enumerate() {
            let row = &mdp.rewards[s * n..(s + 1) * n];
            let best = row
                .iter()
                .zip(&v)
                .map(|(r, vt)| mdp.beta * vt + r)
                .fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max((best - v[s]).abs());
            *slot = best;
        }
        std::mem::swap(&mut v, &mut next);
        deltas.push(delta);
        if delta < mdp.theta_conv {
            return Ok(QrsRanking { cycle, qrs: v, deltas });
        }
    }
    Err(Error::Runtime(format!("value iteration did not converge within {MAX_SWEEPS} sweeps")))
}

/// Cell order by descending `score`, ties by descending `tiebreak`, then by
/// ascending cell id.
pub fn rank_cells(score: &[f64], tiebreak: Option<&[f64]>) -> Vec<CellId> {
    let mut order: Vec<CellId> = (0..score.len()).collect();
    order.sort_by(|&a, &b| {
        score[b]
            .total_cmp(&score[a])
            .then_with(|| match tiebreak {
                Some(t) => t[b].total_cmp(&t[a]),
                None => std::cmp::Ordering::Equal,
            })
            .then(a.cmp(&b))
    });
    order
}

/// Allocates `cells` in order, each to the nearest participant not yet
/// assigned (distance ties go to the lower participant id). Shared by every
/// allocator.
pub fn match_nearest(
    cycle: usize,
    cells: &[CellId],
    participants: &[Participant],
    geom: &GridGeometry,
) -> Result<AllocationPlan> {
    if cells.len() > participants.len() {
        return Err(Error::Domain(format!(
            "{} cells for {} participants",
            cells.len(),
            participants.len()
        )));
    }
    let mut taken = vec![false; participants.len()];
    let mut assignments = Vec::with_capacity(cells.len());
    for &cell in cells {
        geom.cell(cell)?;
        let (idx, p) = participants
            .iter()
            .enumerate()
            .filter(|(i, _)| !taken[*i])
            .min_by(|(_, a), (_, b)| {
                geom.d(a.current_cell, cell).total_cmp(&geom.d(b.current_cell, cell)).then(a.id.cmp(&b.id))
            })
            .expect("fewer cells than participants");
        taken[idx] = true;
        assignments.push(Assignment { participant: p.id, from_cell: p.current_cell, to_cell: cell });
    }
    Ok(AllocationPlan { cycle, assignments, selected_cells: cells.to_vec() })
}

/// Takes the top-P cells by QRS (ties by UPS, then lower cell id) and
/// matches participants nearest-first.
pub fn assign_tasks(
    qrs: &QrsRanking,
    ups: Option<&[f64]>,
    participants: &[Participant],
    geom: &GridGeometry,
) -> Result<AllocationPlan> {
    let p = participants.len();
    if p >= geom.len() {
        return Err(Error::Config(format!("P = {p} must be below X = {}", geom.len())));
    }
    let order = rank_cells(&qrs.qrs, ups);
    match_nearest(qrs.cycle, &order[..p], participants, geom)
}
