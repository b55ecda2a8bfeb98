//! Comparison allocators. All of them pick a cell set and then use the same
//! nearest-first participant matching as the main scheme.

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{AllocationPlan, CellId, GridGeometry, Participant};
use crate::mpi::UnifiedScores;
use crate::nts::{match_nearest, rank_cells};
use crate::spe::PriorityScores;

fn check_budget(p: usize, x: usize) -> Result<()> {
    if p == 0 || p >= x {
        return Err(Error::Config(format!("P = {p} must satisfy 1 <= P < X = {x}")));
    }
    Ok(())
}

/// Top-P cells by unified priority score.
pub fn allocate_oomta(
    ups: &UnifiedScores,
    participants: &[Participant],
    geom: &GridGeometry,
) -> Result<AllocationPlan> {
    let p = participants.len();
    check_budget(p, geom.len())?;
    let order = rank_cells(&ups.ups, None);
    match_nearest(ups.cycle, &order[..p], participants, geom)
}

/// Per-attribute greedy: each attribute contributes its `floor(P/A)`
/// best cells not already chosen; leftover slots continue round-robin over
/// the same per-attribute rankings.
pub fn allocate_gpsta(
    ps: &[PriorityScores],
    participants: &[Participant],
    geom: &GridGeometry,
) -> Result<AllocationPlan> {
    let p = participants.len();
    let a = ps.len();
    check_budget(p, geom.len())?;
    if a == 0 || p < a {
        return Err(Error::Config(format!("GPS-TA needs P >= A (P = {p}, A = {a})")));
    }
    let rankings: Vec<Vec<CellId>> = ps.iter().map(|s| rank_cells(&s.ps, None)).collect();
    let mut cursor = vec![0usize; a];
    let mut chosen = vec![false; geom.len()];
    let mut cells = Vec::with_capacity(p);
    let mut take_next = |attr: usize, cells: &mut Vec<CellId>| {
        while let Some(&c) = rankings[attr].get(cursor[attr]) {
            cursor[attr] += 1;
            if !chosen[c] {
                chosen[c] = true;
                cells.push(c);
                return;
            }
        }
    };
    let d = p / a;
    for attr in 0..a {
        for _ in 0..d {
            take_next(attr, &mut cells);
        }
    }
    let mut attr = 0;
    while cells.len() < p {
        take_next(attr, &mut cells);
        attr = (attr + 1) % a;
    }
    let cycle = ps.first().map_or(0, |s| s.cycle);
    match_nearest(cycle, &cells, participants, geom)
}

/// Top-P cells by the unweighted mean priority across attributes.
pub fn allocate_ewata(
    ps: &[PriorityScores],
    participants: &[Participant],
    geom: &GridGeometry,
) -> Result<AllocationPlan> {
    let p = participants.len();
    check_budget(p, geom.len())?;
    if ps.is_empty() {
        return Err(Error::Domain("EWA-TA needs at least one attribute".into()));
    }
    let x = geom.len();
    if ps.iter().any(|s| s.ps.len() != x) {
        return Err(Error::Domain("priority vectors do not match the grid".into()));
    }
    let mean: Vec<f64> = (0..x).map(|c| ps.iter().map(|s| s.ps[c]).sum::<f64>() / ps.len() as f64).collect();
    let order = rank_cells(&mean, None);
    match_nearest(ps[0].cycle, &order[..p], participants, geom)
}

/// P distinct cells drawn uniformly without replacement.
pub fn allocate_unsta<R: Rng + ?Sized>(
    rng: &mut R,
    cycle: usize,
    participants: &[Participant],
    geom: &GridGeometry,
) -> Result<AllocationPlan> {
    let p = participants.len();
    check_budget(p, geom.len())?;
    let cells: Vec<CellId> = index::sample(rng, geom.len(), p).into_vec();
    match_nearest(cycle, &cells, participants, geom)
}
