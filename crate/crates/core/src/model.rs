//! Domain model: sensing cells, measurement matrices, participants, and the
//! distance-proportional travel cost.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CellId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: CellId,
    pub x_km: f64,
    pub y_km: f64,
}

/// Cell coordinates with a cached pairwise Euclidean distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGeometry {
    cells: Vec<Cell>,
    dist: Vec<f64>,
}

impl GridGeometry {
    /// Builds a geometry from cells whose ids must be exactly `0..n` (any order).
    pub fn new(mut cells: Vec<Cell>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::Domain("geometry needs at least one cell".into()));
        }
        cells.sort_by_key(|c| c.id);
        for (expected, c) in cells.iter().enumerate() {
            if c.id != expected {
                return Err(Error::Domain(format!(
                    "cell ids must be exactly 0..{} without duplicates (found {} at position {})",
                    cells.len(),
                    c.id,
                    expected
                )));
            }
            if !c.x_km.is_finite() || !c.y_km.is_finite() {
                return Err(Error::Domain(format!("cell {} has non-finite coordinates", c.id)));
            }
        }
        let n = cells.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (cells[i].x_km - cells[j].x_km).hypot(cells[i].y_km - cells[j].y_km);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Ok(Self { cells, dist })
    }

    /// Convenience constructor from `(x_km, y_km)` pairs, ids assigned in order.
    pub fn from_coords(coords: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            coords
                .iter()
                .enumerate()
                .map(|(id, &(x_km, y_km))| Cell { id, x_km, y_km })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, id: CellId) -> Result<&Cell> {
        self.cells
            .get(id)
            .ok_or_else(|| Error::Domain(format!("invalid cell id {id} (X = {})", self.len())))
    }

    /// Euclidean distance in kilometres.
    pub fn distance(&self, i: CellId, j: CellId) -> Result<f64> {
        let n = self.len();
        if i >= n || j >= n {
            return Err(Error::Domain(format!("invalid cell pair ({i}, {j}) for X = {n}")));
        }
        Ok(self.dist[i * n + j])
    }

    /// Unchecked distance lookup for hot loops; panics on bad ids.
    #[inline]
    pub(crate) fn d(&self, i: CellId, j: CellId) -> f64 {
        self.dist[i * self.len() + j]
    }

    pub fn min_nonzero_distance(&self) -> Option<f64> {
        self.dist.iter().copied().filter(|&d| d > 0.0).min_by(f64::total_cmp)
    }

    pub fn mean_pairwise_distance(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            return 0.0;
        }
        let total: f64 = self.dist.iter().sum();
        total / (n * (n - 1)) as f64
    }
}

/// Travel cost proportional to distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub cost_per_km: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { cost_per_km: 1.0 }
    }
}

impl CostModel {
    pub fn new(cost_per_km: f64) -> Result<Self> {
        if !(cost_per_km > 0.0 && cost_per_km.is_finite()) {
            return Err(Error::Config(format!("cost_per_km must be > 0, got {cost_per_km}")));
        }
        Ok(Self { cost_per_km })
    }

    pub fn travel_cost(&self, geom: &GridGeometry, from: CellId, to: CellId) -> Result<f64> {
        Ok(self.cost_per_km * geom.distance(from, to)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub id: usize,
    pub current_cell: CellId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub participant: usize,
    pub from_cell: CellId,
    pub to_cell: CellId,
}

/// Participant-to-cell assignments for one sensing cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub cycle: usize,
    pub assignments: Vec<Assignment>,
    /// Selected cells in the order they were allocated.
    pub selected_cells: Vec<CellId>,
}

impl AllocationPlan {
    /// Checks the plan's structural invariants against `p` participants and `x` cells.
    pub fn validate(&self, p: usize, x: usize) -> Result<()> {
        if self.selected_cells.len() > p {
            return Err(Error::Domain(format!(
                "plan selects {} cells with only {p} participants",
                self.selected_cells.len()
            )));
        }
        let mut seen_cell = vec![false; x];
        for &c in &self.selected_cells {
            if c >= x || std::mem::replace(&mut seen_cell[c], true) {
                return Err(Error::Domain(format!("invalid or duplicate selected cell {c}")));
            }
        }
        let mut seen_p = vec![false; p];
        for a in &self.assignments {
            if a.participant >= p || std::mem::replace(&mut seen_p[a.participant], true) {
                return Err(Error::Domain(format!(
                    "invalid or duplicate participant {}",
                    a.participant
                )));
            }
            if a.from_cell >= x || a.to_cell >= x {
                return Err(Error::Domain("assignment references an invalid cell".into()));
            }
        }
        Ok(())
    }

    /// Sum of travel distances over all assignments.
    pub fn total_distance(&self, geom: &GridGeometry) -> f64 {
        self.assignments.iter().map(|a| geom.d(a.from_cell, a.to_cell)).sum()
    }

    pub fn total_cost(&self, model: &CostModel, geom: &GridGeometry) -> f64 {
        model.cost_per_km * self.total_distance(geom)
    }
}

/// RS, CS and IS matrices indexed by (attribute, cell, cycle).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementStore {
    attributes: usize,
    cells: usize,
    cycles: usize,
    rs: Vec<f64>,
    cs: Vec<Option<f64>>,
    is: Vec<Option<f64>>,
}

impl MeasurementStore {
    /// `truth[a][x][y]` is the ground truth for attribute `a`, cell `x`, cycle `y`.
    pub fn new(truth: &[Vec<Vec<f64>>]) -> Result<Self> {
        let attributes = truth.len();
        let cells = truth.first().map_or(0, Vec::len);
        let cycles = truth.first().and_then(|t| t.first()).map_or(0, Vec::len);
        if attributes == 0 || cells == 0 || cycles == 0 {
            return Err(Error::Data("measurement matrix must be non-empty".into()));
        }
        let mut rs = Vec::with_capacity(attributes * cells * cycles);
        for plane in truth {
            if plane.len() != cells {
                return Err(Error::Data("ragged measurement matrix (cells)".into()));
            }
            for row in plane {
                if row.len() != cycles {
                    return Err(Error::Data("ragged measurement matrix (cycles)".into()));
                }
                rs.extend_from_slice(row);
            }
        }
        let n = rs.len();
        Ok(Self { attributes, cells, cycles, rs, cs: vec![None; n], is: vec![None; n] })
    }

    #[inline]
    fn idx(&self, a: usize, x: CellId, y: usize) -> usize {
        debug_assert!(a < self.attributes && x < self.cells && y < self.cycles);
        (a * self.cells + x) * self.cycles + y
    }

    pub fn attributes(&self) -> usize {
        self.attributes
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn cycles(&self) -> usize {
        self.cycles
    }

    pub fn rs(&self, a: usize, x: CellId, y: usize) -> f64 {
        self.rs[self.idx(a, x, y)]
    }

    pub fn cs(&self, a: usize, x: CellId, y: usize) -> Option<f64> {
        self.cs[self.idx(a, x, y)]
    }

    pub fn is(&self, a: usize, x: CellId, y: usize) -> Option<f64> {
        self.is[self.idx(a, x, y)]
    }

    /// Collected `(cell, value)` pairs for one attribute and cycle, in cell order.
    pub fn collected(&self, a: usize, y: usize) -> Vec<(CellId, f64)> {
        (0..self.cells).filter_map(|x| self.cs(a, x, y).map(|v| (x, v))).collect()
    }

    /// Ground-truth series of one cell over cycles `0..=last`.
    pub fn rs_series(&self, a: usize, x: CellId, last: usize) -> &[f64] {
        let start = self.idx(a, x, 0);
        &self.rs[start..=start + last]
    }

    /// Inferred series of one cell over cycles `0..=last`; `None` if any cycle is unfilled.
    pub fn is_series(&self, a: usize, x: CellId, last: usize) -> Option<Vec<f64>> {
        let start = self.idx(a, x, 0);
        self.is[start..=start + last].iter().copied().collect()
    }

    pub fn is_row(&self, a: usize, y: usize) -> Option<Vec<f64>> {
        (0..self.cells).map(|x| self.is(a, x, y)).collect()
    }

    /// Writes CS := RS at every selected cell for all attributes.
    pub fn collect(&mut self, plan: &AllocationPlan) -> Result<()> {
        if plan.cycle >= self.cycles {
            return Err(Error::Domain(format!(
                "cycle {} out of range (Y = {})",
                plan.cycle, self.cycles
            )));
        }
        if let Some(&bad) = plan.selected_cells.iter().find(|&&x| x >= self.cells) {
            return Err(Error::Domain(format!("invalid cell id {bad} in plan")));
        }
        for a in 0..self.attributes {
            for &x in &plan.selected_cells {
                let i = self.idx(a, x, plan.cycle);
                self.cs[i] = Some(self.rs[i]);
            }
        }
        Ok(())
    }

    pub fn set_is_row(&mut self, a: usize, y: usize, row: &[f64]) -> Result<()> {
        if row.len() != self.cells {
            return Err(Error::Domain(format!(
                "IS row has {} entries, expected {}",
                row.len(),
                self.cells
            )));
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::Runtime(format!("non-finite inferred value {v}")));
        }
        for (x, &v) in row.iter().enumerate() {
            let i = self.idx(a, x, y);
            self.is[i] = Some(v);
        }
        Ok(())
    }

    /// Clears CS and IS at cycle `y` (used by what-if evaluation).
    pub fn clear_cycle(&mut self, y: usize) {
        for a in 0..self.attributes {
            for x in 0..self.cells {
                let i = self.idx(a, x, y);
                self.cs[i] = None;
                self.is[i] = None;
            }
        }
    }
}

/// Collects the plan's cells into `store` and moves each participant to its target.
pub fn collect(
    store: &mut MeasurementStore,
    participants: &mut [Participant],
    plan: &AllocationPlan,
) -> Result<()> {
    store.collect(plan)?;
    for a in &plan.assignments {
        let p = participants
            .get_mut(a.participant)
            .ok_or_else(|| Error::Domain(format!("unknown participant {}", a.participant)))?;
        p.current_cell = a.to_cell;
    }
    Ok(())
}
