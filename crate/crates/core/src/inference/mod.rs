//! Spatial inference of uncollected cells from one cycle's collected values.

mod idw;
mod knn;
mod svr;

pub use idw::idw_estimate;
pub use knn::knn_estimate;
pub use svr::{svr_estimate, SvrModel, SvrParams};

use crate::config::{Hyperparameters, InferenceKind};
use crate::error::{Error, Result};
use crate::model::{CellId, GridGeometry, MeasurementStore};

#[derive(Debug, Clone, PartialEq)]
pub enum InferenceStrategy {
    Knn { k: usize },
    Idw { n: usize },
    Svr(SvrParams),
}

impl InferenceStrategy {
    pub fn from_config(kind: InferenceKind, hp: &Hyperparameters) -> Self {
        match kind {
            InferenceKind::Knn => InferenceStrategy::Knn { k: hp.k_knn },
            InferenceKind::Idw => InferenceStrategy::Idw { n: hp.n_idw },
            InferenceKind::Svr => InferenceStrategy::Svr(SvrParams {
                c: hp.svr_c,
                epsilon: hp.svr_epsilon,
                width_km: hp.svr_width_km,
                ..SvrParams::default()
            }),
        }
    }

    /// Estimates each of `targets` from `collected`. SVR trains once and
    /// predicts every target from the same model.
    pub fn estimate_many(
        &self,
        collected: &[(CellId, f64)],
        geom: &GridGeometry,
        targets: &[CellId],
    ) -> Result<Vec<f64>> {
        if collected.is_empty() {
            return Err(Error::Domain("inference needs at least one collected value".into()));
        }
        match self {
            InferenceStrategy::Knn { k } => {
                targets.iter().map(|&t| knn_estimate(collected, geom, *k, t)).collect()
            }
            InferenceStrategy::Idw { n } => {
                targets.iter().map(|&t| idw_estimate(collected, geom, *n, t)).collect()
            }
            InferenceStrategy::Svr(params) => {
                let model = SvrModel::fit_cells(collected, geom, params)?;
                targets
                    .iter()
                    .map(|&t| {
                        let c = geom.cell(t)?;
                        Ok(model.predict([c.x_km, c.y_km]))
                    })
                    .collect()
            }
        }
    }

    pub fn estimate(&self, collected: &[(CellId, f64)], geom: &GridGeometry, target: CellId) -> Result<f64> {
        Ok(self.estimate_many(collected, geom, &[target])?[0])
    }
}

/// Neighbours of `target` among `collected`, nearest first (ties by cell id).
pub(crate) fn nearest<'a>(
    collected: &'a [(CellId, f64)],
    geom: &GridGeometry,
    target: CellId,
) -> Vec<(f64, &'a (CellId, f64))> {
    let mut by_dist: Vec<(f64, &(CellId, f64))> =
        collected.iter().map(|cv| (geom.d(target, cv.0), cv)).collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1 .0.cmp(&b.1 .0)));
    by_dist
}

/// Infers the full IS row for one (attribute, cycle): collected cells keep
/// their collected value, the rest come from `strategy`. With nothing
/// collected the previous cycle's row is carried forward.
pub fn infer_cycle(
    strategy: &InferenceStrategy,
    store: &MeasurementStore,
    geom: &GridGeometry,
    cycle: usize,
    attribute: usize,
) -> Result<Vec<f64>> {
    let collected = store.collected(attribute, cycle);
    if collected.is_empty() {
        return match cycle.checked_sub(1).and_then(|prev| store.is_row(attribute, prev)) {
            Some(row) => Ok(row),
            None => Err(Error::Domain(format!(
                "no collected values for attribute {attribute} at cycle {cycle} and no previous row"
            ))),
        };
    }
    let mut row: Vec<Option<f64>> = vec![None; store.cells()];
    for &(x, v) in &collected {
        row[x] = Some(v);
    }
    let targets: Vec<CellId> = (0..store.cells()).filter(|&x| row[x].is_none()).collect();
    if !targets.is_empty() {
        let est = strategy.estimate_many(&collected, geom, &targets)?;
        for (&x, v) in targets.iter().zip(est) {
            row[x] = Some(v);
        }
    }
    Ok(row.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
}

/// Leave-one-out residuals `|CS - estimate|` at each collected cell, where
/// the estimate comes from the other collected cells. Empty when fewer than
/// two cells were collected.
pub fn holdout_residuals(
    strategy: &InferenceStrategy,
    collected: &[(CellId, f64)],
    geom: &GridGeometry,
) -> Result<Vec<f64>> {
    if collected.len() < 2 {
        return Ok(Vec::new());
    }
    let mut rest = Vec::with_capacity(collected.len() - 1);
    collected
        .iter()
        .enumerate()
        .map(|(i, &(cell, value))| {
            rest.clear();
            rest.extend(collected.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, cv)| *cv));
            Ok((value - strategy.estimate(&rest, geom, cell)?).abs())
        })
        .collect()
}
