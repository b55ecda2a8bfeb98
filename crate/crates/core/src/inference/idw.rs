use super::nearest;
use crate::error::{Error, Result};
use crate::model::{CellId, GridGeometry};

/// Inverse-distance weighted mean over the `n` nearest collected cells, with
/// weights `1/d` (distance exponent 1).
pub fn idw_estimate(collected: &[(CellId, f64)], geom: &GridGeometry, n: usize, target: CellId) -> Result<f64> {
    if collected.is_empty() {
        return Err(Error::Domain("IDW needs at least one collected value".into()));
    }
    geom.cell(target)?;
    let n = n.clamp(1, collected.len());
    let neighbours = nearest(collected, geom, target);
    if let Some((d, cv)) = neighbours.first() {
        if *d == 0.0 {
            return Ok(cv.1);
        }
    }
    let (num, den) = neighbours
        .iter()
        .take(n)
        .fold((0.0, 0.0), |(num, den), (d, cv)| (num + cv.1 / d, den + 1.0 / d));
    Ok(num / den)
}
