use super::nearest;
use crate::error::{Error, Result};
use crate::model::{CellId, GridGeometry};

/// Unweighted mean of the `k` nearest collected values (`k` is clamped to
/// the number of collected cells).
pub fn knn_estimate(collected: &[(CellId, f64)], geom: &GridGeometry, k: usize, target: CellId) -> Result<f64> {
    if collected.is_empty() {
        return Err(Error::Domain("KNN needs at least one collected value".into()));
    }
    geom.cell(target)?;
    let k = k.clamp(1, collected.len());
    let sum: f64 = nearest(collected, geom, target).iter().take(k).map(|(_, cv)| cv.1).sum();
    Ok(sum / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        // target at origin, cells at distance 1, 2, 3 along x
        let g = GridGeometry::from_coords(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]).unwrap();
        let c = [(1, 3.0), (2, 5.0), (3, 100.0)];
        assert_eq!(knn_estimate(&c, &g, 2, 0).unwrap(), 4.0);
        assert_eq!(knn_estimate(&c, &g, 1, 0).unwrap(), 3.0);
        let c = [(1, 1.0), (2, 2.0), (3, 9.0)];
        assert_eq!(knn_estimate(&c, &g, 3, 0).unwrap(), 4.0);
        // clamped
        assert_eq!(knn_estimate(&c, &g, 10, 0).unwrap(), 4.0);
        assert!(knn_estimate(&[], &g, 1, 0).is_err());
    }
}
