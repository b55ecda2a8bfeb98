//! Dataset ingestion (measurement + station CSVs), CSV export, and the
//! synthetic spatio-temporal field generator.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Cell, GridGeometry, MeasurementStore};

const EARTH_RADIUS_KM: f64 = 6371.0088;
/// Largest fraction of missing cycles tolerated per (attribute, cell) series.
const MAX_MISSING_FRACTION: f64 = 0.20;

/// Ground truth over a grid: `truth[a][x][y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub geometry: GridGeometry,
    pub attribute_names: Vec<String>,
    pub truth: Vec<Vec<Vec<f64>>>,
}

impl Dataset {
    pub fn new(geometry: GridGeometry, attribute_names: Vec<String>, truth: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let ds = Self { geometry, attribute_names, truth };
        ds.check()?;
        Ok(ds)
    }

    fn check(&self) -> Result<()> {
        let a = self.attribute_names.len();
        if a == 0 || self.truth.len() != a {
            return Err(Error::Data(format!(
                "{} attribute names but {} truth planes",
                a,
                self.truth.len()
            )));
        }
        let x = self.geometry.len();
        let y = self.cycles();
        if y < 2 {
            return Err(Error::Data(format!("dataset needs at least 2 cycles, found {y}")));
        }
        for plane in &self.truth {
            if plane.len() != x || plane.iter().any(|row| row.len() != y) {
                return Err(Error::Data("truth matrix shape does not match geometry".into()));
            }
            if plane.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Data("truth matrix contains NaN or infinite values".into()));
            }
        }
        Ok(())
    }

    pub fn attributes(&self) -> usize {
        self.attribute_names.len()
    }

    pub fn cells(&self) -> usize {
        self.geometry.len()
    }

    pub fn cycles(&self) -> usize {
        self.truth.first().and_then(|p| p.first()).map_or(0, Vec::len)
    }

    /// Keeps only the first `n` attributes.
    pub fn with_attributes(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.attributes() {
            return Err(Error::Config(format!(
                "cannot select {n} of {} attributes",
                self.attributes()
            )));
        }
        Ok(Self {
            geometry: self.geometry.clone(),
            attribute_names: self.attribute_names[..n].to_vec(),
            truth: self.truth[..n].to_vec(),
        })
    }

    pub fn store(&self) -> Result<MeasurementStore> {
        MeasurementStore::new(&self.truth)
    }

    /// Writes `measurements.csv` and `stations.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut st = csv::Writer::from_path(dir.join("stations.csv"))?;
        st.write_record(["cell_id", "x_km", "y_km"])?;
        for c in self.geometry.cells() {
            st.write_record([c.id.to_string(), c.x_km.to_string(), c.y_km.to_string()])?;
        }
        st.flush()?;
        let mut ms = csv::Writer::from_path(dir.join("measurements.csv"))?;
        ms.write_record(["cycle", "cell_id", "attribute", "value"])?;
        for y in 0..self.cycles() {
            for x in 0..self.cells() {
                for (a, name) in self.attribute_names.iter().enumerate() {
                    ms.write_record([y.to_string(), x.to_string(), name.clone(), self.truth[a][x][y].to_string()])?;
                }
            }
        }
        ms.flush()?;
        Ok(())
    }
}

/// What ingestion had to repair.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    /// Rows that overwrote an earlier row with the same (cycle, cell, attribute).
    pub duplicate_rows: usize,
    /// Entries filled by linear interpolation over cycles.
    pub filled_entries: usize,
}

#[derive(Debug, Deserialize)]
struct MeasurementRow {
    cycle: usize,
    cell_id: usize,
    attribute: String,
    value: String,
}

/// Reads a stations CSV with either `cell_id,x_km,y_km` or `cell_id,lat,lon`
/// columns. Lat/lon are projected equirectangularly about the centroid.
pub fn load_stations(path: &Path) -> Result<GridGeometry> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let id_col = col("cell_id").ok_or_else(|| Error::Data("stations file lacks a cell_id column".into()))?;
    let (a_col, b_col, geographic) = match (col("x_km"), col("y_km"), col("lat"), col("lon")) {
        (Some(xc), Some(yc), _, _) => (xc, yc, false),
        (_, _, Some(lat), Some(lon)) => (lat, lon, true),
        _ => {
            return Err(Error::Data(
                "stations header must be cell_id,x_km,y_km or cell_id,lat,lon".into(),
            ))
        }
    };
    let mut raw = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| -> Result<&str> {
            rec.get(i)
                .ok_or_else(|| Error::Data(format!("stations row {} is short", line + 2)))
        };
        let id: usize = field(id_col)?
            .parse()
            .map_err(|e| Error::Data(format!("stations row {}: bad cell_id: {e}", line + 2)))?;
        let a: f64 = field(a_col)?
            .parse()
            .map_err(|e| Error::Data(format!("stations row {}: {e}", line + 2)))?;
        let b: f64 = field(b_col)?
            .parse()
            .map_err(|e| Error::Data(format!("stations row {}: {e}", line + 2)))?;
        raw.push((id, a, b));
    }
    let cells = if geographic {
        let n = raw.len().max(1) as f64;
        let lat0 = raw.iter().map(|r| r.1).sum::<f64>() / n;
        let lon0 = raw.iter().map(|r| r.2).sum::<f64>() / n;
        let cos0 = lat0.to_radians().cos();
        raw.into_iter()
            .map(|(id, lat, lon)| Cell {
                id,
                x_km: EARTH_RADIUS_KM * (lon - lon0).to_radians() * cos0,
                y_km: EARTH_RADIUS_KM * (lat - lat0).to_radians(),
            })
            .collect()
    } else {
        raw.into_iter().map(|(id, x_km, y_km)| Cell { id, x_km, y_km }).collect()
    };
    GridGeometry::new(cells).map_err(|e| Error::Data(e.to_string()))
}

/// Loads a dataset from a long-format measurements CSV and a stations CSV.
///
/// Attributes are ordered by first appearance. Missing entries are filled by
/// linear interpolation in time (never in space); series with more than 20%
/// of their cycles missing are rejected.
pub fn load_dataset(measurements: &Path, stations: &Path) -> Result<(Dataset, IngestReport)> {
    let geometry = load_stations(stations)?;
    let x_count = geometry.len();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(measurements)?;
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut values: HashMap<(usize, usize, usize), f64> = HashMap::new();
    let mut report = IngestReport::default();
    let mut max_cycle = 0;
    for (line, row) in rdr.deserialize::<MeasurementRow>().enumerate() {
        let row = row?;
        if row.cell_id >= x_count {
            return Err(Error::Data(format!(
                "measurements row {}: unknown cell_id {}",
                line + 2,
                row.cell_id
            )));
        }
        let a = *index.entry(row.attribute.clone()).or_insert_with(|| {
            names.push(row.attribute.clone());
            names.len() - 1
        });
        max_cycle = max_cycle.max(row.cycle);
        let parsed = match row.value.as_str() {
            "" | "NA" | "NaN" | "nan" => None,
            s => Some(s.parse::<f64>().map_err(|e| {
                Error::Data(format!("measurements row {}: bad value '{s}': {e}", line + 2))
            })?),
        };
        let key = (a, row.cell_id, row.cycle);
        match parsed.filter(|v| v.is_finite()) {
            Some(v) => {
                if values.insert(key, v).is_some() {
                    report.duplicate_rows += 1;
                }
            }
            None => {
                if values.remove(&key).is_some() {
                    report.duplicate_rows += 1;
                }
            }
        }
    }
    if names.is_empty() {
        return Err(Error::Data("measurements file has no rows".into()));
    }
    if report.duplicate_rows > 0 {
        log::warn!("{} duplicate measurement rows (last row wins)", report.duplicate_rows);
    }
    let y_count = max_cycle + 1;
    let mut truth = vec![vec![vec![f64::NAN; y_count]; x_count]; names.len()];
    for (&(a, x, y), &v) in &values {
        truth[a][x][y] = v;
    }
    for (a, plane) in truth.iter_mut().enumerate() {
        for (x, series) in plane.iter_mut().enumerate() {
            let missing = series.iter().filter(|v| v.is_nan()).count();
            if missing as f64 > MAX_MISSING_FRACTION * y_count as f64 {
                return Err(Error::Data(format!(
                    "attribute '{}' at cell {x} is missing {missing} of {y_count} cycles",
                    names[a]
                )));
            }
            report.filled_entries += fill_linear(series);
        }
    }
    if report.filled_entries > 0 {
        log::info!("filled {} missing entries by interpolation in time", report.filled_entries);
    }
    let ds = Dataset::new(geometry, names, truth)?;
    Ok((ds, report))
}

/// Linear interpolation over NaN gaps; leading/trailing gaps copy the nearest value.
fn fill_linear(series: &mut [f64]) -> usize {
    let known: Vec<usize> = (0..series.len()).filter(|&i| !series[i].is_nan()).collect();
    let (Some(&first), Some(&last)) = (known.first(), known.last()) else {
        return 0;
    };
    let mut filled = 0;
    for i in 0..first {
        series[i] = series[first];
        filled += 1;
    }
    for i in last + 1..series.len() {
        series[i] = series[last];
        filled += 1;
    }
    for w in known.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        for i in lo + 1..hi {
            let t = (i - lo) as f64 / (hi - lo) as f64;
            series[i] = series[lo] + t * (series[hi] - series[lo]);
            filled += 1;
        }
    }
    filled
}

/// Parameters of the synthetic field generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub cells: usize,
    pub cycles: usize,
    pub attributes: usize,
    /// Side of the square region cells are scattered over.
    pub extent_km: f64,
    pub spatial_length_scale_km: f64,
    /// AR(1) coefficient of the latent series, in [0, 1).
    pub temporal_correlation: f64,
    /// Target Pearson correlation between attribute pairs, in [-1, 1].
    pub cross_attribute_correlation: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            cells: 24,
            cycles: 100,
            attributes: 4,
            extent_km: 100.0,
            spatial_length_scale_km: 25.0,
            temporal_correlation: 0.8,
            cross_attribute_correlation: 0.6,
            noise_sd: 0.1,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.cells < 2 {
            return bad(format!("synthetic grid needs X >= 2, got {}", self.cells));
        }
        if self.cycles < 2 || self.attributes == 0 {
            return bad("synthetic dataset needs Y >= 2 and A >= 1".into());
        }
        if !(self.extent_km > 0.0 && self.spatial_length_scale_km > 0.0) {
            return bad("extent_km and spatial_length_scale_km must be > 0".into());
        }
        if !(0.0..1.0).contains(&self.temporal_correlation) {
            return bad(format!(
                "temporal_correlation must lie in [0, 1), got {}",
                self.temporal_correlation
            ));
        }
        if !(-1.0..=1.0).contains(&self.cross_attribute_correlation) {
            return bad(format!(
                "cross_attribute_correlation must lie in [-1, 1], got {}",
                self.cross_attribute_correlation
            ));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise_sd must be >= 0, got {}", self.noise_sd));
        }
        Ok(())
    }
}

/// Draws a stationary AR(1) series of unit variance.
fn ar1_series(rng: &mut ChaCha8Rng, phi: f64, len: usize) -> Vec<f64> {
    let innov = (1.0 - phi * phi).sqrt();
    let mut out = Vec::with_capacity(len);
    let mut z: f64 = rng.sample(StandardNormal);
    out.push(z);
    for _ in 1..len {
        let e: f64 = rng.sample(StandardNormal);
        z = phi * z + innov * e;
        out.push(z);
    }
    out
}

/// Generates a synthetic dataset; a pure function of `cfg`.
///
/// Each attribute mixes a shared latent AR(1) field (loading `sqrt(|rho|)`)
/// with its own latent field, both smoothed over space by a Gaussian kernel.
/// Attribute 0 loads positively on the shared factor and the rest load with
/// the sign of `rho`, so pairs involving attribute 0 have correlation `rho`.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    cfg.validate()?;
    let (nx, ny, na) = (cfg.cells, cfg.cycles, cfg.attributes);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let coords: Vec<(f64, f64)> = (0..nx)
        .map(|_| (rng.random::<f64>() * cfg.extent_km, rng.random::<f64>() * cfg.extent_km))
        .collect();
    let geometry = GridGeometry::from_coords(&coords)?;

    let ls2 = 2.0 * cfg.spatial_length_scale_km.powi(2);
    let kernel: Vec<Vec<f64>> = (0..nx)
        .map(|i| {
            let row: Vec<f64> = (0..nx).map(|j| (-geometry.d(i, j).powi(2) / ls2).exp()).collect();
            let norm = row.iter().map(|k| k * k).sum::<f64>().sqrt();
            row.into_iter().map(|k| k / norm).collect()
        })
        .collect();

    let phi = cfg.temporal_correlation;
    let rho = cfg.cross_attribute_correlation;
    let shared: Vec<Vec<f64>> = (0..nx).map(|_| ar1_series(&mut rng, phi, ny)).collect();
    let own_loading = (1.0 - rho.abs()).sqrt();

    let mut truth = Vec::with_capacity(na);
    for a in 0..na {
        let own: Vec<Vec<f64>> = (0..nx).map(|_| ar1_series(&mut rng, phi, ny)).collect();
        let shared_loading = if a == 0 { rho.abs().sqrt() } else { rho.signum() * rho.abs().sqrt() };
        let latent: Vec<Vec<f64>> = (0..nx)
            .map(|j| (0..ny).map(|t| shared_loading * shared[j][t] + own_loading * own[j][t]).collect())
            .collect();
        // Attributes get distinct offsets and units.
        let scale = 1.0 + 2.0 * a as f64;
        let offset = 10.0 * (a as f64 + 1.0);
        let mut plane = vec![vec![0.0; ny]; nx];
        for (x, row) in plane.iter_mut().enumerate() {
            for (t, v) in row.iter_mut().enumerate() {
                let mixed: f64 = (0..nx).map(|j| kernel[x][j] * latent[j][t]).sum();
                let noise: f64 = if cfg.noise_sd > 0.0 { cfg.noise_sd * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
                *v = offset + scale * (mixed + noise);
            }
        }
        truth.push(plane);
    }
    let names = (0..na).map(|a| format!("attr{a}")).collect();
    Dataset::new(geometry, names, truth)
}
