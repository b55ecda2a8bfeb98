//! Experiment reports: summary CSV, JSON traces, and the sweep grid runner.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{Hyperparameters, InferenceKind, RunConfig, Scheme};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::sim::{run_experiment, ExperimentResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scheme: Scheme,
    pub inference: InferenceKind,
    pub participants: usize,
    pub attributes: usize,
    pub epsilon: f64,
    pub phi_km: f64,
    pub seed: u64,
    pub repeats: usize,
    pub epsilon_sd: f64,
    pub phi_sd: f64,
}

impl From<&ExperimentResult> for ReportRow {
    fn from(r: &ExperimentResult) -> Self {
        Self {
            scheme: r.config.scheme,
            inference: r.config.inference,
            participants: r.config.participants,
            attributes: r.config.attributes_used,
            epsilon: r.epsilon_mean,
            phi_km: r.phi_mean,
            seed: r.config.seed,
            repeats: r.runs.len(),
            epsilon_sd: r.epsilon_sd,
            phi_sd: r.phi_sd,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub results: Vec<ExperimentResult>,
}

impl ExperimentReport {
    pub fn rows(&self) -> Vec<ReportRow> {
        self.results.iter().map(ReportRow::from).collect()
    }

    pub fn find(&self, scheme: Scheme, inference: InferenceKind, p: usize, a: usize) -> Option<&ExperimentResult> {
        self.results.iter().find(|r| {
            r.config.scheme == scheme
                && r.config.inference == inference
                && r.config.participants == p
                && r.config.attributes_used == a
        })
    }

    /// Summary CSV: `scheme,inference,participants,attributes,epsilon,phi_km,seed,repeats,epsilon_sd,phi_sd`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Runtime(e.to_string()))
    }

    /// Weight/loss trajectories in long form: `scheme,inference,participants,attributes,seed,cycle,attribute,weight,loss`.
    pub fn write_weight_trace<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "scheme", "inference", "participants", "attributes", "seed", "cycle", "attribute", "weight", "loss",
        ])?;
        for r in &self.results {
            for run in &r.runs {
                for t in &run.traces {
                    for (a, wa) in t.weights.iter().enumerate() {
                        w.write_record([
                            r.config.scheme.to_string(),
                            r.config.inference.to_string(),
                            r.config.participants.to_string(),
                            r.config.attributes_used.to_string(),
                            run.seed.to_string(),
                            t.cycle.to_string(),
                            a.to_string(),
                            wa.to_string(),
                            t.losses[a].to_string(),
                        ])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Pivot of one metric: one row per (scheme, P), one column per
    /// (attribute count, inference) pair, one table per metric.
    pub fn write_table<W: Write>(&self, out: W, metric: Metric) -> Result<()> {
        let mut cols: Vec<(usize, InferenceKind)> = Vec::new();
        let mut rows: Vec<(Scheme, usize)> = Vec::new();
        for r in &self.results {
            let c = (r.config.attributes_used, r.config.inference);
            if !cols.contains(&c) {
                cols.push(c);
            }
            let k = (r.config.scheme, r.config.participants);
            if !rows.contains(&k) {
                rows.push(k);
            }
        }
        cols.sort();
        rows.sort();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["scheme".to_string(), "participants".to_string()];
        header.extend(cols.iter().map(|(a, i)| format!("A{a}_{i}")));
        w.write_record(&header)?;
        for (scheme, p) in rows {
            let mut rec = vec![scheme.to_string(), p.to_string()];
            for &(a, inf) in &cols {
                rec.push(self.find(scheme, inf, p, a).map_or(String::new(), |r| match metric {
                    Metric::Epsilon => format!("{:.6}", r.epsilon_mean),
                    Metric::Phi => format!("{:.3}", r.phi_mean),
                }));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `report.csv`, `traces.json`, `weights.csv` and, for grids,
    /// `table_epsilon.csv` / `table_phi.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path, tables: bool) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join("report.csv"))?)?;
        self.write_weight_trace(std::fs::File::create(dir.join("weights.csv"))?)?;
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Runtime(e.to_string()))?;
        std::fs::write(dir.join("traces.json"), json)?;
        if tables {
            self.write_table(std::fs::File::create(dir.join("table_epsilon.csv"))?, Metric::Epsilon)?;
            self.write_table(std::fs::File::create(dir.join("table_phi.csv"))?, Metric::Phi)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Epsilon,
    Phi,
}

/// A grid of configurations sharing hyperparameters and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub schemes: Vec<Scheme>,
    pub inference: Vec<InferenceKind>,
    pub participants: Vec<usize>,
    pub attributes: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub hyperparameters: Hyperparameters,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            schemes: Scheme::ALL.to_vec(),
            inference: InferenceKind::ALL.to_vec(),
            participants: vec![8, 10, 12, 14],
            attributes: vec![2, 3, 4],
            repeats: 1,
            seed: 0,
            hyperparameters: Hyperparameters::default(),
        }
    }
}

impl SweepConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Every configuration of the grid, scheme-major.
    pub fn configs(&self) -> Vec<RunConfig> {
        let mut out = Vec::new();
        for &scheme in &self.schemes {
            for &p in &self.participants {
                for &a in &self.attributes {
                    for &inference in &self.inference {
                        out.push(RunConfig {
                            scheme,
                            inference,
                            participants: p,
                            attributes_used: a,
                            hyperparameters: self.hyperparameters.clone(),
                            seed: self.seed,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Runs every grid configuration; all configs are validated before any runs.
pub fn run_sweep(sweep: &SweepConfig, dataset: &Dataset) -> Result<ExperimentReport> {
    let configs = sweep.configs();
    if configs.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    for cfg in &configs {
        cfg.validate(dataset.cells(), dataset.attributes(), dataset.cycles())?;
    }
    let results = configs
        .iter()
        .map(|cfg| run_experiment(cfg, dataset, sweep.repeats))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport { results })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig};

    #[test]
    fn default_grid_has_36_rows_per_scheme() {
        let s = SweepConfig::default();
        let n = s.configs().iter().filter(|c| c.scheme == Scheme::QcoTa).count();
        assert_eq!(n, 36);
    }

    #[test]
    fn csv_has_expected_header_and_tables_pivot() {
        let ds = generate_synthetic(&SyntheticConfig { cells: 7, cycles: 6, attributes: 2, ..Default::default() })
            .unwrap();
        let sweep = SweepConfig {
            schemes: vec![Scheme::QcoTa, Scheme::UnsTa],
            inference: vec![InferenceKind::Knn],
            participants: vec![2, 3],
            attributes: vec![2],
            repeats: 3,
            ..Default::default()
        };
        let rep = run_sweep(&sweep, &ds).unwrap();
        let csv = rep.to_csv_string().unwrap();
        assert!(csv.starts_with("scheme,inference,participants,attributes,epsilon,phi_km,seed,"));
        assert_eq!(csv.lines().count(), 5);
        let mut t = Vec::new();
        rep.write_table(&mut t, Metric::Phi).unwrap();
        let t = String::from_utf8(t).unwrap();
        assert!(t.starts_with("scheme,participants,A2_KNN\n"));
        assert_eq!(t.lines().count(), 5);
        for r in &rep.results {
            let eps: Vec<f64> = r.runs.iter().map(|x| x.epsilon).collect();
            let lo = eps.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = eps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(r.epsilon_mean >= lo - 1e-12 && r.epsilon_mean <= hi + 1e-12);
            assert!(r.epsilon_sd > 0.0);
        }
    }

    #[test]
    fn invalid_grid_fails_up_front() {
        let ds = generate_synthetic(&SyntheticConfig { cells: 5, cycles: 4, attributes: 2, ..Default::default() })
            .unwrap();
        let sweep = SweepConfig { participants: vec![2, 9], ..Default::default() };
        assert!(matches!(run_sweep(&sweep, &ds), Err(Error::Config(_))));
    }
}
