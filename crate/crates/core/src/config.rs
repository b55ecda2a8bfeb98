//! Run configuration: allocation scheme, inference strategy and hyperparameters.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "QCO-TA")]
    QcoTa,
    #[serde(rename = "OO-MTA")]
    OoMta,
    #[serde(rename = "GPS-TA")]
    GpsTa,
    #[serde(rename = "EWA-TA")]
    EwaTa,
    #[serde(rename = "UNS-TA")]
    UnsTa,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::QcoTa, Scheme::OoMta, Scheme::GpsTa, Scheme::EwaTa, Scheme::UnsTa];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::QcoTa => "QCO-TA",
            Scheme::OoMta => "OO-MTA",
            Scheme::GpsTa => "GPS-TA",
            Scheme::EwaTa => "EWA-TA",
            Scheme::UnsTa => "UNS-TA",
        }
    }

    /// Whether the scheme learns attribute weights online.
    pub fn learns_weights(self) -> bool {
        matches!(self, Scheme::QcoTa | Scheme::OoMta)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown scheme '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InferenceKind {
    #[serde(rename = "KNN")]
    Knn,
    #[serde(rename = "IDW")]
    Idw,
    #[serde(rename = "SVR")]
    Svr,
}

impl InferenceKind {
    pub const ALL: [InferenceKind; 3] = [InferenceKind::Knn, InferenceKind::Idw, InferenceKind::Svr];

    pub fn name(self) -> &'static str {
        match self {
            InferenceKind::Knn => "KNN",
            InferenceKind::Idw => "IDW",
            InferenceKind::Svr => "SVR",
        }
    }
}

impl fmt::Display for InferenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InferenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InferenceKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown inference algorithm '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparameters {
    /// Temporal-entropy weight in the priority blend.
    pub alpha_te: f64,
    /// Spatial-mutual-information weight in the priority blend.
    pub alpha_smi: f64,
    /// Learning rate of the attribute-weight update.
    pub eta: f64,
    /// Quantile level of the loss estimate, in (0.5, 1).
    pub delta: f64,
    /// Scale of the travel reward.
    pub gamma: f64,
    /// Discount of the value iteration, in (0, 1).
    pub beta: f64,
    pub theta_conv: f64,
    pub k_knn: usize,
    pub n_idw: usize,
    /// Distance floor for the travel reward; defaults to half the smallest
    /// nonzero inter-cell distance.
    pub d_floor_km: Option<f64>,
    pub cost_per_km: f64,
    /// Number of trailing cycles used for temporal entropy; full history when absent.
    pub entropy_window: Option<usize>,
    pub sigma_floor: f64,
    pub svr_c: f64,
    pub svr_epsilon: f64,
    /// RBF width; median pairwise distance of the training cells when absent.
    pub svr_width_km: Option<f64>,
    /// Min-max normalize TE and SMI across cells before blending.
    pub normalize_priorities: bool,
    /// Use the bare `gamma / distance` reward in value iteration.
    pub literal_bellman: bool,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            alpha_te: 0.5,
            alpha_smi: 0.5,
            eta: 0.5,
            delta: 0.95,
            gamma: 1.0,
            beta: 0.5,
            theta_conv: 1e-4,
            k_knn: 3,
            n_idw: 3,
            d_floor_km: None,
            cost_per_km: 1.0,
            entropy_window: None,
            sigma_floor: 1e-6,
            svr_c: 10.0,
            svr_epsilon: 0.1,
            svr_width_km: None,
            normalize_priorities: true,
            literal_bellman: false,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.alpha_te >= 0.0 && self.alpha_smi >= 0.0) {
            return bad("alpha_te and alpha_smi must be >= 0".into());
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be >= 0, got {}", self.eta));
        }
        if !(self.delta > 0.5 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0.5, 1), got {}", self.delta));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad(format!("beta must lie in (0, 1), got {}", self.beta));
        }
        if !(self.theta_conv > 0.0) {
            return bad(format!("theta_conv must be > 0, got {}", self.theta_conv));
        }
        if self.k_knn == 0 || self.n_idw == 0 {
            return bad("k_knn and n_idw must be >= 1".into());
        }
        if let Some(d) = self.d_floor_km {
            if !(d > 0.0 && d.is_finite()) {
                return bad(format!("d_floor_km must be > 0, got {d}"));
            }
        }
        if !(self.cost_per_km > 0.0 && self.cost_per_km.is_finite()) {
            return bad(format!("cost_per_km must be > 0, got {}", self.cost_per_km));
        }
        if self.entropy_window == Some(0) {
            return bad("entropy_window must be >= 1".into());
        }
        if !(self.sigma_floor > 0.0) {
            return bad("sigma_floor must be > 0".into());
        }
        if !(self.svr_c > 0.0 && self.svr_epsilon >= 0.0) {
            return bad("svr_c must be > 0 and svr_epsilon >= 0".into());
        }
        if let Some(w) = self.svr_width_km {
            if !(w > 0.0) {
                return bad(format!("svr_width_km must be > 0, got {w}"));
            }
        }
        Ok(())
    }
}

/// One simulation run. JSON keys match the field names below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scheme: Scheme,
    pub inference: InferenceKind,
    #[serde(rename = "P")]
    pub participants: usize,
    /// Number of attributes used, taken from the front of the dataset's list.
    #[serde(rename = "A_used")]
    pub attributes_used: usize,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn new(scheme: Scheme, inference: InferenceKind, participants: usize, attributes_used: usize) -> Self {
        Self {
            scheme,
            inference,
            participants,
            attributes_used,
            hyperparameters: Hyperparameters::default(),
            seed: 0,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Checks the config against a dataset of `cells` cells, `attributes`
    /// attributes and `cycles` cycles.
    pub fn validate(&self, cells: usize, attributes: usize, cycles: usize) -> Result<()> {
        self.hyperparameters.validate()?;
        if self.participants == 0 || self.participants >= cells {
            return Err(Error::Config(format!(
                "P must satisfy 1 <= P < X (P = {}, X = {cells})",
                self.participants
            )));
        }
        if self.attributes_used == 0 || self.attributes_used > attributes {
            return Err(Error::Config(format!(
                "A_used = {} but the dataset has {attributes} attributes",
                self.attributes_used
            )));
        }
        if cycles < 2 {
            return Err(Error::Config(format!("need at least 2 cycles, dataset has {cycles}")));
        }
        if self.scheme == Scheme::GpsTa && self.participants < self.attributes_used {
            return Err(Error::Config(format!(
                "GPS-TA needs P >= A_used (P = {}, A_used = {})",
                self.participants, self.attributes_used
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let cfg = RunConfig::from_json_str(
            r#"{"scheme": "QCO-TA", "inference": "KNN", "P": 8, "A_used": 2}"#,
        )
        .unwrap();
        assert_eq!(cfg.scheme, Scheme::QcoTa);
        assert_eq!(cfg.participants, 8);
        assert_eq!(cfg.hyperparameters, Hyperparameters::default());
        cfg.validate(24, 4, 10).unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_json_str(
            r#"{"scheme": "QCO-TA", "inference": "KNN", "P": 8, "A_used": 2, "bogus": 1}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = RunConfig::from_json_str(
            r#"{"scheme": "QCO-TA", "inference": "KNN", "P": 8, "A_used": 2,
                "hyperparameters": {"eta": 0.1, "etaa": 2}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn validation_bounds() {
        let mut cfg = RunConfig::new(Scheme::QcoTa, InferenceKind::Idw, 24, 2);
        assert!(cfg.validate(24, 4, 10).is_err());
        cfg.participants = 8;
        cfg.hyperparameters.delta = 0.5;
        assert!(cfg.validate(24, 4, 10).is_err());
        cfg.hyperparameters.delta = 0.95;
        cfg.hyperparameters.beta = 1.0;
        assert!(cfg.validate(24, 4, 10).is_err());
        cfg.hyperparameters.beta = 0.5;
        cfg.attributes_used = 5;
        assert!(cfg.validate(24, 4, 10).is_err());
        cfg.attributes_used = 4;
        cfg.scheme = Scheme::GpsTa;
        cfg.participants = 3;
        assert!(cfg.validate(24, 4, 10).is_err());
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("nope".parse::<InferenceKind>().is_err());
    }
}
