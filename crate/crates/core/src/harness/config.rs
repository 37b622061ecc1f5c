use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CylinderConvention;
use crate::limit::ShiftConvention;
use crate::mesh::MeshOptions;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshParams {
    pub target_edge: f64,
    pub loop_segments: usize,
    #[serde(default = "default_annulus_rings")]
    pub annulus_rings: usize,
}

fn default_annulus_rings() -> usize {
    MeshOptions::default().annulus_rings
}

impl Default for MeshParams {
    fn default() -> Self {
        let m = MeshOptions::default();
        Self { target_edge: 0.08, loop_segments: 16, annulus_rings: m.annulus_rings }
    }
}

impl MeshParams {
    pub fn options(&self) -> MeshOptions {
        MeshOptions {
            target_edge: self.target_edge,
            loop_segments: self.loop_segments,
            annulus_rings: self.annulus_rings,
            ..MeshOptions::default()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub report: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

/// Parameters of an h-sweep. Field names are the keys of the TOML config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub d: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub eta_schedule: Vec<f64>,
    pub theta: f64,
    pub delta0: f64,
    pub delta1: f64,
    #[serde(default)]
    pub convention: ShiftConvention,
    pub k: usize,
    #[serde(default)]
    pub mesh_params: MeshParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_paths: OutputPaths,
    /// `ε_h = η_h^p`.
    #[serde(default = "default_exponent")]
    pub epsilon_exponent: f64,
    #[serde(default)]
    pub cylinder: CylinderConvention,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Highest harmonic degree of the Γ-check test functions.
    #[serde(default = "default_test_degree")]
    pub test_degree: usize,
}

fn default_exponent() -> f64 {
    0.5
}

fn default_tol() -> f64 {
    1e-8
}

fn default_test_degree() -> usize {
    2
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            d: 2,
            alpha: 4.0,
            lambda: 1.0,
            eta_schedule: vec![0.4, 0.3, 0.2],
            theta: 3.0,
            delta0: 0.4,
            delta1: 0.8,
            convention: ShiftConvention::Form,
            k: 9,
            mesh_params: MeshParams::default(),
            seed: 0,
            output_paths: OutputPaths::default(),
            epsilon_exponent: default_exponent(),
            cylinder: CylinderConvention::Section3,
            tol: default_tol(),
            test_degree: default_test_degree(),
        }
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(format!("bad sweep config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.d != 2 {
            return Err(Error::Contract(format!("finite element sweeps run on S^2, got d = {}", self.d)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Domain(format!("alpha = {} must be finite and >= 0", self.alpha)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Domain(format!("lambda = {} must be positive", self.lambda)));
        }
        if self.eta_schedule.is_empty() || self.eta_schedule.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(Error::Domain("eta_schedule entries must lie in (0, 1)".into()));
        }
        if self.eta_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Domain("eta_schedule must be strictly decreasing".into()));
        }
        if !(self.theta >= 1.0 && 0.0 < self.delta0 && self.delta0 < self.delta1 && self.delta1 < 1.0) {
            return Err(Error::Domain("need theta >= 1 and 0 < delta0 < delta1 < 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Contract("k must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Contract("tol must be positive".into()));
        }
        super::epsilon_schedule(0.5, self.epsilon_exponent)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_defaults() {
        let cfg = SweepConfig::default();
        assert_eq!(SweepConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
        let minimal = "d = 2\nalpha = 4.0\nlambda = 1.0\neta_schedule = [0.4, 0.3]\ntheta = 3.0\n\
                       delta0 = 0.4\ndelta1 = 0.8\nk = 9\nconvention = \"paper\"\n";
        let parsed = SweepConfig::from_toml(minimal).unwrap();
        assert_eq!(parsed.convention, ShiftConvention::Paper);
        assert_eq!(parsed.mesh_params, MeshParams::default());
    }

    #[test]
    fn invalid_configs() {
        let bad = |f: fn(&mut SweepConfig)| {
            let mut c = SweepConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.eta_schedule = vec![0.2, 0.3]));
        assert!(bad(|c| c.alpha = -1.0));
        assert!(bad(|c| c.lambda = 0.0));
        assert!(bad(|c| c.d = 3));
        assert!(bad(|c| c.epsilon_exponent = 1.0));
        assert!(SweepConfig::from_toml("alpha = 1.0\nbogus = 3\n").is_err());
    }
}
