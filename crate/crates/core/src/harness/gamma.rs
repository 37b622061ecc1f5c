//! Numerical Γ-convergence check along a schedule.
//!
//! All functionals are compared as Rayleigh quotients
//! `F(u)/‖u‖² = (D(u) + λ‖u‖² + coupling) / ‖u‖²`, which removes the
//! volume difference between `M_h` and `S²`.

use serde::{Deserialize, Serialize};

use super::sweep::{build_level, Level};
use super::SweepConfig;
use crate::eigen::{sector_eigenpairs, EigenOptions, HarmonicExtender, Parity};
use crate::error::{Error, Result};
use crate::geometry::{geodesic_distance3, Vec3};
use crate::harmonics::SphericalHarmonics;
use crate::sparse::{dot, CsrMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestGap {
    pub ell: usize,
    pub m: i64,
    pub parity: Parity,
    /// `F_h(Π_h u)/‖Π_h u‖² - F(u)/‖u‖²`.
    pub recovery_gap: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GammaLevel {
    pub eta: f64,
    pub tests: Vec<TestGap>,
    /// Largest recovery gap over the test functions.
    pub max_recovery_gap: f64,
    /// Largest `F(P u) - F_h(u)` over the computed degree-1 odd and degree-2
    /// even eigenfunctions `u`, with `P` the projection of the extension
    /// onto the limit eigenspace.
    pub lower_gap: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaReport {
    pub levels: Vec<GammaLevel>,
    /// `|max_recovery_gap|` decreases along the schedule.
    pub recovery_shrinks: bool,
    /// `|lower_gap|` decreases along the schedule.
    pub lower_shrinks: bool,
}

impl GammaReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("# format: 1\neta,ell,m,parity,recovery_gap,max_recovery_gap,lower_gap,error\n");
        for l in &self.levels {
            if l.tests.is_empty() {
                s.push_str(&format!(
                    "{},,,,,,,{}\n",
                    l.eta,
                    l.error.as_deref().unwrap_or("").replace([',', '\n'], " ")
                ));
            }
            for t in &l.tests {
                s.push_str(&format!(
                    "{},{},{},{},{:.10e},{:.10e},{:.10e},\n",
                    l.eta,
                    t.ell,
                    t.m,
                    t.parity.label(),
                    t.recovery_gap,
                    l.max_recovery_gap,
                    l.lower_gap
                ));
            }
        }
        s
    }
}

/// Capacitary cutoff: 1 on the hole circles, 0 beyond geodesic distance `η`
/// from every cap center, logarithmic in between.
fn cutoff(p: &Vec3, centers: &[Vec3], r: f64, eta: f64) -> f64 {
    let theta = centers.iter().map(|c| geodesic_distance3(c, p)).fold(f64::INFINITY, f64::min);
    if theta >= eta {
        return 0.0;
    }
    let outer = (0.5 * eta).tan();
    let w = (outer / (0.5 * theta).tan()).ln() / (outer / (0.5 * r).tan()).ln();
    w.clamp(0.0, 1.0)
}

fn rayleigh(k: &CsrMatrix, b: &CsrMatrix, lambda: f64, v: &[f64]) -> f64 {
    let m = b.quadratic_form(v);
    (k.quadratic_form(v) + lambda * m) / m
}

/// `B`-orthogonal projection of `u` onto `span(basis)`.
fn project(u: &[f64], basis: &[Vec<f64>], b: &CsrMatrix) -> Result<Vec<f64>> {
    let bb: Vec<Vec<f64>> = basis.iter().map(|v| b.mul_vec(v)).collect();
    let g = nalgebra::DMatrix::from_fn(basis.len(), basis.len(), |i, j| dot(&basis[i], &bb[j]));
    let rhs = nalgebra::DVector::from_iterator(basis.len(), bb.iter().map(|bv| dot(bv, u)));
    let c = g.cholesky().ok_or_else(|| Error::Contract("projection basis is degenerate".into()))?.solve(&rhs);
    let mut out = vec![0.0; u.len()];
    for (ci, v) in c.iter().zip(basis) {
        out.iter_mut().zip(v).for_each(|(o, x)| *o += ci * x);
    }
    Ok(out)
}

fn check_level(cfg: &SweepConfig, level: &Level) -> Result<GammaLevel> {
    let s = cfg.convention.shift(cfg.alpha, cfg.d);
    let basis = SphericalHarmonics::new(cfg.test_degree.max(2));
    let mesh = &level.pair.holed;
    let forms = &level.forms;
    let centers = level.manifold.cap_centers();
    let values: Vec<Vec<f64>> = mesh.vertices.iter().map(|p| basis.eval(p)).collect();

    let mut tests = Vec::new();
    for idx in 0..(cfg.test_degree + 1).pow(2) {
        let (ell, m) = SphericalHarmonics::degree_order(idx);
        let parity = Parity::of_degree(ell);
        let v: Vec<f64> = mesh
            .vertices
            .iter()
            .zip(&values)
            .map(|(p, y)| {
                let damp = if parity == Parity::Odd && !centers.is_empty() {
                    1.0 - cutoff(p, &centers, level.r_h, level.eta)
                } else {
                    1.0
                };
                y[idx] * damp
            })
            .collect();
        let vd = forms.reduction.restrict(&v);
        let discrete = rayleigh(&forms.energy_matrix(), &forms.mass, cfg.lambda, &vd);
        let limit = (ell * (ell + 1)) as f64 + cfg.lambda + if parity == Parity::Odd { s } else { 0.0 };
        tests.push(TestGap { ell, m, parity, recovery_gap: discrete - limit });
    }
    let max_recovery_gap = tests.iter().map(|t| t.recovery_gap).fold(f64::NEG_INFINITY, f64::max);

    // Lower-bound direction on the degree-1 odd and degree-2 even clusters.
    let opts = EigenOptions { tol: cfg.tol, seed: cfg.seed, ..EigenOptions::default() };
    let odd = sector_eigenpairs(forms, Parity::Odd, 3, &opts)?;
    let even = sector_eigenpairs(forms, Parity::Even, 6, &opts)?;
    let extender = HarmonicExtender::new(&level.pair, &level.manifold.metric())?;
    let full_values: Vec<Vec<f64>> = level.pair.full.vertices.iter().map(|p| basis.eval(p)).collect();
    let harmonic = |ell: usize| -> Vec<Vec<f64>> {
        (ell * ell..(ell + 1) * (ell + 1)).map(|i| full_values.iter().map(|y| y[i]).collect()).collect()
    };
    let mut lower_gap = f64::NEG_INFINITY;
    let clusters = [(1usize, &odd, 0..3), (2usize, &even, 1..6)];
    for (ell, res, range) in clusters {
        let span = harmonic(ell);
        let limit_rq = (ell * (ell + 1)) as f64 + cfg.lambda + if ell % 2 == 1 { s } else { 0.0 };
        for i in range {
            let ext = extender.extend(&forms.reduction.expand(&res.eigenvectors[i]))?;
            let w = project(&ext, &span, extender.full_mass())?;
            let f_limit = limit_rq * extender.full_mass().quadratic_form(&w);
            let f_h = res.eigenvalues[i] + cfg.lambda;
            lower_gap = lower_gap.max(f_limit - f_h);
        }
    }
    Ok(GammaLevel { eta: level.eta, tests, max_recovery_gap, lower_gap, error: None })
}

/// Recovery and lower-bound gaps at every level of the schedule.
pub fn gamma_check(cfg: &SweepConfig) -> Result<GammaReport> {
    cfg.validate()?;
    let levels: Vec<GammaLevel> = cfg
        .eta_schedule
        .iter()
        .map(|&eta| {
            build_level(cfg, eta)
                .and_then(|level| check_level(cfg, &level))
                .unwrap_or_else(|e| GammaLevel { eta, error: Some(e.to_string()), ..Default::default() })
        })
        .collect();
    let ok: Vec<&GammaLevel> = levels.iter().filter(|l| l.error.is_none()).collect();
    let shrinks = |f: fn(&GammaLevel) -> f64| ok.len() >= 2 && ok.windows(2).all(|w| f(w[1]).abs() < f(w[0]).abs());
    let recovery_shrinks = shrinks(|l| l.max_recovery_gap);
    let lower_shrinks = shrinks(|l| l.lower_gap);
    Ok(GammaReport { levels, recovery_shrinks, lower_shrinks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_profile() {
        let c = vec![Vec3::new(0.0, 0.0, 1.0)];
        let at = |t: f64| Vec3::new(t.sin(), 0.0, t.cos());
        assert!((cutoff(&at(0.01), &c, 0.01, 0.3) - 1.0).abs() < 1e-12);
        assert_eq!(cutoff(&at(0.31), &c, 0.01, 0.3), 0.0);
        let mid = cutoff(&at(0.05), &c, 0.01, 0.3);
        assert!(mid > 0.0 && mid < 1.0);
    }

    #[test]
    fn constants_have_zero_gap() {
        let cfg = SweepConfig {
            eta_schedule: vec![0.4],
            mesh_params: super::super::MeshParams { target_edge: 0.15, ..Default::default() },
            test_degree: 0,
            ..SweepConfig::default()
        };
        let report = gamma_check(&cfg).unwrap();
        let level = &report.levels[0];
        assert!(level.error.is_none(), "{:?}", level.error);
        assert_eq!(level.tests.len(), 1);
        assert!(level.tests[0].recovery_gap.abs() < 1e-10);
    }
}
