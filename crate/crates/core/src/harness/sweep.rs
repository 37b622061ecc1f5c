use std::f64::consts::PI;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{epsilon_schedule, radii_from_scaling, SweepConfig, SweepReport};
use crate::eigen::{principal_angles, resolvent_values, sector_eigenpairs, EigenOptions, HarmonicExtender, Parity, SpectrumResult};
use crate::error::{Error, Result};
use crate::fem::{assemble, AssembledForms};
use crate::geometry::HandleProfile;
use crate::limit::{limit_spectrum, multiplicity};
use crate::mesh::{build_mesh_pair, MeshPair};
use crate::packing::{build_packing, count_bound, Packing};
use crate::relaxed::{MeasureSpec, RelaxedManifold};

/// Holes smaller than this are not meshed; the level is then the round
/// sphere and its row is flagged.
pub const HOLE_FLOOR: f64 = 1e-10;

/// Everything built for one `η` of a schedule.
pub struct Level {
    pub eta: f64,
    pub epsilon: f64,
    /// Cylinder radius `ε′` chosen so that the deleted caps have radius `r_h`.
    pub epsilon_prime: f64,
    pub r_h: f64,
    pub big_r_h: f64,
    pub holes_skipped: bool,
    pub packing: Packing,
    pub manifold: RelaxedManifold,
    pub pair: MeshPair,
    pub forms: AssembledForms,
}

pub fn build_level(cfg: &SweepConfig, eta: f64) -> Result<Level> {
    let epsilon = epsilon_schedule(eta, cfg.epsilon_exponent)?;
    let r_h = radii_from_scaling(cfg.alpha, eta, cfg.d)?;
    let packing = build_packing(eta, cfg.d, cfg.seed)?;
    let epsilon_prime = r_h.sin() / cfg.delta0;
    let holes_skipped = r_h < HOLE_FLOOR;
    let (manifold, big_r_h) = if holes_skipped {
        (RelaxedManifold::new(Vec::new(), MeasureSpec::InfiniteOnBoundary)?, (cfg.delta1 * epsilon_prime).asin())
    } else {
        let profile = HandleProfile::new(epsilon_prime, cfg.theta, cfg.delta0, cfg.delta1, 1.0)?;
        let m = RelaxedManifold::from_handles(&packing, &profile, cfg.cylinder)?;
        (m, profile.attachment_radius())
    };
    let pair = build_mesh_pair(&manifold.holes, &cfg.mesh_params.options())?;
    let forms = assemble(&pair.holed, &manifold.metric(), MeasureSpec::InfiniteOnBoundary)?;
    Ok(Level { eta, epsilon, epsilon_prime, r_h, big_r_h, holes_skipped, packing, manifold, pair, forms })
}

/// One row of a sweep report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eta: f64,
    pub epsilon: f64,
    pub epsilon_prime: f64,
    pub r_h: f64,
    pub big_r_h: f64,
    pub handle_count: usize,
    pub count_bound: f64,
    pub holes_skipped: bool,
    pub hole_volume_fraction: f64,
    pub vertices: usize,
    pub seed: u64,
    /// Lowest `k` eigenvalues over both parity sectors, ascending.
    pub lambdas: Vec<f64>,
    pub parities: Vec<Parity>,
    /// `(λ + λ_i)^{-1}`, decreasing.
    pub sigmas: Vec<f64>,
    pub limit_sigmas: Vec<f64>,
    /// `|σ_i^h - σ_i| / σ_i`.
    pub relative_errors: Vec<f64>,
    /// Six lowest even eigenvalues (degrees 0 and 2).
    pub even_cluster: Vec<f64>,
    /// Three lowest odd eigenvalues (degree 1).
    pub odd_cluster: Vec<f64>,
    pub odd_mean: f64,
    /// Principal angles between the extended odd cluster and `span{x, y, z}`.
    pub odd_angles: Vec<f64>,
    pub c0: f64,
    pub max_residual: f64,
    pub seconds: f64,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn max_odd_angle(&self) -> f64 {
        self.odd_angles.iter().copied().fold(0.0, f64::max)
    }
}

fn sector(forms: &AssembledForms, parity: Parity, k: usize, tol: f64, seed: u64) -> Result<SpectrumResult> {
    let opts = EigenOptions { tol, seed, ..EigenOptions::default() };
    sector_eigenpairs(forms, parity, k, &opts)
}

fn run_row(cfg: &SweepConfig, eta: f64) -> Result<SweepRow> {
    let start = Instant::now();
    let level = build_level(cfg, eta)?;
    let forms = &level.forms;
    // Whole degree clusters per sector: cutting a nearly degenerate cluster
    // stalls subspace iteration.
    let limit_full = limit_spectrum(cfg.d, cfg.alpha, cfg.convention, cfg.k)?;
    let need = |p: Parity| -> usize {
        limit_full.entries.iter().filter(|e| e.parity == p).map(|e| multiplicity(e.ell, cfg.d)).sum()
    };
    let even = sector(forms, Parity::Even, need(Parity::Even).max(6), cfg.tol, cfg.seed)?;
    let odd = sector(forms, Parity::Odd, need(Parity::Odd).max(3), cfg.tol, cfg.seed)?;

    let mut merged: Vec<(f64, Parity, usize)> = even
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &l)| (l, Parity::Even, i))
        .chain(odd.eigenvalues.iter().enumerate().map(|(i, &l)| (l, Parity::Odd, i)))
        .collect();
    merged.sort_by(|a, b| a.0.total_cmp(&b.0));
    merged.truncate(cfg.k);
    let lambdas: Vec<f64> = merged.iter().map(|m| m.0).collect();
    let sigmas = resolvent_values(cfg.lambda, &lambdas)?;
    let limit = limit_full.values();
    let limit_sigmas = resolvent_values(cfg.lambda, &limit)?;
    let relative_errors = sigmas.iter().zip(&limit_sigmas).map(|(s, t)| (s - t).abs() / t).collect();

    let extender = HarmonicExtender::new(&level.pair, &level.manifold.metric())?;
    let mut c0: f64 = 0.0;
    let mut extended_odd = Vec::new();
    for (res, parity) in [(&even, Parity::Even), (&odd, Parity::Odd)] {
        for (j, v) in res.eigenvectors.iter().enumerate() {
            let ext = extender.extension(&forms.reduction.expand(v))?;
            c0 = c0.max(ext.c0);
            if parity == Parity::Odd && j < 3 {
                extended_odd.push(ext.values);
            }
        }
    }
    let coords: Vec<Vec<f64>> =
        (0..3).map(|c| level.pair.full.vertices.iter().map(|p| p[c]).collect()).collect();
    let odd_angles = principal_angles(&extended_odd, &coords, extender.full_mass())?;

    let odd_cluster = odd.eigenvalues[..3].to_vec();
    let caps = level.manifold.num_holes() as f64;
    let hole_volume_fraction =
        if level.holes_skipped { 0.0 } else { caps * 2.0 * PI * (1.0 - level.big_r_h.cos()) / (4.0 * PI) };
    let max_residual = even.residuals.iter().chain(&odd.residuals).copied().fold(0.0, f64::max);
    Ok(SweepRow {
        eta,
        epsilon: level.epsilon,
        epsilon_prime: level.epsilon_prime,
        r_h: level.r_h,
        big_r_h: level.big_r_h,
        handle_count: level.packing.centers.len(),
        count_bound: count_bound(eta, cfg.d)?,
        holes_skipped: level.holes_skipped,
        hole_volume_fraction,
        vertices: level.pair.holed.num_vertices(),
        seed: cfg.seed,
        lambdas,
        parities: merged.iter().map(|m| m.1).collect(),
        sigmas,
        limit_sigmas,
        relative_errors,
        even_cluster: even.eigenvalues[..6].to_vec(),
        odd_mean: odd_cluster.iter().sum::<f64>() / 3.0,
        odd_cluster,
        odd_angles,
        c0,
        max_residual,
        seconds: start.elapsed().as_secs_f64(),
        error: None,
    })
}

/// Runs every level of the schedule in order. A failing level yields a row
/// carrying the diagnostic; the remaining levels still run.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let rows = cfg
        .eta_schedule
        .iter()
        .map(|&eta| {
            run_row(cfg, eta).unwrap_or_else(|e| SweepRow { eta, seed: cfg.seed, error: Some(e.to_string()), ..Default::default() })
        })
        .collect();
    let mut report = SweepReport { config: cfg.clone(), rows, fitted: None, version: env!("CARGO_PKG_VERSION").into() };
    report.fitted = fit_shift(&report).ok();
    Ok(report)
}

/// Least-squares shift `s` from the odd degree-1 cluster, with `α` under
/// both conventions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftFit {
    pub shift: f64,
    pub alpha_form: f64,
    pub alpha_paper: f64,
    pub rows_used: usize,
    /// Root-mean-square misfit of the rows used.
    pub rms: f64,
}

/// Fits a constant `s` to `mean(odd cluster) - 2` over the finer half of
/// the resolved rows (at least two).
pub fn fit_shift(report: &SweepReport) -> Result<ShiftFit> {
    let resolved: Vec<&SweepRow> = report.rows.iter().filter(|r| r.ok() && r.odd_cluster.len() == 3).collect();
    if resolved.len() < 2 {
        return Err(Error::FitFailure(format!("{} rows with a resolved odd cluster, need 2", resolved.len())));
    }
    let used = (resolved.len() + 1) / 2;
    let used = used.max(2);
    let samples: Vec<f64> = resolved[resolved.len() - used..].iter().map(|r| r.odd_mean - 2.0).collect();
    let shift = samples.iter().sum::<f64>() / used as f64;
    let rms = (samples.iter().map(|s| (s - shift).powi(2)).sum::<f64>() / used as f64).sqrt();
    let d = report.config.d;
    use crate::limit::ShiftConvention::{Form, Paper};
    Ok(ShiftFit {
        shift,
        alpha_form: Form.alpha_from_shift(shift, d),
        alpha_paper: Paper.alpha_from_shift(shift, d),
        rows_used: used,
        rms,
    })
}
