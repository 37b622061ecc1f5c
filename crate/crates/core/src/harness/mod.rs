//! Scaling schedules, the h-sweep, shift fitting, the Γ-convergence check
//! and report writers. The command-line front end lives in `main.rs`.

mod config;
mod gamma;
mod report;
mod sweep;

pub use config::{MeshParams, OutputPaths, SweepConfig};
pub use gamma::{gamma_check, GammaLevel, GammaReport, TestGap};
pub use report::{format_list, SweepReport};
pub use sweep::{build_level, fit_shift, run_sweep, Level, ShiftFit, SweepRow, HOLE_FLOOR};

use crate::error::{Error, Result};

/// Hole radius `r_h` realizing coupling `α` at packing scale `η`:
/// `r = exp(-2/(α η²))` for `d = 2` and `r = (α/2 · η^d)^{1/(d-2)}` for
/// `d ≥ 3`. For `α = 0` the super-small radius `exp(-1/η³)` is returned.
pub fn radii_from_scaling(alpha: f64, eta: f64, d: usize) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Domain(format!("eta = {eta} outside (0, 1)")));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("alpha = {alpha} must be finite and >= 0")));
    }
    if d < 2 {
        return Err(Error::Domain("the scaling law needs d >= 2".into()));
    }
    if alpha == 0.0 {
        return Ok((-1.0 / eta.powi(3)).exp());
    }
    Ok(if d == 2 {
        (-2.0 / (alpha * eta * eta)).exp()
    } else {
        (0.5 * alpha * eta.powi(d as i32)).powf(1.0 / (d as f64 - 2.0))
    })
}

/// The coupling constant implied by `(r, η)`: inverse of
/// [`radii_from_scaling`] for `α > 0`.
pub fn alpha_from_radius(r: f64, eta: f64, d: usize) -> f64 {
    if d == 2 {
        -2.0 / (eta * eta * r.ln())
    } else {
        2.0 * r.powi(d as i32 - 2) / eta.powi(d as i32)
    }
}

/// `ε = η^p` with `0 < p < 1`, so that `η/ε → 0`.
pub fn epsilon_schedule(eta: f64, exponent: f64) -> Result<f64> {
    if !(exponent > 0.0 && exponent < 1.0) {
        return Err(Error::ScalingViolation(format!("exponent {exponent} must lie in (0, 1) so that eta/epsilon -> 0")));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Domain(format!("eta = {eta} outside (0, 1)")));
    }
    Ok(eta.powf(exponent))
}
