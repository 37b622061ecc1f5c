//! Capacity of a spherical condenser: a closed cap `E` of radius `r` inside
//! an open concentric cap `A` of radius `R`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::element_matrices;
use crate::geometry::{RoundMetric, Vec3};
use crate::harmonics::gauss_legendre;
use crate::packing::sphere_area;
use crate::sparse::{Cholesky, CsrMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condenser {
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub d: usize,
}

impl Condenser {
    pub fn new(inner_radius: f64, outer_radius: f64, d: usize) -> Result<Self> {
        if !(inner_radius > 0.0 && inner_radius < outer_radius && outer_radius <= PI / 2.0) {
            return Err(Error::Domain(format!("need 0 < r < R <= pi/2, got r = {inner_radius}, R = {outer_radius}")));
        }
        if d < 2 {
            return Err(Error::Domain("capacity needs d >= 2".into()));
        }
        Ok(Self { inner_radius, outer_radius, d })
    }
}

/// Radial minimizer: `2π / log(tan(R/2) / tan(r/2))` for `d = 2`, otherwise
/// `|S^{d-1}| / ∫_r^R sin^{1-d} t dt`.
pub fn capacity_exact(c: &Condenser) -> f64 {
    let (r, big_r) = (c.inner_radius, c.outer_radius);
    if c.d == 2 {
        return 2.0 * PI / ((0.5 * big_r).tan() / (0.5 * r).tan()).ln();
    }
    // t = e^s spreads the quadrature evenly across scales.
    let (a, b) = (r.ln(), big_r.ln());
    let panels = 64;
    let (x, w) = gauss_legendre(16);
    let h = (b - a) / panels as f64;
    let mut integral = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            let t = (lo + 0.5 * h * (xi + 1.0)).exp();
            integral += 0.5 * h * wi * t * t.sin().powi(1 - c.d as i32);
        }
    }
    sphere_area(c.d - 1) / integral
}

/// Dirichlet energy of the P1 solution with `u = 1` on the inner and
/// `u = 0` on the outer circle, on a polar mesh around the north pole whose
/// longest edge is at most `h`. Rings are spaced geometrically so cells stay
/// close to square down to the inner circle.
pub fn capacity_fem(c: &Condenser, h: f64) -> Result<f64> {
    if c.d != 2 {
        return Err(Error::Contract("the finite element capacity is implemented for d = 2".into()));
    }
    if !(h > 0.0) {
        return Err(Error::Domain(format!("mesh resolution {h} must be positive")));
    }
    let (r, big_r) = (c.inner_radius, c.outer_radius);
    let n_phi = ((2.0 * PI * big_r.sin() / h).ceil() as usize).max(8);
    let q = 1.0 + 2.0 * PI / n_phi as f64;
    let n_rings = ((big_r / r).ln() / q.ln()).ceil().max(1.0) as usize;
    if n_phi * (n_rings + 1) > 5_000_000 {
        return Err(Error::Meshing(format!("capacity mesh would need {} vertices", n_phi * (n_rings + 1))));
    }
    let radii: Vec<f64> = (0..=n_rings).map(|i| r * (big_r / r).powf(i as f64 / n_rings as f64)).collect();
    let mut verts = Vec::with_capacity(n_phi * radii.len());
    for (i, rho) in radii.iter().enumerate() {
        // Half-step stagger on odd rings keeps the triangles nearly equilateral.
        let offset = if i % 2 == 1 { 0.5 } else { 0.0 };
        for j in 0..n_phi {
            let phi = 2.0 * PI * (j as f64 + offset) / n_phi as f64;
            verts.push(Vec3::new(rho.sin() * phi.cos(), rho.sin() * phi.sin(), rho.cos()));
        }
    }
    let id = |i: usize, j: usize| i * n_phi + j % n_phi;
    let mut tris = Vec::with_capacity(2 * n_phi * n_rings);
    for i in 0..n_rings {
        for j in 0..n_phi {
            if i % 2 == 0 {
                tris.push([id(i, j), id(i, j + 1), id(i + 1, j)]);
                tris.push([id(i, j + 1), id(i + 1, j + 1), id(i + 1, j)]);
            } else {
                tris.push([id(i, j), id(i + 1, j + 1), id(i + 1, j)]);
                tris.push([id(i, j), id(i, j + 1), id(i + 1, j + 1)]);
            }
        }
    }
    let n = verts.len();
    let mut trips = Vec::with_capacity(9 * tris.len());
    for (t, tri) in tris.iter().enumerate() {
        let corners = tri.map(|v| verts[v]);
        let (k, _) = element_matrices(&corners, &RoundMetric).map_err(|reason| Error::Assembly { triangle: t, reason })?;
        for a in 0..3 {
            for b in 0..3 {
                trips.push((tri[a], tri[b], k[a][b]));
            }
        }
    }
    let k = CsrMatrix::from_triplets(n, n, trips);
    // Unknowns are the rings strictly between the two circles.
    let mut u = vec![0.0; n];
    u[..n_phi].iter_mut().for_each(|x| *x = 1.0);
    let first = n_phi;
    let last = n - n_phi;
    if last > first {
        let m = last - first;
        let mut sub = Vec::new();
        let mut rhs = vec![0.0; m];
        for i in first..last {
            for (j, v) in k.row(i) {
                if (first..last).contains(&j) {
                    sub.push((i - first, j - first, v));
                } else {
                    rhs[i - first] -= v * u[j];
                }
            }
        }
        let x = Cholesky::new(&CsrMatrix::from_triplets(m, m, sub))?.solve(&rhs);
        u[first..last].copy_from_slice(&x);
    }
    Ok(k.quadratic_form(&u))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Shoots `(sin^{d-1} t · u')' = 0` with RK4 from `u(r) = 0, u'(r) = 1`;
    /// the flux `|S^{d-1}| sin^{d-1} r` divided by the drop `u(R)` is the
    /// capacity.
    fn shooting(r: f64, big_r: f64, d: usize, steps: usize) -> f64 {
        let f = |t: f64, y: [f64; 2]| [y[1], -((d - 1) as f64) * t.cos() / t.sin() * y[1]];
        // Integrate in s = ln t for even resolution across scales.
        let g = |s: f64, y: [f64; 2]| {
            let t = s.exp();
            let dy = f(t, y);
            [t * dy[0], t * dy[1]]
        };
        let (a, b) = (r.ln(), big_r.ln());
        let h = (b - a) / steps as f64;
        let mut y = [0.0, 1.0];
        for i in 0..steps {
            let s = a + i as f64 * h;
            let k1 = g(s, y);
            let k2 = g(s + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = g(s + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = g(s + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            for c in 0..2 {
                y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
        }
        sphere_area(d - 1) * r.sin().powi(d as i32 - 1) / y[0]
    }

    #[test]
    fn closed_form_value() {
        let c = Condenser::new(0.1, 0.5, 2).unwrap();
        let v = capacity_exact(&c);
        assert!((v - 3.856).abs() < 1e-3, "{v}");
        assert!((v - shooting(0.1, 0.5, 2, 4000)).abs() < 1e-10 * v);
    }

    #[test]
    fn quadrature_branch_matches_shooting() {
        for d in [3, 4, 5] {
            for (r, big_r) in [(0.1, 0.5), (1e-3, 1.2), (0.3, 1.5)] {
                let c = Condenser::new(r, big_r, d).unwrap();
                let q = capacity_exact(&c);
                let s = shooting(r, big_r, d, 20000);
                assert!((q - s).abs() < 1e-9 * q, "d={d} r={r}: {q} vs {s}");
            }
        }
        // d = 3: ∫ sin⁻² = cot r - cot R.
        let c = Condenser::new(0.2, 0.9, 3).unwrap();
        let exact = 4.0 * PI / (0.2f64.tan().recip() - 0.9f64.tan().recip());
        assert!((capacity_exact(&c) - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn depends_only_on_tangent_ratio() {
        let a = Condenser::new(0.1, 0.5, 2).unwrap();
        let ratio = (0.25f64).tan() / (0.05f64).tan();
        let r2 = 2.0 * (0.3f64.tan() / ratio).atan();
        let b = Condenser::new(r2, 0.6, 2).unwrap();
        assert!((capacity_exact(&a) - capacity_exact(&b)).abs() < 1e-12);
    }

    #[test]
    fn logarithmic_and_power_asymptotics() {
        for r in [1e-4, 1e-6, 1e-9] {
            let c = Condenser::new(r, PI / 2.0, 2).unwrap();
            let ratio = capacity_exact(&c) * (-r.ln()) / (2.0 * PI);
            assert!((ratio - 1.0).abs() < 1.0 / (-r.ln()), "{ratio}");
        }
        let scaled: Vec<f64> = [1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&r| capacity_exact(&Condenser::new(r, 1.0, 3).unwrap()) / r)
            .collect();
        assert!((scaled[2] - 4.0 * PI).abs() < 1e-3);
        assert!((scaled[2] - 4.0 * PI).abs() < (scaled[0] - 4.0 * PI).abs());
    }

    #[test]
    fn fem_converges_from_above() {
        let c = Condenser::new(0.1, 0.5, 2).unwrap();
        let exact = capacity_exact(&c);
        let coarse = capacity_fem(&c, 0.05).unwrap();
        let fine = capacity_fem(&c, 0.025).unwrap();
        assert!(coarse >= exact * (1.0 - 1e-3) && fine >= exact * (1.0 - 1e-3));
        assert!(fine - exact < coarse - exact);
        assert!((fine - exact).abs() < 0.01 * exact);
    }

    #[test]
    fn monotone_in_inner_radius() {
        let caps: Vec<f64> = [0.05, 0.1, 0.2]
            .iter()
            .map(|&r| capacity_fem(&Condenser::new(r, 0.5, 2).unwrap(), 0.04).unwrap())
            .collect();
        assert!(caps.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn invalid_condensers() {
        assert!(Condenser::new(0.5, 0.1, 2).is_err());
        assert!(Condenser::new(0.1, 2.0, 2).is_err());
        assert!(Condenser::new(0.0, 0.5, 2).is_err());
        assert!(matches!(capacity_fem(&Condenser::new(0.1, 0.5, 3).unwrap(), 0.01), Err(Error::Contract(_))));
    }
}
