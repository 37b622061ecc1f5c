//! Real spherical harmonics on `S²` and product quadrature rules.
//!
//! Harmonics are evaluated as polynomials in the ambient coordinates,
//! `Y_ℓm ∝ Q_ℓ^m(z) · Re/Im (x + iy)^m` with `Q_ℓ^m = d^m P_ℓ / dz^m`, so the
//! surface gradient is the tangential part of the ambient gradient.

use crate::geometry::Vec3;
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Product rule on `S²`: Gauss–Legendre in `z`, uniform in the azimuth.
/// Exact for polynomials of degree below `min(2 n_z, n_phi)`.
#[derive(Clone, Debug)]
pub struct SphereQuadrature {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl SphereQuadrature {
    pub fn new(n_z: usize, n_phi: usize) -> Self {
        let (zs, wz) = gauss_legendre(n_z);
        let mut points = Vec::with_capacity(n_z * n_phi);
        let mut weights = Vec::with_capacity(n_z * n_phi);
        for (z, w) in zs.iter().zip(&wz) {
            let s = (1.0 - z * z).sqrt();
            for j in 0..n_phi {
                let phi = 2.0 * PI * (j as f64 + 0.5) / n_phi as f64;
                points.push(Vec3::new(s * phi.cos(), s * phi.sin(), *z));
                weights.push(w * 2.0 * PI / n_phi as f64);
            }
        }
        Self { points, weights }
    }

    /// A rule exact for products of two harmonics of degree `≤ degree`
    /// and of their gradients.
    pub fn for_degree(degree: usize) -> Self {
        Self::new(degree + 3, 2 * degree + 6)
    }
}

/// Orthonormal real spherical harmonics of degree `0..=degree`, indexed by
/// `ℓ² + ℓ + m` for `-ℓ ≤ m ≤ ℓ`.
#[derive(Clone, Debug)]
pub struct SphericalHarmonics {
    degree: usize,
    norms: Vec<f64>,
}

impl SphericalHarmonics {
    pub fn new(degree: usize) -> Self {
        let mut norms = Vec::with_capacity((degree + 1) * (degree + 1));
        for l in 0..=degree {
            for m in -(l as i64)..=(l as i64) {
                let am = m.unsigned_abs() as usize;
                // (ℓ - m)! / (ℓ + m)! as a running product.
                let ratio: f64 = ((l - am + 1)..=(l + am)).map(|k| 1.0 / k as f64).product();
                let base = ((2 * l + 1) as f64 / (4.0 * PI) * ratio).sqrt();
                norms.push(if m == 0 { base } else { base * 2f64.sqrt() });
            }
        }
        Self { degree, norms }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn count(&self) -> usize {
        (self.degree + 1) * (self.degree + 1)
    }

    pub fn index(l: usize, m: i64) -> usize {
        (l * l) as usize + (l as i64 + m) as usize
    }

    /// `(ℓ, m)` of a basis index.
    pub fn degree_order(idx: usize) -> (usize, i64) {
        let l = (idx as f64).sqrt().floor() as usize;
        let l = if (l + 1) * (l + 1) <= idx { l + 1 } else if l * l > idx { l - 1 } else { l };
        (l, idx as i64 - (l * l) as i64 - l as i64)
    }

    /// `Q_ℓ^m(z)` for all `m ≤ ℓ ≤ degree + 1`, stored as `q[m][ℓ]`.
    fn legendre_table(&self, z: f64) -> Vec<Vec<f64>> {
        let top = self.degree + 1;
        let mut q = vec![vec![0.0; top + 1]; top + 1];
        let mut dfact = 1.0;
        for m in 0..=top {
            if m > 0 {
                dfact *= (2 * m - 1) as f64;
            }
            q[m][m] = dfact;
            if m < top {
                q[m][m + 1] = z * (2 * m + 1) as f64 * dfact;
            }
            for l in (m + 2)..=top {
                q[m][l] = (z * (2 * l - 1) as f64 * q[m][l - 1] - (l + m - 1) as f64 * q[m][l - 2]) / (l - m) as f64;
            }
        }
        q
    }

    /// Values at a unit vector.
    pub fn eval(&self, p: &Vec3) -> Vec<f64> {
        self.eval_impl(p, false).0
    }

    /// Values and surface gradients at a unit vector.
    pub fn eval_with_gradient(&self, p: &Vec3) -> (Vec<f64>, Vec<Vec3>) {
        self.eval_impl(p, true)
    }

    fn eval_impl(&self, p: &Vec3, grad: bool) -> (Vec<f64>, Vec<Vec3>) {
        let q = self.legendre_table(p.z);
        // Powers (x + iy)^m as (re, im).
        let mut pw = vec![(1.0, 0.0); self.degree + 1];
        for m in 1..=self.degree {
            let (a, b) = pw[m - 1];
            pw[m] = (a * p.x - b * p.y, a * p.y + b * p.x);
        }
        let n = self.count();
        let mut vals = vec![0.0; n];
        let mut grads = if grad { vec![Vec3::zeros(); n] } else { Vec::new() };
        for l in 0..=self.degree {
            for m in -(l as i64)..=(l as i64) {
                let idx = Self::index(l, m);
                let am = m.unsigned_abs() as usize;
                let c = self.norms[idx];
                let (re, im) = pw[am];
                let angular = if m >= 0 { re } else { im };
                vals[idx] = c * q[am][l] * angular;
                if grad {
                    let dq = if am + 1 <= l { q[am + 1][l] } else { 0.0 };
                    // d/dx (x+iy)^m = m (x+iy)^{m-1}, d/dy = i m (x+iy)^{m-1}.
                    let (dre_x, dim_x, dre_y, dim_y) = if am == 0 {
                        (0.0, 0.0, 0.0, 0.0)
                    } else {
                        let (a, b) = pw[am - 1];
                        let mf = am as f64;
                        (mf * a, mf * b, -mf * b, mf * a)
                    };
                    let (dx, dy) = if m >= 0 { (dre_x, dre_y) } else { (dim_x, dim_y) };
                    let ambient = Vec3::new(c * q[am][l] * dx, c * q[am][l] * dy, c * dq * angular);
                    grads[idx] = ambient - p * p.dot(&ambient);
                }
            }
        }
        (vals, grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        for k in 0..16 {
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k + 1) as f64 };
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
            assert!((got - exact).abs() < 1e-14, "k = {k}: {got} vs {exact}");
        }
    }

    #[test]
    fn degree_order_round_trips() {
        for l in 0..10 {
            for m in -(l as i64)..=(l as i64) {
                assert_eq!(SphericalHarmonics::degree_order(SphericalHarmonics::index(l, m)), (l, m));
            }
        }
    }

    #[test]
    fn harmonics_are_orthonormal_eigenfunctions() {
        let sh = SphericalHarmonics::new(8);
        let quad = SphereQuadrature::for_degree(8);
        let n = sh.count();
        let mut mass = DMatrix::<f64>::zeros(n, n);
        let mut stiff = DMatrix::<f64>::zeros(n, n);
        for (p, w) in quad.points.iter().zip(&quad.weights) {
            let (v, g) = sh.eval_with_gradient(p);
            for i in 0..n {
                for j in 0..n {
                    mass[(i, j)] += w * v[i] * v[j];
                    stiff[(i, j)] += w * g[i].dot(&g[j]);
                }
            }
        }
        for i in 0..n {
            let (l, _) = SphericalHarmonics::degree_order(i);
            for j in 0..n {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((mass[(i, j)] - e).abs() < 1e-12, "mass[{i},{j}] = {}", mass[(i, j)]);
                let s = if i == j { (l * (l + 1)) as f64 } else { 0.0 };
                assert!((stiff[(i, j)] - s).abs() < 1e-11, "stiff[{i},{j}] = {}", stiff[(i, j)]);
            }
        }
    }

    #[test]
    fn first_harmonics_are_coordinates() {
        let sh = SphericalHarmonics::new(1);
        let p = Vec3::new(0.36, 0.48, 0.8);
        let v = sh.eval(&p);
        let c = (3.0 / (4.0 * PI)).sqrt();
        assert_relative_eq!(v[0], (1.0 / (4.0 * PI)).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(v[SphericalHarmonics::index(1, -1)], c * p.y, epsilon = 1e-15);
        assert_relative_eq!(v[SphericalHarmonics::index(1, 0)], c * p.z, epsilon = 1e-15);
        assert_relative_eq!(v[SphericalHarmonics::index(1, 1)], c * p.x, epsilon = 1e-15);
    }

    #[test]
    fn harmonics_have_degree_parity() {
        let sh = SphericalHarmonics::new(8);
        let p = Vec3::new(0.2, -0.7, 0.3).normalize();
        let (a, b) = (sh.eval(&p), sh.eval(&-p));
        for i in 0..sh.count() {
            let (l, _) = SphericalHarmonics::degree_order(i);
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            assert!((b[i] - sign * a[i]).abs() < 1e-13);
        }
    }
}
