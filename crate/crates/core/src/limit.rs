//! The limit operator on the round sphere: closed-form spectrum with the
//! odd sector shifted, parity decomposition, the Euler equations solved
//! coefficientwise, and a spectral Galerkin discretization of the limit
//! quadratic form used to cross-check the shift.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::eigen::Parity;
use crate::error::{Error, Result};
use crate::harmonics::{SphereQuadrature, SphericalHarmonics};

/// Odd-sector shift `s` for coupling constant `α` on `S^d`.
///
/// `Form` (default) is the Euler equation of
/// `D(u) + α/2^d ∫[u - u∘T]²`, whose odd part carries `4α/2^d`; `Paper`
/// uses `α/2^d`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftConvention {
    #[default]
    Form,
    Paper,
}

impl ShiftConvention {
    pub fn shift(&self, alpha: f64, d: usize) -> f64 {
        let base = alpha / 2f64.powi(d as i32);
        match self {
            ShiftConvention::Form => 4.0 * base,
            ShiftConvention::Paper => base,
        }
    }

    /// Inverse of [`Self::shift`].
    pub fn alpha_from_shift(&self, s: f64, d: usize) -> f64 {
        let scale = 2f64.powi(d as i32);
        match self {
            ShiftConvention::Form => s * scale / 4.0,
            ShiftConvention::Paper => s * scale,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ShiftConvention::Form => "form",
            ShiftConvention::Paper => "paper",
        }
    }
}

impl std::str::FromStr for ShiftConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "form" => Ok(Self::Form),
            "paper" => Ok(Self::Paper),
            _ => Err(Error::Parse(format!("unknown shift convention '{s}' (form or paper)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitEntry {
    pub ell: usize,
    pub parity: Parity,
    pub value: f64,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitSpectrum {
    pub entries: Vec<LimitEntry>,
    pub alpha: f64,
    pub d: usize,
    pub convention: ShiftConvention,
}

impl LimitSpectrum {
    /// Eigenvalues repeated by multiplicity, ascending.
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().flat_map(|e| std::iter::repeat(e.value).take(e.multiplicity)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("# format: 1\nell,parity,value,multiplicity\n");
        for e in &self.entries {
            let _ = writeln!(s, "{},{},{:.16e},{}", e.ell, e.parity.label(), e.value, e.multiplicity);
        }
        s
    }

    /// Entry for degree `ell`, if it survived truncation.
    pub fn entry(&self, ell: usize) -> Option<&LimitEntry> {
        self.entries.iter().find(|e| e.ell == ell)
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Dimension of the degree-`ℓ` harmonics on `S^d`:
/// homogeneous polynomials of degree `ℓ` minus those of degree `ℓ - 2`.
pub fn multiplicity(ell: usize, d: usize) -> usize {
    binomial(ell + d, d) - if ell >= 2 { binomial(ell + d - 2, d) } else { 0 }
}

/// The `k` smallest eigenvalues (with multiplicity) of the limit operator;
/// the last entry's multiplicity is trimmed so the total is exactly `k`.
pub fn limit_spectrum(d: usize, alpha: f64, convention: ShiftConvention, k: usize) -> Result<LimitSpectrum> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("coupling constant {alpha} must be finite and >= 0")));
    }
    if d < 1 || k == 0 {
        return Err(Error::Contract("limit spectrum needs d >= 1 and k >= 1".into()));
    }
    let s = convention.shift(alpha, d);
    // Even degrees alone supply k values below ℓ_max(ℓ_max + d - 1), and
    // larger degrees only exceed that.
    let mut count = 0;
    let mut ell_max = 0;
    while count < k {
        if ell_max % 2 == 0 {
            count += multiplicity(ell_max, d);
        }
        ell_max += 1;
    }
    let mut entries: Vec<LimitEntry> = (0..=ell_max + 1)
        .map(|ell| {
            let parity = Parity::of_degree(ell);
            let base = (ell * (ell + d - 1)) as f64;
            let value = if parity == Parity::Odd { base + s } else { base };
            LimitEntry { ell, parity, value, multiplicity: multiplicity(ell, d) }
        })
        .collect();
    entries.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.ell.cmp(&b.ell)));
    let mut kept = Vec::new();
    let mut left = k;
    for mut e in entries {
        if left == 0 {
            break;
        }
        e.multiplicity = e.multiplicity.min(left);
        left -= e.multiplicity;
        kept.push(e);
    }
    Ok(LimitSpectrum { entries: kept, alpha, d, convention })
}

/// `(u_even, u_odd)` for vertex samples with an involutive pairing.
pub fn parity_decompose_samples(u: &[f64], pairing: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    if u.len() != pairing.len() {
        return Err(Error::Contract("samples and pairing differ in length".into()));
    }
    let even = (0..u.len()).map(|i| 0.5 * (u[i] + u[pairing[i]])).collect();
    let odd = (0..u.len()).map(|i| 0.5 * (u[i] - u[pairing[i]])).collect();
    Ok((even, odd))
}

/// `(u_even, u_odd)` for real spherical-harmonic coefficients on `S²`:
/// `Y_ℓm ∘ T = (-1)^ℓ Y_ℓm`.
pub fn parity_decompose_coefficients(c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut even = c.to_vec();
    let mut odd = c.to_vec();
    for (i, (e, o)) in even.iter_mut().zip(odd.iter_mut()).enumerate() {
        let (l, _) = SphericalHarmonics::degree_order(i);
        if l % 2 == 0 {
            *o = 0.0;
        } else {
            *e = 0.0;
        }
    }
    (even, odd)
}

/// Solves `-Δu + λu + s·u_odd = f` on `S²` for harmonic coefficients `f`
/// indexed by `ℓ² + ℓ + m`.
pub fn euler_solve(f: &[f64], lambda: f64, alpha: f64, convention: ShiftConvention, d: usize) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::Contract(format!("resolvent parameter {lambda} must be positive")));
    }
    if d != 2 {
        return Err(Error::Contract("coefficient layout is defined for S^2 only".into()));
    }
    if !(alpha >= 0.0) {
        return Err(Error::Domain(format!("coupling constant {alpha} must be >= 0")));
    }
    let s = convention.shift(alpha, d);
    Ok(f.iter()
        .enumerate()
        .map(|(i, c)| {
            let (l, _) = SphericalHarmonics::degree_order(i);
            let base = lambda + (l * (l + 1)) as f64;
            c / if l % 2 == 1 { base + s } else { base }
        })
        .collect())
}

/// Eigenvalues of a spectral Galerkin discretization of the limit form.
#[derive(Clone, Debug)]
pub struct GalerkinSpectrum {
    pub values: Vec<f64>,
    pub parities: Vec<Parity>,
}

/// Galerkin discretization of `D(u) + c ∫[u - u∘T]²` on `S²` with real
/// harmonics of degree `≤ degree`, where `c = s/4` so that the form's odd
/// shift is the convention's `s`. Matrices are built by quadrature; `u∘T`
/// is evaluated at the antipodal quadrature point.
pub fn galerkin_limit(alpha: f64, convention: ShiftConvention, degree: usize) -> Result<GalerkinSpectrum> {
    if !(alpha >= 0.0) {
        return Err(Error::Domain(format!("coupling constant {alpha} must be >= 0")));
    }
    let density = convention.shift(alpha, 2) / 4.0;
    let basis = SphericalHarmonics::new(degree);
    let n = basis.count();
    let quad = SphereQuadrature::for_degree(2 * degree);
    let mut stiff = DMatrix::<f64>::zeros(n, n);
    let mut mass = DMatrix::<f64>::zeros(n, n);
    let mut coup = DMatrix::<f64>::zeros(n, n);
    for (p, w) in quad.points.iter().zip(&quad.weights) {
        let (vals, grads) = basis.eval_with_gradient(p);
        let mirrored = basis.eval(&-p);
        let jumps: Vec<f64> = vals.iter().zip(&mirrored).map(|(a, b)| a - b).collect();
        for i in 0..n {
            for j in 0..=i {
                stiff[(i, j)] += w * grads[i].dot(&grads[j]);
                mass[(i, j)] += w * vals[i] * vals[j];
                coup[(i, j)] += w * jumps[i] * jumps[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            stiff[(j, i)] = stiff[(i, j)];
            mass[(j, i)] = mass[(i, j)];
            coup[(j, i)] = coup[(i, j)];
        }
    }
    let a = stiff + coup * density;
    let l = mass.cholesky().ok_or_else(|| Error::Solver("Galerkin mass matrix is not positive definite".into()))?.l();
    let linv = l.try_inverse().ok_or_else(|| Error::Solver("singular Galerkin mass factor".into()))?;
    let c = &linv * a * linv.transpose();
    let eig = nalgebra::SymmetricEigen::new((&c + c.transpose()) * 0.5);
    let vecs = linv.transpose() * &eig.eigenvectors;
    let mut pairs: Vec<(f64, Parity)> = (0..n)
        .map(|j| {
            let odd_weight: f64 = (0..n)
                .filter(|&i| SphericalHarmonics::degree_order(i).0 % 2 == 1)
                .map(|i| vecs[(i, j)].powi(2))
                .sum();
            let total: f64 = vecs.column(j).norm_squared();
            (eig.eigenvalues[j], if odd_weight > 0.5 * total { Parity::Odd } else { Parity::Even })
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(GalerkinSpectrum { values: pairs.iter().map(|p| p.0).collect(), parities: pairs.iter().map(|p| p.1).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    #[test]
    fn multiplicities() {
        assert_eq!((0..5).map(|l| multiplicity(l, 2)).collect::<Vec<_>>(), vec![1, 3, 5, 7, 9]);
        assert_eq!((0..4).map(|l| multiplicity(l, 3)).collect::<Vec<_>>(), vec![1, 4, 9, 16]);
        // (2ℓ + d - 1)(ℓ + d - 2)! / (ℓ! (d - 1)!)
        let fact = |n: usize| (1..=n).product::<usize>().max(1);
        for d in 2..6 {
            for l in 0..8 {
                assert_eq!(multiplicity(l, d), (2 * l + d - 1) * fact(l + d - 2) / (fact(l) * fact(d - 1)));
            }
        }
    }

    #[test]
    fn unperturbed_sphere() {
        let s = limit_spectrum(2, 0.0, ShiftConvention::Form, 9).unwrap();
        assert_eq!(s.values(), vec![0.0, 2.0, 2.0, 2.0, 6.0, 6.0, 6.0, 6.0, 6.0]);
    }

    #[test]
    fn shifted_odd_cluster() {
        let form = limit_spectrum(2, 4.0, ShiftConvention::Form, 9).unwrap();
        assert_eq!(form.entry(1).unwrap().value, 6.0);
        assert_eq!(form.values(), vec![0.0, 6.0, 6.0, 6.0, 6.0, 6.0, 6.0, 6.0, 6.0]);
        let paper = limit_spectrum(2, 4.0, ShiftConvention::Paper, 4).unwrap();
        assert_eq!(paper.entry(1).unwrap().value, 3.0);
        assert!(matches!(limit_spectrum(2, -1.0, ShiftConvention::Form, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn large_shift_pushes_odd_degrees_up() {
        let s = limit_spectrum(2, 100.0, ShiftConvention::Form, 20).unwrap();
        let v = s.values();
        assert_eq!(v.len(), 20);
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
        assert!(s.entries.iter().take(3).all(|e| e.parity == Parity::Even));
    }

    #[test]
    fn convention_round_trip() {
        for c in [ShiftConvention::Form, ShiftConvention::Paper] {
            for d in 2..5 {
                assert!((c.alpha_from_shift(c.shift(3.7, d), d) - 3.7).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn euler_examples() {
        let basis = SphericalHarmonics::new(2);
        let mut y1 = vec![0.0; basis.count()];
        y1[SphericalHarmonics::index(1, 0)] = 1.0;
        let u = euler_solve(&y1, 1.0, 4.0, ShiftConvention::Paper, 2).unwrap();
        assert_eq!(u[SphericalHarmonics::index(1, 0)], 0.25);
        let mut y2 = vec![0.0; basis.count()];
        y2[SphericalHarmonics::index(2, -1)] = 1.0;
        for alpha in [0.0, 4.0, 9.0] {
            let u = euler_solve(&y2, 1.0, alpha, ShiftConvention::Form, 2).unwrap();
            assert_eq!(u[SphericalHarmonics::index(2, -1)], 1.0 / 7.0);
        }
        let u = euler_solve(&[3.0], 2.0, 4.0, ShiftConvention::Form, 2).unwrap();
        assert_eq!(u, vec![1.5]);
    }

    #[test]
    fn decomposition_commutes_with_solve() {
        let f: Vec<f64> = (0..25).map(|i| (i as f64 * 0.7).sin()).collect();
        let (fe, fo) = parity_decompose_coefficients(&f);
        let solve = |g: &[f64]| euler_solve(g, 1.5, 2.0, ShiftConvention::Form, 2).unwrap();
        let (ue, uo) = parity_decompose_coefficients(&solve(&f));
        assert_eq!(solve(&fe), ue);
        assert_eq!(solve(&fo), uo);
    }

    #[test]
    fn harmonics_have_degree_parity() {
        let basis = SphericalHarmonics::new(8);
        for p in crate::packing::fibonacci_sphere(50) {
            let (a, b) = (basis.eval(&p), basis.eval(&-p));
            for i in 0..basis.count() {
                let sign = if SphericalHarmonics::degree_order(i).0 % 2 == 0 { 1.0 } else { -1.0 };
                assert!((b[i] - sign * a[i]).abs() < 1e-12 * a[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn sampled_decomposition() {
        let pts = crate::packing::fibonacci_sphere(10);
        let mut verts: Vec<Vec3> = pts.clone();
        verts.extend(pts.iter().map(|p| -p));
        let pairing: Vec<usize> = (0..20).map(|i| (i + 10) % 20).collect();
        let x: Vec<f64> = verts.iter().map(|v| v.x).collect();
        let (e, o) = parity_decompose_samples(&x, &pairing).unwrap();
        assert!(e.iter().all(|v| v.abs() < 1e-15));
        assert_eq!(o, x);
        let c = vec![2.0; 20];
        let (e, o) = parity_decompose_samples(&c, &pairing).unwrap();
        assert_eq!((e, o), (c, vec![0.0; 20]));
    }

    #[test]
    fn galerkin_matches_closed_form() {
        for alpha in [1.0, 4.0] {
            for conv in [ShiftConvention::Form, ShiftConvention::Paper] {
                let g = galerkin_limit(alpha, conv, 8).unwrap();
                let exact = limit_spectrum(2, alpha, conv, 81).unwrap().values();
                for (a, b) in g.values.iter().zip(&exact) {
                    assert!((a - b).abs() <= 1e-12 * b.max(1.0), "{a} vs {b}");
                }
            }
        }
    }
}
