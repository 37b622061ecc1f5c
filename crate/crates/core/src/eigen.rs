//! Lowest eigenpairs of `(K + C) v = λ B v`, parity sectors, resolvent
//! values, harmonic extension into the holes and principal angles.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{assemble, AssembledForms};
use crate::geometry::{MetricField, RoundMetric};
use crate::mesh::MeshPair;
use crate::relaxed::MeasureSpec;
use crate::sparse::{dot, Cholesky, CsrMatrix};

#[derive(Clone, Debug)]
pub struct SpectrumResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// B-orthonormal.
    pub eigenvectors: Vec<Vec<f64>>,
    /// `‖(K + C)v - λBv‖_{B⁻¹} / max(1, |λ|)`.
    pub residuals: Vec<f64>,
    /// Attainable residual in double precision; convergence means
    /// `residual <= max(tol, floor)`.
    pub residual_floors: Vec<f64>,
    pub k: usize,
    pub iterations: usize,
}

impl SpectrumResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("# format: 1\nindex,eigenvalue,residual\n");
        for (i, (l, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            let _ = writeln!(s, "{i},{l:.16e},{r:.6e}");
        }
        s
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    pub tol: f64,
    /// The factorized operator is `A + shift·B`, i.e. the spectral shift is `-shift`.
    pub shift: f64,
    pub max_iter: usize,
    /// Block size is `k + block_extra`.
    pub block_extra: usize,
    /// Problems up to this size are solved densely.
    pub dense_limit: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-8, shift: 0.5, max_iter: 2000, block_extra: 5, dense_limit: 300, seed: 0 }
    }
}

type Block = Vec<Vec<f64>>;

fn mul_block(a: &CsrMatrix, x: &[Vec<f64>]) -> Block {
    x.iter().map(|c| a.mul_vec(c)).collect()
}

/// `Xᵀ Y` for column blocks.
fn gram(x: &[Vec<f64>], y: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), y.len(), |i, j| dot(&x[i], &y[j]))
}

/// `X · M` for a column block and a small dense matrix.
fn combine(x: &[Vec<f64>], m: &DMatrix<f64>) -> Block {
    let n = x.first().map_or(0, Vec::len);
    (0..m.ncols())
        .map(|j| {
            let mut col = vec![0.0; n];
            for (i, xi) in x.iter().enumerate() {
                let c = m[(i, j)];
                if c != 0.0 {
                    col.iter_mut().zip(xi).for_each(|(a, b)| *a += c * b);
                }
            }
            col
        })
        .collect()
}

fn sym_eigen_sorted(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// B-orthonormal basis of `span(x)`; `None` if the numerical rank is below
/// `x.len()`.
fn b_orthonormalize(x: &[Vec<f64>], b: &CsrMatrix) -> Option<Block> {
    let mut y = x.to_vec();
    for _ in 0..2 {
        let g = gram(&y, &mul_block(b, &y));
        let (vals, vecs) = sym_eigen_sorted(g);
        let top = vals.last().copied().unwrap_or(0.0);
        if !(vals[0] > 1e-13 * top) {
            return None;
        }
        let scaled = DMatrix::from_fn(vecs.nrows(), vecs.ncols(), |r, c| vecs[(r, c)] / vals[c].sqrt());
        y = combine(&y, &scaled);
    }
    Some(y)
}

fn normalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for i in 0..v.len() {
        if v[i].abs() > v[best].abs() + 1e-12 * v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Relative residuals `‖Av - λBv‖_{B⁻¹} / max(1, |λ|)` together with the
/// rounding floor below which they cannot be pushed in double precision:
/// `ε (|A||v| + |λ||B||v|)` measured in the lumped `B⁻¹` norm. Tiny
/// elements (small mass, unit-scale stiffness) raise this floor.
fn residuals(a: &CsrMatrix, b: &CsrMatrix, chol_b: &Cholesky, vals: &[f64], vecs: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let lumped = b.mul_vec(&vec![1.0; b.nrows()]);
    let rs: Block = vecs
        .iter()
        .zip(vals)
        .map(|(v, &l)| {
            let av = a.mul_vec(v);
            let bv = b.mul_vec(v);
            av.iter().zip(&bv).map(|(x, y)| x - l * y).collect()
        })
        .collect();
    let sol = chol_b.solve_many(&rs);
    let res = rs.iter().zip(&sol).zip(vals).map(|((r, s), l)| dot(r, s).max(0.0).sqrt() / l.abs().max(1.0)).collect();
    let floors = vecs
        .iter()
        .zip(vals)
        .map(|(v, &l)| {
            let (av, bv) = (a.abs_mul_vec(v), b.abs_mul_vec(v));
            let sum: f64 = (0..v.len()).map(|i| (av[i] + l.abs() * bv[i]).powi(2) / lumped[i]).sum();
            16.0 * f64::EPSILON * sum.sqrt() / l.abs().max(1.0)
        })
        .collect();
    (res, floors)
}

/// The `k` smallest eigenpairs of `A v = λ B v` for symmetric `A ≥ 0` and
/// symmetric positive definite `B`.
pub fn generalized_lowest(a: &CsrMatrix, b: &CsrMatrix, k: usize, opts: &EigenOptions) -> Result<SpectrumResult> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::Contract("eigenproblem matrices must be square and of equal size".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Contract(format!("tolerance {} must be positive", opts.tol)));
    }
    if k == 0 || k > n || (k == n && n > opts.dense_limit) {
        return Err(Error::Contract(format!("cannot compute {k} eigenpairs of a problem of size {n}")));
    }
    if n <= opts.dense_limit {
        return dense_lowest(a, b, k);
    }
    let chol_b = Cholesky::new(b)?;
    let op = Cholesky::new(&a.add_scaled(b, opts.shift))?;
    let m = (k + opts.block_extra).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Block = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut last_res = (Vec::new(), Vec::new());
    for iter in 1..=opts.max_iter {
        let y = op.solve_many(&mul_block(b, &x));
        let y = match b_orthonormalize(&y, b) {
            Some(y) => y,
            None => {
                // Collapse of the block: refresh it with random directions.
                let fresh: Block = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
                b_orthonormalize(&fresh, b).ok_or_else(|| Error::Solver("cannot orthonormalize block".into()))?
            }
        };
        let h = gram(&y, &mul_block(a, &y));
        let (vals, vecs) = sym_eigen_sorted(h);
        x = combine(&y, &vecs);
        let (res, floors) = residuals(a, b, &chol_b, &vals[..k], &x[..k]);
        if res.iter().zip(&floors).all(|(&r, &f)| r <= opts.tol.max(f)) {
            let mut eigenvectors: Block = x[..k].to_vec();
            eigenvectors.iter_mut().for_each(|v| normalize_sign(v));
            return Ok(SpectrumResult {
                eigenvalues: vals[..k].to_vec(),
                eigenvectors,
                residuals: res,
                residual_floors: floors,
                k,
                iterations: iter,
            });
        }
        last_res = (res, floors);
    }
    Err(Error::Solver(format!(
        "no convergence in {} iterations; residuals {:?}, rounding floors {:?}",
        opts.max_iter,
        last_res.0.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>(),
        last_res.1.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>()
    )))
}

fn dense_lowest(a: &CsrMatrix, b: &CsrMatrix, k: usize) -> Result<SpectrumResult> {
    let n = a.nrows();
    let l = b
        .to_dense()
        .cholesky()
        .ok_or_else(|| Error::Solver("mass matrix is not positive definite".into()))?
        .l();
    let linv = l.clone().try_inverse().ok_or_else(|| Error::Solver("singular mass factor".into()))?;
    let c = &linv * a.to_dense() * linv.transpose();
    let (vals, vecs) = sym_eigen_sorted(c);
    let x = linv.transpose() * vecs;
    let mut eigenvectors: Block = (0..k).map(|j| x.column(j).iter().copied().collect()).collect();
    eigenvectors.iter_mut().for_each(|v| normalize_sign(v));
    let chol_b = Cholesky::new(b)?;
    let (res, floors) = residuals(a, b, &chol_b, &vals[..k], &eigenvectors);
    debug_assert_eq!(x.nrows(), n);
    Ok(SpectrumResult {
        eigenvalues: vals[..k].to_vec(),
        eigenvectors,
        residuals: res,
        residual_floors: floors,
        k,
        iterations: 0,
    })
}

/// Lowest `k` eigenpairs of `(K + C) v = λ B v` on the dof space.
pub fn lowest_eigenpairs(forms: &AssembledForms, k: usize, tol: f64) -> Result<SpectrumResult> {
    let opts = EigenOptions { tol, ..EigenOptions::default() };
    generalized_lowest(&forms.energy_matrix(), &forms.mass, k, &opts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_degree(l: usize) -> Self {
        if l % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

/// Orthonormal (Euclidean) basis of the even or odd dof functions, as a
/// sparse `n × m` matrix with columns `(e_i ± e_π(i)) / √2` and, for even
/// parity, `e_i` at fixed points.
pub fn parity_basis(dof_pairing: &[usize], parity: Parity) -> CsrMatrix {
    let n = dof_pairing.len();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut trips = Vec::new();
    let mut col = 0;
    for i in 0..n {
        let j = dof_pairing[i];
        if j == i {
            if parity == Parity::Even {
                trips.push((i, col, 1.0));
                col += 1;
            }
        } else if i < j {
            trips.push((i, col, s));
            trips.push((j, col, if parity == Parity::Even { s } else { -s }));
            col += 1;
        }
    }
    CsrMatrix::from_triplets(n, col, trips)
}

/// Lowest `k` eigenpairs restricted to one parity sector; eigenvectors are
/// returned on the full dof space.
pub fn sector_eigenpairs(forms: &AssembledForms, parity: Parity, k: usize, opts: &EigenOptions) -> Result<SpectrumResult> {
    let p = parity_basis(&forms.dof_pairing, parity);
    let a = forms.energy_matrix().congruence(&p);
    let b = forms.mass.congruence(&p);
    let mut res = generalized_lowest(&a, &b, k, opts)?;
    res.eigenvectors = res.eigenvectors.iter().map(|y| p.mul_vec(y)).collect();
    Ok(res)
}

/// `(λ + λ_i)^{-1}` in decreasing order.
pub fn resolvent_values(lambda: f64, eigenvalues: &[f64]) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::Contract(format!("resolvent parameter {lambda} must be positive")));
    }
    let mut s: Vec<f64> = eigenvalues.iter().map(|l| 1.0 / (lambda + l)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

fn orthonormal_or_err(x: &[Vec<f64>], b: &CsrMatrix) -> Result<Block> {
    if x.is_empty() || x.iter().any(|c| c.len() != b.nrows()) {
        return Err(Error::Contract("subspace vectors must be nonempty and match the mass matrix".into()));
    }
    b_orthonormalize(x, b).ok_or_else(|| Error::Contract("subspace vectors are not B-independent".into()))
}

/// Principal angles between `span(u)` and `span(v)` in the `B` inner
/// product, ascending. Small angles come from sines, large from cosines.
pub fn principal_angles(u: &[Vec<f64>], v: &[Vec<f64>], b: &CsrMatrix) -> Result<Vec<f64>> {
    let (mut qu, mut qv) = (orthonormal_or_err(u, b)?, orthonormal_or_err(v, b)?);
    if qu.len() < qv.len() {
        std::mem::swap(&mut qu, &mut qv);
    }
    let m = gram(&qu, &mul_block(b, &qv));
    let q = qv.len();
    let mut cosines: Vec<f64> = m.clone().svd(false, false).singular_values.iter().map(|c| c.min(1.0)).collect();
    cosines.sort_by(|a, b| b.total_cmp(a));
    let proj = combine(&qu, &m);
    let r: Block = qv.iter().zip(&proj).map(|(a, p)| a.iter().zip(p).map(|(x, y)| x - y).collect()).collect();
    let (mut sin2, _) = sym_eigen_sorted(gram(&r, &mul_block(b, &r)));
    sin2.iter_mut().for_each(|s| *s = s.clamp(0.0, 1.0));
    Ok((0..q)
        .map(|i| if sin2[i] < 0.5 { sin2[i].sqrt().asin() } else { cosines[i].max(0.0).acos() })
        .collect())
}

#[derive(Clone, Debug)]
pub struct Extension {
    /// Values on the full mesh.
    pub values: Vec<f64>,
    /// `‖v‖_{H¹(S²)} / ‖u‖_{H¹(M_h)}`.
    pub c0: f64,
}

/// Discrete harmonic extension from the holed mesh into the hole interiors
/// of the full mesh, with the factorization reused across functions.
pub struct HarmonicExtender {
    full: AssembledForms,
    holed: AssembledForms,
    holed_to_full: Vec<usize>,
    /// Full-mesh vertices inside holes.
    interior: Vec<usize>,
    /// For every full vertex, its position in `interior`.
    interior_pos: Vec<Option<usize>>,
    solver: Option<Cholesky>,
}

impl HarmonicExtender {
    /// `holed_metric` defines the `H¹(M_h)` norm; the full sphere is round.
    pub fn new(pair: &MeshPair, holed_metric: &dyn MetricField) -> Result<Self> {
        let nf = pair.full.num_vertices();
        if pair.holed_to_full.len() != pair.holed.num_vertices() || pair.holed_to_full.iter().any(|&i| i >= nf) {
            return Err(Error::Contract("holed mesh is not embedded in the full mesh".into()));
        }
        let free = MeasureSpec::BoundaryDensity { kappa: 0.0 };
        let full = assemble(&pair.full, &RoundMetric, free)?;
        let holed = assemble(&pair.holed, holed_metric, free)?;
        let mut on_holed = vec![false; nf];
        pair.holed_to_full.iter().for_each(|&i| on_holed[i] = true);
        let interior: Vec<usize> = (0..nf).filter(|&i| !on_holed[i]).collect();
        let mut interior_pos = vec![None; nf];
        interior.iter().enumerate().for_each(|(p, &i)| interior_pos[i] = Some(p));
        let solver = if interior.is_empty() {
            None
        } else {
            let trips = interior
                .iter()
                .enumerate()
                .flat_map(|(p, &i)| {
                    let pos = &interior_pos;
                    full.stiffness.row(i).filter_map(move |(j, v)| pos[j].map(|q| (p, q, v)))
                })
                .collect();
            let kii = CsrMatrix::from_triplets(interior.len(), interior.len(), trips);
            Some(Cholesky::new(&kii)?)
        };
        Ok(Self { full, holed, holed_to_full: pair.holed_to_full.clone(), interior, interior_pos, solver })
    }

    pub fn full_mass(&self) -> &CsrMatrix {
        &self.full.mass
    }

    /// Values of the holed-mesh function `u` on the full mesh.
    pub fn extend(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.holed_to_full.len() {
            return Err(Error::Contract(format!(
                "function has {} values, holed mesh has {} vertices",
                u.len(),
                self.holed_to_full.len()
            )));
        }
        let mut v = vec![0.0; self.interior_pos.len()];
        for (h, &f) in self.holed_to_full.iter().enumerate() {
            v[f] = u[h];
        }
        if let Some(solver) = &self.solver {
            let rhs: Vec<f64> = self
                .interior
                .iter()
                .map(|&i| {
                    -self.full.stiffness.row(i).filter(|(j, _)| self.interior_pos[*j].is_none()).map(|(j, k)| k * v[j]).sum::<f64>()
                })
                .collect();
            let x = solver.solve(&rhs);
            for (p, &i) in self.interior.iter().enumerate() {
                v[i] = x[p];
            }
        }
        Ok(v)
    }

    pub fn extension(&self, u: &[f64]) -> Result<Extension> {
        let values = self.extend(u)?;
        let h1 = |f: &AssembledForms, x: &[f64]| f.stiffness.quadratic_form(x) + f.mass.quadratic_form(x);
        let c0 = (h1(&self.full, &values) / h1(&self.holed, u)).sqrt();
        Ok(Extension { values, c0 })
    }
}

/// One-shot extension with the holed side measured in `holed_metric`.
pub fn harmonic_extension(u: &[f64], pair: &MeshPair, holed_metric: &dyn MetricField) -> Result<Extension> {
    HarmonicExtender::new(pair, holed_metric)?.extension(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CylinderConvention, HandleGeometry, HandleProfile, SpherePoint};
    use crate::mesh::{build_mesh_pair, icosphere, MeshOptions};

    fn diag(v: &[f64]) -> CsrMatrix {
        CsrMatrix::from_triplets(v.len(), v.len(), v.iter().enumerate().map(|(i, &x)| (i, i, x)).collect())
    }

    #[test]
    fn two_by_two_diagonal() {
        let r = generalized_lowest(&diag(&[2.0, 2.0]), &diag(&[1.0, 2.0]), 2, &EigenOptions::default()).unwrap();
        assert!((r.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((r.eigenvalues[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sparse_path_matches_dense_path() {
        let n = 400;
        let mut trips = Vec::new();
        for i in 0..n {
            trips.push((i, i, 2.0));
            if i + 1 < n {
                trips.push((i, i + 1, -1.0));
                trips.push((i + 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, trips);
        let b = diag(&vec![1.0; n]);
        let sparse = generalized_lowest(&a, &b, 4, &EigenOptions { dense_limit: 10, ..Default::default() }).unwrap();
        for (j, l) in sparse.eigenvalues.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((j + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((l - exact).abs() < 1e-10 * exact.max(1.0), "{l} vs {exact}");
        }
        for i in 0..4 {
            for j in 0..4 {
                let g = b.bilinear(&sparse.eigenvectors[i], &sparse.eigenvectors[j]);
                assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn icosphere_spectrum_and_constant_ground_state() {
        let mesh = icosphere(3);
        let forms = assemble(&mesh, &RoundMetric, MeasureSpec::InfiniteOnBoundary).unwrap();
        let r = lowest_eigenpairs(&forms, 9, 1e-8).unwrap();
        let exact = [0.0, 2.0, 2.0, 2.0, 6.0, 6.0, 6.0, 6.0, 6.0];
        assert!(r.eigenvalues[0].abs() < 1e-8 && r.eigenvalues[0] >= -1e-10);
        for (l, e) in r.eigenvalues.iter().zip(exact).skip(1) {
            assert!((l - e).abs() / e < 0.03, "{l}");
        }
        let v = &r.eigenvectors[0];
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
        assert!(sd / mean.abs() < 1e-8);
        assert!(r.residuals.iter().all(|&x| x <= 1e-8));
    }

    #[test]
    fn shift_does_not_change_eigenvalues() {
        let mesh = icosphere(3);
        let forms = assemble(&mesh, &RoundMetric, MeasureSpec::InfiniteOnBoundary).unwrap();
        let (a, b) = (forms.energy_matrix(), &forms.mass);
        let r1 = generalized_lowest(&a, b, 4, &EigenOptions { shift: 0.1, ..Default::default() }).unwrap();
        let r2 = generalized_lowest(&a, b, 4, &EigenOptions { shift: 3.0, ..Default::default() }).unwrap();
        for (x, y) in r1.eigenvalues.iter().zip(&r2.eigenvalues) {
            assert!((x - y).abs() < 1e-7);
        }
    }

    #[test]
    fn parity_sectors_split_the_spectrum() {
        let mesh = icosphere(3);
        let forms = assemble(&mesh, &RoundMetric, MeasureSpec::InfiniteOnBoundary).unwrap();
        let opts = EigenOptions::default();
        let even = sector_eigenpairs(&forms, Parity::Even, 6, &opts).unwrap();
        let odd = sector_eigenpairs(&forms, Parity::Odd, 3, &opts).unwrap();
        assert!(even.eigenvalues[0].abs() < 1e-8);
        assert!(even.eigenvalues[1..].iter().all(|l| (l - 6.0).abs() < 0.2));
        assert!(odd.eigenvalues.iter().all(|l| (l - 2.0).abs() < 0.05));
        for v in &odd.eigenvectors {
            assert!((0..v.len()).all(|i| (v[i] + v[mesh.pairing[i]]).abs() < 1e-12));
        }
    }

    #[test]
    fn resolvent_values_examples() {
        assert_eq!(resolvent_values(1.0, &[0.0]).unwrap(), vec![1.0]);
        assert!((resolvent_values(1.0, &[2.0]).unwrap()[0] - 1.0 / 3.0).abs() < 1e-16);
        let s = resolvent_values(1.0, &[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(s.windows(2).all(|w| w[0] > w[1]));
        assert!(resolvent_values(0.0, &[1.0]).is_err());
    }

    #[test]
    fn principal_angle_examples() {
        let b = diag(&[1.0, 1.0, 1.0]);
        let u = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        assert!(principal_angles(&u, &u, &b).unwrap().iter().all(|&a| a.abs() < 1e-14));
        let ortho = principal_angles(&[vec![1.0, 0.0, 0.0]], &[vec![0.0, 0.0, 1.0]], &b).unwrap();
        assert!((ortho[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
        let t = 0.3f64;
        let rotated = principal_angles(&[vec![1.0, 0.0, 0.0]], &[vec![t.cos(), t.sin(), 0.0]], &b).unwrap();
        assert!((rotated[0] - t).abs() < 1e-12);
        let tiny = 1e-9f64;
        let small = principal_angles(&[vec![1.0, 0.0, 0.0]], &[vec![tiny.cos(), tiny.sin(), 0.0]], &b).unwrap();
        assert!((small[0] - tiny).abs() < 1e-20);
        let dependent = vec![vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]];
        assert!(matches!(principal_angles(&dependent, &u, &b), Err(Error::Contract(_))));
    }

    #[test]
    fn angles_in_a_weighted_inner_product() {
        // With B = diag(1, 4), e1 and e1 + e2 make the angle atan(2).
        let b = diag(&[1.0, 4.0]);
        let a = principal_angles(&[vec![1.0, 0.0]], &[vec![1.0, 1.0]], &b).unwrap();
        assert!((a[0] - 2.0f64.atan()).abs() < 1e-14);
    }

    fn single_hole_pair(r: f64, segs: usize) -> MeshPair {
        let prof = HandleProfile::new(r / 0.4, 3.0, 0.4, 0.8, 1.0).unwrap();
        let c = SpherePoint::normalized(vec![0.3, -0.2, 0.9]).unwrap();
        let h = HandleGeometry::new(prof, &c, CylinderConvention::Section3).unwrap();
        build_mesh_pair(&[h], &MeshOptions { target_edge: 0.15, loop_segments: segs, ..Default::default() }).unwrap()
    }

    #[test]
    fn extension_of_constants_and_shared_values() {
        let pair = single_hole_pair(0.1, 16);
        let ext = HarmonicExtender::new(&pair, &RoundMetric).unwrap();
        let u = vec![2.5; pair.holed.num_vertices()];
        let e = ext.extension(&u).unwrap();
        assert!(e.values.iter().all(|x| (x - 2.5).abs() < 1e-12));
        let full_area = pair.full.total_area();
        let holed_area = pair.holed.total_area();
        assert!((e.c0 - (full_area / holed_area).sqrt()).abs() < 1e-12);
        assert!((e.c0 - 1.0).abs() < 1e-2);
        let w: Vec<f64> = pair.holed.vertices.iter().map(|p| p.x * p.y + p.z).collect();
        let we = ext.extend(&w).unwrap();
        for (h, &f) in pair.holed_to_full.iter().enumerate() {
            assert_eq!(we[f], w[h]);
        }
        assert!(matches!(ext.extend(&w[1..]), Err(Error::Contract(_))));
    }

    #[test]
    fn extension_of_linear_function_is_nearly_linear() {
        let pair = single_hole_pair(0.1, 24);
        let u: Vec<f64> = pair.holed.vertices.iter().map(|p| p.z).collect();
        let e = harmonic_extension(&u, &pair, &RoundMetric).unwrap();
        let err = pair.full.vertices.iter().zip(&e.values).map(|(p, v)| (p.z - v).abs()).fold(0.0, f64::max);
        assert!(err < 5e-3, "{err}");
        assert!(e.c0 > 1.0 && e.c0 < 1.05, "{}", e.c0);
    }
}
