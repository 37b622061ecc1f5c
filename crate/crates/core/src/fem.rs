//! P1 finite elements on spherical triangulations.
//!
//! Each flat triangle is integrated with the metric frozen at its centroid
//! (pushed to the sphere) and expressed in the triangle's own plane. With
//! the infinite coupling measure, paired loop vertices share one degree of
//! freedom; the numbering matches [`GluedMesh`] exactly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{FrameMetric, MetricField, Vec3};
use crate::mesh::{GluedMesh, SphereMesh};
use crate::relaxed::MeasureSpec;
use crate::sparse::{dot, Cholesky, CsrMatrix};

/// Map from mesh vertices to degrees of freedom.
#[derive(Clone, Debug, PartialEq)]
pub struct Reduction {
    pub dof_of_vertex: Vec<usize>,
    pub n_dofs: usize,
    /// Lowest-numbered vertex carrying each dof.
    pub representative: Vec<usize>,
}

impl Reduction {
    pub fn identity(n: usize) -> Self {
        Self { dof_of_vertex: (0..n).collect(), n_dofs: n, representative: (0..n).collect() }
    }

    pub fn from_merge(merge: &[usize]) -> Self {
        let n_dofs = merge.iter().map(|&d| d + 1).max().unwrap_or(0);
        let mut representative = vec![usize::MAX; n_dofs];
        for (v, &d) in merge.iter().enumerate() {
            if representative[d] == usize::MAX {
                representative[d] = v;
            }
        }
        Self { dof_of_vertex: merge.to_vec(), n_dofs, representative }
    }

    /// Paired loop vertices share a dof.
    pub fn gluing(mesh: &SphereMesh) -> Result<Self> {
        Ok(Self::from_merge(&GluedMesh::from_holed(mesh)?.merge))
    }

    pub fn is_identity(&self) -> bool {
        self.n_dofs == self.dof_of_vertex.len()
    }

    /// Dof values read off the representative vertices.
    pub fn restrict(&self, u: &[f64]) -> Vec<f64> {
        self.representative.iter().map(|&v| u[v]).collect()
    }

    pub fn expand(&self, u: &[f64]) -> Vec<f64> {
        self.dof_of_vertex.iter().map(|&d| u[d]).collect()
    }

    /// Vertex-by-dof 0/1 matrix.
    pub fn prolongation(&self) -> CsrMatrix {
        let trips = self.dof_of_vertex.iter().enumerate().map(|(v, &d)| (v, d, 1.0)).collect();
        CsrMatrix::from_triplets(self.dof_of_vertex.len(), self.n_dofs, trips)
    }
}

/// Stiffness, mass and coupling matrices on the dof space.
#[derive(Clone, Debug)]
pub struct AssembledForms {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub coupling: CsrMatrix,
    pub reduction: Reduction,
    /// Involution acting on dofs; fixed points are glued loop dofs.
    pub dof_pairing: Vec<usize>,
    pub measure: MeasureSpec,
}

/// Numerical checks of the structural identities of [`AssembledForms`].
#[derive(Clone, Copy, Debug)]
pub struct FormInvariants {
    /// `max |K·1| / max |K|`.
    pub constant_kernel: f64,
    pub stiffness_symmetry: f64,
    pub mass_symmetry: f64,
    pub min_mass_diagonal: f64,
    /// `1ᵀ B 1`.
    pub volume: f64,
    /// `max |PᵀKP - K| / max |K|` for the dof involution `P`.
    pub symmetry_transport: f64,
}

impl AssembledForms {
    pub fn n_dofs(&self) -> usize {
        self.reduction.n_dofs
    }

    /// `K + C`.
    pub fn energy_matrix(&self) -> CsrMatrix {
        self.stiffness.add_scaled(&self.coupling, 1.0)
    }

    pub fn volume(&self) -> f64 {
        let ones = vec![1.0; self.n_dofs()];
        self.mass.quadratic_form(&ones)
    }

    pub fn pairing_matrix(&self) -> CsrMatrix {
        let n = self.n_dofs();
        CsrMatrix::from_triplets(n, n, self.dof_pairing.iter().enumerate().map(|(i, &j)| (i, j, 1.0)).collect())
    }

    pub fn invariants(&self) -> FormInvariants {
        let n = self.n_dofs();
        let k_max = self.stiffness.max_abs().max(f64::MIN_POSITIVE);
        let row_sums = self.stiffness.mul_vec(&vec![1.0; n]);
        let p = self.pairing_matrix();
        let moved = self.stiffness.congruence(&p).add_scaled(&self.stiffness, -1.0);
        FormInvariants {
            constant_kernel: row_sums.iter().fold(0.0f64, |m, v| m.max(v.abs())) / k_max,
            stiffness_symmetry: self.stiffness.symmetry_error(),
            mass_symmetry: self.mass.symmetry_error(),
            min_mass_diagonal: self.mass.diagonal().into_iter().fold(f64::INFINITY, f64::min),
            volume: self.volume(),
            symmetry_transport: moved.max_abs() / k_max,
        }
    }
}

type Local = [[f64; 3]; 3];

/// P1 stiffness and consistent mass of the flat triangle `p`.
pub fn element_matrices(p: &[Vec3; 3], metric: &dyn MetricField) -> std::result::Result<(Local, Local), String> {
    let normal = (p[1] - p[0]).cross(&(p[2] - p[0]));
    let twice_area = normal.norm();
    if !(twice_area > 0.0) {
        return Err("degenerate triangle".into());
    }
    let nu = normal / twice_area;
    let area = 0.5 * twice_area;
    let centroid = (p[0] + p[1] + p[2]) / 3.0;
    let labels: Vec<usize> = p.iter().filter_map(|v| metric.piece_label(v)).collect();
    if labels.windows(2).any(|w| w[0] != w[1]) {
        return Err("triangle straddles a metric interface".into());
    }
    let frame = metric.frame_metric(&centroid.normalize()).map_err(|e| e.to_string())?;
    let frame = match frame {
        FrameMetric::Round => FrameMetric::Round,
        FrameMetric::Diagonal { e1, a, b, .. } => {
            let e1p = (e1 - nu * e1.dot(&nu)).normalize();
            FrameMetric::Diagonal { e1: e1p, e2: nu.cross(&e1p), a, b }
        }
    };
    let density = frame.density();
    let grads: [Vec3; 3] =
        std::array::from_fn(|i| nu.cross(&(p[(i + 2) % 3] - p[(i + 1) % 3])) / twice_area);
    let mut k = [[0.0; 3]; 3];
    let mut m = [[0.0; 3]; 3];
    let scale = area * density;
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = scale * frame.inverse_bilinear(&grads[i], &grads[j]);
            m[i][j] = scale * if i == j { 2.0 } else { 1.0 } / 12.0;
        }
    }
    Ok((k, m))
}

/// Assembles `(K, B)` for triangles given by dof triples and corner positions.
fn assemble_elements(
    n_dofs: usize,
    triangles: &[[usize; 3]],
    corners: &[[Vec3; 3]],
    metric: &dyn MetricField,
) -> Result<(CsrMatrix, CsrMatrix)> {
    let locals: Vec<(Local, Local)> = corners
        .par_iter()
        .enumerate()
        .map(|(t, c)| element_matrices(c, metric).map_err(|reason| Error::Assembly { triangle: t, reason }))
        .collect::<Result<_>>()?;
    let mut kt = Vec::with_capacity(9 * triangles.len());
    let mut mt = Vec::with_capacity(9 * triangles.len());
    for (tri, (k, m)) in triangles.iter().zip(&locals) {
        for i in 0..3 {
            for j in 0..3 {
                kt.push((tri[i], tri[j], k[i][j]));
                mt.push((tri[i], tri[j], m[i][j]));
            }
        }
    }
    Ok((CsrMatrix::from_triplets(n_dofs, n_dofs, kt), CsrMatrix::from_triplets(n_dofs, n_dofs, mt)))
}

/// Lumped arc-length weight of every loop vertex (chord lengths).
pub fn loop_weights(mesh: &SphereMesh) -> Vec<f64> {
    let mut w = vec![0.0; mesh.num_vertices()];
    for l in &mesh.loops {
        let n = l.vertices.len();
        for j in 0..n {
            let (a, b) = (l.vertices[j], l.vertices[(j + 1) % n]);
            let half = 0.5 * (mesh.vertices[a] - mesh.vertices[b]).norm();
            w[a] += half;
            w[b] += half;
        }
    }
    w
}

/// `I - P` for the vertex pairing `P`.
fn jump_operator(pairing: &[usize]) -> CsrMatrix {
    let n = pairing.len();
    let mut trips = Vec::with_capacity(2 * n);
    for (i, &j) in pairing.iter().enumerate() {
        trips.push((i, i, 1.0));
        trips.push((i, j, -1.0));
    }
    CsrMatrix::from_triplets(n, n, trips)
}

pub fn assemble(mesh: &SphereMesh, metric: &dyn MetricField, measure: MeasureSpec) -> Result<AssembledForms> {
    measure.validate()?;
    let n = mesh.num_vertices();
    if mesh.pairing.len() != n {
        return Err(Error::Contract("mesh pairing does not cover every vertex".into()));
    }
    let reduction = match measure {
        MeasureSpec::InfiniteOnBoundary => Reduction::gluing(mesh)?,
        _ => Reduction::identity(n),
    };
    let dof_tris: Vec<[usize; 3]> = mesh.triangles.iter().map(|t| t.map(|v| reduction.dof_of_vertex[v])).collect();
    let corners: Vec<[Vec3; 3]> = mesh.triangles.iter().map(|t| t.map(|v| mesh.vertices[v])).collect();
    let (stiffness, mass) = assemble_elements(reduction.n_dofs, &dof_tris, &corners, metric)?;
    let coupling = match measure {
        MeasureSpec::InfiniteOnBoundary => CsrMatrix::zeros(reduction.n_dofs, reduction.n_dofs),
        MeasureSpec::BoundaryDensity { kappa } => {
            let w = loop_weights(mesh);
            let diag = CsrMatrix::from_triplets(n, n, (0..n).filter(|&i| w[i] > 0.0).map(|i| (i, i, w[i])).collect());
            diag.congruence(&jump_operator(&mesh.pairing)).scale(kappa)
        }
        MeasureSpec::VolumeDensity { kappa } => mass.congruence(&jump_operator(&mesh.pairing)).scale(kappa),
    };
    let dof_pairing =
        reduction.representative.iter().map(|&v| reduction.dof_of_vertex[mesh.pairing[v]]).collect();
    Ok(AssembledForms { stiffness, mass, coupling, reduction, dof_pairing, measure })
}

/// Forms of the glued surface, one dof per glued vertex.
pub fn assemble_glued(holed: &SphereMesh, glued: &GluedMesh, metric: &dyn MetricField) -> Result<AssembledForms> {
    if glued.merge.len() != holed.num_vertices() {
        return Err(Error::Contract("glued mesh does not come from this holed mesh".into()));
    }
    let (stiffness, mass) = assemble_elements(glued.num_vertices, &glued.triangles, &glued.corners, metric)?;
    let reduction = Reduction::from_merge(&glued.merge);
    let dof_pairing = reduction.representative.iter().map(|&v| glued.merge[holed.pairing[v]]).collect();
    Ok(AssembledForms {
        stiffness,
        mass,
        coupling: CsrMatrix::zeros(glued.num_vertices, glued.num_vertices),
        reduction,
        dof_pairing,
        measure: MeasureSpec::InfiniteOnBoundary,
    })
}

/// Solves `(K + C + λB) u = B f` on the dof space.
pub fn solve_resolvent(forms: &AssembledForms, f: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Contract(format!("resolvent parameter {lambda} must be positive")));
    }
    if f.len() != forms.n_dofs() {
        return Err(Error::Contract(format!("right-hand side has {} entries, expected {}", f.len(), forms.n_dofs())));
    }
    let a = forms.energy_matrix().add_scaled(&forms.mass, lambda);
    let rhs = forms.mass.mul_vec(f);
    let u = Cholesky::new(&a)?.solve(&rhs);
    let au = a.mul_vec(&u);
    let res = au.iter().zip(&rhs).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm = dot(&rhs, &rhs).sqrt();
    if res > 1e-10 * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::Solver(format!("resolvent residual {res:.3e} against right-hand side {norm:.3e}")));
    }
    Ok(u)
}

/// `uᵀ K u` for a dof vector.
pub fn dirichlet_energy(forms: &AssembledForms, u: &[f64]) -> Result<f64> {
    if u.len() != forms.n_dofs() {
        return Err(Error::Contract(format!("vector has {} entries, expected {}", u.len(), forms.n_dofs())));
    }
    Ok(forms.stiffness.quadratic_form(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CylinderConvention, GluedMetric, HandleProfile, RoundMetric};
    use crate::mesh::{build_mesh_pair, icosphere, MeshOptions};
    use crate::packing::build_packing;
    use crate::relaxed::RelaxedManifold;
    use std::f64::consts::PI;

    fn relaxed(eta: f64, eps: f64) -> RelaxedManifold {
        let p = build_packing(eta, 2, 0).unwrap();
        let prof = HandleProfile::new(eps, 3.0, 0.4, 0.8, 1.0).unwrap();
        RelaxedManifold::from_handles(&p, &prof, CylinderConvention::Section3).unwrap()
    }

    #[test]
    fn icosphere_forms_satisfy_invariants() {
        let mesh = icosphere(3);
        let forms = assemble(&mesh, &RoundMetric, MeasureSpec::InfiniteOnBoundary).unwrap();
        let inv = forms.invariants();
        assert!(inv.constant_kernel < 1e-12);
        assert!(inv.stiffness_symmetry < 1e-14);
        assert!(inv.mass_symmetry < 1e-14);
        assert!(inv.min_mass_diagonal > 0.0);
        assert!((inv.volume - mesh.total_area()).abs() < 1e-12);
        assert!(inv.symmetry_transport < 1e-12);
    }

    #[test]
    fn coordinate_functions_have_rayleigh_quotient_near_two() {
        let mesh = icosphere(4);
        let forms = assemble(&mesh, &RoundMetric, MeasureSpec::InfiniteOnBoundary).unwrap();
        let z: Vec<f64> = mesh.vertices.iter().map(|v| v.z).collect();
        let rq = dirichlet_energy(&forms, &z).unwrap() / forms.mass.quadratic_form(&z);
        assert!((rq - 2.0).abs() < 0.01, "{rq}");
    }

    #[test]
    fn resolvent_of_a_harmonic_is_scaled() {
        let mesh = icosphere(4);
        let forms = assemble(&mesh, &RoundMetric, MeasureSpec::InfiniteOnBoundary).unwrap();
        let f: Vec<f64> = mesh.vertices.iter().map(|v| v.x).collect();
        let u = solve_resolvent(&forms, &f, 1.0).unwrap();
        // (−Δ + 1)⁻¹ x = x / 3 up to discretization error.
        let err = u.iter().zip(&f).map(|(a, b)| (a - b / 3.0).abs()).fold(0.0, f64::max);
        assert!(err < 5e-3, "{err}");
        assert!(matches!(solve_resolvent(&forms, &f, 0.0), Err(Error::Contract(_))));
    }

    #[test]
    fn glued_metric_forms_on_holed_mesh() {
        let rm = relaxed(1.0, 0.1);
        let pair = build_mesh_pair(&rm.holes, &MeshOptions { target_edge: 0.2, ..MeshOptions::default() }).unwrap();
        let forms = assemble(&pair.holed, &rm.metric(), MeasureSpec::InfiniteOnBoundary).unwrap();
        let inv = forms.invariants();
        assert!(inv.constant_kernel < 1e-10);
        assert!(inv.stiffness_symmetry < 1e-14);
        assert!(inv.min_mass_diagonal > 0.0);
        assert!(inv.symmetry_transport < 1e-10, "{}", inv.symmetry_transport);
        // Glued loops become fixed dofs of the involution.
        let fixed = forms.dof_pairing.iter().enumerate().filter(|(i, &j)| *i == j).count();
        let loop_vertices: usize = pair.holed.loops.iter().step_by(2).map(|l| l.vertices.len()).sum();
        assert_eq!(fixed, loop_vertices);
        assert_eq!(forms.n_dofs(), pair.holed.num_vertices() - loop_vertices);
    }

    #[test]
    fn glued_and_relaxed_stiffness_coincide() {
        let rm = relaxed(1.0, 0.1);
        let pair = build_mesh_pair(&rm.holes, &MeshOptions { target_edge: 0.2, ..MeshOptions::default() }).unwrap();
        let glued = GluedMesh::from_holed(&pair.holed).unwrap();
        let metric = rm.metric();
        let a = assemble(&pair.holed, &metric, MeasureSpec::InfiniteOnBoundary).unwrap();
        let b = assemble_glued(&pair.holed, &glued, &metric).unwrap();
        assert_eq!(a.stiffness, b.stiffness);
        assert_eq!(a.mass, b.mass);
        assert_eq!(a.dof_pairing, b.dof_pairing);
    }

    #[test]
    fn annulus_volume_follows_the_glued_metric() {
        // Only the annuli change: compare the volume difference with the
        // exact one, 2π ε′²/slope (sin R - sin r) against 2π (cos r - cos R)
        // per annulus. The density varies like 1/θ, so centroid quadrature
        // converges as the loop resolution grows.
        let rm = relaxed(1.4, 0.2);
        let h = &rm.holes[0];
        let eps = h.profile.epsilon;
        let round_ann = 2.0 * PI * (h.r_hole.cos() - h.big_r_hole.cos());
        let glued_ann = 2.0 * PI * eps * eps / h.profile.slope() * (h.big_r_hole.sin() - h.r_hole.sin());
        let exact = 2.0 * (glued_ann - round_ann);
        let mut errors = Vec::new();
        for segs in [16, 48] {
            let opts = MeshOptions { target_edge: 0.2, loop_segments: segs, ..MeshOptions::default() };
            let pair = build_mesh_pair(&rm.holes, &opts).unwrap();
            let round = assemble(&pair.holed, &RoundMetric, MeasureSpec::InfiniteOnBoundary).unwrap().volume();
            let glued = assemble(&pair.holed, &rm.metric(), MeasureSpec::InfiniteOnBoundary).unwrap().volume();
            errors.push(((glued - round) - exact).abs() / exact);
        }
        assert!(errors[0] < 2e-2, "{errors:?}");
        assert!(errors[1] < errors[0] / 4.0, "{errors:?}");
    }

    #[test]
    fn hole_interior_triangles_are_rejected() {
        let rm = relaxed(1.4, 0.2);
        let pair = build_mesh_pair(&rm.holes, &MeshOptions { target_edge: 0.2, ..MeshOptions::default() }).unwrap();
        let err = assemble(&pair.full, &rm.metric(), MeasureSpec::InfiniteOnBoundary).unwrap_err();
        assert!(matches!(err, Error::Assembly { .. }));
    }

    #[test]
    fn straddling_triangle_is_named() {
        let rm = relaxed(1.4, 0.2);
        let metric: GluedMetric = rm.metric();
        let h = &rm.holes[0];
        let c = h.center();
        let (t1, t2) = crate::geometry::tangent_frame(&c);
        let at = |rho: f64, phi: f64| crate::geometry::point_at(&c, &t1, &t2, rho, phi);
        let r = h.big_r_hole;
        let tri = [at(0.9 * r, 0.0), at(1.2 * r, 0.05), at(1.2 * r, -0.05)];
        let err = assemble_elements(3, &[[0, 1, 2]], &[tri], &metric).unwrap_err();
        assert!(matches!(err, Error::Assembly { triangle: 0, .. }));
    }
}
