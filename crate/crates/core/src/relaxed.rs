//! Relaxed manifolds: the sphere minus antipodal caps, the glued metric, the
//! antipodal involution and a coupling measure, together with the relaxed
//! energy and the check that it represents the glued surface.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::AssembledForms;
use crate::geometry::{geodesic_distance3, CylinderConvention, GluedMetric, HandleGeometry, HandleProfile, SpherePoint, Vec3};
use crate::mesh::{GluedMesh, SphereMesh};
use crate::packing::Packing;
use crate::sparse::dot;

/// Coupling measure `μ` of the non-local term `∫ [u - u∘T]² dμ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    /// `+∞` on the hole boundaries: the gluing condition `u = u∘T` there.
    InfiniteOnBoundary,
    /// `κ` times arc length on the hole boundaries.
    BoundaryDensity { kappa: f64 },
    /// `κ` times the volume measure.
    VolumeDensity { kappa: f64 },
}

impl MeasureSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MeasureSpec::InfiniteOnBoundary => Ok(()),
            MeasureSpec::BoundaryDensity { kappa } | MeasureSpec::VolumeDensity { kappa } => {
                if kappa >= 0.0 && kappa.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Domain(format!("coupling density {kappa} must be finite and >= 0")))
                }
            }
        }
    }

    pub fn kappa(&self) -> Option<f64> {
        match *self {
            MeasureSpec::InfiniteOnBoundary => None,
            MeasureSpec::BoundaryDensity { kappa } | MeasureSpec::VolumeDensity { kappa } => Some(kappa),
        }
    }
}

pub const RELAXED_FORMAT: u32 = 1;

/// `(S² \ E, g, T, μ)` with `E` the union of the deleted caps about every
/// handle center and its antipode and `T(x) = -x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxedManifold {
    pub format: u32,
    pub holes: Vec<HandleGeometry>,
    pub measure: MeasureSpec,
}

impl RelaxedManifold {
    pub fn new(holes: Vec<HandleGeometry>, measure: MeasureSpec) -> Result<Self> {
        measure.validate()?;
        let rm = Self { format: RELAXED_FORMAT, holes, measure };
        rm.check_disjoint()?;
        Ok(rm)
    }

    /// One handle per packing center, glued with the infinite measure.
    pub fn from_handles(packing: &Packing, profile: &HandleProfile, convention: CylinderConvention) -> Result<Self> {
        if packing.d != 2 {
            return Err(Error::Contract("relaxed manifolds are built on S^2".into()));
        }
        let holes = packing
            .centers
            .iter()
            .map(|c| HandleGeometry::new(*profile, c, convention))
            .collect::<Result<Vec<_>>>()?;
        Self::new(holes, MeasureSpec::InfiniteOnBoundary)
    }

    fn check_disjoint(&self) -> Result<()> {
        let caps = self.cap_centers();
        for a in 0..caps.len() {
            for b in (a + 1)..caps.len() {
                let (ra, rb) = (self.holes[a / 2].r_hole, self.holes[b / 2].r_hole);
                let d = geodesic_distance3(&caps[a], &caps[b]);
                if d <= ra + rb {
                    return Err(Error::Geometry(format!("deleted caps {a} and {b} overlap (distance {d:.6e})")));
                }
            }
        }
        Ok(())
    }

    /// Cap centers in loop order: handle `k` contributes `x_k, -x_k`.
    pub fn cap_centers(&self) -> Vec<Vec3> {
        self.holes.iter().flat_map(|h| [h.center(), -h.center()]).collect()
    }

    pub fn num_holes(&self) -> usize {
        2 * self.holes.len()
    }

    pub fn metric(&self) -> GluedMetric {
        GluedMetric::new(self.holes.clone())
    }

    pub fn involution(&self, p: &SpherePoint) -> Result<SpherePoint> {
        crate::geometry::antipodal(p)
    }

    /// Cap center paired with cap `k` by the involution.
    pub fn paired_cap(&self, k: usize) -> usize {
        k ^ 1
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("serialization failed: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let rm: Self = toml::from_str(text).map_err(|e| Error::Parse(format!("bad relaxed manifold: {e}")))?;
        if rm.format != RELAXED_FORMAT {
            return Err(Error::Parse(format!("unsupported format {}", rm.format)));
        }
        rm.measure.validate()?;
        Ok(rm)
    }
}

/// `D(u) + ∫[u - u∘T]² dμ + λ‖u‖² - 2⟨f, u⟩` for vertex values `u`, `f` on
/// the holed mesh. With the infinite measure the value is `+∞` unless `u`
/// agrees with `u∘T` on every loop vertex.
pub fn relaxed_energy(
    u: &[f64],
    mesh: &SphereMesh,
    rm: &RelaxedManifold,
    forms: &AssembledForms,
    lambda: f64,
    f: &[f64],
) -> Result<f64> {
    let n = mesh.num_vertices();
    if u.len() != n || f.len() != n || forms.reduction.dof_of_vertex.len() != n {
        return Err(Error::Contract(format!(
            "vector lengths {} / {} and forms for {} vertices do not match a mesh with {n} vertices",
            u.len(),
            f.len(),
            forms.reduction.dof_of_vertex.len()
        )));
    }
    if rm.measure != forms.measure {
        return Err(Error::Contract("forms were assembled for a different measure".into()));
    }
    if let MeasureSpec::InfiniteOnBoundary = rm.measure {
        if !satisfies_gluing(u, mesh) {
            return Ok(f64::INFINITY);
        }
    }
    let ud = forms.reduction.restrict(u);
    let fd = forms.reduction.restrict(f);
    let bu = forms.mass.mul_vec(&ud);
    Ok(forms.stiffness.quadratic_form(&ud) + forms.coupling.quadratic_form(&ud) + lambda * dot(&ud, &bu)
        - 2.0 * dot(&fd, &bu))
}

/// `u(v) = u(π(v))` on every loop vertex, up to rounding.
pub fn satisfies_gluing(u: &[f64], mesh: &SphereMesh) -> bool {
    let scale = u.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    mesh.loops
        .iter()
        .flat_map(|l| l.vertices.iter())
        .all(|&v| (u[v] - u[mesh.pairing[v]]).abs() <= 1e-14 * scale)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EnergyComparison {
    /// Both energies finite; `mismatch = |D_N - D_M| / D_N` (0 when both vanish).
    Matched { glued: f64, relaxed: f64, mismatch: f64 },
    /// The function violates the gluing condition: the relaxed energy is
    /// infinite while every glued function has finite energy.
    Incomparable { glued: f64 },
}

/// Compares the Dirichlet energy of a holed-mesh function `u` under the
/// relaxed forms with its energy on the glued surface.
pub fn compare_energies(
    u: &[f64],
    holed: &SphereMesh,
    glued: &GluedMesh,
    glued_forms: &AssembledForms,
    relaxed_forms: &AssembledForms,
) -> Result<EnergyComparison> {
    check_compatible(holed, glued, glued_forms, relaxed_forms)?;
    if !satisfies_gluing(u, holed) {
        // Glue by keeping the representative values; its energy is finite.
        let v = relaxed_forms.reduction.restrict(u);
        return Ok(EnergyComparison::Incomparable { glued: glued_forms.stiffness.quadratic_form(&v) });
    }
    let v = glued_values(u, glued);
    let d_n = glued_forms.stiffness.quadratic_form(&v);
    let d_m = relaxed_forms.stiffness.quadratic_form(&relaxed_forms.reduction.restrict(u))
        + relaxed_forms.coupling.quadratic_form(&relaxed_forms.reduction.restrict(u));
    let mismatch = if d_n == 0.0 && d_m == 0.0 { 0.0 } else { (d_n - d_m).abs() / d_n.abs().max(f64::MIN_POSITIVE) };
    Ok(EnergyComparison::Matched { glued: d_n, relaxed: d_m, mismatch })
}

fn glued_values(u: &[f64], glued: &GluedMesh) -> Vec<f64> {
    let mut v = vec![0.0; glued.num_vertices];
    for (i, &g) in glued.merge.iter().enumerate() {
        v[g] = u[i];
    }
    v
}

fn check_compatible(
    holed: &SphereMesh,
    glued: &GluedMesh,
    glued_forms: &AssembledForms,
    relaxed_forms: &AssembledForms,
) -> Result<()> {
    if glued.merge.len() != holed.num_vertices()
        || glued_forms.stiffness.nrows() != glued.num_vertices
        || relaxed_forms.reduction.dof_of_vertex.len() != holed.num_vertices()
        || relaxed_forms.reduction.n_dofs != glued.num_vertices
    {
        return Err(Error::Contract("glued and holed meshes do not correspond vertex by vertex".into()));
    }
    Ok(())
}

/// Largest relative mismatch `|D_N(v) - D_M(u)| / D_N(v)` over `trials`
/// random glued functions `v` and their pull-backs `u`.
pub fn representation_check(
    holed: &SphereMesh,
    glued: &GluedMesh,
    glued_forms: &AssembledForms,
    relaxed_forms: &AssembledForms,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    check_compatible(holed, glued, glued_forms, relaxed_forms)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let v: Vec<f64> = (0..glued.num_vertices).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = glued.lift(&v);
        match compare_energies(&u, holed, glued, glued_forms, relaxed_forms)? {
            EnergyComparison::Matched { mismatch, .. } => worst = worst.max(mismatch),
            EnergyComparison::Incomparable { .. } => {
                return Err(Error::Contract("lifted glued function violates the gluing condition".into()))
            }
        }
    }
    Ok(worst)
}
