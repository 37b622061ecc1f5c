//! Sphere and cylinder metrics, the antipodal involution, the linear handle
//! profile family and the attaching map of a handle.
//!
//! Points of `S^d` live in `R^{d+1}`. Cylindrical coordinates split a point
//! as `x = (y, r ω)` with `y² + r² = 1` and `ω ∈ S^{d-1}`; the axis of the
//! chart is the first coordinate. Meshes and the glued metric only exist for
//! `d = 2`, where points are plain [`Vec3`] values.

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

const UNIT_TOL: f64 = 1e-12;

/// Cylindrical chart data `(y, r, ω)` of a sphere point.
#[derive(Clone, Debug, PartialEq)]
pub struct CylindricalChart {
    pub y: f64,
    pub r: f64,
    pub omega: Vec<f64>,
}

/// A point of the unit sphere `S^d ⊂ R^{d+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpherePoint {
    coords: Vec<f64>,
    chart: Option<CylindricalChart>,
}

impl SpherePoint {
    /// Wraps `coords`, which must already have unit length.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidPoint(format!(
                "need at least 2 coordinates, got {}",
                coords.len()
            )));
        }
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidPoint(format!("|x| = {norm} is not 1")));
        }
        Ok(Self { coords, chart: None })
    }

    pub fn normalized(coords: Vec<f64>) -> Result<Self> {
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidPoint("cannot normalize a zero vector".into()));
        }
        Self::new(coords.into_iter().map(|c| c / norm).collect())
    }

    pub fn from_vec3(v: &Vec3) -> Result<Self> {
        Self::new(vec![v.x, v.y, v.z])
    }

    /// Builds `(y, r ω)` and attaches the chart.
    pub fn from_cylindrical(y: f64, r: f64, omega: &[f64]) -> Result<Self> {
        if r < 0.0 || (y * y + r * r - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidPoint(format!("y² + r² = {} with r = {r}", y * y + r * r)));
        }
        let mut coords = Vec::with_capacity(omega.len() + 1);
        coords.push(y);
        coords.extend(omega.iter().map(|w| r * w));
        let p = Self::new(coords)?;
        Ok(Self {
            chart: Some(CylindricalChart { y, r, omega: omega.to_vec() }),
            ..p
        })
    }

    /// Attaches the cylindrical chart computed from the coordinates.
    pub fn with_chart(mut self) -> Self {
        let y = self.coords[0];
        let r = self.coords[1..].iter().map(|c| c * c).sum::<f64>().sqrt();
        let omega = if r > 0.0 {
            self.coords[1..].iter().map(|c| c / r).collect()
        } else {
            let mut w = vec![0.0; self.coords.len() - 1];
            w[0] = 1.0;
            w
        };
        self.chart = Some(CylindricalChart { y, r, omega });
        self
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn chart(&self) -> Option<&CylindricalChart> {
        self.chart.as_ref()
    }

    /// Intrinsic dimension `d` of the sphere the point lives on.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn to_vec3(&self) -> Option<Vec3> {
        (self.coords.len() == 3).then(|| Vec3::new(self.coords[0], self.coords[1], self.coords[2]))
    }

    fn check_unit(&self) -> Result<()> {
        let norm = self.coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidPoint(format!("|x| = {norm} is not 1")));
        }
        Ok(())
    }
}

/// The antipodal map `T(x) = -x`.
pub fn antipodal(p: &SpherePoint) -> Result<SpherePoint> {
    p.check_unit()?;
    Ok(SpherePoint {
        coords: p.coords.iter().map(|c| -c).collect(),
        chart: p.chart.as_ref().map(|c| CylindricalChart {
            y: -c.y,
            r: c.r,
            omega: c.omega.iter().map(|w| -w).collect(),
        }),
    })
}

/// Great-circle distance between unit vectors, accurate for tiny and
/// near-antipodal separations.
pub fn geodesic_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    if dot >= 0.0 {
        let chord = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        2.0 * (0.5 * chord).min(1.0).asin()
    } else {
        let chord = a.iter().zip(b).map(|(x, y)| (x + y) * (x + y)).sum::<f64>().sqrt();
        std::f64::consts::PI - 2.0 * (0.5 * chord).min(1.0).asin()
    }
}

pub fn geodesic_distance3(a: &Vec3, b: &Vec3) -> f64 {
    if a.dot(b) >= 0.0 {
        2.0 * (0.5 * (a - b).norm()).min(1.0).asin()
    } else {
        std::f64::consts::PI - 2.0 * (0.5 * (a + b).norm()).min(1.0).asin()
    }
}

/// Unit tangent vectors `(t1, t2)` completing `c` to a right-handed frame.
pub fn tangent_frame(c: &Vec3) -> (Vec3, Vec3) {
    let helper = if c.x.abs() < 0.6 { Vec3::x() } else if c.y.abs() < 0.6 { Vec3::y() } else { Vec3::z() };
    let t1 = (helper - c * c.dot(&helper)).normalize();
    let t2 = c.cross(&t1);
    (t1, t2)
}

/// Point at geodesic distance `rho` from `c` in direction angle `phi`.
pub fn point_at(c: &Vec3, t1: &Vec3, t2: &Vec3, rho: f64, phi: f64) -> Vec3 {
    let (s, co) = rho.sin_cos();
    let p = c * co + (t1 * phi.cos() + t2 * phi.sin()) * s;
    p / p.norm()
}

/// A symmetric metric tensor in some chart together with its volume density
/// `√det g`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricTensor {
    pub components: DMatrix<f64>,
    pub density: f64,
}

impl MetricTensor {
    pub fn new(components: DMatrix<f64>) -> Self {
        let det = components.determinant();
        Self { density: det.max(0.0).sqrt(), components }
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.components.amax().max(f64::MIN_POSITIVE);
        let n = self.components.nrows();
        (0..n).all(|i| (0..n).all(|j| (self.components[(i, j)] - self.components[(j, i)]).abs() <= rel_tol * scale))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.components.clone().symmetric_eigenvalues().min()
    }

    pub fn quadratic_form(&self, xi: &[f64]) -> f64 {
        let n = self.components.nrows();
        (0..n).map(|i| (0..n).map(|j| self.components[(i, j)] * xi[i] * xi[j]).sum::<f64>()).sum()
    }
}

/// Round metric of `S^k` in hyperspherical angles, `k = angles.len()`:
/// `diag(1, sin²φ₁, sin²φ₁ sin²φ₂, …)`.
fn round_block(angles: &[f64]) -> DMatrix<f64> {
    let k = angles.len();
    let mut m = DMatrix::zeros(k, k);
    let mut w = 1.0;
    for i in 0..k {
        m[(i, i)] = w;
        w *= angles[i].sin().powi(2);
    }
    m
}

/// Round metric of `S^d` in cylindrical coordinates,
/// `(1 - r²)⁻¹ dr² + r² ds²_{S^{d-1}}`. `angles` are the `d - 1`
/// hyperspherical angles of `ω`.
pub fn sphere_metric_at(r: f64, angles: &[f64], d: usize) -> Result<MetricTensor> {
    if d < 2 || angles.len() != d - 1 {
        return Err(Error::Contract(format!("need d - 1 = {} angles, got {}", d.saturating_sub(1), angles.len())));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::ChartBreakdown(format!("r = {r} outside (0, 1)")));
    }
    let mut g = DMatrix::zeros(d, d);
    g[(0, 0)] = 1.0 / (1.0 - r * r);
    let block = round_block(angles);
    g.view_mut((1, 1), (d - 1, d - 1)).copy_from(&(block * (r * r)));
    Ok(MetricTensor::new(g))
}

/// Scale convention of the handle cylinder metric.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CylinderConvention {
    /// `dy² + ε² ds²_{S^{d-1}}`: the single-handle construction.
    Section2,
    /// `ε² (dy² + ds²_{S^{d-1}})`: the scaled handles of the sweep.
    #[default]
    Section3,
}

/// Linear profile `r(t) = δ₁ε′t + δ₀ε′(1 - t)` of the family `F_Θ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandleProfile {
    pub epsilon: f64,
    pub theta: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub lipschitz_bound: f64,
}

impl HandleProfile {
    pub fn new(epsilon: f64, theta: f64, delta0: f64, delta1: f64, lipschitz_bound: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Domain(format!("epsilon = {epsilon} outside (0, 1)")));
        }
        if !(theta >= 1.0) {
            return Err(Error::Domain(format!("theta = {theta} < 1")));
        }
        if !(delta0 > 0.0 && delta0 < delta1 && delta1 < 1.0) {
            return Err(Error::Domain(format!("need 0 < delta0 < delta1 < 1, got {delta0}, {delta1}")));
        }
        if !(lipschitz_bound > 0.0) {
            return Err(Error::Domain(format!("lipschitz bound {lipschitz_bound} <= 0")));
        }
        Ok(Self { epsilon, theta, delta0, delta1, lipschitz_bound })
    }

    pub fn r(&self, t: f64) -> f64 {
        self.delta1 * self.epsilon * t + self.delta0 * self.epsilon * (1.0 - t)
    }

    pub fn slope(&self) -> f64 {
        (self.delta1 - self.delta0) * self.epsilon
    }

    /// Inverse profile `t = r⁻¹(s)`.
    pub fn inverse(&self, s: f64) -> f64 {
        (s - self.delta0 * self.epsilon) / self.slope()
    }

    /// Geodesic radius of the deleted cap, `arcsin r(0)`.
    pub fn hole_radius(&self) -> f64 {
        self.r(0.0).asin()
    }

    /// Geodesic radius of the attachment circle, `arcsin r(1)`.
    pub fn attachment_radius(&self) -> f64 {
        self.r(1.0).asin()
    }
}

/// Handle cylinder metric at height `y` in the chart `(y, angles)`.
pub fn cylinder_metric_at(
    y: f64,
    angles: &[f64],
    profile: &HandleProfile,
    convention: CylinderConvention,
) -> Result<MetricTensor> {
    if !(y.abs() <= 1.0) {
        return Err(Error::OutOfCylinder(y));
    }
    let d = angles.len() + 1;
    let eps2 = profile.epsilon * profile.epsilon;
    let mut g = DMatrix::zeros(d, d);
    g[(0, 0)] = match convention {
        CylinderConvention::Section2 => 1.0,
        CylinderConvention::Section3 => eps2,
    };
    g.view_mut((1, 1), (d - 1, d - 1)).copy_from(&(round_block(angles) * eps2));
    Ok(MetricTensor::new(g))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileClause {
    pub name: &'static str,
    pub value: f64,
    pub bound: f64,
    pub checked: bool,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileVerdict {
    pub member: bool,
    pub clauses: Vec<ProfileClause>,
}

/// Membership test for `F_Θ`. With `strict_d_check` off the two clauses
/// involving the slope bound `D` are reported but do not decide membership.
pub fn profile_validate(profile: &HandleProfile, strict_d_check: bool) -> ProfileVerdict {
    let r0 = profile.r(0.0);
    let r1 = profile.r(1.0);
    let d = profile.lipschitz_bound;
    let slope = profile.slope();
    let theta = profile.theta;
    let clause = |name, value: f64, bound: f64, checked, holds| ProfileClause { name, value, bound, checked, holds };
    let clauses = vec![
        clause("increasing", slope, 0.0, true, slope > 0.0),
        clause("r(0) > 0", r0, 0.0, true, r0 > 0.0),
        clause("r(1) < 1", r1, 1.0, true, r1 < 1.0),
        clause("eps/r(0) < theta", profile.epsilon / r0, theta, true, profile.epsilon / r0 < theta),
        clause("r(1)/eps < theta", r1 / profile.epsilon, theta, true, r1 / profile.epsilon < theta),
        clause("1/D < dr/dt", slope, 1.0 / d, strict_d_check, 1.0 / d < slope),
        clause("dr/dt < D", slope, d, strict_d_check, slope < d),
        clause(
            "D/sqrt(1 - r(1)^2) < theta",
            d / (1.0 - r1 * r1).sqrt(),
            theta,
            strict_d_check,
            d / (1.0 - r1 * r1).sqrt() < theta,
        ),
    ];
    let member = clauses.iter().filter(|c| c.checked).all(|c| c.holds);
    ProfileVerdict { member, clauses }
}

/// The attaching map `φ(y, ε ω) = (sgn y √(1 - r(|y|)²), sgn y r(|y|) ω)`.
pub fn attach_map(y: f64, omega: &[f64], profile: &HandleProfile) -> Result<SpherePoint> {
    if y == 0.0 {
        return Err(Error::FixedSet);
    }
    if !(y.abs() <= 1.0) {
        return Err(Error::OutOfCylinder(y));
    }
    let norm = omega.iter().map(|w| w * w).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidPoint(format!("|omega| = {norm}")));
    }
    let s = y.signum();
    let r = profile.r(y.abs());
    SpherePoint::from_cylindrical(s * (1.0 - r * r).sqrt(), r, &omega.iter().map(|w| s * w).collect::<Vec<_>>())
}

/// One handle of a sweep: a profile attached at `center` and at its antipode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandleGeometry {
    pub profile: HandleProfile,
    pub center: [f64; 3],
    pub r_hole: f64,
    pub big_r_hole: f64,
    pub convention: CylinderConvention,
}

impl HandleGeometry {
    pub fn new(profile: HandleProfile, center: &SpherePoint, convention: CylinderConvention) -> Result<Self> {
        let c = center
            .to_vec3()
            .ok_or_else(|| Error::Contract("handles are only placed on S^2".into()))?;
        let r_hole = profile.hole_radius();
        let big_r_hole = profile.attachment_radius();
        if !(0.0 < r_hole && r_hole < big_r_hole && big_r_hole < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Geometry(format!("radii r = {r_hole}, R = {big_r_hole} not ordered in (0, pi/2)")));
        }
        Ok(Self { profile, center: [c.x, c.y, c.z], r_hole, big_r_hole, convention })
    }

    pub fn center(&self) -> Vec3 {
        Vec3::new(self.center[0], self.center[1], self.center[2])
    }

    /// Image of the cylinder point `(y, ε(cos φ, sin φ))` on the sphere:
    /// `y > 0` lands around the center, `y < 0` around its antipode.
    pub fn place(&self, y: f64, phi: f64) -> Result<Vec3> {
        let local = attach_map(y, &[phi.cos(), phi.sin()], &self.profile)?;
        let c = local.coords();
        let axis = self.center();
        let (t1, t2) = tangent_frame(&axis);
        let p = axis * c[0] + t1 * c[1] + t2 * c[2];
        Ok(p / p.norm())
    }
}

/// Which piece of the glued metric applies at a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricPiece {
    Sphere,
    /// Annulus `B(c, R_h) \ B(c, r_h)` of `handle`, around its center or,
    /// when `antipodal_side` is set, around the antipode.
    Annulus { handle: usize, antipodal_side: bool },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GluedSample {
    /// Tensor in the cylindrical chart `(r, φ)` of the nearest cap center.
    pub tensor: MetricTensor,
    pub piece: MetricPiece,
    pub r: f64,
}

/// Metric relative to the round metric of `S²`, diagonal in an orthonormal
/// tangent frame: `G = a e1 e1ᵀ + b e2 e2ᵀ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FrameMetric {
    Round,
    Diagonal { e1: Vec3, e2: Vec3, a: f64, b: f64 },
}

impl FrameMetric {
    pub fn density(&self) -> f64 {
        match *self {
            FrameMetric::Round => 1.0,
            FrameMetric::Diagonal { a, b, .. } => (a * b).sqrt(),
        }
    }

    /// `g(v, v)` for a tangent vector `v`.
    pub fn form(&self, v: &Vec3) -> f64 {
        match *self {
            FrameMetric::Round => v.norm_squared(),
            FrameMetric::Diagonal { e1, e2, a, b } => a * e1.dot(v).powi(2) + b * e2.dot(v).powi(2),
        }
    }

    /// `g^{ij} ∂_i u ∂_j u` for a round-metric gradient.
    pub fn inverse_form(&self, grad: &Vec3) -> f64 {
        match *self {
            FrameMetric::Round => grad.norm_squared(),
            FrameMetric::Diagonal { e1, e2, a, b } => e1.dot(grad).powi(2) / a + e2.dot(grad).powi(2) / b,
        }
    }

    /// Bilinear version of [`Self::inverse_form`].
    pub fn inverse_bilinear(&self, g1: &Vec3, g2: &Vec3) -> f64 {
        match *self {
            FrameMetric::Round => g1.dot(g2),
            FrameMetric::Diagonal { e1, e2, a, b } => {
                e1.dot(g1) * e1.dot(g2) / a + e2.dot(g1) * e2.dot(g2) / b
            }
        }
    }

    /// Extreme eigenvalues of `G` relative to the round metric.
    pub fn ratio_bounds(&self) -> (f64, f64) {
        match *self {
            FrameMetric::Round => (1.0, 1.0),
            FrameMetric::Diagonal { a, b, .. } => (a.min(b), a.max(b)),
        }
    }
}

/// A position-dependent metric on (a subset of) `S²`.
pub trait MetricField: Send + Sync {
    fn frame_metric(&self, p: &Vec3) -> Result<FrameMetric>;

    /// Label of the smooth piece containing `p`, or `None` on an interface
    /// between pieces.
    fn piece_label(&self, _p: &Vec3) -> Option<usize> {
        Some(0)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RoundMetric;

impl MetricField for RoundMetric {
    fn frame_metric(&self, _p: &Vec3) -> Result<FrameMetric> {
        Ok(FrameMetric::Round)
    }
}

/// Round metric off the annuli, pulled-back handle metric on each annulus.
#[derive(Clone, Debug)]
pub struct GluedMetric {
    handles: Vec<HandleGeometry>,
}

/// Cap located around a point: handle index, side and geodesic distance.
#[derive(Clone, Copy, Debug)]
struct NearestCap {
    handle: usize,
    antipodal_side: bool,
    center: Vec3,
    theta: f64,
}

impl GluedMetric {
    pub fn new(handles: Vec<HandleGeometry>) -> Self {
        Self { handles }
    }

    pub fn handles(&self) -> &[HandleGeometry] {
        &self.handles
    }

    fn nearest(&self, p: &Vec3) -> Option<NearestCap> {
        let mut best: Option<(f64, usize, bool)> = None;
        for (i, h) in self.handles.iter().enumerate() {
            let c = h.center();
            let dot = c.dot(p);
            let (dot, side) = if dot >= 0.0 { (dot, false) } else { (-dot, true) };
            if best.map_or(true, |(b, _, _)| dot > b) {
                best = Some((dot, i, side));
            }
        }
        best.map(|(_, handle, antipodal_side)| {
            let c = self.handles[handle].center();
            let center = if antipodal_side { -c } else { c };
            NearestCap { handle, antipodal_side, center, theta: geodesic_distance3(&center, p) }
        })
    }

    /// Annulus tensor `(g_rr, g_φφ)` in the cylindrical chart; constant for
    /// the linear profile.
    fn annulus_components(h: &HandleGeometry) -> (f64, f64) {
        let slope = h.profile.slope();
        let eps2 = h.profile.epsilon * h.profile.epsilon;
        let g_yy = match h.convention {
            CylinderConvention::Section2 => 1.0,
            CylinderConvention::Section3 => eps2,
        };
        (g_yy / (slope * slope), eps2)
    }

    /// Full sample in the cylindrical chart of the nearest cap.
    pub fn sample(&self, p: &Vec3) -> Result<GluedSample> {
        let near = self
            .nearest(p)
            .ok_or_else(|| Error::ChartBreakdown("no handle to center a chart on".into()))?;
        let h = &self.handles[near.handle];
        if near.theta < h.r_hole * (1.0 - 1e-12) {
            return Err(Error::DeletedRegion { hole: near.handle, distance: near.theta, radius: h.r_hole });
        }
        let r = near.theta.sin();
        if near.theta < h.big_r_hole {
            let (g_rr, g_pp) = Self::annulus_components(h);
            let tensor = MetricTensor::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![g_rr, g_pp])));
            return Ok(GluedSample {
                tensor,
                piece: MetricPiece::Annulus { handle: near.handle, antipodal_side: near.antipodal_side },
                r,
            });
        }
        if near.theta >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::ChartBreakdown(format!("point at distance {} from every cap center", near.theta)));
        }
        Ok(GluedSample { tensor: sphere_metric_at(r, &[0.0], 2)?, piece: MetricPiece::Sphere, r })
    }

    /// Extreme quadratic-form ratios `g_glued / g_round` over `points`.
    pub fn comparability_bounds(&self, points: &[Vec3]) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in points {
            let (a, b) = self.frame_metric(p)?.ratio_bounds();
            lo = lo.min(a);
            hi = hi.max(b);
        }
        Ok((lo, hi))
    }
}

impl MetricField for GluedMetric {
    fn piece_label(&self, p: &Vec3) -> Option<usize> {
        let near = self.nearest(p)?;
        let big_r = self.handles[near.handle].big_r_hole;
        if (near.theta - big_r).abs() <= 1e-9 * big_r {
            None
        } else if near.theta < big_r {
            Some(1 + 2 * near.handle + near.antipodal_side as usize)
        } else {
            Some(0)
        }
    }

    fn frame_metric(&self, p: &Vec3) -> Result<FrameMetric> {
        let Some(near) = self.nearest(p) else {
            return Ok(FrameMetric::Round);
        };
        let h = &self.handles[near.handle];
        if near.theta < h.r_hole * (1.0 - 1e-12) {
            return Err(Error::DeletedRegion { hole: near.handle, distance: near.theta, radius: h.r_hole });
        }
        if near.theta >= h.big_r_hole {
            return Ok(FrameMetric::Round);
        }
        let (sin_t, cos_t) = near.theta.sin_cos();
        let (g_rr, g_pp) = Self::annulus_components(h);
        // dr = cos θ dθ and the round φ-direction has length sin θ.
        let a = g_rr * cos_t * cos_t;
        let b = g_pp / (sin_t * sin_t);
        let e1 = (p * p.dot(&near.center) - near.center).normalize();
        let e2 = p.cross(&e1);
        Ok(FrameMetric::Diagonal { e1, e2, a, b })
    }
}

/// Free-function form of [`GluedMetric::sample`].
pub fn glued_metric_at(p: &SpherePoint, handles: &[HandleGeometry]) -> Result<GluedSample> {
    let v = p
        .to_vec3()
        .ok_or_else(|| Error::Contract("the glued metric is defined on S^2".into()))?;
    GluedMetric::new(handles.to_vec()).sample(&v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
        loop {
            let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let n = v.norm();
            if n > 0.1 && n < 1.0 {
                return v / n;
            }
        }
    }

    #[test]
    fn antipodal_flips_sign() {
        let p = SpherePoint::new(vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(antipodal(&p).unwrap().coords(), &[-0.0, -0.0, -1.0]);
    }

    #[test]
    fn antipodal_is_an_involution_without_fixed_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let v = random_unit(&mut rng);
            let p = SpherePoint::from_vec3(&v).unwrap().with_chart();
            let tp = antipodal(&p).unwrap();
            assert_eq!(antipodal(&tp).unwrap(), p);
            assert_relative_eq!(geodesic_distance(p.coords(), tp.coords()), PI, epsilon = 1e-15);
            assert_ne!(tp.coords(), p.coords());
        }
    }

    #[test]
    fn antipodal_rejects_non_unit() {
        let p = SpherePoint { coords: vec![0.0, 0.0, 2.0], chart: None };
        assert!(matches!(antipodal(&p), Err(Error::InvalidPoint(_))));
        assert!(SpherePoint::new(vec![1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn sphere_metric_substitution() {
        let g = sphere_metric_at(0.5, &[0.3], 2).unwrap();
        assert_relative_eq!(g.components[(0, 0)], 4.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(g.components[(1, 1)], 0.25, epsilon = 1e-15);
        assert_relative_eq!(g.density, 0.5 / 0.75f64.sqrt(), epsilon = 1e-15);

        let g = sphere_metric_at(FRAC_1_SQRT_2, &[0.0], 2).unwrap();
        assert_relative_eq!(g.components[(0, 0)], 2.0, epsilon = 1e-14);
        assert_relative_eq!(g.components[(1, 1)], 0.5, epsilon = 1e-15);
        assert_relative_eq!(g.density, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn sphere_metric_chart_breakdown() {
        assert!(matches!(sphere_metric_at(1.0, &[0.0], 2), Err(Error::ChartBreakdown(_))));
        assert!(matches!(sphere_metric_at(0.0, &[0.0], 2), Err(Error::ChartBreakdown(_))));
    }

    #[test]
    fn sphere_area_from_chart_density() {
        // r = 1 - s² removes the 1/sqrt(1 - r) endpoint singularity.
        let (nodes, weights) = crate::harmonics::gauss_legendre(64);
        let mut hemisphere = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            let s = 0.5 * (x + 1.0);
            let r = 1.0 - s * s;
            if r <= 0.0 || r >= 1.0 {
                continue;
            }
            let g = sphere_metric_at(r, &[0.0], 2).unwrap();
            hemisphere += 0.5 * w * g.density * 2.0 * s;
        }
        let area = 2.0 * 2.0 * PI * hemisphere;
        assert!((area - 4.0 * PI).abs() < 1e-6, "area = {area}");
    }

    #[test]
    fn higher_dimensional_sphere_metric_is_positive() {
        let g = sphere_metric_at(0.4, &[0.7, 1.1], 3).unwrap();
        assert!(g.is_symmetric(1e-14));
        assert!(g.min_eigenvalue() > 0.0);
        assert_relative_eq!(g.components[(2, 2)], 0.16 * 0.7f64.sin().powi(2), epsilon = 1e-15);
    }

    fn profile(eps: f64) -> HandleProfile {
        HandleProfile::new(eps, 2.0, 0.6, 0.9, 1.0).unwrap()
    }

    #[test]
    fn cylinder_metric_conventions() {
        let p = profile(0.1);
        let g2 = cylinder_metric_at(0.3, &[0.0], &p, CylinderConvention::Section2).unwrap();
        assert_relative_eq!(g2.components[(0, 0)], 1.0);
        assert_relative_eq!(g2.components[(1, 1)], 0.01, epsilon = 1e-16);
        let g3 = cylinder_metric_at(0.3, &[0.0], &p, CylinderConvention::Section3).unwrap();
        assert_relative_eq!(g3.components[(0, 0)], 0.01, epsilon = 1e-16);
        assert_relative_eq!(g3.components[(1, 1)], 0.01, epsilon = 1e-16);
        assert!(matches!(
            cylinder_metric_at(1.5, &[0.0], &p, CylinderConvention::Section2),
            Err(Error::OutOfCylinder(_))
        ));
    }

    #[test]
    fn cylinder_volume_is_product_measure() {
        let eps = 0.1;
        let p = profile(eps);
        let n = 40;
        let mut vol = 0.0;
        for i in 0..n {
            for j in 0..n {
                let y = -1.0 + (i as f64 + 0.5) * 2.0 / n as f64;
                let phi = (j as f64 + 0.5) * 2.0 * PI / n as f64;
                let g = cylinder_metric_at(y, &[phi], &p, CylinderConvention::Section2).unwrap();
                vol += g.density * (2.0 / n as f64) * (2.0 * PI / n as f64);
            }
        }
        assert_relative_eq!(vol, 2.0 * 2.0 * PI * eps, epsilon = 1e-12);
    }

    #[test]
    fn profile_membership() {
        let ok = profile_validate(&HandleProfile::new(0.05, 2.0, 0.6, 0.9, 1.0).unwrap(), false);
        assert!(ok.member);
        let bad = profile_validate(&HandleProfile::new(0.05, 2.0, 0.4, 0.9, 1.0).unwrap(), false);
        assert!(!bad.member);
        let failing: Vec<_> = bad.clauses.iter().filter(|c| c.checked && !c.holds).map(|c| c.name).collect();
        assert_eq!(failing, vec!["eps/r(0) < theta"]);

        let strict = profile_validate(&HandleProfile::new(0.05, 2.0, 0.6, 0.9, 1.0).unwrap(), true);
        assert!(!strict.member);
        let slope = strict.clauses.iter().find(|c| c.name == "1/D < dr/dt").unwrap();
        assert!(!slope.holds);
        assert_relative_eq!(slope.value, 0.3 * 0.05, epsilon = 1e-15);
    }

    #[test]
    fn attach_map_values() {
        let p = HandleProfile::new(0.01, 2.0, 0.6, 0.9, 1.0).unwrap();
        let x = attach_map(1.0, &[1.0, 0.0], &p).unwrap();
        assert_relative_eq!(x.coords()[0], (1.0 - 0.009f64 * 0.009).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(x.coords()[0], 0.999_959_5, epsilon = 1e-7);
        assert_relative_eq!(x.coords()[1], 0.009, epsilon = 1e-15);

        let w = [0.6, 0.8];
        let a = attach_map(0.4, &w, &p).unwrap();
        let b = attach_map(-0.4, &w, &p).unwrap();
        assert_eq!(b.coords()[0], -a.coords()[0]);
        assert_eq!(b.coords()[1], -a.coords()[1]);
        assert_eq!(b.coords()[2], -a.coords()[2]);

        let near0 = attach_map(1e-300, &w, &p).unwrap();
        let r0 = p.r(0.0);
        assert_relative_eq!(near0.coords()[0], (1.0 - r0 * r0).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(near0.coords()[1], r0 * 0.6, epsilon = 1e-15);

        assert!(matches!(attach_map(0.0, &w, &p), Err(Error::FixedSet)));
    }

    #[test]
    fn attach_map_boundary_lands_on_attachment_circle() {
        let prof = HandleProfile::new(0.2, 3.0, 0.4, 0.8, 1.0).unwrap();
        let c = SpherePoint::normalized(vec![0.3, -0.5, 0.8]).unwrap();
        let h = HandleGeometry::new(prof, &c, CylinderConvention::Section3).unwrap();
        for k in 0..16 {
            let phi = k as f64 * 0.4;
            let p = h.place(1.0, phi).unwrap();
            assert!((geodesic_distance3(&p, &h.center()) - h.big_r_hole).abs() < 1e-12);
            let q = h.place(-1.0, phi).unwrap();
            assert!((geodesic_distance3(&q, &(-h.center())) - h.big_r_hole).abs() < 1e-12);
        }
    }

    fn single_handle(theta: f64, d0: f64, d1: f64, eps: f64) -> (GluedMetric, HandleGeometry) {
        let prof = HandleProfile::new(eps, theta, d0, d1, 1.0).unwrap();
        let c = SpherePoint::new(vec![0.0, 0.0, 1.0]).unwrap();
        let h = HandleGeometry::new(prof, &c, CylinderConvention::Section3).unwrap();
        (GluedMetric::new(vec![h.clone()]), h)
    }

    #[test]
    fn glued_metric_is_round_away_from_annuli() {
        let (m, h) = single_handle(2.0, 0.6, 0.9, 0.1);
        let (t1, t2) = tangent_frame(&h.center());
        let p = point_at(&h.center(), &t1, &t2, 0.7, 0.3);
        let s = m.sample(&p).unwrap();
        assert_eq!(s.piece, MetricPiece::Sphere);
        let round = sphere_metric_at(s.r, &[0.0], 2).unwrap();
        assert_eq!(s.tensor, round);
        assert_relative_eq!(s.r, 0.7f64.sin(), epsilon = 1e-14);
        assert_eq!(m.frame_metric(&p).unwrap(), FrameMetric::Round);
    }

    #[test]
    fn glued_metric_jumps_across_attachment_circle() {
        let (m, h) = single_handle(2.0, 0.6, 0.9, 0.1);
        let (t1, t2) = tangent_frame(&h.center());
        let inside = m.sample(&point_at(&h.center(), &t1, &t2, h.big_r_hole * (1.0 - 1e-9), 0.0)).unwrap();
        let outside = m.sample(&point_at(&h.center(), &t1, &t2, h.big_r_hole * (1.0 + 1e-9), 0.0)).unwrap();
        assert!(matches!(inside.piece, MetricPiece::Annulus { .. }));
        assert_eq!(outside.piece, MetricPiece::Sphere);
        let jump = (inside.tensor.components.clone() - outside.tensor.components.clone()).amax();
        assert!(jump > 1.0, "jump = {jump}");
    }

    #[test]
    fn glued_metric_rejects_points_in_holes() {
        let (m, h) = single_handle(2.0, 0.6, 0.9, 0.1);
        let (t1, t2) = tangent_frame(&h.center());
        let p = point_at(&h.center(), &t1, &t2, 0.5 * h.r_hole, 1.0);
        assert!(matches!(m.frame_metric(&p), Err(Error::DeletedRegion { .. })));
        assert!(matches!(m.frame_metric(&-p), Err(Error::DeletedRegion { .. })));
    }

    #[test]
    fn glued_metric_is_uniformly_comparable() {
        // (δ₁ - δ₀) ≥ 1/Θ and δ₀ > 1/Θ keep both eigenvalues inside [Θ⁻², Θ²].
        let theta = 3.0;
        let (m, h) = single_handle(theta, 0.4, 0.8, 0.05);
        let (t1, t2) = tangent_frame(&h.center());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vec3> = (0..1000)
            .map(|i| {
                let rho = rng.gen_range(h.r_hole..h.big_r_hole);
                let p = point_at(&h.center(), &t1, &t2, rho, rng.gen_range(0.0..2.0 * PI));
                if i % 2 == 0 { p } else { -p }
            })
            .collect();
        let (lo, hi) = m.comparability_bounds(&pts).unwrap();
        assert!(lo >= theta.powi(-2) && hi <= theta * theta, "[{lo}, {hi}]");
    }

    #[test]
    fn glued_metric_is_antipodally_invariant() {
        let (m, h) = single_handle(3.0, 0.4, 0.8, 0.05);
        let (t1, t2) = tangent_frame(&h.center());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let rho = rng.gen_range(h.r_hole..2.0 * h.big_r_hole);
            let p = point_at(&h.center(), &t1, &t2, rho, rng.gen_range(0.0..2.0 * PI));
            let (a, b) = (m.frame_metric(&p).unwrap(), m.frame_metric(&-p).unwrap());
            // dT = -I maps tangent vectors v at p to -v at -p.
            for v in [t1, t2, t1 + 0.3 * t2] {
                let v = v - p * p.dot(&v);
                assert!((a.form(&v) - b.form(&-v)).abs() <= 1e-12 * a.form(&v));
            }
            assert!((a.density() - b.density()).abs() <= 1e-12 * a.density());
        }
    }
}
