//! Greedy η-packings of `S^d` closed under the antipodal map, with the cap
//! volume and counting estimates.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{geodesic_distance, SpherePoint, Vec3};

/// Centers `x_i` of an η-packing. The symmetrized family is
/// `{x_i} ∪ {-x_i}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Packing {
    pub eta: f64,
    pub d: usize,
    pub centers: Vec<SpherePoint>,
    pub seed: u64,
}

impl Packing {
    /// Centers as 3-vectors; only meaningful for `d = 2`.
    pub fn centers3(&self) -> Vec<Vec3> {
        self.centers.iter().filter_map(SpherePoint::to_vec3).collect()
    }

    /// The centers followed by their antipodes.
    pub fn symmetrized(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = self.centers.iter().map(|c| c.coords().to_vec()).collect();
        out.extend(self.centers.iter().map(|c| c.coords().iter().map(|x| -x).collect()));
        out
    }

    /// Smallest pairwise distance over the symmetrized family (all pairs).
    pub fn min_separation(&self) -> f64 {
        let all = self.symmetrized();
        let mut best = f64::INFINITY;
        for i in 0..all.len() {
            for j in (i + 1)..all.len() {
                best = best.min(geodesic_distance(&all[i], &all[j]));
            }
        }
        best
    }

    /// Number of `samples` uniform random points farther than `2η` from the
    /// symmetrized family.
    pub fn cover_failures(&self, samples: usize, seed: u64) -> usize {
        let all = self.symmetrized();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..samples)
            .filter(|_| {
                let p = random_unit(&mut rng, self.d);
                !all.iter().any(|c| geodesic_distance(c, &p) <= 2.0 * self.eta)
            })
            .count()
    }

    /// One center per line, `d + 1` coordinates with 17 significant digits.
    /// Lines starting with `#` carry the parameters.
    pub fn to_text(&self) -> String {
        let mut s = format!("# eta {:.16e}\n# d {}\n# seed {}\n", self.eta, self.d, self.seed);
        for c in &self.centers {
            let line: Vec<String> = c.coords().iter().map(|x| format!("{x:.16e}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (mut eta, mut d, mut seed) = (None, None, 0u64);
        let mut centers = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                match (it.next(), it.next()) {
                    (Some("eta"), Some(v)) => eta = Some(parse(v)?),
                    (Some("d"), Some(v)) => d = Some(v.parse().map_err(|_| Error::Parse(format!("bad d: {v}")))?),
                    (Some("seed"), Some(v)) => seed = v.parse().map_err(|_| Error::Parse(format!("bad seed: {v}")))?,
                    _ => {}
                }
                continue;
            }
            let coords = line.split_whitespace().map(parse).collect::<Result<Vec<f64>>>()?;
            centers.push(SpherePoint::new(coords)?);
        }
        let eta = eta.ok_or_else(|| Error::Parse("missing eta".into()))?;
        let d = d.or_else(|| centers.first().map(|c| c.dim())).ok_or_else(|| Error::Parse("missing d".into()))?;
        if centers.iter().any(|c| c.dim() != d) {
            return Err(Error::Parse("centers of mixed dimension".into()));
        }
        Ok(Self { eta, d, centers, seed })
    }
}

fn parse(v: &str) -> Result<f64> {
    v.parse().map_err(|_| Error::Parse(format!("bad number: {v}")))
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..=d).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Fibonacci-spiral points on `S²`.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let s = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vec3::new(s * phi.cos(), s * phi.sin(), z)
        })
        .collect()
}

fn admissible(p: &[f64], accepted: &[Vec<f64>], eta: f64) -> bool {
    accepted.iter().all(|c| {
        let dot: f64 = c.iter().zip(p).map(|(a, b)| a * b).sum();
        // Quick reject via |c·p| ≤ cos 2η, exact check near the threshold.
        if dot.abs() < (2.0 * eta).cos() - 1e-9 {
            true
        } else {
            let neg: Vec<f64> = c.iter().map(|x| -x).collect();
            geodesic_distance(c, p) >= 2.0 * eta && geodesic_distance(&neg, p) >= 2.0 * eta
        }
    })
}

/// Greedy η-packing closed under `x ↦ -x`.
///
/// Candidates are shuffled Fibonacci points (Gaussian samples for `d ≥ 3`);
/// a candidate is accepted iff it lies at distance `≥ 2η` from every accepted
/// center and every antipode. A completion pass then adds uncovered points
/// until the `2η`-balls of the symmetrized family cover the sphere.
pub fn build_packing(eta: f64, d: usize, seed: u64) -> Result<Packing> {
    if !(eta > 0.0) {
        return Err(Error::Domain(format!("eta = {eta} must be positive")));
    }
    if eta >= PI / 2.0 {
        return Err(Error::DegeneratePacking(format!(
            "eta = {eta} >= pi/2: a center and its antipode cannot be 2 eta apart"
        )));
    }
    if d < 2 {
        return Err(Error::Domain(format!("dimension {d} < 2")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted: Vec<Vec<f64>> = Vec::new();
    if d == 2 {
        let n = (100.0 / (eta * eta)).max(1e4).min(4e6) as usize;
        let mut cands = fibonacci_sphere(n);
        cands.shuffle(&mut rng);
        for c in cands {
            let p = [c.x, c.y, c.z];
            if admissible(&p, &accepted, eta) {
                accepted.push(p.to_vec());
            }
        }
        complete_cover_s2(&mut accepted, eta);
    } else {
        let n = (100.0 / eta.powi(d as i32)).max(1e4).min(2e5) as usize;
        for _ in 0..n {
            let p = random_unit(&mut rng, d);
            if admissible(&p, &accepted, eta) {
                accepted.push(p);
            }
        }
        // Monte Carlo cover fill: uncovered samples are admissible centers.
        loop {
            let mut added = false;
            for _ in 0..20_000 {
                let p = random_unit(&mut rng, d);
                if admissible(&p, &accepted, eta) && geodesic_gap(&p, &accepted) > 2.0 * eta {
                    accepted.push(p);
                    added = true;
                }
            }
            if !added {
                break;
            }
        }
    }
    let centers = accepted.into_iter().map(SpherePoint::normalized).collect::<Result<Vec<_>>>()?;
    Ok(Packing { eta, d, centers, seed })
}

/// Distance from `p` to the symmetrized family of `accepted`.
fn geodesic_gap(p: &[f64], accepted: &[Vec<f64>]) -> f64 {
    accepted
        .iter()
        .map(|c| {
            let dot: f64 = c.iter().zip(p).map(|(a, b)| a * b).sum();
            dot.abs().min(1.0).acos()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Intersection points of the circles of geodesic radius `rho` about `a`
/// and `b`.
fn circle_intersections(a: &Vec3, b: &Vec3, rho: f64) -> Option<[Vec3; 2]> {
    let c = a.dot(b);
    if c <= -1.0 + 1e-15 || c >= 1.0 - 1e-15 {
        return None;
    }
    let alpha = rho.cos() / (1.0 + c);
    let beta2 = (1.0 - 2.0 * alpha * alpha * (1.0 + c)) / (1.0 - c * c);
    if beta2 < 0.0 {
        return None;
    }
    let axis = a.cross(b);
    let base = (a + b) * alpha;
    let off = axis * beta2.sqrt();
    Some([(base + off).normalize(), (base - off).normalize()])
}

/// Adds centers at uncovered corners of the `2η`-cover until none remain.
/// Every corner lies at distance `≥ 2η` from the family, so the separation
/// property is preserved.
fn complete_cover_s2(accepted: &mut Vec<Vec<f64>>, eta: f64) {
    let rho = 2.0 * eta;
    loop {
        let fam: Vec<Vec3> = accepted
            .iter()
            .flat_map(|c| {
                let v = Vec3::new(c[0], c[1], c[2]);
                [v, -v]
            })
            .collect();
        let uncovered = |p: &Vec3, skip: &[usize]| {
            fam.iter()
                .enumerate()
                .all(|(k, c)| skip.contains(&k) || crate::geometry::geodesic_distance3(c, p) > rho * (1.0 + 1e-9))
        };
        let meets = |i: usize, j: usize| {
            use crate::geometry::geodesic_distance3 as dist;
            if i == j || dist(&fam[i], &fam[j]) >= 2.0 * rho {
                None
            } else {
                circle_intersections(&fam[i], &fam[j], rho)
            }
        };
        let mut found = None;
        'outer: for i in 0..fam.len() {
            let mut isolated = true;
            for j in 0..fam.len() {
                if let Some(pts) = meets(i, j) {
                    isolated = false;
                    if j < i {
                        continue;
                    }
                    for p in pts {
                        if uncovered(&p, &[i, j]) {
                            found = Some(p);
                            break 'outer;
                        }
                    }
                }
            }
            if isolated {
                // Coverage of an isolated circle is decided by any point on it.
                let (t1, t2) = crate::geometry::tangent_frame(&fam[i]);
                let p = crate::geometry::point_at(&fam[i], &t1, &t2, rho, 0.0);
                if uncovered(&p, &[i]) {
                    found = Some(p);
                    break;
                }
            }
        }
        match found {
            Some(p) => accepted.push(vec![p.x, p.y, p.z]),
            None => return,
        }
    }
}

/// Volume of `S^k` in `R^{k+1}`.
pub fn sphere_area(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (k - 1) as f64 * sphere_area(k - 2),
    }
}

/// `∫₀^η sinⁿ t dt` by Gauss–Legendre quadrature; the integrand is entire,
/// and unlike the reduction formula this keeps full relative accuracy for
/// small `η`.
fn sin_power_integral(n: usize, eta: f64) -> f64 {
    if n == 1 {
        return 2.0 * (0.5 * eta).sin().powi(2);
    }
    let (x, w) = crate::harmonics::gauss_legendre(40);
    x.iter()
        .zip(&w)
        .map(|(x, w)| 0.5 * eta * w * (0.5 * eta * (x + 1.0)).sin().powi(n as i32))
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CapVolume {
    /// Exact volume `|S^{d-1}| ∫₀^η sin^{d-1} t dt`.
    pub exact: f64,
    /// Bishop-type comparison value `(sin η / η)^{d-1} ω_d η^d`.
    pub ratio_form: f64,
}

/// Volume of a geodesic cap of radius `eta` in `S^d`.
pub fn cap_volume(eta: f64, d: usize) -> Result<CapVolume> {
    if !(eta > 0.0) || eta > PI {
        return Err(Error::Domain(format!("eta = {eta} outside (0, pi]")));
    }
    if d < 1 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    let exact = sphere_area(d - 1) * sin_power_integral(d - 1, eta);
    let unit_ball = sphere_area(d - 1) / d as f64;
    let ratio_form = (eta.sin() / eta).powi(d as i32 - 1) * unit_ball * eta.powi(d as i32);
    Ok(CapVolume { exact, ratio_form })
}

/// Upper bound `Vol(S^d) / Vol(B(x, η))` for the number of points with
/// disjoint η-balls.
pub fn count_bound(eta: f64, d: usize) -> Result<f64> {
    if !(eta > 0.0 && eta <= PI / 2.0) {
        return Err(Error::Domain(format!("eta = {eta} outside (0, pi/2]")));
    }
    Ok(sphere_area(d) / cap_volume(eta, d)?.exact)
}
