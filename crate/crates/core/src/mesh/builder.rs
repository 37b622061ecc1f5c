//! Hemisphere-and-mirror construction of holed sphere meshes.
//!
//! A pole `n` is chosen so that the great circle `n·x = 0` stays clear of
//! every hole. The closed upper hemisphere is triangulated in the
//! stereographic plane by a constrained Delaunay triangulation whose
//! constraints are the equator polygon, every hole loop and every attachment
//! circle; the lower hemisphere is its exact mirror image under `x ↦ -x`.
//! Hole loops, annulus rings and a graded collar around each hole are placed
//! explicitly; the background comes from an icosphere and Delaunay
//! refinement repairs bad angles in between.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;

use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use super::{icosphere, BoundaryLoop, SphereMesh};
use crate::error::{Error, Result};
use crate::geometry::{geodesic_distance3, point_at, tangent_frame, HandleGeometry, Vec3};
use crate::packing::fibonacci_sphere;

#[derive(Clone, Debug, PartialEq)]
pub struct MeshOptions {
    /// Background edge length (radians).
    pub target_edge: f64,
    /// Vertices on every hole loop and annulus ring.
    pub loop_segments: usize,
    /// Minimum number of vertex rings strictly inside each annulus.
    pub annulus_rings: usize,
    /// Smallest admissible triangle angle in degrees.
    pub min_angle_deg: f64,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self { target_edge: 0.1, loop_segments: 16, annulus_rings: 3, min_angle_deg: 20.0 }
    }
}

/// The sphere with hole interiors triangulated, and the holed mesh obtained
/// by removing them.
#[derive(Clone, Debug)]
pub struct MeshPair {
    pub full: SphereMesh,
    pub holed: SphereMesh,
    /// Index in `full` of every vertex of `holed`.
    pub holed_to_full: Vec<usize>,
    /// For each triangle of `full`, the loop whose cap contains it.
    pub full_triangle_hole: Vec<Option<usize>>,
}

/// Holed mesh for `holes`; see [`build_mesh_pair`].
pub fn build_mesh(holes: &[HandleGeometry], target_edge: f64, loop_segments: usize) -> Result<SphereMesh> {
    let opts = MeshOptions { target_edge, loop_segments, ..MeshOptions::default() };
    Ok(build_mesh_pair(holes, &opts)?.holed)
}

/// Icosphere level whose edges are at most `target_edge`.
pub fn icosphere_level_for(target_edge: f64) -> u32 {
    let mut level = 0;
    while 1.0515 / 2f64.powi(level as i32) > target_edge && level < 10 {
        level += 1;
    }
    level
}

#[derive(Clone, Debug)]
struct Cap {
    loop_index: usize,
    center: Vec3,
    r: f64,
    big_r: f64,
    /// Outer radius of the explicitly placed collar.
    patch: f64,
    /// Vertex spacing on the outermost collar ring.
    spacing: f64,
}

struct Sizing<'a> {
    caps: &'a [Cap],
    h: f64,
}

impl Sizing<'_> {
    /// Desired local edge length, graded away from every collar.
    fn at(&self, p: &Vec3) -> f64 {
        let mut s = self.h;
        for c in self.caps {
            for center in [c.center, -c.center] {
                let d = geodesic_distance3(p, &center);
                s = s.min(c.spacing + 0.4 * (d - c.patch).max(0.0));
            }
        }
        s
    }

    /// Whether a free vertex at `p` keeps clear of every collar.
    fn clear_of_caps(&self, p: &Vec3, margin: f64) -> bool {
        self.caps.iter().all(|c| {
            geodesic_distance3(p, &c.center) > c.patch + margin && geodesic_distance3(p, &-c.center) > c.patch + margin
        })
    }
}

pub fn build_mesh_pair(holes: &[HandleGeometry], opts: &MeshOptions) -> Result<MeshPair> {
    if !(opts.target_edge > 0.0 && opts.target_edge < 1.0) {
        return Err(Error::Contract(format!("target edge {} outside (0, 1)", opts.target_edge)));
    }
    if opts.loop_segments < 8 {
        return Err(Error::Contract(format!("loop_segments = {} < 8", opts.loop_segments)));
    }
    if holes.is_empty() {
        let m = icosphere(icosphere_level_for(opts.target_edge));
        let n_tri = m.num_triangles();
        return Ok(MeshPair {
            holed_to_full: (0..m.num_vertices()).collect(),
            full: m.clone(),
            holed: m,
            full_triangle_hole: vec![None; n_tri],
        });
    }
    check_disjoint(holes)?;
    let h = opts.target_edge;
    let nseg = opts.loop_segments;
    let q = 1.0 + 2.0 * PI / nseg as f64;

    // Collar radius before equator clearance is known.
    let family: Vec<(Vec3, f64)> = holes
        .iter()
        .flat_map(|g| [(g.center(), g.big_r_hole), (-g.center(), g.big_r_hole)])
        .collect();
    let nearest = |c: &Vec3| {
        family
            .iter()
            .map(|(o, _)| geodesic_distance3(c, o))
            .filter(|&d| d > 1e-12)
            .fold(f64::INFINITY, f64::min)
    };
    let target_patch: Vec<f64> = holes
        .iter()
        .map(|g| (nseg as f64 * h / (2.0 * PI)).min(0.4 * nearest(&g.center())).max(g.big_r_hole))
        .collect();

    let pole = choose_pole(holes, &target_patch);
    let (u1, u2) = tangent_frame(&pole);

    let mut caps = Vec::with_capacity(holes.len());
    for (i, g) in holes.iter().enumerate() {
        let c = g.center();
        let (center, loop_index) = if c.dot(&pole) > 0.0 { (c, 2 * i) } else { (-c, 2 * i + 1) };
        let clearance = center.dot(&pole).min(1.0).asin();
        let patch = target_patch[i].min(clearance / (1.0 + 4.0 * PI / nseg as f64));
        if patch <= g.big_r_hole * 1.001 {
            return Err(Error::Meshing(format!(
                "hole {i}: attachment radius {:.3e} does not fit between the hole and the equator (clearance {clearance:.3e})",
                g.big_r_hole
            )));
        }
        caps.push(Cap { loop_index, center, r: g.r_hole, big_r: g.big_r_hole, patch, spacing: 0.0 });
    }

    let mut pts: Vec<Vec3> = Vec::new();
    let mut constraints: Vec<[usize; 2]> = Vec::new();

    // Collars: hole interior, loop, annulus rings, attachment ring, grading.
    struct CapRings {
        loop_start: usize,
    }
    let mut cap_rings = Vec::with_capacity(caps.len());
    for cap in caps.iter_mut() {
        let (t1, t2) = tangent_frame(&cap.center);
        let ring = |rho: f64, phase: f64, count: usize| -> Vec<Vec3> {
            (0..count)
                .map(|j| point_at(&cap.center, &t1, &t2, rho, 2.0 * PI * (j as f64 + phase) / count as f64))
                .collect()
        };
        let ratio = cap.big_r / cap.r;
        let k_ann = ((ratio.ln() / q.ln()).ceil() as usize).max(opts.annulus_rings + 1);
        let mut radii: Vec<f64> = (0..=k_ann).map(|k| cap.r * ratio.powf(k as f64 / k_ann as f64)).collect();
        radii[k_ann] = cap.big_r;
        let mut rho = cap.big_r * q;
        while rho <= cap.patch {
            radii.push(rho);
            rho *= q;
        }
        cap.patch = *radii.last().unwrap();
        cap.spacing = 2.0 * cap.patch * (PI / nseg as f64).sin();

        let loop_start = pts.len();
        for (k, &rho) in radii.iter().enumerate() {
            let start = pts.len();
            pts.extend(ring(rho, 0.5 * (k % 2) as f64, nseg));
            if k == 0 || k == k_ann {
                for j in 0..nseg {
                    constraints.push([start + j, start + (j + 1) % nseg]);
                }
            }
        }
        // Concentric rings filling the hole interior.
        let s = 2.0 * cap.r * (PI / nseg as f64).sin();
        let mut interior = Vec::new();
        let mut k = 1;
        loop {
            let rho = cap.r - k as f64 * s * 0.866;
            if rho < 0.5 * s {
                interior.push(cap.center);
                break;
            }
            let count = ((2.0 * PI * rho / s).round() as usize).max(6);
            interior.extend(ring(rho, 0.5 * (k % 2) as f64, count));
            k += 1;
        }
        pts.extend(interior);
        cap_rings.push(CapRings { loop_start });
    }

    let sizing = Sizing { caps: &caps, h };

    // Equator: adaptive spacing on [0, π), mirrored onto [π, 2π).
    let e_at = |psi: f64| u1 * psi.cos() + u2 * psi.sin();
    let mut psis = vec![0.0];
    loop {
        let last = *psis.last().unwrap();
        let step = sizing.at(&e_at(last)).min(h);
        if last + step >= PI - 0.3 * step {
            break;
        }
        psis.push(last + step);
    }
    let m = psis.len();
    let scale = PI / (psis[m - 1] + sizing.at(&e_at(psis[m - 1])).min(h));
    let scale = if scale.is_finite() { scale } else { 1.0 };
    let half: Vec<Vec3> = psis.iter().map(|&p| e_at(p * scale)).collect();
    let mut equator: Vec<Vec3> = half.clone();
    equator.extend(half.iter().map(|v| -v));
    // Equator goes first so that indices 0..2m are the shared boundary.
    let n_eq = equator.len();
    let shift = n_eq;
    for c in constraints.iter_mut() {
        c[0] += shift;
        c[1] += shift;
    }
    for r in cap_rings.iter_mut() {
        r.loop_start += shift;
    }
    let mut all = equator.clone();
    all.extend(pts);
    let mut pts = all;
    for j in 0..n_eq {
        constraints.push([j, (j + 1) % n_eq]);
    }

    // A row of points above every equator edge.
    for j in 0..n_eq {
        let a = pts[j];
        let b = pts[(j + 1) % n_eq];
        let mid = (a + b).normalize();
        let len = geodesic_distance3(&a, &b);
        let lift = 0.85 * len;
        let p = (mid * lift.cos() + pole * lift.sin()).normalize();
        if sizing.clear_of_caps(&p, 0.6 * len) {
            pts.push(p);
        }
    }
    let band_end = pts.len();

    // Icosphere background.
    let bg = icosphere(icosphere_level_for(h));
    for v in &bg.vertices {
        let lat = v.dot(&pole);
        if lat <= 0.0 {
            continue;
        }
        let s = sizing.at(v);
        if lat.asin() > 1.6 * s.min(h) && sizing.clear_of_caps(v, 0.7 * s) {
            let near_band = pts[n_eq..band_end].iter().any(|b| geodesic_distance3(b, v) < 0.7 * s);
            if !near_band {
                pts.push(*v);
            }
        }
    }

    // Constrained Delaunay triangulation in the stereographic plane.
    let to_plane = |p: &Vec3| {
        let d = 1.0 + p.dot(&pole);
        Point2::new(p.dot(&u1) / d, p.dot(&u2) / d)
    };
    let from_plane = |x: f64, y: f64| {
        let r2 = x * x + y * y;
        ((u1 * (2.0 * x) + u2 * (2.0 * y) + pole * (1.0 - r2)) / (1.0 + r2)).normalize()
    };
    let plane: Vec<Point2<f64>> = pts.iter().map(to_plane).collect();
    let n_input = plane.len();
    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
        ConstrainedDelaunayTriangulation::bulk_load_cdt(plane, constraints)
            .map_err(|e| Error::Meshing(format!("triangulation failed: {e:?}")))?;
    if cdt.num_vertices() != n_input {
        return Err(Error::Meshing("duplicate vertices in the hemisphere point set".into()));
    }
    cdt.refine(
        RefinementParameters::<f64>::new()
            .with_angle_limit(AngleLimit::from_deg(opts.min_angle_deg + 8.0))
            .keep_constraint_edges()
            .with_max_additional_vertices(10 * n_input + 1000),
    );

    let mut upper_pts: Vec<Vec3> = pts;
    for v in cdt.vertices().skip(n_input) {
        let p = v.position();
        upper_pts.push(from_plane(p.x, p.y));
    }
    let mut upper_tris: Vec<[usize; 3]> = Vec::with_capacity(cdt.num_inner_faces());
    for f in cdt.inner_faces() {
        let [a, b, c] = f.vertices().map(|v| v.fix().index());
        let (pa, pb, pc) = (upper_pts[a], upper_pts[b], upper_pts[c]);
        let outward = (pb - pa).cross(&(pc - pa)).dot(&(pa + pb + pc)) > 0.0;
        upper_tris.push(if outward { [a, b, c] } else { [a, c, b] });
    }

    // Loops in upper numbering, counter-clockwise about each center.
    let upper_loops: Vec<Vec<usize>> = cap_rings.iter().map(|r| (r.loop_start..r.loop_start + nseg).collect()).collect();
    let upper_hole = flood_holes(&upper_tris, &upper_loops, n_eq)?;

    // Mirror.
    let n_up = upper_pts.len();
    let half_eq = n_eq / 2;
    let mirror = |i: usize| if i < n_eq { (i + half_eq) % n_eq } else { n_up + (i - n_eq) };
    let mut vertices = upper_pts.clone();
    vertices.extend(upper_pts[n_eq..].iter().map(|v| -v));
    let n_full = vertices.len();
    let mut pairing = vec![0; n_full];
    for i in 0..n_up {
        let j = mirror(i);
        pairing[i] = j;
        pairing[j] = i;
    }
    let mut triangles = upper_tris.clone();
    triangles.extend(upper_tris.iter().map(|&[a, b, c]| [mirror(a), mirror(c), mirror(b)]));
    let mut full_triangle_hole: Vec<Option<usize>> = upper_hole.iter().map(|h| h.map(|k| caps[k].loop_index)).collect();
    full_triangle_hole.extend(upper_hole.iter().map(|h| h.map(|k| caps[k].loop_index ^ 1)));

    let mut loops: Vec<Option<BoundaryLoop>> = vec![None; 2 * holes.len()];
    for (k, cap) in caps.iter().enumerate() {
        let verts = upper_loops[k].clone();
        let mirrored: Vec<usize> = verts.iter().map(|&v| pairing[v]).collect();
        loops[cap.loop_index] = Some(BoundaryLoop { center: cap.center, radius: cap.r, vertices: verts });
        loops[cap.loop_index ^ 1] = Some(BoundaryLoop { center: -cap.center, radius: cap.r, vertices: mirrored });
    }
    let loops: Vec<BoundaryLoop> = loops.into_iter().map(|l| l.expect("every loop is placed")).collect();

    let full = SphereMesh::new(vertices, triangles, loops, pairing);

    // Holed mesh: drop hole triangles and the vertices only they use.
    let mut used = vec![false; n_full];
    for (t, tri) in full.triangles.iter().enumerate() {
        if full_triangle_hole[t].is_none() {
            for &v in tri {
                used[v] = true;
            }
        }
    }
    let mut new_index = vec![usize::MAX; n_full];
    let mut holed_to_full = Vec::new();
    for v in 0..n_full {
        if used[v] {
            new_index[v] = holed_to_full.len();
            holed_to_full.push(v);
        }
    }
    let holed = SphereMesh::new(
        holed_to_full.iter().map(|&v| full.vertices[v]).collect(),
        full.triangles
            .iter()
            .zip(&full_triangle_hole)
            .filter(|(_, h)| h.is_none())
            .map(|(t, _)| t.map(|v| new_index[v]))
            .collect(),
        full.loops
            .iter()
            .map(|l| BoundaryLoop { vertices: l.vertices.iter().map(|&v| new_index[v]).collect(), ..l.clone() })
            .collect(),
        holed_to_full.iter().map(|&v| new_index[full.pairing[v]]).collect(),
    );

    let worst = full.quality.min_angle_deg.min(holed.quality.min_angle_deg);
    if worst < opts.min_angle_deg {
        return Err(Error::Meshing(format!(
            "minimum angle {worst:.2} deg below {} deg ({} vertices, target edge {h}, {} segments per loop)",
            opts.min_angle_deg,
            full.num_vertices(),
            nseg
        )));
    }
    Ok(MeshPair { full, holed, holed_to_full, full_triangle_hole })
}

fn check_disjoint(holes: &[HandleGeometry]) -> Result<()> {
    let family: Vec<(Vec3, f64, usize)> = holes
        .iter()
        .enumerate()
        .flat_map(|(i, g)| [(g.center(), g.big_r_hole, i), (-g.center(), g.big_r_hole, i)])
        .collect();
    for a in 0..family.len() {
        for b in (a + 1)..family.len() {
            let (ca, ra, ia) = family[a];
            let (cb, rb, ib) = family[b];
            let d = geodesic_distance3(&ca, &cb);
            if d <= ra + rb {
                return Err(Error::Geometry(format!(
                    "caps of holes {ia} and {ib} overlap: distance {d:.6e} <= {:.6e}",
                    ra + rb
                )));
            }
        }
    }
    Ok(())
}

/// Pole whose equator keeps the largest relative clearance from the holes.
fn choose_pole(holes: &[HandleGeometry], patch: &[f64]) -> Vec3 {
    let mut best = (f64::NEG_INFINITY, Vec3::z());
    for n in fibonacci_sphere(4000).into_iter().filter(|n| n.z > 0.0) {
        let score = holes
            .iter()
            .zip(patch)
            .map(|(g, &p)| g.center().dot(&n).abs().min(1.0).asin() / p)
            .fold(f64::INFINITY, f64::min);
        if score > best.0 {
            best = (score, n);
        }
    }
    best.1
}

/// Marks the triangles inside each loop by flooding from the loop's inner
/// side without crossing loop edges.
fn flood_holes(tris: &[[usize; 3]], loops: &[Vec<usize>], n_eq: usize) -> Result<Vec<Option<usize>>> {
    let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * tris.len());
    for (t, tri) in tris.iter().enumerate() {
        for k in 0..3 {
            directed.insert((tri[k], tri[(k + 1) % 3]), t);
        }
    }
    let mut walls = std::collections::HashSet::new();
    for l in loops {
        for j in 0..l.len() {
            let (a, b) = (l[j], l[(j + 1) % l.len()]);
            walls.insert((a.min(b), a.max(b)));
        }
    }
    let mut mark = vec![None; tris.len()];
    for (k, l) in loops.iter().enumerate() {
        let seed = *directed
            .get(&(l[0], l[1]))
            .ok_or_else(|| Error::Meshing(format!("loop {k} edge missing from the triangulation")))?;
        let mut queue = VecDeque::from([seed]);
        mark[seed] = Some(k);
        while let Some(t) = queue.pop_front() {
            let tri = tris[t];
            if tri.iter().any(|&v| v < n_eq) {
                return Err(Error::Meshing(format!("hole {k} interior leaks to the equator")));
            }
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                if walls.contains(&(a.min(b), a.max(b))) {
                    continue;
                }
                if let Some(&n) = directed.get(&(b, a)) {
                    if mark[n].is_none() {
                        mark[n] = Some(k);
                        queue.push_back(n);
                    }
                }
            }
        }
    }
    Ok(mark)
}
