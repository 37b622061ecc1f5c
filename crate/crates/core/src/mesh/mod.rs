//! Antipodally symmetric triangulations of the sphere with circular holes.
//!
//! A [`SphereMesh`] carries the vertex pairing `i ↦ π(i)` with
//! `v_{π(i)} = -v_i`, so the involution acts on discrete functions by
//! re-indexing. Holes come in antipodal pairs: loop `2k` surrounds the cap
//! around the center of handle `k`, loop `2k + 1` the cap around its
//! antipode, and `loops[2k + 1][j] = π(loops[2k][j])`.

mod builder;
mod glue;
mod icosphere;
mod io;

use std::collections::HashMap;

use crate::geometry::{geodesic_distance3, Vec3};

pub use builder::{build_mesh, build_mesh_pair, MeshOptions, MeshPair};
pub use glue::GluedMesh;
pub use icosphere::icosphere;

/// Ordered vertex cycle on the circle of geodesic radius `radius` about
/// `center`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryLoop {
    pub center: Vec3,
    pub radius: f64,
    pub vertices: Vec<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeshQuality {
    /// Smallest interior angle of the flat triangles, in degrees.
    pub min_angle_deg: f64,
    /// Largest edge touching a loop divided by that loop's radius.
    pub max_edge_to_hole_radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SphereMesh {
    pub vertices: Vec<Vec3>,
    /// Outward-oriented vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub loops: Vec<BoundaryLoop>,
    pub pairing: Vec<usize>,
    pub quality: MeshQuality,
}

/// Result of [`pairing_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct PairingReport {
    /// `max_i |v_{π(i)} + v_i|`.
    pub max_deviation: f64,
    /// Vertex attaining the maximum deviation.
    pub worst_vertex: Option<usize>,
    pub involution: bool,
    pub triangles_paired: bool,
    pub loops_paired: bool,
    pub valid: bool,
}

impl SphereMesh {
    /// Assembles a mesh and computes its quality figures.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>, loops: Vec<BoundaryLoop>, pairing: Vec<usize>) -> Self {
        let mut mesh = Self { vertices, triangles, loops, pairing, quality: MeshQuality::default() };
        mesh.quality = mesh.compute_quality();
        mesh
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Undirected edges with the number of triangles sharing each.
    pub fn edge_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut map = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *map.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        map
    }

    /// `V - E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_counts().len() as i64 + self.triangles.len() as i64
    }

    /// Every edge is shared by one or two triangles, and the edges with one
    /// triangle are exactly the loop edges.
    pub fn is_conforming(&self) -> bool {
        let counts = self.edge_counts();
        if counts.values().any(|&c| c == 0 || c > 2) {
            return false;
        }
        let mut loop_edges = std::collections::HashSet::new();
        for l in &self.loops {
            for j in 0..l.vertices.len() {
                let (a, b) = (l.vertices[j], l.vertices[(j + 1) % l.vertices.len()]);
                loop_edges.insert((a.min(b), a.max(b)));
            }
        }
        counts.iter().all(|(e, &c)| (c == 1) == loop_edges.contains(e))
    }

    /// Flat (chordal) area of triangle `t`.
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Longest edge length.
    pub fn max_edge(&self) -> f64 {
        self.edge_counts()
            .keys()
            .map(|&(a, b)| (self.vertices[a] - self.vertices[b]).norm())
            .fold(0.0, f64::max)
    }

    fn compute_quality(&self) -> MeshQuality {
        let mut min_angle = f64::INFINITY;
        for t in &self.triangles {
            let p = t.map(|i| self.vertices[i]);
            for k in 0..3 {
                let u = p[(k + 1) % 3] - p[k];
                let v = p[(k + 2) % 3] - p[k];
                let ang = u.cross(&v).norm().atan2(u.dot(&v));
                min_angle = min_angle.min(ang.to_degrees());
            }
        }
        let mut max_ratio: f64 = 0.0;
        if !self.loops.is_empty() {
            let mut on_loop = vec![usize::MAX; self.vertices.len()];
            for (k, l) in self.loops.iter().enumerate() {
                for &v in &l.vertices {
                    on_loop[v] = k;
                }
            }
            for t in &self.triangles {
                for k in 0..3 {
                    let (a, b) = (t[k], t[(k + 1) % 3]);
                    let owner = if on_loop[a] != usize::MAX { on_loop[a] } else { on_loop[b] };
                    if owner != usize::MAX {
                        let len = (self.vertices[a] - self.vertices[b]).norm();
                        max_ratio = max_ratio.max(len / self.loops[owner].radius);
                    }
                }
            }
        }
        MeshQuality {
            min_angle_deg: if min_angle.is_finite() { min_angle } else { 0.0 },
            max_edge_to_hole_radius: max_ratio,
        }
    }

    /// Largest deviation of a loop vertex from its circle.
    pub fn max_loop_radius_error(&self) -> f64 {
        self.loops
            .iter()
            .flat_map(|l| l.vertices.iter().map(move |&v| (geodesic_distance3(&self.vertices[v], &l.center) - l.radius).abs()))
            .fold(0.0, f64::max)
    }

    /// Largest `| |v| - 1 |`.
    pub fn max_norm_error(&self) -> f64 {
        self.vertices.iter().map(|v| (v.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Index of the loop paired with loop `k`.
    pub fn partner_loop(k: usize) -> usize {
        k ^ 1
    }
}

/// Verifies the discrete involution: vertex, triangle and loop pairing.
pub fn pairing_check(mesh: &SphereMesh) -> PairingReport {
    let n = mesh.vertices.len();
    let mut max_dev: f64 = 0.0;
    let mut worst = None;
    let mut involution = mesh.pairing.len() == n;
    if involution {
        for i in 0..n {
            let j = mesh.pairing[i];
            if j >= n || j == i || mesh.pairing[j] != i {
                involution = false;
                continue;
            }
            let dev = (mesh.vertices[j] + mesh.vertices[i]).norm();
            if dev > max_dev || worst.is_none() {
                max_dev = max_dev.max(dev);
                worst = Some(i);
            }
        }
    }
    let triangles_paired = involution && {
        let key = |t: [usize; 3]| {
            let mut s = t;
            s.sort_unstable();
            s
        };
        let set: std::collections::HashSet<[usize; 3]> = mesh.triangles.iter().map(|&t| key(t)).collect();
        mesh.triangles.iter().all(|t| set.contains(&key(t.map(|v| mesh.pairing[v]))))
    };
    let loops_paired = involution
        && mesh.loops.len() % 2 == 0
        && mesh.loops.iter().enumerate().all(|(k, l)| {
            let other = &mesh.loops[SphereMesh::partner_loop(k)];
            other.vertices.len() == l.vertices.len()
                && l.vertices.iter().zip(&other.vertices).all(|(&a, &b)| mesh.pairing[a] == b)
                && (other.center + l.center).norm() <= 1e-12
        });
    let valid = involution && triangles_paired && loops_paired && max_dev <= 1e-10;
    PairingReport { max_deviation: max_dev, worst_vertex: worst, involution, triangles_paired, loops_paired, valid }
}

/// Pairing permutation of a centrally symmetric point set, matched exactly
/// on coordinate bits.
pub(crate) fn exact_pairing(vertices: &[Vec3]) -> Option<Vec<usize>> {
    let key = |v: &Vec3| [v.x + 0.0, v.y + 0.0, v.z + 0.0].map(f64::to_bits);
    let index: HashMap<[u64; 3], usize> = vertices.iter().enumerate().map(|(i, v)| (key(v), i)).collect();
    vertices.iter().map(|v| index.get(&key(&-v)).copied()).collect()
}
