use super::SphereMesh;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// The holed mesh with every loop identified with its antipodal partner:
/// a triangulated surface with one handle per hole pair.
///
/// Each triangle keeps the corner positions it had in the holed mesh, so
/// element geometry is unchanged and only the vertex numbering differs.
#[derive(Clone, Debug)]
pub struct GluedMesh {
    pub num_vertices: usize,
    pub triangles: Vec<[usize; 3]>,
    pub corners: Vec<[Vec3; 3]>,
    /// Glued vertex of every holed-mesh vertex.
    pub merge: Vec<usize>,
}

impl GluedMesh {
    /// Identifies `loops[2k + 1][j]` with `loops[2k][j]`.
    pub fn from_holed(mesh: &SphereMesh) -> Result<Self> {
        if mesh.loops.len() % 2 != 0 {
            return Err(Error::Contract("loops do not come in antipodal pairs".into()));
        }
        let n = mesh.num_vertices();
        let mut target: Vec<usize> = (0..n).collect();
        for k in (0..mesh.loops.len()).step_by(2) {
            let (a, b) = (&mesh.loops[k], &mesh.loops[k + 1]);
            if a.vertices.len() != b.vertices.len() {
                return Err(Error::Contract(format!("loops {k} and {} differ in length", k + 1)));
            }
            for (&va, &vb) in a.vertices.iter().zip(&b.vertices) {
                if mesh.pairing.get(va) != Some(&vb) {
                    return Err(Error::Contract(format!("loop vertices {va} and {vb} are not paired")));
                }
                target[vb] = va;
            }
        }
        let mut merge = vec![usize::MAX; n];
        let mut count = 0;
        for v in 0..n {
            if target[v] == v {
                merge[v] = count;
                count += 1;
            }
        }
        for v in 0..n {
            if target[v] != v {
                merge[v] = merge[target[v]];
            }
        }
        Ok(Self {
            num_vertices: count,
            triangles: mesh.triangles.iter().map(|t| t.map(|v| merge[v])).collect(),
            corners: mesh.triangles.iter().map(|t| t.map(|v| mesh.vertices[v])).collect(),
            merge,
        })
    }

    /// Pulls a glued function back to the holed mesh.
    pub fn lift(&self, v: &[f64]) -> Vec<f64> {
        self.merge.iter().map(|&g| v[g]).collect()
    }

    /// `V - E + F` of the glued surface.
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = std::collections::HashSet::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        self.num_vertices as i64 - edges.len() as i64 + self.triangles.len() as i64
    }
}
