use std::collections::HashMap;

use super::{exact_pairing, SphereMesh};
use crate::geometry::Vec3;

/// Icosahedron refined `level` times by edge midpoints projected to the
/// sphere: `10·4^level + 2` vertices, `20·4^level` triangles.
///
/// Both the icosahedron and the midpoint rule commute with `x ↦ -x`
/// bit-for-bit, so the pairing is exact.
pub fn icosphere(level: u32) -> SphereMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vec3>| {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let m = (vertices[a] + vertices[b]) * 0.5;
                vertices.push(m / m.norm());
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for &[a, b, c] in &triangles {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    let pairing = exact_pairing(&vertices).expect("icosphere vertex set is centrally symmetric");
    SphereMesh::new(vertices, triangles, Vec::new(), pairing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::pairing_check;

    #[test]
    fn level_zero_is_the_icosahedron() {
        let m = icosphere(0);
        assert_eq!(m.num_vertices(), 12);
        assert_eq!(m.num_triangles(), 20);
        assert!(pairing_check(&m).valid);
    }

    #[test]
    fn vertex_counts_follow_refinement_recursion() {
        for level in 0..5 {
            let m = icosphere(level);
            assert_eq!(m.num_vertices(), 10 * 4usize.pow(level) + 2);
            assert_eq!(m.num_triangles(), 20 * 4usize.pow(level));
            assert_eq!(m.euler_characteristic(), 2);
            assert!(m.is_conforming());
            let report = pairing_check(&m);
            assert!(report.valid && report.max_deviation <= 1e-12, "level {level}: {report:?}");
        }
    }

    #[test]
    fn triangles_are_outward_oriented() {
        let m = icosphere(2);
        for t in &m.triangles {
            let [a, b, c] = t.map(|i| m.vertices[i]);
            assert!((b - a).cross(&(c - a)).dot(&(a + b + c)) > 0.0);
        }
    }

    #[test]
    fn area_converges_to_sphere_area() {
        let errs: Vec<f64> = (2..6)
            .map(|l| (icosphere(l).total_area() - 4.0 * std::f64::consts::PI).abs())
            .collect();
        for w in errs.windows(2) {
            let rate = w[0] / w[1];
            assert!(rate > 3.5 && rate < 4.5, "rate {rate}");
        }
    }
}
