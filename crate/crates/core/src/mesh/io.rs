//! Plain-text mesh format.
//!
//! ```text
//! SHM 1
//! V F L
//! x y z                      (V lines)
//! a b c                      (F lines, outward orientation)
//! p                          (V lines, pairing partner of each vertex)
//! cx cy cz radius n          (per loop, followed by one line of n indices)
//! ```
//!
//! Floats are written with 17 significant digits, so a write/read cycle
//! reproduces every coordinate bit for bit.

use std::fmt::Write as _;

use super::{BoundaryLoop, SphereMesh};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

impl SphereMesh {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "SHM 1");
        let _ = writeln!(s, "{} {} {}", self.vertices.len(), self.triangles.len(), self.loops.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        for p in &self.pairing {
            let _ = writeln!(s, "{p}");
        }
        for l in &self.loops {
            let _ = writeln!(
                s,
                "{:.16e} {:.16e} {:.16e} {:.16e} {}",
                l.center.x,
                l.center.y,
                l.center.z,
                l.radius,
                l.vertices.len()
            );
            let idx: Vec<String> = l.vertices.iter().map(usize::to_string).collect();
            let _ = writeln!(s, "{}", idx.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let mut next = |what: &str| lines.next().ok_or_else(|| Error::Parse(format!("unexpected end of mesh file: {what}")));
        if next("header")? != "SHM 1" {
            return Err(Error::Parse("missing 'SHM 1' header".into()));
        }
        let counts = nums::<usize>(next("counts")?, 3)?;
        let (nv, nf, nl) = (counts[0], counts[1], counts[2]);
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let c = nums::<f64>(next("vertex")?, 3)?;
            vertices.push(Vec3::new(c[0], c[1], c[2]));
        }
        let mut triangles = Vec::with_capacity(nf);
        for _ in 0..nf {
            let t = nums::<usize>(next("face")?, 3)?;
            if t.iter().any(|&i| i >= nv) {
                return Err(Error::Parse(format!("face index out of range: {t:?}")));
            }
            triangles.push([t[0], t[1], t[2]]);
        }
        let mut pairing = Vec::with_capacity(nv);
        for _ in 0..nv {
            pairing.push(nums::<usize>(next("pairing")?, 1)?[0]);
        }
        let mut loops = Vec::with_capacity(nl);
        for _ in 0..nl {
            let head: Vec<&str> = next("loop header")?.split_whitespace().collect();
            if head.len() != 5 {
                return Err(Error::Parse("loop header needs 5 fields".into()));
            }
            let f = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number {s}")));
            let center = Vec3::new(f(head[0])?, f(head[1])?, f(head[2])?);
            let radius = f(head[3])?;
            let n: usize = head[4].parse().map_err(|_| Error::Parse("bad loop length".into()))?;
            let vertices = nums::<usize>(next("loop indices")?, n)?;
            loops.push(BoundaryLoop { center, radius, vertices });
        }
        Ok(SphereMesh::new(vertices, triangles, loops, pairing))
    }
}

fn nums<T: std::str::FromStr>(line: &str, n: usize) -> Result<Vec<T>> {
    let v: Vec<T> = line
        .split_whitespace()
        .map(|s| s.parse::<T>().map_err(|_| Error::Parse(format!("bad token '{s}'"))))
        .collect::<Result<_>>()?;
    if v.len() != n {
        return Err(Error::Parse(format!("expected {n} fields, got {}", v.len())));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use crate::geometry::{CylinderConvention, HandleGeometry, HandleProfile, SpherePoint};
    use crate::mesh::{build_mesh, icosphere, SphereMesh};

    #[test]
    fn round_trip_is_bit_identical() {
        let m = icosphere(2);
        let back = SphereMesh::from_text(&m.to_text()).unwrap();
        assert_eq!(m, back);

        let prof = HandleProfile::new(0.1, 3.0, 0.4, 0.8, 1.0).unwrap();
        let c = SpherePoint::normalized(vec![0.2, 0.5, 0.7]).unwrap();
        let g = HandleGeometry::new(prof, &c, CylinderConvention::Section3).unwrap();
        let m = build_mesh(&[g], 0.2, 16).unwrap();
        let back = SphereMesh::from_text(&m.to_text()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(SphereMesh::from_text("SHM 2\n").is_err());
        assert!(SphereMesh::from_text("SHM 1\n1 0 0\n0 0\n").is_err());
    }
}
