use std::collections::HashMap;

use super::{SurfaceMesh, MAX_ICOSPHERE_LEVEL};
use crate::{BdieError, Point, Result};

/// Pole-aligned icosahedron: one vertex at each pole and two rings of five at
/// `z = ±1/√5`, the lower ring rotated by π/5.
fn icosahedron() -> (Vec<Point>, Vec<[usize; 3]>) {
    let z = 1.0 / 5f64.sqrt();
    let rho = 2.0 / 5f64.sqrt();
    let mut v = vec![Point::new(0.0, 0.0, 1.0)];
    for k in 0..5 {
        let t = 2.0 * std::f64::consts::PI * k as f64 / 5.0;
        v.push(Point::new(rho * t.cos(), rho * t.sin(), z));
    }
    for k in 0..5 {
        let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / 5.0;
        v.push(Point::new(rho * t.cos(), rho * t.sin(), -z));
    }
    v.push(Point::new(0.0, 0.0, -1.0));

    let up = |k: usize| 1 + k % 5;
    let lo = |k: usize| 6 + k % 5;
    let mut f = Vec::with_capacity(20);
    for k in 0..5 {
        f.push([0, up(k), up(k + 1)]);
        f.push([up(k), lo(k), up(k + 1)]);
        f.push([up(k + 1), lo(k), lo(k + 1)]);
        f.push([11, lo(k + 1), lo(k)]);
    }
    // orient every face so that its winding normal points to the origin
    for t in &mut f {
        let [a, b, c] = [v[t[0]], v[t[1]], v[t[2]]];
        if (b - a).cross(&(c - a)).dot(&(a + b + c)) > 0.0 {
            t.swap(1, 2);
        }
    }
    (v, f)
}

/// Unit-sphere triangulation after `level` midpoint subdivisions of the
/// icosahedron, with new vertices projected to the sphere and normals pointing
/// to the origin.
pub fn build_icosphere(level: usize) -> Result<SurfaceMesh> {
    if level > MAX_ICOSPHERE_LEVEL {
        return Err(BdieError::Resource(format!(
            "icosphere level {level} exceeds the maximum {MAX_ICOSPHERE_LEVEL}"
        )));
    }
    let (mut verts, mut faces) = icosahedron();
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |i: usize, j: usize, verts: &mut Vec<Point>| -> usize {
            let key = (i.min(j), i.max(j));
            *mid.entry(key).or_insert_with(|| {
                verts.push(((verts[i] + verts[j]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.push([a, ab, ca]);
            next.push([ab, b, bc]);
            next.push([ca, bc, c]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    let mut mesh = SurfaceMesh::from_raw(verts, faces)?;
    mesh.level = Some(level);
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn combinatorics() {
        let m0 = build_icosphere(0).unwrap();
        assert_eq!((m0.n_vertices(), m0.n_triangles()), (12, 20));
        assert_eq!(build_icosphere(2).unwrap().n_triangles(), 320);
        for l in 0..4 {
            let m = build_icosphere(l).unwrap();
            // Euler characteristic of the sphere
            let edges = 3 * m.n_triangles() / 2;
            assert_eq!(m.n_vertices() + m.n_triangles() - edges, 2);
        }
    }

    #[test]
    fn level_cap() {
        assert!(matches!(build_icosphere(7), Err(BdieError::Resource(_))));
    }

    #[test]
    fn area_converges_to_sphere() {
        let a = build_icosphere(3).unwrap().total_area();
        assert!((a - 4.0 * PI).abs() / (4.0 * PI) < 0.005, "{a}");
    }

    #[test]
    fn normals_unit_inward_and_closed() {
        for l in 0..4 {
            let m = build_icosphere(l).unwrap();
            for (n, c) in m.normals.iter().zip(&m.centroids) {
                assert!((n.norm() - 1.0).abs() < 1e-12);
                assert!(n.dot(&(-c.normalize())) > 0.9);
            }
            for v in &m.vertices {
                assert!((v.norm() - 1.0).abs() < 1e-14);
            }
            assert!(m.vector_area().norm() < 1e-10 * m.total_area());
        }
    }

    #[test]
    fn refinement_quadruples_and_shrinks_edges() {
        let ratio = |l: usize| {
            let a = build_icosphere(l).unwrap();
            let b = build_icosphere(l + 1).unwrap();
            assert_eq!(b.n_triangles(), 4 * a.n_triangles());
            a.max_edge() / b.max_edge()
        };
        // the first subdivision pushes the projected midpoints outwards and
        // only shrinks the longest edge by 1.70
        assert!((ratio(0) - 1.7013).abs() < 1e-4);
        for l in 1..5 {
            assert!(ratio(l) >= 1.9, "level {l}");
        }
    }

    #[test]
    fn deterministic() {
        let a = build_icosphere(2).unwrap();
        let b = build_icosphere(2).unwrap();
        assert_eq!(a.vertices, b.vertices);
        assert_eq!(a.triangles, b.triangles);
    }
}
