//! Boundary and volume meshes.

mod icosphere;
mod off;
mod shell;

pub use icosphere::build_icosphere;
pub use off::{read_off, write_off};
pub use shell::{build_shell_mesh, solid_angle, CellFace, FaceKind, ShellCell, VolumeMesh};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{BdieError, Point, Result};

/// Largest supported icosphere subdivision level.
pub const MAX_ICOSPHERE_LEVEL: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PartLabel {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VertexClass {
    InteriorDirichlet,
    InteriorNeumann,
    Interface,
}

/// Half-space predicate deciding which triangles belong to the Dirichlet part:
/// a triangle is Dirichlet iff its centroid satisfies `x[axis] < value`
/// (or `>` when `less` is false).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionRule {
    pub axis: usize,
    pub less: bool,
    pub value: f64,
}

impl Default for PartitionRule {
    fn default() -> Self {
        Self {
            axis: 2,
            less: true,
            value: 0.0,
        }
    }
}

impl PartitionRule {
    pub fn is_dirichlet(&self, x: &Point) -> bool {
        if self.less {
            x[self.axis] < self.value
        } else {
            x[self.axis] > self.value
        }
    }
}

impl fmt::Display for PartitionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let axis = ["x", "y", "z"][self.axis];
        let op = if self.less { '<' } else { '>' };
        write!(f, "{axis}{op}{}", self.value)
    }
}

impl FromStr for PartitionRule {
    type Err = BdieError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || BdieError::Partition(format!("invalid partition rule '{s}'"));
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (pos, less) = match (t.find('<'), t.find('>')) {
            (Some(p), None) => (p, true),
            (None, Some(p)) => (p, false),
            _ => return Err(bad()),
        };
        let axis = match &t[..pos] {
            "x" | "x1" => 0,
            "y" | "x2" => 1,
            "z" | "x3" => 2,
            _ => return Err(bad()),
        };
        let value: f64 = t[pos + 1..].parse().map_err(|_| bad())?;
        if !value.is_finite() {
            return Err(bad());
        }
        Ok(Self { axis, less, value })
    }
}

impl Serialize for PartitionRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PartitionRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A flat-triangle mesh of the boundary `S`.
///
/// Normals point from the exterior domain into the bounded complement.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub normals: Vec<Point>,
    pub areas: Vec<f64>,
    pub centroids: Vec<Point>,
    /// Longest edge of each triangle.
    pub diameters: Vec<f64>,
    pub part_label: Vec<PartLabel>,
    pub vertex_class: Vec<VertexClass>,
    pub level: Option<usize>,
}

impl SurfaceMesh {
    /// Builds the per-triangle geometry from raw connectivity. Every triangle is
    /// labelled Dirichlet until a partition is applied.
    pub fn from_raw(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let nt = triangles.len();
        let mut normals = Vec::with_capacity(nt);
        let mut areas = Vec::with_capacity(nt);
        let mut centroids = Vec::with_capacity(nt);
        let mut diameters = Vec::with_capacity(nt);
        for (k, t) in triangles.iter().enumerate() {
            if t.iter().any(|&i| i >= vertices.len()) {
                return Err(BdieError::Geometry(format!("triangle {k} references a missing vertex")));
            }
            let [a, b, c] = [vertices[t[0]], vertices[t[1]], vertices[t[2]]];
            let cr = (b - a).cross(&(c - a));
            let len = cr.norm();
            if len <= 0.0 || !len.is_finite() {
                return Err(BdieError::Geometry(format!("triangle {k} is degenerate")));
            }
            normals.push(cr / len);
            areas.push(0.5 * len);
            centroids.push((a + b + c) / 3.0);
            diameters.push((b - a).norm().max((c - b).norm()).max((a - c).norm()));
        }
        Ok(Self {
            vertex_class: vec![VertexClass::InteriorDirichlet; vertices.len()],
            part_label: vec![PartLabel::Dirichlet; nt],
            vertices,
            triangles,
            normals,
            areas,
            centroids,
            diameters,
            level: None,
        })
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn part_area(&self, label: PartLabel) -> f64 {
        self.areas
            .iter()
            .zip(&self.part_label)
            .filter(|(_, l)| **l == label)
            .map(|(a, _)| a)
            .sum()
    }

    /// Largest triangle diameter.
    pub fn h(&self) -> f64 {
        self.diameters.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_edge(&self) -> f64 {
        self.h()
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let [i, j, k] = self.triangles[t];
        [self.vertices[i], self.vertices[j], self.vertices[k]]
    }

    /// Area-weighted vertex normals (unit length).
    pub fn vertex_normals(&self) -> Vec<Point> {
        let mut acc = vec![Point::zeros(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                acc[v] += self.normals[t] * self.areas[t];
            }
        }
        acc.into_iter().map(|n| n.normalize()).collect()
    }

    /// Triangles incident to each vertex.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                out[v].push(t);
            }
        }
        out
    }

    /// `Σ_T area_T n_T`, zero for a closed surface.
    pub fn vector_area(&self) -> Point {
        self.normals
            .iter()
            .zip(&self.areas)
            .fold(Point::zeros(), |s, (n, a)| s + n * *a)
    }

    /// The same mesh with every triangle's orientation reversed.
    pub fn flipped(&self) -> Self {
        let mut m = self.clone();
        for t in &mut m.triangles {
            t.swap(1, 2);
        }
        for n in &mut m.normals {
            *n = -*n;
        }
        m
    }

    pub fn triangles_with(&self, label: PartLabel) -> Vec<usize> {
        (0..self.n_triangles())
            .filter(|&t| self.part_label[t] == label)
            .collect()
    }

    pub fn vertices_with(&self, class: VertexClass) -> Vec<usize> {
        (0..self.n_vertices())
            .filter(|&v| self.vertex_class[v] == class)
            .collect()
    }
}

/// Labels triangles by `rule` applied to their centroids and derives vertex
/// classes. Fails when either part comes out empty.
pub fn partition_boundary(mesh: &SurfaceMesh, rule: &PartitionRule) -> Result<SurfaceMesh> {
    let mut out = mesh.clone();
    out.part_label = mesh
        .centroids
        .iter()
        .map(|c| {
            if rule.is_dirichlet(c) {
                PartLabel::Dirichlet
            } else {
                PartLabel::Neumann
            }
        })
        .collect();
    let nd = out.part_label.iter().filter(|l| **l == PartLabel::Dirichlet).count();
    if nd == 0 || nd == out.part_label.len() {
        return Err(BdieError::Partition(format!(
            "rule '{rule}' leaves the {} part empty",
            if nd == 0 { "Dirichlet" } else { "Neumann" }
        )));
    }
    let mut touches = vec![(false, false); mesh.n_vertices()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for &v in tri {
            match out.part_label[t] {
                PartLabel::Dirichlet => touches[v].0 = true,
                PartLabel::Neumann => touches[v].1 = true,
            }
        }
    }
    out.vertex_class = touches
        .into_iter()
        .map(|(d, n)| match (d, n) {
            (true, true) => VertexClass::Interface,
            (false, true) => VertexClass::InteriorNeumann,
            _ => VertexClass::InteriorDirichlet,
        })
        .collect();
    Ok(out)
}

/// Distance from `p` to the closed triangle `(a, b, c)`.
pub fn point_triangle_distance(p: &Point, a: &Point, b: &Point, c: &Point) -> f64 {
    (p - closest_point_on_triangle(p, a, b, c)).norm()
}

/// Closest point of the closed triangle `(a, b, c)` to `p`.
pub fn closest_point_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> Point {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Discrete Gauss solid-angle sum `Σ area n·(p - c)/|p - c|³ / 4π`; close to
/// +1 for a correctly oriented closed mesh and a probe inside the body.
pub fn orientation_check(mesh: &SurfaceMesh, probe: &Point) -> Result<f64> {
    let scale = mesh.h().max(f64::MIN_POSITIVE);
    for t in 0..mesh.n_triangles() {
        let [a, b, c] = mesh.corners(t);
        if point_triangle_distance(probe, &a, &b, &c) <= 1e-10 * scale {
            return Err(BdieError::Geometry(format!(
                "probe ({}, {}, {}) lies on the surface",
                probe[0], probe[1], probe[2]
            )));
        }
    }
    let sum: f64 = (0..mesh.n_triangles())
        .map(|t| {
            let d = probe - mesh.centroids[t];
            mesh.areas[t] * mesh.normals[t].dot(&d) / d.norm().powi(3)
        })
        .sum();
    Ok(sum / (4.0 * std::f64::consts::PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn partition_rule_parsing() {
        let r: PartitionRule = "z<0".parse().unwrap();
        assert_eq!(r, PartitionRule::default());
        let r: PartitionRule = " x > 0.25 ".parse().unwrap();
        assert_eq!((r.axis, r.less, r.value), (0, false, 0.25));
        assert_eq!(r.to_string().parse::<PartitionRule>().unwrap(), r);
        for bad in ["", "z", "w<0", "z<abc", "z<0>1", "z=0"] {
            assert!(matches!(bad.parse::<PartitionRule>(), Err(BdieError::Partition(_))), "{bad}");
        }
    }

    #[test]
    fn default_partition_splits_sphere() {
        let m = partition_boundary(&build_icosphere(1).unwrap(), &PartitionRule::default()).unwrap();
        let nd = m.triangles_with(PartLabel::Dirichlet).len();
        let nn = m.triangles_with(PartLabel::Neumann).len();
        assert!(nd > 0 && nn > 0);
        assert_eq!(nd, nn);
        for v in m.vertices_with(VertexClass::Interface) {
            assert!(m.vertices[v][2].abs() < 1e-12);
        }
    }

    #[test]
    fn empty_part_is_rejected() {
        let m = build_icosphere(1).unwrap();
        let rule: PartitionRule = "z<10".parse().unwrap();
        assert!(matches!(partition_boundary(&m, &rule), Err(BdieError::Partition(_))));
    }

    #[test]
    fn hemisphere_area_and_label_partition() {
        let m = partition_boundary(&build_icosphere(3).unwrap(), &PartitionRule::default()).unwrap();
        let ad = m.part_area(PartLabel::Dirichlet);
        let an = m.part_area(PartLabel::Neumann);
        assert!((ad - 2.0 * PI).abs() / (2.0 * PI) < 0.02);
        assert!((ad + an - m.total_area()).abs() <= 1e-12 * m.total_area());
    }

    #[test]
    fn orientation_oracles() {
        let m = build_icosphere(3).unwrap();
        let o = orientation_check(&m, &Point::zeros()).unwrap();
        assert!((o - 1.0).abs() < 0.01, "{o}");
        let f = orientation_check(&m.flipped(), &Point::zeros()).unwrap();
        assert!((f + 1.0).abs() < 0.01, "{f}");
        let off = orientation_check(&m, &Point::new(0.0, 0.0, 0.5)).unwrap();
        assert!((off - 1.0).abs() < 0.02, "{off}");
        let v = m.vertices[0];
        assert!(matches!(orientation_check(&m, &v), Err(BdieError::Geometry(_))));
    }

    #[test]
    fn closest_point_regions() {
        let a = Point::new(0.0, 0.0, 0.0);
        let b = Point::new(1.0, 0.0, 0.0);
        let c = Point::new(0.0, 1.0, 0.0);
        let d = |p: Point| point_triangle_distance(&p, &a, &b, &c);
        assert!((d(Point::new(0.2, 0.2, 0.5)) - 0.5).abs() < 1e-15);
        assert!((d(Point::new(-1.0, -1.0, 0.0)) - 2f64.sqrt()).abs() < 1e-15);
        assert!((d(Point::new(1.0, 1.0, 0.0)) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((d(Point::new(0.5, -2.0, 0.0)) - 2.0).abs() < 1e-15);
    }
}
