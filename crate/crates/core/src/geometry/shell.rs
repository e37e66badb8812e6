use super::{build_icosphere, SurfaceMesh};
use crate::quadrature::{gauss_legendre, gauss_triangle};
use crate::{BdieError, Point, Result};

/// Reference domain of a cell face parametrization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceKind {
    /// `u, v ≥ 0, u + v ≤ 1`.
    Triangle,
    /// `[0, 1]²`.
    Square,
}

/// One of the five faces of a shell cell, parametrized over a reference
/// domain. [`CellFace::map`] returns the point and the outward vector area
/// element per unit reference measure.
#[derive(Clone, Copy, Debug)]
pub enum CellFace {
    Sphere {
        radius: f64,
        /// +1 for the outer face, -1 for the inner one.
        sign: f64,
        p: [Point; 3],
    },
    Side {
        a: Point,
        b: Point,
        r0: f64,
        r1: f64,
        outward: Point,
    },
}

impl CellFace {
    pub fn kind(&self) -> FaceKind {
        match self {
            Self::Sphere { .. } => FaceKind::Triangle,
            Self::Side { .. } => FaceKind::Square,
        }
    }

    #[inline]
    pub fn map(&self, u: f64, v: f64) -> (Point, Point) {
        match self {
            Self::Sphere { radius, sign, p } => {
                let e1 = p[1] - p[0];
                let e2 = p[2] - p[0];
                let x = p[0] + e1 * u + e2 * v;
                let nx = x.norm();
                let e = x / nx;
                let jac = e1.cross(&e2).dot(&x).abs() / (nx * nx * nx);
                (e * *radius, e * (sign * radius * radius * jac))
            }
            Self::Side { a, b, r0, r1, outward } => {
                let d = b - a;
                let x = a + d * u;
                let nx = x.norm();
                let e = x / nx;
                let de = (d - e * e.dot(&d)) / nx;
                let s = r0 + v * (r1 - r0);
                (e * s, outward * (s * de.norm() * (r1 - r0)))
            }
        }
    }

    /// Unit normal of a planar face, `None` for the spherical ones.
    pub fn plane_normal(&self) -> Option<Point> {
        match self {
            Self::Side { outward, .. } => Some(*outward),
            Self::Sphere { .. } => None,
        }
    }
}

/// A cell `{ s·q : q in the radial projection of a flat angular triangle,
/// r0 ≤ s ≤ r1 }` of the graded shell.
#[derive(Clone, Debug)]
pub struct ShellCell {
    pub center: Point,
    pub volume: f64,
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    pub radial_index: usize,
    pub angular_index: usize,
    pub r0: f64,
    pub r1: f64,
    /// Corners of the angular triangle on the unit sphere.
    pub corners: [Point; 3],
    pub diameter: f64,
}

impl ShellCell {
    pub fn faces(&self) -> [CellFace; 5] {
        let p = self.corners;
        let side = |i: usize, j: usize, k: usize| {
            let m = p[i].cross(&p[j]).normalize();
            let outward = if m.dot(&p[k]) > 0.0 { -m } else { m };
            CellFace::Side {
                a: p[i],
                b: p[j],
                r0: self.r0,
                r1: self.r1,
                outward,
            }
        };
        [
            CellFace::Sphere { radius: self.r0, sign: -1.0, p },
            CellFace::Sphere { radius: self.r1, sign: 1.0, p },
            side(0, 1, 2),
            side(1, 2, 0),
            side(2, 0, 1),
        ]
    }

    /// Product rule with `radial_order` Gauss points per radial sub-interval,
    /// the triangle rule of `tri_order` on each angular sub-triangle, after
    /// `radial_split` radial and `angular_levels` angular bisections.
    pub fn product_rule(
        &self,
        radial_order: usize,
        tri_order: usize,
        radial_split: usize,
        angular_levels: usize,
    ) -> Result<(Vec<Point>, Vec<f64>)> {
        let tri = gauss_triangle(tri_order)?;
        let (gx, gw) = gauss_legendre(radial_order);
        let mut subs = vec![self.corners];
        for _ in 0..angular_levels {
            let mut next = Vec::with_capacity(subs.len() * 4);
            for [a, b, c] in subs {
                let ab = (a + b) * 0.5;
                let bc = (b + c) * 0.5;
                let ca = (c + a) * 0.5;
                next.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
            }
            subs = next;
        }
        let mut ang = Vec::with_capacity(subs.len() * tri.len());
        let mut total = 0.0;
        for [a, b, c] in &subs {
            let e1 = b - a;
            let e2 = c - a;
            let cr = e1.cross(&e2);
            for (l, w) in tri.nodes.iter().zip(&tri.weights) {
                let x = a + e1 * l[0] + e2 * l[1];
                let nx = x.norm();
                let wa = w * cr.dot(&x).abs() / (nx * nx * nx);
                total += wa;
                ang.push((x / nx, wa));
            }
        }
        let scale = solid_angle(&self.corners) / total;
        let nr = radial_split.max(1);
        let mut nodes = Vec::with_capacity(ang.len() * nr * radial_order);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for j in 0..nr {
            let s0 = self.r0 + (self.r1 - self.r0) * j as f64 / nr as f64;
            let s1 = self.r0 + (self.r1 - self.r0) * (j + 1) as f64 / nr as f64;
            for (x, w) in gx.iter().zip(&gw) {
                let s = s0 + (s1 - s0) * x;
                let ws = w * (s1 - s0) * s * s;
                for (e, wa) in &ang {
                    nodes.push(e * s);
                    weights.push(ws * wa * scale);
                }
            }
        }
        Ok((nodes, weights))
    }
}

/// Solid angle subtended at the origin by the flat triangle `p`.
pub fn solid_angle(p: &[Point; 3]) -> f64 {
    let [a, b, c] = p;
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let num = a.dot(&b.cross(c)).abs();
    let den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
    2.0 * num.atan2(den)
}

/// Graded decomposition of the truncated exterior shell `r0 < |x| < r1`.
#[derive(Clone, Debug)]
pub struct VolumeMesh {
    pub cells: Vec<ShellCell>,
    pub inner_radius: f64,
    pub outer_radius: f64,
    /// Radial layer boundaries, `n_radial + 1` increasing values.
    pub radii: Vec<f64>,
    /// The icosphere whose triangles define the angular sectors.
    pub angular: SurfaceMesh,
    /// For each angular triangle, the triangles sharing its edges
    /// `(0,1)`, `(1,2)`, `(2,0)`.
    pub angular_neighbors: Vec<[usize; 3]>,
}

impl VolumeMesh {
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_angular(&self) -> usize {
        self.angular.n_triangles()
    }

    pub fn n_radial(&self) -> usize {
        self.radii.len() - 1
    }

    pub fn cell_index(&self, radial: usize, angular: usize) -> usize {
        radial * self.n_angular() + angular
    }

    pub fn total_volume(&self) -> f64 {
        self.cells.iter().map(|c| c.volume).sum()
    }

    pub fn centers(&self) -> Vec<Point> {
        self.cells.iter().map(|c| c.center).collect()
    }

    /// Largest cell diameter.
    pub fn h(&self) -> f64 {
        self.cells.iter().map(|c| c.diameter).fold(0.0, f64::max)
    }

    /// Cell containing `x`, if any.
    pub fn locate(&self, x: &Point) -> Option<usize> {
        let r = x.norm();
        if r < self.inner_radius || r > self.outer_radius {
            return None;
        }
        let k = self.radii.windows(2).position(|w| r >= w[0] && r <= w[1])?;
        let e = x / r;
        (0..self.n_angular())
            .find(|&t| {
                let [a, b, c] = self.angular.corners(t);
                let s = a.cross(&b).dot(&c).signum();
                s * a.cross(&b).dot(&e) >= -1e-14
                    && s * b.cross(&c).dot(&e) >= -1e-14
                    && s * c.cross(&a).dot(&e) >= -1e-14
            })
            .map(|t| self.cell_index(k, t))
    }

    /// Pairs of face-adjacent cells with the shared face area.
    pub fn adjacent_pairs(&self) -> Vec<(usize, usize, f64)> {
        let na = self.n_angular();
        let mut out = Vec::new();
        for k in 0..self.n_radial() {
            let (r0, r1) = (self.radii[k], self.radii[k + 1]);
            for t in 0..na {
                let i = self.cell_index(k, t);
                if k + 1 < self.n_radial() {
                    let omega = solid_angle(&self.angular.corners(t));
                    out.push((i, self.cell_index(k + 1, t), r1 * r1 * omega));
                }
                let p = self.angular.corners(t);
                for (e, &nb) in self.angular_neighbors[t].iter().enumerate() {
                    if nb > t {
                        let angle = p[e].angle(&p[(e + 1) % 3]);
                        out.push((i, self.cell_index(k, nb), 0.5 * (r1 * r1 - r0 * r0) * angle));
                    }
                }
            }
        }
        out
    }
}

fn edge_neighbors(mesh: &SurfaceMesh) -> Result<Vec<[usize; 3]>> {
    use std::collections::HashMap;
    let mut owner: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for e in 0..3 {
            let (i, j) = (tri[e], tri[(e + 1) % 3]);
            owner.entry((i.min(j), i.max(j))).or_default().push(t);
        }
    }
    let mut out = vec![[0; 3]; mesh.n_triangles()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for e in 0..3 {
            let (i, j) = (tri[e], tri[(e + 1) % 3]);
            let o = &owner[&(i.min(j), i.max(j))];
            out[t][e] = match o.as_slice() {
                [a, b] => {
                    if *a == t {
                        *b
                    } else {
                        *a
                    }
                }
                _ => return Err(BdieError::Geometry("angular mesh is not closed".into())),
            };
        }
    }
    Ok(out)
}

/// Builds the graded shell mesh. Layer widths grow geometrically by
/// `grading`; every layer is split into the angular sectors of the
/// level-`angular_level` icosphere.
pub fn build_shell_mesh(
    inner_radius: f64,
    outer_radius: f64,
    n_radial: usize,
    angular_level: usize,
    grading: f64,
) -> Result<VolumeMesh> {
    if !(inner_radius >= 1.0 && outer_radius > inner_radius && outer_radius.is_finite()) {
        return Err(BdieError::Geometry(format!(
            "degenerate shell radii ({inner_radius}, {outer_radius})"
        )));
    }
    if n_radial == 0 || !(grading >= 1.0) || !grading.is_finite() {
        return Err(BdieError::Geometry(format!(
            "shell needs n_radial ≥ 1 and grading ≥ 1 (got {n_radial}, {grading})"
        )));
    }
    let angular = build_icosphere(angular_level)?;
    let angular_neighbors = edge_neighbors(&angular)?;
    let unit: f64 = (0..n_radial).map(|k| grading.powi(k as i32)).sum();
    let w0 = (outer_radius - inner_radius) / unit;
    let mut radii = vec![inner_radius];
    let mut acc = inner_radius;
    for k in 0..n_radial {
        acc += w0 * grading.powi(k as i32);
        radii.push(if k + 1 == n_radial { outer_radius } else { acc });
    }

    let mut cells = Vec::with_capacity(n_radial * angular.n_triangles());
    for k in 0..n_radial {
        let (r0, r1) = (radii[k], radii[k + 1]);
        for t in 0..angular.n_triangles() {
            let corners = angular.corners(t);
            let omega = solid_angle(&corners);
            let volume = omega * (r1.powi(3) - r0.powi(3)) / 3.0;
            let sbar = 0.75 * (r1.powi(4) - r0.powi(4)) / (r1.powi(3) - r0.powi(3));
            let center = angular.centroids[t].normalize() * sbar;
            let mut diameter: f64 = 0.0;
            for &p in &corners {
                for &q in &corners {
                    for (s, u) in [(r0, r0), (r0, r1), (r1, r1)] {
                        diameter = diameter.max((p * s - q * u).norm());
                    }
                }
            }
            let mut cell = ShellCell {
                center,
                volume,
                nodes: Vec::new(),
                weights: Vec::new(),
                radial_index: k,
                angular_index: t,
                r0,
                r1,
                corners,
                diameter,
            };
            let (nodes, weights) = cell.product_rule(2, 2, 1, 0)?;
            cell.nodes = nodes;
            cell.weights = weights;
            cells.push(cell);
        }
    }
    Ok(VolumeMesh {
        cells,
        inner_radius,
        outer_radius,
        radii,
        angular,
        angular_neighbors,
    })
}
