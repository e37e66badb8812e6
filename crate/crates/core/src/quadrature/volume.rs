use super::rules::{gauss_legendre, gauss_triangle, QuadratureRule};
use super::QuadratureSettings;
use crate::geometry::{CellFace, FaceKind, ShellCell, VolumeMesh};
use crate::{Point, Result};

/// A physical volume node. Weights of the cone rule may be negative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolumeNode {
    pub x: Point,
    pub w: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VolumeScheme {
    Far,
    Mid,
    Cone,
}

/// Per-cell rules for a volume mesh, selected by the distance from the
/// target to the cell.
///
/// Near cells are integrated with the cone rule
/// `∫_cell k = Σ_F ∫_F (q - y)·n(q) ∫₀¹ k(y + s(q - y)) s² ds dA(q)`,
/// which turns the weak singularity at `y` into a smooth radial integrand.
#[derive(Clone, Debug)]
pub struct VolumeIntegrator {
    mid_nodes: Vec<Vec<VolumeNode>>,
    face_tri: QuadratureRule,
    face_square: (Vec<f64>, Vec<f64>),
    radial: (Vec<f64>, Vec<f64>),
    far_ratio: f64,
    near_ratio: f64,
    face_depth: usize,
    face_eta: f64,
}

impl VolumeIntegrator {
    pub fn new(mesh: &VolumeMesh, s: &QuadratureSettings) -> Result<Self> {
        let mut mid_nodes = Vec::with_capacity(mesh.n_cells());
        for c in &mesh.cells {
            let (x, w) = c.product_rule(2, 2, s.mid_radial_split, s.mid_angular_levels)?;
            mid_nodes.push(x.into_iter().zip(w).map(|(x, w)| VolumeNode { x, w }).collect());
        }
        Ok(Self {
            mid_nodes,
            face_tri: gauss_triangle(4)?,
            face_square: gauss_legendre(3),
            radial: gauss_legendre(s.volume_radial_order.max(1)),
            far_ratio: s.volume_far_ratio,
            near_ratio: s.volume_near_ratio,
            face_depth: s.volume_face_depth,
            face_eta: s.volume_face_eta,
        })
    }

    pub fn scheme(&self, target: &Point, cell: &ShellCell) -> VolumeScheme {
        let r = (target - cell.center).norm() / cell.diameter;
        if r >= self.far_ratio {
            VolumeScheme::Far
        } else if r >= self.near_ratio {
            VolumeScheme::Mid
        } else {
            VolumeScheme::Cone
        }
    }

    /// Appends the nodes integrating a kernel singular at `target` over
    /// cell `index` of `mesh`.
    pub fn cell_nodes(
        &self,
        target: &Point,
        mesh: &VolumeMesh,
        index: usize,
        out: &mut Vec<VolumeNode>,
    ) -> VolumeScheme {
        let cell = &mesh.cells[index];
        let scheme = self.scheme(target, cell);
        match scheme {
            VolumeScheme::Far => out.extend(
                cell.nodes
                    .iter()
                    .zip(&cell.weights)
                    .map(|(x, w)| VolumeNode { x: *x, w: *w }),
            ),
            VolumeScheme::Mid => out.extend_from_slice(&self.mid_nodes[index]),
            VolumeScheme::Cone => self.cone_nodes(target, cell, out),
        }
        scheme
    }

    /// Cone-rule nodes for any target position relative to the cell.
    pub fn cone_nodes(&self, target: &Point, cell: &ShellCell, out: &mut Vec<VolumeNode>) {
        let tol = 1e-12 * cell.diameter;
        for face in cell.faces() {
            if let Some(n) = face.plane_normal() {
                let (q, _) = face.map(0.0, 0.0);
                if (q - target).dot(&n).abs() <= tol {
                    continue;
                }
            }
            match face.kind() {
                FaceKind::Triangle => {
                    let root = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
                    self.refine_tri(target, &face, root, 0, out);
                }
                FaceKind::Square => self.refine_square(target, &face, [0.0, 1.0, 0.0, 1.0], 0, out),
            }
        }
    }

    fn accept(&self, target: &Point, face: &CellFace, params: &[[f64; 2]], depth: usize) -> bool {
        if depth >= self.face_depth {
            return true;
        }
        let k = params.len() as f64;
        let cu = params.iter().map(|p| p[0]).sum::<f64>() / k;
        let cv = params.iter().map(|p| p[1]).sum::<f64>() / k;
        let (c, _) = face.map(cu, cv);
        let rho = params
            .iter()
            .map(|p| (face.map(p[0], p[1]).0 - c).norm())
            .fold(0.0, f64::max);
        (target - c).norm() >= self.face_eta * rho
    }

    fn emit(&self, target: &Point, face: &CellFace, u: f64, v: f64, w: f64, out: &mut Vec<VolumeNode>) {
        let (q, n) = face.map(u, v);
        let d = q - target;
        let flux = w * d.dot(&n);
        let (rs, rw) = &self.radial;
        for (s, ws) in rs.iter().zip(rw) {
            out.push(VolumeNode {
                x: target + d * *s,
                w: flux * ws * s * s,
            });
        }
    }

    fn refine_tri(&self, target: &Point, face: &CellFace, p: [[f64; 2]; 3], depth: usize, out: &mut Vec<VolumeNode>) {
        if self.accept(target, face, &p, depth) {
            let e1 = [p[1][0] - p[0][0], p[1][1] - p[0][1]];
            let e2 = [p[2][0] - p[0][0], p[2][1] - p[0][1]];
            let jac = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
            for (l, w) in self.face_tri.nodes.iter().zip(&self.face_tri.weights) {
                let u = p[0][0] + l[0] * e1[0] + l[1] * e2[0];
                let v = p[0][1] + l[0] * e1[1] + l[1] * e2[1];
                self.emit(target, face, u, v, w * jac, out);
            }
            return;
        }
        let m = |a: [f64; 2], b: [f64; 2]| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let (ab, bc, ca) = (m(p[0], p[1]), m(p[1], p[2]), m(p[2], p[0]));
        for child in [[p[0], ab, ca], [ab, p[1], bc], [ca, bc, p[2]], [ab, bc, ca]] {
            self.refine_tri(target, face, child, depth + 1, out);
        }
    }

    fn refine_square(&self, target: &Point, face: &CellFace, b: [f64; 4], depth: usize, out: &mut Vec<VolumeNode>) {
        let [u0, u1, v0, v1] = b;
        let corners = [[u0, v0], [u1, v0], [u1, v1], [u0, v1]];
        if self.accept(target, face, &corners, depth) {
            let (x, w) = &self.face_square;
            for (a, wa) in x.iter().zip(w) {
                for (c, wc) in x.iter().zip(w) {
                    let u = u0 + a * (u1 - u0);
                    let v = v0 + c * (v1 - v0);
                    self.emit(target, face, u, v, wa * wc * (u1 - u0) * (v1 - v0), out);
                }
            }
            return;
        }
        let um = 0.5 * (u0 + u1);
        let vm = 0.5 * (v0 + v1);
        for child in [[u0, um, v0, vm], [um, u1, v0, vm], [u0, um, vm, v1], [um, u1, vm, v1]] {
            self.refine_square(target, face, child, depth + 1, out);
        }
    }
}

/// Sum of `w k(x)` over the given nodes, skipping nodes closer than
/// `exclusion_radius` to the target.
pub fn integrate_volume(
    target: &Point,
    nodes: &[Point],
    weights: &[f64],
    kernel: impl Fn(&Point) -> f64,
    exclusion_radius: f64,
) -> f64 {
    nodes
        .iter()
        .zip(weights)
        .filter(|(x, _)| (*x - target).norm() >= exclusion_radius)
        .map(|(x, w)| w * kernel(x))
        .sum()
}
