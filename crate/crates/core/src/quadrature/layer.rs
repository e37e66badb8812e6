use super::rules::{duffy_triangle, gauss_triangle, QuadratureRule};
use super::QuadratureSettings;
use crate::geometry::point_triangle_distance;
use crate::{Point, Result};

/// A physical quadrature node on a boundary triangle; `bary` are its
/// barycentric coordinates with respect to the triangle corners.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerNode {
    pub x: Point,
    pub w: f64,
    pub bary: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerScheme {
    Far,
    Subdivided,
    VertexDuffy,
    SplitDuffy,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PanelPlan {
    pub scheme: LayerScheme,
    /// The target lies on the (closed) panel.
    pub on_panel: bool,
}

/// Precomputed surface rules.
#[derive(Clone, Debug)]
pub struct LayerRules {
    pub far: QuadratureRule,
    pub near: QuadratureRule,
    /// Duffy rule clustered at the first reference vertex.
    pub duffy: QuadratureRule,
    pub far_ratio: f64,
    pub max_depth: usize,
}

impl LayerRules {
    pub fn new(s: &QuadratureSettings) -> Result<Self> {
        Ok(Self {
            far: gauss_triangle(s.far_order)?,
            near: gauss_triangle(s.near_order)?,
            duffy: duffy_triangle(0, s.duffy_order)?,
            far_ratio: s.far_ratio,
            max_depth: s.max_depth,
        })
    }
}

impl Default for LayerRules {
    fn default() -> Self {
        Self::new(&QuadratureSettings::default()).expect("default rules are valid")
    }
}

type Bary = [[f64; 3]; 3];

fn to_point(p: &[Point; 3], l: &[f64; 3]) -> Point {
    p[0] * l[0] + p[1] * l[1] + p[2] * l[2]
}

fn apply_rule(rule: &QuadratureRule, p: &[Point; 3], sub: &Bary, out: &mut Vec<LayerNode>) {
    let c: [Point; 3] = [to_point(p, &sub[0]), to_point(p, &sub[1]), to_point(p, &sub[2])];
    let jac = (c[1] - c[0]).cross(&(c[2] - c[0])).norm();
    for (r, w) in rule.nodes.iter().zip(&rule.weights) {
        let l0 = 1.0 - r[0] - r[1];
        let mut bary = [0.0; 3];
        for (k, b) in bary.iter_mut().enumerate() {
            *b = l0 * sub[0][k] + r[0] * sub[1][k] + r[1] * sub[2][k];
        }
        out.push(LayerNode {
            x: to_point(p, &bary),
            w: w * jac,
            bary,
        });
    }
}

fn midpoint(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])]
}

fn diameter(c: &[Point; 3]) -> f64 {
    (c[1] - c[0]).norm().max((c[2] - c[1]).norm()).max((c[0] - c[2]).norm())
}

fn subdivide(
    target: &Point,
    p: &[Point; 3],
    sub: &Bary,
    depth: usize,
    rules: &LayerRules,
    out: &mut Vec<LayerNode>,
) {
    let c: [Point; 3] = [to_point(p, &sub[0]), to_point(p, &sub[1]), to_point(p, &sub[2])];
    let d = point_triangle_distance(target, &c[0], &c[1], &c[2]);
    if d >= rules.far_ratio * diameter(&c) || depth >= rules.max_depth {
        apply_rule(&rules.near, p, sub, out);
        return;
    }
    let ab = midpoint(&sub[0], &sub[1]);
    let bc = midpoint(&sub[1], &sub[2]);
    let ca = midpoint(&sub[2], &sub[0]);
    for child in [[sub[0], ab, ca], [ab, sub[1], bc], [ca, bc, sub[2]], [ab, bc, ca]] {
        subdivide(target, p, &child, depth + 1, rules, out);
    }
}

/// Barycentric coordinates of the orthogonal projection of `y` onto the
/// plane of `p`.
fn projected_bary(y: &Point, p: &[Point; 3]) -> [f64; 3] {
    let e1 = p[1] - p[0];
    let e2 = p[2] - p[0];
    let r = y - p[0];
    let (a, b, c) = (e1.dot(&e1), e1.dot(&e2), e2.dot(&e2));
    let (d, e) = (r.dot(&e1), r.dot(&e2));
    let det = a * c - b * b;
    let l1 = (c * d - b * e) / det;
    let l2 = (a * e - b * d) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Appends the quadrature nodes that integrate a kernel singular at `target`
/// over the triangle `p`. Far panels get the far rule, near panels an
/// adaptive subdivision towards the target, and panels containing the target
/// a Duffy rule (at the vertex, or on the sub-triangles around the target).
pub fn panel_nodes(target: &Point, p: &[Point; 3], rules: &LayerRules, out: &mut Vec<LayerNode>) -> PanelPlan {
    let h = diameter(p);
    let d = point_triangle_distance(target, &p[0], &p[1], &p[2]);
    let id: Bary = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    if d >= rules.far_ratio * h {
        apply_rule(&rules.far, p, &id, out);
        return PanelPlan {
            scheme: LayerScheme::Far,
            on_panel: false,
        };
    }
    let tol = 1e-10 * h;
    if d > tol {
        subdivide(target, p, &id, 0, rules, out);
        return PanelPlan {
            scheme: LayerScheme::Subdivided,
            on_panel: false,
        };
    }
    if let Some(v) = (0..3).find(|&i| (target - p[i]).norm() <= tol) {
        let sub: Bary = [id[v], id[(v + 1) % 3], id[(v + 2) % 3]];
        apply_rule(&rules.duffy, p, &sub, out);
        return PanelPlan {
            scheme: LayerScheme::VertexDuffy,
            on_panel: true,
        };
    }
    let mut y = projected_bary(target, p);
    for l in &mut y {
        *l = l.max(0.0);
    }
    let s: f64 = y.iter().sum();
    for l in &mut y {
        *l /= s;
    }
    let area = (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
    let yp = to_point(p, &y);
    for k in 0..3 {
        let (a, b) = (id[k], id[(k + 1) % 3]);
        let (pa, pb) = (p[k], p[(k + 1) % 3]);
        if (pa - yp).cross(&(pb - yp)).norm() <= 1e-12 * area {
            continue;
        }
        // splitting at the foot of the perpendicular keeps the angular
        // integrand of the Duffy rule far from its complex poles
        let tau = (yp - pa).dot(&(pb - pa)) / (pb - pa).norm_squared();
        if tau > 0.05 && tau < 0.95 {
            let f = [
                a[0] + tau * (b[0] - a[0]),
                a[1] + tau * (b[1] - a[1]),
                a[2] + tau * (b[2] - a[2]),
            ];
            apply_rule(&rules.duffy, p, &[y, a, f], out);
            apply_rule(&rules.duffy, p, &[y, f, b], out);
        } else {
            apply_rule(&rules.duffy, p, &[y, a, b], out);
        }
    }
    PanelPlan {
        scheme: LayerScheme::SplitDuffy,
        on_panel: true,
    }
}

/// `∫_T k(x) dS(x)` for a kernel that may be singular at `target`.
pub fn integrate_layer(target: &Point, p: &[Point; 3], kernel: impl Fn(&Point) -> f64, rules: &LayerRules) -> f64 {
    let mut nodes = Vec::new();
    panel_nodes(target, p, rules, &mut nodes);
    nodes.iter().map(|n| n.w * kernel(&n.x)).sum()
}
