use serde::{Deserialize, Serialize};

use crate::{BdieError, Result};

/// Nodes and weights on the reference triangle `(0,0), (1,0), (0,1)`.
/// Weights sum to the reference area 1/2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p[0], p[1]))
            .sum()
    }
}

fn push_s3(nodes: &mut Vec<[f64; 3]>, w: &mut Vec<f64>, weight: f64) {
    nodes.push([1.0 / 3.0; 3]);
    w.push(weight);
}

fn push_s21(nodes: &mut Vec<[f64; 3]>, w: &mut Vec<f64>, a: f64, weight: f64) {
    let b = 1.0 - 2.0 * a;
    for l in [[a, a, b], [a, b, a], [b, a, a]] {
        nodes.push(l);
        w.push(weight);
    }
}

fn push_s111(nodes: &mut Vec<[f64; 3]>, w: &mut Vec<f64>, a: f64, b: f64, weight: f64) {
    let c = 1.0 - a - b;
    for l in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
        nodes.push(l);
        w.push(weight);
    }
}

/// Symmetric Gauss rule on the reference triangle exact for total degree
/// `order`. Orders 1, 2, 3, 4 and 6 are available; order 3 is served by the
/// degree-4 rule, which keeps all weights positive.
pub fn gauss_triangle(order: usize) -> Result<QuadratureRule> {
    let mut l = Vec::new();
    let mut w = Vec::new();
    match order {
        1 => push_s3(&mut l, &mut w, 1.0),
        2 => push_s21(&mut l, &mut w, 1.0 / 6.0, 1.0 / 3.0),
        3 | 4 => {
            push_s21(&mut l, &mut w, 0.445948490915964886, 0.223381589678011466);
            push_s21(&mut l, &mut w, 0.091576213509770743, 0.109951743655321867);
        }
        6 => {
            push_s21(&mut l, &mut w, 0.249286745170910421, 0.116786275726379366);
            push_s21(&mut l, &mut w, 0.063089014491502228, 0.050844906370206817);
            push_s111(
                &mut l,
                &mut w,
                0.053145049844816947,
                0.310352451033784405,
                0.082851075618373575,
            );
        }
        _ => {
            return Err(BdieError::Quadrature(format!(
                "triangle rule of order {order} (supported: 1, 2, 3, 4, 6)"
            )))
        }
    }
    let total: f64 = w.iter().sum();
    Ok(QuadratureRule {
        nodes: l.iter().map(|b| [b[1], b[2]]).collect(),
        weights: w.iter().map(|x| 0.5 * x / total).collect(),
    })
}

/// Gauss-Legendre nodes and weights on `[0, 1]` (weights sum to 1).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

/// Duffy rule on the reference triangle clustering nodes at the vertex
/// `singular_vertex` (0 → (0,0), 1 → (1,0), 2 → (0,1)), built from an
/// `order × order` Gauss-Legendre product on the unit square.
pub fn duffy_triangle(singular_vertex: usize, order: usize) -> Result<QuadratureRule> {
    if singular_vertex > 2 {
        return Err(BdieError::Quadrature(format!("vertex index {singular_vertex}")));
    }
    if order == 0 {
        return Err(BdieError::Quadrature("Duffy rule of order 0".into()));
    }
    let v = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let s = v[singular_vertex];
    let a = v[(singular_vertex + 1) % 3];
    let b = v[(singular_vertex + 2) % 3];
    let (x, wx) = gauss_legendre(order);
    let mut nodes = Vec::with_capacity(order * order);
    let mut weights = Vec::with_capacity(order * order);
    for (u, wu) in x.iter().zip(&wx) {
        for (t, wt) in x.iter().zip(&wx) {
            let px = s[0] + u * ((1.0 - t) * (a[0] - s[0]) + t * (b[0] - s[0]));
            let py = s[1] + u * ((1.0 - t) * (a[1] - s[1]) + t * (b[1] - s[1]));
            nodes.push([px, py]);
            weights.push(wu * wt * u);
        }
    }
    Ok(QuadratureRule { nodes, weights })
}
