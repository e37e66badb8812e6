//! Parametrix `P(x, y) = P_Δ(x - y)/a(x)`, its remainder `R`, and the
//! parametrix-based potentials expressed through the Laplace operators.
//!
//! The coefficient enters only as a pointwise multiplier at quadrature nodes,
//! so with `a ≡ 1` every operator here reproduces its Laplace counterpart
//! bit for bit.

use std::f64::consts::PI;

use crate::coefficient::CoefficientField;
use crate::geometry::SurfaceMesh;
use crate::laplace::{double_layer_sample, fund_solution, grad_fund_solution, single_layer_kernel, stencil_derivatives, stencil_points, Wrt};
use crate::operator::{
    apply_surface, apply_volume, apply_volume_fn, assemble_surface, assemble_volume, BoundaryDensity, DensitySpace,
    Discretization, DomainDensity, OperatorBlock, SurfaceSample, Target,
};
use crate::{BdieError, Point, Result};

const FOUR_PI: f64 = 4.0 * PI;

/// `P(x, y) = P_Δ(x - y)/a(x)`.
pub fn kernel_P(field: &CoefficientField, x: &Point, y: &Point) -> Result<f64> {
    let p = fund_solution(x, y)?;
    let a = field.a(x);
    if !(a > 0.0) {
        return Err(BdieError::Coefficient(format!("a = {a} at ({}, {}, {})", x[0], x[1], x[2])));
    }
    Ok(p / a)
}

/// Remainder `R(x, y) = -[Δln a(x) P_Δ(x - y) + ∇ln a(x)·∇_x P_Δ(x - y)]`.
pub fn kernel_R(field: &CoefficientField, x: &Point, y: &Point) -> Result<f64> {
    let p = fund_solution(x, y)?;
    let g = grad_fund_solution(x, y, Wrt::X)?;
    let (_, grad, lap) = field.log_derivatives(x);
    Ok(-(lap * p + grad.dot(&g)))
}

/// Unchecked remainder kernel for quadrature nodes, argument order `(y, x)`.
#[inline]
fn remainder(field: &CoefficientField, y: &Point, x: &Point) -> f64 {
    let d = x - y;
    let r = d.norm();
    let (_, grad, lap) = field.log_derivatives(x);
    lap / (FOUR_PI * r) - grad.dot(&d) / (FOUR_PI * r * r * r)
}

/// Boundary values of `a` and `∂_n ln a` at vertices (vertex normals) and
/// centroids (panel normals).
#[derive(Clone, Debug)]
pub struct ParametrixKernelSet<'a> {
    pub field: &'a CoefficientField,
    pub vertex_a: Vec<f64>,
    pub vertex_dn_ln_a: Vec<f64>,
    pub centroid_a: Vec<f64>,
    pub centroid_dn_ln_a: Vec<f64>,
}

impl<'a> ParametrixKernelSet<'a> {
    pub fn new(field: &'a CoefficientField, mesh: &SurfaceMesh) -> Self {
        let vn = mesh.vertex_normals();
        Self {
            field,
            vertex_a: mesh.vertices.iter().map(|v| field.a(v)).collect(),
            vertex_dn_ln_a: mesh
                .vertices
                .iter()
                .zip(&vn)
                .map(|(v, n)| field.normal_log_derivative(v, n))
                .collect(),
            centroid_a: mesh.centroids.iter().map(|c| field.a(c)).collect(),
            centroid_dn_ln_a: mesh
                .centroids
                .iter()
                .zip(&mesh.normals)
                .map(|(c, n)| field.normal_log_derivative(c, n))
                .collect(),
        }
    }

    pub fn kernel_P(&self, x: &Point, y: &Point) -> Result<f64> {
        kernel_P(self.field, x, y)
    }

    pub fn kernel_R(&self, x: &Point, y: &Point) -> Result<f64> {
        kernel_R(self.field, x, y)
    }

    /// `a` at a boundary target, from the cache when the target is a mesh
    /// vertex or centroid.
    pub fn a_at(&self, t: &Target) -> f64 {
        use crate::operator::TargetKind;
        match t.kind {
            TargetKind::Vertex(i) => self.vertex_a[i],
            TargetKind::Centroid(i) => self.centroid_a[i],
            _ => self.field.a(&t.x),
        }
    }

    /// Largest deviation of the cached values from fresh evaluations.
    pub fn max_cache_deviation(&self, mesh: &SurfaceMesh) -> f64 {
        let fresh = Self::new(self.field, mesh);
        let pairs = [
            (&self.vertex_a, &fresh.vertex_a),
            (&self.vertex_dn_ln_a, &fresh.vertex_dn_ln_a),
            (&self.centroid_a, &fresh.centroid_a),
            (&self.centroid_dn_ln_a, &fresh.centroid_dn_ln_a),
        ];
        pairs
            .iter()
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

#[inline]
fn v_sample(field: &CoefficientField, s: &SurfaceSample) -> f64 {
    single_layer_kernel(&s.x, s.y) / field.a(&s.x)
}

#[inline]
fn w_sample(field: &CoefficientField, s: &SurfaceSample) -> f64 {
    double_layer_sample(s) - single_layer_kernel(&s.x, s.y) * field.normal_log_derivative(&s.x, s.normal)
}

/// `Vρ = V_Δ(ρ/a)`, with `ρ/a` formed at quadrature nodes.
pub fn op_V(disc: &Discretization, field: &CoefficientField, density: &BoundaryDensity, targets: &[Point]) -> Vec<f64> {
    apply_surface(disc, targets, density, |s| v_sample(field, s))
}

/// `Vρ = -∫_S P(x, y) ρ(x) dS(x)` by direct quadrature of the parametrix.
pub fn op_V_direct(
    disc: &Discretization,
    field: &CoefficientField,
    density: &BoundaryDensity,
    targets: &[Point],
) -> Vec<f64> {
    apply_surface(disc, targets, density, |s| -(-1.0 / (FOUR_PI * (s.x - s.y).norm())) / field.a(&s.x))
}

/// `Wρ = W_Δρ - V_Δ(ρ ∂_n ln a)`.
pub fn op_W(disc: &Discretization, field: &CoefficientField, density: &BoundaryDensity, targets: &[Point]) -> Vec<f64> {
    apply_surface(disc, targets, density, |s| w_sample(field, s))
}

/// Direct value `𝒱ρ` at boundary collocation points.
pub fn dv_V(disc: &Discretization, field: &CoefficientField, density: &BoundaryDensity, collocation: &[Point]) -> Vec<f64> {
    op_V(disc, field, density, collocation)
}

/// Direct value `𝒲ρ = 𝒲_Δρ - 𝒱_Δ(ρ ∂_n ln a)` at boundary collocation points.
pub fn dv_W(disc: &Discretization, field: &CoefficientField, density: &BoundaryDensity, collocation: &[Point]) -> Vec<f64> {
    op_W(disc, field, density, collocation)
}

/// `𝒫f = 𝒫_Δ(f/a)` for a cell-wise constant `f`.
pub fn op_P(disc: &Discretization, field: &CoefficientField, f: &DomainDensity, targets: &[Point]) -> Vec<f64> {
    apply_volume(disc, targets, |y, x| -single_layer_kernel(x, y) / field.a(x), f)
}

/// `𝒫f` for a pointwise `f`.
pub fn op_P_fn(
    disc: &Discretization,
    field: &CoefficientField,
    f: impl Fn(&Point) -> f64 + Sync,
    targets: &[Point],
) -> Vec<f64> {
    apply_volume_fn(disc, targets, |y, x| -single_layer_kernel(x, y) / field.a(x), f)
}

/// `𝒫f = ∫_Ω P(x, y) f(x) dx` by direct quadrature of the parametrix.
pub fn op_P_direct(disc: &Discretization, field: &CoefficientField, f: &DomainDensity, targets: &[Point]) -> Vec<f64> {
    apply_volume(disc, targets, |y, x| (-1.0 / (FOUR_PI * (x - y).norm())) / field.a(x), f)
}

/// `ℛu = ∫_Ω R(x, y) u(x) dx` for a cell-wise constant `u`.
pub fn op_R(disc: &Discretization, field: &CoefficientField, u: &DomainDensity, targets: &[Point]) -> Vec<f64> {
    if field.is_constant() {
        return vec![0.0; targets.len()];
    }
    apply_volume(disc, targets, |y, x| remainder(field, y, x), u)
}

/// `ℛu` for a pointwise `u`.
pub fn op_R_fn(
    disc: &Discretization,
    field: &CoefficientField,
    u: impl Fn(&Point) -> f64 + Sync,
    targets: &[Point],
) -> Vec<f64> {
    if field.is_constant() {
        return vec![0.0; targets.len()];
    }
    apply_volume_fn(disc, targets, |y, x| remainder(field, y, x), u)
}

/// `ℛu` in divergence form, `∇·𝒫_Δ(u∇ln a) - 𝒫_Δ(uΔln a)`, the divergence
/// taken by central differences of step `h` in the target.
pub fn op_R_dual_fn(
    disc: &Discretization,
    field: &CoefficientField,
    u: impl Fn(&Point) -> f64 + Sync,
    targets: &[Point],
    h: f64,
) -> Vec<f64> {
    let newton = |pts: &[Point], f: &(dyn Fn(&Point) -> f64 + Sync)| {
        apply_volume_fn(disc, pts, |y, x| -single_layer_kernel(x, y), f)
    };
    let lap = newton(targets, &|x: &Point| u(x) * field.log_derivatives(x).2);
    let mut out: Vec<f64> = lap.iter().map(|v| -v).collect();
    for i in 0..3 {
        let gi = |x: &Point| u(x) * field.log_derivatives(x).1[i];
        let shift = |s: f64| -> Vec<Point> {
            targets
                .iter()
                .map(|y| {
                    let mut p = *y;
                    p[i] += s;
                    p
                })
                .collect()
        };
        let plus = newton(&shift(h), &gi);
        let minus = newton(&shift(-h), &gi);
        for k in 0..targets.len() {
            out[k] += (plus[k] - minus[k]) / (2.0 * h);
        }
    }
    out
}

/// `a(y)·𝒲′_Δ(ρ/a)` at the exterior offset points `y - offset·n`: the
/// derivative along `n(y)` of the single layer of `ρ/a`, taken analytically
/// under the integral.
pub fn op_Wprime_offset(
    disc: &Discretization,
    field: &CoefficientField,
    density: &BoundaryDensity,
    boundary_targets: &[Target],
    offset: f64,
) -> Result<Vec<f64>> {
    check_offset(offset)?;
    boundary_targets
        .iter()
        .map(|t| {
            let n = boundary_normal(t)?;
            let p = t.x - n * offset;
            let v = apply_surface(disc, &[p], density, |s| {
                let d = s.x - s.y;
                let r = d.norm();
                n.dot(&d) / (FOUR_PI * r * r * r) / field.a(&s.x)
            });
            Ok(field.a(&t.x) * v[0])
        })
        .collect()
}

/// `a(y)·∂_n W_Δρ - a(y)·∂_n V_Δ(ρ ∂_n ln a)` on the exterior side of each
/// boundary target, by the one-sided offset stencil.
pub fn op_Lhat_offset(
    disc: &Discretization,
    field: &CoefficientField,
    density: &BoundaryDensity,
    boundary_targets: &[Target],
    offset: f64,
) -> Result<Vec<f64>> {
    check_offset(offset)?;
    let normals = boundary_targets.iter().map(boundary_normal).collect::<Result<Vec<_>>>()?;
    let ys: Vec<Point> = boundary_targets.iter().map(|t| t.x).collect();
    let pts = stencil_points(&ys, &normals, offset);
    let vals = apply_surface(disc, &pts, density, |s| w_sample(field, s));
    Ok(stencil_derivatives(&vals, offset)
        .iter()
        .zip(&ys)
        .map(|(d, y)| field.a(y) * d)
        .collect())
}

fn check_offset(offset: f64) -> Result<()> {
    if !(offset >= 10.0 * f64::EPSILON) {
        return Err(BdieError::SingularEvaluation(format!("offset {offset} is too small")));
    }
    Ok(())
}

fn boundary_normal(t: &Target) -> Result<Point> {
    t.normal
        .ok_or_else(|| BdieError::Geometry("offset evaluation needs a boundary target with a normal".into()))
}

pub fn block_V(disc: &Discretization, field: &CoefficientField, targets: &[Target], space: DensitySpace) -> OperatorBlock {
    assemble_surface(disc, targets, space, |s| v_sample(field, s))
}

pub fn block_W(disc: &Discretization, field: &CoefficientField, targets: &[Target], space: DensitySpace) -> OperatorBlock {
    assemble_surface(disc, targets, space, |s| w_sample(field, s))
}

pub fn block_P(disc: &Discretization, field: &CoefficientField, targets: &[Target]) -> OperatorBlock {
    assemble_volume(disc, targets, |y, x| -single_layer_kernel(x, y) / field.a(x))
}

pub fn block_R(disc: &Discretization, field: &CoefficientField, targets: &[Target]) -> OperatorBlock {
    if field.is_constant() {
        let nc = disc.volume.n_cells();
        return OperatorBlock::new(
            vec![0.0; targets.len() * nc],
            targets.to_vec(),
            (0..nc).map(crate::operator::ColMeta::Cell).collect(),
        );
    }
    assemble_volume(disc, targets, |y, x| remainder(field, y, x))
}
