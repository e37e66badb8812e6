//! Residual verifiers for the Green identities, the single-layer injectivity
//! probe and the representation operator `𝒞`.
//!
//! Exact fields are sampled analytically: `γ⁺u` as the vertex-linear
//! interpolant, `T⁺u` as panel means, and `𝒜u = ∇a·∇u + aΔu` pointwise under
//! the volume integrals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cases::{source_term, AnalyticField, ManufacturedCase};
use crate::coefficient::{sphere_directions, AuditSettings, CoefficientField};
use crate::geometry::point_triangle_distance;
use crate::laplace::{single_layer_kernel, stencil_derivatives, stencil_points};
use crate::linalg::{smallest_singular_value, DenseLu};
use crate::operator::{
    apply_volume_fn, points, BoundaryDensity, DensitySpace, Discretization, DomainDensity, Support, Target,
};
use crate::parametrix::{block_V, op_Lhat_offset, op_P, op_P_fn, op_R_fn, op_V, op_W};
use crate::quadrature::gauss_triangle;
use crate::{BdieError, Point, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub identity: String,
    pub case: String,
    pub level: Option<usize>,
    pub points: Vec<[f64; 3]>,
    pub residuals: Vec<f64>,
    pub max_abs: f64,
    pub scale: f64,
    pub rel_to_scale: f64,
    /// Test points dropped for lying within `h` of the boundary.
    pub excluded: Vec<[f64; 3]>,
    /// Named auxiliary quantities (both sides of an integral identity, ...).
    pub extra: BTreeMap<String, f64>,
}

impl ResidualReport {
    pub fn new(
        identity: &str,
        case: &str,
        level: Option<usize>,
        pts: &[Point],
        residuals: Vec<f64>,
        scale: f64,
    ) -> Self {
        let max_abs = residuals.iter().map(|r| r.abs()).fold(0.0, f64::max);
        Self {
            identity: identity.into(),
            case: case.into(),
            level,
            points: pts.iter().map(|p| [p[0], p[1], p[2]]).collect(),
            residuals,
            max_abs,
            scale,
            rel_to_scale: if scale > 0.0 { max_abs / scale } else { max_abs },
            excluded: Vec::new(),
            extra: BTreeMap::new(),
        }
    }
}

/// `T⁺u = a ∂_n u` at the given boundary points.
pub fn conormal_trace(field: &CoefficientField, u: &dyn AnalyticField, pts: &[Point], normals: &[Point]) -> Vec<f64> {
    pts.iter()
        .zip(normals)
        .map(|(x, n)| field.a(x) * u.gradient(x).dot(n))
        .collect()
}

/// `γ⁺u` as a vertex-linear density on all of `S`.
pub fn trace_density(disc: &Discretization, u: &dyn AnalyticField) -> BoundaryDensity {
    BoundaryDensity::from_fn(&disc.surface, DensitySpace::VertexLinear, Support::All, |x| u.value(x))
}

/// `T⁺u` as panel means, a triangle-constant density on all of `S`.
pub fn conormal_density(disc: &Discretization, field: &CoefficientField, u: &dyn AnalyticField) -> BoundaryDensity {
    let rule = gauss_triangle(4).expect("degree-4 triangle rule");
    let m = &disc.surface;
    let coefficients = (0..m.n_triangles())
        .map(|t| {
            let [a, b, c] = m.corners(t);
            let n = m.normals[t];
            2.0 * rule.integrate(|s, r| {
                let x = a + (b - a) * s + (c - a) * r;
                field.a(&x) * u.gradient(&x).dot(&n)
            })
        })
        .collect();
    BoundaryDensity {
        space: DensitySpace::TriangleConstant,
        support: Support::All,
        coefficients,
    }
}

pub fn distance_to_surface(disc: &Discretization, p: &Point) -> f64 {
    let m = &disc.surface;
    (0..m.n_triangles())
        .map(|t| {
            let [a, b, c] = m.corners(t);
            point_triangle_distance(p, &a, &b, &c)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Fixed interior test points: four radii between the body and the
/// truncation radius, six directions each.
pub fn interior_probes(outer_radius: f64) -> Vec<Point> {
    let dirs = sphere_directions(6);
    let mut out = Vec::new();
    for f in [0.15, 0.3, 0.5, 0.75] {
        let r = 1.0 + f * (outer_radius - 1.0);
        out.extend(dirs.iter().map(|d| d * r));
    }
    out
}

/// `u + ℛu - VT⁺u + Wγ⁺u - 𝒫𝒜u` at interior test points; points within `h`
/// of the boundary are excluded and listed in the report.
pub fn third_green_residual(disc: &Discretization, case: &ManufacturedCase, test_points: &[Point]) -> Result<ResidualReport> {
    let h = disc.surface.h();
    let (pts, excluded): (Vec<Point>, Vec<Point>) =
        test_points.iter().partition(|p| distance_to_surface(disc, p) >= h);
    if pts.is_empty() {
        return Err(BdieError::Geometry("every test point lies within h of the boundary".into()));
    }
    let field = &case.coefficient;
    let u = case.u.as_ref();
    let phi = trace_density(disc, u);
    let psi = conormal_density(disc, field, u);
    let ru = op_R_fn(disc, field, |x| u.value(x), &pts);
    let vpsi = op_V(disc, field, &psi, &pts);
    let wphi = op_W(disc, field, &phi, &pts);
    let pf = op_P_fn(disc, field, |x| source_term(field, u, x), &pts);
    let residuals: Vec<f64> = (0..pts.len())
        .map(|i| u.value(&pts[i]) + ru[i] - vpsi[i] + wphi[i] - pf[i])
        .collect();
    let scale = pts.iter().map(|p| u.value(p).abs()).fold(0.0, f64::max);
    let mut report = ResidualReport::new("third-green", &case.name, disc.level(), &pts, residuals, scale);
    report.excluded = excluded.iter().map(|p| [p[0], p[1], p[2]]).collect();
    Ok(report)
}

/// `½γ⁺u + γ⁺ℛu - 𝒱T⁺u + 𝒲γ⁺u - γ⁺𝒫𝒜u` at panel centroids, where the flat
/// panel sees the closed surface under exactly half the full solid angle.
pub fn trace_identity_residual(disc: &Discretization, case: &ManufacturedCase) -> Result<ResidualReport> {
    let field = &case.coefficient;
    let u = case.u.as_ref();
    let phi = trace_density(disc, u);
    let psi = conormal_density(disc, field, u);
    let m = &disc.surface;
    let pts = m.centroids.clone();
    let third = [1.0 / 3.0; 3];
    let ru = op_R_fn(disc, field, |x| u.value(x), &pts);
    let vpsi = op_V(disc, field, &psi, &pts);
    let wphi = op_W(disc, field, &phi, &pts);
    let pf = op_P_fn(disc, field, |x| source_term(field, u, x), &pts);
    let residuals: Vec<f64> = (0..pts.len())
        .map(|t| 0.5 * phi.eval(m, t, &third) + ru[t] - vpsi[t] + wphi[t] - pf[t])
        .collect();
    let scale = pts.iter().map(|p| u.value(p).abs()).fold(0.0, f64::max);
    Ok(ResidualReport::new("trace", &case.name, disc.level(), &pts, residuals, scale))
}

/// Conormal form of the identity on the exterior side of `S`, every conormal
/// action realized by the one-sided offset stencil (diagnostic only).
pub fn conormal_identity_residual_offset(
    disc: &Discretization,
    case: &ManufacturedCase,
    offset: f64,
    stride: usize,
) -> Result<ResidualReport> {
    if !(offset >= 10.0 * f64::EPSILON) {
        return Err(BdieError::SingularEvaluation(format!("offset {offset} is too small")));
    }
    let field = &case.coefficient;
    let u = case.u.as_ref();
    let m = &disc.surface;
    let which: Vec<usize> = (0..m.n_triangles()).step_by(stride.max(1)).collect();
    let targets = Target::centroids(m, &which);
    let ys = points(&targets);
    let normals: Vec<Point> = which.iter().map(|&t| m.normals[t]).collect();
    let phi = trace_density(disc, u);
    let psi = conormal_density(disc, field, u);
    let sp = stencil_points(&ys, &normals, offset);
    let d = |vals: Vec<f64>| stencil_derivatives(&vals, offset);
    let du = d(sp.iter().map(|p| u.value(p)).collect());
    let dr = d(op_R_fn(disc, field, |x| u.value(x), &sp));
    let dv = d(op_V(disc, field, &psi, &sp));
    let dp = d(op_P_fn(disc, field, |x| source_term(field, u, x), &sp));
    let lw = op_Lhat_offset(disc, field, &phi, &targets, offset)?;
    let mut residuals = Vec::with_capacity(ys.len());
    let mut scale: f64 = 0.0;
    for i in 0..ys.len() {
        let a = field.a(&ys[i]);
        residuals.push(a * (du[i] + dr[i] - dv[i] - dp[i]) + lw[i]);
        scale = scale.max((a * u.gradient(&ys[i]).dot(&normals[i])).abs());
    }
    let mut report = ResidualReport::new("conormal-offset", &case.name, disc.level(), &ys, residuals, scale);
    report.extra.insert("offset".into(), offset);
    Ok(report)
}

/// `∫_Ω (v𝒜u - u𝒜v) dx` against `∫_S (v T⁺u - u T⁺v) dS`. The scale is
/// `∫_S |v T⁺u| + |u T⁺v| dS`. The volume integrand is sampled on the
/// truncation sphere first; a tail above `decay_tolerance` times the
/// largest interior value makes the truncated identity unsound.
pub fn second_green_residual(
    disc: &Discretization,
    field: &CoefficientField,
    u: &dyn AnalyticField,
    v: &dyn AnalyticField,
    audit: &AuditSettings,
) -> Result<ResidualReport> {
    let integrand = |x: &Point| v.value(x) * source_term(field, u, x) - u.value(x) * source_term(field, v, x);
    let vol = &disc.volume;
    let interior = vol.cells.iter().map(|c| integrand(&c.center).abs()).fold(0.0, f64::max);
    let r = vol.outer_radius;
    let tail = sphere_directions(audit.angular_samples)
        .iter()
        .map(|d| integrand(&(d * r)).abs())
        .fold(0.0, f64::max);
    if tail > audit.decay_tolerance * interior {
        return Err(BdieError::TruncationUnsound(format!(
            "volume integrand {tail:.3e} at radius {r} against interior maximum {interior:.3e}"
        )));
    }
    let volume_side: f64 = vol
        .cells
        .iter()
        .map(|c| c.nodes.iter().zip(&c.weights).map(|(x, w)| w * integrand(x)).sum::<f64>())
        .sum();
    let rule = gauss_triangle(6)?;
    let m = &disc.surface;
    let mut boundary_side = 0.0;
    let mut scale = 0.0;
    for t in 0..m.n_triangles() {
        let [a, b, c] = m.corners(t);
        let n = m.normals[t];
        let area2 = 2.0 * m.areas[t];
        for (p, w) in rule.nodes.iter().zip(&rule.weights) {
            let x = a + (b - a) * p[0] + (c - a) * p[1];
            let ax = field.a(&x);
            let vtu = v.value(&x) * ax * u.gradient(&x).dot(&n);
            let utv = u.value(&x) * ax * v.gradient(&x).dot(&n);
            boundary_side += area2 * w * (vtu - utv);
            scale += area2 * w * (vtu.abs() + utv.abs());
        }
    }
    let mut report = ResidualReport::new("second-green", "", disc.level(), &[], vec![volume_side - boundary_side], scale);
    report.extra.insert("volume_side".into(), volume_side);
    report.extra.insert("boundary_side".into(), boundary_side);
    report.extra.insert("tail".into(), tail);
    Ok(report)
}

/// Smallest singular value of the direct-value `𝒱` block on triangle-constant
/// densities collocated at centroids.
pub fn single_layer_injectivity(disc: &Discretization, field: &CoefficientField) -> Result<f64> {
    disc.check_caps()?;
    let t = Target::all_centroids(&disc.surface);
    let b = block_V(disc, field, &t, DensitySpace::TriangleConstant);
    smallest_singular_value(b.nrows, b.ncols, &b.matrix)
}

/// `𝒞F = (aΔF, a𝒱_Δ⁻¹γ⁺[F - 𝒫_Δ ΔF])`: `f_*` as cell means and the
/// triangle-constant `Ψ_*` with `F = 𝒫f_* + VΨ_*` in `Ω`.
pub fn representation_C(
    disc: &Discretization,
    field: &CoefficientField,
    f_star: &dyn AnalyticField,
) -> Result<(DomainDensity, BoundaryDensity)> {
    disc.check_caps()?;
    let f = DomainDensity::cell_average(&disc.volume, |x| field.a(x) * f_star.laplacian(x));
    let targets = Target::all_centroids(&disc.surface);
    let pts = points(&targets);
    let newton = apply_volume_fn(disc, &pts, |y, x| -single_layer_kernel(x, y), |x| f_star.laplacian(x));
    let rhs: Vec<f64> = pts.iter().zip(&newton).map(|(p, n)| f_star.value(p) - n).collect();
    let one = CoefficientField::constant(1.0);
    let vb = block_V(disc, &one, &targets, DensitySpace::TriangleConstant);
    let lu = DenseLu::new(vb.nrows, &vb.matrix)?;
    let psi_tilde = lu.solve(&rhs);
    let coefficients = psi_tilde.iter().zip(&pts).map(|(p, x)| field.a(x) * p).collect();
    Ok((
        f,
        BoundaryDensity {
            space: DensitySpace::TriangleConstant,
            support: Support::All,
            coefficients,
        },
    ))
}

/// `𝒫f + VΨ` at `targets`, the representation formula inverted by
/// [`representation_C`].
pub fn represent(
    disc: &Discretization,
    field: &CoefficientField,
    f: &DomainDensity,
    psi: &BoundaryDensity,
    targets: &[Point],
) -> Vec<f64> {
    let p = op_P(disc, field, f, targets);
    let v = op_V(disc, field, psi, targets);
    p.iter().zip(&v).map(|(a, b)| a + b).collect()
}
