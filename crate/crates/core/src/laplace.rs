//! Constant-coefficient (Laplace) kernels and potentials.
//!
//! Sign table, with normals pointing into the bounded complement and
//! `P_Δ(x) = -1/(4π|x|)`:
//!
//! | operator | kernel against the density | unit sphere, `ρ ≡ 1` |
//! |---|---|---|
//! | `V_Δ ρ(y)` | `1/(4π|x-y|)` | `1/max(1, |y|)` |
//! | `W_Δ ρ(y)` | `-n(x)·(x-y)/(4π|x-y|³)` | `1` inside, `0` outside, direct value `1/2` |
//! | `𝒫_Δ f(y)` | `-1/(4π|x-y|)` | |
//!
//! The exterior trace of the double layer is `-ρ/2 + 𝒲_Δ ρ`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::operator::{
    apply_surface, apply_volume, assemble_surface, assemble_volume, BoundaryDensity, DensitySpace, Discretization,
    DomainDensity, OperatorBlock, SurfaceSample, Target,
};
use crate::{BdieError, Point, Result};

const FOUR_PI: f64 = 4.0 * PI;

fn coincident(x: &Point, y: &Point) -> BdieError {
    BdieError::SingularEvaluation(format!(
        "kernel evaluated at coincident points ({}, {}, {})",
        x[0], x[1], y[2]
    ))
}

/// `P_Δ(x - y) = -1/(4π|x - y|)`.
pub fn fund_solution(x: &Point, y: &Point) -> Result<f64> {
    let r = (x - y).norm();
    if r == 0.0 {
        return Err(coincident(x, y));
    }
    Ok(-1.0 / (FOUR_PI * r))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Wrt {
    X,
    Y,
}

/// Gradient of `P_Δ(x - y)` with respect to `x` or `y`.
pub fn grad_fund_solution(x: &Point, y: &Point, wrt: Wrt) -> Result<Point> {
    let d = x - y;
    let r = d.norm();
    if r == 0.0 {
        return Err(coincident(x, y));
    }
    let gx = d / (FOUR_PI * r * r * r);
    Ok(match wrt {
        Wrt::X => gx,
        Wrt::Y => -gx,
    })
}

/// Single-layer kernel `1/(4π|x - y|)`.
#[inline]
pub fn single_layer_kernel(x: &Point, y: &Point) -> f64 {
    1.0 / (FOUR_PI * (x - y).norm())
}

/// Double-layer kernel `-n(x)·(x - y)/(4π|x - y|³)`.
#[inline]
pub fn double_layer_kernel(x: &Point, y: &Point, n: &Point) -> f64 {
    let d = x - y;
    let r = d.norm();
    -n.dot(&d) / (FOUR_PI * r * r * r)
}

/// Double-layer kernel with the flat-panel principal value: the panel
/// carrying the target contributes nothing.
#[inline]
pub fn double_layer_sample(s: &SurfaceSample) -> f64 {
    if s.on_panel {
        0.0
    } else {
        double_layer_kernel(&s.x, s.y, s.normal)
    }
}

pub fn single_layer_V_delta(disc: &Discretization, density: &BoundaryDensity, targets: &[Point]) -> Vec<f64> {
    apply_surface(disc, targets, density, |s| single_layer_kernel(&s.x, s.y))
}

/// Off-boundary values of the double layer. At boundary collocation points
/// the same quadrature yields the direct value.
pub fn double_layer_W_delta(disc: &Discretization, density: &BoundaryDensity, targets: &[Point]) -> Vec<f64> {
    apply_surface(disc, targets, density, double_layer_sample)
}

/// Direct value of the double layer at boundary collocation points
/// (vertices or centroids).
pub fn direct_value_W_delta(disc: &Discretization, density: &BoundaryDensity, collocation: &[Point]) -> Vec<f64> {
    double_layer_W_delta(disc, density, collocation)
}

/// Direct value of the single layer (continuous across `S`).
pub fn direct_value_V_delta(disc: &Discretization, density: &BoundaryDensity, collocation: &[Point]) -> Vec<f64> {
    single_layer_V_delta(disc, density, collocation)
}

/// `𝒫_Δ f(y) = ∫_Ω P_Δ(x - y) f(x) dx` for a cell-wise constant `f`.
pub fn newton_potential_delta(disc: &Discretization, f: &DomainDensity, targets: &[Point]) -> Vec<f64> {
    apply_volume(disc, targets, |y, x| -single_layer_kernel(x, y), f)
}

pub fn block_V_delta(disc: &Discretization, targets: &[Target], space: DensitySpace) -> OperatorBlock {
    assemble_surface(disc, targets, space, |s| single_layer_kernel(&s.x, s.y))
}

pub fn block_W_delta(disc: &Discretization, targets: &[Target], space: DensitySpace) -> OperatorBlock {
    assemble_surface(disc, targets, space, double_layer_sample)
}

pub fn block_P_delta(disc: &Discretization, targets: &[Target]) -> OperatorBlock {
    assemble_volume(disc, targets, |y, x| -single_layer_kernel(x, y))
}

/// `∂_n` of `potential` on the exterior side of the boundary point `target`:
/// the second-order one-sided stencil along `-normal` at
/// `p = target - offset·normal`, using `p`, `p - offset·normal` and
/// `p - 2·offset·normal`.
pub fn normal_derivative_delta(
    potential: impl Fn(&Point) -> f64,
    target: &Point,
    normal: &Point,
    offset: f64,
) -> Result<f64> {
    if !(offset >= 10.0 * f64::EPSILON) {
        return Err(BdieError::SingularEvaluation(format!("finite-difference offset {offset} is too small")));
    }
    let nu = -normal;
    let p = target + nu * offset;
    let f0 = potential(&p);
    let f1 = potential(&(p + nu * offset));
    let f2 = potential(&(p + nu * (2.0 * offset)));
    let d_nu = (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * offset);
    Ok(-d_nu)
}

/// Like [`normal_derivative_delta`] for a batch of potentials evaluated at
/// once: returns the stencil points for each target.
pub fn stencil_points(targets: &[Point], normals: &[Point], offset: f64) -> Vec<Point> {
    let mut out = Vec::with_capacity(3 * targets.len());
    for (y, n) in targets.iter().zip(normals) {
        for k in 1..=3 {
            out.push(y - n * (k as f64 * offset));
        }
    }
    out
}

/// Combines stencil values produced at [`stencil_points`] into `∂_n` values.
pub fn stencil_derivatives(values: &[f64], offset: f64) -> Vec<f64> {
    values
        .chunks(3)
        .map(|f| -(-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * offset))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_icosphere, build_shell_mesh};
    use crate::operator::Support;
    use crate::quadrature::QuadratureSettings;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn disc(level: usize) -> Discretization {
        Discretization::new(
            build_icosphere(level).unwrap(),
            build_shell_mesh(1.0, 2.0, 8, 2, 1.0).unwrap(),
            QuadratureSettings::default(),
        )
        .unwrap()
    }

    #[test]
    fn fundamental_solution_values() {
        let o = Point::zeros();
        assert_abs_diff_eq!(fund_solution(&Point::new(1.0, 0.0, 0.0), &o).unwrap(), -0.0795775, epsilon = 1e-7);
        assert_abs_diff_eq!(fund_solution(&Point::new(0.0, 2.0, 0.0), &o).unwrap(), -0.0397887, epsilon = 1e-7);
        assert!(matches!(fund_solution(&o, &o), Err(BdieError::SingularEvaluation(_))));
        let g = grad_fund_solution(&Point::new(0.0, 0.0, 1.0), &o, Wrt::X).unwrap();
        assert_abs_diff_eq!(g.norm(), 0.0795775, epsilon = 1e-7);
        assert!(grad_fund_solution(&o, &o, Wrt::Y).is_err());
    }

    proptest! {
        #[test]
        fn symmetry_and_gradients(a in prop::array::uniform3(-3.0..3.0f64), b in prop::array::uniform3(-3.0..3.0f64)) {
            let x = Point::from(a);
            let y = Point::from(b);
            prop_assume!((x - y).norm() > 0.1);
            prop_assert_eq!(fund_solution(&x, &y).unwrap(), fund_solution(&y, &x).unwrap());
            let gx = grad_fund_solution(&x, &y, Wrt::X).unwrap();
            let gy = grad_fund_solution(&x, &y, Wrt::Y).unwrap();
            prop_assert_eq!(gx, -gy);
            let h = 1e-5;
            for i in 0..3 {
                let mut e = Point::zeros();
                e[i] = h;
                let fd = (fund_solution(&(x + e), &y).unwrap() - fund_solution(&(x - e), &y).unwrap()) / (2.0 * h);
                prop_assert!((fd - gx[i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn sphere_single_layer() {
        let d = disc(3);
        let one = BoundaryDensity::constant(&d.surface, DensitySpace::TriangleConstant, 1.0);
        let v = single_layer_V_delta(&d, &one, &[Point::new(2.0, 0.0, 0.0)]);
        assert!((v[0] - 0.5).abs() < 0.005, "{v:?}");
        let v = direct_value_V_delta(&d, &one, &[d.surface.centroids[17], d.surface.vertices[5]]);
        for x in v {
            assert!((x - 1.0).abs() < 0.02, "{x}");
        }
        let zero = BoundaryDensity::zeros(&d.surface, DensitySpace::VertexLinear, Support::All);
        assert_eq!(single_layer_V_delta(&d, &zero, &[Point::new(2.0, 0.0, 0.0)])[0], 0.0);
    }

    /// Interior solid angle of the closed polyhedron seen from its vertex `v`,
    /// divided by 4π: the sum of the solid angles of all faces not touching `v`.
    fn vertex_angle_fraction(mesh: &crate::geometry::SurfaceMesh, v: usize) -> f64 {
        let y = mesh.vertices[v];
        let mut s = 0.0;
        for t in &mesh.triangles {
            if t.contains(&v) {
                continue;
            }
            let p = [mesh.vertices[t[0]] - y, mesh.vertices[t[1]] - y, mesh.vertices[t[2]] - y];
            s += crate::geometry::solid_angle(&p);
        }
        s / (4.0 * PI)
    }

    #[test]
    fn sphere_double_layer() {
        let d = disc(3);
        let one = BoundaryDensity::constant(&d.surface, DensitySpace::VertexLinear, 1.0);
        let w = double_layer_W_delta(&d, &one, &[Point::new(3.0, 0.0, 0.0), Point::zeros()]);
        assert!(w[0].abs() < 1e-8);
        assert!((w[1] - 1.0).abs() < 1e-8);
        let zero = BoundaryDensity::zeros(&d.surface, DensitySpace::VertexLinear, Support::All);
        assert_eq!(double_layer_W_delta(&d, &zero, &[Point::zeros()])[0], 0.0);
    }

    #[test]
    fn direct_value_is_the_interior_angle_fraction() {
        for l in 1..=3 {
            let d = disc(l);
            let one = BoundaryDensity::constant(&d.surface, DensitySpace::VertexLinear, 1.0);
            // a flat face sees the closed polyhedron under exactly half the sphere
            let dv = direct_value_W_delta(&d, &one, &d.surface.centroids);
            assert!(dv.iter().all(|x| (x - 0.5).abs() < 1e-6), "level {l}");
            let vs: Vec<usize> = (0..d.surface.n_vertices()).step_by(7).collect();
            let pts: Vec<Point> = vs.iter().map(|&v| d.surface.vertices[v]).collect();
            let dv = direct_value_W_delta(&d, &one, &pts);
            for (x, &v) in dv.iter().zip(&vs) {
                let oracle = vertex_angle_fraction(&d.surface, v);
                assert!((x - oracle).abs() < 1e-6, "level {l} vertex {v}: {x} vs {oracle}");
            }
        }
    }

    #[test]
    fn shell_newton_potential() {
        let d = disc(1);
        let one = DomainDensity::from_fn(&d.volume, |_| 1.0);
        let v = newton_potential_delta(&d, &one, &[Point::zeros()])[0];
        assert!((v + 1.5).abs() < 0.015, "{v}");
        let two = DomainDensity::from_fn(&d.volume, |_| 2.0);
        assert_eq!(newton_potential_delta(&d, &two, &[Point::zeros()])[0], 2.0 * v);
        let zero = DomainDensity::zeros(&d.volume);
        assert_eq!(newton_potential_delta(&d, &zero, &[Point::zeros()])[0], 0.0);
    }

    #[test]
    fn normal_derivative_oracles() {
        let n = Point::new(0.0, 0.0, -1.0);
        let y = Point::new(0.0, 0.0, 1.0);
        let lin = normal_derivative_delta(|x| x[2], &y, &n, 0.01).unwrap();
        assert!((lin + 1.0).abs() < 1e-6);
        assert_eq!(normal_derivative_delta(|_| 3.0, &y, &n, 0.01).unwrap(), 0.0);
        assert!(normal_derivative_delta(|x| x[2], &y, &n, 1e-17).is_err());
        let d = disc(3);
        let one = BoundaryDensity::constant(&d.surface, DensitySpace::TriangleConstant, 1.0);
        let t = 11;
        let c = d.surface.centroids[t];
        let nt = d.surface.normals[t];
        let h = d.surface.h();
        let t = 0.5 * h;
        let dn = normal_derivative_delta(|p| single_layer_V_delta(&d, &one, &[*p])[0], &c, &nt, t).unwrap();
        // the stencil differentiates at the offset point p = c - t·n, where
        // ∂_n(1/|x|) = -n·p/|p|³
        let p = c - nt * t;
        let exact = -nt.dot(&p) / p.norm().powi(3);
        let of_exact = normal_derivative_delta(|x| 1.0 / x.norm(), &c, &nt, t).unwrap();
        assert!((of_exact - exact).abs() < 0.01, "{of_exact} {exact}");
        assert!((dn - exact).abs() < 0.02, "{dn} {exact}");
    }

    #[test]
    fn linearity_in_the_density() {
        let d = disc(2);
        let r1 = BoundaryDensity::from_fn(&d.surface, DensitySpace::VertexLinear, Support::All, |x| x[0]);
        let r2 = BoundaryDensity::from_fn(&d.surface, DensitySpace::VertexLinear, Support::All, |x| x[1] * x[2]);
        let combo = r1.scaled(2.0).plus(&r2.scaled(-3.0));
        let ys = [Point::new(1.3, 0.4, 0.2), d.surface.vertices[9]];
        for op in [single_layer_V_delta, double_layer_W_delta] {
            let a = op(&d, &r1, &ys);
            let b = op(&d, &r2, &ys);
            let c = op(&d, &combo, &ys);
            for i in 0..ys.len() {
                assert!((c[i] - (2.0 * a[i] - 3.0 * b[i])).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn exterior_limit_matches_jump_relation() {
        // exterior limit of W_Δρ for a smooth ρ equals -ρ/2 + 𝒲_Δρ
        let d = disc(3);
        let rho = BoundaryDensity::from_fn(&d.surface, DensitySpace::VertexLinear, Support::All, |x| 1.0 + x[2]);
        let t = 200;
        let c = d.surface.centroids[t];
        let n = d.surface.normals[t];
        let h = d.surface.h();
        let dv = direct_value_W_delta(&d, &rho, &[c])[0];
        let rho_c = 1.0 + c[2];
        let offs = [0.1 * h, 0.05 * h, 0.025 * h];
        let vals: Vec<f64> = offs.iter().map(|o| double_layer_W_delta(&d, &rho, &[c - n * *o])[0]).collect();
        // linear extrapolation of the last two offsets to zero
        let lim = 2.0 * vals[2] - vals[1];
        assert!((lim - (-0.5 * rho_c + dv)).abs() < 0.02 * rho_c.abs().max(0.5), "{lim} {}", -0.5 * rho_c + dv);
    }

    #[test]
    fn single_layer_is_continuous_across_s() {
        let d = disc(3);
        let one = BoundaryDensity::constant(&d.surface, DensitySpace::TriangleConstant, 1.0);
        let t = 300;
        let c = d.surface.centroids[t];
        let n = d.surface.normals[t];
        let h = d.surface.h();
        let dv = direct_value_V_delta(&d, &one, &[c])[0];
        let vals: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|o| single_layer_V_delta(&d, &one, &[c - n * (o * h)])[0]).collect();
        let lim = 2.0 * vals[2] - vals[1];
        assert!((lim - dv).abs() < 0.02 * dv, "{lim} {dv}");
    }
}
