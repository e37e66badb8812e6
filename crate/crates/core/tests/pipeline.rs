use bdie_core::cases::{CaseSpec, ManufacturedCase};
use bdie_core::coefficient::CoefficientField;
use bdie_core::geometry::PartitionRule;
use bdie_core::green::interior_probes;
use bdie_core::m12::{assemble_M12, case_data, equivalence_residuals, M12Options, M12Solver};
use bdie_core::operator::{BoundaryDensity, DensitySpace, Discretization, MeshSettings, Support};
use bdie_core::parametrix::op_V;
use bdie_core::quadrature::QuadratureSettings;
use bdie_core::Point;
use proptest::prelude::*;

fn disc(level: usize, partition: &str) -> Discretization {
    let mut s = MeshSettings::for_level(level);
    s.partition = partition.parse::<PartitionRule>().unwrap();
    s.build(&QuadratureSettings::default()).unwrap()
}

fn solve_point_source(d: &Discretization, field: CoefficientField) -> f64 {
    let system = assemble_M12(d, &field, &M12Options::default()).unwrap();
    let solver = M12Solver::new(&system).unwrap();
    let case = ManufacturedCase::from_spec(&CaseSpec::point_source(), field);
    let data = case_data(d, &system, &case).unwrap();
    let sol = solver.solve(d, &system, &data, None).unwrap();
    assert!(sol.residual_norm < 1e-10);
    equivalence_residuals(d, &case, &sol, &interior_probes(4.0)).probe_rel
}

#[test]
fn laplace_mixed_problem_recovers_point_source() {
    let d = disc(2, "z<0");
    let e = solve_point_source(&d, CoefficientField::constant(1.0));
    assert!(e < 0.05, "{e}");
}

#[test]
fn either_partition_orientation_solves() {
    for rule in ["z<0", "x>0.3"] {
        let d = disc(1, rule);
        let e = solve_point_source(&d, CoefficientField::gaussian(1.0));
        assert!(e < 0.15, "{rule}: {e}");
    }
}

#[test]
fn constant_coefficient_scales_single_layer() {
    let d = disc(1, "z<0");
    let rho = BoundaryDensity::from_fn(&d.surface, DensitySpace::TriangleConstant, Support::All, |x| 1.0 + x[2]);
    let pts = [Point::new(0.0, 1.5, 0.5), Point::new(2.5, 0.0, 0.0)];
    let v1 = op_V(&d, &CoefficientField::constant(1.0), &rho, &pts);
    let v3 = op_V(&d, &CoefficientField::constant(3.0), &rho, &pts);
    for (a, b) in v1.iter().zip(&v3) {
        assert!((a - 3.0 * b).abs() <= 1e-14 * a.abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn single_layer_is_linear(alpha in -5.0f64..5.0, shift in -2.0f64..2.0) {
        let d = disc(0, "z<0");
        let g = CoefficientField::gaussian(1.0);
        let pts = [Point::new(1.2, 0.4, -0.7), Point::new(0.0, -2.0, 1.0)];
        let make = |s: f64| BoundaryDensity::from_fn(&d.surface, DensitySpace::VertexLinear, Support::All, move |x| s + x[0] * x[1]);
        let base = op_V(&d, &g, &make(0.0), &pts);
        let one = op_V(&d, &g, &BoundaryDensity::constant(&d.surface, DensitySpace::VertexLinear, 1.0), &pts);
        let mut scaled = make(shift);
        scaled.coefficients.iter_mut().for_each(|c| *c *= alpha);
        let lhs = op_V(&d, &g, &scaled, &pts);
        for i in 0..pts.len() {
            let rhs = alpha * (base[i] + shift * one[i]);
            prop_assert!((lhs[i] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }
    }
}
