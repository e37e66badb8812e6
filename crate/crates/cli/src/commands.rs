use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use bdie_core::cases::{ManufacturedCase, PointSource};
use bdie_core::coefficient::{sphere_directions, validate_conditions, CoefficientField};
use bdie_core::geometry::{orientation_check, write_off, PartLabel, VertexClass};
use bdie_core::green::{
    conormal_identity_residual_offset, interior_probes, second_green_residual, third_green_residual,
    trace_identity_residual, ResidualReport,
};
use bdie_core::laplace::{
    block_P_delta, block_V_delta, block_W_delta, direct_value_W_delta, double_layer_W_delta, single_layer_V_delta,
};
use bdie_core::m12::{assemble_M12, case_data, equivalence_residuals, M12Options, M12Solver};
use bdie_core::operator::{BoundaryDensity, DensitySpace, Discretization, DomainDensity, MeshSettings, Support, Target};
use bdie_core::parametrix::{
    block_P, block_R, block_V, block_W, kernel_R, op_P, op_P_direct, op_R_dual_fn, op_R_fn, op_V, op_V_direct,
};
use bdie_core::Point;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{ensure_dir, write_csv, write_report};
use crate::table::{ConvergenceRow, ConvergenceTable};
use crate::{CliError, Outcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Mesh,
    CheckCoeff,
    Operators,
    GreenCheck,
    Solve,
    Converge,
}

pub fn dispatch(command: Command, config: &RunConfig) -> Result<Outcome, CliError> {
    let dir = config.resolved_output_dir();
    ensure_dir(&dir)?;
    match command {
        Command::Mesh => cmd_mesh(config, &dir),
        Command::CheckCoeff => cmd_check_coeff(config, &dir),
        Command::Operators => cmd_operators(config, &dir),
        Command::GreenCheck => cmd_green_check(config, &dir),
        Command::Solve => cmd_solve(config, &dir),
        Command::Converge => cmd_converge(config, &dir),
    }
}

fn build(config: &RunConfig, mesh: &MeshSettings) -> Result<Discretization, CliError> {
    Ok(mesh.build(&config.quadrature)?)
}

fn rel_err(a: f64, b: f64) -> f64 {
    if b != 0.0 {
        (a - b).abs() / b.abs()
    } else {
        a.abs()
    }
}

#[derive(Serialize)]
struct SurfaceSummary {
    level: Option<usize>,
    n_vertices: usize,
    n_triangles: usize,
    n_dirichlet_triangles: usize,
    n_neumann_triangles: usize,
    n_interface_vertices: usize,
    n_interior_neumann_vertices: usize,
    partition: String,
    h: f64,
    max_edge: f64,
    area: f64,
    area_rel_error_vs_4pi: f64,
    orientation: f64,
}

#[derive(Serialize)]
struct VolumeSummary {
    n_cells: usize,
    n_radial: usize,
    n_angular: usize,
    inner_radius: f64,
    outer_radius: f64,
    radii: Vec<f64>,
    h: f64,
    volume: f64,
    volume_rel_error_vs_shell: f64,
}

#[derive(Serialize)]
struct MeshReport {
    surface: SurfaceSummary,
    volume: VolumeSummary,
}

fn cmd_mesh(config: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let s = config.mesh.surface()?;
    let v = config.mesh.volume()?;
    let area = s.total_area();
    let shell = 4.0 * PI / 3.0 * (v.outer_radius.powi(3) - v.inner_radius.powi(3));
    let count = |c: VertexClass| s.vertex_class.iter().filter(|&&k| k == c).count();
    let report = MeshReport {
        surface: SurfaceSummary {
            level: s.level,
            n_vertices: s.n_vertices(),
            n_triangles: s.n_triangles(),
            n_dirichlet_triangles: s.triangles_with(PartLabel::Dirichlet).len(),
            n_neumann_triangles: s.triangles_with(PartLabel::Neumann).len(),
            n_interface_vertices: count(VertexClass::Interface),
            n_interior_neumann_vertices: count(VertexClass::InteriorNeumann),
            partition: config.mesh.partition.to_string(),
            h: s.h(),
            max_edge: s.max_edge(),
            area,
            area_rel_error_vs_4pi: rel_err(area, 4.0 * PI),
            orientation: orientation_check(&s, &Point::zeros())?,
        },
        volume: VolumeSummary {
            n_cells: v.n_cells(),
            n_radial: v.n_radial(),
            n_angular: v.n_angular(),
            inner_radius: v.inner_radius,
            outer_radius: v.outer_radius,
            radii: v.radii.clone(),
            h: v.h(),
            volume: v.total_volume(),
            volume_rel_error_vs_shell: rel_err(v.total_volume(), shell),
        },
    };
    let off = dir.join("surface.off");
    write_off(&s, BufWriter::new(File::create(&off)?))?;
    let summary = vec![
        format!(
            "surface: {} triangles, {} vertices, area {:.6} (4π relative error {:.3e})",
            report.surface.n_triangles, report.surface.n_vertices, area, report.surface.area_rel_error_vs_4pi
        ),
        format!(
            "volume: {} cells, volume {:.6} (shell relative error {:.3e})",
            report.volume.n_cells, report.volume.volume, report.volume.volume_rel_error_vs_shell
        ),
    ];
    let json = write_report(dir, "mesh.json", "mesh", config, &report)?;
    Ok(Outcome {
        passed: true,
        files: vec![off, json],
        summary,
    })
}

fn cmd_check_coeff(config: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let field = config.coefficient.build()?;
    let r = validate_conditions(&field, &config.audit);
    let summary = vec![format!(
        "{}: cond0 {} cond1 {} cond3 {} decay {} (sup ω|∇a| {:.3e}, sup ω²|Δa| {:.3e})",
        r.coefficient,
        pass(r.passes_cond0),
        pass(r.passes_cond1),
        pass(r.passes_cond3),
        pass(r.passes_decay),
        r.sup_omega_grad_a,
        r.sup_omega2_lap_a
    )];
    #[derive(Serialize)]
    struct Body<'a> {
        report: &'a bdie_core::coefficient::CoefficientReport,
    }
    let json = write_report(dir, "coefficient.json", "check-coeff", config, Body { report: &r })?;
    Ok(Outcome {
        passed: true,
        files: vec![json],
        summary,
    })
}

fn pass(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "fail"
    }
}

/// One gated quantity of a report.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

fn max_rel(values: &[f64], exact: &[f64]) -> f64 {
    values.iter().zip(exact).map(|(a, b)| rel_err(*a, *b)).fold(0.0, f64::max)
}

/// Operator cross-validation on the configured meshes and coefficient.
pub fn cross_validation(disc: &Discretization, field: &CoefficientField) -> Result<Vec<Check>, CliError> {
    let m = &disc.surface;
    let dirs = sphere_directions(6);
    let at = |radii: &[f64]| -> Vec<Point> { radii.iter().flat_map(|r| dirs.iter().map(move |d| d * *r)).collect() };
    let mut checks = Vec::new();

    let one_t = BoundaryDensity::constant(m, DensitySpace::TriangleConstant, 1.0);
    let probes = at(&[1.0, 1.5, 2.0, 3.0]);
    let v = single_layer_V_delta(disc, &one_t, &probes);
    let exact: Vec<f64> = probes.iter().map(|p| 1.0 / p.norm().max(1.0)).collect();
    checks.push(Check::new("sphere_single_layer_rel", max_rel(&v, &exact), 0.02));

    checks.push(Check::new("orientation_deviation", (orientation_check(m, &Point::zeros())? - 1.0).abs(), 0.01));
    let ext = double_layer_W_delta(disc, &one_t, &at(&[1.5, 2.0, 3.0]));
    checks.push(Check::new("double_layer_exterior_abs", ext.iter().fold(0.0, |a, b| a.max(b.abs())), 0.01));
    let mut inner = at(&[0.3, 0.5]);
    inner.push(Point::zeros());
    let int = double_layer_W_delta(disc, &one_t, &inner);
    checks.push(Check::new("double_layer_interior_rel", max_rel(&int, &vec![1.0; int.len()]), 0.01));
    let dv = direct_value_W_delta(disc, &one_t, &m.centroids);
    checks.push(Check::new("direct_value_rel", max_rel(&dv, &vec![0.5; dv.len()]), 0.02));

    let rho = BoundaryDensity::from_fn(m, DensitySpace::VertexLinear, Support::All, |x| 2.0 + x[0] - 0.5 * x[2]);
    let pts = at(&[1.3, 2.2]);
    let a = op_V(disc, field, &rho, &pts);
    let b = op_V_direct(disc, field, &rho, &pts);
    checks.push(Check::new("v_relation_vs_direct_rel", max_rel(&a, &b), 1e-10));
    let f = DomainDensity::from_fn(&disc.volume, |x| (-x.norm_squared()).exp() * (1.0 + x[1]));
    let a = op_P(disc, field, &f, &pts);
    let b = op_P_direct(disc, field, &f, &pts);
    checks.push(Check::new("p_relation_vs_direct_rel", max_rel(&a, &b), 1e-10));
    if !field.is_constant() {
        let ys = [Point::new(0.0, 0.0, 2.6), Point::new(1.9, 1.9, 0.0), Point::new(1.4, -1.1, 0.9)];
        let dual = op_R_dual_fn(disc, field, |_| 1.0, &ys, 1e-3);
        let kern = op_R_fn(disc, field, |_| 1.0, &ys);
        checks.push(Check::new("r_dual_vs_kernel_rel", max_rel(&dual, &kern), 1e-3));
    }

    let one = CoefficientField::constant(1.0);
    let cells: Vec<Target> = Target::cells(&disc.volume).into_iter().step_by(17).collect();
    let mut targets = cells;
    let tri: Vec<usize> = (0..m.n_triangles()).step_by(7).collect();
    let ver: Vec<usize> = (0..m.n_vertices()).step_by(7).collect();
    targets.extend(Target::centroids(m, &tri));
    targets.extend(Target::vertices(m, &ver));
    let mut diff = 0.0f64;
    for space in [DensitySpace::TriangleConstant, DensitySpace::VertexLinear] {
        diff = diff.max(block_V(disc, &one, &targets, space).max_abs_diff(&block_V_delta(disc, &targets, space)));
        diff = diff.max(block_W(disc, &one, &targets, space).max_abs_diff(&block_W_delta(disc, &targets, space)));
    }
    diff = diff.max(block_P(disc, &one, &targets).max_abs_diff(&block_P_delta(disc, &targets)));
    diff = diff.max(block_R(disc, &one, &targets).max_abs());
    for (x, y) in pts.iter().zip(pts.iter().rev()) {
        if x != y {
            diff = diff.max(kernel_R(&one, x, y)?.abs());
        }
    }
    checks.push(Check::new("unit_coefficient_reduction_abs", diff, 1e-12));
    Ok(checks)
}

fn cmd_operators(config: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let disc = build(config, &config.mesh)?;
    let field = config.coefficient.build()?;
    let checks = cross_validation(&disc, &field)?;
    let passed = checks.iter().all(|c| c.passed);
    let summary = checks
        .iter()
        .map(|c| format!("{} {:.3e} (tolerance {:.1e}) {}", c.name, c.value, c.tolerance, pass(c.passed)))
        .collect();
    #[derive(Serialize)]
    struct Body<'a> {
        level: Option<usize>,
        passed: bool,
        checks: &'a [Check],
    }
    let json = write_report(
        dir,
        "operators.json",
        "operators",
        config,
        Body {
            level: disc.level(),
            passed,
            checks: &checks,
        },
    )?;
    let csv = write_csv(dir, "operators.csv", &checks)?;
    Ok(Outcome {
        passed,
        files: vec![json, csv],
        summary,
    })
}

#[derive(Clone, Debug, Serialize)]
struct GreenRow {
    identity: String,
    case: String,
    level: Option<usize>,
    n_points: usize,
    max_abs: f64,
    scale: f64,
    rel_to_scale: f64,
    gate: Option<f64>,
    passed: Option<bool>,
}

fn green_row(r: &ResidualReport, gate: Option<f64>) -> GreenRow {
    GreenRow {
        identity: r.identity.clone(),
        case: r.case.clone(),
        level: r.level,
        n_points: r.residuals.len(),
        max_abs: r.max_abs,
        scale: r.scale,
        rel_to_scale: r.rel_to_scale,
        gate,
        passed: gate.map(|g| r.rel_to_scale < g),
    }
}

/// Thresholds on `residual / scale`: third identity 3% with a constant
/// coefficient and 5% otherwise, trace identity 5%.
pub fn green_gates(field: &CoefficientField) -> (f64, f64) {
    (if field.is_constant() { 0.03 } else { 0.05 }, 0.05)
}

fn cmd_green_check(config: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let disc = build(config, &config.mesh)?;
    disc.check_caps()?;
    let field = config.coefficient.build()?;
    let case = ManufacturedCase::from_spec(&config.case, field.clone());
    let (third_gate, trace_gate) = green_gates(&field);
    let third = third_green_residual(&disc, &case, &interior_probes(disc.volume.outer_radius))?;
    let trace = trace_identity_residual(&disc, &case)?;
    let partner = PointSource {
        center: Point::new(0.0, 0.0, 0.5),
        strength: 1.0,
    };
    let mut reports = vec![third, trace];
    let mut rows = vec![green_row(&reports[0], Some(third_gate)), green_row(&reports[1], Some(trace_gate))];
    let mut notes = BTreeMap::new();
    match second_green_residual(&disc, &field, case.u.as_ref(), &partner, &config.audit) {
        Ok(mut r) => {
            r.case = case.name.clone();
            rows.push(green_row(&r, None));
            reports.push(r);
        }
        Err(e) => {
            notes.insert("second-green".to_string(), e.to_string());
        }
    }
    let conormal = conormal_identity_residual_offset(&disc, &case, 0.1, 8)?;
    rows.push(green_row(&conormal, None));
    reports.push(conormal);
    let passed = rows.iter().all(|r| r.passed != Some(false));
    let summary = rows
        .iter()
        .map(|r| {
            format!(
                "{} {}: rel {:.3e}{}",
                r.identity,
                r.case,
                r.rel_to_scale,
                match (r.gate, r.passed) {
                    (Some(g), Some(p)) => format!(" (gate {g}) {}", pass(p)),
                    _ => " (diagnostic)".into(),
                }
            )
        })
        .chain(notes.iter().map(|(k, v)| format!("{k}: {v}")))
        .collect();
    #[derive(Serialize)]
    struct Body<'a> {
        passed: bool,
        reports: &'a [ResidualReport],
        gates: &'a [GreenRow],
        notes: &'a BTreeMap<String, String>,
    }
    let json = write_report(
        dir,
        "green.json",
        "green-check",
        config,
        Body {
            passed,
            reports: &reports,
            gates: &rows,
            notes: &notes,
        },
    )?;
    let csv = write_csv(dir, "green.csv", &rows)?;
    Ok(Outcome {
        passed,
        files: vec![json, csv],
        summary,
    })
}

#[derive(Clone, Debug, Serialize)]
struct ProbeRow {
    x: f64,
    y: f64,
    z: f64,
    u_h: f64,
    u_exact: f64,
    abs_error: f64,
}

fn m12_options(config: &RunConfig) -> M12Options {
    M12Options {
        jump: config.solver.jump,
        laplace_reference: false,
    }
}

fn cmd_solve(config: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let disc = build(config, &config.mesh)?;
    let field = config.coefficient.build()?;
    let case = ManufacturedCase::from_spec(&config.case, field.clone());
    let system = assemble_M12(&disc, &field, &m12_options(config))?;
    let data = case_data(&disc, &system, &case)?;
    let solver = M12Solver::new(&system)?;
    let solution = solver.solve(&disc, &system, &data, config.solver.iterative.as_ref())?;
    let probes = config.probe_points();
    let eq = equivalence_residuals(&disc, &case, &solution, &probes);
    let mut passed = solution.residual_norm <= 1e-10;
    if let Some(it) = &solution.iterative {
        passed &= it.converged && it.difference_to_dense <= 1e-6;
    }
    let rows: Vec<ProbeRow> = probes
        .iter()
        .zip(eq.probe_values.iter().zip(&eq.probe_exact))
        .map(|(p, (h, e))| ProbeRow {
            x: p[0],
            y: p[1],
            z: p[2],
            u_h: *h,
            u_exact: *e,
            abs_error: (h - e).abs(),
        })
        .collect();
    let summary = vec![
        format!(
            "{} unknowns, residual {:.2e}, condition estimate {:.3e}",
            system.dim(),
            solution.residual_norm,
            solution.condition_estimate
        ),
        format!(
            "probe rel {:.3e}, trace recovery {:.3e}, conormal recovery {:.3e}, interior norm rel {:.3e}",
            eq.probe_rel, eq.trace_rel, eq.conormal_rel, eq.interior_norm_rel
        ),
    ];
    #[derive(Serialize)]
    struct Body<'a> {
        level: Option<usize>,
        passed: bool,
        layout: &'a bdie_core::m12::M12Layout,
        solution: &'a bdie_core::m12::M12Solution,
        equivalence: &'a bdie_core::m12::EquivalenceReport,
    }
    let json = write_report(
        dir,
        "solution.json",
        "solve",
        config,
        Body {
            level: disc.level(),
            passed,
            layout: &system.layout,
            solution: &solution,
            equivalence: &eq,
        },
    )?;
    let csv = write_csv(dir, "probes.csv", &rows)?;
    Ok(Outcome {
        passed,
        files: vec![json, csv],
        summary,
    })
}

/// One row of the sweep: identity residuals and an M12 solve at `level`.
pub fn convergence_row(config: &RunConfig, level: usize) -> Result<ConvergenceRow, CliError> {
    let start = Instant::now();
    let disc = build(config, &config.mesh_at(level))?;
    disc.check_caps()?;
    let field = config.coefficient.build()?;
    let case = ManufacturedCase::from_spec(&config.case, field.clone());
    let third = third_green_residual(&disc, &case, &interior_probes(disc.volume.outer_radius))?;
    let trace = trace_identity_residual(&disc, &case)?;
    let system = assemble_M12(&disc, &field, &m12_options(config))?;
    let data = case_data(&disc, &system, &case)?;
    let solution = M12Solver::new(&system)?.solve(&disc, &system, &data, None)?;
    let eq = equivalence_residuals(&disc, &case, &solution, &config.probe_points());
    Ok(ConvergenceRow {
        level,
        h_surface: disc.surface.h(),
        n_triangles: disc.surface.n_triangles(),
        n_cells: disc.volume.n_cells(),
        n_unknowns: system.dim(),
        third_green_rel: third.rel_to_scale,
        trace_identity_rel: trace.rel_to_scale,
        probe_rel: eq.probe_rel,
        interior_norm_rel: eq.interior_norm_rel,
        trace_recovery_rel: eq.trace_rel,
        conormal_recovery_rel: eq.conormal_rel,
        condition_estimate: solution.condition_estimate,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

fn cmd_converge(config: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let mut table = ConvergenceTable::default();
    for &level in &config.levels {
        table.rows.push(convergence_row(config, level)?);
    }
    table.validate()?;
    let passed = table.interior_error_decreases();
    let path = dir.join("convergence.csv");
    table.write_csv(BufWriter::new(File::create(&path)?))?;
    let summary = table
        .rows
        .iter()
        .map(|r| {
            format!(
                "level {}: interior {:.3e} probe {:.3e} third {:.3e} trace {:.3e} ({:.1} s)",
                r.level, r.interior_norm_rel, r.probe_rel, r.third_green_rel, r.trace_identity_rel, r.runtime_s
            )
        })
        .collect();
    #[derive(Serialize)]
    struct Body<'a> {
        passed: bool,
        table: &'a ConvergenceTable,
    }
    let json = write_report(dir, "convergence.json", "converge", config, Body { passed, table: &table })?;
    Ok(Outcome {
        passed,
        files: vec![path, json],
        summary,
    })
}
