//! The segregated boundary-domain system (M12) for the mixed problem:
//! assembly, dense and iterative solves, and the equivalence checks.
//!
//! Unknowns are `u` on the cells, `ψ = T⁺u - Ψ₀` on the Dirichlet triangles
//! and `φ = γ⁺u - Φ₀` at the interior Neumann vertices. Rows are the third
//! Green identity at cell centers and its trace at Dirichlet centroids and
//! interior Neumann vertices.

use serde::{Deserialize, Serialize};

use crate::cases::ManufacturedCase;
use crate::coefficient::{weight, CoefficientField};
use crate::geometry::{PartLabel, SurfaceMesh, VertexClass, VolumeMesh};
use crate::green::{conormal_density, trace_density};
use crate::laplace::{block_V_delta, block_W_delta, direct_value_W_delta};
use crate::linalg::{gmres, matvec, norm2, relative_residual, DenseLu};
use crate::operator::{
    points, BoundaryDensity, ColMeta, DensitySpace, Discretization, DomainDensity, OperatorBlock, Support, Target,
};
use crate::parametrix::{block_R, block_V, block_W, op_P_fn, op_R, op_V, op_W};
use crate::{BdieError, Point, Result};

/// Fixed extensions of the Dirichlet and Neumann data to all of `S`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionPair {
    /// Vertex-linear; the Dirichlet datum on `S_D` vertices, zero at interior
    /// Neumann vertices.
    pub Phi0: BoundaryDensity,
    /// Triangle-constant; the Neumann datum on `S_N`, zero on `S_D`.
    pub Psi0: BoundaryDensity,
}

/// Extends `dirichlet` (vertex-linear) and `neumann` (triangle-constant) by
/// zero off their parts of the boundary.
pub fn build_extensions(mesh: &SurfaceMesh, dirichlet: &BoundaryDensity, neumann: &BoundaryDensity) -> Result<ExtensionPair> {
    if dirichlet.space != DensitySpace::VertexLinear || neumann.space != DensitySpace::TriangleConstant {
        return Err(BdieError::Geometry(
            "Dirichlet data must be vertex-linear and Neumann data triangle-constant".into(),
        ));
    }
    if dirichlet.coefficients.len() != mesh.n_vertices() || neumann.coefficients.len() != mesh.n_triangles() {
        return Err(BdieError::Geometry("boundary data do not match the mesh".into()));
    }
    if dirichlet.coefficients.iter().chain(&neumann.coefficients).any(|v| !v.is_finite()) {
        return Err(BdieError::Geometry("boundary data are not finite".into()));
    }
    let phi = (0..mesh.n_vertices())
        .map(|v| {
            if mesh.vertex_class[v] == VertexClass::InteriorNeumann {
                0.0
            } else {
                dirichlet.coefficients[v]
            }
        })
        .collect();
    let psi = (0..mesh.n_triangles())
        .map(|t| {
            if mesh.part_label[t] == PartLabel::Neumann {
                neumann.coefficients[t]
            } else {
                0.0
            }
        })
        .collect();
    Ok(ExtensionPair {
        Phi0: BoundaryDensity::new(mesh, DensitySpace::VertexLinear, Support::DirichletOnly, phi)?,
        Psi0: BoundaryDensity::new(mesh, DensitySpace::TriangleConstant, Support::NeumannOnly, psi)?,
    })
}

/// Extensions of the exact Cauchy data of a manufactured case.
pub fn case_extensions(disc: &Discretization, case: &ManufacturedCase) -> Result<ExtensionPair> {
    let u = case.u.as_ref();
    build_extensions(
        &disc.surface,
        &trace_density(disc, u),
        &conormal_density(disc, &case.coefficient, u),
    )
}

/// `F₀ = 𝒫f + VΨ₀ - WΦ₀` at `targets`; boundary points get direct values.
pub fn assemble_F0(
    disc: &Discretization,
    field: &CoefficientField,
    f: &(dyn Fn(&Point) -> f64 + Sync),
    ext: &ExtensionPair,
    targets: &[Point],
) -> Vec<f64> {
    let pf = op_P_fn(disc, field, f, targets);
    let v = op_V(disc, field, &ext.Psi0, targets);
    let w = op_W(disc, field, &ext.Phi0, targets);
    (0..targets.len()).map(|i| pf[i] + v[i] - w[i]).collect()
}

/// Coefficient of the free term in the boundary rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpCoefficient {
    /// `1/2` at every collocation point.
    Half,
    /// `1 - 𝒲_Δ[1]`, the exterior solid-angle fraction of the polyhedral
    /// surface: `1/2` at centroids, different at vertices.
    #[default]
    Geometric,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct M12Options {
    pub jump: JumpCoefficient,
    /// Assemble with the Laplace blocks and without the remainder.
    pub laplace_reference: bool,
}

/// Unknown and row ordering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct M12Layout {
    pub n_cells: usize,
    pub dirichlet_triangles: Vec<usize>,
    pub neumann_vertices: Vec<usize>,
}

impl M12Layout {
    pub fn new(surface: &SurfaceMesh, volume: &VolumeMesh) -> Self {
        Self {
            n_cells: volume.n_cells(),
            dirichlet_triangles: surface.triangles_with(PartLabel::Dirichlet),
            neumann_vertices: surface.vertices_with(VertexClass::InteriorNeumann),
        }
    }

    pub fn n_boundary(&self) -> usize {
        self.dirichlet_triangles.len() + self.neumann_vertices.len()
    }

    pub fn dim(&self) -> usize {
        self.n_cells + self.n_boundary()
    }

    /// Start and end of block row or column `k` (0 cells, 1 `ψ`, 2 `φ`).
    pub fn range(&self, k: usize) -> std::ops::Range<usize> {
        let a = self.n_cells;
        let b = a + self.dirichlet_triangles.len();
        match k {
            0 => 0..a,
            1 => a..b,
            _ => b..self.dim(),
        }
    }

    pub fn rows(&self, surface: &SurfaceMesh, volume: &VolumeMesh) -> Vec<Target> {
        let mut t = Target::cells(volume);
        t.extend(Target::centroids(surface, &self.dirichlet_triangles));
        t.extend(Target::vertices(surface, &self.neumann_vertices));
        t
    }

    /// Splits an unknown vector into `(u, ψ, φ)` densities.
    pub fn split(&self, surface: &SurfaceMesh, x: &[f64]) -> (DomainDensity, BoundaryDensity, BoundaryDensity) {
        let u = DomainDensity {
            values: x[self.range(0)].to_vec(),
        };
        let mut psi = BoundaryDensity::zeros(surface, DensitySpace::TriangleConstant, Support::DirichletOnly);
        for (k, &t) in self.dirichlet_triangles.iter().enumerate() {
            psi.coefficients[t] = x[self.range(1).start + k];
        }
        let mut phi = BoundaryDensity::zeros(surface, DensitySpace::VertexLinear, Support::NeumannOnly);
        for (k, &v) in self.neumann_vertices.iter().enumerate() {
            phi.coefficients[v] = x[self.range(2).start + k];
        }
        (u, psi, phi)
    }

    pub fn join(&self, u: &DomainDensity, psi: &BoundaryDensity, phi: &BoundaryDensity) -> Vec<f64> {
        let mut x = u.values.clone();
        x.extend(self.dirichlet_triangles.iter().map(|&t| psi.coefficients[t]));
        x.extend(self.neumann_vertices.iter().map(|&v| phi.coefficients[v]));
        x
    }
}

/// The dense system matrix
/// `[I+ℛ, -V, W; γ⁺ℛ, -𝒱, cI+𝒲]` with its row targets.
#[derive(Clone, Debug)]
pub struct M12System {
    pub layout: M12Layout,
    pub rows: Vec<Target>,
    /// Free-term coefficient at each boundary row.
    pub jump: Vec<f64>,
    /// Row-major, `dim × dim`.
    pub matrix: Vec<f64>,
    pub options: M12Options,
}

impl M12System {
    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    /// Block `(i, j)` with `i` in `0..2` (domain, boundary rows) and `j` in
    /// `0..3` (`u`, `ψ`, `φ` columns).
    pub fn block(&self, i: usize, j: usize) -> OperatorBlock {
        let rows = if i == 0 { self.layout.range(0) } else { self.layout.n_cells..self.dim() };
        let cols = self.layout.range(j);
        let n = self.dim();
        let mut m = Vec::with_capacity(rows.len() * cols.len());
        for r in rows.clone() {
            m.extend_from_slice(&self.matrix[r * n + cols.start..r * n + cols.end]);
        }
        let col_meta = match j {
            0 => (0..self.layout.n_cells).map(ColMeta::Cell).collect(),
            1 => self.layout.dirichlet_triangles.iter().map(|&t| ColMeta::Triangle(t)).collect(),
            _ => self.layout.neumann_vertices.iter().map(|&v| ColMeta::Vertex(v)).collect(),
        };
        OperatorBlock::new(m, self.rows[rows].to_vec(), col_meta)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        matvec(self.dim(), self.dim(), &self.matrix, x)
    }
}

/// Free-term coefficients at the boundary rows of `layout`.
pub fn jump_coefficients(disc: &Discretization, layout: &M12Layout, jump: JumpCoefficient) -> Vec<f64> {
    let m = &disc.surface;
    match jump {
        JumpCoefficient::Half => vec![0.5; layout.n_boundary()],
        JumpCoefficient::Geometric => {
            let mut pts: Vec<Point> = layout.dirichlet_triangles.iter().map(|&t| m.centroids[t]).collect();
            pts.extend(layout.neumann_vertices.iter().map(|&v| m.vertices[v]));
            let one = BoundaryDensity::constant(m, DensitySpace::TriangleConstant, 1.0);
            direct_value_W_delta(disc, &one, &pts).iter().map(|w| 1.0 - w).collect()
        }
    }
}

/// Assembles the system matrix; errors above the dense-assembly caps.
pub fn assemble_M12(disc: &Discretization, field: &CoefficientField, options: &M12Options) -> Result<M12System> {
    disc.check_caps()?;
    let (s, vol) = (&disc.surface, &disc.volume);
    let layout = M12Layout::new(s, vol);
    let rows = layout.rows(s, vol);
    let n = layout.dim();
    let (v, w) = if options.laplace_reference {
        (
            block_V_delta(disc, &rows, DensitySpace::TriangleConstant),
            block_W_delta(disc, &rows, DensitySpace::VertexLinear),
        )
    } else {
        (
            block_V(disc, field, &rows, DensitySpace::TriangleConstant),
            block_W(disc, field, &rows, DensitySpace::VertexLinear),
        )
    };
    let r = if options.laplace_reference || field.is_constant() {
        None
    } else {
        Some(block_R(disc, field, &rows))
    };
    let jump = jump_coefficients(disc, &layout, options.jump);
    let (c1, c2) = (layout.range(1).start, layout.range(2).start);
    let mut matrix = vec![0.0; n * n];
    for (i, row) in matrix.chunks_mut(n).enumerate() {
        if let Some(r) = &r {
            row[..layout.n_cells].copy_from_slice(r.row(i));
        }
        for (k, &t) in layout.dirichlet_triangles.iter().enumerate() {
            row[c1 + k] = -v.get(i, t);
        }
        for (k, &vx) in layout.neumann_vertices.iter().enumerate() {
            row[c2 + k] = w.get(i, vx);
        }
        if i < layout.n_cells {
            row[i] += 1.0;
        } else if i >= c2 {
            row[i] += jump[i - layout.n_cells];
        }
    }
    Ok(M12System {
        layout,
        rows,
        jump,
        matrix,
        options: options.clone(),
    })
}

/// Right-hand side of one data set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct M12Data {
    pub extensions: ExtensionPair,
    /// `F₀` at the cell centers, then `γ⁺F₀ - Φ₀` at the boundary rows.
    pub rhs: Vec<f64>,
}

pub fn assemble_data(
    disc: &Discretization,
    field: &CoefficientField,
    system: &M12System,
    f: &(dyn Fn(&Point) -> f64 + Sync),
    extensions: ExtensionPair,
) -> M12Data {
    let mut rhs = assemble_F0(disc, field, f, &extensions, &points(&system.rows));
    let nc = system.layout.n_cells;
    for (k, &t) in system.layout.dirichlet_triangles.iter().enumerate() {
        let phi = extensions.Phi0.eval(&disc.surface, t, &[1.0 / 3.0; 3]);
        rhs[nc + k] -= system.jump[k] * phi;
    }
    let nd = system.layout.dirichlet_triangles.len();
    for (k, &v) in system.layout.neumann_vertices.iter().enumerate() {
        rhs[nc + nd + k] -= system.jump[nd + k] * extensions.Phi0.coefficients[v];
    }
    M12Data { extensions, rhs }
}

/// Data of a manufactured case: `f = 𝒜u` and its exact Cauchy data.
pub fn case_data(disc: &Discretization, system: &M12System, case: &ManufacturedCase) -> Result<M12Data> {
    let ext = case_extensions(disc, case)?;
    Ok(assemble_data(disc, &case.coefficient, system, &|x: &Point| case.source(x), ext))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmresSettings {
    pub restart: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for GmresSettings {
    fn default() -> Self {
        Self {
            restart: 200,
            tolerance: 1e-8,
            max_iterations: 4000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterativeReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    /// `‖x_iterative - x_dense‖ / ‖x_dense‖`.
    pub difference_to_dense: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct M12Solution {
    pub u: DomainDensity,
    pub psi: BoundaryDensity,
    pub phi: BoundaryDensity,
    /// `Φ₀ + φ`, vertex-linear on all of `S`.
    pub recovered_trace: BoundaryDensity,
    /// `Ψ₀ + ψ`, triangle-constant on all of `S`.
    pub recovered_conormal: BoundaryDensity,
    pub condition_estimate: f64,
    pub residual_norm: f64,
    pub iterative: Option<IterativeReport>,
}

/// A factored system, reusable across data sets.
pub struct M12Solver {
    lu: DenseLu,
    pub condition_estimate: f64,
}

impl M12Solver {
    pub fn new(system: &M12System) -> Result<Self> {
        let lu = DenseLu::new(system.dim(), &system.matrix)?;
        let condition_estimate = lu.condition_estimate();
        if !condition_estimate.is_finite() {
            return Err(BdieError::Solver(format!(
                "condition estimate {condition_estimate} for the {}-unknown system",
                system.dim()
            )));
        }
        Ok(Self { lu, condition_estimate })
    }

    pub fn solve(
        &self,
        disc: &Discretization,
        system: &M12System,
        data: &M12Data,
        iterative: Option<&GmresSettings>,
    ) -> Result<M12Solution> {
        let n = system.dim();
        if data.rhs.len() != n {
            return Err(BdieError::Solver(format!("rhs has {} entries for {n} unknowns", data.rhs.len())));
        }
        let x = self.lu.solve(&data.rhs);
        let residual_norm = relative_residual(n, n, &system.matrix, &x, &data.rhs);
        let iterative = iterative.map(|g| {
            let out = gmres(|v| system.apply(v), &data.rhs, g.restart, g.tolerance, g.max_iterations);
            let diff: Vec<f64> = out.x.iter().zip(&x).map(|(a, b)| a - b).collect();
            let nx = norm2(&x);
            IterativeReport {
                iterations: out.iterations,
                relative_residual: out.relative_residual,
                converged: out.converged,
                difference_to_dense: if nx > 0.0 { norm2(&diff) / nx } else { norm2(&diff) },
            }
        });
        let (u, psi, phi) = system.layout.split(&disc.surface, &x);
        Ok(M12Solution {
            recovered_trace: data.extensions.Phi0.plus(&phi),
            recovered_conormal: data.extensions.Psi0.plus(&psi),
            u,
            psi,
            phi,
            condition_estimate: self.condition_estimate,
            residual_norm,
            iterative,
        })
    }
}

/// Factors and solves in one step.
pub fn solve_M12(
    disc: &Discretization,
    system: &M12System,
    data: &M12Data,
    iterative: Option<&GmresSettings>,
) -> Result<M12Solution> {
    M12Solver::new(system)?.solve(disc, system, data, iterative)
}

/// `u(y) = 𝒫f + V(Ψ₀+ψ) - W(Φ₀+φ) - ℛu` at points of `Ω`, the third Green
/// identity applied to the discrete solution.
pub fn evaluate_solution(
    disc: &Discretization,
    field: &CoefficientField,
    f: &(dyn Fn(&Point) -> f64 + Sync),
    solution: &M12Solution,
    targets: &[Point],
) -> Vec<f64> {
    let pf = op_P_fn(disc, field, f, targets);
    let v = op_V(disc, field, &solution.recovered_conormal, targets);
    let w = op_W(disc, field, &solution.recovered_trace, targets);
    let r = op_R(disc, field, &solution.u, targets);
    (0..targets.len()).map(|i| pf[i] + v[i] - w[i] - r[i]).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormOrder {
    /// `‖ω⁻¹u‖_{L²}`.
    Weighted0,
    /// `‖∇u‖_{L²}` from differences between face-adjacent cells.
    Semi1,
}

/// Discrete weighted norm of a cell-wise constant function.
pub fn weighted_norm(values: &[f64], mesh: &VolumeMesh, order: NormOrder) -> f64 {
    assert_eq!(values.len(), mesh.n_cells());
    let sq: f64 = match order {
        NormOrder::Weighted0 => mesh
            .cells
            .iter()
            .zip(values)
            .map(|(c, u)| {
                let m: f64 = c.nodes.iter().zip(&c.weights).map(|(x, w)| w / weight(x).powi(2)).sum();
                m * u * u
            })
            .sum(),
        NormOrder::Semi1 => mesh
            .adjacent_pairs()
            .iter()
            .map(|&(i, j, area)| {
                let d = (mesh.cells[i].center - mesh.cells[j].center).norm();
                area * (values[i] - values[j]).powi(2) / d
            })
            .sum(),
    };
    sq.sqrt()
}

/// `sqrt(‖ω⁻¹u‖² + ‖∇u‖²)`.
pub fn full_weighted_norm(values: &[f64], mesh: &VolumeMesh) -> f64 {
    weighted_norm(values, mesh, NormOrder::Weighted0).hypot(weighted_norm(values, mesh, NormOrder::Semi1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub case: String,
    pub level: Option<usize>,
    /// `max |Φ₀+φ - γ⁺u|` over `S_D` and over `S_N` vertices.
    pub trace_dirichlet: f64,
    pub trace_neumann: f64,
    pub trace_scale: f64,
    pub trace_rel: f64,
    /// `max |Ψ₀+ψ - T⁺u|` (panel means) over `S_D` and `S_N` triangles.
    pub conormal_dirichlet: f64,
    pub conormal_neumann: f64,
    pub conormal_scale: f64,
    pub conormal_rel: f64,
    /// Full weighted norm of `u_h - u` at cell centers, absolute and relative
    /// to the norm of `u`.
    pub interior_norm_error: f64,
    pub interior_norm_rel: f64,
    pub probes: Vec<[f64; 3]>,
    pub probe_values: Vec<f64>,
    pub probe_exact: Vec<f64>,
    /// `max |u_h(p) - u(p)| / max |u(p)|` over the probes.
    pub probe_rel: f64,
    pub condition_estimate: f64,
    pub residual_norm: f64,
}

fn rel(err: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

/// Compares a solution with the exact Cauchy data and interior values of a
/// manufactured case; `probes` are evaluated through [`evaluate_solution`].
pub fn equivalence_residuals(
    disc: &Discretization,
    case: &ManufacturedCase,
    solution: &M12Solution,
    probes: &[Point],
) -> EquivalenceReport {
    let m = &disc.surface;
    let u = case.u.as_ref();
    let trace = trace_density(disc, u);
    let conormal = conormal_density(disc, &case.coefficient, u);
    let (mut td, mut tn) = (0.0f64, 0.0f64);
    for v in 0..m.n_vertices() {
        let e = (solution.recovered_trace.coefficients[v] - trace.coefficients[v]).abs();
        if m.vertex_class[v] == VertexClass::InteriorNeumann {
            tn = tn.max(e);
        } else {
            td = td.max(e);
        }
    }
    let (mut cd, mut cn) = (0.0f64, 0.0f64);
    for t in 0..m.n_triangles() {
        let e = (solution.recovered_conormal.coefficients[t] - conormal.coefficients[t]).abs();
        if m.part_label[t] == PartLabel::Neumann {
            cn = cn.max(e);
        } else {
            cd = cd.max(e);
        }
    }
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let trace_scale = max_abs(&trace.coefficients);
    let conormal_scale = max_abs(&conormal.coefficients);
    let vol = &disc.volume;
    let exact: Vec<f64> = vol.cells.iter().map(|c| u.value(&c.center)).collect();
    let diff: Vec<f64> = solution.u.values.iter().zip(&exact).map(|(a, b)| a - b).collect();
    let interior_norm_error = full_weighted_norm(&diff, vol);
    let probe_values = evaluate_solution(disc, &case.coefficient, &|x: &Point| case.source(x), solution, probes);
    let probe_exact: Vec<f64> = probes.iter().map(|p| u.value(p)).collect();
    let probe_err = probe_values
        .iter()
        .zip(&probe_exact)
        .fold(0.0f64, |a, (h, e)| a.max((h - e).abs()));
    EquivalenceReport {
        case: case.name.clone(),
        level: disc.level(),
        trace_dirichlet: td,
        trace_neumann: tn,
        trace_scale,
        trace_rel: rel(td.max(tn), trace_scale),
        conormal_dirichlet: cd,
        conormal_neumann: cn,
        conormal_scale,
        conormal_rel: rel(cd.max(cn), conormal_scale),
        interior_norm_error,
        interior_norm_rel: rel(interior_norm_error, full_weighted_norm(&exact, vol)),
        probes: probes.iter().map(|p| [p[0], p[1], p[2]]).collect(),
        probe_values,
        probe_rel: rel(probe_err, max_abs(&probe_exact)),
        probe_exact,
        condition_estimate: solution.condition_estimate,
        residual_norm: solution.residual_norm,
    }
}

/// Exact unknowns of a manufactured case: `u` at cell centers and the
/// Cauchy data minus their extensions.
pub fn exact_unknowns(disc: &Discretization, system: &M12System, case: &ManufacturedCase, ext: &ExtensionPair) -> Vec<f64> {
    let u = case.u.as_ref();
    let cells = DomainDensity::from_fn(&disc.volume, |x| u.value(x));
    let psi = conormal_density(disc, &case.coefficient, u).plus(&ext.Psi0.scaled(-1.0));
    let phi = trace_density(disc, u).plus(&ext.Phi0.scaled(-1.0));
    system.layout.join(&cells, &psi, &phi)
}

/// `𝓜X - 𝓕` with the exact unknowns injected.
pub fn injected_residual(system: &M12System, data: &M12Data, exact: &[f64]) -> Vec<f64> {
    system.apply(exact).iter().zip(&data.rhs).map(|(a, b)| a - b).collect()
}
