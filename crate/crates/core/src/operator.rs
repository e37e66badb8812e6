//! Densities, dense operator blocks and the parallel assembly engines shared
//! by the Laplace and parametrix operators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{
    build_icosphere, build_shell_mesh, partition_boundary, PartLabel, PartitionRule, SurfaceMesh, VertexClass,
    VolumeMesh,
};
use crate::quadrature::{panel_nodes, LayerRules, QuadratureSettings, VolumeIntegrator};
use crate::{BdieError, Point, Result, MAX_TRIANGLES, MAX_VOLUME_CELLS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DensitySpace {
    TriangleConstant,
    VertexLinear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Support {
    All,
    DirichletOnly,
    NeumannOnly,
}

/// Whether basis function `index` of `space` may be nonzero under `support`.
/// Neumann-supported vertex functions vanish on the interface.
pub fn basis_allowed(mesh: &SurfaceMesh, space: DensitySpace, support: Support, index: usize) -> bool {
    match (space, support) {
        (_, Support::All) => true,
        (DensitySpace::TriangleConstant, Support::DirichletOnly) => mesh.part_label[index] == PartLabel::Dirichlet,
        (DensitySpace::TriangleConstant, Support::NeumannOnly) => mesh.part_label[index] == PartLabel::Neumann,
        (DensitySpace::VertexLinear, Support::DirichletOnly) => {
            mesh.vertex_class[index] != VertexClass::InteriorNeumann
        }
        (DensitySpace::VertexLinear, Support::NeumannOnly) => mesh.vertex_class[index] == VertexClass::InteriorNeumann,
    }
}

pub fn space_dim(mesh: &SurfaceMesh, space: DensitySpace) -> usize {
    match space {
        DensitySpace::TriangleConstant => mesh.n_triangles(),
        DensitySpace::VertexLinear => mesh.n_vertices(),
    }
}

/// A boundary function: piecewise constant on triangles or continuous
/// piecewise linear on vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDensity {
    pub space: DensitySpace,
    pub support: Support,
    pub coefficients: Vec<f64>,
}

impl BoundaryDensity {
    pub fn new(mesh: &SurfaceMesh, space: DensitySpace, support: Support, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != space_dim(mesh, space) {
            return Err(BdieError::Geometry(format!(
                "density has {} coefficients, the {space:?} space has {}",
                coefficients.len(),
                space_dim(mesh, space)
            )));
        }
        if let Some(i) = (0..coefficients.len()).find(|&i| coefficients[i] != 0.0 && !basis_allowed(mesh, space, support, i)) {
            return Err(BdieError::Geometry(format!(
                "coefficient {i} is nonzero outside the {support:?} support"
            )));
        }
        Ok(Self {
            space,
            support,
            coefficients,
        })
    }

    pub fn zeros(mesh: &SurfaceMesh, space: DensitySpace, support: Support) -> Self {
        Self {
            space,
            support,
            coefficients: vec![0.0; space_dim(mesh, space)],
        }
    }

    pub fn constant(mesh: &SurfaceMesh, space: DensitySpace, value: f64) -> Self {
        Self {
            space,
            support: Support::All,
            coefficients: vec![value; space_dim(mesh, space)],
        }
    }

    /// Samples `f` at centroids or vertices, zero outside the support.
    pub fn from_fn(mesh: &SurfaceMesh, space: DensitySpace, support: Support, f: impl Fn(&Point) -> f64) -> Self {
        let pts = match space {
            DensitySpace::TriangleConstant => &mesh.centroids,
            DensitySpace::VertexLinear => &mesh.vertices,
        };
        let coefficients = pts
            .iter()
            .enumerate()
            .map(|(i, x)| if basis_allowed(mesh, space, support, i) { f(x) } else { 0.0 })
            .collect();
        Self {
            space,
            support,
            coefficients,
        }
    }

    /// Value on triangle `t` at barycentric coordinates `bary`.
    #[inline]
    pub fn eval(&self, mesh: &SurfaceMesh, t: usize, bary: &[f64; 3]) -> f64 {
        match self.space {
            DensitySpace::TriangleConstant => self.coefficients[t],
            DensitySpace::VertexLinear => {
                let tri = &mesh.triangles[t];
                bary[0] * self.coefficients[tri[0]] + bary[1] * self.coefficients[tri[1]] + bary[2] * self.coefficients[tri[2]]
            }
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.coefficients.iter_mut().for_each(|c| *c *= alpha);
        out
    }

    /// `self + other` for densities in the same space.
    pub fn plus(&self, other: &Self) -> Self {
        assert_eq!(self.space, other.space);
        let support = if self.support == other.support { self.support } else { Support::All };
        Self {
            space: self.space,
            support,
            coefficients: self.coefficients.iter().zip(&other.coefficients).map(|(a, b)| a + b).collect(),
        }
    }
}

/// Cell-wise constant function on the volume mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainDensity {
    pub values: Vec<f64>,
}

impl DomainDensity {
    pub fn new(mesh: &VolumeMesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_cells() {
            return Err(BdieError::Geometry(format!(
                "domain density has {} values for {} cells",
                values.len(),
                mesh.n_cells()
            )));
        }
        Ok(Self { values })
    }

    pub fn zeros(mesh: &VolumeMesh) -> Self {
        Self {
            values: vec![0.0; mesh.n_cells()],
        }
    }

    /// Samples `f` at the cell centers.
    pub fn from_fn(mesh: &VolumeMesh, f: impl Fn(&Point) -> f64) -> Self {
        Self {
            values: mesh.cells.iter().map(|c| f(&c.center)).collect(),
        }
    }

    /// Cell means of `f` under each cell's stored rule.
    pub fn cell_average(mesh: &VolumeMesh, f: impl Fn(&Point) -> f64) -> Self {
        Self {
            values: mesh
                .cells
                .iter()
                .map(|c| c.nodes.iter().zip(&c.weights).map(|(x, w)| w * f(x)).sum::<f64>() / c.volume)
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetKind {
    Cell(usize),
    Centroid(usize),
    Vertex(usize),
    Free,
}

/// A collocation or evaluation point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Target {
    pub x: Point,
    pub kind: TargetKind,
    /// Boundary normal at boundary targets.
    pub normal: Option<Point>,
}

impl Target {
    pub fn free(x: Point) -> Self {
        Self {
            x,
            kind: TargetKind::Free,
            normal: None,
        }
    }

    pub fn cells(mesh: &VolumeMesh) -> Vec<Self> {
        mesh.cells
            .iter()
            .enumerate()
            .map(|(i, c)| Self {
                x: c.center,
                kind: TargetKind::Cell(i),
                normal: None,
            })
            .collect()
    }

    pub fn centroids(mesh: &SurfaceMesh, which: &[usize]) -> Vec<Self> {
        which
            .iter()
            .map(|&t| Self {
                x: mesh.centroids[t],
                kind: TargetKind::Centroid(t),
                normal: Some(mesh.normals[t]),
            })
            .collect()
    }

    pub fn vertices(mesh: &SurfaceMesh, which: &[usize]) -> Vec<Self> {
        let n = mesh.vertex_normals();
        which
            .iter()
            .map(|&v| Self {
                x: mesh.vertices[v],
                kind: TargetKind::Vertex(v),
                normal: Some(n[v]),
            })
            .collect()
    }

    pub fn all_centroids(mesh: &SurfaceMesh) -> Vec<Self> {
        Self::centroids(mesh, &(0..mesh.n_triangles()).collect::<Vec<_>>())
    }

    pub fn all_vertices(mesh: &SurfaceMesh) -> Vec<Self> {
        Self::vertices(mesh, &(0..mesh.n_vertices()).collect::<Vec<_>>())
    }
}

pub fn points(targets: &[Target]) -> Vec<Point> {
    targets.iter().map(|t| t.x).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColMeta {
    Triangle(usize),
    Vertex(usize),
    Cell(usize),
}

/// Dense row-major block mapping density coefficients to values at targets.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorBlock {
    pub nrows: usize,
    pub ncols: usize,
    pub matrix: Vec<f64>,
    pub row_meta: Vec<Target>,
    pub col_meta: Vec<ColMeta>,
}

impl OperatorBlock {
    pub fn new(matrix: Vec<f64>, row_meta: Vec<Target>, col_meta: Vec<ColMeta>) -> Self {
        assert_eq!(matrix.len(), row_meta.len() * col_meta.len());
        Self {
            nrows: row_meta.len(),
            ncols: col_meta.len(),
            matrix,
            row_meta,
            col_meta,
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.ncols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        self.matrix
            .iter()
            .zip(&other.matrix)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// The block restricted to the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut m = Vec::with_capacity(self.nrows * cols.len());
        for i in 0..self.nrows {
            let r = self.row(i);
            m.extend(cols.iter().map(|&j| r[j]));
        }
        Self::new(m, self.row_meta.clone(), cols.iter().map(|&j| self.col_meta[j]).collect())
    }
}

/// Mesh parameters. Unset fields follow the level: angular level
/// `max(level - 1, 0)` and `[4, 6, 8, 10]` radial layers for levels 0 to 3
/// (two more per further level).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeshSettings {
    pub surface_level: usize,
    pub angular_level: Option<usize>,
    pub n_radial: Option<usize>,
    pub outer_radius: f64,
    pub grading: f64,
    pub partition: PartitionRule,
}

impl Default for MeshSettings {
    fn default() -> Self {
        Self::for_level(3)
    }
}

impl MeshSettings {
    pub fn for_level(level: usize) -> Self {
        Self {
            surface_level: level,
            angular_level: None,
            n_radial: None,
            outer_radius: 4.0,
            grading: 1.3,
            partition: PartitionRule::default(),
        }
    }

    pub fn angular(&self) -> usize {
        self.angular_level.unwrap_or(self.surface_level.saturating_sub(1))
    }

    pub fn radial(&self) -> usize {
        self.n_radial.unwrap_or(match self.surface_level {
            l @ 0..=3 => [4, 6, 8, 10][l],
            l => 10 + 2 * (l - 3),
        })
    }

    pub fn surface(&self) -> Result<SurfaceMesh> {
        partition_boundary(&build_icosphere(self.surface_level)?, &self.partition)
    }

    pub fn volume(&self) -> Result<VolumeMesh> {
        build_shell_mesh(1.0, self.outer_radius, self.radial(), self.angular(), self.grading)
    }

    pub fn build(&self, quadrature: &QuadratureSettings) -> Result<Discretization> {
        Discretization::new(self.surface()?, self.volume()?, quadrature.clone())
    }
}

/// Meshes together with the quadrature rules used by every operator.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub surface: SurfaceMesh,
    pub volume: VolumeMesh,
    pub layer: LayerRules,
    pub cells: VolumeIntegrator,
    pub settings: QuadratureSettings,
}

impl Discretization {
    pub fn new(surface: SurfaceMesh, volume: VolumeMesh, settings: QuadratureSettings) -> Result<Self> {
        Ok(Self {
            layer: LayerRules::new(&settings)?,
            cells: VolumeIntegrator::new(&volume, &settings)?,
            surface,
            volume,
            settings,
        })
    }

    pub fn level(&self) -> Option<usize> {
        self.surface.level
    }

    /// Refuses dense assembly above the size caps.
    pub fn check_caps(&self) -> Result<()> {
        if self.volume.n_cells() > MAX_VOLUME_CELLS {
            return Err(BdieError::Resource(format!(
                "{} volume cells exceed the dense-assembly cap {MAX_VOLUME_CELLS}",
                self.volume.n_cells()
            )));
        }
        if self.surface.n_triangles() > MAX_TRIANGLES {
            return Err(BdieError::Resource(format!(
                "{} triangles exceed the dense-assembly cap {MAX_TRIANGLES}",
                self.surface.n_triangles()
            )));
        }
        Ok(())
    }
}

/// A surface quadrature sample as seen by a kernel.
#[derive(Clone, Copy, Debug)]
pub struct SurfaceSample<'a> {
    pub y: &'a Point,
    pub x: Point,
    /// Normal of the panel carrying `x`.
    pub normal: &'a Point,
    /// `y` lies on that panel.
    pub on_panel: bool,
}

fn surface_row_into<K>(disc: &Discretization, y: &Point, space: DensitySpace, kernel: &K, row: &mut [f64])
where
    K: Fn(&SurfaceSample) -> f64,
{
    let mesh = &disc.surface;
    let mut nodes = Vec::with_capacity(64);
    for t in 0..mesh.n_triangles() {
        nodes.clear();
        let plan = panel_nodes(y, &mesh.corners(t), &disc.layer, &mut nodes);
        let tri = &mesh.triangles[t];
        for n in &nodes {
            let k = n.w
                * kernel(&SurfaceSample {
                    y,
                    x: n.x,
                    normal: &mesh.normals[t],
                    on_panel: plan.on_panel,
                });
            match space {
                DensitySpace::TriangleConstant => row[t] += k,
                DensitySpace::VertexLinear => {
                    row[tri[0]] += k * n.bary[0];
                    row[tri[1]] += k * n.bary[1];
                    row[tri[2]] += k * n.bary[2];
                }
            }
        }
    }
}

/// Dense block `A[i][j] = ∫_S k(x, y_i) φ_j(x) dS(x)` over the basis of
/// `space`. Rows are assembled in parallel, each in a fixed panel order.
pub fn assemble_surface<K>(disc: &Discretization, targets: &[Target], space: DensitySpace, kernel: K) -> OperatorBlock
where
    K: Fn(&SurfaceSample) -> f64 + Sync,
{
    let ncols = space_dim(&disc.surface, space);
    let mut matrix = vec![0.0; targets.len() * ncols];
    if ncols > 0 {
        matrix
            .par_chunks_mut(ncols)
            .zip(targets.par_iter())
            .for_each(|(row, t)| surface_row_into(disc, &t.x, space, &kernel, row));
    }
    let col_meta = match space {
        DensitySpace::TriangleConstant => (0..ncols).map(ColMeta::Triangle).collect(),
        DensitySpace::VertexLinear => (0..ncols).map(ColMeta::Vertex).collect(),
    };
    OperatorBlock::new(matrix, targets.to_vec(), col_meta)
}

/// `∫_S k(x, y) ρ(x) dS(x)` at each target.
pub fn apply_surface<K>(disc: &Discretization, targets: &[Point], density: &BoundaryDensity, kernel: K) -> Vec<f64>
where
    K: Fn(&SurfaceSample) -> f64 + Sync,
{
    let ncols = space_dim(&disc.surface, density.space);
    targets
        .par_iter()
        .map(|y| {
            let mut row = vec![0.0; ncols];
            surface_row_into(disc, y, density.space, &kernel, &mut row);
            row.iter().zip(&density.coefficients).map(|(a, b)| a * b).sum()
        })
        .collect()
}

/// Dense block `A[i][j] = ∫_{cell j} k(x, y_i) dx`.
pub fn assemble_volume<K>(disc: &Discretization, targets: &[Target], kernel: K) -> OperatorBlock
where
    K: Fn(&Point, &Point) -> f64 + Sync,
{
    let nc = disc.volume.n_cells();
    let mut matrix = vec![0.0; targets.len() * nc];
    if nc > 0 {
        matrix.par_chunks_mut(nc).zip(targets.par_iter()).for_each(|(row, t)| {
            let mut nodes = Vec::with_capacity(256);
            for (j, r) in row.iter_mut().enumerate() {
                nodes.clear();
                disc.cells.cell_nodes(&t.x, &disc.volume, j, &mut nodes);
                *r = nodes.iter().map(|n| n.w * kernel(&t.x, &n.x)).sum();
            }
        });
    }
    OperatorBlock::new(matrix, targets.to_vec(), (0..nc).map(ColMeta::Cell).collect())
}

/// `∫_Ω k(x, y) f(x) dx` for a pointwise density `f`.
pub fn apply_volume_fn<K, F>(disc: &Discretization, targets: &[Point], kernel: K, f: F) -> Vec<f64>
where
    K: Fn(&Point, &Point) -> f64 + Sync,
    F: Fn(&Point) -> f64 + Sync,
{
    targets
        .par_iter()
        .map(|y| {
            let mut nodes = Vec::with_capacity(256);
            let mut total = 0.0;
            for j in 0..disc.volume.n_cells() {
                nodes.clear();
                disc.cells.cell_nodes(y, &disc.volume, j, &mut nodes);
                total += nodes.iter().map(|n| n.w * kernel(y, &n.x) * f(&n.x)).sum::<f64>();
            }
            total
        })
        .collect()
}

/// `∫_Ω k(x, y) u(x) dx` for a cell-wise constant density.
pub fn apply_volume(disc: &Discretization, targets: &[Point], kernel: impl Fn(&Point, &Point) -> f64 + Sync, u: &DomainDensity) -> Vec<f64> {
    targets
        .par_iter()
        .map(|y| {
            let mut nodes = Vec::with_capacity(256);
            let mut total = 0.0;
            for (j, uj) in u.values.iter().enumerate() {
                if *uj == 0.0 {
                    continue;
                }
                nodes.clear();
                disc.cells.cell_nodes(y, &disc.volume, j, &mut nodes);
                total += uj * nodes.iter().map(|n| n.w * kernel(y, &n.x)).sum::<f64>();
            }
            total
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_icosphere, build_shell_mesh, partition_boundary, PartitionRule};

    fn mesh() -> SurfaceMesh {
        partition_boundary(&build_icosphere(1).unwrap(), &PartitionRule::default()).unwrap()
    }

    #[test]
    fn density_invariants() {
        let m = mesh();
        assert!(BoundaryDensity::new(&m, DensitySpace::TriangleConstant, Support::All, vec![1.0; 3]).is_err());
        let n_tri = m.triangles_with(PartLabel::Neumann)[0];
        let mut c = vec![0.0; m.n_triangles()];
        c[n_tri] = 1.0;
        assert!(BoundaryDensity::new(&m, DensitySpace::TriangleConstant, Support::DirichletOnly, c.clone()).is_err());
        assert!(BoundaryDensity::new(&m, DensitySpace::TriangleConstant, Support::NeumannOnly, c).is_ok());
        let phi = BoundaryDensity::from_fn(&m, DensitySpace::VertexLinear, Support::NeumannOnly, |_| 1.0);
        for v in m.vertices_with(VertexClass::Interface) {
            assert_eq!(phi.coefficients[v], 0.0);
        }
        assert!(BoundaryDensity::new(&m, DensitySpace::VertexLinear, Support::NeumannOnly, phi.coefficients.clone()).is_ok());
    }

    #[test]
    fn vertex_linear_evaluation_interpolates() {
        let m = mesh();
        let d = BoundaryDensity::from_fn(&m, DensitySpace::VertexLinear, Support::All, |x| 2.0 * x[0] - x[2] + 0.5);
        let t = 7;
        let bary = [0.2, 0.3, 0.5];
        let p = m.corners(t);
        let x = p[0] * 0.2 + p[1] * 0.3 + p[2] * 0.5;
        assert!((d.eval(&m, t, &bary) - (2.0 * x[0] - x[2] + 0.5)).abs() < 1e-14);
    }

    #[test]
    fn block_apply_matches_direct_application() {
        let m = mesh();
        let v = build_shell_mesh(1.0, 2.0, 1, 0, 1.0).unwrap();
        let d = Discretization::new(m.clone(), v, QuadratureSettings::default()).unwrap();
        let targets = vec![Target::free(Point::new(0.0, 0.0, 2.0)), Target::free(Point::new(1.5, 0.2, 0.0))];
        let rho = BoundaryDensity::from_fn(&m, DensitySpace::VertexLinear, Support::All, |x| x[2] + 1.0);
        let k = |s: &SurfaceSample| 1.0 / (s.x - s.y).norm();
        let b = assemble_surface(&d, &targets, DensitySpace::VertexLinear, k);
        let via_block = b.apply(&rho.coefficients);
        let direct = apply_surface(&d, &points(&targets), &rho, k);
        for (a, b) in via_block.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-13 * b.abs());
        }
        let sel = b.select_columns(&[3, 1]);
        assert_eq!(sel.ncols, 2);
        assert_eq!(sel.get(1, 0), b.get(1, 3));
    }

    #[test]
    fn caps_are_enforced() {
        let m = build_icosphere(4).unwrap();
        let v = build_shell_mesh(1.0, 2.0, 1, 0, 1.0).unwrap();
        let d = Discretization::new(m, v, QuadratureSettings::default()).unwrap();
        assert!(matches!(d.check_caps(), Err(BdieError::Resource(_))));
    }

    #[test]
    fn default_meshes_per_level() {
        let m = MeshSettings::for_level(3);
        assert_eq!((m.angular(), m.radial()), (2, 10));
        let v = m.volume().unwrap();
        assert_eq!(v.n_cells(), 3200);
        assert!(v.n_cells() <= MAX_VOLUME_CELLS);
        let l1 = MeshSettings::for_level(1);
        assert_eq!(l1.volume().unwrap().n_cells(), 120);
        let d = l1.build(&QuadratureSettings::default()).unwrap();
        assert_eq!(d.level(), Some(1));
        assert!(!d.surface.triangles_with(PartLabel::Dirichlet).is_empty());
    }
}
