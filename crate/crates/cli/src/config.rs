//! Run configuration, read from a JSON file with every field optional.

use std::path::{Path, PathBuf};

use bdie_core::cases::CaseSpec;
use bdie_core::coefficient::{AuditSettings, CoefficientField};
use bdie_core::geometry::MAX_ICOSPHERE_LEVEL;
use bdie_core::m12::{GmresSettings, JumpCoefficient};
use bdie_core::operator::MeshSettings;
use bdie_core::quadrature::QuadratureSettings;
use bdie_core::Point;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Built-in coefficient catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoefficientSpec {
    Constant { value: f64 },
    Gaussian { beta: f64 },
    SinX1,
    ExpX1,
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        Self::Gaussian { beta: 1.0 }
    }
}

impl CoefficientSpec {
    pub fn build(&self) -> Result<CoefficientField, CliError> {
        match *self {
            Self::Constant { value } => {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(CliError::Config(format!("constant coefficient must be positive, got {value}")));
                }
                Ok(CoefficientField::constant(value))
            }
            Self::Gaussian { beta } => {
                if !(beta > -1.0 && beta.is_finite()) {
                    return Err(CliError::Config(format!("gaussian beta must exceed -1, got {beta}")));
                }
                Ok(CoefficientField::gaussian(beta))
            }
            Self::SinX1 => Ok(CoefficientField::sin_x1()),
            Self::ExpX1 => Ok(CoefficientField::exp_x1()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub jump: JumpCoefficient,
    /// Also run restarted GMRES and compare with the dense solve.
    pub iterative: Option<GmresSettings>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub coefficient: CoefficientSpec,
    pub case: CaseSpec,
    pub mesh: MeshSettings,
    /// Surface levels of a convergence sweep.
    pub levels: Vec<usize>,
    pub quadrature: QuadratureSettings,
    pub audit: AuditSettings,
    pub solver: SolverSettings,
    /// Evaluation points of the solution probe table.
    pub probes: Vec<[f64; 3]>,
    pub output_dir: PathBuf,
    /// Worker threads; results do not depend on it, so it is not echoed.
    #[serde(skip_serializing)]
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            coefficient: CoefficientSpec::default(),
            case: CaseSpec::default(),
            mesh: MeshSettings::for_level(2),
            levels: vec![1, 2, 3],
            quadrature: QuadratureSettings::default(),
            audit: AuditSettings::default(),
            solver: SolverSettings::default(),
            probes: vec![[0.0, 0.0, 2.5], [2.0, 0.0, 0.0], [0.0, -1.5, 0.0], [1.2, 1.2, -1.2]],
            output_dir: PathBuf::from("bdie-out"),
            workers: 1,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        self.coefficient.build()?;
        let max_level = |l: usize| l > MAX_ICOSPHERE_LEVEL;
        if max_level(self.mesh.surface_level) || self.levels.iter().any(|&l| max_level(l)) {
            return bad(format!("surface levels must not exceed {MAX_ICOSPHERE_LEVEL}"));
        }
        if self.mesh.angular() > MAX_ICOSPHERE_LEVEL {
            return bad(format!("angular level must not exceed {MAX_ICOSPHERE_LEVEL}"));
        }
        if self.levels.is_empty() || self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return bad("levels must be nonempty and strictly increasing".into());
        }
        if !(self.mesh.outer_radius > 1.0 && self.mesh.outer_radius.is_finite()) {
            return bad(format!("outer_radius must exceed 1, got {}", self.mesh.outer_radius));
        }
        if !(self.mesh.grading >= 1.0 && self.mesh.grading.is_finite()) {
            return bad(format!("grading must be at least 1, got {}", self.mesh.grading));
        }
        if self.mesh.radial() == 0 {
            return bad("n_radial must be positive".into());
        }
        if self.workers == 0 {
            return bad("workers must be positive".into());
        }
        for p in &self.probes {
            let r = Point::from(*p).norm();
            if !(r > 1.0 && r < self.mesh.outer_radius) {
                return bad(format!("probe {p:?} is not inside the truncated exterior domain"));
            }
        }
        Ok(())
    }

    /// Mesh settings at another surface level, other fields unchanged.
    pub fn mesh_at(&self, level: usize) -> MeshSettings {
        MeshSettings {
            surface_level: level,
            ..self.mesh.clone()
        }
    }

    pub fn probe_points(&self) -> Vec<Point> {
        self.probes.iter().map(|p| Point::from(*p)).collect()
    }

    /// `BDIE_OUT` overrides the configured directory.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os("BDIE_OUT") {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.output_dir.clone(),
        }
    }
}
