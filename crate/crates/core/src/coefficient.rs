//! The variable coefficient `a(x)` of the diffusion operator and sampled audits
//! of its admissibility conditions.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{BdieError, Point, Result};

/// A user supplied smooth scalar field with closed-form derivatives.
pub trait ScalarField: Send + Sync {
    fn value(&self, x: &Point) -> f64;
    fn gradient(&self, x: &Point) -> Point;
    fn laplacian(&self, x: &Point) -> f64;
}

#[derive(Clone)]
pub enum CoefficientKind {
    /// `a ≡ c`.
    Constant(f64),
    /// `a = 1 + β exp(-|x|²)`.
    Gaussian { beta: f64 },
    /// `a = 2 + sin(x₁)`; bounded but without gradient decay.
    SinX1,
    /// `a = exp(x₁)`; unbounded, kept for derivative checks.
    ExpX1,
    Custom(Arc<dyn ScalarField>),
}

impl fmt::Debug for CoefficientKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::Gaussian { beta } => write!(f, "Gaussian {{ beta: {beta} }}"),
            Self::SinX1 => write!(f, "SinX1"),
            Self::ExpX1 => write!(f, "ExpX1"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// The coefficient together with the bounds `C₁ < a < C₂` it claims to satisfy.
///
/// Immutable after construction and safe to share between worker threads.
#[derive(Clone, Debug)]
pub struct CoefficientField {
    kind: CoefficientKind,
    pub name: String,
    pub c_lower: f64,
    pub c_upper: f64,
}

impl CoefficientField {
    pub fn constant(c: f64) -> Self {
        Self {
            kind: CoefficientKind::Constant(c),
            name: format!("constant({c})"),
            c_lower: 0.5 * c,
            c_upper: 2.0 * c,
        }
    }

    pub fn gaussian(beta: f64) -> Self {
        Self {
            kind: CoefficientKind::Gaussian { beta },
            name: format!("gaussian({beta})"),
            c_lower: 0.5 * (1.0 + beta.min(0.0)),
            c_upper: 1.0 + beta.max(0.0) + 0.5,
        }
    }

    pub fn sin_x1() -> Self {
        Self {
            kind: CoefficientKind::SinX1,
            name: "sin_x1".into(),
            c_lower: 0.5,
            c_upper: 3.5,
        }
    }

    pub fn exp_x1() -> Self {
        Self {
            kind: CoefficientKind::ExpX1,
            name: "exp_x1".into(),
            c_lower: 0.5,
            c_upper: 2.0,
        }
    }

    pub fn custom(
        name: impl Into<String>,
        field: Arc<dyn ScalarField>,
        c_lower: f64,
        c_upper: f64,
    ) -> Self {
        Self {
            kind: CoefficientKind::Custom(field),
            name: name.into(),
            c_lower,
            c_upper,
        }
    }

    pub fn kind(&self) -> &CoefficientKind {
        &self.kind
    }

    /// True when the gradient vanishes identically, so every remainder term is zero.
    pub fn is_constant(&self) -> bool {
        matches!(self.kind, CoefficientKind::Constant(_))
    }

    pub fn a(&self, x: &Point) -> f64 {
        match &self.kind {
            CoefficientKind::Constant(c) => *c,
            CoefficientKind::Gaussian { beta } => 1.0 + beta * (-x.norm_squared()).exp(),
            CoefficientKind::SinX1 => 2.0 + x[0].sin(),
            CoefficientKind::ExpX1 => x[0].exp(),
            CoefficientKind::Custom(f) => f.value(x),
        }
    }

    pub fn grad_a(&self, x: &Point) -> Point {
        match &self.kind {
            CoefficientKind::Constant(_) => Point::zeros(),
            CoefficientKind::Gaussian { beta } => x * (-2.0 * beta * (-x.norm_squared()).exp()),
            CoefficientKind::SinX1 => Point::new(x[0].cos(), 0.0, 0.0),
            CoefficientKind::ExpX1 => Point::new(x[0].exp(), 0.0, 0.0),
            CoefficientKind::Custom(f) => f.gradient(x),
        }
    }

    pub fn laplacian_a(&self, x: &Point) -> f64 {
        match &self.kind {
            CoefficientKind::Constant(_) => 0.0,
            CoefficientKind::Gaussian { beta } => {
                let r2 = x.norm_squared();
                beta * (-r2).exp() * (4.0 * r2 - 6.0)
            }
            CoefficientKind::SinX1 => -x[0].sin(),
            CoefficientKind::ExpX1 => x[0].exp(),
            CoefficientKind::Custom(f) => f.laplacian(x),
        }
    }

    fn positive_a(&self, x: &Point) -> Result<f64> {
        let a = self.a(x);
        if a > 0.0 && a.is_finite() {
            Ok(a)
        } else {
            Err(BdieError::Coefficient(format!(
                "a({:.6}, {:.6}, {:.6}) = {a} is not positive",
                x[0], x[1], x[2]
            )))
        }
    }

    /// `∇a / a`.
    pub fn eval_grad_ln_a(&self, x: &Point) -> Result<Point> {
        let a = self.positive_a(x)?;
        Ok(self.grad_a(x) / a)
    }

    /// `Δa / a - |∇a|² / a²`.
    pub fn eval_laplacian_ln_a(&self, x: &Point) -> Result<f64> {
        let a = self.positive_a(x)?;
        let g = self.grad_a(x);
        Ok(self.laplacian_a(x) / a - g.norm_squared() / (a * a))
    }

    /// `(a, ∇ln a, Δln a)` without the positivity check; kernels call this
    /// after the field has been audited.
    #[inline]
    pub fn log_derivatives(&self, x: &Point) -> (f64, Point, f64) {
        match &self.kind {
            CoefficientKind::Constant(c) => (*c, Point::zeros(), 0.0),
            _ => {
                let a = self.a(x);
                let g = self.grad_a(x) / a;
                let lap = self.laplacian_a(x) / a - g.norm_squared();
                (a, g, lap)
            }
        }
    }

    /// `∂_n ln a = n·∇a / a`.
    #[inline]
    pub fn normal_log_derivative(&self, x: &Point, normal: &Point) -> f64 {
        match &self.kind {
            CoefficientKind::Constant(_) => 0.0,
            _ => self.grad_a(x).dot(normal) / self.a(x),
        }
    }
}

/// The weight `ω(x) = (1 + |x|²)^{1/2}`.
pub fn weight(x: &Point) -> f64 {
    (1.0 + x.norm_squared()).sqrt()
}

/// Quasi-uniform directions on the unit sphere (Fibonacci lattice).
pub fn sphere_directions(count: usize) -> Vec<Point> {
    let n = count.max(1);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Point::new(rho * phi.cos(), rho * phi.sin(), z)
        })
        .collect()
}

/// Sampling grid and thresholds for [`validate_conditions`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditSettings {
    pub radial_grid: Vec<f64>,
    pub angular_samples: usize,
    /// Upper bound accepted for `sup ω|∇a|`.
    pub grad_bound: f64,
    /// Upper bound accepted for `sup ω²|Δa|`.
    pub laplacian_bound: f64,
    /// `ω|∇a|` on the outermost sphere must fall below this value.
    pub decay_tolerance: f64,
}

impl Default for AuditSettings {
    fn default() -> Self {
        Self {
            radial_grid: vec![
                0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 16.0, 32.0, 64.0, 128.0,
            ],
            angular_samples: 200,
            grad_bound: 10.0,
            laplacian_bound: 100.0,
            decay_tolerance: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientReport {
    pub coefficient: String,
    pub passes_cond0: bool,
    pub passes_cond1: bool,
    pub passes_cond3: bool,
    pub passes_decay: bool,
    pub min_a: f64,
    pub max_a: f64,
    pub sup_omega_grad_a: f64,
    pub sup_omega2_lap_a: f64,
    /// `(radius, max ω|∇a| on that sphere)` in increasing radius order.
    pub tail_samples: Vec<(f64, f64)>,
    pub settings: AuditSettings,
}

/// Samples `a`, `ω|∇a|` and `ω²|Δa|` on spheres of the given radii and
/// classifies the boundedness, gradient, Laplacian and decay conditions.
pub fn validate_conditions(field: &CoefficientField, settings: &AuditSettings) -> CoefficientReport {
    let dirs = sphere_directions(settings.angular_samples);
    let mut min_a = f64::INFINITY;
    let mut max_a = f64::NEG_INFINITY;
    let mut sup_grad: f64 = 0.0;
    let mut sup_lap: f64 = 0.0;
    let mut tail = Vec::with_capacity(settings.radial_grid.len());
    for &r in &settings.radial_grid {
        let mut shell_grad: f64 = 0.0;
        for d in &dirs {
            let x = d * r;
            let a = field.a(&x);
            min_a = min_a.min(a);
            max_a = max_a.max(a);
            let w = weight(&x);
            let g = w * field.grad_a(&x).norm();
            let l = w * w * field.laplacian_a(&x).abs();
            shell_grad = shell_grad.max(g);
            sup_lap = sup_lap.max(l);
        }
        sup_grad = sup_grad.max(shell_grad);
        tail.push((r, shell_grad));
    }
    let passes_cond0 = field.c_lower > 0.0 && min_a > field.c_lower && max_a < field.c_upper;
    let passes_decay = tail
        .last()
        .map(|&(_, g)| g < settings.decay_tolerance)
        .unwrap_or(false);
    CoefficientReport {
        coefficient: field.name.clone(),
        passes_cond0,
        passes_cond1: sup_grad.is_finite() && sup_grad <= settings.grad_bound,
        passes_cond3: sup_lap.is_finite() && sup_lap <= settings.laplacian_bound,
        passes_decay,
        min_a,
        max_a,
        sup_omega_grad_a: sup_grad,
        sup_omega2_lap_a: sup_lap,
        tail_samples: tail,
        settings: settings.clone(),
    }
}
