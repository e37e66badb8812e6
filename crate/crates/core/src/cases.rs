//! Closed-form fields and the manufactured cases built from them.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coefficient::CoefficientField;
use crate::quadrature::gauss_legendre;
use crate::{BdieError, Point, Result};

/// A field `u` with closed-form gradient and Laplacian.
pub trait AnalyticField: Send + Sync {
    fn value(&self, x: &Point) -> f64;
    fn gradient(&self, x: &Point) -> Point;
    fn laplacian(&self, x: &Point) -> f64;
}

/// `strength / (4π|x - center|)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointSource {
    pub center: Point,
    pub strength: f64,
}

impl PointSource {
    pub fn unit() -> Self {
        Self {
            center: Point::zeros(),
            strength: 1.0,
        }
    }
}

impl AnalyticField for PointSource {
    fn value(&self, x: &Point) -> f64 {
        self.strength / (4.0 * PI * (x - self.center).norm())
    }

    fn gradient(&self, x: &Point) -> Point {
        let d = x - self.center;
        let r = d.norm();
        -d * (self.strength / (4.0 * PI * r * r * r))
    }

    fn laplacian(&self, _x: &Point) -> f64 {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantField(pub f64);

impl AnalyticField for ConstantField {
    fn value(&self, _x: &Point) -> f64 {
        self.0
    }

    fn gradient(&self, _x: &Point) -> Point {
        Point::zeros()
    }

    fn laplacian(&self, _x: &Point) -> f64 {
        0.0
    }
}

/// `factor · inner`.
#[derive(Clone)]
pub struct Scaled {
    pub inner: Arc<dyn AnalyticField>,
    pub factor: f64,
}

impl AnalyticField for Scaled {
    fn value(&self, x: &Point) -> f64 {
        self.factor * self.inner.value(x)
    }

    fn gradient(&self, x: &Point) -> Point {
        self.inner.gradient(x) * self.factor
    }

    fn laplacian(&self, x: &Point) -> f64 {
        self.factor * self.inner.laplacian(x)
    }
}

/// Newton potential `F = 𝒫_Δ f` of the radial bump
/// `f(x) = amplitude · (r - r0)²(r1 - r)²` on `r0 < r < r1`, so `ΔF = f`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialBumpPotential {
    pub r0: f64,
    pub r1: f64,
    pub amplitude: f64,
}

impl RadialBumpPotential {
    pub fn density(&self, x: &Point) -> f64 {
        self.profile(x.norm())
    }

    fn profile(&self, r: f64) -> f64 {
        if r <= self.r0 || r >= self.r1 {
            0.0
        } else {
            self.amplitude * (r - self.r0).powi(2) * (self.r1 - r).powi(2)
        }
    }

    /// `∫_a^b f(s) s^k ds` for the polynomial piece; Gauss-Legendre with 8
    /// nodes is exact for the degree ≤ 6 integrand.
    fn moment(&self, a: f64, b: f64, k: i32) -> f64 {
        let (a, b) = (a.max(self.r0), b.min(self.r1));
        if b <= a {
            return 0.0;
        }
        let (x, w) = gauss_legendre(8);
        x.iter()
            .zip(&w)
            .map(|(t, w)| {
                let s = a + (b - a) * t;
                w * self.amplitude * (s - self.r0).powi(2) * (self.r1 - s).powi(2) * s.powi(k)
            })
            .sum::<f64>()
            * (b - a)
    }

    fn inner_mass(&self, r: f64) -> f64 {
        self.moment(self.r0, r, 2)
    }
}

impl AnalyticField for RadialBumpPotential {
    fn value(&self, x: &Point) -> f64 {
        let r = x.norm();
        -(self.inner_mass(r) / r + self.moment(r, self.r1, 1))
    }

    fn gradient(&self, x: &Point) -> Point {
        let r = x.norm();
        x * (self.inner_mass(r) / (r * r * r))
    }

    fn laplacian(&self, x: &Point) -> f64 {
        self.density(x)
    }
}

/// Closures with user-supplied derivatives.
#[derive(Clone)]
pub struct FnField {
    pub u: Arc<dyn Fn(&Point) -> f64 + Send + Sync>,
    pub grad: Arc<dyn Fn(&Point) -> Point + Send + Sync>,
    pub lap: Arc<dyn Fn(&Point) -> f64 + Send + Sync>,
}

impl AnalyticField for FnField {
    fn value(&self, x: &Point) -> f64 {
        (self.u)(x)
    }

    fn gradient(&self, x: &Point) -> Point {
        (self.grad)(x)
    }

    fn laplacian(&self, x: &Point) -> f64 {
        (self.lap)(x)
    }
}

/// Largest discrepancy between the closed-form derivatives and central
/// differences with step `h` at `points`.
pub fn derivative_mismatch(u: &dyn AnalyticField, points: &[Point], h: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for x in points {
        let g = u.gradient(x);
        let mut lap = 0.0;
        let u0 = u.value(x);
        for i in 0..3 {
            let mut e = Point::zeros();
            e[i] = h;
            let up = u.value(&(x + e));
            let um = u.value(&(x - e));
            worst = worst.max(((up - um) / (2.0 * h) - g[i]).abs());
            lap += (up - 2.0 * u0 + um) / (h * h);
        }
        worst = worst.max((lap - u.laplacian(x)).abs() * h);
    }
    worst
}

/// Built-in manufactured solutions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum CaseSpec {
    /// `u ≡ 1`.
    Constant,
    /// `u = strength / (4π|x - center|)` with the source inside the body.
    PointSource { center: [f64; 3], strength: f64 },
    /// `u ≡ 0`.
    Zero,
}

impl Default for CaseSpec {
    fn default() -> Self {
        Self::point_source()
    }
}

impl CaseSpec {
    pub fn point_source() -> Self {
        Self::PointSource {
            center: [0.0; 3],
            strength: 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::PointSource { .. } => "point-source",
            Self::Zero => "zero",
        }
    }

    pub fn field(&self) -> Arc<dyn AnalyticField> {
        match *self {
            Self::Constant => Arc::new(ConstantField(1.0)),
            Self::PointSource { center, strength } => Arc::new(PointSource {
                center: Point::from(center),
                strength,
            }),
            Self::Zero => Arc::new(ConstantField(0.0)),
        }
    }
}

impl fmt::Display for CaseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseSpec {
    type Err = BdieError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" | "u1" | "u=1" => Ok(Self::Constant),
            "point-source" => Ok(Self::point_source()),
            "zero" => Ok(Self::Zero),
            other => Err(BdieError::Parse(format!(
                "unknown case '{other}' (expected constant, point-source or zero)"
            ))),
        }
    }
}

/// An exact solution `u` of `div(a grad u) = f` with its Cauchy data.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub u: Arc<dyn AnalyticField>,
    pub coefficient: CoefficientField,
}

impl ManufacturedCase {
    pub fn new(name: impl Into<String>, u: Arc<dyn AnalyticField>, coefficient: CoefficientField) -> Self {
        Self {
            name: name.into(),
            u,
            coefficient,
        }
    }

    pub fn from_spec(spec: &CaseSpec, coefficient: CoefficientField) -> Self {
        Self::new(spec.name(), spec.field(), coefficient)
    }

    pub fn value(&self, x: &Point) -> f64 {
        self.u.value(x)
    }

    /// `a ∂_n u`.
    pub fn conormal(&self, x: &Point, normal: &Point) -> f64 {
        self.coefficient.a(x) * self.u.gradient(x).dot(normal)
    }

    /// `𝒜u = ∇a·∇u + aΔu`.
    pub fn source(&self, x: &Point) -> f64 {
        source_term(&self.coefficient, self.u.as_ref(), x)
    }
}

/// `𝒜u = ∇a·∇u + aΔu`.
pub fn source_term(field: &CoefficientField, u: &dyn AnalyticField, x: &Point) -> f64 {
    let lap = u.laplacian(x);
    let g = field.grad_a(x).dot(&u.gradient(x));
    if lap == 0.0 {
        g
    } else {
        g + field.a(x) * lap
    }
}
