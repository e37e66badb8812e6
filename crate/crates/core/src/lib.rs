//! Boundary-domain integral equations for the mixed Dirichlet-Neumann problem
//! of `div(a grad u) = f` in the exterior of a bounded body in three dimensions.
//!
//! The variable coefficient enters through the parametrix
//! `P(x, y) = P_Δ(x - y) / a(x)`, whose layer and volume potentials are
//! reduced to constant-coefficient (Laplace) potentials. The crate provides:
//!
//! * [`coefficient`]: the coefficient field and pointwise audits of its
//!   admissibility conditions,
//! * [`geometry`]: icosphere boundary meshes with a Dirichlet/Neumann split and
//!   graded shell meshes for the truncated exterior domain,
//! * [`quadrature`]: regular, near-singular and singular rules,
//! * [`laplace`] and [`parametrix`]: the potential operators,
//! * [`green`]: residual verifiers for the Green identities and the
//!   representation operator,
//! * [`m12`]: assembly and solution of the segregated boundary-domain system.
//!
//! Sign conventions: `P_Δ(x) = -1/(4π|x|)` and every mesh normal points from
//! the unbounded domain into the bounded complement (towards the origin for
//! the built-in sphere).

pub mod cases;
pub mod coefficient;
pub mod error;
pub mod geometry;
#[allow(non_snake_case)]
pub mod green;
#[allow(non_snake_case)]
pub mod laplace;
pub mod linalg;
#[allow(non_snake_case)]
pub mod m12;
pub mod operator;
#[allow(non_snake_case)]
pub mod parametrix;
pub mod quadrature;

pub use error::{BdieError, Result};

/// Points and vectors in three dimensions.
pub type Point = nalgebra::Vector3<f64>;

/// Dense assembly caps.
pub const MAX_VOLUME_CELLS: usize = 4000;
pub const MAX_TRIANGLES: usize = 2500;
