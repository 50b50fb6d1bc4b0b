//! Equilibria, linear stability, normal forms and bifurcation curves for
//! self-gravitating ellipsoidal fluid configurations with internal vorticity.
//!
//! All computations run over a generic scalar implementing [`Real`]; the two
//! instantiations used in practice are `f64` and the double-double type
//! [`dd::Dd`] for residual re-verification at ~1e-30 working precision.

pub mod dd;
pub mod linalg;
pub mod poly;
pub mod quad;
pub mod specfun;

pub mod shapes;

pub mod hamilton;

pub mod linstab;

pub mod normalform;

pub mod curves;

#[cfg(test)]
pub(crate) mod testkit;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Scalar abstraction for every numerical kernel in this crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + std::fmt::Debug
    + std::fmt::Display
    + poly::Coeff<R = Self>
    + 'static
{
    /// Shorthand for lossless lift of an `f64` constant.
    fn of(x: f64) -> Self {
        Self::from_f64(x).unwrap()
    }
    /// Native machine epsilon of the format.
    fn eps() -> Self {
        Self::epsilon()
    }
}

impl Real for f64 {}
impl Real for dd::Dd {}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),
    #[error("root finding failed: {0}")]
    RootFind(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("invalid shape parameters: {0}")]
    Domain(String),
    #[error("normal form assembly failed: {0}")]
    NormalForm(String),
}

pub type Result<T> = std::result::Result<T, Error>;
