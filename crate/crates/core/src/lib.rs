//! Numerical laboratory for approximately multiplicative maps between
//! finite-dimensional normed algebras.
//!
//! The core types are [`Algebra`] (structure constants plus a norm),
//! [`LinearMap`], [`Cochain`] (multilinear maps as coefficient tensors) and
//! [`DefectEstimate`] (certified norm intervals). On top of these sit the
//! averaging/splitting operators over exact diagonals ([`diagonal`]), the
//! improving-operator iteration ([`stabilizer`]), checkers for the elementary
//! perturbation lemmas ([`perturbation`]) and Tsirelson-norm combinatorics
//! ([`tsirelson`]).
//!
//! Everything numerical is generic over a real field `T: Real` (`f32` or
//! `f64`); the Tsirelson module also runs over exact rationals.

pub mod algebra;
pub mod diagonal;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod multilinear;
pub mod perturbation;
pub mod rng;
pub mod scalar;
pub mod stabilizer;
pub mod suite;
pub mod tsirelson;

pub use algebra::{Algebra, AlgebraDoc, Element, NormMode, Subalgebra};
pub use diagonal::{DiagonalCert, TensorRep};
pub use error::{Error, Result};
pub use multilinear::{Budget, Cochain, DefectEstimate, Interval, LinearMap};
pub use scalar::{Real, C};

pub type Algebra64 = Algebra<f64>;
pub type Element64 = Element<f64>;
pub type Subalgebra64 = Subalgebra<f64>;
pub type LinearMap64 = LinearMap<f64>;
pub type Cochain64 = Cochain<f64>;
pub type DefectEstimate64 = DefectEstimate<f64>;
pub type TensorRep64 = TensorRep<f64>;
pub type DiagonalCert64 = DiagonalCert<f64>;

pub type Algebra32 = Algebra<f32>;
pub type LinearMap32 = LinearMap<f32>;

/// Exact rationals for the Tsirelson combinatorics.
pub type Rational = num_rational::Ratio<i64>;
