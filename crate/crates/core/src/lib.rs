//! Random permutation models of graph products of matrices.
//!
//! Strings are tensor factors of `(C^N)^{⊗S}`; each color acts on its own strings through an
//! independent uniform permutation conjugation. The crate computes traffic moments of test
//! graphs, verifies their combinatorics exhaustively on small instances, runs the decay
//! experiments, and certifies permutation approximations of graph products of groups.
//!
//! Numeric code is generic over [`scalar::Scalar`]; the aliases below pin the common choices.

pub mod combinatorics;
pub mod error;
pub mod experiments;
pub mod model;
pub mod scalar;
pub mod sofic;
pub mod tensor;
pub mod traffic;

pub use error::{Error, GuardKind, Guards, Result};
pub use model::{build_string_assignment, ColorGraph, ColorWord, ModelFile, StringAssignment};
pub use scalar::Scalar;
pub use tensor::{stream_rng, Matrix, MultiIndexSpace, Permutation};

pub type C64 = num_complex::Complex<f64>;
pub type Rational = num_rational::BigRational;

pub type MatrixF32 = tensor::Matrix<f32>;
pub type MatrixF64 = tensor::Matrix<f64>;
pub type MatrixC64 = tensor::Matrix<C64>;
pub type MatrixQ = tensor::Matrix<Rational>;

pub type TestGraphF64 = traffic::TestGraph<f64>;
pub type TestGraphQ = traffic::TestGraph<Rational>;
