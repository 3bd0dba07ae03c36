//! Verification engine and diagram evaluator for finite models of
//! 2-C*-categories with non-simple units.
//!
//! The model concretely realized here is the "group bundle" one: objects are
//! finite base spaces, 1-arrows are families of finite-dimensional Hilbert
//! spaces indexed by pairs of base points and carrying unitary actions of a
//! finite symmetry group, and 2-arrows are equivariant block families. On top
//! of that the crate certifies the conjugation calculus (zigzag identities,
//! standard solutions, additivity and multiplicativity of dimension), the
//! equivalence between Q-systems and Frobenius algebras, Temperley-Lieb
//! relations for Jones projections, and the depth-two Hopf algebra
//! reconstruction with its Fourier transform.
//!
//! The crate is generic over the real scalar type via [`numerics::Scalar`];
//! the aliases below fix `f64`, which is what the command line tool uses.

// The numeric kernels index several arrays with one loop variable so the code
// matches the index notation of the identities it checks.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::type_complexity)]

pub mod conjugation;
pub mod dsl;
pub mod homcalc;
pub mod hopf;
pub mod model;
pub mod numerics;
pub mod qfrobenius;

pub use numerics::{NumError, NumResult, Tolerance};

/// Dense complex matrix over `f64`.
pub type Mat = numerics::CMatrix<f64>;
/// Default tolerance bundle over `f64`.
pub type Tol = numerics::Tolerance<f64>;
/// Category presentation over `f64`.
pub type Cat = model::CategoryPresentation<f64>;
/// Normalized 1-arrow over `f64`.
pub type Arr = model::Arrow<f64>;
/// 2-arrow over `f64`.
pub type Op = homcalc::TwoArrow<f64>;
/// Central function (element of a unit endomorphism algebra) over `f64`.
pub type Central = homcalc::CentralFunction<f64>;
/// Conjugation solution pair over `f64`.
pub type Sol = conjugation::SolutionPair<f64>;
/// Concrete Q-system data over `f64`.
pub type QSys = qfrobenius::QSystemData<f64>;
/// Concrete Frobenius data over `f64`.
pub type Frob = qfrobenius::FrobeniusData<f64>;
/// Concrete Hopf reconstruction data over `f64`.
pub type Hopf = hopf::HopfData<f64>;
