//! Exact computations in free Lie algebras and their metabelian-type quotients.

pub mod assoc;
pub mod density;
pub mod endo;
pub mod error;
pub mod lie;
pub mod obstruct;
pub mod parse;
pub mod quotient;
pub mod ratlin;
pub mod schur;
pub mod selftest;

pub use assoc::{AssocPoly, Mat2, PolyZ, Word};
pub use error::{Error, Result};
pub use lie::{GLMatrix, LieElement};
pub use quotient::{IdealSpec, Poly, QuotElement, QuotientContext};
pub use ratlin::{Rat, RowSpace, SparseVec};
