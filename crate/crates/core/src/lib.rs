//! Symbolic engine for Grassmann-graded field theory on a two-dimensional
//! worldsheet: canonical expressions with exact coefficients, spinor and
//! gamma-matrix algebra, variational calculus, symmetry checks, the canonical
//! (Hamiltonian) formulation and a finite Grassmann-algebra oracle.

#![allow(clippy::needless_range_loop)]

pub mod atom;
pub mod calculus;
pub mod canonical;
pub mod coeff;
pub mod error;
pub mod gamma;
pub mod symmetry;
pub mod expr;
pub mod oracle;

pub use calculus::{c_limit, c_series, change_chart, coord_derive, euler_lagrange, partial_atom, substitute, SeriesInC};
pub use atom::{Atom, AtomKind, Chart, Parity};
pub use coeff::{Basis, Coefficient, Exponent};
pub use error::{Error, Result};
pub use expr::{canonicalize, equals, resolve_nilpotent, AssumptionSet, Base, Expr, Monomial, Raw};
