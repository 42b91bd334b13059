//! Exact-arithmetic workbench for Hasse–Schmidt higher derivations.
//!
//! The crate provides, over arbitrary-precision rationals:
//!
//! * dense univariate polynomials, polynomial matrices, and Smith normal
//!   form over `Q[x]` ([`poly`], [`polymat`], [`snf`]);
//! * finitely presented `Q[x]`-modules with decidable membership and
//!   canonical coset representatives ([`presented`]);
//! * finite-dimensional `Q`-algebras given by structure constants
//!   ([`algebra`]) and the tensor monad they generate, with executable
//!   diagram checks ([`monadic`]);
//! * higher derivations on rings and modules, conversion to and from
//!   sequences of ordinary derivations, and the standard constructions
//!   (exponential, rescaling, inner) ([`hasse_ring`], [`hasse_module`]);
//! * principal Gabriel filters, torsion decompositions, and the
//!   four-condition differential-filter equivalence ([`torsion`]);
//! * modules of quotients with unique lifting of higher derivations
//!   ([`quotients`]);
//! * a line-oriented scenario language (`.hsw`) with a deterministic
//!   runner and report formats, exposed through the `hasse` binary
//!   ([`scenario`], [`runner`], [`report`]).
//!
//! All arithmetic is exact; no floating point is used anywhere.

pub mod algebra;
pub mod error;
pub mod hasse_module;
pub mod hasse_ring;
pub mod monadic;
pub mod poly;
pub mod polymat;
pub mod presented;
pub mod qmat;
pub mod quotients;
pub mod rat;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod snf;
pub mod torsion;

pub use error::CoreError;
pub use poly::Poly;
pub use rat::Rat;
