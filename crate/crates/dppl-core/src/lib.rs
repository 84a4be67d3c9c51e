//! A typed core calculus combining probabilistic constructs (`assume`,
//! `weight`, `infer`), first-class forward-mode differentiation (`diff`),
//! and initial-value-problem solving (`solve`), implemented as a library:
//! parser, coeffect/effect type checker, small-step evaluator, dual-number
//! AD, fixed-step ODE integrators, Wiener-process sampling, and
//! likelihood-weighted importance sampling.
//!
//! The small-step relations in [`eval`] are the semantics of record; the
//! environment-based machine in [`value`] computes the same results (this is
//! property-tested) and backs the performance-sensitive paths: the
//! implementing functions for `diff`, `solve`, and `infer`.

pub mod ad;
pub mod ast;
pub mod dist;
pub mod eval;
pub mod infer;
pub mod ode;
pub mod parser;
pub mod pretty;
pub mod typer;
pub mod value;

mod rng;

pub use ast::{Coeffect, DiffMode, Effect, PrimDist, PrimFn, Term, TypeExpr};
pub use eval::{EvalConfig, EvalError, RunState, SeedStream};
