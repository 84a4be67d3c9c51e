//! Small-step substitution-based evaluator: the deterministic reduction
//! relation and the sampling-based relation threading a weight and a seed.
//!
//! Redexes are located by left-to-right call-by-value evaluation contexts.
//! `diff` and `solve` redexes delegate to their implementing functions in
//! [`crate::ad`] and [`crate::ode`]; `assume` of an inferred distribution
//! delegates to [`crate::infer`].

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::ast::{is_value, subst, PrimDist, Term, TermRef};
use crate::dist::{self, DistParams, WienerHandle};
use crate::ode::OdeConfig;
use crate::rng::{mix2, prf_unit};
use crate::value;
use crate::{ad, infer};

/// Run-wide knobs for the implementing functions. Carried alongside the
/// reduction state; the relations themselves only read it.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub ode: OdeConfig,
    /// Particle count used when an `infer` value is materialized.
    pub particles: usize,
    /// Master seed; inference sub-streams and generated seeds derive from it.
    pub master_seed: u64,
    /// Evaluate inference particles on a thread pool. Results are
    /// bit-identical either way; this only trades wall-clock time.
    pub parallel: bool,
    /// Step budget for the small-step driver; `None` is unbounded.
    pub fuel: Option<u64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            ode: OdeConfig::default(),
            particles: 1000,
            master_seed: 0,
            parallel: cfg!(feature = "parallel"),
            fuel: None,
        }
    }
}

/// Random seeds: either an explicit finite sequence of numbers in [0, 1]
/// (the semantics' seed) or a reproducible counter-based stream, which
/// stands for the conceptually infinite case.
#[derive(Debug, Clone, PartialEq)]
pub enum SeedStream {
    Explicit { values: Vec<f64>, next: usize },
    Generated { key: u64, counter: u64 },
}

impl SeedStream {
    pub fn explicit(values: Vec<f64>) -> SeedStream {
        debug_assert!(values.iter().all(|p| (0.0..=1.0).contains(p)));
        SeedStream::Explicit { values, next: 0 }
    }

    /// Stream `stream_index` under `master`; same keys give the same
    /// sequence regardless of scheduling.
    pub fn generated(master: u64, stream_index: u64) -> SeedStream {
        SeedStream::Generated {
            key: mix2(master, stream_index),
            counter: 0,
        }
    }

    pub fn draw(&mut self) -> Option<f64> {
        match self {
            SeedStream::Explicit { values, next } => {
                let p = values.get(*next).copied()?;
                *next += 1;
                Some(p)
            }
            SeedStream::Generated { key, counter } => {
                let p = prf_unit(*key, *counter);
                *counter += 1;
                Some(p)
            }
        }
    }

    /// Unconsumed entries of an explicit seed; `None` for generated streams,
    /// which have no leftover-seed bookkeeping.
    pub fn remaining(&self) -> Option<usize> {
        match self {
            SeedStream::Explicit { values, next } => Some(values.len() - next),
            SeedStream::Generated { .. } => None,
        }
    }
}

/// The (weight, seed) pair threaded by the sampling-based relation. The
/// weight is kept in log space; negative infinity encodes a dead run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    pub log_weight: f64,
    pub seed: SeedStream,
}

impl RunState {
    pub fn new(seed: SeedStream) -> RunState {
        RunState {
            log_weight: 0.0,
            seed,
        }
    }

    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    /// No reduction rule applies; unreachable for well-typed terms.
    #[error("stuck: {0}")]
    Stuck(String),
    /// An explicit seed ran out at an `assume`; the driver reports the
    /// empty result with density zero.
    #[error("random seed exhausted")]
    SeedExhausted,
    #[error("step budget exhausted")]
    FuelExhausted,
    /// Runtime abort: ODE divergence, invalid distribution parameters,
    /// zero total inference weight, internal AD faults.
    #[error("{0}")]
    Abort(String),
}

/// Names of the reduction rules, for traces and the trace replay checker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    EApp,
    EPrimApp,
    EProj,
    EIfTrue,
    EIfFalse,
    EDiff,
    ESolve,
    /// Application of a derivative closure (the value `diff` steps to).
    EDiffApp,
    EWeight,
    EAssumeDist,
    EAssumeWiener,
    EAssumeInfer,
}

impl Rule {
    /// Deterministic rules are lifted into the sampling relation by E-Det
    /// and may not touch the weight or the seed.
    pub fn is_deterministic(self) -> bool {
        !matches!(
            self,
            Rule::EWeight | Rule::EAssumeDist | Rule::EAssumeWiener | Rule::EAssumeInfer
        )
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Rule::EApp => "E-App",
            Rule::EPrimApp => "E-PrimApp",
            Rule::EProj => "E-Proj",
            Rule::EIfTrue => "E-IfTrue",
            Rule::EIfFalse => "E-IfFalse",
            Rule::EDiff => "E-Diff",
            Rule::ESolve => "E-Solve",
            Rule::EDiffApp => "E-DiffApp",
            Rule::EWeight => "E-Weight",
            Rule::EAssumeDist => "E-AssumeDist",
            Rule::EAssumeWiener => "E-AssumeWiener",
            Rule::EAssumeInfer => "E-AssumeInfer",
        };
        write!(f, "{name}")
    }
}

/// Result of attempting one reduction step.
#[derive(Debug, Clone)]
pub enum StepResult {
    Stepped(TermRef, Rule),
    IsValue,
    Stuck(String),
}

/// One step of the deterministic relation. `assume`/`weight` redexes have
/// no deterministic rule and report a stuck configuration.
pub fn step_det(t: &TermRef, cfg: &EvalConfig) -> StepResult {
    match step_at(t, &mut None, cfg) {
        Ok(Some((t2, rule))) => StepResult::Stepped(t2, rule),
        Ok(None) => StepResult::IsValue,
        Err(EvalError::Stuck(msg)) => StepResult::Stuck(msg),
        Err(other) => StepResult::Stuck(other.to_string()),
    }
}

/// One step of the sampling-based relation. Deterministic steps leave the
/// state untouched (E-Det); only E-Weight changes the weight and only the
/// three assume rules consume seed heads.
pub fn step_rnd(
    t: &TermRef,
    st: &mut RunState,
    cfg: &EvalConfig,
) -> Result<StepResult, EvalError> {
    let mut slot = Some(st);
    match step_at(t, &mut slot, cfg) {
        Ok(Some((t2, rule))) => Ok(StepResult::Stepped(t2, rule)),
        Ok(None) => Ok(StepResult::IsValue),
        Err(EvalError::Stuck(msg)) => Ok(StepResult::Stuck(msg)),
        Err(e) => Err(e),
    }
}

/// Locate the redex by descending into the first non-value position (the
/// evaluation-context grammar) and apply the matching rule.
fn step_at(
    t: &TermRef,
    st: &mut Option<&mut RunState>,
    cfg: &EvalConfig,
) -> Result<Option<(TermRef, Rule)>, EvalError> {
    if is_value(t) {
        return Ok(None);
    }
    // Step the first non-value child, rebuilding the spine.
    macro_rules! descend {
        ($child:expr, $rebuild:expr) => {
            if !is_value($child) {
                let (c2, rule) = step_at($child, st, cfg)?
                    .ok_or_else(|| EvalError::Stuck("non-value without a redex".into()))?;
                #[allow(clippy::redundant_closure_call)]
                return Ok(Some(($rebuild(c2), rule)));
            }
        };
    }

    match &**t {
        Term::Var(x) => Err(EvalError::Stuck(format!("unbound variable {x}"))),
        Term::Abs { .. } | Term::Real(_) | Term::DerivFn { .. } => Ok(None),
        Term::App(f, a) => {
            descend!(f, |c| Arc::new(Term::App(c, a.clone())));
            descend!(a, |c| Arc::new(Term::App(f.clone(), c)));
            match &**f {
                Term::Abs { param, body, .. } => {
                    Ok(Some((subst(body, param, a), Rule::EApp)))
                }
                Term::DerivFn { func, point, .. } => {
                    let out = ad::apply_deriv(
                        &value::value_of_term(func)?,
                        &value::value_of_term(point)?,
                        &value::value_of_term(a)?,
                        cfg,
                    )?;
                    Ok(Some((value::term_of_value(&out), Rule::EDiffApp)))
                }
                _ => Err(EvalError::Stuck("application of a non-function".into())),
            }
        }
        Term::Prim(p, args) => {
            for (i, arg) in args.iter().enumerate() {
                descend!(arg, |c| Arc::new(Term::Prim(p.clone(), replace(args, i, c))));
            }
            let mut duals = Vec::with_capacity(args.len());
            for a in args {
                match &**a {
                    Term::Real(d) => duals.push(d.clone()),
                    _ => {
                        return Err(EvalError::Stuck(
                            "primitive applied to a non-real value".into(),
                        ))
                    }
                }
            }
            let r = ad::lift_prim(p, &duals)?;
            Ok(Some((Arc::new(Term::Real(r)), Rule::EPrimApp)))
        }
        Term::Tuple(es) => {
            for (i, e) in es.iter().enumerate() {
                descend!(e, |c| Arc::new(Term::Tuple(replace(es, i, c))));
            }
            unreachable!("tuple of values is a value")
        }
        Term::DistCon(d, es) => {
            for (i, e) in es.iter().enumerate() {
                descend!(e, |c| Arc::new(Term::DistCon(*d, replace(es, i, c))));
            }
            unreachable!("distribution over values is a value")
        }
        Term::Proj { index, tuple } => {
            descend!(tuple, |c| Arc::new(Term::Proj {
                index: *index,
                tuple: c
            }));
            match &**tuple {
                Term::Tuple(es) => {
                    let i = *index as usize;
                    if i >= 1 && i <= es.len() {
                        Ok(Some((es[i - 1].clone(), Rule::EProj)))
                    } else {
                        Err(EvalError::Stuck(format!(
                            "projection index {index} out of bounds for a {}-tuple",
                            es.len()
                        )))
                    }
                }
                _ if *index == 1 => Ok(Some((tuple.clone(), Rule::EProj))),
                _ => Err(EvalError::Stuck(
                    "projection with index > 1 of a non-tuple value".into(),
                )),
            }
        }
        Term::If {
            cond,
            then_branch,
            else_branch,
        } => {
            descend!(cond, |c| Arc::new(Term::If {
                cond: c,
                then_branch: then_branch.clone(),
                else_branch: else_branch.clone()
            }));
            match &**cond {
                Term::Real(d) => {
                    if d.value() > 0.0 {
                        Ok(Some((then_branch.clone(), Rule::EIfTrue)))
                    } else {
                        Ok(Some((else_branch.clone(), Rule::EIfFalse)))
                    }
                }
                _ => Err(EvalError::Stuck("if comparand is not a real".into())),
            }
        }
        Term::Assume(inner) => {
            descend!(inner, |c| Arc::new(Term::Assume(c)));
            let st = st
                .as_deref_mut()
                .ok_or_else(|| EvalError::Stuck("assume in a deterministic context".into()))?;
            match &**inner {
                Term::DistCon(PrimDist::WienerProcess, _) => {
                    let p = st.seed.draw().ok_or(EvalError::SeedExhausted)?;
                    let w = value::wiener_closure(WienerHandle::from_index(p));
                    Ok(Some((value::term_of_value(&w), Rule::EAssumeWiener)))
                }
                Term::DistCon(d, params) => {
                    let dp = DistParams {
                        dist: *d,
                        params: params
                            .iter()
                            .map(|p| match &**p {
                                Term::Real(x) => Ok(x.value()),
                                _ => Err(EvalError::Stuck(
                                    "distribution parameter is not a real".into(),
                                )),
                            })
                            .collect::<Result<_, _>>()?,
                    };
                    dp.validate().map_err(EvalError::Abort)?;
                    let p = st.seed.draw().ok_or(EvalError::SeedExhausted)?;
                    let r = dist::quantile(&dp, p).map_err(EvalError::Abort)?;
                    Ok(Some((Term::real(r), Rule::EAssumeDist)))
                }
                Term::Infer(model) => {
                    let emp = infer::infer_impl(&value::value_of_term(model)?, cfg)?;
                    let p = st.seed.draw().ok_or(EvalError::SeedExhausted)?;
                    Ok(Some((emp.quantile(p).clone(), Rule::EAssumeInfer)))
                }
                _ => Err(EvalError::Stuck("assume of a non-distribution".into())),
            }
        }
        Term::Weight(inner) => {
            descend!(inner, |c| Arc::new(Term::Weight(c)));
            let st = st
                .as_deref_mut()
                .ok_or_else(|| EvalError::Stuck("weight in a deterministic context".into()))?;
            match &**inner {
                Term::Real(d) => {
                    st.log_weight += d.value().max(0.0).ln();
                    Ok(Some((Term::unit(), Rule::EWeight)))
                }
                _ => Err(EvalError::Stuck("weight of a non-real value".into())),
            }
        }
        Term::Infer(f) => {
            descend!(f, |c| Arc::new(Term::Infer(c)));
            unreachable!("infer of a value is a value")
        }
        Term::Diff { mode, func, point } => {
            descend!(func, |c| Arc::new(Term::Diff {
                mode: *mode,
                func: c,
                point: point.clone()
            }));
            descend!(point, |c| Arc::new(Term::Diff {
                mode: *mode,
                func: func.clone(),
                point: c
            }));
            Ok(Some((
                Arc::new(Term::DerivFn {
                    mode: *mode,
                    func: func.clone(),
                    point: point.clone(),
                }),
                Rule::EDiff,
            )))
        }
        Term::Solve { rhs, init, horizon } => {
            descend!(rhs, |c| Arc::new(Term::Solve {
                rhs: c,
                init: init.clone(),
                horizon: horizon.clone()
            }));
            descend!(init, |c| Arc::new(Term::Solve {
                rhs: rhs.clone(),
                init: c,
                horizon: horizon.clone()
            }));
            descend!(horizon, |c| Arc::new(Term::Solve {
                rhs: rhs.clone(),
                init: init.clone(),
                horizon: c
            }));
            let x1 = match &**horizon {
                Term::Real(d) => d.clone(),
                _ => return Err(EvalError::Stuck("solve end time is not a real".into())),
            };
            let out = crate::ode::solve_value(
                &value::value_of_term(rhs)?,
                &value::value_of_term(init)?,
                &x1,
                cfg,
            )?;
            Ok(Some((value::term_of_value(&out), Rule::ESolve)))
        }
    }
}

fn replace(es: &[TermRef], i: usize, c: TermRef) -> Vec<TermRef> {
    let mut out = es.to_vec();
    out[i] = c;
    out
}

/// Iterate the sampling relation to a value, threading the run state.
pub fn eval(
    t: &TermRef,
    st: &mut RunState,
    cfg: &EvalConfig,
) -> Result<TermRef, EvalError> {
    eval_traced(t, st, cfg, &mut |_, _| {})
}

/// Like [`eval`], reporting each applied rule and resulting term.
pub fn eval_traced(
    t: &TermRef,
    st: &mut RunState,
    cfg: &EvalConfig,
    on_step: &mut dyn FnMut(Rule, &TermRef),
) -> Result<TermRef, EvalError> {
    let mut cur = t.clone();
    let mut steps: u64 = 0;
    loop {
        match step_rnd(&cur, st, cfg)? {
            StepResult::IsValue => return Ok(cur),
            StepResult::Stuck(msg) => return Err(EvalError::Stuck(msg)),
            StepResult::Stepped(next, rule) => {
                on_step(rule, &next);
                cur = next;
            }
        }
        steps += 1;
        if let Some(fuel) = cfg.fuel {
            if steps >= fuel {
                return Err(EvalError::FuelExhausted);
            }
        }
    }
}
