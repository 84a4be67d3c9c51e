//! Runtime values and the environment-based evaluation machine.
//!
//! The small-step relations in [`crate::eval`] are the semantics of record;
//! this machine computes the same results (enforced by property tests) and
//! backs the hot paths: right-hand-side evaluation inside the ODE solver,
//! tangent application inside `diff`, and particle runs inside `infer`.

use std::sync::Arc;

use crate::ad::Dual;
use crate::ast::{self, PrimDist, Term, TermRef, TypeExpr};
use crate::dist::{self, DistParams, WienerHandle};
use crate::eval::{EvalConfig, EvalError, RunState};
use crate::{ad, infer, ode};

/// Runtime values. Closures carry their environment; [`term_of_value`]
/// substitutes it away when a closed term is needed (stored samples,
/// splicing results back into the small-step relation).
#[derive(Debug, Clone)]
pub enum Value {
    Real(Dual),
    Tuple(Vec<Value>),
    Closure {
        param: String,
        annot: Option<TypeExpr>,
        body: TermRef,
        env: Env,
    },
    Dist(PrimDist, Vec<Dual>),
    /// `infer f` is itself a value; its empirical distribution is
    /// materialized on demand (sampling it, or printing it).
    InferFn(Box<Value>),
    /// The derivative closure produced by reducing `diff`.
    DerivFn {
        mode: ast::DiffMode,
        func: Box<Value>,
        point: Box<Value>,
    },
}

impl Value {
    pub fn unit() -> Value {
        Value::Tuple(Vec::new())
    }

    pub fn real(r: f64) -> Value {
        Value::Real(Dual::constant(r))
    }

    pub fn as_dual(&self) -> Option<&Dual> {
        match self {
            Value::Real(d) => Some(d),
            _ => None,
        }
    }
}

/// Persistent binding list; scopes share tails.
#[derive(Debug, Clone, Default)]
pub struct Env(Option<Arc<EnvNode>>);

#[derive(Debug)]
struct EnvNode {
    name: String,
    value: Value,
    rest: Env,
}

impl Env {
    pub fn empty() -> Env {
        Env(None)
    }

    pub fn extend(&self, name: &str, value: Value) -> Env {
        Env(Some(Arc::new(EnvNode {
            name: name.to_string(),
            value,
            rest: self.clone(),
        })))
    }

    pub fn lookup(&self, name: &str) -> Option<&Value> {
        let mut cur = self;
        while let Env(Some(node)) = cur {
            if node.name == name {
                return Some(&node.value);
            }
            cur = &node.rest;
        }
        None
    }
}

/// Evaluate a term to a value. `st` is `None` in deterministic contexts
/// (inside `diff` and `solve`), where hitting `assume`/`weight` is a stuck
/// configuration rather than an effect.
pub fn eval_big(
    t: &Term,
    env: &Env,
    mut st: Option<&mut RunState>,
    cfg: &EvalConfig,
) -> Result<Value, EvalError> {
    match t {
        Term::Var(x) => env
            .lookup(x)
            .cloned()
            .ok_or_else(|| EvalError::Stuck(format!("unbound variable {x}"))),
        Term::Abs { param, annot, body } => Ok(Value::Closure {
            param: param.clone(),
            annot: annot.clone(),
            body: body.clone(),
            env: env.clone(),
        }),
        Term::App(f, a) => {
            let fv = eval_big(f, env, st.as_deref_mut(), cfg)?;
            let av = eval_big(a, env, st.as_deref_mut(), cfg)?;
            apply(&fv, av, st, cfg)
        }
        Term::Prim(p, args) => {
            let mut duals = Vec::with_capacity(args.len());
            for a in args {
                let v = eval_big(a, env, st.as_deref_mut(), cfg)?;
                match v {
                    Value::Real(d) => duals.push(d),
                    _ => {
                        return Err(EvalError::Stuck(
                            "primitive applied to a non-real value".into(),
                        ))
                    }
                }
            }
            Ok(Value::Real(ad::lift_prim(p, &duals)?))
        }
        Term::Real(d) => Ok(Value::Real(d.clone())),
        Term::Tuple(es) => {
            let mut vs = Vec::with_capacity(es.len());
            for e in es {
                vs.push(eval_big(e, env, st.as_deref_mut(), cfg)?);
            }
            Ok(Value::Tuple(vs))
        }
        Term::Proj { index, tuple } => {
            let v = eval_big(tuple, env, st, cfg)?;
            project(v, *index)
        }
        Term::If {
            cond,
            then_branch,
            else_branch,
        } => {
            let c = eval_big(cond, env, st.as_deref_mut(), cfg)?;
            let r = c.as_dual().ok_or_else(|| {
                EvalError::Stuck("if comparand did not evaluate to a real".into())
            })?;
            if r.value() > 0.0 {
                eval_big(then_branch, env, st, cfg)
            } else {
                eval_big(else_branch, env, st, cfg)
            }
        }
        Term::DistCon(d, args) => {
            let mut duals = Vec::with_capacity(args.len());
            for a in args {
                let v = eval_big(a, env, st.as_deref_mut(), cfg)?;
                match v {
                    Value::Real(x) => duals.push(x),
                    _ => {
                        return Err(EvalError::Stuck(
                            "distribution parameter did not evaluate to a real".into(),
                        ))
                    }
                }
            }
            Ok(Value::Dist(*d, duals))
        }
        Term::Assume(inner) => {
            let v = eval_big(inner, env, st.as_deref_mut(), cfg)?;
            let st = st.ok_or_else(det_violation)?;
            assume_value(&v, st, cfg)
        }
        Term::Weight(inner) => {
            let v = eval_big(inner, env, st.as_deref_mut(), cfg)?;
            let st = st.ok_or_else(det_violation)?;
            let r = v
                .as_dual()
                .ok_or_else(|| EvalError::Stuck("weight of a non-real value".into()))?;
            st.log_weight += r.value().max(0.0).ln();
            Ok(Value::unit())
        }
        Term::Infer(f) => {
            let v = eval_big(f, env, st, cfg)?;
            Ok(Value::InferFn(Box::new(v)))
        }
        Term::Diff { mode, func, point } => {
            let fv = eval_big(func, env, st.as_deref_mut(), cfg)?;
            let pv = eval_big(point, env, st, cfg)?;
            Ok(Value::DerivFn {
                mode: *mode,
                func: Box::new(fv),
                point: Box::new(pv),
            })
        }
        Term::Solve { rhs, init, horizon } => {
            let rv = eval_big(rhs, env, st.as_deref_mut(), cfg)?;
            let y0 = eval_big(init, env, st.as_deref_mut(), cfg)?;
            let x1 = eval_big(horizon, env, st, cfg)?;
            let x1 = x1
                .as_dual()
                .ok_or_else(|| EvalError::Stuck("solve end time is not a real".into()))?;
            ode::solve_value(&rv, &y0, x1, cfg)
        }
        Term::DerivFn { mode, func, point } => Ok(Value::DerivFn {
            mode: *mode,
            func: Box::new(value_of_term(func)?),
            point: Box::new(value_of_term(point)?),
        }),
    }
}

fn det_violation() -> EvalError {
    EvalError::Stuck("probabilistic construct reached in a deterministic context".into())
}

/// One `assume` reduction on an already-evaluated distribution value;
/// consumes exactly one seed head.
pub fn assume_value(v: &Value, st: &mut RunState, cfg: &EvalConfig) -> Result<Value, EvalError> {
    match v {
        Value::Dist(PrimDist::WienerProcess, _) => {
            let p = st.seed.draw().ok_or(EvalError::SeedExhausted)?;
            Ok(wiener_closure(WienerHandle::from_index(p)))
        }
        Value::Dist(d, params) => {
            let dp = DistParams {
                dist: *d,
                params: params.iter().map(|x| x.value()).collect(),
            };
            dp.validate().map_err(EvalError::Abort)?;
            let p = st.seed.draw().ok_or(EvalError::SeedExhausted)?;
            let r = dist::quantile(&dp, p).map_err(EvalError::Abort)?;
            Ok(Value::real(r))
        }
        Value::InferFn(model) => {
            let emp = infer::infer_impl(model, cfg)?;
            let p = st.seed.draw().ok_or(EvalError::SeedExhausted)?;
            value_of_term(emp.quantile(p))
        }
        _ => Err(EvalError::Stuck("assume of a non-distribution value".into())),
    }
}

/// The realization a Wiener `assume` steps to: `lam x: RealN. wiener_p(x)`.
pub fn wiener_closure(handle: WienerHandle) -> Value {
    Value::Closure {
        param: "x".into(),
        annot: Some(TypeExpr::Real(ast::Coeffect::N)),
        body: Arc::new(Term::Prim(
            ast::PrimFn::Wiener(handle),
            vec![Term::var("x")],
        )),
        env: Env::empty(),
    }
}

/// Apply a function value: beta reduction for closures, the tagged forward
/// pass for derivative closures.
pub fn apply(
    f: &Value,
    arg: Value,
    st: Option<&mut RunState>,
    cfg: &EvalConfig,
) -> Result<Value, EvalError> {
    match f {
        Value::Closure {
            param, body, env, ..
        } => eval_big(body, &env.extend(param, arg), st, cfg),
        Value::DerivFn { func, point, .. } => ad::apply_deriv(func, point, &arg, cfg),
        _ => Err(EvalError::Stuck("application of a non-function value".into())),
    }
}

/// Apply in a deterministic context (used by the `diff` and `solve`
/// implementing functions, whose operands are deterministically typed).
pub fn apply_det(f: &Value, arg: Value, cfg: &EvalConfig) -> Result<Value, EvalError> {
    apply(f, arg, None, cfg)
}

pub fn project(v: Value, index: u32) -> Result<Value, EvalError> {
    match v {
        Value::Tuple(mut es) => {
            let i = index as usize;
            if i >= 1 && i <= es.len() {
                Ok(es.swap_remove(i - 1))
            } else {
                Err(EvalError::Stuck(format!(
                    "projection index {index} out of bounds for a {}-tuple",
                    es.len()
                )))
            }
        }
        // A 1-tuple is its element: projection .1 is the identity.
        other if index == 1 => Ok(other),
        _ => Err(EvalError::Stuck(
            "projection with index > 1 of a non-tuple value".into(),
        )),
    }
}

/// View a value-form term as a runtime value (closures get the empty
/// environment).
pub fn value_of_term(t: &TermRef) -> Result<Value, EvalError> {
    match &**t {
        Term::Abs { param, annot, body } => Ok(Value::Closure {
            param: param.clone(),
            annot: annot.clone(),
            body: body.clone(),
            env: Env::empty(),
        }),
        Term::Real(d) => Ok(Value::Real(d.clone())),
        Term::Tuple(es) => Ok(Value::Tuple(
            es.iter().map(value_of_term).collect::<Result<_, _>>()?,
        )),
        Term::DistCon(d, es) => {
            let mut duals = Vec::with_capacity(es.len());
            for e in es {
                match value_of_term(e)? {
                    Value::Real(x) => duals.push(x),
                    _ => return Err(EvalError::Stuck("non-real distribution parameter".into())),
                }
            }
            Ok(Value::Dist(*d, duals))
        }
        Term::Infer(f) => Ok(Value::InferFn(Box::new(value_of_term(f)?))),
        Term::DerivFn { mode, func, point } => Ok(Value::DerivFn {
            mode: *mode,
            func: Box::new(value_of_term(func)?),
            point: Box::new(value_of_term(point)?),
        }),
        _ => Err(EvalError::Stuck("term is not a value".into())),
    }
}

/// Close a runtime value back into a term, substituting captured
/// environments into closure bodies.
pub fn term_of_value(v: &Value) -> TermRef {
    match v {
        Value::Real(d) => Arc::new(Term::Real(d.clone())),
        Value::Tuple(vs) => Arc::new(Term::Tuple(vs.iter().map(term_of_value).collect())),
        Value::Closure {
            param,
            annot,
            body,
            env,
        } => {
            let mut body = body.clone();
            let fvs = ast::free_vars(&body);
            let mut done = std::collections::BTreeSet::new();
            done.insert(param.clone());
            let mut cur = env;
            while let Env(Some(node)) = cur {
                if fvs.contains(&node.name) && done.insert(node.name.clone()) {
                    body = ast::subst(&body, &node.name, &term_of_value(&node.value));
                }
                cur = &node.rest;
            }
            Arc::new(Term::Abs {
                param: param.clone(),
                annot: annot.clone(),
                body,
            })
        }
        Value::Dist(d, params) => Arc::new(Term::DistCon(
            *d,
            params
                .iter()
                .map(|x| Arc::new(Term::Real(x.clone())))
                .collect(),
        )),
        Value::InferFn(f) => Arc::new(Term::Infer(term_of_value(f))),
        Value::DerivFn { mode, func, point } => Arc::new(Term::DerivFn {
            mode: *mode,
            func: term_of_value(func),
            point: term_of_value(point),
        }),
    }
}
