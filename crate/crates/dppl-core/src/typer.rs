//! Algorithmic type checker: synthesize a type bottom-up, weaken the
//! environment to the free variables of each subterm, promote maximally,
//! and subsume at elimination positions (application arguments, the `if`
//! comparand, primitive and distribution arguments, `diff`/`solve`
//! operands).
//!
//! Effects join by max wherever the declarative rules force subterms to
//! share one effect annotation.

use std::fmt;

use thiserror::Error;

use crate::ast::{
    coeff_le_type, free_vars, promote_type, Coeffect, DiffMode, Effect, PrimDist, PrimFn, Term,
    TypeExpr,
};

/// Scoped variable typing context. Shadowing pushes a new binding and pops
/// it on scope exit; lookup finds the innermost.
#[derive(Debug, Clone, Default)]
pub struct TypeEnv {
    bindings: Vec<(String, TypeExpr)>,
}

impl TypeEnv {
    pub fn new() -> TypeEnv {
        TypeEnv::default()
    }

    pub fn push(&mut self, name: &str, ty: TypeExpr) {
        self.bindings.push((name.to_string(), ty));
    }

    pub fn pop(&mut self) {
        self.bindings.pop();
    }

    pub fn lookup(&self, name: &str) -> Option<&TypeExpr> {
        self.bindings
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }
}

/// A typing judgment: the synthesized (maximally promoted) type and the
/// randomness effect.
#[derive(Debug, Clone, PartialEq)]
pub struct Judgment {
    pub ty: TypeExpr,
    pub eff: Effect,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub struct TypeError {
    /// Stable rule key, e.g. "T-If"; error strings are keyed by it.
    pub rule: &'static str,
    pub message: String,
    pub expected: Option<TypeExpr>,
    pub found: Option<TypeExpr>,
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.message)?;
        if let Some(e) = &self.expected {
            write!(f, " (expected {}", crate::pretty::pretty_type(e))?;
            if let Some(g) = &self.found {
                write!(f, ", found {}", crate::pretty::pretty_type(g))?;
            }
            write!(f, ")")?;
        } else if let Some(g) = &self.found {
            write!(f, " (found {})", crate::pretty::pretty_type(g))?;
        }
        Ok(())
    }
}

fn type_err(rule: &'static str, message: impl Into<String>) -> TypeError {
    TypeError {
        rule,
        message: message.into(),
        expected: None,
        found: None,
    }
}

/// Subtyping: `Real` is contravariant in its modifier (a non-differentiable
/// real can be used where an analytic one is expected), arrows are
/// contravariant in the argument and covariant in result and effect, tuples
/// are pointwise, distributions covariant.
pub fn subtype(a: &TypeExpr, b: &TypeExpr) -> bool {
    match (a, b) {
        (TypeExpr::Real(c1), TypeExpr::Real(c2)) => c2 <= c1,
        (TypeExpr::Arrow(a1, e1, r1), TypeExpr::Arrow(a2, e2, r2)) => {
            subtype(a2, a1) && e1 <= e2 && subtype(r1, r2)
        }
        (TypeExpr::Tuple(xs), TypeExpr::Tuple(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| subtype(x, y))
        }
        (TypeExpr::Dist(x), TypeExpr::Dist(y)) => subtype(x, y),
        _ => false,
    }
}

/// Least upper bound under subtyping, when the shapes agree.
pub fn join(a: &TypeExpr, b: &TypeExpr) -> Result<TypeExpr, TypeError> {
    match (a, b) {
        (TypeExpr::Real(c1), TypeExpr::Real(c2)) => Ok(TypeExpr::Real(*c1.min(c2))),
        (TypeExpr::Arrow(a1, e1, r1), TypeExpr::Arrow(a2, e2, r2)) => Ok(TypeExpr::arrow(
            meet(a1, a2)?,
            (*e1).max(*e2),
            join(r1, r2)?,
        )),
        (TypeExpr::Tuple(xs), TypeExpr::Tuple(ys)) if xs.len() == ys.len() => Ok(TypeExpr::Tuple(
            xs.iter()
                .zip(ys)
                .map(|(x, y)| join(x, y))
                .collect::<Result<_, _>>()?,
        )),
        (TypeExpr::Dist(x), TypeExpr::Dist(y)) => Ok(TypeExpr::dist(join(x, y)?)),
        _ => Err(TypeError {
            rule: "T-Sub",
            message: "incompatible types have no join".into(),
            expected: Some(a.clone()),
            found: Some(b.clone()),
        }),
    }
}

/// Greatest lower bound under subtyping, when the shapes agree.
pub fn meet(a: &TypeExpr, b: &TypeExpr) -> Result<TypeExpr, TypeError> {
    match (a, b) {
        (TypeExpr::Real(c1), TypeExpr::Real(c2)) => Ok(TypeExpr::Real(*c1.max(c2))),
        (TypeExpr::Arrow(a1, e1, r1), TypeExpr::Arrow(a2, e2, r2)) => Ok(TypeExpr::arrow(
            join(a1, a2)?,
            (*e1).min(*e2),
            meet(r1, r2)?,
        )),
        (TypeExpr::Tuple(xs), TypeExpr::Tuple(ys)) if xs.len() == ys.len() => Ok(TypeExpr::Tuple(
            xs.iter()
                .zip(ys)
                .map(|(x, y)| meet(x, y))
                .collect::<Result<_, _>>()?,
        )),
        (TypeExpr::Dist(x), TypeExpr::Dist(y)) => Ok(TypeExpr::dist(meet(x, y)?)),
        _ => Err(TypeError {
            rule: "T-Sub",
            message: "incompatible types have no meet".into(),
            expected: Some(a.clone()),
            found: Some(b.clone()),
        }),
    }
}

/// Largest coeffect admissible against a binding's type.
fn max_coeff_le(ty: &TypeExpr) -> Coeffect {
    match ty {
        TypeExpr::Real(c) => *c,
        TypeExpr::Tuple(es) => es.iter().map(max_coeff_le).min().unwrap_or(Coeffect::N),
        _ => Coeffect::N,
    }
}

/// Synthesize the type of `t` and apply the three-step promotion: weaken
/// the environment to `FV(t)`, take the largest coeffect below it, and
/// multiply it onto the synthesized type.
pub fn infer_type(env: &mut TypeEnv, t: &Term) -> Result<Judgment, TypeError> {
    let j = synth(env, t)?;
    let mut c = Coeffect::N;
    for name in free_vars(t) {
        if let Some(ty) = env.lookup(&name) {
            c = c.min(max_coeff_le(ty));
        }
    }
    debug_assert!(free_vars(t)
        .iter()
        .all(|n| env.lookup(n).is_none() || coeff_le_type(c, env.lookup(n).unwrap())));
    Ok(Judgment {
        ty: promote_type(c, &j.ty),
        eff: j.eff,
    })
}

/// Check a closed program. A random top level is accepted only when
/// `allow_random` is set.
pub fn check_program(t: &Term, allow_random: bool) -> Result<Judgment, TypeError> {
    let j = infer_type(&mut TypeEnv::new(), t)?;
    if j.eff == Effect::Rnd && !allow_random {
        return Err(type_err(
            "T-Program",
            "top-level term is random; wrap it in infer or pass --allow-random",
        ));
    }
    Ok(j)
}

fn prim_sig(p: &PrimFn) -> (Vec<TypeExpr>, TypeExpr) {
    use Coeffect::*;
    let real = TypeExpr::Real;
    match p {
        PrimFn::Add | PrimFn::Sub | PrimFn::Mul | PrimFn::Div => {
            (vec![real(A), real(A)], real(A))
        }
        PrimFn::Sin | PrimFn::Cos => (vec![real(A)], real(A)),
        PrimFn::Wiener(_) => (vec![real(N)], real(N)),
        PrimFn::PdfGaussian => (vec![real(A), real(A), real(A)], real(A)),
        PrimFn::PdfBeta => (vec![real(P), real(P), real(P)], real(P)),
    }
}

fn dist_sig(d: PrimDist) -> (Vec<TypeExpr>, TypeExpr) {
    use Coeffect::N;
    match d {
        PrimDist::Gaussian | PrimDist::Beta => (
            vec![TypeExpr::Real(N), TypeExpr::Real(N)],
            TypeExpr::Real(N),
        ),
        PrimDist::WienerProcess => (
            vec![],
            TypeExpr::arrow(TypeExpr::Real(N), Effect::Det, TypeExpr::Real(N)),
        ),
    }
}

fn synth(env: &mut TypeEnv, t: &Term) -> Result<Judgment, TypeError> {
    match t {
        Term::Var(x) => match env.lookup(x) {
            Some(ty) => Ok(Judgment {
                ty: ty.clone(),
                eff: Effect::Det,
            }),
            None => Err(type_err("T-Var", format!("unbound variable {x}"))),
        },
        Term::Real(_) => Ok(Judgment {
            ty: TypeExpr::Real(Coeffect::N),
            eff: Effect::Det,
        }),
        Term::Abs {
            param,
            annot: Some(ty),
            body,
        } => {
            env.push(param, ty.clone());
            let jb = infer_type(env, body);
            env.pop();
            let jb = jb?;
            Ok(Judgment {
                ty: TypeExpr::arrow(ty.clone(), jb.eff, jb.ty),
                eff: Effect::Det,
            })
        }
        Term::Abs { annot: None, .. } => Err(type_err(
            "T-Abs",
            "unannotated lambda outside of let position",
        )),
        Term::App(f, a) => {
            // A let-introduced binder takes the synthesized type of the
            // bound term as its annotation.
            if let Term::Abs {
                param,
                annot: None,
                body,
            } = &**f
            {
                let ja = infer_type(env, a)?;
                env.push(param, ja.ty);
                let jb = infer_type(env, body);
                env.pop();
                let jb = jb?;
                return Ok(Judgment {
                    ty: jb.ty,
                    eff: ja.eff.max(jb.eff),
                });
            }
            let jf = infer_type(env, f)?;
            let ja = infer_type(env, a)?;
            match jf.ty {
                TypeExpr::Arrow(param, arrow_eff, result) => {
                    if !subtype(&ja.ty, &param) {
                        return Err(TypeError {
                            rule: "T-App",
                            message: "argument type mismatch".into(),
                            expected: Some(*param),
                            found: Some(ja.ty),
                        });
                    }
                    Ok(Judgment {
                        ty: *result,
                        eff: jf.eff.max(ja.eff).max(arrow_eff),
                    })
                }
                other => Err(TypeError {
                    rule: "T-App",
                    message: "application of a non-function".into(),
                    expected: None,
                    found: Some(other),
                }),
            }
        }
        Term::Prim(p, args) => {
            let (params, result) = prim_sig(p);
            if params.len() != args.len() {
                return Err(type_err(
                    "T-PrimApp",
                    format!(
                        "primitive expects {} argument(s), found {}",
                        params.len(),
                        args.len()
                    ),
                ));
            }
            let mut eff = Effect::Det;
            for (arg, want) in args.iter().zip(&params) {
                let ja = infer_type(env, arg)?;
                if !subtype(&ja.ty, want) {
                    return Err(TypeError {
                        rule: "T-PrimApp",
                        message: "primitive argument type mismatch".into(),
                        expected: Some(want.clone()),
                        found: Some(ja.ty),
                    });
                }
                eff = eff.max(ja.eff);
            }
            Ok(Judgment { ty: result, eff })
        }
        Term::Tuple(es) => {
            let mut eff = Effect::Det;
            let mut tys = Vec::with_capacity(es.len());
            for e in es {
                let j = infer_type(env, e)?;
                eff = eff.max(j.eff);
                tys.push(j.ty);
            }
            Ok(Judgment {
                ty: TypeExpr::tuple(tys),
                eff,
            })
        }
        Term::Proj { index, tuple } => {
            let j = infer_type(env, tuple)?;
            match j.ty {
                TypeExpr::Tuple(es) => {
                    let i = *index as usize;
                    if i >= 1 && i <= es.len() {
                        Ok(Judgment {
                            ty: es[i - 1].clone(),
                            eff: j.eff,
                        })
                    } else {
                        Err(type_err(
                            "T-Proj",
                            format!("index {index} out of bounds for a {}-tuple", es.len()),
                        ))
                    }
                }
                // A 1-tuple is its element; .1 is the identity.
                other if *index == 1 => Ok(Judgment { ty: other, eff: j.eff }),
                other => Err(TypeError {
                    rule: "T-Proj",
                    message: format!("projection .{index} of a non-tuple"),
                    expected: None,
                    found: Some(other),
                }),
            }
        }
        Term::If {
            cond,
            then_branch,
            else_branch,
        } => {
            let jc = infer_type(env, cond)?;
            if !subtype(&jc.ty, &TypeExpr::Real(Coeffect::P)) {
                return Err(TypeError {
                    rule: "T-If",
                    message: "comparand must be piecewise-analytic".into(),
                    expected: Some(TypeExpr::Real(Coeffect::P)),
                    found: Some(jc.ty),
                });
            }
            let jt = infer_type(env, then_branch)?;
            let je = infer_type(env, else_branch)?;
            let ty = join(&jt.ty, &je.ty).map_err(|mut e| {
                e.rule = "T-If";
                e.message = "branches have incompatible types".into();
                e
            })?;
            Ok(Judgment {
                ty,
                eff: jc.eff.max(jt.eff).max(je.eff),
            })
        }
        Term::DistCon(d, args) => {
            let (params, support) = dist_sig(*d);
            if params.len() != args.len() {
                return Err(type_err(
                    "T-PrimDist",
                    format!(
                        "distribution expects {} parameter(s), found {}",
                        params.len(),
                        args.len()
                    ),
                ));
            }
            let mut eff = Effect::Det;
            for (arg, want) in args.iter().zip(&params) {
                let ja = infer_type(env, arg)?;
                if !subtype(&ja.ty, want) {
                    return Err(TypeError {
                        rule: "T-PrimDist",
                        message: "distribution parameter type mismatch".into(),
                        expected: Some(want.clone()),
                        found: Some(ja.ty),
                    });
                }
                eff = eff.max(ja.eff);
            }
            Ok(Judgment {
                ty: TypeExpr::dist(support),
                eff,
            })
        }
        Term::Assume(inner) => {
            let j = infer_type(env, inner)?;
            match j.ty {
                TypeExpr::Dist(support) => Ok(Judgment {
                    ty: *support,
                    eff: Effect::Rnd,
                }),
                other => Err(TypeError {
                    rule: "T-Assume",
                    message: "assume of a non-distribution".into(),
                    expected: None,
                    found: Some(other),
                }),
            }
        }
        Term::Weight(inner) => {
            let j = infer_type(env, inner)?;
            if !subtype(&j.ty, &TypeExpr::Real(Coeffect::N)) {
                return Err(TypeError {
                    rule: "T-Weight",
                    message: "weight argument must be a real of fully non-differentiable type"
                        .into(),
                    expected: Some(TypeExpr::Real(Coeffect::N)),
                    found: Some(j.ty),
                });
            }
            Ok(Judgment {
                ty: TypeExpr::unit(),
                eff: Effect::Rnd,
            })
        }
        Term::Infer(f) => {
            let j = infer_type(env, f)?;
            match j.ty {
                TypeExpr::Arrow(param, _, result) if param.is_unit() => Ok(Judgment {
                    ty: TypeExpr::dist(*result),
                    eff: j.eff,
                }),
                other => Err(TypeError {
                    rule: "T-Infer",
                    message: "inference expects a random function from unit".into(),
                    expected: None,
                    found: Some(other),
                }),
            }
        }
        Term::Diff { mode, func, point } | Term::DerivFn { mode, func, point } => {
            type_diff(env, *mode, func, point)
        }
        Term::Solve { rhs, init, horizon } => type_solve(env, rhs, init, horizon),
    }
}

fn type_diff(
    env: &mut TypeEnv,
    mode: DiffMode,
    func: &Term,
    point: &Term,
) -> Result<Judgment, TypeError> {
    let d = mode.coeffect();
    let jf = infer_type(env, func)?;
    let (param, arrow_eff, result) = match jf.ty {
        TypeExpr::Arrow(p, e, r) => (*p, e, *r),
        other => {
            return Err(TypeError {
                rule: "T-Diff",
                message: "cannot differentiate a non-function".into(),
                expected: None,
                found: Some(other),
            })
        }
    };
    if arrow_eff != Effect::Det {
        return Err(type_err("T-Diff", "cannot differentiate random function"));
    }
    let param_cs = param.real_leaves().ok_or_else(|| TypeError {
        rule: "T-Diff",
        message: "function argument type is not real-shaped".into(),
        expected: None,
        found: Some(param.clone()),
    })?;
    if !param_cs.iter().all(|c| *c <= d) {
        return Err(TypeError {
            rule: "T-Diff",
            message: format!("function argument modifiers must not exceed {}", d),
            expected: Some(param.with_real_leaves(d)),
            found: Some(param.clone()),
        });
    }
    if result.real_leaves().is_none() {
        return Err(TypeError {
            rule: "T-Diff",
            message: "differentiated function must return reals".into(),
            expected: None,
            found: Some(result),
        });
    }
    let jp = infer_type(env, point)?;
    let point_target = param.with_real_leaves(d);
    if !subtype(&jp.ty, &point_target) {
        return Err(TypeError {
            rule: "T-Diff",
            message: "differentiation point type mismatch".into(),
            expected: Some(point_target),
            found: Some(jp.ty),
        });
    }
    Ok(Judgment {
        ty: TypeExpr::arrow(param.with_real_leaves(Coeffect::A), Effect::Det, result),
        eff: jf.eff.max(jp.eff),
    })
}

fn type_solve(
    env: &mut TypeEnv,
    rhs: &Term,
    init: &Term,
    horizon: &Term,
) -> Result<Judgment, TypeError> {
    let jr = infer_type(env, rhs)?;
    let (param, arrow_eff, result) = match jr.ty {
        TypeExpr::Arrow(p, e, r) => (*p, e, *r),
        other => {
            return Err(TypeError {
                rule: "T-Solve",
                message: "right-hand side must be a function of (time, state)".into(),
                expected: None,
                found: Some(other),
            })
        }
    };
    if arrow_eff != Effect::Det {
        return Err(type_err(
            "T-Solve",
            "right-hand side must be deterministic",
        ));
    }
    let (time_ty, state_ty) = match &param {
        TypeExpr::Tuple(es) if es.len() == 2 => (es[0].clone(), es[1].clone()),
        other => {
            return Err(TypeError {
                rule: "T-Solve",
                message: "right-hand side parameter must be a (time, state) pair".into(),
                expected: None,
                found: Some(other.clone()),
            })
        }
    };
    let time_c = match time_ty {
        TypeExpr::Real(c) => c,
        other => {
            return Err(TypeError {
                rule: "T-Solve",
                message: "time component must be a real".into(),
                expected: None,
                found: Some(other),
            })
        }
    };
    if state_ty.real_leaves().is_none() || !state_ty.same_real_shape(&result) {
        return Err(TypeError {
            rule: "T-Solve",
            message: "right-hand side output shape must match the state".into(),
            expected: Some(state_ty),
            found: Some(result),
        });
    }
    let ji = infer_type(env, init)?;
    if !ji.ty.same_real_shape(&state_ty) {
        return Err(TypeError {
            rule: "T-Solve",
            message: "initial value shape must match the state".into(),
            expected: Some(state_ty),
            found: Some(ji.ty),
        });
    }
    let jh = infer_type(env, horizon)?;
    let horizon_c = match jh.ty {
        TypeExpr::Real(c) => c,
        other => {
            return Err(TypeError {
                rule: "T-Solve",
                message: "end time must be a real".into(),
                expected: Some(TypeExpr::Real(Coeffect::P)),
                found: Some(other),
            })
        }
    };
    // There must be a time modifier c with max(P, param time) <= c <= the
    // end time's modifier.
    if !(Coeffect::P <= horizon_c && time_c <= horizon_c) {
        return Err(TypeError {
            rule: "T-Solve",
            message: "end time must be typed piecewise-analytic or below the right-hand side's time"
                .into(),
            expected: Some(TypeExpr::Real(Coeffect::P.max(time_c))),
            found: Some(TypeExpr::Real(horizon_c)),
        });
    }
    let out = solve_state_type(&state_ty, &result, &ji.ty)?;
    Ok(Judgment {
        ty: out,
        eff: jr.eff.max(ji.eff).max(jh.eff),
    })
}

/// Per-leaf solution modifiers: the largest cv with `state <= cv <= min(rhs
/// output, initial value)`, failing when the state parameter demands more
/// than the outputs provide.
fn solve_state_type(
    state: &TypeExpr,
    out: &TypeExpr,
    init: &TypeExpr,
) -> Result<TypeExpr, TypeError> {
    match (state, out, init) {
        (TypeExpr::Real(a), TypeExpr::Real(b), TypeExpr::Real(g)) => {
            let cv = (*b).min(*g);
            if *a <= cv {
                Ok(TypeExpr::Real(cv))
            } else {
                Err(TypeError {
                    rule: "T-Solve",
                    message: "state modifiers are incompatible with the outputs".into(),
                    expected: Some(TypeExpr::Real(*a)),
                    found: Some(TypeExpr::Real(cv)),
                })
            }
        }
        (TypeExpr::Tuple(xs), TypeExpr::Tuple(ys), TypeExpr::Tuple(zs))
            if xs.len() == ys.len() && ys.len() == zs.len() =>
        {
            Ok(TypeExpr::Tuple(
                xs.iter()
                    .zip(ys)
                    .zip(zs)
                    .map(|((x, y), z)| solve_state_type(x, y, z))
                    .collect::<Result<_, _>>()?,
            ))
        }
        _ => Err(type_err("T-Solve", "state shape mismatch")),
    }
}
