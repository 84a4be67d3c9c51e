//! Shared test machinery: a deterministic generator of well-typed closed
//! terms, an independent expression oracle for finite-difference checks,
//! and small helpers used by the theorem and acceptance suites.

use std::sync::Arc;

use dppl_core::ast::{PrimFn, Term, TermRef, TypeExpr};
use dppl_core::eval::EvalConfig;
use dppl_core::ode::{OdeConfig, OdeMethod};
use dppl_core::parser::let_term;
use dppl_core::typer::{check_program, Judgment};
use dppl_core::Coeffect;

// ── Deterministic RNG (splitmix64) ────────────────────────────────────

pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Rng {
        Rng(seed.wrapping_mul(0x9e3779b97f4a7c15) ^ 0x5eed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
}

/// Evaluation configuration used by the generated-term suites: cheap ODE
/// steps and few particles keep a single run far below the step budget.
pub fn test_config() -> EvalConfig {
    EvalConfig {
        ode: OdeConfig {
            method: OdeMethod::Rk4,
            step: 1e-2,
        },
        particles: 20,
        master_seed: 0xfeed,
        parallel: false,
        fuel: Some(100_000),
    }
}

// ── Well-typed term generator ─────────────────────────────────────────

struct GenCtx {
    rng: Rng,
    vars: Vec<(String, TypeExpr)>,
    fresh: u32,
}

impl GenCtx {
    fn fresh_name(&mut self) -> String {
        self.fresh += 1;
        format!("g{}", self.fresh)
    }

    fn lit(&mut self) -> TermRef {
        Term::real((self.rng.range(-2.0, 2.0) * 100.0).round() / 100.0)
    }

    fn pos_lit(&mut self) -> TermRef {
        Term::real((self.rng.range(0.2, 2.5) * 100.0).round() / 100.0)
    }

    fn real_var(&mut self) -> Option<TermRef> {
        let reals: Vec<&String> = self
            .vars
            .iter()
            .filter(|(_, t)| matches!(t, TypeExpr::Real(_)))
            .map(|(n, _)| n)
            .collect();
        if reals.is_empty() {
            None
        } else {
            let i = self.rng.below(reals.len() as u64) as usize;
            Some(Term::var(reals[i]))
        }
    }

    fn leaf(&mut self) -> TermRef {
        if self.rng.below(10) < 4 {
            if let Some(v) = self.real_var() {
                return v;
            }
        }
        self.lit()
    }

    /// A random real-valued candidate; well-typedness is enforced by the
    /// caller re-running the checker and retrying.
    fn real_term(&mut self, depth: u32) -> TermRef {
        if depth == 0 {
            return self.leaf();
        }
        match self.rng.below(100) {
            0..=19 => {
                let op = match self.rng.below(4) {
                    0 => PrimFn::Add,
                    1 => PrimFn::Sub,
                    2 => PrimFn::Mul,
                    _ => PrimFn::Div,
                };
                Arc::new(Term::Prim(
                    op,
                    vec![self.real_term(depth - 1), self.real_term(depth - 1)],
                ))
            }
            20..=27 => {
                let op = if self.rng.below(2) == 0 {
                    PrimFn::Sin
                } else {
                    PrimFn::Cos
                };
                Arc::new(Term::Prim(op, vec![self.real_term(depth - 1)]))
            }
            28..=37 => {
                // let x = t1 in t2 (annotation synthesized by the typer)
                let name = self.fresh_name();
                let bound = self.real_term(depth - 1);
                self.vars.push((name.clone(), TypeExpr::Real(Coeffect::N)));
                let body = self.real_term(depth - 1);
                self.vars.pop();
                let_term(&name, None, bound, body)
            }
            38..=45 => Arc::new(Term::If {
                cond: self.real_term(depth - 1),
                then_branch: self.real_term(depth - 1),
                else_branch: self.real_term(depth - 1),
            }),
            46..=52 => {
                let a = self.real_term(depth - 1);
                let b = self.real_term(depth - 1);
                let index = 1 + self.rng.below(2) as u32;
                Arc::new(Term::Proj {
                    index,
                    tuple: Arc::new(Term::Tuple(vec![a, b])),
                })
            }
            53..=60 => {
                // immediate application of an annotated lambda
                let c = match self.rng.below(3) {
                    0 => Coeffect::A,
                    1 => Coeffect::P,
                    _ => Coeffect::N,
                };
                let name = self.fresh_name();
                self.vars.push((name.clone(), TypeExpr::Real(c)));
                let body = self.real_term(depth - 1);
                self.vars.pop();
                let f = Arc::new(Term::Abs {
                    param: name,
                    annot: Some(TypeExpr::Real(c)),
                    body,
                });
                Arc::new(Term::App(f, self.real_term(depth - 1)))
            }
            61..=69 => self.assume_term(depth),
            70..=74 => {
                // weight w; t
                let w = self.pos_lit();
                let_term(
                    "_",
                    None,
                    Arc::new(Term::Weight(w)),
                    self.real_term(depth - 1),
                )
            }
            75..=81 => self.diff_term(depth),
            82..=87 => self.solve_term(),
            88..=93 => {
                // assume (infer model): nested inference
                Arc::new(Term::Assume(self.infer_term(depth)))
            }
            _ => self.leaf(),
        }
    }

    fn assume_term(&mut self, _depth: u32) -> TermRef {
        let dist = if self.rng.below(2) == 0 {
            Term::DistCon(
                dppl_core::PrimDist::Gaussian,
                vec![self.lit(), self.pos_lit()],
            )
        } else {
            Term::DistCon(
                dppl_core::PrimDist::Beta,
                vec![self.pos_lit(), self.pos_lit()],
            )
        };
        Arc::new(Term::Assume(Arc::new(dist)))
    }

    /// diff1 of a generated analytic/PAP body applied at a literal point.
    fn diff_term(&mut self, depth: u32) -> TermRef {
        let mode = if self.rng.below(2) == 0 {
            dppl_core::DiffMode::Analytic
        } else {
            dppl_core::DiffMode::Pap
        };
        let name = self.fresh_name();
        let annot = TypeExpr::Real(mode.coeffect());
        // Body over the differentiation variable only, drawn from the
        // smooth fragment (plus branching for the PAP case).
        let saved = std::mem::take(&mut self.vars);
        self.vars.push((name.clone(), annot.clone()));
        let body = self.smooth_term(depth.min(3), mode == dppl_core::DiffMode::Pap);
        self.vars = saved;
        let f = Arc::new(Term::Abs {
            param: name,
            annot: Some(annot),
            body,
        });
        Arc::new(Term::App(
            Arc::new(Term::Diff {
                mode,
                func: f,
                point: self.lit(),
            }),
            Term::real(1.0),
        ))
    }

    fn smooth_term(&mut self, depth: u32, allow_if: bool) -> TermRef {
        if depth == 0 {
            return self.leaf();
        }
        match self.rng.below(10) {
            0..=3 => {
                let op = match self.rng.below(3) {
                    0 => PrimFn::Add,
                    1 => PrimFn::Sub,
                    _ => PrimFn::Mul,
                };
                Arc::new(Term::Prim(
                    op,
                    vec![
                        self.smooth_term(depth - 1, allow_if),
                        self.smooth_term(depth - 1, allow_if),
                    ],
                ))
            }
            4..=5 => {
                let op = if self.rng.below(2) == 0 {
                    PrimFn::Sin
                } else {
                    PrimFn::Cos
                };
                Arc::new(Term::Prim(op, vec![self.smooth_term(depth - 1, allow_if)]))
            }
            6 if allow_if => Arc::new(Term::If {
                cond: self.smooth_term(depth - 1, allow_if),
                then_branch: self.smooth_term(depth - 1, allow_if),
                else_branch: self.smooth_term(depth - 1, allow_if),
            }),
            _ => self.leaf(),
        }
    }

    /// solve of a linear right-hand side over a short horizon.
    fn solve_term(&mut self) -> TermRef {
        let a = self.rng.range(-1.0, 1.0);
        let b = self.rng.range(-1.0, 1.0);
        let src = format!(
            "solve (lam p: (RealP, RealA). {} * p.2 + {}) {} {}",
            fmt_lit(a),
            fmt_lit(b),
            fmt_lit(self.rng.range(-1.0, 1.0)),
            fmt_lit(self.rng.range(0.0, 0.5)),
        );
        dppl_core::parser::parse_str(&src).unwrap()
    }

    fn infer_term(&mut self, depth: u32) -> TermRef {
        let saved = std::mem::take(&mut self.vars);
        let body = match self.rng.below(3) {
            0 => self.assume_term(depth),
            1 => {
                let name = self.fresh_name();
                self.vars.push((name.clone(), TypeExpr::Real(Coeffect::N)));
                let rest = self.real_term(2);
                self.vars.pop();
                let_term(&name, None, self.assume_term(depth), rest)
            }
            _ => {
                let w = self.pos_lit();
                let_term(
                    "_",
                    None,
                    Arc::new(Term::Weight(w)),
                    self.assume_term(depth),
                )
            }
        };
        self.vars = saved;
        Arc::new(Term::Infer(Arc::new(Term::Abs {
            param: "u".into(),
            annot: Some(TypeExpr::unit()),
            body,
        })))
    }
}

fn fmt_lit(x: f64) -> String {
    let r = (x * 1000.0).round() / 1000.0;
    // There are no negative literals (and no unary minus); subtract from
    // zero instead. Normalizing through == also rewrites -0.0.
    if r == 0.0 {
        "0.0".to_string()
    } else if r < 0.0 {
        format!("(0.0 - {})", -r)
    } else {
        format!("{r:?}")
    }
}

/// Generate `count` well-typed closed terms (depth <= 6) with their
/// judgments, deterministically from `seed`. Candidates that fail the
/// checker are discarded and regenerated.
pub fn generate_well_typed(seed: u64, count: usize) -> Vec<(TermRef, Judgment)> {
    let mut ctx = GenCtx {
        rng: Rng::new(seed),
        vars: Vec::new(),
        fresh: 0,
    };
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0u64;
    while out.len() < count {
        attempts += 1;
        assert!(
            attempts < (count as u64) * 200,
            "term generator acceptance rate collapsed"
        );
        let depth = 2 + ctx.rng.below(5) as u32;
        let t = match ctx.rng.below(12) {
            0 => ctx.infer_term(depth),
            1 => Arc::new(Term::Tuple(vec![
                ctx.real_term(depth.saturating_sub(1)),
                ctx.real_term(depth.saturating_sub(1)),
            ])),
            _ => ctx.real_term(depth),
        };
        ctx.vars.clear();
        if let Ok(j) = check_program(&t, true) {
            out.push((t, j));
        }
    }
    out
}

/// Consistent renaming of all binders (alpha conversion).
pub fn alpha_rename(t: &TermRef) -> TermRef {
    fn go(t: &TermRef, map: &mut Vec<(String, String)>, fresh: &mut u32) -> TermRef {
        use Term::*;
        let rec1 = |t: &TermRef, map: &mut Vec<(String, String)>, fresh: &mut u32| go(t, map, fresh);
        Arc::new(match &**t {
            Var(x) => Var(map
                .iter()
                .rev()
                .find(|(a, _)| a == x)
                .map(|(_, b)| b.clone())
                .unwrap_or_else(|| x.clone())),
            Abs { param, annot, body } => {
                *fresh += 1;
                let renamed = format!("r{fresh}");
                map.push((param.clone(), renamed.clone()));
                let body = rec1(body, map, fresh);
                map.pop();
                Abs {
                    param: renamed,
                    annot: annot.clone(),
                    body,
                }
            }
            App(f, a) => App(rec1(f, map, fresh), rec1(a, map, fresh)),
            Prim(p, es) => Prim(
                p.clone(),
                es.iter().map(|e| rec1(e, map, fresh)).collect(),
            ),
            Real(d) => Real(d.clone()),
            Tuple(es) => Tuple(es.iter().map(|e| rec1(e, map, fresh)).collect()),
            Proj { index, tuple } => Proj {
                index: *index,
                tuple: rec1(tuple, map, fresh),
            },
            If {
                cond,
                then_branch,
                else_branch,
            } => If {
                cond: rec1(cond, map, fresh),
                then_branch: rec1(then_branch, map, fresh),
                else_branch: rec1(else_branch, map, fresh),
            },
            DistCon(d, es) => DistCon(*d, es.iter().map(|e| rec1(e, map, fresh)).collect()),
            Assume(a) => Assume(rec1(a, map, fresh)),
            Weight(a) => Weight(rec1(a, map, fresh)),
            Infer(a) => Infer(rec1(a, map, fresh)),
            Diff { mode, func, point } => Diff {
                mode: *mode,
                func: rec1(func, map, fresh),
                point: rec1(point, map, fresh),
            },
            Solve { rhs, init, horizon } => Solve {
                rhs: rec1(rhs, map, fresh),
                init: rec1(init, map, fresh),
                horizon: rec1(horizon, map, fresh),
            },
            DerivFn { mode, func, point } => DerivFn {
                mode: *mode,
                func: rec1(func, map, fresh),
                point: rec1(point, map, fresh),
            },
        })
    }
    go(t, &mut Vec::new(), &mut 0)
}

// ── Independent smooth-expression oracle for finite differences ────────

/// A tiny expression language over one variable, evaluated by a separate
/// tree walk so the finite-difference oracle never touches the interpreter.
#[derive(Debug, Clone)]
pub enum Sx {
    X,
    Lit(f64),
    Add(Box<Sx>, Box<Sx>),
    Sub(Box<Sx>, Box<Sx>),
    Mul(Box<Sx>, Box<Sx>),
    Div(Box<Sx>, Box<Sx>),
    Sin(Box<Sx>),
    Cos(Box<Sx>),
}

impl Sx {
    /// Evaluate, tracking the smallest |denominator| and largest |value|
    /// encountered (for rejecting near-singular cases).
    pub fn eval(&self, x: f64, min_den: &mut f64, max_abs: &mut f64) -> f64 {
        let v = match self {
            Sx::X => x,
            Sx::Lit(c) => *c,
            Sx::Add(a, b) => a.eval(x, min_den, max_abs) + b.eval(x, min_den, max_abs),
            Sx::Sub(a, b) => a.eval(x, min_den, max_abs) - b.eval(x, min_den, max_abs),
            Sx::Mul(a, b) => a.eval(x, min_den, max_abs) * b.eval(x, min_den, max_abs),
            Sx::Div(a, b) => {
                let num = a.eval(x, min_den, max_abs);
                let den = b.eval(x, min_den, max_abs);
                *min_den = min_den.min(den.abs());
                num / den
            }
            Sx::Sin(a) => a.eval(x, min_den, max_abs).sin(),
            Sx::Cos(a) => a.eval(x, min_den, max_abs).cos(),
        };
        *max_abs = max_abs.max(v.abs());
        v
    }

    pub fn to_source(&self) -> String {
        match self {
            Sx::X => "x".into(),
            Sx::Lit(c) => fmt_lit(*c),
            Sx::Add(a, b) => format!("({} + {})", a.to_source(), b.to_source()),
            Sx::Sub(a, b) => format!("({} - {})", a.to_source(), b.to_source()),
            Sx::Mul(a, b) => format!("({} * {})", a.to_source(), b.to_source()),
            Sx::Div(a, b) => format!("({} / {})", a.to_source(), b.to_source()),
            Sx::Sin(a) => format!("sin({})", a.to_source()),
            Sx::Cos(a) => format!("cos({})", a.to_source()),
        }
    }
}

pub fn gen_sx(rng: &mut Rng, depth: u32) -> Sx {
    if depth == 0 {
        return if rng.below(2) == 0 {
            Sx::X
        } else {
            Sx::Lit((rng.range(-2.0, 2.0) * 100.0).round() / 100.0)
        };
    }
    match rng.below(12) {
        0..=2 => Sx::Add(Box::new(gen_sx(rng, depth - 1)), Box::new(gen_sx(rng, depth - 1))),
        3..=4 => Sx::Sub(Box::new(gen_sx(rng, depth - 1)), Box::new(gen_sx(rng, depth - 1))),
        5..=7 => Sx::Mul(Box::new(gen_sx(rng, depth - 1)), Box::new(gen_sx(rng, depth - 1))),
        8 => Sx::Div(Box::new(gen_sx(rng, depth - 1)), Box::new(gen_sx(rng, depth - 1))),
        9 => Sx::Sin(Box::new(gen_sx(rng, depth - 1))),
        10 => Sx::Cos(Box::new(gen_sx(rng, depth - 1))),
        _ => {
            if rng.below(2) == 0 {
                Sx::X
            } else {
                Sx::Lit((rng.range(-2.0, 2.0) * 100.0).round() / 100.0)
            }
        }
    }
}
