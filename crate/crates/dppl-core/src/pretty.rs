//! Precedence-aware printer for terms and types. Re-sugars `let` (and its
//! sequencing special case), so parsing a printed corpus program yields the
//! original tree.
//!
//! Runtime-only forms (tangent-carrying reals, derivative closures,
//! non-canonical Wiener realizations) print in a readable but non-parseable
//! shape; they only show up in traces.

use crate::ad::Dual;
use crate::ast::{DiffMode, PrimDist, PrimFn, Term, TypeExpr};

const PREC_TERM: u8 = 0;
const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_APP: u8 = 3;
const PREC_ATOM: u8 = 4;

pub fn pretty(t: &Term) -> String {
    let mut out = String::new();
    term(t, PREC_TERM, &mut out);
    out
}

pub fn pretty_type(ty: &TypeExpr) -> String {
    let mut out = String::new();
    type_at(ty, false, &mut out);
    out
}

fn paren(cond: bool, out: &mut String, inner: impl FnOnce(&mut String)) {
    if cond {
        out.push('(');
        inner(out);
        out.push(')');
    } else {
        inner(out);
    }
}

fn term(t: &Term, prec: u8, out: &mut String) {
    match t {
        Term::Var(x) => out.push_str(x),
        Term::Real(d) => real(d, out),
        Term::Tuple(es) => {
            out.push('(');
            for (i, e) in es.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                term(e, PREC_TERM, out);
            }
            out.push(')');
        }
        Term::App(f, a) => {
            // let / sequencing re-sugar
            if let Term::Abs { param, annot, body } = &**f {
                paren(prec > PREC_TERM, out, |out| {
                    if param == "_" && annot.is_none() {
                        term(a, PREC_ADD, out);
                        out.push_str("; ");
                        term(body, PREC_TERM, out);
                    } else {
                        out.push_str("let ");
                        out.push_str(param);
                        if let Some(ty) = annot {
                            out.push_str(": ");
                            type_at(ty, false, out);
                        }
                        out.push_str(" = ");
                        term(a, PREC_TERM, out);
                        out.push_str(" in ");
                        term(body, PREC_TERM, out);
                    }
                });
            } else {
                paren(prec > PREC_APP, out, |out| {
                    term(f, PREC_APP, out);
                    out.push(' ');
                    term(a, PREC_ATOM, out);
                });
            }
        }
        Term::Abs { param, annot, body } => paren(prec > PREC_TERM, out, |out| {
            out.push_str("lam ");
            out.push_str(param);
            if let Some(ty) = annot {
                out.push_str(": ");
                type_at(ty, false, out);
            }
            out.push_str(". ");
            term(body, PREC_TERM, out);
        }),
        Term::Prim(p, args) => prim(p, args, prec, out),
        Term::Proj { index, tuple } => {
            term(tuple, PREC_ATOM, out);
            out.push('.');
            out.push_str(&index.to_string());
        }
        Term::If {
            cond,
            then_branch,
            else_branch,
        } => paren(prec > PREC_TERM, out, |out| {
            out.push_str("if ");
            term(cond, PREC_TERM, out);
            out.push_str(" then ");
            term(then_branch, PREC_TERM, out);
            out.push_str(" else ");
            term(else_branch, PREC_TERM, out);
        }),
        Term::DistCon(d, params) => {
            out.push_str(match d {
                PrimDist::Gaussian => "Gaussian",
                PrimDist::Beta => "Beta",
                PrimDist::WienerProcess => "Wiener",
            });
            out.push('(');
            for (i, p) in params.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                term(p, PREC_TERM, out);
            }
            out.push(')');
        }
        Term::Assume(a) => keyword1("assume", a, prec, out),
        Term::Weight(a) => keyword1("weight", a, prec, out),
        Term::Infer(a) => keyword1("infer", a, prec, out),
        Term::Diff { mode, func, point } => paren(prec > PREC_TERM, out, |out| {
            out.push_str(diff_kw(*mode, false));
            out.push(' ');
            term(func, PREC_ATOM, out);
            out.push(' ');
            term(point, PREC_ATOM, out);
        }),
        Term::DerivFn { mode, func, point } => paren(prec > PREC_TERM, out, |out| {
            out.push_str(diff_kw(*mode, true));
            out.push(' ');
            term(func, PREC_ATOM, out);
            out.push(' ');
            term(point, PREC_ATOM, out);
        }),
        Term::Solve { rhs, init, horizon } => paren(prec > PREC_TERM, out, |out| {
            out.push_str("solve ");
            term(rhs, PREC_ATOM, out);
            out.push(' ');
            term(init, PREC_ATOM, out);
            out.push(' ');
            term(horizon, PREC_ATOM, out);
        }),
    }
}

fn diff_kw(mode: DiffMode, reduced: bool) -> &'static str {
    match (mode, reduced) {
        (DiffMode::Analytic, false) => "diffA",
        (DiffMode::Pap, false) => "diffP",
        (DiffMode::Analytic, true) => "diff'A",
        (DiffMode::Pap, true) => "diff'P",
    }
}

fn keyword1(kw: &str, arg: &Term, prec: u8, out: &mut String) {
    paren(prec > PREC_TERM, out, |out| {
        out.push_str(kw);
        out.push(' ');
        term(arg, PREC_ATOM, out);
    });
}

fn prim(p: &PrimFn, args: &[std::sync::Arc<Term>], prec: u8, out: &mut String) {
    let infix = |sym: &str, level: u8, out: &mut String| {
        paren(prec > level, out, |out| {
            term(&args[0], level, out);
            out.push(' ');
            out.push_str(sym);
            out.push(' ');
            term(&args[1], level + 1, out);
        });
    };
    match p {
        PrimFn::Add => infix("+", PREC_ADD, out),
        PrimFn::Sub => infix("-", PREC_ADD, out),
        PrimFn::Mul => infix("*", PREC_MUL, out),
        PrimFn::Div => infix("/", PREC_MUL, out),
        PrimFn::Sin | PrimFn::Cos | PrimFn::PdfGaussian | PrimFn::PdfBeta | PrimFn::Wiener(_) => {
            match p {
                PrimFn::Sin => out.push_str("sin"),
                PrimFn::Cos => out.push_str("cos"),
                PrimFn::PdfGaussian => out.push_str("pdfGaussian"),
                PrimFn::PdfBeta => out.push_str("pdfBeta"),
                PrimFn::Wiener(h) => {
                    out.push_str("wiener");
                    if h.index() != 0.0 {
                        // Non-canonical realization; trace-only form.
                        out.push_str(&format!("[{}]", h.index()));
                    }
                }
                _ => unreachable!(),
            }
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                term(a, PREC_TERM, out);
            }
            out.push(')');
        }
    }
}

fn real(d: &Dual, out: &mut String) {
    match d {
        Dual::Const(r) => {
            // f64 Display round-trips and never uses exponent notation, so
            // the printed literal re-parses to the same value.
            if *r == r.trunc() && r.abs() < 1e15 {
                out.push_str(&format!("{r:.1}"));
            } else {
                out.push_str(&format!("{r}"));
            }
        }
        Dual::Tagged { .. } => {
            // Tangent-carrying reals only exist transiently inside diff.
            out.push_str(&format!("{}~", d.value()));
        }
    }
}

fn type_at(ty: &TypeExpr, arrow_lhs: bool, out: &mut String) {
    match ty {
        TypeExpr::Real(c) => out.push_str(&format!("Real{c}")),
        TypeExpr::Tuple(es) => {
            out.push('(');
            for (i, e) in es.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                type_at(e, false, out);
            }
            out.push(')');
        }
        TypeExpr::Dist(s) => {
            out.push_str("Dist ");
            // btype position: parenthesize arrows
            type_at(s, true, out);
        }
        TypeExpr::Arrow(a, e, r) => paren(arrow_lhs, out, |out| {
            type_at(a, true, out);
            out.push_str(match e {
                crate::ast::Effect::Det => " ->det ",
                crate::ast::Effect::Rnd => " ->rnd ",
            });
            type_at(r, false, out);
        }),
    }
}
