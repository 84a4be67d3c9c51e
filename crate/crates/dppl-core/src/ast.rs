//! Terms, types, modifiers, and the total order on closed values: the
//! shared vocabulary of every other module.
//!
//! Terms double as the runtime representation: reduction rewrites terms, so
//! the grammar carries a few value-only forms (duals inside `Real`, the
//! derivative closure `DerivFn`, Wiener realizations inside `PrimFn`) that
//! the parser never produces.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::ad::Dual;
use crate::dist::WienerHandle;

/// Differentiability coeffect on real types: analytic, piecewise analytic
/// under analytic partitioning, or non-differentiable. Totally ordered
/// `A < P < N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Coeffect {
    A,
    P,
    N,
}

/// Randomness effect on arrows and judgments, ordered `Det < Rnd`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Effect {
    Det,
    Rnd,
}

/// The modifier on `diff`: only analytic and piecewise-analytic functions
/// can be differentiated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DiffMode {
    Analytic,
    Pap,
}

impl DiffMode {
    pub fn coeffect(self) -> Coeffect {
        match self {
            DiffMode::Analytic => Coeffect::A,
            DiffMode::Pap => Coeffect::P,
        }
    }
}

/// Coeffect multiplication: the join of the order, `c1 · c2 = max(c1, c2)`.
/// `A` is the identity and `N` is absorbing.
pub fn coeff_mul(c1: Coeffect, c2: Coeffect) -> Coeffect {
    c1.max(c2)
}

/// `c ≤ τ`: true iff `c` is below the modifier of every real reachable
/// without crossing an arrow or distribution type.
pub fn coeff_le_type(c: Coeffect, ty: &TypeExpr) -> bool {
    match ty {
        TypeExpr::Real(c2) => c <= *c2,
        TypeExpr::Tuple(elems) => elems.iter().all(|t| coeff_le_type(c, t)),
        _ => true,
    }
}

/// `c · τ`: multiplies `c` onto every real modifier reachable without
/// crossing an arrow or distribution type.
pub fn promote_type(c: Coeffect, ty: &TypeExpr) -> TypeExpr {
    match ty {
        TypeExpr::Real(c2) => TypeExpr::Real(coeff_mul(c, *c2)),
        TypeExpr::Tuple(elems) => {
            TypeExpr::Tuple(elems.iter().map(|t| promote_type(c, t)).collect())
        }
        other => other.clone(),
    }
}

/// Types: reals with a coeffect modifier, effect-annotated arrows, tuples
/// (the empty tuple is unit), and distributions.
///
/// A 1-tuple is represented identically to its element; [`TypeExpr::tuple`]
/// maintains that invariant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TypeExpr {
    Real(Coeffect),
    Arrow(Box<TypeExpr>, Effect, Box<TypeExpr>),
    Tuple(Vec<TypeExpr>),
    Dist(Box<TypeExpr>),
}

impl TypeExpr {
    pub fn unit() -> TypeExpr {
        TypeExpr::Tuple(Vec::new())
    }

    /// Tuple constructor collapsing singletons onto their element.
    pub fn tuple(mut elems: Vec<TypeExpr>) -> TypeExpr {
        if elems.len() == 1 {
            elems.pop().unwrap()
        } else {
            TypeExpr::Tuple(elems)
        }
    }

    pub fn arrow(arg: TypeExpr, eff: Effect, res: TypeExpr) -> TypeExpr {
        TypeExpr::Arrow(Box::new(arg), eff, Box::new(res))
    }

    pub fn dist(support: TypeExpr) -> TypeExpr {
        TypeExpr::Dist(Box::new(support))
    }

    pub fn is_unit(&self) -> bool {
        matches!(self, TypeExpr::Tuple(es) if es.is_empty())
    }

    /// The coeffects of all real leaves in pre-order, or `None` if the type
    /// contains a non-real leaf (arrow or distribution).
    pub fn real_leaves(&self) -> Option<Vec<Coeffect>> {
        fn walk(ty: &TypeExpr, out: &mut Vec<Coeffect>) -> bool {
            match ty {
                TypeExpr::Real(c) => {
                    out.push(*c);
                    true
                }
                TypeExpr::Tuple(es) => es.iter().all(|t| walk(t, out)),
                _ => false,
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out).then_some(out)
    }

    /// Same tuple-tree shape, ignoring real modifiers. Used to pair states
    /// with their tangents and IVP right-hand sides with initial values.
    pub fn same_real_shape(&self, other: &TypeExpr) -> bool {
        match (self, other) {
            (TypeExpr::Real(_), TypeExpr::Real(_)) => true,
            (TypeExpr::Tuple(a), TypeExpr::Tuple(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_real_shape(y))
            }
            _ => false,
        }
    }

    /// Copy of the type with every real modifier replaced by `c`.
    pub fn with_real_leaves(&self, c: Coeffect) -> TypeExpr {
        match self {
            TypeExpr::Real(_) => TypeExpr::Real(c),
            TypeExpr::Tuple(es) => {
                TypeExpr::Tuple(es.iter().map(|t| t.with_real_leaves(c)).collect())
            }
            other => other.clone(),
        }
    }
}

/// Primitive distributions. Gaussian and Beta take two real parameters; the
/// Wiener process takes none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PrimDist {
    Gaussian,
    Beta,
    WienerProcess,
}

impl PrimDist {
    pub fn arity(self) -> usize {
        match self {
            PrimDist::Gaussian | PrimDist::Beta => 2,
            PrimDist::WienerProcess => 0,
        }
    }
}

/// Primitive functions. `Wiener` carries the realization it indexes; the
/// parser assigns the canonical realization and `assume Wiener()` draws
/// fresh ones from the seed.
#[derive(Debug, Clone, PartialEq)]
pub enum PrimFn {
    Add,
    Sub,
    Mul,
    Div,
    Sin,
    Cos,
    PdfGaussian,
    PdfBeta,
    Wiener(WienerHandle),
}

impl PrimFn {
    pub fn arity(&self) -> usize {
        match self {
            PrimFn::Add | PrimFn::Sub | PrimFn::Mul | PrimFn::Div => 2,
            PrimFn::Sin | PrimFn::Cos | PrimFn::Wiener(_) => 1,
            PrimFn::PdfGaussian | PrimFn::PdfBeta => 3,
        }
    }
}

pub type TermRef = Arc<Term>;

/// Core terms after desugaring, plus the runtime-only forms `Real` duals
/// and `DerivFn` (the value a `diff` redex steps to).
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Var(String),
    /// `annot` is `None` only for binders introduced by `let` without a
    /// type annotation; the typer fills it from the bound term.
    Abs {
        param: String,
        annot: Option<TypeExpr>,
        body: TermRef,
    },
    App(TermRef, TermRef),
    Prim(PrimFn, Vec<TermRef>),
    Real(Dual),
    Tuple(Vec<TermRef>),
    /// 1-based projection. Index 1 on a non-tuple value is the identity,
    /// matching the convention that a 1-tuple is its element.
    Proj {
        index: u32,
        tuple: TermRef,
    },
    If {
        cond: TermRef,
        then_branch: TermRef,
        else_branch: TermRef,
    },
    DistCon(PrimDist, Vec<TermRef>),
    Assume(TermRef),
    Weight(TermRef),
    Infer(TermRef),
    Diff {
        mode: DiffMode,
        func: TermRef,
        point: TermRef,
    },
    Solve {
        rhs: TermRef,
        init: TermRef,
        horizon: TermRef,
    },
    /// Runtime derivative closure produced by reducing `diff`; applying it
    /// to a tangent runs the tagged forward pass.
    DerivFn {
        mode: DiffMode,
        func: TermRef,
        point: TermRef,
    },
}

impl Term {
    pub fn real(r: f64) -> TermRef {
        Arc::new(Term::Real(Dual::constant(r)))
    }

    pub fn unit() -> TermRef {
        Arc::new(Term::Tuple(Vec::new()))
    }

    pub fn var(name: &str) -> TermRef {
        Arc::new(Term::Var(name.to_string()))
    }
}

/// Values per the small-step semantics: lambdas, reals, tuples of values,
/// distribution constructors over values, `infer` of a value, and the
/// runtime derivative closure.
pub fn is_value(t: &Term) -> bool {
    match t {
        Term::Abs { .. } | Term::Real(_) | Term::DerivFn { .. } => true,
        Term::Tuple(es) | Term::DistCon(_, es) => es.iter().all(|e| is_value(e)),
        Term::Infer(f) => is_value(f),
        _ => false,
    }
}

/// Capture-avoiding substitution of a closed value for a variable. Returns
/// `None` when the variable does not occur, so unchanged subtrees are
/// shared.
fn subst_opt(t: &TermRef, x: &str, v: &TermRef) -> Option<TermRef> {
    let rebuild1 = |child: &TermRef, f: &dyn Fn(TermRef) -> Term| {
        subst_opt(child, x, v).map(|c| Arc::new(f(c)))
    };
    match &**t {
        Term::Var(y) => (y == x).then(|| v.clone()),
        Term::Abs { param, annot, body } => {
            if param == x {
                None
            } else {
                subst_opt(body, x, v).map(|b| {
                    Arc::new(Term::Abs {
                        param: param.clone(),
                        annot: annot.clone(),
                        body: b,
                    })
                })
            }
        }
        Term::App(f, a) => {
            let (nf, na) = (subst_opt(f, x, v), subst_opt(a, x, v));
            if nf.is_none() && na.is_none() {
                None
            } else {
                Some(Arc::new(Term::App(
                    nf.unwrap_or_else(|| f.clone()),
                    na.unwrap_or_else(|| a.clone()),
                )))
            }
        }
        Term::Prim(p, args) => {
            subst_vec(args, x, v).map(|args| Arc::new(Term::Prim(p.clone(), args)))
        }
        Term::Real(_) => None,
        Term::Tuple(es) => subst_vec(es, x, v).map(|es| Arc::new(Term::Tuple(es))),
        Term::Proj { index, tuple } => rebuild1(tuple, &|c| Term::Proj {
            index: *index,
            tuple: c,
        }),
        Term::If {
            cond,
            then_branch,
            else_branch,
        } => {
            let (nc, nt, ne) = (
                subst_opt(cond, x, v),
                subst_opt(then_branch, x, v),
                subst_opt(else_branch, x, v),
            );
            if nc.is_none() && nt.is_none() && ne.is_none() {
                None
            } else {
                Some(Arc::new(Term::If {
                    cond: nc.unwrap_or_else(|| cond.clone()),
                    then_branch: nt.unwrap_or_else(|| then_branch.clone()),
                    else_branch: ne.unwrap_or_else(|| else_branch.clone()),
                }))
            }
        }
        Term::DistCon(d, es) => subst_vec(es, x, v).map(|es| Arc::new(Term::DistCon(*d, es))),
        Term::Assume(a) => rebuild1(a, &Term::Assume),
        Term::Weight(a) => rebuild1(a, &Term::Weight),
        Term::Infer(a) => rebuild1(a, &Term::Infer),
        Term::Diff { mode, func, point } => {
            let (nf, np) = (subst_opt(func, x, v), subst_opt(point, x, v));
            if nf.is_none() && np.is_none() {
                None
            } else {
                Some(Arc::new(Term::Diff {
                    mode: *mode,
                    func: nf.unwrap_or_else(|| func.clone()),
                    point: np.unwrap_or_else(|| point.clone()),
                }))
            }
        }
        Term::Solve { rhs, init, horizon } => {
            let (nr, ni, nh) = (
                subst_opt(rhs, x, v),
                subst_opt(init, x, v),
                subst_opt(horizon, x, v),
            );
            if nr.is_none() && ni.is_none() && nh.is_none() {
                None
            } else {
                Some(Arc::new(Term::Solve {
                    rhs: nr.unwrap_or_else(|| rhs.clone()),
                    init: ni.unwrap_or_else(|| init.clone()),
                    horizon: nh.unwrap_or_else(|| horizon.clone()),
                }))
            }
        }
        Term::DerivFn { mode, func, point } => {
            let (nf, np) = (subst_opt(func, x, v), subst_opt(point, x, v));
            if nf.is_none() && np.is_none() {
                None
            } else {
                Some(Arc::new(Term::DerivFn {
                    mode: *mode,
                    func: nf.unwrap_or_else(|| func.clone()),
                    point: np.unwrap_or_else(|| point.clone()),
                }))
            }
        }
    }
}

fn subst_vec(es: &[TermRef], x: &str, v: &TermRef) -> Option<Vec<TermRef>> {
    let news: Vec<Option<TermRef>> = es.iter().map(|e| subst_opt(e, x, v)).collect();
    if news.iter().all(Option::is_none) {
        None
    } else {
        Some(
            news.into_iter()
                .zip(es)
                .map(|(n, old)| n.unwrap_or_else(|| old.clone()))
                .collect(),
        )
    }
}

pub fn subst(t: &TermRef, x: &str, v: &TermRef) -> TermRef {
    debug_assert!(free_vars(v).is_empty(), "substituted values must be closed");
    subst_opt(t, x, v).unwrap_or_else(|| t.clone())
}

pub fn free_vars(t: &Term) -> BTreeSet<String> {
    fn walk(t: &Term, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match t {
            Term::Var(x) => {
                if !bound.iter().any(|b| b == x) {
                    out.insert(x.clone());
                }
            }
            Term::Abs { param, body, .. } => {
                bound.push(param.clone());
                walk(body, bound, out);
                bound.pop();
            }
            Term::App(a, b) => {
                walk(a, bound, out);
                walk(b, bound, out);
            }
            Term::Prim(_, es) | Term::Tuple(es) | Term::DistCon(_, es) => {
                for e in es {
                    walk(e, bound, out);
                }
            }
            Term::Real(_) => {}
            Term::Proj { tuple, .. } => walk(tuple, bound, out),
            Term::If {
                cond,
                then_branch,
                else_branch,
            } => {
                walk(cond, bound, out);
                walk(then_branch, bound, out);
                walk(else_branch, bound, out);
            }
            Term::Assume(a) | Term::Weight(a) | Term::Infer(a) => walk(a, bound, out),
            Term::Diff { func, point, .. } | Term::DerivFn { func, point, .. } => {
                walk(func, bound, out);
                walk(point, bound, out);
            }
            Term::Solve { rhs, init, horizon } => {
                walk(rhs, bound, out);
                walk(init, bound, out);
                walk(horizon, bound, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    walk(t, &mut Vec::new(), &mut out);
    out
}

// ── Total order on closed values ──────────────────────────────────────
//
// Closed terms are ordered by their de Bruijn skeleton (reals replaced by
// holes, constructors compared in a fixed order), then by the dictionary
// order on the vector of real literals. Wiener realizations compare by
// their index, as part of the skeleton.

fn cons_rank(t: &Term) -> u8 {
    match t {
        Term::Var(_) => 0,
        Term::Abs { .. } => 1,
        Term::App(..) => 2,
        Term::Prim(..) => 3,
        Term::Real(_) => 4,
        Term::Tuple(_) => 5,
        Term::Proj { .. } => 6,
        Term::If { .. } => 7,
        Term::DistCon(..) => 8,
        Term::Assume(_) => 9,
        Term::Weight(_) => 10,
        Term::Infer(_) => 11,
        Term::Diff { .. } => 12,
        Term::Solve { .. } => 13,
        Term::DerivFn { .. } => 14,
    }
}

fn prim_rank(p: &PrimFn) -> (u8, u64) {
    match p {
        PrimFn::Add => (0, 0),
        PrimFn::Sub => (1, 0),
        PrimFn::Mul => (2, 0),
        PrimFn::Div => (3, 0),
        PrimFn::Sin => (4, 0),
        PrimFn::Cos => (5, 0),
        PrimFn::PdfGaussian => (6, 0),
        PrimFn::PdfBeta => (7, 0),
        PrimFn::Wiener(h) => (8, h.index_bits()),
    }
}

fn children<'a>(t: &'a Term, out: &mut Vec<&'a TermRef>) {
    match t {
        Term::Var(_) | Term::Real(_) => {}
        Term::Abs { body, .. } => out.push(body),
        Term::App(a, b) => out.extend([a, b]),
        Term::Prim(_, es) | Term::Tuple(es) | Term::DistCon(_, es) => out.extend(es.iter()),
        Term::Proj { tuple, .. } => out.push(tuple),
        Term::If {
            cond,
            then_branch,
            else_branch,
        } => out.extend([cond, then_branch, else_branch]),
        Term::Assume(a) | Term::Weight(a) | Term::Infer(a) => out.push(a),
        Term::Diff { func, point, .. } | Term::DerivFn { func, point, .. } => {
            out.extend([func, point])
        }
        Term::Solve { rhs, init, horizon } => out.extend([rhs, init, horizon]),
    }
}

/// Head data compared before recursing into children: constructor rank plus
/// any non-real payload (de Bruijn index, annotation, projection index...).
fn cmp_head(a: &Term, b: &Term, da: &[String], db: &[String]) -> Ordering {
    let rank = cons_rank(a).cmp(&cons_rank(b));
    if rank != Ordering::Equal {
        return rank;
    }
    match (a, b) {
        (Term::Var(x), Term::Var(y)) => {
            let ix = da.iter().rev().position(|n| n == x);
            let iy = db.iter().rev().position(|n| n == y);
            match (ix, iy) {
                (Some(i), Some(j)) => i.cmp(&j),
                (Some(_), None) => Ordering::Less,
                (None, Some(_)) => Ordering::Greater,
                (None, None) => x.cmp(y),
            }
        }
        (Term::Abs { annot: a1, .. }, Term::Abs { annot: a2, .. }) => a1.cmp(a2),
        (Term::Prim(p, _), Term::Prim(q, _)) => prim_rank(p).cmp(&prim_rank(q)),
        (Term::Tuple(x), Term::Tuple(y)) => x.len().cmp(&y.len()),
        (Term::Proj { index: i, .. }, Term::Proj { index: j, .. }) => i.cmp(j),
        (Term::DistCon(d1, _), Term::DistCon(d2, _)) => d1.cmp(d2),
        (Term::Diff { mode: m1, .. }, Term::Diff { mode: m2, .. })
        | (Term::DerivFn { mode: m1, .. }, Term::DerivFn { mode: m2, .. }) => m1.cmp(m2),
        _ => Ordering::Equal,
    }
}

fn cmp_skeleton(a: &Term, b: &Term, da: &mut Vec<String>, db: &mut Vec<String>) -> Ordering {
    let head = cmp_head(a, b, da, db);
    if head != Ordering::Equal {
        return head;
    }
    let pushed = if let (Term::Abs { param: pa, .. }, Term::Abs { param: pb, .. }) = (a, b) {
        da.push(pa.clone());
        db.push(pb.clone());
        true
    } else {
        false
    };
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    children(a, &mut ca);
    children(b, &mut cb);
    let mut ord = ca.len().cmp(&cb.len());
    if ord == Ordering::Equal {
        for (x, y) in ca.iter().zip(&cb) {
            ord = cmp_skeleton(x, y, da, db);
            if ord != Ordering::Equal {
                break;
            }
        }
    }
    if pushed {
        da.pop();
        db.pop();
    }
    ord
}

fn collect_holes(t: &Term, out: &mut Vec<f64>) {
    if let Term::Real(d) = t {
        out.push(d.value());
    }
    let mut cs = Vec::new();
    children(t, &mut cs);
    for c in cs {
        collect_holes(c, out);
    }
}

/// Total order on closed values of a common type: reals numerically, tuples
/// lexicographically, closures by skeleton then by the dictionary order on
/// their real-literal vectors.
pub fn compare_values(a: &Term, b: &Term) -> Ordering {
    let skel = cmp_skeleton(a, b, &mut Vec::new(), &mut Vec::new());
    if skel != Ordering::Equal {
        return skel;
    }
    let (mut ha, mut hb) = (Vec::new(), Vec::new());
    collect_holes(a, &mut ha);
    collect_holes(b, &mut hb);
    for (x, y) in ha.iter().zip(&hb) {
        let ord = x.total_cmp(y);
        if ord != Ordering::Equal {
            return ord;
        }
    }
    ha.len().cmp(&hb.len())
}

/// Structural 64-bit hash of a closed term, stable across runs: the basis
/// for deriving inference sub-seeds from model values.
pub fn hash_term(t: &Term) -> u64 {
    fn mixin(h: &mut u64, x: u64) {
        *h = crate::rng::mix2(*h, x);
    }
    fn walk(t: &Term, binders: &mut Vec<String>, h: &mut u64) {
        mixin(h, cons_rank(t) as u64);
        match t {
            Term::Var(x) => {
                let idx = binders.iter().rev().position(|n| n == x);
                match idx {
                    Some(i) => mixin(h, i as u64 + 1),
                    None => {
                        for b in x.bytes() {
                            mixin(h, b as u64);
                        }
                    }
                }
            }
            Term::Real(d) => mixin(h, d.value().to_bits()),
            Term::Prim(p, _) => {
                let (r, w) = prim_rank(p);
                mixin(h, r as u64);
                mixin(h, w);
            }
            Term::Proj { index, .. } => mixin(h, *index as u64),
            Term::DistCon(d, _) => mixin(h, *d as u64),
            Term::Diff { mode, .. } | Term::DerivFn { mode, .. } => mixin(h, *mode as u64),
            Term::Abs {
                annot: Some(ty), ..
            } => hash_type(ty, h),
            Term::Tuple(es) => mixin(h, es.len() as u64),
            _ => {}
        }
        let pushed = if let Term::Abs { param, .. } = t {
            binders.push(param.clone());
            true
        } else {
            false
        };
        let mut cs = Vec::new();
        children(t, &mut cs);
        for c in cs {
            walk(c, binders, h);
        }
        if pushed {
            binders.pop();
        }
    }
    fn hash_type(ty: &TypeExpr, h: &mut u64) {
        match ty {
            TypeExpr::Real(c) => mixin(h, 0x10 + *c as u64),
            TypeExpr::Arrow(a, e, r) => {
                mixin(h, 0x20 + *e as u64);
                hash_type(a, h);
                hash_type(r, h);
            }
            TypeExpr::Tuple(es) => {
                mixin(h, 0x30 + es.len() as u64);
                for e in es {
                    hash_type(e, h);
                }
            }
            TypeExpr::Dist(s) => {
                mixin(h, 0x40);
                hash_type(s, h);
            }
        }
    }
    let mut h = 0x5eed_u64;
    walk(t, &mut Vec::new(), &mut h);
    h
}

impl fmt::Display for Coeffect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coeffect::A => write!(f, "A"),
            Coeffect::P => write!(f, "P"),
            Coeffect::N => write!(f, "N"),
        }
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Effect::Det => write!(f, "det"),
            Effect::Rnd => write!(f, "rnd"),
        }
    }
}
