//! Forward-mode automatic differentiation with dynamically tagged dual
//! numbers.
//!
//! Every `diff` invocation allocates a fresh [`Tag`]; a [`Dual`] is a tower
//! of tagged (primal, tangent) layers, innermost layers carrying strictly
//! smaller tags. Keeping tangents of distinct invocations on distinct layers
//! is what rules out perturbation confusion under nested differentiation:
//! the tangent *of* a tagged layer is itself a dual and keeps carrying the
//! other live tags.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::ast::PrimFn;
use crate::dist;
use crate::eval::{EvalConfig, EvalError};
use crate::value::Value;

/// Identifier of one live `diff` invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag(u64);

static NEXT_TAG: AtomicU64 = AtomicU64::new(1);

pub fn fresh_tag() -> Tag {
    Tag(NEXT_TAG.fetch_add(1, Ordering::Relaxed))
}

/// A real number possibly carrying tangents for live `diff` invocations.
///
/// `Const(r)` behaves identically to a plain real in all non-AD contexts.
/// In `Tagged { tag, primal, tangent }` both parts only contain tags
/// strictly smaller than `tag`; operations preserve this by always matching
/// on the largest tag present.
#[derive(Debug, Clone, PartialEq)]
pub enum Dual {
    Const(f64),
    Tagged {
        tag: Tag,
        primal: Box<Dual>,
        tangent: Box<Dual>,
    },
}

impl Dual {
    pub fn constant(r: f64) -> Dual {
        Dual::Const(r)
    }

    /// The fully unwrapped primal value.
    pub fn value(&self) -> f64 {
        match self {
            Dual::Const(r) => *r,
            Dual::Tagged { primal, .. } => primal.value(),
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Dual::Const(_))
    }

    fn top_tag(&self) -> Option<Tag> {
        match self {
            Dual::Const(_) => None,
            Dual::Tagged { tag, .. } => Some(*tag),
        }
    }

    /// (primal, tangent) with respect to `tag`; a value not carrying `tag`
    /// at its top layer has tangent zero.
    fn parts(&self, tag: Tag) -> (Dual, Dual) {
        match self {
            Dual::Tagged {
                tag: t,
                primal,
                tangent,
            } if *t == tag => ((**primal).clone(), (**tangent).clone()),
            other => (other.clone(), Dual::Const(0.0)),
        }
    }

    pub fn attach(tag: Tag, primal: Dual, tangent: Dual) -> Dual {
        if matches!(tangent, Dual::Const(t) if t == 0.0) {
            primal
        } else {
            Dual::Tagged {
                tag,
                primal: Box::new(primal),
                tangent: Box::new(tangent),
            }
        }
    }

    fn join_tag(&self, other: &Dual) -> Option<Tag> {
        self.top_tag().max(other.top_tag())
    }

    pub fn add(&self, o: &Dual) -> Dual {
        match self.join_tag(o) {
            None => Dual::Const(self.value() + o.value()),
            Some(tag) => {
                let (ap, at) = self.parts(tag);
                let (bp, bt) = o.parts(tag);
                Dual::attach(tag, ap.add(&bp), at.add(&bt))
            }
        }
    }

    pub fn sub(&self, o: &Dual) -> Dual {
        match self.join_tag(o) {
            None => Dual::Const(self.value() - o.value()),
            Some(tag) => {
                let (ap, at) = self.parts(tag);
                let (bp, bt) = o.parts(tag);
                Dual::attach(tag, ap.sub(&bp), at.sub(&bt))
            }
        }
    }

    pub fn neg(&self) -> Dual {
        Dual::Const(0.0).sub(self)
    }

    pub fn scale(&self, k: f64) -> Dual {
        self.mul(&Dual::Const(k))
    }

    pub fn mul(&self, o: &Dual) -> Dual {
        match self.join_tag(o) {
            None => Dual::Const(self.value() * o.value()),
            Some(tag) => {
                let (ap, at) = self.parts(tag);
                let (bp, bt) = o.parts(tag);
                let tangent = ap.mul(&bt).add(&bp.mul(&at));
                Dual::attach(tag, ap.mul(&bp), tangent)
            }
        }
    }

    /// Division; a zero denominator (primal value) maps the whole result to
    /// zero, tangents included, matching the evaluator's total convention
    /// for undefined primitive applications.
    pub fn div(&self, o: &Dual) -> Dual {
        if o.value() == 0.0 {
            return Dual::Const(0.0);
        }
        match self.join_tag(o) {
            None => Dual::Const(self.value() / o.value()),
            Some(tag) => {
                let (ap, at) = self.parts(tag);
                let (bp, bt) = o.parts(tag);
                let tangent = at.mul(&bp).sub(&ap.mul(&bt)).div(&bp.mul(&bp));
                Dual::attach(tag, ap.div(&bp), tangent)
            }
        }
    }

    pub fn sin(&self) -> Dual {
        match self {
            Dual::Const(r) => Dual::Const(r.sin()),
            Dual::Tagged {
                tag,
                primal,
                tangent,
            } => Dual::attach(*tag, primal.sin(), primal.cos().mul(tangent)),
        }
    }

    pub fn cos(&self) -> Dual {
        match self {
            Dual::Const(r) => Dual::Const(r.cos()),
            Dual::Tagged {
                tag,
                primal,
                tangent,
            } => Dual::attach(*tag, primal.cos(), primal.sin().neg().mul(tangent)),
        }
    }

    pub fn exp(&self) -> Dual {
        match self {
            Dual::Const(r) => Dual::Const(r.exp()),
            Dual::Tagged {
                tag,
                primal,
                tangent,
            } => Dual::attach(*tag, primal.exp(), primal.exp().mul(tangent)),
        }
    }

    /// Natural log; callers guard the domain (only reached from pdf
    /// compositions that have already checked it).
    pub fn ln(&self) -> Dual {
        match self {
            Dual::Const(r) => Dual::Const(r.ln()),
            Dual::Tagged {
                tag,
                primal,
                tangent,
            } => {
                let d = tangent.div(primal);
                Dual::attach(*tag, primal.ln(), d)
            }
        }
    }

    pub fn ln_gamma(&self) -> Dual {
        polygamma_dual(-1, self)
    }
}

/// Dual lift of the polygamma ladder: order -1 is ln-gamma, order 0 is
/// digamma, order k is the k-th derivative of digamma. Each layer's tangent
/// recurses one order higher, so arbitrarily nested derivatives stay exact.
fn polygamma_dual(order: i32, x: &Dual) -> Dual {
    match x {
        Dual::Const(r) => Dual::Const(if order < 0 {
            dist::ln_gamma(*r)
        } else {
            dist::polygamma(order as u32, *r)
        }),
        Dual::Tagged {
            tag,
            primal,
            tangent,
        } => Dual::attach(
            *tag,
            polygamma_dual(order, primal),
            polygamma_dual(order + 1, primal).mul(tangent),
        ),
    }
}

/// Tangent of `v` with respect to `tag`. Layers for other tags are kept:
/// the derivative of an outer-tagged dual is the pair of derivatives of its
/// parts.
pub fn extract_tangent(v: &Dual, tag: Tag) -> Dual {
    match v {
        Dual::Const(_) => Dual::Const(0.0),
        Dual::Tagged {
            tag: t,
            primal,
            tangent,
        } => {
            if *t == tag {
                (**tangent).clone()
            } else {
                Dual::attach(*t, extract_tangent(primal, tag), extract_tangent(tangent, tag))
            }
        }
    }
}

/// Evaluate a primitive function on dual arguments, propagating tangents by
/// the chain rule. Arity is guaranteed by the typer; a mismatch is reported
/// as a stuck configuration.
pub fn lift_prim(f: &PrimFn, args: &[Dual]) -> Result<Dual, EvalError> {
    let arity_err = || EvalError::Stuck(format!("primitive {f:?} applied to {} arguments", args.len()));
    match f {
        PrimFn::Add => match args {
            [a, b] => Ok(a.add(b)),
            _ => Err(arity_err()),
        },
        PrimFn::Sub => match args {
            [a, b] => Ok(a.sub(b)),
            _ => Err(arity_err()),
        },
        PrimFn::Mul => match args {
            [a, b] => Ok(a.mul(b)),
            _ => Err(arity_err()),
        },
        PrimFn::Div => match args {
            [a, b] => Ok(a.div(b)),
            _ => Err(arity_err()),
        },
        PrimFn::Sin => match args {
            [a] => Ok(a.sin()),
            _ => Err(arity_err()),
        },
        PrimFn::Cos => match args {
            [a] => Ok(a.cos()),
            _ => Err(arity_err()),
        },
        PrimFn::PdfGaussian => match args {
            [mu, sigma, x] => Ok(pdf_gaussian_dual(mu, sigma, x)),
            _ => Err(arity_err()),
        },
        PrimFn::PdfBeta => match args {
            [a, b, x] => Ok(pdf_beta_dual(a, b, x)),
            _ => Err(arity_err()),
        },
        PrimFn::Wiener(h) => match args {
            [x] => {
                if !x.is_const() {
                    // Unreachable for well-typed programs: the argument of a
                    // Wiener realization is typed non-differentiable.
                    return Err(EvalError::Abort(
                        "internal error: tangent reached non-differentiable primitive".into(),
                    ));
                }
                Ok(Dual::Const(h.eval(x.value())))
            }
            _ => Err(arity_err()),
        },
    }
}

/// Gaussian density as a dual composition; invalid parameters follow the
/// map-to-zero convention for primitive functions.
pub fn pdf_gaussian_dual(mu: &Dual, sigma: &Dual, x: &Dual) -> Dual {
    let s = sigma.value();
    if !s.is_finite() || s <= 0.0 {
        return Dual::Const(0.0);
    }
    let z = x.sub(mu).div(sigma);
    let e = z.mul(&z).scale(-0.5).exp();
    e.div(&sigma.scale((2.0 * std::f64::consts::PI).sqrt()))
}

/// Beta density as a dual composition (zero outside (0, 1) and for invalid
/// parameters). Parameter tangents go through ln-gamma, whose dual lift
/// climbs the polygamma ladder.
pub fn pdf_beta_dual(alpha: &Dual, beta: &Dual, x: &Dual) -> Dual {
    let (a, b, xv) = (alpha.value(), beta.value(), x.value());
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Dual::Const(0.0);
    }
    if !(xv > 0.0 && xv < 1.0) {
        return Dual::Const(0.0);
    }
    let one = Dual::Const(1.0);
    let ln_b = alpha
        .ln_gamma()
        .add(&beta.ln_gamma())
        .sub(&alpha.add(beta).ln_gamma());
    let log_pdf = alpha
        .sub(&one)
        .mul(&x.ln())
        .add(&beta.sub(&one).mul(&one.sub(x).ln()))
        .sub(&ln_b);
    log_pdf.exp()
}

/// Seed `point` with `tangent` under a fresh tag, run the function, and
/// read the fresh tag's tangent components back out of the result. This is
/// the body of the derivative closure returned by `diff`.
pub fn apply_deriv(
    func: &Value,
    point: &Value,
    tangent: &Value,
    cfg: &EvalConfig,
) -> Result<Value, EvalError> {
    let tag = fresh_tag();
    let seeded = seed_tangents(point, tangent, tag)?;
    let out = crate::value::apply_det(func, seeded, cfg)?;
    strip_to_tangent(&out, tag)
}

fn seed_tangents(point: &Value, tangent: &Value, tag: Tag) -> Result<Value, EvalError> {
    match (point, tangent) {
        (Value::Real(p), Value::Real(u)) => {
            Ok(Value::Real(Dual::attach(tag, p.clone(), u.clone())))
        }
        (Value::Tuple(ps), Value::Tuple(us)) if ps.len() == us.len() => Ok(Value::Tuple(
            ps.iter()
                .zip(us)
                .map(|(p, u)| seed_tangents(p, u, tag))
                .collect::<Result<_, _>>()?,
        )),
        _ => Err(EvalError::Abort(
            "diff: tangent shape does not match the differentiation point".into(),
        )),
    }
}

fn strip_to_tangent(v: &Value, tag: Tag) -> Result<Value, EvalError> {
    match v {
        Value::Real(d) => Ok(Value::Real(extract_tangent(d, tag))),
        Value::Tuple(vs) => Ok(Value::Tuple(
            vs.iter()
                .map(|v| strip_to_tangent(v, tag))
                .collect::<Result<_, _>>()?,
        )),
        _ => Err(EvalError::Abort(
            "diff: differentiated function returned a non-real value".into(),
        )),
    }
}
