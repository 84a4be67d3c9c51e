//! Fixed-step Euler-forward and explicit fourth-order Runge-Kutta
//! integrators for the `solve` construct.
//!
//! All state arithmetic goes through the dual-number operations, so
//! tangents introduced by an enclosing `diff` flow through the integration
//! (the solver is differentiable). The step count is `ceil(|x1| / h)` with
//! the final step shortened to land exactly on the requested end time;
//! negative end times integrate backward.

use crate::ad::Dual;
use crate::eval::{EvalConfig, EvalError};
use crate::value::{self, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeMethod {
    Euler,
    Rk4,
}

#[derive(Debug, Clone)]
pub struct OdeConfig {
    pub method: OdeMethod,
    /// Integration step size; must be positive and finite.
    pub step: f64,
}

impl Default for OdeConfig {
    fn default() -> Self {
        OdeConfig {
            method: OdeMethod::Rk4,
            step: 1e-3,
        }
    }
}

/// Solve the IVP `dy/dx = rhs(x, y), y(0) = y0` and return `y(x1)`.
///
/// `rhs` receives a pair `(time, state)` and must return a state-shaped
/// value. `x1 = 0` returns `y0` exactly.
pub fn solve_value(
    rhs: &Value,
    y0: &Value,
    x1: &Dual,
    cfg: &EvalConfig,
) -> Result<Value, EvalError> {
    let h = cfg.ode.step;
    if !(h > 0.0 && h.is_finite()) {
        return Err(EvalError::Abort(format!("invalid ODE step size {h}")));
    }
    let span = x1.value();
    if span == 0.0 {
        return Ok(y0.clone());
    }
    if !span.is_finite() {
        return Err(EvalError::Abort(format!("non-finite ODE end time {span}")));
    }
    let sign = if span < 0.0 { -1.0 } else { 1.0 };
    // Tolerate end times that are an integer number of steps up to rounding.
    let n_steps = ((span.abs() / h) - 1e-9).ceil().max(1.0) as u64;
    let mut y = y0.clone();
    for k in 0..n_steps {
        let x_k = Dual::constant(sign * k as f64 * h);
        let h_k = if k == n_steps - 1 {
            // Final step lands exactly on x1 and carries its tangents.
            x1.sub(&x_k)
        } else {
            Dual::constant(sign * h)
        };
        y = match cfg.ode.method {
            OdeMethod::Euler => euler_step(rhs, &x_k, &y, &h_k, cfg)?,
            OdeMethod::Rk4 => rk4_step(rhs, &x_k, &y, &h_k, cfg)?,
        };
        if !state_finite(&y) {
            return Err(EvalError::Abort(format!(
                "ODE diverged at x = {}",
                sign * (k + 1) as f64 * h
            )));
        }
    }
    Ok(y)
}

/// One Euler-forward step `y + h * rhs(x, y)`.
pub fn euler_step(
    rhs: &Value,
    x: &Dual,
    y: &Value,
    h: &Dual,
    cfg: &EvalConfig,
) -> Result<Value, EvalError> {
    let f = apply_rhs(rhs, x, y, cfg)?;
    axpy(y, h, &f)
}

/// One classical RK4 step with stage evaluations at x, x + h/2, x + h/2,
/// and x + h.
pub fn rk4_step(
    rhs: &Value,
    x: &Dual,
    y: &Value,
    h: &Dual,
    cfg: &EvalConfig,
) -> Result<Value, EvalError> {
    let half = h.scale(0.5);
    let x_half = x.add(&half);
    let k1 = apply_rhs(rhs, x, y, cfg)?;
    let k2 = apply_rhs(rhs, &x_half, &axpy(y, &half, &k1)?, cfg)?;
    let k3 = apply_rhs(rhs, &x_half, &axpy(y, &half, &k2)?, cfg)?;
    let k4 = apply_rhs(rhs, &x.add(h), &axpy(y, h, &k3)?, cfg)?;
    // y + h/6 * (k1 + 2 k2 + 2 k3 + k4)
    let sum = zip2(&k1, &zip2(&k2, &k3, &|a, b| a.add(b))?, &|a, b| {
        a.add(&b.scale(2.0))
    })?;
    let sum = zip2(&sum, &k4, &|a, b| a.add(b))?;
    axpy(y, &h.scale(1.0 / 6.0), &sum)
}

fn apply_rhs(rhs: &Value, x: &Dual, y: &Value, cfg: &EvalConfig) -> Result<Value, EvalError> {
    let arg = Value::Tuple(vec![Value::Real(x.clone()), y.clone()]);
    let out = value::apply_det(rhs, arg, cfg)?;
    if !same_shape(&out, y) {
        return Err(EvalError::Abort(
            "ODE right-hand side does not match the state shape".into(),
        ));
    }
    Ok(out)
}

/// `y + h * k`, elementwise over the state tree.
fn axpy(y: &Value, h: &Dual, k: &Value) -> Result<Value, EvalError> {
    zip2(y, k, &|a, b| a.add(&h.mul(b)))
}

fn zip2(a: &Value, b: &Value, f: &dyn Fn(&Dual, &Dual) -> Dual) -> Result<Value, EvalError> {
    match (a, b) {
        (Value::Real(x), Value::Real(y)) => Ok(Value::Real(f(x, y))),
        (Value::Tuple(xs), Value::Tuple(ys)) if xs.len() == ys.len() => Ok(Value::Tuple(
            xs.iter()
                .zip(ys)
                .map(|(x, y)| zip2(x, y, f))
                .collect::<Result<_, _>>()?,
        )),
        _ => Err(EvalError::Abort("ODE state shape mismatch".into())),
    }
}

fn same_shape(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Real(_), Value::Real(_)) => true,
        (Value::Tuple(xs), Value::Tuple(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| same_shape(x, y))
        }
        _ => false,
    }
}

fn state_finite(v: &Value) -> bool {
    match v {
        Value::Real(d) => d.value().is_finite(),
        Value::Tuple(vs) => vs.iter().all(state_finite),
        _ => false,
    }
}
