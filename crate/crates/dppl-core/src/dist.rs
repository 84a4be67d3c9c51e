//! Primitive distributions: densities, quantile (inverse-CDF) functions for
//! Gaussian and Beta, and deterministic Wiener-process realizations built by
//! dyadic midpoint refinement.
//!
//! Everything here is a pure function of its inputs (Wiener paths memoize,
//! but node values depend only on the realization key and the node, never on
//! query order).

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::ast::PrimDist;
use crate::rng::{mix2, mix3, unit_f64};

/// Parameters of a primitive distribution as drawn at an `assume`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistParams {
    pub dist: PrimDist,
    pub params: Vec<f64>,
}

impl DistParams {
    /// Gaussian needs `sigma > 0`, Beta needs `alpha, beta > 0`. Sampling
    /// from an invalid distribution aborts the run; densities instead follow
    /// the total map-to-zero convention of primitive functions.
    pub fn validate(&self) -> Result<(), String> {
        let bad = |what: &str| {
            Err(format!(
                "invalid distribution parameters: {what} in {:?}{:?}",
                self.dist, self.params
            ))
        };
        match self.dist {
            PrimDist::Gaussian => match self.params[..] {
                [mu, sigma] if mu.is_finite() && sigma.is_finite() && sigma > 0.0 => Ok(()),
                _ => bad("Gaussian requires finite mu and sigma > 0"),
            },
            PrimDist::Beta => match self.params[..] {
                [a, b] if a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0 => Ok(()),
                _ => bad("Beta requires alpha > 0 and beta > 0"),
            },
            PrimDist::WienerProcess => Ok(()),
        }
    }
}

/// Quantile function `inf { v | p <= F(v) }` for Gaussian and Beta.
/// `p = 0` and `p = 1` map to the clamped infimum/supremum of the support.
pub fn quantile(d: &DistParams, p: f64) -> Result<f64, String> {
    d.validate()?;
    match d.dist {
        PrimDist::Gaussian => {
            let (mu, sigma) = (d.params[0], d.params[1]);
            Ok(if p <= 0.0 {
                -1e308
            } else if p >= 1.0 {
                1e308
            } else {
                mu + sigma * norm_quantile(p)
            })
        }
        PrimDist::Beta => {
            let (a, b) = (d.params[0], d.params[1]);
            Ok(beta_quantile(a, b, p))
        }
        PrimDist::WienerProcess => Err("the Wiener process has no scalar quantile".into()),
    }
}

/// Density of a primitive distribution at a point; total by the map-to-zero
/// convention (invalid parameters and out-of-support points give 0).
pub fn pdf(dist: PrimDist, params: &[f64], x: f64) -> f64 {
    match (dist, params) {
        (PrimDist::Gaussian, [mu, sigma]) => {
            if !(sigma.is_finite() && *sigma > 0.0) {
                return 0.0;
            }
            let z = (x - mu) / sigma;
            (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
        }
        (PrimDist::Beta, [a, b]) => {
            if !(*a > 0.0 && *b > 0.0 && a.is_finite() && b.is_finite()) {
                return 0.0;
            }
            if !(x > 0.0 && x < 1.0) {
                return 0.0;
            }
            let ln_b = ln_gamma(*a) + ln_gamma(*b) - ln_gamma(a + b);
            ((a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_b).exp()
        }
        _ => 0.0,
    }
}

// ── Inverse normal CDF (Wichura's AS 241, PPND16) ─────────────────────

#[allow(clippy::excessive_precision)]
const PPND_A: [f64; 8] = [
    3.3871328727963666080,
    1.3314166789178437745e2,
    1.9715909503065514427e3,
    1.3731693765509461125e4,
    4.5921953931549871457e4,
    6.7265770927008700853e4,
    3.3430575583588128105e4,
    2.5090809287301226727e3,
];
#[allow(clippy::excessive_precision)]
const PPND_B: [f64; 8] = [
    1.0,
    4.2313330701600911252e1,
    6.8718700749205790830e2,
    5.3941960214247511077e3,
    2.1213794301586595867e4,
    3.9307895800092710610e4,
    2.8729085735721942674e4,
    5.2264952788528545610e3,
];
#[allow(clippy::excessive_precision)]
const PPND_C: [f64; 8] = [
    1.42343711074968357734,
    4.63033784615654529590,
    5.76949722146069140550,
    3.64784832476320460504,
    1.27045825245236838258,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
];
#[allow(clippy::excessive_precision)]
const PPND_D: [f64; 8] = [
    1.0,
    2.05319162663775882187,
    1.67638483018380384940,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
];
#[allow(clippy::excessive_precision)]
const PPND_E: [f64; 8] = [
    6.65790464350110377720,
    5.46378491116411436990,
    1.78482653991729133580,
    2.96560571828504891230e-1,
    2.65321895265761230930e-2,
    1.24266094738807843860e-3,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
];
#[allow(clippy::excessive_precision)]
const PPND_F: [f64; 8] = [
    1.0,
    5.99832206555887937690e-1,
    1.36929880922735805310e-1,
    1.48753612908506148525e-2,
    7.86869131145613259100e-4,
    1.84631831751005468180e-5,
    1.42151175831644588870e-7,
    2.04426310338993978564e-15,
];

fn poly(c: &[f64; 8], r: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, k| acc * r + k)
}

/// Standard normal quantile for p in (0, 1); absolute error below 1e-9
/// over the full double range (AS 241).
pub fn norm_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&PPND_A, r) / poly(&PPND_B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&PPND_C, r) / poly(&PPND_D, r)
    } else {
        let r = r - 5.0;
        poly(&PPND_E, r) / poly(&PPND_F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

// ── Gamma-family special functions ────────────────────────────────────

#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
];

pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection
        let pi = std::f64::consts::PI;
        (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut a = LANCZOS[0];
        let t = x + 7.5;
        for (i, coef) in LANCZOS.iter().enumerate().skip(1) {
            a += coef / (x + i as f64);
        }
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
    }
}

const BERNOULLI_2J: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `polygamma(0, x)` is the digamma function; `polygamma(k, x)` its k-th
/// derivative. Recurrence to push the argument above 10, then the standard
/// asymptotic series.
pub fn polygamma(k: u32, x: f64) -> f64 {
    if !x.is_finite() || x <= 0.0 {
        return f64::NAN;
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        if k == 0 {
            acc -= 1.0 / x;
        } else {
            let sign = if k.is_multiple_of(2) { -1.0 } else { 1.0 };
            acc += sign * factorial(k) / x.powi(k as i32 + 1);
        }
        x += 1.0;
    }
    let tail = if k == 0 {
        let x2 = x * x;
        let mut s = x.ln() - 0.5 / x;
        let mut xp = x2;
        for (j, b) in BERNOULLI_2J.iter().enumerate() {
            s -= b / ((2 * (j + 1)) as f64 * xp);
            xp *= x2;
        }
        s
    } else {
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        let mut s = factorial(k - 1) / x.powi(k as i32) + factorial(k) / (2.0 * x.powi(k as i32 + 1));
        let x2 = x * x;
        let mut xp = x.powi(k as i32) * x2;
        for (j, b) in BERNOULLI_2J.iter().enumerate() {
            let j2 = 2 * (j + 1) as u32;
            s += b * factorial(j2 + k - 1) / (factorial(j2) * xp);
            xp *= x2;
        }
        -sign * s
    };
    acc + tail
}

pub fn digamma(x: f64) -> f64 {
    polygamma(0, x)
}

/// Regularized incomplete beta function I_x(a, b) by the Lentz continued
/// fraction.
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let bt = (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        bt * betacf(a, b, x) / a
    } else {
        1.0 - bt * betacf(b, a, 1.0 - x) / b
    }
}

fn betacf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_IT: usize = 300;
    const EPS: f64 = 3e-16;
    const FPMIN: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_IT {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Beta quantile by safeguarded Newton iteration on I_x(a, b) = p,
/// converging to ~1e-14; bisection fallback keeps the bracket valid.
pub fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x = a / (a + b);
    for _ in 0..200 {
        let f = inc_beta(a, b, x) - p;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if f.abs() < 1e-15 {
            break;
        }
        let dens = pdf(PrimDist::Beta, &[a, b], x);
        let mut next = if dens > 0.0 { x - f / dens } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() < 1e-16 {
            x = next;
            break;
        }
        x = next;
    }
    x
}

// ── Wiener-process realizations ───────────────────────────────────────

const WIENER_DEPTH: u32 = 20;
const TICKS_PER_UNIT: u64 = 1 << WIENER_DEPTH;
const DOMAIN_STEP: u64 = 1;
const DOMAIN_BRIDGE: u64 = 2;

/// One realization of the double-sided Wiener process.
///
/// The backbone is an integer random walk `W(n+1) = W(n) + N(0,1)`; each
/// unit interval is refined by the midpoint (Lévy) construction down to a
/// fixed dyadic depth, and queries interpolate linearly between the two
/// finest enclosing nodes. Every node value is a pure function of
/// (realization key, node position), so values never depend on query order;
/// the memo table is only a cache. Negative times use an independent
/// sub-key.
pub struct WienerPath {
    p: f64,
    key_pos: u64,
    key_neg: u64,
    memo: Mutex<HashMap<(bool, i64, u64), f64>>,
}

impl WienerPath {
    pub fn new(p: f64) -> WienerPath {
        let key = crate::rng::mix64(p.to_bits());
        WienerPath {
            p,
            key_pos: mix2(key, 1),
            key_neg: mix2(key, 2),
            memo: Mutex::new(HashMap::new()),
        }
    }

    fn gauss(&self, key: u64, domain: u64, a: u64, b: u64) -> f64 {
        norm_quantile(clamp_unit(unit_f64(mix3(key, domain, mix2(a, b)))))
    }

    fn memo_get(&self, k: (bool, i64, u64)) -> Option<f64> {
        self.memo.lock().unwrap().get(&k).copied()
    }

    fn memo_put(&self, k: (bool, i64, u64), v: f64) {
        self.memo.lock().unwrap().insert(k, v);
    }

    /// Value of the backbone walk at integer time `n >= 0`.
    fn at_integer(&self, neg: bool, key: u64, n: i64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        if let Some(v) = self.memo_get((neg, n, 0)) {
            return v;
        }
        let mut base = 0.0;
        let mut m = n;
        while m > 0 {
            if let Some(v) = self.memo_get((neg, m, 0)) {
                base = v;
                break;
            }
            m -= 1;
        }
        for k in (m + 1)..=n {
            base += self.gauss(key, DOMAIN_STEP, k as u64, 0);
            self.memo_put((neg, k, 0), base);
        }
        base
    }

    /// Evaluate the realization at an arbitrary time.
    pub fn eval(&self, x: f64) -> f64 {
        if x == 0.0 || !x.is_finite() {
            return 0.0;
        }
        let (neg, key, ax) = if x < 0.0 {
            (true, self.key_neg, -x)
        } else {
            (false, self.key_pos, x)
        };
        let n = ax.floor() as i64;
        let frac = ax - n as f64;
        let left = self.at_integer(neg, key, n);
        if frac == 0.0 {
            return left;
        }
        let right = self.at_integer(neg, key, n + 1);
        // Midpoint refinement within [n, n+1], tick space 0..=2^DEPTH.
        let target = frac * TICKS_PER_UNIT as f64;
        let (mut lo, mut hi) = (0u64, TICKS_PER_UNIT);
        let (mut va, mut vb) = (left, right);
        let mut len = 1.0f64;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            let node = (neg, n, mid);
            let vm = match self.memo_get(node) {
                Some(v) => v,
                None => {
                    let v = 0.5 * (va + vb)
                        + (len / 4.0).sqrt() * self.gauss(key, DOMAIN_BRIDGE, n as u64, mid);
                    self.memo_put(node, v);
                    v
                }
            };
            if target < mid as f64 {
                hi = mid;
                vb = vm;
            } else {
                lo = mid;
                va = vm;
            }
            len *= 0.5;
        }
        let t = target - lo as f64;
        va + t * (vb - va)
    }
}

fn clamp_unit(u: f64) -> f64 {
    // unit_f64 is always < 1; only the exact 0 needs nudging into (0, 1).
    u.max(1e-17)
}

/// Shareable handle to one Wiener realization, indexed by the seed head `p`
/// it was drawn from. Equality and ordering go by the index.
#[derive(Clone)]
pub struct WienerHandle {
    path: Arc<WienerPath>,
}

impl WienerHandle {
    pub fn from_index(p: f64) -> WienerHandle {
        WienerHandle {
            path: Arc::new(WienerPath::new(p)),
        }
    }

    /// The parser's canonical realization for source-level `wiener(...)`.
    pub fn canonical() -> WienerHandle {
        WienerHandle::from_index(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.path.eval(x)
    }

    pub fn index(&self) -> f64 {
        self.path.p
    }

    pub fn index_bits(&self) -> u64 {
        self.path.p.to_bits()
    }
}

impl PartialEq for WienerHandle {
    fn eq(&self, other: &Self) -> bool {
        self.index_bits() == other.index_bits()
    }
}

impl fmt::Debug for WienerHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WienerHandle({})", self.path.p)
    }
}
