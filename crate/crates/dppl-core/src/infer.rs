//! Likelihood-weighted importance sampling: the implementing function for
//! `infer`, the result/density run machinery, and empirical distributions
//! with quantile sampling.

use std::io::{self, Write};
use std::sync::Arc;

use crate::ast::{compare_values, hash_term, Term, TermRef};
use crate::eval::{EvalConfig, EvalError, RunState, SeedStream};
use crate::rng::mix2;
use crate::value::{self, Env, Value};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Weighted sample set produced by materializing an `infer` value.
/// Samples are sorted by the total value order and paired with a cumulative
/// normalized-weight array, so quantile sampling is a binary search.
#[derive(Debug, Clone)]
pub struct EmpiricalDist {
    samples: Vec<(TermRef, f64)>,
    cumulative: Vec<f64>,
    normalizer: f64,
}

/// Outcome of one run under a seed: the result value and its density
/// (linear-space weight). Runs that exhaust an explicit seed, or leave part
/// of it unconsumed, have the empty result and density zero.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub value: Option<TermRef>,
    pub density: f64,
}

impl RunOutcome {
    fn failed() -> RunOutcome {
        RunOutcome {
            value: None,
            density: 0.0,
        }
    }
}

/// Evaluate a closed term from weight 1 under the given seed.
pub fn run_with_seed(
    t: &TermRef,
    seed: SeedStream,
    cfg: &EvalConfig,
) -> Result<RunOutcome, EvalError> {
    let mut st = RunState::new(seed);
    match value::eval_big(t, &Env::empty(), Some(&mut st), cfg) {
        Ok(v) => {
            if matches!(st.seed.remaining(), Some(r) if r > 0) {
                return Ok(RunOutcome::failed());
            }
            Ok(RunOutcome {
                value: Some(value::term_of_value(&v)),
                density: st.weight(),
            })
        }
        Err(EvalError::SeedExhausted) => Ok(RunOutcome::failed()),
        Err(e) => Err(e),
    }
}

/// Run `model <>` for `cfg.particles` independent generated sub-streams and
/// collect the weighted results.
///
/// The sub-stream family is keyed on the master seed and a structural hash
/// of the model value, so materialization is a pure function of the value
/// and the configuration: re-materializing (or evaluating particles in
/// parallel) gives bit-identical results.
pub fn infer_impl(model: &Value, cfg: &EvalConfig) -> Result<EmpiricalDist, EvalError> {
    let k = cfg.particles.max(1);
    let key = mix2(cfg.master_seed, hash_term(&value::term_of_value(model)));
    let run_one = |j: usize| -> Result<(TermRef, f64), EvalError> {
        let mut st = RunState::new(SeedStream::generated(key, j as u64));
        let v = value::apply(model, Value::unit(), Some(&mut st), cfg)?;
        Ok((value::term_of_value(&v), st.log_weight))
    };
    let samples = run_particles(k, cfg.parallel, &run_one)?;
    EmpiricalDist::from_samples(samples)
}

#[cfg(feature = "parallel")]
fn run_particles(
    k: usize,
    parallel: bool,
    run_one: &(dyn Fn(usize) -> Result<(TermRef, f64), EvalError> + Sync),
) -> Result<Vec<(TermRef, f64)>, EvalError> {
    if parallel {
        (0..k).into_par_iter().map(run_one).collect()
    } else {
        (0..k).map(run_one).collect()
    }
}

#[cfg(not(feature = "parallel"))]
fn run_particles(
    k: usize,
    _parallel: bool,
    run_one: &(dyn Fn(usize) -> Result<(TermRef, f64), EvalError> + Sync),
) -> Result<Vec<(TermRef, f64)>, EvalError> {
    (0..k).map(run_one).collect()
}

impl EmpiricalDist {
    /// Build from raw (value, log-weight) pairs. Fails when every particle
    /// is dead: a degenerate distribution would silently return arbitrary
    /// values.
    pub fn from_samples(mut samples: Vec<(TermRef, f64)>) -> Result<EmpiricalDist, EvalError> {
        if samples.is_empty() {
            return Err(EvalError::Abort("inference produced no samples".into()));
        }
        let k = samples.len();
        let max_lw = samples.iter().map(|(_, lw)| *lw).fold(f64::NEG_INFINITY, f64::max);
        if max_lw == f64::NEG_INFINITY {
            return Err(EvalError::Abort(
                "inference produced zero total weight".into(),
            ));
        }
        samples.sort_by(|a, b| compare_values(&a.0, &b.0));
        let sum: f64 = samples.iter().map(|(_, lw)| (lw - max_lw).exp()).sum();
        let lse = max_lw + sum.ln();
        let mut cumulative = Vec::with_capacity(k);
        let mut acc = 0.0;
        for (_, lw) in &samples {
            acc += (lw - lse).exp();
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(EmpiricalDist {
            samples,
            cumulative,
            normalizer: (lse - (k as f64).ln()).exp(),
        })
    }

    pub fn samples(&self) -> &[(TermRef, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Estimate of the normalizing constant: the mean linear-space weight.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Empirical quantile: the smallest stored value whose cumulative
    /// normalized weight reaches `p`.
    pub fn quantile(&self, p: f64) -> &TermRef {
        let i = self
            .cumulative
            .partition_point(|&c| c < p)
            .min(self.samples.len() - 1);
        &self.samples[i].0
    }

    /// Normalized cumulative weight of stored values `<= v`.
    pub fn cdf(&self, v: &Term) -> f64 {
        let i = self
            .samples
            .partition_point(|(s, _)| compare_values(s, v) != std::cmp::Ordering::Greater);
        if i == 0 {
            0.0
        } else {
            self.cumulative[i - 1]
        }
    }

    /// Normalized weight of the i-th stored sample.
    pub fn weight(&self, i: usize) -> f64 {
        let prev = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        self.cumulative[i] - prev
    }

    /// Weighted mean of a scalar-valued support.
    pub fn mean_scalar(&self) -> Option<f64> {
        let mut m = 0.0;
        for (i, (v, _)) in self.samples.iter().enumerate() {
            m += self.weight(i) * scalar_of(v)?;
        }
        Some(m)
    }

    /// Weighted variance of a scalar-valued support.
    pub fn variance_scalar(&self) -> Option<f64> {
        let m = self.mean_scalar()?;
        let mut s = 0.0;
        for (i, (v, _)) in self.samples.iter().enumerate() {
            let d = scalar_of(v)? - m;
            s += self.weight(i) * d * d;
        }
        Some(s)
    }

    /// RFC-4180 CSV with unnormalized log weights and the flattened real
    /// components of each sample, 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let width = self
            .samples
            .first()
            .and_then(|(v, _)| flatten_reals(v))
            .ok_or_else(|| {
                io::Error::new(
                    io::ErrorKind::InvalidData,
                    "distribution support is not real-valued; cannot serialize to CSV",
                )
            })?
            .len();
        write!(w, "log_weight")?;
        for i in 1..=width {
            write!(w, ",v{i}")?;
        }
        writeln!(w)?;
        for (v, lw) in &self.samples {
            let cols = flatten_reals(v).ok_or_else(|| {
                io::Error::new(io::ErrorKind::InvalidData, "non-real sample in CSV output")
            })?;
            write!(w, "{}", fmt_f64(*lw))?;
            for c in cols {
                write!(w, ",{}", fmt_f64(c))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn scalar_of(t: &Term) -> Option<f64> {
    match t {
        Term::Real(d) => Some(d.value()),
        _ => None,
    }
}

/// Pre-order real components of a value term, or `None` when it contains a
/// non-real leaf.
pub fn flatten_reals(t: &Term) -> Option<Vec<f64>> {
    fn walk(t: &Term, out: &mut Vec<f64>) -> bool {
        match t {
            Term::Real(d) => {
                out.push(d.value());
                true
            }
            Term::Tuple(es) => es.iter().all(|e| walk(e, out)),
            _ => false,
        }
    }
    let mut out = Vec::new();
    walk(t, &mut out).then_some(out)
}

/// 17-significant-digit float formatting for CSV output.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Convenience wrapper: materialize the distribution of a closed `infer`
/// term (the common case for program output).
pub fn materialize_term(t: &TermRef, cfg: &EvalConfig) -> Result<EmpiricalDist, EvalError> {
    match &**t {
        Term::Infer(model) => infer_impl(&value::value_of_term(model)?, cfg),
        _ => Err(EvalError::Stuck("not an inferred distribution".into())),
    }
}

pub fn unit_term() -> TermRef {
    Arc::new(Term::Tuple(Vec::new()))
}
