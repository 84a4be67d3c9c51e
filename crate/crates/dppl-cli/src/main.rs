//! Command-line front end: type-check and run programs, configure the
//! solver, inference, and seeding, and emit results as text or CSV.
//!
//! Exit codes: 0 success, 1 type error, 2 I/O or parse error, 3 runtime
//! abort (ODE divergence, zero total inference weight, invalid distribution
//! parameters).

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dppl_core::ast::Term;
use dppl_core::eval::{eval_traced, EvalConfig, EvalError, RunState, SeedStream};
use dppl_core::infer::{self, fmt_f64};
use dppl_core::ode::{OdeConfig, OdeMethod};
use dppl_core::parser::{parse, SourceProgram};
use dppl_core::pretty::{pretty, pretty_type};
use dppl_core::value::{self, Env};
use dppl_core::{typer, TypeExpr};

#[derive(Parser)]
#[command(name = "dppl", version, about = "Type-check and run dppl programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Type-check a program and print its type
    Check { file: PathBuf },
    /// Type-check a program, run it, and print the result
    Run {
        file: PathBuf,
        /// Master seed for generated random streams
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Particle count for inference
        #[arg(long, default_value_t = 1000)]
        particles: usize,
        /// ODE integration method
        #[arg(long, value_enum, default_value_t = SolverArg::Rk4)]
        ode_solver: SolverArg,
        /// ODE integration step size
        #[arg(long, default_value_t = 1e-3)]
        ode_step: f64,
        /// Accept programs whose top level is random
        #[arg(long)]
        allow_random: bool,
        /// Emit each reduction step (rule and term) on stderr
        #[arg(long)]
        trace: bool,
        /// Write the result here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output format for scalar and tuple results
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Euler,
    Rk4,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum FormatArg {
    Text,
    Csv,
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Check { file } => cmd_check(&file),
        Cmd::Run {
            file,
            seed,
            particles,
            ode_solver,
            ode_step,
            allow_random,
            trace,
            out,
            format,
        } => {
            if !(ode_step > 0.0 && ode_step.is_finite()) {
                eprintln!("error: --ode-step must be positive");
                return ExitCode::from(2);
            }
            if particles == 0 {
                eprintln!("error: --particles must be at least 1");
                return ExitCode::from(2);
            }
            let cfg = EvalConfig {
                ode: OdeConfig {
                    method: match ode_solver {
                        SolverArg::Euler => OdeMethod::Euler,
                        SolverArg::Rk4 => OdeMethod::Rk4,
                    },
                    step: ode_step,
                },
                particles,
                master_seed: seed,
                ..EvalConfig::default()
            };
            cmd_run(&file, &cfg, allow_random, trace, out.as_deref(), format)
        }
    }
}

fn load(file: &std::path::Path) -> Result<std::sync::Arc<Term>, ExitCode> {
    let text = fs::read_to_string(file).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", file.display());
        ExitCode::from(2)
    })?;
    parse(&SourceProgram::new(text, file.display().to_string())).map_err(|d| {
        eprintln!("{}: {d}", file.display());
        ExitCode::from(2)
    })
}

fn cmd_check(file: &std::path::Path) -> ExitCode {
    let term = match load(file) {
        Ok(t) => t,
        Err(code) => return code,
    };
    match typer::check_program(&term, true) {
        Ok(j) => {
            println!("{} :{} {}", file.display(), j.eff, pretty_type(&j.ty));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}: type error: {e}", file.display());
            ExitCode::from(1)
        }
    }
}

fn cmd_run(
    file: &std::path::Path,
    cfg: &EvalConfig,
    allow_random: bool,
    trace: bool,
    out: Option<&std::path::Path>,
    format: FormatArg,
) -> ExitCode {
    let term = match load(file) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let judgment = match typer::check_program(&term, allow_random) {
        Ok(j) => j,
        Err(e) => {
            eprintln!("{}: type error: {e}", file.display());
            return ExitCode::from(1);
        }
    };

    let mut st = RunState::new(SeedStream::generated(cfg.master_seed, 0));
    let result = if trace {
        let mut n = 0u64;
        eval_traced(&term, &mut st, cfg, &mut |rule, t| {
            n += 1;
            eprintln!("step {n} [{rule}] {}", pretty(t));
        })
        .and_then(|t| value::value_of_term(&t))
    } else {
        value::eval_big(&term, &Env::empty(), Some(&mut st), cfg)
    };
    let result = match result {
        Ok(v) => v,
        Err(e @ (EvalError::Stuck(_) | EvalError::SeedExhausted | EvalError::FuelExhausted)) => {
            eprintln!("{}: internal evaluation fault: {e}", file.display());
            return ExitCode::from(3);
        }
        Err(EvalError::Abort(msg)) => {
            eprintln!("{}: runtime error: {msg}", file.display());
            return ExitCode::from(3);
        }
    };

    let mut buf: Vec<u8> = Vec::new();
    let wrote = write_result(&mut buf, &result, &judgment.ty, cfg, format, st.log_weight);
    if let Err(e) = wrote {
        match e {
            WriteError::Runtime(msg) => {
                eprintln!("{}: runtime error: {msg}", file.display());
                return ExitCode::from(3);
            }
            WriteError::Io(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        }
    }
    let io_result = match out {
        Some(path) => fs::write(path, &buf),
        None => io::stdout().write_all(&buf),
    };
    if let Err(e) = io_result {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}

enum WriteError {
    Runtime(String),
    Io(io::Error),
}

impl From<io::Error> for WriteError {
    fn from(e: io::Error) -> Self {
        WriteError::Io(e)
    }
}

fn write_result(
    w: &mut Vec<u8>,
    v: &value::Value,
    ty: &TypeExpr,
    cfg: &EvalConfig,
    format: FormatArg,
    log_weight: f64,
) -> Result<(), WriteError> {
    // Inferred distributions are materialized and always emitted as CSV.
    if let value::Value::InferFn(model) = v {
        let emp = infer::infer_impl(model, cfg).map_err(|e| WriteError::Runtime(e.to_string()))?;
        emp.write_csv(w)?;
        return Ok(());
    }
    let term = value::term_of_value(v);
    match format {
        FormatArg::Text => {
            writeln!(w, "{}", pretty(&term))?;
            writeln!(w, "# type: {}", pretty_type(ty))?;
            if log_weight != 0.0 {
                writeln!(w, "# log_weight: {}", fmt_f64(log_weight))?;
            }
        }
        FormatArg::Csv => {
            let rows = csv_rows(&term).ok_or_else(|| {
                WriteError::Runtime(
                    "result contains non-real components; CSV output unavailable".into(),
                )
            })?;
            let width = rows[0].len();
            for i in 1..=width {
                write!(w, "{}c{i}", if i == 1 { "" } else { "," })?;
            }
            writeln!(w)?;
            for row in rows {
                if row.len() != width {
                    return Err(WriteError::Runtime(
                        "ragged tuple result; CSV output unavailable".into(),
                    ));
                }
                let line: Vec<String> = row.iter().map(|x| fmt_f64(*x)).collect();
                writeln!(w, "{}", line.join(","))?;
            }
        }
    }
    Ok(())
}

/// A tuple whose elements are all real tuples prints one CSV row per
/// element (a trace); anything else flattens to a single row.
fn csv_rows(t: &Term) -> Option<Vec<Vec<f64>>> {
    if let Term::Tuple(es) = t {
        if !es.is_empty() && es.iter().all(|e| matches!(&**e, Term::Tuple(_))) {
            return es.iter().map(|e| infer::flatten_reals(e)).collect();
        }
    }
    infer::flatten_reals(t).map(|row| vec![row])
}
