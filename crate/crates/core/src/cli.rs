//! Command-line front end: `scale-fn` tabulates scale functions, `risk`
//! evaluates the drawdown/rally risk quantities, `validate` runs the
//! validation suite. Exit codes: 0 success, 1 validation failure, 2
//! configuration error, 3 numerical failure.

use crate::config::{HorizonConfig, ModelConfig, QueryConfig, RunConfig};
use crate::error::{Error, Result};
use crate::laplace::{InversionConfig, InversionMethod};
use crate::mc;
use crate::risk::{reports_to_csv, Horizon, RiskAnalytics, RiskReport};
use crate::scale::{Backend, ScaleEngine, Side};
use crate::validation::{self, ValidationOptions};
use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "levydd",
    about = "Scale functions, drawdown/rally first-passage laws and risk analytics for spectrally one-sided Levy processes",
    after_help = "Environment: LEVYDD_THREADS sets the worker count for Monte Carlo batches."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate W^(q), its right derivative and Z^(q) over a grid
    ScaleFn(ScaleFnArgs),
    /// Evaluate risk quantities of the exponential-Levy price model
    Risk(RiskArgs),
    /// Run the validation suite (one line per criterion)
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct ModelFlags {
    /// TOML run configuration (alternative to the model flags)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Process family: bm | stable | stable-drift | jde
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    mu: Option<f64>,
    #[arg(long, global = true)]
    sigma2: Option<f64>,
    #[arg(long, global = true)]
    sigma: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Initial price S0 (risk queries)
    #[arg(long, global = true, default_value_t = 1.0)]
    s0: f64,
}

impl ModelFlags {
    fn model_config(&self, alpha_index: Option<f64>) -> Result<ModelConfig> {
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let cfg = RunConfig::from_toml(&text)?;
            return Ok(cfg.model);
        }
        let family = self
            .model
            .clone()
            .ok_or_else(|| Error::Config("either --config or --model is required".into()))?;
        Ok(ModelConfig {
            family,
            mu: self.mu,
            sigma2: self.sigma2,
            sigma: self.sigma,
            alpha: alpha_index,
            lambda: self.lambda,
            eta: self.eta,
            s0: self.s0,
        })
    }
}

#[derive(Args, Debug)]
struct ScaleFnArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Stable index alpha (stable and stable-drift families)
    #[arg(long)]
    alpha: Option<f64>,
    /// Scale-function index q (repeatable)
    #[arg(long, num_args = 1.., default_values_t = [0.0])]
    q: Vec<f64>,
    /// Evaluation points (repeatable); alternative to --x-min/--x-max/--points
    #[arg(long, num_args = 1..)]
    x: Vec<f64>,
    #[arg(long)]
    x_min: Option<f64>,
    #[arg(long)]
    x_max: Option<f64>,
    #[arg(long, default_value_t = 21)]
    points: usize,
    /// Backend: closed | ml-series | inversion | conv-series
    #[arg(long, default_value = "closed")]
    backend: String,
    /// Second backend; adds value and difference columns
    #[arg(long)]
    compare_backend: Option<String>,
    /// Output format: csv | json
    #[arg(long, default_value = "csv")]
    format: String,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RiskArgs {
    #[command(subcommand)]
    query: Option<RiskCommand>,
    #[command(flatten)]
    model: ModelFlags,
    /// Stable index alpha of the model (the query drawdown uses --alpha)
    #[arg(long, global = true)]
    stable_alpha: Option<f64>,
    /// Append a Monte Carlo cross-check report where applicable
    #[arg(long, global = true)]
    validate: bool,
    /// Monte Carlo paths for simulation-backed reports
    #[arg(long, global = true, default_value_t = 200_000)]
    mc_paths: usize,
    /// Monte Carlo time step
    #[arg(long, global = true, default_value_t = 1e-3)]
    mc_dt: f64,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Output format: csv | json
    #[arg(long, global = true, default_value = "json")]
    format: String,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum RiskCommand {
    /// P[drawdown of size alpha before rally of size beta]
    DdBeforeRally {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        /// 'inf' or a positive number
        #[arg(long, default_value = "inf")]
        horizon: String,
    },
    /// P[new all-time minimum at the first drawdown epoch]
    NewMin {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value = "inf")]
        horizon: String,
    },
    /// P[new all-time maximum at the first rally epoch]
    NewMax {
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value = "inf")]
        horizon: String,
    },
    /// Expected absolute drawdown at the first drawdown epoch before T
    ExpectedDd {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        horizon: f64,
    },
    /// Carr-Wu closed form for the level-matched symmetric case
    CarrWuSym {
        #[arg(long)]
        alpha: f64,
    },
    /// Carr-Wu crash probability (drawdown alpha before rally beta)
    CarrWuCrash {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
    },
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Reduced-path smoke subset (finishes within a minute)
    #[arg(long)]
    quick: bool,
    /// Harness self-test: perturb one closed form, expect failures
    #[arg(long)]
    mutate: bool,
    /// Run a single criterion (1-12)
    #[arg(long)]
    only: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

/// Parse and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::ScaleFn(args) => cmd_scale_fn(args),
        Command::Risk(args) => cmd_risk(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match outcome {
        Ok(code) => code,
        Err(Error::Config(msg)) | Err(Error::InvalidParameter(msg)) => {
            eprintln!("configuration error: {msg}");
            2
        }
        Err(e) => {
            eprintln!("numerical failure: {e}");
            3
        }
    }
}

fn parse_backend(name: &str) -> Result<Backend> {
    match name {
        "closed" => Ok(Backend::ClosedForm),
        "ml-series" => Ok(Backend::MittagLefflerSeries),
        "inversion" => Ok(Backend::LaplaceInversion),
        "conv-series" => Ok(Backend::ConvolutionSeries),
        other => Err(Error::Config(format!(
            "unknown backend '{other}' (closed | ml-series | inversion | conv-series)"
        ))),
    }
}

fn write_output(path: &Option<PathBuf>, content: &str) -> Result<()> {
    match path {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(p) => std::fs::write(p, content).map_err(|e| Error::Config(format!("cannot write {}: {e}", p.display()))),
    }
}

fn cmd_scale_fn(args: ScaleFnArgs) -> Result<i32> {
    let model_cfg = args.model.model_config(args.alpha)?;
    let spec = model_cfg.to_spec()?;
    let backend = parse_backend(&args.backend)?;
    let engine = ScaleEngine::new(spec, backend)?
        .with_inversion(InversionConfig::new(InversionMethod::EulerSummation, 61, 12)?);
    let cmp_engine = args
        .compare_backend
        .as_deref()
        .map(|name| -> Result<ScaleEngine> {
            Ok(ScaleEngine::new(spec, parse_backend(name)?)?
                .with_inversion(InversionConfig::new(InversionMethod::EulerSummation, 61, 12)?))
        })
        .transpose()?;

    let xs: Vec<f64> = if !args.x.is_empty() {
        let mut xs = args.x.clone();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs
    } else {
        let lo = args.x_min.unwrap_or(0.1);
        let hi = args.x_max.unwrap_or(2.0);
        if !(hi > lo) || args.points < 2 {
            return Err(Error::Config("need x_max > x_min and points >= 2".into()));
        }
        (0..args.points)
            .map(|i| lo + (hi - lo) * i as f64 / (args.points - 1) as f64)
            .collect()
    };

    #[derive(serde::Serialize)]
    struct Row {
        x: f64,
        q: f64,
        w: f64,
        w_prime_plus: f64,
        z: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        w_compare: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        diff: Option<f64>,
    }

    let mut rows = Vec::new();
    for &q in &args.q {
        for &x in &xs {
            let w = engine.w(q, x)?;
            let wp = if x > 0.0 {
                engine.w_prime(q, x, Side::Right)?
            } else {
                f64::NAN
            };
            let z = engine.z(q, x)?;
            let (w_compare, diff) = match &cmp_engine {
                None => (None, None),
                Some(c) => {
                    let v = c.w(q, x)?;
                    (Some(v), Some(w - v))
                }
            };
            rows.push(Row { x, q, w, w_prime_plus: wp, z, w_compare, diff });
        }
    }

    let content = match args.format.as_str() {
        "csv" => {
            let mut out = String::new();
            if cmp_engine.is_some() {
                out.push_str("x,q,W,W_prime_plus,Z,W_compare,diff\n");
            } else {
                out.push_str("x,q,W,W_prime_plus,Z\n");
            }
            for r in &rows {
                if let (Some(wc), Some(d)) = (r.w_compare, r.diff) {
                    out.push_str(&format!("{},{},{},{},{},{},{}\n", r.x, r.q, r.w, r.w_prime_plus, r.z, wc, d));
                } else {
                    out.push_str(&format!("{},{},{},{},{}\n", r.x, r.q, r.w, r.w_prime_plus, r.z));
                }
            }
            out
        }
        "json" => serde_json::to_string_pretty(&rows).map_err(|e| Error::Config(e.to_string()))? + "\n",
        other => return Err(Error::Config(format!("unknown format '{other}'"))),
    };
    write_output(&args.out, &content)?;
    Ok(0)
}

fn cmd_risk(args: RiskArgs) -> Result<i32> {
    let model_cfg = args.model.model_config(args.stable_alpha)?;
    let model = model_cfg.to_model()?;
    let mut numerics = crate::risk::Numerics::default();
    // Config-file numerics, then flag overrides for the simulation block.
    if let Some(path) = &args.model.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        numerics = RunConfig::from_toml(&text)?.numerics.to_numerics()?;
    }
    numerics.sim = mc::SimConfig::new(args.mc_dt, args.mc_paths, args.seed, numerics.sim.t_max)?;
    let analytics = RiskAnalytics::new(model, numerics)?;

    // Queries either from the subcommand or from the config file.
    let queries: Vec<QueryConfig> = match &args.query {
        Some(cmd) => vec![match cmd {
            RiskCommand::DdBeforeRally { alpha, beta, horizon } => QueryConfig::DdBeforeRally {
                alpha: *alpha,
                beta: *beta,
                horizon: HorizonConfig::parse(horizon)?,
            },
            RiskCommand::NewMin { alpha, horizon } => QueryConfig::NewMin {
                alpha: *alpha,
                horizon: HorizonConfig::parse(horizon)?,
            },
            RiskCommand::NewMax { beta, horizon } => QueryConfig::NewMax {
                beta: *beta,
                horizon: HorizonConfig::parse(horizon)?,
            },
            RiskCommand::ExpectedDd { alpha, horizon } => QueryConfig::ExpectedDd {
                alpha: *alpha,
                horizon: *horizon,
            },
            RiskCommand::CarrWuSym { alpha } => QueryConfig::CarrWuSym { alpha: *alpha },
            RiskCommand::CarrWuCrash { alpha, beta } => QueryConfig::CarrWuCrash {
                alpha: *alpha,
                beta: *beta,
            },
        }],
        None => {
            let path = args.model.config.as_ref().ok_or_else(|| {
                Error::Config("give a risk subcommand or --config with [[queries]]".into())
            })?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_toml(&text)?.queries
        }
    };
    if queries.is_empty() {
        return Err(Error::Config("no queries given".into()));
    }

    let mut reports: Vec<RiskReport> = Vec::new();
    for q in &queries {
        reports.extend(run_query(&analytics, q)?);
        if args.validate {
            if let Some(r) = mc_cross_check(&analytics, q)? {
                reports.push(r);
            }
        }
    }

    let content = match args.format.as_str() {
        "json" => serde_json::to_string_pretty(&reports).map_err(|e| Error::Config(e.to_string()))? + "\n",
        "csv" => reports_to_csv(&reports),
        other => return Err(Error::Config(format!("unknown format '{other}'"))),
    };
    write_output(&args.out, &content)?;
    Ok(0)
}

fn run_query(analytics: &RiskAnalytics, q: &QueryConfig) -> Result<Vec<RiskReport>> {
    let query = q.risk_query()?;
    Ok(match q {
        QueryConfig::DdBeforeRally { .. } => analytics.drawdown_before_rally(&query)?,
        QueryConfig::NewMin { .. } => vec![analytics.prob_new_min_at_drawdown(&query)?],
        QueryConfig::NewMax { .. } => vec![analytics.prob_new_max_at_drawup(&query)?],
        QueryConfig::ExpectedDd { .. } => vec![analytics.expected_drawdown_at_d(&query)?],
        QueryConfig::CarrWuSym { alpha } => vec![analytics.carr_wu_symmetric(*alpha)?],
        QueryConfig::CarrWuCrash { alpha, beta } => {
            vec![analytics.carr_wu_crash_prob(*alpha, *beta)?]
        }
    })
}

// Clearly-labelled simulation counterpart of an analytic report.
fn mc_cross_check(analytics: &RiskAnalytics, q: &QueryConfig) -> Result<Option<RiskReport>> {
    let query = q.risk_query()?;
    let model = analytics.model();
    let sim = analytics.numerics().sim;
    let horizon = match query.horizon {
        Horizon::Infinite => f64::INFINITY,
        Horizon::Finite(t) => t,
    };
    let (quantity, levels, f): (&str, mc::Levels, Box<dyn Fn(&mc::PathFunctionals) -> f64 + Sync>) =
        match q {
            QueryConfig::DdBeforeRally { .. } | QueryConfig::CarrWuCrash { .. } | QueryConfig::CarrWuSym { .. } => (
                "prob_dd_before_rally",
                mc::Levels::new(query.a(), query.b())?,
                Box::new(move |p: &mc::PathFunctionals| {
                    if p.tau_a < p.hat_tau_b && p.tau_a < horizon {
                        1.0
                    } else {
                        0.0
                    }
                }),
            ),
            QueryConfig::NewMin { .. } => (
                "prob_new_min_at_drawdown",
                mc::Levels::drawdown_only(query.a())?,
                Box::new(move |p: &mc::PathFunctionals| {
                    if p.new_min_at_tau && p.tau_a < horizon {
                        1.0
                    } else {
                        0.0
                    }
                }),
            ),
            QueryConfig::NewMax { .. } => (
                "prob_new_max_at_drawup",
                mc::Levels::new(f64::INFINITY, query.b())?,
                Box::new(move |p: &mc::PathFunctionals| {
                    if p.new_max_at_hat && p.hat_tau_b < horizon {
                        1.0
                    } else {
                        0.0
                    }
                }),
            ),
            QueryConfig::ExpectedDd { .. } => {
                let s0 = model.s0;
                let a = query.a();
                (
                    "expected_drawdown_at_d",
                    mc::Levels::drawdown_only(a)?,
                    Box::new(move |p: &mc::PathFunctionals| {
                        if p.tau_a < horizon {
                            s0 * (p.x_bar.exp() - (p.x_bar - a - p.overshoot).exp())
                        } else {
                            0.0
                        }
                    }),
                )
            }
        };
    let est = mc::estimate_many(&model.spec, &sim, levels, &[&*f]).remove(0);
    Ok(Some(RiskReport {
        quantity: format!("{quantity}_mc"),
        query,
        value: est.value,
        error_estimate: est.std_error,
        method: "simulation".into(),
        evaluations: est.n,
    }))
}

fn cmd_validate(args: ValidateArgs) -> Result<i32> {
    if let Some(id) = args.only {
        if !(1..=12).contains(&id) {
            return Err(Error::Config("criterion id must be 1-12".into()));
        }
    }
    let opts = ValidationOptions {
        quick: args.quick,
        mutate: args.mutate,
        only: args.only,
        seed: args.seed,
    };
    let results = validation::run(&opts);
    if results.is_empty() {
        return Err(Error::Config("no criteria selected".into()));
    }
    let mut all = true;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for r in &results {
        all &= r.passed;
        let _ = writeln!(
            out,
            "criterion {:>2} [{}] {:<45} {:>8.2}s  {}",
            r.id,
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.seconds,
            r.detail
        );
    }
    let _ = writeln!(out, "result: {}", if all { "PASS" } else { "FAIL" });
    Ok(if all { 0 } else { 1 })
}
