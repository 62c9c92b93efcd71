use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use rwlocal::gamma::{green_at_origin, mc_escape, return_law_from_returns, return_probabilities, taboo_estimate, TailMode};
use rwlocal::harness::{run_config, Config, Experiment, ExperimentReport, GammaSource, OutputFormat, Tolerances};
use rwlocal::mass::{format_rational, rational_to_f64};
use rwlocal::oracle::{enumerate, exact_zn_law};
use rwlocal::path::simulate_series;
use rwlocal::steps::{law_label, LawSpec};
use rwlocal::theory::{geometric_pmf, green_cross_sum, moment_limit, qj_generating, qj_limit, sup_pmf};
use rwlocal::StepLaw;

const CSV_HELP: &str = "\
CSV columns:
  simulate                  n,alpha,L,L_over_n,R,R_over_n
  estimate-gamma            method,value,error
  verify-slln series        seed,n,alpha,L,L_over_n,R,R_over_n,theory
  verify-geometric law      seed,u,observed,empirical,geometric
  variance-scan variance    seed,n,mean,variance,jackknife_se,envelope,bound
  checks (all experiments)  name,seed,statistic,rule,threshold,pass

Exit status: 0 when every verdict passes, 2 when any fails, 1 on error.";

#[derive(Parser, Debug)]
#[command(name = "rwlocal", version, about = "Local times of transient random walks on Z^d", after_help = CSV_HELP)]
struct Cli {
    /// Experiment configuration {law, experiment, seeds, tolerances}.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; replaces the seeds of a configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for report files. Without it reports go to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one path and report L_n(α) and R(n) at checkpoints.
    Simulate(SimulateArgs),
    /// Estimate the escape probability γ.
    EstimateGamma(GammaArgs),
    /// Evaluate a limit formula.
    Predict(PredictArgs),
    /// Exact expectations by enumerating every path.
    Oracle(OracleArgs),
    /// Law of large numbers for L_n(α)/n and R(n)/n.
    VerifySlln(SllnArgs),
    /// Geometric law of the local time at a uniform visited site.
    VerifyGeometric(GeometricArgs),
    /// Replica variance of L_n(α) against the growth envelopes.
    VarianceScan(VarianceArgs),
}

#[derive(Args, Debug)]
struct LawArg {
    /// Step law as JSON, or @file. Example: {"family":"srw","d":3}
    #[arg(long)]
    law: Option<String>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    law: LawArg,
    #[arg(long)]
    n: u64,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 1.0, 2.0])]
    alphas: Vec<f64>,
    /// Increasing checkpoints (default: n only).
    #[arg(long, value_delimiter = ',')]
    checkpoints: Vec<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum GammaMethodArg {
    Green,
    Dp,
    Mc,
}

#[derive(Args, Debug)]
struct GammaArgs {
    #[command(flatten)]
    law: LawArg,
    #[arg(long, value_enum, default_value_t = GammaMethodArg::Green)]
    method: GammaMethodArg,
    /// Series or DP horizon N, or the MC walk length n.
    #[arg(long, default_value_t = 4096)]
    horizon: u64,
    #[arg(long, default_value_t = 100_000)]
    replicas: u64,
    /// Tail model for the Green series: auto, power, geometric or none.
    #[arg(long, default_value = "auto")]
    tail: String,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Quantity {
    MomentLimit,
    QjLimit,
    GeometricPmf,
    QjGenerating,
    GreenCrossSum,
    SupPmf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long, value_enum)]
    quantity: Quantity,
    #[command(flatten)]
    law: LawArg,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    j: u64,
    #[arg(long, default_value_t = 1)]
    u: u64,
    #[arg(long, default_value_t = 0.5)]
    s: f64,
    /// Truncation horizon, walk length or m, depending on the quantity.
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    law: LawArg,
    #[arg(long)]
    n: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![2u32])]
    alphas: Vec<u32>,
}

#[derive(Args, Debug)]
struct GammaSourceArg {
    /// γ source as JSON, e.g. {"method":"fixed","value":0.4}; default Green series.
    #[arg(long = "gamma")]
    gamma: Option<String>,
}

#[derive(Args, Debug)]
struct SllnArgs {
    #[command(flatten)]
    law: LawArg,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 2.0])]
    alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    checkpoints: Vec<u64>,
    #[command(flatten)]
    gamma: GammaSourceArg,
}

#[derive(Args, Debug)]
struct GeometricArgs {
    #[command(flatten)]
    law: LawArg,
    #[arg(long, default_value_t = 100_000)]
    n: u64,
    #[arg(long, default_value_t = 100_000)]
    m: usize,
    #[command(flatten)]
    gamma: GammaSourceArg,
}

#[derive(Args, Debug)]
struct VarianceArgs {
    #[command(flatten)]
    law: LawArg,
    #[arg(long, default_value_t = 2)]
    alpha: u32,
    #[arg(long, value_delimiter = ',')]
    grid: Vec<u64>,
    #[arg(long, default_value_t = 200)]
    m: usize,
    #[arg(long)]
    max_slope: Option<f64>,
}

fn read_arg(text: &str) -> anyhow::Result<String> {
    match text.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).with_context(|| format!("reading {path}")),
        None => Ok(text.to_string()),
    }
}

fn law_value(arg: &LawArg) -> anyhow::Result<Value> {
    let text = arg.law.as_deref().context("--law is required")?;
    let value: Value = serde_json::from_str(&read_arg(text)?).context("--law is not valid JSON")?;
    LawSpec::from_value(&value)?;
    Ok(value)
}

fn build_law(arg: &LawArg) -> anyhow::Result<(StepLaw, String)> {
    let spec = LawSpec::from_value(&law_value(arg)?)?;
    Ok((spec.build()?, law_label(&spec)))
}

fn gamma_source(arg: &GammaSourceArg) -> anyhow::Result<GammaSource> {
    match &arg.gamma {
        Some(text) => Ok(serde_json::from_str(&read_arg(text)?).context("--gamma")?),
        None => Ok(GammaSource::default()),
    }
}

/// Write `body` to `<out>/<name>` or to stdout.
fn emit(out: Option<&Path>, name: &str, body: &str) -> anyhow::Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(name), body)?;
        }
        None => std::io::stdout().write_all(body.as_bytes())?,
    }
    Ok(())
}

fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn dyadic(top: u64) -> Vec<u64> {
    let mut v: Vec<u64> = (4..63).map(|k| 1u64 << k).take_while(|&n| n < top).collect();
    v.push(top);
    v
}

fn experiment_config(cli: &Cli, kind: &str, flags: impl FnOnce() -> anyhow::Result<(Value, Experiment, Tolerances)>) -> anyhow::Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let cfg = Config::from_file(path)?;
            let found = match cfg.experiment {
                Experiment::Slln { .. } => "slln",
                Experiment::Geometric { .. } => "geometric",
                Experiment::VarianceScan { .. } => "variance_scan",
            };
            if found != kind {
                bail!("configuration describes a `{found}` experiment, not `{kind}`");
            }
            cfg
        }
        None => {
            let (law, experiment, tolerances) = flags()?;
            Config { law, experiment, seeds: vec![0], tolerances }
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    Ok(cfg)
}

fn write_report(cli: &Cli, report: &ExperimentReport) -> anyhow::Result<()> {
    match &cli.out {
        Some(dir) => {
            for path in report.write_to(dir, cli.format.into())? {
                eprintln!("wrote {}", path.display());
            }
        }
        None => {
            let body = match cli.format {
                Format::Json => report.to_json(),
                Format::Csv => report.checks_table().to_csv(),
            };
            std::io::stdout().write_all(body.as_bytes())?;
        }
    }
    eprintln!(
        "verdict: {} ({} of {} checks failed)",
        if report.passed() { "pass" } else { "fail" },
        report.verdict.failed,
        report.verdict.checks
    );
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().context("thread pool")?;
    }
    let seed = cli.seed.unwrap_or(0);
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Simulate(a) => {
            let (law, _) = build_law(&a.law)?;
            let checkpoints = if a.checkpoints.is_empty() { vec![a.n] } else { a.checkpoints.clone() };
            let series = simulate_series(&law, &checkpoints, &a.alphas, seed)?;
            match cli.format {
                Format::Csv => emit(out, "simulate.csv", &series.to_csv())?,
                Format::Json => emit(out, "simulate.json", &pretty(&series))?,
            }
        }
        Command::EstimateGamma(a) => {
            let (law, label) = build_law(&a.law)?;
            let est = match a.method {
                GammaMethodArg::Green => green_at_origin(&law, a.horizon as usize, a.tail.parse::<TailMode>()?)?,
                GammaMethodArg::Dp => taboo_estimate(&law, a.horizon as usize)?,
                GammaMethodArg::Mc => mc_escape(&law, a.horizon, a.replicas, seed)?,
            };
            match cli.format {
                Format::Csv => {
                    let method = serde_json::to_value(est.method)?;
                    let body = format!("method,value,error\n{},{},{}\n", method.as_str().unwrap_or(""), est.value, est.error);
                    emit(out, "gamma.csv", &body)?
                }
                Format::Json => emit(out, "gamma.json", &pretty(&json!({"law": label, "estimate": est})))?,
            }
        }
        Command::Predict(a) => {
            let need_gamma = || a.gamma.context("--gamma is required for this quantity");
            let value = match a.quantity {
                Quantity::MomentLimit => serde_json::to_value(moment_limit(a.alpha, need_gamma()?, a.tol)?)?,
                Quantity::QjLimit => json!({"kind": "qj_limit", "j": a.j, "gamma": need_gamma()?, "value": qj_limit(need_gamma()?, a.j)?}),
                Quantity::GeometricPmf => json!({"kind": "geometric_pmf", "u": a.u, "gamma": need_gamma()?, "value": geometric_pmf(need_gamma()?, a.u)?}),
                Quantity::QjGenerating => {
                    let (law, _) = build_law(&a.law)?;
                    let ret = return_law_from_returns(&return_probabilities(&law, a.n)?);
                    serde_json::to_value(qj_generating(&ret, a.j as usize, a.s, a.n)?)?
                }
                Quantity::GreenCrossSum => {
                    let (law, _) = build_law(&a.law)?;
                    json!({"kind": "green_cross_sum", "n": a.n, "value": green_cross_sum(&law, a.n)?})
                }
                Quantity::SupPmf => {
                    let (law, _) = build_law(&a.law)?;
                    json!({"kind": "sup_pmf", "m": a.n, "value": sup_pmf(&law, a.n)?})
                }
            };
            match cli.format {
                Format::Json => emit(out, "predict.json", &pretty(&value))?,
                Format::Csv => emit(out, "predict.csv", &format!("value\n{}\n", value["value"]))?,
            }
        }
        Command::Oracle(a) => {
            let (law, label) = build_law(&a.law)?;
            let s = enumerate(&law, a.n, &a.alphas)?;
            let zn = exact_zn_law(&s);
            let rat = |r| json!({"value": format_rational(r), "decimal": rational_to_f64(r)});
            let body = json!({
                "law": label,
                "n": s.n,
                "expected_q": s.expected_q.iter().enumerate().map(|(i, v)| json!({"j": i + 1, "E": rat(v)})).collect::<Vec<_>>(),
                "l": a.alphas.iter().enumerate().map(|(i, al)| json!({
                    "alpha": al,
                    "mean": rat(&s.expected_l[i]),
                    "second_moment": rat(&s.second_moment_l[i]),
                    "variance": rat(&s.variance_l[i]),
                })).collect::<Vec<_>>(),
                "zn_law": zn.iter().map(|(u, p)| json!({"u": u, "p": rat(p)})).collect::<Vec<_>>(),
                "joint": s.joint.iter().map(|((r, u), p)| json!({"r": r, "u": u, "p": rat(p)})).collect::<Vec<_>>(),
                "gammas": s.gammas.iter().enumerate().map(|(k, g)| json!({"k": k, "gamma": rat(g)})).collect::<Vec<_>>(),
            });
            match cli.format {
                Format::Json => emit(out, "oracle.json", &pretty(&body))?,
                Format::Csv => {
                    let mut csv = String::from("j,E_Q,E_Q_decimal\n");
                    for (i, v) in s.expected_q.iter().enumerate() {
                        csv.push_str(&format!("{},{},{}\n", i + 1, format_rational(v), rational_to_f64(v)));
                    }
                    emit(out, "oracle.csv", &csv)?
                }
            }
        }
        Command::VerifySlln(a) => {
            let cfg = experiment_config(cli, "slln", || {
                let checkpoints = if a.checkpoints.is_empty() { dyadic(1_000_000) } else { a.checkpoints.clone() };
                let exp = Experiment::Slln { alphas: a.alphas.clone(), checkpoints, gamma: gamma_source(&a.gamma)? };
                Ok((law_value(&a.law)?, exp, Tolerances::default()))
            })?;
            let report = run_config(&cfg)?;
            write_report(cli, &report)?;
            return Ok(report.passed());
        }
        Command::VerifyGeometric(a) => {
            let cfg = experiment_config(cli, "geometric", || {
                let exp = Experiment::Geometric { n: a.n, m: a.m, gamma: gamma_source(&a.gamma)? };
                Ok((law_value(&a.law)?, exp, Tolerances::default()))
            })?;
            let report = run_config(&cfg)?;
            write_report(cli, &report)?;
            return Ok(report.passed());
        }
        Command::VarianceScan(a) => {
            let cfg = experiment_config(cli, "variance_scan", || {
                let grid = if a.grid.is_empty() { (10..=16).map(|k| 1u64 << k).collect() } else { a.grid.clone() };
                let exp = Experiment::VarianceScan { alpha: a.alpha, grid, m: a.m };
                let tol = Tolerances { max_slope: a.max_slope, ..Tolerances::default() };
                Ok((law_value(&a.law)?, exp, tol))
            })?;
            let report = run_config(&cfg)?;
            write_report(cli, &report)?;
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
