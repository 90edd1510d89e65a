use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use aew_core::aggregate;
use aew_core::harness::{self, ExperimentConfig, PipelineRun};
use aew_core::risk::{excess_risk, PredictionRule};
use aew_core::sieve::{DomainBox, RuleJson};
use aew_core::svm::{self, SvmModelJson};
use aew_core::{Dataset, DyadicPartitionRule, KernelSpec, SolverOptions, SvmModel, SyntheticDist};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "aew", version, about = "Adaptive classification by exponential-weight aggregation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic data.
    #[command(subcommand)]
    Synth(SynthCmd),
    /// Aggregate stored rules on a dataset.
    #[command(subcommand)]
    Aggregate(AggregateCmd),
    /// Fit a single Gaussian-kernel SVM.
    #[command(subcommand)]
    Svm(SvmCmd),
    /// Run one end-to-end pipeline on a synthetic sample.
    Pipeline(PipelineArgs),
    /// Monte-Carlo experiments.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
}

#[derive(Subcommand)]
enum SynthCmd {
    Generate {
        #[arg(long, env = "AEW_ALPHA")]
        alpha: f64,
        #[arg(long, env = "AEW_N")]
        n: usize,
        #[arg(long, env = "AEW_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "AEW_OUT")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum AggregateCmd {
    Run {
        /// Directory of rule JSON files (dyadic or SVM); loaded in file-name order.
        #[arg(long, env = "AEW_RULES")]
        rules: PathBuf,
        #[arg(long, env = "AEW_DATA")]
        data: PathBuf,
        #[arg(long, env = "AEW_KIND", value_enum, default_value_t = AggKind::Aew)]
        kind: AggKind,
        #[arg(long, env = "AEW_OUT")]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AggKind {
    Aew,
    Erm,
    Recursive,
}

#[derive(Subcommand)]
enum SvmCmd {
    Fit {
        #[arg(long, env = "AEW_SIGMA")]
        sigma: f64,
        #[arg(long, env = "AEW_LAMBDA")]
        lambda: f64,
        #[arg(long, env = "AEW_DATA")]
        data: PathBuf,
        #[arg(long, env = "AEW_TOL", default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, env = "AEW_OUT")]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PipelineKind {
    Sieve,
    SvmLambda,
    SvmGrid,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(value_enum)]
    kind: PipelineKind,
    #[arg(long, env = "AEW_ALPHA")]
    alpha: f64,
    #[arg(long, env = "AEW_N")]
    n: usize,
    #[arg(long, env = "AEW_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "AEW_A", default_value_t = 1.0)]
    a: f64,
    #[arg(long, env = "AEW_B0", default_value_t = 0.4)]
    b0: f64,
    #[arg(long, env = "AEW_D0", default_value_t = 1)]
    d0: usize,
    /// Kernel width for `svm-lambda`.
    #[arg(long, env = "AEW_SIGMA", default_value_t = 1.0)]
    sigma: f64,
    /// Ladder height for `sieve`.
    #[arg(long, env = "AEW_DEPTH")]
    depth: Option<usize>,
    #[arg(long, env = "AEW_TOL", default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, env = "AEW_OUT")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ExperimentCmd {
    Rates {
        #[arg(long, env = "AEW_CONFIG")]
        config: PathBuf,
        /// Output directory; overrides `output` in the config.
        #[arg(long, env = "AEW_OUT_DIR")]
        out_dir: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long, env = "AEW_THREADS")]
        threads: Option<usize>,
    },
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_rule(path: &Path) -> Result<PredictionRule> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if value.get("cell_labels").is_some() {
        let json: RuleJson = serde_json::from_value(value)?;
        Ok(PredictionRule::Dyadic(Arc::new(DyadicPartitionRule::from_json(&json)?)))
    } else if value.get("support_points").is_some() {
        let json: SvmModelJson = serde_json::from_value(value)?;
        Ok(PredictionRule::SvmSign(Arc::new(SvmModel::from_json(&json)?)))
    } else {
        bail!("{}: not a dyadic or SVM rule", path.display())
    }
}

fn aggregate_run(rules_dir: &Path, data: &Path, kind: AggKind, out: Option<&Path>) -> Result<()> {
    let mut files: Vec<PathBuf> = fs::read_dir(rules_dir)
        .with_context(|| format!("listing {}", rules_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no rule files in {}", rules_dir.display());
    }
    let rules = files.iter().map(|p| load_rule(p)).collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = files
        .iter()
        .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    let data = Dataset::read_csv(data)?;
    let model = match kind {
        AggKind::Aew => aggregate::aew_aggregate(&rules, &data)?,
        AggKind::Erm => aggregate::erm_aggregate(&rules, &data)?,
        AggKind::Recursive => aggregate::recursive_aggregate(&rules, &data)?,
    };
    let json = serde_json::to_string_pretty(&model.to_json(Some(&names))?)?;
    write_or_print(out, &json)
}

fn svm_fit(sigma: f64, lambda: f64, data: &Path, tol: f64, out: Option<&Path>) -> Result<()> {
    let data = Dataset::read_csv(data)?;
    let opts = SolverOptions { tol, ..SolverOptions::default() };
    let model = svm::solve_dual(&data, KernelSpec::new(sigma)?, lambda, &opts)?;
    if !model.converged() {
        eprintln!("warning: solver stopped with KKT violation {:e}", model.kkt_violation());
    }
    write_or_print(out, &serde_json::to_string_pretty(&model.to_json())?)
}

fn pipeline(args: &PipelineArgs) -> Result<()> {
    let dist = SyntheticDist::new(args.alpha)?;
    let data = dist.sample(args.n, args.seed)?;
    let opts = SolverOptions { tol: args.tol, ..SolverOptions::default() };
    let domain = DomainBox::interval(-1.0, 1.0);
    let (name, run): (&str, PipelineRun) = match args.kind {
        PipelineKind::Sieve => ("sieve", harness::pipeline_sieve(&data, args.a, args.depth, &domain)?),
        PipelineKind::SvmLambda => {
            ("svm-lambda", harness::pipeline_svm_lambda(&data, args.a, args.b0, args.sigma, &opts)?)
        }
        PipelineKind::SvmGrid => {
            ("svm-sigma-lambda", harness::pipeline_svm_sigma_lambda(&data, args.a, args.b0, args.d0, &opts)?)
        }
    };
    let (excess, min_member) = harness::evaluate_run(&run.model, &dist)?;
    let members = run
        .model
        .rules()
        .iter()
        .map(|r| excess_risk(r, &dist))
        .collect::<aew_core::Result<Vec<_>>>()?;
    let report = serde_json::json!({
        "pipeline": name,
        "alpha": args.alpha,
        "n": args.n,
        "seed": args.seed,
        "l": run.plan.l,
        "m": run.plan.m,
        "aggregate": run.model.to_json(None)?,
        "member_excess_risks": members,
        "excess_risk": excess,
        "min_member_excess": min_member,
        "weights_entropy": run.model.weights().entropy(),
        "flagged": run.flagged,
        "excluded": run.excluded,
    });
    write_or_print(args.out.as_deref(), &serde_json::to_string_pretty(&report)?)
}

fn experiment_rates(config: &Path, out_dir: Option<PathBuf>, threads: Option<usize>) -> Result<()> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text).context("parsing experiment config")?;
    let dir = out_dir
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        pool = pool.num_threads(t);
    }
    let result = pool.build()?.install(|| harness::run_rate_experiment(&cfg))?;
    fs::create_dir_all(&dir)?;
    let csv_path = dir.join("results.csv");
    let json_path = dir.join("summary.json");
    fs::write(&csv_path, result.csv_string()?)?;
    fs::write(&json_path, result.summary_json()?)?;
    for f in &result.failures {
        eprintln!("replication n={} r={} failed: {}", f.n, f.replication, f.error);
    }
    if let Some(s) = result.summary.slope {
        eprintln!("slope {s:.4}");
    }
    println!("{}", csv_path.display());
    println!("{}", json_path.display());
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(SynthCmd::Generate { alpha, n, seed, out }) => {
            SyntheticDist::new(alpha)?.sample(n, seed)?.write_csv(&out)?;
        }
        Command::Aggregate(AggregateCmd::Run { rules, data, kind, out }) => {
            aggregate_run(&rules, &data, kind, out.as_deref())?;
        }
        Command::Svm(SvmCmd::Fit { sigma, lambda, data, tol, out }) => {
            svm_fit(sigma, lambda, &data, tol, out.as_deref())?;
        }
        Command::Pipeline(args) => pipeline(&args)?,
        Command::Experiment(ExperimentCmd::Rates { config, out_dir, threads }) => {
            experiment_rates(&config, out_dir, threads)?;
        }
    }
    Ok(())
}
