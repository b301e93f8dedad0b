use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, CommandFactory, Parser, Subcommand};
use harvest::harness::{
    baselines, evaluate, sanity, train_agent, EnvId, ExperimentConfig, HarnessError, Manifest, MetricsWriter, RunContext,
};
use harvest::par::Exec;
use harvest::pde::{residual_rms, sample_interior, solution_error, train_reference};
use harvest::rl::PolicyCheckpoint;

/// Environment variable naming the cache directory for ground-truth grids
/// and reference networks. Defaults to `<out>/cache`.
const CACHE_ENV: &str = "HARVEST_CACHE_DIR";

#[derive(Parser, Debug)]
#[command(name = "harvest", version, about = "Policy-driven training-input selection for Lyapunov networks and PINNs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a TD3 or SAC selection policy.
    TrainRl(RunArgs),
    /// Evaluate a saved policy on the held-out parameter.
    Eval(RunArgs),
    /// Run the fixed-multiplier sweep or the sampler baselines.
    Baseline(RunArgs),
    /// Train a reference network for a PDE instance.
    Reference(RunArgs),
    /// Quick autodiff, sequence and bandit self-checks.
    Sanity,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML config file; every field is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted override, e.g. `pinn.cadence=500`; repeatable and applied
    /// after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory for the manifest, metrics and checkpoints.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Environment: lyapunov, diffusion, wave or burgers.
    #[arg(long)]
    env: Option<String>,
    /// Baseline to run: a sampler name, `uniform`, or a multiplier for
    /// lyapunov. All configured baselines when omitted.
    #[arg(long)]
    selector: Option<String>,
    /// Sets both the evaluation seeds and the training seed to this value.
    #[arg(long)]
    seed: Option<u64>,
    /// Policy checkpoint for `eval`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

/// Usage and configuration errors exit with 2, everything else with 1.
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::fmt::Debug for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn parse_value(text: &str) -> toml::Value {
    let doc = format!("v = {text}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(text.to_string()),
    }
}

fn set_dotted(root: &mut toml::Table, key: &str, value: toml::Value) -> anyhow::Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(usage(format!("malformed override key `{key}`")));
    }
    let mut table = root;
    for p in &parts[..parts.len() - 1] {
        let entry = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| usage(format!("override `{key}`: `{p}` is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// File, then `--env`/`--seed`, then `--set` overrides; validated before
/// anything runs.
fn load_config(args: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let mut table = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            text.parse::<toml::Table>().map_err(|e| usage(format!("{}: {}", path.display(), e.message())))?
        }
        None => toml::Table::new(),
    };
    if let Some(env) = &args.env {
        if EnvId::from_name(env).is_none() {
            return Err(usage(format!("unknown environment `{env}`")));
        }
        table.insert("env".into(), toml::Value::String(env.clone()));
    }
    if let Some(seed) = args.seed {
        let seed = i64::try_from(seed).map_err(|_| usage("seed does not fit a TOML integer"))?;
        table.insert("seeds".into(), toml::Value::Array(vec![toml::Value::Integer(seed)]));
        set_dotted(&mut table, "train.seed", toml::Value::Integer(seed))?;
    }
    for o in &args.overrides {
        let (key, value) = o.split_once('=').ok_or_else(|| usage(format!("override `{o}` is not KEY=VALUE")))?;
        set_dotted(&mut table, key.trim(), parse_value(value.trim()))?;
    }
    let config: ExperimentConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| usage(e.message().to_string()))?;
    config.validate().map_err(|e| usage(e.to_string()))?;
    Ok(config)
}

struct Output {
    dir: PathBuf,
    ctx: RunContext,
}

impl Output {
    fn prepare(args: &RunArgs, command: &str, config: &ExperimentConfig) -> anyhow::Result<Self> {
        std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
        let cache = std::env::var_os(CACHE_ENV).map(PathBuf::from).unwrap_or_else(|| args.out.join("cache"));
        Manifest::new(command, config, args.checkpoint.as_deref()).save(&args.out.join("manifest.json"))?;
        Ok(Self { dir: args.out.clone(), ctx: RunContext { cache: Some(cache), exec: Exec::default() } })
    }

    fn metrics(&self) -> Result<MetricsWriter<std::fs::File>, HarnessError> {
        MetricsWriter::create(&self.dir.join("metrics.csv"))
    }
}

fn train_rl(args: &RunArgs) -> anyhow::Result<()> {
    let config = load_config(args)?;
    if config.agent.kind().is_none() {
        return Err(usage("train-rl needs agent = \"td3\" or \"sac\""));
    }
    let out = Output::prepare(args, "train-rl", &config)?;
    let mut sink = out.metrics()?;
    let checkpoint = train_agent(&config, &out.ctx, &mut sink)?;
    let path = out.dir.join("policy.json");
    checkpoint.save(&path)?;
    eprintln!("trained {} episodes; policy written to {}", checkpoint.episodes, path.display());
    Ok(())
}

fn eval(args: &RunArgs) -> anyhow::Result<()> {
    let config = load_config(args)?;
    let path = args.checkpoint.as_deref().ok_or_else(|| usage("eval needs --checkpoint"))?;
    let checkpoint = load_checkpoint(path)?;
    let out = Output::prepare(args, "eval", &config)?;
    let logs = evaluate(&config, &checkpoint, &out.ctx, &mut out.metrics()?)?;
    let finals: Vec<f64> = logs.iter().map(|l| l.final_metric).collect();
    eprintln!("final metric per seed: {finals:?}");
    Ok(())
}

fn load_checkpoint(path: &Path) -> anyhow::Result<PolicyCheckpoint> {
    if !path.exists() {
        bail!("checkpoint not found: {}", path.display());
    }
    PolicyCheckpoint::load(path).with_context(|| format!("loading {}", path.display()))
}

/// Rejects an unknown selector before any output is written.
fn check_selector(config: &ExperimentConfig, selector: &str) -> anyhow::Result<()> {
    let mut probe = config.clone();
    if config.env == EnvId::Lyapunov {
        let alpha = selector.parse().map_err(|_| usage(format!("`{selector}` is not a multiplier")))?;
        probe.baseline.alphas = vec![alpha];
    } else {
        probe.baseline.selectors = vec![selector.to_string()];
    }
    probe.validate().map_err(|e| usage(e.to_string()))
}

fn baseline(args: &RunArgs) -> anyhow::Result<()> {
    let config = load_config(args)?;
    if let Some(selector) = &args.selector {
        check_selector(&config, selector)?;
    }
    let out = Output::prepare(args, "baseline", &config)?;
    let results = baselines(&config, args.selector.as_deref(), &out.ctx, &mut out.metrics()?)?;
    for (name, logs) in results {
        let finals: Vec<f64> = logs.iter().map(|l| l.final_metric).collect();
        eprintln!("{name}: final metric per seed {finals:?}");
    }
    Ok(())
}

fn reference(args: &RunArgs) -> anyhow::Result<()> {
    let config = load_config(args)?;
    let pde = config.env.pde().ok_or_else(|| usage("reference needs a PDE environment"))?;
    let out = Output::prepare(args, "reference", &config)?;
    let z = config.pinn.z_test_for(pde);
    let problem = harvest::pde::make_problem(pde, z)?;
    let trained = train_reference(&problem, &config.pinn.reference, config.pinn.reference_seed)?;
    let path = out.dir.join(format!("reference_{}_z{z}.json", pde.name()));
    trained.checkpoint.save(&path)?;
    let mut rng = harvest::seed::stream(config.pinn.reference_seed, "reference/check", 0);
    let check = sample_interior(&problem.domain, config.pinn.test_points, &mut rng);
    let net = &trained.checkpoint;
    eprintln!("reference written to {}", path.display());
    eprintln!("training residual rms {:.3e}", trained.train_residual_rms);
    eprintln!("fresh-point residual rms {:.3e}", residual_rms(&problem, &net.spec, &net.params, &check));
    if problem.has_closed_form() {
        eprintln!("relative L2 error vs closed form {:.3e}", solution_error(&problem, &net.spec, &net.params, &check)?);
    }
    Ok(())
}

fn run_sanity() -> anyhow::Result<()> {
    let results = sanity::run_sanity();
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if !failed.is_empty() {
        bail!("sanity checks failed: {}", failed.join(", "));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (name, result) = match &cli.command {
        Command::TrainRl(a) => ("train-rl", train_rl(a)),
        Command::Eval(a) => ("eval", eval(a)),
        Command::Baseline(a) => ("baseline", baseline(a)),
        Command::Reference(a) => ("reference", reference(a)),
        Command::Sanity => ("sanity", run_sanity()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let config_error = matches!(e.downcast_ref::<HarnessError>(), Some(HarnessError::Config { .. }));
            let code = if config_error || e.downcast_ref::<UsageError>().is_some() { 2 } else { 1 };
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            eprintln!("error: {}", chain.join(": ").replace('\n', " "));
            if code == 2 {
                let mut cmd = Cli::command();
                cmd.build();
                if let Some(sub) = cmd.find_subcommand_mut(name) {
                    eprintln!("{}", sub.render_usage());
                }
            }
            ExitCode::from(code)
        }
    }
}
