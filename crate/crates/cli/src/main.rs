use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use uavtrack::config::RunConfig;
use uavtrack::experiment::{self, Agent, EvalOptions, Manifest, Policy};
use uavtrack::metrics::{compare, MetricsReport};
use uavtrack::neural::save_weights;
use uavtrack::sim::WindMode;

/// Config used by an evaluation, saved next to its report.
const CONFIG_FILE: &str = "config.cfg";

#[derive(Parser)]
#[command(name = "uav-track", version, about = "Train and evaluate UAV target-tracking agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write weights, stats, trajectories and a manifest.
    Train(TrainArgs),
    /// Evaluate a trained model, the baseline or a random policy.
    Eval(EvalArgs),
    /// Train and evaluate across wind speeds.
    SweepDrift(SweepArgs),
    /// Fine-tune a trained model on a new environment.
    Curriculum(CurriculumArgs),
    /// Recompute a report from saved trajectory CSVs.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct Common {
    /// Config file (`section.key = value` lines); defaults apply without one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `run.out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        match &self.config {
            Some(p) => Ok(RunConfig::load(p)?),
            None => Ok(RunConfig::default()),
        }
    }

    fn seed(&self, cfg: &RunConfig) -> u64 {
        self.seed.unwrap_or(cfg.seed)
    }

    fn out(&self, cfg: &RunConfig) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.out_dir))
    }
}

fn parse_agent(s: &str) -> Result<Agent, String> {
    Agent::parse(s).ok_or_else(|| format!("unknown agent {s:?}; expected dqn, ddqn, baseline or random"))
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// dqn, ddqn or baseline; defaults to `train.algo`.
    #[arg(long, value_parser = parse_agent)]
    algo: Option<Agent>,
    /// Overrides `train.episodes`.
    #[arg(long)]
    episodes: Option<u32>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Weights file or training run directory.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Use `baseline` or `random` to evaluate without a model.
    #[arg(long, value_parser = parse_agent)]
    algo: Option<Agent>,
    #[arg(long, default_value_t = 20)]
    episodes: usize,
    /// Exponent of the evaluation time in the computation-time metric.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Keep learning while evaluating.
    #[arg(long)]
    lifelong: bool,
    /// Evaluate even if the model was trained under a different config.
    #[arg(long)]
    force: bool,
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Report JSON to compare against; writes `compare.txt`.
    #[arg(long)]
    compare: Option<PathBuf>,
    #[arg(long)]
    label: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = parse_agent, default_value = "ddqn")]
    algo: Agent,
    /// Comma-separated wind speeds.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
    speeds: Vec<f64>,
    /// static or random drift.
    #[arg(long, default_value = "random")]
    mode: String,
    /// Evaluation episodes per speed.
    #[arg(long, default_value_t = 20)]
    episodes: usize,
    #[arg(long, default_value_t = 1)]
    parallel: usize,
}

#[derive(Args)]
struct CurriculumArgs {
    /// Target environment config.
    #[command(flatten)]
    common: Common,
    /// Training run directory of the source model.
    #[arg(long)]
    from: PathBuf,
    /// Fraction of the target config's episode budget spent fine-tuning.
    #[arg(long, default_value_t = 0.2)]
    budget: f64,
    /// Evaluation episodes.
    #[arg(long, default_value_t = 20)]
    episodes: usize,
    #[arg(long, default_value_t = 1)]
    parallel: usize,
}

#[derive(Args)]
struct MetricsArgs {
    /// Directory of trajectory CSVs, or a run directory.
    #[arg(long)]
    trajectories: PathBuf,
    /// Config supplying metric options; otherwise the run manifest's, else defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "recomputed")]
    label: String,
    /// Where to write report.json and report.txt.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg = a.common.load()?;
    if let Some(n) = a.episodes {
        cfg.train.episodes = n;
    }
    let agent = a.algo.unwrap_or(match cfg.train.algo.as_str() {
        "dqn" => Agent::Dqn,
        _ => Agent::Ddqn,
    });
    if agent == Agent::Random {
        bail!("random is an evaluation-only policy");
    }
    let seed = a.common.seed(&cfg);
    let out = a.common.out(&cfg);
    let arts = experiment::train_to_dir(&cfg, agent, seed, &out)?;
    match arts.manifest.t_tr_hours {
        Some(h) => info!("wrote {} ({:.2} s of training)", out.display(), h * 3600.0),
        None => info!("wrote {}", out.display()),
    }
    println!("{}", out.display());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let cfg = a.common.load()?;
    let seed = a.common.seed(&cfg);
    let out = a.common.out(&cfg);
    let (policy, t_tr, name) = match (a.algo, &a.model) {
        (Some(agent @ (Agent::Baseline | Agent::Random)), _) => {
            (Policy::from_agent(agent)?, None, agent.as_str().to_string())
        }
        (_, Some(model)) => {
            let loaded =
                experiment::load_model(model, &cfg, a.force).with_context(|| format!("loading {}", model.display()))?;
            let name = loaded.manifest.as_ref().map_or("model".to_string(), |m| m.agent.clone());
            let t_tr = loaded.manifest.as_ref().and_then(|m| m.t_tr_hours);
            (Policy::Net(loaded.net), t_tr, name)
        }
        (_, None) => bail!("--model is required unless --algo is baseline or random"),
    };
    let opts = EvalOptions { episodes: a.episodes, seed, r: a.r, lifelong: a.lifelong, parallel: a.parallel };
    let label = a.label.unwrap_or(name);
    let res = experiment::evaluate(&cfg, &policy, &label, t_tr, &opts)?;
    experiment::write_eval(&out, &res)?;
    fs::write(out.join(CONFIG_FILE), cfg.to_text()).with_context(|| format!("writing {}", out.display()))?;
    print!("{}", res.report.to_text());
    if let Some(other) = a.compare {
        let text = fs::read_to_string(&other).with_context(|| format!("reading {}", other.display()))?;
        let b = MetricsReport::from_json(&text)?;
        let table = comparison_table(&res.report, &b);
        fs::write(out.join("compare.txt"), &table).with_context(|| format!("writing {}", out.display()))?;
        print!("{table}");
    }
    Ok(())
}

fn comparison_table(a: &MetricsReport, b: &MetricsReport) -> String {
    let mut s = format!("{:<22} {:>14} {:>14}  winner\n", "metric", a.label, b.label);
    for (name, x, y, w) in compare(a, b) {
        let winner = match w {
            "a" => a.label.as_str(),
            "b" => b.label.as_str(),
            _ => "tie",
        };
        s.push_str(&format!("{name:<22} {x:>14.4} {y:>14.4}  {winner}\n"));
    }
    s
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let cfg = a.common.load()?;
    let mode = match a.mode.as_str() {
        "static" => WindMode::Static,
        "random" => WindMode::Random,
        m => bail!("--mode must be static or random, got {m:?}"),
    };
    let seed = a.common.seed(&cfg);
    let out = a.common.out(&cfg);
    let opts = EvalOptions { episodes: a.episodes, seed, parallel: a.parallel, ..EvalOptions::default() };
    let rows = experiment::sweep_drift(&cfg, a.algo, &a.speeds, mode, seed, &opts, Some(&out))?;
    print!("{}", experiment::sweep_csv(&rows));
    Ok(())
}

fn cmd_curriculum(a: CurriculumArgs) -> Result<()> {
    let target = a.common.load()?;
    let seed = a.common.seed(&target);
    let out = a.common.out(&target);
    let manifest = Manifest::load(&a.from).with_context(|| format!("reading source run {}", a.from.display()))?;
    let source = manifest.run_config()?;
    let loaded = experiment::load_model(&a.from, &source, false)?;
    let opts = EvalOptions { episodes: a.episodes, seed, parallel: a.parallel, ..EvalOptions::default() };
    let res = experiment::curriculum(&loaded.net, &source, &target, a.budget, seed, &opts)?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    save_weights(&res.tuned.net, &out.join(experiment::WEIGHTS_FILE))?;
    let mut tuned_cfg = target.clone();
    tuned_cfg.seed = seed;
    Manifest {
        agent: manifest.agent.clone(),
        seed,
        episodes: res.tuned.stats.len() as u32,
        config_hash: target.model_hash(),
        config: tuned_cfg.to_text(),
        t_tr_hours: Some(res.tuned.wall_seconds / 3600.0),
        param_count: Some(res.tuned.net.param_count()),
        weights: Some(experiment::WEIGHTS_FILE.into()),
        ct_applicable: true,
        note: Some(format!("fine-tuned from {} ({})", a.from.display(), res.label)),
    }
    .save(&out)?;
    experiment::write_eval(&out.join("eval"), &res.eval)?;
    print!("{}", res.eval.report.to_text());
    Ok(())
}

fn metrics_config(a: &MetricsArgs) -> Result<RunConfig> {
    if let Some(p) = &a.config {
        return Ok(RunConfig::load(p)?);
    }
    let dir = &a.trajectories;
    for d in [Some(dir.as_path()), dir.parent()].into_iter().flatten() {
        if d.join(CONFIG_FILE).is_file() {
            return Ok(RunConfig::load(&d.join(CONFIG_FILE))?);
        }
        if d.join(experiment::MANIFEST_FILE).is_file() {
            return Ok(Manifest::load(d)?.run_config()?);
        }
    }
    Ok(RunConfig::default())
}

fn cmd_metrics(a: MetricsArgs) -> Result<()> {
    let cfg = metrics_config(&a)?;
    let mut report = experiment::metrics_from_dir(&a.trajectories, &a.label, &cfg.metrics_options())?;
    if let Some(prev) = read_report(&a.trajectories) {
        report.t_tr_hours = prev.t_tr_hours;
        report.t_ev_seconds = prev.t_ev_seconds;
        report.r = prev.r;
        report.ct = prev.ct;
        report.param_count = prev.param_count;
    }
    if let Some(out) = &a.out {
        experiment::write_report(out, &report)?;
    }
    print!("{}", report.to_text());
    Ok(())
}

/// Timing fields cannot be recovered from trajectories; take them from a
/// report saved alongside, if any.
fn read_report(dir: &Path) -> Option<MetricsReport> {
    let text = fs::read_to_string(dir.join(experiment::REPORT_JSON)).ok()?;
    MetricsReport::from_json(&text).ok()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("UAVTRACK_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::SweepDrift(a) => cmd_sweep(a),
        Command::Curriculum(a) => cmd_curriculum(a),
        Command::Metrics(a) => cmd_metrics(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
