//! Experiment orchestration and on-disk layout of runs.
//!
//! A run directory holds `manifest.json`, `weights.tfdq` (learned agents
//! only), `train_stats.csv` and one CSV per episode under `trajectories/`.
//! Evaluation directories hold `report.json`, `report.txt` and their own
//! `trajectories/`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{baseline_action, random_action};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::learner::{finetune, run_training_with, schedule, stats_csv, Algo, Exploration, Learner, TrainOutcome};
use crate::metrics::{report_from_logs, MetricsOptions, MetricsReport};
use crate::neural::{argmax, load_weights, save_weights};
use crate::observation::encode;
use crate::rng::{derive_seed, stream, stream_rng};
use crate::rollout::run_episode;
use crate::sim::{Action, WindMode};
use crate::trajectory::TrajectoryLog;
use crate::QNet;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const WEIGHTS_FILE: &str = "weights.tfdq";
pub const STATS_FILE: &str = "train_stats.csv";
pub const TRAJECTORY_DIR: &str = "trajectories";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Agent {
    Dqn,
    Ddqn,
    Baseline,
    Random,
}

impl Agent {
    pub fn as_str(self) -> &'static str {
        match self {
            Agent::Dqn => "dqn",
            Agent::Ddqn => "ddqn",
            Agent::Baseline => "baseline",
            Agent::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<Agent> {
        Some(match s {
            "dqn" => Agent::Dqn,
            "ddqn" => Agent::Ddqn,
            "baseline" => Agent::Baseline,
            "random" => Agent::Random,
            _ => return None,
        })
    }

    pub fn algo(self) -> Option<Algo> {
        match self {
            Agent::Dqn => Some(Algo::Dqn),
            Agent::Ddqn => Some(Algo::Ddqn),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub agent: String,
    pub seed: u64,
    pub episodes: u32,
    pub config_hash: String,
    /// Canonical config text; parses back to the run's configuration.
    pub config: String,
    pub t_tr_hours: Option<f64>,
    pub param_count: Option<usize>,
    pub weights: Option<String>,
    pub ct_applicable: bool,
    pub note: Option<String>,
}

impl Manifest {
    pub fn run_config(&self) -> Result<RunConfig> {
        RunConfig::parse_str(&self.config, MANIFEST_FILE)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join(MANIFEST_FILE), &serde_json::to_string_pretty(self)?)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn write_logs(dir: &Path, logs: &[TrajectoryLog]) -> Result<()> {
    let tdir = dir.join(TRAJECTORY_DIR);
    create_dir(&tdir)?;
    for (i, log) in logs.iter().enumerate() {
        log.save(&tdir.join(format!("episode_{i:05}.csv")))?;
    }
    Ok(())
}

/// Read every `*.csv` in `dir` in file-name order. A run directory with a
/// `trajectories/` subdirectory is accepted as well.
pub fn read_logs(dir: &Path) -> Result<Vec<TrajectoryLog>> {
    let sub = dir.join(TRAJECTORY_DIR);
    let dir = if sub.is_dir() { sub } else { dir.to_path_buf() };
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Domain(format!("no trajectory CSVs in {}", dir.display())));
    }
    paths.iter().map(|p| TrajectoryLog::load(p)).collect()
}

fn stats_file_text(stats_csv: &str, seed: u64, hash: &str) -> String {
    format!("# seed={seed}\n# config_hash={hash}\n{stats_csv}")
}

pub struct TrainArtifacts {
    pub manifest: Manifest,
    pub net: Option<QNet>,
    pub logs: Vec<TrajectoryLog>,
}

/// Train `agent` under `cfg` and write the run directory.
///
/// The baseline and random agents have nothing to learn; their
/// `train.episodes` rollouts are logged and no weights are written.
pub fn train_to_dir(cfg: &RunConfig, agent: Agent, seed: u64, out: &Path) -> Result<TrainArtifacts> {
    create_dir(out)?;
    let mut cfg = cfg.clone();
    cfg.seed = seed;
    if let Some(algo) = agent.algo() {
        cfg.train.algo = algo;
    }
    let hash = cfg.model_hash();
    let config = cfg.to_text();
    let Some(algo) = agent.algo() else {
        let logs = rollouts(&cfg, &Policy::from_agent(agent)?, seed, "episode", cfg.train.episodes as usize, 1)?
            .into_iter()
            .map(|(log, _)| log)
            .collect::<Vec<_>>();
        write_logs(out, &logs)?;
        let manifest = Manifest {
            agent: agent.as_str().into(),
            seed,
            episodes: cfg.train.episodes,
            config_hash: hash,
            config,
            t_tr_hours: None,
            param_count: None,
            weights: None,
            ct_applicable: false,
            note: Some("no learnable parameters; computation time not applicable".into()),
        };
        manifest.save(out)?;
        return Ok(TrainArtifacts { manifest, net: None, logs });
    };
    info!("training {} for {} episodes, seed {seed}", algo.as_str(), cfg.train.episodes);
    let setup = cfg.setup();
    let every = cfg.train.checkpoint_every;
    let outcome = run_training_with(&setup, seed, |learner, st| {
        if every > 0 && (st.episode + 1) % every == 0 {
            let path = out.join(format!("weights_ep{:05}.tfdq", st.episode + 1));
            save_weights(&learner.online, &path)?;
        }
        Ok(())
    })?;
    save_weights(&outcome.net, &out.join(WEIGHTS_FILE))?;
    write_file(&out.join(STATS_FILE), &stats_file_text(&stats_csv(&outcome.stats), seed, &hash))?;
    write_logs(out, &outcome.logs)?;
    let manifest = Manifest {
        agent: agent.as_str().into(),
        seed,
        episodes: cfg.train.episodes,
        config_hash: hash,
        config,
        t_tr_hours: Some(outcome.wall_seconds / 3600.0),
        param_count: Some(outcome.net.param_count()),
        weights: Some(WEIGHTS_FILE.into()),
        ct_applicable: true,
        note: None,
    };
    manifest.save(out)?;
    Ok(TrainArtifacts { manifest, net: Some(outcome.net), logs: outcome.logs })
}

/// A frozen policy for evaluation rollouts.
#[derive(Debug, Clone)]
pub enum Policy {
    Net(QNet),
    Baseline,
    Random,
}

impl Policy {
    pub fn from_agent(agent: Agent) -> Result<Policy> {
        match agent {
            Agent::Baseline => Ok(Policy::Baseline),
            Agent::Random => Ok(Policy::Random),
            _ => Err(Error::config(format!("agent {} needs a trained model", agent.as_str()))),
        }
    }
}

/// One evaluation episode. Networks act greedily except in search mode;
/// each episode draws from its own streams so episodes are independent.
pub fn policy_episode(cfg: &RunConfig, policy: &Policy, episode_seed: u64) -> Result<TrajectoryLog> {
    let env = &cfg.env;
    let hash = cfg.model_hash();
    match policy {
        Policy::Net(net) => {
            let mut rng = stream_rng(episode_seed, stream::AGENT, 0);
            let mut failure = None;
            let log = run_episode(env, &cfg.reward, episode_seed, &hash, |w| {
                let p = schedule::random_probability(None, w.t_nv, &cfg.schedule);
                let a = match schedule::draw(p, &mut rng) {
                    Some(a) => a,
                    None => match net.forward(&encode::<f32>(w, env, &cfg.obs)) {
                        Ok(q) => argmax(&q),
                        Err(e) => {
                            failure.get_or_insert(e);
                            0
                        }
                    },
                };
                Action::ALL[a]
            })?;
            match failure {
                Some(e) => Err(e),
                None => Ok(log),
            }
        }
        Policy::Baseline => {
            let mut rng = stream_rng(episode_seed, stream::BASELINE, 0);
            run_episode(env, &cfg.reward, episode_seed, &hash, |w| baseline_action(w, env, &cfg.baseline, &mut rng))
        }
        Policy::Random => {
            let mut rng = stream_rng(episode_seed, stream::BASELINE, 0);
            run_episode(env, &cfg.reward, episode_seed, &hash, |_| random_action(&mut rng))
        }
    }
}

/// `count` episodes with seeds `derive_seed(seed, label, i)`, each paired
/// with its wall-clock seconds. Results keep episode order whatever the
/// worker count.
pub fn rollouts(
    cfg: &RunConfig,
    policy: &Policy,
    seed: u64,
    label: &str,
    count: usize,
    parallel: usize,
) -> Result<Vec<(TrajectoryLog, f64)>> {
    let one = |i: usize| {
        let start = Instant::now();
        let log = policy_episode(cfg, policy, derive_seed(seed, label, i as u64))?;
        Ok((log, start.elapsed().as_secs_f64()))
    };
    if parallel <= 1 {
        return (0..count).map(one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    pool.install(|| (0..count).into_par_iter().map(one).collect())
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub episodes: usize,
    pub seed: u64,
    /// Exponent of the evaluation time in the computation-time metric.
    pub r: f64,
    /// Keep learning during evaluation (network policies only).
    pub lifelong: bool,
    pub parallel: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { episodes: 20, seed: 0, r: 1.0, lifelong: false, parallel: 1 }
    }
}

pub struct EvalResult {
    pub report: MetricsReport,
    pub logs: Vec<TrajectoryLog>,
}

/// Roll out `policy` and summarise. `t_tr_hours` enables the
/// computation-time metric.
pub fn evaluate(
    cfg: &RunConfig,
    policy: &Policy,
    label: &str,
    t_tr_hours: Option<f64>,
    opts: &EvalOptions,
) -> Result<EvalResult> {
    let timed: Vec<(TrajectoryLog, f64)> = match (policy, opts.lifelong) {
        (Policy::Net(net), true) => {
            let setup = cfg.setup();
            let mut learner =
                Learner::from_network(net.clone_params(), None, &setup, derive_seed(opts.seed, "lifelong", 0));
            (0..opts.episodes)
                .map(|i| {
                    let start = Instant::now();
                    let ep_seed = derive_seed(opts.seed, stream::EVAL, i as u64);
                    let (log, _) = learner.run_episode(&setup, ep_seed, Exploration::Evaluation, true)?;
                    Ok((log, start.elapsed().as_secs_f64()))
                })
                .collect::<Result<_>>()?
        }
        _ => rollouts(cfg, policy, opts.seed, stream::EVAL, opts.episodes, opts.parallel)?,
    };
    let (logs, secs): (Vec<_>, Vec<_>) = timed.into_iter().unzip();
    let mut report = report_from_logs(label, &logs, &cfg.metrics_options())?;
    report.config_hash = cfg.model_hash();
    if let Policy::Net(net) = policy {
        report.param_count = Some(net.param_count());
    }
    let t_ev = secs.iter().sum::<f64>() / secs.len().max(1) as f64;
    let report = report.with_timing(t_tr_hours, t_ev, opts.r)?;
    Ok(EvalResult { report, logs })
}

pub fn write_report(dir: &Path, report: &MetricsReport) -> Result<()> {
    create_dir(dir)?;
    write_file(&dir.join(REPORT_JSON), &report.to_json()?)?;
    write_file(&dir.join(REPORT_TEXT), &report.to_text())
}

pub fn write_eval(dir: &Path, result: &EvalResult) -> Result<()> {
    write_report(dir, &result.report)?;
    write_logs(dir, &result.logs)
}

/// A trained model together with its run manifest, if one sits beside it.
pub struct LoadedModel {
    pub net: QNet,
    pub manifest: Option<Manifest>,
}

/// Load weights from a file or a run directory, refusing a model trained
/// under a different configuration unless `force` is set.
pub fn load_model(path: &Path, cfg: &RunConfig, force: bool) -> Result<LoadedModel> {
    let (weights, dir) = if path.is_dir() {
        (path.join(WEIGHTS_FILE), path.to_path_buf())
    } else {
        (path.to_path_buf(), path.parent().map(Path::to_path_buf).unwrap_or_default())
    };
    let net = load_weights(&weights)?;
    let manifest = dir.join(MANIFEST_FILE).is_file().then(|| Manifest::load(&dir)).transpose()?;
    if let Some(m) = &manifest {
        let expected = cfg.model_hash();
        if m.config_hash != expected && !force {
            return Err(Error::HashMismatch { model: m.config_hash.clone(), config: expected });
        }
    }
    let shape = cfg.obs.shape();
    if net.input_shape() != shape.as_slice() || net.output_len() != Action::COUNT {
        return Err(Error::Shape { expected: shape, got: net.input_shape().to_vec() }
            .context("model does not match the configured observation encoding"));
    }
    Ok(LoadedModel { net, manifest })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub wind: f64,
    pub agent: String,
    pub dis: f64,
    pub time: f64,
    pub rew: f64,
}

pub const SWEEP_HEADER: &str = "wind,agent,DIS,TIME,REW";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.wind, r.agent, r.dis, r.time, r.rew));
    }
    out
}

/// Train (if needed) and evaluate `agent` at each wind speed. A speed of
/// zero disables wind; other speeds use `mode`.
pub fn sweep_drift(
    cfg: &RunConfig,
    agent: Agent,
    speeds: &[f64],
    mode: WindMode,
    seed: u64,
    eval: &EvalOptions,
    out: Option<&Path>,
) -> Result<Vec<SweepRow>> {
    let point = |wind: f64| -> Result<SweepRow> {
        let mut c = cfg.clone();
        c.env.wind.speed = wind;
        c.env.wind.mode = if wind == 0.0 { WindMode::None } else { mode };
        c.validate()?;
        let dir = out.map(|o| o.join(format!("wind_{wind}")));
        let (policy, t_tr) = match (agent.algo(), &dir) {
            (Some(_), Some(d)) => {
                let arts = train_to_dir(&c, agent, seed, &d.join("train"))?;
                (Policy::Net(arts.net.expect("learned agent")), arts.manifest.t_tr_hours)
            }
            (Some(algo), None) => {
                c.train.algo = algo;
                let o = run_training_with(&c.setup(), seed, |_, _| Ok(()))?;
                (Policy::Net(o.net), Some(o.wall_seconds / 3600.0))
            }
            (None, _) => (Policy::from_agent(agent)?, None),
        };
        let one = EvalOptions { parallel: 1, ..eval.clone() };
        let res = evaluate(&c, &policy, &format!("{} wind={wind}", agent.as_str()), t_tr, &one)?;
        if let Some(d) = &dir {
            write_eval(&d.join("eval"), &res)?;
        }
        Ok(SweepRow {
            wind,
            agent: agent.as_str().into(),
            dis: res.report.dis,
            time: res.report.time_in_fov,
            rew: res.report.rew,
        })
    };
    let rows: Vec<SweepRow> = if eval.parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(eval.parallel)
            .build()
            .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
        pool.install(|| speeds.par_iter().map(|&w| point(w)).collect::<Result<_>>())?
    } else {
        speeds.iter().map(|&w| point(w)).collect::<Result<_>>()?
    };
    if let Some(o) = out {
        create_dir(o)?;
        write_file(&o.join("sweep.csv"), &sweep_csv(&rows))?;
    }
    Ok(rows)
}

/// `"a→b"` from the obstacle counts of the source and target configs.
pub fn curriculum_label(source: &RunConfig, target: &RunConfig) -> String {
    format!("{}→{}", source.env.n_obstacles, target.env.n_obstacles)
}

pub struct CurriculumResult {
    pub label: String,
    pub tuned: TrainOutcome,
    pub eval: EvalResult,
}

/// Fine-tune `source_net` on `target` for `budget` of its episode budget
/// and evaluate it there. The reported training time is the fine-tuning
/// time alone.
pub fn curriculum(
    source_net: &QNet,
    source: &RunConfig,
    target: &RunConfig,
    budget: f64,
    seed: u64,
    eval: &EvalOptions,
) -> Result<CurriculumResult> {
    let label = curriculum_label(source, target);
    let tuned = finetune(source_net, &target.setup(), budget, seed)?;
    let res = evaluate(target, &Policy::Net(tuned.net.clone()), &label, Some(tuned.wall_seconds / 3600.0), eval)?;
    Ok(CurriculumResult { label, tuned, eval: res })
}

/// Recompute a report from persisted trajectories.
pub fn metrics_from_dir(dir: &Path, label: &str, opts: &MetricsOptions) -> Result<MetricsReport> {
    let logs = read_logs(dir)?;
    let mut report = report_from_logs(label, &logs, opts)?;
    report.config_hash = logs[0].config_hash.clone();
    Ok(report)
}
