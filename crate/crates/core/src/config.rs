//! Run configuration: flat `section.key = value` text.
//!
//! Blank lines and `#` comments are ignored. Missing keys keep their
//! defaults, unknown keys are rejected. [`RunConfig::to_text`] writes every
//! key in a fixed order so that parsing its output gives back the same
//! configuration.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::baseline::BaselineConfig;
use crate::error::{Error, Result};
use crate::learner::{Algo, NetConfig, RunSetup, ScheduleParams, TrainParams};
use crate::metrics::{MetricsOptions, RewMode, TimeMode};
use crate::observation::{ObsConfig, ObsMode};
use crate::reward::RewardConfig;
use crate::sim::{EnvConfig, FovShape, ObstacleSpec, ObstructionModel, WindMode};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsConfig {
    pub k: usize,
    pub dense_count: usize,
    pub sparse_max: usize,
    /// `None` means `0.1 * side_s`.
    pub radius: Option<f64>,
    pub rew_mode: RewMode,
    pub time_mode: TimeMode,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        let d = MetricsOptions::for_side(100);
        Self {
            k: d.k,
            dense_count: d.dense_count,
            sparse_max: d.sparse_max,
            radius: None,
            rew_mode: d.rew_mode,
            time_mode: d.time_mode,
        }
    }
}

impl MetricsConfig {
    pub fn options(&self, side_s: i64) -> MetricsOptions {
        MetricsOptions {
            k: self.k,
            dense_count: self.dense_count,
            sparse_max: self.sparse_max,
            radius: self.radius.unwrap_or(0.1 * side_s as f64),
            rew_mode: self.rew_mode,
            time_mode: self.time_mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub reward: RewardConfig,
    pub train: TrainParams,
    pub schedule: ScheduleParams,
    pub baseline: BaselineConfig,
    pub obs: ObsConfig,
    pub net: NetConfig,
    pub metrics: MetricsConfig,
    pub seed: u64,
    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            reward: RewardConfig::default(),
            train: TrainParams::default(),
            schedule: ScheduleParams::default(),
            baseline: BaselineConfig::default(),
            obs: ObsConfig::default(),
            net: NetConfig::default(),
            metrics: MetricsConfig::default(),
            seed: 0,
            out_dir: "runs".into(),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str, what: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("{key}: expected {what}, got {v:?}"))
}

fn parse_bool(key: &str, v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got {v:?}")),
    }
}

fn parse_list<T: FromStr>(key: &str, v: &str, what: &str) -> std::result::Result<Vec<T>, String> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|p| parse_num(key, p.trim(), what)).collect()
}

fn join<T: Display>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

fn parse_enum<T>(key: &str, v: &str, f: impl Fn(&str) -> Option<T>, options: &str) -> std::result::Result<T, String> {
    f(v).ok_or_else(|| format!("{key}: expected one of {options}, got {v:?}"))
}

fn fov_shape_str(s: FovShape) -> &'static str {
    match s {
        FovShape::Square => "square",
        FovShape::Circle => "circle",
    }
}

fn obstruction_str(m: ObstructionModel) -> &'static str {
    match m {
        ObstructionModel::Geometric => "geometric",
        ObstructionModel::Literal => "literal",
    }
}

fn wind_mode_str(m: WindMode) -> &'static str {
    match m {
        WindMode::None => "none",
        WindMode::Static => "static",
        WindMode::Random => "random",
    }
}

impl RunConfig {
    /// Every key and its value, in canonical order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let e = &self.env;
        let r = &self.reward;
        let t = &self.train;
        let s = &self.schedule;
        let m = &self.metrics;
        let mut out: Vec<(&str, String)> =
            vec![("env.side_s", e.side_s.to_string()), ("env.n_obstacles", e.n_obstacles.to_string())];
        let obstacles: Vec<(String, String)> = e
            .obstacles
            .iter()
            .enumerate()
            .map(|(i, o)| (format!("env.obstacle.{i}"), join(&[o.center[0], o.center[1], o.radius, o.height])))
            .collect();
        out.extend([
            ("env.h_min", e.h_min.to_string()),
            ("env.h_max", e.h_max.to_string()),
            ("env.n_h", e.n_h.to_string()),
            ("env.theta_fov_deg", e.theta_fov_deg.to_string()),
            ("env.fov_shape", fov_shape_str(e.fov_shape).into()),
            ("env.obstruction", obstruction_str(e.obstruction).into()),
            ("env.wind.speed", e.wind.speed.to_string()),
            ("env.wind.mode", wind_mode_str(e.wind.mode).into()),
            ("env.wind.dir", join(&e.wind.static_dir)),
            ("env.road_spacing", e.road_spacing.to_string()),
            ("env.t_max", e.t_max.to_string()),
            ("env.uav_speed", e.uav_speed.to_string()),
            ("env.target_speed", e.target_speed.to_string()),
            ("env.margin_frac", e.margin_frac.to_string()),
            ("env.spawn", e.spawn.map_or("center".into(), |p| join(&p))),
            ("reward.r_c", r.r_c.to_string()),
            ("reward.r_i", r.r_i.to_string()),
            ("reward.r_v_c", r.r_v_c.to_string()),
            ("reward.h_v_c", r.h_v_c.to_string()),
            ("reward.r_nv", r.r_nv.to_string()),
            ("reward.beta", r.beta.to_string()),
            ("reward.dist_floor", r.dist_floor.to_string()),
            ("reward.inverted_decay", r.inverted_decay.to_string()),
            ("reward.t_cap", r.t_cap.to_string()),
            ("train.algo", t.algo.as_str().into()),
            ("train.gamma", t.gamma.to_string()),
            ("train.lr", t.lr.to_string()),
            ("train.sync_period_tau", t.sync_period_tau.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.episodes", t.episodes.to_string()),
            ("train.replay_capacity", t.replay_capacity.to_string()),
            ("train.warmup", t.warmup.to_string()),
            ("train.reward_scale", t.reward_scale.to_string()),
            ("train.lifelong", t.lifelong.to_string()),
            ("train.symmetric", t.symmetric.to_string()),
            ("train.checkpoint_every", t.checkpoint_every.to_string()),
            ("schedule.p_sat", s.p_sat.to_string()),
            ("schedule.alpha", s.alpha.to_string()),
            ("schedule.p_ss", s.p_ss.to_string()),
            ("schedule.t_nv_threshold", s.t_nv_threshold.to_string()),
            ("baseline.fov_theta_deg", self.baseline.fov_theta_deg.to_string()),
            ("baseline.avoid_lookahead", self.baseline.avoid_lookahead.to_string()),
            ("obs.mode", self.obs.mode.as_str().into()),
            ("obs.crop", self.obs.crop.to_string()),
            ("obs.t_nv_scale", self.obs.t_nv_scale.to_string()),
            ("net.hidden", join(&self.net.hidden)),
            ("net.conv_channels", join(&self.net.conv_channels)),
            ("net.conv_hidden", self.net.conv_hidden.to_string()),
            ("net.batchnorm", self.net.batchnorm.to_string()),
            ("metrics.k", m.k.to_string()),
            ("metrics.dense_count", m.dense_count.to_string()),
            ("metrics.sparse_max", m.sparse_max.to_string()),
            ("metrics.radius", m.radius.map_or("auto".into(), |r| r.to_string())),
            ("metrics.rew_mode", m.rew_mode.as_str().into()),
            ("metrics.time_mode", m.time_mode.as_str().into()),
            ("run.seed", self.seed.to_string()),
            ("run.out_dir", self.out_dir.clone()),
        ]);
        let mut entries: Vec<(String, String)> = out.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        entries.splice(2..2, obstacles);
        entries
    }

    /// Canonical text form.
    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Hash of the sections a trained model must agree with to be evaluated:
    /// environment, reward, observation and network.
    pub fn model_hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            let section = k.split('.').next().unwrap_or("");
            if matches!(section, "env" | "reward" | "obs" | "net") {
                h.update(format!("{k}={v}\n").as_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let e = &mut self.env;
        let r = &mut self.reward;
        let t = &mut self.train;
        let s = &mut self.schedule;
        let m = &mut self.metrics;
        const F: &str = "a number";
        const I: &str = "an integer";
        match key {
            "env.side_s" => e.side_s = parse_num(key, v, I)?,
            "env.n_obstacles" => e.n_obstacles = parse_num(key, v, I)?,
            "env.h_min" => e.h_min = parse_num(key, v, F)?,
            "env.h_max" => e.h_max = parse_num(key, v, F)?,
            "env.n_h" => e.n_h = parse_num(key, v, I)?,
            "env.theta_fov_deg" => e.theta_fov_deg = parse_num(key, v, F)?,
            "env.fov_shape" => {
                e.fov_shape = parse_enum(
                    key,
                    v,
                    |x| match x {
                        "square" => Some(FovShape::Square),
                        "circle" => Some(FovShape::Circle),
                        _ => None,
                    },
                    "square, circle",
                )?
            }
            "env.obstruction" => {
                e.obstruction = parse_enum(
                    key,
                    v,
                    |x| match x {
                        "geometric" => Some(ObstructionModel::Geometric),
                        "literal" => Some(ObstructionModel::Literal),
                        _ => None,
                    },
                    "geometric, literal",
                )?
            }
            "env.wind.speed" => e.wind.speed = parse_num(key, v, F)?,
            "env.wind.mode" => {
                e.wind.mode = parse_enum(
                    key,
                    v,
                    |x| match x {
                        "none" => Some(WindMode::None),
                        "static" => Some(WindMode::Static),
                        "random" => Some(WindMode::Random),
                        _ => None,
                    },
                    "none, static, random",
                )?
            }
            "env.wind.dir" => {
                let d: Vec<f64> = parse_list(key, v, "two numbers")?;
                e.wind.static_dir = d.try_into().map_err(|_| format!("{key}: expected two numbers, got {v:?}"))?;
            }
            "env.road_spacing" => e.road_spacing = parse_num(key, v, I)?,
            "env.t_max" => e.t_max = parse_num(key, v, I)?,
            "env.uav_speed" => e.uav_speed = parse_num(key, v, I)?,
            "env.target_speed" => e.target_speed = parse_num(key, v, I)?,
            "env.margin_frac" => e.margin_frac = parse_num(key, v, F)?,
            "env.spawn" => {
                e.spawn = if v == "center" {
                    None
                } else {
                    let p: Vec<i64> = parse_list(key, v, "two integers or center")?;
                    Some(p.try_into().map_err(|_| format!("{key}: expected two integers or center, got {v:?}"))?)
                }
            }
            "reward.r_c" => r.r_c = parse_num(key, v, F)?,
            "reward.r_i" => r.r_i = parse_num(key, v, F)?,
            "reward.r_v_c" => r.r_v_c = parse_num(key, v, F)?,
            "reward.h_v_c" => r.h_v_c = parse_num(key, v, F)?,
            "reward.r_nv" => r.r_nv = parse_num(key, v, F)?,
            "reward.beta" => r.beta = parse_num(key, v, F)?,
            "reward.dist_floor" => r.dist_floor = parse_num(key, v, F)?,
            "reward.inverted_decay" => r.inverted_decay = parse_bool(key, v)?,
            "reward.t_cap" => r.t_cap = parse_num(key, v, I)?,
            "train.algo" => t.algo = parse_enum(key, v, Algo::parse, "dqn, ddqn")?,
            "train.gamma" => t.gamma = parse_num(key, v, F)?,
            "train.lr" => t.lr = parse_num(key, v, F)?,
            "train.sync_period_tau" => t.sync_period_tau = parse_num(key, v, I)?,
            "train.batch_size" => t.batch_size = parse_num(key, v, I)?,
            "train.episodes" => t.episodes = parse_num(key, v, I)?,
            "train.replay_capacity" => t.replay_capacity = parse_num(key, v, I)?,
            "train.warmup" => t.warmup = parse_num(key, v, I)?,
            "train.reward_scale" => t.reward_scale = parse_num(key, v, F)?,
            "train.lifelong" => t.lifelong = parse_bool(key, v)?,
            "train.symmetric" => t.symmetric = parse_bool(key, v)?,
            "train.checkpoint_every" => t.checkpoint_every = parse_num(key, v, I)?,
            "schedule.p_sat" => s.p_sat = parse_num(key, v, F)?,
            "schedule.alpha" => s.alpha = parse_num(key, v, F)?,
            "schedule.p_ss" => s.p_ss = parse_num(key, v, F)?,
            "schedule.t_nv_threshold" => s.t_nv_threshold = parse_num(key, v, I)?,
            "baseline.fov_theta_deg" => self.baseline.fov_theta_deg = parse_num(key, v, F)?,
            "baseline.avoid_lookahead" => self.baseline.avoid_lookahead = parse_num(key, v, I)?,
            "obs.mode" => self.obs.mode = parse_enum(key, v, ObsMode::parse, "grid, vector")?,
            "obs.crop" => self.obs.crop = parse_num(key, v, I)?,
            "obs.t_nv_scale" => self.obs.t_nv_scale = parse_num(key, v, I)?,
            "net.hidden" => self.net.hidden = parse_list(key, v, "a list of integers")?,
            "net.conv_channels" => self.net.conv_channels = parse_list(key, v, "a list of integers")?,
            "net.conv_hidden" => self.net.conv_hidden = parse_num(key, v, I)?,
            "net.batchnorm" => self.net.batchnorm = parse_bool(key, v)?,
            "metrics.k" => m.k = parse_num(key, v, I)?,
            "metrics.dense_count" => m.dense_count = parse_num(key, v, I)?,
            "metrics.sparse_max" => m.sparse_max = parse_num(key, v, I)?,
            "metrics.radius" => {
                m.radius = if v == "auto" { None } else { Some(parse_num(key, v, "a number or auto")?) }
            }
            "metrics.rew_mode" => m.rew_mode = parse_enum(key, v, RewMode::parse, "mean, sum")?,
            "metrics.time_mode" => m.time_mode = parse_enum(key, v, TimeMode::parse, "steps, percent")?,
            "run.seed" => self.seed = parse_num(key, v, I)?,
            "run.out_dir" => self.out_dir = v.to_string(),
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Parse config text; `origin` names the source in error messages.
    pub fn parse_str(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut obstacles: BTreeMap<usize, (usize, ObstacleSpec)> = BTreeMap::new();
        let mut n_obstacles_given = false;
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |msg: String| Error::ConfigParse { path: origin.to_string(), line: line_no, msg };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            if let Some(prev) = seen.insert(key.to_string(), line_no) {
                return Err(err(format!("duplicate key {key:?} (first set on line {prev})")));
            }
            if let Some(idx) = key.strip_prefix("env.obstacle.") {
                let idx: usize = idx.parse().map_err(|_| err(format!("unknown key {key:?}")))?;
                let vals: Vec<f64> = parse_list(key, value, "four numbers x, y, r, h").map_err(err)?;
                let [x, y, r, h]: [f64; 4] = vals
                    .try_into()
                    .map_err(|_| err(format!("{key}: expected four numbers x, y, r, h, got {value:?}")))?;
                obstacles.insert(idx, (line_no, ObstacleSpec::new(x, y, r, h)));
                continue;
            }
            n_obstacles_given |= key == "env.n_obstacles";
            cfg.set(key, value).map_err(err)?;
        }
        if !obstacles.is_empty() {
            for (expected, (&idx, &(line, _))) in obstacles.iter().enumerate() {
                if idx != expected {
                    return Err(Error::ConfigParse {
                        path: origin.to_string(),
                        line,
                        msg: format!("obstacle indices must run 0, 1, 2, ... without gaps; found {idx}"),
                    });
                }
            }
            cfg.env.obstacles = obstacles.into_values().map(|(_, o)| o).collect();
            if !n_obstacles_given {
                cfg.env.n_obstacles = cfg.env.obstacles.len();
            }
        } else if n_obstacles_given && cfg.env.n_obstacles == 0 {
            // An explicit zero with no specs is an open field; any other bare
            // count must match the default layout.
            cfg.env.obstacles.clear();
        }
        cfg.validate().map_err(|e| e.context(origin.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate().map_err(|e| e.context("env"))?;
        self.reward.validate().map_err(|e| e.context("reward"))?;
        self.train.validate().map_err(|e| e.context("train"))?;
        self.schedule.validate().map_err(|e| e.context("schedule"))?;
        self.baseline.validate().map_err(|e| e.context("baseline"))?;
        self.obs.validate().map_err(|e| e.context("obs"))?;
        if self.net.conv_channels.is_empty() || self.net.conv_channels.contains(&0) || self.net.hidden.contains(&0) {
            return Err(Error::config("net: layer widths >= 1 violated"));
        }
        if self.net.conv_hidden == 0 {
            return Err(Error::config("net.conv_hidden >= 1 violated"));
        }
        self.metrics.options(self.env.side_s).validate().map_err(|e| e.context("metrics"))
    }

    pub fn setup(&self) -> RunSetup {
        RunSetup {
            env: self.env.clone(),
            reward: self.reward.clone(),
            train: self.train.clone(),
            schedule: self.schedule.clone(),
            obs: self.obs,
            net: self.net.clone(),
            config_hash: self.model_hash(),
        }
    }

    pub fn metrics_options(&self) -> MetricsOptions {
        self.metrics.options(self.env.side_s)
    }
}
