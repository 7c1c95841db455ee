//! Tracking evaluation: generalized (DIS, TIME, REW), success-based
//! (tracking time, tracking success), error-based (RMSE, AEE, AHE, AGE) and
//! computation-based (CT) metrics.

mod checkpoints;

use serde::{Deserialize, Serialize};

pub use checkpoints::{place_checkpoints_dense, place_checkpoints_sparse, spaced_indices, Checkpoint};

use crate::error::{Error, Result};
use crate::trajectory::TrajectoryLog;

/// Floor applied to per-sample errors in AHE and AGE.
pub const ERROR_FLOOR: f64 = 1e-9;

fn non_empty(log: &TrajectoryLog) -> Result<()> {
    if log.is_empty() {
        return Err(Error::Domain("empty trajectory log".into()));
    }
    Ok(())
}

fn mean_over<F: Fn(&TrajectoryLog) -> Result<f64>>(logs: &[TrajectoryLog], f: F) -> Result<f64> {
    if logs.is_empty() {
        return Err(Error::Domain("no episodes".into()));
    }
    let mut sum = 0.0;
    for log in logs {
        sum += f(log)?;
    }
    Ok(sum / logs.len() as f64)
}

/// Mean planar UAV-target distance over the episode.
pub fn dis(log: &TrajectoryLog) -> Result<f64> {
    non_empty(log)?;
    Ok(log.rows.iter().map(|r| r.planar_distance()).sum::<f64>() / log.len() as f64)
}

/// Number of steps with the target in view.
pub fn time_in_fov(log: &TrajectoryLog) -> Result<f64> {
    non_empty(log)?;
    Ok(log.rows.iter().filter(|r| r.visible).count() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewMode {
    /// Mean per-step reward.
    #[default]
    Mean,
    /// Episode total.
    Sum,
}

impl RewMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RewMode::Mean => "mean",
            RewMode::Sum => "sum",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mean" => Some(RewMode::Mean),
            "sum" => Some(RewMode::Sum),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeMode {
    /// In-view step count.
    #[default]
    Steps,
    /// In-view steps as a percentage of the episode.
    Percent,
}

impl TimeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeMode::Steps => "steps",
            TimeMode::Percent => "percent",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "steps" => Some(TimeMode::Steps),
            "percent" => Some(TimeMode::Percent),
            _ => None,
        }
    }
}

pub fn rew(log: &TrajectoryLog, mode: RewMode) -> Result<f64> {
    non_empty(log)?;
    let total: f64 = log.rows.iter().map(|r| r.reward).sum();
    Ok(match mode {
        RewMode::Mean => total / log.len() as f64,
        RewMode::Sum => total,
    })
}

fn time_with_mode(log: &TrajectoryLog, mode: TimeMode) -> Result<f64> {
    let steps = time_in_fov(log)?;
    Ok(match mode {
        TimeMode::Steps => steps,
        TimeMode::Percent => 100.0 * steps / log.len() as f64,
    })
}

pub fn dis_batch(logs: &[TrajectoryLog]) -> Result<f64> {
    mean_over(logs, dis)
}

pub fn time_batch(logs: &[TrajectoryLog]) -> Result<f64> {
    mean_over(logs, time_in_fov)
}

pub fn rew_batch(logs: &[TrajectoryLog], mode: RewMode) -> Result<f64> {
    mean_over(logs, |l| rew(l, mode))
}

/// Percentage of steps the UAV spends inside at least one checkpoint.
pub fn tracking_time_pct(uav_path: &[[f64; 2]], checkpoints: &[Checkpoint]) -> Result<f64> {
    if uav_path.is_empty() || checkpoints.is_empty() {
        return Err(Error::Domain("tracking time needs a path and checkpoints".into()));
    }
    let inside = uav_path.iter().filter(|p| checkpoints.iter().any(|c| c.contains(**p))).count();
    Ok(100.0 * inside as f64 / uav_path.len() as f64)
}

/// Percentage of checkpoints the UAV enters at some step.
pub fn tracking_success_pct(uav_path: &[[f64; 2]], checkpoints: &[Checkpoint]) -> Result<f64> {
    if uav_path.is_empty() || checkpoints.is_empty() {
        return Err(Error::Domain("tracking success needs a path and checkpoints".into()));
    }
    let reached = checkpoints.iter().filter(|c| uav_path.iter().any(|p| c.contains(*p))).count();
    Ok(100.0 * reached as f64 / checkpoints.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub rmse: f64,
    pub aee: f64,
    pub ahe: f64,
    pub age: f64,
}

/// Error metrics from per-sample 1-norm errors `d1` and squared Euclidean
/// errors `d2`.
pub fn error_metrics_from_samples(d1: &[f64], d2: &[f64]) -> Result<ErrorMetrics> {
    let k = d1.len();
    if k == 0 || d2.len() != k {
        return Err(Error::Domain(format!("error metrics need K >= 1 matched samples, got {k} and {}", d2.len())));
    }
    let kf = k as f64;
    let rmse = (d2.iter().sum::<f64>() / kf).sqrt();
    let aee = d1.iter().sum::<f64>() / kf;
    let ahe = kf / d1.iter().map(|d| 1.0 / d.max(ERROR_FLOOR)).sum::<f64>();
    let age = (d1.iter().map(|d| d.max(ERROR_FLOOR).ln()).sum::<f64>() / kf).exp();
    Ok(ErrorMetrics { rmse, aee, ahe, age })
}

/// RMSE, AEE, AHE and AGE between the two paths sampled at `k` equally
/// spaced common times.
pub fn error_metrics(uav_path: &[[f64; 2]], target_path: &[[f64; 2]], k: usize) -> Result<ErrorMetrics> {
    let len = uav_path.len().min(target_path.len());
    if k == 0 {
        return Err(Error::Domain("K must be >= 1".into()));
    }
    if len == 0 {
        return Err(Error::Domain("paths have no common samples".into()));
    }
    let (d1, d2): (Vec<f64>, Vec<f64>) = spaced_indices(len, k)
        .into_iter()
        .map(|i| {
            let dx = uav_path[i][0] - target_path[i][0];
            let dy = uav_path[i][1] - target_path[i][1];
            (dx.abs() + dy.abs(), dx * dx + dy * dy)
        })
        .unzip();
    error_metrics_from_samples(&d1, &d2)
}

/// `t_tr * t_ev^r` with training time in hours and evaluation time in seconds.
pub fn computation_time(t_tr_hours: f64, t_ev_seconds: f64, r: f64) -> Result<f64> {
    if !(r >= 1.0) {
        return Err(Error::Domain(format!("CT exponent r must be >= 1, got {r}")));
    }
    if t_tr_hours < 0.0 || t_ev_seconds < 0.0 {
        return Err(Error::Domain("CT times must be non-negative".into()));
    }
    Ok(t_tr_hours * t_ev_seconds.powf(r))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsOptions {
    /// Samples per episode for the error metrics.
    pub k: usize,
    pub dense_count: usize,
    pub sparse_max: usize,
    /// Checkpoint radius in grid units.
    pub radius: f64,
    pub rew_mode: RewMode,
    pub time_mode: TimeMode,
}

impl MetricsOptions {
    /// Defaults for a square of side `side_s`: radius `0.1 * side_s`.
    pub fn for_side(side_s: i64) -> Self {
        Self {
            k: 50,
            dense_count: 15,
            sparse_max: 10,
            radius: 0.1 * side_s as f64,
            rew_mode: RewMode::Mean,
            time_mode: TimeMode::Steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::config("metrics.k >= 1 violated"));
        }
        if self.dense_count < 2 {
            return Err(Error::config("metrics.dense_count >= 2 violated"));
        }
        if self.sparse_max < 2 {
            return Err(Error::config("metrics.sparse_max >= 2 violated"));
        }
        if !(self.radius > 0.0) {
            return Err(Error::config("metrics.radius > 0 violated"));
        }
        Ok(())
    }
}

/// Episode-averaged evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub label: String,
    pub episodes: usize,
    /// Grid units.
    pub dis: f64,
    /// Steps, or percent of the episode with `time_mode = percent`.
    pub time_in_fov: f64,
    /// Reward units per step, or per episode with `rew_mode = sum`.
    pub rew: f64,
    /// Percent.
    pub tracking_time_pct: f64,
    /// Percent.
    pub tracking_success_pct: f64,
    /// Grid units.
    pub rmse: f64,
    pub aee: f64,
    pub ahe: f64,
    pub age: f64,
    /// Hours.
    pub t_tr_hours: Option<f64>,
    /// Mean seconds per evaluation episode.
    pub t_ev_seconds: Option<f64>,
    pub r: f64,
    /// `None` where there is no training (baseline policies).
    pub ct: Option<f64>,
    pub param_count: Option<usize>,
    pub config_hash: String,
    pub options: MetricsOptions,
}

/// Per-episode metrics, then the mean over episodes.
pub fn report_from_logs(label: &str, logs: &[TrajectoryLog], opts: &MetricsOptions) -> Result<MetricsReport> {
    opts.validate()?;
    if logs.is_empty() {
        return Err(Error::Domain("no episodes to evaluate".into()));
    }
    let mut acc = [0.0f64; 9];
    for log in logs {
        let uav = log.uav_path();
        let target = log.target_path();
        let dense = if target.len() >= 2 {
            place_checkpoints_dense(&target, opts.dense_count.min(target.len()), opts.radius)?
        } else {
            vec![Checkpoint { position: target[0], radius: opts.radius }]
        };
        let sparse = place_checkpoints_sparse(&target, opts.sparse_max, opts.radius)?;
        let err = error_metrics(&uav, &target, opts.k.min(uav.len()))?;
        let vals = [
            dis(log)?,
            time_with_mode(log, opts.time_mode)?,
            rew(log, opts.rew_mode)?,
            tracking_time_pct(&uav, &dense)?,
            tracking_success_pct(&uav, &sparse)?,
            err.rmse,
            err.aee,
            err.ahe,
            err.age,
        ];
        for (a, v) in acc.iter_mut().zip(vals) {
            *a += v;
        }
    }
    let n = logs.len() as f64;
    let m = acc.map(|a| a / n);
    Ok(MetricsReport {
        label: label.to_string(),
        episodes: logs.len(),
        dis: m[0],
        time_in_fov: m[1],
        rew: m[2],
        tracking_time_pct: m[3],
        tracking_success_pct: m[4],
        rmse: m[5],
        aee: m[6],
        ahe: m[7],
        age: m[8],
        t_tr_hours: None,
        t_ev_seconds: None,
        r: 1.0,
        ct: None,
        param_count: None,
        config_hash: logs[0].config_hash.clone(),
        options: opts.clone(),
    })
}

impl MetricsReport {
    /// Fill in timing and the computation-time metric.
    pub fn with_timing(mut self, t_tr_hours: Option<f64>, t_ev_seconds: f64, r: f64) -> Result<Self> {
        self.t_tr_hours = t_tr_hours;
        self.t_ev_seconds = Some(t_ev_seconds);
        self.r = r;
        self.ct = match t_tr_hours {
            Some(t) => Some(computation_time(t, t_ev_seconds, r)?),
            None => {
                computation_time(0.0, t_ev_seconds, r)?;
                None
            }
        };
        Ok(self)
    }

    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6}"));
        let mut lines = vec![
            format!("label: {}", self.label),
            format!("episodes: {}", self.episodes),
            format!("dis: {:.6}", self.dis),
            format!("time_in_fov ({}): {:.6}", self.options.time_mode.as_str(), self.time_in_fov),
            format!("rew ({}): {:.6}", self.options.rew_mode.as_str(), self.rew),
            format!("tracking_time_pct: {:.6}", self.tracking_time_pct),
            format!("tracking_success_pct: {:.6}", self.tracking_success_pct),
            format!("rmse: {:.6}", self.rmse),
            format!("aee: {:.6}", self.aee),
            format!("ahe: {:.6}", self.ahe),
            format!("age: {:.6}", self.age),
            format!("t_tr_hours: {}", opt(self.t_tr_hours)),
            format!("t_ev_seconds: {}", opt(self.t_ev_seconds)),
            format!("r: {}", self.r),
            format!("ct: {}", opt(self.ct)),
        ];
        lines.push(format!("param_count: {}", self.param_count.map_or("n/a".to_string(), |p| p.to_string())));
        lines.push(format!("config_hash: {}", self.config_hash));
        lines.join("\n") + "\n"
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Which of two reports wins each generalized and error metric.
///
/// Lower is better for distances and errors, higher for the rest.
pub fn compare(a: &MetricsReport, b: &MetricsReport) -> Vec<(&'static str, f64, f64, &'static str)> {
    let rows: [(&'static str, f64, f64, bool); 9] = [
        ("dis", a.dis, b.dis, false),
        ("time_in_fov", a.time_in_fov, b.time_in_fov, true),
        ("rew", a.rew, b.rew, true),
        ("tracking_time_pct", a.tracking_time_pct, b.tracking_time_pct, true),
        ("tracking_success_pct", a.tracking_success_pct, b.tracking_success_pct, true),
        ("rmse", a.rmse, b.rmse, false),
        ("aee", a.aee, b.aee, false),
        ("ahe", a.ahe, b.ahe, false),
        ("age", a.age, b.age, false),
    ];
    rows.into_iter()
        .map(|(name, x, y, higher)| {
            let winner = if x == y {
                "tie"
            } else if (x > y) == higher {
                "a"
            } else {
                "b"
            };
            (name, x, y, winner)
        })
        .collect()
}
