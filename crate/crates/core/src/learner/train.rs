//! Training loop for the DQN and DDQN agents.

use std::time::Instant;

use log::{debug, info};
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::metrics::{self, RewMode};
use crate::neural::{argmax, Mode, QNetwork, TensorBuf};
use crate::observation::{encode_snapshot, ObsConfig, ObsMode, ObsSnapshot};
use crate::reward::RewardConfig;
use crate::rng::{derive_seed, stream, SimRng};
use crate::rollout::{env_step, row_for};
use crate::sim::{self, Action, EnvConfig};
use crate::trajectory::TrajectoryLog;
use crate::QNet;

use super::replay::{ReplayBuffer, Transition};
use super::schedule::{explore_probability, ScheduleParams};
use super::targets::{ddqn_target_from_values, dqn_target_from_values};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Algo {
    Dqn,
    #[default]
    Ddqn,
}

impl Algo {
    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Dqn => "dqn",
            Algo::Ddqn => "ddqn",
        }
    }

    pub fn parse(s: &str) -> Option<Algo> {
        match s {
            "dqn" => Some(Algo::Dqn),
            "ddqn" => Some(Algo::Ddqn),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainParams {
    pub algo: Algo,
    pub gamma: f64,
    pub lr: f64,
    pub sync_period_tau: u64,
    pub batch_size: usize,
    pub episodes: u32,
    pub replay_capacity: usize,
    /// Transitions stored before the first update.
    pub warmup: usize,
    /// Rewards are multiplied by this before entering the TD targets.
    pub reward_scale: f64,
    /// Keep learning during evaluation episodes.
    pub lifelong: bool,
    /// Two co-trained networks with random role assignment per update.
    pub symmetric: bool,
    /// Write a weights checkpoint every this many episodes; 0 disables.
    pub checkpoint_every: u32,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            algo: Algo::Ddqn,
            gamma: 0.1,
            lr: 0.01,
            sync_period_tau: 500,
            batch_size: 32,
            episodes: 300,
            replay_capacity: 50_000,
            warmup: 500,
            reward_scale: 1e-3,
            lifelong: false,
            symmetric: false,
            checkpoint_every: 0,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ((0.0..1.0).contains(&self.gamma), "gamma ∈ [0,1)"),
            (self.lr > 0.0, "lr > 0"),
            (self.sync_period_tau >= 1, "sync_period_tau >= 1"),
            (self.batch_size >= 1, "batch_size >= 1"),
            (self.replay_capacity >= 1, "replay_capacity >= 1"),
            (self.reward_scale > 0.0, "reward_scale > 0"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, what)) => Err(Error::config(format!("{what} violated"))),
            None => Ok(()),
        }
    }
}

/// Network layout. Grid observations use the convolutional stack, vector
/// observations the dense stack.
#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub hidden: Vec<usize>,
    pub conv_channels: Vec<usize>,
    pub conv_hidden: usize,
    pub batchnorm: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self { hidden: vec![64, 64], conv_channels: vec![8, 8, 8], conv_hidden: 64, batchnorm: false }
    }
}

pub fn build_network<R: Rng + ?Sized>(obs: &ObsConfig, net: &NetConfig, rng: &mut R) -> QNet {
    match obs.mode {
        ObsMode::Vector => QNetwork::mlp(obs.shape()[0], &net.hidden, Action::COUNT, rng),
        ObsMode::Grid => QNetwork::conv(
            [crate::observation::GRID_CHANNELS, obs.crop, obs.crop],
            &net.conv_channels,
            net.batchnorm,
            net.conv_hidden,
            Action::COUNT,
            rng,
        ),
    }
}

/// One gradient step on `online` toward targets from `target`.
///
/// With `Algo::Ddqn` the online network picks the next action and the
/// target network values it. Targets are constants. Returns the mean loss.
pub fn train_step(
    online: &mut QNet,
    target: &QNet,
    batch: &[Transition<TensorBuf<f32>, f32>],
    params: &TrainParams,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Numeric("empty batch".into()));
    }
    let next: Vec<&TensorBuf<f32>> = batch.iter().map(|t| &t.s_next).collect();
    let q_target = target.forward_batch(&next)?;
    let q_online = match params.algo {
        Algo::Ddqn => Some(online.forward_batch(&next)?),
        Algo::Dqn => None,
    };
    let gamma = params.gamma as f32;
    let ys: Vec<f32> = batch
        .iter()
        .enumerate()
        .map(|(i, t)| match &q_online {
            Some(qo) => ddqn_target_from_values(t.r, &qo[i], &q_target[i], t.terminal, gamma),
            None => dqn_target_from_values(t.r, &q_target[i], t.terminal, gamma),
        })
        .collect();
    let items: Vec<(&TensorBuf<f32>, usize, f32)> = batch.iter().zip(&ys).map(|(t, &y)| (&t.s, t.a, y)).collect();
    let grads = online.backward_batch(&items, Mode::Train)?;
    online.sgd_step(&grads, params.lr as f32);
    Ok(grads.loss)
}

/// Replace `target` by a copy of `online` when `step` is a multiple of `tau`.
pub fn sync_target(online: &QNet, target: &mut QNet, step: u64, tau: u64) -> bool {
    if step.is_multiple_of(tau) {
        *target = online.clone_params();
        true
    } else {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub episode: u32,
    pub dis: f64,
    pub time: f64,
    pub rew: f64,
    pub epsilon: f64,
    /// Mean loss over the episode's updates; NaN when none ran.
    pub loss_mean: f64,
}

pub const STATS_HEADER: &str = "episode,DIS,TIME,REW,epsilon,loss_mean";

pub fn stats_csv(stats: &[EpisodeStats]) -> String {
    let mut s = String::from(STATS_HEADER);
    s.push('\n');
    for e in stats {
        s.push_str(&format!("{},{},{},{},{},{}\n", e.episode, e.dis, e.time, e.rew, e.epsilon, e.loss_mean));
    }
    s
}

/// Everything a training or evaluation run needs besides the networks.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub env: EnvConfig,
    pub reward: RewardConfig,
    pub train: TrainParams,
    pub schedule: ScheduleParams,
    pub obs: ObsConfig,
    pub net: NetConfig,
    pub config_hash: String,
}

impl RunSetup {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.reward.validate()?;
        self.train.validate()?;
        self.schedule.validate()?;
        self.obs.validate()
    }
}

/// How exploration is driven during an episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exploration {
    /// Episode schedule with index `k`, plus search mode.
    Schedule(u64),
    /// Greedy, plus search mode.
    Evaluation,
}

/// An agent with its networks, replay memory and random stream.
#[derive(Debug, Clone)]
pub struct Learner {
    pub online: QNet,
    pub target: QNet,
    /// Second network in symmetric mode.
    pub twin: Option<QNet>,
    replay: ReplayBuffer<Transition<ObsSnapshot>>,
    rng: SimRng,
    /// Environment steps taken while learning.
    pub steps: u64,
    pub updates: u64,
}

pub struct TrainOutcome {
    pub net: QNet,
    pub logs: Vec<TrajectoryLog>,
    pub stats: Vec<EpisodeStats>,
    pub wall_seconds: f64,
}

impl Learner {
    /// Fresh networks initialised from the run seed.
    pub fn new(setup: &RunSetup, seed: u64) -> Self {
        let mut init = SimRng::seed_from_u64(derive_seed(seed, stream::INIT, 0));
        let online = build_network(&setup.obs, &setup.net, &mut init);
        let twin = setup.train.symmetric.then(|| build_network(&setup.obs, &setup.net, &mut init));
        Self::from_network(online, twin, setup, seed)
    }

    /// Continue from existing weights; the target starts as a copy.
    pub fn from_network(online: QNet, twin: Option<QNet>, setup: &RunSetup, seed: u64) -> Self {
        let target = online.clone_params();
        let twin = match (setup.train.symmetric, twin) {
            (true, Some(t)) => Some(t),
            (true, None) => Some(online.clone_params()),
            (false, _) => None,
        };
        Self {
            online,
            target,
            twin,
            replay: ReplayBuffer::new(
                setup.train.replay_capacity,
                SimRng::seed_from_u64(derive_seed(seed, stream::REPLAY, 0)),
            ),
            rng: SimRng::seed_from_u64(derive_seed(seed, stream::AGENT, 0)),
            steps: 0,
            updates: 0,
        }
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    pub fn clear_replay(&mut self) {
        self.replay.clear();
    }

    fn action_values(&self, obs: &TensorBuf<f32>) -> Result<Vec<f32>> {
        let mut q = self.online.forward(obs)?;
        if let Some(twin) = &self.twin {
            for (a, b) in q.iter_mut().zip(twin.forward(obs)?) {
                *a += b;
            }
        }
        Ok(q)
    }

    fn choose(&mut self, obs: &TensorBuf<f32>, t_nv: u32, mode: Exploration, sp: &ScheduleParams) -> Result<usize> {
        let k = match mode {
            Exploration::Schedule(k) => Some(k),
            Exploration::Evaluation => None,
        };
        // Draw first so the random stream does not depend on network values.
        let p = super::schedule::random_probability(k, t_nv, sp);
        match super::schedule::draw(p, &mut self.rng) {
            Some(a) => Ok(a),
            None => Ok(argmax(&self.action_values(obs)?)),
        }
    }

    fn update(&mut self, setup: &RunSetup) -> Result<f64> {
        let idx = self.replay.sample_indices(setup.train.batch_size);
        let scale = setup.train.reward_scale;
        let batch: Vec<Transition<TensorBuf<f32>, f32>> = idx
            .iter()
            .map(|&i| {
                let t = self.replay.get(i).expect("sampled index in range");
                Transition {
                    s: encode_snapshot(&t.s, &setup.env, &setup.obs),
                    a: t.a,
                    r: (t.r * scale) as f32,
                    s_next: encode_snapshot(&t.s_next, &setup.env, &setup.obs),
                    terminal: t.terminal,
                }
            })
            .collect();
        self.updates += 1;
        match &mut self.twin {
            None => train_step(&mut self.online, &self.target, &batch, &setup.train),
            Some(twin) => {
                // Coin flip: one network selects and learns, the other evaluates.
                let params = TrainParams { algo: Algo::Ddqn, ..setup.train.clone() };
                if self.rng.gen::<bool>() {
                    let evaluator = twin.clone();
                    symmetric_step(&mut self.online, &evaluator, &batch, &params)
                } else {
                    let evaluator = self.online.clone();
                    symmetric_step(twin, &evaluator, &batch, &params)
                }
            }
        }
    }

    /// One episode. With `learn`, transitions are stored and updates run
    /// after warmup, one per step.
    pub fn run_episode(
        &mut self,
        setup: &RunSetup,
        episode_seed: u64,
        mode: Exploration,
        learn: bool,
    ) -> Result<(TrajectoryLog, f64)> {
        let env = &setup.env;
        let mut world = sim::reset(env, episode_seed)?;
        let mut log = TrajectoryLog::new(episode_seed, setup.config_hash.clone());
        log.rows.reserve(env.t_max as usize);
        let (mut loss_sum, mut loss_n) = (0.0, 0usize);
        loop {
            let snap = ObsSnapshot::of(&world);
            let obs = encode_snapshot::<f32>(&snap, env, &setup.obs);
            let a = self.choose(&obs, world.t_nv, mode, &setup.schedule)?;
            let out = env_step(&mut world, Action::ALL[a], env, &setup.reward);
            log.rows.push(row_for(&world, env, &out));
            if learn {
                self.replay.push(Transition {
                    s: snap,
                    a,
                    r: out.reward.value,
                    s_next: ObsSnapshot::of(&world),
                    terminal: out.done,
                });
                self.steps += 1;
                if self.replay.len() >= setup.train.warmup.max(1) {
                    let loss = self.update(setup).map_err(|e| {
                        e.context(format!("update at step {} (t = {}, action {a})", self.steps, world.t))
                    })?;
                    loss_sum += loss;
                    loss_n += 1;
                }
                if self.twin.is_none() {
                    sync_target(&self.online, &mut self.target, self.steps, setup.train.sync_period_tau);
                }
            }
            if out.done {
                let loss = if loss_n == 0 { f64::NAN } else { loss_sum / loss_n as f64 };
                return Ok((log, loss));
            }
        }
    }

    /// Train for `episodes` episodes with the schedule restarting at `k = 0`.
    pub fn train(
        &mut self,
        setup: &RunSetup,
        seed: u64,
        episodes: u32,
        mut on_episode: impl FnMut(&Learner, &EpisodeStats) -> Result<()>,
    ) -> Result<(Vec<TrajectoryLog>, Vec<EpisodeStats>)> {
        let mut logs = Vec::with_capacity(episodes as usize);
        let mut stats = Vec::with_capacity(episodes as usize);
        for k in 0..episodes {
            let ep_seed = derive_seed(seed, "episode", k as u64);
            let (log, loss) = self
                .run_episode(setup, ep_seed, Exploration::Schedule(k as u64), true)
                .map_err(|e| e.context(format!("episode {k}")))?;
            let st = EpisodeStats {
                episode: k,
                dis: metrics::dis(&log)?,
                time: metrics::time_in_fov(&log)?,
                rew: metrics::rew(&log, RewMode::Mean)?,
                epsilon: explore_probability(k as u64, &setup.schedule),
                loss_mean: loss,
            };
            debug!(
                "episode {k}: DIS {:.2} TIME {} REW {:.2} eps {:.3} loss {:.5}",
                st.dis, st.time, st.rew, st.epsilon, st.loss_mean
            );
            on_episode(self, &st)?;
            logs.push(log);
            stats.push(st);
        }
        Ok((logs, stats))
    }
}

fn symmetric_step(
    learner: &mut QNet,
    evaluator: &QNet,
    batch: &[Transition<TensorBuf<f32>, f32>],
    params: &TrainParams,
) -> Result<f64> {
    let next: Vec<&TensorBuf<f32>> = batch.iter().map(|t| &t.s_next).collect();
    let q_sel = learner.forward_batch(&next)?;
    let q_eval = evaluator.forward_batch(&next)?;
    let gamma = params.gamma as f32;
    let items: Vec<(&TensorBuf<f32>, usize, f32)> = batch
        .iter()
        .enumerate()
        .map(|(i, t)| (&t.s, t.a, ddqn_target_from_values(t.r, &q_sel[i], &q_eval[i], t.terminal, gamma)))
        .collect();
    let grads = learner.backward_batch(&items, Mode::Train)?;
    learner.sgd_step(&grads, params.lr as f32);
    Ok(grads.loss)
}

/// Train a fresh agent for `setup.train.episodes` episodes.
pub fn run_training(setup: &RunSetup, seed: u64) -> Result<TrainOutcome> {
    run_training_with(setup, seed, |_, _| Ok(()))
}

pub fn run_training_with(
    setup: &RunSetup,
    seed: u64,
    on_episode: impl FnMut(&Learner, &EpisodeStats) -> Result<()>,
) -> Result<TrainOutcome> {
    setup.validate()?;
    let start = Instant::now();
    let mut learner = Learner::new(setup, seed);
    let (logs, stats) = learner.train(setup, seed, setup.train.episodes, on_episode)?;
    let wall_seconds = start.elapsed().as_secs_f64();
    info!(
        "trained {} for {} episodes ({} updates) in {:.1}s",
        setup.train.algo.as_str(),
        setup.train.episodes,
        learner.updates,
        wall_seconds
    );
    Ok(TrainOutcome { net: learner.online, logs, stats, wall_seconds })
}

/// Continue training `pretrained` on `setup.env` for
/// `round(budget_fraction * setup.train.episodes)` episodes, with an empty
/// replay memory and the exploration schedule restarted.
pub fn finetune(pretrained: &QNet, setup: &RunSetup, budget_fraction: f64, seed: u64) -> Result<TrainOutcome> {
    setup.validate()?;
    if !(0.0..=1.0).contains(&budget_fraction) {
        return Err(Error::config("budget_fraction in [0,1] violated"));
    }
    if pretrained.input_shape() != setup.obs.shape().as_slice() {
        return Err(Error::Shape { expected: setup.obs.shape(), got: pretrained.input_shape().to_vec() }.context(
            "pretrained network does not match the observation encoding; use the same obs.mode and obs.crop",
        ));
    }
    let start = Instant::now();
    let episodes = (budget_fraction * setup.train.episodes as f64).round() as u32;
    let mut learner = Learner::from_network(pretrained.clone_params(), None, setup, derive_seed(seed, "finetune", 0));
    let (logs, stats) = learner.train(setup, derive_seed(seed, "finetune", 1), episodes, |_, _| Ok(()))?;
    Ok(TrainOutcome { net: learner.online, logs, stats, wall_seconds: start.elapsed().as_secs_f64() })
}
