//! One environment step and whole-episode rollouts.

use crate::error::Result;
use crate::reward::{compute_reward, Branch, RewardConfig, RewardOutcome};
use crate::sim::{self, Action, EnvConfig, Sighting, WorldState};
use crate::trajectory::{TrajectoryLog, TrajectoryRow};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: RewardOutcome,
    /// The target was observed this step (visible branch).
    pub visible: bool,
    /// `t` reached `t_max`; the episode ends after this step.
    pub done: bool,
}

/// Advance the world by one step: UAV move with wind, target move, reward,
/// then the non-visibility counter and last sighting.
pub fn env_step(world: &mut WorldState, action: Action, env: &EnvConfig, rcfg: &RewardConfig) -> StepOutcome {
    sim::step_uav(world, action, env);
    sim::step_target(world, env);
    let reward = compute_reward(world, env, rcfg);
    let visible = reward.branch == Branch::Visible;
    world.t_nv = reward.t_nv_after;
    world.last_seen = if visible {
        Some(Sighting { pos: world.target, age: 0 })
    } else {
        world.last_seen.map(|s| Sighting { age: s.age + 1, ..s })
    };
    world.t += 1;
    StepOutcome { reward, visible, done: world.t >= env.t_max }
}

pub fn row_for(world: &WorldState, env: &EnvConfig, out: &StepOutcome) -> TrajectoryRow {
    TrajectoryRow {
        t: world.t - 1,
        uav: world.uav_f64(env),
        target: world.target_f64(),
        reward: out.reward.value,
        visible: out.visible,
        branch: out.reward.branch,
    }
}

/// Roll out one episode of `t_max` steps with `policy`, logging every step.
///
/// Row `t` holds the positions and reward after the `t`-th action.
pub fn run_episode<F>(
    env: &EnvConfig,
    rcfg: &RewardConfig,
    seed: u64,
    config_hash: &str,
    mut policy: F,
) -> Result<TrajectoryLog>
where
    F: FnMut(&WorldState) -> Action,
{
    let mut world = sim::reset(env, seed)?;
    let mut log = TrajectoryLog::new(seed, config_hash);
    log.rows.reserve(env.t_max as usize);
    loop {
        let a = policy(&world);
        let out = env_step(&mut world, a, env, rcfg);
        log.rows.push(row_for(&world, env, &out));
        if out.done {
            return Ok(log);
        }
    }
}
