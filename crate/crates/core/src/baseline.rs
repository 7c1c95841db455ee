//! Heuristic pursuit policy: move toward the target while it is in view,
//! wander at random otherwise, and refuse moves that would hit an obstacle.

use rand::Rng;

use crate::error::{Error, Result};
use crate::sim::{commanded_move, geometry, Action, EnvConfig, WorldState};

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    /// Half-angle of the baseline's own field of view, degrees.
    pub fov_theta_deg: f64,
    /// Steps of look-ahead for obstacle avoidance; only 1 is supported.
    pub avoid_lookahead: u32,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { fov_theta_deg: 30.0, avoid_lookahead: 1 }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fov_theta_deg > 0.0 && self.fov_theta_deg < 90.0) {
            return Err(Error::config("baseline.fov_theta in (0, pi/2) violated"));
        }
        if self.avoid_lookahead != 1 {
            return Err(Error::config("baseline.avoid_lookahead = 1 violated"));
        }
        Ok(())
    }

    pub fn fov_theta(&self) -> f64 {
        self.fov_theta_deg.to_radians()
    }
}

const MAX_TRIES: usize = 6;

/// Whether the baseline sees the target (perfect detection inside its FOV).
pub fn baseline_sees(world: &WorldState, env: &EnvConfig, bcfg: &BaselineConfig) -> bool {
    geometry::visible(world.uav_f64(env), world.target_f64(), bcfg.fov_theta(), env.fov_shape)
}

fn vertical_rank(a: Action, level: u32, mid: u32) -> u8 {
    let toward = match a {
        Action::Up => level <= mid,
        Action::Down => level >= mid,
        _ => unreachable!(),
    };
    if toward {
        2
    } else {
        3
    }
}

/// Distance-minimising action toward a visible target.
///
/// The best planar move is taken unless it collides; then the best
/// non-colliding move among all six. Candidates are ranked by post-move
/// planar distance, then by preferring the axis with the larger gap, then
/// vertical moves toward the cruise level, then by action index.
pub fn pursuit_action(world: &WorldState, env: &EnvConfig) -> Action {
    let [tx, ty] = world.target;
    let gap_x = (tx - world.uav.x).abs();
    let gap_y = (ty - world.uav.y).abs();
    let mid = env.mid_level();
    let key = |a: Action| {
        let next = commanded_move(world.uav, a, env);
        let d = ((next.x - tx) as f64).hypot((next.y - ty) as f64);
        let rank = match a {
            Action::East | Action::West => u8::from(gap_x < gap_y),
            Action::North | Action::South => u8::from(gap_x >= gap_y),
            Action::Up | Action::Down => vertical_rank(a, world.uav.level, mid),
        };
        (d, rank, a.index())
    };
    let best = |pool: &mut dyn Iterator<Item = Action>| {
        pool.min_by(|a, b| {
            let (ka, kb) = (key(*a), key(*b));
            ka.0.total_cmp(&kb.0).then(ka.1.cmp(&kb.1)).then(ka.2.cmp(&kb.2))
        })
    };
    let safe = |a: &Action| !env.collides_any(commanded_move(world.uav, *a, env));
    let planar = best(&mut Action::PLANAR.into_iter()).expect("four planar moves");
    if safe(&planar) {
        return planar;
    }
    best(&mut Action::ALL.into_iter().filter(safe))
        .unwrap_or_else(|| best(&mut Action::ALL.into_iter()).expect("six candidates"))
}

/// Uniform random action, resampling colliding ones up to six times.
pub fn wander_action<R: Rng + ?Sized>(world: &WorldState, env: &EnvConfig, rng: &mut R) -> Action {
    let mut a = Action::North;
    for _ in 0..MAX_TRIES {
        a = Action::ALL[rng.gen_range(0..Action::COUNT)];
        if !env.collides_any(commanded_move(world.uav, a, env)) {
            break;
        }
    }
    a
}

/// The baseline policy: pursue when the target is in view; otherwise climb
/// or descend to the cruise level, then wander.
pub fn baseline_action<R: Rng + ?Sized>(
    world: &WorldState,
    env: &EnvConfig,
    bcfg: &BaselineConfig,
    rng: &mut R,
) -> Action {
    if baseline_sees(world, env, bcfg) {
        return pursuit_action(world, env);
    }
    let mid = env.mid_level();
    let toward_mid = match world.uav.level.cmp(&mid) {
        std::cmp::Ordering::Less => Some(Action::Up),
        std::cmp::Ordering::Greater => Some(Action::Down),
        std::cmp::Ordering::Equal => None,
    };
    if let Some(a) = toward_mid {
        if !env.collides_any(commanded_move(world.uav, a, env)) {
            return a;
        }
    }
    wander_action(world, env, rng)
}

/// Uniformly random action, ignoring obstacles.
pub fn random_action<R: Rng + ?Sized>(rng: &mut R) -> Action {
    Action::ALL[rng.gen_range(0..Action::COUNT)]
}
