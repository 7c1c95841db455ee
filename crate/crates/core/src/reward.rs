//! Piecewise tracking reward.
//!
//! Branches are checked in a fixed order: collision, obstruction of the
//! sight line, target inside the footprint, and finally the non-visible
//! penalty. Only the visible branch resets the non-visibility counter.

use crate::error::{Error, Result};
use crate::sim::geometry::{self, Cylinder};
use crate::sim::{EnvConfig, ObstructionModel, WorldState};

#[derive(Debug, Clone, PartialEq)]
pub struct RewardConfig {
    pub r_c: f64,
    pub r_i: f64,
    pub r_v_c: f64,
    pub h_v_c: f64,
    pub r_nv: f64,
    pub beta: f64,
    /// Lower bound on the planar distance in the visible reward.
    pub dist_floor: f64,
    /// Make the non-visible penalty grow with `t_nv` instead of decaying.
    pub inverted_decay: bool,
    /// Step count at which the inverted penalty stops growing.
    pub t_cap: u32,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            r_c: -1500.0,
            r_i: -60.0,
            r_v_c: 3500.0,
            h_v_c: 2000.0,
            r_nv: -25.0,
            beta: 2.0,
            dist_floor: 1.0,
            inverted_decay: false,
            t_cap: 3,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.r_c < 0.0, "R_c < 0"),
            (self.r_i < 0.0, "R_i < 0"),
            (self.r_nv < 0.0, "R_nv < 0"),
            (self.r_v_c > 0.0, "R_v_c > 0"),
            (self.h_v_c > 0.0, "h_v_c > 0"),
            (self.beta > 0.0, "beta > 0"),
            (self.dist_floor > 0.0, "dist_floor > 0"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, what)) => Err(Error::config(format!("{what} violated"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Collision,
    Obstruction,
    Visible,
    NonVisible,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Collision => "collision",
            Branch::Obstruction => "obstruction",
            Branch::Visible => "visible",
            Branch::NonVisible => "non_visible",
        }
    }

    pub fn parse(s: &str) -> Option<Branch> {
        Some(match s {
            "collision" => Branch::Collision,
            "obstruction" => Branch::Obstruction,
            "visible" => Branch::Visible,
            "non_visible" => Branch::NonVisible,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardOutcome {
    pub value: f64,
    pub branch: Branch,
    pub t_nv_after: u32,
}

/// `R_v_c / max(dist_floor, d) + h_v_c / z_D` for planar distance `d`.
pub fn positive_reward(uav: [f64; 3], target: [f64; 2], cfg: &RewardConfig) -> Result<f64> {
    if !(uav[2] > 0.0) {
        return Err(Error::Domain(format!("visible reward needs z_D > 0, got {}", uav[2])));
    }
    let d = (uav[0] - target[0]).hypot(uav[1] - target[1]);
    Ok(cfg.r_v_c / d.max(cfg.dist_floor) + cfg.h_v_c / uav[2])
}

/// `R_nv * exp(-beta * t_nv)`, or the capped growing variant.
pub fn nonvisible_reward(t_nv: u32, cfg: &RewardConfig) -> f64 {
    if cfg.inverted_decay {
        cfg.r_nv * (cfg.beta * t_nv.min(cfg.t_cap) as f64).exp()
    } else {
        cfg.r_nv * (-cfg.beta * t_nv as f64).exp()
    }
}

/// Whether any obstacle blocks the UAV-target sight line under `model`.
pub fn sight_blocked(uav: [f64; 3], target: [f64; 2], obstacles: &[Cylinder<f64>], model: ObstructionModel) -> bool {
    obstacles.iter().any(|o| match model {
        ObstructionModel::Geometric => geometry::obstruction_geometric(uav, target, o),
        ObstructionModel::Literal => geometry::obstruction_literal(uav, target, o),
    })
}

/// Reward for the current world state.
///
/// A collision is either the flag left by the last UAV move or the UAV
/// currently sitting inside an obstacle.
pub fn compute_reward(world: &WorldState, config: &EnvConfig, cfg: &RewardConfig) -> RewardOutcome {
    let uav = world.uav_f64(config);
    let target = world.target_f64();
    let cylinders: Vec<Cylinder<f64>> = config.cylinders().collect();
    let bumped = |value| RewardOutcome { value, branch: Branch::Collision, t_nv_after: world.t_nv + 1 };

    if world.collided || cylinders.iter().any(|c| geometry::collides(uav, c)) {
        return bumped(cfg.r_c);
    }
    if sight_blocked(uav, target, &cylinders, config.obstruction) {
        return RewardOutcome { value: cfg.r_i, branch: Branch::Obstruction, t_nv_after: world.t_nv + 1 };
    }
    if geometry::visible(uav, target, config.theta_fov(), config.fov_shape) {
        let value = positive_reward(uav, target, cfg).expect("validated configs keep z_D > 0");
        return RewardOutcome { value, branch: Branch::Visible, t_nv_after: 0 };
    }
    let t_nv_after = world.t_nv + 1;
    RewardOutcome { value: nonvisible_reward(t_nv_after, cfg), branch: Branch::NonVisible, t_nv_after }
}
