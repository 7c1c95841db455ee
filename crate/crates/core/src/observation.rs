//! State encodings fed to the network.
//!
//! The target position is only known through the last sighting, so the
//! encodings carry the last-seen position and how stale it is rather than
//! the true target position.

use crate::error::{Error, Result};
use crate::neural::TensorBuf;
use crate::scalar::Scalar;
use crate::sim::{self, EnvConfig, Sighting, UavPos, WorldState};

/// Per-step decay applied to the last-seen target signal.
pub const STALENESS_DECAY: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObsMode {
    /// Local occupancy crop centred on the UAV, `4 x crop x crop`.
    #[default]
    Grid,
    /// Flat feature vector of length [`VECTOR_LEN`].
    Vector,
}

impl ObsMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ObsMode::Grid => "grid",
            ObsMode::Vector => "vector",
        }
    }

    pub fn parse(s: &str) -> Option<ObsMode> {
        match s {
            "grid" => Some(ObsMode::Grid),
            "vector" => Some(ObsMode::Vector),
            _ => None,
        }
    }
}

pub const GRID_CHANNELS: usize = 4;
pub const VECTOR_LEN: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObsConfig {
    pub mode: ObsMode,
    /// Side of the grid crop; odd so the UAV sits on the centre cell.
    pub crop: usize,
    /// `t_nv` value that maps to the top of the feature range.
    pub t_nv_scale: u32,
}

impl Default for ObsConfig {
    fn default() -> Self {
        Self { mode: ObsMode::Grid, crop: 21, t_nv_scale: 20 }
    }
}

impl ObsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.crop == 0 || self.crop.is_multiple_of(2) {
            return Err(Error::config("obs.crop odd and >= 1 violated"));
        }
        if self.t_nv_scale == 0 {
            return Err(Error::config("obs.t_nv_scale >= 1 violated"));
        }
        Ok(())
    }

    pub fn shape(&self) -> Vec<usize> {
        match self.mode {
            ObsMode::Grid => vec![GRID_CHANNELS, self.crop, self.crop],
            ObsMode::Vector => vec![VECTOR_LEN],
        }
    }
}

/// The part of the world state an encoding depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObsSnapshot {
    pub uav: UavPos,
    pub last_seen: Option<Sighting>,
    pub t_nv: u32,
}

impl ObsSnapshot {
    pub fn of(world: &WorldState) -> Self {
        Self { uav: world.uav, last_seen: world.last_seen, t_nv: world.t_nv }
    }
}

fn staleness_weight(world: &ObsSnapshot) -> f64 {
    world.last_seen.map_or(0.0, |s| STALENESS_DECAY.powi(s.age as i32))
}

/// Encode `world` as a tensor of shape [`ObsConfig::shape`].
pub fn encode<T: Scalar>(world: &WorldState, config: &EnvConfig, obs: &ObsConfig) -> TensorBuf<T> {
    encode_snapshot(&ObsSnapshot::of(world), config, obs)
}

pub fn encode_snapshot<T: Scalar>(world: &ObsSnapshot, config: &EnvConfig, obs: &ObsConfig) -> TensorBuf<T> {
    let data = match obs.mode {
        ObsMode::Grid => encode_grid(world, config, obs.crop),
        ObsMode::Vector => encode_vector(world, config, obs),
    };
    let data = data.into_iter().map(T::lit).collect();
    TensorBuf::new(obs.shape(), data).expect("encoders emit the declared shape")
}

fn encode_grid(world: &ObsSnapshot, config: &EnvConfig, crop: usize) -> Vec<f64> {
    let half = (crop / 2) as i64;
    let plane = crop * crop;
    let mut out = vec![0.0; GRID_CHANNELS * plane];
    let uz = world.uav.z(config);
    let fov_half = config.theta_fov().tan() * uz;
    let alt = uz / config.h_max;
    let cylinders: Vec<_> = config.cylinders().collect();

    // Row index grows northward so "north" is a fixed direction in the crop.
    for r in 0..crop {
        for c in 0..crop {
            let dx = c as i64 - half;
            let dy = r as i64 - half;
            let cell = r * crop + c;
            let (gx, gy) = (world.uav.x + dx, world.uav.y + dy);
            let in_fov = match config.fov_shape {
                sim::FovShape::Square => (dx.abs() as f64) <= fov_half && (dy.abs() as f64) <= fov_half,
                sim::FovShape::Circle => ((dx * dx + dy * dy) as f64) <= fov_half * fov_half,
            };
            if in_fov {
                out[cell] = alt;
            }
            let p = [gx as f64, gy as f64];
            let h = cylinders
                .iter()
                .filter(|o| (p[0] - o.center[0]).hypot(p[1] - o.center[1]) <= o.radius)
                .map(|o| o.height)
                .fold(0.0, f64::max);
            out[2 * plane + cell] = (h / config.h_max).min(1.0);
            let on_map = (0..=config.side_s).contains(&gx) && (0..=config.side_s).contains(&gy);
            if on_map && sim::is_on_road([gx, gy], config) {
                out[3 * plane + cell] = 1.0;
            }
        }
    }
    if let Some(seen) = world.last_seen {
        let dx = (seen.pos[0] - world.uav.x).clamp(-half, half);
        let dy = (seen.pos[1] - world.uav.y).clamp(-half, half);
        let cell = ((dy + half) as usize) * crop + (dx + half) as usize;
        out[plane + cell] = staleness_weight(world);
    }
    out
}

fn encode_vector(world: &ObsSnapshot, config: &EnvConfig, obs: &ObsConfig) -> Vec<f64> {
    let side = config.side_s as f64;
    let m = config.margin() as f64;
    let pos = |v: f64| (2.0 * (v + m) / (side + 2.0 * m) - 1.0).clamp(-1.0, 1.0);
    let rel = |v: f64| (v / side).clamp(-1.0, 1.0);
    let [ux, uy, uz] = world.uav.to_f64(config);
    let level = 2.0 * world.uav.level as f64 / config.n_h as f64 - 1.0;
    let fov_half = (config.theta_fov().tan() * uz).max(0.5);

    let mut f = Vec::with_capacity(VECTOR_LEN);
    f.extend([pos(ux), pos(uy), level]);
    match world.last_seen {
        Some(s) => {
            let (dx, dy) = (s.pos[0] as f64 - ux, s.pos[1] as f64 - uy);
            f.extend([
                pos(s.pos[0] as f64),
                pos(s.pos[1] as f64),
                rel(dx),
                rel(dy),
                (dx / fov_half).clamp(-1.0, 1.0),
                (dy / fov_half).clamp(-1.0, 1.0),
                2.0 * staleness_weight(world) - 1.0,
                staleness_weight(world) / dx.hypot(dy).max(1.0),
            ]);
        }
        None => f.extend([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0]),
    }
    f.push(2.0 * world.t_nv.min(obs.t_nv_scale) as f64 / obs.t_nv_scale as f64 - 1.0);

    let nearest = config.cylinders().min_by(|a, b| {
        let da = (a.center[0] - ux).hypot(a.center[1] - uy) - a.radius;
        let db = (b.center[0] - ux).hypot(b.center[1] - uy) - b.radius;
        da.total_cmp(&db)
    });
    match nearest {
        Some(o) => {
            f.extend([rel(o.center[0] - ux), rel(o.center[1] - uy), ((o.height - uz) / config.h_max).clamp(-1.0, 1.0)])
        }
        None => f.extend([0.0, 0.0, -1.0]),
    }
    debug_assert_eq!(f.len(), VECTOR_LEN);
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{reset, Sighting, UavPos};

    fn world() -> (EnvConfig, WorldState) {
        let cfg = EnvConfig::default();
        let w = reset(&cfg, 4).unwrap();
        (cfg, w)
    }

    #[test]
    fn shapes_and_range() {
        let (cfg, mut w) = world();
        w.last_seen = Some(Sighting { pos: [0, 100], age: 3 });
        w.t_nv = 3;
        for mode in [ObsMode::Grid, ObsMode::Vector] {
            let oc = ObsConfig { mode, ..ObsConfig::default() };
            let t = encode::<f32>(&w, &cfg, &oc);
            assert_eq!(t.shape(), oc.shape().as_slice());
            assert!(t.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn encoding_is_deterministic() {
        let (cfg, w) = world();
        let oc = ObsConfig::default();
        assert_eq!(encode::<f64>(&w, &cfg, &oc), encode::<f64>(&w, &cfg, &oc));
    }

    #[test]
    fn last_seen_marker_clamps_to_border() {
        let (cfg, mut w) = world();
        w.uav = UavPos { x: 50, y: 50, level: 0 };
        w.last_seen = Some(Sighting { pos: [100, 50], age: 0 });
        let oc = ObsConfig { crop: 5, ..ObsConfig::default() };
        let t = encode::<f64>(&w, &cfg, &oc);
        let plane = &t.data()[25..50];
        // centre row, rightmost column
        assert_eq!(plane[2 * 5 + 4], 1.0);
        assert_eq!(plane.iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn staleness_decays() {
        let (cfg, mut w) = world();
        let oc = ObsConfig { mode: ObsMode::Vector, ..ObsConfig::default() };
        w.last_seen = Some(Sighting { pos: [40, 40], age: 0 });
        let fresh = encode::<f64>(&w, &cfg, &oc).data()[9];
        w.last_seen = Some(Sighting { pos: [40, 40], age: 10 });
        let stale = encode::<f64>(&w, &cfg, &oc).data()[9];
        assert_eq!(fresh, 1.0);
        assert!((stale - (2.0 * 0.95f64.powi(10) - 1.0)).abs() < 1e-12);
    }
}
