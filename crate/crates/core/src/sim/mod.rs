//! Discrete-time urban environment.
//!
//! Positions live on the integer grid. The UAV altitude is stored as a level
//! index so that `z_D - h_min` is always an exact multiple of the altitude
//! increment. The target drives along an axis-aligned lattice of roads and
//! picks a new heading at every junction.

pub mod geometry;
mod roads;
mod wind;

use rand::seq::SliceRandom;
use rand::SeedableRng;

pub use geometry::{Cylinder, FovShape};
pub use roads::{is_junction, is_on_road, legal_headings, next_heading, step_target};
pub use wind::{apply_wind, wind_displacement};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, SimRng};

/// UAV actions. The discriminant is the network output index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    North = 0,
    South = 1,
    West = 2,
    East = 3,
    Up = 4,
    Down = 5,
}

impl Action {
    pub const COUNT: usize = 6;
    pub const ALL: [Action; 6] = [Action::North, Action::South, Action::West, Action::East, Action::Up, Action::Down];
    pub const PLANAR: [Action; 4] = [Action::North, Action::South, Action::West, Action::East];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    /// Unit planar displacement, zero for vertical actions.
    pub fn planar_delta(self) -> [i64; 2] {
        match self {
            Action::North => [0, 1],
            Action::South => [0, -1],
            Action::West => [-1, 0],
            Action::East => [1, 0],
            Action::Up | Action::Down => [0, 0],
        }
    }

    pub fn level_delta(self) -> i64 {
        match self {
            Action::Up => 1,
            Action::Down => -1,
            _ => 0,
        }
    }
}

/// Planar heading of the target vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Heading {
    North,
    South,
    West,
    East,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::South, Heading::West, Heading::East];

    pub fn delta(self) -> [i64; 2] {
        match self {
            Heading::North => [0, 1],
            Heading::South => [0, -1],
            Heading::West => [-1, 0],
            Heading::East => [1, 0],
        }
    }

    pub fn reverse(self) -> Heading {
        match self {
            Heading::North => Heading::South,
            Heading::South => Heading::North,
            Heading::West => Heading::East,
            Heading::East => Heading::West,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleSpec {
    pub center: [f64; 2],
    pub radius: f64,
    pub height: f64,
}

impl ObstacleSpec {
    pub fn new(x: f64, y: f64, radius: f64, height: f64) -> Self {
        Self { center: [x, y], radius, height }
    }

    pub fn cylinder(&self) -> Cylinder<f64> {
        Cylinder::new(self.center, self.radius, self.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindMode {
    #[default]
    None,
    Static,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindSpec {
    pub speed: f64,
    pub mode: WindMode,
    /// Planar unit vector, used only by [`WindMode::Static`].
    pub static_dir: [f64; 2],
}

impl Default for WindSpec {
    fn default() -> Self {
        Self { speed: 0.0, mode: WindMode::None, static_dir: [1.0, 0.0] }
    }
}

/// Which obstruction predicate drives the reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObstructionModel {
    #[default]
    Geometric,
    /// Closed-form approximation, see [`geometry::obstruction_literal`].
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub side_s: i64,
    pub n_obstacles: usize,
    pub obstacles: Vec<ObstacleSpec>,
    pub h_min: f64,
    pub h_max: f64,
    pub n_h: u32,
    pub theta_fov_deg: f64,
    pub fov_shape: FovShape,
    pub obstruction: ObstructionModel,
    pub wind: WindSpec,
    pub road_spacing: i64,
    pub t_max: u32,
    pub uav_speed: i64,
    pub target_speed: i64,
    /// Fraction of `side_s` the UAV may leave the square by.
    pub margin_frac: f64,
    /// UAV spawn; `None` spawns at the center.
    pub spawn: Option<[i64; 2]>,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            side_s: 100,
            n_obstacles: 3,
            obstacles: vec![
                ObstacleSpec::new(30.0, 30.0, 5.0, 20.0),
                ObstacleSpec::new(70.0, 50.0, 7.5, 40.0),
                ObstacleSpec::new(50.0, 75.0, 4.0, 12.0),
            ],
            h_min: 5.0,
            h_max: 35.0,
            n_h: 10,
            theta_fov_deg: 30.0,
            fov_shape: FovShape::Square,
            obstruction: ObstructionModel::Geometric,
            wind: WindSpec::default(),
            road_spacing: 20,
            t_max: 500,
            uav_speed: 1,
            target_speed: 1,
            margin_frac: 0.1,
            spawn: None,
            seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::config(format!("{m} violated")));
        if self.side_s <= 0 {
            return fail("side_s > 0");
        }
        if !(self.h_min < self.h_max) {
            return fail("h_min < h_max");
        }
        if !(self.h_min > 0.0) {
            return fail("h_min > 0");
        }
        if self.n_h < 1 {
            return fail("n_h >= 1");
        }
        if !(self.theta_fov_deg > 0.0 && self.theta_fov_deg < 90.0) {
            return fail("0 < theta_fov < pi/2");
        }
        if self.t_max == 0 {
            return fail("t_max > 0");
        }
        if self.uav_speed < 1 || self.target_speed < 1 {
            return fail("speeds >= 1");
        }
        if self.target_speed > self.uav_speed {
            return fail("target_speed <= uav_speed");
        }
        if self.road_spacing <= 0 || self.side_s % self.road_spacing != 0 {
            return fail("road_spacing > 0 dividing side_s");
        }
        if !(self.margin_frac >= 0.0) {
            return fail("margin_frac >= 0");
        }
        if self.obstacles.len() != self.n_obstacles {
            return Err(Error::config(format!(
                "obstacle count mismatch: n_obstacles = {} but {} obstacle specs given",
                self.n_obstacles,
                self.obstacles.len()
            )));
        }
        let s = self.side_s as f64;
        for (i, o) in self.obstacles.iter().enumerate() {
            if !(o.radius > 0.0) || !(o.height > 0.0) {
                return Err(Error::config(format!("obstacle {i}: radius > 0 and height > 0 violated")));
            }
            if !(0.0..=s).contains(&o.center[0]) || !(0.0..=s).contains(&o.center[1]) {
                return Err(Error::config(format!("obstacle {i}: center inside [0, side_s]^2 violated")));
            }
        }
        if !(self.wind.speed >= 0.0) {
            return fail("wind speed >= 0");
        }
        if self.wind.mode == WindMode::Static {
            let [x, y] = self.wind.static_dir;
            if ((x * x + y * y).sqrt() - 1.0).abs() > 1e-9 {
                return fail("static wind direction has unit norm");
            }
        }
        let spawn = self.spawn_point();
        if spawn.iter().any(|&c| c < -self.margin() || c > self.side_s + self.margin()) {
            return fail("spawn inside the flight area");
        }
        let pos = UavPos { x: spawn[0], y: spawn[1], level: 0 };
        if self.collides_any(pos) {
            return fail("spawn outside obstacles");
        }
        Ok(())
    }

    pub fn theta_fov(&self) -> f64 {
        self.theta_fov_deg.to_radians()
    }

    /// How far outside the square the UAV may fly, in grid units.
    pub fn margin(&self) -> i64 {
        (self.side_s as f64 * self.margin_frac).round() as i64
    }

    pub fn spawn_point(&self) -> [i64; 2] {
        self.spawn.unwrap_or([self.side_s / 2, self.side_s / 2])
    }

    /// Altitude of a level index; the top level is exactly `h_max`.
    pub fn altitude(&self, level: u32) -> f64 {
        if level >= self.n_h {
            self.h_max
        } else {
            self.h_min + level as f64 * altitude_increment(self)
        }
    }

    pub fn cylinders(&self) -> impl Iterator<Item = Cylinder<f64>> + '_ {
        self.obstacles.iter().map(ObstacleSpec::cylinder)
    }

    pub fn collides_any(&self, pos: UavPos) -> bool {
        let p = pos.to_f64(self);
        self.cylinders().any(|c| geometry::collides(p, &c))
    }

    pub fn mid_level(&self) -> u32 {
        self.n_h / 2
    }
}

/// Spacing between altitude levels, `(h_max - h_min) / n_h`.
pub fn altitude_increment(config: &EnvConfig) -> f64 {
    (config.h_max - config.h_min) / config.n_h as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct UavPos {
    pub x: i64,
    pub y: i64,
    /// Altitude level index in `0..=n_h`.
    pub level: u32,
}

impl UavPos {
    pub fn z(&self, config: &EnvConfig) -> f64 {
        config.altitude(self.level)
    }

    pub fn to_f64(&self, config: &EnvConfig) -> [f64; 3] {
        [self.x as f64, self.y as f64, self.z(config)]
    }

    pub fn planar(&self) -> [i64; 2] {
        [self.x, self.y]
    }
}

/// Where and how long ago the target was last inside the footprint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sighting {
    pub pos: [i64; 2],
    pub age: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub uav: UavPos,
    pub target: [i64; 2],
    pub target_heading: Heading,
    pub t: u32,
    pub t_nv: u32,
    /// The last UAV move was reverted because it hit an obstacle.
    pub collided: bool,
    pub last_seen: Option<Sighting>,
    pub target_rng: SimRng,
    pub wind_rng: SimRng,
}

impl WorldState {
    pub fn uav_f64(&self, config: &EnvConfig) -> [f64; 3] {
        self.uav.to_f64(config)
    }

    pub fn target_f64(&self) -> [f64; 2] {
        [self.target[0] as f64, self.target[1] as f64]
    }
}

/// Fresh episode state for `(config, seed)`.
///
/// The UAV spawns at the configured point (default: center) on the lowest
/// altitude level; the target starts on a uniformly chosen road junction.
pub fn reset(config: &EnvConfig, seed: u64) -> Result<WorldState> {
    config.validate()?;
    let mut rng = SimRng::seed_from_u64(derive_seed(seed, stream::ENV, 0));
    let per_axis = config.side_s / config.road_spacing + 1;
    let jx = rand::Rng::gen_range(&mut rng, 0..per_axis);
    let jy = rand::Rng::gen_range(&mut rng, 0..per_axis);
    let target = [jx * config.road_spacing, jy * config.road_spacing];
    let options = legal_headings(target, config);
    let target_heading = *options.choose(&mut rng).expect("a junction always has an exit");
    let [x, y] = config.spawn_point();
    Ok(WorldState {
        uav: UavPos { x, y, level: 0 },
        target,
        target_heading,
        t: 0,
        t_nv: 0,
        collided: false,
        last_seen: None,
        target_rng: SimRng::seed_from_u64(derive_seed(seed, stream::TARGET, 0)),
        wind_rng: SimRng::seed_from_u64(derive_seed(seed, stream::WIND, 0)),
    })
}

fn clamp_planar(mut p: UavPos, config: &EnvConfig) -> UavPos {
    let m = config.margin();
    p.x = p.x.clamp(-m, config.side_s + m);
    p.y = p.y.clamp(-m, config.side_s + m);
    p
}

/// Commanded move without wind, clamped to the flight volume.
pub fn commanded_move(pos: UavPos, a: Action, config: &EnvConfig) -> UavPos {
    let [dx, dy] = a.planar_delta();
    let level = (pos.level as i64 + a.level_delta()).clamp(0, config.n_h as i64) as u32;
    clamp_planar(UavPos { x: pos.x + dx * config.uav_speed, y: pos.y + dy * config.uav_speed, level }, config)
}

/// Move the UAV for one step: commanded action, then wind drift.
///
/// A move that would end inside an obstacle is reverted; the wind drift is
/// kept only if the drifted original position is itself collision-free.
/// Returns whether a collision was attempted; the same flag is stored in
/// `state.collided`.
pub fn step_uav(state: &mut WorldState, a: Action, config: &EnvConfig) -> bool {
    let start = state.uav;
    let commanded = commanded_move(start, a, config);
    let drift = wind_displacement(&config.wind, &mut state.wind_rng);
    let shift = |p: UavPos| clamp_planar(UavPos { x: p.x + drift[0], y: p.y + drift[1], ..p }, config);
    let moved = shift(commanded);
    let collided = config.collides_any(moved);
    state.uav = if !collided {
        moved
    } else {
        let drifted = shift(start);
        if config.collides_any(drifted) {
            start
        } else {
            drifted
        }
    };
    state.collided = collided;
    collided
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_config() -> EnvConfig {
        EnvConfig { n_obstacles: 0, obstacles: vec![], ..EnvConfig::default() }
    }

    #[test]
    fn reset_is_deterministic() {
        let cfg = EnvConfig { side_s: 100, ..open_config() };
        assert_eq!(reset(&cfg, 7).unwrap(), reset(&cfg, 7).unwrap());
    }

    #[test]
    fn reset_rejects_bad_altitudes() {
        let cfg = EnvConfig { h_min: 10.0, h_max: 5.0, ..open_config() };
        let err = reset(&cfg, 0).unwrap_err().to_string();
        assert!(err.contains("h_min < h_max violated"), "{err}");
    }

    #[test]
    fn reset_places_target_on_junction_lattice() {
        let cfg = EnvConfig { side_s: 100, road_spacing: 20, ..open_config() };
        for seed in 0..200 {
            let w = reset(&cfg, seed).unwrap();
            for c in w.target {
                assert!(c % 20 == 0 && (0..=100).contains(&c), "seed {seed}: {:?}", w.target);
            }
            assert_eq!(w.uav, UavPos { x: 50, y: 50, level: 0 });
            assert_eq!((w.t, w.t_nv), (0, 0));
        }
    }

    #[test]
    fn altitude_increment_examples() {
        let c = |h_min, h_max, n_h| EnvConfig { h_min, h_max, n_h, ..open_config() };
        assert_eq!(altitude_increment(&c(10.0, 60.0, 5)), 10.0);
        assert_eq!(altitude_increment(&c(1.0, 8.0, 7)), 1.0);
        assert_eq!(altitude_increment(&c(1.0, 10.0, 9)), 1.0);
    }

    fn state_at(cfg: &EnvConfig, x: i64, y: i64, level: u32) -> WorldState {
        let mut w = reset(cfg, 0).unwrap();
        w.uav = UavPos { x, y, level };
        w
    }

    #[test]
    fn planar_step_and_ceiling_clamp() {
        let cfg = open_config();
        let mut w = state_at(&cfg, 5, 5, 2);
        assert!(!step_uav(&mut w, Action::East, &cfg));
        assert_eq!(w.uav, UavPos { x: 6, y: 5, level: 2 });
        let mut w = state_at(&cfg, 5, 5, cfg.n_h);
        step_uav(&mut w, Action::Up, &cfg);
        assert_eq!(w.uav.level, cfg.n_h);
        assert_eq!(w.uav.z(&cfg), cfg.h_max);
        step_uav(&mut w, Action::Down, &cfg);
        assert_eq!(w.uav.z(&cfg), cfg.h_max - altitude_increment(&cfg));
    }

    #[test]
    fn boundary_margin_clamps() {
        let cfg = EnvConfig { side_s: 50, road_spacing: 10, ..open_config() };
        let mut w = state_at(&cfg, 0, 0, 0);
        for _ in 0..20 {
            step_uav(&mut w, Action::West, &cfg);
        }
        assert_eq!(w.uav.x, -5);
    }

    #[test]
    fn colliding_move_is_reverted_and_flagged() {
        // h_min = 1, h_c = 1 so level 1 is z = 2.
        let cfg = EnvConfig {
            side_s: 20,
            road_spacing: 10,
            h_min: 1.0,
            h_max: 11.0,
            n_h: 10,
            n_obstacles: 1,
            obstacles: vec![ObstacleSpec::new(6.0, 0.0, 2.0, 5.0)],
            spawn: Some([15, 15]),
            ..EnvConfig::default()
        };
        let mut w = state_at(&cfg, 4, 0, 1);
        assert_eq!(w.uav.z(&cfg), 2.0);
        assert!(step_uav(&mut w, Action::East, &cfg));
        assert_eq!(w.uav, UavPos { x: 4, y: 0, level: 1 });
        assert!(w.collided);
    }
}
