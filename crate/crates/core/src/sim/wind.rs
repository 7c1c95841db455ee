use rand::Rng;

use super::{UavPos, WindMode, WindSpec};

/// Planar drift for one step, rounded to the grid.
///
/// Rounding is per axis; when that would make the drift longer than the
/// wind speed, both axes are truncated toward zero instead.
pub fn wind_displacement<R: Rng + ?Sized>(wind: &WindSpec, rng: &mut R) -> [i64; 2] {
    if wind.speed <= 0.0 {
        return [0, 0];
    }
    let (dx, dy) = match wind.mode {
        WindMode::None => return [0, 0],
        WindMode::Static => (wind.speed * wind.static_dir[0], wind.speed * wind.static_dir[1]),
        WindMode::Random => {
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let magnitude = rng.gen_range(0.0..=wind.speed);
            (magnitude * angle.cos(), magnitude * angle.sin())
        }
    };
    let (rx, ry) = (dx.round(), dy.round());
    if rx * rx + ry * ry > wind.speed * wind.speed {
        [dx.trunc() as i64, dy.trunc() as i64]
    } else {
        [rx as i64, ry as i64]
    }
}

/// Drift a UAV position; altitude is never changed.
pub fn apply_wind<R: Rng + ?Sized>(pos: UavPos, wind: &WindSpec, rng: &mut R) -> UavPos {
    let [dx, dy] = wind_displacement(wind, rng);
    UavPos { x: pos.x + dx, y: pos.y + dy, ..pos }
}
