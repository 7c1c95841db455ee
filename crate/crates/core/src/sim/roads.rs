//! Target motion on the road lattice.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{EnvConfig, Heading, WorldState};

fn inside(p: [i64; 2], config: &EnvConfig) -> bool {
    (0..=config.side_s).contains(&p[0]) && (0..=config.side_s).contains(&p[1])
}

pub fn is_on_road(p: [i64; 2], config: &EnvConfig) -> bool {
    inside(p, config) && (p[0] % config.road_spacing == 0 || p[1] % config.road_spacing == 0)
}

pub fn is_junction(p: [i64; 2], config: &EnvConfig) -> bool {
    inside(p, config) && p[0] % config.road_spacing == 0 && p[1] % config.road_spacing == 0
}

/// Headings that leave a junction along a road inside the square.
pub fn legal_headings(p: [i64; 2], config: &EnvConfig) -> Vec<Heading> {
    Heading::ALL
        .into_iter()
        .filter(|h| {
            let [dx, dy] = h.delta();
            inside([p[0] + dx, p[1] + dy], config)
        })
        .collect()
}

/// Pick the heading to leave a junction with, uniformly among `options`
/// excluding a U-turn unless the reverse is the only way out.
pub fn next_heading<R: Rng + ?Sized>(options: &[Heading], arriving: Heading, rng: &mut R) -> Heading {
    let forward: Vec<Heading> = options.iter().copied().filter(|&h| h != arriving.reverse()).collect();
    if forward.is_empty() {
        arriving.reverse()
    } else {
        *forward.choose(rng).expect("non-empty")
    }
}

/// Advance the target by `target_speed` unit moves along its heading,
/// re-choosing the heading each time it arrives on a junction.
pub fn step_target(state: &mut WorldState, config: &EnvConfig) {
    for _ in 0..config.target_speed {
        let [dx, dy] = state.target_heading.delta();
        let next = [state.target[0] + dx, state.target[1] + dy];
        debug_assert!(is_on_road(next, config), "target left the road network");
        state.target = next;
        if is_junction(next, config) {
            let options = legal_headings(next, config);
            state.target_heading = next_heading(&options, state.target_heading, &mut state.target_rng);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::reset;

    fn cfg() -> EnvConfig {
        EnvConfig { side_s: 100, road_spacing: 20, n_obstacles: 0, obstacles: vec![], ..EnvConfig::default() }
    }

    #[test]
    fn mid_segment_keeps_heading() {
        let c = cfg();
        let mut w = reset(&c, 1).unwrap();
        w.target = [25, 40];
        w.target_heading = Heading::East;
        step_target(&mut w, &c);
        assert_eq!(w.target, [26, 40]);
        assert_eq!(w.target_heading, Heading::East);
    }

    #[test]
    fn interior_junction_choice_is_uniform_without_u_turn() {
        let c = cfg();
        let mut w = reset(&c, 3).unwrap();
        let trials = 10_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..trials {
            w.target = [39, 40];
            w.target_heading = Heading::East;
            step_target(&mut w, &c);
            assert_eq!(w.target, [40, 40]);
            *counts.entry(w.target_heading).or_insert(0usize) += 1;
        }
        assert!(!counts.contains_key(&Heading::West));
        let p = 1.0 / 3.0;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        for h in [Heading::North, Heading::South, Heading::East] {
            let n = counts[&h] as f64;
            assert!((n - trials as f64 * p).abs() < 3.0 * sigma, "{h:?}: {n}");
        }
    }

    #[test]
    fn dead_end_reverses() {
        let mut rng = crate::rng::stream_rng(0, "t", 0);
        assert_eq!(next_heading(&[Heading::West], Heading::East, &mut rng), Heading::West);
    }

    #[test]
    fn corner_turns() {
        let c = cfg();
        let opts = legal_headings([0, 0], &c);
        assert_eq!(opts, vec![Heading::North, Heading::East]);
        let mut rng = crate::rng::stream_rng(0, "t", 0);
        // arriving southbound at (0,0): the only non-reverse exit is east
        assert_eq!(next_heading(&opts, Heading::South, &mut rng), Heading::East);
    }

    #[test]
    fn target_stays_on_roads_for_long_runs() {
        let c = cfg();
        let mut w = reset(&c, 11).unwrap();
        for _ in 0..5_000 {
            step_target(&mut w, &c);
            assert!(is_on_road(w.target, &c), "{:?}", w.target);
        }
    }
}
