//! Exploration: an episode-indexed exponential schedule plus a forced
//! search mode once the target has been out of sight for too long.

use rand::Rng;

use crate::error::{Error, Result};
use crate::neural::{argmax, QNetwork, TensorBuf};
use crate::scalar::Scalar;
use crate::sim::Action;

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleParams {
    pub p_sat: f64,
    pub alpha: f64,
    pub p_ss: f64,
    pub t_nv_threshold: u32,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self { p_sat: 0.2, alpha: 2.5, p_ss: 0.95, t_nv_threshold: 5 }
    }
}

impl ScheduleParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.p_sat > 0.0 && self.p_sat < 1.0, "p_sat in (0,1)"),
            (self.alpha > 0.0, "alpha > 0"),
            (self.p_ss > 0.5 && self.p_ss < 1.0, "p_ss in (0.5,1)"),
            (self.t_nv_threshold >= 1, "t_nv_threshold >= 1"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, what)) => Err(Error::config(format!("{what} violated"))),
            None => Ok(()),
        }
    }
}

/// `(1 - p_sat) e^{-alpha k} + p_sat`.
pub fn explore_probability(k: u64, sp: &ScheduleParams) -> f64 {
    (1.0 - sp.p_sat) * (-sp.alpha * k as f64).exp() + sp.p_sat
}

/// How an action was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    Random,
    Greedy,
}

/// Probability of acting at random this step. Search mode takes
/// precedence over the episode schedule; `k = None` means no schedule
/// exploration (evaluation).
pub fn random_probability(k: Option<u64>, t_nv: u32, sp: &ScheduleParams) -> f64 {
    if t_nv > sp.t_nv_threshold {
        sp.p_ss
    } else {
        k.map_or(0.0, |k| explore_probability(k, sp))
    }
}

/// Draw the explore/exploit decision and, if random, the action.
///
/// Always consumes exactly one uniform draw, plus one more for a random
/// action, so the stream is independent of network values.
pub fn draw<R: Rng + ?Sized>(p_random: f64, rng: &mut R) -> Option<usize> {
    if rng.gen::<f64>() < p_random {
        Some(rng.gen_range(0..Action::COUNT))
    } else {
        None
    }
}

/// ε-greedy over the given action values with search-mode override.
pub fn select_from_values<T: PartialOrd + Copy, R: Rng + ?Sized>(
    q: &[T],
    k: Option<u64>,
    t_nv: u32,
    sp: &ScheduleParams,
    rng: &mut R,
) -> (usize, Choice) {
    match draw(random_probability(k, t_nv, sp), rng) {
        Some(a) => (a, Choice::Random),
        None => (argmax(q), Choice::Greedy),
    }
}

/// Action for episode `k` with `t_nv` steps since the last sighting.
pub fn select_action<T: Scalar, R: Rng + ?Sized>(
    net: &QNetwork<T>,
    obs: &TensorBuf<T>,
    k: u64,
    t_nv: u32,
    sp: &ScheduleParams,
    rng: &mut R,
) -> Result<usize> {
    match draw(random_probability(Some(k), t_nv, sp), rng) {
        Some(a) => Ok(a),
        None => Ok(argmax(&net.forward(obs)?)),
    }
}
