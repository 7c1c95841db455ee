//! TD targets.

use crate::error::Result;
use crate::neural::{argmax, QNetwork, TensorBuf};
use crate::scalar::Scalar;

/// `r + gamma * max_a Q_target(s', a)`, or `r` on a terminal step.
pub fn dqn_target_from_values<T: Scalar>(r: T, q_target: &[T], terminal: bool, gamma: T) -> T {
    if terminal {
        return r;
    }
    r + gamma * q_target[argmax(q_target)]
}

/// `r + gamma * Q_target(s', argmax_a Q_online(s', a))`, or `r` on a
/// terminal step. Ties in the online argmax go to the lowest index.
pub fn ddqn_target_from_values<T: Scalar>(r: T, q_online: &[T], q_target: &[T], terminal: bool, gamma: T) -> T {
    if terminal {
        return r;
    }
    r + gamma * q_target[argmax(q_online)]
}

pub fn dqn_target<T: Scalar>(r: T, s_next: &TensorBuf<T>, terminal: bool, target: &QNetwork<T>, gamma: T) -> Result<T> {
    if terminal {
        return Ok(r);
    }
    Ok(dqn_target_from_values(r, &target.forward(s_next)?, false, gamma))
}

pub fn ddqn_target<T: Scalar>(
    r: T,
    s_next: &TensorBuf<T>,
    terminal: bool,
    online: &QNetwork<T>,
    target: &QNetwork<T>,
    gamma: T,
) -> Result<T> {
    if terminal {
        return Ok(r);
    }
    let qo = online.forward(s_next)?;
    let qt = target.forward(s_next)?;
    Ok(ddqn_target_from_values(r, &qo, &qt, false, gamma))
}
