use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::StepOutcome;
use crate::error::{input_err, PrismError, Result};

/// Planar craft that thrusts forward and leans left/right.
///
/// State `(x, v, φ, ω)`: position, forward velocity, lean angle, lean rate.
/// Action `(a_T, a_S)`: thrust and steering torque, each clamped to [−1, 1].
/// Objective 0 rewards forward velocity, objective 1 charges control effort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LeanCraftParams {
    pub dt: f64,
    pub thrust_gain: f64,
    pub drag: f64,
    pub restoring: f64,
    pub angular_damping: f64,
    pub noise_std: f64,
    pub horizon: usize,
}

impl Default for LeanCraftParams {
    fn default() -> Self {
        LeanCraftParams {
            dt: 0.05,
            thrust_gain: 1.0,
            drag: 0.1,
            restoring: 0.5,
            angular_damping: 0.1,
            noise_std: 0.0,
            horizon: 200,
        }
    }
}

impl LeanCraftParams {
    /// Defaults with the training noise level η = 0.05.
    pub fn training() -> Self {
        LeanCraftParams {
            noise_std: 0.05,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return input_err("dt must be positive");
        }
        if self.horizon == 0 {
            return input_err("horizon must be at least 1");
        }
        if !(self.noise_std >= 0.0) {
            return input_err("noise_std must be nonnegative");
        }
        Ok(())
    }
}

pub const STATE_DIM: usize = 4;
pub const ACTION_DIM: usize = 2;

/// One transition. `t` is the index of this step within the episode.
pub fn leancraft_step<R: Rng + ?Sized>(
    state: &[f64],
    action: &[f64],
    t: usize,
    params: &LeanCraftParams,
    rng: &mut R,
) -> Result<StepOutcome> {
    if state.len() != STATE_DIM || action.len() != ACTION_DIM {
        return input_err("leancraft expects a 4-dim state and 2-dim action");
    }
    if state.iter().chain(action).any(|v| !v.is_finite()) {
        return Err(PrismError::State("non-finite leancraft state or action".into()));
    }
    let p = params;
    let thrust = action[0].clamp(-1.0, 1.0);
    let steer = action[1].clamp(-1.0, 1.0);
    let (x, v, phi, omega) = (state[0], state[1], state[2], state[3]);

    let x_next = x + p.dt * v;
    let v_next = v + p.dt * (p.thrust_gain * phi.cos() * thrust - p.drag * v);
    let phi_next = phi + p.dt * omega;
    let mut omega_next = omega + p.dt * (steer - p.restoring * phi - p.angular_damping * omega);
    if p.noise_std > 0.0 {
        let eps: f64 = rng.sample(StandardNormal);
        omega_next += p.noise_std * eps;
    }
    let next_state = vec![x_next, v_next, phi_next, omega_next];
    if next_state.iter().any(|v| !v.is_finite()) {
        return Err(PrismError::State("leancraft state diverged".into()));
    }
    Ok(StepOutcome {
        next_state,
        reward: [v_next, -(thrust * thrust + steer * steer)],
        done: t + 1 >= p.horizon,
    })
}
