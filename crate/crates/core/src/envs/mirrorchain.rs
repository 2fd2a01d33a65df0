use serde::{Deserialize, Serialize};

use super::StepOutcome;
use crate::error::{input_err, Result};

/// Seven-state chain `{−3, …, 3}` starting at 0. Reaching either end pays
/// one unit on objective 0 and ends the episode; every step costs 0.1 on
/// objective 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MirrorChainParams {
    pub horizon: usize,
}

impl Default for MirrorChainParams {
    fn default() -> Self {
        MirrorChainParams { horizon: 10 }
    }
}

pub const EDGE: i64 = 3;
pub const STEP_COST: f64 = 0.1;
/// Action values of the two labels: label 0 moves left, label 1 right.
pub const ACTIONS: [f64; 2] = [-1.0, 1.0];

pub fn states() -> impl Iterator<Item = i64> {
    -EDGE..=EDGE
}

fn as_position(v: f64) -> Result<i64> {
    if v.fract() != 0.0 || v.abs() > EDGE as f64 {
        return input_err(format!("mirrorchain state {v} outside {{-3, ..., 3}}"));
    }
    Ok(v as i64)
}

pub fn mirrorchain_step(state: &[f64], action: &[f64], t: usize, params: &MirrorChainParams) -> Result<StepOutcome> {
    if state.len() != 1 || action.len() != 1 {
        return input_err("mirrorchain expects scalar state and action");
    }
    let s = as_position(state[0])?;
    let a = match action[0] {
        v if v == 1.0 => 1,
        v if v == -1.0 => -1,
        v => return input_err(format!("mirrorchain action {v} is not ±1")),
    };
    let next = (s + a).clamp(-EDGE, EDGE);
    let goal = next.abs() == EDGE;
    Ok(StepOutcome {
        next_state: vec![next as f64],
        reward: [if goal { 1.0 } else { 0.0 }, -STEP_COST],
        done: goal || t + 1 >= params.horizon,
    })
}

/// Optimal undiscounted scalarised values by backward induction.
///
/// Returns `values[k][i]`: the best achievable return with `k` steps left
/// from state `i − 3`. Edge states are absorbing with value zero.
pub fn optimal_values(weights: [f64; 2], params: &MirrorChainParams) -> Vec<Vec<f64>> {
    let n = (2 * EDGE + 1) as usize;
    let mut values = vec![vec![0.0; n]; params.horizon + 1];
    for k in 1..=params.horizon {
        for s in states() {
            if s.abs() == EDGE {
                continue;
            }
            let best = ACTIONS
                .iter()
                .map(|&a| {
                    let next = (s + a as i64).clamp(-EDGE, EDGE);
                    let goal = next.abs() == EDGE;
                    let r0 = if goal { 1.0 } else { 0.0 };
                    let immediate = weights[0] * r0 - weights[1] * STEP_COST;
                    let future = if goal { 0.0 } else { values[k - 1][(next + EDGE) as usize] };
                    immediate + future
                })
                .fold(f64::NEG_INFINITY, f64::max);
            values[k][(s + EDGE) as usize] = best;
        }
    }
    values
}

/// Optimal scalarised return of a full episode from the start state.
pub fn optimal_start_value(weights: [f64; 2], params: &MirrorChainParams) -> f64 {
    optimal_values(weights, params)[params.horizon][EDGE as usize]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn goal_transition() {
        let p = MirrorChainParams::default();
        let out = mirrorchain_step(&[2.0], &[1.0], 0, &p).unwrap();
        assert_eq!(out.next_state, vec![3.0]);
        assert_eq!(out.reward, [1.0, -0.1]);
        assert!(out.done);
    }

    #[test]
    fn interior_transition() {
        let p = MirrorChainParams::default();
        let out = mirrorchain_step(&[0.0], &[-1.0], 0, &p).unwrap();
        assert_eq!(out.next_state, vec![-1.0]);
        assert_eq!(out.reward, [0.0, -0.1]);
        assert!(!out.done);
    }

    #[test]
    fn out_of_range_is_input_error() {
        let p = MirrorChainParams::default();
        assert!(mirrorchain_step(&[4.0], &[1.0], 0, &p).is_err());
        assert!(mirrorchain_step(&[0.5], &[1.0], 0, &p).is_err());
        assert!(mirrorchain_step(&[0.0], &[0.0], 0, &p).is_err());
    }

    /// Exhaustive search over all 2^horizon action sequences from state 0.
    fn brute_force(weights: [f64; 2], horizon: usize) -> f64 {
        let p = MirrorChainParams { horizon };
        let mut best = f64::NEG_INFINITY;
        for code in 0u32..(1 << horizon) {
            let mut s = 0.0;
            let mut total = 0.0;
            for t in 0..horizon {
                let a = if code >> t & 1 == 1 { 1.0 } else { -1.0 };
                let out = mirrorchain_step(&[s], &[a], t, &p).unwrap();
                total += weights[0] * out.reward[0] + weights[1] * out.reward[1];
                s = out.next_state[0];
                if out.done {
                    break;
                }
            }
            best = best.max(total);
        }
        best
    }

    #[test]
    fn backward_induction_matches_enumeration() {
        for w in [0.0, 0.1, 0.25, 0.5, 0.9, 1.0] {
            let weights = [w, 1.0 - w];
            let dp = optimal_start_value(weights, &MirrorChainParams::default());
            assert!((dp - brute_force(weights, 10)).abs() < 1e-12, "w = {w}");
        }
    }

    #[test]
    fn optimal_values_are_reflection_symmetric() {
        for w in [0.0, 0.3, 0.7, 1.0] {
            let values = optimal_values([w, 1.0 - w], &MirrorChainParams::default());
            for row in &values {
                for i in 0..row.len() {
                    assert_eq!(row[i], row[row.len() - 1 - i]);
                }
            }
        }
    }
}
