//! Reflection-symmetric two-objective environments and episode rollout.

mod leancraft;
mod mirrorchain;

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use leancraft::{leancraft_step, LeanCraftParams};
pub use mirrorchain::{
    mirrorchain_step, optimal_start_value, optimal_values, MirrorChainParams, ACTIONS as MIRRORCHAIN_ACTIONS,
};

use crate::error::Result;
use crate::symmetry::SymmetrySpec;

pub const NUM_OBJECTIVES: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: Vec<f64>,
    pub reward: [f64; NUM_OBJECTIVES],
    pub done: bool,
}

/// One `(s, a, r, s')` transition.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStepRecord {
    pub state: Vec<f64>,
    /// The action as executed (after clamping).
    pub action: Vec<f64>,
    pub reward: [f64; NUM_OBJECTIVES],
    pub next_state: Vec<f64>,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub steps: Vec<EnvStepRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Undiscounted vector return.
    pub fn returns(&self) -> [f64; NUM_OBJECTIVES] {
        let mut out = [0.0; NUM_OBJECTIVES];
        for s in &self.steps {
            for (o, r) in out.iter_mut().zip(s.reward) {
                *o += r;
            }
        }
        out
    }

    /// Rows `t, state…, action…, r0, r1`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let (sd, ad) = self
            .steps
            .first()
            .map(|s| (s.state.len(), s.action.len()))
            .unwrap_or((0, 0));
        let mut header = vec!["t".to_string()];
        header.extend((0..sd).map(|i| format!("s{i}")));
        header.extend((0..ad).map(|i| format!("a{i}")));
        header.extend(["r0".to_string(), "r1".to_string()]);
        out.write_record(&header)?;
        for (t, s) in self.steps.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(s.state.iter().map(f64::to_string));
            row.extend(s.action.iter().map(f64::to_string));
            row.extend(s.reward.iter().map(f64::to_string));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Action interface a policy exposes to the environment.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionSpace {
    Continuous { dim: usize },
    /// Labelled actions; `values[i]` is the environment action of label `i`.
    Discrete { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Env {
    LeanCraft(LeanCraftParams),
    MirrorChain(MirrorChainParams),
}

impl Env {
    pub fn name(&self) -> &'static str {
        match self {
            Env::LeanCraft(_) => "leancraft",
            Env::MirrorChain(_) => "mirrorchain",
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            Env::LeanCraft(_) => 4,
            Env::MirrorChain(_) => 1,
        }
    }

    /// Length of the environment-level action vector.
    pub fn action_dim(&self) -> usize {
        match self {
            Env::LeanCraft(_) => 2,
            Env::MirrorChain(_) => 1,
        }
    }

    pub fn action_space(&self) -> ActionSpace {
        match self {
            Env::LeanCraft(_) => ActionSpace::Continuous { dim: 2 },
            Env::MirrorChain(_) => ActionSpace::Discrete {
                values: MIRRORCHAIN_ACTIONS.to_vec(),
            },
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            Env::LeanCraft(p) => p.horizon,
            Env::MirrorChain(p) => p.horizon,
        }
    }

    pub fn initial_state(&self) -> Vec<f64> {
        vec![0.0; self.state_dim()]
    }

    /// Policy-level symmetry: lean angle and rate plus steering reflect on
    /// LeanCraft; position and the left/right labels reflect on MirrorChain.
    pub fn symmetry(&self) -> SymmetrySpec {
        match self {
            Env::LeanCraft(_) => SymmetrySpec::continuous(4, 2, vec![2, 3], vec![1]),
            Env::MirrorChain(_) => SymmetrySpec::discrete(1, vec![0], vec![1, 0]),
        }
        .expect("built-in symmetry specs are valid")
    }

    /// Positive per-coordinate scale applied to states before they reach a
    /// policy network. Diagonal and positive, so it commutes with `L_g`.
    pub fn observation_scale(&self) -> Vec<f64> {
        match self {
            Env::LeanCraft(_) => vec![0.01, 0.1, 1.0, 1.0],
            Env::MirrorChain(_) => vec![1.0 / 3.0],
        }
    }

    pub fn step<R: Rng + ?Sized>(&self, state: &[f64], action: &[f64], t: usize, rng: &mut R) -> Result<StepOutcome> {
        match self {
            Env::LeanCraft(p) => leancraft_step(state, action, t, p, rng),
            Env::MirrorChain(p) => mirrorchain_step(state, action, t, p),
        }
    }

    /// The action actually executed for a requested one.
    pub fn executed_action(&self, action: &[f64]) -> Vec<f64> {
        match self {
            Env::LeanCraft(_) => action.iter().map(|a| a.clamp(-1.0, 1.0)).collect(),
            Env::MirrorChain(_) => action.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Env::LeanCraft(p) => p.validate(),
            Env::MirrorChain(p) => {
                if p.horizon == 0 {
                    return crate::error::input_err("horizon must be at least 1");
                }
                Ok(())
            }
        }
    }
}

/// Anything that can choose environment actions.
pub trait ActingPolicy {
    fn begin_episode<R: Rng + ?Sized>(&mut self, _rng: &mut R) {}
    fn act<R: Rng + ?Sized>(&mut self, state: &[f64], rng: &mut R) -> Vec<f64>;
}

/// Runs one episode from the initial state, choosing actions with `choose`.
/// Stops at `done` or after `horizon` steps.
pub fn rollout_with<R, F>(env: &Env, horizon: usize, rng: &mut R, mut choose: F) -> Result<Trajectory>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64], usize, &mut R) -> Vec<f64>,
{
    let mut steps = Vec::with_capacity(horizon.min(env.horizon()));
    let mut state = env.initial_state();
    for t in 0..horizon {
        let action = choose(&state, t, rng);
        let out = env.step(&state, &action, t, rng)?;
        let done = out.done || t + 1 == horizon;
        steps.push(EnvStepRecord {
            state: std::mem::take(&mut state),
            action: env.executed_action(&action),
            reward: out.reward,
            next_state: out.next_state.clone(),
            done,
        });
        if done {
            break;
        }
        state = out.next_state;
    }
    Ok(Trajectory { steps })
}

pub fn rollout<P: ActingPolicy, R: Rng + ?Sized>(
    env: &Env,
    policy: &mut P,
    rng: &mut R,
    horizon: usize,
) -> Result<Trajectory> {
    policy.begin_episode(rng);
    rollout_with(env, horizon, rng, |s, _, r| policy.act(s, r))
}

/// Exploration policy used to collect reward-model training data.
///
/// LeanCraft draws a per-episode action bias uniformly from [−1, 1]² and adds
/// per-step uniform jitter of half-width 0.5, so velocities across the whole
/// reachable range are visited. MirrorChain picks ±1 uniformly. Both are
/// invariant in distribution under the reflection.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    env: Env,
    bias: Vec<f64>,
}

impl RandomPolicy {
    pub fn new(env: &Env) -> Self {
        RandomPolicy {
            env: env.clone(),
            bias: vec![0.0; env.action_dim()],
        }
    }
}

impl ActingPolicy for RandomPolicy {
    fn begin_episode<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if let Env::LeanCraft(_) = self.env {
            for b in &mut self.bias {
                *b = rng.gen_range(-1.0..=1.0);
            }
        }
    }

    fn act<R: Rng + ?Sized>(&mut self, _state: &[f64], rng: &mut R) -> Vec<f64> {
        match self.env {
            Env::LeanCraft(_) => self
                .bias
                .iter()
                .map(|b| (b + rng.gen_range(-0.5..=0.5)).clamp(-1.0, 1.0))
                .collect(),
            Env::MirrorChain(_) => vec![if rng.gen_bool(0.5) { 1.0 } else { -1.0 }],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::rng_from_seed;

    struct AlwaysRight;
    impl ActingPolicy for AlwaysRight {
        fn act<R: Rng + ?Sized>(&mut self, _: &[f64], _: &mut R) -> Vec<f64> {
            vec![1.0]
        }
    }

    #[test]
    fn always_right_reaches_goal_in_three_steps() {
        let env = Env::MirrorChain(MirrorChainParams::default());
        let traj = rollout(&env, &mut AlwaysRight, &mut rng_from_seed(0), 10).unwrap();
        assert_eq!(traj.len(), 3);
        let r = traj.returns();
        assert_eq!(r[0], 1.0);
        assert!((r[1] + 0.3).abs() < 1e-15);
        assert!(traj.steps[2].done);
    }

    #[test]
    fn zero_horizon_is_empty() {
        let env = Env::LeanCraft(LeanCraftParams::training());
        let mut pol = RandomPolicy::new(&env);
        assert!(rollout(&env, &mut pol, &mut rng_from_seed(0), 0).unwrap().is_empty());
    }

    #[test]
    fn same_seed_same_trajectory() {
        let env = Env::LeanCraft(LeanCraftParams::training());
        let run = |seed| {
            let mut pol = RandomPolicy::new(&env);
            rollout(&env, &mut pol, &mut rng_from_seed(seed), 200).unwrap()
        };
        let (a, b) = (run(9), run(9));
        assert_eq!(a, b);
        assert_eq!(a.len(), 200);
        assert_ne!(a, run(10));
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let env = Env::MirrorChain(MirrorChainParams::default());
        let traj = rollout(&env, &mut AlwaysRight, &mut rng_from_seed(0), 10).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,s0,a0,r0,r1");
        assert_eq!(lines[3], "2,2,1,1,-0.1");
        assert_eq!(lines.len(), 4);
    }
}
