use rand::Rng;
use serde::{Deserialize, Serialize};

use super::policy::{PolicyNet, SampledAction};
use super::weights::{scalarize, WeightVector};
use crate::envs::{Env, Trajectory, NUM_OBJECTIVES};
use crate::error::{input_err, PrismError, Result};
use crate::resymnet::{redistribute_random, redistribute_uniform, RewardEnsemble};
use crate::seeds::{derive_seed, rng_from_seed, Rng64};
use crate::sparsity::{apply_release, segment};
use crate::tensor::{flatten_gradients, Matrix, NetSpec, Network, OptimKind, OptimState};

/// Policy-gradient budget and hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RLConfig {
    /// Training episodes per weight policy, summed over all cycles.
    pub episodes_per_policy: usize,
    /// Episodes per gradient step.
    pub episodes_per_update: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    /// SymReg weight.
    pub lambda: f64,
    pub eval_episodes: usize,
    pub hidden_dim: usize,
    pub init_log_std: f64,
    /// Bias/variance trade-off of the generalised advantage estimate.
    pub gae_lambda: f64,
    /// Critic regression steps per policy update.
    pub critic_steps: usize,
}

impl Default for RLConfig {
    fn default() -> Self {
        RLConfig {
            episodes_per_policy: 400,
            episodes_per_update: 8,
            learning_rate: 0.01,
            gamma: 0.99,
            lambda: 0.01,
            eval_episodes: 10,
            hidden_dim: 64,
            init_log_std: -0.5,
            gae_lambda: 0.9,
            critic_steps: 4,
        }
    }
}

impl RLConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return input_err(format!("discount {} outside [0, 1)", self.gamma));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return input_err(format!("lambda {} must be a finite nonnegative number", self.lambda));
        }
        if !(self.learning_rate > 0.0) {
            return input_err("learning rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return input_err(format!("GAE lambda {} outside [0, 1]", self.gae_lambda));
        }
        if self.episodes_per_update == 0 || self.eval_episodes == 0 || self.hidden_dim == 0 {
            return input_err("episodes per update, eval episodes and hidden width must be positive");
        }
        Ok(())
    }

    pub fn gradient_steps(&self) -> usize {
        self.episodes_per_policy / self.episodes_per_update
    }
}

/// Which channel is sparse and how often it is released.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sparsity {
    pub channel: usize,
    pub p_rel: f64,
}

/// The per-step reward vector a learner is trained on.
#[derive(Debug, Clone, Copy)]
pub enum RewardSource<'a> {
    /// The true dense reward vector.
    Oracle,
    /// Dense channels plus the released lumps on the sparse channel.
    Baseline(Sparsity),
    /// Dense channels plus the ensemble's shaped reward on its sparse channel.
    Prism(&'a RewardEnsemble),
    /// Each released lump spread evenly over its segment.
    Uniform(Sparsity),
    /// Each released lump spread with random signed weights.
    Random(Sparsity),
}

impl RewardSource<'_> {
    /// Training rewards for one collected episode.
    pub fn training_rewards<R: Rng + ?Sized>(&self, traj: &Trajectory, rng: &mut R) -> Result<Vec<[f64; NUM_OBJECTIVES]>> {
        let mut out: Vec<[f64; NUM_OBJECTIVES]> = traj.steps.iter().map(|s| s.reward).collect();
        if out.is_empty() {
            return Ok(out);
        }
        match self {
            RewardSource::Oracle => {}
            RewardSource::Prism(ens) => {
                let shaped = ens.shape_trajectory(traj)?;
                for (o, r) in out.iter_mut().zip(shaped) {
                    o[ens.sparse_channel] = r;
                }
            }
            RewardSource::Baseline(sp) | RewardSource::Uniform(sp) | RewardSource::Random(sp) => {
                let events = apply_release(traj, sp.channel, sp.p_rel, rng)?;
                let segments = segment(traj, &events)?;
                for o in out.iter_mut() {
                    o[sp.channel] = 0.0;
                }
                for (seg, ev) in segments.iter().zip(&events) {
                    let spread = match self {
                        RewardSource::Baseline(_) => {
                            let mut v = vec![0.0; seg.len()];
                            v[seg.len() - 1] = ev.cumulative;
                            v
                        }
                        RewardSource::Uniform(_) => redistribute_uniform(seg.len(), ev.cumulative)?,
                        _ => redistribute_random(seg.len(), ev.cumulative, rng)?,
                    };
                    for (o, r) in out[seg.start..seg.end].iter_mut().zip(spread) {
                        o[sp.channel] = r;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// One sampled training episode.
#[derive(Debug, Clone)]
pub struct Episode {
    pub trajectory: Trajectory,
    pub actions: Vec<SampledAction>,
}

/// Runs one episode with actions sampled from the policy.
pub fn sample_episode<R: Rng + ?Sized>(env: &Env, policy: &PolicyNet, rng: &mut R) -> Result<Episode> {
    let mut actions = Vec::with_capacity(env.horizon());
    let mut failure = None;
    let trajectory = crate::envs::rollout_with(env, env.horizon(), rng, |s, _, r| match policy.sample(s, r) {
        Ok(a) => {
            let env_a = policy.env_action(&a);
            actions.push(a);
            env_a
        }
        Err(e) => {
            failure.get_or_insert(e);
            vec![0.0; env.action_dim()]
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Episode { trajectory, actions })
}

/// Diagnostics of one gradient step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub mean_return: f64,
    pub policy_loss: f64,
    pub symreg_loss: f64,
}

/// A policy together with its optimiser and sampling stream, so training can
/// pause between refinement cycles and resume exactly.
#[derive(Debug, Clone)]
pub struct PolicyLearner {
    pub policy: PolicyNet,
    pub weights: WeightVector,
    opt: OptimState,
    rng: Rng64,
    critic: Network,
    critic_opt: OptimState,
    return_scale: Option<f64>,
    first_batch_sq: (f64, usize),
    obs_scale: Vec<f64>,
    horizon: usize,
}

impl PolicyLearner {
    pub fn new(env: &Env, weights: WeightVector, cfg: &RLConfig, init_seed: u64, sample_seed: u64) -> Result<Self> {
        cfg.validate()?;
        let policy = PolicyNet::new(env, cfg.hidden_dim, cfg.init_log_std, &mut rng_from_seed(init_seed))?;
        let critic_spec = NetSpec {
            input_dim: env.state_dim() + 1,
            hidden_dim: cfg.hidden_dim,
            num_plain_layers: 1,
            num_residual_blocks: 0,
            output_dim: 1,
            dropout_rate: 0.0,
        };
        let critic = Network::new(critic_spec, &mut rng_from_seed(derive_seed(init_seed, "critic", 0)))?;
        Ok(PolicyLearner {
            policy,
            weights,
            opt: OptimState::new(OptimKind::Adam, cfg.learning_rate, 1.0)?,
            rng: rng_from_seed(sample_seed),
            critic,
            critic_opt: OptimState::new(OptimKind::Adam, cfg.learning_rate, 1.0)?,
            return_scale: None,
            first_batch_sq: (0.0, 0),
            obs_scale: env.observation_scale(),
            horizon: env.horizon().max(1),
        })
    }

    /// Rows `[scaled state, t/H]` for every step of the batch.
    fn critic_inputs(&self, episodes: &[Episode]) -> Result<Matrix> {
        let d = self.obs_scale.len() + 1;
        let mut data = Vec::new();
        for e in episodes {
            for (t, s) in e.trajectory.steps.iter().enumerate() {
                data.extend(s.state.iter().zip(&self.obs_scale).map(|(x, k)| x * k));
                data.push(t as f64 / self.horizon as f64);
            }
        }
        Matrix::from_vec(data.len() / d, d, data)
    }

    /// Mean-squared regression of the critic onto `targets / scale`.
    fn fit_critic(&mut self, x: &Matrix, targets: &[f64], cfg: &RLConfig) -> Result<()> {
        let scale = self.return_scale.unwrap_or(1.0);
        let n = targets.len() as f64;
        for _ in 0..cfg.critic_steps {
            let pred = self.critic.forward(x, false, &mut self.rng)?;
            let grad: Vec<f64> = pred
                .as_slice()
                .iter()
                .zip(targets)
                .map(|(p, y)| 2.0 * (p - y / scale) / n)
                .collect();
            let grads = self.critic.backward(&Matrix::from_vec(targets.len(), 1, grad)?)?;
            self.critic_opt.step_network(&mut self.critic, &grads)?;
        }
        Ok(())
    }

    /// Collects a batch and applies one gradient step.
    pub fn train_step(&mut self, env: &Env, source: &RewardSource, cfg: &RLConfig) -> Result<UpdateStats> {
        let mut episodes = Vec::with_capacity(cfg.episodes_per_update);
        let mut rewards = Vec::with_capacity(cfg.episodes_per_update);
        for _ in 0..cfg.episodes_per_update {
            let ep = sample_episode(env, &self.policy, &mut self.rng)?;
            rewards.push(source.training_rewards(&ep.trajectory, &mut self.rng)?);
            episodes.push(ep);
        }
        self.update(&episodes, &rewards, cfg)
    }

    pub fn train_steps(&mut self, env: &Env, source: &RewardSource, cfg: &RLConfig, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.train_step(env, source, cfg)?;
        }
        Ok(())
    }

    /// Gradient step on `−(1/n) Σ A_t log π(a_t|s_t) + λ L_eq` over the `n`
    /// visited states of the batch, followed by critic regression.
    ///
    /// Advantages are generalised advantage estimates from the learned
    /// critic `V(s, t/H)`, standardised over the batch. With `λ = 0` the
    /// mirrored half of the batch is never built, so the update is exactly
    /// the plain policy-gradient one.
    pub fn update(&mut self, episodes: &[Episode], rewards: &[Vec<[f64; NUM_OBJECTIVES]>], cfg: &RLConfig) -> Result<UpdateStats> {
        let states: Vec<&[f64]> = episodes
            .iter()
            .flat_map(|e| e.trajectory.steps.iter().map(|s| s.state.as_slice()))
            .collect();
        let n = states.len();
        if n == 0 {
            return input_err("update batch has no steps");
        }
        let critic_x = self.critic_inputs(episodes)?;
        let values = self.critic.predict(&critic_x)?.into_vec();

        let mut mean_return = 0.0;
        let mut advantages = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        let mut offset = 0;
        for r in rewards {
            let scalar: Vec<f64> = r.iter().map(|v| scalarize(v, &self.weights)).collect::<Result<_>>()?;
            mean_return += scalar.iter().sum::<f64>();
            let len = scalar.len();
            if self.return_scale.is_none() {
                // Fixed once from the first batch so critic targets stay
                // comparable across updates.
                let mut acc = 0.0;
                let mut sq = 0.0;
                for t in (0..len).rev() {
                    acc = scalar[t] + cfg.gamma * acc;
                    sq += acc * acc;
                }
                self.first_batch_sq.0 += sq;
                self.first_batch_sq.1 += len;
            }
            let scale = self.return_scale.unwrap_or(1.0);
            let v = |t: usize| if t < len { values[offset + t] * scale } else { 0.0 };
            let mut gae = 0.0;
            let mut adv = vec![0.0; len];
            for t in (0..len).rev() {
                let delta = scalar[t] + cfg.gamma * v(t + 1) - v(t);
                gae = delta + cfg.gamma * cfg.gae_lambda * gae;
                adv[t] = gae;
            }
            for (t, a) in adv.iter().enumerate() {
                targets.push(a + v(t));
            }
            advantages.extend(adv);
            offset += len;
        }
        mean_return /= episodes.len().max(1) as f64;
        if self.return_scale.is_none() {
            let (sq, count) = self.first_batch_sq;
            self.return_scale = Some((sq / count as f64).sqrt().max(1e-3));
        }
        let mean_adv = advantages.iter().sum::<f64>() / n as f64;
        let sd = (advantages.iter().map(|a| (a - mean_adv) * (a - mean_adv)).sum::<f64>() / n as f64).sqrt();
        for a in advantages.iter_mut() {
            *a = if sd > 1e-8 { (*a - mean_adv) / sd } else { 0.0 };
        }
        self.fit_critic(&critic_x, &targets, cfg)?;
        let actions: Vec<&SampledAction> = episodes.iter().flat_map(|e| e.actions.iter()).collect();
        let spec = self.policy.symmetry().clone();
        let with_symreg = cfg.lambda > 0.0;
        let x = self.policy.inputs(&states)?;
        let x = if with_symreg {
            let mirrored: Vec<Vec<f64>> = states.iter().map(|s| spec.reflect_state(s)).collect::<Result<_>>()?;
            x.vstack(&self.policy.inputs(&mirrored)?)?
        } else {
            x
        };
        let z = self.policy.net.forward(&x, false, &mut self.rng)?;
        let h = self.policy.squash(&z);
        let d = self.policy.head_dim();
        let discrete = self.policy.is_discrete();
        let inv_n = 1.0 / n as f64;

        // Upstream gradient with respect to the heads, then mapped through
        // the squashing to the network outputs.
        let mut grad_h = Matrix::zeros(x.rows(), d);
        let mut grad_z = Matrix::zeros(x.rows(), d);
        let mut grad_log_std = vec![0.0; self.policy.log_std.len()];
        let mut policy_loss = 0.0;
        for i in 0..n {
            let a = advantages[i];
            match actions[i] {
                SampledAction::Continuous(act) => {
                    for j in 0..d {
                        let mu = h.get(i, j);
                        let ls = self.policy.log_std[j];
                        let var = (2.0 * ls).exp();
                        let diff = act[j] - mu;
                        policy_loss -= a * inv_n * (-0.5 * diff * diff / var - ls);
                        grad_h.set(i, j, -a * inv_n * diff / var);
                        grad_log_std[j] -= a * inv_n * (diff * diff / var - 1.0);
                    }
                }
                SampledAction::Discrete(label) => {
                    let p = h.get(i, *label).max(f64::MIN_POSITIVE);
                    policy_loss -= a * inv_n * p.ln();
                    // Softmax log-likelihood gradient goes straight to logits.
                    for j in 0..d {
                        let ind = if j == *label { 1.0 } else { 0.0 };
                        grad_z.set(i, j, -a * inv_n * (ind - h.get(i, j)));
                    }
                }
            }
        }

        let mut symreg = 0.0;
        if with_symreg {
            for i in 0..n {
                let mirrored_head = spec.reflect_action(h.row(i))?;
                let delta: Vec<f64> = h.row(n + i).iter().zip(&mirrored_head).map(|(a, b)| a - b).collect();
                let l1: f64 = delta.iter().map(|v| v.abs()).sum();
                symreg += l1 * l1 * inv_n;
                let g: Vec<f64> = delta.iter().map(|v| cfg.lambda * 2.0 * inv_n * l1 * sign(*v)).collect();
                let back = spec.reflect_action(&g)?;
                for j in 0..d {
                    grad_h.set(n + i, j, grad_h.get(n + i, j) + g[j]);
                    grad_h.set(i, j, grad_h.get(i, j) - back[j]);
                }
            }
        }
        if !(policy_loss + cfg.lambda * symreg).is_finite() {
            return Err(PrismError::Numeric("non-finite policy loss".into()));
        }

        for i in 0..x.rows() {
            if discrete {
                let p = h.row(i);
                let gh = grad_h.row(i);
                let inner: f64 = gh.iter().zip(p).map(|(g, p)| g * p).sum();
                for j in 0..d {
                    grad_z.set(i, j, grad_z.get(i, j) + p[j] * (gh[j] - inner));
                }
            } else {
                for j in 0..d {
                    let m = h.get(i, j);
                    grad_z.set(i, j, grad_z.get(i, j) + grad_h.get(i, j) * (1.0 - m * m));
                }
            }
        }

        let mut grads = flatten_gradients(&self.policy.net.backward(&grad_z)?);
        grads.extend_from_slice(&grad_log_std);
        let mut params = self.policy.parameters_flat();
        self.opt.step_flat(&mut params, &grads)?;
        self.policy.set_parameters_flat(&params)?;
        Ok(UpdateStats {
            mean_return,
            policy_loss,
            symreg_loss: symreg,
        })
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Trains a fresh policy for `cfg.gradient_steps()` updates.
pub fn train_policy<R: Rng + ?Sized>(
    env: &Env,
    weights: &WeightVector,
    source: &RewardSource,
    cfg: &RLConfig,
    rng: &mut R,
) -> Result<PolicyNet> {
    let mut learner = PolicyLearner::new(env, weights.clone(), cfg, rng.gen(), rng.gen())?;
    learner.train_steps(env, source, cfg, cfg.gradient_steps())?;
    Ok(learner.policy)
}

/// Mean undiscounted vector return and per-objective std (denominator n).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub mean: [f64; NUM_OBJECTIVES],
    pub std: [f64; NUM_OBJECTIVES],
}

/// Greedy episodes; randomness enters only through environment noise.
pub fn greedy_returns<R: Rng + ?Sized>(env: &Env, policy: &PolicyNet, episodes: usize, rng: &mut R) -> Result<Vec<Trajectory>> {
    if episodes == 0 {
        return input_err("evaluation needs at least one episode");
    }
    (0..episodes)
        .map(|_| {
            let mut failure = None;
            let traj = crate::envs::rollout_with(env, env.horizon(), rng, |s, _, _| match policy.greedy(s) {
                Ok(a) => policy.env_action(&a),
                Err(e) => {
                    failure.get_or_insert(e);
                    vec![0.0; env.action_dim()]
                }
            })?;
            match failure {
                Some(e) => Err(e),
                None => Ok(traj),
            }
        })
        .collect()
}

pub fn evaluate_policy<R: Rng + ?Sized>(env: &Env, policy: &PolicyNet, episodes: usize, rng: &mut R) -> Result<Evaluation> {
    let returns: Vec<[f64; NUM_OBJECTIVES]> = greedy_returns(env, policy, episodes, rng)?
        .iter()
        .map(Trajectory::returns)
        .collect();
    let n = returns.len() as f64;
    let mut mean = [0.0; NUM_OBJECTIVES];
    let mut std = [0.0; NUM_OBJECTIVES];
    for k in 0..NUM_OBJECTIVES {
        mean[k] = returns.iter().map(|r| r[k]).sum::<f64>() / n;
        std[k] = (returns.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / n).sqrt();
    }
    Ok(Evaluation { mean, std })
}

/// Mean over greedy episodes of `Σ_t ω·r_t`.
pub fn evaluate_scalarized<R: Rng + ?Sized>(
    env: &Env,
    policy: &PolicyNet,
    weights: &WeightVector,
    episodes: usize,
    rng: &mut R,
) -> Result<f64> {
    let trajs = greedy_returns(env, policy, episodes, rng)?;
    let mut total = 0.0;
    for t in &trajs {
        for s in &t.steps {
            total += scalarize(&s.reward, weights)?;
        }
    }
    Ok(total / trajs.len() as f64)
}
