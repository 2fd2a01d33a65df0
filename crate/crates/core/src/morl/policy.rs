use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::envs::{ActionSpace, Env};
use crate::error::{input_err, PrismError, Result};
use crate::symmetry::{DeterministicPolicy, PolicyOutput, SymmetrySpec};
use crate::tensor::{snapshot, Matrix, NetSpec, Network};

/// Bounds keeping the Gaussian scale in a numerically sane range.
pub const LOG_STD_MIN: f64 = -3.0;
pub const LOG_STD_MAX: f64 = 1.0;

/// Stochastic policy `π(a|s; φ)`.
///
/// Continuous environments get a Gaussian whose mean is `tanh` of the network
/// output, so the mean is an odd saturating function of the pre-activation and
/// lies in [−1, 1]. Discrete environments get a softmax over labels. States are
/// multiplied by the environment's observation scale before the network.
#[derive(Debug, Clone)]
pub struct PolicyNet {
    pub net: Network,
    pub log_std: Vec<f64>,
    obs_scale: Vec<f64>,
    space: ActionSpace,
    symmetry: SymmetrySpec,
}

/// A sampled action: what is sent to the environment and what the
/// log-likelihood is evaluated at.
#[derive(Debug, Clone, PartialEq)]
pub enum SampledAction {
    Continuous(Vec<f64>),
    Discrete(usize),
}

impl PolicyNet {
    /// Two hidden layers of width `hidden`, head weights scaled down so the
    /// initial mean is near zero and initial label probabilities near uniform.
    pub fn new<R: Rng + ?Sized>(env: &Env, hidden: usize, init_log_std: f64, rng: &mut R) -> Result<Self> {
        let space = env.action_space();
        let out_dim = match &space {
            ActionSpace::Continuous { dim } => *dim,
            ActionSpace::Discrete { values } => values.len(),
        };
        let spec = NetSpec {
            input_dim: env.state_dim(),
            hidden_dim: hidden,
            num_plain_layers: 1,
            num_residual_blocks: 0,
            output_dim: out_dim,
            dropout_rate: 0.0,
        };
        let mut net = Network::new(spec, rng)?;
        net.head_mut().weights.map_inplace(|w| w * 0.01);
        let log_std = match &space {
            ActionSpace::Continuous { dim } => vec![init_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX); *dim],
            ActionSpace::Discrete { .. } => Vec::new(),
        };
        Ok(PolicyNet {
            net,
            log_std,
            obs_scale: env.observation_scale(),
            space,
            symmetry: env.symmetry(),
        })
    }

    pub fn symmetry(&self) -> &SymmetrySpec {
        &self.symmetry
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.space, ActionSpace::Discrete { .. })
    }

    pub fn head_dim(&self) -> usize {
        self.net.spec().output_dim
    }

    /// Scaled network inputs for a batch of raw states.
    pub fn inputs<S: AsRef<[f64]>>(&self, states: &[S]) -> Result<Matrix> {
        let d = self.obs_scale.len();
        let mut data = Vec::with_capacity(states.len() * d);
        for s in states {
            let s = s.as_ref();
            if s.len() != d {
                return input_err(format!("state has {} entries, expected {d}", s.len()));
            }
            data.extend(s.iter().zip(&self.obs_scale).map(|(x, k)| x * k));
        }
        Matrix::from_vec(states.len(), d, data)
    }

    /// Applies the output squashing row by row: `tanh` or softmax.
    pub fn squash(&self, z: &Matrix) -> Matrix {
        let mut h = z.clone();
        if self.is_discrete() {
            for r in 0..h.rows() {
                softmax_inplace(h.row_mut(r));
            }
        } else {
            h.map_inplace(f64::tanh);
        }
        h
    }

    /// Deterministic heads for a batch of states.
    pub fn heads<S: AsRef<[f64]>>(&self, states: &[S]) -> Result<Matrix> {
        let z = self.net.predict(&self.inputs(states)?)?;
        Ok(self.squash(&z))
    }

    pub fn output(&self, state: &[f64]) -> Result<PolicyOutput<f64>> {
        let head = self.heads(&[state])?.into_vec();
        Ok(if self.is_discrete() {
            PolicyOutput::Discrete { probs: head }
        } else {
            PolicyOutput::Continuous {
                mean: head,
                log_std: self.log_std.clone(),
            }
        })
    }

    /// Environment action for a sampled action.
    pub fn env_action(&self, a: &SampledAction) -> Vec<f64> {
        match (a, &self.space) {
            (SampledAction::Continuous(v), _) => v.clone(),
            (SampledAction::Discrete(i), ActionSpace::Discrete { values }) => vec![values[*i]],
            (SampledAction::Discrete(_), ActionSpace::Continuous { .. }) => unreachable!("label on a continuous policy"),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<SampledAction> {
        let head = self.heads(&[state])?.into_vec();
        if self.is_discrete() {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (i, p) in head.iter().enumerate() {
                acc += p;
                if u < acc {
                    return Ok(SampledAction::Discrete(i));
                }
            }
            Ok(SampledAction::Discrete(head.len() - 1))
        } else {
            Ok(SampledAction::Continuous(
                head.iter()
                    .zip(&self.log_std)
                    .map(|(m, ls)| {
                        let eps: f64 = StandardNormal.sample(rng);
                        m + ls.exp() * eps
                    })
                    .collect(),
            ))
        }
    }

    /// Greedy action: the Gaussian mean, or the most probable label with
    /// ties going to the lowest index.
    pub fn greedy(&self, state: &[f64]) -> Result<SampledAction> {
        let head = self.heads(&[state])?.into_vec();
        if self.is_discrete() {
            let mut best = 0;
            for (i, p) in head.iter().enumerate() {
                if *p > head[best] {
                    best = i;
                }
            }
            Ok(SampledAction::Discrete(best))
        } else {
            Ok(SampledAction::Continuous(head))
        }
    }

    /// Network parameters followed by the log-std entries.
    pub fn parameters_flat(&self) -> Vec<f64> {
        let mut p = self.net.parameters_flat();
        p.extend_from_slice(&self.log_std);
        p
    }

    pub fn set_parameters_flat(&mut self, values: &[f64]) -> Result<()> {
        let n = self.net.num_parameters();
        if values.len() != n + self.log_std.len() {
            return input_err("policy parameter vector has the wrong length");
        }
        self.net.set_parameters_flat(&values[..n])?;
        for (dst, src) in self.log_std.iter_mut().zip(&values[n..]) {
            *dst = src.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
        Ok(())
    }

    /// Snapshot bytes: the network tensors followed by a 1×d log-std tensor
    /// (0 columns for discrete policies).
    pub fn encode(&self) -> Vec<u8> {
        let mut bytes = snapshot::encode_network(&self.net);
        let extra = Matrix::from_vec(1, self.log_std.len(), self.log_std.clone()).expect("finite log-std");
        // Re-encode with the extra tensor appended to the list.
        let mut tensors = snapshot::read_tensors(&bytes[..]).expect("own encoding decodes");
        tensors.push(extra);
        bytes.clear();
        let refs: Vec<&Matrix> = tensors.iter().collect();
        snapshot::write_tensors(&mut bytes, &refs).expect("writing to a Vec cannot fail");
        bytes
    }

    pub fn decode(&mut self, bytes: &[u8]) -> Result<()> {
        let mut tensors = snapshot::read_tensors(bytes)?;
        let extra = tensors
            .pop()
            .ok_or_else(|| PrismError::Input("empty policy snapshot".into()))?;
        if extra.cols() != self.log_std.len() {
            return input_err("log-std tensor has the wrong size");
        }
        let refs: Vec<&Matrix> = tensors.iter().collect();
        let mut net_bytes = Vec::new();
        snapshot::write_tensors(&mut net_bytes, &refs)?;
        snapshot::decode_into(&mut self.net, &net_bytes)?;
        self.log_std = extra.into_vec();
        Ok(())
    }
}

impl DeterministicPolicy<f64> for PolicyNet {
    fn head(&self, state: &[f64]) -> Vec<f64> {
        self.heads(&[state])
            .expect("state dimension checked by the caller")
            .into_vec()
    }
}

pub(crate) fn softmax_inplace(z: &mut [f64]) {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
}
