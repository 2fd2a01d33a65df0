use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};
use crate::scalar::Scalar;

/// How the reflection acts on actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ActionMode {
    /// Negate the symmetric action coordinates.
    ContinuousNegation,
    /// Permute action labels; `pairing[i]` is the mirror of label `i`.
    DiscretePermutation { pairing: Vec<usize> },
}

/// Partition of state and action coordinates into reflected and fixed parts.
///
/// Serialised as explicit index lists, one list per partition cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetrySpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub sym_state_idx: Vec<usize>,
    pub asym_state_idx: Vec<usize>,
    pub sym_action_idx: Vec<usize>,
    pub asym_action_idx: Vec<usize>,
    pub action_mode: ActionMode,
}

fn check_partition(dim: usize, a: &[usize], b: &[usize], what: &str) -> Result<()> {
    let mut seen = vec![false; dim];
    for &i in a.iter().chain(b) {
        if i >= dim {
            return input_err(format!("{what} index {i} out of range for dimension {dim}"));
        }
        if seen[i] {
            return input_err(format!("{what} index {i} appears twice"));
        }
        seen[i] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return input_err(format!("{what} index {missing} is in neither partition"));
    }
    Ok(())
}

impl SymmetrySpec {
    /// Builds a continuous-action spec; asym sets are the complements.
    pub fn continuous(
        state_dim: usize,
        action_dim: usize,
        sym_state_idx: Vec<usize>,
        sym_action_idx: Vec<usize>,
    ) -> Result<Self> {
        let asym_state_idx = (0..state_dim).filter(|i| !sym_state_idx.contains(i)).collect();
        let asym_action_idx = (0..action_dim).filter(|i| !sym_action_idx.contains(i)).collect();
        let spec = SymmetrySpec {
            state_dim,
            action_dim,
            sym_state_idx,
            asym_state_idx,
            sym_action_idx,
            asym_action_idx,
            action_mode: ActionMode::ContinuousNegation,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds a discrete-action spec from a label pairing.
    pub fn discrete(state_dim: usize, sym_state_idx: Vec<usize>, pairing: Vec<usize>) -> Result<Self> {
        let asym_state_idx = (0..state_dim).filter(|i| !sym_state_idx.contains(i)).collect();
        let action_dim = pairing.len();
        let sym_action_idx = (0..action_dim).filter(|&i| pairing[i] != i).collect();
        let asym_action_idx = (0..action_dim).filter(|&i| pairing[i] == i).collect();
        let spec = SymmetrySpec {
            state_dim,
            action_dim,
            sym_state_idx,
            asym_state_idx,
            sym_action_idx,
            asym_action_idx,
            action_mode: ActionMode::DiscretePermutation { pairing },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_partition(self.state_dim, &self.sym_state_idx, &self.asym_state_idx, "state")?;
        check_partition(self.action_dim, &self.sym_action_idx, &self.asym_action_idx, "action")?;
        if let ActionMode::DiscretePermutation { pairing } = &self.action_mode {
            if pairing.len() != self.action_dim {
                return input_err("pairing length must equal action_dim");
            }
            for (i, &j) in pairing.iter().enumerate() {
                if j >= pairing.len() || pairing[j] != i {
                    return input_err(format!("pairing is not an involution at label {i}"));
                }
                if (j != i) != self.sym_action_idx.contains(&i) {
                    return input_err(format!(
                        "label {i}: sym_action_idx must hold exactly the labels moved by the pairing"
                    ));
                }
            }
        }
        Ok(())
    }

    /// `L_g(s) = (s_asym, −s_sym)`
    pub fn reflect_state<T: Scalar>(&self, s: &[T]) -> Result<Vec<T>> {
        if s.len() != self.state_dim {
            return input_err(format!("state has {} entries, expected {}", s.len(), self.state_dim));
        }
        let mut out = s.to_vec();
        for &i in &self.sym_state_idx {
            out[i] = -out[i];
        }
        Ok(out)
    }

    /// `K_g` on an action or on a deterministic policy head.
    ///
    /// Continuous mode negates the symmetric coordinates; discrete mode moves
    /// the mass of each label to its mirror label.
    pub fn reflect_action<T: Scalar>(&self, a: &[T]) -> Result<Vec<T>> {
        if a.len() != self.action_dim {
            return input_err(format!("action has {} entries, expected {}", a.len(), self.action_dim));
        }
        match &self.action_mode {
            ActionMode::ContinuousNegation => {
                let mut out = a.to_vec();
                for &i in &self.sym_action_idx {
                    out[i] = -out[i];
                }
                Ok(out)
            }
            ActionMode::DiscretePermutation { pairing } => {
                let mut out = vec![T::zero(); a.len()];
                for (i, &j) in pairing.iter().enumerate() {
                    out[j] = a[i];
                }
                Ok(out)
            }
        }
    }

    pub fn reflect_output<T: Scalar>(&self, out: &PolicyOutput<T>) -> Result<PolicyOutput<T>> {
        match out {
            PolicyOutput::Continuous { mean, log_std } => Ok(PolicyOutput::Continuous {
                mean: self.reflect_action(mean)?,
                log_std: log_std.clone(),
            }),
            PolicyOutput::Discrete { probs } => Ok(PolicyOutput::Discrete {
                probs: self.reflect_action(probs)?,
            }),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.action_mode, ActionMode::DiscretePermutation { .. })
    }
}

/// Full output of a stochastic policy at one state.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyOutput<T> {
    Continuous { mean: Vec<T>, log_std: Vec<T> },
    Discrete { probs: Vec<T> },
}

impl<T: Scalar> PolicyOutput<T> {
    /// The deterministic head every symmetry operation acts on.
    pub fn head(&self) -> &[T] {
        match self {
            PolicyOutput::Continuous { mean, .. } => mean,
            PolicyOutput::Discrete { probs } => probs,
        }
    }

    pub fn check(&self, tol: T) -> Result<()> {
        match self {
            PolicyOutput::Continuous { mean, log_std } => {
                if mean.len() != log_std.len() {
                    return input_err("mean and log-std lengths differ");
                }
                Ok(())
            }
            PolicyOutput::Discrete { probs } => {
                if probs.iter().any(|p| *p < T::zero()) {
                    return input_err("negative probability");
                }
                let total = probs.iter().fold(T::zero(), |a, b| a + *b);
                if (total - T::one()).abs() > tol {
                    return input_err("probabilities do not sum to one");
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leancraft() -> SymmetrySpec {
        SymmetrySpec::continuous(4, 2, vec![2, 3], vec![1]).unwrap()
    }

    #[test]
    fn reflects_symmetric_state_part() {
        let s = [1.0, 2.0, 0.3, -0.4];
        assert_eq!(leancraft().reflect_state(&s).unwrap(), vec![1.0, 2.0, -0.3, 0.4]);
    }

    #[test]
    fn empty_sym_set_is_identity() {
        let spec = SymmetrySpec::continuous(3, 1, vec![], vec![]).unwrap();
        let s = [1.0, -2.0, 3.5];
        assert_eq!(spec.reflect_state(&s).unwrap(), s.to_vec());
    }

    #[test]
    fn reflects_symmetric_action_part() {
        assert_eq!(leancraft().reflect_action(&[1.0, 0.5]).unwrap(), vec![1.0, -0.5]);
    }

    #[test]
    fn discrete_pairing_swaps_probabilities() {
        let spec = SymmetrySpec::discrete(1, vec![0], vec![1, 0]).unwrap();
        assert_eq!(spec.reflect_action(&[0.7, 0.3]).unwrap(), vec![0.3, 0.7]);
    }

    #[test]
    fn log_std_is_untouched() {
        let out = PolicyOutput::Continuous {
            mean: vec![0.2, 0.4],
            log_std: vec![-1.0, -2.0],
        };
        let r = leancraft().reflect_output(&out).unwrap();
        assert_eq!(
            r,
            PolicyOutput::Continuous {
                mean: vec![0.2, -0.4],
                log_std: vec![-1.0, -2.0]
            }
        );
    }

    #[test]
    fn dimension_mismatch_is_input_error() {
        assert!(leancraft().reflect_state(&[1.0, 2.0]).is_err());
        assert!(leancraft().reflect_action(&[1.0]).is_err());
    }

    #[test]
    fn rejects_bad_partitions() {
        let mut spec = leancraft();
        spec.asym_state_idx.push(2);
        assert!(spec.validate().is_err());
        let mut spec = leancraft();
        spec.sym_state_idx.clear();
        assert!(spec.validate().is_err());
        assert!(SymmetrySpec::discrete(1, vec![0], vec![1, 1]).is_err());
    }

    #[test]
    fn serialises_as_index_lists() {
        let json = serde_json::to_value(leancraft()).unwrap();
        assert_eq!(json["sym_state_idx"], serde_json::json!([2, 3]));
        assert_eq!(json["asym_action_idx"], serde_json::json!([0]));
        assert_eq!(json["action_mode"]["mode"], "continuous-negation");
        let back: SymmetrySpec = serde_json::from_value(json).unwrap();
        assert_eq!(back, leancraft());
    }
}
