use crate::error::{input_err, Result};
use crate::scalar::dot;

/// A nonnegative weight vector on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|w| !(*w >= 0.0)) {
            return input_err("weights must be nonnegative");
        }
        let s: f64 = values.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return input_err(format!("weights sum to {s}, expected 1"));
        }
        Ok(WeightVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn pair(&self) -> [f64; 2] {
        [self.0[0], self.0[1]]
    }
}

/// `ω_i = (i/(n−1), 1 − i/(n−1))` for `i = 0..n`.
pub fn weight_grid(n: usize, objectives: usize) -> Result<Vec<WeightVector>> {
    if n < 2 {
        return input_err("weight grid needs at least two weights");
    }
    if objectives != 2 {
        return input_err("weight grid is defined for two objectives");
    }
    Ok((0..n)
        .map(|i| {
            let w = i as f64 / (n - 1) as f64;
            WeightVector(vec![w, 1.0 - w])
        })
        .collect())
}

pub fn scalarize(reward: &[f64], weights: &WeightVector) -> Result<f64> {
    if reward.len() != weights.0.len() {
        return input_err("reward and weight dimensions differ");
    }
    Ok(dot(reward, &weights.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_and_midpoint() {
        let two: Vec<Vec<f64>> = weight_grid(2, 2).unwrap().iter().map(|w| w.as_slice().to_vec()).collect();
        assert_eq!(two, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let three: Vec<Vec<f64>> = weight_grid(3, 2).unwrap().iter().map(|w| w.as_slice().to_vec()).collect();
        assert_eq!(three, vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]);
        assert!(weight_grid(1, 2).is_err());
    }

    #[test]
    fn grid_weights_sum_to_one() {
        for w in weight_grid(101, 2).unwrap() {
            assert_eq!(w.as_slice().iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn scalarize_cases() {
        let one_hot = WeightVector::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(scalarize(&[3.0, -1.0], &one_hot).unwrap(), 3.0);
        let half = WeightVector::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(scalarize(&[2.0, 4.0], &half).unwrap(), 3.0);
        assert!(scalarize(&[1.0], &half).is_err());
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![1.5, -0.5]).is_err());
    }
}
