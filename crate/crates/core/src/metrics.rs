//! Pareto-front quality: non-dominated filtering, hypervolume, expected
//! utility and the mean/std trade-off score.

use rand::Rng;

use crate::error::{input_err, PrismError, Result};
use crate::scalar::{dot, from_count, Scalar};

/// Default reference point for hypervolume: −100 on every objective.
pub const DEFAULT_REFERENCE: f64 = -100.0;

/// An evaluated policy: mean return per objective and, optionally, the
/// per-objective standard deviation of its returns.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoPoint<T> {
    pub values: Vec<T>,
    pub std: Option<Vec<T>>,
}

impl<T: Scalar> ParetoPoint<T> {
    pub fn new(values: Vec<T>) -> Self {
        ParetoPoint { values, std: None }
    }

    pub fn with_std(values: Vec<T>, std: Vec<T>) -> Self {
        ParetoPoint { values, std: Some(std) }
    }
}

/// `a` is at least as good as `b` everywhere and strictly better somewhere.
pub fn dominates<T: Scalar>(a: &[T], b: &[T]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strict = true;
        }
    }
    strict
}

/// Non-dominated subset, first occurrence kept for duplicates, input order
/// otherwise preserved.
pub fn pareto_filter<T: Scalar>(points: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    if let Some(first) = points.first() {
        if points.iter().any(|p| p.len() != first.len()) {
            return input_err("points have inconsistent dimensions");
        }
    }
    let mut unique: Vec<&Vec<T>> = Vec::with_capacity(points.len());
    for p in points {
        if !unique.iter().any(|q| *q == p) {
            unique.push(p);
        }
    }
    Ok(unique
        .iter()
        .filter(|p| !unique.iter().any(|q| dominates(q, p)))
        .map(|p| (*p).clone())
        .collect())
}

/// Exact two-objective hypervolume by a staircase sweep.
///
/// Coordinates below the reference are clipped to it, so such points add no
/// volume along that axis.
pub fn hypervolume<T: Scalar>(points: &[Vec<T>], reference: &[T]) -> Result<T> {
    if reference.len() != 2 {
        return Err(PrismError::Unsupported(format!(
            "exact hypervolume supports 2 objectives, got {}",
            reference.len()
        )));
    }
    if points.iter().any(|p| p.len() != 2) {
        return Err(PrismError::Unsupported("exact hypervolume supports 2 objectives".into()));
    }
    let clipped: Vec<Vec<T>> = points
        .iter()
        .map(|p| vec![p[0].max_of(reference[0]), p[1].max_of(reference[1])])
        .collect();
    let mut front = pareto_filter(&clipped)?;
    front.sort_by(|a, b| b[0].partial_cmp(&a[0]).expect("comparable objective values"));
    let mut volume = T::zero();
    for (i, p) in front.iter().enumerate() {
        let next_x = front.get(i + 1).map(|q| q[0]).unwrap_or(reference[0]);
        volume = volume + (p[0] - next_x) * (p[1] - reference[1]);
    }
    Ok(volume)
}

/// Monte Carlo estimate of the dominated volume in any dimension: the
/// fraction of uniform samples in the box `[reference, max]` that some point
/// dominates, times the box volume.
pub fn hypervolume_monte_carlo<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    reference: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if samples == 0 {
        return input_err("need at least one sample");
    }
    let dim = reference.len();
    let clipped: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(reference).map(|(x, r)| x.max(*r)).collect())
        .collect();
    let upper: Vec<f64> = (0..dim)
        .map(|i| clipped.iter().map(|p: &Vec<f64>| p[i]).fold(reference[i], f64::max))
        .collect();
    let box_volume: f64 = upper.iter().zip(reference).map(|(u, r)| u - r).product();
    if box_volume == 0.0 {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    let mut x = vec![0.0; dim];
    for _ in 0..samples {
        for i in 0..dim {
            x[i] = rng.gen_range(reference[i]..upper[i]);
        }
        if clipped.iter().any(|p| p.iter().zip(&x).all(|(pi, xi)| pi >= xi)) {
            hits += 1;
        }
    }
    Ok(box_volume * hits as f64 / samples as f64)
}

/// Expected utility: mean over weights of the best linear utility in the set.
pub fn eum<T: Scalar>(points: &[Vec<T>], weights: &[Vec<T>]) -> Result<T> {
    if points.is_empty() {
        return input_err("expected utility needs a nonempty coverage set");
    }
    if weights.is_empty() {
        return input_err("expected utility needs at least one weight vector");
    }
    let mut total = T::zero();
    for w in weights {
        let mut best: Option<T> = None;
        for p in points {
            if p.len() != w.len() {
                return input_err("weight and point dimensions differ");
            }
            let u = dot(w, p);
            best = Some(best.map_or(u, |b| b.max_of(u)));
        }
        total = total + best.expect("nonempty");
    }
    Ok(total / from_count(weights.len()))
}

/// Draws `m` preference vectors in `R^{2L}` with uniform entries normalised
/// to sum one. Entry `2i` weights the mean of objective `i`, entry `2i+1`
/// its standard deviation.
pub fn sample_vo_preferences<R: Rng + ?Sized>(m: usize, objectives: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| {
            let raw: Vec<f64> = (0..2 * objectives).map(|_| rng.gen::<f64>()).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        })
        .collect()
}

/// `u(p, π) = Σᵢ p₂ᵢ·meanᵢ − p₂ᵢ₊₁·stdᵢ`
pub fn vo_utility<T: Scalar>(preference: &[T], point: &ParetoPoint<T>) -> Result<T> {
    let std = point
        .std
        .as_ref()
        .ok_or_else(|| PrismError::Input("variance objective needs per-objective std".into()))?;
    if preference.len() != 2 * point.values.len() || std.len() != point.values.len() {
        return input_err("preference must have two entries per objective");
    }
    Ok(point
        .values
        .iter()
        .zip(std)
        .enumerate()
        .fold(T::zero(), |acc, (i, (m, s))| {
            acc + preference[2 * i] * *m - preference[2 * i + 1] * *s
        }))
}

/// Mean over preferences of the best mean-minus-std utility in the set.
pub fn variance_objective<T: Scalar>(points: &[ParetoPoint<T>], preferences: &[Vec<T>]) -> Result<T> {
    if points.is_empty() {
        return input_err("variance objective needs at least one policy");
    }
    if preferences.is_empty() {
        return input_err("variance objective needs at least one preference");
    }
    let mut total = T::zero();
    for p in preferences {
        let mut best: Option<T> = None;
        for pt in points {
            let u = vo_utility(p, pt)?;
            best = Some(best.map_or(u, |b| b.max_of(u)));
        }
        total = total + best.expect("nonempty");
    }
    Ok(total / from_count(preferences.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::rng_from_seed;
    use num_rational::Ratio;

    fn pts(v: &[[f64; 2]]) -> Vec<Vec<f64>> {
        v.iter().map(|p| p.to_vec()).collect()
    }

    #[test]
    fn filter_cases() {
        assert_eq!(pareto_filter(&pts(&[[1.0, 2.0]])).unwrap(), pts(&[[1.0, 2.0]]));
        assert_eq!(
            pareto_filter(&pts(&[[1.0, 2.0], [2.0, 1.0], [0.0, 0.0]])).unwrap(),
            pts(&[[1.0, 2.0], [2.0, 1.0]])
        );
        assert_eq!(pareto_filter(&pts(&[[1.0, 1.0], [1.0, 1.0]])).unwrap(), pts(&[[1.0, 1.0]]));
        assert!(pareto_filter::<f64>(&[]).unwrap().is_empty());
        assert!(pareto_filter(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn single_precision_agrees() {
        let p32: Vec<Vec<f32>> = vec![vec![1.0, 3.0], vec![3.0, 1.0], vec![0.5, 0.5]];
        assert_eq!(pareto_filter(&p32).unwrap().len(), 2);
        assert_eq!(hypervolume(&p32, &[0.0, 0.0]).unwrap(), 5.0f32);
        let w: Vec<Vec<f32>> = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]];
        assert!((eum(&p32, &w).unwrap() - 8.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn hypervolume_hand_cases() {
        assert_eq!(hypervolume(&pts(&[[2.0, 3.0]]), &[0.0, 0.0]).unwrap(), 6.0);
        assert_eq!(hypervolume(&pts(&[[1.0, 3.0], [3.0, 1.0]]), &[0.0, 0.0]).unwrap(), 5.0);
        assert_eq!(hypervolume(&pts(&[[-1.0, 3.0]]), &[0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(
            hypervolume(&[vec![1.0, 2.0, 3.0]], &[0.0, 0.0, 0.0]),
            Err(PrismError::Unsupported(_))
        ));
    }

    #[test]
    fn hypervolume_is_exact_over_rationals() {
        let q = |a: i64, b: i64| Ratio::new(a, b);
        let points = vec![vec![q(1, 3), q(5, 2)], vec![q(3, 2), q(1, 7)], vec![q(1, 4), q(1, 4)]];
        let hv = hypervolume(&points, &[q(0, 1), q(0, 1)]).unwrap();
        // Inclusion–exclusion over the two front points.
        assert_eq!(hv, q(1, 3) * q(5, 2) + q(3, 2) * q(1, 7) - q(1, 3) * q(1, 7));
    }

    #[test]
    fn monte_carlo_agrees_with_sweep() {
        let points = pts(&[[1.0, 3.0], [3.0, 1.0], [2.0, 2.0]]);
        let exact = hypervolume(&points, &[0.0, 0.0]).unwrap();
        let mc = hypervolume_monte_carlo(&points, &[0.0, 0.0], 200_000, &mut rng_from_seed(1)).unwrap();
        assert!((mc - exact).abs() / exact < 0.01, "{mc} vs {exact}");
    }

    #[test]
    fn eum_hand_case() {
        let cs = pts(&[[1.0, 0.0], [0.0, 1.0]]);
        let w = pts(&[[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]);
        assert!((eum(&cs, &w).unwrap() - 2.5 / 3.0).abs() < 1e-12);
        assert!(eum::<f64>(&[], &w).is_err());
        let single = pts(&[[2.0, -1.0]]);
        let mean_u = w.iter().map(|w| 2.0 * w[0] - w[1]).sum::<f64>() / 3.0;
        assert!((eum(&single, &w).unwrap() - mean_u).abs() < 1e-12);
    }

    #[test]
    fn vo_degenerate_and_two_policy_cases() {
        let p = ParetoPoint::with_std(vec![3.0, -1.0], vec![0.0, 0.0]);
        assert_eq!(variance_objective(&[p], &[vec![1.0, 0.0, 0.0, 0.0]]).unwrap(), 3.0);

        let a = ParetoPoint::with_std(vec![1.0, 0.0], vec![0.0, 0.0]);
        let b = ParetoPoint::with_std(vec![0.0, 1.0], vec![0.0, 0.0]);
        let prefs = vec![vec![0.4, 0.1, 0.3, 0.2], vec![0.1, 0.2, 0.6, 0.1]];
        // max(0.4, 0.3) and max(0.1, 0.6)
        let vo: f64 = variance_objective(&[a, b], &prefs).unwrap();
        assert!((vo - 0.5).abs() < 1e-12);
        assert!(variance_objective::<f64>(&[], &prefs).is_err());
    }

    #[test]
    fn preferences_are_normalised() {
        let prefs = sample_vo_preferences(50, 2, &mut rng_from_seed(3));
        assert_eq!(prefs.len(), 50);
        for p in prefs {
            assert_eq!(p.len(), 4);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|v| *v >= 0.0));
        }
    }
}
