use super::spec::SymmetrySpec;
use crate::error::{input_err, PrismError, Result};
use crate::scalar::{from_count, l1_distance, l1_norm, Real, Scalar};

/// A policy seen through its deterministic head (Gaussian mean or
/// categorical probabilities).
pub trait DeterministicPolicy<T> {
    fn head(&self, state: &[T]) -> Vec<T>;
}

impl<T, F> DeterministicPolicy<T> for F
where
    F: Fn(&[T]) -> Vec<T>,
{
    fn head(&self, state: &[T]) -> Vec<T> {
        self(state)
    }
}

fn checked_head<T: Scalar, P: DeterministicPolicy<T> + ?Sized>(
    policy: &P,
    spec: &SymmetrySpec,
    s: &[T],
) -> Result<Vec<T>> {
    let out = policy.head(s);
    if out.len() != spec.action_dim {
        return input_err(format!(
            "policy head has {} entries, expected {}",
            out.len(),
            spec.action_dim
        ));
    }
    Ok(out)
}

/// `Δ_π(s) = π(L_g s) − K_g(π(s))`
pub fn mismatch<T: Scalar, P: DeterministicPolicy<T> + ?Sized>(
    policy: &P,
    spec: &SymmetrySpec,
    s: &[T],
) -> Result<Vec<T>> {
    let reflected_state = spec.reflect_state(s)?;
    let at_mirror = checked_head(policy, spec, &reflected_state)?;
    let mirrored = spec.reflect_action(&checked_head(policy, spec, s)?)?;
    Ok(at_mirror.iter().zip(&mirrored).map(|(a, b)| *a - *b).collect())
}

/// Mean over the batch of `‖Δ_π(s)‖₁²`.
pub fn symreg_loss<T: Scalar, P: DeterministicPolicy<T> + ?Sized, S: AsRef<[T]>>(
    policy: &P,
    spec: &SymmetrySpec,
    states: &[S],
) -> Result<T> {
    if states.is_empty() {
        return input_err("symreg loss needs at least one state");
    }
    let mut total = T::zero();
    for s in states {
        let n = l1_norm(&mismatch(policy, spec, s.as_ref())?);
        total = total + n * n;
    }
    Ok(total / from_count(states.len()))
}

/// `Q(π)(s) = ½(π(s) + K_g(π(L_g s)))`, the projection onto equivariant policies.
#[derive(Debug, Clone)]
pub struct OrbitAverage<'a, P: ?Sized> {
    policy: &'a P,
    spec: &'a SymmetrySpec,
}

pub fn orbit_average<'a, P: ?Sized>(policy: &'a P, spec: &'a SymmetrySpec) -> OrbitAverage<'a, P> {
    OrbitAverage { policy, spec }
}

impl<'a, T: Scalar, P: DeterministicPolicy<T> + ?Sized> DeterministicPolicy<T> for OrbitAverage<'a, P> {
    fn head(&self, state: &[T]) -> Vec<T> {
        let direct = self.policy.head(state);
        let reflected_state = self
            .spec
            .reflect_state(state)
            .expect("orbit average evaluated at a state of the wrong dimension");
        let mirrored = self
            .spec
            .reflect_action(&self.policy.head(&reflected_state))
            .expect("policy head has the wrong dimension");
        direct
            .iter()
            .zip(&mirrored)
            .map(|(a, b)| (*a + *b) * T::half())
            .collect()
    }
}

/// Largest ℓ1 distance between the heads of two policies over a state sample.
///
/// On a finite state space with the full state set this is the exact
/// `l∞,1` distance; otherwise it is a lower estimate of the supremum.
pub fn sup_metric<T, P1, P2, S>(p1: &P1, p2: &P2, sample: &[S]) -> Result<T>
where
    T: Scalar,
    P1: DeterministicPolicy<T> + ?Sized,
    P2: DeterministicPolicy<T> + ?Sized,
    S: AsRef<[T]>,
{
    if sample.is_empty() {
        return input_err("sup metric needs a nonempty state sample");
    }
    let mut best = T::zero();
    for s in sample {
        let a = p1.head(s.as_ref());
        let b = p2.head(s.as_ref());
        if a.len() != b.len() {
            return input_err("policies disagree on head dimension");
        }
        best = best.max_of(l1_distance(&a, &b));
    }
    Ok(best)
}

/// The sample together with the reflection of every state in it.
pub fn reflection_closure<T: Scalar, S: AsRef<[T]>>(
    spec: &SymmetrySpec,
    sample: &[S],
) -> Result<Vec<Vec<T>>> {
    let mut out: Vec<Vec<T>> = sample.iter().map(|s| s.as_ref().to_vec()).collect();
    for s in sample {
        out.push(spec.reflect_state(s.as_ref())?);
    }
    Ok(out)
}

/// `d(π, Qπ) = ½ sup ‖Δ_π‖₁`, with the sample closed under reflection first.
pub fn projection_distance<T: Scalar, P: DeterministicPolicy<T> + ?Sized, S: AsRef<[T]>>(
    policy: &P,
    spec: &SymmetrySpec,
    sample: &[S],
) -> Result<T> {
    if sample.is_empty() {
        return input_err("projection distance needs a nonempty state sample");
    }
    let closed = reflection_closure(spec, sample)?;
    let mut best = T::zero();
    for s in &closed {
        best = best.max_of(l1_norm(&mismatch(policy, spec, s)?));
    }
    Ok(best * T::half())
}

/// `ξ = ½ √(ε_eq / p_min)`
pub fn xi_bound<T: Real>(epsilon_eq: T, p_min: T) -> Result<T> {
    if !(p_min > T::zero()) {
        return Err(PrismError::Input("p_min must be positive".into()));
    }
    if epsilon_eq < T::zero() {
        return Err(PrismError::Input("epsilon_eq must be nonnegative".into()));
    }
    Ok(T::half() * (epsilon_eq / p_min).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    type Q = Ratio<i64>;

    fn spec3() -> SymmetrySpec {
        SymmetrySpec::continuous(2, 3, vec![1], vec![1, 2]).unwrap()
    }

    #[test]
    fn constant_policy_mismatch_is_twice_sym_part() {
        let spec = spec3();
        let c = |_: &[f64]| vec![0.5, 0.2, -0.7];
        let d = mismatch(&c, &spec, &[1.0, 2.0]).unwrap();
        assert_eq!(d, vec![0.0, 0.4, -1.4]);
    }

    #[test]
    fn symreg_of_hand_mismatch() {
        // Constant policy with sym part (0.15, -0.05) gives Δ = (0, 0.3, -0.1).
        let spec = spec3();
        let c = |_: &[f64]| vec![9.0, 0.15, -0.05];
        let loss = symreg_loss(&c, &spec, &[vec![0.3, 0.1]]).unwrap();
        assert!((loss - 0.16).abs() < 1e-12);
        assert!(symreg_loss::<f64, _, Vec<f64>>(&c, &spec, &[]).is_err());
    }

    #[test]
    fn orbit_average_of_constant_policy() {
        let spec = SymmetrySpec::continuous(1, 2, vec![0], vec![1]).unwrap();
        let c = |_: &[f64]| vec![1.0, 0.6];
        let q = orbit_average(&c, &spec);
        assert_eq!(q.head(&[0.4]), vec![1.0, 0.0]);
        assert!((projection_distance(&c, &spec, &[[0.4]]).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn sup_metric_of_constant_offset() {
        let p1 = |s: &[f64]| vec![s[0] + 0.2, s[0] - 0.1];
        let p2 = |s: &[f64]| vec![s[0], s[0]];
        let d = sup_metric(&p1, &p2, &[[1.0], [-3.0]]).unwrap();
        assert!((d - 0.3).abs() < 1e-15);
        assert_eq!(sup_metric(&p2, &p2, &[[1.0]]).unwrap(), 0.0);
        assert!(sup_metric::<f64, _, _, [f64; 1]>(&p1, &p2, &[]).is_err());
    }

    #[test]
    fn equivariant_policy_is_exact_fixed_point_over_rationals() {
        let spec = SymmetrySpec::continuous(2, 2, vec![1], vec![1]).unwrap();
        // π(x, y) = (x², 3y): even in the asym output, odd in the sym output.
        let pi = |s: &[Q]| vec![s[0] * s[0] + s[1] * s[1], Q::from_integer(3) * s[1]];
        let q = orbit_average(&pi, &spec);
        for (a, b) in [(1, 3), (-2, 7), (5, -11)] {
            let s = vec![Q::new(a, 7), Q::new(b, 5)];
            assert_eq!(q.head(&s), pi(&s));
            assert!(mismatch(&pi, &spec, &s).unwrap().iter().all(|v| *v == Q::from_integer(0)));
        }
    }

    #[test]
    fn xi_bound_values() {
        assert_eq!(xi_bound(0.0, 0.5).unwrap(), 0.0);
        assert!((xi_bound(0.04, 0.25).unwrap() - 0.2f64).abs() < 1e-15);
        assert!(xi_bound(0.1, 0.0).is_err());
        assert!(xi_bound(-0.1, 0.5).is_err());
    }
}
