//! Executable property suite behind `prism verify`.
//!
//! Each property runs a fixed number of seeded random cases and records the
//! worst deviation it saw. The reflection operators are injectable so a
//! deliberately broken operator can be shown to be caught.

use rand::Rng;
use serde::Serialize;

use crate::envs::{Env, LeanCraftParams, MirrorChainParams, NUM_OBJECTIVES};
use crate::error::Result;
use crate::metrics::{eum, hypervolume, hypervolume_monte_carlo, pareto_filter};
use crate::morl::PolicyNet;
use crate::resymnet::{trajectory_loss, trajectory_loss_and_grad, FeatureScaler, RewardEnsemble};
use crate::seeds::{derive_rng, Rng64};
use crate::sparsity::{release_series, DatasetPoint};
use crate::symmetry::{projection_distance, sup_metric, xi_bound, DeterministicPolicy, SymmetrySpec};
use crate::tensor::{flatten_gradients, snapshot, Matrix, NetSpec, Network};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub id: String,
    pub samples: usize,
    pub tolerance: f64,
    /// Largest deviation observed (or a count of violations where stated).
    pub worst: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub properties: Vec<PropertyResult>,
}

impl VerifyReport {
    pub fn failed_ids(&self) -> Vec<&str> {
        self.properties
            .iter()
            .filter(|p| !p.passed)
            .map(|p| p.id.as_str())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

pub type ReflectFn = fn(&SymmetrySpec, &[f64]) -> Result<Vec<f64>>;

/// The reflection operators under test.
#[derive(Clone, Copy)]
pub struct Operators {
    pub reflect_state: ReflectFn,
    pub reflect_action: ReflectFn,
}

fn library_reflect_state(spec: &SymmetrySpec, s: &[f64]) -> Result<Vec<f64>> {
    spec.reflect_state(s)
}

fn library_reflect_action(spec: &SymmetrySpec, a: &[f64]) -> Result<Vec<f64>> {
    spec.reflect_action(a)
}

impl Default for Operators {
    fn default() -> Self {
        Operators {
            reflect_state: library_reflect_state,
            reflect_action: library_reflect_action,
        }
    }
}

/// A broken `K_g` that maps every symmetric coordinate to `−|x|`; used to
/// demonstrate that the suite detects sign errors.
pub fn sign_bug_reflect_action(spec: &SymmetrySpec, a: &[f64]) -> Result<Vec<f64>> {
    let mut out = spec.reflect_action(a)?;
    if !spec.is_discrete() {
        for &i in &spec.sym_action_idx {
            out[i] = -a[i].abs();
        }
    }
    Ok(out)
}

const GROUP_CASES: usize = 1000;
const GROUP_TOL: f64 = 1e-12;

fn result(id: &str, samples: usize, tolerance: f64, worst: f64) -> PropertyResult {
    PropertyResult {
        id: id.to_string(),
        samples,
        tolerance,
        worst,
        passed: worst.is_finite() && worst <= tolerance,
    }
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn envs() -> [Env; 2] {
    [
        Env::LeanCraft(LeanCraftParams::training()),
        Env::MirrorChain(MirrorChainParams::default()),
    ]
}

fn random_state<R: Rng + ?Sized>(env: &Env, rng: &mut R) -> Vec<f64> {
    match env {
        Env::LeanCraft(_) => vec![
            rng.gen_range(-50.0..50.0),
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-3.0..3.0),
        ],
        Env::MirrorChain(_) => vec![rng.gen_range(-3.0..3.0)],
    }
}

fn random_head<R: Rng + ?Sized>(env: &Env, rng: &mut R) -> Vec<f64> {
    match env {
        Env::LeanCraft(_) => (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        Env::MirrorChain(_) => {
            let p: f64 = rng.gen();
            vec![p, 1.0 - p]
        }
    }
}

/// A randomly initialised policy whose head is far from the trivial
/// near-uniform start.
pub fn random_policy<R: Rng + ?Sized>(env: &Env, rng: &mut R) -> Result<PolicyNet> {
    let mut p = PolicyNet::new(env, 16, 0.0, rng)?;
    p.net.head_mut().weights.map_inplace(|w| w * 100.0);
    Ok(p)
}

/// `Q(π)(s)` computed with the injected operators.
fn q_head(ops: &Operators, spec: &SymmetrySpec, policy: &dyn Fn(&[f64]) -> Vec<f64>, s: &[f64]) -> Result<Vec<f64>> {
    let direct = policy(s);
    let mirrored = (ops.reflect_action)(spec, &policy(&(ops.reflect_state)(spec, s)?))?;
    Ok(direct.iter().zip(&mirrored).map(|(a, b)| 0.5 * (a + b)).collect())
}

pub fn involution_state(ops: &Operators, rng: &mut Rng64) -> Result<PropertyResult> {
    let mut worst: f64 = 0.0;
    for env in envs() {
        let spec = env.symmetry();
        for _ in 0..GROUP_CASES {
            let s = random_state(&env, rng);
            let back = (ops.reflect_state)(&spec, &(ops.reflect_state)(&spec, &s)?)?;
            worst = worst.max(l1(&back, &s));
        }
    }
    Ok(result("symmetry.reflect_state_involution", 2 * GROUP_CASES, GROUP_TOL, worst))
}

pub fn involution_action(ops: &Operators, rng: &mut Rng64) -> Result<PropertyResult> {
    let mut worst: f64 = 0.0;
    for env in envs() {
        let spec = env.symmetry();
        for _ in 0..GROUP_CASES {
            let a = random_head(&env, rng);
            let back = (ops.reflect_action)(&spec, &(ops.reflect_action)(&spec, &a)?)?;
            worst = worst.max(l1(&back, &a));
        }
    }
    Ok(result("symmetry.reflect_action_involution", 2 * GROUP_CASES, GROUP_TOL, worst))
}

pub fn isometry(ops: &Operators, rng: &mut Rng64) -> Result<PropertyResult> {
    let mut worst: f64 = 0.0;
    for env in envs() {
        let spec = env.symmetry();
        for _ in 0..GROUP_CASES {
            let a = random_head(&env, rng);
            let b = random_head(&env, rng);
            let ka = (ops.reflect_action)(&spec, &a)?;
            let kb = (ops.reflect_action)(&spec, &b)?;
            worst = worst.max((l1(&ka, &kb) - l1(&a, &b)).abs());
        }
    }
    Ok(result("symmetry.reflect_action_l1_isometry", 2 * GROUP_CASES, GROUP_TOL, worst))
}

/// Orbit-average checks. Its output is equivariant and applying it twice
/// changes nothing. Equivariant policies pass through unchanged.
pub fn orbit_lemmas(ops: &Operators, rng: &mut Rng64) -> Result<Vec<PropertyResult>> {
    let mut worst = [0.0f64; 3];
    let cases_per_env = GROUP_CASES / 10;
    for env in envs() {
        let spec = env.symmetry();
        for _ in 0..cases_per_env {
            let pol = random_policy(&env, rng)?;
            let pi = |s: &[f64]| pol.head(s);
            let q = |s: &[f64]| q_head(ops, &spec, &pi, s).expect("dimensions fixed");
            let fixed = equivariant_policy(&env, rng);
            for _ in 0..10 {
                let s = random_state(&env, rng);
                let lhs = q(&(ops.reflect_state)(&spec, &s)?);
                let rhs = (ops.reflect_action)(&spec, &q(&s))?;
                worst[0] = worst[0].max(l1(&lhs, &rhs));
                worst[1] = worst[1].max(l1(&q_head(ops, &spec, &q, &s)?, &q(&s)));
                worst[2] = worst[2].max(l1(&q_head(ops, &spec, &*fixed, &s)?, &fixed(&s)));
            }
        }
    }
    let n = 2 * cases_per_env * 10;
    Ok(vec![
        result("orbit_average.equivariance", n, GROUP_TOL, worst[0]),
        result("orbit_average.idempotence", n, GROUP_TOL, worst[1]),
        result("orbit_average.fixed_points", n, GROUP_TOL, worst[2]),
    ])
}

/// A hand-built policy that is equivariant by construction.
pub fn equivariant_policy<R: Rng + ?Sized>(env: &Env, rng: &mut R) -> Box<dyn Fn(&[f64]) -> Vec<f64>> {
    let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    match env {
        Env::LeanCraft(_) => Box::new(move |s: &[f64]| {
            let thrust = (c[0] * s[1] * 0.1 + c[1] * s[2] * s[2] + c[2] * s[2] * s[3] + c[3]).tanh();
            let steer = (c[4] * s[2] + c[5] * s[3]).tanh() * (1.0 + 0.5 * (0.1 * s[1]).tanh());
            vec![thrust, steer]
        }),
        Env::MirrorChain(_) => Box::new(move |s: &[f64]| {
            let f = c[0] * s[0] + c[1] * s[0].powi(3);
            let p = 1.0 / (1.0 + (-f).exp());
            vec![p, 1.0 - p]
        }),
    }
}

fn closed_sample(env: &Env, n: usize, rng: &mut Rng64) -> Result<Vec<Vec<f64>>> {
    let spec = env.symmetry();
    let mut out: Vec<Vec<f64>> = (0..n / 2).map(|_| random_state(env, rng)).collect();
    for i in 0..n / 2 {
        let r = spec.reflect_state(&out[i])?;
        out.push(r);
    }
    Ok(out)
}

pub fn non_expansive(ops: &Operators, rng: &mut Rng64, pairs: usize) -> Result<PropertyResult> {
    let mut worst = f64::NEG_INFINITY;
    for env in envs() {
        let spec = env.symmetry();
        for _ in 0..pairs / 2 {
            let sample = closed_sample(&env, 512, rng)?;
            let p1 = random_policy(&env, rng)?;
            let p2 = random_policy(&env, rng)?;
            let h1 = |s: &[f64]| p1.head(s);
            let h2 = |s: &[f64]| p2.head(s);
            let q1 = |s: &[f64]| q_head(ops, &spec, &h1, s).expect("dimensions fixed");
            let q2 = |s: &[f64]| q_head(ops, &spec, &h2, s).expect("dimensions fixed");
            let before: f64 = sup_metric(&h1, &h2, &sample)?;
            let after: f64 = sup_metric(&q1, &q2, &sample)?;
            worst = worst.max(after - before);
        }
    }
    Ok(result("orbit_average.non_expansive", pairs, 1e-9, worst.max(0.0)))
}

pub fn projection_identity(rng: &mut Rng64, policies: usize) -> Result<PropertyResult> {
    let mut worst: f64 = 0.0;
    for env in envs() {
        let spec = env.symmetry();
        for _ in 0..policies / 2 {
            let sample = closed_sample(&env, 128, rng)?;
            let pol = random_policy(&env, rng)?;
            let q = crate::symmetry::orbit_average(&pol, &spec);
            let d: f64 = projection_distance(&pol, &spec, &sample)?;
            let s: f64 = sup_metric(&pol, &q, &sample)?;
            worst = worst.max((d - s).abs());
        }
    }
    Ok(result("projection_distance.identity", policies, 1e-9, worst))
}

/// Exhaustive check on the seven MirrorChain positions under the uniform
/// state distribution.
pub fn mirrorchain_xi_gap(policy: &PolicyNet) -> Result<f64> {
    let spec = policy.symmetry().clone();
    let states: Vec<Vec<f64>> = (-3..=3).map(|i| vec![i as f64]).collect();
    let eps: f64 = crate::symmetry::symreg_loss(policy, &spec, &states)?;
    let bound = xi_bound(eps, 1.0 / states.len() as f64)?;
    let d: f64 = projection_distance(policy, &spec, &states)?;
    Ok(d - bound)
}

pub fn xi_property(rng: &mut Rng64) -> Result<PropertyResult> {
    let env = Env::MirrorChain(MirrorChainParams::default());
    let mut worst = f64::NEG_INFINITY;
    let n = 100;
    for _ in 0..n {
        worst = worst.max(mirrorchain_xi_gap(&random_policy(&env, rng)?)?);
    }
    Ok(result("symmetry.xi_bound_mirrorchain", n, 1e-9, worst.max(0.0)))
}

/// Dominated area of a 2-D point set by inclusion–exclusion over subsets.
pub fn hv_inclusion_exclusion(points: &[Vec<i64>], reference: [i64; 2]) -> i64 {
    let n = points.len();
    let mut total = 0;
    for mask in 1u32..(1 << n) {
        let mut lo = [i64::MAX, i64::MAX];
        for (i, p) in points.iter().enumerate() {
            if mask & (1 << i) != 0 {
                lo[0] = lo[0].min(p[0]);
                lo[1] = lo[1].min(p[1]);
            }
        }
        let area = (lo[0] - reference[0]).max(0) * (lo[1] - reference[1]).max(0);
        if mask.count_ones() % 2 == 1 {
            total += area;
        } else {
            total -= area;
        }
    }
    total
}

pub fn hv_exact(rng: &mut Rng64) -> Result<PropertyResult> {
    let cases = 500;
    let mut violations = 0.0;
    for _ in 0..cases {
        let n = rng.gen_range(1..=7);
        let pts: Vec<Vec<i64>> = (0..n)
            .map(|_| vec![rng.gen_range(-20..60), rng.gen_range(-20..60)])
            .collect();
        if hypervolume(&pts, &[0, 0])? != hv_inclusion_exclusion(&pts, [0, 0]) {
            violations += 1.0;
        }
    }
    let hand = hypervolume(&[vec![1i64, 3], vec![3, 1]], &[0, 0])?;
    if hand != 5 {
        violations += 1.0;
    }
    Ok(result("metrics.hv_inclusion_exclusion", cases + 1, 0.0, violations))
}

pub fn hv_monte_carlo(rng: &mut Rng64) -> Result<PropertyResult> {
    let cases = 5;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let pts: Vec<Vec<f64>> = (0..6)
            .map(|_| vec![rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)])
            .collect();
        let exact = hypervolume(&pts, &[0.0, 0.0])?;
        let mc = hypervolume_monte_carlo(&pts, &[0.0, 0.0], 1_000_000, rng)?;
        worst = worst.max((mc - exact).abs() / exact);
    }
    Ok(result("metrics.hv_monte_carlo", cases, 0.01, worst))
}

pub fn eum_hand() -> Result<PropertyResult> {
    let cs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let w = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]];
    let v: f64 = eum(&cs, &w)?;
    Ok(result("metrics.eum_hand_case", 1, 1e-9, (v - 2.5 / 3.0).abs()))
}

pub fn pareto_idempotence(rng: &mut Rng64) -> Result<PropertyResult> {
    let cases = 500;
    let mut violations = 0.0;
    for _ in 0..cases {
        let pts: Vec<Vec<i64>> = (0..rng.gen_range(1..20))
            .map(|_| vec![rng.gen_range(0..10), rng.gen_range(0..10)])
            .collect();
        let once = pareto_filter(&pts)?;
        if pareto_filter(&once)? != once {
            violations += 1.0;
        }
    }
    Ok(result("metrics.pareto_filter_idempotence", cases, 0.0, violations))
}

/// Release totals must equal episode totals exactly; integer rewards make
/// the comparison exact.
pub fn sparsity_conservation(rng: &mut Rng64, cases: usize) -> Result<PropertyResult> {
    let mut violations = 0.0;
    for _ in 0..cases {
        let len = rng.gen_range(1..=50);
        let rewards: Vec<i64> = (0..len).map(|_| rng.gen_range(-1000..1000)).collect();
        let p_rel: f64 = rng.gen();
        let events = release_series(&rewards, p_rel, rng)?;
        let released: i64 = events.iter().map(|e| e.cumulative).sum();
        let last_ok = events.last().map(|e| e.t) == Some(len);
        if released != rewards.iter().sum::<i64>() || !last_ok {
            violations += 1.0;
        }
    }
    Ok(result("sparsity.conservation", cases, 0.0, violations))
}

/// Norm-wise relative error `‖g − ĝ‖ / max(‖g‖, ‖ĝ‖)` between an analytic
/// gradient and central differences with step `h`.
pub fn relative_gradient_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nb: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    let denom = na.max(nb);
    if denom == 0.0 {
        0.0
    } else {
        diff / denom
    }
}

pub fn central_differences(params: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..params.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn small_spec(input: usize, rng: &mut Rng64) -> NetSpec {
    NetSpec {
        input_dim: input,
        hidden_dim: rng.gen_range(3..8),
        num_plain_layers: rng.gen_range(0..2),
        num_residual_blocks: rng.gen_range(0..3),
        output_dim: rng.gen_range(1..3),
        dropout_rate: 0.0,
    }
}

/// Draws every parameter, biases included, so no pre-activation sits
/// exactly on a ReLU kink as happens with zero-initialised biases.
fn randomise_parameters(net: &mut Network, rng: &mut Rng64) -> Result<()> {
    let p: Vec<f64> = (0..net.num_parameters()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    net.set_parameters_flat(&p)
}

/// Pre-activations closer than this to zero make a draw unusable for
/// central differences at step 1e-5.
pub const KINK_MARGIN: f64 = 1e-3;

/// Redraws parameters until the forward pass on `x` keeps every ReLU input
/// at least [`KINK_MARGIN`] away from zero.
fn randomise_off_kink(net: &mut Network, x: &Matrix, rng: &mut Rng64) -> Result<()> {
    loop {
        randomise_parameters(net, rng)?;
        net.forward(x, false, rng)?;
        if net.relu_margin().map_or(true, |m| m > KINK_MARGIN) {
            return Ok(());
        }
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut Rng64) -> Result<Matrix> {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Backprop of `Σ U ⊙ f(X)` against central differences.
pub fn network_gradient_error(rng: &mut Rng64) -> Result<f64> {
    let input = rng.gen_range(1..5);
    let spec = small_spec(input, rng);
    let mut net = Network::new(spec.clone(), rng)?;
    let x = random_matrix(rng.gen_range(1..6), input, rng)?;
    let u = random_matrix(x.rows(), spec.output_dim, rng)?;
    randomise_off_kink(&mut net, &x, rng)?;
    let analytic = flatten_gradients(&net.backward(&u)?);
    let mut probe = net.clone();
    let numeric = central_differences(&net.parameters_flat(), 1e-5, |p| {
        probe.set_parameters_flat(p).expect("same length");
        let y = probe.predict(&x).expect("finite");
        y.as_slice().iter().zip(u.as_slice()).map(|(a, b)| a * b).sum()
    });
    Ok(relative_gradient_error(&analytic, &numeric))
}

/// Gradient of the trajectory-sum loss against central differences.
pub fn trajectory_gradient_error(rng: &mut Rng64) -> Result<f64> {
    let input = rng.gen_range(2..5);
    let spec = NetSpec {
        output_dim: 1,
        ..small_spec(input, rng)
    };
    let mut net = Network::new(spec, rng)?;
    let points: Vec<DatasetPoint> = (0..rng.gen_range(1..5))
        .map(|_| DatasetPoint {
            features: (0..rng.gen_range(1..6))
                .map(|_| (0..input).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect(),
            target: rng.gen_range(-3.0..3.0),
        })
        .collect();
    let batch: Vec<&DatasetPoint> = points.iter().collect();
    let scaler = FeatureScaler::identity(input);
    let x = scaler.matrix(points.iter().flat_map(|p| &p.features))?;
    randomise_off_kink(&mut net, &x, rng)?;
    let (_, grads) = trajectory_loss_and_grad(&mut net, &batch, &scaler, false, rng)?;
    let analytic = flatten_gradients(&grads);
    let mut probe = net.clone();
    let numeric = central_differences(&net.parameters_flat(), 1e-5, |p| {
        probe.set_parameters_flat(p).expect("same length");
        trajectory_loss(&probe, &batch, &scaler).expect("finite")
    });
    Ok(relative_gradient_error(&analytic, &numeric))
}

pub fn gradient_property(id: &str, draws: usize, rng: &mut Rng64, f: fn(&mut Rng64) -> Result<f64>) -> Result<PropertyResult> {
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        worst = worst.max(f(rng)?);
    }
    Ok(result(id, draws, 1e-4, worst))
}

pub fn ensemble_order(rng: &mut Rng64) -> Result<PropertyResult> {
    let spec = NetSpec {
        input_dim: 3,
        hidden_dim: 8,
        num_plain_layers: 0,
        num_residual_blocks: 1,
        output_dim: 1,
        dropout_rate: 0.3,
    };
    let members: Vec<Network> = (0..3).map(|_| Network::new(spec.clone(), rng)).collect::<Result<_>>()?;
    let rows: Vec<Vec<f64>> = (0..50).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut worst: f64 = 0.0;
    let base = RewardEnsemble::from_members(members.clone(), FeatureScaler::identity(3), 0, vec![1])?.shaped_rewards(&rows)?;
    for perm in [[1, 0, 2], [2, 1, 0], [1, 2, 0], [0, 2, 1], [2, 0, 1]] {
        let m: Vec<Network> = perm.iter().map(|&i| members[i].clone()).collect();
        let r = RewardEnsemble::from_members(m, FeatureScaler::identity(3), 0, vec![1])?.shaped_rewards(&rows)?;
        worst = worst.max(l1(&r, &base));
    }
    Ok(result("resymnet.ensemble_order_invariance", 5 * rows.len(), 0.0, worst))
}

pub fn snapshot_round_trip(rng: &mut Rng64) -> Result<PropertyResult> {
    let cases = 20;
    let mut violations = 0.0;
    for _ in 0..cases {
        let spec = small_spec(rng.gen_range(1..5), rng);
        let net = Network::new(spec.clone(), rng)?;
        let mut other = Network::zeros(spec)?;
        snapshot::decode_into(&mut other, &snapshot::encode_network(&net))?;
        if other.parameters_flat() != net.parameters_flat() {
            violations += 1.0;
        }
    }
    Ok(result("tensor.snapshot_round_trip", cases, 0.0, violations))
}

/// Noise-free LeanCraft dynamics commute with the reflection.
pub fn env_equivariance(ops: &Operators, rng: &mut Rng64) -> Result<PropertyResult> {
    let env = Env::LeanCraft(LeanCraftParams::default());
    let spec = env.symmetry();
    let mut worst: f64 = 0.0;
    for _ in 0..GROUP_CASES {
        let s = random_state(&env, rng);
        let a = random_head(&env, rng);
        let t = rng.gen_range(0..env.horizon());
        let direct = env.step(&s, &a, t, rng)?;
        let mirrored = env.step(&(ops.reflect_state)(&spec, &s)?, &(ops.reflect_action)(&spec, &a)?, t, rng)?;
        let expected = (ops.reflect_state)(&spec, &direct.next_state)?;
        let reward_gap: f64 = (0..NUM_OBJECTIVES).map(|k| (direct.reward[k] - mirrored.reward[k]).abs()).sum();
        worst = worst.max(l1(&mirrored.next_state, &expected) + reward_gap);
    }
    Ok(result("envs.leancraft_equivariance", GROUP_CASES, GROUP_TOL, worst))
}

/// Runs the suite with the library operators.
pub fn verify() -> Result<VerifyReport> {
    verify_with(&Operators::default(), 0)
}

/// Runs the suite with the given operators and master seed.
pub fn verify_with(ops: &Operators, seed: u64) -> Result<VerifyReport> {
    let mut props = Vec::new();
    let rng = |label: &str| derive_rng(seed, label, 0);
    props.push(involution_state(ops, &mut rng("involution-state"))?);
    props.push(involution_action(ops, &mut rng("involution-action"))?);
    props.push(isometry(ops, &mut rng("isometry"))?);
    props.extend(orbit_lemmas(ops, &mut rng("orbit"))?);
    props.push(non_expansive(ops, &mut rng("non-expansive"), 40)?);
    props.push(projection_identity(&mut rng("projection"), 40)?);
    props.push(xi_property(&mut rng("xi"))?);
    props.push(hv_exact(&mut rng("hv-exact"))?);
    props.push(hv_monte_carlo(&mut rng("hv-mc"))?);
    props.push(eum_hand()?);
    props.push(pareto_idempotence(&mut rng("pareto"))?);
    props.push(sparsity_conservation(&mut rng("sparsity"), 10_000)?);
    props.push(gradient_property("tensor.backprop_gradient", 100, &mut rng("grad-net"), network_gradient_error)?);
    props.push(gradient_property(
        "resymnet.trajectory_loss_gradient",
        100,
        &mut rng("grad-traj"),
        trajectory_gradient_error,
    )?);
    props.push(ensemble_order(&mut rng("ensemble"))?);
    props.push(snapshot_round_trip(&mut rng("snapshot"))?);
    props.push(env_equivariance(ops, &mut rng("env"))?);
    Ok(VerifyReport {
        passed: props.iter().all(|p| p.passed),
        properties: props,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_operators_pass_and_sign_bug_is_named() {
        let good = verify().unwrap();
        assert!(good.passed, "{:?}", good.failed_ids());
        assert!(good.properties.len() >= 12);
        let broken = Operators {
            reflect_action: sign_bug_reflect_action,
            ..Operators::default()
        };
        let report = verify_with(&broken, 0).unwrap();
        assert!(!report.passed);
        assert!(report.failed_ids().contains(&"symmetry.reflect_action_involution"));
    }

    #[test]
    fn inclusion_exclusion_hand_case() {
        assert_eq!(hv_inclusion_exclusion(&[vec![1, 3], vec![3, 1]], [0, 0]), 5);
        assert_eq!(hv_inclusion_exclusion(&[vec![1, 3], vec![2, 2], vec![3, 1]], [0, 0]), 6);
    }

    #[test]
    fn equivariant_policy_has_no_mismatch() {
        let mut rng = derive_rng(1, "t", 0);
        for env in envs() {
            let spec = env.symmetry();
            let p = equivariant_policy(&env, &mut rng);
            for _ in 0..100 {
                let s = random_state(&env, &mut rng);
                let lhs = p(&spec.reflect_state(&s).unwrap());
                let rhs = spec.reflect_action(&p(&s)).unwrap();
                assert!(l1(&lhs, &rhs) < 1e-14);
            }
        }
    }
}
