use std::io::Write;

use super::learner::{evaluate_policy, sample_episode, PolicyLearner, RLConfig, RewardSource, Sparsity};
use super::policy::PolicyNet;
use super::weights::weight_grid;
use crate::envs::{Env, NUM_OBJECTIVES};
use crate::error::{input_err, PrismError, Result};
use crate::metrics::ParetoPoint;
use crate::resymnet::{RewardEnsemble, RewardTrainConfig};
use crate::seeds::{derive_rng, derive_seed};

/// One evaluated policy.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveragePoint {
    pub weight_index: usize,
    pub mean: [f64; NUM_OBJECTIVES],
    pub std: [f64; NUM_OBJECTIVES],
}

/// Evaluated returns of every trained policy, before any dominance filtering.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoverageSet {
    pub points: Vec<CoveragePoint>,
}

pub const COVERAGE_HEADER: [&str; 7] = [
    "variant",
    "seed",
    "weight_index",
    "obj0_mean",
    "obj1_mean",
    "obj0_std",
    "obj1_std",
];

impl CoverageSet {
    pub fn means(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.mean.to_vec()).collect()
    }

    pub fn pareto_points(&self) -> Vec<ParetoPoint<f64>> {
        self.points
            .iter()
            .map(|p| ParetoPoint::with_std(p.mean.to_vec(), p.std.to_vec()))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W, variant: &str, seed: u64) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(COVERAGE_HEADER)?;
        for p in &self.points {
            out.write_record([
                variant.to_string(),
                seed.to_string(),
                p.weight_index.to_string(),
                p.mean[0].to_string(),
                p.mean[1].to_string(),
                p.std[0].to_string(),
                p.std[1].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// How the sparse channel is presented to the learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Oracle,
    Baseline,
    Prism,
    Uniform,
    Random,
}

/// Training schedule shared by every variant: the RL budget is split into
/// `cycles` equal parts. For the shaped variant with refinement enabled, the
/// ensemble is refined between parts on `refine_episodes` fresh episodes
/// collected round-robin from the current weight policies.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub cycles: usize,
    pub refine: bool,
    pub refine_episodes: usize,
    pub reward_cfg: RewardTrainConfig,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            cycles: 1,
            refine: false,
            refine_episodes: 0,
            reward_cfg: RewardTrainConfig::default(),
        }
    }
}

/// Trains one policy per grid weight and evaluates each greedily.
///
/// Policy `i` is initialised from `derive_seed(master, "policy-init", i)`,
/// samples from `derive_seed(master, "policy-sample", i)` and is evaluated
/// with `derive_rng(master, "policy-eval", i)`.
#[allow(clippy::too_many_arguments)]
pub fn build_coverage_set(
    env: &Env,
    kind: SourceKind,
    sparsity: Sparsity,
    mut ensemble: Option<&mut RewardEnsemble>,
    n: usize,
    cfg: &RLConfig,
    schedule: &Schedule,
    master_seed: u64,
) -> Result<(CoverageSet, Vec<PolicyNet>)> {
    let weights = weight_grid(n, NUM_OBJECTIVES)?;
    cfg.validate()?;
    if schedule.cycles == 0 {
        return input_err("at least one training cycle is required");
    }
    if kind == SourceKind::Prism && ensemble.is_none() {
        return Err(PrismError::State("shaped rewards need a trained ensemble".into()));
    }
    let mut learners = weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            PolicyLearner::new(
                env,
                w.clone(),
                cfg,
                derive_seed(master_seed, "policy-init", i as u64),
                derive_seed(master_seed, "policy-sample", i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let total = cfg.gradient_steps();
    for cycle in 0..schedule.cycles {
        let steps = total / schedule.cycles + usize::from(cycle < total % schedule.cycles);
        {
            let source = match kind {
                SourceKind::Oracle => RewardSource::Oracle,
                SourceKind::Baseline => RewardSource::Baseline(sparsity),
                SourceKind::Uniform => RewardSource::Uniform(sparsity),
                SourceKind::Random => RewardSource::Random(sparsity),
                SourceKind::Prism => RewardSource::Prism(ensemble.as_deref().expect("checked above")),
            };
            for learner in &mut learners {
                learner.train_steps(env, &source, cfg, steps)?;
            }
        }
        let last = cycle + 1 == schedule.cycles;
        if let (false, true, Some(ens)) = (last, schedule.refine, ensemble.as_deref_mut()) {
            let mut rng = derive_rng(master_seed, "refine-collect", cycle as u64);
            let trajs = (0..schedule.refine_episodes)
                .map(|e| sample_episode(env, &learners[e % learners.len()].policy, &mut rng).map(|ep| ep.trajectory))
                .collect::<Result<Vec<_>>>()?;
            ens.refine(&trajs, sparsity.p_rel, &schedule.reward_cfg, &mut rng)?;
        }
    }

    let mut set = CoverageSet::default();
    for (i, l) in learners.iter().enumerate() {
        let ev = evaluate_policy(env, &l.policy, cfg.eval_episodes, &mut derive_rng(master_seed, "policy-eval", i as u64))?;
        if ev.mean.iter().chain(&ev.std).any(|v| !v.is_finite()) {
            return Err(PrismError::Numeric(format!("non-finite evaluation for weight {i}")));
        }
        set.points.push(CoveragePoint {
            weight_index: i,
            mean: ev.mean,
            std: ev.std,
        });
    }
    Ok((set, learners.into_iter().map(|l| l.policy).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::MirrorChainParams;

    #[test]
    fn csv_schema() {
        let set = CoverageSet {
            points: vec![CoveragePoint {
                weight_index: 0,
                mean: [1.0, -0.3],
                std: [0.0, 0.0],
            }],
        };
        let mut buf = Vec::new();
        set.write_csv(&mut buf, "oracle", 7).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "variant,seed,weight_index,obj0_mean,obj1_mean,obj0_std,obj1_std\noracle,7,0,1,-0.3,0,0\n"
        );
    }

    #[test]
    fn two_weights_two_points_and_repeatable() {
        let env = Env::MirrorChain(MirrorChainParams::default());
        let cfg = RLConfig {
            episodes_per_policy: 16,
            ..RLConfig::default()
        };
        let sp = Sparsity { channel: 0, p_rel: 0.0 };
        let run = || build_coverage_set(&env, SourceKind::Oracle, sp, None, 2, &cfg, &Schedule::default(), 11).unwrap().0;
        let a = run();
        assert_eq!(a.points.len(), 2);
        assert_eq!(a, run());
        assert!(build_coverage_set(&env, SourceKind::Oracle, sp, None, 1, &cfg, &Schedule::default(), 11).is_err());
        assert!(build_coverage_set(&env, SourceKind::Prism, sp, None, 2, &cfg, &Schedule::default(), 11).is_err());
    }
}
