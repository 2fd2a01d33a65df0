use std::fs;
use std::path::Path;

use serde::Serialize;

use super::config::{RunConfig, Variant};
use crate::envs::{rollout, Env, RandomPolicy, Trajectory};
use crate::error::Result;
use crate::metrics::{eum, hypervolume, pareto_filter, sample_vo_preferences, variance_objective, DEFAULT_REFERENCE};
use crate::morl::{build_coverage_set, weight_grid, CoverageSet, PolicyNet, Schedule, Sparsity};
use crate::resymnet::RewardEnsemble;
use crate::seeds::{derive_rng, derive_seed};
use crate::sparsity::{apply_release, build_dataset, dense_channels_excluding, feature_dim, write_dataset_csv};
use crate::tensor::NetSpec;

/// Number of evenly spaced weights used by EUM.
pub const EUM_WEIGHTS: usize = 100;
/// Number of sampled preferences used by VO.
pub const VO_PREFERENCES: usize = 100;

pub const METRICS_HEADER: [&str; 7] = ["variant", "env", "seed", "p_rel", "lambda", "metric", "value"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub variant: String,
    pub env: String,
    pub seed: u64,
    pub p_rel: f64,
    pub lambda: f64,
    pub metric: String,
    pub value: f64,
}

/// Everything one seed produced.
#[derive(Debug, Clone)]
pub struct SeedOutput {
    pub seed: u64,
    pub coverage: CoverageSet,
    pub policies: Vec<PolicyNet>,
    pub ensemble: Option<RewardEnsemble>,
    pub hv: f64,
    pub eum: f64,
    pub vo: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub variant: Variant,
    pub rows: Vec<ResultRow>,
    pub seeds: Vec<SeedOutput>,
}

/// HV, EUM and VO of a coverage set.
///
/// HV and EUM use the non-dominated means; VO uses every evaluated policy
/// with its return spread. Preferences for VO come from
/// `derive_rng(seed, "vo-preferences", 0)`.
pub fn coverage_metrics(coverage: &CoverageSet, seed: u64) -> Result<(f64, f64, f64)> {
    let front = pareto_filter(&coverage.means())?;
    let hv = hypervolume(&front, &[DEFAULT_REFERENCE, DEFAULT_REFERENCE])?;
    let weights: Vec<Vec<f64>> = weight_grid(EUM_WEIGHTS, 2)?
        .iter()
        .map(|w| w.as_slice().to_vec())
        .collect();
    let e = eum(&front, &weights)?;
    let prefs = sample_vo_preferences(VO_PREFERENCES, 2, &mut derive_rng(seed, "vo-preferences", 0));
    let vo = variance_objective(&coverage.pareto_points(), &prefs)?;
    Ok((hv, e, vo))
}

/// Random-policy episodes drawn from `derive_rng(seed, "initial-data", 0)`.
pub fn collect_random_episodes(env: &Env, count: usize, seed: u64) -> Result<Vec<Trajectory>> {
    let mut rng = derive_rng(seed, "initial-data", 0);
    let mut policy = RandomPolicy::new(env);
    (0..count)
        .map(|_| rollout(env, &mut policy, &mut rng, env.horizon()))
        .collect()
}

/// Reward-network shape for a variant: the residual ablation keeps the same
/// depth with plain layers in place of the blocks.
pub fn reward_net_spec(cfg: &RunConfig, input_dim: usize) -> NetSpec {
    let rm = &cfg.reward_model;
    let (plain, blocks) = if cfg.variant == Variant::WoResidual {
        (2 * rm.num_residual_blocks, 0)
    } else {
        (0, rm.num_residual_blocks)
    };
    NetSpec {
        input_dim,
        hidden_dim: rm.hidden_dim,
        num_plain_layers: plain,
        num_residual_blocks: blocks,
        output_dim: 1,
        dropout_rate: rm.dropout_rate,
    }
}

/// Builds the release dataset from initial episodes and trains the ensemble.
pub fn train_initial_ensemble(cfg: &RunConfig, seed: u64, episodes: &[Trajectory]) -> Result<RewardEnsemble> {
    let dense = if cfg.variant == Variant::WoDense {
        Vec::new()
    } else {
        dense_channels_excluding(cfg.sparse_channel)
    };
    let mut rng = derive_rng(seed, "release", 0);
    let mut dataset = Vec::new();
    for traj in episodes {
        let events = apply_release(traj, cfg.sparse_channel, cfg.p_rel, &mut rng)?;
        dataset.extend(build_dataset(traj, &events, &dense)?);
    }
    let k = if cfg.variant == Variant::WoEnsemble {
        1
    } else {
        cfg.reward_model.ensemble_size
    };
    let spec = reward_net_spec(cfg, feature_dim(cfg.env.state_dim(), cfg.env.action_dim(), &dense));
    RewardEnsemble::train(
        dataset,
        spec,
        k,
        &cfg.reward_model.train,
        derive_seed(seed, "ensemble", 0),
        cfg.sparse_channel,
        dense,
    )
}

/// The full pipeline for one seed.
pub fn run_seed(cfg: &RunConfig, seed: u64) -> Result<SeedOutput> {
    let variant = cfg.variant;
    let mut ensemble = if variant.uses_ensemble() {
        let episodes = collect_random_episodes(&cfg.env, cfg.initial_episodes(), seed)?;
        Some(train_initial_ensemble(cfg, seed, &episodes)?)
    } else {
        None
    };
    let schedule = Schedule {
        cycles: cfg.budget.cycles,
        refine: variant.refines(),
        refine_episodes: cfg.refine_episodes(),
        reward_cfg: cfg.reward_model.train.clone(),
    };
    let sparsity = Sparsity {
        channel: cfg.sparse_channel,
        p_rel: cfg.p_rel,
    };
    let (coverage, policies) = build_coverage_set(
        &cfg.env,
        variant.source_kind(),
        sparsity,
        ensemble.as_mut(),
        cfg.n_weights,
        &cfg.effective_rl(),
        &schedule,
        derive_seed(seed, "coverage", 0),
    )?;
    let (hv, eum, vo) = coverage_metrics(&coverage, seed)?;
    Ok(SeedOutput {
        seed,
        coverage,
        policies,
        ensemble,
        hv,
        eum,
        vo,
    })
}

/// Runs every configured seed.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutput> {
    let lambda = cfg.effective_rl().lambda;
    let mut rows = Vec::new();
    let mut seeds = Vec::new();
    for &seed in &cfg.seeds {
        let out = run_seed(cfg, seed)?;
        for (metric, value) in [("HV", out.hv), ("EUM", out.eum), ("VO", out.vo)] {
            rows.push(ResultRow {
                variant: cfg.variant.name().to_string(),
                env: cfg.env.name().to_string(),
                seed,
                p_rel: cfg.p_rel,
                lambda,
                metric: metric.to_string(),
                value,
            });
        }
        seeds.push(out);
    }
    Ok(RunOutput {
        variant: cfg.variant,
        rows,
        seeds,
    })
}

/// Runs the baseline at each release probability.
pub fn sweep_sparsity(cfg: &RunConfig, p_rels: &[f64]) -> Result<Vec<RunOutput>> {
    if p_rels.is_empty() {
        return crate::error::input_err("sweep needs at least one p_rel value");
    }
    if let Some(p) = p_rels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return crate::error::input_err(format!("p_rel {p} outside [0, 1]"));
    }
    p_rels
        .iter()
        .map(|&p_rel| {
            let run = RunConfig {
                variant: Variant::Baseline,
                p_rel,
                ..cfg.clone()
            };
            run_experiment(&run)
        })
        .collect()
}

pub fn write_metrics_csv<W: std::io::Write>(w: W, rows: &[ResultRow]) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record(METRICS_HEADER)?;
    for r in rows {
        out.write_record([
            r.variant.clone(),
            r.env.clone(),
            r.seed.to_string(),
            r.p_rel.to_string(),
            r.lambda.to_string(),
            r.metric.clone(),
            r.value.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `metrics.csv` for `rows` and one `pareto_<variant>_<seed>.csv`
/// per seed of every run into `dir`.
pub fn write_outputs(dir: &Path, runs: &[RunOutput], save_artifacts: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    let rows: Vec<ResultRow> = runs.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    write_metrics_csv(fs::File::create(dir.join("metrics.csv"))?, &rows)?;
    for run in runs {
        for s in &run.seeds {
            let name = format!("pareto_{}_{}.csv", run.variant.name(), s.seed);
            s.coverage
                .write_csv(fs::File::create(dir.join(name))?, run.variant.name(), s.seed)?;
            if save_artifacts {
                if let Some(ens) = &s.ensemble {
                    let sub = dir.join(format!("ensemble_{}_{}", run.variant.name(), s.seed));
                    ens.save(&sub)?;
                    write_dataset_csv(fs::File::create(sub.join("dataset.csv"))?, &ens.dataset)?;
                }
            }
        }
    }
    Ok(())
}
