//! Ensemble of residual reward networks trained so that the per-step
//! predictions over each sub-trajectory sum to the released total.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::Trajectory;
use crate::error::{input_err, PrismError, Result};
use crate::scalar::{from_count, Scalar};
use crate::seeds::{derive_seed, rng_from_seed};
use crate::sparsity::{apply_release, build_dataset, build_features, DatasetPoint};
use crate::tensor::snapshot::{decode_into, encode_network};
use crate::tensor::{Gradients, Matrix, NetSpec, Network, OptimKind, OptimState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub decay: f64,
    pub batch_size: usize,
    pub val_split: f64,
    pub patience: usize,
}

impl Default for RewardTrainConfig {
    fn default() -> Self {
        RewardTrainConfig {
            epochs: 1000,
            learning_rate: 0.005,
            decay: 0.99,
            batch_size: 32,
            val_split: 0.2,
            patience: 20,
        }
    }
}

impl RewardTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.val_split > 0.0 && self.val_split < 1.0) {
            return input_err("val_split must lie in (0, 1)");
        }
        if self.patience == 0 {
            return input_err("patience must be at least 1");
        }
        if self.batch_size == 0 {
            return input_err("batch_size must be at least 1");
        }
        Ok(())
    }
}

/// Per-feature standardisation fitted on the initial dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureScaler {
    pub fn identity(dim: usize) -> Self {
        FeatureScaler {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn fit(points: &[DatasetPoint]) -> Result<Self> {
        let dim = points
            .iter()
            .find_map(|p| p.features.first())
            .map(Vec::len)
            .ok_or_else(|| PrismError::Input("cannot fit a scaler on an empty dataset".into()))?;
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        let mut n = 0usize;
        for h in points.iter().flat_map(|p| &p.features) {
            for i in 0..dim {
                sum[i] += h[i];
                sq[i] += h[i] * h[i];
            }
            n += 1;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / n as f64 - m * m).max(0.0);
                if var.sqrt() < 1e-8 {
                    1.0
                } else {
                    var.sqrt()
                }
            })
            .collect();
        Ok(FeatureScaler { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_into(&self, h: &[f64], out: &mut Vec<f64>) {
        out.extend(h.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| (x - m) / s));
    }

    pub fn matrix<'a, I>(&self, rows: I) -> Result<Matrix>
    where
        I: IntoIterator<Item = &'a Vec<f64>>,
    {
        let mut data = Vec::new();
        let mut n = 0;
        for h in rows {
            if h.len() != self.dim() {
                return input_err(format!("feature has {} entries, expected {}", h.len(), self.dim()));
            }
            self.transform_into(h, &mut data);
            n += 1;
        }
        Matrix::from_vec(n, self.dim(), data)
    }
}

fn stack_batch(batch: &[&DatasetPoint], scaler: &FeatureScaler) -> Result<(Matrix, Vec<usize>)> {
    let lengths: Vec<usize> = batch.iter().map(|p| p.features.len()).collect();
    if lengths.iter().any(|&l| l == 0) {
        return input_err("sub-trajectory without steps");
    }
    let m = scaler.matrix(batch.iter().flat_map(|p| &p.features))?;
    Ok((m, lengths))
}

fn segment_residuals(pred: &Matrix, lengths: &[usize], batch: &[&DatasetPoint]) -> Vec<f64> {
    let mut row = 0;
    lengths
        .iter()
        .zip(batch)
        .map(|(&len, p)| {
            let total: f64 = (row..row + len).map(|r| pred.get(r, 0)).sum();
            row += len;
            total - p.target
        })
        .collect()
}

/// Mean over segments of `(Σ_t r̂(h_t) − R)²`, evaluated without dropout.
pub fn trajectory_loss(net: &Network, batch: &[&DatasetPoint], scaler: &FeatureScaler) -> Result<f64> {
    if batch.is_empty() {
        return input_err("empty batch");
    }
    let (x, lengths) = stack_batch(batch, scaler)?;
    let pred = net.predict(&x)?;
    let res = segment_residuals(&pred, &lengths, batch);
    let loss = res.iter().map(|e| e * e).sum::<f64>() / batch.len() as f64;
    if !loss.is_finite() {
        return Err(PrismError::Numeric("non-finite trajectory loss".into()));
    }
    Ok(loss)
}

/// Loss and parameter gradient of the trajectory-sum objective. Every step
/// of segment `j` receives the upstream gradient `2 (Σ r̂ − R_j) / B`.
pub fn trajectory_loss_and_grad<R: Rng + ?Sized>(
    net: &mut Network,
    batch: &[&DatasetPoint],
    scaler: &FeatureScaler,
    train: bool,
    rng: &mut R,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return input_err("empty batch");
    }
    let (x, lengths) = stack_batch(batch, scaler)?;
    let pred = net.forward(&x, train, rng)?;
    let res = segment_residuals(&pred, &lengths, batch);
    let b = batch.len() as f64;
    let loss = res.iter().map(|e| e * e).sum::<f64>() / b;
    if !loss.is_finite() {
        return Err(PrismError::Numeric("non-finite trajectory loss".into()));
    }
    let mut upstream = Vec::with_capacity(x.rows());
    for (&len, e) in lengths.iter().zip(&res) {
        upstream.extend(std::iter::repeat(2.0 * e / b).take(len));
    }
    let upstream = Matrix::from_vec(x.rows(), 1, upstream)?;
    Ok((loss, net.backward(&upstream)?))
}

/// Trains one reward network from `init`, early-stopping on the validation
/// trajectory loss and returning the best-validation snapshot.
pub fn train_member<R: Rng + ?Sized>(
    init: Network,
    dataset: &[DatasetPoint],
    scaler: &FeatureScaler,
    cfg: &RewardTrainConfig,
    rng: &mut R,
) -> Result<Network> {
    if dataset.is_empty() {
        return input_err("reward model dataset is empty");
    }
    cfg.validate()?;
    if cfg.epochs == 0 {
        return Ok(init);
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(rng);
    let n_val = (dataset.len() as f64 * cfg.val_split).floor() as usize;
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    // Too little data to hold any out: validate on the training set.
    let val: Vec<&DatasetPoint> = if val_idx.is_empty() {
        train_idx.iter().map(|&i| &dataset[i]).collect()
    } else {
        val_idx.iter().map(|&i| &dataset[i]).collect()
    };

    let mut net = init;
    let mut opt = OptimState::new(OptimKind::Adam, cfg.learning_rate, cfg.decay)?;
    let mut best = net.clone();
    let mut best_loss = trajectory_loss(&net, &val, scaler)?;
    let mut since_best = 0;
    for _ in 0..cfg.epochs {
        train_idx.shuffle(rng);
        for chunk in train_idx.chunks(cfg.batch_size) {
            let batch: Vec<&DatasetPoint> = chunk.iter().map(|&i| &dataset[i]).collect();
            let (_, grads) = trajectory_loss_and_grad(&mut net, &batch, scaler, true, rng)?;
            opt.step_network(&mut net, &grads)?;
        }
        opt.end_epoch();
        let val_loss = trajectory_loss(&net, &val, scaler)?;
        if val_loss < best_loss {
            best_loss = val_loss;
            best = net.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    Ok(best)
}

/// Arithmetic mean computed as `v₀ + Σ(vᵢ − v₀)/K` over the sorted values:
/// independent of input order, and exact when all values are equal.
fn order_free_mean(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let base = values[0];
    base + values.iter().map(|v| v - base).sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub k: usize,
    pub spec: NetSpec,
    pub member_seeds: Vec<u64>,
    pub scaler: FeatureScaler,
    pub member_files: Vec<String>,
}

/// `K` reward networks sharing a feature layout, plus the dataset they were
/// trained on (kept for refinement).
#[derive(Debug, Clone)]
pub struct RewardEnsemble {
    pub members: Vec<Network>,
    pub spec: NetSpec,
    pub scaler: FeatureScaler,
    pub member_seeds: Vec<u64>,
    pub dataset: Vec<DatasetPoint>,
    pub sparse_channel: usize,
    pub dense_channels: Vec<usize>,
}

impl RewardEnsemble {
    /// Trains `k` members; member `i` is seeded from `(master_seed, i)` for
    /// both its initialisation and its data shuffling.
    pub fn train(
        dataset: Vec<DatasetPoint>,
        spec: NetSpec,
        k: usize,
        cfg: &RewardTrainConfig,
        master_seed: u64,
        sparse_channel: usize,
        dense_channels: Vec<usize>,
    ) -> Result<Self> {
        if k == 0 {
            return input_err("ensemble needs at least one member");
        }
        if dataset.is_empty() {
            return input_err("reward model dataset is empty");
        }
        let scaler = FeatureScaler::fit(&dataset)?;
        if scaler.dim() != spec.input_dim {
            return input_err("feature dimension does not match network input");
        }
        let member_seeds: Vec<u64> = (0..k as u64)
            .map(|i| derive_seed(master_seed, "reward-member", i))
            .collect();
        let mut members = Vec::with_capacity(k);
        for &seed in &member_seeds {
            let mut init_rng = rng_from_seed(derive_seed(seed, "init", 0));
            let init = Network::new(spec.clone(), &mut init_rng)?;
            let mut rng = rng_from_seed(derive_seed(seed, "shuffle", 0));
            members.push(train_member(init, &dataset, &scaler, cfg, &mut rng)?);
        }
        Ok(RewardEnsemble {
            members,
            spec,
            scaler,
            member_seeds,
            dataset,
            sparse_channel,
            dense_channels,
        })
    }

    /// Builds an ensemble from already-trained members.
    pub fn from_members(members: Vec<Network>, scaler: FeatureScaler, sparse_channel: usize, dense_channels: Vec<usize>) -> Result<Self> {
        let spec = members
            .first()
            .map(|m| m.spec().clone())
            .ok_or_else(|| PrismError::Input("ensemble needs at least one member".into()))?;
        if members.iter().any(|m| m.spec().input_dim != spec.input_dim) {
            return input_err("ensemble members disagree on input dimension");
        }
        Ok(RewardEnsemble {
            member_seeds: vec![0; members.len()],
            members,
            spec,
            scaler,
            dataset: Vec::new(),
            sparse_channel,
            dense_channels,
        })
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    /// Per-member predictions for a batch of raw feature rows, as
    /// `[member][row]`.
    pub fn member_predictions(&self, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let x = self.scaler.matrix(features.iter())?;
        self.members
            .iter()
            .map(|m| Ok(m.predict(&x)?.into_vec()))
            .collect()
    }

    /// `r_sh = (1/K) Σ_k r̂_k(h)` for each feature row.
    pub fn shaped_rewards(&self, features: &[Vec<f64>]) -> Result<Vec<f64>> {
        let preds = self.member_predictions(features)?;
        Ok((0..features.len())
            .map(|i| {
                let mut col: Vec<f64> = preds.iter().map(|p| p[i]).collect();
                order_free_mean(&mut col)
            })
            .collect())
    }

    pub fn shaped_reward(&self, h: &[f64]) -> Result<f64> {
        if h.len() != self.input_dim() {
            return input_err(format!("feature has {} entries, expected {}", h.len(), self.input_dim()));
        }
        Ok(self.shaped_rewards(&[h.to_vec()])?[0])
    }

    /// Standard deviation across members (denominator K) for each row.
    pub fn disagreement(&self, features: &[Vec<f64>]) -> Result<Vec<f64>> {
        let preds = self.member_predictions(features)?;
        let k = self.k() as f64;
        Ok((0..features.len())
            .map(|i| {
                let mut col: Vec<f64> = preds.iter().map(|p| p[i]).collect();
                let mean = order_free_mean(&mut col);
                (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / k).sqrt()
            })
            .collect())
    }

    /// Shaped rewards for every step of a trajectory.
    pub fn shape_trajectory(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        let feats: Vec<Vec<f64>> = traj
            .steps
            .iter()
            .map(|s| build_features(s, &self.dense_channels))
            .collect();
        if feats.is_empty() {
            return Ok(Vec::new());
        }
        self.shaped_rewards(&feats)
    }

    /// Mean trajectory loss of the ensemble-mean predictor on `points`.
    pub fn dataset_loss(&self, points: &[DatasetPoint]) -> Result<f64> {
        if points.is_empty() {
            return input_err("empty evaluation set");
        }
        let mut total = 0.0;
        for p in points {
            let pred: f64 = self.shaped_rewards(&p.features)?.iter().sum();
            total += (pred - p.target) * (pred - p.target);
        }
        Ok(total / points.len() as f64)
    }

    /// Adds datapoints built from fresh trajectories and continues training
    /// every member on the union of old and new data.
    pub fn refine<R: Rng + ?Sized>(
        &mut self,
        new_trajectories: &[Trajectory],
        p_rel: f64,
        cfg: &RewardTrainConfig,
        rng: &mut R,
    ) -> Result<()> {
        for traj in new_trajectories {
            let events = apply_release(traj, self.sparse_channel, p_rel, rng)?;
            self.dataset.extend(build_dataset(traj, &events, &self.dense_channels)?);
        }
        let round: u64 = rng.gen();
        let members = std::mem::take(&mut self.members);
        for (i, member) in members.into_iter().enumerate() {
            let mut member_rng = rng_from_seed(derive_seed(self.member_seeds[i], "refine", round));
            let trained = train_member(member, &self.dataset, &self.scaler, cfg, &mut member_rng)?;
            self.members.push(trained);
        }
        Ok(())
    }

    /// Writes `member_<k>.bin` snapshots and `manifest.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        for (i, m) in self.members.iter().enumerate() {
            let name = format!("member_{i}.bin");
            fs::write(dir.join(&name), encode_network(m))?;
            files.push(name);
        }
        let manifest = EnsembleManifest {
            k: self.k(),
            spec: self.spec.clone(),
            member_seeds: self.member_seeds.clone(),
            scaler: self.scaler.clone(),
            member_files: files,
        };
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| PrismError::Io(e.to_string()))?;
        fs::write(dir.join("manifest.json"), json)?;
        Ok(())
    }

    pub fn load(dir: &Path, sparse_channel: usize, dense_channels: Vec<usize>) -> Result<Self> {
        let text = fs::read_to_string(dir.join("manifest.json"))?;
        let manifest: EnsembleManifest =
            serde_json::from_str(&text).map_err(|e| PrismError::Input(format!("bad manifest: {e}")))?;
        if manifest.member_files.len() != manifest.k {
            return input_err("manifest lists the wrong number of members");
        }
        let mut members = Vec::with_capacity(manifest.k);
        for f in &manifest.member_files {
            let mut net = Network::zeros(manifest.spec.clone())?;
            decode_into(&mut net, &fs::read(dir.join(f))?)?;
            members.push(net);
        }
        Ok(RewardEnsemble {
            members,
            spec: manifest.spec,
            scaler: manifest.scaler,
            member_seeds: manifest.member_seeds,
            dataset: Vec::new(),
            sparse_channel,
            dense_channels,
        })
    }
}

/// Spreads an episodic total evenly over `len` steps.
pub fn redistribute_uniform<T: Scalar>(len: usize, total: T) -> Result<Vec<T>> {
    if len == 0 {
        return input_err("cannot redistribute over zero steps");
    }
    Ok(vec![total / from_count(len); len])
}

/// Scales weights normalised to sum one by `total`.
pub fn redistribute_with_weights(weights: &[f64], total: f64) -> Result<Vec<f64>> {
    let s: f64 = weights.iter().sum();
    if weights.is_empty() || s.abs() < 1e-6 {
        return input_err("redistribution weights must have a sum bounded away from zero");
    }
    Ok(weights.iter().map(|w| w / s * total).collect())
}

/// Random redistribution with weights drawn from U(−1, 1), redrawn while
/// their sum is within 1e-6 of zero.
pub fn redistribute_random<R: Rng + ?Sized>(len: usize, total: f64, rng: &mut R) -> Result<Vec<f64>> {
    if len == 0 {
        return input_err("cannot redistribute over zero steps");
    }
    loop {
        let alpha: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if alpha.iter().sum::<f64>().abs() >= 1e-6 {
            return redistribute_with_weights(&alpha, total);
        }
    }
}
