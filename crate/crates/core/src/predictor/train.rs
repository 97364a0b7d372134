use std::collections::{HashMap, HashSet};

use image::RgbImage;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{extract_features, FeatureConfig};
use super::model::{
    Activation, EpochRecord, MlpWeights, ModelBody, MultiTaskModel, RidgeWeights, Standardizer,
    TrainingMeta,
};
use super::split::DatasetSplit;
use crate::data::{DistortionVector, ItemKind, ItemRecord, ItemStats, NUM_CATEGORIES};
use crate::error::{Error, Result};
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    Mlp,
    Ridge,
}

impl std::str::FromStr for TrainMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(TrainMode::Mlp),
            "ridge" => Ok(TrainMode::Ridge),
            _ => Err(Error::Invalid(format!("unknown training mode `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub hidden_dim: usize,
    pub epochs: usize,
    /// Full-batch Adam updates per epoch.
    pub steps_per_epoch: usize,
    /// Learning rate for the first half of the epochs; each later epoch
    /// multiplies it by 0.1.
    pub base_lr: f64,
    pub l2: f64,
    pub ridge_lambda: f64,
    pub seed: u64,
    /// Train on whole images only, ignoring patches in the training split.
    pub images_only: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: TrainMode::Mlp,
            hidden_dim: 32,
            epochs: 10,
            steps_per_epoch: 200,
            base_lr: 0.01,
            l2: 1e-4,
            ridge_lambda: 1e-4,
            seed: 0,
            images_only: false,
        }
    }
}

impl TrainConfig {
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let half = self.epochs / 2;
        if epoch < half {
            self.base_lr
        } else {
            self.base_lr * 0.1f64.powi((epoch - half + 1) as i32)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub item_id: String,
    pub kind: ItemKind,
    pub features: Vec<f64>,
    /// In [0, 100].
    pub mos: f64,
    pub distortion: DistortionVector,
}

/// Extracts features for every item that has statistics, in parallel.
pub fn build_samples(
    items: &[ItemRecord],
    item_stats: &[ItemStats],
    load: impl Fn(&ItemRecord) -> Result<RgbImage> + Sync,
) -> Result<Vec<TrainingSample>> {
    let by_id: HashMap<&str, &ItemStats> =
        item_stats.iter().map(|s| (s.item_id.as_str(), s)).collect();
    items
        .par_iter()
        .filter_map(|item| by_id.get(item.item_id.as_str()).map(|s| (item, *s)))
        .map(|(item, s)| {
            let pixels = load(item)?;
            let f = extract_features(&pixels, None)
                .map_err(|e| Error::Image(format!("{}: {e}", item.item_id)))?;
            Ok(TrainingSample {
                item_id: item.item_id.clone(),
                kind: item.kind,
                features: f.values,
                mos: s.mos,
                distortion: s.distortion_prob.clone(),
            })
        })
        .collect()
}

/// Glorot-uniform weights, zero biases.
pub fn init_mlp(input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> MlpWeights {
    let mut uniform = |fan_in: usize, fan_out: usize, n: usize| -> Vec<f64> {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        (0..n).map(|_| rng.random_range(-a..a)).collect()
    };
    MlpWeights {
        input_dim,
        hidden_dim,
        activation: Activation::Tanh,
        w1: uniform(input_dim, hidden_dim, input_dim * hidden_dim),
        b1: vec![0.0; hidden_dim],
        wq: uniform(hidden_dim, 1, hidden_dim),
        bq: 0.0,
        wd: uniform(hidden_dim, NUM_CATEGORIES, NUM_CATEGORIES * hidden_dim),
        bd: vec![0.0; NUM_CATEGORIES],
    }
}

struct Batch {
    x: Vec<Vec<f64>>,
    tq: Vec<f64>,
    td: Vec<[f64; NUM_CATEGORIES]>,
}

impl Batch {
    fn new(samples: &[&TrainingSample], std: &Standardizer) -> Self {
        Batch {
            x: samples.iter().map(|s| std.apply(&s.features)).collect(),
            tq: samples.iter().map(|s| s.mos / 100.0).collect(),
            td: samples.iter().map(|s| s.distortion.0).collect(),
        }
    }

    fn degenerate(&self) -> bool {
        fn constant(v: impl IntoIterator<Item = f64>) -> bool {
            let mut v = v.into_iter();
            let first = v.next();
            first.is_some_and(|f| v.all(|x| x == f))
        }
        constant(self.tq.iter().copied())
            || (0..NUM_CATEGORIES).all(|k| constant(self.td.iter().map(|d| d[k])))
    }
}

pub fn train(
    samples: &[TrainingSample],
    split: &DatasetSplit,
    config: &TrainConfig,
) -> Result<MultiTaskModel> {
    let feature_config = FeatureConfig::default();
    if let Some(bad) = samples.iter().find(|s| s.features.len() != feature_config.dim) {
        return Err(Error::Invalid(format!(
            "sample `{}` has {} features (expected {})",
            bad.item_id,
            bad.features.len(),
            feature_config.dim
        )));
    }
    let train_ids: HashSet<&str> = split.train.iter().map(String::as_str).collect();
    let val_ids: HashSet<&str> = split.validation.iter().map(String::as_str).collect();
    let train_set: Vec<&TrainingSample> = samples
        .iter()
        .filter(|s| train_ids.contains(s.item_id.as_str()))
        .filter(|s| !config.images_only || s.kind == ItemKind::WholeImage)
        .collect();
    if train_set.is_empty() {
        return Err(Error::InsufficientData("training split has no samples".into()));
    }
    let val_set: Vec<&TrainingSample> = samples
        .iter()
        .filter(|s| val_ids.contains(s.item_id.as_str()))
        .collect();

    let rows: Vec<Vec<f64>> = train_set.iter().map(|s| s.features.clone()).collect();
    let standardizer = Standardizer::fit(&rows);
    let train_batch = Batch::new(&train_set, &standardizer);
    let val_batch = Batch::new(&val_set, &standardizer);
    let degenerate = train_batch.degenerate();
    if degenerate {
        log::warn!("training targets are degenerate (identical values); the model will be uninformative");
    }

    let (body, mut history) = match config.mode {
        TrainMode::Mlp => train_mlp(&train_batch, &val_batch, config)?,
        TrainMode::Ridge => {
            let body = fit_ridge(&train_batch, config.ridge_lambda)?;
            (body, Vec::new())
        }
    };
    let mut model = MultiTaskModel::new(feature_config, standardizer, body);
    if config.mode == TrainMode::Ridge {
        history.push(epoch_record(&model, 0, 0.0, &train_batch, &val_batch));
    }
    model.training = TrainingMeta {
        seed: config.seed,
        epochs: if config.mode == TrainMode::Mlp { config.epochs } else { 0 },
        n_train: train_set.len(),
        n_validation: val_set.len(),
        degenerate_targets: degenerate,
        history,
    };
    Ok(model)
}

fn batch_loss(model: &MultiTaskModel, b: &Batch) -> f64 {
    let n = b.x.len() as f64;
    b.x.iter()
        .zip(&b.tq)
        .zip(&b.td)
        .map(|((x, tq), td)| {
            let p = model.predict_standardized(x);
            let eq = p.quality / 100.0 - tq;
            let ed: f64 = p.distortions.0.iter().zip(td).map(|(a, t)| (a - t).powi(2)).sum();
            eq * eq / n + ed / (n * NUM_CATEGORIES as f64)
        })
        .sum()
}

fn epoch_record(model: &MultiTaskModel, epoch: usize, lr: f64, train: &Batch, val: &Batch) -> EpochRecord {
    let (validation_loss, validation_quality_srcc) = if val.x.is_empty() {
        (None, None)
    } else {
        let pred: Vec<f64> = val.x.iter().map(|x| model.predict_standardized(x).quality).collect();
        (Some(batch_loss(model, val)), stats::srcc(&pred, &val.tq).ok())
    };
    EpochRecord {
        epoch,
        lr,
        train_loss: batch_loss(model, train),
        validation_loss,
        validation_quality_srcc,
    }
}

fn train_mlp(
    train: &Batch,
    val: &Batch,
    config: &TrainConfig,
) -> Result<(ModelBody, Vec<EpochRecord>)> {
    if config.hidden_dim == 0 || config.epochs == 0 || config.steps_per_epoch == 0 {
        return Err(Error::Invalid("hidden_dim, epochs and steps_per_epoch must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dim = train.x[0].len();
    let mut weights = init_mlp(dim, config.hidden_dim, &mut rng);
    let mut params = weights.to_flat();
    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    let mut t = 0;
    let mut history = Vec::with_capacity(config.epochs);
    let mut probe = MultiTaskModel::new(
        FeatureConfig::default(),
        Standardizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        },
        ModelBody::Mlp(weights.clone()),
    );
    for epoch in 0..config.epochs {
        let lr = config.lr_at(epoch);
        for step in 0..config.steps_per_epoch {
            let (loss, grad) = weights.loss_and_grad(&train.x, &train.tq, &train.td, config.l2);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, step, loss });
            }
            t += 1;
            let c1 = 1.0 - beta1.powi(t);
            let c2 = 1.0 - beta2.powi(t);
            for i in 0..params.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                params[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
            weights.set_flat(&params);
        }
        probe.body = ModelBody::Mlp(weights.clone());
        let rec = epoch_record(&probe, epoch, lr, train, val);
        log::info!(
            "epoch {epoch}: lr {lr:.2e} train loss {:.5} val loss {:?}",
            rec.train_loss,
            rec.validation_loss
        );
        history.push(rec);
    }
    Ok((ModelBody::Mlp(weights), history))
}

fn fit_ridge(b: &Batch, lambda: f64) -> Result<ModelBody> {
    if !(lambda >= 0.0) {
        return Err(Error::Invalid("ridge lambda must be non-negative".into()));
    }
    let n = b.x.len();
    let d = b.x[0].len();
    let x = DMatrix::from_fn(n, d, |i, j| b.x[i][j]);
    let xt = x.transpose();
    let gram = &xt * &x / n as f64 + DMatrix::identity(d, d) * lambda;
    let solve = |y: DVector<f64>| -> Result<(Vec<f64>, f64)> {
        let mean = y.mean();
        let rhs = &xt * y.add_scalar(-mean) / n as f64;
        let w = match gram.clone().cholesky() {
            Some(c) => c.solve(&rhs),
            None => gram
                .clone()
                .svd(true, true)
                .solve(&rhs, 1e-12)
                .map_err(|e| Error::Model(format!("ridge solve failed: {e}")))?,
        };
        Ok((w.iter().copied().collect(), mean))
    };
    let (wq, bq) = solve(DVector::from_iterator(n, b.tq.iter().copied()))?;
    let mut wd = Vec::with_capacity(NUM_CATEGORIES * d);
    let mut bd = Vec::with_capacity(NUM_CATEGORIES);
    for k in 0..NUM_CATEGORIES {
        let (w, b0) = solve(DVector::from_iterator(n, b.td.iter().map(|t| t[k])))?;
        wd.extend(w);
        bd.push(b0);
    }
    Ok(ModelBody::Ridge(RidgeWeights {
        lambda,
        wq,
        bq,
        wd,
        bd,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::features::FEATURE_DIM;

    fn synthetic(n: usize, seed: u64, linear: bool) -> (Vec<TrainingSample>, DatasetSplit) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coef: Vec<f64> = (0..FEATURE_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut samples = Vec::new();
        for i in 0..n {
            let features: Vec<f64> = (0..FEATURE_DIM).map(|_| rng.random_range(0.0..1.0)).collect();
            let s: f64 = features.iter().zip(&coef).map(|(a, b)| a * b).sum();
            let q = if linear { 50.0 + 4.0 * s } else { 100.0 / (1.0 + (-s).exp()) };
            let mut dist = [0.0; 7];
            for (k, d) in dist.iter_mut().enumerate() {
                *d = (0.5 + 0.1 * (features[k] - features[k + 7])).clamp(0.0, 1.0);
            }
            samples.push(TrainingSample {
                item_id: format!("s{i:03}"),
                kind: ItemKind::WholeImage,
                features,
                mos: q,
                distortion: DistortionVector(dist),
            });
        }
        let ids: Vec<String> = samples.iter().map(|s| s.item_id.clone()).collect();
        let split = DatasetSplit {
            train: ids[..n * 3 / 4].to_vec(),
            validation: ids[n * 3 / 4..].to_vec(),
            test: vec![],
            proportions: (0.75, 0.25, 0.0),
        };
        (samples, split)
    }

    #[test]
    fn ridge_fits_linear_targets() {
        let (samples, split) = synthetic(120, 1, true);
        let config = TrainConfig {
            mode: TrainMode::Ridge,
            ridge_lambda: 1e-10,
            ..Default::default()
        };
        let model = train(&samples, &split, &config).unwrap();
        let train_ids: HashSet<&String> = split.train.iter().collect();
        let (pred, truth): (Vec<f64>, Vec<f64>) = samples
            .iter()
            .filter(|s| train_ids.contains(&s.item_id))
            .map(|s| (model.predict_raw(&s.features).quality, s.mos))
            .unzip();
        assert!((stats::srcc(&pred, &truth).unwrap() - 1.0).abs() < 1e-6);
        for (p, t) in pred.iter().zip(&truth) {
            assert!((p - t).abs() < 1e-6);
        }
    }

    #[test]
    fn mlp_learns_and_is_reproducible() {
        let (samples, split) = synthetic(200, 2, false);
        let config = TrainConfig {
            epochs: 6,
            steps_per_epoch: 100,
            seed: 3,
            ..Default::default()
        };
        let a = train(&samples, &split, &config).unwrap();
        let b = train(&samples, &split, &config).unwrap();
        assert_eq!(a, b);
        let h = &a.training.history;
        assert_eq!(h.len(), 6);
        assert!(h.last().unwrap().train_loss < h[0].train_loss);
        assert!(h.last().unwrap().validation_quality_srcc.unwrap() > 0.8);
        let c = train(&samples, &split, &TrainConfig { seed: 4, ..config }).unwrap();
        assert_ne!(a.body, c.body);
    }

    #[test]
    fn schedule_shape() {
        let c = TrainConfig {
            base_lr: 1.0,
            epochs: 10,
            ..Default::default()
        };
        let lrs: Vec<f64> = (0..10).map(|e| c.lr_at(e)).collect();
        assert_eq!(&lrs[..5], &[1.0; 5]);
        assert!((lrs[5] - 0.1).abs() < 1e-15);
        assert!((lrs[6] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn degenerate_and_divergent_training() {
        let (mut samples, split) = synthetic(40, 5, true);
        for s in &mut samples {
            s.mos = 40.0;
        }
        let config = TrainConfig {
            epochs: 2,
            steps_per_epoch: 5,
            ..Default::default()
        };
        let model = train(&samples, &split, &config).unwrap();
        assert!(model.training.degenerate_targets);

        samples[0].features[0] = f64::NAN;
        assert!(matches!(
            train(&samples, &split, &config),
            Err(Error::Diverged { epoch: 0, step: 0, .. })
        ));
    }

    #[test]
    fn empty_training_split() {
        let (samples, mut split) = synthetic(10, 5, true);
        split.train.clear();
        assert!(matches!(
            train(&samples, &split, &TrainConfig::default()),
            Err(Error::InsufficientData(_))
        ));
    }
}
