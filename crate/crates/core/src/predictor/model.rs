use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::features::{extract_features, FeatureConfig, FeatureVector};
use crate::data::{DistortionVector, Rect, NUM_CATEGORIES};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "piqflow-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Zero-variance features get a std of 1.
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut std = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        for s in &mut std {
            *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
        }
        Standardizer { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Tanh,
}

/// Shared hidden layer feeding a quality head and a distortion head.
/// Matrices are row-major with one row per output unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpWeights {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub activation: Activation,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub wq: Vec<f64>,
    pub bq: f64,
    pub wd: Vec<f64>,
    pub bd: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeWeights {
    pub lambda: f64,
    pub wq: Vec<f64>,
    pub bq: f64,
    /// `NUM_CATEGORIES x input_dim`.
    pub wd: Vec<f64>,
    pub bd: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ModelBody {
    Mlp(MlpWeights),
    Ridge(RidgeWeights),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
    pub validation_quality_srcc: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub n_train: usize,
    pub n_validation: usize,
    /// Set when every training target of a head was identical.
    pub degenerate_targets: bool,
    pub history: Vec<EpochRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiTaskModel {
    pub format: String,
    pub version: u32,
    pub feature_config: FeatureConfig,
    pub standardization: Standardizer,
    pub body: ModelBody,
    pub training: TrainingMeta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// In [0, 100].
    pub quality: f64,
    pub distortions: DistortionVector,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Intermediate values of one forward pass, kept for backpropagation.
pub(crate) struct Forward {
    pub hidden: Vec<f64>,
    pub q: f64,
    pub d: [f64; NUM_CATEGORIES],
}

impl MlpWeights {
    pub fn n_params(&self) -> usize {
        let (i, h) = (self.input_dim, self.hidden_dim);
        h * i + h + h + 1 + NUM_CATEGORIES * h + NUM_CATEGORIES
    }

    /// Parameters in the order w1, b1, wq, bq, wd, bd.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend(&self.w1);
        v.extend(&self.b1);
        v.extend(&self.wq);
        v.push(self.bq);
        v.extend(&self.wd);
        v.extend(&self.bd);
        v
    }

    pub fn set_flat(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.n_params());
        let (i, h) = (self.input_dim, self.hidden_dim);
        let mut at = 0;
        let mut take = |n: usize| {
            let s = &v[at..at + n];
            at += n;
            s
        };
        self.w1.copy_from_slice(take(h * i));
        self.b1.copy_from_slice(take(h));
        self.wq.copy_from_slice(take(h));
        self.bq = take(1)[0];
        self.wd.copy_from_slice(take(NUM_CATEGORIES * h));
        self.bd.copy_from_slice(take(NUM_CATEGORIES));
    }

    pub(crate) fn forward(&self, x: &[f64]) -> Forward {
        let (i, h) = (self.input_dim, self.hidden_dim);
        let hidden: Vec<f64> = (0..h)
            .map(|j| {
                let row = &self.w1[j * i..(j + 1) * i];
                let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[j];
                match self.activation {
                    Activation::Tanh => z.tanh(),
                }
            })
            .collect();
        let dot = |w: &[f64]| w.iter().zip(&hidden).map(|(a, b)| a * b).sum::<f64>();
        let q = sigmoid(dot(&self.wq) + self.bq);
        let mut d = [0.0; NUM_CATEGORIES];
        for (k, v) in d.iter_mut().enumerate() {
            *v = sigmoid(dot(&self.wd[k * h..(k + 1) * h]) + self.bd[k]);
        }
        Forward { hidden, q, d }
    }

    /// Loss `mean_n (q - tq)^2 + mean_{n,k} (d_k - td_k)^2 + l2 * |W|^2`
    /// (biases are not penalized) and its gradient in flat parameter order.
    /// Inputs are standardized features; quality targets are in [0, 1].
    pub fn loss_and_grad(
        &self,
        x: &[Vec<f64>],
        tq: &[f64],
        td: &[[f64; NUM_CATEGORIES]],
        l2: f64,
    ) -> (f64, Vec<f64>) {
        let (ni, nh) = (self.input_dim, self.hidden_dim);
        let n = x.len() as f64;
        let mut grad = vec![0.0; self.n_params()];
        let o_b1 = nh * ni;
        let o_wq = o_b1 + nh;
        let o_bq = o_wq + nh;
        let o_wd = o_bq + 1;
        let o_bd = o_wd + NUM_CATEGORIES * nh;
        let mut loss = 0.0;
        let mut dh = vec![0.0; nh];
        for ((xi, &tqi), tdi) in x.iter().zip(tq).zip(td) {
            let f = self.forward(xi);
            let eq = f.q - tqi;
            loss += eq * eq / n;
            let gzq = 2.0 * eq / n * f.q * (1.0 - f.q);
            dh.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..nh {
                grad[o_wq + j] += gzq * f.hidden[j];
                dh[j] += gzq * self.wq[j];
            }
            grad[o_bq] += gzq;
            for k in 0..NUM_CATEGORIES {
                let ed = f.d[k] - tdi[k];
                loss += ed * ed / (n * NUM_CATEGORIES as f64);
                let gz = 2.0 * ed / (n * NUM_CATEGORIES as f64) * f.d[k] * (1.0 - f.d[k]);
                for j in 0..nh {
                    grad[o_wd + k * nh + j] += gz * f.hidden[j];
                    dh[j] += gz * self.wd[k * nh + j];
                }
                grad[o_bd + k] += gz;
            }
            for j in 0..nh {
                let gz1 = dh[j] * (1.0 - f.hidden[j] * f.hidden[j]);
                grad[o_b1 + j] += gz1;
                let row = &mut grad[j * ni..(j + 1) * ni];
                for (g, v) in row.iter_mut().zip(xi) {
                    *g += gz1 * v;
                }
            }
        }
        if l2 > 0.0 {
            let weights = (0..o_b1).chain(o_wq..o_bq).chain(o_wd..o_bd);
            let flat = self.to_flat();
            for p in weights {
                loss += l2 * flat[p] * flat[p];
                grad[p] += 2.0 * l2 * flat[p];
            }
        }
        (loss, grad)
    }
}

impl MultiTaskModel {
    pub fn new(feature_config: FeatureConfig, standardization: Standardizer, body: ModelBody) -> Self {
        MultiTaskModel {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            feature_config,
            standardization,
            body,
            training: TrainingMeta::default(),
        }
    }

    pub fn mode_name(&self) -> &'static str {
        match self.body {
            ModelBody::Mlp(_) => "mlp",
            ModelBody::Ridge(_) => "ridge",
        }
    }

    pub fn predict_features(&self, features: &FeatureVector) -> Result<Prediction> {
        if features.config != self.feature_config {
            return Err(Error::Model(format!(
                "feature config mismatch: model expects {} ({} dims), got {} ({} dims)",
                self.feature_config.id,
                self.feature_config.dim,
                features.config.id,
                features.config.dim
            )));
        }
        Ok(self.predict_raw(&features.values))
    }

    /// Prediction from an unstandardized feature row of the right length.
    pub(crate) fn predict_raw(&self, values: &[f64]) -> Prediction {
        let x = self.standardization.apply(values);
        self.predict_standardized(&x)
    }

    pub(crate) fn predict_standardized(&self, x: &[f64]) -> Prediction {
        match &self.body {
            ModelBody::Mlp(m) => {
                let f = m.forward(x);
                Prediction {
                    quality: 100.0 * f.q,
                    distortions: DistortionVector(f.d),
                }
            }
            ModelBody::Ridge(r) => {
                let dim = r.wq.len();
                let lin = |w: &[f64], b: f64| w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b;
                let mut d = [0.0; NUM_CATEGORIES];
                for (k, v) in d.iter_mut().enumerate() {
                    *v = lin(&r.wd[k * dim..(k + 1) * dim], r.bd[k]).clamp(0.0, 1.0);
                }
                Prediction {
                    quality: 100.0 * lin(&r.wq, r.bq).clamp(0.0, 1.0),
                    distortions: DistortionVector(d),
                }
            }
        }
    }

    /// Predicts on `region` (default: the whole image).
    pub fn predict(&self, pixels: &RgbImage, region: Option<Rect>) -> Result<Prediction> {
        let features = extract_features(pixels, region)?;
        self.predict_features(&features)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: MultiTaskModel = serde_json::from_str(s)?;
        if model.format != MODEL_FORMAT {
            return Err(Error::Model(format!("not a model file (format `{}`)", model.format)));
        }
        if model.version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                model.version
            )));
        }
        model.check_shapes()?;
        Ok(model)
    }

    fn check_shapes(&self) -> Result<()> {
        let dim = self.feature_config.dim;
        let bad = |what: &str| Err(Error::Model(format!("{what} has the wrong length")));
        if self.standardization.mean.len() != dim || self.standardization.std.len() != dim {
            return bad("standardization");
        }
        match &self.body {
            ModelBody::Mlp(m) => {
                let h = m.hidden_dim;
                if m.input_dim != dim || m.w1.len() != h * dim || m.b1.len() != h {
                    return bad("shared layer");
                }
                if m.wq.len() != h || m.wd.len() != NUM_CATEGORIES * h || m.bd.len() != NUM_CATEGORIES {
                    return bad("output head");
                }
            }
            ModelBody::Ridge(r) => {
                if r.wq.len() != dim || r.wd.len() != NUM_CATEGORIES * dim || r.bd.len() != NUM_CATEGORIES {
                    return bad("ridge weights");
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub checked: usize,
    pub max_relative_error: f64,
    /// Parameter index, analytic and numeric value at the worst error.
    pub worst: Option<(usize, f64, f64)>,
}

/// Compares analytic gradients with central finite differences on the given
/// parameter indices. Pairs where both values are below `1e-10` in magnitude
/// are counted with zero error.
pub fn gradient_check(
    weights: &MlpWeights,
    x: &[Vec<f64>],
    tq: &[f64],
    td: &[[f64; NUM_CATEGORIES]],
    l2: f64,
    params: &[usize],
    eps: f64,
) -> GradientCheck {
    let (_, analytic) = weights.loss_and_grad(x, tq, td, l2);
    let base = weights.to_flat();
    let mut probe = weights.clone();
    let mut worst: f64 = 0.0;
    let mut worst_at = None;
    for &p in params {
        let mut v = base.clone();
        v[p] = base[p] + eps;
        probe.set_flat(&v);
        let plus = probe.loss_and_grad(x, tq, td, l2).0;
        v[p] = base[p] - eps;
        probe.set_flat(&v);
        let minus = probe.loss_and_grad(x, tq, td, l2).0;
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic[p];
        let scale = a.abs().max(numeric.abs());
        if scale > 1e-10 && (a - numeric).abs() / scale > worst {
            worst = (a - numeric).abs() / scale;
            worst_at = Some((p, a, numeric));
        }
    }
    GradientCheck {
        checked: params.len(),
        max_relative_error: worst,
        worst: worst_at,
    }
}
