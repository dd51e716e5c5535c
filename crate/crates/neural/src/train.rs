use ndarray::{Array1, Array2, ArrayView2, Axis};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adam::{AdamConfig, AdamState};
use crate::mlp::Mlp;
use crate::normalize::Normalizer;
use crate::{NnError, Result};

/// Feature rows with one real label each.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Samples {
    pub features: Array2<f64>,
    pub labels: Array1<f64>,
}

impl Samples {
    pub fn new(features: Array2<f64>, labels: Array1<f64>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(NnError::WidthMismatch {
                expected: features.nrows(),
                got: labels.len(),
            });
        }
        Ok(Self { features, labels })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: &[f64]) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        let mut flat = Vec::with_capacity(rows.len() * width);
        for r in rows {
            if r.len() != width {
                return Err(NnError::WidthMismatch { expected: width, got: r.len() });
            }
            flat.extend_from_slice(r);
        }
        let features = Array2::from_shape_vec((rows.len(), width), flat)
            .map_err(|e| NnError::Checkpoint(e.to_string()))?;
        Self::new(features, Array1::from(labels.to_vec()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.ncols()
    }
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 128,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

/// Losses are in normalized label units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

/// A model bundled with the normalizer it was trained under.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimator {
    pub model: Mlp,
    pub normalizer: Normalizer,
}

impl Estimator {
    /// Real network output returned as a complex gain with zero imaginary part.
    pub fn predict(&self, features: &[f64]) -> Result<Complex64> {
        let x = ArrayView2::from_shape((1, features.len()), features)
            .map_err(|e| NnError::Checkpoint(e.to_string()))?;
        Ok(self.predict_batch(x)?[0])
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Vec<Complex64>> {
        let z = self.normalizer.features(x)?;
        let out = self.model.forward_batch(z.view())?;
        Ok(out
            .iter()
            .map(|&y| Complex64::new(self.normalizer.inverse_label(y), 0.0))
            .collect())
    }
}

#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub estimator: Estimator,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub initial_train_mse: f64,
}

/// Mini-batch Adam on the mean squared error; returns the snapshot with the
/// lowest validation loss. Shuffling is driven by `cfg.seed` alone.
pub fn train(
    mut model: Mlp,
    train_set: &Samples,
    val_set: &Samples,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    if train_set.is_empty() {
        return Err(NnError::EmptySplit("training"));
    }
    if val_set.is_empty() {
        return Err(NnError::EmptySplit("validation"));
    }
    for set in [train_set, val_set] {
        if set.width() != model.input_width() {
            return Err(NnError::WidthMismatch {
                expected: model.input_width(),
                got: set.width(),
            });
        }
    }

    let normalizer = Normalizer::fit(train_set.features.view(), train_set.labels.view())?;
    let x_train = normalizer.features(train_set.features.view())?;
    let y_train = train_set.labels.mapv(|y| normalizer.label(y));
    let x_val = normalizer.features(val_set.features.view())?;
    let y_val = val_set.labels.mapv(|y| normalizer.label(y));

    let mse = |m: &Mlp, x: &Array2<f64>, y: &Array1<f64>| -> Result<f64> {
        let out = m.forward_batch(x.view())?;
        Ok((&out - y).mapv(|r| r * r).mean().unwrap_or(0.0))
    };

    let initial_train_mse = mse(&model, &x_train, &y_train)?;
    let mut adam = AdamState::new(&model, cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let batch_size = cfg.batch_size.max(1);

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = (f64::INFINITY, 0usize, model.clone());

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for chunk in order.chunks(batch_size) {
            let xb = x_train.select(Axis(0), chunk);
            let yb = y_train.select(Axis(0), chunk);
            let (loss, grads) = model.batch_gradients(xb.view(), yb.view())?;
            if !loss.is_finite() {
                return Err(NnError::NonFiniteLoss { epoch, history });
            }
            weighted += loss * chunk.len() as f64;
            adam.apply(&mut model, &grads);
        }
        let train_mse = weighted / train_set.len() as f64;
        let val_mse = mse(&model, &x_val, &y_val)?;
        if !val_mse.is_finite() {
            return Err(NnError::NonFiniteLoss { epoch, history });
        }
        history.push(EpochStats {
            epoch,
            train_mse,
            val_mse,
        });
        if val_mse < best.0 {
            best = (val_mse, epoch, model.clone());
        }
    }

    let (_, best_epoch, best_model) = best;
    Ok(TrainedModel {
        estimator: Estimator {
            model: if cfg.epochs == 0 { model } else { best_model },
            normalizer,
        },
        history,
        best_epoch,
        initial_train_mse,
    })
}
