use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::{NnError, Result};

const MIN_STD: f64 = 1e-12;

/// Per-feature z-scoring plus an affine label scale, fitted on training data.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Normalizer {
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub label_mean: f64,
    pub label_std: f64,
}

impl Normalizer {
    pub fn fit(features: ArrayView2<f64>, labels: ArrayView1<f64>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(NnError::EmptySplit("training"));
        }
        let feature_mean = features.mean_axis(Axis(0)).expect("non-empty").to_vec();
        let feature_std = features
            .std_axis(Axis(0), 0.0)
            .iter()
            .map(|&s| guard(s))
            .collect();
        let label_mean = labels.mean().unwrap_or(0.0);
        let label_std = guard(labels.std(0.0));
        Ok(Self {
            feature_mean,
            feature_std,
            label_mean,
            label_std,
        })
    }

    pub fn width(&self) -> usize {
        self.feature_mean.len()
    }

    pub fn is_fitted_for(&self, width: usize) -> bool {
        self.feature_mean.len() == width && self.feature_std.len() == width
    }

    pub fn features(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if !self.is_fitted_for(x.ncols()) {
            return Err(NnError::UnfittedNormalizer(x.ncols()));
        }
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.feature_mean[j]) / self.feature_std[j];
            }
        }
        Ok(out)
    }

    pub fn label(&self, y: f64) -> f64 {
        (y - self.label_mean) / self.label_std
    }

    pub fn inverse_label(&self, y: f64) -> f64 {
        y * self.label_std + self.label_mean
    }
}

fn guard(s: f64) -> f64 {
    if s.is_finite() && s > MIN_STD {
        s
    } else {
        1.0
    }
}
