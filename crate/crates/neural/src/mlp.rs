use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::{NnError, Result};

/// Hidden-layer widths of the estimator network.
pub const HIDDEN_WIDTHS: [usize; 4] = [32, 64, 128, 64];

/// One affine layer. `weights` is `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weights: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
        }
    }

    /// He-style uniform initialization scaled by fan-in; biases start at zero.
    pub fn he_uniform<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let limit = (6.0 / input as f64).sqrt();
        let weights = Array2::from_shape_fn((output, input), |_| rng.random_range(-limit..limit));
        Self {
            weights,
            bias: Array1::zeros(output),
        }
    }

    pub fn input_width(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_width(&self) -> usize {
        self.weights.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Gradients share the layer layout of the model they were computed for.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(model: &Mlp) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| Dense::zeros(l.input_width(), l.output_width()))
                .collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights *= factor;
            l.bias *= factor;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
            .fold(0.0_f64, |acc, g| acc.max(g.abs()))
    }
}

/// Fully-connected network: ReLU on every hidden layer, identity on the
/// single-output head.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input);
        widths.extend_from_slice(hidden);
        widths.push(1);
        let layers = widths
            .windows(2)
            .map(|w| Dense::he_uniform(w[0], w[1], rng))
            .collect();
        Self { layers }
    }

    /// The estimator layout: `input -> 32 -> 64 -> 128 -> 64 -> 1`.
    pub fn estimator<R: Rng + ?Sized>(input: usize, rng: &mut R) -> Self {
        Self::new(input, &HIDDEN_WIDTHS, rng)
    }

    pub fn zeros(input: usize, hidden: &[usize]) -> Self {
        let mut widths = vec![input];
        widths.extend_from_slice(hidden);
        widths.push(1);
        Self {
            layers: widths.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(NnError::Checkpoint("model has no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].output_width() != pair[1].input_width() {
                return Err(NnError::WidthMismatch {
                    expected: pair[0].output_width(),
                    got: pair[1].input_width(),
                });
            }
        }
        for l in &layers {
            if l.bias.len() != l.output_width() {
                return Err(NnError::WidthMismatch {
                    expected: l.output_width(),
                    got: l.bias.len(),
                });
            }
        }
        let out = layers.last().map(Dense::output_width).unwrap_or(0);
        if out != 1 {
            return Err(NnError::WidthMismatch { expected: 1, got: out });
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width()
    }

    /// Trainable parameters per layer, output head last.
    pub fn parameter_counts(&self) -> Vec<usize> {
        self.layers.iter().map(Dense::param_count).collect()
    }

    pub fn hidden_parameter_counts(&self) -> Vec<usize> {
        let counts = self.parameter_counts();
        counts[..counts.len() - 1].to_vec()
    }

    pub fn total_parameters(&self) -> usize {
        self.parameter_counts().iter().sum()
    }

    fn check_width(&self, got: usize) -> Result<()> {
        let expected = self.input_width();
        if got != expected {
            return Err(NnError::WidthMismatch { expected, got });
        }
        Ok(())
    }

    pub fn forward(&self, features: &[f64]) -> Result<f64> {
        self.check_width(features.len())?;
        let x = ArrayView2::from_shape((1, features.len()), features).expect("row view");
        Ok(self.forward_batch(x)?[0])
    }

    /// Rows of `x` are samples.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.check_width(x.ncols())?;
        let mut act = x.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = act.dot(&layer.weights.t());
            z += &layer.bias;
            if i < last {
                z.mapv_inplace(relu);
            }
            act = z;
        }
        Ok(act.column(0).to_owned())
    }

    /// Gradient of the squared error `(f(x) - label)^2` for one sample.
    pub fn backward(&self, features: &[f64], label: f64) -> Result<Gradients> {
        self.check_width(features.len())?;
        let x = ArrayView2::from_shape((1, features.len()), features).expect("row view");
        let labels = [label];
        Ok(self.batch_gradients(x, ArrayView1::from(&labels[..]))?.1)
    }

    /// Mean squared error over the batch and its gradient.
    pub fn batch_gradients(
        &self,
        x: ArrayView2<f64>,
        labels: ArrayView1<f64>,
    ) -> Result<(f64, Gradients)> {
        self.check_width(x.ncols())?;
        if labels.len() != x.nrows() {
            return Err(NnError::WidthMismatch {
                expected: x.nrows(),
                got: labels.len(),
            });
        }
        let batch = x.nrows() as f64;
        let last = self.layers.len() - 1;

        // activations[0] is the input; pre-activations kept for the ReLU mask.
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        activations.push(x.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = activations[i].dot(&layer.weights.t());
            z += &layer.bias;
            let a = if i < last { z.mapv(relu) } else { z.clone() };
            pre.push(z);
            activations.push(a);
        }

        let out = activations[last + 1].column(0);
        let residual = &out - &labels;
        let loss = residual.mapv(|r| r * r).sum() / batch;

        let mut delta = residual.mapv(|r| 2.0 * r / batch).insert_axis(Axis(1));
        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let weights = delta.t().dot(&activations[i]);
            let bias = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weights);
                ndarray::Zip::from(&mut back)
                    .and(&pre[i - 1])
                    .for_each(|b, &z| {
                        if z <= 0.0 {
                            *b = 0.0;
                        }
                    });
                delta = back;
            }
            grads.push(Dense { weights, bias });
        }
        grads.reverse();
        Ok((loss, Gradients { layers: grads }))
    }
}

fn relu(z: f64) -> f64 {
    z.max(0.0)
}
