//! Three-layer feedforward network with a logistic hidden layer and a linear
//! output layer, trained by full-batch gradient descent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::NeuralError;

/// One training or test example: input vector and target output vector.
pub type Pair = (Vec<f64>, Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Network {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    /// Hidden × input, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Output × hidden, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperParams {
    pub hidden_dim: usize,
    pub learning_rate: f64,
    /// Epochs of the first teaching round; later rounds double it.
    pub epochs: usize,
    /// Half-width of the uniform weight initialization interval.
    pub init_range: f64,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            hidden_dim: 32,
            learning_rate: 0.025,
            epochs: 4000,
            init_range: 0.5,
            seed: 1,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Parameter-shaped gradient buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Network {
    pub fn zeros(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        Network {
            input_dim,
            hidden_dim,
            output_dim,
            w1: vec![0.0; hidden_dim * input_dim],
            b1: vec![0.0; hidden_dim],
            w2: vec![0.0; output_dim * hidden_dim],
            b2: vec![0.0; output_dim],
        }
    }

    /// Weights and biases drawn uniformly from `[-range, range]`, in the
    /// order w1, b1, w2, b2.
    pub fn random(input_dim: usize, hidden_dim: usize, output_dim: usize, range: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut n = Self::zeros(input_dim, hidden_dim, output_dim);
        for v in n
            .w1
            .iter_mut()
            .chain(n.b1.iter_mut())
            .chain(n.w2.iter_mut())
            .chain(n.b2.iter_mut())
        {
            *v = rng.gen_range(-range..=range);
        }
        n
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn is_finite(&self) -> bool {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
            .all(|v| v.is_finite())
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NeuralError> {
        if x.len() != self.input_dim {
            return Err(NeuralError::DimensionMismatch {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    fn hidden(&self, x: &[f64], h: &mut [f64]) {
        for (j, hj) in h.iter_mut().enumerate() {
            let row = &self.w1[j * self.input_dim..(j + 1) * self.input_dim];
            *hj = sigmoid(dot(row, x) + self.b1[j]);
        }
    }

    fn output(&self, h: &[f64], y: &mut [f64]) {
        for (k, yk) in y.iter_mut().enumerate() {
            let row = &self.w2[k * self.hidden_dim..(k + 1) * self.hidden_dim];
            *yk = dot(row, h) + self.b2[k];
        }
    }

    /// `y = W2 σ(W1 x + b1) + b2`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        self.check_input(x)?;
        let mut h = vec![0.0; self.hidden_dim];
        let mut y = vec![0.0; self.output_dim];
        self.hidden(x, &mut h);
        self.output(&h, &mut y);
        Ok(y)
    }

    fn check_pairs(&self, pairs: &[Pair]) -> Result<(), NeuralError> {
        for (x, t) in pairs {
            self.check_input(x)?;
            if t.len() != self.output_dim {
                return Err(NeuralError::DimensionMismatch {
                    expected: self.output_dim,
                    found: t.len(),
                });
            }
        }
        Ok(())
    }

    /// Half the squared error summed over outputs, averaged over pairs.
    pub fn loss(&self, pairs: &[Pair]) -> Result<f64, NeuralError> {
        self.check_pairs(pairs)?;
        let mut total = 0.0;
        for (x, t) in pairs {
            let y = self.forward(x)?;
            total += 0.5 * y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        Ok(total / pairs.len().max(1) as f64)
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn gradients(&self, pairs: &[Pair]) -> Result<(f64, Gradients), NeuralError> {
        self.check_pairs(pairs)?;
        let (ni, nh, no) = (self.input_dim, self.hidden_dim, self.output_dim);
        let mut g = Gradients {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; nh],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; no],
        };
        let scale = 1.0 / pairs.len().max(1) as f64;
        let mut h = vec![0.0; nh];
        let mut y = vec![0.0; no];
        let mut dh = vec![0.0; nh];
        let mut loss = 0.0;
        for (x, t) in pairs {
            self.hidden(x, &mut h);
            self.output(&h, &mut y);
            dh.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..no {
                let e = y[k] - t[k];
                loss += 0.5 * e * e;
                let dk = e * scale;
                g.b2[k] += dk;
                let row = &self.w2[k * nh..(k + 1) * nh];
                let grow = &mut g.w2[k * nh..(k + 1) * nh];
                for j in 0..nh {
                    grow[j] += dk * h[j];
                    dh[j] += dk * row[j];
                }
            }
            for j in 0..nh {
                let dz = dh[j] * h[j] * (1.0 - h[j]);
                g.b1[j] += dz;
                let grow = &mut g.w1[j * ni..(j + 1) * ni];
                for (gi, xi) in grow.iter_mut().zip(x) {
                    *gi += dz * xi;
                }
            }
        }
        Ok((loss * scale, g))
    }

    fn step(&mut self, g: &Gradients, lr: f64) {
        for (p, d) in self
            .w1
            .iter_mut()
            .zip(&g.w1)
            .chain(self.b1.iter_mut().zip(&g.b1))
            .chain(self.w2.iter_mut().zip(&g.w2))
            .chain(self.b2.iter_mut().zip(&g.b2))
        {
            *p -= lr * d;
        }
    }

    /// Runs `epochs` full-batch descent steps and returns the loss measured
    /// before each step. `epoch_offset` only labels a divergence error.
    pub fn train_epochs(
        &mut self,
        pairs: &[Pair],
        epochs: usize,
        lr: f64,
        epoch_offset: usize,
    ) -> Result<Vec<f64>, NeuralError> {
        let mut curve = Vec::with_capacity(epochs);
        for e in 0..epochs {
            let (loss, g) = self.gradients(pairs)?;
            if !loss.is_finite() {
                return Err(NeuralError::NonFiniteLoss(epoch_offset + e));
            }
            curve.push(loss);
            self.step(&g, lr);
        }
        Ok(curve)
    }
}

/// Initializes a network for the pairs' dimensions and trains it.
pub fn train(pairs: &[Pair], hp: &HyperParams) -> Result<(Network, Vec<f64>), NeuralError> {
    let Some((x, t)) = pairs.first() else {
        return Err(NeuralError::EmptyTrainingSet);
    };
    let mut net = Network::random(x.len(), hp.hidden_dim, t.len(), hp.init_range, hp.seed);
    let curve = net.train_epochs(pairs, hp.epochs, hp.learning_rate, 0)?;
    Ok((net, curve))
}
