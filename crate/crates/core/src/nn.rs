//! Feed-forward MLP over a flat weight vector.
//!
//! Layout: for each layer `i → i+1`, the `n_out × n_in` weight matrix in
//! row-major order (row = output unit) followed by the `n_out` biases.
//! Hidden layers use `tanh`, the output layer is linear.

use crate::dataset::Sample;
use crate::{Error, Result};

pub const DEFAULT_LAYERS: [usize; 3] = [4, 16, 1];

pub fn n_params(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn check_layers(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
        return Err(Error::Shape(format!("invalid layer sizes {layer_sizes:?}")));
    }
    if *layer_sizes.last().unwrap() != 1 {
        return Err(Error::Shape("output layer must have exactly one unit".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_sizes: Vec<usize>,
    weights: Vec<f64>,
}

impl MlpModel {
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        check_layers(layer_sizes)?;
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights: vec![0.0; n_params(layer_sizes)],
        })
    }

    pub fn from_weights(layer_sizes: &[usize], weights: Vec<f64>) -> Result<Self> {
        check_layers(layer_sizes)?;
        let want = n_params(layer_sizes);
        if weights.len() != want {
            return Err(Error::Shape(format!(
                "{} weights for layers {layer_sizes:?}, expected {want}",
                weights.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::Shape(format!("weight {i} is not finite")));
        }
        Ok(Self { layer_sizes: layer_sizes.to_vec(), weights })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.layer_sizes[0] {
            return Err(Error::Shape(format!(
                "input of length {}, network expects {}",
                x.len(),
                self.layer_sizes[0]
            )));
        }
        Ok(forward_flat(&self.layer_sizes, &self.weights, x, &mut Scratch::default()))
    }

    pub fn mse_cost(&self, data: &[Sample]) -> Result<f64> {
        self.check_data(data)?;
        Ok(mse_flat(&self.layer_sizes, &self.weights, data))
    }

    pub fn gradient(&self, data: &[Sample]) -> Result<Vec<f64>> {
        self.check_data(data)?;
        Ok(gradient_flat(&self.layer_sizes, &self.weights, data))
    }

    fn check_data(&self, data: &[Sample]) -> Result<()> {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        if self.layer_sizes[0] != data[0].features.len() {
            return Err(Error::Shape(format!(
                "samples have {} features, network expects {}",
                data[0].features.len(),
                self.layer_sizes[0]
            )));
        }
        Ok(())
    }
}

/// Reusable activation buffers.
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

/// Forward pass on unchecked shapes.
pub fn forward_flat(layers: &[usize], w: &[f64], x: &[f64], s: &mut Scratch) -> f64 {
    s.a.clear();
    s.a.extend_from_slice(x);
    let mut off = 0;
    let last = layers.len() - 2;
    for (l, pair) in layers.windows(2).enumerate() {
        let (n_in, n_out) = (pair[0], pair[1]);
        let (mat, bias) = w[off..off + n_in * n_out + n_out].split_at(n_in * n_out);
        s.b.clear();
        for o in 0..n_out {
            let row = &mat[o * n_in..(o + 1) * n_in];
            let z = bias[o] + row.iter().zip(&s.a).map(|(wi, ai)| wi * ai).sum::<f64>();
            s.b.push(if l == last { z } else { z.tanh() });
        }
        std::mem::swap(&mut s.a, &mut s.b);
        off += n_in * n_out + n_out;
    }
    s.a[0]
}

pub fn mse_flat(layers: &[usize], w: &[f64], data: &[Sample]) -> f64 {
    let mut s = Scratch::default();
    let sum: f64 = data
        .iter()
        .map(|d| {
            let r = forward_flat(layers, w, &d.features, &mut s) - d.target;
            r * r
        })
        .sum();
    sum / data.len() as f64
}

/// Reverse-mode gradient of [`mse_flat`] with respect to `w`.
pub fn gradient_flat(layers: &[usize], w: &[f64], data: &[Sample]) -> Vec<f64> {
    let n_layers = layers.len() - 1;
    let mut offsets = Vec::with_capacity(n_layers);
    let mut off = 0;
    for pair in layers.windows(2) {
        offsets.push(off);
        off += pair[0] * pair[1] + pair[1];
    }
    let mut grad = vec![0.0; w.len()];
    // activations[l] is the input to layer l; activations[n_layers] the output
    let mut acts: Vec<Vec<f64>> = layers.iter().map(|&n| vec![0.0; n]).collect();
    let mut delta: Vec<f64> = Vec::new();
    let mut next_delta: Vec<f64> = Vec::new();
    let scale = 2.0 / data.len() as f64;

    for sample in data {
        acts[0].copy_from_slice(&sample.features);
        for l in 0..n_layers {
            let (n_in, n_out) = (layers[l], layers[l + 1]);
            let (mat, bias) = w[offsets[l]..offsets[l] + n_in * n_out + n_out].split_at(n_in * n_out);
            let (head, tail) = acts.split_at_mut(l + 1);
            let (input, output) = (&head[l], &mut tail[0]);
            for o in 0..n_out {
                let z = bias[o]
                    + mat[o * n_in..(o + 1) * n_in].iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                output[o] = if l + 1 == n_layers { z } else { z.tanh() };
            }
        }
        delta.clear();
        delta.push(scale * (acts[n_layers][0] - sample.target));
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (layers[l], layers[l + 1]);
            let base = offsets[l];
            let input = &acts[l];
            for o in 0..n_out {
                let d = delta[o];
                let row = &mut grad[base + o * n_in..base + (o + 1) * n_in];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
                grad[base + n_in * n_out + o] += d;
            }
            if l > 0 {
                next_delta.clear();
                for i in 0..n_in {
                    let back: f64 = (0..n_out).map(|o| w[base + o * n_in + i] * delta[o]).sum();
                    // input of layer l is a tanh output
                    next_delta.push(back * (1.0 - input[i] * input[i]));
                }
                std::mem::swap(&mut delta, &mut next_delta);
            }
        }
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(f: [f64; 4], t: f64) -> Sample {
        Sample { features: f, target: t }
    }

    /// Evaluates the network one unit at a time straight from the flat
    /// layout description, with no buffers shared with `forward_flat`.
    fn oracle_forward(layers: &[usize], w: &[f64], x: &[f64]) -> f64 {
        let mut input = x.to_vec();
        let mut off = 0;
        for l in 0..layers.len() - 1 {
            let (n_in, n_out) = (layers[l], layers[l + 1]);
            let mut out = Vec::new();
            for o in 0..n_out {
                let mut z = w[off + n_in * n_out + o];
                for i in 0..n_in {
                    z += w[off + o * n_in + i] * input[i];
                }
                out.push(if l == layers.len() - 2 { z } else { z.tanh() });
            }
            off += n_in * n_out + n_out;
            input = out;
        }
        input[0]
    }

    fn random_setup(rng: &mut ChaCha8Rng, layers: &[usize], n: usize) -> (MlpModel, Vec<Sample>) {
        let w = (0..n_params(layers)).map(|_| rng.random_range(-1.0..1.0)).collect();
        let model = MlpModel::from_weights(layers, w).unwrap();
        let data = (0..n)
            .map(|_| {
                let f = [0; 4].map(|_| rng.random_range(-1.0..1.0));
                sample(f, rng.random_range(-1.0..1.0))
            })
            .collect();
        (model, data)
    }

    #[test]
    fn parameter_count() {
        assert_eq!(n_params(&DEFAULT_LAYERS), 97);
        assert_eq!(MlpModel::zeros(&DEFAULT_LAYERS).unwrap().weights().len(), 97);
        assert!(MlpModel::from_weights(&DEFAULT_LAYERS, vec![0.0; 96]).is_err());
        assert!(MlpModel::from_weights(&[1, 1, 1], vec![0.0, 0.0, f64::NAN, 0.0]).is_err());
        assert!(MlpModel::zeros(&[4, 16, 2]).is_err());
    }

    #[test]
    fn zero_model_outputs_zero() {
        let m = MlpModel::zeros(&DEFAULT_LAYERS).unwrap();
        assert_eq!(m.forward(&[0.3, -2.0, 5.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn single_path_composition() {
        // hidden weight, hidden bias, output weight, output bias
        let m = MlpModel::from_weights(&[1, 1, 1], vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let y = m.forward(&[0.5]).unwrap();
        assert!((y - 0.462_117_157_26).abs() < 1e-11);
    }

    #[test]
    fn shape_mismatch() {
        let m = MlpModel::zeros(&DEFAULT_LAYERS).unwrap();
        assert!(matches!(m.forward(&[1.0, 2.0]), Err(Error::Shape(_))));
        assert!(matches!(m.mse_cost(&[]), Err(Error::EmptyData)));
        assert!(matches!(m.gradient(&[]), Err(Error::EmptyData)));
    }

    #[test]
    fn forward_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for layers in [&[4, 16, 1][..], &[4, 3, 5, 1], &[4, 1]] {
            let (m, data) = random_setup(&mut rng, layers, 10);
            for s in &data {
                let want = oracle_forward(layers, m.weights(), &s.features);
                assert!((m.forward(&s.features).unwrap() - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cost_identities() {
        let zero = MlpModel::zeros(&DEFAULT_LAYERS).unwrap();
        let data = vec![sample([0.1; 4], -1.0), sample([0.2; 4], 1.0)];
        assert_eq!(zero.mse_cost(&data).unwrap(), 1.0);
        let exact = vec![sample([0.1; 4], 0.0), sample([0.2; 4], 0.0)];
        assert_eq!(zero.mse_cost(&exact).unwrap(), 0.0);
        assert!(zero.gradient(&exact).unwrap().iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn cost_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (m, data) = random_setup(&mut rng, &DEFAULT_LAYERS, 25);
        let mut sum = 0.0;
        for s in &data {
            sum += (oracle_forward(&DEFAULT_LAYERS, m.weights(), &s.features) - s.target).powi(2);
        }
        let want = sum / data.len() as f64;
        assert!((m.mse_cost(&data).unwrap() - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn duplicated_data_gives_same_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (m, data) = random_setup(&mut rng, &DEFAULT_LAYERS, 8);
        let doubled: Vec<Sample> = data.iter().chain(&data).copied().collect();
        let (g1, g2) = (m.gradient(&data).unwrap(), m.gradient(&doubled).unwrap());
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-3));
        }
    }

    fn finite_difference(layers: &[usize], w: &[f64], data: &[Sample], h: f64) -> Vec<f64> {
        let mut probe = w.to_vec();
        (0..w.len())
            .map(|i| {
                probe[i] = w[i] + h;
                let up = mse_flat(layers, &probe, data);
                probe[i] = w[i] - h;
                let down = mse_flat(layers, &probe, data);
                probe[i] = w[i];
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn gradient_matches_finite_differences(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (m, data) = random_setup(&mut rng, &DEFAULT_LAYERS, 12);
            let g = m.gradient(&data).unwrap();
            let fd = finite_difference(&DEFAULT_LAYERS, m.weights(), &data, 1e-5);
            for (a, b) in g.iter().zip(&fd) {
                // relative error, with an absolute floor for vanishing coordinates
                let err = (a - b).abs() / a.abs().max(b.abs()).max(1e-4);
                prop_assert!(err < 1e-5, "analytic {a} vs fd {b}");
            }
        }

        #[test]
        fn flat_vector_round_trips(ws in prop::collection::vec(-5.0..5.0f64, 97)) {
            let m = MlpModel::from_weights(&DEFAULT_LAYERS, ws.clone()).unwrap();
            let bits: Vec<u64> = m.clone().into_weights().iter().map(|w| w.to_bits()).collect();
            prop_assert_eq!(bits, ws.iter().map(|w| w.to_bits()).collect::<Vec<_>>());
        }
    }
}
