//! Fully connected Q-network with ReLU hidden layers and a linear head.

use rand::Rng;

use crate::error::{Error, Result};
use crate::state::STATE_DIM;

/// Hidden layer widths.
pub const HIDDEN: [usize; 2] = [10, 5];

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major, `outputs × inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.biases
                .iter()
                .zip(self.weights.chunks_exact(self.inputs))
                .map(|(b, row)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()),
        );
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    layers: Vec<Dense>,
}

/// Per-layer outputs from one forward pass; `post[0]` is the input.
#[derive(Debug, Clone, Default)]
struct Trace {
    post: Vec<Vec<f64>>,
}

impl QNetwork {
    /// All-zero network with the given layer widths.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::usage(format!("invalid layer dimensions {dims:?}")));
        }
        Ok(Self {
            layers: dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        })
    }

    /// `STATE_DIM → 10 → 5 → actions`, weights uniform in
    /// `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn new<R: Rng + ?Sized>(actions: usize, rng: &mut R) -> Self {
        let mut net = Self::zeros(&Self::standard_dims(actions)).expect("nonzero dims");
        for layer in &mut net.layers {
            let bound = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-bound..bound);
            }
        }
        net
    }

    pub fn standard_dims(actions: usize) -> Vec<usize> {
        vec![STATE_DIM, HIDDEN[0], HIDDEN[1], actions]
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].inputs];
        d.extend(self.layers.iter().map(|l| l.outputs));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Flattened parameters: per layer, weights (row-major) then biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::usage(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut rest = params;
        for l in &mut self.layers {
            let (w, r) = rest.split_at(l.weights.len());
            l.weights.copy_from_slice(w);
            let (b, r) = r.split_at(l.biases.len());
            l.biases.copy_from_slice(b);
            rest = r;
        }
        Ok(())
    }

    fn check_input(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.input_dim() {
            return Err(Error::usage(format!(
                "state has {} entries, network expects {}",
                state.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.check_input(state)?;
        Ok(self.trace(state).post.pop().expect("nonempty trace"))
    }

    fn trace(&self, state: &[f64]) -> Trace {
        let mut post = Vec::with_capacity(self.layers.len() + 1);
        post.push(state.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.forward_into(&post[i], &mut out);
            if i != last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            post.push(out);
        }
        Trace { post }
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    /// Gradient of `(target - Q(state, action))²` with respect to every
    /// parameter.
    pub fn backward(&self, state: &[f64], action: usize, target: f64) -> Result<Gradients> {
        let mut grads = self.zero_gradients();
        self.accumulate_gradient(state, action, target, &mut grads)?;
        Ok(grads)
    }

    /// Adds the squared-error gradient for one sample into `grads`; returns
    /// `Q(state, action)`.
    pub fn accumulate_gradient(
        &self,
        state: &[f64],
        action: usize,
        target: f64,
        grads: &mut Gradients,
    ) -> Result<f64> {
        self.check_input(state)?;
        if action >= self.output_dim() {
            return Err(Error::usage(format!(
                "action {action} outside {} outputs",
                self.output_dim()
            )));
        }
        let trace = self.trace(state);
        let q = trace.post[self.layers.len()][action];

        // d/dQ (target - Q)² = 2 (Q - target), only on the chosen output
        let mut delta = vec![0.0; self.output_dim()];
        delta[action] = 2.0 * (q - target);

        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &trace.post[i];
            let g = &mut grads.layers[i];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.biases[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, &x) in row.iter_mut().zip(input) {
                    *gw += d * x;
                }
            }
            if i == 0 {
                break;
            }
            // back through the weights, then the ReLU of the layer below
            let mut upstream = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (u, &w) in upstream.iter_mut().zip(row) {
                    *u += d * w;
                }
            }
            for (u, &a) in upstream.iter_mut().zip(input) {
                if a <= 0.0 {
                    *u = 0.0;
                }
            }
            delta = upstream;
        }
        Ok(q)
    }

    /// `θ ← θ − rate · scale · g`.
    pub fn apply_gradients(&mut self, grads: &Gradients, rate: f64, scale: f64) {
        let step = rate * scale;
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in l.weights.iter_mut().zip(&g.weights) {
                *w -= step * gw;
            }
            for (b, gb) in l.biases.iter_mut().zip(&g.biases) {
                *b -= step * gb;
            }
        }
    }
}

/// Same shape as the network it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layers: Vec<Dense>,
}

impl Gradients {
    pub fn reset(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.biases.fill(0.0);
        }
    }

    /// Flattened in the same order as [`QNetwork::parameters`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_shape_has_393_parameters() {
        let net = QNetwork::new(3, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(net.dims(), vec![31, 10, 5, 3]);
        assert_eq!(net.param_count(), 393);
        assert_eq!(net.forward(&[0.3; 31]).unwrap().len(), 3);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = QNetwork::zeros(&[31, 10, 5, 3]).unwrap();
        assert_eq!(net.forward(&[1.0; 31]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn wrong_input_width_is_rejected() {
        let net = QNetwork::zeros(&[31, 10, 5, 3]).unwrap();
        assert!(net.forward(&[0.0; 30]).is_err());
        assert!(net.backward(&[0.0; 32], 0, 1.0).is_err());
        assert!(net.backward(&[0.0; 31], 3, 1.0).is_err());
    }

    #[test]
    fn hand_built_single_path() {
        // x[4] → h1[2] (w=2, b=0.5) → h2[1] (w=-1, b=3) → q[1] (w=0.5, b=0.1)
        let mut net = QNetwork::zeros(&[31, 10, 5, 3]).unwrap();
        let l = net.layers_mut();
        l[0].weights[2 * 31 + 4] = 2.0;
        l[0].biases[2] = 0.5;
        l[1].weights[10 + 2] = -1.0;
        l[1].biases[1] = 3.0;
        l[2].weights[5 + 1] = 0.5;
        l[2].biases[1] = 0.1;
        let mut x = [0.0; 31];
        x[4] = 1.0;
        // h1 = relu(2 + 0.5) = 2.5; h2 = relu(-2.5 + 3) = 0.5; q1 = 0.25 + 0.1
        let q = net.forward(&x).unwrap();
        assert!((q[1] - 0.35).abs() < 1e-12);
        assert_eq!(q[0], 0.0);
        assert_eq!(q[2], 0.0);
        // drive h2 negative: relu clips, q1 = bias only
        x[4] = 2.0;
        let q = net.forward(&x).unwrap();
        assert!((q[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let net = QNetwork::new(3, &mut ChaCha8Rng::seed_from_u64(3));
        let x = [0.2; 31];
        let q = net.forward(&x).unwrap();
        let g = net.backward(&x, 1, q[1]).unwrap();
        assert!(g.to_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unselected_output_rows_get_no_gradient() {
        let net = QNetwork::new(3, &mut ChaCha8Rng::seed_from_u64(4));
        let g = net.backward(&[0.5; 31], 2, 10.0).unwrap();
        let head = &g.layers()[2];
        for o in [0, 1] {
            assert!(head.weights[o * 5..(o + 1) * 5].iter().all(|&v| v == 0.0));
            assert_eq!(head.biases[o], 0.0);
        }
        assert!(head.biases[2] != 0.0);
    }

    #[test]
    fn parameters_round_trip() {
        let net = QNetwork::new(2, &mut ChaCha8Rng::seed_from_u64(5));
        let mut other = QNetwork::zeros(&net.dims()).unwrap();
        other.set_parameters(&net.parameters()).unwrap();
        assert_eq!(net, other);
        assert!(other.set_parameters(&[0.0; 3]).is_err());
    }

    #[test]
    fn finite_difference_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for draw in 0..10 {
            let net = QNetwork::new(3, &mut rng);
            let x: Vec<f64> = (0..31).map(|_| rng.random_range(-1.0..1.0)).collect();
            let action = draw % 3;
            let target = rng.random_range(-1.0..1.0);
            let analytic = net.backward(&x, action, target).unwrap().to_flat();
            let base = net.parameters();
            let loss = |p: &[f64]| {
                let mut n = net.clone();
                n.set_parameters(p).unwrap();
                let q = n.forward(&x).unwrap()[action];
                (target - q).powi(2)
            };
            let h = 1e-5;
            for k in 0..base.len() {
                let mut plus = base.clone();
                plus[k] += h;
                let mut minus = base.clone();
                minus[k] -= h;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let denom = analytic[k].abs().max(numeric.abs()).max(1e-6);
                assert!(
                    (analytic[k] - numeric).abs() / denom < 1e-4,
                    "param {k}: {} vs {numeric}",
                    analytic[k]
                );
            }
        }
    }
}
