use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{input_err, PrismError, Result};

/// Shape of a feedforward network: an input affine+rectifier layer, optional
/// plain hidden layers, optional residual blocks, and a linear output head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Plain affine+rectifier layers after the input layer.
    #[serde(default)]
    pub num_plain_layers: usize,
    pub num_residual_blocks: usize,
    pub output_dim: usize,
    pub dropout_rate: f64,
}

impl NetSpec {
    /// Reward-model defaults: hidden 256, two residual blocks, dropout 0.3.
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        NetSpec {
            input_dim,
            hidden_dim: 256,
            num_plain_layers: 0,
            num_residual_blocks: 2,
            output_dim,
            dropout_rate: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.output_dim == 0 {
            return input_err("network dimensions must be >= 1");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return input_err(format!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        2 + self.num_plain_layers + 2 * self.num_residual_blocks
    }
}

/// One affine map `y = x·W + b` with `W` stored as (in × out).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weights: Matrix::zeros(inputs, outputs),
            bias: vec![0.0; outputs],
        }
    }

    fn kaiming<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, (2.0 / inputs as f64).sqrt()).expect("valid std");
        let data = (0..inputs * outputs).map(|_| normal.sample(rng)).collect();
        Dense {
            weights: Matrix::from_vec(inputs, outputs, data).expect("finite init"),
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &Matrix) -> Matrix {
        let mut z = x.matmul(&self.weights);
        z.add_row_broadcast(&self.bias);
        z
    }

    pub fn num_parameters(&self) -> usize {
        self.weights.as_slice().len() + self.bias.len()
    }
}

/// Parameter gradients, laid out exactly like [`Network::layers`].
pub type Gradients = Vec<Dense>;

#[derive(Debug, Clone)]
struct LayerCache {
    input: Matrix,
    pre_activation: Matrix,
    mask: Option<Matrix>,
}

#[derive(Debug, Clone)]
pub struct Network {
    spec: NetSpec,
    layers: Vec<Dense>,
    cache: Option<Vec<LayerCache>>,
}

fn relu_inplace(m: &mut Matrix) {
    m.map_inplace(|v| if v > 0.0 { v } else { 0.0 });
}

impl Network {
    pub fn new<R: Rng + ?Sized>(spec: NetSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let h = spec.hidden_dim;
        let mut layers = vec![Dense::kaiming(spec.input_dim, h, rng)];
        for _ in 0..spec.num_plain_layers + 2 * spec.num_residual_blocks {
            layers.push(Dense::kaiming(h, h, rng));
        }
        layers.push(Dense::kaiming(h, spec.output_dim, rng));
        Ok(Network {
            spec,
            layers,
            cache: None,
        })
    }

    /// All weights and biases zero.
    pub fn zeros(spec: NetSpec) -> Result<Self> {
        spec.validate()?;
        let h = spec.hidden_dim;
        let mut layers = vec![Dense::zeros(spec.input_dim, h)];
        for _ in 0..spec.num_plain_layers + 2 * spec.num_residual_blocks {
            layers.push(Dense::zeros(h, h));
        }
        layers.push(Dense::zeros(h, spec.output_dim));
        Ok(Network {
            spec,
            layers,
            cache: None,
        })
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.cache = None;
        &mut self.layers
    }

    pub fn head_mut(&mut self) -> &mut Dense {
        self.cache = None;
        self.layers.last_mut().expect("network has a head")
    }

    /// Indices of the two layers inside residual block `b`.
    pub fn residual_layer_indices(&self, block: usize) -> (usize, usize) {
        let first = 1 + self.spec.num_plain_layers + 2 * block;
        (first, first + 1)
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(Dense::num_parameters).sum()
    }

    /// Parameters flattened layer by layer (weights row-major, then bias).
    pub fn parameters_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_parameters());
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_parameters_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_parameters() {
            return input_err("parameter count mismatch");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PrismError::Numeric("non-finite parameter".into()));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let n = l.weights.as_slice().len();
            l.weights
                .as_mut_slice()
                .copy_from_slice(&values[offset..offset + n]);
            offset += n;
            let m = l.bias.len();
            l.bias.copy_from_slice(&values[offset..offset + m]);
            offset += m;
        }
        self.cache = None;
        Ok(())
    }

    fn check_input(&self, input: &Matrix) -> Result<()> {
        if input.cols() != self.spec.input_dim {
            return input_err(format!(
                "network expects {} input columns, got {}",
                self.spec.input_dim,
                input.cols()
            ));
        }
        Ok(())
    }

    fn run<R: Rng + ?Sized>(
        &self,
        input: &Matrix,
        train: bool,
        rng: Option<&mut R>,
        mut cache: Option<&mut Vec<LayerCache>>,
    ) -> Matrix {
        let p = self.spec.dropout_rate;
        let use_dropout = train && p > 0.0;
        let keep_scale = 1.0 / (1.0 - p);
        let mut rng = rng;
        let mut dropout_mask = |rows: usize, cols: usize| -> Option<Matrix> {
            if !use_dropout {
                return None;
            }
            let r = rng.as_deref_mut().expect("train mode requires an rng");
            let data = (0..rows * cols)
                .map(|_| if r.gen::<f64>() < p { 0.0 } else { keep_scale })
                .collect();
            Some(Matrix::from_vec(rows, cols, data).expect("finite mask"))
        };

        let mut record = |input: &Matrix, pre: &Matrix, mask: &Option<Matrix>| {
            if let Some(c) = cache.as_deref_mut() {
                c.push(LayerCache {
                    input: input.clone(),
                    pre_activation: pre.clone(),
                    mask: mask.clone(),
                });
            }
        };

        let apply_mask = |m: &mut Matrix, mask: &Option<Matrix>| {
            if let Some(mask) = mask {
                for (v, k) in m.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                    *v *= k;
                }
            }
        };

        let n_hidden = 1 + self.spec.num_plain_layers;
        let mut h = input.clone();
        for layer in &self.layers[..n_hidden] {
            let z = layer.apply(&h);
            let mut a = z.clone();
            relu_inplace(&mut a);
            let mask = dropout_mask(a.rows(), a.cols());
            apply_mask(&mut a, &mask);
            record(&h, &z, &mask);
            h = a;
        }
        for b in 0..self.spec.num_residual_blocks {
            let first = &self.layers[n_hidden + 2 * b];
            let second = &self.layers[n_hidden + 2 * b + 1];
            let z1 = first.apply(&h);
            let mut u = z1.clone();
            relu_inplace(&mut u);
            let mask = dropout_mask(u.rows(), u.cols());
            apply_mask(&mut u, &mask);
            record(&h, &z1, &mask);
            let z2 = second.apply(&u);
            let mut correction = z2.clone();
            relu_inplace(&mut correction);
            record(&u, &z2, &None);
            h.add_assign(&correction);
        }
        let head = self.layers.last().expect("head");
        let out = head.apply(&h);
        record(&h, &out, &None);
        out
    }

    /// Forward pass that retains caches for [`Network::backward`].
    ///
    /// Dropout is active only when `train` is set, with inverted scaling so
    /// evaluation needs no correction.
    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        input: &Matrix,
        train: bool,
        rng: &mut R,
    ) -> Result<Matrix> {
        self.check_input(input)?;
        let mut cache = Vec::with_capacity(self.layers.len());
        let out = self.run(input, train, Some(rng), Some(&mut cache));
        self.cache = Some(cache);
        if !out.is_finite() {
            return Err(PrismError::Numeric("non-finite network output".into()));
        }
        Ok(out)
    }

    /// Smallest `|z|` over every ReLU pre-activation of the last
    /// [`Network::forward`]. Finite-difference checks need this to exceed the
    /// perturbation's effect, otherwise the probe straddles a kink.
    pub fn relu_margin(&self) -> Option<f64> {
        let cache = self.cache.as_ref()?;
        let relu_layers = cache.len().saturating_sub(1);
        cache[..relu_layers]
            .iter()
            .flat_map(|c| c.pre_activation.as_slice())
            .map(|z| z.abs())
            .reduce(f64::min)
    }

    /// Evaluation-mode forward pass; no caches, no dropout, `&self` only.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        self.check_input(input)?;
        let out = self.run::<rand::rngs::mock::StepRng>(input, false, None, None);
        if !out.is_finite() {
            return Err(PrismError::Numeric("non-finite network output".into()));
        }
        Ok(out)
    }

    /// Gradients of `Σ upstream ⊙ output` with respect to every parameter,
    /// using the caches of the most recent [`Network::forward`].
    pub fn backward(&self, upstream: &Matrix) -> Result<Gradients> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| PrismError::State("backward called without a cached forward pass".into()))?;
        let batch = cache[0].input.rows();
        if upstream.shape() != (batch, self.spec.output_dim) {
            return input_err(format!(
                "upstream gradient shape {:?} does not match output ({}, {})",
                upstream.shape(),
                batch,
                self.spec.output_dim
            ));
        }
        let mut grads: Vec<Option<Dense>> = vec![None; self.layers.len()];
        let last = self.layers.len() - 1;

        let grad_affine = |idx: usize, dz: &Matrix| -> Dense {
            Dense {
                weights: cache[idx].input.t_matmul(dz),
                bias: dz.column_sums(),
            }
        };
        let relu_back = |dz: &mut Matrix, pre: &Matrix| {
            for (g, z) in dz.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                if *z <= 0.0 {
                    *g = 0.0;
                }
            }
        };
        let mask_back = |g: &mut Matrix, mask: &Option<Matrix>| {
            if let Some(mask) = mask {
                for (v, k) in g.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                    *v *= k;
                }
            }
        };

        grads[last] = Some(grad_affine(last, upstream));
        let mut dh = upstream.matmul_t(&self.layers[last].weights);

        let n_hidden = 1 + self.spec.num_plain_layers;
        for b in (0..self.spec.num_residual_blocks).rev() {
            let i1 = n_hidden + 2 * b;
            let i2 = i1 + 1;
            let mut dz2 = dh.clone();
            relu_back(&mut dz2, &cache[i2].pre_activation);
            grads[i2] = Some(grad_affine(i2, &dz2));
            let mut du = dz2.matmul_t(&self.layers[i2].weights);
            mask_back(&mut du, &cache[i1].mask);
            relu_back(&mut du, &cache[i1].pre_activation);
            grads[i1] = Some(grad_affine(i1, &du));
            dh.add_assign(&du.matmul_t(&self.layers[i1].weights));
        }
        for idx in (0..n_hidden).rev() {
            let mut dz = dh;
            mask_back(&mut dz, &cache[idx].mask);
            relu_back(&mut dz, &cache[idx].pre_activation);
            grads[idx] = Some(grad_affine(idx, &dz));
            dh = if idx > 0 {
                dz.matmul_t(&self.layers[idx].weights)
            } else {
                Matrix::zeros(0, 0)
            };
        }
        Ok(grads.into_iter().map(|g| g.expect("every layer visited")).collect())
    }
}

/// Flattens gradients in the same order as [`Network::parameters_flat`].
pub fn flatten_gradients(grads: &Gradients) -> Vec<f64> {
    let mut out = Vec::new();
    for g in grads {
        out.extend_from_slice(g.weights.as_slice());
        out.extend_from_slice(&g.bias);
    }
    out
}

/// Adds `scale · other` into `acc` layer by layer.
pub fn accumulate_gradients(acc: &mut Gradients, other: &Gradients, scale: f64) {
    for (a, o) in acc.iter_mut().zip(other) {
        for (x, y) in a.weights.as_mut_slice().iter_mut().zip(o.weights.as_slice()) {
            *x += scale * y;
        }
        for (x, y) in a.bias.iter_mut().zip(&o.bias) {
            *x += scale * y;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::rng_from_seed;

    fn spec(blocks: usize) -> NetSpec {
        NetSpec {
            input_dim: 3,
            hidden_dim: 5,
            num_plain_layers: 1,
            num_residual_blocks: blocks,
            output_dim: 2,
            dropout_rate: 0.0,
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Network::zeros(spec(2)).unwrap();
        let x = Matrix::from_rows(&[[1.0, -2.0, 3.0], [0.5, 0.5, 0.5]]).unwrap();
        assert!(net.predict(&x).unwrap().as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn shape_mismatch_is_input_error() {
        let net = Network::zeros(spec(0)).unwrap();
        let x = Matrix::zeros(1, 4);
        assert!(matches!(net.predict(&x), Err(PrismError::Input(_))));
    }

    #[test]
    fn backward_without_forward_is_state_error() {
        let net = Network::zeros(spec(1)).unwrap();
        let g = Matrix::zeros(1, 2);
        assert!(matches!(net.backward(&g), Err(PrismError::State(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = rng_from_seed(3);
        let mut net = Network::new(spec(2), &mut rng).unwrap();
        let x = Matrix::from_rows(&[[0.3, -0.1, 0.7]]).unwrap();
        net.forward(&x, false, &mut rng).unwrap();
        let g = net.backward(&Matrix::zeros(1, 2)).unwrap();
        assert!(flatten_gradients(&g).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn eval_forward_is_bit_identical() {
        let mut rng = rng_from_seed(11);
        let mut s = spec(2);
        s.dropout_rate = 0.3;
        let net = Network::new(s, &mut rng).unwrap();
        let x = Matrix::from_rows(&[[0.3, -0.1, 0.7], [1.0, 2.0, -3.0]]).unwrap();
        let a = net.predict(&x).unwrap();
        let b = net.predict(&x).unwrap();
        assert_eq!(
            a.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn dropout_only_in_train_mode() {
        let mut rng = rng_from_seed(5);
        let mut s = spec(0);
        s.dropout_rate = 0.5;
        let mut net = Network::new(s, &mut rng).unwrap();
        let x = Matrix::from_rows(&[[0.3, -0.1, 0.7]]).unwrap();
        let eval = net.predict(&x).unwrap();
        let eval2 = net.forward(&x, false, &mut rng).unwrap();
        assert_eq!(eval, eval2);
        let differs = (0..20).any(|_| net.forward(&x, true, &mut rng).unwrap() != eval);
        assert!(differs);
    }

    #[test]
    fn flat_parameter_round_trip() {
        let mut rng = rng_from_seed(1);
        let mut net = Network::new(spec(1), &mut rng).unwrap();
        let p = net.parameters_flat();
        let doubled: Vec<f64> = p.iter().map(|v| v * 2.0).collect();
        net.set_parameters_flat(&doubled).unwrap();
        assert_eq!(net.parameters_flat(), doubled);
        assert!(net.set_parameters_flat(&doubled[1..]).is_err());
    }
}
