//! Fully connected network with ReLU hidden layers and a linear output.
//!
//! Parameters live in one flat vector, layer by layer, each layer storing
//! its `out × in` weights row-major followed by its `out` biases.

use rand::Rng;

use crate::error::{Error, Result};
use crate::SimRng;

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    pub params: Vec<f64>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Clone, Debug)]
pub struct Cache {
    /// Input followed by every layer's post-activation output.
    activations: Vec<Vec<f64>>,
}

impl Cache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("non-empty cache")
    }
}

impl Mlp {
    /// All-zero network with the given layer widths.
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|s| *s > 0), "at least input and output widths");
        let count = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Self { sizes: sizes.to_vec(), params: vec![0.0; count] }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot(sizes: &[usize], rng: &mut SimRng) -> Self {
        let mut net = Self::zeros(sizes);
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = rng.gen_range(-limit..=limit);
            }
            offset += fan_in * fan_out + fan_out;
        }
        net
    }

    /// `input → hidden → hidden → output`.
    pub fn standard(input: usize, hidden: usize, output: usize, rng: &mut SimRng) -> Self {
        Self::glorot(&[input, hidden, hidden, output], rng)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.sizes.last().expect("sizes")
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Rebuilds a network from widths and flat parameters.
    pub fn from_parts(sizes: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Usage("network needs positive input and output widths".into()));
        }
        let expected: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        if params.len() != expected {
            return Err(Error::Usage(format!("expected {expected} parameters, got {}", params.len())));
        }
        Ok(Self { sizes, params })
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(input)?.activations.pop().expect("output"))
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<Cache> {
        if input.len() != self.sizes[0] {
            return Err(Error::Usage(format!(
                "network expects {} inputs, got {}",
                self.sizes[0],
                input.len()
            )));
        }
        let layers = self.sizes.len() - 1;
        let mut activations = Vec::with_capacity(layers + 1);
        activations.push(input.to_vec());
        let mut offset = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let biases = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let x = &activations[l];
            let mut y = biases.to_vec();
            for (o, yo) in y.iter_mut().enumerate() {
                let row = &weights[o * n_in..(o + 1) * n_in];
                *yo += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            }
            if l + 1 < layers {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            activations.push(y);
            offset += n_in * n_out + n_out;
        }
        Ok(Cache { activations })
    }

    /// Adds the parameter gradient of `<grad_out, output>` to `grads`.
    pub fn backward(&self, cache: &Cache, grad_out: &[f64], grads: &mut [f64]) {
        assert_eq!(grads.len(), self.params.len(), "gradient buffer size");
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut offset = 0;
        for w in self.sizes.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }
        let mut delta = grad_out.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            if l + 1 < layers {
                // ReLU: the cached output is zero exactly where the unit is off.
                for (d, a) in delta.iter_mut().zip(&cache.activations[l + 1]) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let x = &cache.activations[l];
            let off = offsets[l];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grads[off + o * n_in..off + (o + 1) * n_in];
                for (g, xi) in row.iter_mut().zip(x) {
                    *g += d * xi;
                }
                grads[off + n_in * n_out + o] += d;
            }
            if l > 0 {
                let weights = &self.params[off..off + n_in * n_out];
                let mut next = vec![0.0; n_in];
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    for (n, w) in next.iter_mut().zip(&weights[o * n_in..(o + 1) * n_in]) {
                        *n += d * w;
                    }
                }
                delta = next;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::zeros(&[3, 4, 4, 2]);
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_path_forward() {
        // Each layer: weight 2, bias 1. Input 3 → 7 → 15 → 31.
        let net = Mlp::from_parts(vec![1, 1, 1, 1], vec![2.0, 1.0, 2.0, 1.0, 2.0, 1.0]).unwrap();
        assert_eq!(net.forward(&[3.0]).unwrap(), vec![31.0]);
        // A negative pre-activation is clamped: -3·2+1 = -5 → 0 → 1 → 3.
        assert_eq!(net.forward(&[-3.0]).unwrap(), vec![3.0]);
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let net = Mlp::zeros(&[2, 3, 1]);
        assert!(matches!(net.forward(&[1.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        let mut rng = SimRng::seed_from_u64(0);
        let net = Mlp::standard(3, 5, 2, &mut rng);
        let cache = net.forward_cached(&[0.1, 0.2, 0.3]).unwrap();
        let mut g = vec![0.0; net.param_count()];
        net.backward(&cache, &[0.0, 0.0], &mut g);
        assert!(g.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn dead_unit_passes_no_gradient() {
        // Hidden unit pre-activation: -1·1 + 0 < 0, so its incoming weight gets nothing.
        let net = Mlp::from_parts(vec![1, 1, 1], vec![-1.0, 0.0, 1.0, 0.0]).unwrap();
        let cache = net.forward_cached(&[1.0]).unwrap();
        let mut g = vec![0.0; 4];
        net.backward(&cache, &[1.0], &mut g);
        assert_eq!(&g[..2], &[0.0, 0.0]);
        assert_eq!(g[3], 1.0);
    }

    #[test]
    fn glorot_respects_bounds() {
        let mut rng = SimRng::seed_from_u64(4);
        let net = Mlp::glorot(&[10, 6], &mut rng);
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(net.params[..60].iter().all(|w| w.abs() <= limit));
        assert!(net.params[60..].iter().all(|b| *b == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        use rand::Rng;
        let mut rng = SimRng::seed_from_u64(11);
        for trial in 0..20 {
            let input = rng.gen_range(1..5);
            let hidden = rng.gen_range(2..7);
            let output = rng.gen_range(1..4);
            let mut net = Mlp::glorot(&[input, hidden, hidden, output], &mut rng);
            for p in net.params.iter_mut() {
                *p += rng.gen_range(-0.1..0.1);
            }
            let x: Vec<f64> = (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g_out: Vec<f64> = (0..output).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let objective = |n: &Mlp| n.forward(&x).unwrap().iter().zip(&g_out).map(|(a, b)| a * b).sum::<f64>();
            let mut analytic = vec![0.0; net.param_count()];
            net.backward(&net.forward_cached(&x).unwrap(), &g_out, &mut analytic);
            let h = 1e-6;
            for i in 0..net.param_count() {
                let base = net.params[i];
                net.params[i] = base + h;
                let up = objective(&net);
                net.params[i] = base - h;
                let down = objective(&net);
                net.params[i] = base;
                let numeric = (up - down) / (2.0 * h);
                let scale = analytic[i].abs().max(numeric.abs()).max(1e-2);
                assert!(
                    (analytic[i] - numeric).abs() / scale < 1e-4,
                    "trial {trial} param {i}: {} vs {numeric}",
                    analytic[i]
                );
            }
        }
    }
}
