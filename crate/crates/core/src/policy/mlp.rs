//! Fully connected tanh networks over a borrowed slice of a flat parameter
//! vector, with a reverse-mode backward pass.
//!
//! Each layer stores its weight matrix row-major (`out x in`) followed by its
//! bias. Hidden layers use `tanh`; the output layer is linear.

use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    sizes: Vec<usize>,
}

/// Activations kept from the forward pass; `acts[0]` is the input.
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next_delta: Vec<f64>,
}

impl Mlp {
    pub fn new(input: usize, hidden: &[usize], output: usize) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Mlp { sizes }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least input and output")
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Orthogonal initialisation with gain `hidden_gain` on hidden layers and
    /// `output_gain` on the last layer; biases start at zero.
    pub fn init(&self, params: &mut [f64], hidden_gain: f64, output_gain: f64, rng: &mut impl Rng) {
        debug_assert_eq!(params.len(), self.param_count());
        let layers = self.sizes.len() - 1;
        let mut offset = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let gain = if l + 1 == layers { output_gain } else { hidden_gain };
            let weights = &mut params[offset..offset + fan_in * fan_out];
            if gain == 0.0 {
                weights.fill(0.0);
            } else {
                orthogonal(weights, fan_out, fan_in, gain, rng);
            }
            offset += fan_in * fan_out;
            params[offset..offset + fan_out].fill(0.0);
            offset += fan_out;
        }
    }

    pub fn forward<'c>(&self, params: &[f64], input: &[f64], cache: &'c mut MlpCache) -> &'c [f64] {
        debug_assert_eq!(input.len(), self.sizes[0]);
        let layers = self.sizes.len() - 1;
        cache.acts.resize_with(self.sizes.len(), Vec::new);
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(input);
        let mut offset = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let weights = &params[offset..offset + fan_in * fan_out];
            let bias = &params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let (prev, rest) = cache.acts.split_at_mut(l + 1);
            let x = &prev[l];
            let out = &mut rest[0];
            out.clear();
            for (row, b) in weights.chunks_exact(fan_in).zip(bias) {
                let z = b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                out.push(if l + 1 < layers { z.tanh() } else { z });
            }
        }
        &cache.acts[layers]
    }

    /// Accumulates `d(output . grad_out)/d(params)` into `grad`.
    /// `cache` must hold the forward pass for the same `params` and input.
    pub fn backward(&self, params: &[f64], cache: &mut MlpCache, grad_out: &[f64], grad: &mut [f64]) {
        let layers = self.sizes.len() - 1;
        debug_assert_eq!(grad_out.len(), self.output_dim());
        let mut offsets = Vec::with_capacity(layers);
        let mut offset = 0;
        for w in self.sizes.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }
        let MlpCache { acts, delta, next_delta } = cache;
        delta.clear();
        delta.extend_from_slice(grad_out);
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let x = &acts[l];
            {
                let (gw, gb) = grad[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
                for (j, d) in delta.iter().enumerate() {
                    gb[j] += d;
                    if *d != 0.0 {
                        for (g, v) in gw[j * fan_in..(j + 1) * fan_in].iter_mut().zip(x) {
                            *g += d * v;
                        }
                    }
                }
            }
            if l == 0 {
                break;
            }
            let weights = &params[off..off + fan_in * fan_out];
            next_delta.clear();
            next_delta.resize(fan_in, 0.0);
            for (j, d) in delta.iter().enumerate() {
                if *d != 0.0 {
                    for (n, w) in next_delta.iter_mut().zip(&weights[j * fan_in..(j + 1) * fan_in]) {
                        *n += d * w;
                    }
                }
            }
            // through tanh of the layer below: d tanh(z) = 1 - tanh(z)^2
            for (n, a) in next_delta.iter_mut().zip(x) {
                *n *= 1.0 - a * a;
            }
            std::mem::swap(delta, next_delta);
        }
    }
}

/// Fills `out` (rows x cols, row-major) with a scaled semi-orthogonal matrix.
fn orthogonal(out: &mut [f64], rows: usize, cols: usize, gain: f64, rng: &mut impl Rng) {
    // orthonormalise along the shorter side
    let (n, m, transpose) = if rows <= cols { (rows, cols, false) } else { (cols, rows, true) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= dot * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            let v = if transpose { basis[c][r] } else { basis[r][c] };
            out[r * cols + c] = gain * v;
        }
    }
}
