//! Dense kernels for causal dilated 1-D convolution and the linear head.
//!
//! Activations are stored time-major: `x[t * channels + c]`.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub dilation: usize,
    /// Laid out `[tap][in][out]`; tap `kernel_size - 1` is the current step.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1d {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel_size: usize, dilation: usize) -> Self {
        Conv1d {
            in_channels,
            out_channels,
            kernel_size,
            dilation,
            weight: vec![0.0; kernel_size * in_channels * out_channels],
            bias: vec![0.0; out_channels],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel_size
    }

    fn tap_offset(&self, tap: usize) -> usize {
        (self.kernel_size - 1 - tap) * self.dilation
    }

    pub fn forward(&self, x: &[f64], len: usize) -> Vec<f64> {
        let (ci, co) = (self.in_channels, self.out_channels);
        debug_assert_eq!(x.len(), len * ci);
        let mut y = vec![0.0; len * co];
        for t in 0..len {
            let row = &mut y[t * co..(t + 1) * co];
            row.copy_from_slice(&self.bias);
            for tap in 0..self.kernel_size {
                let off = self.tap_offset(tap);
                if off > t {
                    continue;
                }
                let src = &x[(t - off) * ci..(t - off + 1) * ci];
                let w_tap = &self.weight[tap * ci * co..(tap + 1) * ci * co];
                for (i, &xi) in src.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    let w = &w_tap[i * co..(i + 1) * co];
                    for (r, &wv) in row.iter_mut().zip(w) {
                        *r += xi * wv;
                    }
                }
            }
        }
        y
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to the input.
    pub fn backward(&self, x: &[f64], gy: &[f64], len: usize, grad: &mut Conv1d) -> Vec<f64> {
        let (ci, co) = (self.in_channels, self.out_channels);
        let mut gx = vec![0.0; len * ci];
        for t in 0..len {
            let g_row = &gy[t * co..(t + 1) * co];
            for (b, &g) in grad.bias.iter_mut().zip(g_row) {
                *b += g;
            }
            for tap in 0..self.kernel_size {
                let off = self.tap_offset(tap);
                if off > t {
                    continue;
                }
                let src = (t - off) * ci;
                let base = tap * ci * co;
                for i in 0..ci {
                    let w = &self.weight[base + i * co..base + (i + 1) * co];
                    gx[src + i] += dot(w, g_row);
                    let xi = x[src + i];
                    if xi != 0.0 {
                        let gw = &mut grad.weight[base + i * co..base + (i + 1) * co];
                        for (gwv, &g) in gw.iter_mut().zip(g_row) {
                            *gwv += xi * g;
                        }
                    }
                }
            }
        }
        gx
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub in_features: usize,
    pub out_features: usize,
    /// Laid out `[out][in]`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(in_features: usize, out_features: usize) -> Self {
        Linear {
            in_features,
            out_features,
            weight: vec![0.0; in_features * out_features],
            bias: vec![0.0; out_features],
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.bias
            .iter()
            .enumerate()
            .map(|(o, &b)| b + dot(&self.weight[o * self.in_features..(o + 1) * self.in_features], x))
            .collect()
    }

    pub fn backward(&self, x: &[f64], gy: &[f64], grad: &mut Linear) -> Vec<f64> {
        let n = self.in_features;
        let mut gx = vec![0.0; n];
        for (o, &g) in gy.iter().enumerate() {
            grad.bias[o] += g;
            let w = &self.weight[o * n..(o + 1) * n];
            let gw = &mut grad.weight[o * n..(o + 1) * n];
            for i in 0..n {
                gw[i] += g * x[i];
                gx[i] += g * w[i];
            }
        }
        gx
    }
}

/// Dot product with four independent accumulators.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..n {
        s += a[i] * b[i];
    }
    s
}

pub fn relu_in_place(v: &mut [f64]) {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}
