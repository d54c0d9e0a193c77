//! Tiny feedforward networks with hand-derived gradients.
//!
//! Layers are linear maps plus elementwise tanh, which keeps every Jacobian
//! closed-form. Parameters expose a flat `Vec<f64>` view in a fixed order so
//! finite-difference certification, checkpointing, and SGD all share one
//! representation.

use crate::numerics::{DenseMatrix, DenseVector};
use rand::Rng;

/// Variance squashing bound: emitted variances live in
/// `[exp(-LOG_VAR_BOUND), exp(LOG_VAR_BOUND)] = [1e-4, 1e4]`.
pub const LOG_VAR_BOUND: f64 = 9.210340371976184; // ln(1e4)

/// Multi-layer perceptron; tanh on hidden layers, linear output.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub weights: Vec<DenseMatrix>, // layer l: sizes[l+1] × sizes[l]
    pub biases: Vec<DenseVector>,  // empty vectors when bias-free
    pub use_bias: bool,
}

/// Per-call activation cache for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input to each layer (length = number of layers).
    inputs: Vec<Vec<f64>>,
    /// Post-activation output of each layer.
    outputs: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn new(sizes: &[usize], use_bias: bool, scale: f64, rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = scale / (fan_in as f64).sqrt();
            let mut w = DenseMatrix::zeros(fan_out, fan_in);
            for i in 0..fan_out {
                for j in 0..fan_in {
                    w[(i, j)] = rng.gen_range(-bound..bound);
                }
            }
            weights.push(w);
            biases.push(if use_bias {
                DenseVector::zeros(fan_out)
            } else {
                DenseVector::zeros(0)
            });
        }
        Self { sizes: sizes.to_vec(), weights, biases, use_bias }
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn in_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, MlpCache) {
        assert_eq!(x.len(), self.in_dim(), "mlp input dim");
        let mut inputs = Vec::with_capacity(self.n_layers());
        let mut outputs = Vec::with_capacity(self.n_layers());
        let mut h = x.to_vec();
        for l in 0..self.n_layers() {
            inputs.push(h.clone());
            let w = &self.weights[l];
            let mut z = vec![0.0; w.rows()];
            for i in 0..w.rows() {
                let mut acc = if self.use_bias { self.biases[l][i] } else { 0.0 };
                let row = w.row(i);
                for j in 0..w.cols() {
                    acc += row[j] * h[j];
                }
                z[i] = acc;
            }
            if l + 1 < self.n_layers() {
                for v in z.iter_mut() {
                    *v = v.tanh();
                }
            }
            outputs.push(z.clone());
            h = z;
        }
        (h, MlpCache { inputs, outputs })
    }

    /// Accumulates parameter gradients into `grad` (same shape as `self`)
    /// and returns the gradient with respect to the input.
    pub fn backward(&self, cache: &MlpCache, d_out: &[f64], grad: &mut Mlp) -> Vec<f64> {
        let mut dy = d_out.to_vec();
        for l in (0..self.n_layers()).rev() {
            let y = &cache.outputs[l];
            let x = &cache.inputs[l];
            // tanh derivative on hidden layers only.
            let dz: Vec<f64> = if l + 1 < self.n_layers() {
                dy.iter().zip(y).map(|(d, yi)| d * (1.0 - yi * yi)).collect()
            } else {
                dy.clone()
            };
            let w = &self.weights[l];
            let gw = &mut grad.weights[l];
            for i in 0..w.rows() {
                for j in 0..w.cols() {
                    gw[(i, j)] += dz[i] * x[j];
                }
            }
            if self.use_bias {
                for i in 0..w.rows() {
                    grad.biases[l][i] += dz[i];
                }
            }
            let mut dx = vec![0.0; w.cols()];
            for i in 0..w.rows() {
                let row = w.row(i);
                for j in 0..w.cols() {
                    dx[j] += row[j] * dz[i];
                }
            }
            dy = dx;
        }
        dy
    }

    pub fn zeros_like(&self) -> Mlp {
        let mut z = self.clone();
        for w in z.weights.iter_mut() {
            w.as_mut_slice().fill(0.0);
        }
        for b in z.biases.iter_mut() {
            b.as_mut_slice().fill(0.0);
        }
        z
    }

    pub fn flat_len(&self) -> usize {
        self.weights.iter().map(|w| w.as_slice().len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn write_flat(&self, out: &mut Vec<f64>) {
        for l in 0..self.n_layers() {
            out.extend_from_slice(self.weights[l].as_slice());
            out.extend_from_slice(self.biases[l].as_slice());
        }
    }

    pub fn read_flat(&mut self, src: &[f64]) -> usize {
        let mut k = 0;
        for l in 0..self.n_layers() {
            let wn = self.weights[l].as_slice().len();
            self.weights[l].as_mut_slice().copy_from_slice(&src[k..k + wn]);
            k += wn;
            let bn = self.biases[l].len();
            self.biases[l].as_mut_slice().copy_from_slice(&src[k..k + bn]);
            k += bn;
        }
        k
    }

    /// `self ← self − lr · grad` (no clipping here).
    pub fn sgd_step(&mut self, grad: &Mlp, lr: f64) {
        for l in 0..self.n_layers() {
            let g = grad.weights[l].as_slice();
            let w = self.weights[l].as_mut_slice();
            for (wi, gi) in w.iter_mut().zip(g) {
                *wi -= lr * gi;
            }
            let gb = grad.biases[l].as_slice();
            let b = self.biases[l].as_mut_slice();
            for (bi, gi) in b.iter_mut().zip(gb) {
                *bi -= lr * gi;
            }
        }
    }

    pub fn grad_sq_norm(&self) -> f64 {
        let mut acc = 0.0;
        for w in &self.weights {
            acc += w.as_slice().iter().map(|x| x * x).sum::<f64>();
        }
        for b in &self.biases {
            acc += b.as_slice().iter().map(|x| x * x).sum::<f64>();
        }
        acc
    }

    pub fn scale_in_place(&mut self, s: f64) {
        for w in self.weights.iter_mut() {
            for v in w.as_mut_slice() {
                *v *= s;
            }
        }
        for b in self.biases.iter_mut() {
            for v in b.as_mut_slice() {
                *v *= s;
            }
        }
    }
}

/// An MLP whose output parameterizes a diagonal Gaussian. The first half of
/// the output is the mean; the second half is squashed into a bounded
/// log-variance: `var = exp(LOG_VAR_BOUND · tanh(u))`.
#[derive(Debug, Clone)]
pub struct GaussianHead {
    pub net: Mlp,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct GaussianHeadCache {
    mlp: MlpCache,
    raw: Vec<f64>,
}

impl GaussianHead {
    pub fn new(in_dim: usize, hidden: usize, dim: usize, scale: f64, rng: &mut impl Rng) -> Self {
        Self { net: Mlp::new(&[in_dim, hidden, 2 * dim], true, scale, rng), dim }
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, GaussianHeadCache) {
        let (raw, mlp) = self.net.forward(x);
        let mean = raw[..self.dim].to_vec();
        let var: Vec<f64> = raw[self.dim..]
            .iter()
            .map(|u| (LOG_VAR_BOUND * u.tanh()).exp().clamp(1e-4, 1e4))
            .collect();
        (mean, var, GaussianHeadCache { mlp, raw })
    }

    /// Backward from gradients on (mean, var).
    pub fn backward(
        &self,
        cache: &GaussianHeadCache,
        d_mean: &[f64],
        d_var: &[f64],
        grad: &mut GaussianHead,
    ) -> Vec<f64> {
        let mut d_raw = vec![0.0; 2 * self.dim];
        d_raw[..self.dim].copy_from_slice(d_mean);
        for i in 0..self.dim {
            let u = cache.raw[self.dim + i];
            let t = u.tanh();
            let var = (LOG_VAR_BOUND * t).exp();
            d_raw[self.dim + i] = d_var[i] * var * LOG_VAR_BOUND * (1.0 - t * t);
        }
        self.net.backward(&cache.mlp, &d_raw, &mut grad.net)
    }

    pub fn zeros_like(&self) -> GaussianHead {
        GaussianHead { net: self.net.zeros_like(), dim: self.dim }
    }
}

/// Gated recurrent cell for the recurrent-memory ablation.
#[derive(Debug, Clone)]
pub struct GruCell {
    pub wr: Mlp, // reset gate: [x ⊕ h] → hidden (single linear layer)
    pub wz: Mlp, // update gate
    pub wn: Mlp, // candidate
    pub hidden: usize,
}

#[derive(Debug, Clone)]
pub struct GruCache {
    xh: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    h_prev: Vec<f64>,
    cr: MlpCache,
    cz: MlpCache,
    cn: MlpCache,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl GruCell {
    pub fn new(input: usize, hidden: usize, scale: f64, rng: &mut impl Rng) -> Self {
        Self {
            wr: Mlp::new(&[input + hidden, hidden], true, scale, rng),
            wz: Mlp::new(&[input + hidden, hidden], true, scale, rng),
            wn: Mlp::new(&[input + hidden, hidden], true, scale, rng),
            hidden,
        }
    }

    pub fn forward(&self, h_prev: &[f64], x: &[f64]) -> (Vec<f64>, GruCache) {
        let mut xh = x.to_vec();
        xh.extend_from_slice(h_prev);
        let (zr, cr) = self.wr.forward(&xh);
        let (zz, cz) = self.wz.forward(&xh);
        let r: Vec<f64> = zr.iter().map(|&v| sigmoid(v)).collect();
        let z: Vec<f64> = zz.iter().map(|&v| sigmoid(v)).collect();
        let mut xrh = x.to_vec();
        xrh.extend(r.iter().zip(h_prev).map(|(ri, hi)| ri * hi));
        let (zn, cn) = self.wn.forward(&xrh);

        let n: Vec<f64> = zn.iter().map(|v| v.tanh()).collect();
        let h_new: Vec<f64> = (0..self.hidden)
            .map(|i| (1.0 - z[i]) * n[i] + z[i] * h_prev[i])
            .collect();
        let cache = GruCache { xh, r, z, n, h_prev: h_prev.to_vec(), cr, cz, cn };
        (h_new, cache)
    }

    /// One-step backward. `h_prev` is treated as data (truncated BPTT of
    /// depth one); returns the gradient with respect to the input `x`.
    pub fn backward(&self, cache: &GruCache, d_h: &[f64], grad: &mut GruCell) -> Vec<f64> {
        let hd = self.hidden;
        let x_dim = cache.xh.len() - hd;
        let mut d_n = vec![0.0; hd];
        let mut d_z = vec![0.0; hd];
        for i in 0..hd {
            d_n[i] = d_h[i] * (1.0 - cache.z[i]);
            d_z[i] = d_h[i] * (cache.h_prev[i] - cache.n[i]);
        }
        // Candidate branch: n = tanh(zn), input [x ⊕ r⊙h].
        let d_zn: Vec<f64> =
            d_n.iter().zip(&cache.n).map(|(d, ni)| d * (1.0 - ni * ni)).collect();
        let d_xrh = self.wn.backward(&cache.cn, &d_zn, &mut grad.wn);
        let mut d_x: Vec<f64> = d_xrh[..x_dim].to_vec();
        let mut d_r = vec![0.0; hd];
        for i in 0..hd {
            d_r[i] = d_xrh[x_dim + i] * cache.h_prev[i];
        }
        // Gate branches (sigmoid derivative).
        let d_zr: Vec<f64> =
            d_r.iter().zip(&cache.r).map(|(d, ri)| d * ri * (1.0 - ri)).collect();
        let d_zz: Vec<f64> =
            d_z.iter().zip(&cache.z).map(|(d, zi)| d * zi * (1.0 - zi)).collect();
        let d_xh_r = self.wr.backward(&cache.cr, &d_zr, &mut grad.wr);
        let d_xh_z = self.wz.backward(&cache.cz, &d_zz, &mut grad.wz);
        for j in 0..x_dim {
            d_x[j] += d_xh_r[j] + d_xh_z[j];
        }
        d_x
    }

    pub fn zeros_like(&self) -> GruCell {
        GruCell {
            wr: self.wr.zeros_like(),
            wz: self.wz.zeros_like(),
            wn: self.wn.zeros_like(),
            hidden: self.hidden,
        }
    }

    pub fn flat_len(&self) -> usize {
        self.wr.flat_len() + self.wz.flat_len() + self.wn.flat_len()
    }

    pub fn write_flat(&self, out: &mut Vec<f64>) {
        self.wr.write_flat(out);
        self.wz.write_flat(out);
        self.wn.write_flat(out);
    }

    pub fn read_flat(&mut self, src: &[f64]) -> usize {
        let mut k = self.wr.read_flat(src);
        k += self.wz.read_flat(&src[k..]);
        k += self.wn.read_flat(&src[k..]);
        k
    }
}

/// Central finite-difference gradient of `f` at `p`; the independent
/// oracle every analytic gradient in the crate is certified against.
pub fn fd_gradient(f: &mut dyn FnMut(&[f64]) -> f64, p: &[f64], eps: f64) -> Vec<f64> {
    let mut g = vec![0.0; p.len()];
    let mut work = p.to_vec();
    for i in 0..p.len() {
        let orig = work[i];
        work[i] = orig + eps;
        let fp = f(&work);
        work[i] = orig - eps;
        let fm = f(&work);
        work[i] = orig;
        g[i] = (fp - fm) / (2.0 * eps);
    }
    g
}

/// Worst relative disagreement between two gradient vectors, with a floor
/// on the denominator so near-zero entries compare absolutely.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// Worst per-entry disagreement of `analytic` against the best of several
/// finite-difference probe widths. Wide probes own the round-off floor,
/// narrow probes own high-curvature regions; a wrong gradient disagrees
/// with every width at the same entry.
pub fn max_rel_err_multi_width(analytic: &[f64], probes: &[Vec<f64>]) -> f64 {
    assert!(!probes.is_empty());
    let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(1e-6);
    (0..analytic.len())
        .map(|i| {
            probes
                .iter()
                .map(|p| rel(analytic[i], p[i]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Numerically stable log-softmax.
pub fn log_softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
    scores.iter().map(|s| s - lse).collect()
}

/// Softmax probabilities.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    log_softmax(scores).iter().map(|l| l.exp()).collect()
}
