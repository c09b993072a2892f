//! Batched second-order jet propagation through dense tanh layers.
//!
//! Every layer input is a `rows x (channels * n)` row-major matrix whose
//! columns are grouped by channel: first the values of all `n` points, then
//! `d` first-derivative blocks, then `d` second-derivative blocks. A dense
//! layer applies the same weights to every channel (biases only touch the
//! value block), so one GEMM propagates the whole jet. The tanh step mixes
//! channels pointwise:
//!
//! ```text
//! h    = tanh(z)
//! h_i  = s z_i
//! h_ii = s z_ii + s' z_i^2          s = 1 - tanh^2, s' = -2 tanh s
//! ```

use super::JetBatch;
use crate::network::{activation, Mlp};

pub(crate) fn channels(dim: usize, derivs: bool) -> usize {
    if derivs {
        1 + 2 * dim
    } else {
        1
    }
}

/// Forward activations of one MLP over a batch of points, retained for the
/// reverse pass.
#[derive(Clone, Debug)]
pub(crate) struct MlpTrace {
    n: usize,
    dim: usize,
    derivs: bool,
    /// `inputs[k]` feeds layer `k`.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of hidden layer `k`.
    pre: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl MlpTrace {
    /// `points` is `n x dim` row-major.
    pub(crate) fn forward(mlp: &Mlp, points: &[f64], derivs: bool) -> Self {
        let dim = mlp.input_dim();
        assert_eq!(points.len() % dim, 0);
        let n = points.len() / dim;
        let nd = if derivs { dim } else { 0 };
        let cn = channels(dim, derivs) * n;

        let mut a0 = vec![0.0; dim * cn];
        for i in 0..dim {
            let row = &mut a0[i * cn..(i + 1) * cn];
            for p in 0..n {
                row[p] = points[p * dim + i];
            }
            if i < nd {
                row[(1 + i) * n..(2 + i) * n].fill(1.0);
            }
        }

        let n_layers = mlp.n_layers();
        let sizes = mlp.layer_sizes();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre = Vec::with_capacity(n_layers.saturating_sub(1));
        inputs.push(a0);
        let mut output = Vec::new();
        for k in 0..n_layers {
            let (n_in, n_out) = (sizes[k], sizes[k + 1]);
            let mut z = vec![0.0; n_out * cn];
            gemm(n_out, n_in, cn, mlp.weights(k), (n_in, 1), &inputs[k], (cn, 1), 0.0, &mut z, (cn, 1));
            for (o, b) in mlp.biases(k).iter().enumerate() {
                for v in &mut z[o * cn..o * cn + n] {
                    *v += b;
                }
            }
            if k + 1 == n_layers {
                output = z;
            } else {
                let mut a = vec![0.0; n_out * cn];
                tanh_forward(&z, &mut a, n_out, n, nd);
                pre.push(z);
                inputs.push(a);
            }
        }
        MlpTrace { n, dim, derivs, inputs, pre, output }
    }

    /// Jets of output row `which`.
    pub(crate) fn output_jets(&self, which: usize) -> JetBatch {
        let cn = channels(self.dim, self.derivs) * self.n;
        JetBatch::from_raw(self.dim, self.n, self.derivs, self.output[which * cn..(which + 1) * cn].to_vec())
    }

    /// Accumulates `d loss / d params` into `grad` (the MLP's flat layout)
    /// given `d loss / d output` laid out like the output matrix.
    pub(crate) fn backward(&self, mlp: &Mlp, out_adj: Vec<f64>, grad: &mut [f64]) {
        let sizes = mlp.layer_sizes();
        let n = self.n;
        let nd = if self.derivs { self.dim } else { 0 };
        let cn = channels(self.dim, self.derivs) * n;
        assert_eq!(out_adj.len(), mlp.output_dim() * cn);
        assert_eq!(grad.len(), mlp.n_params());

        let mut zbar = out_adj;
        for k in (0..mlp.n_layers()).rev() {
            let (n_in, n_out) = (sizes[k], sizes[k + 1]);
            let (w_off, b_off) = mlp.layer_range(k);
            // dW += zbar * A_k^T
            gemm(n_out, cn, n_in, &zbar, (cn, 1), &self.inputs[k], (1, cn), 1.0, &mut grad[w_off..b_off], (n_in, 1));
            for o in 0..n_out {
                grad[b_off + o] += zbar[o * cn..o * cn + n].iter().sum::<f64>();
            }
            if k == 0 {
                break;
            }
            // A_k adjoint = W^T zbar
            let mut abar = vec![0.0; n_in * cn];
            gemm(n_in, n_out, cn, mlp.weights(k), (1, n_in), &zbar, (cn, 1), 0.0, &mut abar, (cn, 1));
            tanh_backward(&mut abar, &self.pre[k - 1], &self.inputs[k], n_in, n, nd);
            zbar = abar;
        }
    }
}

fn tanh_forward(z: &[f64], a: &mut [f64], rows: usize, n: usize, nd: usize) {
    let cn = (1 + 2 * nd) * n;
    for r in 0..rows {
        let z = &z[r * cn..(r + 1) * cn];
        let a = &mut a[r * cn..(r + 1) * cn];
        let (t, rest) = a.split_at_mut(n);
        for (t, &z) in t.iter_mut().zip(&z[..n]) {
            *t = activation(z);
        }
        let (grads, hess) = rest.split_at_mut(nd * n);
        for i in 0..nd {
            let zg = &z[(1 + i) * n..(2 + i) * n];
            let zh = &z[(1 + nd + i) * n..(2 + nd + i) * n];
            let ag = &mut grads[i * n..(i + 1) * n];
            let ah = &mut hess[i * n..(i + 1) * n];
            for p in 0..n {
                let tp = t[p];
                let s = 1.0 - tp * tp;
                let s1 = -2.0 * tp * s;
                ag[p] = s * zg[p];
                ah[p] = s * zh[p] + s1 * zg[p] * zg[p];
            }
        }
    }
}

/// Turns the adjoint of a tanh layer's output into the adjoint of its
/// pre-activation, in place.
fn tanh_backward(bar: &mut [f64], z: &[f64], a: &[f64], rows: usize, n: usize, nd: usize) {
    let cn = (1 + 2 * nd) * n;
    for r in 0..rows {
        let bar = &mut bar[r * cn..(r + 1) * cn];
        let z = &z[r * cn..(r + 1) * cn];
        let t = &a[r * cn..r * cn + n];
        let (value, rest) = bar.split_at_mut(n);
        let (grads, hess) = rest.split_at_mut(nd * n);
        for (v, &tp) in value.iter_mut().zip(t) {
            *v *= 1.0 - tp * tp;
        }
        for i in 0..nd {
            let zg = &z[(1 + i) * n..(2 + i) * n];
            let zh = &z[(1 + nd + i) * n..(2 + nd + i) * n];
            let bg = &mut grads[i * n..(i + 1) * n];
            let bh = &mut hess[i * n..(i + 1) * n];
            for p in 0..n {
                let tp = t[p];
                let s = 1.0 - tp * tp;
                let s1 = -2.0 * tp * s;
                let s2 = -2.0 * s * s + 4.0 * tp * tp * s;
                let (hb_i, hb_ii, zi) = (bg[p], bh[p], zg[p]);
                value[p] += hb_i * s1 * zi + hb_ii * (s1 * zh[p] + s2 * zi * zi);
                bg[p] = hb_i * s + 2.0 * hb_ii * s1 * zi;
                bh[p] = hb_ii * s;
            }
        }
    }
}

/// `C = A B + beta C` with explicit (row, column) strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let extent = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs + 1;
    assert!(k == 0 || a.len() >= extent(m, k, rsa, csa));
    assert!(k == 0 || b.len() >= extent(k, n, rsb, csb));
    assert!(c.len() >= extent(m, n, rsc, csc));
    // SAFETY: the asserts above keep every strided access inside the slices,
    // and `c` is borrowed mutably so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}
