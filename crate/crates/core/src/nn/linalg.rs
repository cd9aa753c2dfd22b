//! Flat-buffer matrix kernels for the MLP hot path.
//!
//! Weights are row-major `out_dim x in_dim`; activations are row-major
//! `batch x dim`. Every kernel is written in accumulate-along-contiguous-rows
//! (axpy) form, the one shape the vectorizer handles robustly; the forward
//! pass transposes the weights into a scratch buffer first, which costs well
//! under a percent of the multiply work.

/// Plain dot product for small one-off contractions.
#[inline(always)]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4 * 4;
    let mut k = 0;
    while k < chunks {
        for l in 0..4 {
            acc[l] += a[k + l] * b[k + l];
        }
        k += 4;
    }
    let mut tail = 0.0;
    while k < a.len() {
        tail += a[k] * b[k];
        k += 1;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn transpose(w: &[f64], out_dim: usize, in_dim: usize) -> Vec<f64> {
    let mut wt = vec![0.0; w.len()];
    for o in 0..out_dim {
        for k in 0..in_dim {
            wt[k * out_dim + o] = w[o * in_dim + k];
        }
    }
    wt
}

/// `out[b, o] = dot(x[b, :], w[o, :]) + bias[o]`.
pub fn linear_forward(
    out: &mut [f64],
    x: &[f64],
    w: &[f64],
    bias: &[f64],
    batch: usize,
    in_dim: usize,
    out_dim: usize,
) {
    debug_assert_eq!(out.len(), batch * out_dim);
    debug_assert_eq!(x.len(), batch * in_dim);
    debug_assert_eq!(w.len(), out_dim * in_dim);
    debug_assert_eq!(bias.len(), out_dim);
    let wt = transpose(w, out_dim, in_dim);
    for b in 0..batch {
        let xr = &x[b * in_dim..(b + 1) * in_dim];
        let or = &mut out[b * out_dim..(b + 1) * out_dim];
        or.copy_from_slice(bias);
        for (k, &xv) in xr.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let wr = &wt[k * out_dim..(k + 1) * out_dim];
            for (slot, &wv) in or.iter_mut().zip(wr) {
                *slot += xv * wv;
            }
        }
    }
}

/// `dx[b, i] = sum_o dy[b, o] * w[o, i]` (input gradient of a linear layer).
pub fn input_grad(
    dx: &mut [f64],
    dy: &[f64],
    w: &[f64],
    batch: usize,
    out_dim: usize,
    in_dim: usize,
) {
    debug_assert_eq!(dx.len(), batch * in_dim);
    debug_assert_eq!(dy.len(), batch * out_dim);
    dx.fill(0.0);
    for b in 0..batch {
        let dyr = &dy[b * out_dim..(b + 1) * out_dim];
        let dxr = &mut dx[b * in_dim..(b + 1) * in_dim];
        for (o, &g) in dyr.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let wr = &w[o * in_dim..(o + 1) * in_dim];
            for (slot, &wv) in dxr.iter_mut().zip(wr) {
                *slot += g * wv;
            }
        }
    }
}

/// `dw[o, i] += sum_b dy[b, o] * x[b, i]` (weight gradient of a linear layer).
pub fn weight_grad_acc(
    dw: &mut [f64],
    dy: &[f64],
    x: &[f64],
    batch: usize,
    out_dim: usize,
    in_dim: usize,
) {
    debug_assert_eq!(dw.len(), out_dim * in_dim);
    for b in 0..batch {
        let xr = &x[b * in_dim..(b + 1) * in_dim];
        let dyr = &dy[b * out_dim..(b + 1) * out_dim];
        for (o, &g) in dyr.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let dwr = &mut dw[o * in_dim..(o + 1) * in_dim];
            for (slot, &xv) in dwr.iter_mut().zip(xr) {
                *slot += g * xv;
            }
        }
    }
}

/// `db[o] += sum_b dy[b, o]` (bias gradient).
pub fn bias_grad_acc(db: &mut [f64], dy: &[f64], batch: usize, out_dim: usize) {
    debug_assert_eq!(db.len(), out_dim);
    for b in 0..batch {
        for (slot, &g) in db.iter_mut().zip(&dy[b * out_dim..(b + 1) * out_dim]) {
            *slot += g;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_forward_small_case() {
        // x = [[1, 2]], w = [[3, 4], [5, 6]], bias = [0.5, -0.5]
        let mut out = vec![0.0; 2];
        linear_forward(&mut out, &[1.0, 2.0], &[3.0, 4.0, 5.0, 6.0], &[0.5, -0.5], 1, 2, 2);
        assert_eq!(out, vec![11.5, 16.5]);
    }

    #[test]
    fn kernels_match_naive_loops() {
        // Odd sizes exercise tails and the zero-skip branches.
        for (batch, out_dim, in_dim) in [(3usize, 2usize, 4usize), (6, 9, 7), (8, 12, 16), (5, 4, 1)] {
            let dy: Vec<f64> = (0..batch * out_dim)
                .map(|i| if i % 5 == 0 { 0.0 } else { (i as f64) * 0.3 - 1.0 })
                .collect();
            let x: Vec<f64> = (0..batch * in_dim)
                .map(|i| if i % 7 == 0 { 0.0 } else { (i as f64) * 0.1 + 0.2 })
                .collect();
            let w: Vec<f64> = (0..out_dim * in_dim).map(|i| (i as f64) * 0.05 - 0.1).collect();
            let bias: Vec<f64> = (0..out_dim).map(|i| i as f64 * 0.7).collect();

            let mut fwd = vec![9.0; batch * out_dim];
            linear_forward(&mut fwd, &x, &w, &bias, batch, in_dim, out_dim);
            for b in 0..batch {
                for o in 0..out_dim {
                    let naive: f64 = (0..in_dim)
                        .map(|i| x[b * in_dim + i] * w[o * in_dim + i])
                        .sum::<f64>()
                        + bias[o];
                    assert!((fwd[b * out_dim + o] - naive).abs() < 1e-12);
                }
            }

            let mut dw = vec![0.0; out_dim * in_dim];
            weight_grad_acc(&mut dw, &dy, &x, batch, out_dim, in_dim);
            for o in 0..out_dim {
                for i in 0..in_dim {
                    let naive: f64 =
                        (0..batch).map(|b| dy[b * out_dim + o] * x[b * in_dim + i]).sum();
                    assert!((dw[o * in_dim + i] - naive).abs() < 1e-12);
                }
            }

            let mut dx = vec![0.0; batch * in_dim];
            input_grad(&mut dx, &dy, &w, batch, out_dim, in_dim);
            for b in 0..batch {
                for i in 0..in_dim {
                    let naive: f64 =
                        (0..out_dim).map(|o| dy[b * out_dim + o] * w[o * in_dim + i]).sum();
                    assert!((dx[b * in_dim + i] - naive).abs() < 1e-12);
                }
            }

            let mut db = vec![0.0; out_dim];
            bias_grad_acc(&mut db, &dy, batch, out_dim);
            for o in 0..out_dim {
                let naive: f64 = (0..batch).map(|b| dy[b * out_dim + o]).sum();
                assert!((db[o] - naive).abs() < 1e-12);
            }
        }
    }
}
