//! Float reference kernels. Activations are `[H, W, C]`, conv kernels
//! `[KH, KW, C_in, C_out]`, dense weights `[out, in]`. Sums accumulate in
//! f64 and are rounded to f32 once.

use super::Tensor;
use crate::error::{Error, Result};

/// Eight-lane dot product accumulated in f64; fixed reduction order so
/// results are reproducible.
#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            lanes[k] += x[k] as f64 * y[k] as f64;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += *x as f64 * *y as f64;
    }
    let s = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]))
        + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
    s + tail
}

fn dims3(t: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [h, w, c] => Ok((h, w, c)),
        ref s => Err(Error::ShapeMismatch(format!("{what} must be [H, W, C], got {s:?}"))),
    }
}

/// Valid cross-correlation with stride 1.
pub fn conv2d(input: &Tensor, kernels: &Tensor, bias: &[f32]) -> Result<Tensor> {
    let (h, w, c) = dims3(input, "conv input")?;
    let (kh, kw, kc, k) = match *kernels.shape() {
        [a, b, c, d] => (a, b, c, d),
        ref s => {
            return Err(Error::ShapeMismatch(format!(
                "conv kernels must be [KH, KW, C, K], got {s:?}"
            )))
        }
    };
    if kc != c {
        return Err(Error::ShapeMismatch(format!(
            "input has {c} channels, kernels expect {kc}"
        )));
    }
    if bias.len() != k {
        return Err(Error::ShapeMismatch(format!(
            "{} biases for {k} filters",
            bias.len()
        )));
    }
    if kh > h || kw > w || kh == 0 || kw == 0 {
        return Err(Error::ShapeMismatch(format!(
            "{kh}x{kw} kernel does not fit a {h}x{w} input"
        )));
    }
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let x = input.data();
    let kern = kernels.data();
    let mut out = vec![0.0f32; oh * ow * k];
    let mut acc = vec![0.0f64; k];
    for oy in 0..oh {
        for ox in 0..ow {
            for (a, &b) in acc.iter_mut().zip(bias) {
                *a = b as f64;
            }
            for i in 0..kh {
                for j in 0..kw {
                    let px = &x[((oy + i) * w + ox + j) * c..((oy + i) * w + ox + j + 1) * c];
                    for (ci, &v) in px.iter().enumerate() {
                        let row = &kern[((i * kw + j) * c + ci) * k..((i * kw + j) * c + ci + 1) * k];
                        let v = v as f64;
                        for (a, &kv) in acc.iter_mut().zip(row) {
                            *a += v * kv as f64;
                        }
                    }
                }
            }
            for (o, &a) in out[(oy * ow + ox) * k..(oy * ow + ox + 1) * k].iter_mut().zip(&acc) {
                *o = a as f32;
            }
        }
    }
    Tensor::new(vec![oh, ow, k], out)
}

/// Non-overlapping 2×2 max pooling; an odd trailing row or column is dropped.
pub fn maxpool2(input: &Tensor) -> Result<Tensor> {
    maxpool2_with_argmax(input).map(|(t, _)| t)
}

/// Max pooling that also reports, per output element, the flat input index
/// that won (first in row-major order on ties).
pub fn maxpool2_with_argmax(input: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let (h, w, c) = dims3(input, "pool input")?;
    if h < 2 || w < 2 {
        return Err(Error::ShapeMismatch(format!(
            "2x2 pooling needs at least 2x2 input, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Vec::with_capacity(oh * ow * c);
    let mut arg = Vec::with_capacity(oh * ow * c);
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut best = ((2 * oy) * w + 2 * ox) * c + ch;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = ((2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                arg.push(best);
            }
        }
    }
    Ok((Tensor::new(vec![oh, ow, c], out)?, arg))
}

/// `W·x + b` with `W` shaped `[out, in]`.
pub fn dense(input: &[f32], weights: &Tensor, bias: &[f32]) -> Result<Vec<f32>> {
    let (o, i) = match *weights.shape() {
        [o, i] => (o, i),
        ref s => return Err(Error::ShapeMismatch(format!("dense weights must be 2-D, got {s:?}"))),
    };
    if input.len() != i || bias.len() != o {
        return Err(Error::ShapeMismatch(format!(
            "dense {i}->{o} given {} inputs and {} biases",
            input.len(),
            bias.len()
        )));
    }
    Ok(weights
        .data()
        .chunks_exact(i)
        .zip(bias)
        .map(|(row, &b)| (dot(row, input) + b as f64) as f32)
        .collect())
}

pub fn relu_inplace(x: &mut [f32]) {
    for v in x {
        *v = v.max(0.0);
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}
