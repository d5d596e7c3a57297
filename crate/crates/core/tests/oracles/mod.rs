//! Slow, obviously-correct reference implementations shared by the
//! integration tests. Nothing here calls into the library's numeric code.
#![allow(dead_code)]

use std::f64::consts::PI;

use ppgstress::model::{Activation, Layer, Model};

/// Naive valid convolution: `x` is `[h, w, c]`, `k` is `[kh, kw, c, f]`.
pub fn conv(x: &[f64], (h, w, c): (usize, usize, usize), k: &[f64], (kh, kw, f): (usize, usize, usize), b: &[f64]) -> Vec<f64> {
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let mut out = vec![0.0; oh * ow * f];
    for oy in 0..oh {
        for ox in 0..ow {
            for o in 0..f {
                let mut s = b[o];
                for i in 0..kh {
                    for j in 0..kw {
                        for ci in 0..c {
                            s += x[((oy + i) * w + ox + j) * c + ci] * k[((i * kw + j) * c + ci) * f + o];
                        }
                    }
                }
                out[(oy * ow + ox) * f + o] = s;
            }
        }
    }
    out
}

pub fn pool(x: &[f64], (h, w, c): (usize, usize, usize)) -> Vec<f64> {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![f64::NEG_INFINITY; oh * ow * c];
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                for dy in 0..2 {
                    for dx in 0..2 {
                        let v = x[((2 * oy + dy) * w + 2 * ox + dx) * c + ch];
                        let o = &mut out[(oy * ow + ox) * c + ch];
                        if v > *o {
                            *o = v;
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn dense(x: &[f64], wt: &[f64], b: &[f64]) -> Vec<f64> {
    b.iter()
        .enumerate()
        .map(|(o, &bo)| bo + x.iter().enumerate().map(|(i, &xi)| xi * wt[o * x.len() + i]).sum::<f64>())
        .collect()
}

/// Textbook softmax without max subtraction.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let e: Vec<f64> = z.iter().map(|v| v.exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Parameters of `model` as f64, in weights-then-bias order per layer.
pub fn params_f64(model: &Model) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for l in model.layers() {
        match l {
            Layer::Conv2d { kernels: w, bias, .. } | Layer::Dense { weights: w, bias, .. } => {
                out.push(w.data().iter().map(|&v| v as f64).collect());
                out.push(bias.iter().map(|&v| v as f64).collect());
            }
            _ => {}
        }
    }
    out
}

/// f64 logits of `model`'s graph evaluated with `params` in place of its
/// own weights.
pub fn logits(model: &Model, params: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let mut shape = model.input_shape().to_vec();
    let mut cur = x.to_vec();
    let mut p = params.iter();
    for l in model.layers() {
        match l {
            Layer::Conv2d { kernels, activation, .. } => {
                let ks = kernels.shape();
                let (k, b) = (p.next().unwrap(), p.next().unwrap());
                cur = conv(&cur, (shape[0], shape[1], shape[2]), k, (ks[0], ks[1], ks[3]), b);
                shape = vec![shape[0] - ks[0] + 1, shape[1] - ks[1] + 1, ks[3]];
                if *activation == Activation::Relu {
                    cur.iter_mut().for_each(|v| *v = v.max(0.0));
                }
            }
            Layer::MaxPool2 => {
                cur = pool(&cur, (shape[0], shape[1], shape[2]));
                shape = vec![shape[0] / 2, shape[1] / 2, shape[2]];
            }
            Layer::Flatten => shape = vec![cur.len()],
            Layer::Dense { activation, .. } => {
                let (w, b) = (p.next().unwrap(), p.next().unwrap());
                cur = dense(&cur, w, b);
                shape = vec![cur.len()];
                if *activation == Activation::Relu {
                    cur.iter_mut().for_each(|v| *v = v.max(0.0));
                }
            }
        }
    }
    cur
}

/// Mean cross-entropy over a batch.
pub fn mean_loss(model: &Model, params: &[Vec<f64>], xs: &[Vec<f64>], labels: &[usize]) -> f64 {
    xs.iter()
        .zip(labels)
        .map(|(x, &l)| -softmax(&logits(model, params, x))[l].ln())
        .sum::<f64>()
        / xs.len() as f64
}

/// Central-difference gradient of [`mean_loss`] for every parameter.
pub fn fd_gradients(model: &Model, xs: &[Vec<f64>], labels: &[usize], h: f64) -> Vec<Vec<f64>> {
    let mut params = params_f64(model);
    let mut grads = Vec::new();
    for t in 0..params.len() {
        let mut g = vec![0.0; params[t].len()];
        for i in 0..params[t].len() {
            let orig = params[t][i];
            params[t][i] = orig + h;
            let up = mean_loss(model, &params, xs, labels);
            params[t][i] = orig - h;
            let down = mean_loss(model, &params, xs, labels);
            params[t][i] = orig;
            g[i] = (up - down) / (2.0 * h);
        }
        grads.push(g);
    }
    grads
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or 0 when both are zero.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&d) / scale
    }
}

/// Riemann-sum CWT straight from the definition. Returns `(re, im)` rows.
pub fn cwt_riemann(x: &[f64], freqs: &[f64], rate: f64, omega0: f64) -> Vec<(f64, f64)> {
    let n = x.len();
    let mut out = Vec::with_capacity(freqs.len() * n);
    for &f in freqs {
        let s = omega0 * rate / (2.0 * PI * f);
        for tau in 0..n {
            let (mut re, mut im) = (0.0, 0.0);
            for (m, &xm) in x.iter().enumerate() {
                let t = (m as f64 - tau as f64) / s;
                let env = (-t * t / 2.0).exp() / PI.powf(0.25) / s.sqrt();
                // conjugate wavelet
                re += xm * env * (omega0 * t).cos();
                im -= xm * env * (omega0 * t).sin();
            }
            out.push((re, im));
        }
    }
    out
}

/// AUC by enumerating every positive–negative pair.
pub fn auc_pairs(scores: &[f64], labels: &[usize]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / pairs
}

/// `(precision, recall)` for "score ≥ t" by counting the confusion matrix.
pub fn pr_at(scores: &[f64], labels: &[usize], t: f64) -> (f64, f64) {
    let (mut tp, mut fp, mut fneg) = (0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= t, l == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    (precision, tp as f64 / (tp + fneg) as f64)
}

/// Beat rate from upward mean crossings with hysteresis: cycles between the
/// first and last crossing over the time they span.
pub fn crossing_rate_hz(x: &[f64], rate: f64) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let band = 0.3 * sd;
    let mut armed = false;
    let mut hits = Vec::new();
    for (i, &v) in x.iter().enumerate() {
        if v < mean - band {
            armed = true;
        } else if armed && v > mean + band {
            armed = false;
            hits.push(i);
        }
    }
    let span = (hits[hits.len() - 1] - hits[0]) as f64 / rate;
    (hits.len() - 1) as f64 / span
}

/// Power of the naive DFT at `f` Hz.
pub fn dft_power(x: &[f64], rate: f64, f: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (n, &v) in x.iter().enumerate() {
        let a = 2.0 * PI * f * n as f64 / rate;
        re += v * a.cos();
        im -= v * a.sin();
    }
    re * re + im * im
}
