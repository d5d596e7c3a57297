use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Activation, Layer, Model, Tensor};

/// Number of fixed partial sums a batch is split into. Partials are reduced
/// in index order, so results do not depend on the thread count.
const GRAD_CHUNKS: usize = 4;

/// Gradients of the mean loss, one buffer per parameter tensor in
/// [`Model::params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        Self {
            tensors: model.params().iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    fn scale(&mut self, k: f64) {
        for t in &mut self.tensors {
            t.iter_mut().for_each(|v| *v *= k);
        }
    }
}

/// `-ln(max(p[label], 1e-12))`.
pub fn crossentropy(probs: &[f64], label: usize) -> Result<f64> {
    let p = probs.get(label).ok_or(Error::LabelOutOfRange {
        label,
        classes: probs.len(),
    })?;
    Ok(-p.max(1e-12).ln())
}

/// Result of a forward/backward sweep over a batch.
#[derive(Debug, Clone)]
pub struct BatchResult {
    pub grads: Gradients,
    pub loss_sum: f64,
    pub correct: usize,
}

/// Gradient of the mean cross-entropy over `batch` with respect to every
/// parameter. `batch` is `[N, H, W, C]`.
pub fn backward(model: &Model, batch: &Tensor, labels: &[usize]) -> Result<Gradients> {
    let examples = batch.unbatch()?;
    let refs: Vec<&Tensor> = examples.iter().collect();
    Ok(batch_gradients(model, &refs, labels)?.grads)
}

pub(crate) fn batch_gradients(
    model: &Model,
    inputs: &[&Tensor],
    labels: &[usize],
) -> Result<BatchResult> {
    if inputs.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} inputs but {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    if inputs.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let classes = model.num_classes();
    if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label: l, classes });
    }
    let n = inputs.len();
    let partials: Vec<Result<BatchResult>> = (0..GRAD_CHUNKS)
        .into_par_iter()
        .map(|c| {
            let (lo, hi) = (c * n / GRAD_CHUNKS, (c + 1) * n / GRAD_CHUNKS);
            let mut acc = BatchResult {
                grads: Gradients::zeros_like(model),
                loss_sum: 0.0,
                correct: 0,
            };
            for i in lo..hi {
                example_backward(model, inputs[i], labels[i], &mut acc)?;
            }
            Ok(acc)
        })
        .collect();

    let mut total: Option<BatchResult> = None;
    for p in partials {
        let p = p?;
        match total.as_mut() {
            None => total = Some(p),
            Some(t) => {
                t.grads.add_assign(&p.grads);
                t.loss_sum += p.loss_sum;
                t.correct += p.correct;
            }
        }
    }
    let mut total = total.expect("at least one chunk");
    total.grads.scale(1.0 / n as f64);
    Ok(total)
}

fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

/// Adds one example's loss gradient (not yet divided by the batch size).
fn example_backward(model: &Model, x: &Tensor, label: usize, acc: &mut BatchResult) -> Result<()> {
    let trace = model.trace(x)?;
    acc.loss_sum += crossentropy(&trace.probs, label)?;
    if argmax(&trace.probs) == label {
        acc.correct += 1;
    }

    // Fused softmax + cross-entropy: dL/dlogits = p - onehot.
    let mut grad: Vec<f32> = trace
        .probs
        .iter()
        .enumerate()
        .map(|(k, &p)| (p - if k == label { 1.0 } else { 0.0 }) as f32)
        .collect();

    // param tensor index of each layer's weights
    let mut param_index = Vec::with_capacity(model.layers().len());
    let mut next = 0;
    for layer in model.layers() {
        param_index.push(next);
        if layer.param_count() > 0 {
            next += 2;
        }
    }

    for (li, layer) in model.layers().iter().enumerate().rev() {
        let out = &trace.outputs[li];
        if layer.activation() == Activation::Relu {
            for (g, &o) in grad.iter_mut().zip(out.data()) {
                if o <= 0.0 {
                    *g = 0.0;
                }
            }
        }
        let input = trace.boundary(li);
        let need_dx = li > 0;
        let pi = param_index[li];
        grad = match layer {
            Layer::Dense { weights, .. } => {
                let (dw, rest) = acc.grads.tensors[pi..].split_at_mut(1);
                dense_backward(input.data(), weights, &grad, &mut dw[0], &mut rest[0], need_dx)
            }
            Layer::Conv2d { kernels, .. } => {
                let (dk, rest) = acc.grads.tensors[pi..].split_at_mut(1);
                conv_backward(input, kernels, &grad, &mut dk[0], &mut rest[0], need_dx)
            }
            Layer::MaxPool2 => {
                let arg = trace.pool_argmax[li].as_ref().expect("pool layers record argmax");
                let mut dx = vec![0.0f32; input.len()];
                for (&src, &g) in arg.iter().zip(&grad) {
                    dx[src] += g;
                }
                dx
            }
            Layer::Flatten => grad,
        };
    }
    Ok(())
}

fn dense_backward(
    x: &[f32],
    weights: &Tensor,
    grad: &[f32],
    dw: &mut [f64],
    db: &mut [f64],
    need_dx: bool,
) -> Vec<f32> {
    let n_in = x.len();
    let mut dx = if need_dx { vec![0.0f32; n_in] } else { Vec::new() };
    for (o, &g) in grad.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        db[o] += g as f64;
        for (d, &xi) in dw[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
            *d += (g * xi) as f64;
        }
        if need_dx {
            let row = &weights.data()[o * n_in..(o + 1) * n_in];
            for (d, &w) in dx.iter_mut().zip(row) {
                *d += g * w;
            }
        }
    }
    dx
}

fn conv_backward(
    input: &Tensor,
    kernels: &Tensor,
    grad: &[f32],
    dk_acc: &mut [f64],
    db_acc: &mut [f64],
    need_dx: bool,
) -> Vec<f32> {
    let (h, w, c) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (kh, kw, k) = (kernels.shape()[0], kernels.shape()[1], kernels.shape()[3]);
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let x = input.data();
    let kern = kernels.data();
    let mut dk = vec![0.0f32; kern.len()];
    let mut db = vec![0.0f32; k];
    let mut dx = if need_dx { vec![0.0f32; x.len()] } else { Vec::new() };

    for oy in 0..oh {
        for ox in 0..ow {
            let g = &grad[(oy * ow + ox) * k..(oy * ow + ox + 1) * k];
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            for (b, &gv) in db.iter_mut().zip(g) {
                *b += gv;
            }
            for i in 0..kh {
                for j in 0..kw {
                    let base = ((oy + i) * w + ox + j) * c;
                    for ci in 0..c {
                        let kbase = ((i * kw + j) * c + ci) * k;
                        let v = x[base + ci];
                        let dk_row = &mut dk[kbase..kbase + k];
                        for (d, &gv) in dk_row.iter_mut().zip(g) {
                            *d += v * gv;
                        }
                        if need_dx {
                            let row = &kern[kbase..kbase + k];
                            let mut s = 0.0f32;
                            for (&kv, &gv) in row.iter().zip(g) {
                                s += kv * gv;
                            }
                            dx[base + ci] += s;
                        }
                    }
                }
            }
        }
    }
    for (a, v) in dk_acc.iter_mut().zip(&dk) {
        *a += *v as f64;
    }
    for (a, v) in db_acc.iter_mut().zip(&db) {
        *a += *v as f64;
    }
    dx
}
