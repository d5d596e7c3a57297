use rayon::prelude::*;

use super::plan::{plan_memory, MemoryPlan, Step};
use super::{requantize, RequantParams};
use crate::compress::{QLayer, QTensor, QuantModel};
use crate::error::{Error, Result};
use crate::model::{image_tensor, softmax, Activation, Tensor};
use crate::scalogram::ScalogramImage;

/// Result of one integer forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct QOutput {
    /// Int8 logits at the final boundary.
    pub logits: Vec<i8>,
    pub probs: Vec<f64>,
}

/// Integer-only executor. Every activation lives in one int8 arena laid out
/// by [`plan_memory`].
#[derive(Debug, Clone)]
pub struct Engine<'m> {
    model: &'m QuantModel,
    plan: MemoryPlan,
    offsets: Vec<usize>,
    requant: Vec<Option<RequantParams>>,
}

impl<'m> Engine<'m> {
    pub fn new(model: &'m QuantModel) -> Result<Self> {
        let plan = plan_memory(model);
        let steps: Vec<Step> = model.layers().iter().map(Step::of_quant).collect();
        let offsets = plan.boundary_offsets(&steps);
        let b = model.boundaries();
        let requant = model
            .layers()
            .iter()
            .enumerate()
            .map(|(i, l)| match l {
                QLayer::Conv2d { bias, .. } | QLayer::Dense { bias, .. } => {
                    RequantParams::new(bias.scale / b[i + 1].params.scale, b[i + 1].params.zero_point)
                        .map(Some)
                }
                _ => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model,
            plan,
            offsets,
            requant,
        })
    }

    pub fn plan(&self) -> &MemoryPlan {
        &self.plan
    }

    /// Runs one `[H, W, C]` input with values in the input encoding's range.
    pub fn run(&self, input: &Tensor) -> Result<QOutput> {
        let m = self.model;
        if input.shape() != m.input_shape() {
            return Err(Error::ShapeMismatch(format!(
                "model expects {:?}, got {:?}",
                m.input_shape(),
                input.shape()
            )));
        }
        let shapes = m.boundary_shapes();
        let bounds = m.boundaries();
        let len = |i: usize| shapes[i].iter().product::<usize>();
        let mut arena = vec![0i8; self.plan.arena_bytes];

        let p0 = bounds[0].params;
        for (q, &x) in arena[self.offsets[0]..self.offsets[0] + len(0)]
            .iter_mut()
            .zip(input.data())
        {
            *q = p0.quantize(x as f64);
        }

        for (i, layer) in m.layers().iter().enumerate() {
            let (xo, xn) = (self.offsets[i], len(i));
            let (yo, yn) = (self.offsets[i + 1], len(i + 1));
            let zx = bounds[i].params.zero_point;
            match layer {
                QLayer::Conv2d {
                    kernels,
                    bias,
                    activation,
                } => {
                    let (x, y) = disjoint(&mut arena, (xo, xn), (yo, yn));
                    let rq = self.requant[i].expect("set for conv");
                    qconv(x, &shapes[i], zx, kernels, &bias.data, rq, y);
                    relu(y, *activation, rq.zero_point);
                }
                QLayer::Dense {
                    weights,
                    bias,
                    activation,
                } => {
                    let (x, y) = disjoint(&mut arena, (xo, xn), (yo, yn));
                    let rq = self.requant[i].expect("set for dense");
                    qdense(x, zx, weights, &bias.data, rq, y);
                    relu(y, *activation, rq.zero_point);
                }
                QLayer::MaxPool2 => {
                    let [h, w, c] = shapes[i][..] else {
                        unreachable!("validated at load")
                    };
                    maxpool_in_place(&mut arena[xo..xo + xn], h, w, c);
                }
                QLayer::Flatten => {}
            }
        }

        let last = shapes.len() - 1;
        let off = self.offsets[last];
        let logits: Vec<i8> = arena[off..off + len(last)].to_vec();
        let pl = bounds[last].params;
        let deq: Vec<f64> = logits.iter().map(|&q| pl.dequantize(q)).collect();
        Ok(QOutput {
            probs: softmax(&deq),
            logits,
        })
    }

    pub fn run_image(&self, image: &ScalogramImage) -> Result<Vec<f64>> {
        Ok(self.run(&image_tensor(image))?.probs)
    }

    /// Probabilities for each image, computed in parallel.
    pub fn predict_all(&self, images: &[ScalogramImage]) -> Result<Vec<Vec<f64>>> {
        images.par_iter().map(|img| self.run_image(img)).collect()
    }
}

/// Integer inference on a single image.
pub fn qforward(qm: &QuantModel, image: &ScalogramImage) -> Result<Vec<f64>> {
    Engine::new(qm)?.run_image(image)
}

/// Integer inference on a single `[H, W, C]` tensor.
pub fn qforward_tensor(qm: &QuantModel, input: &Tensor) -> Result<Vec<f64>> {
    Ok(Engine::new(qm)?.run(input)?.probs)
}

/// Input and output views of two non-overlapping arena spans.
fn disjoint(arena: &mut [i8], (xo, xn): (usize, usize), (yo, yn): (usize, usize)) -> (&[i8], &mut [i8]) {
    debug_assert!(xo + xn <= yo || yo + yn <= xo, "overlapping buffers");
    if xo < yo {
        let (lo, hi) = arena.split_at_mut(yo);
        (&lo[xo..xo + xn], &mut hi[..yn])
    } else {
        let (lo, hi) = arena.split_at_mut(xo);
        (&hi[..xn], &mut lo[yo..yo + yn])
    }
}

fn relu(y: &mut [i8], activation: Activation, zp: i32) {
    if activation == Activation::Relu {
        let floor = zp.clamp(-128, 127) as i8;
        for v in y {
            *v = (*v).max(floor);
        }
    }
}

fn qconv(x: &[i8], in_shape: &[usize], zx: i32, k: &QTensor, bias: &[i32], rq: RequantParams, y: &mut [i8]) {
    let (w, c) = (in_shape[1], in_shape[2]);
    let (kh, kw, kk) = (k.shape[0], k.shape[1], k.shape[3]);
    let ow = w - kw + 1;
    let oh = in_shape[0] - kh + 1;
    let mut acc = vec![0i32; kk];
    for oy in 0..oh {
        for ox in 0..ow {
            acc.fill(0);
            for i in 0..kh {
                for j in 0..kw {
                    let base = ((oy + i) * w + ox + j) * c;
                    for ci in 0..c {
                        let v = x[base + ci] as i32 - zx;
                        let row = &k.data[((i * kw + j) * c + ci) * kk..((i * kw + j) * c + ci + 1) * kk];
                        for (a, &kv) in acc.iter_mut().zip(row) {
                            *a += v * kv as i32;
                        }
                    }
                }
            }
            let out = &mut y[(oy * ow + ox) * kk..(oy * ow + ox + 1) * kk];
            for ((o, &a), &b) in out.iter_mut().zip(&acc).zip(bias) {
                *o = requantize(a.saturating_add(b), rq);
            }
        }
    }
}

fn qdense(x: &[i8], zx: i32, wt: &QTensor, bias: &[i32], rq: RequantParams, y: &mut [i8]) {
    let n = wt.shape[1];
    for ((o, row), &b) in y.iter_mut().zip(wt.data.chunks_exact(n)).zip(bias) {
        let acc: i32 = row
            .iter()
            .zip(x)
            .map(|(&w, &v)| (v as i32 - zx) * w as i32)
            .sum();
        *o = requantize(acc.saturating_add(b), rq);
    }
}

/// 2×2 max pooling that overwrites its own input. Output element `j` only
/// reads input elements at index `>= j`, so ascending order is safe.
fn maxpool_in_place(buf: &mut [i8], h: usize, w: usize, c: usize) {
    let (oh, ow) = (h / 2, w / 2);
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let at = |dy: usize, dx: usize| ((2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                let m = buf[at(0, 0)].max(buf[at(0, 1)]).max(buf[at(1, 0)]).max(buf[at(1, 1)]);
                buf[(oy * ow + ox) * c + ch] = m;
            }
        }
    }
}
