use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{image_tensor, Model};
use crate::scalogram::ScalogramImage;

/// Scale and zero point of an int8 encoding: `x ≈ scale · (q − zero_point)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantParams {
    pub scale: f64,
    pub zero_point: i32,
}

impl QuantParams {
    #[inline]
    pub fn quantize(&self, x: f64) -> i8 {
        ((x / self.scale).round_ties_even() as i64 + self.zero_point as i64).clamp(-128, 127) as i8
    }

    #[inline]
    pub fn dequantize(&self, q: i8) -> f64 {
        self.scale * (q as i32 - self.zero_point) as f64
    }

    /// Affine params covering `[min, max]`; the range must already contain 0
    /// and be non-degenerate.
    pub fn affine(min: f64, max: f64) -> Self {
        let scale = (max - min) / 255.0;
        let zero_point = (-min / scale).round_ties_even() as i32 - 128;
        Self {
            scale,
            zero_point: zero_point.clamp(-128, 127),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Zero point 0, `scale = max|x| / 127`.
    Symmetric,
    /// `scale = (max − min) / 255`, `zp = round(−min / scale) − 128`.
    Affine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    pub data: Vec<i8>,
    pub params: QuantParams,
}

impl QuantizedTensor {
    pub fn dequantize(&self) -> Vec<f64> {
        self.data.iter().map(|&q| self.params.dequantize(q)).collect()
    }
}

/// Quantizes finite values to int8 with round-half-to-even.
///
/// An all-zero tensor gets scale 1 and zero point 0.
pub fn quantize_tensor(values: &[f32], scheme: Scheme) -> QuantizedTensor {
    match scheme {
        Scheme::Symmetric => {
            let max_abs = values.iter().fold(0.0f64, |m, &v| m.max((v as f64).abs()));
            if max_abs == 0.0 {
                return QuantizedTensor {
                    data: vec![0; values.len()],
                    params: QuantParams {
                        scale: 1.0,
                        zero_point: 0,
                    },
                };
            }
            // x·127/max rather than x/scale keeps exact halves exact
            let data = values
                .iter()
                .map(|&v| ((v as f64 * 127.0 / max_abs).round_ties_even()).clamp(-128.0, 127.0) as i8)
                .collect();
            QuantizedTensor {
                data,
                params: QuantParams {
                    scale: max_abs / 127.0,
                    zero_point: 0,
                },
            }
        }
        Scheme::Affine => {
            let (lo, hi) = values.iter().fold((0.0f64, 0.0f64), |(lo, hi), &v| {
                (lo.min(v as f64), hi.max(v as f64))
            });
            let params = if hi > lo {
                QuantParams::affine(lo, hi)
            } else {
                QuantParams {
                    scale: 1.0,
                    zero_point: 0,
                }
            };
            QuantizedTensor {
                data: values.iter().map(|&v| params.quantize(v as f64)).collect(),
                params,
            }
        }
    }
}

/// Observed activation range at one layer boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActRange {
    pub min: f32,
    pub max: f32,
}

impl ActRange {
    /// Range stretched to contain 0; a degenerate `[0, 0]` becomes `[0, 1]`.
    pub fn widened(&self) -> ActRange {
        let (min, max) = (self.min.min(0.0), self.max.max(0.0));
        if min == max {
            ActRange { min: 0.0, max: 1.0 }
        } else {
            ActRange { min, max }
        }
    }

    pub fn params(&self) -> QuantParams {
        let w = self.widened();
        QuantParams::affine(w.min as f64, w.max as f64)
    }

    fn merge(self, other: ActRange) -> ActRange {
        ActRange {
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }
}

/// Raw (unwidened) min/max at every layer boundary, input first.
pub fn calibrate(model: &Model, images: &[ScalogramImage]) -> Result<Vec<ActRange>> {
    if images.is_empty() {
        return Err(Error::Empty("calibration set"));
    }
    let per_image: Vec<Result<Vec<ActRange>>> = images
        .par_iter()
        .map(|img| {
            let trace = model.trace(&image_tensor(img))?;
            Ok((0..=trace.outputs.len())
                .map(|b| {
                    let d = trace.boundary(b).data();
                    d.iter().fold(
                        ActRange {
                            min: f32::INFINITY,
                            max: f32::NEG_INFINITY,
                        },
                        |r, &v| ActRange {
                            min: r.min.min(v),
                            max: r.max.max(v),
                        },
                    )
                })
                .collect())
        })
        .collect();
    let mut acc: Option<Vec<ActRange>> = None;
    for r in per_image {
        let r = r?;
        acc = Some(match acc {
            None => r,
            Some(a) => a.into_iter().zip(r).map(|(x, y)| x.merge(y)).collect(),
        });
    }
    Ok(acc.expect("non-empty calibration set"))
}
