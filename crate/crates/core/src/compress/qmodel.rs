use std::path::Path;

use super::quant::{quantize_tensor, ActRange, QuantParams, Scheme};
use crate::error::{Error, Result};
use crate::model::io::{
    check_shapes, decode, encode, metadata_bytes, model_from_records, ActRecord, DType,
    LayerRecord, LayerTag, TensorRecord,
};
use crate::model::{Activation, Layer, Model};

/// Symmetric int8 weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QTensor {
    pub shape: Vec<usize>,
    pub data: Vec<i8>,
    pub scale: f64,
}

/// int32 biases at `scale = s_input · s_weight`.
#[derive(Debug, Clone, PartialEq)]
pub struct QBias {
    pub data: Vec<i32>,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QLayer {
    Conv2d {
        kernels: QTensor,
        bias: QBias,
        activation: Activation,
    },
    MaxPool2,
    Flatten,
    Dense {
        weights: QTensor,
        bias: QBias,
        activation: Activation,
    },
}

impl QLayer {
    pub fn activation(&self) -> Activation {
        match self {
            QLayer::Conv2d { activation, .. } | QLayer::Dense { activation, .. } => *activation,
            _ => Activation::Identity,
        }
    }
}

/// Quantization of the activations at one layer boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundary {
    /// Calibrated range after widening.
    pub range: ActRange,
    pub params: QuantParams,
}

/// Int8 model with the same layer graph as its float parent.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantModel {
    input_shape: Vec<usize>,
    layers: Vec<QLayer>,
    boundaries: Vec<Boundary>,
    shapes: Vec<Vec<usize>>,
}

impl QuantModel {
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[QLayer] {
        &self.layers
    }

    /// One entry per layer boundary, input first.
    pub fn boundaries(&self) -> &[Boundary] {
        &self.boundaries
    }

    pub fn boundary_shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn weight_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                QLayer::Conv2d { kernels: w, .. } | QLayer::Dense { weights: w, .. } => w.data.len(),
                _ => 0,
            })
            .sum()
    }

    pub fn bias_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                QLayer::Conv2d { bias, .. } | QLayer::Dense { bias, .. } => bias.data.len(),
                _ => 0,
            })
            .sum()
    }

    /// Parameter bytes: one per weight, four per bias.
    pub fn payload_bytes(&self) -> usize {
        self.weight_count() + 4 * self.bias_count()
    }

    /// Size of the serialized `SDM1` file.
    pub fn file_bytes(&self) -> usize {
        metadata_bytes(true, &self.records()) + self.payload_bytes()
    }

    /// Float model with the dequantized weights and biases.
    pub fn dequantized(&self) -> Result<Model> {
        let layers = self
            .layers
            .iter()
            .map(|l| -> Result<Layer> {
                Ok(match l {
                    QLayer::Conv2d {
                        kernels,
                        bias,
                        activation,
                    } => Layer::Conv2d {
                        kernels: dequant_weights(kernels)?,
                        bias: dequant_bias(bias),
                        activation: *activation,
                    },
                    QLayer::Dense {
                        weights,
                        bias,
                        activation,
                    } => Layer::Dense {
                        weights: dequant_weights(weights)?,
                        bias: dequant_bias(bias),
                        activation: *activation,
                    },
                    QLayer::MaxPool2 => Layer::MaxPool2,
                    QLayer::Flatten => Layer::Flatten,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Model::new(self.input_shape.clone(), layers)
    }

    fn records(&self) -> Vec<LayerRecord> {
        let act = |b: &Boundary| {
            Some(ActRecord {
                min: b.range.min,
                max: b.range.max,
                scale: b.params.scale,
                zero_point: b.params.zero_point,
            })
        };
        let mut out = vec![LayerRecord {
            tag: LayerTag::Input,
            activation: Activation::Identity,
            shape: self.shapes[0].clone(),
            act: act(&self.boundaries[0]),
            tensors: vec![],
        }];
        for (i, l) in self.layers.iter().enumerate() {
            let (tag, tensors) = match l {
                QLayer::Conv2d { kernels, bias, .. } => (LayerTag::Conv2d, qtensors(kernels, bias)),
                QLayer::Dense { weights, bias, .. } => (LayerTag::Dense, qtensors(weights, bias)),
                QLayer::MaxPool2 => (LayerTag::MaxPool2, vec![]),
                QLayer::Flatten => (LayerTag::Flatten, vec![]),
            };
            out.push(LayerRecord {
                tag,
                activation: l.activation(),
                shape: self.shapes[i + 1].clone(),
                act: act(&self.boundaries[i + 1]),
                tensors,
            });
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode(true, &self.records())
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let (quantized, records) = decode(buf)?;
        if !quantized {
            return Err(Error::Malformed(
                "file holds a float model; load it as a Model".into(),
            ));
        }
        from_records(&records)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }
}

fn dequant_weights(w: &QTensor) -> Result<crate::model::Tensor> {
    crate::model::Tensor::new(
        w.shape.clone(),
        w.data.iter().map(|&q| (q as f64 * w.scale) as f32).collect(),
    )
}

fn dequant_bias(b: &QBias) -> Vec<f32> {
    b.data.iter().map(|&q| (q as f64 * b.scale) as f32).collect()
}

fn qtensors(w: &QTensor, b: &QBias) -> Vec<TensorRecord> {
    vec![
        TensorRecord {
            dtype: DType::I8,
            shape: w.shape.clone(),
            quant: Some((w.scale, 0)),
            bytes: w.data.iter().map(|&q| q as u8).collect(),
        },
        TensorRecord {
            dtype: DType::I32,
            shape: vec![b.data.len()],
            quant: Some((b.scale, 0)),
            bytes: b.data.iter().flat_map(|q| q.to_le_bytes()).collect(),
        },
    ]
}

fn from_records(records: &[LayerRecord]) -> Result<QuantModel> {
    let input = records
        .first()
        .ok_or_else(|| Error::Malformed("no layers".into()))?;
    if input.tag != LayerTag::Input {
        return Err(Error::Malformed("first layer record must be the input".into()));
    }
    let mut layers = Vec::with_capacity(records.len() - 1);
    let mut boundaries = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let a = r
            .act
            .ok_or_else(|| Error::Malformed(format!("layer record {i} lacks activation params")))?;
        if !(a.scale > 0.0) {
            return Err(Error::Malformed(format!("layer record {i}: scale {}", a.scale)));
        }
        boundaries.push(Boundary {
            range: ActRange {
                min: a.min,
                max: a.max,
            },
            params: QuantParams {
                scale: a.scale,
                zero_point: a.zero_point,
            },
        });
        if i == 0 {
            continue;
        }
        let pair = || -> Result<(QTensor, QBias)> {
            let [w, b] = r.tensors.as_slice() else {
                return Err(Error::Malformed(format!("layer record {i}: expected 2 tensors")));
            };
            Ok((
                QTensor {
                    shape: w.shape.clone(),
                    data: w.to_i8()?,
                    scale: w.quant.map_or(1.0, |q| q.0),
                },
                QBias {
                    data: b.to_i32()?,
                    scale: b.quant.map_or(1.0, |q| q.0),
                },
            ))
        };
        layers.push(match r.tag {
            LayerTag::Input => return Err(Error::Malformed("second input record".into())),
            LayerTag::MaxPool2 => QLayer::MaxPool2,
            LayerTag::Flatten => QLayer::Flatten,
            LayerTag::Conv2d => {
                let (kernels, bias) = pair()?;
                QLayer::Conv2d {
                    kernels,
                    bias,
                    activation: r.activation,
                }
            }
            LayerTag::Dense => {
                let (weights, bias) = pair()?;
                QLayer::Dense {
                    weights,
                    bias,
                    activation: r.activation,
                }
            }
        });
    }

    // Validate the graph through its float twin.
    let float_records: Vec<LayerRecord> = records
        .iter()
        .map(|r| LayerRecord {
            tensors: r
                .tensors
                .iter()
                .map(|t| TensorRecord {
                    dtype: DType::F32,
                    shape: t.shape.clone(),
                    quant: None,
                    bytes: vec![0; t.shape.iter().product::<usize>() * 4],
                })
                .collect(),
            act: None,
            ..r.clone()
        })
        .collect();
    let twin = model_from_records(&float_records)?;
    let shapes = twin.boundary_shapes()?;
    check_shapes(&shapes, records)?;
    Ok(QuantModel {
        input_shape: input.shape.clone(),
        layers,
        boundaries,
        shapes,
    })
}

/// Post-training quantization: symmetric int8 weights, int32 biases at
/// `s_in · s_w`, affine int8 activations from the calibrated ranges.
/// Pooling and flatten reuse their input's encoding.
pub fn quantize_ptq(model: &Model, ranges: &[ActRange]) -> Result<QuantModel> {
    let shapes = model.boundary_shapes()?;
    if ranges.len() < shapes.len() {
        return Err(Error::MissingRange(ranges.len()));
    }
    let mut boundaries: Vec<Boundary> = Vec::with_capacity(shapes.len());
    let r0 = ranges[0];
    boundaries.push(Boundary {
        range: r0.widened(),
        params: r0.params(),
    });
    let mut layers = Vec::with_capacity(model.layers().len());
    for (i, layer) in model.layers().iter().enumerate() {
        let s_in = boundaries[i].params.scale;
        let own = Boundary {
            range: ranges[i + 1].widened(),
            params: ranges[i + 1].params(),
        };
        let (q, b) = match layer {
            Layer::Conv2d {
                kernels,
                bias,
                activation,
            } => {
                let (w, b) = quantize_weights(kernels.shape(), kernels.data(), bias, s_in);
                (
                    QLayer::Conv2d {
                        kernels: w,
                        bias: b,
                        activation: *activation,
                    },
                    own,
                )
            }
            Layer::Dense {
                weights,
                bias,
                activation,
            } => {
                let (w, b) = quantize_weights(weights.shape(), weights.data(), bias, s_in);
                (
                    QLayer::Dense {
                        weights: w,
                        bias: b,
                        activation: *activation,
                    },
                    own,
                )
            }
            Layer::MaxPool2 => (
                QLayer::MaxPool2,
                Boundary {
                    range: own.range,
                    params: boundaries[i].params,
                },
            ),
            Layer::Flatten => (
                QLayer::Flatten,
                Boundary {
                    range: own.range,
                    params: boundaries[i].params,
                },
            ),
        };
        layers.push(q);
        boundaries.push(b);
    }
    Ok(QuantModel {
        input_shape: model.input_shape().to_vec(),
        layers,
        boundaries,
        shapes,
    })
}

fn quantize_weights(shape: &[usize], w: &[f32], bias: &[f32], s_in: f64) -> (QTensor, QBias) {
    let qw = quantize_tensor(w, Scheme::Symmetric);
    let bias_scale = s_in * qw.params.scale;
    let qb = bias
        .iter()
        .map(|&b| (b as f64 / bias_scale).round_ties_even().clamp(i32::MIN as f64, i32::MAX as f64) as i32)
        .collect();
    (
        QTensor {
            shape: shape.to_vec(),
            data: qw.data,
            scale: qw.params.scale,
        },
        QBias {
            data: qb,
            scale: bias_scale,
        },
    )
}

/// Either kind of `SDM1` model.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Float(Model),
    Quant(QuantModel),
}

impl AnyModel {
    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let (quantized, records) = decode(buf)?;
        if quantized {
            Ok(AnyModel::Quant(from_records(&records)?))
        } else {
            Ok(AnyModel::Float(model_from_records(&records)?))
        }
    }
}

pub fn load_any(path: impl AsRef<Path>) -> Result<AnyModel> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    AnyModel::from_bytes(&buf)
}
