//! `SDM1` model files, shared by float and quantized models.
//!
//! ```text
//! header : "SDM1" | u32 version | u8 quantized | u32 layer_count
//! layer  : u8 tag | u8 activation | u32 dims | dims × u32 output shape
//!          | [quantized: f32 min | f32 max | f64 scale | i32 zero_point]
//!          | u32 tensor_count | tensor*
//! tensor : u8 dtype | u32 dims | dims × u32 shape
//!          | [quantized: f64 scale | i32 zero_point] | payload
//! ```
//!
//! All values little-endian. The first layer record is always the input
//! (tag 0, no tensors). Payloads are f32 (dtype 0), i8 (1) or i32 (2).

use std::path::Path;

use super::arch::{Activation, Layer, Model};
use super::Tensor;
use crate::bytes::{put_f32, put_f64, put_i32, put_u32, Reader};
use crate::error::{Error, Result};

pub const SDM_MAGIC: [u8; 4] = *b"SDM1";
pub const SDM_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub(crate) enum LayerTag {
    Input = 0,
    Conv2d = 1,
    MaxPool2 = 2,
    Flatten = 3,
    Dense = 4,
}

impl LayerTag {
    fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            0 => LayerTag::Input,
            1 => LayerTag::Conv2d,
            2 => LayerTag::MaxPool2,
            3 => LayerTag::Flatten,
            4 => LayerTag::Dense,
            _ => return Err(Error::Malformed(format!("unknown layer tag {v}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub(crate) enum DType {
    F32 = 0,
    I8 = 1,
    I32 = 2,
}

impl DType {
    pub fn width(self) -> usize {
        match self {
            DType::F32 | DType::I32 => 4,
            DType::I8 => 1,
        }
    }

    fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            0 => DType::F32,
            1 => DType::I8,
            2 => DType::I32,
            _ => return Err(Error::Malformed(format!("unknown dtype {v}"))),
        })
    }
}

fn activation_tag(a: Activation) -> u8 {
    match a {
        Activation::Identity => 0,
        Activation::Relu => 1,
        Activation::Softmax => 2,
    }
}

fn activation_from(v: u8) -> Result<Activation> {
    Ok(match v {
        0 => Activation::Identity,
        1 => Activation::Relu,
        2 => Activation::Softmax,
        _ => return Err(Error::Malformed(format!("unknown activation {v}"))),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TensorRecord {
    pub dtype: DType,
    pub shape: Vec<usize>,
    pub quant: Option<(f64, i32)>,
    pub bytes: Vec<u8>,
}

impl TensorRecord {
    pub fn f32(shape: &[usize], values: &[f32]) -> Self {
        Self {
            dtype: DType::F32,
            shape: shape.to_vec(),
            quant: None,
            bytes: values.iter().flat_map(|v| v.to_le_bytes()).collect(),
        }
    }

    pub fn to_f32(&self) -> Result<Vec<f32>> {
        self.expect(DType::F32)?;
        Ok(self
            .bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }

    pub fn to_i8(&self) -> Result<Vec<i8>> {
        self.expect(DType::I8)?;
        Ok(self.bytes.iter().map(|&b| b as i8).collect())
    }

    pub fn to_i32(&self) -> Result<Vec<i32>> {
        self.expect(DType::I32)?;
        Ok(self
            .bytes
            .chunks_exact(4)
            .map(|b| i32::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }

    fn expect(&self, dtype: DType) -> Result<()> {
        if self.dtype != dtype {
            return Err(Error::Malformed(format!(
                "tensor dtype {:?}, expected {dtype:?}",
                self.dtype
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ActRecord {
    pub min: f32,
    pub max: f32,
    pub scale: f64,
    pub zero_point: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LayerRecord {
    pub tag: LayerTag,
    pub activation: Activation,
    pub shape: Vec<usize>,
    pub act: Option<ActRecord>,
    pub tensors: Vec<TensorRecord>,
}

pub(crate) fn encode(quantized: bool, layers: &[LayerRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&SDM_MAGIC);
    put_u32(&mut out, SDM_VERSION);
    out.push(quantized as u8);
    put_u32(&mut out, layers.len() as u32);
    for l in layers {
        out.push(l.tag as u8);
        out.push(activation_tag(l.activation));
        put_u32(&mut out, l.shape.len() as u32);
        l.shape.iter().for_each(|&d| put_u32(&mut out, d as u32));
        if quantized {
            let a = l.act.expect("quantized layer records carry activation params");
            put_f32(&mut out, a.min);
            put_f32(&mut out, a.max);
            put_f64(&mut out, a.scale);
            put_i32(&mut out, a.zero_point);
        }
        put_u32(&mut out, l.tensors.len() as u32);
        for t in &l.tensors {
            out.push(t.dtype as u8);
            put_u32(&mut out, t.shape.len() as u32);
            t.shape.iter().for_each(|&d| put_u32(&mut out, d as u32));
            if quantized {
                let (scale, zp) = t.quant.unwrap_or((1.0, 0));
                put_f64(&mut out, scale);
                put_i32(&mut out, zp);
            }
            out.extend_from_slice(&t.bytes);
        }
    }
    out
}

fn read_shape(r: &mut Reader<'_>) -> Result<Vec<usize>> {
    let dims = r.u32()? as usize;
    if dims > 4 {
        return Err(Error::Malformed(format!("{dims}-dimensional shape")));
    }
    (0..dims).map(|_| r.u32().map(|d| d as usize)).collect()
}

pub(crate) fn decode(buf: &[u8]) -> Result<(bool, Vec<LayerRecord>)> {
    let mut r = Reader::new(buf);
    r.magic(SDM_MAGIC)?;
    let version = r.u32()?;
    if version != SDM_VERSION {
        return Err(Error::VersionMismatch {
            expected: SDM_VERSION,
            found: version,
        });
    }
    let quantized = match r.u8()? {
        0 => false,
        1 => true,
        v => return Err(Error::Malformed(format!("quantized flag {v}"))),
    };
    let count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let tag = LayerTag::from_u8(r.u8()?)?;
        let activation = activation_from(r.u8()?)?;
        let shape = read_shape(&mut r)?;
        let act = if quantized {
            Some(ActRecord {
                min: r.f32()?,
                max: r.f32()?,
                scale: r.f64()?,
                zero_point: r.i32()?,
            })
        } else {
            None
        };
        let n_tensors = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(n_tensors.min(8));
        for _ in 0..n_tensors {
            let dtype = DType::from_u8(r.u8()?)?;
            let shape = read_shape(&mut r)?;
            let quant = if quantized {
                Some((r.f64()?, r.i32()?))
            } else {
                None
            };
            let n: usize = shape.iter().product();
            let bytes = r.payload(n, dtype.width())?.to_vec();
            tensors.push(TensorRecord {
                dtype,
                shape,
                quant,
                bytes,
            });
        }
        layers.push(LayerRecord {
            tag,
            activation,
            shape,
            act,
            tensors,
        });
    }
    if r.remaining() != 0 {
        return Err(Error::Malformed(format!(
            "{} trailing bytes after the last layer",
            r.remaining()
        )));
    }
    Ok((quantized, layers))
}

/// Bytes of framing around the payload: header, layer records, tensor headers.
pub(crate) fn metadata_bytes(quantized: bool, layers: &[LayerRecord]) -> usize {
    let q = quantized as usize;
    13 + layers
        .iter()
        .map(|l| {
            10 + 4 * l.shape.len()
                + 20 * q
                + l.tensors
                    .iter()
                    .map(|t| 5 + 4 * t.shape.len() + 12 * q)
                    .sum::<usize>()
        })
        .sum::<usize>()
}

pub(crate) fn model_records(model: &Model) -> Vec<LayerRecord> {
    let shapes = model.boundary_shapes().expect("model shapes are validated");
    let mut out = vec![LayerRecord {
        tag: LayerTag::Input,
        activation: Activation::Identity,
        shape: shapes[0].clone(),
        act: None,
        tensors: vec![],
    }];
    for (layer, shape) in model.layers().iter().zip(&shapes[1..]) {
        let (tag, tensors) = match layer {
            Layer::Conv2d { kernels, bias, .. } => (
                LayerTag::Conv2d,
                vec![
                    TensorRecord::f32(kernels.shape(), kernels.data()),
                    TensorRecord::f32(&[bias.len()], bias),
                ],
            ),
            Layer::MaxPool2 => (LayerTag::MaxPool2, vec![]),
            Layer::Flatten => (LayerTag::Flatten, vec![]),
            Layer::Dense { weights, bias, .. } => (
                LayerTag::Dense,
                vec![
                    TensorRecord::f32(weights.shape(), weights.data()),
                    TensorRecord::f32(&[bias.len()], bias),
                ],
            ),
        };
        out.push(LayerRecord {
            tag,
            activation: layer.activation(),
            shape: shape.clone(),
            act: None,
            tensors,
        });
    }
    out
}

fn tensor_pair(l: &LayerRecord) -> Result<(&TensorRecord, &TensorRecord)> {
    match l.tensors.as_slice() {
        [w, b] => Ok((w, b)),
        other => Err(Error::Malformed(format!(
            "{:?} layer with {} tensors",
            l.tag,
            other.len()
        ))),
    }
}

pub(crate) fn model_from_records(records: &[LayerRecord]) -> Result<Model> {
    let (input, rest) = records
        .split_first()
        .ok_or_else(|| Error::Malformed("no layers".into()))?;
    if input.tag != LayerTag::Input {
        return Err(Error::Malformed("first layer record must be the input".into()));
    }
    let mut layers = Vec::with_capacity(rest.len());
    for l in rest {
        let layer = match l.tag {
            LayerTag::Input => return Err(Error::Malformed("second input record".into())),
            LayerTag::MaxPool2 => Layer::MaxPool2,
            LayerTag::Flatten => Layer::Flatten,
            LayerTag::Conv2d => {
                let (w, b) = tensor_pair(l)?;
                Layer::Conv2d {
                    kernels: Tensor::new(w.shape.clone(), w.to_f32()?)?,
                    bias: b.to_f32()?,
                    activation: l.activation,
                }
            }
            LayerTag::Dense => {
                let (w, b) = tensor_pair(l)?;
                Layer::Dense {
                    weights: Tensor::new(w.shape.clone(), w.to_f32()?)?,
                    bias: b.to_f32()?,
                    activation: l.activation,
                }
            }
        };
        layers.push(layer);
    }
    let model = Model::new(input.shape.clone(), layers)?;
    check_shapes(&model.boundary_shapes()?, records)?;
    Ok(model)
}

pub(crate) fn check_shapes(shapes: &[Vec<usize>], records: &[LayerRecord]) -> Result<()> {
    for (i, (s, r)) in shapes.iter().zip(records).enumerate() {
        if *s != r.shape {
            return Err(Error::Malformed(format!(
                "layer record {i} declares shape {:?}, graph gives {s:?}",
                r.shape
            )));
        }
    }
    Ok(())
}

pub fn model_to_bytes(model: &Model) -> Vec<u8> {
    encode(false, &model_records(model))
}

pub fn model_from_bytes(buf: &[u8]) -> Result<Model> {
    let (quantized, records) = decode(buf)?;
    if quantized {
        return Err(Error::Malformed(
            "file holds a quantized model; load it as a QuantModel".into(),
        ));
    }
    model_from_records(&records)
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&buf)
}

/// Serialized size of a float model without encoding it.
pub fn model_file_bytes(model: &Model) -> usize {
    let records = model_records_shapes_only(model);
    metadata_bytes(false, &records) + model.payload_bytes()
}

fn model_records_shapes_only(model: &Model) -> Vec<LayerRecord> {
    let mut records = model_records(model);
    for r in &mut records {
        for t in &mut r.tensors {
            t.bytes = Vec::new();
        }
    }
    records
}
