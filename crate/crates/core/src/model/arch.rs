use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::kernels::{conv2d, dense, maxpool2_with_argmax, relu_inplace, softmax};
use super::Tensor;
use crate::error::{Error, Result};
use crate::scalogram::{ScalogramImage, IMAGE_SIZE};

pub const DEFAULT_HIDDEN_UNITS: usize = 384;
pub const DEFAULT_PARAM_COUNT: usize = 4_836_866;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Softmax,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv2d {
        kernels: Tensor,
        bias: Vec<f32>,
        activation: Activation,
    },
    MaxPool2,
    Flatten,
    Dense {
        weights: Tensor,
        bias: Vec<f32>,
        activation: Activation,
    },
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv2d { .. } => "conv2d",
            Layer::MaxPool2 => "maxpool2",
            Layer::Flatten => "flatten",
            Layer::Dense { .. } => "dense",
        }
    }

    pub fn activation(&self) -> Activation {
        match self {
            Layer::Conv2d { activation, .. } | Layer::Dense { activation, .. } => *activation,
            _ => Activation::Identity,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::Conv2d { kernels, bias, .. } => kernels.len() + bias.len(),
            Layer::Dense { weights, bias, .. } => weights.len() + bias.len(),
            _ => 0,
        }
    }

    /// Output shape for a given input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            Layer::Conv2d { kernels, bias, .. } => {
                let (kh, kw, kc, k) = match *kernels.shape() {
                    [a, b, c, d] => (a, b, c, d),
                    ref s => return Err(Error::ShapeMismatch(format!("conv kernels {s:?}"))),
                };
                match *input {
                    [h, w, c] if c == kc && h >= kh && w >= kw && bias.len() == k => {
                        Ok(vec![h - kh + 1, w - kw + 1, k])
                    }
                    _ => Err(Error::ShapeMismatch(format!(
                        "conv {:?} cannot take input {input:?}",
                        kernels.shape()
                    ))),
                }
            }
            Layer::MaxPool2 => match *input {
                [h, w, c] if h >= 2 && w >= 2 => Ok(vec![h / 2, w / 2, c]),
                _ => Err(Error::ShapeMismatch(format!("pool cannot take {input:?}"))),
            },
            Layer::Flatten => Ok(vec![input.iter().product()]),
            Layer::Dense { weights, bias, .. } => match (weights.shape(), input) {
                (&[o, i], &[n]) if i == n && bias.len() == o => Ok(vec![o]),
                _ => Err(Error::ShapeMismatch(format!(
                    "dense {:?} cannot take input {input:?}",
                    weights.shape()
                ))),
            },
        }
    }
}

/// Per-layer outputs of one forward pass. `outputs[i]` is the output of
/// layer `i` after its activation, except the final layer, which holds logits.
#[derive(Debug, Clone)]
pub struct Trace {
    pub input: Tensor,
    pub outputs: Vec<Tensor>,
    pub pool_argmax: Vec<Option<Vec<usize>>>,
    pub probs: Vec<f64>,
}

impl Trace {
    /// Boundary `0` is the input, boundary `i + 1` the output of layer `i`.
    pub fn boundary(&self, i: usize) -> &Tensor {
        if i == 0 {
            &self.input
        } else {
            &self.outputs[i - 1]
        }
    }
}

/// A sequential CNN ending in a softmax dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
}

impl Model {
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        if input_shape.len() != 3 {
            return Err(Error::ShapeMismatch(format!(
                "model input must be [H, W, C], got {input_shape:?}"
            )));
        }
        let model = Self {
            input_shape,
            layers,
        };
        model.boundary_shapes()?;
        match model.layers.last() {
            Some(Layer::Dense {
                activation: Activation::Softmax,
                ..
            }) => {}
            _ => {
                return Err(Error::ShapeMismatch(
                    "last layer must be a softmax dense layer".into(),
                ))
            }
        }
        if model.layers[..model.layers.len() - 1]
            .iter()
            .any(|l| l.activation() == Activation::Softmax)
        {
            return Err(Error::ShapeMismatch("softmax only allowed on the last layer".into()));
        }
        Ok(model)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn into_layers(self) -> Vec<Layer> {
        self.layers
    }

    /// Shapes at every layer boundary, input first.
    pub fn boundary_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut shapes = vec![self.input_shape.clone()];
        for layer in &self.layers {
            let next = layer.output_shape(shapes.last().unwrap())?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn num_classes(&self) -> usize {
        match self.layers.last() {
            Some(Layer::Dense { bias, .. }) => bias.len(),
            _ => 0,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Bytes needed to store every parameter as f32.
    pub fn payload_bytes(&self) -> usize {
        self.param_count() * 4
    }

    /// Parameter tensors in layer order: weights then bias for each layer.
    pub fn params(&self) -> Vec<&[f32]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv2d { kernels, bias, .. } => {
                    out.push(kernels.data());
                    out.push(bias.as_slice());
                }
                Layer::Dense { weights, bias, .. } => {
                    out.push(weights.data());
                    out.push(bias.as_slice());
                }
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f32]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv2d { kernels, bias, .. } => {
                    out.push(kernels.data_mut());
                    out.push(bias.as_mut_slice());
                }
                Layer::Dense { weights, bias, .. } => {
                    out.push(weights.data_mut());
                    out.push(bias.as_mut_slice());
                }
                _ => {}
            }
        }
        out
    }

    /// Sets every weight and bias to zero.
    pub fn zero_weights(&mut self) {
        for p in self.params_mut() {
            p.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Runs one example, keeping every intermediate output.
    pub fn trace(&self, input: &Tensor) -> Result<Trace> {
        if input.shape() != self.input_shape.as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "model expects {:?}, got {:?}",
                self.input_shape,
                input.shape()
            )));
        }
        let mut outputs: Vec<Tensor> = Vec::with_capacity(self.layers.len());
        let mut pool_argmax = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let x = outputs.last().unwrap_or(input);
            let mut arg = None;
            let mut y = match layer {
                Layer::Conv2d { kernels, bias, .. } => conv2d(x, kernels, bias)?,
                Layer::MaxPool2 => {
                    let (t, a) = maxpool2_with_argmax(x)?;
                    arg = Some(a);
                    t
                }
                Layer::Flatten => x.clone().reshape(vec![x.len()])?,
                Layer::Dense { weights, bias, .. } => {
                    let out = dense(x.data(), weights, bias)?;
                    let n = out.len();
                    Tensor::new(vec![n], out)?
                }
            };
            if layer.activation() == Activation::Relu {
                relu_inplace(y.data_mut());
            }
            outputs.push(y);
            pool_argmax.push(arg);
        }
        let logits: Vec<f64> = outputs
            .last()
            .map(|t| t.data().iter().map(|&v| v as f64).collect())
            .unwrap_or_default();
        Ok(Trace {
            input: input.clone(),
            outputs,
            pool_argmax,
            probs: softmax(&logits),
        })
    }

    /// Class probabilities for a single `[H, W, C]` example.
    pub fn forward_one(&self, input: &Tensor) -> Result<Vec<f64>> {
        Ok(self.trace(input)?.probs)
    }

    /// Class probabilities for each example of an `[N, H, W, C]` batch.
    pub fn forward(&self, batch: &Tensor) -> Result<Vec<Vec<f64>>> {
        if batch.shape().len() != 4 || batch.shape()[1..] != self.input_shape[..] {
            return Err(Error::ShapeMismatch(format!(
                "batch must be [N, {:?}], got {:?}",
                self.input_shape,
                batch.shape()
            )));
        }
        batch.unbatch()?.iter().map(|x| self.forward_one(x)).collect()
    }

    pub fn predict_image(&self, image: &ScalogramImage) -> Result<Vec<f64>> {
        self.forward_one(&image_tensor(image))
    }
}

/// A 64×64 image as a `[64, 64, 1]` tensor.
pub fn image_tensor(image: &ScalogramImage) -> Tensor {
    Tensor::new(vec![IMAGE_SIZE, IMAGE_SIZE, 1], image.pixels.clone())
        .expect("images are always 64x64")
}

#[derive(Debug, Clone)]
enum LayerSpec {
    Conv { filters: usize, size: usize },
    Pool,
    Flatten,
    Dense { units: usize, activation: Activation },
}

/// Declarative model construction with He-normal initialization.
#[derive(Debug, Clone)]
pub struct ModelBuilder {
    input_shape: Vec<usize>,
    specs: Vec<LayerSpec>,
}

impl ModelBuilder {
    pub fn new(input_shape: [usize; 3]) -> Self {
        Self {
            input_shape: input_shape.to_vec(),
            specs: Vec::new(),
        }
    }

    /// 3×3 valid convolution with ReLU.
    pub fn conv(mut self, filters: usize) -> Self {
        self.specs.push(LayerSpec::Conv { filters, size: 3 });
        self
    }

    pub fn pool(mut self) -> Self {
        self.specs.push(LayerSpec::Pool);
        self
    }

    pub fn flatten(mut self) -> Self {
        self.specs.push(LayerSpec::Flatten);
        self
    }

    /// Hidden dense layer with ReLU.
    pub fn dense(mut self, units: usize) -> Self {
        self.specs.push(LayerSpec::Dense {
            units,
            activation: Activation::Relu,
        });
        self
    }

    /// Final softmax classifier.
    pub fn output(mut self, classes: usize) -> Self {
        self.specs.push(LayerSpec::Dense {
            units: classes,
            activation: Activation::Softmax,
        });
        self
    }

    pub fn build(&self, seed: u64) -> Result<Model> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut he = |fan_in: usize, n: usize| -> Vec<f32> {
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
            (0..n).map(|_| normal.sample(&mut rng) as f32).collect()
        };
        let mut shape = self.input_shape.clone();
        let mut layers = Vec::with_capacity(self.specs.len());
        for spec in &self.specs {
            let layer = match *spec {
                LayerSpec::Conv { filters, size } => {
                    let c = *shape.last().unwrap_or(&1);
                    let fan_in = size * size * c;
                    Layer::Conv2d {
                        kernels: Tensor::new(
                            vec![size, size, c, filters],
                            he(fan_in, fan_in * filters),
                        )?,
                        bias: vec![0.0; filters],
                        activation: Activation::Relu,
                    }
                }
                LayerSpec::Pool => Layer::MaxPool2,
                LayerSpec::Flatten => Layer::Flatten,
                LayerSpec::Dense { units, activation } => {
                    let fan_in: usize = shape.iter().product();
                    Layer::Dense {
                        weights: Tensor::new(vec![units, fan_in], he(fan_in, fan_in * units))?,
                        bias: vec![0.0; units],
                        activation,
                    }
                }
            };
            shape = layer.output_shape(&shape)?;
            layers.push(layer);
        }
        Model::new(self.input_shape.clone(), layers)
    }
}

/// The default architecture with a configurable hidden width:
/// conv(32) → pool → conv(64) → pool → flatten → dense(hidden) → dense(2).
pub fn default_builder(hidden_units: usize) -> ModelBuilder {
    ModelBuilder::new([IMAGE_SIZE, IMAGE_SIZE, 1])
        .conv(32)
        .pool()
        .conv(64)
        .pool()
        .flatten()
        .dense(hidden_units)
        .output(2)
}

pub fn build_default_model(seed: u64) -> Model {
    let model = default_builder(DEFAULT_HIDDEN_UNITS)
        .build(seed)
        .expect("default architecture chains");
    debug_assert_eq!(model.param_count(), DEFAULT_PARAM_COUNT);
    model
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape_chain() {
        let m = build_default_model(0);
        let shapes = m.boundary_shapes().unwrap();
        let expected: Vec<Vec<usize>> = vec![
            vec![64, 64, 1],
            vec![62, 62, 32],
            vec![31, 31, 32],
            vec![29, 29, 64],
            vec![14, 14, 64],
            vec![12544],
            vec![384],
            vec![2],
        ];
        assert_eq!(shapes, expected);
    }

    #[test]
    fn default_param_count() {
        let m = build_default_model(0);
        let per_layer: Vec<usize> = m.layers().iter().map(Layer::param_count).collect();
        assert_eq!(per_layer, vec![320, 0, 18_496, 0, 0, 4_817_280, 770]);
        assert_eq!(m.param_count(), 4_836_866);
        assert_eq!(m.payload_bytes(), 19_347_464);
    }

    #[test]
    fn same_seed_same_weights() {
        let a = default_builder(8).build(5).unwrap();
        let b = default_builder(8).build(5).unwrap();
        let c = default_builder(8).build(6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn he_init_statistics() {
        let m = default_builder(16).build(1).unwrap();
        let Layer::Conv2d { kernels, bias, .. } = &m.layers()[2] else {
            panic!()
        };
        assert!(bias.iter().all(|&b| b == 0.0));
        let n = kernels.len() as f64;
        let var = kernels.data().iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / n;
        let expected = 2.0 / (9.0 * 32.0);
        assert!((var / expected - 1.0).abs() < 0.1, "{var} vs {expected}");
    }

    #[test]
    fn zero_model_is_uniform() {
        let mut m = default_builder(4).build(0).unwrap();
        m.zero_weights();
        let batch = Tensor::new(vec![2, 64, 64, 1], vec![0.3; 2 * 4096]).unwrap();
        for p in m.forward(&batch).unwrap() {
            assert_eq!(p, vec![0.5, 0.5]);
        }
    }

    #[test]
    fn forward_shape_contract() {
        let m = default_builder(4).build(3).unwrap();
        let batch = Tensor::new(
            vec![3, 64, 64, 1],
            (0..3 * 4096).map(|i| (i % 17) as f32 / 16.0).collect(),
        )
        .unwrap();
        let out = m.forward(&batch).unwrap();
        assert_eq!(out.len(), 3);
        for p in &out {
            assert_eq!(p.len(), 2);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        assert_eq!(out, m.forward(&batch).unwrap());
        let bad = Tensor::zeros(vec![1, 32, 32, 1]);
        assert!(m.forward(&bad).is_err());
    }

    #[test]
    fn rejects_broken_chain() {
        let bad = ModelBuilder::new([8, 8, 1]).conv(2).pool().pool().pool().flatten().output(2);
        assert!(bad.build(0).is_err());
        let no_softmax = Model::new(vec![4, 4, 1], vec![Layer::Flatten]);
        assert!(no_softmax.is_err());
    }
}
