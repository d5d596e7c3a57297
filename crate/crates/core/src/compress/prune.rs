use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Layer, Model, Tensor};

pub const DEFAULT_KEEP_UNITS: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PruneConfig {
    /// Hidden dense units to keep.
    pub keep: usize,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            keep: DEFAULT_KEEP_UNITS,
        }
    }
}

/// Index of the hidden dense layer: a dense layer directly followed by the
/// final dense layer.
fn hidden_dense_index(model: &Model) -> Result<usize> {
    let layers = model.layers();
    let n = layers.len();
    match (layers.get(n.wrapping_sub(2)), layers.last()) {
        (Some(Layer::Dense { .. }), Some(Layer::Dense { .. })) => Ok(n - 2),
        _ => Err(Error::ShapeMismatch(
            "unit pruning needs a hidden dense layer feeding the output layer".into(),
        )),
    }
}

/// L2 norm of each hidden unit's incoming weights together with its bias.
pub fn unit_norms(model: &Model) -> Result<Vec<f64>> {
    let idx = hidden_dense_index(model)?;
    let Layer::Dense { weights, bias, .. } = &model.layers()[idx] else {
        unreachable!()
    };
    let fan_in = weights.shape()[1];
    Ok(weights
        .data()
        .chunks_exact(fan_in)
        .zip(bias)
        .map(|(row, &b)| {
            let s: f64 = row.iter().map(|&w| (w as f64).powi(2)).sum();
            (s + (b as f64).powi(2)).sqrt()
        })
        .collect())
}

/// Indices of the `keep` largest norms (ties to the lower index), ascending.
pub fn select_units(norms: &[f64], keep: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    let mut kept = order[..keep.min(norms.len())].to_vec();
    kept.sort_unstable();
    kept
}

/// Structured pruning of hidden dense units: drops the weakest units' rows in
/// the hidden layer and the matching columns of the output layer. The result
/// is a smaller dense model with no masks.
pub fn prune_dense_units(model: &Model, cfg: &PruneConfig) -> Result<Model> {
    let idx = hidden_dense_index(model)?;
    let norms = unit_norms(model)?;
    let width = norms.len();
    if cfg.keep == 0 || cfg.keep > width {
        return Err(Error::InvalidParam(format!(
            "keep must be in 1..={width}, got {}",
            cfg.keep
        )));
    }
    let kept = select_units(&norms, cfg.keep);

    let mut layers = model.layers().to_vec();
    let (head, tail) = layers.split_at_mut(idx + 1);
    let (
        Layer::Dense {
            weights: w1,
            bias: b1,
            ..
        },
        Layer::Dense {
            weights: w2,
            bias: _,
            ..
        },
    ) = (&mut head[idx], &mut tail[0])
    else {
        unreachable!()
    };

    let fan_in = w1.shape()[1];
    let rows: Vec<f32> = kept
        .iter()
        .flat_map(|&u| w1.data()[u * fan_in..(u + 1) * fan_in].iter().copied())
        .collect();
    *w1 = Tensor::new(vec![kept.len(), fan_in], rows)?;
    *b1 = kept.iter().map(|&u| b1[u]).collect();

    let outputs = w2.shape()[0];
    let cols: Vec<f32> = (0..outputs)
        .flat_map(|o| kept.iter().map(move |&u| (o, u)))
        .map(|(o, u)| w2.data()[o * width + u])
        .collect();
    *w2 = Tensor::new(vec![outputs, kept.len()], cols)?;

    Model::new(model.input_shape().to_vec(), layers)
}
