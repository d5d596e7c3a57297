use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ScalogramImage, IMAGE_SIZE};
use crate::error::{Error, Result};

/// Random flip / rotation / shift applied to training images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentParams {
    pub max_rotation_deg: f64,
    /// Maximum width and height shift as a fraction of the image side.
    pub max_shift: f64,
    pub flip_prob: f64,
    pub seed: u64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self {
            max_rotation_deg: 10.0,
            max_shift: 0.10,
            flip_prob: 0.5,
            seed: 0,
        }
    }
}

impl AugmentParams {
    /// Parameters that leave every image untouched.
    pub fn identity() -> Self {
        Self {
            max_rotation_deg: 0.0,
            max_shift: 0.0,
            flip_prob: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=45.0).contains(&self.max_rotation_deg) {
            return Err(Error::InvalidParam("rotation must be in [0, 45] degrees".into()));
        }
        if !(0.0..0.5).contains(&self.max_shift) {
            return Err(Error::InvalidParam("shift fraction must be in [0, 0.5)".into()));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::InvalidParam("flip probability must be in [0, 1]".into()));
        }
        Ok(())
    }
}

fn sample_bilinear(img: &ScalogramImage, y: f64, x: f64) -> f64 {
    let n = IMAGE_SIZE as isize;
    let y0 = y.floor();
    let x0 = x.floor();
    let (fy, fx) = (y - y0, x - x0);
    let (y0, x0) = (y0 as isize, x0 as isize);
    let px = |r: isize, c: isize| -> f64 {
        if r < 0 || c < 0 || r >= n || c >= n {
            0.0
        } else {
            img.at(r as usize, c as usize) as f64
        }
    };
    px(y0, x0) * (1.0 - fy) * (1.0 - fx)
        + px(y0, x0 + 1) * (1.0 - fy) * fx
        + px(y0 + 1, x0) * fy * (1.0 - fx)
        + px(y0 + 1, x0 + 1) * fy * fx
}

/// Flip, then rotate about the center, then shift; borders are zero-filled.
///
/// The random draws depend only on `(p.seed, draw_index)`.
pub fn augment(img: &ScalogramImage, p: &AugmentParams, draw_index: u64) -> ScalogramImage {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    rng.set_stream(draw_index);
    let flip = rng.random::<f64>() < p.flip_prob;
    let angle = (2.0 * rng.random::<f64>() - 1.0) * p.max_rotation_deg.to_radians();
    let side = IMAGE_SIZE as f64;
    let dy = (2.0 * rng.random::<f64>() - 1.0) * p.max_shift * side;
    let dx = (2.0 * rng.random::<f64>() - 1.0) * p.max_shift * side;

    let (sin, cos) = angle.sin_cos();
    let center = (side - 1.0) / 2.0;
    let mut pixels = Vec::with_capacity(img.pixels.len());
    for y in 0..IMAGE_SIZE {
        for x in 0..IMAGE_SIZE {
            // inverse map: undo shift, undo rotation, undo flip
            let u = x as f64 - dx - center;
            let v = y as f64 - dy - center;
            let mut sx = cos * u + sin * v + center;
            let sy = -sin * u + cos * v + center;
            if flip {
                sx = side - 1.0 - sx;
            }
            pixels.push(sample_bilinear(img, sy, sx).clamp(0.0, 1.0) as f32);
        }
    }
    ScalogramImage {
        pixels,
        label: img.label,
        provenance: img.provenance,
    }
}
