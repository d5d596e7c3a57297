//! Time–frequency images of PPG windows.
//!
//! A window is transformed with an analytic Morlet CWT on a log-spaced scale
//! grid, rendered to a 64×64 image in `[0, 1]`, and optionally augmented for
//! training. Image sets are stored in the `SCLG` tensor file format.

mod augment;
mod cwt;
mod io;
mod render;

pub use augment::{augment, AugmentParams};
pub use cwt::{cwt, morlet, CwtBackend, CwtConfig, ScalogramMatrix};
pub use io::{read_sclg, read_sclg_from, write_sclg, write_sclg_to, SCLG_MAGIC, SCLG_VERSION};
pub use render::render_image;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use rayon::prelude::*;

use crate::signal::{segment_windows, Class, PpgRecord, Window};

pub const IMAGE_SIZE: usize = 64;
pub const IMAGE_PIXELS: usize = IMAGE_SIZE * IMAGE_SIZE;

/// Where an image came from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub record_id: u32,
    pub window_start: usize,
}

/// A 64×64 image, row = scale (row 0 is the highest frequency), column = time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalogramImage {
    pub pixels: Vec<f32>,
    pub label: Option<Class>,
    pub provenance: Provenance,
}

impl ScalogramImage {
    pub fn zeros() -> Self {
        Self {
            pixels: vec![0.0; IMAGE_PIXELS],
            label: None,
            provenance: Provenance::default(),
        }
    }

    pub fn from_pixels(pixels: Vec<f32>, label: Option<Class>) -> Result<Self> {
        if pixels.len() != IMAGE_PIXELS {
            return Err(crate::Error::ShapeMismatch(format!(
                "image needs {IMAGE_PIXELS} pixels, got {}",
                pixels.len()
            )));
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(crate::Error::InvalidParam(format!(
                "pixel {p} outside [0, 1]"
            )));
        }
        Ok(Self {
            pixels,
            label,
            provenance: Provenance::default(),
        })
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * IMAGE_SIZE + col]
    }

    /// Binary PGM (P5) rendering for visual inspection.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{IMAGE_SIZE} {IMAGE_SIZE}\n255\n").into_bytes();
        out.extend(
            self.pixels
                .iter()
                .map(|p| (p * 255.0).round().clamp(0.0, 255.0) as u8),
        );
        out
    }
}

/// CWT followed by rendering, with the window's label and origin attached.
pub fn featurize_window(window: &Window, cfg: &CwtConfig, record_id: u32) -> Result<ScalogramImage> {
    let m = cwt(window, cfg)?;
    let mut img = render_image(&m);
    img.label = window.label;
    img.provenance = Provenance {
        record_id,
        window_start: window.start_index,
    };
    Ok(img)
}

/// Windows a record and featurizes every window in parallel. Images come
/// back ordered by window start.
pub fn featurize_record(
    record: &PpgRecord,
    window_s: f64,
    stride_s: f64,
    cfg: &CwtConfig,
    record_id: u32,
) -> Result<Vec<ScalogramImage>> {
    cfg.validate(record.sample_rate_hz)?;
    segment_windows(record, window_s, stride_s)?
        .par_iter()
        .map(|w| featurize_window(w, cfg, record_id))
        .collect()
}
