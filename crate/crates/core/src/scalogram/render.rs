use super::{Provenance, ScalogramImage, ScalogramMatrix, IMAGE_SIZE};

/// Source index range `[lo, hi)` feeding output cell `j` of `out` cells
/// drawn from `len` source cells. Non-empty even when `len < out`.
fn block(j: usize, len: usize, out: usize) -> (usize, usize) {
    let lo = j * len / out;
    let hi = ((j + 1) * len / out).max(lo + 1).min(len.max(1));
    (lo.min(len - 1), hi)
}

/// magnitude → log1p → min-max normalize → block-average down to 64×64.
///
/// A constant matrix renders as all zeros.
pub fn render_image(m: &ScalogramMatrix) -> ScalogramImage {
    if m.rows == 0 || m.cols == 0 {
        return ScalogramImage::zeros();
    }
    let logmag: Vec<f64> = m.coeffs.iter().map(|c| c.norm().ln_1p()).collect();
    let (lo, hi) = logmag
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    let norm: Vec<f64> = if range > 0.0 && range.is_finite() {
        logmag.iter().map(|v| (v - lo) / range).collect()
    } else {
        vec![0.0; logmag.len()]
    };

    let mut pixels = Vec::with_capacity(IMAGE_SIZE * IMAGE_SIZE);
    for r in 0..IMAGE_SIZE {
        let (r0, r1) = block(r, m.rows, IMAGE_SIZE);
        for c in 0..IMAGE_SIZE {
            let (c0, c1) = block(c, m.cols, IMAGE_SIZE);
            let mut sum = 0.0;
            for row in r0..r1 {
                sum += norm[row * m.cols + c0..row * m.cols + c1].iter().sum::<f64>();
            }
            let mean = sum / ((r1 - r0) * (c1 - c0)) as f64;
            pixels.push(mean.clamp(0.0, 1.0) as f32);
        }
    }
    ScalogramImage {
        pixels,
        label: None,
        provenance: Provenance::default(),
    }
}
