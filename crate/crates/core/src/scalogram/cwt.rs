use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Window;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CwtBackend {
    /// O(S·N²) summation.
    Direct,
    /// Same sums computed as FFT convolutions.
    #[default]
    Fft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CwtConfig {
    /// Morlet center parameter.
    pub omega0: f64,
    pub scale_count: usize,
    /// Lowest and highest center frequency in Hz.
    pub band_hz: (f64, f64),
    pub backend: CwtBackend,
}

impl Default for CwtConfig {
    fn default() -> Self {
        Self {
            omega0: 6.0,
            scale_count: 64,
            band_hz: (0.5, 8.0),
            backend: CwtBackend::Fft,
        }
    }
}

impl CwtConfig {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if self.scale_count < 2 {
            return Err(Error::InvalidParam("scale count must be >= 2".into()));
        }
        if !(self.omega0 > 0.0) {
            return Err(Error::InvalidParam("omega0 must be positive".into()));
        }
        let (lo, hi) = self.band_hz;
        let nyquist = sample_rate_hz / 2.0;
        if !(lo > 0.0 && lo < hi && hi < nyquist) {
            return Err(Error::InvalidParam(format!(
                "band ({lo}, {hi}) Hz must satisfy 0 < low < high < Nyquist ({nyquist} Hz)"
            )));
        }
        Ok(())
    }

    /// Center frequencies, log-spaced from the top of the band down to the bottom.
    pub fn frequencies_hz(&self) -> Vec<f64> {
        let (lo, hi) = self.band_hz;
        let last = (self.scale_count - 1) as f64;
        (0..self.scale_count)
            .map(|k| hi * (lo / hi).powf(k as f64 / last))
            .collect()
    }

    /// Scales in samples: `f = omega0 / (2π s) · rate`.
    pub fn scales(&self, sample_rate_hz: f64) -> Vec<f64> {
        self.frequencies_hz()
            .into_iter()
            .map(|f| self.omega0 * sample_rate_hz / (2.0 * PI * f))
            .collect()
    }
}

/// Complex CWT coefficients, `rows × cols` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalogramMatrix {
    pub coeffs: Vec<Complex64>,
    pub rows: usize,
    pub cols: usize,
    /// Scale of each row, in samples.
    pub scales: Vec<f64>,
    pub frequencies_hz: Vec<f64>,
}

impl ScalogramMatrix {
    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.coeffs[r * self.cols..(r + 1) * self.cols]
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm()).collect()
    }

    /// Wraps precomputed coefficients; frequencies are unknown (zero).
    pub fn from_coeffs(coeffs: Vec<Complex64>, rows: usize, cols: usize) -> Result<Self> {
        if coeffs.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for a {rows}x{cols} matrix",
                coeffs.len()
            )));
        }
        Ok(Self {
            coeffs,
            rows,
            cols,
            scales: vec![0.0; rows],
            frequencies_hz: vec![0.0; rows],
        })
    }
}

/// Analytic Morlet mother wavelet `π^(-1/4) e^(iω0 t) e^(-t²/2)`.
#[inline]
pub fn morlet(t: f64, omega0: f64) -> Complex64 {
    let envelope = PI.powf(-0.25) * (-0.5 * t * t).exp();
    Complex64::from_polar(envelope, omega0 * t)
}

/// `conj(ψ(k/s)) / √s` for `k = -(n-1) ..= n-1`, stored at index `k + n - 1`.
fn scaled_kernel(n: usize, scale: f64, omega0: f64) -> Vec<Complex64> {
    let norm = 1.0 / scale.sqrt();
    (0..2 * n - 1)
        .map(|j| {
            let k = j as f64 - (n - 1) as f64;
            morlet(k / scale, omega0).conj() * norm
        })
        .collect()
}

/// Continuous wavelet transform of one window:
/// `W(s, τ) = (1/√s) Σ_n x[n] ψ*((n − τ)/s)`, with zero signal outside the window.
pub fn cwt(window: &Window, cfg: &CwtConfig) -> Result<ScalogramMatrix> {
    cfg.validate(window.sample_rate_hz)?;
    let x = &window.samples;
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidParam("window needs at least 2 samples".into()));
    }
    let scales = cfg.scales(window.sample_rate_hz);
    let coeffs = match cfg.backend {
        CwtBackend::Direct => cwt_direct(x, &scales, cfg.omega0),
        CwtBackend::Fft => cwt_fft(x, &scales, cfg.omega0),
    };
    Ok(ScalogramMatrix {
        coeffs,
        rows: scales.len(),
        cols: n,
        scales,
        frequencies_hz: cfg.frequencies_hz(),
    })
}

fn cwt_direct(x: &[f64], scales: &[f64], omega0: f64) -> Vec<Complex64> {
    let n = x.len();
    let mut out = Vec::with_capacity(scales.len() * n);
    for &s in scales {
        let g = scaled_kernel(n, s, omega0);
        for tau in 0..n {
            // g index for (n_idx - tau) is n_idx - tau + n - 1
            let acc = x
                .iter()
                .enumerate()
                .fold(Complex64::new(0.0, 0.0), |acc, (i, &xi)| {
                    acc + g[i + n - 1 - tau] * xi
                });
            out.push(acc);
        }
    }
    out
}

fn cwt_fft(x: &[f64], scales: &[f64], omega0: f64) -> Vec<Complex64> {
    let n = x.len();
    // W[τ] = (x ⊛ h)[τ + n - 1] with h[j] = g[(2n-2) - j]; a circular size
    // of 2n-1 or more leaves those outputs free of wrap-around.
    let len = (2 * n - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);

    let mut xs: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    xs.resize(len, Complex64::new(0.0, 0.0));
    fwd.process(&mut xs);

    let mut out = Vec::with_capacity(scales.len() * n);
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    let inv_len = 1.0 / len as f64;
    for &s in scales {
        let g = scaled_kernel(n, s, omega0);
        buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (j, v) in g.iter().rev().enumerate() {
            buf[j] = *v;
        }
        fwd.process(&mut buf);
        for (b, xf) in buf.iter_mut().zip(&xs) {
            *b *= xf;
        }
        inv.process(&mut buf);
        out.extend(buf[n - 1..2 * n - 1].iter().map(|v| v * inv_len));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(samples: Vec<f64>) -> Window {
        Window {
            samples,
            start_index: 0,
            sample_rate_hz: 64.0,
            label: None,
        }
    }

    fn tone(f: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64 / 64.0).sin()).collect()
    }

    fn rel_frobenius(a: &[Complex64], b: &[Complex64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (num / den).sqrt()
    }

    #[test]
    fn zero_window_gives_zero_matrix() {
        for backend in [CwtBackend::Direct, CwtBackend::Fft] {
            let cfg = CwtConfig {
                backend,
                ..Default::default()
            };
            let m = cwt(&window(vec![0.0; 640]), &cfg).unwrap();
            assert_eq!((m.rows, m.cols), (64, 640));
            assert!(m.coeffs.iter().all(|c| c.norm() == 0.0));
        }
    }

    #[test]
    fn band_outside_nyquist_rejected() {
        let cfg = CwtConfig {
            band_hz: (0.5, 40.0),
            ..Default::default()
        };
        assert!(cwt(&window(vec![0.0; 640]), &cfg).is_err());
        let cfg = CwtConfig {
            scale_count: 1,
            ..Default::default()
        };
        assert!(cwt(&window(vec![0.0; 640]), &cfg).is_err());
    }

    #[test]
    fn frequencies_span_band() {
        let cfg = CwtConfig::default();
        let f = cfg.frequencies_hz();
        assert!((f[0] - 8.0).abs() < 1e-12);
        assert!((f[63] - 0.5).abs() < 1e-12);
        let s = cfg.scales(64.0);
        for (fk, sk) in f.iter().zip(&s) {
            assert!((cfg.omega0 / (2.0 * PI * sk) * 64.0 - fk).abs() < 1e-9);
        }
    }

    #[test]
    fn backends_agree() {
        let x: Vec<f64> = (0..300).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let w = window(x);
        let d = cwt(&w, &CwtConfig { backend: CwtBackend::Direct, ..Default::default() }).unwrap();
        let f = cwt(&w, &CwtConfig { backend: CwtBackend::Fft, ..Default::default() }).unwrap();
        assert!(rel_frobenius(&f.coeffs, &d.coeffs) < 1e-9);
    }

    #[test]
    fn linearity() {
        let a = tone(1.5, 640);
        let b: Vec<f64> = (0..640).map(|i| (i as f64 * 0.37).cos()).collect();
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let cfg = CwtConfig::default();
        let ma = cwt(&window(a), &cfg).unwrap();
        let mb = cwt(&window(b), &cfg).unwrap();
        let mab = cwt(&window(ab), &cfg).unwrap();
        for ((x, y), z) in ma.coeffs.iter().zip(&mb.coeffs).zip(&mab.coeffs) {
            assert!((x + y - z).norm() < 1e-9);
        }
    }

    #[test]
    fn two_hz_tone_localizes() {
        let cfg = CwtConfig::default();
        let m = cwt(&window(tone(2.0, 640)), &cfg).unwrap();
        let step = (8.0f64 / 0.5).ln() / 63.0;
        // away from the edges, where the wavelet is fully supported
        for tau in 160..480 {
            let best = (0..m.rows)
                .max_by(|&a, &b| m.row(a)[tau].norm().total_cmp(&m.row(b)[tau].norm()))
                .unwrap();
            let off = (m.frequencies_hz[best] / 2.0).ln().abs();
            assert!(off <= step, "tau {tau}: {} Hz", m.frequencies_hz[best]);
        }
    }
}
