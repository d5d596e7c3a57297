//! PPG ingest, synthetic PPG generation and fixed-length windowing.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 64.0;
pub const DEFAULT_WINDOW_S: f64 = 10.0;
pub const DEFAULT_STRIDE_S: f64 = 1.0;

/// Binary class tag carried by records, windows and images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Class {
    NonStress = 0,
    Stress = 1,
}

impl Class {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Class> {
        match i {
            0 => Some(Class::NonStress),
            1 => Some(Class::Stress),
            _ => None,
        }
    }
}

/// A uniformly sampled PPG series.
#[derive(Debug, Clone, PartialEq)]
pub struct PpgRecord {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
    pub label: Option<Class>,
}

impl PpgRecord {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64, label: Option<Class>) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidParam(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            label,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Writes the record in the ingest CSV format (`amplitude[,label]` per line).
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 24);
        for x in &self.samples {
            match self.label {
                Some(c) => out.push_str(&format!("{x},{}\n", c as u8)),
                None => out.push_str(&format!("{x}\n")),
            }
        }
        out
    }
}

/// Loads a PPG CSV: one amplitude per line with an optional `,label` column.
///
/// The record is labeled only when every row carries the same label.
pub fn load_ppg_csv(path: impl AsRef<Path>, sample_rate_hz: f64) -> Result<PpgRecord> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ppg_csv(&text, sample_rate_hz).map_err(|e| match e {
        Error::Parse { row, text, .. } => Error::Parse {
            path: path.to_path_buf(),
            row,
            text,
        },
        Error::EmptyFile { .. } => Error::EmptyFile {
            path: path.to_path_buf(),
        },
        other => other,
    })
}

pub(crate) fn parse_ppg_csv(text: &str, sample_rate_hz: f64) -> Result<PpgRecord> {
    let parse_err = |row: usize, text: &str| Error::Parse {
        path: Default::default(),
        row,
        text: text.to_string(),
    };

    let mut samples = Vec::new();
    let mut labels: Vec<Option<u8>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let amp = fields.next().unwrap_or("").trim();
        let x: f64 = amp.parse().map_err(|_| parse_err(row, amp))?;
        if !x.is_finite() {
            return Err(parse_err(row, amp));
        }
        let label = match fields.next() {
            Some(l) => {
                let l = l.trim();
                Some(l.parse::<u8>().map_err(|_| parse_err(row, l))?)
            }
            None => None,
        };
        if let Some(extra) = fields.next() {
            return Err(parse_err(row, extra));
        }
        samples.push(x);
        labels.push(label);
    }
    if samples.is_empty() {
        return Err(Error::EmptyFile {
            path: Default::default(),
        });
    }

    let first = labels[0];
    let label = if first.is_some() && labels.iter().all(|l| *l == first) {
        first.and_then(|l| Class::from_index(l as usize))
    } else {
        None
    };
    PpgRecord::new(samples, sample_rate_hz, label)
}

/// Parameters of the two-harmonic beat model used to synthesize PPG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub class: Class,
    /// Heart-rate band in Hz; each beat draws its rate uniformly from it.
    pub hr_band_hz: (f64, f64),
    /// Amplitude of the second harmonic relative to the fundamental.
    pub harmonic_ratio: f64,
    pub wander_amplitude: f64,
    pub noise_std: f64,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub seed: u64,
}

pub const NON_STRESS_BAND_HZ: (f64, f64) = (1.0, 1.3);
pub const STRESS_BAND_HZ: (f64, f64) = (1.6, 2.0);

impl SynthParams {
    /// Preset for the given class: resting vs elevated heart-rate band.
    pub fn preset(class: Class, duration_s: f64, seed: u64) -> Self {
        let (hr_band_hz, harmonic_ratio) = match class {
            Class::NonStress => (NON_STRESS_BAND_HZ, 0.5),
            Class::Stress => (STRESS_BAND_HZ, 0.3),
        };
        Self {
            class,
            hr_band_hz,
            harmonic_ratio,
            wander_amplitude: 0.3,
            noise_std: 0.1,
            duration_s,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            seed,
        }
    }

    /// Same beat sequence with wander and noise removed.
    pub fn noiseless(&self) -> Self {
        Self {
            wander_amplitude: 0.0,
            noise_std: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.hr_band_hz;
        if !(lo > 0.5 && hi < 3.5 && lo <= hi) {
            return Err(Error::InvalidParam(format!(
                "heart-rate band ({lo}, {hi}) Hz must lie within (0.5, 3.5)"
            )));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidParam("sample rate must be positive".into()));
        }
        if self.noise_std < 0.0 || !self.noise_std.is_finite() {
            return Err(Error::InvalidParam("noise std must be >= 0".into()));
        }
        if !(self.harmonic_ratio.is_finite() && self.wander_amplitude.is_finite()) {
            return Err(Error::InvalidParam("amplitudes must be finite".into()));
        }
        let window = (DEFAULT_WINDOW_S * self.sample_rate_hz).round();
        if !(self.duration_s * self.sample_rate_hz >= window) {
            return Err(Error::InvalidParam(format!(
                "duration {} s is shorter than one {DEFAULT_WINDOW_S} s window",
                self.duration_s
            )));
        }
        Ok(())
    }
}

/// Checks that the non-stress band lies strictly below the stress band.
pub fn check_separable(non_stress: &SynthParams, stress: &SynthParams) -> Result<()> {
    if non_stress.hr_band_hz.1 < stress.hr_band_hz.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!(
            "non-stress band {:?} overlaps stress band {:?}",
            non_stress.hr_band_hz, stress.hr_band_hz
        )))
    }
}

// Independent RNG streams so dropping noise or wander leaves the beat train intact.
const STREAM_BEATS: u64 = 0;
const STREAM_WANDER: u64 = 1;
const STREAM_NOISE: u64 = 2;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Synthesizes a labeled PPG record. Bit-deterministic for a given `params`.
pub fn synth_ppg(params: &SynthParams) -> Result<PpgRecord> {
    params.validate()?;
    let fs = params.sample_rate_hz;
    let n = (params.duration_s * fs).round() as usize;
    let (lo, hi) = params.hr_band_hz;

    let mut beats = stream_rng(params.seed, STREAM_BEATS);
    let draw_rate = |rng: &mut ChaCha8Rng| lo + (hi - lo) * rng.random::<f64>();
    let harmonic_phase = 2.0 * PI * beats.random::<f64>();
    let mut phase = 2.0 * PI * beats.random::<f64>();
    let mut rate = draw_rate(&mut beats);

    let mut wander_rng = stream_rng(params.seed, STREAM_WANDER);
    let wander_hz = 0.1 + 0.2 * wander_rng.random::<f64>();
    let wander_phase = 2.0 * PI * wander_rng.random::<f64>();

    let mut noise_rng = stream_rng(params.seed, STREAM_NOISE);
    let noise = Normal::new(0.0, params.noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidParam(e.to_string()))?;

    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / fs;
        let pulse = phase.sin() + params.harmonic_ratio * (2.0 * phase + harmonic_phase).sin();
        let wander = params.wander_amplitude * (2.0 * PI * wander_hz * t + wander_phase).sin();
        let eps = if params.noise_std > 0.0 {
            noise.sample(&mut noise_rng)
        } else {
            0.0
        };
        samples.push(pulse + wander + eps);

        // A new beat starts each time the phase wraps.
        phase += 2.0 * PI * rate / fs;
        if phase >= 2.0 * PI {
            phase -= 2.0 * PI;
            rate = draw_rate(&mut beats);
        }
    }
    PpgRecord::new(samples, fs, Some(params.class))
}

/// A fixed-length slice of a record.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub samples: Vec<f64>,
    pub start_index: usize,
    pub sample_rate_hz: f64,
    pub label: Option<Class>,
}

/// Number of samples in a window of `seconds` at `rate`.
pub fn samples_for(seconds: f64, rate: f64) -> usize {
    (seconds * rate).round() as usize
}

/// Splits a record into overlapping windows; trailing samples that do not
/// fill a whole window are dropped.
pub fn segment_windows(record: &PpgRecord, window_s: f64, stride_s: f64) -> Result<Vec<Window>> {
    let w = samples_for(window_s, record.sample_rate_hz);
    let s = samples_for(stride_s, record.sample_rate_hz);
    if w == 0 || s == 0 {
        return Err(Error::InvalidParam(format!(
            "window ({window_s} s) and stride ({stride_s} s) must each span at least one sample"
        )));
    }
    let n = record.len();
    if n < w {
        return Err(Error::RecordTooShort { len: n, window: w });
    }
    let count = (n - w) / s + 1;
    Ok((0..count)
        .map(|k| {
            let start = k * s;
            Window {
                samples: record.samples[start..start + w].to_vec(),
                start_index: start,
                sample_rate_hz: record.sample_rate_hz,
                label: record.label,
            }
        })
        .collect())
}
