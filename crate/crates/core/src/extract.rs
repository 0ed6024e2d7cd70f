//! Naive acoustic front end: Hann-windowed log energy and an
//! autocorrelation pitch tracker with a simple voicing gate.
//!
//! Frame `k` is centred on sample `k · hop`; samples outside the recording
//! count as zeros. Both analyses produce the same number of frames.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::signal::{FrameSeries, VoicingMask};

/// Energy floor added per window sample.
pub const ENERGY_EPSILON: f64 = 1e-10;

/// Per-octave penalty that breaks near-ties between a period and its
/// multiples in favour of the shorter lag.
const OCTAVE_COST: f64 = 0.01;

/// Search range of the pitch tracker in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchRange {
    pub f_min: f64,
    pub f_max: f64,
}

impl PitchRange {
    pub const MALE: PitchRange = PitchRange {
        f_min: 70.0,
        f_max: 300.0,
    };
    pub const FEMALE: PitchRange = PitchRange {
        f_min: 120.0,
        f_max: 400.0,
    };

    pub fn new(f_min: f64, f_max: f64) -> Result<Self> {
        if !(f_min > 0.0 && f_min < f_max && f_max.is_finite()) {
            return Err(Error::invalid(format!("bad pitch range {f_min}:{f_max}")));
        }
        Ok(PitchRange { f_min, f_max })
    }
}

impl fmt::Display for PitchRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == PitchRange::MALE {
            f.write_str("male")
        } else if *self == PitchRange::FEMALE {
            f.write_str("female")
        } else {
            write!(f, "{}:{}", self.f_min, self.f_max)
        }
    }
}

impl FromStr for PitchRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "male" => Ok(PitchRange::MALE),
            "female" => Ok(PitchRange::FEMALE),
            other => {
                let (lo, hi) = other
                    .split_once(':')
                    .ok_or_else(|| Error::Config(format!("pitch range must be male, female or min:max, got {other:?}")))?;
                let lo: f64 = lo.trim().parse().map_err(|_| Error::Config(format!("bad pitch floor {lo:?}")))?;
                let hi: f64 = hi.trim().parse().map_err(|_| Error::Config(format!("bad pitch ceiling {hi:?}")))?;
                PitchRange::new(lo, hi)
            }
        }
    }
}

/// Mono audio in the range [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Audio {
    /// Reads a 16-bit mono PCM WAV file.
    pub fn read_wav(path: &Path) -> Result<Self> {
        let mut reader = hound::WavReader::open(path)?;
        let spec = reader.spec();
        if spec.channels != 1 {
            return Err(Error::invalid(format!(
                "{}: expected mono audio, found {} channels",
                path.display(),
                spec.channels
            )));
        }
        if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
            return Err(Error::invalid(format!(
                "{}: expected 16-bit PCM, found {:?} with {} bits",
                path.display(),
                spec.sample_format,
                spec.bits_per_sample
            )));
        }
        let samples = reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Audio {
            samples,
            sample_rate: spec.sample_rate,
        })
    }

    pub fn write_wav(&self, path: &Path) -> Result<()> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut writer = hound::WavWriter::create(path, spec)?;
        for &s in &self.samples {
            writer.write_sample((s.clamp(-1.0, 32767.0 / 32768.0) * 32768.0).round() as i16)?;
        }
        writer.finalize()?;
        Ok(())
    }

    fn check(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::invalid("audio has no samples"));
        }
        if self.sample_rate < 8000 {
            return Err(Error::invalid(format!(
                "sample rate {} Hz is below 8 kHz",
                self.sample_rate
            )));
        }
        Ok(())
    }

    fn hop(&self, frame_shift: f64) -> Result<usize> {
        let hop = (frame_shift * self.sample_rate as f64).round() as usize;
        if hop == 0 {
            return Err(Error::invalid("frame shift is shorter than one sample"));
        }
        Ok(hop)
    }

    fn frame_count(&self, hop: usize) -> usize {
        self.samples.len().div_ceil(hop).max(1)
    }

    /// `len` samples centred on `center`, zero outside the recording.
    fn frame(&self, center: usize, len: usize) -> Vec<f64> {
        let start = center as i64 - (len / 2) as i64;
        (0..len as i64)
            .map(|i| {
                let idx = start + i;
                if idx < 0 {
                    0.0
                } else {
                    self.samples.get(idx as usize).copied().unwrap_or(0.0)
                }
            })
            .collect()
    }
}

fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| (PI * (i as f64 + 0.5) / len as f64).sin().powi(2))
        .collect()
}

fn window_len(seconds: f64, sample_rate: u32) -> usize {
    ((seconds * sample_rate as f64).round() as usize).max(2)
}

/// `ln(Σ (w·x)² + W·ε)` per frame, `W` being the window length in samples.
pub fn log_energy(audio: &Audio, frame_shift: f64, window: f64) -> Result<FrameSeries> {
    audio.check()?;
    let hop = audio.hop(frame_shift)?;
    let len = window_len(window, audio.sample_rate);
    let win = hann(len);
    let values = (0..audio.frame_count(hop))
        .map(|k| {
            let frame = audio.frame(k * hop, len);
            let e: f64 = frame.iter().zip(&win).map(|(x, w)| (x * w).powi(2)).sum();
            (e + len as f64 * ENERGY_EPSILON).ln()
        })
        .collect();
    FrameSeries::new(values, frame_shift)
}

/// Natural-log energy span (about 10 dB) below the loudest frame that is
/// never gated out as silence.
pub const ENERGY_GATE_RANGE: f64 = std::f64::consts::LN_10;

/// Voicing gate thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoicingParams {
    pub min_autocorr: f64,
    /// Zero crossings per sample.
    pub max_zcr: f64,
    /// Frames below this percentile of the utterance log energy are
    /// unvoiced, unless they lie within [`ENERGY_GATE_RANGE`] of the loudest
    /// frame (steady signals have no quiet frames to discard).
    pub energy_percentile: f64,
    /// Energy window in seconds.
    pub energy_window: f64,
}

impl Default for VoicingParams {
    fn default() -> Self {
        VoicingParams {
            min_autocorr: 0.3,
            max_zcr: 0.25,
            energy_percentile: 10.0,
            energy_window: 0.025,
        }
    }
}

fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    (0..=max_lag)
        .map(|lag| {
            if lag >= x.len() {
                0.0
            } else {
                x[..x.len() - lag].iter().zip(&x[lag..]).map(|(a, b)| a * b).sum()
            }
        })
        .collect()
}

fn zero_crossing_rate(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let crossings = x
        .windows(2)
        .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
        .count();
    crossings as f64 / (x.len() - 1) as f64
}

fn percentile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Best lag and its normalized autocorrelation for one frame, or `None`
/// for an all-zero frame.
fn frame_pitch(frame: &[f64], window: &[f64], window_ac: &[f64], lags: (usize, usize)) -> Option<(f64, f64)> {
    let mean = frame.iter().sum::<f64>() / frame.len() as f64;
    let tapered: Vec<f64> = frame
        .iter()
        .zip(window)
        .map(|(x, w)| (x - mean) * w)
        .collect();
    let ac = autocorrelation(&tapered, lags.1 + 1);
    if ac[0] <= 0.0 {
        return None;
    }
    let r = |lag: usize| (ac[lag] / ac[0]) / window_ac[lag];
    let mut best: Option<(usize, f64, f64)> = None;
    for lag in lags.0..=lags.1 {
        let score = r(lag) - OCTAVE_COST * (lag as f64).log2();
        if best.is_none_or(|b| score > b.2) {
            best = Some((lag, r(lag), score));
        }
    }
    let (lag, peak, _) = best?;
    // parabolic refinement around the integer lag
    let refined = if lag > lags.0 && lag < lags.1 {
        let (a, b, c) = (r(lag - 1), r(lag), r(lag + 1));
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            lag as f64 + 0.5 * (a - c) / denom
        } else {
            lag as f64
        }
    } else {
        lag as f64
    };
    Some((refined, peak))
}

/// Autocorrelation f0 and voicing per frame. Unvoiced frames hold 0.
pub fn autocorr_f0(
    audio: &Audio,
    range: PitchRange,
    frame_shift: f64,
    params: &VoicingParams,
) -> Result<(FrameSeries, VoicingMask)> {
    audio.check()?;
    let sr = audio.sample_rate as f64;
    if range.f_max >= sr / 2.0 {
        return Err(Error::invalid(format!(
            "pitch ceiling {} Hz is above the Nyquist frequency {} Hz",
            range.f_max,
            sr / 2.0
        )));
    }
    if sr < 8.0 * range.f_max {
        return Err(Error::invalid(format!(
            "sample rate {sr} Hz is too low for a {} Hz pitch ceiling",
            range.f_max
        )));
    }
    let hop = audio.hop(frame_shift)?;
    let lags = (
        (sr / range.f_max).floor().max(1.0) as usize,
        (sr / range.f_min).ceil() as usize,
    );
    let len = window_len(params.energy_window.max(3.0 / range.f_min), audio.sample_rate);
    let win = hann(len);
    let wac = autocorrelation(&win, lags.1 + 1);
    let window_ac: Vec<f64> = wac.iter().map(|v| v / wac[0]).collect();
    let zcr_len = window_len(params.energy_window, audio.sample_rate);

    let energy = log_energy(audio, frame_shift, params.energy_window)?;
    let gate = percentile(energy.values(), params.energy_percentile).min(energy.max() - ENERGY_GATE_RANGE);

    let frames = audio.frame_count(hop);
    let mut f0 = Vec::with_capacity(frames);
    let mut voiced = Vec::with_capacity(frames);
    for k in 0..frames {
        let frame = audio.frame(k * hop, len);
        let zcr = zero_crossing_rate(&audio.frame(k * hop, zcr_len));
        let decision = frame_pitch(&frame, &win, &window_ac, lags).and_then(|(lag, peak)| {
            let ok = peak >= params.min_autocorr && energy.values()[k] >= gate && zcr < params.max_zcr;
            ok.then(|| (sr / lag).clamp(range.f_min, range.f_max))
        });
        f0.push(decision.unwrap_or(0.0));
        voiced.push(decision.is_some());
    }
    Ok((FrameSeries::new(f0, frame_shift)?, VoicingMask::new(voiced)))
}
