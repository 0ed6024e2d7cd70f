//! Continuous wavelet transform with the Mexican hat mother wavelet.
//!
//! Coefficients at scale `σ` and frame `k` are
//! `σ^(-1/2) · Σ_m s[m] · ψ((m - k)·Δt / σ) · Δt`, with the signal continued
//! periodically past both ends. The kernel is cut at `±3.5σ` and its taps are
//! shifted to sum to exactly zero, so constants produce no response at any
//! scale.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;
use std::path::Path;

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::signal::FrameSeries;

/// Half-width of the truncated wavelet support, in units of scale.
pub const MEXICAN_HAT_SUPPORT: f64 = 3.5;

/// Half-octave scale spacing.
pub const HALF_OCTAVE: f64 = SQRT_2;

/// Mexican hat (negative normalized second derivative of a Gaussian).
pub fn mexican_hat(t: f64) -> f64 {
    let norm = 2.0 / (3.0f64.sqrt() * PI.powf(0.25));
    norm * (1.0 - t * t) * (-0.5 * t * t).exp()
}

/// Fourier period of the Mexican hat at scale `σ` (`2πσ/√2.5`).
pub fn fourier_period(scale: f64) -> f64 {
    2.0 * PI * scale / 2.5f64.sqrt()
}

/// Geometric scale grid `σ_j = a_0 · ratio^j`, `j = 0..count`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleGrid {
    finest: f64,
    ratio: f64,
    count: usize,
}

impl ScaleGrid {
    pub fn new(finest: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(finest.is_finite() && finest > 0.0) {
            return Err(Error::invalid(format!("finest scale must be positive, got {finest}")));
        }
        if !(ratio.is_finite() && ratio > 1.0) {
            return Err(Error::invalid(format!("scale ratio must exceed 1, got {ratio}")));
        }
        if count == 0 {
            return Err(Error::invalid("a scale grid needs at least one scale"));
        }
        Ok(ScaleGrid {
            finest,
            ratio,
            count,
        })
    }

    /// Half-octave grid spanning `octaves` octaves, both endpoints included.
    pub fn half_octaves(finest: f64, octaves: usize) -> Result<Self> {
        Self::new(finest, HALF_OCTAVE, 2 * octaves + 1)
    }

    pub fn finest(&self) -> f64 {
        self.finest
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn scale(&self, j: usize) -> f64 {
        self.finest * self.ratio.powi(j as i32)
    }

    pub fn coarsest(&self) -> f64 {
        self.scale(self.count - 1)
    }

    pub fn scales(&self) -> Vec<f64> {
        (0..self.count).map(|j| self.scale(j)).collect()
    }
}

/// Scales × frames matrix of wavelet coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Scalogram {
    rows: Vec<Vec<f64>>,
    grid: ScaleGrid,
    frame_shift: f64,
    start_time: f64,
}

impl Scalogram {
    pub fn from_rows(
        rows: Vec<Vec<f64>>,
        grid: ScaleGrid,
        frame_shift: f64,
        start_time: f64,
    ) -> Result<Self> {
        if rows.len() != grid.len() {
            return Err(Error::invalid(format!(
                "{} rows for a grid of {} scales",
                rows.len(),
                grid.len()
            )));
        }
        let width = rows[0].len();
        if width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(Error::invalid("scalogram rows must be non-empty and of equal length"));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("scalogram coefficients must be finite"));
        }
        Ok(Scalogram {
            rows,
            grid,
            frame_shift,
            start_time,
        })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.rows[j]
    }

    pub fn grid(&self) -> &ScaleGrid {
        &self.grid
    }

    pub fn frame_shift(&self) -> f64 {
        self.frame_shift
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn frames(&self) -> usize {
        self.rows[0].len()
    }

    pub fn time_at(&self, k: usize) -> f64 {
        self.start_time + k as f64 * self.frame_shift
    }

    /// Coefficient-wise negation, used for minimum-amplitude lines.
    pub fn negated(&self) -> Scalogram {
        Scalogram {
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|v| -v).collect())
                .collect(),
            grid: self.grid.clone(),
            frame_shift: self.frame_shift,
            start_time: self.start_time,
        }
    }

    pub fn scaled(&self, factor: f64) -> Scalogram {
        Scalogram {
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|v| v * factor).collect())
                .collect(),
            ..self.clone()
        }
    }
}

/// Sampled, zero-sum wavelet taps for scale `scale` at frame spacing `dt`,
/// including the `σ^(-1/2)·Δt` factor. Index `radius` is lag zero.
fn wavelet_taps(scale: f64, dt: f64) -> Vec<f64> {
    let radius = (MEXICAN_HAT_SUPPORT * scale / dt).ceil() as usize;
    let weight = dt / scale.sqrt();
    let mut taps: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let lag = i as f64 - radius as f64;
            let t = lag * dt / scale;
            if t.abs() <= MEXICAN_HAT_SUPPORT {
                weight * mexican_hat(t)
            } else {
                0.0
            }
        })
        .collect();
    let bias = taps.iter().sum::<f64>() / taps.len() as f64;
    for v in &mut taps {
        *v -= bias;
    }
    taps
}

/// Folds taps onto a period of `len` frames: `folded[d]` collects every tap
/// whose lag is congruent to `d` modulo `len`.
fn fold_taps(taps: &[f64], len: usize) -> Vec<f64> {
    let radius = (taps.len() / 2) as i64;
    let mut folded = vec![0.0; len];
    for (i, &w) in taps.iter().enumerate() {
        let lag = i as i64 - radius;
        folded[lag.rem_euclid(len as i64) as usize] += w;
    }
    folded
}

fn transform_row(values: &[f64], scale: f64, dt: f64) -> Vec<f64> {
    let len = values.len();
    let taps = wavelet_taps(scale, dt);
    let radius = taps.len() / 2;
    let mut out = vec![0.0; len];
    if taps.len() <= len {
        // direct form, wrapping only near the ends
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            if k >= radius && k + radius < len {
                let window = &values[k - radius..=k + radius];
                for (w, s) in taps.iter().zip(window) {
                    acc += w * s;
                }
            } else {
                let base = k as i64 - radius as i64;
                for (i, w) in taps.iter().enumerate() {
                    acc += w * values[(base + i as i64).rem_euclid(len as i64) as usize];
                }
            }
            *o = acc;
        }
    } else {
        let folded = fold_taps(&taps, len);
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (d, w) in folded.iter().enumerate() {
                acc += w * values[(k + d) % len];
            }
            *o = acc;
        }
    }
    out
}

/// Wavelet transform of `signal` over `grid`.
pub fn transform(signal: &FrameSeries, grid: &ScaleGrid) -> Result<Scalogram> {
    if signal.len() < 2 {
        return Err(Error::invalid("transform needs at least two frames"));
    }
    let dt = signal.frame_shift();
    let span = signal.len() as f64 * dt;
    let support = 2.0 * MEXICAN_HAT_SUPPORT * grid.coarsest();
    if support > 4.0 * span {
        debug!(
            "coarsest scale {:.3} s has a {:.2} s support, more than 4x the {:.2} s signal",
            grid.coarsest(),
            support,
            span
        );
    }
    let rows = grid
        .scales()
        .into_iter()
        .map(|sigma| transform_row(signal.values(), sigma, dt))
        .collect();
    Scalogram::from_rows(rows, grid.clone(), dt, signal.start_time())
}

/// Weighted sum of rows `c · Σ_j ratio^(-j/2) · W_j`.
pub fn reconstruct(sg: &Scalogram, c: f64) -> Result<FrameSeries> {
    if !c.is_finite() {
        return Err(Error::invalid("reconstruction constant must be finite"));
    }
    let ratio = sg.grid().ratio();
    let mut out = vec![0.0; sg.frames()];
    for (j, row) in sg.rows().iter().enumerate() {
        let w = c * ratio.powf(-(j as f64) / 2.0);
        for (o, v) in out.iter_mut().zip(row) {
            *o += w * v;
        }
    }
    FrameSeries::with_start(out, sg.frame_shift(), sg.start_time())
}

/// Least-squares reconstruction constant for `original`.
pub fn fit_c(original: &FrameSeries, sg: &Scalogram) -> Result<f64> {
    if original.len() != sg.frames() {
        return Err(Error::invalid(format!(
            "signal has {} frames, scalogram has {}",
            original.len(),
            sg.frames()
        )));
    }
    let unit = reconstruct(sg, 1.0)?;
    let energy: f64 = unit.values().iter().map(|v| v * v).sum();
    if energy <= f64::MIN_POSITIVE {
        warn!("unit reconstruction has zero energy; using c = 0");
        return Ok(0.0);
    }
    let cross: f64 = unit
        .values()
        .iter()
        .zip(original.values())
        .map(|(a, b)| a * b)
        .sum();
    Ok(cross / energy)
}

/// Text dump for plotting: a header line with scales and frame shift, then
/// one tab-separated row per scale.
pub fn format_scalogram(sg: &Scalogram) -> String {
    let scales: Vec<String> = sg.grid().scales().iter().map(|s| format!("{s:.6}")).collect();
    let mut out = format!(
        "scales: {}; frame_shift: {}\n",
        scales.join(" "),
        sg.frame_shift()
    );
    for row in sg.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        writeln!(out, "{}", cells.join("\t")).expect("string write");
    }
    out
}

pub fn write_scalogram(path: &Path, sg: &Scalogram) -> Result<()> {
    std::fs::write(path, format_scalogram(sg)).map_err(|e| Error::io(path, e))
}
