//! Per-word prominence and boundary values.
//!
//! The word scale `a_W` (utterance duration over word count) anchors two
//! analysis bands: prominence from `a_W/2` and boundaries from `a_W`, both
//! spanning three octaves at half-octave spacing. Peak lines of the
//! prominence composite score words; valley lines of the boundary composite
//! score the junction after each word.

mod binarize;

pub use binarize::{binarize_kmeans, binarize_threshold, KmeansSplit, ThresholdFit};

use std::fmt;
use std::str::FromStr;

use crate::config::Config;
use crate::cwt::{transform, ScaleGrid, Scalogram};
use crate::error::{Error, Result};
use crate::loma::{link_lines, minima_lines, LomaLine};
use crate::preproc::{duration_derivative, duration_on_grid, fill_f0, fill_gain};
use crate::signal::{combine, FrameSeries, Segment, Utterance, WordAlignment};

/// Which prosodic tracks enter the composite signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureSet {
    pub f0: bool,
    pub energy: bool,
    pub duration: bool,
}

impl FeatureSet {
    pub const ALL: FeatureSet = FeatureSet {
        f0: true,
        energy: true,
        duration: true,
    };

    pub fn is_empty(&self) -> bool {
        !(self.f0 || self.energy || self.duration)
    }
}

impl fmt::Display for FeatureSet {
    /// `f0_en_dur` style names are used in reports; this prints the
    /// comma-separated form accepted by [`FromStr`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [(self.f0, "f0"), (self.energy, "en"), (self.duration, "dur")]
            .into_iter()
            .filter_map(|(on, n)| on.then_some(n))
            .collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut set = FeatureSet {
            f0: false,
            energy: false,
            duration: false,
        };
        for name in s.split([',', '_', '+']).map(str::trim).filter(|n| !n.is_empty()) {
            match name {
                "f0" => set.f0 = true,
                "en" | "energy" => set.energy = true,
                "dur" | "duration" => set.duration = true,
                other => return Err(Error::Config(format!("unknown feature {other:?}"))),
            }
        }
        if set.is_empty() {
            return Err(Error::Config("feature list is empty".into()));
        }
        Ok(set)
    }
}

/// Analysis bands derived from the word scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSelection {
    pub word_scale: f64,
    pub prominence: ScaleGrid,
    pub boundary: ScaleGrid,
}

impl ScaleSelection {
    pub fn new(word_scale: f64, cfg: &Config) -> Result<Self> {
        if !(word_scale.is_finite() && word_scale > 0.0) {
            return Err(Error::invalid(format!("word scale must be positive, got {word_scale}")));
        }
        Ok(ScaleSelection {
            word_scale,
            prominence: cfg.grid(word_scale / 2.0)?,
            boundary: cfg.grid(word_scale)?,
        })
    }
}

/// Continuous and binary annotation of one word.
#[derive(Debug, Clone, PartialEq)]
pub struct WordProsody {
    pub word_index: usize,
    pub label: String,
    pub prominence: f64,
    pub boundary: f64,
    pub prom_binary: bool,
    pub bound_binary: bool,
    /// Anchor time of the line that set `prominence`.
    pub prom_anchor: Option<f64>,
    /// Anchor time of the line that set `boundary`.
    pub bound_anchor: Option<f64>,
}

impl WordProsody {
    fn empty(word_index: usize, label: &str) -> Self {
        WordProsody {
            word_index,
            label: label.to_string(),
            prominence: 0.0,
            boundary: 0.0,
            prom_binary: false,
            bound_binary: false,
            prom_anchor: None,
            bound_anchor: None,
        }
    }
}

/// Word scale in seconds: span from first word start to last word end
/// divided by the number of words.
pub fn word_scale(words: &WordAlignment) -> Result<f64> {
    let count = words.word_count();
    if count == 0 {
        return Err(Error::invalid("no words in alignment"));
    }
    let span = words.last_word_end() - words.first_word_start();
    if span <= 0.0 {
        return Err(Error::invalid("utterance has zero duration"));
    }
    Ok(span / count as f64)
}

/// Word scale pooled over several utterances (a paragraph).
pub fn pooled_word_scale<'a>(alignments: impl IntoIterator<Item = &'a WordAlignment>) -> Result<f64> {
    let (mut span, mut count) = (0.0, 0usize);
    for a in alignments {
        span += a.last_word_end() - a.first_word_start();
        count += a.word_count();
    }
    if count == 0 || span <= 0.0 {
        return Err(Error::invalid("paragraph has no word time"));
    }
    Ok(span / count as f64)
}

/// Preprocessed tracks on the utterance frame grid.
#[derive(Debug, Clone)]
pub struct PreparedTracks {
    pub f0: FrameSeries,
    pub energy: FrameSeries,
    pub duration: FrameSeries,
    pub duration_derivative: FrameSeries,
}

pub fn prepare(utt: &Utterance, cfg: &Config) -> Result<PreparedTracks> {
    let f0 = fill_f0(&utt.f0, &utt.voicing, &cfg.f0_fill()?)?;
    let energy = if cfg.gap_fill_energy {
        fill_gain(&utt.energy, &cfg.gain_family()?)?
    } else {
        utt.energy.clone()
    };
    let duration = duration_on_grid(&utt.words, utt.f0.start_time(), utt.frame_shift(), utt.frame_count())?;
    let duration_derivative = duration_derivative(&duration)?;
    Ok(PreparedTracks {
        f0,
        energy,
        duration,
        duration_derivative,
    })
}

fn composite(tracks: &PreparedTracks, features: FeatureSet, boundary: bool) -> Result<FrameSeries> {
    let mut parts = Vec::with_capacity(3);
    if features.f0 {
        parts.push(tracks.f0.clone());
    }
    if features.energy {
        parts.push(tracks.energy.clone());
    }
    if features.duration {
        parts.push(if boundary {
            tracks.duration_derivative.clone()
        } else {
            tracks.duration.clone()
        });
    }
    combine(&parts)
}

/// Normalized sum of the selected tracks, duration as is.
pub fn prominence_signal(tracks: &PreparedTracks, features: FeatureSet) -> Result<FrameSeries> {
    composite(tracks, features, false)
}

/// Normalized sum of the selected tracks, duration replaced by its time
/// derivative.
pub fn boundary_signal(tracks: &PreparedTracks, features: FeatureSet) -> Result<FrameSeries> {
    composite(tracks, features, true)
}

/// Everything computed for one utterance.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub scales: ScaleSelection,
    pub prominence_signal: FrameSeries,
    pub boundary_signal: FrameSeries,
    pub prominence_scalogram: Scalogram,
    pub boundary_scalogram: Scalogram,
    pub peaks: Vec<LomaLine>,
    pub valleys: Vec<LomaLine>,
    pub words: Vec<WordProsody>,
}

fn strongest_in(lines: &[LomaLine], lo: f64, hi: f64) -> Option<&LomaLine> {
    lines
        .iter()
        .filter(|l| {
            let t = l.anchor().time;
            t >= lo && t < hi
        })
        .max_by(|a, b| {
            a.strength
                .total_cmp(&b.strength)
                .then(b.anchor().time.total_cmp(&a.anchor().time))
        })
}

/// Assigns line strengths to words.
///
/// Prominence: strongest peak line anchored inside the word. Boundary after
/// word `i`: strongest valley line anchored between the prominence anchors of
/// words `i` and `i+1`, with the word midpoint standing in for a missing
/// anchor; the last word searches up to `end_time`.
pub fn assign_lines(
    words: &[&Segment],
    peaks: &[LomaLine],
    valleys: &[LomaLine],
    end_time: f64,
) -> Vec<WordProsody> {
    let mut out: Vec<WordProsody> = words
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let mut rec = WordProsody::empty(i, &w.label);
            if let Some(line) = strongest_in(peaks, w.start, w.end) {
                rec.prominence = line.strength.max(0.0);
                rec.prom_anchor = Some(line.anchor().time);
            }
            rec
        })
        .collect();
    for i in 0..words.len() {
        let lo = out[i].prom_anchor.unwrap_or_else(|| words[i].midpoint());
        let hi = match words.get(i + 1) {
            Some(next) => out[i + 1].prom_anchor.unwrap_or_else(|| next.midpoint()),
            None => end_time,
        };
        if let Some(line) = strongest_in(valleys, lo, hi) {
            out[i].boundary = line.strength.max(0.0);
            out[i].bound_anchor = Some(line.anchor().time);
        }
    }
    out
}

/// Full analysis with an externally chosen word scale.
pub fn analyze_with_scale(utt: &Utterance, cfg: &Config, word_scale: f64) -> Result<Analysis> {
    let scales = ScaleSelection::new(word_scale, cfg)?;
    let tracks = prepare(utt, cfg)?;
    let prominence_signal = prominence_signal(&tracks, cfg.features)?;
    let boundary_signal = boundary_signal(&tracks, cfg.features)?;
    let prominence_scalogram = transform(&prominence_signal, &scales.prominence)?;
    let boundary_scalogram = transform(&boundary_signal, &scales.boundary)?;
    let link = cfg.link();
    let peaks = link_lines(&prominence_scalogram, &link)?;
    let valleys = minima_lines(&boundary_scalogram, &link)?;
    let words: Vec<&Segment> = utt.words.words().collect();
    let records = assign_lines(&words, &peaks, &valleys, prominence_signal.end_time());
    Ok(Analysis {
        scales,
        prominence_signal,
        boundary_signal,
        prominence_scalogram,
        boundary_scalogram,
        peaks,
        valleys,
        words: records,
    })
}

pub fn analyze(utt: &Utterance, cfg: &Config) -> Result<Analysis> {
    analyze_with_scale(utt, cfg, word_scale(&utt.words)?)
}

/// Continuous per-word values from the wavelet lines. Binary fields are
/// left false; see [`binarize_threshold`] and [`binarize_kmeans`].
pub fn annotate_words(utt: &Utterance, cfg: &Config) -> Result<Vec<WordProsody>> {
    Ok(analyze(utt, cfg)?.words)
}

fn frame_range(series: &FrameSeries, lo: f64, hi: f64) -> std::ops::Range<usize> {
    let a = series.frame_at(lo);
    let b = series.frame_at(hi).max(a + 1).min(series.len());
    a.min(series.len() - 1)..b
}

/// Word maximum and negated inter-midpoint minimum of the raw composite
/// signals, without any wavelet analysis.
pub fn raw_baseline(utt: &Utterance, cfg: &Config) -> Result<Vec<WordProsody>> {
    let tracks = prepare(utt, cfg)?;
    let prom = prominence_signal(&tracks, cfg.features)?;
    let bound = boundary_signal(&tracks, cfg.features)?;
    let words: Vec<&Segment> = utt.words.words().collect();
    Ok(words
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let mut rec = WordProsody::empty(i, &w.label);
            let span = frame_range(&prom, w.start, w.end);
            rec.prominence = prom.values()[span].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let hi = words.get(i + 1).map_or(bound.end_time(), |n| n.midpoint());
            let gap = frame_range(&bound, w.midpoint(), hi);
            rec.boundary = -bound.values()[gap].iter().copied().fold(f64::INFINITY, f64::min);
            rec
        })
        .collect())
}
