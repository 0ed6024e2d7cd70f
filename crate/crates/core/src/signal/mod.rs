//! Sampled prosodic tracks, word alignments and reference labels.
//!
//! Every track in the pipeline is a [`FrameSeries`]: finite values on a
//! uniform frame grid (5 ms by default). Tracks of one utterance share the
//! same frame shift and start time.

pub mod io;

use crate::error::{Error, Result};

/// Default analysis frame shift in seconds.
pub const DEFAULT_FRAME_SHIFT: f64 = 0.005;

/// Variance below which [`normalize`] returns a zero signal.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

/// A uniformly sampled real-valued signal.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSeries {
    values: Vec<f64>,
    frame_shift: f64,
    start_time: f64,
}

impl FrameSeries {
    /// Builds a series starting at time zero.
    pub fn new(values: Vec<f64>, frame_shift: f64) -> Result<Self> {
        Self::with_start(values, frame_shift, 0.0)
    }

    pub fn with_start(values: Vec<f64>, frame_shift: f64, start_time: f64) -> Result<Self> {
        if !(frame_shift.is_finite() && frame_shift > 0.0) {
            return Err(Error::invalid(format!(
                "frame shift must be positive, got {frame_shift}"
            )));
        }
        if !start_time.is_finite() {
            return Err(Error::invalid("start time must be finite"));
        }
        if values.is_empty() {
            return Err(Error::invalid("a frame series needs at least one frame"));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value {} at frame {k}",
                values[k]
            )));
        }
        Ok(FrameSeries {
            values,
            frame_shift,
            start_time,
        })
    }

    /// Same grid as `self`, new values. Length and finiteness are still checked.
    pub fn like(&self, values: Vec<f64>) -> Result<Self> {
        Self::with_start(values, self.frame_shift, self.start_time)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn frame_shift(&self) -> f64 {
        self.frame_shift
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Time in seconds of frame `k`.
    pub fn time_at(&self, k: usize) -> f64 {
        self.start_time + k as f64 * self.frame_shift
    }

    /// Time just past the last frame.
    pub fn end_time(&self) -> f64 {
        self.time_at(self.values.len())
    }

    /// Nearest frame index to time `t`, clamped to the series.
    pub fn frame_at(&self, t: f64) -> usize {
        let k = ((t - self.start_time) / self.frame_shift).round();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.values.len() - 1)
        }
    }

    /// Copy truncated to the first `len` frames.
    pub fn truncated(&self, len: usize) -> Result<Self> {
        self.like(self.values[..len.min(self.values.len())].to_vec())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64
    }
}

/// Per-frame voicing decisions paired with an f0 track.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoicingMask(Vec<bool>);

impl VoicingMask {
    pub fn new(flags: Vec<bool>) -> Self {
        VoicingMask(flags)
    }

    /// Frames with a positive value are voiced; zero marks unvoiced frames.
    pub fn from_f0(f0: &FrameSeries) -> Self {
        VoicingMask(f0.values().iter().map(|&v| v > 0.0).collect())
    }

    pub fn all_voiced(len: usize) -> Self {
        VoicingMask(vec![true; len])
    }

    pub fn flags(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn voiced_count(&self) -> usize {
        self.0.iter().filter(|&&v| v).count()
    }

    pub fn truncated(&self, len: usize) -> Self {
        VoicingMask(self.0[..len.min(self.0.len())].to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentKind {
    Word,
    Pause,
    Breath,
}

impl SegmentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentKind::Word => "word",
            SegmentKind::Pause => "pause",
            SegmentKind::Breath => "breath",
        }
    }
}

impl std::str::FromStr for SegmentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "word" => Ok(SegmentKind::Word),
            "pause" | "sil" | "sp" => Ok(SegmentKind::Pause),
            "breath" | "br" => Ok(SegmentKind::Breath),
            other => Err(format!("unknown segment kind {other:?}")),
        }
    }
}

/// One labelled interval of an alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub label: String,
    pub start: f64,
    pub end: f64,
    pub kind: SegmentKind,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }

    pub fn is_word(&self) -> bool {
        self.kind == SegmentKind::Word
    }
}

/// Time-ordered, non-overlapping word/pause/breath intervals of one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct WordAlignment {
    entries: Vec<Segment>,
}

impl WordAlignment {
    pub fn new(entries: Vec<Segment>) -> Result<Self> {
        for (i, e) in entries.iter().enumerate() {
            if !(e.start.is_finite() && e.end.is_finite()) {
                return Err(Error::Validation(format!("entry {i} has a non-finite time")));
            }
            if e.end <= e.start {
                return Err(Error::Validation(format!(
                    "entry {i} ({:?}) ends at {} before it starts at {}",
                    e.label, e.end, e.start
                )));
            }
        }
        for (i, pair) in entries.windows(2).enumerate() {
            // 1 µs slack absorbs rounding in hand-written alignments
            if pair[1].start < pair[0].end - 1e-6 {
                return Err(Error::Validation(format!(
                    "entries {i} and {} overlap or are unsorted ({}..{} then {}..{})",
                    i + 1,
                    pair[0].start,
                    pair[0].end,
                    pair[1].start,
                    pair[1].end
                )));
            }
        }
        if !entries.iter().any(Segment::is_word) {
            return Err(Error::Validation(
                "alignment contains no word entries".into(),
            ));
        }
        Ok(WordAlignment { entries })
    }

    pub fn entries(&self) -> &[Segment] {
        &self.entries
    }

    pub fn words(&self) -> impl Iterator<Item = &Segment> + '_ {
        self.entries.iter().filter(|e| e.is_word())
    }

    pub fn word_count(&self) -> usize {
        self.words().count()
    }

    /// Start of the first word.
    pub fn first_word_start(&self) -> f64 {
        self.words().next().map(|w| w.start).unwrap_or(0.0)
    }

    /// End of the last word.
    pub fn last_word_end(&self) -> f64 {
        self.words().last().map(|w| w.end).unwrap_or(0.0)
    }

    pub fn end_time(&self) -> f64 {
        self.entries.last().map(|e| e.end).unwrap_or(0.0)
    }
}

/// Binary reference annotation of a single word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordReference {
    pub prominent: bool,
    pub boundary_after: bool,
}

/// Reference labels, one per word-kind alignment entry.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReferenceLabels(pub Vec<WordReference>);

impl ReferenceLabels {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn prominent(&self) -> Vec<bool> {
        self.0.iter().map(|r| r.prominent).collect()
    }

    pub fn boundaries(&self) -> Vec<bool> {
        self.0.iter().map(|r| r.boundary_after).collect()
    }
}

/// Tracks, alignment and optional references of one utterance.
#[derive(Debug, Clone)]
pub struct Utterance {
    pub id: String,
    pub f0: FrameSeries,
    pub voicing: VoicingMask,
    pub energy: FrameSeries,
    pub words: WordAlignment,
    pub refs: Option<ReferenceLabels>,
}

impl Utterance {
    /// Checks the cross-track invariants and trims f0 and energy to a
    /// common length.
    pub fn new(
        id: impl Into<String>,
        f0: FrameSeries,
        voicing: VoicingMask,
        energy: FrameSeries,
        words: WordAlignment,
        refs: Option<ReferenceLabels>,
    ) -> Result<Self> {
        let id = id.into();
        if voicing.len() != f0.len() {
            return Err(Error::Validation(format!(
                "{id}: voicing mask has {} frames, f0 has {}",
                voicing.len(),
                f0.len()
            )));
        }
        if (f0.frame_shift() - energy.frame_shift()).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "{id}: f0 frame shift {} differs from energy frame shift {}",
                f0.frame_shift(),
                energy.frame_shift()
            )));
        }
        if (f0.start_time() - energy.start_time()).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "{id}: f0 and energy start at different times"
            )));
        }
        let len = f0.len().min(energy.len());
        let (f0, voicing, energy) = if f0.len() != energy.len() {
            (f0.truncated(len)?, voicing.truncated(len), energy.truncated(len)?)
        } else {
            (f0, voicing, energy)
        };
        let shift = f0.frame_shift();
        if f0.start_time() > words.first_word_start() + shift
            || f0.end_time() + shift < words.last_word_end()
        {
            return Err(Error::Validation(format!(
                "{id}: tracks span {:.3}..{:.3} s but words span {:.3}..{:.3} s",
                f0.start_time(),
                f0.end_time(),
                words.first_word_start(),
                words.last_word_end()
            )));
        }
        if let Some(r) = &refs {
            if r.len() != words.word_count() {
                return Err(Error::Validation(format!(
                    "{id}: {} reference records for {} words",
                    r.len(),
                    words.word_count()
                )));
            }
        }
        Ok(Utterance {
            id,
            f0,
            voicing,
            energy,
            words,
            refs,
        })
    }

    pub fn frame_shift(&self) -> f64 {
        self.f0.frame_shift()
    }

    pub fn frame_count(&self) -> usize {
        self.f0.len()
    }
}

/// Rescales to zero mean and unit population variance.
///
/// Signals whose variance is below [`DEGENERATE_VARIANCE`] come back as zeros.
pub fn normalize(series: &FrameSeries) -> Result<FrameSeries> {
    if series.len() < 2 {
        return Err(Error::invalid(
            "normalize needs at least two frames",
        ));
    }
    let mean = series.mean();
    let var = series.variance();
    if var < DEGENERATE_VARIANCE {
        return series.like(vec![0.0; series.len()]);
    }
    let sd = var.sqrt();
    let mut out: Vec<f64> = series.values().iter().map(|v| (v - mean) / sd).collect();
    // second pass removes the residual rounding left by the first
    let m2 = out.iter().sum::<f64>() / out.len() as f64;
    let v2 = out.iter().map(|v| (v - m2) * (v - m2)).sum::<f64>() / out.len() as f64;
    let sd2 = v2.sqrt();
    for v in &mut out {
        *v = (*v - m2) / sd2;
    }
    series.like(out)
}

/// Sums the normalized tracks and normalizes the sum.
pub fn combine(tracks: &[FrameSeries]) -> Result<FrameSeries> {
    let first = tracks
        .first()
        .ok_or_else(|| Error::invalid("combine needs at least one track"))?;
    for (i, t) in tracks.iter().enumerate().skip(1) {
        if t.len() != first.len() {
            return Err(Error::invalid(format!(
                "track {i} has {} frames, track 0 has {}",
                t.len(),
                first.len()
            )));
        }
        if (t.frame_shift() - first.frame_shift()).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "track {i} frame shift {} differs from {}",
                t.frame_shift(),
                first.frame_shift()
            )));
        }
    }
    let normalized = tracks.iter().map(normalize).collect::<Result<Vec<_>>>()?;
    let mut sum = vec![0.0; first.len()];
    for t in &normalized {
        for (s, v) in sum.iter_mut().zip(t.values()) {
            *s += v;
        }
    }
    normalize(&first.like(sum)?)
}
