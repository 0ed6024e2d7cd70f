//! Analysis parameters and the `key = value` config file format.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::annotate::FeatureSet;
use crate::cwt::{ScaleGrid, HALF_OCTAVE};
use crate::error::{Error, Result};
use crate::extract::PitchRange;
use crate::loma::{LinkConfig, SearchDirection};
use crate::preproc::{F0Fill, SmoothingFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleEstimation {
    Utterance,
    Paragraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinarizeMode {
    Threshold,
    Kmeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibSelection {
    /// The first words in manifest order.
    First,
    /// A seeded random subset.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub frame_shift: f64,
    pub features: FeatureSet,
    pub gap_fill_energy: bool,

    pub gain_w_max: f64,
    pub gain_n: usize,
    pub f0_w_max: f64,
    pub f0_n: usize,
    pub f0_final_w_max: f64,
    pub f0_final_n: usize,
    /// Frames.
    pub w_min: f64,
    pub f0_fallback: f64,

    pub cwt_ratio: f64,
    pub cwt_octaves: usize,

    pub loma_max_distance: f64,
    pub loma_both_sides: bool,
    pub loma_direction: SearchDirection,

    pub scale_estimation: ScaleEstimation,
    pub binarize: BinarizeMode,
    pub calib_fraction: f64,
    pub calib_selection: CalibSelection,
    pub calib_seed: u64,

    pub pitch_range: PitchRange,
    pub extract_window: f64,
    pub voicing_min_autocorr: f64,
    pub voicing_max_zcr: f64,
    pub voicing_energy_percentile: f64,

    pub max_failure_fraction: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            frame_shift: 0.005,
            features: FeatureSet::ALL,
            gap_fill_energy: true,
            gain_w_max: 0.100,
            gain_n: 100,
            f0_w_max: 0.100,
            f0_n: 200,
            f0_final_w_max: 0.025,
            f0_final_n: 50,
            w_min: 1.0,
            f0_fallback: 1.0,
            cwt_ratio: HALF_OCTAVE,
            cwt_octaves: 3,
            loma_max_distance: 0.200,
            loma_both_sides: false,
            loma_direction: SearchDirection::ScaleDifference,
            scale_estimation: ScaleEstimation::Utterance,
            binarize: BinarizeMode::Threshold,
            calib_fraction: 0.1,
            calib_selection: CalibSelection::First,
            calib_seed: 0,
            pitch_range: PitchRange::MALE,
            extract_window: 0.025,
            voicing_min_autocorr: 0.3,
            voicing_max_zcr: 0.25,
            voicing_energy_percentile: 10.0,
            max_failure_fraction: 0.1,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean {value:?} for {key}"))),
    }
}

impl FromStr for ScaleEstimation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "utterance" => Ok(ScaleEstimation::Utterance),
            "paragraph" => Ok(ScaleEstimation::Paragraph),
            _ => Err(Error::Config(format!("scale estimation must be utterance or paragraph, got {s:?}"))),
        }
    }
}

impl FromStr for BinarizeMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "threshold" => Ok(BinarizeMode::Threshold),
            "kmeans" => Ok(BinarizeMode::Kmeans),
            _ => Err(Error::Config(format!("binarize must be threshold or kmeans, got {s:?}"))),
        }
    }
}

impl FromStr for CalibSelection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(CalibSelection::First),
            "random" => Ok(CalibSelection::Random),
            _ => Err(Error::Config(format!("calibration selection must be first or random, got {s:?}"))),
        }
    }
}

impl ScaleEstimation {
    pub fn as_str(self) -> &'static str {
        match self {
            ScaleEstimation::Utterance => "utterance",
            ScaleEstimation::Paragraph => "paragraph",
        }
    }
}

impl BinarizeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BinarizeMode::Threshold => "threshold",
            BinarizeMode::Kmeans => "kmeans",
        }
    }
}

impl CalibSelection {
    pub fn as_str(self) -> &'static str {
        match self {
            CalibSelection::First => "first",
            CalibSelection::Random => "random",
        }
    }
}

impl Config {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "frame_shift" => self.frame_shift = parse_value(key, v)?,
            "features" => self.features = v.parse()?,
            "gap_fill_energy" => self.gap_fill_energy = parse_bool(key, v)?,
            "gain.w_max" => self.gain_w_max = parse_value(key, v)?,
            "gain.n" => self.gain_n = parse_value(key, v)?,
            "f0.w_max" => self.f0_w_max = parse_value(key, v)?,
            "f0.n" => self.f0_n = parse_value(key, v)?,
            "f0.final.w_max" => self.f0_final_w_max = parse_value(key, v)?,
            "f0.final.n" => self.f0_final_n = parse_value(key, v)?,
            "w_min" => self.w_min = parse_value(key, v)?,
            "f0.fallback" => self.f0_fallback = parse_value(key, v)?,
            "cwt.ratio" => self.cwt_ratio = parse_value(key, v)?,
            "cwt.octaves" => self.cwt_octaves = parse_value(key, v)?,
            "loma.max_distance" => self.loma_max_distance = parse_value(key, v)?,
            "loma.both_sides" => self.loma_both_sides = parse_bool(key, v)?,
            "loma.direction" => self.loma_direction = v.parse()?,
            "scale_estimation" => self.scale_estimation = v.parse()?,
            "binarize" => self.binarize = v.parse()?,
            "calib.fraction" => self.calib_fraction = parse_value(key, v)?,
            "calib.selection" => self.calib_selection = v.parse()?,
            "calib.seed" => self.calib_seed = parse_value(key, v)?,
            "extract.pitch_range" => self.pitch_range = v.parse()?,
            "extract.window" => self.extract_window = parse_value(key, v)?,
            "voicing.min_autocorr" => self.voicing_min_autocorr = parse_value(key, v)?,
            "voicing.max_zcr" => self.voicing_max_zcr = parse_value(key, v)?,
            "voicing.energy_percentile" => self.voicing_energy_percentile = parse_value(key, v)?,
            "corpus.max_failure_fraction" => self.max_failure_fraction = parse_value(key, v)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("frame_shift", self.frame_shift),
            ("gain.w_max", self.gain_w_max),
            ("f0.w_max", self.f0_w_max),
            ("f0.final.w_max", self.f0_final_w_max),
            ("w_min", self.w_min),
            ("loma.max_distance", self.loma_max_distance),
            ("extract.window", self.extract_window),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{key} must be positive, got {v}")));
            }
        }
        if !(self.cwt_ratio > 1.0) {
            return Err(Error::Config("cwt.ratio must exceed 1".into()));
        }
        if self.cwt_octaves == 0 {
            return Err(Error::Config("cwt.octaves must be at least 1".into()));
        }
        if !(self.calib_fraction > 0.0 && self.calib_fraction <= 1.0) {
            return Err(Error::Config("calib.fraction must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.max_failure_fraction) {
            return Err(Error::Config("corpus.max_failure_fraction must lie in [0, 1]".into()));
        }
        if self.features.is_empty() {
            return Err(Error::Config("at least one feature is required".into()));
        }
        Ok(())
    }

    /// Serializes every key; `Config::parse(&cfg.to_text())` reproduces `cfg`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").expect("string write");
        kv("frame_shift", self.frame_shift.to_string());
        kv("features", self.features.to_string());
        kv("gap_fill_energy", self.gap_fill_energy.to_string());
        kv("gain.w_max", self.gain_w_max.to_string());
        kv("gain.n", self.gain_n.to_string());
        kv("f0.w_max", self.f0_w_max.to_string());
        kv("f0.n", self.f0_n.to_string());
        kv("f0.final.w_max", self.f0_final_w_max.to_string());
        kv("f0.final.n", self.f0_final_n.to_string());
        kv("w_min", self.w_min.to_string());
        kv("f0.fallback", self.f0_fallback.to_string());
        kv("cwt.ratio", self.cwt_ratio.to_string());
        kv("cwt.octaves", self.cwt_octaves.to_string());
        kv("loma.max_distance", self.loma_max_distance.to_string());
        kv("loma.both_sides", self.loma_both_sides.to_string());
        kv("loma.direction", self.loma_direction.as_str().into());
        kv("scale_estimation", self.scale_estimation.as_str().into());
        kv("binarize", self.binarize.as_str().into());
        kv("calib.fraction", self.calib_fraction.to_string());
        kv("calib.selection", self.calib_selection.as_str().into());
        kv("calib.seed", self.calib_seed.to_string());
        kv("extract.pitch_range", self.pitch_range.to_string());
        kv("extract.window", self.extract_window.to_string());
        kv("voicing.min_autocorr", self.voicing_min_autocorr.to_string());
        kv("voicing.max_zcr", self.voicing_max_zcr.to_string());
        kv("voicing.energy_percentile", self.voicing_energy_percentile.to_string());
        kv("corpus.max_failure_fraction", self.max_failure_fraction.to_string());
        out
    }

    pub fn gain_family(&self) -> Result<SmoothingFamily> {
        SmoothingFamily::from_seconds(self.gain_w_max, self.w_min, self.gain_n, self.frame_shift)
    }

    pub fn f0_fill(&self) -> Result<F0Fill> {
        Ok(F0Fill {
            recursion: SmoothingFamily::from_seconds(self.f0_w_max, self.w_min, self.f0_n, self.frame_shift)?,
            final_pass: SmoothingFamily::from_seconds(
                self.f0_final_w_max,
                self.w_min,
                self.f0_final_n,
                self.frame_shift,
            )?,
            fallback: self.f0_fallback,
        })
    }

    pub fn link(&self) -> LinkConfig {
        LinkConfig {
            max_distance: self.loma_max_distance,
            both_sides: self.loma_both_sides,
            direction: self.loma_direction,
        }
    }

    /// Scales per octave implied by the ratio (2 for `√2`).
    pub fn scales_per_octave(&self) -> usize {
        (2f64.ln() / self.cwt_ratio.ln()).round().max(1.0) as usize
    }

    /// Grid from `finest` spanning the configured number of octaves.
    pub fn grid(&self, finest: f64) -> Result<ScaleGrid> {
        ScaleGrid::new(finest, self.cwt_ratio, self.cwt_octaves * self.scales_per_octave() + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let cfg = Config::default();
        assert_eq!(Config::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn shipped_defaults_file_matches() {
        let text = include_str!("../../../config/defaults.conf");
        assert_eq!(Config::parse(text).unwrap(), Config::default());
    }

    #[test]
    fn overrides_and_errors() {
        let cfg = Config::parse("# comment\nfeatures = f0,dur\nbinarize = kmeans\nextract.pitch_range = female\n").unwrap();
        assert!(cfg.features.f0 && cfg.features.duration && !cfg.features.energy);
        assert_eq!(cfg.binarize, BinarizeMode::Kmeans);
        assert_eq!(cfg.pitch_range, PitchRange::FEMALE);
        assert!(Config::parse("nonsense = 1").is_err());
        assert!(Config::parse("gain.n = many").is_err());
        assert!(Config::parse("no equals sign").is_err());
        assert!(Config::parse("frame_shift = -1").is_err());
    }

    #[test]
    fn default_grid_has_seven_half_octave_scales() {
        let cfg = Config::default();
        let g = cfg.grid(0.125).unwrap();
        assert_eq!(g.len(), 7);
        assert!((g.coarsest() - 1.0).abs() < 1e-12);
    }
}
