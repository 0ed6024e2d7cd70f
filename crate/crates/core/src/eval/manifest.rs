use std::path::{Path, PathBuf};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::extract::{autocorr_f0, log_energy, Audio, VoicingParams};
use crate::signal::io::{read_alignment, read_refs, read_track, TrackFormat};
use crate::signal::{Utterance, VoicingMask};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inputs {
    /// Tracks are extracted from the recording.
    Wav(PathBuf),
    Tracks { f0: PathBuf, energy: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub utt_id: String,
    pub inputs: Inputs,
    pub alignment: PathBuf,
    pub refs: Option<PathBuf>,
    /// Groups utterances for pooled word-scale estimation.
    pub paragraph: Option<String>,
}

impl ManifestEntry {
    pub fn paragraph_key(&self) -> &str {
        self.paragraph.as_deref().unwrap_or(&self.utt_id)
    }
}

/// Rows of `utt_id<TAB>inputs<TAB>alignment[<TAB>refs[<TAB>paragraph]]`.
///
/// `inputs` is either a `.wav` path or `f0_path,energy_path`. Relative paths
/// resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn parse(text: &str, base: &Path, origin: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if !(3..=5).contains(&fields.len()) {
                return Err(err(ln, format!("expected 3 to 5 tab-separated columns, got {}", fields.len())));
            }
            let inputs = match fields[1].split(',').map(str::trim).collect::<Vec<_>>().as_slice() {
                [wav] if wav.to_ascii_lowercase().ends_with(".wav") => Inputs::Wav(base.join(wav)),
                [f0, en] => Inputs::Tracks {
                    f0: base.join(f0),
                    energy: base.join(en),
                },
                _ => {
                    return Err(err(
                        ln,
                        format!("inputs must be a .wav path or f0,energy paths, got {:?}", fields[1]),
                    ))
                }
            };
            let optional = |k: usize| fields.get(k).filter(|f| !f.is_empty() && **f != "-");
            entries.push(ManifestEntry {
                utt_id: fields[0].to_string(),
                inputs,
                alignment: base.join(fields[2]),
                refs: optional(3).map(|f| base.join(f)),
                paragraph: optional(4).map(|f| f.to_string()),
            });
        }
        Ok(Manifest { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base, path)
    }
}

/// Reads (or extracts) the tracks and labels of one manifest entry.
pub fn load_utterance(entry: &ManifestEntry, cfg: &Config) -> Result<Utterance> {
    let (f0, energy) = match &entry.inputs {
        Inputs::Tracks { f0, energy } => (
            read_track(f0, TrackFormat::Auto, cfg.frame_shift)?,
            read_track(energy, TrackFormat::Auto, cfg.frame_shift)?,
        ),
        Inputs::Wav(path) => {
            let audio = Audio::read_wav(path)?;
            let params = VoicingParams {
                min_autocorr: cfg.voicing_min_autocorr,
                max_zcr: cfg.voicing_max_zcr,
                energy_percentile: cfg.voicing_energy_percentile,
                energy_window: cfg.extract_window,
            };
            let (f0, _) = autocorr_f0(&audio, cfg.pitch_range, cfg.frame_shift, &params)?;
            (f0, log_energy(&audio, cfg.frame_shift, cfg.extract_window)?)
        }
    };
    let voicing = VoicingMask::from_f0(&f0);
    let words = read_alignment(&entry.alignment)?;
    let refs = entry.refs.as_deref().map(read_refs).transpose()?;
    Utterance::new(entry.utt_id.clone(), f0, voicing, energy, words, refs)
}
