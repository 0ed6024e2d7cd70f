//! Synthetic utterances with planted prominence and boundary labels.
//!
//! Each utterance is a sequence of phrases. Within a phrase f0 and energy
//! follow a smooth arc of random height that falls back to the base level
//! at both phrase edges, so the junction between two phrases is a dip.
//! Prominent words carry a Gaussian accent on f0 and energy and are
//! lengthened; words before a boundary are lengthened, end low and are often
//! followed by a pause. Short unvoiced stretches at word onsets and silent
//! pauses exercise the gap filling. White noise is added to both tracks at a
//! chosen SNR.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::signal::io::{write_alignment, write_refs, write_track};
use crate::signal::{
    FrameSeries, ReferenceLabels, Segment, SegmentKind, Utterance, VoicingMask, WordAlignment,
    WordReference,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub frame_shift: f64,
    pub min_words: usize,
    pub max_words: usize,
    pub p_prominent: f64,
    pub p_boundary: f64,
    /// Signal-to-noise ratio of each track in dB; `None` adds no noise.
    pub snr_db: Option<f64>,
    /// Hz.
    pub f0_base: f64,
    /// Mean height of a phrase arc in Hz; each phrase draws 0.5 to 1.5 times this.
    pub phrase_arc: f64,
    /// Hz.
    pub accent: f64,
    /// Standard deviation of an accent as a fraction of the word duration.
    pub accent_width: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            frame_shift: 0.005,
            min_words: 8,
            max_words: 16,
            p_prominent: 0.45,
            p_boundary: 0.2,
            snr_db: Some(20.0),
            f0_base: 120.0,
            phrase_arc: 30.0,
            accent: 35.0,
            accent_width: 0.25,
        }
    }
}

fn gauss(t: f64, center: f64, width: f64) -> f64 {
    (-0.5 * ((t - center) / width).powi(2)).exp()
}

fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

fn add_noise(values: &mut [f64], mask: Option<&[bool]>, snr_db: f64, rng: &mut ChaCha8Rng) {
    let active: Vec<f64> = match mask {
        Some(m) => values.iter().zip(m).filter(|(_, &on)| on).map(|(v, _)| *v).collect(),
        None => values.to_vec(),
    };
    if active.len() < 2 {
        return;
    }
    let sd = (variance(&active) / 10f64.powf(snr_db / 10.0)).sqrt();
    if sd == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sd).expect("finite sd");
    for (k, v) in values.iter_mut().enumerate() {
        if mask.is_none_or(|m| m[k]) {
            *v += normal.sample(rng);
        }
    }
}

struct Phrase {
    start: f64,
    end: f64,
    /// Relative arc height.
    height: f64,
}

/// Generates utterance `index` of a corpus seeded with `seed`.
pub fn synth_utterance(params: &SynthParams, seed: u64, index: usize) -> Result<Utterance> {
    if params.min_words == 0 || params.min_words > params.max_words {
        return Err(Error::invalid("word count range is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index as u64);
    let n_words = rng.gen_range(params.min_words..=params.max_words);
    let refs: Vec<WordReference> = (0..n_words)
        .map(|i| WordReference {
            prominent: rng.gen_bool(params.p_prominent),
            boundary_after: i + 1 == n_words || (i > 0 && i + 2 < n_words && rng.gen_bool(params.p_boundary)),
        })
        .collect();

    let mut entries = Vec::new();
    let lead = rng.gen_range(0.15..0.3);
    entries.push(Segment {
        label: "<sil>".into(),
        start: 0.0,
        end: lead,
        kind: SegmentKind::Pause,
    });
    let mut t = lead;
    for (i, r) in refs.iter().enumerate() {
        let mut dur = rng.gen_range(0.2..0.26);
        if r.prominent {
            dur *= 1.2;
        }
        if r.boundary_after {
            dur *= 1.3;
        }
        entries.push(Segment {
            label: format!("w{i}"),
            start: t,
            end: t + dur,
            kind: SegmentKind::Word,
        });
        t += dur;
        if r.boundary_after && rng.gen_bool(0.5) {
            let p = rng.gen_range(0.1..0.25);
            let kind = if rng.gen_bool(0.25) { SegmentKind::Breath } else { SegmentKind::Pause };
            entries.push(Segment {
                label: if kind == SegmentKind::Breath { "<br>".into() } else { "<sil>".into() },
                start: t,
                end: t + p,
                kind,
            });
            t += p;
        }
    }
    let words = WordAlignment::new(entries)?;
    let total = words.end_time() + 0.05;
    let n_frames = (total / params.frame_shift).ceil() as usize;

    let word_list: Vec<&Segment> = words.words().collect();
    let mut phrases = Vec::new();
    let mut first = 0;
    for (i, r) in refs.iter().enumerate() {
        if r.boundary_after {
            phrases.push(Phrase {
                start: word_list[first].start,
                end: word_list[i].end,
                height: rng.gen_range(0.5..1.5),
            });
            first = i + 1;
        }
    }
    let accent_gain: Vec<f64> = refs.iter().map(|_| rng.gen_range(0.8..1.2)).collect();

    let mut onset_gaps = Vec::new();
    for w in &word_list {
        if rng.gen_bool(0.5) {
            onset_gaps.push((w.start, w.start + rng.gen_range(0.02..0.05)));
        }
    }

    let mut f0 = vec![0.0; n_frames];
    let mut energy = vec![0.0; n_frames];
    let mut voiced = vec![false; n_frames];
    for k in 0..n_frames {
        let time = k as f64 * params.frame_shift;
        let in_word = word_list.iter().position(|w| time >= w.start && time < w.end);
        let Some(wi) = in_word else {
            energy[k] = -4.0;
            continue;
        };
        let arc = phrases
            .iter()
            .find(|p| time >= p.start && time < p.end)
            .map_or(0.0, |p| p.height * (PI * (time - p.start) / (p.end - p.start)).sin());
        let w = word_list[wi];
        let mut hz = params.f0_base + params.phrase_arc * arc;
        let mut en = 0.8 * arc;
        if refs[wi].prominent {
            let bump = accent_gain[wi] * gauss(time, w.midpoint(), params.accent_width * w.duration());
            hz += params.accent * bump;
            en += 1.0 * bump;
        }
        if refs[wi].boundary_after {
            // final lowering towards the word end
            let dip = gauss(time, w.end, 0.25 * w.duration());
            hz -= 0.5 * params.accent * dip;
            en -= 0.6 * dip;
        }
        energy[k] = en;
        if onset_gaps.iter().any(|&(s, e)| time >= s && time < e) {
            energy[k] -= 1.5;
            continue;
        }
        f0[k] = hz;
        voiced[k] = true;
    }
    if let Some(snr) = params.snr_db {
        add_noise(&mut f0, Some(&voiced), snr, &mut rng);
        add_noise(&mut energy, None, snr, &mut rng);
    }
    for (v, &on) in f0.iter_mut().zip(&voiced) {
        if on {
            *v = v.max(1.0);
        }
    }

    let f0 = FrameSeries::new(f0, params.frame_shift)?;
    let energy = FrameSeries::new(energy, params.frame_shift)?;
    Utterance::new(
        format!("synth{index:04}"),
        f0,
        VoicingMask::new(voiced),
        energy,
        words,
        Some(ReferenceLabels(refs)),
    )
}

pub fn synth_corpus(params: &SynthParams, seed: u64, count: usize) -> Result<Vec<Utterance>> {
    (0..count).map(|i| synth_utterance(params, seed, i)).collect()
}

/// Writes tracks, alignments, references and a `manifest.tsv` into `dir`.
/// Manifest paths are relative to `dir`.
pub fn write_corpus(dir: &Path, utterances: &[Utterance]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::new();
    for u in utterances {
        let f0 = format!("{}.f0", u.id);
        let en = format!("{}.en", u.id);
        let al = format!("{}.align", u.id);
        let rf = format!("{}.refs", u.id);
        write_track(&dir.join(&f0), &u.f0)?;
        write_track(&dir.join(&en), &u.energy)?;
        write_alignment(&dir.join(&al), &u.words)?;
        if let Some(r) = &u.refs {
            write_refs(&dir.join(&rf), r)?;
            manifest.push_str(&format!("{}\t{f0},{en}\t{al}\t{rf}\n", u.id));
        } else {
            manifest.push_str(&format!("{}\t{f0},{en}\t{al}\n", u.id));
        }
    }
    let path = dir.join("manifest.tsv");
    std::fs::write(&path, manifest).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_deterministic() {
        let p = SynthParams::default();
        let a = synth_utterance(&p, 7, 3).unwrap();
        let b = synth_utterance(&p, 7, 3).unwrap();
        assert_eq!(a.f0, b.f0);
        assert_eq!(a.words, b.words);
        assert_eq!(a.refs, b.refs);
        let c = synth_utterance(&p, 8, 3).unwrap();
        assert_ne!(a.f0, c.f0);
    }

    #[test]
    fn labels_match_words_and_last_word_is_a_boundary() {
        for i in 0..10 {
            let u = synth_utterance(&SynthParams::default(), 1, i).unwrap();
            let refs = u.refs.as_ref().unwrap();
            assert_eq!(refs.len(), u.words.word_count());
            assert!(refs.0.last().unwrap().boundary_after);
            assert!(u.voicing.voiced_count() > 0);
            assert!(u.voicing.voiced_count() < u.voicing.len());
        }
    }

    #[test]
    fn noise_matches_requested_snr() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let clean: Vec<f64> = (0..20000).map(|k| (k as f64 * 0.01).sin()).collect();
        let mut noisy = clean.clone();
        add_noise(&mut noisy, None, 10.0, &mut rng);
        let noise: Vec<f64> = noisy.iter().zip(&clean).map(|(a, b)| a - b).collect();
        let snr = 10.0 * (variance(&clean) / variance(&noise)).log10();
        assert!((snr - 10.0).abs() < 0.2, "{snr}");
    }
}
