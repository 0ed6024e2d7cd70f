use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::manifest::{load_utterance, Manifest};
use super::{majority_baseline, Confusion, Metrics};
use crate::annotate::{
    analyze_with_scale, binarize_kmeans, binarize_threshold, pooled_word_scale, raw_baseline, WordProsody,
};
use crate::config::{BinarizeMode, CalibSelection, Config, ScaleEstimation};
use crate::error::{Error, Result};
use crate::signal::io::write_word_prosody;
use crate::signal::{ReferenceLabels, Utterance};

#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceResult {
    pub utt_id: String,
    pub words: Vec<WordProsody>,
    pub baseline: Vec<WordProsody>,
    pub refs: Option<ReferenceLabels>,
}

/// Scores of one system on one task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskReport {
    pub threshold: f64,
    pub confusion: Option<Confusion>,
    pub metrics: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemScores {
    /// Row label, e.g. `f0_en_dur` or `f0_en_dur_raw`.
    pub label: String,
    pub prominence: TaskReport,
    pub boundary: TaskReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusReport {
    pub features: String,
    pub binarize: BinarizeMode,
    pub utterances: usize,
    pub failures: Vec<(String, String)>,
    /// Words carrying reference labels.
    pub evaluated_words: usize,
    pub calibration_words: usize,
    /// Majority-class accuracy per task, when references exist.
    pub majority: Option<(f64, f64)>,
    pub wavelet: SystemScores,
    pub raw: SystemScores,
}

/// The error and its causes on one line.
fn describe(err: &Error) -> String {
    let mut text = err.to_string();
    let mut source = std::error::Error::source(err);
    while let Some(s) = source {
        let _ = write!(text, ": {s}");
        source = s.source();
    }
    text
}

fn pct(m: Option<Metrics>) -> [String; 4] {
    match m {
        Some(m) => [
            format!("{:.1}", 100.0 * m.accuracy),
            format!("{:.2}", m.f1),
            format!("{:.2}", m.precision),
            format!("{:.2}", m.recall),
        ],
        None => ["-".into(), "-".into(), "-".into(), "-".into()],
    }
}

impl CorpusReport {
    /// Plain-text report laid out like a results table: one row per
    /// system, accuracy in percent, F-score, precision and recall as
    /// fractions.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "features\t{}", self.features);
        let _ = writeln!(s, "binarize\t{}", self.binarize.as_str());
        let _ = writeln!(s, "utterances\t{}", self.utterances);
        let _ = writeln!(s, "failed\t{}", self.failures.len());
        let _ = writeln!(s, "evaluated_words\t{}", self.evaluated_words);
        let _ = writeln!(s, "calibration_words\t{}", self.calibration_words);
        for sys in [&self.wavelet, &self.raw] {
            let _ = writeln!(
                s,
                "threshold\t{}\tprominence\t{:.6}\tboundary\t{:.6}",
                sys.label, sys.prominence.threshold, sys.boundary.threshold
            );
        }
        s.push('\n');
        let _ = writeln!(s, "\tProminence Detection\t\t\t\tBoundary Detection");
        let _ = writeln!(s, "feature\tacc.%\tF-score\tprec.\trec.\tacc.%\tF-score\tprec.\trec.");
        if let Some((p, b)) = self.majority {
            let _ = writeln!(s, "majority\t{:.1}\t\t\t\t{:.1}\t\t\t", 100.0 * p, 100.0 * b);
        }
        for sys in [&self.wavelet, &self.raw] {
            let p = pct(sys.prominence.metrics);
            let b = pct(sys.boundary.metrics);
            let _ = writeln!(s, "{}\t{}\t{}", sys.label, p.join("\t"), b.join("\t"));
        }
        for (id, why) in &self.failures {
            let _ = writeln!(s, "skipped\t{id}\t{why}");
        }
        s
    }
}

/// Per-utterance annotations plus the corpus report.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRun {
    pub report: CorpusReport,
    /// Sorted by utterance id.
    pub utterances: Vec<UtteranceResult>,
}

impl CorpusRun {
    /// Writes `<utt_id>.prosody.tsv`, `<utt_id>.raw.tsv` and `report.txt`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for u in &self.utterances {
            write_word_prosody(&dir.join(format!("{}.prosody.tsv", u.utt_id)), &u.words)?;
            write_word_prosody(&dir.join(format!("{}.raw.tsv", u.utt_id)), &u.baseline)?;
        }
        let path = dir.join("report.txt");
        std::fs::write(&path, self.report.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Loads every manifest entry and runs [`run_utterances`].
pub fn run_corpus(manifest: &Manifest, cfg: &Config) -> Result<CorpusRun> {
    if manifest.entries.is_empty() {
        return Err(Error::invalid("manifest lists no utterances"));
    }
    let loaded: Vec<_> = manifest
        .entries
        .par_iter()
        .map(|e| (e, load_utterance(e, cfg)))
        .collect();
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (entry, res) in loaded {
        match res {
            Ok(u) => ok.push((u, entry.paragraph_key().to_string())),
            Err(err) => {
                log::warn!("skipping {}: {err}", entry.utt_id);
                failures.push((entry.utt_id.clone(), describe(&err)));
            }
        }
    }
    run_inner(ok, failures, cfg)
}

/// Annotates in-memory utterances, binarizes at corpus level and scores
/// against references. Each utterance is its own paragraph.
pub fn run_utterances(utterances: Vec<Utterance>, cfg: &Config) -> Result<CorpusRun> {
    if utterances.is_empty() {
        return Err(Error::invalid("no utterances"));
    }
    let items = utterances
        .into_iter()
        .map(|u| {
            let id = u.id.clone();
            (u, id)
        })
        .collect();
    run_inner(items, Vec::new(), cfg)
}

fn run_inner(
    mut items: Vec<(Utterance, String)>,
    mut failures: Vec<(String, String)>,
    cfg: &Config,
) -> Result<CorpusRun> {
    cfg.validate()?;
    let total = items.len() + failures.len();
    items.sort_by(|a, b| a.0.id.cmp(&b.0.id));
    let mut seen = BTreeSet::new();
    for (u, _) in &items {
        if !seen.insert(u.id.as_str()) {
            return Err(Error::invalid(format!("duplicate utterance id {:?}", u.id)));
        }
    }

    let mut scales: BTreeMap<&str, f64> = BTreeMap::new();
    if cfg.scale_estimation == ScaleEstimation::Paragraph {
        let mut groups: BTreeMap<&str, Vec<&Utterance>> = BTreeMap::new();
        for (u, p) in &items {
            groups.entry(p.as_str()).or_default().push(u);
        }
        for (p, us) in groups {
            scales.insert(p, pooled_word_scale(us.iter().map(|u| &u.words))?);
        }
    }

    let analysed: Vec<Result<UtteranceResult>> = items
        .par_iter()
        .map(|(u, p)| {
            let a_w = match scales.get(p.as_str()) {
                Some(&a) => a,
                None => crate::annotate::word_scale(&u.words)?,
            };
            let analysis = analyze_with_scale(u, cfg, a_w)?;
            Ok(UtteranceResult {
                utt_id: u.id.clone(),
                words: analysis.words,
                baseline: raw_baseline(u, cfg)?,
                refs: u.refs.clone(),
            })
        })
        .collect();
    let mut results = Vec::new();
    for ((u, _), res) in items.iter().zip(analysed) {
        match res {
            Ok(r) => results.push(r),
            Err(err) => {
                log::warn!("skipping {}: {err}", u.id);
                failures.push((u.id.clone(), describe(&err)));
            }
        }
    }
    failures.sort();
    if results.is_empty() {
        return Err(Error::Validation(format!("all {total} utterances failed")));
    }
    if failures.len() as f64 > cfg.max_failure_fraction * total as f64 {
        return Err(Error::Validation(format!(
            "{} of {total} utterances failed (limit {:.0}%)",
            failures.len(),
            100.0 * cfg.max_failure_fraction
        )));
    }
    if !failures.is_empty() {
        log::warn!("{} of {total} utterances skipped", failures.len());
    }

    let calib_idx = calibration_indices(&results, cfg);
    let wavelet_label = cfg.features.to_string().replace(',', "_");
    let (wp, wb) = binarize_system(&mut results, cfg, &calib_idx, |r| &mut r.words)?;
    let (rp, rb) = binarize_system(&mut results, cfg, &calib_idx, |r| &mut r.baseline)?;

    let labelled: Vec<&UtteranceResult> = results.iter().filter(|r| r.refs.is_some()).collect();
    let ref_prom: Vec<bool> = labelled.iter().flat_map(|r| r.refs.as_ref().unwrap().prominent()).collect();
    let ref_bound: Vec<bool> = labelled.iter().flat_map(|r| r.refs.as_ref().unwrap().boundaries()).collect();
    let score = |threshold: f64, pick: &dyn Fn(&UtteranceResult) -> Vec<bool>, refs: &[bool]| -> Result<TaskReport> {
        if refs.is_empty() {
            return Ok(TaskReport {
                threshold,
                confusion: None,
                metrics: None,
            });
        }
        let pred: Vec<bool> = labelled.iter().flat_map(|r| pick(r)).collect();
        let c = Confusion::new(&pred, refs)?;
        Ok(TaskReport {
            threshold,
            confusion: Some(c),
            metrics: Some(c.metrics()),
        })
    };
    let prom_of = |w: &[WordProsody]| w.iter().map(|x| x.prom_binary).collect::<Vec<_>>();
    let bound_of = |w: &[WordProsody]| w.iter().map(|x| x.bound_binary).collect::<Vec<_>>();
    let wavelet = SystemScores {
        label: wavelet_label.clone(),
        prominence: score(wp, &|r| prom_of(&r.words), &ref_prom)?,
        boundary: score(wb, &|r| bound_of(&r.words), &ref_bound)?,
    };
    let raw = SystemScores {
        label: format!("{wavelet_label}_raw"),
        prominence: score(rp, &|r| prom_of(&r.baseline), &ref_prom)?,
        boundary: score(rb, &|r| bound_of(&r.baseline), &ref_bound)?,
    };
    let majority = if ref_prom.is_empty() {
        None
    } else {
        Some((majority_baseline(&ref_prom)?, majority_baseline(&ref_bound)?))
    };
    let report = CorpusReport {
        features: cfg.features.to_string(),
        binarize: cfg.binarize,
        utterances: results.len(),
        failures,
        evaluated_words: ref_prom.len(),
        calibration_words: if cfg.binarize == BinarizeMode::Threshold { calib_idx.len() } else { 0 },
        majority,
        wavelet,
        raw,
    };
    Ok(CorpusRun {
        report,
        utterances: results,
    })
}

/// Flat (utterance, word) positions of the labelled calibration words.
fn calibration_indices(results: &[UtteranceResult], cfg: &Config) -> Vec<(usize, usize)> {
    let mut all: Vec<(usize, usize)> = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.refs.is_some())
        .flat_map(|(u, r)| (0..r.words.len()).map(move |w| (u, w)))
        .collect();
    let k = ((cfg.calib_fraction * all.len() as f64).ceil() as usize).min(all.len());
    if cfg.calib_selection == CalibSelection::Random {
        all.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.calib_seed));
    }
    all.truncate(k);
    all
}

/// Binarizes one system's prominence and boundary values across the corpus
/// and returns the two thresholds.
fn binarize_system(
    results: &mut [UtteranceResult],
    cfg: &Config,
    calib: &[(usize, usize)],
    field: impl Fn(&mut UtteranceResult) -> &mut Vec<WordProsody>,
) -> Result<(f64, f64)> {
    let mut prom = Vec::new();
    let mut bound = Vec::new();
    for r in results.iter_mut() {
        for w in field(r).iter() {
            prom.push(w.prominence);
            bound.push(w.boundary);
        }
    }
    let offsets: Vec<usize> = results
        .iter_mut()
        .scan(0, |acc, r| {
            let start = *acc;
            *acc += field(r).len();
            Some(start)
        })
        .collect();

    let (pt, pl, bt, bl) = match cfg.binarize {
        BinarizeMode::Kmeans => {
            let (ps, pl) = binarize_kmeans(&prom)?;
            let (bs, bl) = binarize_kmeans(&bound)?;
            (ps.threshold, pl, bs.threshold, bl)
        }
        BinarizeMode::Threshold => {
            if calib.is_empty() {
                return Err(Error::Binarize(
                    "threshold binarization needs reference labels; use k-means binarization instead".into(),
                ));
            }
            let mut pc = Vec::with_capacity(calib.len());
            let mut bc = Vec::with_capacity(calib.len());
            for &(u, w) in calib {
                let refs = results[u].refs.as_ref().expect("calibration words are labelled");
                let flat = offsets[u] + w;
                pc.push((prom[flat], refs.0[w].prominent));
                bc.push((bound[flat], refs.0[w].boundary_after));
            }
            let (pf, pl) = binarize_threshold(&prom, &pc)?;
            let (bf, bl) = binarize_threshold(&bound, &bc)?;
            (pf.threshold, pl, bf.threshold, bl)
        }
    };
    let mut k = 0;
    for r in results.iter_mut() {
        for w in field(r).iter_mut() {
            w.prom_binary = pl[k];
            w.bound_binary = bl[k];
            k += 1;
        }
    }
    Ok((pt, bt))
}
