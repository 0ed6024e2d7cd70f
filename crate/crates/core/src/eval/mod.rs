//! Detection metrics and the corpus driver.

mod corpus;
mod manifest;

pub use corpus::{run_corpus, run_utterances, CorpusReport, CorpusRun, SystemScores, TaskReport, UtteranceResult};
pub use manifest::{load_utterance, Inputs, Manifest, ManifestEntry};

use crate::error::{Error, Result};

/// Binary confusion counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn new(pred: &[bool], reference: &[bool]) -> Result<Self> {
        if pred.len() != reference.len() {
            return Err(Error::invalid(format!(
                "{} predictions for {} references",
                pred.len(),
                reference.len()
            )));
        }
        if pred.is_empty() {
            return Err(Error::invalid("no words to evaluate"));
        }
        let mut c = Confusion::default();
        for (&p, &r) in pred.iter().zip(reference) {
            match (p, r) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn metrics(&self) -> Metrics {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            accuracy: ratio(self.tp + self.tn, self.total()),
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Confusion counts and derived metrics.
pub fn metrics(pred: &[bool], reference: &[bool]) -> Result<(Confusion, Metrics)> {
    let c = Confusion::new(pred, reference)?;
    Ok((c, c.metrics()))
}

/// Accuracy of always predicting the more frequent class.
pub fn majority_baseline(reference: &[bool]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::invalid("no references"));
    }
    let pos = reference.iter().filter(|&&r| r).count();
    Ok(pos.max(reference.len() - pos) as f64 / reference.len() as f64)
}
