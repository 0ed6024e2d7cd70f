use crate::error::{Error, Result};

/// Threshold chosen on a labelled calibration subset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdFit {
    pub threshold: f64,
    pub calib_accuracy: f64,
}

/// Optimal two-cluster split of 1-D values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmeansSplit {
    pub low_centroid: f64,
    pub high_centroid: f64,
    /// Smallest value of the high cluster.
    pub threshold: f64,
    /// Within-cluster sum of squares.
    pub wcss: f64,
}

/// Picks the threshold maximizing calibration accuracy and labels `values`
/// with `value >= threshold`.
///
/// Candidates are the midpoints between consecutive distinct calibration
/// values plus the two trivial cuts (everything positive, everything
/// negative). Ties go to the lowest threshold.
pub fn binarize_threshold(values: &[f64], calib: &[(f64, bool)]) -> Result<(ThresholdFit, Vec<bool>)> {
    let positives = calib.iter().filter(|c| c.1).count();
    if positives == 0 || positives == calib.len() {
        return Err(Error::Binarize(
            "calibration subset holds a single class; use k-means binarization instead".into(),
        ));
    }
    let mut sorted = calib.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = sorted.len();

    // threshold at sorted[0]: everything positive
    let mut correct = positives;
    let mut best = ThresholdFit {
        threshold: sorted[0].0,
        calib_accuracy: correct as f64 / n as f64,
    };
    let mut i = 0;
    while i < n {
        // move the whole run of equal values below the cut
        let v = sorted[i].0;
        while i < n && sorted[i].0 == v {
            if sorted[i].1 {
                correct -= 1;
            } else {
                correct += 1;
            }
            i += 1;
        }
        let threshold = if i < n {
            0.5 * (v + sorted[i].0)
        } else {
            v.next_up()
        };
        let acc = correct as f64 / n as f64;
        if acc > best.calib_accuracy {
            best = ThresholdFit {
                threshold,
                calib_accuracy: acc,
            };
        }
    }
    let labels = values.iter().map(|&v| v >= best.threshold).collect();
    Ok((best, labels))
}

/// Exact two-means on the real line.
///
/// In sorted order the optimal clusters are contiguous, so every cut between
/// distinct neighbouring values is scored by its within-cluster sum of
/// squares. Ties prefer the cut with more values in the low cluster. The
/// cluster with the higher centroid is labelled positive.
pub fn binarize_kmeans(values: &[f64]) -> Result<(KmeansSplit, Vec<bool>)> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("k-means input must be finite"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n < 2 || sorted[0] == sorted[n - 1] {
        return Err(Error::Binarize(
            "k-means needs at least two distinct values; all values fall in one cluster".into(),
        ));
    }
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = sorted.iter().map(|v| v - mean).collect();
    let total_sum: f64 = centered.iter().sum();
    let total_sq: f64 = centered.iter().map(|v| v * v).sum();

    let tol = 1e-12 * total_sq.max(f64::MIN_POSITIVE);
    let (mut sum, mut sq) = (0.0, 0.0);
    let mut best: Option<(usize, f64)> = None;
    for cut in 1..n {
        sum += centered[cut - 1];
        sq += centered[cut - 1] * centered[cut - 1];
        if sorted[cut - 1] == sorted[cut] {
            continue;
        }
        let left = sq - sum * sum / cut as f64;
        let rsum = total_sum - sum;
        let right = (total_sq - sq) - rsum * rsum / (n - cut) as f64;
        let wcss = (left + right).max(0.0);
        match best {
            Some((_, b)) if wcss > b + tol => {}
            _ => best = Some((cut, wcss)),
        }
    }
    let (cut, wcss) = best.expect("at least one distinct cut exists");
    let low = sorted[..cut].iter().sum::<f64>() / cut as f64;
    let high = sorted[cut..].iter().sum::<f64>() / (n - cut) as f64;
    let split = KmeansSplit {
        low_centroid: low,
        high_centroid: high,
        threshold: sorted[cut],
        wcss,
    };
    let labels = values.iter().map(|&v| v >= split.threshold).collect();
    Ok((split, labels))
}
