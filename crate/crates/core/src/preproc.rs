//! Continuous input signals for the wavelet analysis.
//!
//! Gain and f0 are gap-filled with an iterated max-with-smoothed recursion
//! over a family of Gaussian kernels whose widths shrink geometrically from
//! `w_max` to `w_min`. Word durations become a continuous signal through a
//! natural cubic spline over word midpoints.

use log::warn;

use crate::error::{Error, Result};
use crate::signal::{FrameSeries, VoicingMask, WordAlignment};

/// Gaussian kernels are cut at this many standard deviations.
pub const KERNEL_TRUNCATION: f64 = 3.5;

/// Kernel family `φ_0 … φ_n` with standard deviations (in frames)
/// `w_max^((n-i)/n) · w_min^(i/n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingFamily {
    max_width: f64,
    min_width: f64,
    members: usize,
}

impl SmoothingFamily {
    /// Widths are given in frames.
    pub fn new(max_width: f64, min_width: f64, members: usize) -> Result<Self> {
        if !(min_width.is_finite() && min_width > 0.0) {
            return Err(Error::invalid(format!("w_min must be positive, got {min_width}")));
        }
        if !(max_width.is_finite() && max_width > min_width) {
            return Err(Error::invalid(format!(
                "w_max ({max_width} frames) must exceed w_min ({min_width} frames)"
            )));
        }
        if members == 0 {
            return Err(Error::invalid("a smoothing family needs n >= 1"));
        }
        Ok(SmoothingFamily {
            max_width,
            min_width,
            members,
        })
    }

    /// `w_max` in seconds, `w_min` in frames.
    pub fn from_seconds(w_max: f64, w_min_frames: f64, n: usize, frame_shift: f64) -> Result<Self> {
        Self::new(w_max / frame_shift, w_min_frames, n)
    }

    pub fn n(&self) -> usize {
        self.members
    }

    /// Standard deviation in frames of kernel `i`, `0 <= i <= n`.
    pub fn width(&self, i: usize) -> f64 {
        let n = self.members as f64;
        let i = i as f64;
        self.max_width.powf((n - i) / n) * self.min_width.powf(i / n)
    }

    /// Dilation constant `λ_i`, the reciprocal of the kernel width.
    pub fn lambda(&self, i: usize) -> f64 {
        1.0 / self.width(i)
    }
}

/// Unit-sum Gaussian taps of standard deviation `sigma` frames.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (KERNEL_TRUNCATION * sigma).ceil() as i64;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|x| (-0.5 * (x as f64 / sigma).powi(2)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= total;
    }
    taps
}

/// Convolution that renormalizes the kernel over the frames inside the
/// signal, so every output is a convex combination of inputs.
fn smooth(values: &[f64], taps: &[f64]) -> Vec<f64> {
    let len = values.len() as i64;
    let radius = (taps.len() / 2) as i64;
    (0..len)
        .map(|k| {
            let lo = (k - radius).max(0);
            let hi = (k + radius).min(len - 1);
            let mut acc = 0.0;
            let mut mass = 0.0;
            for m in lo..=hi {
                let w = taps[(m - k + radius) as usize];
                acc += w * values[m as usize];
                mass += w;
            }
            acc / mass
        })
        .collect()
}

/// Iterated gap filling: `g_0 = max{g, g*φ_0}`, `g_i = max{g, g_{i-1}*φ_i}`.
pub fn fill_gain(g: &FrameSeries, fam: &SmoothingFamily) -> Result<FrameSeries> {
    let original = g.values();
    let mut current = original.to_vec();
    for i in 0..=fam.n() {
        let smoothed = smooth(&current, &gaussian_kernel(fam.width(i)));
        current = original
            .iter()
            .zip(smoothed)
            .map(|(&o, s)| o.max(s))
            .collect();
    }
    g.like(current)
}

/// Parameters of the f0 gap filler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F0Fill {
    pub recursion: SmoothingFamily,
    pub final_pass: SmoothingFamily,
    /// Value returned for utterances without any voiced frame.
    pub fallback: f64,
}

/// The f0 recursion alone: voiced frames keep their value, unvoiced frames
/// take `max{s, s_{i-1}*φ_i}`. Unvoiced input values are treated as zero.
///
/// Returns `None` when no frame is voiced.
pub fn fill_f0_recursion(
    s: &FrameSeries,
    voicing: &VoicingMask,
    fam: &SmoothingFamily,
) -> Result<Option<FrameSeries>> {
    if voicing.len() != s.len() {
        return Err(Error::invalid(format!(
            "voicing mask has {} frames, f0 has {}",
            voicing.len(),
            s.len()
        )));
    }
    if voicing.voiced_count() == 0 {
        return Ok(None);
    }
    let flags = voicing.flags();
    let base: Vec<f64> = s
        .values()
        .iter()
        .zip(flags)
        .map(|(&v, &voiced)| if voiced { v } else { 0.0 })
        .collect();
    let mut current = base.clone();
    if flags.iter().all(|&v| v) {
        return s.like(current).map(Some);
    }
    for i in 0..=fam.n() {
        let smoothed = smooth(&current, &gaussian_kernel(fam.width(i)));
        current = base
            .iter()
            .zip(smoothed)
            .zip(flags)
            .map(|((&b, sm), &voiced)| if voiced { b } else { b.max(sm) })
            .collect();
    }
    s.like(current).map(Some)
}

/// Gap-filled f0 followed by a final gain-style smoothing pass.
pub fn fill_f0(s: &FrameSeries, voicing: &VoicingMask, params: &F0Fill) -> Result<FrameSeries> {
    match fill_f0_recursion(s, voicing, &params.recursion)? {
        Some(filled) => fill_gain(&filled, &params.final_pass),
        None => {
            warn!("no voiced frames; f0 replaced by constant {}", params.fallback);
            s.like(vec![params.fallback; s.len()])
        }
    }
}

/// Natural cubic spline through strictly increasing knots.
#[derive(Debug, Clone)]
pub struct NaturalSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    second: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::invalid("a spline needs at least two knots"));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("spline knots must be strictly increasing"));
        }
        let mut second = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior second derivatives
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            let mut upper = vec![0.0; m];
            for i in 0..m {
                let h0 = xs[i + 1] - xs[i];
                let h1 = xs[i + 2] - xs[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h1 - (ys[i + 1] - ys[i]) / h0);
            }
            for i in 1..m {
                let lower = xs[i + 1] - xs[i];
                let f = lower / diag[i - 1];
                diag[i] -= f * upper[i - 1];
                rhs[i] -= f * rhs[i - 1];
            }
            second[m] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                second[i + 1] = (rhs[i] - upper[i] * second[i + 2]) / diag[i];
            }
        }
        Ok(NaturalSpline { xs, ys, second })
    }

    fn segment(&self, x: f64) -> usize {
        match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            p => (p - 1).min(self.xs.len() - 2),
        }
    }

    /// Spline value; constant beyond the first and last knot.
    pub fn eval(&self, x: f64) -> f64 {
        let last = self.xs.len() - 1;
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[last] {
            return self.ys[last];
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h
                / 6.0
    }

    /// First derivative; zero outside the knot range.
    pub fn derivative(&self, x: f64) -> f64 {
        let last = self.xs.len() - 1;
        if x <= self.xs[0] || x >= self.xs[last] {
            return 0.0;
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        (self.ys[i + 1] - self.ys[i]) / h
            + ((1.0 - 3.0 * a * a) * self.second[i] + (3.0 * b * b - 1.0) * self.second[i + 1])
                * h
                / 6.0
    }
}

enum DurationCurve {
    Constant(f64),
    Spline(NaturalSpline),
}

impl DurationCurve {
    fn eval(&self, t: f64) -> f64 {
        match self {
            DurationCurve::Constant(v) => *v,
            DurationCurve::Spline(s) => s.eval(t),
        }
    }
}

/// Duration signal sampled on an arbitrary frame grid.
///
/// Knots sit at word midpoints with the word duration as value. Inside
/// pause and breath spans between words the curve holds the value it has at
/// the nearer edge of the span.
pub fn duration_on_grid(
    words: &WordAlignment,
    start_time: f64,
    frame_shift: f64,
    len: usize,
) -> Result<FrameSeries> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = words.words().map(|w| (w.midpoint(), w.duration())).unzip();
    let curve = match xs.len() {
        0 => return Err(Error::invalid("duration signal needs at least one word")),
        1 => DurationCurve::Constant(ys[0]),
        _ => DurationCurve::Spline(NaturalSpline::new(xs, ys)?),
    };
    let first = words.first_word_start();
    let last = words.last_word_end();
    let gaps: Vec<(f64, f64)> = words
        .entries()
        .iter()
        .filter(|e| !e.is_word() && e.start >= first && e.end <= last)
        .map(|e| (e.start, e.end))
        .collect();
    let values = (0..len)
        .map(|k| {
            let t = start_time + k as f64 * frame_shift;
            let held = gaps
                .iter()
                .find(|(s, e)| t > *s && t < *e)
                .map(|&(s, e)| if t - s <= e - t { s } else { e });
            curve.eval(held.unwrap_or(t))
        })
        .collect();
    FrameSeries::with_start(values, frame_shift, start_time)
}

/// Duration signal on the frames spanning the first word start to the last
/// word end.
pub fn duration_signal(words: &WordAlignment, frame_shift: f64) -> Result<FrameSeries> {
    let first = words.first_word_start();
    let span = words.last_word_end() - first;
    let len = ((span / frame_shift).round() as usize).max(1);
    duration_on_grid(words, first, frame_shift, len)
}

/// Central differences per second, one-sided at the ends.
pub fn duration_derivative(d: &FrameSeries) -> Result<FrameSeries> {
    let v = d.values();
    let n = v.len();
    if n < 3 {
        return Err(Error::invalid("derivative needs at least three frames"));
    }
    let h = d.frame_shift();
    let mut out = Vec::with_capacity(n);
    out.push((v[1] - v[0]) / h);
    for k in 1..n - 1 {
        out.push((v[k + 1] - v[k - 1]) / (2.0 * h));
    }
    out.push((v[n - 1] - v[n - 2]) / h);
    d.like(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{Segment, SegmentKind};

    fn series(v: Vec<f64>) -> FrameSeries {
        FrameSeries::new(v, 0.005).unwrap()
    }

    fn word(start: f64, end: f64) -> Segment {
        Segment {
            label: "w".into(),
            start,
            end,
            kind: SegmentKind::Word,
        }
    }

    fn pause(start: f64, end: f64) -> Segment {
        Segment {
            label: "<sil>".into(),
            start,
            end,
            kind: SegmentKind::Pause,
        }
    }

    fn default_gain_family() -> SmoothingFamily {
        SmoothingFamily::from_seconds(0.100, 1.0, 100, 0.005).unwrap()
    }

    #[test]
    fn family_widths_run_from_max_to_min() {
        let fam = default_gain_family();
        assert!((fam.width(0) - 20.0).abs() < 1e-9);
        assert!((fam.width(100) - 1.0).abs() < 1e-12);
        assert!((fam.lambda(100) - 1.0).abs() < 1e-12);
        for i in 0..100 {
            assert!(fam.width(i) > fam.width(i + 1));
        }
    }

    #[test]
    fn gaussian_kernel_has_unit_mass() {
        for sigma in [1.0, 2.5, 20.0] {
            let k = gaussian_kernel(sigma);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(k.len() % 2, 1);
        }
    }

    #[test]
    fn fill_gain_leaves_constants_alone() {
        let g = series(vec![-3.0; 200]);
        let out = fill_gain(&g, &default_gain_family()).unwrap();
        for v in out.values() {
            assert!((v + 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fill_gain_impulse_bounds() {
        let mut v = vec![-10.0; 201];
        v[100] = 5.0;
        let g = series(v.clone());
        let out = fill_gain(&g, &default_gain_family()).unwrap();
        assert_eq!(out.values()[100], 5.0);
        for (o, i) in out.values().iter().zip(&v) {
            assert!(o >= i);
            assert!(*o <= 5.0);
        }
    }

    #[test]
    fn fill_gain_raises_silent_gap() {
        // 300 ms plateau, 200 ms gap, 300 ms plateau
        let mut v = vec![4.0; 60];
        v.extend(vec![-5.0; 40]);
        v.extend(vec![3.0; 60]);
        let out = fill_gain(&series(v.clone()), &default_gain_family()).unwrap();
        for k in 60..100 {
            assert!(out.values()[k] > -5.0, "frame {k} stayed at the floor");
            assert!(out.values()[k] <= 4.0);
        }
        for (o, i) in out.values().iter().zip(&v) {
            assert!(o >= i && *o <= 4.0);
        }
    }

    fn f0_params() -> F0Fill {
        F0Fill {
            recursion: SmoothingFamily::from_seconds(0.100, 1.0, 200, 0.005).unwrap(),
            final_pass: SmoothingFamily::from_seconds(0.025, 1.0, 50, 0.005).unwrap(),
            fallback: 1.0,
        }
    }

    #[test]
    fn all_voiced_passes_recursion_unchanged() {
        let v: Vec<f64> = (0..150).map(|k| 100.0 + (k as f64 * 0.1).sin() * 20.0).collect();
        let s = series(v.clone());
        let mask = VoicingMask::all_voiced(150);
        let rec = fill_f0_recursion(&s, &mask, &f0_params().recursion).unwrap().unwrap();
        assert_eq!(rec.values(), v.as_slice());
        let full = fill_f0(&s, &mask, &f0_params()).unwrap();
        let smoothed = fill_gain(&s, &f0_params().final_pass).unwrap();
        assert_eq!(full.values(), smoothed.values());
    }

    #[test]
    fn gap_between_equal_plateaus() {
        let mut v = vec![120.0; 60];
        v.extend(vec![0.0; 30]);
        v.extend(vec![120.0; 60]);
        let mask = VoicingMask::from_f0(&series(v.clone()));
        let rec = fill_f0_recursion(&series(v.clone()), &mask, &f0_params().recursion)
            .unwrap()
            .unwrap();
        for k in 0..150 {
            let x = rec.values()[k];
            if mask.flags()[k] {
                assert_eq!(x, v[k]);
            } else {
                assert!(x > 0.0 && x <= 120.0, "frame {k}: {x}");
            }
        }
    }

    #[test]
    fn unvoiced_tail_never_exceeds_plateau() {
        let mut v = vec![200.0; 80];
        v.extend(vec![0.0; 60]);
        let s = series(v);
        let mask = VoicingMask::from_f0(&s);
        let out = fill_f0(&s, &mask, &f0_params()).unwrap();
        assert!(out.values().iter().all(|&x| x <= 200.0 + 1e-9));
        assert!(out.values()[85] > 0.0);
    }

    #[test]
    fn all_unvoiced_falls_back_to_constant() {
        let s = series(vec![0.0; 50]);
        let out = fill_f0(&s, &VoicingMask::new(vec![false; 50]), &f0_params()).unwrap();
        assert!(out.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn spline_through_equal_knots_is_constant() {
        let words = WordAlignment::new(vec![word(0.0, 1.0), word(1.0, 2.0)]).unwrap();
        let d = duration_signal(&words, 0.005).unwrap();
        assert_eq!(d.len(), 400);
        assert!(d.values().iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn single_word_duration_is_constant() {
        let words = WordAlignment::new(vec![word(0.3, 0.7)]).unwrap();
        let d = duration_signal(&words, 0.005).unwrap();
        assert_eq!(d.len(), 80);
        assert!(d.values().iter().all(|&v| (v - 0.4).abs() < 1e-12));
    }

    #[test]
    fn spline_peak_of_short_long_short() {
        let words = WordAlignment::new(vec![word(0.0, 0.2), word(0.2, 0.8), word(0.8, 1.0)]).unwrap();
        let d = duration_signal(&words, 0.005).unwrap();
        let max = d.max();
        assert!((0.6 - 1e-9..=0.75).contains(&max), "{max}");
        // knots at 0.1, 0.5, 0.9 are reproduced exactly
        for (t, want) in [(0.1, 0.2), (0.5, 0.6), (0.9, 0.2)] {
            assert!((d.values()[d.frame_at(t)] - want).abs() < 1e-9);
        }
    }

    #[test]
    fn spline_matches_hand_solved_coefficients() {
        // knots (0,0),(1,1),(2,0): natural spline has M_1 = -3, so
        // s(0.5) = 0.5 + (0.125 - 0.5)·(-3)/6 = 0.6875
        let s = NaturalSpline::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert!((s.eval(0.5) - 0.6875).abs() < 1e-12);
        assert!((s.eval(1.5) - 0.6875).abs() < 1e-12);
        assert!(s.derivative(1.0).abs() < 1e-12);
        assert!((s.derivative(0.0 + 1e-12) - 1.5).abs() < 1e-6);
    }

    #[test]
    fn pause_holds_edge_values() {
        let words = WordAlignment::new(vec![
            word(0.0, 0.3),
            pause(0.3, 0.7),
            word(0.7, 0.9),
            word(0.9, 1.5),
        ])
        .unwrap();
        let d = duration_signal(&words, 0.005).unwrap();
        let left = d.values()[d.frame_at(0.3)];
        let right = d.values()[d.frame_at(0.7)];
        for k in d.frame_at(0.31)..d.frame_at(0.49) {
            assert!((d.values()[k] - left).abs() < 1e-12);
        }
        for k in d.frame_at(0.51)..d.frame_at(0.69) {
            assert!((d.values()[k] - right).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_constant_and_ramp() {
        let c = duration_derivative(&series(vec![2.0; 10])).unwrap();
        assert!(c.values().iter().all(|&v| v == 0.0));
        let ramp = series((0..50).map(|k| 2.0 * k as f64 * 0.005).collect());
        let d = duration_derivative(&ramp).unwrap();
        for v in &d.values()[1..49] {
            assert!((v - 2.0).abs() < 1e-6);
        }
        assert!(duration_derivative(&series(vec![1.0, 2.0])).is_err());
    }

    #[test]
    fn derivative_zero_crossing_at_spline_maximum() {
        let words = WordAlignment::new(vec![word(0.0, 0.2), word(0.2, 0.8), word(0.8, 1.0)]).unwrap();
        let d = duration_signal(&words, 0.005).unwrap();
        let dd = duration_derivative(&d).unwrap();
        let spline = NaturalSpline::new(vec![0.1, 0.5, 0.9], vec![0.2, 0.6, 0.2]).unwrap();
        // analytic derivative vanishes at 0.5 and changes sign there
        assert!(spline.derivative(0.5).abs() < 1e-12);
        let k = d.frame_at(0.5);
        assert!(dd.values()[k - 2] > 0.0 && dd.values()[k + 2] < 0.0);
        assert!(dd.values()[k].abs() < 1e-6);
        for k in 30..170 {
            let t = d.time_at(k);
            assert!((dd.values()[k] - spline.derivative(t)).abs() < 0.01, "t={t}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn gain_bounds(v in prop::collection::vec(-20f64..20.0, 2..300)) {
                let g = series(v.clone());
                let fam = SmoothingFamily::from_seconds(0.05, 1.0, 20, 0.005).unwrap();
                let out = fill_gain(&g, &fam).unwrap();
                let max = g.max();
                for (o, i) in out.values().iter().zip(&v) {
                    prop_assert!(o >= i);
                    prop_assert!(*o <= max + 1e-12);
                }
            }

            #[test]
            fn spline_hits_knots(durs in prop::collection::vec(0.05f64..0.8, 2..20)) {
                let mut t = 0.0;
                let mut entries = Vec::new();
                for d in &durs {
                    entries.push(word(t, t + d));
                    t += d;
                }
                let words = WordAlignment::new(entries).unwrap();
                let (xs, ys): (Vec<f64>, Vec<f64>) =
                    words.words().map(|w| (w.midpoint(), w.duration())).unzip();
                let s = NaturalSpline::new(xs.clone(), ys.clone()).unwrap();
                for (x, y) in xs.iter().zip(&ys) {
                    prop_assert!((s.eval(*x) - y).abs() < 1e-9);
                }
            }
        }
    }
}
