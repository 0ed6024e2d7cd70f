//! Unsupervised word prominence and prosodic boundary annotation.
//!
//! Prosodic tracks (f0, energy, word duration) are gap-filled, normalized and
//! summed into a composite signal, decomposed with a Mexican hat continuous
//! wavelet transform, and reduced to lines of maximum and minimum amplitude
//! across scales. The strength of those lines gives every word a continuous
//! prominence and boundary value, which are then binarized against reference
//! labels or by two-class k-means.
//!
//! Module map:
//!
//! * [`signal`]: frame series, alignments, reference labels and file formats
//! * [`extract`]: naive log-energy and autocorrelation f0 from PCM audio
//! * [`preproc`]: gap filling for gain and f0, continuous duration
//! * [`cwt`]: wavelet transform, reconstruction
//! * [`loma`]: lines of maximum/minimum amplitude and their strength
//! * [`annotate`]: scale selection, per-word values, binarization
//! * [`eval`]: metrics, corpus driver and report
//! * [`synth`]: synthetic corpus generator with planted labels

pub mod annotate;
pub mod config;
pub mod cwt;
pub mod error;
pub mod eval;
pub mod extract;
pub mod loma;
pub mod preproc;
pub mod signal;
pub mod synth;

pub use error::{Error, Result};
