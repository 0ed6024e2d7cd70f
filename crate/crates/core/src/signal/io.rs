//! Plain-text readers and writers.
//!
//! All formats are UTF-8, LF-terminated, one record per line. Blank lines
//! and lines starting with `#` are ignored by the readers.
//!
//! | file        | columns                                                            |
//! |-------------|--------------------------------------------------------------------|
//! | track       | `value` or `time<TAB>value`                                        |
//! | alignment   | `start<TAB>end<TAB>label<TAB>kind` (`kind` = word, pause, breath)  |
//! | references  | `word_index<TAB>prominent<TAB>boundary_after` (0/1)                |
//! | annotation  | `word_index<TAB>label<TAB>prominence<TAB>boundary<TAB>prom_binary<TAB>bound_binary` |

use std::fmt::Write as _;
use std::path::Path;

use super::{FrameSeries, ReferenceLabels, Segment, SegmentKind, WordAlignment, WordReference};
use crate::annotate::WordProsody;
use crate::error::{Error, Result};

/// Column layout of a track file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrackFormat {
    /// Decide from the first data line.
    #[default]
    Auto,
    /// One value per line on a fixed frame grid.
    Values,
    /// `time value` pairs; the frame shift is taken from the time column.
    TimeValue,
}

/// Header written at the top of annotation files.
pub const PROSODY_HEADER: &str =
    "word_index\tlabel\tprominence\tboundary\tprom_binary\tbound_binary";

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains('\t') {
        line.split('\t').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_finite(path: &Path, line: usize, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_error(path, line, format!("cannot parse {what} {field:?}")))?;
    if !v.is_finite() {
        return Err(parse_error(path, line, format!("non-finite {what} {field:?}")));
    }
    Ok(v)
}

fn parse_flag(path: &Path, line: usize, field: &str, what: &str) -> Result<bool> {
    match field {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(parse_error(
            path,
            line,
            format!("{what} must be 0 or 1, got {other:?}"),
        )),
    }
}

/// Parses track text. `frame_shift` is used for single-column files and for
/// two-column files holding a single frame.
pub fn parse_track(
    text: &str,
    path: &Path,
    format: TrackFormat,
    frame_shift: f64,
) -> Result<FrameSeries> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut format = format;
    for (ln, line) in data_lines(text) {
        let fields = split_fields(line);
        if format == TrackFormat::Auto {
            format = match fields.len() {
                1 => TrackFormat::Values,
                2 => TrackFormat::TimeValue,
                n => return Err(parse_error(path, ln, format!("expected 1 or 2 columns, got {n}"))),
            };
        }
        match (format, fields.as_slice()) {
            (TrackFormat::Values, [v]) => values.push(parse_finite(path, ln, v, "value")?),
            (TrackFormat::TimeValue, [t, v]) => {
                times.push((ln, parse_finite(path, ln, t, "time")?));
                values.push(parse_finite(path, ln, v, "value")?);
            }
            (_, f) => {
                return Err(parse_error(
                    path,
                    ln,
                    format!("unexpected column count {}", f.len()),
                ))
            }
        }
    }
    if values.is_empty() {
        return Err(parse_error(path, 0, "track file has no data"));
    }
    if format != TrackFormat::TimeValue {
        return FrameSeries::new(values, frame_shift);
    }
    let start = times[0].1;
    let shift = if times.len() > 1 {
        times[1].1 - times[0].1
    } else {
        frame_shift
    };
    if shift <= 0.0 {
        return Err(parse_error(path, times[1].0, "time column must increase"));
    }
    for (k, &(ln, t)) in times.iter().enumerate() {
        let expected = start + k as f64 * shift;
        if (t - expected).abs() > 0.01 * shift {
            return Err(parse_error(
                path,
                ln,
                format!("time {t} is off the uniform grid (expected {expected:.6})"),
            ));
        }
    }
    FrameSeries::with_start(values, shift, start)
}

pub fn read_track(path: &Path, format: TrackFormat, frame_shift: f64) -> Result<FrameSeries> {
    parse_track(&read_to_string(path)?, path, format, frame_shift)
}

/// Writes one value per line with full round-trip precision.
pub fn write_track(path: &Path, series: &FrameSeries) -> Result<()> {
    let mut out = String::with_capacity(series.len() * 12);
    for v in series.values() {
        writeln!(out, "{v}").expect("string write");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn parse_alignment(text: &str, path: &Path) -> Result<WordAlignment> {
    let mut entries = Vec::new();
    for (ln, line) in data_lines(text) {
        let fields = split_fields(line);
        if entries.is_empty() && fields.first().is_some_and(|f| f.starts_with("start")) {
            continue;
        }
        let (start, end, label, kind) = match fields.as_slice() {
            [s, e, l] => (*s, *e, *l, SegmentKind::Word),
            [s, e, l, k] => (
                *s,
                *e,
                *l,
                k.parse::<SegmentKind>().map_err(|m| parse_error(path, ln, m))?,
            ),
            f => {
                return Err(parse_error(
                    path,
                    ln,
                    format!("expected 3 or 4 columns, got {}", f.len()),
                ))
            }
        };
        let start = parse_finite(path, ln, start, "start time")?;
        let end = parse_finite(path, ln, end, "end time")?;
        if end <= start {
            return Err(parse_error(path, ln, format!("end {end} is not after start {start}")));
        }
        entries.push(Segment {
            label: label.to_string(),
            start,
            end,
            kind,
        });
    }
    WordAlignment::new(entries)
}

pub fn read_alignment(path: &Path) -> Result<WordAlignment> {
    parse_alignment(&read_to_string(path)?, path)
}

pub fn write_alignment(path: &Path, words: &WordAlignment) -> Result<()> {
    let mut out = String::new();
    for e in words.entries() {
        writeln!(out, "{:.6}\t{:.6}\t{}\t{}", e.start, e.end, e.label, e.kind.as_str())
            .expect("string write");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn parse_refs(text: &str, path: &Path) -> Result<ReferenceLabels> {
    let mut rows: Vec<(usize, usize, WordReference)> = Vec::new();
    for (ln, line) in data_lines(text) {
        let fields = split_fields(line);
        if rows.is_empty() && fields.first() == Some(&"word_index") {
            continue;
        }
        let [idx, prom, bound] = fields.as_slice() else {
            return Err(parse_error(
                path,
                ln,
                format!("expected 3 columns, got {}", fields.len()),
            ));
        };
        let idx: usize = idx
            .parse()
            .map_err(|_| parse_error(path, ln, format!("bad word index {idx:?}")))?;
        rows.push((
            ln,
            idx,
            WordReference {
                prominent: parse_flag(path, ln, prom, "prominent")?,
                boundary_after: parse_flag(path, ln, bound, "boundary_after")?,
            },
        ));
    }
    rows.sort_by_key(|r| r.1);
    for (k, (ln, idx, _)) in rows.iter().enumerate() {
        if *idx != k {
            return Err(parse_error(
                path,
                *ln,
                format!("word indices must run 0..n without gaps; found {idx} at position {k}"),
            ));
        }
    }
    Ok(ReferenceLabels(rows.into_iter().map(|r| r.2).collect()))
}

pub fn read_refs(path: &Path) -> Result<ReferenceLabels> {
    parse_refs(&read_to_string(path)?, path)
}

pub fn format_refs(refs: &ReferenceLabels) -> String {
    let mut out = String::from("word_index\tprominent\tboundary_after\n");
    for (i, r) in refs.0.iter().enumerate() {
        writeln!(out, "{i}\t{}\t{}", r.prominent as u8, r.boundary_after as u8)
            .expect("string write");
    }
    out
}

pub fn write_refs(path: &Path, refs: &ReferenceLabels) -> Result<()> {
    std::fs::write(path, format_refs(refs)).map_err(|e| Error::io(path, e))
}

/// Serializes annotation records with six decimals.
pub fn format_word_prosody(records: &[WordProsody]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(PROSODY_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{}\t{}\t{:.6}\t{:.6}\t{}\t{}",
            r.word_index,
            r.label,
            r.prominence,
            r.boundary,
            r.prom_binary as u8,
            r.bound_binary as u8
        )
        .expect("string write");
    }
    out
}

pub fn write_word_prosody(path: &Path, records: &[WordProsody]) -> Result<()> {
    std::fs::write(path, format_word_prosody(records)).map_err(|e| Error::io(path, e))
}

/// Parses an annotation file. Anchor times are not stored in the file and
/// come back as `None`.
pub fn parse_word_prosody(text: &str, path: &Path) -> Result<Vec<WordProsody>> {
    let mut out = Vec::new();
    for (ln, line) in data_lines(text) {
        if line == PROSODY_HEADER {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [idx, label, prom, bound, pb, bb] = fields.as_slice() else {
            return Err(parse_error(
                path,
                ln,
                format!("expected 6 tab-separated columns, got {}", fields.len()),
            ));
        };
        out.push(WordProsody {
            word_index: idx
                .parse()
                .map_err(|_| parse_error(path, ln, format!("bad word index {idx:?}")))?,
            label: label.to_string(),
            prominence: parse_finite(path, ln, prom, "prominence")?,
            boundary: parse_finite(path, ln, bound, "boundary")?,
            prom_binary: parse_flag(path, ln, pb, "prom_binary")?,
            bound_binary: parse_flag(path, ln, bb, "bound_binary")?,
            prom_anchor: None,
            bound_anchor: None,
        });
    }
    Ok(out)
}

pub fn read_word_prosody(path: &Path) -> Result<Vec<WordProsody>> {
    parse_word_prosody(&read_to_string(path)?, path)
}
