//! Lines of maximum amplitude across scales.
//!
//! Local maxima of each scalogram row are chained from the finest scale
//! upward. At every level the maxima are visited in descending order of
//! their cumulative weighted sum; each one claims the nearest unclaimed
//! maximum on the next coarser row, on the side given by the sign of the
//! coefficient change along scale, provided it lies within the linking
//! distance. A maximum can be claimed once, so the result is a set of
//! disjoint paths.
//!
//! Valley lines are the peak lines of the negated scalogram.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use crate::cwt::{ScaleGrid, Scalogram};
use crate::error::{Error, Result};

/// Default maximum time between linked maxima on adjacent scales.
pub const DEFAULT_MAX_DISTANCE: f64 = 0.200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremumPoint {
    pub frame: usize,
    pub time: f64,
    pub scale_index: usize,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Peak,
    Valley,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Peak => "peak",
            Polarity::Valley => "valley",
        }
    }
}

/// A chain of extrema on consecutive scales, finest first.
#[derive(Debug, Clone, PartialEq)]
pub struct LomaLine {
    pub points: Vec<ExtremumPoint>,
    pub strength: f64,
    pub polarity: Polarity,
}

impl LomaLine {
    /// The finest-scale point, used to place the line in time.
    pub fn anchor(&self) -> &ExtremumPoint {
        &self.points[0]
    }

    pub fn top_scale(&self) -> usize {
        self.points.last().map(|p| p.scale_index).unwrap_or(0)
    }
}

/// How the search side for a point's parent is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchDirection {
    /// Right when `W(σ_{j+1}, t) - W(σ_j, t) >= 0`, left otherwise.
    ScaleDifference,
    /// Right when the coarser row rises through `t` (central difference),
    /// left otherwise: the side a hill climb on the coarser row would take.
    Uphill,
}

impl SearchDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            SearchDirection::ScaleDifference => "scale",
            SearchDirection::Uphill => "uphill",
        }
    }
}

impl std::str::FromStr for SearchDirection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scale" => Ok(SearchDirection::ScaleDifference),
            "uphill" => Ok(SearchDirection::Uphill),
            _ => Err(Error::Config(format!("search direction must be scale or uphill, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    /// Seconds.
    pub max_distance: f64,
    /// Search the opposite side when the preferred side has no candidate.
    pub both_sides: bool,
    pub direction: SearchDirection,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            max_distance: DEFAULT_MAX_DISTANCE,
            both_sides: false,
            direction: SearchDirection::ScaleDifference,
        }
    }
}

fn search_right(row: &[f64], next_row: &[f64], frame: usize, direction: SearchDirection) -> bool {
    match direction {
        SearchDirection::ScaleDifference => next_row[frame] - row[frame] >= 0.0,
        SearchDirection::Uphill => {
            let lo = frame.saturating_sub(1);
            let hi = (frame + 1).min(next_row.len() - 1);
            next_row[hi] - next_row[lo] >= 0.0
        }
    }
}

/// Weight of scale index `k` in the cumulative sum: 1 for the finest scale,
/// `ln(k+1) · ratio^(-k/2)` above it.
pub fn scale_weight(k: usize, ratio: f64) -> f64 {
    if k == 0 {
        1.0
    } else {
        ((k + 1) as f64).ln() * ratio.powf(-(k as f64) / 2.0)
    }
}

/// Interior frames with `row[k] > row[k-1]` and `row[k] >= row[k+1]`.
fn maxima_frames(row: &[f64]) -> Vec<usize> {
    if row.len() < 3 {
        return Vec::new();
    }
    (1..row.len() - 1)
        .filter(|&k| row[k] > row[k - 1] && row[k] >= row[k + 1])
        .collect()
}

/// Local maxima of a single row (scale index 0, time origin 0).
pub fn local_maxima(row: &[f64], frame_shift: f64) -> Vec<ExtremumPoint> {
    maxima_frames(row)
        .into_iter()
        .map(|k| ExtremumPoint {
            frame: k,
            time: k as f64 * frame_shift,
            scale_index: 0,
            amplitude: row[k],
        })
        .collect()
}

/// Weighted sum of a line's amplitudes.
pub fn line_strength(points: &[ExtremumPoint], grid: &ScaleGrid) -> f64 {
    points
        .iter()
        .map(|p| scale_weight(p.scale_index, grid.ratio()) * p.amplitude)
        .sum()
}

fn by_strength_desc(a: (f64, usize), b: (f64, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Nearest unclaimed candidate on one side of `frame` within `max_frames`.
/// `candidates` holds frames in ascending order.
fn nearest_unclaimed(
    candidates: &[usize],
    claimed: &[bool],
    frame: usize,
    max_frames: usize,
    rightward: bool,
) -> Option<usize> {
    let split = candidates.partition_point(|&c| c < frame);
    if rightward {
        (split..candidates.len())
            .take_while(|&i| candidates[i] - frame <= max_frames)
            .find(|&i| !claimed[i])
    } else {
        // candidates at `frame` itself count on both sides
        let upto = candidates.partition_point(|&c| c <= frame);
        (0..upto)
            .rev()
            .take_while(|&i| frame - candidates[i] <= max_frames)
            .find(|&i| !claimed[i])
    }
}

fn link(sg: &Scalogram, polarity: Polarity, cfg: &LinkConfig) -> Vec<LomaLine> {
    let grid = sg.grid();
    let ratio = grid.ratio();
    let levels: Vec<Vec<usize>> = sg.rows().iter().map(|r| maxima_frames(r)).collect();
    let max_frames = (cfg.max_distance / sg.frame_shift() + 1e-9).floor() as usize;

    // cumulative sums, parent links and claim flags per level
    let mut cum: Vec<Vec<f64>> = levels
        .iter()
        .enumerate()
        .map(|(j, frames)| {
            frames
                .iter()
                .map(|&k| scale_weight(j, ratio) * sg.row(j)[k])
                .collect()
        })
        .collect();
    let mut parent: Vec<Vec<Option<usize>>> = levels.iter().map(|f| vec![None; f.len()]).collect();
    let mut claimed: Vec<Vec<bool>> = levels.iter().map(|f| vec![false; f.len()]).collect();

    for j in 0..levels.len().saturating_sub(1) {
        let mut order: Vec<usize> = (0..levels[j].len()).collect();
        order.sort_by(|&a, &b| by_strength_desc((cum[j][a], levels[j][a]), (cum[j][b], levels[j][b])));
        let (row, next_row) = (sg.row(j), sg.row(j + 1));
        for i in order {
            let frame = levels[j][i];
            let rightward = search_right(row, next_row, frame, cfg.direction);
            let mut found =
                nearest_unclaimed(&levels[j + 1], &claimed[j + 1], frame, max_frames, rightward);
            if found.is_none() && cfg.both_sides {
                found =
                    nearest_unclaimed(&levels[j + 1], &claimed[j + 1], frame, max_frames, !rightward);
            }
            if let Some(p) = found {
                claimed[j + 1][p] = true;
                parent[j][i] = Some(p);
                cum[j + 1][p] += cum[j][i];
            }
        }
    }

    let mut lines = Vec::new();
    for (j0, frames) in levels.iter().enumerate() {
        for i0 in 0..frames.len() {
            if claimed[j0][i0] {
                continue;
            }
            let mut points = Vec::new();
            let (mut j, mut i) = (j0, i0);
            loop {
                let k = levels[j][i];
                points.push(ExtremumPoint {
                    frame: k,
                    time: sg.time_at(k),
                    scale_index: j,
                    amplitude: sg.row(j)[k],
                });
                match parent[j][i] {
                    Some(p) => {
                        j += 1;
                        i = p;
                    }
                    None => break,
                }
            }
            let strength = line_strength(&points, grid);
            lines.push(LomaLine {
                points,
                strength,
                polarity,
            });
        }
    }
    lines.sort_by(|a, b| {
        a.anchor()
            .frame
            .cmp(&b.anchor().frame)
            .then(a.anchor().scale_index.cmp(&b.anchor().scale_index))
    });
    lines
}

/// Peak lines (LoMA) of a scalogram.
pub fn link_lines(sg: &Scalogram, cfg: &LinkConfig) -> Result<Vec<LomaLine>> {
    if sg.grid().len() < 2 {
        return Err(Error::invalid("line linking needs at least two scales"));
    }
    Ok(link(sg, Polarity::Peak, cfg))
}

/// Valley lines (LomA): peak lines of the negated scalogram. Amplitudes and
/// strengths are those of the negated coefficients, so deep valleys are
/// strong lines.
pub fn minima_lines(sg: &Scalogram, cfg: &LinkConfig) -> Result<Vec<LomaLine>> {
    if sg.grid().len() < 2 {
        return Err(Error::invalid("line linking needs at least two scales"));
    }
    Ok(link(&sg.negated(), Polarity::Valley, cfg))
}

/// Tab-separated line dump: `line_id polarity strength k time amplitude`,
/// one row per point.
pub fn format_lines(lines: &[LomaLine]) -> String {
    let mut out = String::from("line_id\tpolarity\tstrength\tk\ttime\tamplitude\n");
    for (id, line) in lines.iter().enumerate() {
        for p in &line.points {
            writeln!(
                out,
                "{id}\t{}\t{:.6}\t{}\t{:.6}\t{:.6}",
                line.polarity.as_str(),
                line.strength,
                p.scale_index,
                p.time,
                p.amplitude
            )
            .expect("string write");
        }
    }
    out
}

pub fn write_lines(path: &Path, lines: &[LomaLine]) -> Result<()> {
    std::fs::write(path, format_lines(lines)).map_err(|e| Error::io(path, e))
}
