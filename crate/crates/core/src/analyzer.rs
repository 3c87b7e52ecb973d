//! Drag statistics over a finished trace log.
//!
//! Drag is the time an object stays in the heap after its last use:
//! `collect_tick - last_use_tick`, or `collect_tick - create_tick` for an
//! object that was never used. Censored records (still reachable when the run
//! ended) are stamped with the end tick and counted like any other.

use std::fmt::{self, Write as _};

use crate::heap::ObjId;
use crate::profiler::{LifetimeRecord, Tick, TraceLog};

pub const HISTOGRAM_BINS: usize = 20;
pub const BIN_WIDTH_PCT: f64 = 100.0 / HISTOGRAM_BINS as f64;

/// Target number of curve samples when no interval is given.
pub const DEFAULT_SAMPLE_POINTS: u64 = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DragRecord {
    pub id: ObjId,
    pub drag_ticks: Tick,
    /// Drag relative to the length of the run.
    pub drag_pct: f64,
    pub censored: bool,
}

pub fn drag(record: &LifetimeRecord, end_tick: Tick) -> DragRecord {
    let from = record.last_use_tick.unwrap_or(record.create_tick);
    let drag_ticks = record.collect_tick.saturating_sub(from);
    DragRecord {
        id: record.id,
        drag_ticks,
        drag_pct: pct(drag_ticks as f64, end_tick as f64),
        censored: record.censored,
    }
}

pub fn drags(log: &TraceLog) -> Vec<DragRecord> {
    log.records.iter().map(|r| drag(r, log.end_tick)).collect()
}

/// `part / whole × 100`, or 0 for an empty whole.
pub fn pct(part: f64, whole: f64) -> f64 {
    if whole > 0.0 {
        part / whole * 100.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CurvePoint {
    pub tick: Tick,
    pub reachable: u64,
    pub live: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurveSeries {
    pub sample_interval: Tick,
    pub points: Vec<CurvePoint>,
}

pub fn default_sample_interval(end_tick: Tick) -> Tick {
    (end_tick / DEFAULT_SAMPLE_POINTS).max(1)
}

/// Number of sorted values `<= t`.
fn count_le(sorted: &[Tick], t: Tick) -> u64 {
    sorted.partition_point(|&v| v <= t) as u64
}

/// Samples reachable and live counts at `t = 0, s, 2s, … ≤ end_tick`.
///
/// An object is reachable from its creation until the tick it is collected
/// (a censored one through `end_tick`), and live from creation through its
/// last use. Objects never used are never live.
pub fn curves(log: &TraceLog, sample_interval: Tick) -> CurveSeries {
    let s = sample_interval.max(1);
    let end = log.end_tick;
    let mut born = Vec::with_capacity(log.records.len());
    // First tick at which the object no longer counts.
    let mut gone = Vec::with_capacity(log.records.len());
    let mut live_born = Vec::new();
    let mut live_gone = Vec::new();
    for r in &log.records {
        let reach_end = if r.censored { end + 1 } else { r.collect_tick };
        born.push(r.create_tick);
        gone.push(reach_end);
        if let Some(last) = r.last_use_tick {
            live_born.push(r.create_tick);
            live_gone.push((last + 1).min(reach_end));
        }
    }
    for v in [&mut born, &mut gone, &mut live_born, &mut live_gone] {
        v.sort_unstable();
    }
    let points = (0..=end / s)
        .map(|i| {
            let t = i * s;
            CurvePoint {
                tick: t,
                reachable: count_le(&born, t) - count_le(&gone, t),
                live: count_le(&live_born, t) - count_le(&live_gone, t),
            }
        })
        .collect();
    CurveSeries {
        sample_interval: s,
        points,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTime {
    /// Area under the reachable curve, in object·ticks.
    pub reachable: u64,
    /// Area under the live curve.
    pub live: u64,
    pub savings_pct: f64,
}

pub fn savings_pct(reachable: u64, live: u64) -> f64 {
    pct(reachable.saturating_sub(live) as f64, reachable as f64)
}

/// Left Riemann sums of both curves.
pub fn space_time(series: &CurveSeries) -> SpaceTime {
    let s = series.sample_interval;
    let reachable = series.points.iter().map(|p| p.reachable * s).sum();
    let live = series.points.iter().map(|p| p.live * s).sum();
    SpaceTime {
        reachable,
        live,
        savings_pct: savings_pct(reachable, live),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DragSummary {
    pub max_drag: Tick,
    pub max_pct: f64,
    pub avg_drag: f64,
    pub avg_pct: f64,
}

pub fn drag_summary(drags: &[DragRecord], end_tick: Tick) -> DragSummary {
    if drags.is_empty() {
        return DragSummary::default();
    }
    let max_drag = drags.iter().map(|d| d.drag_ticks).max().unwrap_or(0);
    let avg_drag = drags.iter().map(|d| d.drag_ticks as f64).sum::<f64>() / drags.len() as f64;
    DragSummary {
        max_drag,
        max_pct: pct(max_drag as f64, end_tick as f64),
        avg_drag,
        avg_pct: pct(avg_drag, end_tick as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeadObjects {
    pub allocated: usize,
    pub dead_count: usize,
    pub dead_pct: f64,
}

/// An object is dead when its drag exceeds `threshold` ticks.
pub fn dead_objects(drags: &[DragRecord], threshold: Tick) -> DeadObjects {
    let dead_count = drags.iter().filter(|d| d.drag_ticks > threshold).count();
    DeadObjects {
        allocated: drags.len(),
        dead_count,
        dead_pct: pct(dead_count as f64, drags.len() as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Histogram(pub [u64; HISTOGRAM_BINS]);

impl Histogram {
    pub fn bin_of(drag_pct: f64) -> usize {
        ((drag_pct / BIN_WIDTH_PCT).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    /// `(bin_lo, bin_hi, count)` rows in percent of runtime.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        self.0
            .iter()
            .enumerate()
            .map(|(b, &c)| (b as f64 * BIN_WIDTH_PCT, (b + 1) as f64 * BIN_WIDTH_PCT, c))
    }
}

/// Drag distribution in 5% bins of runtime; 100% falls in the last bin.
pub fn histogram<'a>(drags: impl IntoIterator<Item = &'a DragRecord>) -> Histogram {
    let mut h = Histogram::default();
    for d in drags {
        h.0[Histogram::bin_of(d.drag_pct)] += 1;
    }
    h
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AnalyzeOptions {
    /// Curve sampling step; defaults to [`default_sample_interval`].
    pub sample_interval: Option<Tick>,
    /// Drag above which an object counts as dead; defaults to the log's
    /// collection interval.
    pub dead_threshold: Option<Tick>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DragReport {
    pub source: String,
    pub gc_interval: u64,
    pub end_tick: Tick,
    pub allocated: usize,
    pub censored: usize,
    pub dead_threshold: Tick,
    pub dead_count: usize,
    pub dead_pct: f64,
    pub max_drag: Tick,
    pub max_drag_pct: f64,
    pub avg_drag: f64,
    pub avg_drag_pct: f64,
    pub sample_interval: Tick,
    pub reachable_integral: u64,
    pub live_integral: u64,
    pub savings_pct: f64,
    /// Drag distribution of dead objects only.
    pub histogram: Histogram,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: DragReport,
    pub curves: CurveSeries,
    pub drags: Vec<DragRecord>,
}

pub fn analyze(log: &TraceLog, options: AnalyzeOptions) -> Analysis {
    let drags = drags(log);
    let sample_interval = options
        .sample_interval
        .unwrap_or_else(|| default_sample_interval(log.end_tick))
        .max(1);
    let dead_threshold = options.dead_threshold.unwrap_or(log.header.gc_interval);
    let curves = curves(log, sample_interval);
    let st = space_time(&curves);
    let summary = drag_summary(&drags, log.end_tick);
    let dead = dead_objects(&drags, dead_threshold);
    let report = DragReport {
        source: log.header.source.clone(),
        gc_interval: log.header.gc_interval,
        end_tick: log.end_tick,
        allocated: dead.allocated,
        censored: log.censored_count(),
        dead_threshold,
        dead_count: dead.dead_count,
        dead_pct: dead.dead_pct,
        max_drag: summary.max_drag,
        max_drag_pct: summary.max_pct,
        avg_drag: summary.avg_drag,
        avg_drag_pct: summary.avg_pct,
        sample_interval,
        reachable_integral: st.reachable,
        live_integral: st.live,
        savings_pct: st.savings_pct,
        histogram: histogram(drags.iter().filter(|d| d.drag_ticks > dead_threshold)),
    };
    Analysis {
        report,
        curves,
        drags,
    }
}

impl DragReport {
    /// Column names of the single-row CSV form.
    pub const CSV_HEADER: [&'static str; 16] = [
        "source",
        "gc_interval",
        "end_tick",
        "allocated",
        "censored",
        "dead_threshold",
        "dead_count",
        "dead_pct",
        "max_drag",
        "max_drag_pct",
        "avg_drag",
        "avg_drag_pct",
        "sample_interval",
        "reachable_integral",
        "live_integral",
        "savings_pct",
    ];

    pub fn csv_row(&self) -> [String; 16] {
        [
            self.source.clone(),
            self.gc_interval.to_string(),
            self.end_tick.to_string(),
            self.allocated.to_string(),
            self.censored.to_string(),
            self.dead_threshold.to_string(),
            self.dead_count.to_string(),
            format!("{:.2}", self.dead_pct),
            self.max_drag.to_string(),
            format!("{:.2}", self.max_drag_pct),
            format!("{:.2}", self.avg_drag),
            format!("{:.2}", self.avg_drag_pct),
            self.sample_interval.to_string(),
            self.reachable_integral.to_string(),
            self.live_integral.to_string(),
            format!("{:.2}", self.savings_pct),
        ]
    }
}

/// Text report with the space-time and drag tables, one row per program.
impl fmt::Display for DragReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = &self.source;
        let w = name.len().max(9);
        writeln!(f, "Space-time product (object x ticks)")?;
        writeln!(
            f,
            "{:<w$} | {:>18} | {:>18} | {:>9}",
            "Program", "Reachable Integral", "Live Integral", "Savings %"
        )?;
        writeln!(
            f,
            "{:<w$} | {:>18} | {:>18} | {:>9.2}",
            name, self.reachable_integral, self.live_integral, self.savings_pct
        )?;
        writeln!(f)?;
        writeln!(f, "Drag statistics (ticks; percent of runtime in parentheses)")?;
        writeln!(
            f,
            "{:<w$} | {:>10} | {:>18} | {:>20}",
            "Program", "Runtime", "Maximum Drag", "Average Drag"
        )?;
        writeln!(
            f,
            "{:<w$} | {:>10} | {:>18} | {:>20}",
            name,
            self.end_tick,
            format!("{} ({:.2})", self.max_drag, self.max_drag_pct),
            format!("{:.2} ({:.2})", self.avg_drag, self.avg_drag_pct),
        )?;
        writeln!(f)?;
        writeln!(
            f,
            "Allocated {} objects, {} dead ({:.2}%) with drag > {} ticks, {} censored at exit",
            self.allocated, self.dead_count, self.dead_pct, self.dead_threshold, self.censored
        )?;
        writeln!(f)?;
        writeln!(f, "Dead objects by drag (% of runtime)")?;
        let mut line = String::new();
        for (lo, hi, count) in self.histogram.rows() {
            line.clear();
            write!(line, "{lo:>5.1}-{hi:<5.1} {count:>8}").unwrap();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}
