//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dragtrace::analyzer::{
    self, analyze, curves, drag_summary, histogram, savings_pct, space_time, AnalyzeOptions, CurvePoint,
    CurveSeries, DragRecord,
};
use dragtrace::gc::{canonical_form, reachability_oracle, Roots};
use dragtrace::heap::{Heap, ObjId, ObjKind, Value};
use dragtrace::interp::{run, run_observed, EventObserver, InterpConfig};
use dragtrace::profiler::{Tick, TraceLog};
use dragtrace::programs;
use dragtrace::runtime::{Runtime, RuntimeConfig, RuntimeError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Absolute tolerance on published two-decimal percentages.
const PCT_TOLERANCE: f64 = 0.01;
const RANDOM_PROGRAMS: usize = 1000;
const MAX_OBJECTS_PER_PROGRAM: usize = 500;
const WALK_N: u64 = 1000;

type Check = Result<String, String>;

struct Outcome {
    name: &'static str,
    result: Check,
    elapsed: Duration,
    budget: Duration,
}

/// Published (R, L, savings %) rows of the space-time table.
const SPACE_TIME_ROWS: [(&str, u64, u64, f64); 6] = [
    ("silex", 409_442_730, 141_309_450, 65.48),
    ("lalr", 109_380, 58_450, 46.56),
    ("eopl", 373_865_300, 217_799_490, 41.74),
    ("prolog", 175_096_720, 72_172_390, 58.78),
    ("sudoku", 496_456_510, 450_879_850, 9.18),
    ("cipher", 208_383_570, 184_187_520, 11.61),
];

/// Published (runtime, max drag, max %, avg drag, avg %) rows of the drag table.
const DRAG_ROWS: [(&str, u64, u64, f64, f64, f64); 6] = [
    ("silex", 27950, 27110, 96.99, 7928.94, 28.36),
    ("lalr", 480, 250, 52.08, 179.96, 37.49),
    ("eopl", 109_060, 108_620, 99.59, 5403.56, 4.95),
    ("prolog", 39970, 39700, 99.32, 2419.81, 6.05),
    ("sudoku", 82730, 82610, 99.85, 2229.23, 2.69),
    ("cipher", 27250, 13440, 49.32, 630.25, 2.31),
];

fn space_time_rows() -> Check {
    for (name, r, l, published) in SPACE_TIME_ROWS {
        let direct = savings_pct(r, l);
        let series = CurveSeries {
            sample_interval: 1,
            points: vec![CurvePoint {
                tick: 0,
                reachable: r,
                live: l,
            }],
        };
        let st = space_time(&series);
        if (st.reachable, st.live) != (r, l) {
            return Err(format!("{name}: integrals {:?} != ({r}, {l})", (st.reachable, st.live)));
        }
        for got in [direct, st.savings_pct] {
            if (got - published).abs() > PCT_TOLERANCE {
                return Err(format!("{name}: {got:.4} vs published {published}"));
            }
        }
    }
    Ok(format!("6 rows within ±{PCT_TOLERANCE}"))
}

/// 100 drag records whose maximum and mean are the published values.
fn drags_with(max: u64, avg: f64, runtime: u64) -> Vec<DragRecord> {
    let n = 100u64;
    let total = (avg * n as f64).round() as u64;
    let rest = total - max;
    let (base, extra) = (rest / (n - 1), rest % (n - 1));
    (0..n)
        .map(|i| {
            let ticks = if i == 0 { max } else { base + u64::from(i <= extra) };
            DragRecord {
                id: ObjId(i),
                drag_ticks: ticks,
                drag_pct: analyzer::pct(ticks as f64, runtime as f64),
                censored: false,
            }
        })
        .collect()
}

fn drag_rows() -> Check {
    for (name, runtime, max, max_pct, avg, avg_pct) in DRAG_ROWS {
        let drags = drags_with(max, avg, runtime);
        let s = drag_summary(&drags, runtime);
        if s.max_drag != max || (s.avg_drag - avg).abs() > 1e-6 {
            return Err(format!("{name}: fixture gives max {} avg {}", s.max_drag, s.avg_drag));
        }
        if (s.max_pct - max_pct).abs() > PCT_TOLERANCE || (s.avg_pct - avg_pct).abs() > PCT_TOLERANCE {
            return Err(format!(
                "{name}: ({:.4}, {:.4}) vs published ({max_pct}, {avg_pct})",
                s.max_pct, s.avg_pct
            ));
        }
    }
    Ok(format!("6 rows, max and avg within ±{PCT_TOLERANCE}"))
}

/// Runs one random mutation program against the runtime, checking every
/// explicit collection against the oracle. Interval and exhaustion
/// collections are checked by the runtime's own verification.
fn random_program(seed: u64) -> Result<TraceLog, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = [1, 2, 4, 16, 64][rng.gen_range(0..5)];
    let mut rt = Runtime::new(&RuntimeConfig {
        gc_interval: k,
        heap_slots: rng.gen_range(64..1024),
        source: format!("random-{seed}"),
        verify: true,
        record_events: false,
    });
    let mut roots: Vec<Value> = Vec::new();
    let objects = rng.gen_range(1..=MAX_OBJECTS_PER_PROGRAM);
    let mut allocated = 0;
    let pick = |rng: &mut ChaCha8Rng, roots: &[Value]| -> Value {
        if roots.is_empty() || rng.gen_bool(0.3) {
            match rng.gen_range(0..3) {
                0 => Value::Number(rng.gen_range(-50..50)),
                1 => Value::Nil,
                _ => Value::Boolean(rng.gen()),
            }
        } else {
            roots[rng.gen_range(0..roots.len())]
        }
    };
    while allocated < objects {
        let op = rng.gen_range(0..100);
        let result: Result<(), RuntimeError> = (|| {
            match op {
                0..=34 => {
                    let (a, b) = (pick(&mut rng, &roots), pick(&mut rng, &roots));
                    allocated += 1;
                    let r = rt.alloc_pair(a, b, &roots)?;
                    roots.push(Value::Ref(r));
                }
                35..=49 => {
                    let fill = pick(&mut rng, &roots);
                    allocated += 1;
                    let r = rt.alloc_vector(rng.gen_range(0..5), fill, &roots)?;
                    roots.push(Value::Ref(r));
                }
                50..=69 => {
                    let target = pick(&mut rng, &roots);
                    let value = pick(&mut rng, &roots);
                    if let Value::Ref(r) = target {
                        let len = rt.heap().size_slots(r)?;
                        if len > 0 {
                            rt.heap_mut().write_slot(r, rng.gen_range(0..len), value)?;
                        }
                    }
                }
                70..=79 => {
                    if let Value::Ref(r) = pick(&mut rng, &roots) {
                        rt.record_use(r)?;
                    }
                }
                80..=94 => {
                    if !roots.is_empty() {
                        let i = rng.gen_range(0..roots.len());
                        roots.swap_remove(i);
                    }
                }
                _ => {}
            }
            Ok(())
        })();
        match result {
            Ok(()) => {}
            Err(RuntimeError::OutOfMemory { .. }) => roots.truncate(roots.len() / 2),
            Err(e) => return Err(format!("seed {seed}: {e}")),
        }
        if op >= 95 {
            let expected = reachability_oracle(rt.heap(), &roots);
            let before = canonical_form(rt.heap(), &roots).map_err(|e| e.to_string())?;
            rt.collect(&roots).map_err(|e| format!("seed {seed}: {e}"))?;
            let survivors: HashSet<ObjId> = rt.heap().live_ids().iter().copied().collect();
            if survivors != expected {
                return Err(format!(
                    "seed {seed}: {} survivors, oracle says {}",
                    survivors.len(),
                    expected.len()
                ));
            }
            let after = canonical_form(rt.heap(), &roots).map_err(|e| e.to_string())?;
            if before != after {
                return Err(format!("seed {seed}: root serialization changed across collection"));
            }
        }
    }
    rt.finish(&roots).map_err(|e| format!("seed {seed}: {e}"))
}

fn gc_correctness(logs: &mut Vec<TraceLog>) -> Check {
    for seed in 0..RANDOM_PROGRAMS as u64 {
        logs.push(random_program(seed)?);
    }
    let objects: usize = logs.iter().map(|l| l.records.len()).sum();
    Ok(format!("{RANDOM_PROGRAMS} programs, {objects} objects, survivors == oracle, serializations stable"))
}

#[derive(Default)]
struct UnreachableTracker {
    first_unreachable: HashMap<ObjId, Tick>,
    resurrected: usize,
}

impl EventObserver for UnreachableTracker {
    fn before_event(&mut self, heap: &Heap, roots: &dyn Roots, clock: Tick) {
        let reachable = reachability_oracle(heap, roots);
        for &id in heap.live_ids() {
            if reachable.contains(&id) {
                if self.first_unreachable.contains_key(&id) {
                    self.resurrected += 1;
                }
            } else {
                self.first_unreachable.entry(id).or_insert(clock);
            }
        }
    }
}

fn config(k: u64, source: &str) -> InterpConfig {
    InterpConfig {
        runtime: RuntimeConfig {
            gc_interval: k,
            source: source.into(),
            ..RuntimeConfig::default()
        },
        ..InterpConfig::default()
    }
}

fn delta_gc_bound() -> Check {
    let mut checked = 0;
    for k in [1u64, 4, 16] {
        for p in programs::ALL {
            let mut tracker = UnreachableTracker::default();
            let out = run_observed(p.source, &config(k, p.name), &mut tracker).map_err(|e| e.to_string())?;
            let log = &out.log;
            if log.records.len() > 10_000 {
                return Err(format!("{}: {} objects exceeds desk scale", p.name, log.records.len()));
            }
            if tracker.resurrected > 0 {
                return Err(format!("{} K={k}: an unreachable object became reachable again", p.name));
            }
            let mut alloc_ticks: Vec<Tick> = log.records.iter().map(|r| r.create_tick).collect();
            alloc_ticks.sort_unstable();
            for r in log.records.iter().filter(|r| !r.censored) {
                let Some(&u) = tracker.first_unreachable.get(&r.id) else {
                    return Err(format!("{} K={k}: {} collected while never unreachable", p.name, r.id));
                };
                let lag = alloc_ticks.partition_point(|&t| t <= r.collect_tick)
                    - alloc_ticks.partition_point(|&t| t <= u);
                if lag as u64 > k {
                    return Err(format!(
                        "{} K={k}: {} unreachable at {u}, collected at {} after {lag} allocations",
                        p.name, r.id, r.collect_tick
                    ));
                }
                checked += 1;
            }
        }
    }
    Ok(format!(
        "{checked} collected objects over {} programs x K in {{1,4,16}}, all within K allocations",
        programs::ALL.len()
    ))
}

fn motivating_walk() -> Check {
    let n = WALK_N;
    let run_n = |p: &programs::Program| {
        run(&programs::with_n(p.source, n), &config(1, p.name)).map_err(|e| format!("{}: {e}", p.name))
    };
    let motiv = run_n(&programs::MOTIV)?;
    let nullified = run_n(&programs::MOTIV_NULLIFIED)?;
    let a = analyze(&motiv.log, AnalyzeOptions::default());
    let b = analyze(&nullified.log, AnalyzeOptions::default());

    // (a)
    let cell_drags: Vec<&DragRecord> = a
        .drags
        .iter()
        .zip(&motiv.log.records)
        .filter(|(_, r)| r.kind == ObjKind::Pair)
        .map(|(d, _)| d)
        .collect();
    if cell_drags.len() as u64 != n || cell_drags.iter().any(|d| d.drag_ticks == 0) {
        return Err(format!("(a) {} cells, some with zero drag", cell_drags.len()));
    }
    if a.report.dead_count as u64 != n || a.report.dead_threshold != 1 {
        return Err(format!("(a) dead_count {} at threshold {}", a.report.dead_count, a.report.dead_threshold));
    }

    // (b)
    let pts = &a.curves.points;
    let start = pts
        .iter()
        .position(|p| p.reachable >= n)
        .ok_or("(b) reachable never reaches n")?;
    let end = motiv.log.end_tick;
    if let Some(p) = pts[start..].iter().find(|p| p.tick < end && p.reachable < n) {
        return Err(format!("(b) reachable drops to {} at tick {}", p.reachable, p.tick));
    }
    let peak = (0..pts.len()).max_by_key(|&i| (pts[i].live, std::cmp::Reverse(i))).unwrap();
    if pts[peak..].windows(2).any(|w| w[1].live > w[0].live) || pts.last().unwrap().live >= pts[peak].live {
        return Err("(b) live curve does not decline monotonically after its peak".into());
    }

    // (c)
    let gap = a.report.savings_pct - b.report.savings_pct;
    if gap <= 40.0 {
        return Err(format!(
            "(c) savings {:.2} vs {:.2}: gap {gap:.2}",
            a.report.savings_pct, b.report.savings_pct
        ));
    }

    // (d)
    let h = histogram(&b.drags);
    let share = h.0[0] as f64 / h.total().max(1) as f64;
    if share < 0.95 {
        return Err(format!("(d) nullified bin 0 holds {:.1}%", share * 100.0));
    }
    Ok(format!(
        "n={n}: {} dead cells; reachable >= n over [{}, {end}); savings {:.2} vs {:.2}; nullified bin0 {:.1}%",
        a.report.dead_count,
        pts[start].tick,
        a.report.savings_pct,
        b.report.savings_pct,
        share * 100.0
    ))
}

fn cli(args: &[&str], dir: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dragtrace"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(())
}

fn determinism() -> Check {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for p in programs::ALL {
        let stem = p.name.trim_end_matches(".scm");
        let mut outputs = Vec::new();
        for attempt in ["a", "b"] {
            let dir = root.path().join(attempt).join(stem);
            fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
            cli(&["run", &format!("@{stem}"), "--gc-interval", "4", "--log", "run.draglog"], &dir)?;
            cli(&["analyze", "run.draglog", "--out-dir", "."], &dir)?;
            cli(&["plot", "curves.csv", "histogram.csv"], &dir)?;
            let mut files = Vec::new();
            for f in ["run.draglog", "curves.csv", "histogram.csv", "report.csv", "curves.svg", "histogram.svg"] {
                files.push((f, fs::read(dir.join(f)).map_err(|e| format!("{f}: {e}"))?));
            }
            outputs.push(files);
        }
        for ((name, x), (_, y)) in outputs[0].iter().zip(&outputs[1]) {
            if x != y {
                return Err(format!("{}: {name} differs between runs", p.name));
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} files byte-identical across two runs of {} programs", programs::ALL.len()))
}

fn check_invariants(log: &TraceLog) -> Result<(), String> {
    let label = &log.header.source;
    for r in &log.records {
        let from = r.last_use_tick.unwrap_or(r.create_tick);
        if r.collect_tick < from || r.create_tick > r.collect_tick {
            return Err(format!("{label}: negative drag for {}", r.id));
        }
    }
    for interval in [1, analyzer::default_sample_interval(log.end_tick)] {
        let c = curves(log, interval);
        if let Some(p) = c.points.iter().find(|p| p.live > p.reachable) {
            return Err(format!("{label}: live {} > reachable {} at {}", p.live, p.reachable, p.tick));
        }
        let st = space_time(&c);
        if !(0.0..=100.0).contains(&st.savings_pct) || st.live > st.reachable {
            return Err(format!("{label}: savings {}", st.savings_pct));
        }
    }
    let a = analyze(log, AnalyzeOptions::default());
    if histogram(&a.drags).total() != log.records.len() as u64 {
        return Err(format!("{label}: histogram mass != record count"));
    }
    if a.report.histogram.total() != a.report.dead_count as u64 {
        return Err(format!("{label}: dead histogram mass != dead count"));
    }
    Ok(())
}

fn invariant_suite(random_logs: &[TraceLog]) -> Check {
    let mut logs = 0;
    for k in [1, 4, 16] {
        for p in programs::ALL {
            let out = run(p.source, &config(k, p.name)).map_err(|e| e.to_string())?;
            check_invariants(&out.log)?;
            logs += 1;
        }
    }
    if random_logs.len() < RANDOM_PROGRAMS {
        return Err("randomized logs unavailable (GC correctness run failed)".into());
    }
    for log in random_logs {
        check_invariants(log)?;
        logs += 1;
    }
    Ok(format!("{logs} logs: live <= reachable, drag >= 0, histogram mass, savings in [0,100]"))
}

fn timed(name: &'static str, budget_secs: u64, f: impl FnOnce() -> Check) -> Outcome {
    let start = Instant::now();
    let result = f();
    Outcome {
        name,
        result,
        elapsed: start.elapsed(),
        budget: Duration::from_secs(budget_secs),
    }
}

fn main() {
    let mut random_logs = Vec::new();
    let outcomes = vec![
        timed("space-time-savings-rows", 1, space_time_rows),
        timed("drag-statistics-rows", 1, drag_rows),
        timed("gc-matches-reachability-oracle", 60, || gc_correctness(&mut random_logs)),
        timed("gc-lag-within-trigger-interval", 120, delta_gc_bound),
        timed("motivating-list-walk", 30, motivating_walk),
        timed("deterministic-logs-and-csvs", 30, determinism),
        timed("invariant-suite", 60, || invariant_suite(&random_logs)),
    ];
    let mut failed = 0;
    for o in &outcomes {
        let within = o.elapsed <= o.budget;
        let (status, detail) = match (&o.result, within) {
            (Ok(d), true) => ("PASS", d.clone()),
            (Ok(d), false) => ("FAIL", format!("{d}; over time budget")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "{status} {:<32} {:>7.2}s (budget {}s)  {detail}",
            o.name,
            o.elapsed.as_secs_f64(),
            o.budget.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
