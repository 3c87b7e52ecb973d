//! The motivating list walk, traced by hand and compared record by record.
//!
//! With K = 1 and n cells the run goes:
//!   ticks 1..=n        build: one cons per tick, last element first
//!   ticks n+1+6k ..    walk iteration k: make-vector, null?, car,
//!                      vector-set!, cdr, vector-ref
//!   tick  n+1+6n       final make-vector, then (null? '()) which is no event
//!   tick  n+2+6n       end of run
//! Cell j (0 = head) is created at tick n-j and last used by `cdr` at
//! n+5+6j. Scratch vector k is last used at n+6+6k and collected by the next
//! allocation.

use dragtrace::analyzer::{analyze, curves, dead_objects, drags, AnalyzeOptions};
use dragtrace::interp::{run, InterpConfig, RunOutput};
use dragtrace::programs::{self, with_n};
use dragtrace::runtime::RuntimeConfig;
use dragtrace::{ObjId, ObjKind, Tick};

const N: u64 = 100;

/// (id, kind, create, last_use, collect)
type Expected = (u64, ObjKind, Tick, Option<Tick>, Tick);

fn run_k1(p: &programs::Program) -> RunOutput {
    let config = InterpConfig {
        runtime: RuntimeConfig {
            gc_interval: 1,
            verify: true,
            ..RuntimeConfig::default()
        },
        ..InterpConfig::default()
    };
    run(&with_n(p.source, N), &config).unwrap()
}

fn expected(nullified: bool) -> Vec<Expected> {
    let end = N + 2 + 6 * N;
    let mut out = Vec::new();
    for j in 0..N {
        let id = N - 1 - j;
        let last_use = N + 5 + 6 * j;
        let collect = if nullified { last_use + 2 } else { end };
        out.push((id, ObjKind::Pair, N - j, Some(last_use), collect));
    }
    for k in 0..N {
        let create = N + 1 + 6 * k;
        out.push((N + k, ObjKind::Vector, create, Some(create + 5), create + 6));
    }
    out.push((2 * N, ObjKind::Vector, N + 1 + 6 * N, None, end));
    out.sort_by_key(|e| e.0);
    out
}

fn actual(out: &RunOutput) -> Vec<Expected> {
    let mut v: Vec<Expected> = out
        .log
        .records
        .iter()
        .map(|r| {
            assert!(!r.censored, "{} censored", r.id);
            (r.id.0, r.kind, r.create_tick, r.last_use_tick, r.collect_tick)
        })
        .collect();
    v.sort_by_key(|e| e.0);
    v
}

#[test]
fn motiv_log_matches_hand_trace() {
    let out = run_k1(&programs::MOTIV);
    assert_eq!(out.log.end_tick, N + 2 + 6 * N);
    assert_eq!(actual(&out), expected(false));
}

#[test]
fn nullified_log_matches_hand_trace() {
    let out = run_k1(&programs::MOTIV_NULLIFIED);
    assert_eq!(actual(&out), expected(true));
}

#[test]
fn motiv_curves_step_down_once_per_iteration() {
    let out = run_k1(&programs::MOTIV);
    let c = curves(&out.log, 1);
    for k in 0..N {
        // After iteration k's vector-ref: cells k+1.. are still to be used,
        // plus the scratch vector being read.
        let p = c.points[(N + 6 + 6 * k) as usize];
        assert_eq!(p.live, N - k, "iteration {k}");
        assert_eq!(p.reachable, N + 1, "iteration {k}");
    }
}

#[test]
fn every_cell_is_dead_in_motiv() {
    let out = run_k1(&programs::MOTIV);
    let a = analyze(&out.log, AnalyzeOptions::default());
    assert_eq!(a.report.dead_threshold, 1);
    assert_eq!(a.report.dead_count as u64, N);
    let cells = out.log.records.iter().filter(|r| r.kind == ObjKind::Pair);
    assert!(cells.zip(&a.drags).all(|(_, d)| d.drag_ticks > 0));
}

#[test]
fn nullified_cells_drag_two_ticks() {
    let out = run_k1(&programs::MOTIV_NULLIFIED);
    let d = drags(&out.log);
    let cells: Vec<_> = d
        .iter()
        .zip(&out.log.records)
        .filter(|(_, r)| r.kind == ObjKind::Pair)
        .map(|(d, _)| d.drag_ticks)
        .collect();
    assert!(cells.iter().all(|&t| t == 2));
    // Drag 2 exceeds a threshold of one tick but nothing exceeds two.
    assert_eq!(dead_objects(&d, 1).dead_count as u64, N);
    assert_eq!(dead_objects(&d, 2).dead_count, 0);
}

#[test]
fn scope_exit_releases_the_list() {
    let out = run_k1(&programs::MOTIV);
    let c = curves(&out.log, 1);
    let last = c.points.last().unwrap();
    assert_eq!((last.reachable, last.live), (0, 0));
    assert!(out.log.records.iter().all(|r| r.id != ObjId(u64::MAX)));
}
