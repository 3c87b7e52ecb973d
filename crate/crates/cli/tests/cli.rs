use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn dragtrace(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dragtrace"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn run_writes_a_log_next_to_the_source() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "p.scm", "(define x (list 1 2 3)) (display (car x)) (cdr x)");
    let o = dragtrace(dir.path(), &["run", "p.scm", "--gc-interval", "2", "--verify"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.starts_with("1\n=> (2 3)\n"), "{stdout}");
    let log = fs::read_to_string(dir.path().join("p.draglog")).unwrap();
    assert!(log.lines().last().unwrap().starts_with("END "));
    assert_eq!(log.lines().filter(|l| l.starts_with("OBJ ")).count(), 3);
}

#[test]
fn missing_source_is_an_input_error_and_leaves_no_log() {
    let dir = TempDir::new().unwrap();
    let o = dragtrace(dir.path(), &["run", "nope.scm"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("nope.scm"));
    assert!(!dir.path().join("nope.draglog").exists());
}

#[test]
fn unknown_bundled_program_lists_the_choices() {
    let dir = TempDir::new().unwrap();
    let o = dragtrace(dir.path(), &["run", "@nope"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("motiv"));
}

#[test]
fn syntax_errors_exit_1_with_a_location() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "bad.scm", "(define x 1)\n(+ x");
    let o = dragtrace(dir.path(), &["run", "bad.scm"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains('2'), "{}", stderr(&o));
    assert!(!dir.path().join("bad.draglog").exists());
}

#[test]
fn runtime_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "err.scm", "(define x 5)\n(car x)");
    let o = dragtrace(dir.path(), &["run", "err.scm"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("car"), "{}", stderr(&o));
}

#[test]
fn heap_exhaustion_exits_3() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "oom.scm",
        "(define (grow n acc) (if (= n 0) acc (grow (- n 1) (cons n acc)))) (grow 100 '())",
    );
    let o = dragtrace(dir.path(), &["run", "oom.scm", "--heap-slots", "32"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_64() {
    let dir = TempDir::new().unwrap();
    for args in [
        &["run"][..],
        &["frobnicate"],
        &["run", "x.scm", "--gc-interval", "zero"],
        &["run", "@motiv", "--gc-interval", "0"],
        &["analyze", "x.draglog", "--sample-interval", "0"],
    ] {
        let o = dragtrace(dir.path(), args);
        assert_eq!(code(&o), 64, "{args:?}: {}", stderr(&o));
    }
    assert_eq!(code(&dragtrace(dir.path(), &["--help"])), 0);
    assert_eq!(code(&dragtrace(dir.path(), &["--version"])), 0);
}

#[test]
fn truncated_log_is_rejected() {
    let dir = TempDir::new().unwrap();
    let o = dragtrace(dir.path(), &["run", "@motiv", "--log", "m.draglog"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let log = fs::read_to_string(dir.path().join("m.draglog")).unwrap();
    let cut: String = log.lines().filter(|l| !l.starts_with("END")).map(|l| format!("{l}\n")).collect();
    write(dir.path(), "cut.draglog", &cut);
    let o = dragtrace(dir.path(), &["analyze", "cut.draglog", "--out-dir", "out"]);
    assert_eq!(code(&o), 1);
    assert!(!dir.path().join("out/report.csv").exists());
}

#[test]
fn log_without_objects_analyzes_to_zeros() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "k.scm", "(+ 1 2)");
    assert_eq!(code(&dragtrace(dir.path(), &["run", "k.scm"])), 0);
    let o = dragtrace(dir.path(), &["analyze", "k.draglog"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let mut lines = report.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let settings = ["source", "gc_interval", "end_tick", "dead_threshold", "sample_interval"];
    for (name, value) in header.iter().zip(&row) {
        if !settings.contains(name) {
            assert_eq!(value.parse::<f64>().unwrap(), 0.0, "{name}");
        }
    }
    let histogram = fs::read_to_string(dir.path().join("histogram.csv")).unwrap();
    assert_eq!(histogram.lines().count(), 21);
}

#[test]
fn analyze_then_plot_both_series() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&dragtrace(d, &["run", "@motiv", "--gc-interval", "1"])), 0);
    let o = dragtrace(d, &["analyze", "motiv.draglog", "--out-dir", "a"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["report.csv", "curves.csv", "histogram.csv", "report.txt"] {
        assert!(d.join("a").join(f).exists(), "{f}");
    }
    let o = dragtrace(d, &["plot", "a/curves.csv", "a/histogram.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let curves = fs::read_to_string(d.join("a/curves.svg")).unwrap();
    assert_eq!(curves.matches("<polyline").count(), 2);
    assert!(curves.contains("stroke-dasharray"));
    assert!(curves.contains(r#"class="legend""#));

    let hist = fs::read_to_string(d.join("a/histogram.svg")).unwrap();
    assert_eq!(hist.matches("data-count=").count(), 20);
    assert!(hist.contains(r#"data-count="0" data-plotted="0.5""#));

    let o = dragtrace(d, &["plot", "a/curves.csv", "--plot-format", "gnuplot", "--out-dir", "g"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(fs::read_to_string(d.join("g/curves.gp")).unwrap().contains("set "));
}

#[test]
fn plot_rejects_malformed_csv() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "x.csv", "tick,reachable,live\n0,1,1\n0,1,1\n");
    let o = dragtrace(dir.path(), &["plot", "x.csv"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(!dir.path().join("x.svg").exists());
}
