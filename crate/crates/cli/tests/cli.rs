use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn hrc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hrc")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Copies the LEG1 bundle into a temporary directory, editing one file.
fn edited_leg1(file: &str, from: &str, to: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(fixture("leg1")).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), dir.path().join(entry.file_name())).unwrap();
    }
    let target = dir.path().join(file);
    let text = fs::read_to_string(&target).unwrap();
    assert!(text.contains(from));
    fs::write(&target, text.replacen(from, to, 1)).unwrap();
    dir
}

#[test]
fn validate_accepts_the_fixtures() {
    for name in ["leg1", "table4"] {
        let o = hrc(&["validate", path(&fixture(name))]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).starts_with("ok: "));
    }
}

#[test]
fn dangling_action_names_its_line() {
    let dir = edited_leg1("leg.andor", "pickup,screw_h", "pickup,weld");
    let o = hrc(&["validate", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("weld") && err.contains("line"), "{err}");
}

#[test]
fn broken_hierarchy_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let o = hrc(&["gen-table", "--legs", "2", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = dir.path().join("table.andor");
    let text = fs::read_to_string(&table).unwrap();
    let kept: Vec<&str> = text.lines().filter(|l| !l.starts_with("MAPROOT")).collect();
    fs::write(&table, kept.join("\n") + "\n").unwrap();
    let o = hrc(&["validate", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("MAPROOT"), "{}", stderr(&o));
}

#[test]
fn run_replays_the_bundle_trace() {
    let o = hrc(&["run", path(&fixture("leg1"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("# model leg"));
    assert!(out.contains("dispatch leg::hB approach(L,T) -> R1"), "{out}");
}

#[test]
fn run_with_override_trace_terminates_the_robot() {
    let trace = fixture("leg1/override.trace");
    let o = hrc(&["run", path(&fixture("leg1")), "--trace", path(&trace)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("directive TerminateRobot"));
}

#[test]
fn run_writes_the_transcript_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.txt");
    let o = hrc(&["run", path(&fixture("table4")), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    assert!(fs::read_to_string(out).unwrap().starts_with("# model table"));
}

#[test]
fn short_trace_is_an_unsolved_run() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("short.trace");
    fs::write(&trace, "T=0 ACK ok\n").unwrap();
    let o = hrc(&["run", path(&fixture("leg1")), "--trace", path(&trace)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_trace_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("bad.trace");
    fs::write(&trace, "T=0 ACK ok\nT=x ACK ok\n").unwrap();
    let o = hrc(&["run", path(&fixture("leg1")), "--trace", path(&trace)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_three() {
    assert_eq!(hrc(&["bogus"]).status.code(), Some(3));
    assert_eq!(hrc(&["gen-table", "--legs", "10", "--out", "unused"]).status.code(), Some(3));
    assert_eq!(hrc(&["bench", "--reps", "0"]).status.code(), Some(3));
    assert_eq!(hrc(&["--help"]).status.code(), Some(0));
}

#[test]
fn generated_bundles_validate() {
    let dir = tempfile::tempdir().unwrap();
    for enc in ["standard", "fol", "hierarchical"] {
        let out = dir.path().join(enc);
        let o = hrc(&["gen-table", "--legs", "3", "--encoding", enc, "--out", path(&out)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let o = hrc(&["validate", path(&out)]);
        assert_eq!(o.status.code(), Some(0), "{enc}: {}", stderr(&o));
    }
    let out = dir.path().join("kitchen");
    assert_eq!(hrc(&["gen-kitchen", "--out", path(&out)]).status.code(), Some(0));
    let o = hrc(&["validate", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("hierarchical"));
}

#[test]
fn small_bench_writes_csv_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let plot = dir.path().join("bench.dat");
    let o = hrc(&[
        "bench", "--encodings", "fol,hierarchical", "--legs", "1..3", "--reps", "3",
        "--out", path(&csv), "--plot", path(&plot),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().next(), Some(hrc_core::bench::CSV_HEADER));
    assert_eq!(text.lines().count(), 1 + 2 * 3);
    assert!(fs::metadata(plot).unwrap().len() > 0);
    assert!(stderr(&o).contains("quadratic p"));
}

#[test]
fn seeded_runs_are_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let kitchen = dir.path().join("kitchen");
    assert_eq!(hrc(&["gen-kitchen", "--out", path(&kitchen)]).status.code(), Some(0));
    for bundle in [fixture("table4"), kitchen] {
        let a = hrc(&["run", path(&bundle), "--seed", "7"]);
        let b = hrc(&["run", path(&bundle), "--seed", "7"]);
        assert_eq!(a.status.code(), b.status.code());
        assert!(!a.stdout.is_empty());
        assert_eq!(a.stdout, b.stdout);
    }
}
