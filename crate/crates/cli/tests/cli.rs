use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn geri(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geri"))
        .args(args)
        .env("GERI_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    /// Two 10-node cliques joined by one edge; each clique has its own words.
    fn new() -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let mut edges = String::from("# two communities\n");
        let mut text = String::new();
        let mut labels = String::new();
        for c in 0..2u32 {
            for a in 0..10 {
                for b in a + 1..10 {
                    edges.push_str(&format!("{} {}\n", c * 10 + a, c * 10 + b));
                }
                let v = c * 10 + a;
                text.push_str(&format!("{v} topic{c} 1\n{v} common 0.5\n"));
                labels.push_str(&format!("{v} class{c}\n"));
            }
        }
        edges.push_str("9 10 0.5\n");
        let f = Fixture { dir };
        fs::write(f.path("edges.txt"), edges).unwrap();
        fs::write(f.path("text.txt"), text).unwrap();
        fs::write(f.path("labels.txt"), labels).unwrap();
        fs::write(f.path("edge_text.txt"), "9 10 bridge 1\n").unwrap();
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }
}

const SMALL: &[&str] = &["--dim", "8", "--walk-length", "10", "--walks-per-node", "2", "--window", "3"];

fn train_args<'a>(f: &'a Fixture, out: &'a str, extra: &[&'a str]) -> Vec<String> {
    let mut args: Vec<String> = vec![
        "train".into(),
        "--edges".into(),
        f.arg("edges.txt"),
        "--node-text".into(),
        f.arg("text.txt"),
        "--output".into(),
        f.arg(out),
    ];
    args.extend(SMALL.iter().map(|s| s.to_string()));
    args.extend(extra.iter().map(|s| s.to_string()));
    args
}

fn run(args: &[String]) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    geri(&refs)
}

#[test]
fn help_lists_flags_with_defaults() {
    let out = geri(&["train", "--help"]);
    assert!(out.status.success());
    let help = stdout(&out);
    for (flag, default) in [
        ("--walk-length", "150"),
        ("--walks-per-node", "10"),
        ("--window", "10"),
        ("--negatives", "5"),
        ("--dim", "128"),
        ("--lambda1", "1"),
        ("--lr", "0.025"),
        ("--p", "1"),
        ("--q", "1"),
        ("--r", "1"),
        ("--seed", "0"),
        ("--workers", "1"),
        ("--walk-starts", "all"),
    ] {
        let line = help.lines().find(|l| l.contains(flag)).unwrap_or_else(|| panic!("{flag} missing"));
        assert!(
            help.contains(&format!("[default: {default}]")),
            "{flag} default {default} not shown: {line}"
        );
    }
    for flag in ["--edges", "--node-text", "--edge-text", "--emit-bridges", "--output"] {
        assert!(help.contains(flag), "{flag} missing");
    }
    let eval_help = stdout(&geri(&["evaluate", "--help"]));
    for (flag, default) in [("--train-fraction", "0.5"), ("--repeats", "10"), ("--C", "100")] {
        assert!(eval_help.contains(flag));
        assert!(eval_help.contains(&format!("[default: {default}]")), "{flag}");
    }
    for sub in ["convert", "train", "evaluate", "benchmark", "grid"] {
        assert!(stdout(&geri(&["--help"])).contains(sub));
    }
}

#[test]
fn usage_errors_exit_2() {
    let out = geri(&["train", "--edges", "/nonexistent/edges.txt", "--node-text", "/nonexistent/t", "--output", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/nonexistent/edges.txt"));
    assert_eq!(geri(&["train", "--bogus"]).status.code(), Some(2));
    let f = Fixture::new();
    let out = run(&train_args(&f, "e.txt", &["--p=-1"]));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("p must be positive"));
    fs::write(f.path("bad.txt"), "0 0\n").unwrap();
    let out = geri(&["convert", "--edges", &f.arg("bad.txt"), "--node-text", &f.arg("text.txt")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("self-loop"));
}

#[test]
fn convert_is_idempotent() {
    let f = Fixture::new();
    let once = f.arg("once.txt");
    let twice = f.arg("twice.txt");
    let out = geri(&[
        "convert", "--edges", &f.arg("edges.txt"), "--node-text", &f.arg("text.txt"),
        "--edge-text", &f.arg("edge_text.txt"), "--output", &once,
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&once).unwrap();
    assert!(text.starts_with("#hetero targets=20 bridges=4"), "{text}");
    assert!(geri(&["convert", "--edges", &once, "--output", &twice]).status.success());
    assert_eq!(text, fs::read_to_string(&twice).unwrap());
}

fn read_rows(path: &Path) -> (String, Vec<String>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    (header, lines.map(|l| l.split(' ').next().unwrap().to_string()).collect())
}

#[test]
fn train_writes_embeddings_and_is_reproducible() {
    let f = Fixture::new();
    assert!(run(&train_args(&f, "a.txt", &[])).status.success());
    assert!(run(&train_args(&f, "b.txt", &[])).status.success());
    assert_eq!(fs::read(f.path("a.txt")).unwrap(), fs::read(f.path("b.txt")).unwrap());
    let (header, names) = read_rows(&f.path("a.txt"));
    assert_eq!(header, "20 8");
    assert_eq!(names, (0..20).map(|i| i.to_string()).collect::<Vec<_>>());

    assert!(run(&train_args(&f, "c.txt", &["--emit-bridges", "--dump-walks", &f.arg("walks.txt")])).status.success());
    let (header, names) = read_rows(&f.path("c.txt"));
    assert_eq!(header, "23 8");
    assert!(names[20..].iter().all(|n| n.starts_with('w')));
    let walks = fs::read_to_string(f.path("walks.txt")).unwrap();
    assert_eq!(walks.lines().count(), 23 * 2);
    assert!(walks.lines().all(|l| l.split(' ').count() <= 10));
}

#[test]
fn evaluate_reports_per_repeat_and_mean() {
    let f = Fixture::new();
    assert!(run(&train_args(&f, "e.bin", &["--binary"])).status.success());
    let report = f.arg("report.tsv");
    let out = geri(&[
        "evaluate", "--embeddings", &f.arg("e.bin"), "--labels", &f.arg("labels.txt"),
        "--repeats", "3", "--output", &report,
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let tsv = fs::read_to_string(&report).unwrap();
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines[0], "repeat\tmicro_f1\tmacro_f1");
    assert_eq!(lines.len(), 5);
    assert!(lines[4].starts_with("mean\t"));
    let summary = stdout(&out);
    assert!(summary.trim().starts_with("micro=") && summary.contains(" macro="), "{summary}");
}

#[test]
fn grid_reports_every_configuration() {
    let f = Fixture::new();
    let report = f.arg("grid.tsv");
    let mut args = vec![
        "grid".to_string(), "--edges".into(), f.arg("edges.txt"), "--node-text".into(), f.arg("text.txt"),
        "--labels".into(), f.arg("labels.txt"), "--grid".into(), "q,r".into(), "--grid-values".into(),
        "0.5,2".into(), "--report".into(), report.clone(), "--output".into(), f.arg("best.txt"),
    ];
    args.extend(SMALL.iter().map(|s| s.to_string()));
    let out = run(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(fs::read_to_string(&report).unwrap().lines().count(), 5);
    assert!(stdout(&out).starts_with("best p=1 q="));
    assert_eq!(read_rows(&f.path("best.txt")).0, "20 8");
}

#[test]
fn benchmark_emits_sizes_and_guards_memory() {
    let mut args = vec!["benchmark", "--nodes", "50,100", "--output"];
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("bench.tsv");
    let out_str = out_path.to_string_lossy().into_owned();
    args.push(&out_str);
    args.extend_from_slice(SMALL);
    let out = geri(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let tsv = fs::read_to_string(&out_path).unwrap();
    let rows: Vec<&str> = tsv.lines().collect();
    assert_eq!(rows[0], "n\tseconds");
    assert!(rows[1].starts_with("50\t") && rows[2].starts_with("100\t"));
    let out = geri(&["benchmark", "--nodes", "1000", "--max-nodes", "500"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("max-nodes"));
}
