use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use attrgraph::graphdata::{load_graph, save_graph};
use attrgraph::AttributedGraph;

const FAST: &str = "\
model.hidden=8
model.time_hidden=8
model.label_hidden=8
model.edge_hidden=8
model.attr_mlp_hidden=8
train.max_steps=12
train.eval_interval=6
train.batch_pairs=256
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_attrgraph"))
}

fn run(args: &[&str]) -> Output {
    bin()
        .args(args)
        .env("GRAPHMAKER_THREADS", "1")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn toy(labeled: bool) -> AttributedGraph {
    let n = 40;
    let y: Vec<u32> = (0..n).map(|v| (v % 2) as u32).collect();
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|v| [(v, (v + 2) % n), (v, (v + 3) % n)])
        .collect();
    let attrs = (0..n)
        .flat_map(|v| [y[v], (v % 3 == 0) as u32, (v % 5 == 0) as u32])
        .collect();
    let labels = labeled.then(|| (2, y));
    AttributedGraph::new("toy", n, edges, vec![2, 2, 2], attrs, labels).unwrap()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new(labeled: bool) -> Self {
        let dir = tempfile::tempdir().unwrap();
        save_graph(&toy(labeled), dir.path().join("data")).unwrap();
        fs::write(dir.path().join("fast.cfg"), FAST).unwrap();
        Self { dir }
    }

    fn p(&self, name: &str) -> String {
        self.dir.path().join(name).to_str().unwrap().to_string()
    }

    fn train(&self, out: &str, extra: &[&str]) -> Output {
        let (data, cfg, out) = (self.p("data"), self.p("fast.cfg"), self.p(out));
        let mut args = vec!["train", "--data", &data, "--config", &cfg, "--out", &out];
        args.extend_from_slice(extra);
        run(&args)
    }
}

fn subdirs(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    v.sort();
    v
}

fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for p in subdirs(dir) {
        if p.is_dir() {
            out.extend(tree_bytes(&p));
        } else {
            out.push((
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            ));
        }
    }
    out
}

#[test]
fn train_and_generate_are_deterministic() {
    let ws = Workspace::new(true);
    for name in ["a.ckpt", "b.ckpt"] {
        let out = ws.train(name, &["--mode", "async", "--seed", "7"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(
        fs::read(ws.p("a.ckpt")).unwrap(),
        fs::read(ws.p("b.ckpt")).unwrap()
    );
    let log = fs::read_to_string(ws.p("a.ckpt.log")).unwrap();
    assert!(!log.trim().is_empty());

    let ckpt = ws.p("a.ckpt");
    for out_dir in ["g1", "g2"] {
        let o = ws.p(out_dir);
        let out = run(&[
            "generate", "--ckpt", &ckpt, "--out", &o, "--num", "3", "--seed", "11",
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let dirs = subdirs(Path::new(&ws.p("g1")));
    assert_eq!(dirs.len(), 3);
    assert_eq!(
        tree_bytes(Path::new(&ws.p("g1"))),
        tree_bytes(Path::new(&ws.p("g2")))
    );

    let o = ws.p("small");
    let out = run(&[
        "generate", "--ckpt", &ckpt, "--out", &o, "--num", "1", "--seed", "1", "--n-hat", "25",
    ]);
    assert_eq!(code(&out), 0);
    let g = load_graph(&subdirs(Path::new(&o))[0]).unwrap();
    assert_eq!(g.n(), 25);
}

#[test]
fn usage_errors_exit_2() {
    let out = run(&["train", "--mode", "async"]);
    assert_eq!(code(&out), 2);
    let ws = Workspace::new(true);
    let (data, o) = (ws.p("data"), ws.p("b"));
    let out = run(&["baseline", "--data", &data, "--kind", "sbm", "--out", &o]);
    assert_eq!(code(&out), 2);
    let out = ws.train("x.ckpt", &["--mode", "diagonal"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn conditional_on_unlabeled_data_exits_3() {
    let ws = Workspace::new(false);
    let out = ws.train("x.ckpt", &["--mode", "sync", "--conditional", "true"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["train", "--data", &ws.p("missing")]);
    assert_eq!(code(&out), 3);
}

#[test]
fn evaluate_against_itself_gives_unit_ratios() {
    let ws = Workspace::new(true);
    let (data, o) = (ws.p("data"), ws.p("report"));
    let out = run(&[
        "evaluate",
        "--original",
        &data,
        "--generated",
        &data,
        &data,
        "--suite",
        "all",
        "--seed",
        "0",
        "--out",
        &o,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(Path::new(&o).join("summary.txt")).unwrap();
    for line in summary.lines() {
        let (k, v) = line.split_once('=').unwrap();
        if k.ends_with("w1.mean") && !k.starts_with("diversity") {
            assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{line}");
        }
        if k.starts_with("ml.ratio_") && k.ends_with(".mean") {
            assert_eq!(v.parse::<f64>().unwrap(), 1.0, "{line}");
        }
        if (k.starts_with("ml.pearson") || k.starts_with("ml.spearman")) && k.ends_with(".mean") {
            assert!((v.parse::<f64>().unwrap() - 1.0).abs() < 1e-12, "{line}");
        }
    }
    for f in [
        "struct_report.csv",
        "ml_report.csv",
        "recovery_report.csv",
        "diversity.csv",
    ] {
        assert!(Path::new(&o).join(f).exists(), "{f}");
    }
}

#[test]
fn evaluate_schema_mismatch_exits_3() {
    let ws = Workspace::new(true);
    let other = AttributedGraph::new("other", 3, [(0, 1)], vec![3], vec![0, 1, 2], None).unwrap();
    save_graph(&other, ws.dir.path().join("other")).unwrap();
    let (data, gen, o) = (ws.p("data"), ws.p("other"), ws.p("r"));
    let out = run(&[
        "evaluate",
        "--original",
        &data,
        "--generated",
        &gen,
        "--suite",
        "structural",
        "--out",
        &o,
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn baseline_er_matches_edge_count() {
    let ws = Workspace::new(true);
    let (data, o) = (ws.p("data"), ws.p("er"));
    let out = run(&[
        "baseline", "--data", &data, "--kind", "er", "--num", "2", "--seed", "3", "--out", &o,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let dirs = subdirs(Path::new(&o));
    assert_eq!(dirs.len(), 2);
    let g = toy(true);
    for d in dirs {
        let h = load_graph(&d).unwrap();
        assert_eq!(h.num_edges(), g.num_edges());
    }
    let o = ws.p("erm");
    let out = run(&[
        "baseline",
        "--data",
        &data,
        "--kind",
        "er+marginal",
        "--seed",
        "3",
        "--out",
        &o,
    ]);
    assert_eq!(code(&out), 0);
}
