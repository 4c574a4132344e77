use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dodgraph::cli::DetectStats;
use dodgraph::io::{read_graph, read_ids, DataFormat};
use dodgraph::{GraphKind, MetricKind};

fn dodgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dodgraph"))
        .args(args)
        .output()
        .expect("run dodgraph")
}

fn ok(args: &[&str]) -> String {
    let out = dodgraph(args);
    assert!(
        out.status.success(),
        "dodgraph {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn gen(&self, name: &str, n: usize, seed: u64) -> PathBuf {
        let path = self.path(name);
        let (n, seed) = (n.to_string(), seed.to_string());
        ok(&["gen", "--n", &n, "--dim", "3", "--seed", &seed, "--out", s(&path)]);
        path
    }
}

#[test]
fn detect_matches_oracle_subcommand() {
    let ws = Workspace::new();
    let data = ws.gen("d.fvecs", 2_000, 1);
    let graph = ws.path("g.bin");
    let build = ok(&["build", "--dataset", s(&data), "--K", "8", "--seed", "3", "--out", s(&graph)]);
    for row in ["NNDescent+", "Connect-SubGraphs", "Remove-Detours", "Remove-Links"] {
        assert!(build.contains(row), "{build}");
    }

    let outliers = ws.path("o.txt");
    ok(&[
        "detect", "--dataset", s(&data), "--graph-file", s(&graph), "--r", "1.2", "--k", "10", "--out",
        s(&outliers),
    ]);
    let detected = read_ids(&outliers).unwrap();

    let oracle = ok(&["oracle", "--dataset", s(&data), "--r", "1.2", "--k", "10"]);
    let mut reader = csv::Reader::from_reader(oracle.as_bytes());
    let expected: Vec<u32> = reader
        .records()
        .map(|r| r.unwrap())
        .filter(|r| &r[2] == "1")
        .map(|r| r[0].parse().unwrap())
        .collect();
    assert!(!expected.is_empty());
    assert_eq!(detected, expected);

    let stats: DetectStats =
        serde_json::from_str(&std::fs::read_to_string(ws.path("o.txt.stats.json")).unwrap()).unwrap();
    assert_eq!(stats.f + stats.t, stats.candidate_count);
    assert_eq!(stats.t, expected.len());
    assert!(stats.verify_count <= stats.candidate_count);
}

#[test]
fn detect_is_deterministic() {
    let ws = Workspace::new();
    let data = ws.gen("d.csv", 1_500, 2);
    let run = |name: &str, threads: &str| {
        let out = ws.path(name);
        ok(&[
            "detect", "--dataset", s(&data), "--r", "0.8", "--k", "5", "--seed", "9", "--threads", threads,
            "--out", s(&out),
        ]);
        std::fs::read(out).unwrap()
    };
    let a = run("a.txt", "1");
    assert_eq!(a, run("b.txt", "1"));
    assert_eq!(a, run("c.txt", "3"));
}

#[test]
fn graph_files_round_trip_and_variants() {
    let ws = Workspace::new();
    let data = ws.gen("d.fvecs", 800, 4);
    let build = |kind: &str| {
        let out = ws.path(&format!("{kind}.bin"));
        ok(&["build", "--dataset", s(&data), "--graph", kind, "--K", "6", "--seed", "5", "--out", s(&out)]);
        read_graph(&out).unwrap()
    };
    let (_, kgraph) = build("kgraph");
    assert_eq!(kgraph.kind, GraphKind::KGraph);
    assert_eq!(kgraph.pivot_count(), 0);

    let (basic_header, basic) = build("mrpg-basic");
    let (full_header, full) = build("mrpg");
    assert_eq!((basic_header.k, basic_header.k_prime), (6, 6));
    assert_eq!((full_header.k, full_header.k_prime), (6, 24));
    assert_eq!(basic.adjacency, full.adjacency);
    assert_eq!(basic.is_pivot, full.is_pivot);
    assert_eq!(basic.exact_flagged(), full.exact_flagged());
    let flagged = full.exact_flagged();
    assert!(!flagged.is_empty());
    for v in flagged {
        let (b, f) = (basic.exact_list(v).unwrap(), full.exact_list(v).unwrap());
        assert_eq!((b.len(), f.len()), (6, 24));
        assert_eq!(b.entries(), &f.entries()[..6]);
    }

    let ds = dodgraph::io::load_dataset(&data, DataFormat::Fvecs, MetricKind::L2, false).unwrap();
    let mut params = dodgraph::BuildParams::new(6).with_seed(5);
    params.k_prime = 24;
    let in_memory = dodgraph::build_mrpg(&ds, &params).unwrap();
    assert_eq!(in_memory, full);
}

#[test]
fn mismatched_graph_is_refused() {
    let ws = Workspace::new();
    let a = ws.gen("a.fvecs", 300, 1);
    let b = ws.gen("b.fvecs", 300, 2);
    let graph = ws.path("g.bin");
    ok(&["build", "--dataset", s(&a), "--K", "5", "--out", s(&graph)]);
    let out = dodgraph(&["detect", "--dataset", s(&b), "--graph-file", s(&graph), "--r", "1", "--k", "3"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("different dataset"));
}

#[test]
fn exit_codes() {
    let ws = Workspace::new();
    let data = ws.gen("d.fvecs", 100, 1);
    let bad_metric = dodgraph(&["detect", "--dataset", s(&data), "--metric", "l3", "--r", "1", "--k", "1"]);
    assert_eq!(bad_metric.status.code(), Some(2));
    let missing_k = dodgraph(&["detect", "--dataset", s(&data), "--r", "1"]);
    assert_eq!(missing_k.status.code(), Some(2));
    let missing = dodgraph(&["detect", "--dataset", s(&ws.path("nope.fvecs")), "--r", "1", "--k", "1"]);
    assert_eq!(missing.status.code(), Some(3));

    // Second record claims three components instead of two.
    let drift = ws.path("drift.fvecs");
    let mut bytes = Vec::new();
    for (dim, values) in [(2i32, vec![1.0f32, 2.0]), (3, vec![1.0, 2.0, 3.0])] {
        bytes.extend(dim.to_le_bytes());
        for v in values {
            bytes.extend(v.to_le_bytes());
        }
    }
    std::fs::write(&drift, bytes).unwrap();
    let out = dodgraph(&["detect", "--dataset", s(&drift), "--r", "1", "--k", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("offset 12"));

    let corrupt = ws.path("g.bin");
    std::fs::write(&corrupt, b"MRPG\x01\x00").unwrap();
    let out = dodgraph(&["detect", "--dataset", s(&data), "--graph-file", s(&corrupt), "--r", "1", "--k", "1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_file_with_flag_overrides() {
    let ws = Workspace::new();
    let data = ws.gen("d.fvecs", 500, 3);
    let config = ws.path("run.toml");
    std::fs::write(
        &config,
        format!("dataset = {:?}\nK = 6\nr = 0.01\nk = 4\nverify = \"scan\"\n", s(&data)),
    )
    .unwrap();
    let stats = ws.path("s.json");
    ok(&["detect", "--config", s(&config), "--r", "1.5", "--stats", s(&stats), "--out", s(&ws.path("o"))]);
    let stats: DetectStats = serde_json::from_str(&std::fs::read_to_string(stats).unwrap()).unwrap();
    assert_eq!((stats.r, stats.k, stats.n), (1.5, 4, 500));
    assert_eq!(stats.verify_mode, "scan");

    std::fs::write(&config, "colour = 1\n").unwrap();
    assert_eq!(dodgraph(&["detect", "--config", s(&config)]).status.code(), Some(2));
}

#[test]
fn words_dataset_with_edit_distance() {
    let ws = Workspace::new();
    let words = ws.path("w.txt");
    ok(&["gen", "--kind", "words", "--n", "600", "--seed", "2", "--out", s(&words)]);
    let detected = ok(&["detect", "--dataset", s(&words), "--metric", "edit", "--r", "2", "--k", "3"]);
    let oracle = ok(&["oracle", "--dataset", s(&words), "--metric", "edit", "--r", "2", "--k", "3"]);
    let expected: Vec<String> = oracle
        .lines()
        .skip(1)
        .filter(|l| l.ends_with(",1"))
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    let got: Vec<String> = detected.lines().map(str::to_string).collect();
    assert_eq!(got, expected);
}

#[test]
fn bench_sweeps() {
    let ws = Workspace::new();
    let data = ws.gen("d.fvecs", 3_000, 5);
    let config = ws.path("empty.toml");
    std::fs::write(&config, format!("dataset = {:?}\nsampling = []\n", s(&data))).unwrap();
    let header = ok(&["bench", "--config", s(&config)]);
    assert_eq!(header.lines().count(), 1);
    assert!(header.starts_with("sampling_rate,n,k,r,threads,build_time,detect_time"));

    let csv_out = ok(&[
        "bench", "--dataset", s(&data), "--sampling", "0.5,1", "--ks", "5", "--rs", "0.7",
        "--thread-counts", "1,2,4",
    ]);
    let mut reader = csv::Reader::from_reader(csv_out.as_bytes());
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 6);
    assert_eq!(&rows[0][1], "1500");
    assert_eq!(&rows[3][1], "3000");
    for group in rows.chunks(3) {
        for pair in group.windows(2) {
            let (before, after): (f64, f64) = (pair[0][6].parse().unwrap(), pair[1][6].parse().unwrap());
            assert!(after < before || &pair[1][13] == "true");
        }
        // Thread count never changes the answer.
        assert!(group.iter().all(|r| r[10] == group[0][10] && r[9] == group[0][9]));
    }
}
