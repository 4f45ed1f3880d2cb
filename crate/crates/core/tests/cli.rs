use std::path::Path;
use std::process::{Command, Output};

use nlasso_flow::generate::{chain, ChainParams};
use nlasso_flow::io;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nlasso-flow"));
    c.env("SOURCE_DATE_EPOCH", "0");
    c
}

fn run<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn solve_args(d: &Path, out: &str, extra: &[&str]) -> Vec<String> {
    let mut args: Vec<String> = vec![
        "solve".into(),
        "--graph".into(),
        p(&d.join("graph.csv")).into(),
        "--observations".into(),
        p(&d.join("observations.csv")).into(),
        "--out-dir".into(),
        p(&d.join(out)).into(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    args
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn generate_chain(dir: &Path) {
    let out = run(&["generate", "chain", "--out-dir", p(dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn generated_chain_matches_the_library_instance() {
    let dir = tempfile::tempdir().unwrap();
    generate_chain(dir.path());
    let inst = chain(&ChainParams::default()).unwrap();
    let d = dir.path();
    assert_eq!(
        io::read_graph(&d.join("graph.csv"), None).unwrap(),
        inst.graph
    );
    assert_eq!(io::read_signal(&d.join("signal.csv")).unwrap(), inst.signal);
    assert_eq!(
        io::read_observations(&d.join("observations.csv")).unwrap(),
        inst.observations
    );
    assert_eq!(
        io::read_partition(&d.join("partition.csv")).unwrap(),
        inst.partition
    );
    let manifest = std::fs::read_to_string(d.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"timestamp\": 0"));
}

#[test]
fn two_node_chain_is_a_single_edge() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "generate",
        "chain",
        "--n",
        "2",
        "--split",
        "1",
        "--samples",
        "1,2",
        "--out-dir",
        p(dir.path()),
    ]);
    assert_eq!(code(&out), 0);
    let g = io::read_graph(&dir.path().join("graph.csv"), None).unwrap();
    assert_eq!((g.node_count(), g.edge_count()), (2, 1));
}

#[test]
fn disconnected_sbm_is_written_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "generate",
        "sbm",
        "--p-out",
        "0",
        "--seed",
        "3",
        "--out-dir",
        p(dir.path()),
    ]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("disconnected"));
    assert!(dir.path().join("graph.csv").exists());
}

#[test]
fn solve_then_certify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate_chain(d);
    let s = d.join("solve");
    let out = run(&solve_args(d, "solve", &[]));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(s.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["iters"], 1000);
    assert_eq!(report["gap"]["status"], "certified");
    let x = io::read_signal(&s.join("primal.csv")).unwrap();
    assert!((x.at(1) - 0.75).abs() < 0.02 && (x.at(10) - 0.25).abs() < 0.02);

    // the restored dual of 1000 iterations certifies the partition up to rounding
    let c = d.join("cert");
    let out = run(&[
        "certify",
        "--graph",
        p(&d.join("graph.csv")),
        "--flow",
        p(&s.join("flow.csv")),
        "--partition",
        p(&d.join("partition.csv")),
        "--observations",
        p(&d.join("observations.csv")),
        "--tol",
        "1e-6",
        "--out-dir",
        p(&c),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let x = io::read_signal(&c.join("reconstructed.csv")).unwrap();
    for i in 1..=10 {
        let want = if i <= 5 { 0.75 } else { 0.25 };
        assert!((x.at(i) - want).abs() < 1e-6);
    }
}

fn tree_certificate(d: &Path, out_dir: &Path, lambda: &str) -> Output {
    run(&[
        "tree-certificate",
        "--graph",
        p(&d.join("graph.csv")),
        "--partition",
        p(&d.join("partition.csv")),
        "--observations",
        p(&d.join("observations.csv")),
        "--lambda",
        lambda,
        "--out-dir",
        p(out_dir),
    ])
}

fn certify(d: &Path, flow: &Path, out_dir: &Path, lambda: &str) -> Output {
    run(&[
        "certify",
        "--graph",
        p(&d.join("graph.csv")),
        "--flow",
        p(flow),
        "--partition",
        p(&d.join("partition.csv")),
        "--observations",
        p(&d.join("observations.csv")),
        "--lambda",
        lambda,
        "--out-dir",
        p(out_dir),
    ])
}

#[test]
fn certificate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate_chain(d);
    let t = d.join("tree");
    assert_eq!(code(&tree_certificate(d, &t, "1")), 0);
    let flow = t.join("flow.csv");

    let ok = certify(d, &flow, &d.join("ok"), "1");
    assert_eq!(code(&ok), 0);
    let x = io::read_signal(&d.join("ok/reconstructed.csv")).unwrap();
    let want: Vec<f64> = (1..=10).map(|i| if i <= 5 { 0.75 } else { 0.25 }).collect();
    assert_eq!(x.values(), &want[..]);

    let bad = certify(d, &flow, &d.join("bad"), "2");
    assert_eq!(code(&bad), 1);
    assert!(String::from_utf8_lossy(&bad.stdout).contains("boundary saturated FAILED"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("bad/certificate.json")).unwrap())
            .unwrap();
    assert_eq!(report["verdict"], "failed");
    assert_eq!(report["saturation"]["ok"], false);
}

#[test]
fn indeterminate_certificate_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // a circulation on a 4-cycle saturating both boundary edges; the second
    // cluster has no sample
    std::fs::write(
        d.join("graph.csv"),
        "i,j,w\n1,2,1\n2,3,0.5\n3,4,1\n1,4,0.5\n",
    )
    .unwrap();
    std::fs::write(d.join("partition.csv"), "i,cluster\n1,1\n2,1\n3,2\n4,2\n").unwrap();
    std::fs::write(d.join("observations.csv"), "i,x\n1,1\n").unwrap();
    std::fs::write(
        d.join("flow.csv"),
        "head,tail,y\n1,2,0.5\n1,4,-0.5\n2,3,0.5\n3,4,0.5\n1,star,0\n",
    )
    .unwrap();
    let out = certify(d, &d.join("flow.csv"), &d.join("out"), "1");
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn usage_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate_chain(d);
    // missing partition file
    let out = certify(d, &d.join("graph.csv"), &d.join("x"), "1");
    assert_eq!(code(&out), 64);
    std::fs::remove_file(d.join("partition.csv")).unwrap();
    let out = tree_certificate(d, &d.join("t"), "1");
    assert_eq!(code(&out), 64);
    assert!(String::from_utf8_lossy(&out.stderr).contains("partition.csv"));

    assert_eq!(code(&run(&["certify"])), 64);
    assert_eq!(code(&run(&["frobnicate"])), 64);
    assert_eq!(code(&run(&["--help"])), 0);

    let solve = |extra: &[&str]| run(&solve_args(d, "s", extra));
    assert_eq!(code(&solve(&["--lambda", "0"])), 64);
    assert_eq!(code(&solve(&["--lambda", "-1"])), 64);

    std::fs::write(d.join("observations.csv"), "i,x\n").unwrap();
    let out = solve(&[]);
    assert_eq!(code(&out), 64);
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));

    std::fs::write(d.join("observations.csv"), "i,x\n2,1\n7,zero\n").unwrap();
    let out = solve(&[]);
    assert_eq!(code(&out), 64);
    assert!(String::from_utf8_lossy(&out.stderr).contains("observations.csv:3"));
}

#[test]
fn solve_reads_json_config_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate_chain(d);
    std::fs::write(
        d.join("cfg.json"),
        r#"{"lambda": 1.0, "max_iters": 50, "gap_tol": 0.0, "feas_tol": 1e-9}"#,
    )
    .unwrap();
    let cfg = d.join("cfg.json");
    let solve = |extra: &[&str], out: &str| {
        let mut args = solve_args(d, out, &["--config", p(&cfg)]);
        args.extend(extra.iter().map(|s| s.to_string()));
        let o = run(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let text = std::fs::read_to_string(d.join(out).join("report.json")).unwrap();
        serde_json::from_str::<serde_json::Value>(&text).unwrap()
    };
    assert_eq!(solve(&[], "a")["iters"], 50);
    assert_eq!(solve(&["--iters", "7"], "b")["iters"], 7);

    std::fs::write(
        d.join("cfg.json"),
        r#"{"lambda": 1.0, "max_iters": 5, "bogus": 1}"#,
    )
    .unwrap();
    let o = run(&solve_args(d, "c", &["--config", p(&cfg)]));
    assert_eq!(code(&o), 64);
}

#[test]
fn isolated_node_is_rejected_by_solve() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("graph.csv"), "i,j,w\n1,2,1\n").unwrap();
    std::fs::write(d.join("observations.csv"), "i,x\n3,1\n").unwrap();
    let out = run(&solve_args(d, "s", &[]));
    assert_eq!(code(&out), 64);
}

#[test]
fn experiment_chain_outputs_and_strictness() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = run(&["experiment-chain", "--out-dir", p(d)]);
    assert_eq!(code(&out), 0);
    for f in [
        "chain_signal.csv",
        "chain_primal.csv",
        "chain_dual.csv",
        "report.json",
        "manifest.json",
    ] {
        assert!(d.join(f).exists(), "{f}");
    }
    assert!(String::from_utf8_lossy(&out.stdout).contains("all checks passed"));

    let small = run(&[
        "experiment-chain",
        "--lambda",
        "0.01",
        "--out-dir",
        p(&d.join("s")),
    ]);
    assert_eq!(code(&small), 0);
    let stdout = String::from_utf8_lossy(&small.stdout);
    assert!(stdout.contains("FAIL closed-form certificate verified"));
    let strict = run(&[
        "experiment-chain",
        "--lambda",
        "0.01",
        "--strict",
        "--out-dir",
        p(&d.join("t")),
    ]);
    assert_eq!(code(&strict), 1);

    let short = run(&[
        "experiment-chain",
        "--iters",
        "10",
        "--strict",
        "--out-dir",
        p(&d.join("u")),
    ]);
    assert_eq!(code(&short), 1);
    assert!(String::from_utf8_lossy(&short.stdout).contains("FAIL certified duality gap"));
}

fn read_all(dir: &Path, files: &[&str]) -> Vec<Vec<u8>> {
    files
        .iter()
        .map(|f| std::fs::read(dir.join(f)).unwrap())
        .collect()
}

#[test]
fn identical_runs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for sub in ["a", "b"] {
        let o = d.join(sub);
        assert_eq!(
            code(&run(&[
                "generate",
                "sbm",
                "--seed",
                "9",
                "--out-dir",
                p(&o.join("gen"))
            ])),
            0
        );
        let out = run(&solve_args(&o.join("gen"), "../solve", &["--iters", "400"]));
        assert_eq!(code(&out), 0);
    }
    let gen = [
        "graph.csv",
        "signal.csv",
        "observations.csv",
        "partition.csv",
    ];
    assert_eq!(
        read_all(&d.join("a/gen"), &gen),
        read_all(&d.join("b/gen"), &gen)
    );
    let solve = ["primal.csv", "dual.csv", "report.json"];
    assert_eq!(
        read_all(&d.join("a/solve"), &solve),
        read_all(&d.join("b/solve"), &solve)
    );
}
