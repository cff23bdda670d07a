use std::path::Path;
use std::process::{Command, Output};

fn rnncov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rnncov"))
        .args(args)
        .env_remove("RUST_BACKTRACE")
        .env_remove("RUST_LIB_BACKTRACE")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = rnncov(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// demo corpus, training traces and a model under `dir`.
fn setup(dir: &Path) {
    ok(&[
        "demo-corpus",
        "--out",
        p(dir),
        "--train",
        "8",
        "--seeds",
        "3",
        "--secs",
        "0.5",
    ]);
    let (w, v) = (dir.join("weights.txt"), dir.join("vocab.txt"));
    ok(&[
        "profile",
        "--weights",
        p(&w),
        "--vocab",
        p(&v),
        "--audio-dir",
        p(&dir.join("train")),
        "--out",
        p(&dir.join("train.trc")),
    ]);
    ok(&[
        "build-model",
        "--traces",
        p(&dir.join("train.trc")),
        "--pca-dims",
        "3",
        "--partitions",
        "8",
        "--out",
        p(&dir.join("model.mdp")),
    ]);
}

#[test]
fn training_traces_cover_their_own_model() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let out = ok(&[
        "coverage",
        "--model",
        p(&dir.path().join("model.mdp")),
        "--traces",
        p(&dir.path().join("train.trc")),
    ]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 5);
    for (line, name) in lines.iter().zip(["bscov", "ksbcov", "btcov", "iscov", "wicov"]) {
        assert!(line.starts_with(&format!("criterion={name} ")), "{line}");
        let want = if name == "ksbcov" {
            "value=0.000000"
        } else {
            "value=1.000000"
        };
        assert!(line.contains(want), "{line}");
    }
    let one = ok(&[
        "coverage",
        "--model",
        p(&dir.path().join("model.mdp")),
        "--traces",
        p(&dir.path().join("train.trc")),
        "--criterion",
        "BTCov",
    ]);
    assert_eq!(one.lines().count(), 1);
    assert!(one.starts_with("criterion=btcov value=1.000000"));
}

#[test]
fn input_abstraction_flags_are_honoured() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let model = dir.path().join("m2.mdp");
    ok(&[
        "build-model",
        "--traces",
        p(&dir.path().join("train.trc")),
        "--pca-dims",
        "2",
        "--partitions",
        "4",
        "--input-pca-dims",
        "1",
        "--input-partitions",
        "3",
        "--out",
        p(&model),
    ]);
    let text = std::fs::read_to_string(&model).unwrap();
    assert!(text.lines().any(|l| l == "params 2 4 1 3"), "{}", &text[..200]);
}

#[test]
fn mutate_writes_records_and_enforces_the_lineage() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let seed = dir.path().join("seeds").join("seed-000.wav");
    let m1 = dir.path().join("m1.wav");
    ok(&[
        "mutate",
        "--in",
        p(&seed),
        "--kind",
        "changespeed",
        "--seed",
        "42",
        "--out",
        p(&m1),
    ]);
    let rec = dir.path().join("m1.record.json");
    let text = std::fs::read_to_string(&rec).unwrap();
    assert!(text.contains("\"seed_id\": \"seed-000\"") && text.contains("change_speed"));

    // same category again is refused
    let m2 = dir.path().join("m2.wav");
    let out = rnncov(&[
        "mutate",
        "--in",
        p(&m1),
        "--kind",
        "pitch_shift",
        "--history",
        p(&rec),
        "--seed",
        "1",
        "--out",
        p(&m2),
    ]);
    assert!(!out.status.success());
    assert!(!m2.exists());

    // random picks extend the lineage
    ok(&[
        "mutate",
        "--in",
        p(&m1),
        "--random",
        "--history",
        p(&rec),
        "--seed",
        "9",
        "--out",
        p(&m2),
    ]);
    let text = std::fs::read_to_string(dir.path().join("m2.record.json")).unwrap();
    assert_eq!(text.matches("rng_seed").count(), 2);

    // same seed, same bytes
    let m3 = dir.path().join("m3.wav");
    ok(&[
        "mutate",
        "--in",
        p(&seed),
        "--kind",
        "changespeed",
        "--seed",
        "42",
        "--out",
        p(&m3),
    ]);
    assert_eq!(std::fs::read(&m1).unwrap(), std::fs::read(&m3).unwrap());
}

#[test]
fn fuzz_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let run = |name: &str| {
        let out = dir.path().join(name);
        let (w, v) = (dir.path().join("weights.txt"), dir.path().join("vocab.txt"));
        ok(&[
            "fuzz",
            "--model",
            p(&dir.path().join("model.mdp")),
            "--weights",
            p(&w),
            "--vocab",
            p(&v),
            "--seeds",
            p(&dir.path().join("seeds")),
            "--criterion",
            "iscov",
            "--iterations",
            "120",
            "--seed",
            "5",
            "--out",
            p(&out),
        ]);
        out
    };
    let (a, b) = (run("a"), run("b"));
    let ra = std::fs::read(a.join("report.json")).unwrap();
    assert_eq!(ra, std::fs::read(b.join("report.json")).unwrap());
    assert_eq!(
        std::fs::read(a.join("coverage.csv")).unwrap(),
        std::fs::read(b.join("coverage.csv")).unwrap()
    );
    let csv = std::fs::read_to_string(a.join("coverage.csv")).unwrap();
    assert!(csv.starts_with("iteration,value\n0,"));
    let report = String::from_utf8(ra).unwrap();
    assert!(report.contains("\"criterion\": \"iscov\""));
}

#[test]
fn bad_invocations_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let model = dir.path().join("model.mdp");
    let traces = dir.path().join("train.trc");
    let cases: Vec<Vec<&str>> = vec![
        vec![
            "coverage",
            "--model",
            p(&model),
            "--traces",
            p(&traces),
            "--criterion",
            "nope",
        ],
        vec!["coverage", "--model", p(&traces), "--traces", p(&traces)],
        vec![
            "build-model",
            "--traces",
            p(&traces),
            "--pca-dims",
            "0",
            "--partitions",
            "4",
            "--out",
            "x.mdp",
        ],
        vec![
            "profile",
            "--weights",
            "missing.txt",
            "--vocab",
            "missing.txt",
            "--audio-dir",
            ".",
            "--out",
            "t.trc",
        ],
        vec!["mutate", "--in", p(&model), "--kind", "trim", "--seed", "1"],
        vec!["mutate", "--in", "x.wav", "--seed", "1"],
    ];
    for args in cases {
        let out = rnncov(&args);
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(!out.stderr.is_empty());
    }
}
