use std::fs;
use std::path::Path;
use std::process::Command;

use tlsan::cli::run_with;
use tlsan::ingest::Dataset;

fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let argv = std::iter::once("tlsan").chain(args.iter().copied());
    let code = run_with(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn field(summary: &str, name: &str) -> usize {
    summary
        .lines()
        .find_map(|l| l.strip_prefix(name))
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or_else(|| panic!("{name} missing from {summary}"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn prepared(dir: &Path) -> String {
    let (r, m, d) = (dir.join("r.json"), dir.join("m.json"), dir.join("d.bin"));
    let (code, _) = run(&["synth", "--reviews", s(&r), "--meta", s(&m), "--users", "150", "--items", "120", "--categories", "6"]);
    assert_eq!(code, 0);
    let (code, summary) = run(&["prep", "--reviews", s(&r), "--meta", s(&m), "--out", s(&d)]);
    assert_eq!(code, 0);
    summary
}

#[test]
fn gradcheck_passes() {
    let (code, out) = run(&["gradcheck", "--seed", "7"]);
    assert_eq!(code, 0, "{out}");
    for t in ["U", "I", "C", "P", "gamma", "W1", "W4", "b1", "b4"] {
        assert!(out.lines().any(|l| l.split_whitespace().next() == Some(t)), "{t}");
    }
}

#[test]
fn unknown_flag_exits_2() {
    let bin = env!("CARGO_BIN_EXE_tlsan");
    let out = Command::new(bin).args(["train", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = Command::new(bin).arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn errors_are_one_line_and_nonzero() {
    let bin = env!("CARGO_BIN_EXE_tlsan");
    let out = Command::new(bin)
        .args(["prep", "--reviews", "/nonexistent/r.json", "--meta", "/nonexistent/m.json", "--out", "/tmp/x.bin"])
        .env("TLSAN_LOG", "error")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error:"));
}

#[test]
fn prep_summary_matches_recount() {
    let dir = tempfile::tempdir().unwrap();
    let summary = prepared(dir.path());
    let ds = Dataset::read(&dir.path().join("d.bin")).unwrap();
    let users = ds.histories.len();
    let items: std::collections::BTreeSet<usize> = ds.histories.iter().flat_map(|h| h.item_set()).collect();
    let samples: usize = ds.histories.iter().map(|h| h.len()).sum();
    assert_eq!(field(&summary, "users"), users);
    assert_eq!(field(&summary, "items"), items.len());
    assert_eq!(field(&summary, "samples"), samples);
    assert_eq!(field(&summary, "categories"), ds.manifest.categories.len());
    assert_eq!(field(&summary, "test"), ds.test.len());
    // synthetic logs survive every filter
    assert_eq!(users, 150);
    assert_eq!(field(&summary, "excluded"), 0);
    assert!(dir.path().join("d.manifest.json").exists());
}

#[test]
fn train_eval_recommend_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    prepared(dir.path());
    let d = dir.path().join("d.bin");
    let cfg = dir.path().join("c.cfg");
    fs::write(&cfg, format!("dataset = {}\nepochs = 3\ndim = 8\nheads = 4\n", d.display())).unwrap();

    let mut runs = Vec::new();
    for k in 0..2 {
        let ck = dir.path().join(format!("ck{k}.bin"));
        let metrics = dir.path().join(format!("m{k}.csv"));
        let report = dir.path().join(format!("r{k}.csv"));
        let (code, out) = run(&["train", "--config", s(&cfg), "--checkpoint", s(&ck), "--metrics", s(&metrics)]);
        assert_eq!(code, 0, "{out}");
        let (code, table) = run(&["eval", "--config", s(&cfg), "--checkpoint", s(&ck), "--csv", s(&report)]);
        assert_eq!(code, 0);
        assert!(table.contains("AUC") && table.contains("popularity"));
        let (code, recs) = run(&["recommend", "--dataset", s(&d), "--checkpoint", s(&ck), "--user", "A0000004", "-k", "7"]);
        assert_eq!(code, 0);
        assert_eq!(recs.lines().count(), 7);
        assert!(recs.lines().all(|l| l.starts_with('B') && l.split('\t').nth(1).unwrap().parse::<f64>().is_ok()));
        runs.push((fs::read(&ck).unwrap(), fs::read(&metrics).unwrap(), fs::read(&report).unwrap(), table, recs));
    }
    assert_eq!(runs[0], runs[1]);

    let metrics = String::from_utf8(runs[0].1.clone()).unwrap();
    assert_eq!(metrics.lines().next(), Some("step,epoch,lr,loss,auc,p_at_k,r_at_k"));
    let report = String::from_utf8(runs[0].2.clone()).unwrap();
    assert!(report.starts_with("users,auc,precision@1,recall@1"));

    // flags override the file
    let ck = dir.path().join("ck_ns.bin");
    let (code, _) = run(&["train", "--config", s(&cfg), "--checkpoint", s(&ck), "--variant", "ns", "--set", "epochs=1"]);
    assert_eq!(code, 0);
    assert_eq!(tlsan::model::checkpoint::load(&ck).unwrap().hyper.variant, tlsan::model::Variant::NoShort);

    let (code, _) = run(&["recommend", "--dataset", s(&d), "--checkpoint", s(&ck), "--user", "nobody"]);
    assert_eq!(code, 1);
    let (code, _) = run(&["train", "--config", s(&cfg), "--checkpoint", s(&ck), "--set", "bogus=1"]);
    assert_eq!(code, 1);
}
