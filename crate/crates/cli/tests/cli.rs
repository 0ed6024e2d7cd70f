use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavelet-prosody"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_then_evaluate_and_annotate() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let out = cli(&["synth-corpus", "--out-dir", path(&corpus), "--count", "6", "--seed", "3", "--snr", "20"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let manifest = corpus.join("manifest.tsv");
    let results = dir.path().join("results");
    let dumps = dir.path().join("dumps");
    let out = cli(&[
        "evaluate",
        "--manifest",
        path(&manifest),
        "--out-dir",
        path(&results),
        "--dump-dir",
        path(&dumps),
        "--features",
        "f0,en",
        "--calib-fraction",
        "0.2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("acc.%\tF-score\tprec.\trec."), "{report}");
    assert!(report.contains("\nf0_en\t"), "{report}");
    assert!(results.join("report.txt").exists());
    assert!(results.join("synth0000.prosody.tsv").exists());
    assert!(dumps.join("synth0000.prom.scalogram.tsv").exists());
    assert!(dumps.join("synth0000.valleys.tsv").exists());

    let single = dir.path().join("one.tsv");
    let out = cli(&[
        "annotate",
        "--f0",
        path(&corpus.join("synth0001.f0")),
        "--energy",
        path(&corpus.join("synth0001.en")),
        "--alignment",
        path(&corpus.join("synth0001.align")),
        "--binarize",
        "kmeans",
        "--gap-fill-energy",
        "off",
        "--output",
        path(&single),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&single).unwrap();
    assert!(text.starts_with("word_index\t"));
    assert!(text.lines().count() > 8);
}

#[test]
fn config_file_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "no_such_key = 1\n").unwrap();
    let out = cli(&["evaluate", "--manifest", "missing.tsv", "--config", path(&conf)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));

    let defaults = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/defaults.conf");
    let out = cli(&["evaluate", "--manifest", path(&dir.path().join("missing.tsv")), "--config", path(&defaults)]);
    assert_eq!(out.status.code(), Some(1));

    let empty = dir.path().join("empty.tsv");
    std::fs::write(&empty, "# nothing\n").unwrap();
    let out = cli(&["annotate", "--manifest", path(&empty)]);
    assert_eq!(out.status.code(), Some(1));
}
