use std::path::Path;
use std::process::{Command, Output};

use enetype::synthetic::{generate, SyntheticSpec};

fn enetype(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_enetype")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(dir: &Path, entities: usize) {
    generate(&SyntheticSpec { entities, ..SyntheticSpec::fixture(2) }).unwrap().write_to(dir).unwrap();
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

const SMALL: [&str; 10] = ["--vocab-size", "1024", "--embed-dim", "8", "--hidden-dim", "16", "--epochs", "5", "--max-len", "64"];

#[test]
fn gradcheck_passes() {
    let o = enetype(&["gradcheck", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("seed 7: max relative error"));
}

#[test]
fn version_names_checkpoint_format() {
    let o = enetype(&["--version"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("checkpoint format 1"));
}

#[test]
fn usage_errors() {
    let o = enetype(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
    assert!(stdout(&o).is_empty());
    assert_eq!(enetype(&["eval", "--score-extra", "sometimes"]).status.code(), Some(1));
    assert_eq!(enetype(&["train", "--taxonomy", "x"]).status.code(), Some(1), "missing --output");
}

#[test]
fn missing_path_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let missing = p(dir.path(), "nope/taxonomy.tsv");
    let o = enetype(&["train", "--taxonomy", &missing, "-o", &p(dir.path(), "m.ckpt")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(&missing));
}

#[test]
fn vote_writes_voted_predictions() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("links.tsv"), "g1\ten\t1\ng1\tde\t7\ng1\tfr\t3\ng2\ten\t2\n").unwrap();
    std::fs::write(
        dir.path().join("preds.jsonl"),
        concat!(
            r#"{"lang":"en","pageid":"1","labels":["1.1"],"scores":{"1.1":0.9},"fallback":false}"#, "\n",
            r#"{"lang":"de","pageid":"7","labels":["1.1","1.2"],"scores":{},"fallback":false}"#, "\n",
            r#"{"lang":"fr","pageid":"3","labels":["1.2","1.3"],"scores":{},"fallback":false}"#, "\n",
            r#"{"lang":"en","pageid":"2","labels":["2"],"scores":{},"fallback":false}"#, "\n",
        ),
    )
    .unwrap();
    let o = enetype(&["vote", "--links", &p(dir.path(), "links.tsv"), "--pred", &p(dir.path(), "preds.jsonl")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 4);
    for l in &lines {
        if l["pageid"] == "2" {
            assert_eq!(l["labels"], serde_json::json!(["2"]));
            assert_eq!(l["voted"], false);
        } else {
            // counts 1.1:2, 1.2:2, 1.3:1, mean 5/3
            assert_eq!(l["labels"], serde_json::json!(["1.1", "1.2"]));
            assert_eq!(l["voted"], true);
            assert_eq!(l["tally"]["1.3"], 1);
        }
    }
    let strict = enetype(&["vote", "--links", &p(dir.path(), "links.tsv"), "--pred", &p(dir.path(), "preds.jsonl"), "--strict-vote"]);
    assert_eq!(strict.status.code(), Some(0));
    assert!(stdout(&strict).contains(r#""labels":["1.1","1.2"]"#));
}

#[test]
fn stats_and_histogram() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), 10);
    let o = enetype(&["stats", "--pages", &p(dir.path(), "pages"), "--links", &p(dir.path(), "links.tsv"), "--format", "tsv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "lang\tpages\tlinked\tratio\nxa\t10\t10\t100.0\nxb\t10\t10\t100.0\n");

    let empty = tempfile::tempdir().unwrap();
    let o = enetype(&["stats", "--pages", &empty.path().display().to_string()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);

    let o = enetype(&["histogram", "--labels", &p(dir.path(), "labels.tsv"), "--top", "3", "--format", "tsv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 4);
    let counts: Vec<u64> = text.lines().skip(1).map(|l| l.split('\t').nth(1).unwrap().parse().unwrap()).collect();
    assert!(counts.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn config_file_reproduces_runs() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), 20);
    let config = serde_json::json!({
        "taxonomy": p(dir.path(), "taxonomy.tsv"),
        "pages": p(dir.path(), "pages"),
        "labels": p(dir.path(), "labels.tsv"),
        "vocab-size": 1024,
        "embed-dim": 8,
        "hidden-dim": 16,
        "epochs": 3,
        "seed": 5,
    });
    std::fs::write(dir.path().join("run.json"), config.to_string()).unwrap();
    let cfg = p(dir.path(), "run.json");
    for name in ["a.ckpt", "b.ckpt"] {
        let o = enetype(&["train", "--config", &cfg, "-o", &p(dir.path(), name)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let a = std::fs::read(dir.path().join("a.ckpt")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.ckpt")).unwrap());
    // command line beats the file
    let o = enetype(&["train", "--config", &cfg, "--seed", "6", "-o", &p(dir.path(), "c.ckpt")]);
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(a, std::fs::read(dir.path().join("c.ckpt")).unwrap());

    std::fs::write(dir.path().join("bad.json"), r#"{"epoch": 3}"#).unwrap();
    let o = enetype(&["train", "--config", &p(dir.path(), "bad.json"), "-o", &p(dir.path(), "d.ckpt")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn predict_rejects_other_taxonomy() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), 10);
    let common = ["--taxonomy", &p(dir.path(), "taxonomy.tsv"), "--pages", &p(dir.path(), "pages"), "--labels", &p(dir.path(), "labels.tsv")];
    let o = enetype(&[&["train"][..], &common, &SMALL, &["-o", &p(dir.path(), "m.ckpt")]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let other = std::fs::read_to_string(dir.path().join("taxonomy.tsv")).unwrap().replace("2.1.2.1\t1", "2.1.2.1\t0");
    std::fs::write(dir.path().join("other.tsv"), other).unwrap();
    let o = enetype(&["predict", "--taxonomy", &p(dir.path(), "other.tsv"), "--pages", &p(dir.path(), "pages"), "--checkpoint", &p(dir.path(), "m.ckpt")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("taxonomy"), "{}", stderr(&o));
}

#[test]
fn diverging_training_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), 10);
    let common = ["--taxonomy", &p(dir.path(), "taxonomy.tsv"), "--pages", &p(dir.path(), "pages"), "--labels", &p(dir.path(), "labels.tsv")];
    let o = enetype(&[&["train"][..], &common, &SMALL, &["--learning-rate", "1e300", "-o", &p(dir.path(), "m.ckpt")]].concat());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(!dir.path().join("m.ckpt").exists());
}

#[test]
fn eval_reports_per_language() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("gold.tsv"), "en\t1\t1.1\nen\t2\t1.2,1.3\nde\t5\t1.1\n").unwrap();
    std::fs::write(
        dir.path().join("p.jsonl"),
        concat!(
            r#"{"lang":"en","pageid":"1","labels":["1.1"]}"#, "\n",
            r#"{"lang":"en","pageid":"2","labels":["1.3","1.4"]}"#, "\n",
            r#"{"lang":"en","pageid":"9","labels":["1.4"]}"#, "\n",
        ),
    )
    .unwrap();
    let args = ["eval", "--labels", &p(dir.path(), "gold.tsv"), "--pred", &p(dir.path(), "p.jsonl"), "--format", "tsv"];
    let o = enetype(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("eval\tde\t0.000000\t0.000000\t0.000000"));
    assert!(text.contains("eval\ten\t0.666667\t0.666667\t0.666667"));
    let o = enetype(&[&args[..], &["--score-extra", "fp"]].concat());
    assert!(stdout(&o).contains("eval\ten\t0.500000\t0.666667\t0.571429"));
}

#[test]
fn vectors_feed_the_head() {
    use enetype::vectors::{write_sidecar, VectorTable};
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), 10);
    let corpus = enetype::corpus::load_corpus(&dir.path().join("pages"), None, Default::default()).unwrap();
    let keys: Vec<_> = corpus.values().flatten().map(|p| p.key()).collect();
    let rows = (0..keys.len()).map(|i| (0..6).map(|j| ((i * 7 + j) % 5) as f32 / 5.0).collect()).collect();
    VectorTable { dim: 6, rows }.write(std::fs::File::create(dir.path().join("v.hvec")).unwrap()).unwrap();
    write_sidecar(std::fs::File::create(dir.path().join("v.tsv")).unwrap(), &keys).unwrap();
    let vec_args = ["--vectors", &p(dir.path(), "v.hvec"), "--vector-ids", &p(dir.path(), "v.tsv")];
    let common = ["--taxonomy", &p(dir.path(), "taxonomy.tsv"), "--pages", &p(dir.path(), "pages"), "--labels", &p(dir.path(), "labels.tsv")];
    let o = enetype(&[&["train"][..], &common, &vec_args, &["--epochs", "3", "-o", &p(dir.path(), "m.ckpt")]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = enetype(&[&["predict"][..], &common[..4], &vec_args, &["--checkpoint", &p(dir.path(), "m.ckpt")]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 20);
    // a checkpoint without encoder cannot read raw text
    let o = enetype(&[&["predict"][..], &common[..4], &["--checkpoint", &p(dir.path(), "m.ckpt")]].concat());
    assert_eq!(o.status.code(), Some(2));
}
