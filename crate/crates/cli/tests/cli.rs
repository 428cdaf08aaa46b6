//! End-to-end checks of the `docpipe` binary: subcommands, formats and
//! exit codes.

use std::path::Path;
use std::process::{Command, Output};

use docpipe::ingest::write_conversion_record;

fn docpipe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_docpipe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const STUB_RULES: &str = "\
(?i)lorem\ten\t0.95
(?i)bonjour\tfr\t0.97
(?i)hallo\tde\t0.92
";

fn long_marked(marker: &str) -> String {
    format!("{marker} ").repeat(30)
}

fn write_mini_wet(path: &Path) {
    let mut out = Vec::new();
    let lorem = long_marked("lorem ipsum dolor");
    let bonjour = long_marked("bonjour tout le monde");
    let hallo = long_marked("hallo welt wie geht");
    let bodies = [
        format!("Home\nLogin\n{lorem}\n{lorem}\nContact"),
        format!("{lorem}\n{lorem}\n{lorem}"),
        format!("{bonjour}\n{bonjour}"),
        format!("{lorem}\n{lorem}\n{bonjour}\n{bonjour}\n{hallo}\n{hallo}"),
        "a\nb\nc\nd\ne\nf".to_string(),
    ];
    for (i, body) in bodies.iter().enumerate() {
        write_conversion_record(
            &mut out,
            &format!("http://site{i}.example/"),
            &format!("<urn:uuid:00000000-0000-0000-0000-00000000000{i}>"),
            "2021-11-01T00:00:00Z",
            body.as_bytes(),
        )
        .unwrap();
    }
    std::fs::write(path, out).unwrap();
}

struct Workspace {
    _dir: tempfile::TempDir,
    wet: std::path::PathBuf,
    model: std::path::PathBuf,
    blocklist: std::path::PathBuf,
    output: std::path::PathBuf,
}

fn workspace() -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let wet = dir.path().join("shard.warc.wet");
    write_mini_wet(&wet);
    let model = dir.path().join("rules.tsv");
    std::fs::write(&model, STUB_RULES).unwrap();
    let blocklist = dir.path().join("ut1");
    std::fs::create_dir_all(blocklist.join("adult")).unwrap();
    std::fs::write(blocklist.join("adult/domains"), "site1.example\n").unwrap();
    let output = dir.path().join("corpus");
    Workspace {
        _dir: dir,
        wet,
        model,
        blocklist,
        output,
    }
}

fn run_pipeline(ws: &Workspace) -> Output {
    docpipe(&[
        "pipeline",
        "--input",
        ws.wet.to_str().unwrap(),
        "--model",
        ws.model.to_str().unwrap(),
        "--blocklist",
        ws.blocklist.to_str().unwrap(),
        "--output",
        ws.output.to_str().unwrap(),
        "--workers",
        "2",
    ])
}

#[test]
fn pipeline_writes_corpus_and_report() {
    let ws = workspace();
    let out = run_pipeline(&ws);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["records_in"], 5);
    assert_eq!(report["documents_out"]["en"], 2);
    assert_eq!(report["documents_out"]["fr"], 1);
    assert_eq!(report["multilingual_documents_out"], 1);
    assert!(ws.output.join("en_meta.jsonl").is_file());
    assert!(ws.output.join("fr_meta.jsonl").is_file());
    assert!(ws.output.join("multi_meta.jsonl").is_file());
}

#[test]
fn pipeline_honors_config_file_with_flag_overrides() {
    let ws = workspace();
    let conf = ws.wet.parent().unwrap().join("pipeline.conf");
    std::fs::write(
        &conf,
        format!(
            "input={}\nmodel={}\nblocklist={}\noutput={}\nworkers=1\n",
            ws.wet.display(),
            ws.model.display(),
            ws.blocklist.display(),
            ws.output.display(),
        ),
    )
    .unwrap();
    let override_out = ws.wet.parent().unwrap().join("corpus2");
    let out = docpipe(&[
        "pipeline",
        "--config",
        conf.to_str().unwrap(),
        "--output",
        override_out.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(override_out.join("en_meta.jsonl").is_file());
    assert!(!ws.output.exists(), "config output must be overridden");
}

#[test]
fn pipeline_missing_input_exits_one() {
    let out = docpipe(&[
        "pipeline",
        "--input",
        "/nonexistent/shard.wet",
        "--model",
        "/nonexistent/rules.tsv",
        "--blocklist",
        "/nonexistent/ut1",
        "--output",
        "/tmp/never",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pipeline_error_rate_exits_two() {
    let ws = workspace();
    // Append a record with an invalid UTF-8 body: 1 of 6 records errors.
    let mut bytes = std::fs::read(&ws.wet).unwrap();
    write_conversion_record(
        &mut bytes,
        "http://broken.example/",
        "<urn:uuid:00000000-0000-0000-0000-00000000000f>",
        "2021-11-01T00:00:00Z",
        b"broken \xff body",
    )
    .unwrap();
    std::fs::write(&ws.wet, bytes).unwrap();
    let out = docpipe(&[
        "pipeline",
        "--input",
        ws.wet.to_str().unwrap(),
        "--model",
        ws.model.to_str().unwrap(),
        "--blocklist",
        ws.blocklist.to_str().unwrap(),
        "--output",
        ws.output.to_str().unwrap(),
        "--max-error-rate",
        "0.0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dedup_prints_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("lines.txt");
    let output = dir.path().join("dedup.txt");
    std::fs::write(&input, "a\nb\na\nc\nb\n").unwrap();
    let out = docpipe(&[
        "dedup",
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["input_lines"], 5);
    assert_eq!(report["kept_lines"], 3);
    assert_eq!(report["removed_lines"], 2);
    assert_eq!(std::fs::read_to_string(&output).unwrap(), "a\nb\nc\n");
}

#[test]
fn stats_reports_over_pipeline_output() {
    let ws = workspace();
    assert!(run_pipeline(&ws).status.success());

    let out = docpipe(&["stats", "size", "--corpus", ws.output.to_str().unwrap()]);
    assert!(out.status.success());
    let size: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(size["languages"]["en"]["documents"], 2);

    let out = docpipe(&[
        "stats",
        "annotations",
        "--corpus",
        ws.output.to_str().unwrap(),
        "--format",
        "tsv",
    ]);
    assert!(out.status.success());
    let tsv = stdout(&out);
    assert!(tsv.starts_with("annotation\tdocuments\n"));
    assert!(tsv.contains("total\t4"));

    let out = docpipe(&[
        "stats",
        "term",
        "--corpus",
        ws.output.to_str().unwrap(),
        "--term",
        "LOREM",
    ]);
    assert!(out.status.success());
    let term: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(term["occurrences"].as_u64().unwrap() >= 60);

    let out = docpipe(&[
        "stats",
        "cooccurrence",
        "--corpus",
        ws.output.to_str().unwrap(),
        "--threshold",
        "0",
    ]);
    assert!(out.status.success());
    let co: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(co["documents"], 1);
    assert_eq!(co["total_pair_increments"], 3);

    let out = docpipe(&[
        "stats",
        "clean-length",
        "--corpus",
        ws.output.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let lengths: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(lengths["annotated"]["documents"].as_u64().unwrap() >= 1);
}

#[test]
fn carbon_matches_published_figures() {
    let out = docpipe(&[
        "carbon",
        "--hours",
        "1",
        "--cpus",
        "2",
        "--cpu-watts",
        "125",
        "--dram-watts",
        "20",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["kwh"].as_f64().unwrap() - 0.4266).abs() < 1e-9);
    assert!((v["co2e_g"].as_f64().unwrap() - 16.483824).abs() < 1e-6);
}

#[test]
fn usage_errors_exit_one() {
    let out = docpipe(&["stats", "bogus-report", "--corpus", "/tmp"]);
    assert_eq!(out.status.code(), Some(1));
    let out = docpipe(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}
