use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_ebano");

fn ebano(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("EBANO_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

fn write_docs(dir: &Path, docs: &[(&str, &str)]) -> PathBuf {
    let input = dir.join("input");
    fs::create_dir_all(&input).unwrap();
    for (name, text) in docs {
        fs::write(input.join(name), text).unwrap();
    }
    input
}

#[test]
fn single_file_writes_two_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_docs(tmp.path(), &[("review.txt", "This film was very awful.")]);
    let out = tmp.path().join("out");
    let run = ebano(&["explain", "--out", s(&out), s(&input.join("review.txt"))]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(listing(&out), ["review.explanation.html", "review.explanation.json"]);
    let json = fs::read_to_string(out.join("review.explanation.json")).unwrap();
    assert!(json.contains("\"schema_version\": \"1\""));
}

#[test]
fn empty_document_is_a_partial_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_docs(
        tmp.path(),
        &[("a.txt", "Awful plot."), ("b.txt", "   \n"), ("c.txt", "A bad, bad movie.")],
    );
    let out = tmp.path().join("out");
    let run = ebano(&["explain", "--out", s(&out), s(&input)]);
    assert_eq!(code(&run), 2);
    assert_eq!(listing(&out).len(), 4);
    assert!(String::from_utf8_lossy(&run.stderr).contains("b: skipped"));
}

#[test]
fn unknown_method_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_docs(tmp.path(), &[("a.txt", "fine")]);
    let run = ebano(&["explain", "--methods", "pos,lime", s(&input)]);
    assert_eq!(code(&run), 1);
    assert!(String::from_utf8_lossy(&run.stderr).contains("unknown method `lime`"));

    let run = ebano(&["explain", "--threshold", "1.5", s(&input)]);
    assert_eq!(code(&run), 1);
    let run = ebano(&["explain", "--bogus", s(&input)]);
    assert_eq!(code(&run), 1);
}

#[test]
fn global_over_two_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_docs(
        tmp.path(),
        &[
            ("one.txt", "This film was very awful. I have never seen such a bad movie."),
            ("two.txt", "What a bad script. The acting is awful too."),
        ],
    );
    let reports = tmp.path().join("reports");
    assert_eq!(code(&ebano(&["explain", "--out", s(&reports), s(&input)])), 0);
    let run = ebano(&["global", "--out", s(&reports), s(&reports)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let global: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(reports.join("global.json")).unwrap()).unwrap();
    assert_eq!(global["corpus_size"], 2);
    assert_eq!(global["skipped_documents"], 0);
    assert_eq!(global["lemma_counting"], "per_occurrence");
    assert_eq!(global["classes"][0]["class"], "neg");
}

#[test]
fn global_without_mlwe_is_an_empty_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_docs(tmp.path(), &[("a.txt", "Awful plot."), ("b.txt", "Bad cast.")]);
    let reports = tmp.path().join("reports");
    assert_eq!(
        code(&ebano(&["explain", "--methods", "pos,sentence", "--out", s(&reports), s(&input)])),
        0
    );
    let run = ebano(&["global", "--out", s(&reports), s(&reports)]);
    assert_eq!(code(&run), 1);
    assert!(!reports.join("global.json").exists());
}

#[test]
fn mixed_schema_versions() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_docs(tmp.path(), &[("a.txt", "This film was very awful. Bad acting.")]);
    let reports = tmp.path().join("reports");
    assert_eq!(code(&ebano(&["explain", "--out", s(&reports), s(&input)])), 0);
    let good = fs::read_to_string(reports.join("a.explanation.json")).unwrap();
    fs::write(
        reports.join("old.explanation.json"),
        good.replace("\"schema_version\": \"1\"", "\"schema_version\": \"0\""),
    )
    .unwrap();
    let run = ebano(&["global", "--out", s(&reports), s(&reports)]);
    assert_eq!(code(&run), 2);
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("old.explanation.json"), "{stderr}");
    assert!(reports.join("global.json").exists());
}

#[test]
fn external_model_matches_in_process_reference() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_docs(
        tmp.path(),
        &[
            ("a.txt", "This film was very awful. I have never seen such a bad movie."),
            ("b.txt", "A wonderful, delightful surprise."),
        ],
    );
    let direct = tmp.path().join("direct");
    let piped = tmp.path().join("piped");
    assert_eq!(code(&ebano(&["explain", "--out", s(&direct), s(&input)])), 0);
    let model = format!("cmd:{BIN} serve-reference");
    let run = ebano(&["explain", "--model", &model, "--jobs", "2", "--out", s(&piped), s(&input)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    for name in listing(&direct) {
        assert_eq!(
            fs::read(direct.join(&name)).unwrap(),
            fs::read(piped.join(&name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn missing_external_model_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_docs(tmp.path(), &[("a.txt", "text")]);
    let run = ebano(&["explain", "--model", "cmd:/no/such/binary", s(&input)]);
    assert_eq!(code(&run), 1);
}

#[test]
fn data_dir_env_supplies_lexicons() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    fs::create_dir_all(&data).unwrap();
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data");
    let input = write_docs(tmp.path(), &[("a.txt", "This film was very awful.")]);
    let out = tmp.path().join("out");
    let run_with_data = || {
        Command::new(BIN)
            .args(["explain", "--methods", "pos", "--out", s(&out), s(&input)])
            .env("EBANO_DATA_DIR", &data)
            .output()
            .unwrap()
    };

    // the directory replaces the shipped one wholesale
    fs::write(data.join("antonyms.json"), r#"{"awful": ["splendid"]}"#).unwrap();
    let run = run_with_data();
    assert_eq!(code(&run), 1);
    assert!(String::from_utf8_lossy(&run.stderr).contains("pos_lexicon.json"));

    for name in ["pos_lexicon.json", "lemma_exceptions.json"] {
        fs::copy(shipped.join(name), data.join(name)).unwrap();
    }
    let run = run_with_data();
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let json = fs::read_to_string(out.join("a.explanation.json")).unwrap();
    assert!(json.contains("This film was very splendid."));
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_docs(tmp.path(), &[("a.txt", "Awful. Bad.")]);
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "methods = [\"sentence\"]\nseed = 5\nperturbations = [\"removal\"]\n").unwrap();
    let out = tmp.path().join("out");
    let run = ebano(&["explain", "--config", s(&cfg), "--seed", "11", "--out", s(&out), s(&input)]);
    assert_eq!(code(&run), 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("a.explanation.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 11);
    assert_eq!(report["config"]["methods"], serde_json::json!(["sentence"]));
    assert!(report["explanations"]["pos"].as_array().unwrap().is_empty());
}

#[test]
fn jsonl_input_and_class_override() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_docs(
        tmp.path(),
        &[("c.jsonl", "{\"id\": \"r/1\", \"text\": \"Awful film.\"}\n{\"id\": \"r2\", \"text\": \"Fine film.\"}\n")],
    );
    let out = tmp.path().join("out");
    let run = ebano(&["explain", "--classes", "negative,positive", "--out", s(&out), s(&input)]);
    assert_eq!(code(&run), 0);
    assert!(out.join("r_1.explanation.json").exists());
    let json = fs::read_to_string(out.join("r2.explanation.json")).unwrap();
    assert!(json.contains("\"negative\""));

    let run = ebano(&["explain", "--classes", "a,b,c", "--out", s(&out), s(&input)]);
    assert_eq!(code(&run), 1);
}
