//! End-to-end tests of the corefkit binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_corefkit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).to_string()
}

const CORPUS: &str = "#begin document (cli/doc); part 000\n\
cli/doc 0 0 Judy XX * - - - - (PERSON* (0\n\
cli/doc 0 1 Muller XX * - - - - *) 0)\n\
cli/doc 0 2 said XX * - - - - * -\n\
cli/doc 0 3 she XX * - - - - * (0)\n\
\n\
#end document\n";

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Workspace {
        Workspace {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn file(&self, name: &str, content: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        fs::write(&path, content).unwrap();
        path
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("perturb"));
}

#[test]
fn perturb_is_deterministic_and_avoids_training_names() {
    let ws = Workspace::new();
    let input = ws.file("test.conll", CORPUS);
    let census = ws.file("census.txt", "GOLIA 1.0 1.0 1\nKOREWDIT 0.9 1.9 2\n");
    let first = ws.file("first.tsv", "Vendemiaire\t0.99\nFelicity\t0.01\n");
    let train = ws.file("train.txt", "Dirk Clinton\n");
    let out_a = ws.path("out_a.conll");
    let out_b = ws.path("out_b.conll");

    for out in [&out_a, &out_b] {
        let result = run(&[
            "perturb",
            "--in",
            s(&input),
            "--out",
            s(out),
            "--census",
            s(&census),
            "--first-names",
            s(&first),
            "--train-names",
            s(&train),
            "--seed",
            "7",
        ]);
        assert_eq!(result.status.code(), Some(0), "{}", stderr(&result));
    }
    let text_a = fs::read_to_string(&out_a).unwrap();
    let text_b = fs::read_to_string(&out_b).unwrap();
    assert_eq!(text_a, text_b);
    // she-cluster: the first name must come from the female list
    assert!(text_a.contains("Felicity"), "{text_a}");
    assert!(!text_a.contains("Judy"));
    assert!(!text_a.contains("Muller"));
}

#[test]
fn perturb_without_seed_is_a_usage_error() {
    let ws = Workspace::new();
    let input = ws.file("test.conll", CORPUS);
    let out = run(&["perturb", "--in", s(&input), "--out", "x.conll"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_input_file_exits_one() {
    let out = run(&[
        "score",
        "--gold",
        "/nonexistent/gold.conll",
        "--pred",
        "/nonexistent/pred.conll",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("does not exist"));
}

#[test]
fn malformed_corpus_exits_two() {
    let ws = Workspace::new();
    let bad = ws.file("bad.conll", "#begin document (x); part 000\nno end marker\n");
    let out = run(&["score", "--gold", s(&bad), "--pred", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scoring_identical_files_gives_perfect_f1() {
    let ws = Workspace::new();
    let gold = ws.file("gold.conll", CORPUS);
    let stats = ws.path("stats.txt");
    let out = run(&[
        "score",
        "--gold",
        s(&gold),
        "--pred",
        s(&gold),
        "--stats-out",
        s(&stats),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("conll_f1=1.00"), "{text}");
    assert!(text.contains("muc_f1=1.00"), "{text}");
    let stats_text = fs::read_to_string(&stats).unwrap();
    assert!(stats_text.contains("doc=cli/doc#0"));
    assert!(stats_text.contains("muc_pn=1"));
}

#[test]
fn randomization_on_identical_stats_gives_p_one() {
    let ws = Workspace::new();
    let gold = ws.file("gold.conll", CORPUS);
    let stats = ws.path("stats.txt");
    run(&[
        "score",
        "--gold",
        s(&gold),
        "--pred",
        s(&gold),
        "--stats-out",
        s(&stats),
    ]);
    let out = run(&[
        "sigtest",
        "randomization",
        "--stats-a",
        s(&stats),
        "--stats-b",
        s(&stats),
        "--rounds",
        "999",
        "--seed",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out).trim(), "p=1.0000");
}

#[test]
fn mcnemar_prints_four_decimals() {
    let out = run(&["sigtest", "mcnemar", "--b", "10", "--c", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "p=0.0386");
}

#[test]
fn gap_score_reports_per_gender_f1() {
    let ws = Workspace::new();
    let header =
        "ID\tText\tPronoun\tPronoun-offset\tA\tA-offset\tA-coref\tB\tB-offset\tB-coref\tURL";
    let gold = ws.file(
        "gap.tsv",
        &format!(
            "{header}\n\
g1\tAnna met Bella before she left\tshe\t22\tAnna\t0\tTRUE\tBella\t9\tFALSE\thttp://x\n\
g2\tDirk met Hans before he left\the\t21\tDirk\t0\tTRUE\tHans\t9\tFALSE\thttp://x\n"
        ),
    );
    let pred = ws.file("pred.tsv", "g1\tTRUE\tFALSE\ng2\tTRUE\tFALSE\n");
    let out = run(&["gap-score", "--gold", s(&gold), "--pred", s(&pred)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("male_f1=1.0000"), "{text}");
    assert!(text.contains("female_f1=1.0000"), "{text}");
    assert!(text.contains("bias=1.0000"), "{text}");
}

#[test]
fn leakage_of_a_corpus_with_itself_is_one() {
    let ws = Workspace::new();
    let corpus = ws.file("c.conll", CORPUS);
    let out = run(&["leakage", "--train", s(&corpus), "--test", s(&corpus)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out).trim(), "leakage_rate=1.0000");
}

#[test]
fn train_toy_logs_numeric_columns() {
    let out = run(&["train-toy", "--iterations", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with('#'));
    for (i, line) in lines[1..].iter().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(fields.len(), 4, "{line}");
        assert_eq!(fields[0], i.to_string());
        for value in &fields[1..] {
            value.parse::<f64>().unwrap();
        }
    }
}

#[test]
fn grad_check_passes_and_reports_groups() {
    let out = run(&["grad-check"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("group=embed"), "{text}");
    assert!(text.contains("max_relative_error="), "{text}");
}
