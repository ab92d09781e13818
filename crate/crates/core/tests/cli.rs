use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lumpnet::io::{load_network, load_valuation};
use serde_json::Value;

fn lumpnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lumpnet")).args(args).output().unwrap()
}

/// Runs a whitespace-separated command line (temp paths contain no spaces).
fn sh(line: &str) -> Output {
    lumpnet(&line.split_whitespace().collect::<Vec<_>>())
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Dir(tempfile::TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }

    fn file(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let path = self.file(name);
        fs::write(&path, text).unwrap();
        path
    }
}

const FIG2: &str = r#"{"n": 8, "mode": "ctmc", "edges": [
  [0, 1, 2], [0, 2, 1], [0, 3, 2], [1, 4, 3], [1, 5, 1], [2, 4, 3], [2, 6, 4],
  [3, 5, 1], [3, 6, 2], [4, 7, 1], [5, 7, 5], [6, 7, 1], [7, 0, 4]]}"#;

#[test]
fn identity_reduce_reproduces_the_input() {
    let d = Dir::new();
    let net = d.write(
        "net.json",
        r#"{"layers": [
          {"weights": [[1.0, 0.0], [0.0, 1.0]], "bias": [0.5, -0.5], "activation": {"kind": "relu"}},
          {"weights": [[2.0], [3.0]], "bias": [0.0], "activation": {"kind": "relu"}}]}"#,
    );
    let (out, rep) = (d.file("out.json"), d.file("rep.json"));
    let o = sh(&format!(
        "reduce --input {} --output {} --mode proportional --tol 1e-9 --report {}",
        p(&net),
        p(&out),
        p(&rep)
    ));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(load_network(&out).unwrap(), load_network(&net).unwrap());
    let report: Value = serde_json::from_str(&fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(report["report"]["neurons_removed"], 0);
    assert!(report["report"].get("detection_seconds").is_none());
}

#[test]
fn reduce_then_verify_and_check() {
    let d = Dir::new();
    let (net, red, rep) = (d.file("net.json"), d.file("red.json"), d.file("rep.json"));
    let o = sh(&format!("gen --widths 8,20,16,4 --layer 2 --count 5 --seed 3 --output {}", p(&net)));
    assert_eq!(code(&o), 0);
    let o = lumpnet(&["reduce", "--input", p(&net), "--output", p(&red), "--report", p(&rep)]);
    assert_eq!(code(&o), 0);
    assert_eq!(load_network(&red).unwrap().widths(), vec![8, 20, 11, 4]);

    let o = sh(&format!("verify --a {} --b {} --samples 1000 --seed 7 --tol 1e-6", p(&net), p(&red)));
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("max_deviation") && stdout.contains("argmax_agreement 1"));

    // The report written by reduce is accepted by check.
    let o = lumpnet(&["check", "--input", p(&net), "--lumping", p(&rep), "--tol", "1e-9"]);
    assert_eq!(code(&o), 0);
    // ...but not against a different network.
    let other = d.file("other.json");
    sh(&format!("gen --widths 8,20,16,4 --layer 2 --count 5 --seed 4 --output {}", p(&other)));
    assert_eq!(code(&lumpnet(&["check", "--input", p(&other), "--lumping", p(&rep)])), 1);
    // Shape mismatch is an input error.
    assert_eq!(code(&lumpnet(&["check", "--input", p(&red), "--lumping", p(&rep)])), 2);
}

#[test]
fn verify_fails_on_different_networks() {
    let d = Dir::new();
    let (a, b) = (d.file("a.json"), d.file("b.json"));
    lumpnet(&["gen", "--widths", "4,6,3", "--seed", "1", "--output", p(&a)]);
    lumpnet(&["gen", "--widths", "4,6,3", "--seed", "2", "--output", p(&b)]);
    assert_eq!(code(&lumpnet(&["verify", "--a", p(&a), "--b", p(&b), "--seed", "1"])), 1);
    let c = d.file("c.json");
    lumpnet(&["gen", "--widths", "5,6,3", "--seed", "2", "--output", p(&c)]);
    assert_eq!(code(&lumpnet(&["verify", "--a", p(&a), "--b", p(&c), "--seed", "1"])), 2);
}

#[test]
fn eval_matches_the_library() {
    let d = Dir::new();
    let net = d.file("net.json");
    lumpnet(&["gen", "--widths", "3,5,2", "--seed", "9", "--output", p(&net)]);
    let x = d.write("x.json", "[0.25, -0.5, 1]\n");
    let y = d.file("y.json");
    assert_eq!(code(&lumpnet(&["eval", "--input", p(&net), "--x", p(&x), "--output", p(&y)])), 0);
    let expected = lumpnet::forward(&load_network(&net).unwrap(), &[0.25, -0.5, 1.0]).unwrap();
    assert_eq!(load_valuation(&y).unwrap(), expected);
    let o = lumpnet(&["eval", "--input", p(&net), "--x", p(&x)]);
    assert_eq!(fs::read(&y).unwrap(), o.stdout);

    let short = d.write("short.json", "[1]");
    assert_eq!(code(&lumpnet(&["eval", "--input", p(&net), "--x", p(&short)])), 2);
}

#[test]
fn input_errors_exit_with_two() {
    let d = Dir::new();
    let bad = d.write("bad.json", "{\"layers\": [");
    let out = d.file("out.json");
    let o = lumpnet(&["reduce", "--input", p(&bad), "--output", p(&out)]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
    let alpha = d.write(
        "alpha.json",
        r#"{"layers": [{"weights": [[1]], "bias": [0], "activation": {"kind": "leaky_relu"}}]}"#,
    );
    let o = lumpnet(&["reduce", "--input", p(&alpha), "--output", p(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("activation.alpha"));
    assert_eq!(code(&lumpnet(&["reduce", "--input", p(&d.file("missing.json")), "--output", p(&out)])), 2);
    assert_eq!(code(&lumpnet(&["reduce", "--input", p(&bad), "--output", p(&out), "--mode", "fuzzy"])), 2);
}

#[test]
fn seed_is_mandatory() {
    let d = Dir::new();
    let net = d.file("net.json");
    assert_eq!(code(&lumpnet(&["gen", "--widths", "3,4,2", "--output", p(&net)])), 2);
    assert_eq!(code(&lumpnet(&["verify", "--a", p(&net), "--b", p(&net)])), 2);
    assert_eq!(code(&lumpnet(&["bench", "fig3"])), 2);
    assert_eq!(code(&lumpnet(&["relax", "--input", p(&net), "--layer", "1", "--output", p(&net)])), 2);
}

#[test]
fn relax_recovers_planted_combinations() {
    let d = Dir::new();
    let (net, truth, out, rep) =
        (d.file("net.json"), d.file("truth.json"), d.file("out.json"), d.file("rep.json"));
    let o = sh(&format!(
        "gen --widths 6,12,3 --kind combo --k 2 --count 3 --lo 0.5 --hi 2 --seed 11 --output {} --truth {}",
        p(&net),
        p(&truth)
    ));
    assert_eq!(code(&o), 0);
    let o = sh(&format!(
        "relax --input {} --layer 1 --k 2 --tol 1e-9 --output {} --sign-samples 500 --seed 5 --report {}",
        p(&net),
        p(&out),
        p(&rep)
    ));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let truth: Value = serde_json::from_str(&fs::read_to_string(&truth).unwrap()).unwrap();
    let report: Value = serde_json::from_str(&fs::read_to_string(&rep).unwrap()).unwrap();
    let planted = truth["eliminations"].as_array().unwrap();
    let found = report["eliminations"].as_array().unwrap();
    assert_eq!(found.len(), planted.len());
    for (f, t) in found.iter().zip(planted) {
        assert_eq!(f["neuron"], t["neuron"]);
        for (a, b) in f["donors"].as_array().unwrap().iter().zip(t["donors"].as_array().unwrap()) {
            assert_eq!(a[0], b[0]);
            assert!((a[1].as_f64().unwrap() - b[1].as_f64().unwrap()).abs() <= 1e-6);
        }
    }
    assert_eq!(report["sign_reports"].as_array().unwrap().len(), planted.len());
    assert_eq!(load_network(&out).unwrap().widths(), vec![6, 9, 3]);
}

#[test]
fn ctmc_pipeline() {
    let d = Dir::new();
    let chain = d.write("chain.json", FIG2);
    let solved = d.write(
        "chain8.json",
        r#"{"blocks": [
          {"representative": 0, "members": [0], "rho": [1]},
          {"representative": 1, "members": [1, 2, 3], "rho": [1, 2, 1]},
          {"representative": 4, "members": [4, 5, 6], "rho": [1, 3, 1]},
          {"representative": 7, "members": [7], "rho": [1]}]}"#,
    );
    assert_eq!(code(&lumpnet(&["ctmc", "check", "--input", p(&chain), "--partition", p(&solved)])), 0);
    let printed =
        d.write("printed.json", &fs::read_to_string(&solved).unwrap().replace("[1, 3, 1]", "[1, 2, 1]"));
    assert_eq!(code(&lumpnet(&["ctmc", "check", "--input", p(&chain), "--partition", p(&printed)])), 1);

    let (q, part) = (d.file("q.json"), d.file("part.json"));
    let o = sh(&format!(
        "ctmc reduce --input {} --mode exact --output {} --partition {}",
        p(&chain),
        p(&q),
        p(&part)
    ));
    assert_eq!(code(&o), 0);
    assert_eq!(code(&lumpnet(&["ctmc", "check", "--input", p(&chain), "--partition", p(&part)])), 0);
    let quotient: Value = serde_json::from_str(&fs::read_to_string(&q).unwrap()).unwrap();
    assert_eq!(quotient["n"], 7);
    assert_eq!(quotient["mode"], "graph");
    // The quotient is itself a valid chain document.
    let o = lumpnet(&["ctmc", "reduce", "--input", p(&q), "--mode", "exact"]);
    assert_eq!(code(&o), 0);

    let bad = d.write("bad.json", r#"{"n": 2, "mode": "ctmc", "edges": [[0, 1, -1]]}"#);
    assert_eq!(code(&lumpnet(&["ctmc", "reduce", "--input", p(&bad)])), 2);
}

#[test]
fn identical_arguments_give_identical_files() {
    let d = Dir::new();
    let run = |tag: &str| {
        let net = d.file(&format!("net{tag}.json"));
        let red = d.file(&format!("red{tag}.json"));
        let rep = d.file(&format!("rep{tag}.json"));
        let csv = d.file(&format!("fig3{tag}.csv"));
        sh(&format!("gen --widths 6,16,12,3 --layer 1 --count 4 --seed 21 --output {}", p(&net)));
        lumpnet(&["reduce", "--input", p(&net), "--output", p(&red), "--report", p(&rep)]);
        sh(&format!("bench fig3 --seed 2 --seeds 2 --fractions 0,0.25 --samples 50 --output {}", p(&csv)));
        [net, red, rep, csv].map(|f| fs::read(f).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn bench_csv_shape() {
    let o = sh("bench fig3 --seed 0 --seeds 2 --ks 2,3 --fractions 0,0.1 --samples 40");
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,fraction,seed,agreement,max_deviation");
    assert_eq!(lines.len(), 1 + 2 * 2 * 2);
    for line in &lines[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 5);
        if cols[1] == "0" {
            assert_eq!((cols[3], cols[4]), ("1", "0"));
        }
    }
}
