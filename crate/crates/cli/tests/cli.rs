use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

use qmarginal_cli::doc::{ChannelDoc, ChannelReductionDoc, KrausDoc, MatrixDoc, SolutionDoc, StateDoc};

fn qm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmarginal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_json(dir: &TempDir, name: &str, v: &Value) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, serde_json::to_string(v).unwrap()).unwrap();
    path
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn real(rows: Vec<Vec<f64>>) -> Value {
    let n = rows.len();
    let m = rows[0].len();
    json!({ "re": rows, "im": vec![vec![0.0; m]; n] })
}

fn diag(d: &[f64]) -> Value {
    let rows = (0..d.len())
        .map(|i| (0..d.len()).map(|j| if i == j { d[i] } else { 0.0 }).collect())
        .collect();
    real(rows)
}

fn identity_channel_choi() -> Value {
    // |Φ⟩⟨Φ| with |Φ⟩ = (|00⟩ + |11⟩)/√2
    real(vec![
        vec![0.5, 0.0, 0.0, 0.5],
        vec![0.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 0.0],
        vec![0.5, 0.0, 0.0, 0.5],
    ])
}

#[test]
fn check_ring_graph_against_uniform_pairs() {
    let dir = TempDir::new().unwrap();
    let state = dir.path().join("ring.json");
    let inst = dir.path().join("mm.json");
    assert_eq!(code(&qm(&["example", "ring-graph", "--n", "5", "-o", s(&state)])), 0);
    assert_eq!(code(&qm(&["example", "mm-klocal", "--n", "5", "--k", "2", "-o", s(&inst)])), 0);
    let doc: StateDoc = read(&state);
    assert_eq!(doc.rank, 1);
    let out = qm(&["check", s(&inst), s(&state)]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("consistent at tol"));
}

#[test]
fn check_reports_inconsistency_and_parse_errors() {
    let dir = TempDir::new().unwrap();
    let inst = write_json(
        &dir,
        "inst.json",
        &json!({ "dims": [2, 2], "constraints": [{ "subsystems": [0], "matrix": diag(&[1.0, 0.0]) }] }),
    );
    let state = write_json(&dir, "state.json", &json!({ "matrix": diag(&[0.25; 4]) }));
    let out = qm(&["check", s(&inst), s(&state)]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("constraint 0: residual 7.0711e-1"), "{}", stdout(&out));
    assert!(stdout(&out).contains("inconsistent"));

    let json_out = qm(&["check", s(&inst), s(&state), "--format", "json"]);
    let v: Value = serde_json::from_str(&stdout(&json_out)).unwrap();
    assert!((v["residuals"][0].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
    assert_eq!(v["consistent"], json!(false));

    let text = fs::read_to_string(&inst).unwrap();
    let truncated = dir.path().join("truncated.json");
    fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    let out = qm(&["check", s(&truncated), s(&state)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 1, column"), "{}", stderr(&out));

    let missing = dir.path().join("missing.json");
    assert_eq!(code(&qm(&["check", s(&missing), s(&state)])), 2);
}

#[test]
fn solve_uniform_pairs_on_four_qubits() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("mm4.json");
    let sol = dir.path().join("sol.json");
    assert_eq!(code(&qm(&["example", "mm-klocal", "--n", "4", "-o", s(&inst)])), 0);
    let out = qm(&["solve", s(&inst), "-o", s(&sol)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc: SolutionDoc = read(&sol);
    assert_eq!(doc.bounds.theorem1, 9);
    assert!(doc.rank <= 9);
    assert_eq!(doc.bounds.achieved, doc.rank);
    assert!(doc.residuals.iter().all(|&r| r <= 1e-8));
    assert!(doc.trace.windows(2).all(|w| w[0].rank_after == w[1].rank_before));
    assert!(stderr(&out).contains("rank before"));
    // the written solution checks out
    assert_eq!(code(&qm(&["check", s(&inst), s(&sol)])), 0);
}

#[test]
fn solve_without_reduction_keeps_the_feasible_point() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("mm3.json");
    let sol = dir.path().join("sol.json");
    assert_eq!(code(&qm(&["example", "mm-klocal", "--n", "3", "-o", s(&inst)])), 0);
    assert_eq!(code(&qm(&["solve", s(&inst), "--no-reduce", "-o", s(&sol)])), 0);
    let doc: SolutionDoc = read(&sol);
    assert!(doc.trace.is_empty());
    assert!(!doc.settings.reduce);
    assert_eq!(doc.rank, 8);
    assert!(doc.residuals.iter().all(|&r| r <= 1e-8));
}

#[test]
fn solve_rejects_conflicting_instance() {
    let dir = TempDir::new().unwrap();
    let inst = write_json(
        &dir,
        "conflict.json",
        &json!({ "dims": [2, 2], "constraints": [
            { "subsystems": [0], "matrix": diag(&[1.0, 0.0]) },
            { "subsystems": [0, 1], "matrix": diag(&[0.25; 4]) },
        ] }),
    );
    let sol = dir.path().join("sol.json");
    let out = qm(&["solve", s(&inst), "-o", s(&sol)]);
    assert_eq!(code(&out), 1);
    assert!(!sol.exists());
    let err = stderr(&out);
    assert!(err.contains("best residual"), "{err}");
    assert!(err.contains("plateau: yes"), "{err}");
}

#[test]
fn bounds_output() {
    let dir = TempDir::new().unwrap();
    let mm6 = dir.path().join("mm6.json");
    assert_eq!(code(&qm(&["example", "mm-klocal", "--n", "6", "-o", s(&mm6)])), 0);
    assert_eq!(stdout(&qm(&["bounds", s(&mm6)])).trim(), "theorem1: 15, barvinok: 21");

    let pure = write_json(
        &dir,
        "pure.json",
        &json!({ "dims": [2, 2], "constraints": [{ "subsystems": [0, 1], "matrix": diag(&[1.0, 0.0, 0.0, 0.0]) }] }),
    );
    assert_eq!(stdout(&qm(&["bounds", s(&pure)])).trim(), "theorem1: 1, barvinok: 5");

    let empty = write_json(&dir, "empty.json", &json!({ "dims": [2, 2], "constraints": [] }));
    assert_eq!(
        stdout(&qm(&["bounds", s(&empty)])).trim(),
        "theorem1: 0 (degenerate), barvinok: 0"
    );
    let sol = dir.path().join("sol.json");
    assert_eq!(code(&qm(&["solve", s(&empty), "--no-reduce", "-o", s(&sol)])), 0);
    let doc: SolutionDoc = read(&sol);
    let m = doc.matrix.to_hermitian().unwrap();
    assert!(m.distance(&qmarginal::numerics::HermitianMatrix::maximally_mixed(4)) < 1e-15);
}

#[test]
fn boson_sigma_examples() {
    let dir = TempDir::new().unwrap();
    let state = dir.path().join("sigma.json");
    let inst = dir.path().join("inst.json");
    let out = qm(&[
        "example", "boson-sigma", "--N", "7", "--p", "2", "-o", s(&state),
        "--instance-output", s(&inst),
    ]);
    assert_eq!(code(&out), 0);
    let doc: StateDoc = read(&state);
    assert_eq!(doc.rank, 2);
    assert_eq!(doc.particles, Some(7));
    assert_eq!(code(&qm(&["check", s(&inst), s(&state)])), 0);

    let out = qm(&["example", "boson-sigma", "--N", "6", "--p", "0"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("[2, 4]"), "{}", stderr(&out));
}

#[test]
fn sector_instance_solves() {
    let dir = TempDir::new().unwrap();
    let state = dir.path().join("sigma.json");
    let inst = dir.path().join("inst.json");
    let sol = dir.path().join("sol.json");
    let args = ["example", "boson-sigma", "--N", "4", "--p", "1", "-o", s(&state), "--instance-output", s(&inst)];
    assert_eq!(code(&qm(&args)), 0);
    let out = qm(&["solve", s(&inst), "-o", s(&sol)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc: SolutionDoc = read(&sol);
    assert!(doc.rank <= 3);
    assert!(doc.residuals.iter().all(|&r| r <= 1e-8));
}

#[test]
fn channel_kraus_and_subchannel() {
    let dir = TempDir::new().unwrap();
    let id = write_json(
        &dir,
        "id.json",
        &json!({ "in_dims": [2], "out_dims": [2], "choi": identity_channel_choi() }),
    );
    let kraus = dir.path().join("kraus.json");
    assert_eq!(code(&qm(&["channel", "kraus", s(&id), "-o", s(&kraus)])), 0);
    let doc: KrausDoc = read(&kraus);
    assert_eq!(doc.operators.len(), 1);

    // SWAP on two qubits: Choi state is the projector onto (1/2) Σ |p⟩|swap p⟩
    let mut re = vec![vec![0.0; 16]; 16];
    let idx = |p: usize| {
        let swapped = ((p & 1) << 1) | (p >> 1);
        p * 4 + swapped
    };
    for p in 0..4 {
        for q in 0..4 {
            re[idx(p)][idx(q)] = 0.25;
        }
    }
    let swap = write_json(
        &dir,
        "swap.json",
        &json!({ "in_dims": [2, 2], "out_dims": [2, 2], "choi": real(re) }),
    );
    let sub = dir.path().join("sub.json");
    let out = qm(&["channel", "subchannel", s(&swap), "--in-keep", "0", "--out-keep", "0", "-o", s(&sub)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc: ChannelDoc = read(&sub);
    let choi = doc.choi.to_hermitian().unwrap();
    assert!(choi.distance(&qmarginal::numerics::HermitianMatrix::maximally_mixed(4)) < 1e-12);

    // a Choi matrix with the wrong input marginal is rejected as non-trace-preserving
    let bad = write_json(
        &dir,
        "bad.json",
        &json!({ "in_dims": [2], "out_dims": [2], "choi": diag(&[0.5, 0.5, 0.0, 0.0]) }),
    );
    let out = qm(&["channel", "kraus", s(&bad)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("trace"), "{}", stderr(&out));
}

#[test]
fn channel_reduce_reports_both_bounds() {
    let dir = TempDir::new().unwrap();
    // two single-qubit identity locals on a 2-qubit channel
    let local = |i: usize| {
        json!({ "in_subsystems": [i], "out_subsystems": [i], "choi": identity_channel_choi() })
    };
    let inst = write_json(
        &dir,
        "ci.json",
        &json!({ "in_dims": [2, 2], "out_dims": [2, 2], "locals": [local(0), local(1)] }),
    );
    let res = dir.path().join("res.json");
    let out = qm(&["channel", "reduce", s(&inst), "-o", s(&res)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("local bound: 5, tp-augmented bound: 6"));
    let doc: ChannelReductionDoc = read(&res);
    assert!(doc.kraus_count <= 6);
    assert_eq!(doc.bounds.local, 5);
    assert_eq!(doc.bounds.tp_augmented, 6);
    assert!(doc.tp_deviation < 1e-8);
    assert!(doc.sub_channel_residuals.iter().all(|&r| r <= 1e-7));
}

#[test]
fn random_feasible_matches_golden_file() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("inst.json");
    let witness = dir.path().join("witness.json");
    let args = [
        "example", "random-feasible", "--n", "3", "--k", "2", "--rank", "4", "--seed", "7",
        "-o", s(&inst), "--witness-output", s(&witness),
    ];
    assert_eq!(code(&qm(&args)), 0);
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/random_feasible_n3_k2_r4_s7.json");
    let produced = fs::read_to_string(&inst).unwrap();
    assert_eq!(produced, fs::read_to_string(golden).unwrap());
    assert_eq!(read::<StateDoc>(&witness).rank, 4);
    assert_eq!(code(&qm(&["check", s(&inst), s(&witness), "--tol", "1e-12"])), 0);
}

#[test]
fn solve_is_deterministic_under_fixed_seed() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("inst.json");
    let args = ["example", "random-feasible", "--n", "3", "--seed", "3", "-o", s(&inst)];
    assert_eq!(code(&qm(&args)), 0);
    let run = |name: &str| {
        let out = dir.path().join(name);
        assert_eq!(code(&qm(&["solve", s(&inst), "--seed", "5", "-o", s(&out)])), 0);
        fs::read_to_string(out).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn matrix_encoding_rejects_ragged_rows() {
    let dir = TempDir::new().unwrap();
    let inst = write_json(
        &dir,
        "ragged.json",
        &json!({ "dims": [2], "constraints": [{ "subsystems": [0], "matrix": { "re": [[1.0, 0.0], [0.0]], "im": [[0.0, 0.0], [0.0, 0.0]] } }] }),
    );
    let out = qm(&["bounds", s(&inst)]);
    assert_eq!(code(&out), 2);
    let v = MatrixDoc { re: vec![vec![1.0]], im: vec![vec![0.0]] };
    assert!(v.to_hermitian().is_ok());
}
