//! Behavior of the crreduce binary: exit codes, file handling, strict
//! parsing, and the tolerance override chain.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use crreduce_core::io::{from_json_str, to_json_string, InstanceFile, ReportFile};
use crreduce_core::{gen_partially_integrable, Frame, GeneratorSpec, Mode, Tolerances};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crreduce"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn write_integrable(dir: &Path, mode: Mode, n: usize, seed: u64) -> std::path::PathBuf {
    let spec = GeneratorSpec {
        mode,
        n,
        signature: (n, 0),
        perturbation: 0.0,
        seed,
        frame: Frame::RandomConjugation,
    };
    let inst = gen_partially_integrable(&spec, &Tolerances::default()).unwrap();
    let path = dir.join(format!("int_{mode:?}_{n}_{seed}.json"));
    let file = InstanceFile::from_instance(&inst, Some("fixture".into()));
    fs::write(&path, to_json_string(&file).unwrap()).unwrap();
    path
}

#[test]
fn reduce_writes_a_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_integrable(dir.path(), Mode::Cr, 2, 1);
    let out_path = dir.path().join("report.json");
    let out = run(&["reduce", input.to_str().unwrap(), "--output", out_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: ReportFile = from_json_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(report.verdict, "pass");
    assert_eq!(report.label.as_deref(), Some("fixture"));
    assert!(report.k.is_some());
    assert!(report.checks.iter().all(|c| c.pass));
}

#[test]
fn reduce_without_output_prints_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_integrable(dir.path(), Mode::Lagrangian, 2, 2);
    let out = run(&["reduce", input.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let report: ReportFile = from_json_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(report.verdict, "pass");
}

#[test]
fn malformed_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");

    fs::write(&path, "{ not json").unwrap();
    assert_eq!(code(&run(&["reduce", path.to_str().unwrap()])), 1);

    // Unknown field.
    fs::write(
        &path,
        r#"{"mode":"cr","n":1,"omega":[[0.0,1.0],[-1.0,0.0]],
            "structure":[[0.0,-1.0],[1.0,0.0]],"extra":1}"#,
    )
    .unwrap();
    assert_eq!(code(&run(&["reduce", path.to_str().unwrap()])), 1);

    // Wrong dimensions.
    fs::write(
        &path,
        r#"{"mode":"cr","n":2,"omega":[[0.0,1.0],[-1.0,0.0]],
            "structure":[[0.0,-1.0],[1.0,0.0]]}"#,
    )
    .unwrap();
    assert_eq!(code(&run(&["classify", path.to_str().unwrap()])), 1);

    // Structure that squares to +Id in CR mode.
    fs::write(
        &path,
        r#"{"mode":"cr","n":1,"omega":[[0.0,1.0],[-1.0,0.0]],
            "structure":[[1.0,0.0],[0.0,1.0]]}"#,
    )
    .unwrap();
    assert_eq!(code(&run(&["reduce", path.to_str().unwrap()])), 1);

    // Missing file.
    assert_eq!(code(&run(&["reduce", "/nonexistent/x.json"])), 1);

    // Bad flags.
    assert_eq!(code(&run(&["generate", "--kind", "nonsense"])), 1);
    assert_eq!(code(&run(&["verify"])), 1);
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["reduce", "--help"])), 0);
}

#[test]
fn generated_files_parse_strictly_and_reduce() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gen.json");
    let out = run(&[
        "generate", "--kind", "generic", "--mode", "cr", "--n", "2", "--signature", "1,1",
        "--epsilon", "0.2", "--seed", "5", "--output", path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let file: InstanceFile = from_json_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(file.mode, "cr");
    assert_eq!(file.n, 2);
    assert_eq!(code(&run(&["reduce", path.to_str().unwrap()])), 0);

    // Same flags, same bytes: generation is deterministic.
    let again = dir.path().join("gen2.json");
    run(&[
        "generate", "--kind", "generic", "--mode", "cr", "--n", "2", "--signature", "1,1",
        "--epsilon", "0.2", "--seed", "5", "--output", again.to_str().unwrap(),
    ]);
    assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn degenerate_flags_are_validated() {
    let out = run(&["generate", "--kind", "degenerate", "--mode", "lagrangian", "--n", "2"]);
    assert_eq!(code(&out), 1);
    let out = run(&["generate", "--kind", "degenerate", "--n", "1"]);
    assert_eq!(code(&out), 1, "degenerate families need n >= 2");
}

#[test]
fn not_generic_exits_two_but_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    let deg = dir.path().join("deg.json");
    assert_eq!(
        code(&run(&["generate", "--kind", "degenerate", "--n", "2", "--seed", "4", "--output", deg.to_str().unwrap()])),
        0
    );
    let rep = dir.path().join("rep.json");
    let out = run(&["reduce", deg.to_str().unwrap(), "--output", rep.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let report: ReportFile = from_json_str(&fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(report.verdict, "fail");
    assert!(report.k.is_none());
    assert!(!report.genericity.generic);
    assert!(!report.genericity.eigenvalues.is_empty(), "diagnostics are present");
}

#[test]
fn tolerance_chain_env_file_flags() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_integrable(dir.path(), Mode::Cr, 1, 3);
    let rep = dir.path().join("rep.json");

    // Env override is applied.
    let out = bin()
        .env("CRREDUCE_TOL", "1e-12,1e-9,1e-6")
        .args(["reduce", input.to_str().unwrap(), "--output", rep.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let report: ReportFile = from_json_str(&fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(report.tolerances.tau_verify, 1e-6);
    assert_eq!(report.tolerances.tau_eig, 1e-9);

    // Flags beat the environment.
    let out = bin()
        .env("CRREDUCE_TOL", "1e-12,1e-9,1e-6")
        .args([
            "reduce", input.to_str().unwrap(), "--tol-verify", "1e-7",
            "--output", rep.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let report: ReportFile = from_json_str(&fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(report.tolerances.tau_verify, 1e-7);

    // A file section beats the environment too.
    let mut file: InstanceFile = from_json_str(&fs::read_to_string(&input).unwrap()).unwrap();
    file.tolerances = Some(crreduce_core::io::ToleranceSection {
        tau_verify: Some(2e-6),
        ..Default::default()
    });
    let with_sec = dir.path().join("withsec.json");
    fs::write(&with_sec, to_json_string(&file).unwrap()).unwrap();
    let out = bin()
        .env("CRREDUCE_TOL", "1e-5")
        .args(["reduce", with_sec.to_str().unwrap(), "--output", rep.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let report: ReportFile = from_json_str(&fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(report.tolerances.tau_verify, 2e-6);

    // Malformed env value is an input error.
    let out = bin()
        .env("CRREDUCE_TOL", "abc")
        .args(["reduce", input.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn verify_passes_and_writes_its_table() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_integrable(dir.path(), Mode::Cr, 2, 8);
    let table = dir.path().join("verify.json");
    let out = run(&[
        "verify", input.to_str().unwrap(), "--seeds", "0..3",
        "--output", table.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["structure_identity", "hermitian_identity", "uniqueness", "scale_invariance", "idempotence", "stabilizer"] {
        assert!(text.contains(name), "table lists {name}");
    }
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&table).unwrap()).unwrap();
    assert_eq!(json["verdict"], "pass");
    assert_eq!(json["seeds"].as_array().unwrap().len(), 4);
}

#[test]
fn path_on_a_constant_family_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_integrable(dir.path(), Mode::Cr, 2, 11);
    let b = dir.path().join("copy.json");
    fs::copy(&a, &b).unwrap();
    let rep = dir.path().join("path.json");
    let out = run(&[
        "path", a.to_str().unwrap(), b.to_str().unwrap(), a.to_str().unwrap(),
        "--output", rep.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&rep).unwrap()).unwrap();
    let modulus = json["modulus_of_continuity"].as_f64().unwrap();
    assert!(modulus <= 1e-10, "constant family moved by {modulus}");
    assert_eq!(json["crossings"].as_array().unwrap().len(), 0);
}

#[test]
fn path_rejects_mixed_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_integrable(dir.path(), Mode::Cr, 2, 1);
    let b = write_integrable(dir.path(), Mode::Cr, 3, 1);
    assert_eq!(code(&run(&["path", a.to_str().unwrap(), b.to_str().unwrap()])), 1);
    let c = write_integrable(dir.path(), Mode::Lagrangian, 2, 1);
    assert_eq!(code(&run(&["path", a.to_str().unwrap(), c.to_str().unwrap()])), 1);
    assert_eq!(code(&run(&["path"])), 1, "no samples at all");
}
