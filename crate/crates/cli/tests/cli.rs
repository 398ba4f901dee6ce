use std::path::Path;
use std::process::{Command, Output};

use zfvertex::report::VerificationReport;
use zfvertex::tensor::max_abs_distance;
use zfvertex::{MultiSiteOperator, RMatrixModel};

fn zfvertex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zfvertex"))
        .args(args)
        .env_remove("ZFVERTEX_TOL")
        .output()
        .unwrap()
}

fn dump(out: &Output) -> MultiSiteOperator {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    MultiSiteOperator::from_dump(&String::from_utf8(out.stdout.clone()).unwrap()).unwrap()
}

fn report(path: &Path) -> VerificationReport {
    VerificationReport::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn impossible_tolerance_exits_with_failure() {
    let out = zfvertex(&[
        "verify",
        "--suites",
        "rmatrix",
        "--tol",
        "1e-300",
        "--samples",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let r = VerificationReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(r.summary.failed > 0);
}

#[test]
fn tolerance_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_zfvertex"))
        .args(["verify", "--suites", "rmatrix", "--samples", "3"])
        .env("ZFVERTEX_TOL", "1e-300")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn configuration_errors_exit_with_two() {
    assert_eq!(
        zfvertex(&["verify", "--model", "nope"]).status.code(),
        Some(2)
    );
    assert_eq!(zfvertex(&["verify", "--tol", "-1"]).status.code(), Some(2));
    assert_eq!(
        zfvertex(&["verify", "--model", "uq-gl2", "--q", "1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"model": "uq-gl2", "q": 0.9, "suites": ["rmatrix"], "samples": 4}"#,
    )
    .unwrap();
    let out = dir.path().join("r.json");
    let run = Command::new(env!("CARGO_BIN_EXE_zfvertex"))
        .args(["verify", "--config"])
        .arg(&cfg)
        .args(["--samples", "6", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(run.status.success());
    let r = report(&out);
    assert_eq!(r.config.model, "uq-gl2");
    assert_eq!(r.config.q, 0.9);
    assert_eq!(r.config.samples, 6);
    assert!(r.records.iter().all(|x| x.suite == "rmatrix"));
}

#[test]
fn identity_r_export() {
    let op = dump(&zfvertex(&[
        "export", "--model", "identity", "--target", "r", "--k1", "0.3", "--k2", "-1",
    ]));
    assert_eq!(op, MultiSiteOperator::identity(2, 2));
}

#[test]
fn first_coefficient_export_is_one_minus_r() {
    let t1 = dump(&zfvertex(&[
        "export", "--target", "t-coeff", "--kinf", "0.25", "--ks", "1.5",
    ]));
    let r = RMatrixModel::yangian(2, 1.0)
        .unwrap()
        .evaluate(0.25, 1.5)
        .unwrap();
    let expected = MultiSiteOperator::identity(2, 2).sub(&r).unwrap();
    assert!(max_abs_distance(&t1, &expected).unwrap() < 1e-15);
    let built = dump(&zfvertex(&[
        "vertex", "build", "--order", "1", "--kinf", "0.25", "--ks", "1.5",
    ]));
    assert_eq!(built, t1);
}

#[test]
fn sector_one_export_has_block_shape() {
    let op = dump(&zfvertex(&[
        "export", "--target", "sector-t", "--sector", "1", "--kinf", "0.25",
    ]));
    // Two auxiliary colors times three grid points times two colors.
    assert_eq!(op.dim(), 12);
    let vac = dump(&zfvertex(&[
        "export", "--target", "sector-t", "--sector", "0",
    ]));
    assert_eq!(vac, MultiSiteOperator::identity(2, 1));
}

#[test]
fn r_sigma_export_of_identity_permutation() {
    let op = dump(&zfvertex(&[
        "export",
        "--target",
        "r-sigma",
        "--perm",
        "1,2,3",
        "--ks",
        "0.1,0.7,-0.4",
    ]));
    assert_eq!(op, MultiSiteOperator::identity(2, 3));
}

#[test]
fn vertex_verify_appends_to_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = out.to_str().unwrap();
    assert!(zfvertex(&[
        "verify",
        "--suites",
        "rmatrix",
        "--samples",
        "4",
        "--out",
        o
    ])
    .status
    .success());
    let before = report(&out).records.len();
    assert!(zfvertex(&[
        "vertex",
        "verify",
        "--order",
        "2",
        "--samples",
        "4",
        "--out",
        o
    ])
    .status
    .success());
    let after = report(&out);
    assert!(after.records.len() > before);
    assert!(after.records[before..].iter().all(|r| r.suite == "vertex"));
    assert_eq!(after.summary.total, after.records.len());
}

#[test]
fn fock_and_hierarchy_subcommands() {
    for sub in ["fock", "hierarchy"] {
        let out = zfvertex(&[sub, "verify", "--model", "uq-gl2"]);
        assert!(out.status.success(), "{sub}");
        let r = VerificationReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
        assert!(r.records.iter().all(|x| x.suite == sub));
    }
}

#[test]
fn models_are_listed() {
    let out = zfvertex(&["models"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["yangian", "uq-gl2", "identity", "permutation", "constant"] {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn constant_model_from_a_dump() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.txt");
    std::fs::write(&path, MultiSiteOperator::permutation(2).to_dump()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_zfvertex"))
        .args([
            "verify",
            "--model",
            "constant",
            "--suites",
            "rmatrix,braid",
            "--file",
        ])
        .arg(&path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
