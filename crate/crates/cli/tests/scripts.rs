use std::path::{Path, PathBuf};
use std::process::Command;

use grassfield_dsl::{run_source, Options, Status};

fn script_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scripts").join(format!("{name}.gft"))
}

fn source(name: &str) -> String {
    std::fs::read_to_string(script_path(name)).unwrap()
}

fn oracle() -> Options {
    Options { oracle: true, ..Options::default() }
}

fn run(src: &str, opts: &Options) -> grassfield_dsl::Report {
    run_source(src, "inline", opts).unwrap_or_else(|e| panic!("{e}"))
}

macro_rules! bundled {
    ($($name:ident),* $(,)?) => {$(
        #[test]
        fn $name() {
            let report = run(&source(stringify!($name)), &oracle());
            assert!(report.passed(), "{}", report.human());
            for a in &report.assertions {
                let o = a.oracle.as_ref().expect("oracle record");
                assert!(o.skipped.is_none(), "{}", report.human());
                if a.kind == "assert_nonzero" {
                    assert!(o.witness.is_some(), "{}", report.human());
                } else {
                    assert!(o.equivalent, "{}", report.human());
                    assert_eq!(o.trials, 200);
                }
            }
        }
    )*};
}

bundled!(
    pauli_identity,
    metric_components,
    determinant,
    bi_lagrangian,
    born_infeld_chain,
    nonrel_limit,
    bosonic_limit_chain,
    lorentz_invariance,
    lightcone_form,
    canonical_momentum,
    inversion_roundtrip,
    hamiltonian,
    canonical_lagrangian,
    equations_of_motion,
    chaplygin_susy,
    susy_preserved_general,
    susy_broken_cartesian,
);

#[test]
fn empty_script_passes() {
    let report = run("# nothing here\n", &Options::default());
    assert_eq!(report.exit_code, 0);
    assert_eq!(report.status, Status::Pass);
    assert!(report.assertions.is_empty() && report.errors.is_empty());
}

#[test]
fn failing_assertion_exits_one() {
    let src = "field theta : even on tx;\nassert_eq \"wrong\" D[theta^2, t], theta*D[theta, t];\nassert_zero 0;";
    let report = run(src, &Options::default());
    assert_eq!(report.exit_code, 1);
    let a = report.assertion("wrong").unwrap();
    assert_eq!(a.status, Status::Fail);
    assert_eq!(a.line, 2);
    assert!(a.residual.as_deref().unwrap().contains("theta"));
    assert_eq!(report.assertions[1].status, Status::Pass);
}

#[test]
fn fail_fast_stops_at_first_failure() {
    let src = "assert_zero 1;\nassert_zero 0;";
    let all = run(src, &Options::default());
    assert_eq!(all.assertions.len(), 2);
    let first = run(src, &Options { fail_fast: true, ..Options::default() });
    assert_eq!(first.assertions.len(), 1);
    assert_eq!(first.exit_code, 1);
}

#[test]
fn engine_errors_exit_three() {
    let report = run("show 1/0;\nassert_zero 0;", &Options::default());
    assert_eq!(report.exit_code, 3, "{}", report.human());
    assert_eq!(report.errors[0].line, 1);

    let report = run("field u : odd on tx;\nassert_zero sqrt(u);", &Options::default());
    assert_eq!(report.exit_code, 3, "{}", report.human());
}

#[test]
fn oracle_finds_counterexamples_to_false_identities() {
    let src = "field u, v : odd on tx;\nassert_eq u*v, v*u;";
    let report = run(src, &oracle());
    assert_eq!(report.exit_code, 1);
    let o = report.assertions[0].oracle.as_ref().unwrap();
    assert!(!o.equivalent && o.witness.is_some());
}

#[test]
fn perturbed_inversion_candidate_fails() {
    let src = source("inversion_roundtrip").replace(
        "- c^2)/(2*D[theta, m]*k);",
        "- c^2)/(2*D[theta, m]*k) + u*D[u, m];",
    );
    let report = run(&src, &Options::default());
    let a = report.assertion("closed-form velocity").unwrap();
    assert_eq!(a.status, Status::Fail, "{}", report.human());
    assert!(!a.oracle.as_ref().unwrap().equivalent);
}

#[test]
fn series_order_override() {
    let src = "let s = series_c(sqrt(c^2 + 1), -1);\nassert_eq s, c + 1/(2*c);";
    assert!(run(src, &Options::default()).passed());
    let truncated = run(src, &Options { order_half: Some(0), ..Options::default() });
    assert_eq!(truncated.exit_code, 1);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_grassfield"))
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let code = |p: &Path| bin().arg("run").arg(p).output().unwrap().status.code();

    assert_eq!(code(&write("ok.gft", "assert_zero 0;")), Some(0));
    assert_eq!(code(&write("fail.gft", "assert_zero 1;")), Some(1));
    assert_eq!(code(&write("eng.gft", "show 1/0;")), Some(3));

    let out = bin().arg("run").arg(write("unknown.gft", "let a = 1;\nshow a + zeta;")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("2:") && err.contains("zeta"), "{err}");

    let out = bin().arg("run").arg(write("syntax.gft", "let a = (1;")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1:"));

    assert_eq!(bin().arg("run").arg(dir.path().join("missing.gft")).status().unwrap().code(), Some(2));
}

#[test]
fn json_report_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let report = |n: usize| {
        let out = dir.path().join(format!("r{n}.json"));
        let status = bin()
            .args(["run", "--oracle", "--trials", "50", "--seed", "7", "--report"])
            .arg(&out)
            .arg(script_path("chaplygin_susy"))
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        std::fs::read(out).unwrap()
    };
    let a = report(0);
    assert_eq!(a, report(1));
    let json: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(json["status"], "pass");
    assert_eq!(json["exit_code"], 0);
    let first = &json["assertions"][0];
    for key in ["id", "name", "kind", "line", "status", "residual", "tier", "oracle", "detail"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
    assert!(first.get("timing_ms").is_none());
    assert_eq!(first["oracle"]["trials"], 50);
    assert_eq!(first["tier"], "total-derivative");
}
