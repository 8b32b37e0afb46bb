use std::process::Command;

use serde_json::Value;

fn run(args: &[&str], envs: &[(&str, &str)]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_theta-isogeny"))
        .args(args)
        .envs(envs.iter().copied())
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .unwrap();
    let json = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap(), json)
}

#[test]
fn compute_writes_normalized_codomain() {
    let dir = std::env::temp_dir().join(format!("theta-isogeny-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("result.json");
    let (code, _) = run(
        &[
            "compute",
            "--input",
            "tests/data/worked_example.json",
            "--output",
            out.to_str().unwrap(),
            "--jobs",
            "2",
        ],
        &[],
    );
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["codomain_null"], serde_json::json!([1, 670]));
    assert_eq!(v["diagnostics"]["raw_codomain_null"], serde_json::json!([186, 513]));
}

#[test]
fn exit_codes() {
    let (code, v) = run(&["decompose", "--ell", "5", "--n", "4"], &[]);
    assert_eq!((code, v["r"].as_u64()), (0, Some(2)));
    let (code, v) = run(&["decompose", "--ell", "4"], &[]);
    assert_eq!((code, v["error"]["kind"].as_str()), (1, Some("BadEll")));
    let (code, _) = run(&["compute", "--force-r", "3"], &[]);
    assert_eq!(code, 2);
    let (code, _) = run(&["validate", "--input", "missing.json"], &[]);
    assert_eq!(code, 2);
}

#[test]
fn seeded_oracle_check() {
    let (code, a) = run(
        &["oracle-check", "--generate-ell", "5"],
        &[("THETA_ISOGENY_SEED", "11")],
    );
    assert_eq!(code, 0);
    assert_eq!(a["equal"], Value::Bool(true));
    let (_, b) = run(
        &["oracle-check", "--generate-ell", "5"],
        &[("THETA_ISOGENY_SEED", "11")],
    );
    assert_eq!(a["job"], b["job"]);
    let (code, _) = run(&["oracle-check", "--generate-ell", "5"], &[("THETA_ISOGENY_SEED", "x")]);
    assert_eq!(code, 2);
}
