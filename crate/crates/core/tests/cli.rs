use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hcpfactor"))
}

#[test]
fn predict_writes_per_level_rows() {
    let out = bin()
        .args(["predict", "--platform", "exascale", "--algo", "mlcaqr", "--n", "1048576"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,P,level,words,messages,comm_time_s,flop_time_s,total_time_s,ccr,bound_ratio");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("1048576,1073741824,1,"));
}

#[test]
fn predict_from_platform_file() {
    let dir = std::env::temp_dir().join(format!("hcpfactor-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("hopper.json");
    std::fs::write(&path, hcpfactor::platform::HOPPER_JSON).unwrap();
    let out_path = dir.join("caqr.json");
    let status = bin()
        .args(["predict", "--algo", "caqr", "--n", "4096", "--format", "json", "--platform"])
        .arg(&path)
        .arg("--out")
        .arg(&out_path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["reports"][0]["n"], 4096);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn config_errors_exit_2() {
    let missing = bin().args(["predict", "--platform", "/no/such/file.json", "--n", "64"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let shape = bin()
        .args(["simulate", "--algo", "mlcaqr", "--n", "60", "--grid", "2x2,2x2", "--blocks", "4,8"])
        .output()
        .unwrap();
    assert_eq!(shape.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&shape.stderr).contains("shape error"));
    let unknown = bin().args(["stability", "--gens", "nope"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn simulate_reports_ledger_and_residual() {
    let out = bin()
        .args(["simulate", "--algo", "mlcaqr", "--n", "64", "--grid", "2x2,2x2", "--blocks", "4,8"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert!(v["checks"]["residual"].as_f64().unwrap() <= 1e-13);
    assert!(v["ledger"]["levels"]["2"]["words"].as_f64().unwrap() > 0.0);

    let caqr = bin()
        .args(["simulate", "--algo", "caqr", "--n", "32", "--grid", "4x2", "--blocks", "4"])
        .output()
        .unwrap();
    let ml = bin()
        .args(["simulate", "--algo", "mlcaqr", "--n", "32", "--grid", "4x2", "--blocks", "4"])
        .output()
        .unwrap();
    let a: serde_json::Value = serde_json::from_slice(&caqr.stdout).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&ml.stdout).unwrap();
    assert_eq!(a["ledger"], b["ledger"]);
}

#[test]
fn stability_identity_has_unit_ratios() {
    let out = bin()
        .args(["stability", "--gens", "identity", "--n", "64", "--blocks", "2,4,8"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().nth(1).unwrap();
    let cols: Vec<&str> = row.split(',').collect();
    assert_eq!(&cols[7..11], &["1.0", "1.0", "1.0", "1.0"]);
}

#[test]
fn verify_passes() {
    let out = bin().arg("verify").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 4);
}
