use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hcran(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcran")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("exp.toml");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL_CUSTOM: &str = r#"
preset = "custom"
seeds = [4]
schemes = ["wz"]
modes = ["lin"]

[sweep]
variable = "eta"
values = [0.4, 0.6]

[scenario]
n_bs_antennas = 4
n_mue = 1
n_rrh = 2
n_sue = 2
fronthaul_se = 10.0
"#;

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(hcran(&[]).status.code(), Some(1));
    assert_eq!(hcran(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(hcran(&["sweep", "--preset", "nope"]).status.code(), Some(1));
    assert_eq!(
        hcran(&["sweep", "--scheme", "x", "--preset", "custom"]).status.code(),
        Some(1)
    );
    assert_eq!(hcran(&["--help"]).status.code(), Some(0));
}

#[test]
fn sweep_without_source_is_rejected() {
    let out = hcran(&["sweep"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config or --preset"));
}

#[test]
fn bad_config_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_config(dir.path(), &SMALL_CUSTOM.replace("[0.4, 0.6]", "[]"));
    let out = hcran(&["sweep", "--config", &empty]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));

    let unknown = write_config(dir.path(), &format!("{SMALL_CUSTOM}\ncolour = 3\n"));
    assert_eq!(hcran(&["sweep", "--config", &unknown]).status.code(), Some(1));

    let missing = dir.path().join("missing.toml");
    assert_eq!(
        hcran(&["sweep", "--config", missing.to_str().unwrap()]).status.code(),
        Some(1)
    );
}

#[test]
fn sweep_output_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_CUSTOM);
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let r = hcran(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        runs.push(fs::read(out.join("custom.csv")).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
    let text = String::from_utf8(runs.remove(0)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# tool: hcran "));
    assert_eq!(lines[1], "# preset: custom");
    assert!(lines[2].starts_with("# config_sha256: "));
    assert_eq!(lines[3], "# seeds: 4");
    assert_eq!(lines[4], "# panel: custom");
    assert_eq!(lines[5], "seed,eta,scheme,mode,objective,eta_star,r_bs,r_pool,r_fh");
    assert_eq!(lines.len(), 8);
    assert!(lines[6].starts_with("4,0.4,wz,lin,"));
}

#[test]
fn optimize_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_CUSTOM);
    let path = dir.path().join("opt.json");
    let r = hcran(&[
        "optimize",
        "--config",
        &cfg,
        "--seed",
        "9",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let res = &v["result"];
    let eta = res["eta_star"].as_f64().unwrap();
    assert!(eta > 0.0 && eta < 1.0);
    let obj = res["objective"].as_f64().unwrap();
    let sum = res["r_bs"].as_f64().unwrap() + res["r_pool"].as_f64().unwrap();
    assert!((obj - eta * sum).abs() <= 1e-9 * obj);
    assert_eq!(v["scenario"]["n_rrh"].as_u64(), Some(2));
}

#[test]
fn validate_reports_each_quantity() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let r = hcran(&[
        "validate",
        "--trials",
        "20",
        "--seed",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let stdout = String::from_utf8_lossy(&r.stdout);
    for q in ["sum_sic", "sum_lin", "fh_p2p", "fh_wz"] {
        assert!(stdout.contains(&format!("{q}: max |DE-MC|/MC")), "{stdout}");
    }
    let csv = hcran::io::parse_csv("validate", &fs::read_to_string(out.join("validate.csv")).unwrap()).unwrap();
    // six J values, four quantities
    assert_eq!(csv.rows.len(), 24);
    assert!(csv.rows.iter().all(|r| csv.num(r, "trials") == 20.0));
}
