use std::fs;
use std::process::{Command, Output};

fn eit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("valid JSON")
}

/// Data rows of a CSV sweep as numbers (blank cells become NaN).
fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(2)
        .map(|l| {
            l.split(',')
                .map(|v| v.parse().unwrap_or(f64::NAN))
                .collect()
        })
        .collect()
}

#[test]
fn compute_perfect_eit() {
    let o = eit(&[
        "compute",
        "--gamma0",
        "0",
        "--omega",
        "0",
        "--alpha",
        "200",
        "--omega-c",
        "0.5",
        "--probe",
        "coherent:1",
        "--coupling",
        "coherent",
    ]);
    assert!(o.status.success());
    let v = json(&o);
    assert!((v["T"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((v["F"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["delta_T"].as_f64(), Some(0.0));
    assert!(v.get("rho").is_none());
}

#[test]
fn compute_fock_fidelities() {
    let one = json(&eit(&[
        "compute",
        "--probe",
        "fock:1",
        "--gamma0",
        "0.001",
        "--omega",
        "0",
        "--alpha",
        "200",
        "--omega-c",
        "0.5",
    ]));
    assert!((one["F"].as_f64().unwrap() - 0.81906).abs() < 5e-6);
    let two = json(&eit(&["compute", "--probe", "fock:2", "--gamma0", "0.001"]));
    assert!((two["F"].as_f64().unwrap() - 0.67086).abs() < 5e-6);
}

#[test]
fn compute_can_emit_rho() {
    let v = json(&eit(&[
        "compute", "--gamma0", "0.01", "--rho", "--dim", "24",
    ]));
    assert_eq!(v["rho"]["dim"].as_u64(), Some(24));
    let re = v["rho"]["re"].as_array().unwrap();
    assert_eq!(re.len(), 24);
    assert!(re.iter().all(|row| row.as_array().unwrap().len() == 24));
}

#[test]
fn invalid_input_exits_2() {
    for args in [
        &["compute", "--bogus"][..],
        &["compute", "--gamma0", "-1"],
        &["compute", "--probe", "thermal:1"],
        &["compute", "--probe", "fock:0"],
        &["compute", "--coupling", "squeezed:-0.5,0"],
        &["sweep", "--preset", "fig9z"],
        &["sweep", "--range", "0.05:0:10"],
        &["sweep", "--axis", "gamma0", "--range", "0:0.1:10", "--log"],
        &["validate", "--strict", "0"],
    ] {
        assert_eq!(eit(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn preset_fig4a_starts_at_zero() {
    let o = eit(&["sweep", "--preset", "fig4a"]);
    assert!(o.status.success());
    let csv = stdout(&o);
    let mut lines = csv.lines();
    let provenance = lines.next().unwrap();
    assert!(provenance.starts_with("# preset=fig4a axis=gamma0"));
    assert!(provenance.contains("alpha=200") && provenance.contains("omega_c=0.5"));
    assert_eq!(
        lines.next(),
        Some("omega,gamma0,T,F,dT,dF,c1_re,c1_im,g,n_p0")
    );
    let data = rows(&csv);
    assert_eq!(data.len(), 52);
    assert_eq!((data[0][1], data[0][4], data[0][5]), (0.0, 0.0, 0.0));
    assert!(data.iter().skip(1).any(|r| r[4] > 0.0));
}

#[test]
fn fock_preset_has_no_deltas() {
    let csv = stdout(&eit(&["sweep", "--preset", "fig3a"]));
    for r in rows(&csv) {
        assert_eq!((r[4], r[5]), (0.0, 0.0));
    }
}

#[test]
fn omega_sweep_transmittance_decreases() {
    let csv = stdout(&eit(&[
        "sweep",
        "--axis",
        "omega",
        "--range",
        "0:0.02:5",
        "--probe",
        "coherent:1",
    ]));
    let data = rows(&csv);
    assert_eq!(data.len(), 5);
    assert!(data.windows(2).all(|w| w[1][2] < w[0][2]));
}

#[test]
fn sweeps_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for path in [&a, &b] {
        let o = eit(&[
            "sweep",
            "--preset",
            "fig5b",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        assert!(o.stdout.is_empty());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn json_sweep_and_output_subset() {
    let v = json(&eit(&[
        "sweep", "--axis", "gamma0", "--range", "0:0.02:3", "--format", "json",
    ]));
    let rows_json = v["rows"].as_array().unwrap();
    assert_eq!(rows_json.len(), 3);
    assert_eq!(rows_json[2]["gamma0"].as_f64(), Some(0.02));

    let csv = stdout(&eit(&[
        "sweep",
        "--axis",
        "omega",
        "--range",
        "0:0.01:2",
        "--outputs",
        "T,dF",
    ]));
    let line = csv.lines().nth(3).unwrap();
    let cells: Vec<&str> = line.split(',').collect();
    assert!(
        !cells[2].is_empty() && cells[3].is_empty() && cells[4].is_empty() && !cells[5].is_empty()
    );
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "alpha = 1000.0\nomega-c = \"0.25\"\nprobe = \"fock:1\"\ngamma0 = 0.001\n",
    )
    .unwrap();
    let from_file = json(&eit(&["compute", "--config", cfg.to_str().unwrap()]));
    let explicit = json(&eit(&[
        "compute",
        "--alpha",
        "1000",
        "--omega-c",
        "0.25",
        "--probe",
        "fock:1",
        "--gamma0",
        "0.001",
    ]));
    assert_eq!(from_file["F"], explicit["F"]);
    let overridden = json(&eit(&[
        "compute",
        "--config",
        cfg.to_str().unwrap(),
        "--gamma0",
        "0",
    ]));
    assert!((overridden["F"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    fs::write(&cfg, "alpah = 3.0\n").unwrap();
    assert_eq!(
        eit(&["compute", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn numerical_failure_exits_3_without_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    let o = eit(&[
        "sweep",
        "--axis",
        "omega",
        "--range",
        "0:0.01:3",
        "--probe",
        "coherent:3",
        "--dim",
        "6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn validate_exit_codes() {
    let ok = eit(&["validate"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).trim_end().ends_with("PASS"));

    let strict = eit(&["validate", "--strict", "1e-5", "--g", "0.1"]);
    assert_eq!(strict.status.code(), Some(4));
    assert!(stdout(&strict).trim_end().ends_with("FAIL"));

    assert_eq!(eit(&["validate", "--dims", "8"]).status.code(), Some(3));
}
