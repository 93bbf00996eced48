use std::path::Path;
use std::process::{Command, Output};

fn galcm(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_galcm"))
        .env_remove("GALCM_OUT")
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("failed to spawn galcm")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

#[test]
fn equilibria_reports_the_saddle() {
    let dir = tempfile::tempdir().unwrap();
    let o = galcm(dir.path(), &["equilibria", "--contour-energy", "130100"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("E_J(L1) = 130055.178"));
    let zvc = String::from_utf8(read(dir.path().join("equilibria/zvc.csv"))).unwrap();
    assert!(zvc.starts_with("# level="));
    let m: serde_json::Value = serde_json::from_slice(&read(dir.path().join("equilibria/manifest.json"))).unwrap();
    assert_eq!(m["command"], "equilibria");
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
    assert_eq!(m["config"]["model"]["omega"], 5.0);
}

#[test]
fn zero_pattern_speed_is_a_notice() {
    let dir = tempfile::tempdir().unwrap();
    let o = galcm(dir.path(), &["--omega", "0", "equilibria"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("no saddle points"));
}

#[test]
fn invalid_parameters_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = galcm(dir.path(), &["--q-phi", "0.6", "equilibria"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("density"));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = galcm(dir.path(), &["--set", "job.colour=red", "equilibria"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"));
    let o = galcm(dir.path(), &["--set", "model.mass=1", "equilibria"]);
    assert_eq!(o.status.code(), Some(2));
    let o = galcm(dir.path(), &["plot", "--kind", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_reduction_names_the_producing_command() {
    let dir = tempfile::tempdir().unwrap();
    let o = galcm(dir.path(), &["orbit", "--energy", "130105"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("galcm reduce"));
}

#[test]
fn order_mismatch_is_an_artifact_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(galcm(dir.path(), &["--order", "6", "reduce", "--point", "L1"]).status.code(), Some(0));
    let o = galcm(dir.path(), &["--order", "7", "orbit", "--energy", "130105"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("rerun"));
}

#[test]
fn config_file_and_flags_compose() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# flatter bar\nmodel.p_phi = 0.8\nmodel.omega = 4\n").unwrap();
    let o = galcm(dir.path(), &["--config", cfg.to_str().unwrap(), "--omega", "5", "equilibria"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_slice(&read(dir.path().join("equilibria/manifest.json"))).unwrap();
    assert_eq!(m["config"]["model"]["p_phi"], 0.8);
    assert_eq!(m["config"]["model"]["omega"], 5.0);
}

#[test]
fn pipeline_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let steps: [&[&str]; 5] = [
        &["--order", "6", "reduce"],
        &["--order", "6", "orbit", "--energy", "130105"],
        &["--order", "6", "converge", "--energy", "130060.178", "--grid", "4", "--tol", "1e-6"],
        &["--order", "6", "section", "--energy", "130155", "--n-phase", "24"],
        &["--order", "6", "manifold", "--energy", "130105", "--n-phase", "6", "--surface", "S", "--t-max", "5"],
    ];
    let files = [
        "reduce/manifest.json",
        "reduce/L1_centre-manifold/center_h.json",
        "orbit/manifest.json",
        "converge/manifest.json",
        "section/manifest.json",
        "manifold/manifest.json",
    ];
    let mut first = Vec::new();
    for pass in 0..2 {
        for s in steps {
            let mut args = s.to_vec();
            // `--t-max` is a global integrator setting, not a manifold flag.
            if let Some(k) = args.iter().position(|a| *a == "--t-max") {
                args.splice(k..k + 2, ["--set", "integrator.t_max=5"]);
            }
            let o = galcm(dir.path(), &args);
            assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
        }
        let snapshot: Vec<Vec<u8>> = files.iter().map(|f| read(dir.path().join(f))).collect();
        if pass == 0 {
            first = snapshot;
        } else {
            for (f, (a, b)) in files.iter().zip(first.iter().zip(&snapshot)) {
                assert!(a == b, "{f} changed between runs");
            }
        }
    }
    let o = galcm(dir.path(), &["plot", "--kind", "map", dir.path().join("converge/map_E130060.178_tol1e-6.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let svg = String::from_utf8(read(dir.path().join("plot/map.svg"))).unwrap();
    assert!(svg.contains("<rect") && svg.ends_with("</svg>\n"));
}

#[test]
fn plot_without_inputs_draws_axes() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("empty.svg");
    let o = galcm(dir.path(), &["plot", "--kind", "curve", "--svg", svg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(read(&svg)).unwrap();
    assert!(!text.contains("<polyline"));
}
