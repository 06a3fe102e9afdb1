use std::path::Path;
use std::process::{Command, Output};

use correspondence::diagram::save_diagram;
use correspondence::fixtures::{pole_diagram, pole_kinematics_shifted};

fn cli(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_correspondence"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn report(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join(format!("{name}.report.json"))).unwrap()).unwrap()
}

#[test]
fn degree_subcommand() {
    let out = tempfile::tempdir().unwrap();
    let o = cli(&["degree", "--nl", "1", "--nv", "2"], out.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(out.path(), "degree");
    assert_eq!(r["result"]["degree"]["d"], "-1");
    assert_eq!(r["result"]["model"]["kind"], "pole");
    let csv = std::fs::read_to_string(out.path().join("degree.csv")).unwrap();
    assert!(csv.starts_with("nl,nv,d,model\n"));
}

#[test]
fn analyze_off_surface_is_trivial() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("pole.json");
    let k = dir.path().join("k.json");
    std::fs::write(&d, save_diagram(&pole_diagram(1.0, 1.5))).unwrap();
    std::fs::write(&k, pole_kinematics_shifted(1.0, 1.5, 0.4, 2).to_json()).unwrap();
    let o = cli(&["analyze", "--diagram", d.to_str().unwrap(), "--k", k.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report(dir.path(), "analyze")["result"]["verdict"], "Trivial");
}

#[test]
fn missing_input_exits_2() {
    let out = tempfile::tempdir().unwrap();
    let o = cli(&["scan-surface", "--diagram", "/nonexistent/diagram.json"], out.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing input"));
}

#[test]
fn unknown_option_exits_2() {
    let out = tempfile::tempdir().unwrap();
    let o = cli(&["degree", "--nl", "1", "--nv", "2", "--set", "colour=blue"], out.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn computation_error_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("model.kv");
    std::fs::write(&m, "l = 1\nform = pole\nq0 = 0.3\nenvelope = off\n").unwrap();
    let o = cli(&["transform", "--model", m.to_str().unwrap(), "--experiment", "roundtrip"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("pole.json");
    std::fs::write(&d, save_diagram(&pole_diagram(1.0, 1.5))).unwrap();
    let mut seen = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = cli(&["scan-surface", "--diagram", d.to_str().unwrap(), "--count", "10", "--seed", "7"], &out);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        seen.push((
            std::fs::read(out.join("scan-surface.report.json")).unwrap(),
            std::fs::read(out.join("scan-surface.csv")).unwrap(),
        ));
    }
    assert_eq!(seen[0], seen[1]);
}
