use std::io::Write;
use std::process::{Command, Output};

fn sasaki(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sasaki")).args(args).output().unwrap()
}

fn temp_file(name: &str, text: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("sasaki-cli-tests-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn config_errors_exit_two_with_field_path() {
    let p = temp_file("bad.conf", "base.preset = sphere\nf.expr = exp(x9)\n");
    let o = sasaki(&["verify", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("f.expr"));
    let o = sasaki(&["verify", "--config", "/nonexistent/scenario.conf"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_check_exits_one() {
    let p = temp_file("tight.conf", "base.preset = sphere\nsamples = 2\n");
    let o = sasaki(&["verify", "--config", p.to_str().unwrap(), "--checks", "thm4.quasi", "--tol", "thm4.quasi=1e-30"]);
    assert_eq!(o.status.code(), Some(1));
    let line = stdout(&o);
    assert!(line.starts_with(r#"{"check":"thm4.quasi","#) && line.contains(r#""pass":false"#), "{line}");
}

#[test]
fn verify_writes_report_and_respects_filter_and_seed() {
    let out = temp_file("report.jsonl", "");
    let o = sasaki(&["verify", "--checks", "struct,thm1", "--seed", "9", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), text);
    let ids: Vec<String> = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["check"].as_str().unwrap().to_string())
        .collect();
    assert!(ids.iter().all(|c| c.starts_with("struct.") || c.starts_with("thm1.")), "{ids:?}");
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    let again = sasaki(&["verify", "--checks", "struct,thm1", "--seed", "9"]);
    assert_eq!(stdout(&again), text);
    let other = sasaki(&["verify", "--checks", "struct.purity", "--seed", "10"]);
    assert_ne!(stdout(&other).lines().next(), text.lines().find(|l| l.contains("struct.purity")));
}

#[test]
fn sphere_scalar_curvature_is_two_at_zero_and_identity() {
    let p = temp_file("sphere.conf", "base.preset = sphere\n");
    for fiber in ["zero", "identity"] {
        let o = sasaki(&["curvature", "--config", p.to_str().unwrap(), "--point", "1.1,0.2", "--fiber", fiber]);
        assert!(o.status.success());
        let text = stdout(&o);
        for key in ["scalar (contraction)", "scalar (formula)", "scalar (constant curvature)"] {
            let line = text.lines().find(|l| l.starts_with(key)).unwrap();
            let v: f64 = line.split_whitespace().last().unwrap().parse().unwrap();
            assert!((v - 2.0).abs() < 1e-9, "{line}");
        }
    }
    let o = sasaki(&["curvature", "--config", p.to_str().unwrap(), "--point", "0.01,0.2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn flat_curvature_is_zero() {
    let o = sasaki(&["curvature", "--fiber", "0.5,-1,2,0.25"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("max|R| overall")).unwrap();
    assert_eq!(line.split_whitespace().last().unwrap().parse::<f64>().unwrap(), 0.0);
}

#[test]
fn geodesic_writes_csv_trace() {
    let p = temp_file("flat_exp.conf", "base.preset = euclidean\nf.expr = exp(x1)\ngeodesic.x = -0.5, 0\ngeodesic.xdot = 0.6, 0.3\n");
    let csv = temp_file("trace.csv", "");
    let o = sasaki(&[
        "geodesic",
        "--config",
        p.to_str().unwrap(),
        "--connection",
        "lift",
        "--s-max",
        "0.5",
        "--step",
        "0.01",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "s,x1,x2,t_00,t_01,t_10,t_11,xdot1,xdot2,dt_00,dt_01,dt_10,dt_11,residual,energy"
    );
    assert_eq!(lines.count(), 51);
    let summary = String::from_utf8_lossy(&o.stderr);
    assert!(summary.contains("max residual"), "{summary}");
    let o = sasaki(&["geodesic", "--connection", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn presets_lists_bases() {
    let o = sasaki(&["presets"]);
    assert!(o.status.success());
    for name in ["euclidean", "sphere", "hyperbolic", "product", "custom"] {
        assert!(stdout(&o).contains(name));
    }
}
