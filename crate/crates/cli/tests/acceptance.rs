//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any
//! failure.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use sasaki_cli::checks::run_verify;
use sasaki_cli::config::Scenario;
use sasaki_cli::report::Report;
use sasaki_core::base::{ManifoldChart, Preset};
use sasaki_core::curvature::{constant_curvature_scalar, curvature_closed_form, fiber_norm_sq, flatness_check, Reading};
use sasaki_core::geodesic::{
    horizontal_lift, integrate, observed_order, oracle_gap, oracle_geodesic, predicted_lift_defect, ConnectionChoice,
    CurveStart,
};
use sasaki_core::oracle::oracle_at;
use sasaki_core::sasaki::{RescaleFunction, SasakiBundle};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn scenario(text: &str) -> Scenario {
    Scenario::from_text(text).expect("scenario parses")
}

fn verify(text: &str, checks: &[&str]) -> Report {
    let list: Vec<String> = checks.iter().map(|s| s.to_string()).collect();
    run_verify(&scenario(text), Some(&list)).expect("sweep runs")
}

/// Gating records that failed, as `id=value` items.
fn failures(r: &Report) -> Vec<String> {
    r.records
        .iter()
        .filter(|c| c.gating && !c.pass)
        .map(|c| format!("{}={:.3e}", c.check, c.max_residual))
        .collect()
}

fn worst(r: &Report, prefix: &str) -> f64 {
    r.records
        .iter()
        .filter(|c| c.check.starts_with(prefix))
        .map(|c| c.max_residual)
        .fold(0.0, f64::max)
}

fn bundle(preset: Preset, f: &str) -> SasakiBundle {
    let chart = ManifoldChart::preset(&preset).unwrap();
    let n = chart.n;
    SasakiBundle::new(chart, RescaleFunction::parse(f, n).unwrap(), 1, 1).unwrap()
}

fn connection_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut fails = Vec::new();
    let mut worst_err = 0.0f64;
    for text in [
        "base.preset = sphere\nsamples = 20\nseed = 11\n",
        "base.preset = euclidean\nbase.n = 2\nf.expr = 1 + x1^2/10\nsamples = 20\nseed = 12\n",
    ] {
        let r = verify(text, &["thm1.oracle"]);
        assert_eq!(r.records.len(), 1);
        worst_err = worst_err.max(worst(&r, "thm1.oracle"));
        fails.extend(failures(&r));
    }
    let el = t0.elapsed();
    let pass = fails.is_empty() && worst_err < 1e-5 && el < Duration::from_secs(10);
    outcome(pass, format!("40 points, max error {worst_err:.2e}, {:.2} s {}", el.as_secs_f64(), fails.join(" ")))
}

fn curvature_oracle() -> Outcome {
    let t0 = Instant::now();
    let r = verify("base.preset = sphere\nsamples = 10\nseed = 21\n", &["prop2.block", "prop2.printed", "prop2.t0"]);
    let itemized: Vec<String> = r
        .records
        .iter()
        .filter(|c| c.check.starts_with("prop2.printed") && c.max_residual >= c.tol)
        .map(|c| format!("{}={:.2e}", &c.check["prop2.printed.".len()..], c.max_residual))
        .collect();
    let flat = verify(
        "base.preset = euclidean\nbase.n = 2\nf.expr = 1 + x1^2/10\nsamples = 10\nseed = 22\n",
        &["prop2.block", "prop2.t0"],
    );
    let mut fails = failures(&r);
    fails.extend(failures(&flat));
    let el = t0.elapsed();
    let pass = fails.is_empty() && r.records.iter().filter(|c| c.check.starts_with("prop2.block")).count() == 8;
    outcome(
        pass && el < Duration::from_secs(60),
        format!(
            "max block error {:.2e}; literal-reading deviations itemized: [{}]; {:.2} s {}",
            worst(&r, "prop2.block").max(worst(&flat, "prop2.block")),
            itemized.join(", "),
            el.as_secs_f64(),
            fails.join(" ")
        ),
    )
}

fn flatness() -> Outcome {
    let sc = scenario("base.preset = euclidean\nbase.n = 2\nsamples = 50\nseed = 31\n");
    let flat = flatness_check(&sc.bundle().unwrap(), &sc.sample_points(50, 0), 1e-10).unwrap();
    let sc3 = scenario("base.preset = euclidean\nbase.n = 3\nf.expr = exp(x1)\nseed = 32\n");
    let curved = flatness_check(&sc3.bundle().unwrap(), &sc3.sample_points(50, 0), 1e-10).unwrap();
    let sc2 = scenario("base.preset = euclidean\nbase.n = 2\nf.expr = exp(x1)\nseed = 33\n");
    let plane = flatness_check(&sc2.bundle().unwrap(), &sc2.sample_points(50, 0), 1e-10).unwrap();
    let pass = flat.bundle_max < 1e-10
        && flat.disagreements == 0
        && curved.combination_max > 1e-8
        && curved.bundle_max > 1e-8
        && curved.disagreements == 0
        && plane.disagreements == 0;
    outcome(
        pass,
        format!(
            "R^2 f=1 max|R| {:.1e}; R^3 f=exp(x1) combination {:.3}, max|R| {:.3}; R^2 f=exp(x1) combination {:.1e}; verdict mismatches {}",
            flat.bundle_max,
            curved.combination_max,
            curved.bundle_max,
            plane.combination_max,
            flat.disagreements + curved.disagreements + plane.disagreements
        ),
    )
}

fn scalar_curvature() -> Outcome {
    let mut fails = Vec::new();
    let mut w = 0.0f64;
    for text in [
        "base.preset = sphere\nsamples = 10\nseed = 41\n",
        "base.preset = sphere\nf.expr = exp(x1/5)\nsamples = 10\nseed = 42\n",
        "base.preset = euclidean\nbase.n = 2\nf.expr = 1 + x1^2/10\nsamples = 10\nseed = 43\n",
    ] {
        let r = verify(text, &["thm5.scalar", "thm5.oracle", "prop2.block"]);
        if failures(&r).iter().any(|f| f.starts_with("prop2.block")) {
            continue;
        }
        w = w.max(worst(&r, "thm5.scalar")).max(worst(&r, "thm5.oracle"));
        fails.extend(failures(&r));
    }
    let sb = bundle(Preset::Sphere(1.0), "1");
    let mut dev = 0.0f64;
    for t in [[0.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 1.0]] {
        let mut y = vec![1.2, 0.4];
        y.extend(t);
        let b = sb.at(&y).unwrap();
        let c = curvature_closed_form(&b, Reading::Repaired).unwrap();
        let k = constant_curvature_scalar(1.0, 2, b.rs.f, fiber_norm_sq(&b.geom, &b.p.t), &b.p.t, c.f_l);
        let o = oracle_at(&sb, &y, true).unwrap().scalar.unwrap();
        for v in [c.scalar, c.scalar_formula, k, o] {
            dev = dev.max((v - 2.0).abs());
        }
    }
    outcome(
        fails.is_empty() && w < 1e-5 && dev < 1e-6,
        format!("contraction vs formula/oracle {w:.2e}; |r-2| on S^2 at t=0, t=id {dev:.2e} {}", fails.join(" ")),
    )
}

fn structures() -> Outcome {
    let mut fails = Vec::new();
    let mut w = 0.0f64;
    for base in ["base.preset = euclidean\nbase.n = 2\n", "base.preset = sphere\n"] {
        for f in ["1", "exp(x1/5)"] {
            let text = format!(
                "{base}f.expr = {f}\nsamples = 5\nseed = 51\ntol.struct.square = 1e-12\ntol.struct.golden = 1e-12\ntol.struct.purity = 1e-12\n"
            );
            let r = verify(&text, &["struct.square", "struct.golden", "struct.purity", "eq39.closed", "thm4.quasi"]);
            assert_eq!(r.records.len(), 5);
            w = w.max(worst(&r, "thm4.quasi")).max(worst(&r, "eq39.closed"));
            fails.extend(failures(&r).into_iter().map(|s| format!("[{} f={f}] {s}", base.trim())));
        }
    }
    outcome(fails.is_empty(), format!("4 cases, max quasi/closed-form residual {w:.2e} {}", fails.join(" ")))
}

fn metric_connections() -> Outcome {
    let mut fails = Vec::new();
    let mut w = Vec::new();
    for f in ["1", "exp(x1/5)"] {
        let r = verify(
            &format!("base.preset = sphere\nf.expr = {f}\nsamples = 6\nseed = 61\n"),
            &["sec5.metricity", "sec5.torsion", "sec5.scalar", "sec5.conjugate.metricity"],
        );
        assert_eq!(r.records.len(), 4);
        for c in &r.records {
            w.push(format!("{}={:.1e}", c.check, c.max_residual));
        }
        fails.extend(failures(&r));
    }
    outcome(fails.is_empty(), w.join(" "))
}

fn geodesics() -> Outcome {
    let mut items = Vec::new();
    let mut pass = true;
    let s2 = bundle(Preset::Sphere(1.0), "1");
    let t = vec![0.3, -0.2, 0.5, 0.1];
    let great = horizontal_lift(
        &s2,
        &[std::f64::consts::FRAC_PI_2, -std::f64::consts::FRAC_PI_2],
        &[0.0, 1.0],
        &t,
        std::f64::consts::PI,
        1e-3,
        Some(&s2.chart.default_box),
    )
    .unwrap();
    pass &= great.max_residual() < 1e-6;
    items.push(format!("great-circle lift {:.1e}", great.max_residual()));

    let flat = bundle(Preset::Euclidean(2), "exp(x1)");
    let lift = horizontal_lift(&flat, &[-0.5, 0.0], &[0.6, 0.3], &t, 1.0, 1e-3, Some(&flat.chart.default_box)).unwrap();
    let pred = predicted_lift_defect(&flat, &lift).unwrap();
    let (mut gap, mut peak) = (0.0f64, 0.0f64);
    for (s, p) in lift.samples.iter().zip(&pred) {
        if let Some(r) = s.residual {
            gap = gap.max((r - p).abs());
            peak = peak.max(r);
        }
    }
    pass &= gap < 1e-6 && peak > 1e-3;
    items.push(format!("exp lift residual {peak:.3e} vs predicted, gap {gap:.1e}"));

    let cases = [
        (bundle(Preset::Sphere(1.0), "1"), vec![1.2, 0.3]),
        (bundle(Preset::Sphere(1.0), "exp(x1/5)"), vec![1.2, 0.3]),
        (flat.clone(), vec![-0.2, 0.1]),
    ];
    let (mut order, mut fiber, mut ogap) = (f64::INFINITY, 0.0f64, 0.0f64);
    for (sb, x) in &cases {
        let start = CurveStart {
            x: x.clone(),
            t: t.clone(),
            xdot: vec![0.4, -0.3],
            tdot: vec![0.1, -0.2, 0.05, 0.3],
        };
        order = order.min(observed_order(sb, ConnectionChoice::LeviCivita, &start, 1.0, 0.1).unwrap().order());
        for choice in [ConnectionChoice::LeviCivita, ConnectionChoice::Metric] {
            let tr = integrate(sb, choice, &start, 1.0, 1e-3, Some(&sb.chart.default_box)).unwrap();
            fiber = fiber.max(tr.max_fiber_accel());
        }
        let coarse = integrate(sb, ConnectionChoice::LeviCivita, &start, 1.0, 1e-2, None).unwrap();
        ogap = ogap.max(oracle_gap(&coarse, &oracle_geodesic(sb, &start, 1.0, 1e-2).unwrap()));
    }
    pass &= order >= 3.0 && fiber < 1e-6 && ogap < 1e-4;
    items.push(format!("min order {order:.2}, max fiber accel {fiber:.1e}, oracle gap {ogap:.1e}"));
    outcome(pass, items.join("; "))
}

fn cli() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .expect("scenarios directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "conf"))
        .collect();
    files.sort();
    let t0 = Instant::now();
    let mut fails = Vec::new();
    let mut first = Vec::new();
    for f in &files {
        let out = Command::new(env!("CARGO_BIN_EXE_sasaki")).arg("verify").arg("--config").arg(f).output().unwrap();
        if !out.status.success() {
            fails.push(format!("{} exit {:?}", f.display(), out.status.code()));
        }
        first.push(out.stdout);
    }
    let el = t0.elapsed();
    for (f, a) in files.iter().zip(&first) {
        let b = Command::new(env!("CARGO_BIN_EXE_sasaki")).arg("verify").arg("--config").arg(f).output().unwrap();
        if &b.stdout != a {
            fails.push(format!("{} differs between runs", f.display()));
        }
    }
    outcome(
        fails.is_empty() && !files.is_empty() && el < Duration::from_secs(120),
        format!("{} scenarios in {:.1} s {}", files.len(), el.as_secs_f64(), fails.join(" ")),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("connection vs oracle", connection_oracle),
        ("curvature vs oracle", curvature_oracle),
        ("flatness", flatness),
        ("scalar curvature", scalar_curvature),
        ("structures", structures),
        ("metric connections", metric_connections),
        ("geodesics", geodesics),
        ("cli verify", cli),
    ];
    let mut all = true;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        all &= o.pass;
        println!("criterion {} {:<22} {} {}", k + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail.trim_end());
    }
    if !all {
        std::process::exit(1);
    }
}
