//! `sasaki` command-line front end.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use sasaki_cli::checks::{geodesic_start, run_verify};
use sasaki_cli::config::{parse_pairs, Scenario};
use sasaki_core::curvature::{
    constant_curvature_scalar, curvature_closed_form, fiber_norm_sq, max_abs_with_index, Block, Reading,
};
use sasaki_core::geodesic::{horizontal_lift, integrate, ConnectionChoice};
use sasaki_core::Error;

#[derive(Parser)]
#[command(name = "sasaki", version, about = "Rescaled Sasaki metrics on tensor bundles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override a tolerance or any scenario key, e.g. `--tol thm1.oracle=1e-6`.
    #[arg(long = "tol", value_name = "KEY=VAL")]
    tol: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the verification sweep and print one JSON record per check.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Comma-separated check id prefixes.
        #[arg(long, value_delimiter = ',')]
        checks: Option<Vec<String>>,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print curvature blocks, Ricci blocks and scalar curvature at a point.
    Curvature {
        #[command(flatten)]
        common: Common,
        /// Base point, comma-separated; defaults to the box center.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        point: Option<Vec<f64>>,
        /// Fiber point: `zero`, `identity` or comma-separated components.
        #[arg(long, default_value = "zero", allow_hyphen_values = true)]
        fiber: String,
    },
    /// Integrate a curve and write its CSV trace.
    Geodesic {
        #[command(flatten)]
        common: Common,
        /// `lc`, `metric` or `lift` (horizontal lift of a base geodesic).
        #[arg(long, default_value = "lc")]
        connection: String,
        #[arg(long)]
        s_max: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        /// CSV output path; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in base presets.
    Presets,
}

fn load(common: &Common) -> Result<Scenario, Error> {
    let mut map = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            parse_pairs(&text)?
        }
        None => Default::default(),
    };
    for kv in &common.tol {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config {
            path: kv.clone(),
            message: "expected KEY=VAL".into(),
        })?;
        let k = k.trim();
        let key = if k.starts_with("tol.") || !looks_like_check_id(k) { k.to_string() } else { format!("tol.{k}") };
        map.insert(key, v.trim().to_string());
    }
    if let Some(seed) = common.seed {
        map.insert("seed".into(), seed.to_string());
    }
    Scenario::from_pairs(&map)
}

fn looks_like_check_id(k: &str) -> bool {
    ["lemma", "thm", "prop", "eq", "sec", "struct"].iter().any(|p| k.starts_with(p))
}

fn fiber_point(arg: &str, n: usize, dim: usize) -> Result<Vec<f64>, Error> {
    match arg {
        "zero" => Ok(vec![0.0; dim]),
        "identity" if dim == n * n => Ok((0..dim).map(|k| if k / n == k % n { 1.0 } else { 0.0 }).collect()),
        "identity" => Err(Error::Config {
            path: "--fiber".into(),
            message: "identity needs a (1,1) bundle".into(),
        }),
        list => {
            let v = list
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Error::Config {
                    path: "--fiber".into(),
                    message: e.to_string(),
                })?;
            if v.len() != dim {
                return Err(Error::Config {
                    path: "--fiber".into(),
                    message: format!("expected {dim} components, got {}", v.len()),
                });
            }
            Ok(v)
        }
    }
}

fn curvature(sc: &Scenario, point: Option<Vec<f64>>, fiber: &str) -> anyhow::Result<()> {
    let sb = sc.bundle()?;
    let n = sb.n();
    let x = point.unwrap_or_else(|| sc.bx.center());
    if x.len() != n {
        return Err(Error::Config {
            path: "--point".into(),
            message: format!("expected {n} components"),
        }
        .into());
    }
    if !sc.bx.contains(&x) {
        return Err(Error::ChartExit { point: x }.into());
    }
    let mut y = x.clone();
    y.extend(fiber_point(fiber, n, sb.ft.dim())?);
    let b = sb.at(&y)?;
    if (sc.p, sc.q) != (1, 1) {
        anyhow::bail!("closed-form curvature is available for (1,1) bundles only");
    }
    let c = curvature_closed_form(&b, Reading::Repaired)?;
    let dim = b.dim();
    println!("point {:?}", y);
    println!("block  max|R|");
    for blk in Block::ALL {
        let mut m = 0.0f64;
        for a in 0..dim {
            for bb in 0..dim {
                for cc in 0..dim {
                    if Block::of(n, a, bb, cc) == blk {
                        for d in 0..dim {
                            m = m.max(c.get(a, bb, cc, d).abs());
                        }
                    }
                }
            }
        }
        println!("{}    {:.6e}", blk.name(), m);
    }
    println!("ricci  max|Ric|");
    for (name, hb, hc) in [("HH", true, true), ("HV", true, false), ("VH", false, true), ("VV", false, false)] {
        let mut m = 0.0f64;
        for bb in 0..dim {
            for cc in 0..dim {
                if (bb < n) == hb && (cc < n) == hc {
                    m = m.max(c.ricci(bb, cc).abs());
                }
            }
        }
        println!("{name}     {m:.6e}");
    }
    println!("max|R| overall {:.6e}", max_abs_with_index(&c.r).0);
    println!("scalar (contraction) {:.12}", c.scalar);
    println!("scalar (formula)     {:.12}", c.scalar_formula);
    println!("fL                   {:.12}", c.f_l);
    if let (Some(k), 2) = (sb.chart.kappa, n) {
        let s = constant_curvature_scalar(k, n, b.rs.f, fiber_norm_sq(&b.geom, &b.p.t), &b.p.t, c.f_l);
        println!("scalar (constant curvature) {s:.12}");
    }
    Ok(())
}

fn geodesic(sc: &Scenario, connection: &str, s_max: Option<f64>, step: Option<f64>, out: Option<PathBuf>) -> anyhow::Result<()> {
    let sb = sc.bundle()?;
    let start = geodesic_start(sc, &sb);
    let s_max = s_max.or(sc.geodesic.s_max).unwrap_or(1.0);
    let step = step.or(sc.geodesic.step).unwrap_or(1e-3);
    let trace = if connection == "lift" {
        horizontal_lift(&sb, &start.x, &start.xdot, &start.t, s_max, step, Some(&sc.bx))?
    } else {
        let choice = ConnectionChoice::parse(connection).ok_or_else(|| Error::Config {
            path: "--connection".into(),
            message: format!("unknown connection `{connection}`"),
        })?;
        integrate(&sb, choice, &start, s_max, step, Some(&sc.bx))?
    };
    match &out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(f);
            trace.write_csv(&mut w)?;
            w.flush()?;
        }
        None => trace.write_csv(std::io::stdout().lock())?,
    }
    let last = trace.last();
    let final_residual = trace.samples.iter().rev().find_map(|s| s.residual).unwrap_or(f64::NAN);
    eprintln!(
        "samples {}  s_end {:.6}  final residual {:.3e}  max residual {:.3e}  energy drift {:.3e}",
        trace.samples.len(),
        last.s,
        final_residual,
        trace.max_residual(),
        trace.energy_drift()
    );
    Ok(())
}

fn presets() {
    println!("euclidean   base.n = N            flat R^N, box [-1, 1]^N");
    println!("sphere      base.radius = R       round sphere in (theta, phi), curvature 1/R^2");
    println!("hyperbolic  base.n = N            upper half space, curvature -1, x_N in [0.5, 2]");
    println!("product     base.radius, base.flat  sphere times flat factor");
    println!("custom      base.n, base.g.i.j    metric components as expressions in x1..xn");
}

fn config_exit(e: &anyhow::Error) -> ExitCode {
    eprintln!("error: {e:#}");
    match e.downcast_ref::<Error>() {
        Some(Error::Config { .. }) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Verify { common, checks, out } => {
            let sc = match load(&common) {
                Ok(sc) => sc,
                Err(e) => return config_exit(&e.into()),
            };
            let report = match run_verify(&sc, checks.as_deref()) {
                Ok(r) => r,
                Err(e) => return config_exit(&e.into()),
            };
            let text = report.render();
            print!("{text}");
            if let Some(path) = out {
                if let Err(e) = std::fs::write(&path, &text) {
                    eprintln!("error: writing {}: {e}", path.display());
                    return ExitCode::from(1);
                }
            }
            if report.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Curvature { common, point, fiber } => {
            match load(&common).map_err(anyhow::Error::from).and_then(|sc| curvature(&sc, point, &fiber)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => config_exit(&e),
            }
        }
        Command::Geodesic {
            common,
            connection,
            s_max,
            step,
            out,
        } => match load(&common).map_err(anyhow::Error::from).and_then(|sc| geodesic(&sc, &connection, s_max, step, out)) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => config_exit(&e),
        },
        Command::Presets => {
            presets();
            ExitCode::SUCCESS
        }
    }
}
