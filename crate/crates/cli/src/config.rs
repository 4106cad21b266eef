//! Scenario files: flat `key = value` text with `#` comments.
//!
//! Recognised keys: `name`, `base.preset` (`euclidean`, `sphere`,
//! `hyperbolic`, `product`, `custom`), `base.n`, `base.radius`, `base.flat`,
//! `base.g.i.j` (1-based, custom charts), `f.expr`, `bundle.p`, `bundle.q`,
//! `box.i.min`, `box.i.max`, `fiber.range`, `tol.<check-id>`, `seed`,
//! `samples`, `geodesic.s_max`, `geodesic.step`, `geodesic.x`, `geodesic.t`,
//! `geodesic.xdot`, `geodesic.tdot` (comma-separated lists).

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sasaki_core::base::{ChartBox, ManifoldChart, Preset};
use sasaki_core::expr::Expression;
use sasaki_core::sasaki::{RescaleFunction, SasakiBundle};
use sasaki_core::Error;

/// Largest fiber dimension accepted by a scenario.
pub const MAX_FIBER_DIM: usize = 256;

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub chart: ManifoldChart,
    pub f_src: String,
    pub f: RescaleFunction,
    pub p: usize,
    pub q: usize,
    pub bx: ChartBox,
    pub fiber_range: f64,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
    pub samples: usize,
    pub geodesic: GeodesicConfig,
}

#[derive(Clone, Debug, Default)]
pub struct GeodesicConfig {
    pub s_max: Option<f64>,
    pub step: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub t: Option<Vec<f64>>,
    pub xdot: Option<Vec<f64>>,
    pub tdot: Option<Vec<f64>>,
}

fn cfg_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

/// Parses `key = value` lines into an ordered map; later keys override.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, Error> {
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| cfg_err(&format!("line {}", k + 1), "expected `key = value`"))?;
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, Error> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse::<T>()
            .map(Some)
            .map_err(|_| cfg_err(key, format!("cannot parse `{v}`"))),
    }
}

fn list(map: &BTreeMap<String, String>, key: &str) -> Result<Option<Vec<f64>>, Error> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| cfg_err(key, format!("cannot parse `{s}`"))))
            .collect::<Result<Vec<_>, _>>()
            .map(Some),
    }
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Scenario, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(&path.display().to_string(), e.to_string()))?;
        Scenario::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Scenario, Error> {
        Scenario::from_pairs(&parse_pairs(text)?)
    }

    pub fn from_pairs(map: &BTreeMap<String, String>) -> Result<Scenario, Error> {
        let known_prefixes = ["tol.", "box.", "base.g."];
        let known = [
            "name",
            "base.preset",
            "base.n",
            "base.radius",
            "base.flat",
            "f.expr",
            "bundle.p",
            "bundle.q",
            "fiber.range",
            "seed",
            "samples",
            "geodesic.s_max",
            "geodesic.step",
            "geodesic.x",
            "geodesic.t",
            "geodesic.xdot",
            "geodesic.tdot",
        ];
        for key in map.keys() {
            if !known.contains(&key.as_str()) && !known_prefixes.iter().any(|p| key.starts_with(p)) {
                return Err(cfg_err(key, "unknown key"));
            }
        }
        let preset = map.get("base.preset").map(String::as_str).unwrap_or("euclidean");
        let n_opt: Option<usize> = num(map, "base.n")?;
        let radius: f64 = num(map, "base.radius")?.unwrap_or(1.0);
        let chart = match preset {
            "euclidean" => ManifoldChart::preset(&Preset::Euclidean(n_opt.unwrap_or(2))),
            "sphere" => ManifoldChart::preset(&Preset::Sphere(radius)),
            "hyperbolic" => ManifoldChart::preset(&Preset::Hyperbolic(n_opt.unwrap_or(2))),
            "product" => ManifoldChart::preset(&Preset::Product {
                radius,
                flat: num(map, "base.flat")?.unwrap_or(1),
            }),
            "custom" => {
                let n = n_opt.ok_or_else(|| cfg_err("base.n", "custom base needs base.n"))?;
                let mut g = Vec::with_capacity(n * n);
                for i in 1..=n {
                    for j in 1..=n {
                        let key = format!("base.g.{i}.{j}");
                        let alt = format!("base.g.{j}.{i}");
                        let src = map.get(&key).or_else(|| map.get(&alt)).map(String::as_str).unwrap_or(if i == j { "1" } else { "0" });
                        g.push(Expression::parse_in(src, n).map_err(|e| cfg_err(&key, e.to_string()))?);
                    }
                }
                ManifoldChart::custom("custom", n, g)
            }
            other => return Err(cfg_err("base.preset", format!("unknown preset `{other}`"))),
        }
        .map_err(|e| cfg_err("base", e.to_string()))?;
        let n = chart.n;
        let f_src = map.get("f.expr").cloned().unwrap_or_else(|| "1".into());
        let f = RescaleFunction::parse(&f_src, n).map_err(|e| cfg_err("f.expr", e.to_string()))?;
        let p: usize = num(map, "bundle.p")?.unwrap_or(1);
        let q: usize = num(map, "bundle.q")?.unwrap_or(1);
        let fd = n.checked_pow((p + q) as u32).unwrap_or(usize::MAX);
        if fd > MAX_FIBER_DIM {
            return Err(cfg_err("bundle", format!("fiber dimension {fd} exceeds {MAX_FIBER_DIM}")));
        }
        let mut bx = chart.default_box.clone();
        for i in 0..n {
            if let Some(v) = num::<f64>(map, &format!("box.{}.min", i + 1))? {
                bx.min[i] = v;
            }
            if let Some(v) = num::<f64>(map, &format!("box.{}.max", i + 1))? {
                bx.max[i] = v;
            }
            if bx.min[i].is_nan() || bx.max[i].is_nan() || bx.min[i] >= bx.max[i] {
                return Err(cfg_err(&format!("box.{}", i + 1), "min must be below max"));
            }
        }
        for key in map.keys().filter(|k| k.starts_with("box.")) {
            let parts: Vec<&str> = key.split('.').collect();
            let ok = parts.len() == 3
                && parts[1].parse::<usize>().is_ok_and(|i| (1..=n).contains(&i))
                && (parts[2] == "min" || parts[2] == "max");
            if !ok {
                return Err(cfg_err(key, "expected box.<1..n>.min or box.<1..n>.max"));
            }
        }
        let mut tolerances = BTreeMap::new();
        for (k, v) in map.iter().filter(|(k, _)| k.starts_with("tol.")) {
            let t: f64 = v.parse().map_err(|_| cfg_err(k, format!("cannot parse `{v}`")))?;
            tolerances.insert(k["tol.".len()..].to_string(), t);
        }
        let samples: usize = num(map, "samples")?.unwrap_or(8);
        if samples == 0 {
            return Err(cfg_err("samples", "must be positive"));
        }
        let geodesic = GeodesicConfig {
            s_max: num(map, "geodesic.s_max")?,
            step: num(map, "geodesic.step")?,
            x: list(map, "geodesic.x")?,
            t: list(map, "geodesic.t")?,
            xdot: list(map, "geodesic.xdot")?,
            tdot: list(map, "geodesic.tdot")?,
        };
        Ok(Scenario {
            name: map.get("name").cloned().unwrap_or_else(|| chart.name.clone()),
            chart,
            f_src,
            f,
            p,
            q,
            bx,
            fiber_range: num(map, "fiber.range")?.unwrap_or(1.0),
            tolerances,
            seed: num(map, "seed")?.unwrap_or(0),
            samples,
            geodesic,
        })
    }

    pub fn bundle(&self) -> Result<SasakiBundle, Error> {
        SasakiBundle::new(self.chart.clone(), self.f.clone(), self.p, self.q)
    }

    pub fn tol(&self, id: &str, default: f64) -> f64 {
        self.tolerances.get(id).copied().unwrap_or(default)
    }

    /// Seeded sample points `(x, t)`: base uniform in the box shrunk by 5%
    /// on each side, fiber uniform in `[-range, range]`.
    pub fn sample_points(&self, count: usize, stream: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        let n = self.chart.n;
        let fd = n.pow((self.p + self.q) as u32);
        (0..count)
            .map(|_| {
                let mut y: Vec<f64> = (0..n)
                    .map(|i| {
                        let w = self.bx.max[i] - self.bx.min[i];
                        rng.random_range(self.bx.min[i] + 0.05 * w..self.bx.max[i] - 0.05 * w)
                    })
                    .collect();
                y.extend((0..fd).map(|_| rng.random_range(-self.fiber_range..=self.fiber_range)));
                y
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sphere_scenario() {
        let s = Scenario::from_text(
            "# comment\nbase.preset = sphere\nf.expr = exp(x1/5)\nseed = 7\nsamples = 3\ntol.thm1.oracle = 1e-7\n",
        )
        .unwrap();
        assert_eq!(s.chart.n, 2);
        assert_eq!(s.samples, 3);
        assert_eq!(s.tol("thm1.oracle", 1.0), 1e-7);
        let a = s.sample_points(3, 1);
        assert_eq!(a, s.sample_points(3, 1));
        assert_ne!(a, s.sample_points(3, 2));
        assert!(a.iter().all(|y| s.bx.contains(&y[..2]) && y.len() == 6));
    }

    #[test]
    fn reports_field_paths() {
        let e = Scenario::from_text("base.preset = torus\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "base.preset"));
        let e = Scenario::from_text("f.expr = exp(x3)\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "f.expr"));
        let e = Scenario::from_text("bundle.p = 9\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "bundle"));
        let e = Scenario::from_text("colour = red\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "colour"));
    }

    #[test]
    fn custom_metric() {
        let s = Scenario::from_text("base.preset = custom\nbase.n = 2\nbase.g.2.2 = 1 + x1^2\n").unwrap();
        let g = s.chart.metric_values(&[0.5, 0.0]).unwrap();
        assert_eq!(g, vec![1.0, 0.0, 0.0, 1.25]);
    }
}
