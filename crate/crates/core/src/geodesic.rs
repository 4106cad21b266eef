//! Geodesics of the bundle for the Levi-Civita and the torsionful metric
//! connection, horizontal lifts of base curves, and residual diagnostics.
//!
//! A curve state is `(y, ω)`: natural coordinates `y = (x, t)` and the
//! adapted velocity `ω = (ẋ, δt/ds)`, so `ẏ = F ω` and the geodesic equation
//! reads `dω^a/ds + C^a_{bc} ω^b ω^c = 0`.

use std::io::Write;

use crate::base::ChartBox;
use crate::error::{Error, Result};
use crate::fiber::FiberType;
use crate::metric_conn::metric_connection_pq;
use crate::oracle::oracle_at;
use crate::sasaki::{levi_civita_pq, BundleAt, ConnectionField, SasakiBundle};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConnectionChoice {
    LeviCivita,
    Metric,
}

impl ConnectionChoice {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "levi-civita" | "lc" => Some(ConnectionChoice::LeviCivita),
            "metric" => Some(ConnectionChoice::Metric),
            _ => None,
        }
    }

    pub fn connection(self, b: &BundleAt) -> ConnectionField {
        match self {
            ConnectionChoice::LeviCivita => levi_civita_pq(b),
            ConnectionChoice::Metric => metric_connection_pq(b),
        }
    }
}

/// Initial data of a bundle curve.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveStart {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub xdot: Vec<f64>,
    /// Covariant fiber velocity `δt/ds`.
    pub tdot: Vec<f64>,
}

impl CurveStart {
    fn state(&self, bundle: &SasakiBundle) -> Result<Vec<f64>> {
        let fd = bundle.ft.dim();
        let n = bundle.n();
        for (name, v, len) in [("x", &self.x, n), ("t", &self.t, fd), ("xdot", &self.xdot, n), ("tdot", &self.tdot, fd)] {
            if v.len() != len {
                return Err(Error::Config {
                    path: format!("geodesic.{name}"),
                    message: format!("expected {len} components, got {}", v.len()),
                });
            }
        }
        let mut s = self.x.clone();
        s.extend(&self.t);
        s.extend(&self.xdot);
        s.extend(&self.tdot);
        Ok(s)
    }
}

/// One sample of a trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceSample {
    pub s: f64,
    pub y: Vec<f64>,
    pub omega: Vec<f64>,
    /// Norm of `dω/ds + C(ω, ω)` from finite differences of the positions.
    pub residual: Option<f64>,
    /// Norm of `δ²t/ds²` from finite differences of the positions.
    pub fiber_accel: Option<f64>,
    pub energy: f64,
}

#[derive(Clone, Debug)]
pub struct GeodesicTrace {
    pub ft: FiberType,
    pub step: f64,
    pub samples: Vec<TraceSample>,
}

impl GeodesicTrace {
    pub fn max_residual(&self) -> f64 {
        self.samples.iter().filter_map(|s| s.residual).fold(0.0, f64::max)
    }

    pub fn max_fiber_accel(&self) -> f64 {
        self.samples.iter().filter_map(|s| s.fiber_accel).fold(0.0, f64::max)
    }

    /// `max |E(s) - E(0)| / E(0)`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.samples[0].energy;
        let scale = if e0.abs() > 0.0 { e0.abs() } else { 1.0 };
        self.samples.iter().map(|s| (s.energy - e0).abs() / scale).fold(0.0, f64::max)
    }

    pub fn last(&self) -> &TraceSample {
        self.samples.last().expect("trace has at least one sample")
    }

    /// CSV with columns `s, x1..xn, t_<idx>.., xdot1..xdotn, dt_<idx>..,
    /// residual, energy`; residual is blank where the stencil does not fit.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.ft.n;
        let fd = self.ft.dim();
        let mut header = vec!["s".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((0..fd).map(|k| self.ft.label(k)));
        header.extend((1..=n).map(|i| format!("xdot{i}")));
        header.extend((0..fd).map(|k| format!("d{}", self.ft.label(k))));
        header.push("residual".into());
        header.push("energy".into());
        writeln!(w, "{}", header.join(","))?;
        for smp in &self.samples {
            let mut row = vec![format!("{:.12e}", smp.s)];
            row.extend(smp.y.iter().map(|v| format!("{v:.12e}")));
            row.extend(smp.omega.iter().map(|v| format!("{v:.12e}")));
            row.push(smp.residual.map(|r| format!("{r:.6e}")).unwrap_or_default());
            row.push(format!("{:.12e}", smp.energy));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Right-hand side of the first-order system in `(y, ω)`.
pub trait CurveRhs {
    fn eval(&self, bundle: &SasakiBundle, state: &[f64]) -> Result<Vec<f64>>;
}

/// Geodesic flow of a bundle connection.
pub struct GeodesicRhs(pub ConnectionChoice);

impl CurveRhs for GeodesicRhs {
    fn eval(&self, bundle: &SasakiBundle, state: &[f64]) -> Result<Vec<f64>> {
        let dim = bundle.dim();
        let (y, w) = state.split_at(dim);
        let b = bundle.at_order(y, 2)?;
        let c = self.0.connection(&b);
        let mut out = b.natural(w);
        out.extend(c.apply(w, w).iter().map(|v| -v));
        Ok(out)
    }
}

/// Base geodesic with the fiber point parallel along it: `δt/ds = 0`.
pub struct HorizontalLiftRhs;

impl CurveRhs for HorizontalLiftRhs {
    fn eval(&self, bundle: &SasakiBundle, state: &[f64]) -> Result<Vec<f64>> {
        let dim = bundle.dim();
        let n = bundle.n();
        let (y, w) = state.split_at(dim);
        let b = bundle.at_order(y, 1)?;
        let mut hw = w[..n].to_vec();
        hw.resize(dim, 0.0);
        let mut out = b.natural(&hw);
        for r in 0..n {
            let mut acc = 0.0;
            for l in 0..n {
                for j in 0..n {
                    acc += b.geom.gamma(r, l, j) * w[l] * w[j];
                }
            }
            out.push(-acc);
        }
        out.extend(std::iter::repeat_n(0.0, dim - n));
        Ok(out)
    }
}

fn check_state(bundle: &SasakiBundle, state: &[f64], s: f64, bx: Option<&ChartBox>) -> Result<()> {
    if state.iter().any(|v| !v.is_finite()) {
        return Err(Error::StepUnderflow { s });
    }
    let x = &state[..bundle.n()];
    if let Some(bx) = bx {
        if !bx.contains(x) {
            return Err(Error::ChartExit { point: x.to_vec() });
        }
    }
    Ok(())
}

fn axpy(a: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    a.iter().zip(k).map(|(u, v)| u + h * v).collect()
}

/// Classical fixed-step RK4 from `s = 0` to `s_max`. The step is adjusted so
/// a whole number of steps ends at `s_max`. Returns the states on the grid.
pub fn rk4<R: CurveRhs>(
    bundle: &SasakiBundle,
    rhs: &R,
    start: Vec<f64>,
    s_max: f64,
    step: f64,
    bx: Option<&ChartBox>,
) -> Result<Vec<(f64, Vec<f64>)>> {
    if !(step > 0.0 && step.is_finite()) || s_max.is_nan() || s_max < 0.0 {
        return Err(Error::BadParameter(format!("step must be positive, got {step}")));
    }
    let steps = (s_max / step).round().max(0.0) as usize;
    let h = if steps == 0 { 0.0 } else { s_max / steps as f64 };
    check_state(bundle, &start, 0.0, bx)?;
    let mut out = Vec::with_capacity(steps + 1);
    let mut state = start;
    out.push((0.0, state.clone()));
    for k in 0..steps {
        let s = k as f64 * h;
        let k1 = rhs.eval(bundle, &state)?;
        let k2 = rhs.eval(bundle, &axpy(&state, 0.5 * h, &k1))?;
        let k3 = rhs.eval(bundle, &axpy(&state, 0.5 * h, &k2))?;
        let k4 = rhs.eval(bundle, &axpy(&state, h, &k3))?;
        for i in 0..state.len() {
            state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let s1 = (k + 1) as f64 * h;
        check_state(bundle, &state, s1, bx).map_err(|e| match e {
            Error::StepUnderflow { .. } => Error::StepUnderflow { s },
            other => other,
        })?;
        out.push((s1, state.clone()));
    }
    Ok(out)
}

fn five_point(v: &[Vec<f64>], k: usize, h: f64) -> Vec<f64> {
    (0..v[k].len())
        .map(|i| (-v[k + 2][i] + 8.0 * v[k + 1][i] - 8.0 * v[k - 1][i] + v[k - 2][i]) / (12.0 * h))
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `f g(ẋ, ẋ) + G(δt/ds, δt/ds)`.
pub fn energy(b: &BundleAt, omega: &[f64]) -> f64 {
    b.metric.inner_flat(omega, omega)
}

/// Builds a trace from grid states, with residuals of the geodesic equation
/// of `check` evaluated from finite differences of the positions only.
pub fn trace_from_states(
    bundle: &SasakiBundle,
    states: &[(f64, Vec<f64>)],
    check: ConnectionChoice,
) -> Result<GeodesicTrace> {
    let dim = bundle.dim();
    let n = bundle.n();
    let ft = bundle.ft;
    let h = if states.len() > 1 { states[1].0 - states[0].0 } else { 0.0 };
    let at: Vec<BundleAt> = states
        .iter()
        .map(|(_, st)| bundle.at_order(&st[..dim], 2))
        .collect::<Result<_>>()?;
    let ys: Vec<Vec<f64>> = states.iter().map(|(_, st)| st[..dim].to_vec()).collect();
    let m = states.len();
    // Adapted velocities from positions on the interior.
    let mut w_fd: Vec<Option<Vec<f64>>> = vec![None; m];
    if m >= 5 {
        for k in 2..m - 2 {
            w_fd[k] = Some(at[k].adapted(&five_point(&ys, k, h)));
        }
    }
    let mut samples = Vec::with_capacity(m);
    for k in 0..m {
        let (s, st) = &states[k];
        let omega = st[dim..].to_vec();
        let (mut residual, mut fiber_accel) = (None, None);
        if k >= 4 && k + 4 < m {
            let window: Vec<Vec<f64>> = (k - 2..=k + 2).map(|j| w_fd[j].clone().expect("interior")).collect();
            let dw = five_point(&window, 2, h);
            let w = &window[2];
            let c = check.connection(&at[k]);
            let cw = c.apply(w, w);
            let r: Vec<f64> = dw.iter().zip(&cw).map(|(a, b)| a + b).collect();
            residual = Some(norm(&r));
            let act = ft.action_matrix(&at[k].geom.gamma_dir(&w[..n]));
            let fdim = dim - n;
            let acc: Vec<f64> = (0..fdim)
                .map(|a| dw[n + a] + (0..fdim).map(|bb| act[a * fdim + bb] * w[n + bb]).sum::<f64>())
                .collect();
            fiber_accel = Some(norm(&acc));
        }
        samples.push(TraceSample {
            s: *s,
            y: st[..dim].to_vec(),
            energy: energy(&at[k], &omega),
            omega,
            residual,
            fiber_accel,
        });
    }
    Ok(GeodesicTrace { ft, step: h, samples })
}

/// Integrates the geodesic of `choice` and records residuals against the
/// same connection.
pub fn integrate(
    bundle: &SasakiBundle,
    choice: ConnectionChoice,
    start: &CurveStart,
    s_max: f64,
    step: f64,
    bx: Option<&ChartBox>,
) -> Result<GeodesicTrace> {
    let states = rk4(bundle, &GeodesicRhs(choice), start.state(bundle)?, s_max, step, bx)?;
    trace_from_states(bundle, &states, choice)
}

/// Horizontal lift of the base geodesic through `(x, xdot)` starting at the
/// fiber point `t`; residuals are those of the Levi-Civita geodesic equation.
pub fn horizontal_lift(
    bundle: &SasakiBundle,
    x: &[f64],
    xdot: &[f64],
    t: &[f64],
    s_max: f64,
    step: f64,
    bx: Option<&ChartBox>,
) -> Result<GeodesicTrace> {
    let start = CurveStart {
        x: x.to_vec(),
        t: t.to_vec(),
        xdot: xdot.to_vec(),
        tdot: vec![0.0; bundle.ft.dim()],
    };
    let states = rk4(bundle, &HorizontalLiftRhs, start.state(bundle)?, s_max, step, bx)?;
    trace_from_states(bundle, &states, ConnectionChoice::LeviCivita)
}

/// `|A(ẋ, ẋ)/2f|` at each trace sample, the defect a horizontal lift of a
/// base geodesic leaves in the bundle geodesic equation.
pub fn predicted_lift_defect(bundle: &SasakiBundle, trace: &GeodesicTrace) -> Result<Vec<f64>> {
    let n = bundle.n();
    trace
        .samples
        .iter()
        .map(|smp| {
            let b = bundle.at_order(&smp.y, 1)?;
            let v = &smp.omega[..n];
            let a: Vec<f64> = (0..n)
                .map(|r| {
                    let mut acc = 0.0;
                    for l in 0..n {
                        for j in 0..n {
                            acc += b.rs.a(r, l, j) * v[l] * v[j];
                        }
                    }
                    acc / (2.0 * b.rs.f)
                })
                .collect();
            Ok(norm(&a))
        })
        .collect()
}

/// `|ẍ + Γ(ẋ, ẋ)|` of the base projection at each sample, from finite
/// differences of the base positions; `None` near the ends.
pub fn base_geodesic_residuals(bundle: &SasakiBundle, trace: &GeodesicTrace) -> Result<Vec<Option<f64>>> {
    let n = bundle.n();
    let h = trace.step;
    let m = trace.samples.len();
    let xs: Vec<Vec<f64>> = trace.samples.iter().map(|s| s.y[..n].to_vec()).collect();
    let mut out = vec![None; m];
    if m < 5 {
        return Ok(out);
    }
    for k in 2..m - 2 {
        let geom = bundle.chart.geometry_at_order(&xs[k], 1)?;
        let v = five_point(&xs, k, h);
        let acc: Vec<f64> = (0..n)
            .map(|r| {
                let second = (-xs[k + 2][r] + 16.0 * xs[k + 1][r] - 30.0 * xs[k][r] + 16.0 * xs[k - 1][r] - xs[k - 2][r]) / (12.0 * h * h);
                let mut g = 0.0;
                for l in 0..n {
                    for j in 0..n {
                        g += geom.gamma(r, l, j) * v[l] * v[j];
                    }
                }
                second + g
            })
            .collect();
        out[k] = Some(norm(&acc));
    }
    Ok(out)
}

/// Geodesic of the natural-coordinate bundle metric integrated with RK4,
/// started from the same point and velocity. Returns natural positions.
pub fn oracle_geodesic(bundle: &SasakiBundle, start: &CurveStart, s_max: f64, step: f64) -> Result<Vec<(f64, Vec<f64>)>> {
    struct OracleRhs;
    impl CurveRhs for OracleRhs {
        fn eval(&self, bundle: &SasakiBundle, state: &[f64]) -> Result<Vec<f64>> {
            let dim = bundle.dim();
            let (y, v) = state.split_at(dim);
            let o = oracle_at(bundle, y, false)?;
            let mut out = v.to_vec();
            for a in 0..dim {
                let mut acc = 0.0;
                for bb in 0..dim {
                    for c in 0..dim {
                        acc += o.gamma[(a * dim + bb) * dim + c] * v[bb] * v[c];
                    }
                }
                out.push(-acc);
            }
            Ok(out)
        }
    }
    let dim = bundle.dim();
    let st = start.state(bundle)?;
    let b = bundle.at_order(&st[..dim], 1)?;
    let mut init = st[..dim].to_vec();
    init.extend(b.natural(&st[dim..]));
    Ok(rk4(bundle, &OracleRhs, init, s_max, step, None)?
        .into_iter()
        .map(|(s, v)| (s, v[..dim].to_vec()))
        .collect())
}

/// Largest pointwise distance between bundle-geodesic positions and
/// oracle-geodesic positions on a shared grid.
pub fn oracle_gap(trace: &GeodesicTrace, oracle: &[(f64, Vec<f64>)]) -> f64 {
    trace
        .samples
        .iter()
        .zip(oracle)
        .map(|(a, (_, y))| norm(&a.y.iter().zip(y).map(|(p, q)| p - q).collect::<Vec<_>>()))
        .fold(0.0, f64::max)
}

/// Step-halving study: endpoint gaps between steps `h`, `h/2` and `h/4`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderEstimate {
    pub coarse_gap: f64,
    pub fine_gap: f64,
}

impl OrderEstimate {
    pub fn order(&self) -> f64 {
        (self.coarse_gap / self.fine_gap).log2()
    }

    /// True when both gaps sit at rounding level, so no order is observable.
    pub fn exact(&self, scale: f64) -> bool {
        self.coarse_gap <= 1e-12 * scale.max(1.0)
    }
}

/// Observed order from endpoint differences at steps `h`, `h/2`, `h/4`.
pub fn observed_order(
    bundle: &SasakiBundle,
    choice: ConnectionChoice,
    start: &CurveStart,
    s_max: f64,
    h: f64,
) -> Result<OrderEstimate> {
    let st = start.state(bundle)?;
    let end = |step: f64| -> Result<Vec<f64>> {
        let states = rk4(bundle, &GeodesicRhs(choice), st.clone(), s_max, step, None)?;
        Ok(states.last().expect("nonempty").1.clone())
    };
    let (a, b, c) = (end(h)?, end(h / 2.0)?, end(h / 4.0)?);
    Ok(OrderEstimate {
        coarse_gap: norm(&a.iter().zip(&b).map(|(p, q)| p - q).collect::<Vec<_>>()),
        fine_gap: norm(&b.iter().zip(&c).map(|(p, q)| p - q).collect::<Vec<_>>()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{ManifoldChart, Preset};
    use crate::sasaki::RescaleFunction;
    use std::f64::consts::PI;

    fn bundle(preset: Preset, f: &str) -> SasakiBundle {
        let chart = ManifoldChart::preset(&preset).unwrap();
        let n = chart.n;
        SasakiBundle::new(chart, RescaleFunction::parse(f, n).unwrap(), 1, 1).unwrap()
    }

    #[test]
    fn flat_straight_line() {
        let sb = bundle(Preset::Euclidean(2), "1");
        let start = CurveStart {
            x: vec![-0.5, 0.0],
            t: vec![1.0, 2.0, 3.0, 4.0],
            xdot: vec![0.6, 0.3],
            tdot: vec![0.1, 0.0, -0.2, 0.0],
        };
        let tr = integrate(&sb, ConnectionChoice::LeviCivita, &start, 1.0, 1e-2, None).unwrap();
        let end = tr.last();
        assert!((end.y[0] - 0.1).abs() < 1e-10 && (end.y[1] - 0.3).abs() < 1e-10);
        assert!((end.y[2] - 1.1).abs() < 1e-10 && (end.y[4] - 2.8).abs() < 1e-10);
        assert!(tr.max_residual() < 1e-8);
    }

    #[test]
    fn exponential_rescale_acceleration() {
        let sb = bundle(Preset::Euclidean(2), "exp(x1)");
        let y = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let w = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let mut st = y.to_vec();
        st.extend(w);
        let d = GeodesicRhs(ConnectionChoice::LeviCivita).eval(&sb, &st).unwrap();
        assert!((d[6] + 0.5).abs() < 1e-14);
        assert!(d[7].abs() < 1e-14);
    }

    #[test]
    fn sphere_lift_and_oracle() {
        let sb = bundle(Preset::Sphere(1.0), "1");
        let tr = horizontal_lift(&sb, &[PI / 2.0, -PI / 2.0], &[0.5, 0.75f64.sqrt()], &[1.0, 0.3, -0.2, 0.5], PI, 1e-3, None).unwrap();
        assert!(tr.max_residual() < 1e-6, "{}", tr.max_residual());
        let start = CurveStart {
            x: vec![1.2, 0.1],
            t: vec![0.3, -0.2, 0.5, 0.1],
            xdot: vec![0.4, 0.3],
            tdot: vec![0.2, 0.1, 0.0, -0.3],
        };
        let tr = integrate(&sb, ConnectionChoice::LeviCivita, &start, 1.0, 1e-2, None).unwrap();
        let or = oracle_geodesic(&sb, &start, 1.0, 1e-2).unwrap();
        assert!(oracle_gap(&tr, &or) < 1e-6, "{}", oracle_gap(&tr, &or));
        assert!(tr.max_fiber_accel() < 1e-6);
        assert!(tr.energy_drift() < 1e-8);
        let order = observed_order(&sb, ConnectionChoice::LeviCivita, &start, 1.0, 0.1).unwrap().order();
        assert!(order > 3.0, "{order}");
    }

    #[test]
    fn lift_defect_with_exponential_rescale() {
        let sb = bundle(Preset::Euclidean(2), "exp(x1)");
        let tr = horizontal_lift(&sb, &[-0.5, -0.2], &[0.6, 0.3], &[1.0, 0.0, 0.0, 1.0], 1.0, 1e-3, None).unwrap();
        let pred = predicted_lift_defect(&sb, &tr).unwrap();
        let mut worst = 0.0f64;
        for (smp, p) in tr.samples.iter().zip(&pred) {
            if let Some(r) = smp.residual {
                worst = worst.max((r - p).abs());
                assert!(*p > 0.1);
            }
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn chart_exit_is_reported() {
        let sb = bundle(Preset::Euclidean(2), "1");
        let start = CurveStart {
            x: vec![0.0, 0.0],
            t: vec![0.0; 4],
            xdot: vec![2.0, 0.0],
            tdot: vec![0.0; 4],
        };
        let bx = ChartBox::uniform(2, -1.0, 1.0);
        let err = integrate(&sb, ConnectionChoice::LeviCivita, &start, 1.0, 0.1, Some(&bx)).unwrap_err();
        assert!(matches!(err, Error::ChartExit { .. }));
    }
}
