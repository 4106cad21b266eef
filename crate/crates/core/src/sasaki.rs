//! The rescaled Sasaki metric on `T^p_q(M)` and its Levi-Civita connection.
//!
//! In the adapted frame the metric is block diagonal: `f g_{jl}` on the
//! horizontal block and the fiber inner product `G` (a factor `g` for every
//! upper slot, `g^{-1}` for every lower slot) on the vertical block.
//!
//! Connection coefficients are stored as `C^up_{dir, field}` with
//! `∇_{E_dir} E_field = C^up_{dir,field} E_up`.

use crate::base::{BaseGeometryAt, ManifoldChart};
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::fiber::{quad, FiberType};
use crate::frames::{omega, AdaptedField, FiberPoint, FrameTransition};

/// Positive scalar `f` rescaling the horizontal block.
#[derive(Clone, Debug)]
pub struct RescaleFunction {
    pub expr: Expression,
}

impl RescaleFunction {
    pub fn new(expr: Expression) -> Self {
        RescaleFunction { expr }
    }

    pub fn parse(src: &str, n: usize) -> Result<Self> {
        Ok(RescaleFunction {
            expr: Expression::parse_in(src, n)?,
        })
    }

    pub fn constant(c: f64) -> Self {
        RescaleFunction {
            expr: Expression::constant(c),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.expr.is_constant()
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let v = self.expr.eval(x)?;
        if v.is_nan() || v <= 0.0 {
            return Err(Error::NonPositiveRescale {
                point: x.to_vec(),
                value: v,
            });
        }
        Ok(v)
    }
}

/// `f` and the tensors built from it at one base point.
#[derive(Clone, Debug)]
pub struct RescaleAt {
    pub n: usize,
    pub f: f64,
    /// `f_i = ∂_i f`.
    pub df: Vec<f64>,
    /// `∂_i ∂_j f`.
    pub ddf: Vec<f64>,
    /// `f^h = g^{hm} f_m`.
    pub df_up: Vec<f64>,
    /// `A^h_{ji} = f_j δ^h_i + f_i δ^h_j - f^h g_{ji}`, stored `[h][j][i]`.
    pub a: Vec<f64>,
    /// `∇_m (A^h_{ji} / 2f)`, stored `[m][h][j][i]`.
    pub nabla_b: Vec<f64>,
}

impl RescaleAt {
    pub fn new(f: &RescaleFunction, geom: &BaseGeometryAt) -> Result<Self> {
        let n = geom.n;
        let x = &geom.x;
        let tower = f.expr.eval_tower(x, 2)?;
        let fv = tower.value;
        if fv.is_nan() || fv <= 0.0 {
            return Err(Error::NonPositiveRescale {
                point: x.to_vec(),
                value: fv,
            });
        }
        let df: Vec<f64> = (0..n).map(|i| tower.partial(&[i]).unwrap()).collect();
        let mut ddf = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                ddf[i * n + j] = tower.partial(&[i, j]).unwrap();
            }
        }
        let df_up: Vec<f64> = (0..n).map(|h| (0..n).map(|m| geom.gi(h, m) * df[m]).sum()).collect();
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let mut a = vec![0.0; n * n * n];
        for h in 0..n {
            for j in 0..n {
                for i in 0..n {
                    a[(h * n + j) * n + i] = df[j] * delta(h, i) + df[i] * delta(h, j) - df_up[h] * geom.g(j, i);
                }
            }
        }
        // ∂_m f^h = ∂_m g^{ha} f_a + g^{ha} f_{am},  ∂_m g^{ha} = -g^{hb} ∂_m g_{bc} g^{ca}.
        let mut d_df_up = vec![0.0; n * n];
        for m in 0..n {
            for h in 0..n {
                let mut v = 0.0;
                for aa in 0..n {
                    let mut dginv = 0.0;
                    for b in 0..n {
                        for c in 0..n {
                            dginv -= geom.gi(h, b) * geom.dg(m, b, c) * geom.gi(c, aa);
                        }
                    }
                    v += dginv * df[aa] + geom.gi(h, aa) * ddf[aa * n + m];
                }
                d_df_up[m * n + h] = v;
            }
        }
        // ∂_m B with B = A / 2f.
        let mut db = vec![0.0; n * n * n * n];
        for m in 0..n {
            for h in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        let da = ddf[j * n + m] * delta(h, i) + ddf[i * n + m] * delta(h, j)
                            - d_df_up[m * n + h] * geom.g(j, i)
                            - df_up[h] * geom.dg(m, j, i);
                        let av = a[(h * n + j) * n + i];
                        db[((m * n + h) * n + j) * n + i] = da / (2.0 * fv) - av * df[m] / (2.0 * fv * fv);
                    }
                }
            }
        }
        let b = |h: usize, j: usize, i: usize| a[(h * n + j) * n + i] / (2.0 * fv);
        let mut nabla_b = db.clone();
        for m in 0..n {
            for h in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        let mut v = 0.0;
                        for s in 0..n {
                            v += geom.gamma(h, m, s) * b(s, j, i) - geom.gamma(s, m, j) * b(h, s, i) - geom.gamma(s, m, i) * b(h, j, s);
                        }
                        nabla_b[((m * n + h) * n + j) * n + i] += v;
                    }
                }
            }
        }
        Ok(RescaleAt {
            n,
            f: fv,
            df,
            ddf,
            df_up,
            a,
            nabla_b,
        })
    }

    #[inline]
    pub fn a(&self, h: usize, j: usize, i: usize) -> f64 {
        self.a[(h * self.n + j) * self.n + i]
    }

    /// `A^h_{ji} / 2f`.
    #[inline]
    pub fn b(&self, h: usize, j: usize, i: usize) -> f64 {
        self.a(h, j, i) / (2.0 * self.f)
    }

    #[inline]
    pub fn nabla_b(&self, m: usize, h: usize, j: usize, i: usize) -> f64 {
        let n = self.n;
        self.nabla_b[((m * n + h) * n + j) * n + i]
    }

    /// `K^r_{mlj} = ∇_m B^r_{lj} - ∇_l B^r_{mj} + B^r_{ms} B^s_{lj} - B^r_{ls} B^s_{mj}`
    /// with `B = A/2f`, stored `[m][l][j][r]`.
    pub fn flatness_combination(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n * n * n];
        for m in 0..n {
            for l in 0..n {
                for j in 0..n {
                    for r in 0..n {
                        let mut v = self.nabla_b(m, r, l, j) - self.nabla_b(l, r, m, j);
                        for s in 0..n {
                            v += self.b(r, m, s) * self.b(s, l, j) - self.b(r, l, s) * self.b(s, m, j);
                        }
                        out[((m * n + l) * n + j) * n + r] = v;
                    }
                }
            }
        }
        out
    }

    /// `fL = (1/f) g^{lj} K^r_{rlj}`.
    pub fn f_l(&self, geom: &BaseGeometryAt) -> f64 {
        let n = self.n;
        let k = self.flatness_combination();
        let mut s = 0.0;
        for l in 0..n {
            for j in 0..n {
                for r in 0..n {
                    s += geom.gi(l, j) * k[((r * n + l) * n + j) * n + r];
                }
            }
        }
        s / self.f
    }
}

/// Metric and inverse in the adapted frame at one point.
#[derive(Clone, Debug)]
pub struct BundleMetricAt {
    pub n: usize,
    pub fiber_dim: usize,
    pub f: f64,
    pub g: Vec<f64>,
    pub g_inv: Vec<f64>,
    /// Fiber block `G`, row-major.
    pub fiber: Vec<f64>,
    /// Inverse of the fiber block.
    pub fiber_inv: Vec<f64>,
}

impl BundleMetricAt {
    pub fn new(ft: FiberType, geom: &BaseGeometryAt, f: f64) -> Result<Self> {
        if f.is_nan() || f <= 0.0 {
            return Err(Error::NonPositiveRescale {
                point: geom.x.clone(),
                value: f,
            });
        }
        Ok(BundleMetricAt {
            n: geom.n,
            fiber_dim: ft.dim(),
            f,
            g: geom.g.clone(),
            g_inv: geom.g_inv.clone(),
            fiber: ft.fiber_metric(&geom.g, &geom.g_inv),
            fiber_inv: ft.fiber_metric(&geom.g_inv, &geom.g),
        })
    }

    pub fn dim(&self) -> usize {
        self.n + self.fiber_dim
    }

    /// Component `(a, b)` of the full adapted-frame metric.
    pub fn component(&self, a: usize, b: usize) -> f64 {
        let n = self.n;
        match (a < n, b < n) {
            (true, true) => self.f * self.g[a * n + b],
            (false, false) => self.fiber[(a - n) * self.fiber_dim + (b - n)],
            _ => 0.0,
        }
    }

    pub fn inverse_component(&self, a: usize, b: usize) -> f64 {
        let n = self.n;
        match (a < n, b < n) {
            (true, true) => self.g_inv[a * n + b] / self.f,
            (false, false) => self.fiber_inv[(a - n) * self.fiber_dim + (b - n)],
            _ => 0.0,
        }
    }

    pub fn matrix(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d * d).map(|k| self.component(k / d, k % d)).collect()
    }

    pub fn inverse_matrix(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d * d).map(|k| self.inverse_component(k / d, k % d)).collect()
    }

    pub fn inner(&self, a: &AdaptedField, b: &AdaptedField) -> f64 {
        self.f * quad(&self.g, &a.h, &b.h) + quad(&self.fiber, &a.v, &b.v)
    }

    pub fn inner_flat(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.n;
        self.f * quad(&self.g, &a[..n], &b[..n]) + quad(&self.fiber, &a[n..], &b[n..])
    }

    /// Lowers a flat adapted vector.
    pub fn lower(&self, a: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|i| (0..d).map(|j| self.component(i, j) * a[j]).sum()).collect()
    }

    pub fn raise(&self, a: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|i| (0..d).map(|j| self.inverse_component(i, j) * a[j]).sum()).collect()
    }
}

/// Connection coefficients `C^up_{dir,field}` over adapted indices.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionField {
    pub dim: usize,
    pub c: Vec<f64>,
}

impl ConnectionField {
    pub fn zeros(dim: usize) -> Self {
        ConnectionField {
            dim,
            c: vec![0.0; dim * dim * dim],
        }
    }

    #[inline]
    pub fn get(&self, up: usize, dir: usize, field: usize) -> f64 {
        self.c[(up * self.dim + dir) * self.dim + field]
    }

    #[inline]
    pub fn set(&mut self, up: usize, dir: usize, field: usize, v: f64) {
        self.c[(up * self.dim + dir) * self.dim + field] = v;
    }

    /// `∇_{E_dir} E_field` as a flat adapted vector.
    pub fn nabla_frame(&self, dir: usize, field: usize) -> Vec<f64> {
        (0..self.dim).map(|u| self.get(u, dir, field)).collect()
    }

    /// Connection term `C^α_{βγ} X^β Y^γ`.
    pub fn apply(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d];
        for b in 0..d {
            if x[b] == 0.0 {
                continue;
            }
            for c in 0..d {
                if y[c] == 0.0 {
                    continue;
                }
                let w = x[b] * y[c];
                for (a, o) in out.iter_mut().enumerate() {
                    *o += self.get(a, b, c) * w;
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &ConnectionField) -> f64 {
        self.c.iter().zip(&other.c).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Index of the largest deviation as `(up, dir, field)`.
    pub fn argmax_diff(&self, other: &ConnectionField) -> (usize, usize, usize) {
        let mut best = (0, 0.0);
        for (k, (a, b)) in self.c.iter().zip(&other.c).enumerate() {
            if (a - b).abs() > best.1 {
                best = (k, (a - b).abs());
            }
        }
        let d = self.dim;
        (best.0 / (d * d), (best.0 / d) % d, best.0 % d)
    }

    pub fn sub(&self, other: &ConnectionField) -> ConnectionField {
        ConnectionField {
            dim: self.dim,
            c: self.c.iter().zip(&other.c).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add(&self, other: &ConnectionField) -> ConnectionField {
        ConnectionField {
            dim: self.dim,
            c: self.c.iter().zip(&other.c).map(|(a, b)| a + b).collect(),
        }
    }
}

/// Everything known about the bundle at one point.
#[derive(Clone, Debug)]
pub struct BundleAt {
    pub p: FiberPoint,
    pub geom: BaseGeometryAt,
    pub rs: RescaleAt,
    pub metric: BundleMetricAt,
    pub frame: FrameTransition,
}

impl BundleAt {
    pub fn n(&self) -> usize {
        self.geom.n
    }

    pub fn ft(&self) -> FiberType {
        self.p.ft
    }

    pub fn dim(&self) -> usize {
        self.p.ft.total_dim()
    }

    /// Natural-coordinate vector of the adapted vector `w`.
    pub fn natural(&self, w: &[f64]) -> Vec<f64> {
        self.frame.to_natural(&AdaptedField::from_flat(w, self.n()))
    }

    pub fn adapted(&self, y: &[f64]) -> Vec<f64> {
        self.frame.to_adapted(y).flat()
    }
}

/// The bundle `(T^p_q(M), metric rescaled by f)` with a finite-difference step
/// for frame derivatives of fields.
#[derive(Clone, Debug)]
pub struct SasakiBundle {
    pub chart: ManifoldChart,
    pub f: RescaleFunction,
    pub ft: FiberType,
    pub fd_step: f64,
}

impl SasakiBundle {
    pub fn new(chart: ManifoldChart, f: RescaleFunction, p: usize, q: usize) -> Result<Self> {
        if f.expr.arity() > chart.n {
            return Err(Error::UnknownIdentifier {
                name: format!("x{}", f.expr.arity()),
                offset: 0,
            });
        }
        let ft = FiberType::new(chart.n, p, q);
        Ok(SasakiBundle {
            chart,
            f,
            ft,
            fd_step: 1e-5,
        })
    }

    pub fn n(&self) -> usize {
        self.chart.n
    }

    pub fn dim(&self) -> usize {
        self.ft.total_dim()
    }

    pub fn point(&self, x: &[f64], t: &[f64]) -> Result<FiberPoint> {
        FiberPoint::new(x.to_vec(), t.to_vec(), self.ft)
    }

    /// Full data at the point with natural coordinates `y = (x, t)`.
    pub fn at(&self, y: &[f64]) -> Result<BundleAt> {
        self.at_order(y, 3)
    }

    /// Data at `y` with base metric derivatives up to `order` (see
    /// [`ManifoldChart::geometry_at_order`]).
    pub fn at_order(&self, y: &[f64], order: usize) -> Result<BundleAt> {
        let p = FiberPoint::from_coords(y, self.ft)?;
        let geom = self.chart.geometry_at_order(&p.x, order)?;
        let rs = RescaleAt::new(&self.f, &geom)?;
        let metric = BundleMetricAt::new(self.ft, &geom, rs.f)?;
        let frame = FrameTransition::at(&p, &geom);
        Ok(BundleAt {
            p,
            geom,
            rs,
            metric,
            frame,
        })
    }

    /// Levi-Civita connection at `y` by the general fiber-algebra formulas.
    pub fn levi_civita(&self, y: &[f64]) -> Result<ConnectionField> {
        Ok(levi_civita_pq(&self.at_order(y, 2)?))
    }
}

/// Levi-Civita connection of a `(1,1)` bundle with every block written out
/// index by index. The fiber index `(v, r)` stands for `t^v_r`.
pub fn levi_civita_11(b: &BundleAt) -> Result<ConnectionField> {
    let ft = b.ft();
    if (ft.p, ft.q) != (1, 1) {
        return Err(Error::BadParameter("levi_civita_11 needs a (1,1) bundle".into()));
    }
    let geom = &b.geom;
    let rs = &b.rs;
    let n = geom.n;
    let dim = n + n * n;
    let t = &b.p.t;
    let tt = |up: usize, lo: usize| t[up * n + lo];
    let bar = |up: usize, lo: usize| n + up * n + lo;
    let f = rs.f;
    let rr = raised_riemann(geom);
    let rr = |s: usize, h: usize, m: usize, r: usize| rr[((s * n + h) * n + m) * n + r];
    let mut c = ConnectionField::zeros(dim);

    for l in 0..n {
        for j in 0..n {
            for r in 0..n {
                c.set(r, l, j, geom.gamma(r, l, j) + rs.a(r, l, j) / (2.0 * f));
            }
            for v in 0..n {
                for r in 0..n {
                    let mut acc = 0.0;
                    for s in 0..n {
                        acc += 0.5 * geom.riem(l, j, r, s) * tt(v, s) - 0.5 * geom.riem(l, j, s, v) * tt(s, r);
                    }
                    c.set(bar(v, r), l, j, acc);
                }
            }
        }
    }
    // ∇_{E_l} E_(i,j)
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for r in 0..n {
                    let mut acc = 0.0;
                    for a in 0..n {
                        for s in 0..n {
                            acc += geom.g(i, a) * rr(s, j, l, r) * tt(a, s) / (2.0 * f);
                        }
                    }
                    for bb in 0..n {
                        for s in 0..n {
                            acc -= geom.gi(j, bb) * geom.riem(i, s, l, r) * tt(s, bb) / (2.0 * f);
                        }
                    }
                    c.set(r, l, bar(i, j), acc);
                }
                for v in 0..n {
                    for r in 0..n {
                        let mut acc = 0.0;
                        if j == r {
                            acc += geom.gamma(v, l, i);
                        }
                        if v == i {
                            acc -= geom.gamma(j, l, r);
                        }
                        c.set(bar(v, r), l, bar(i, j), acc);
                    }
                }
            }
        }
    }
    // ∇_{E_(t,l)} E_j
    for tu in 0..n {
        for l in 0..n {
            for j in 0..n {
                for r in 0..n {
                    let mut acc = 0.0;
                    for a in 0..n {
                        for s in 0..n {
                            acc += geom.g(tu, a) * rr(s, l, j, r) * tt(a, s) / (2.0 * f);
                        }
                    }
                    for bb in 0..n {
                        for s in 0..n {
                            acc -= geom.gi(l, bb) * geom.riem(tu, s, j, r) * tt(s, bb) / (2.0 * f);
                        }
                    }
                    c.set(r, bar(tu, l), j, acc);
                }
            }
        }
    }
    Ok(c)
}

/// `R^{sh}{}_m{}^r = g^{as} g^{bh} R_{abm}^r`, stored `[s][h][m][r]`.
pub fn raised_riemann(geom: &BaseGeometryAt) -> Vec<f64> {
    let n = geom.n;
    let mut out = vec![0.0; n * n * n * n];
    for s in 0..n {
        for h in 0..n {
            for m in 0..n {
                for r in 0..n {
                    out[((s * n + h) * n + m) * n + r] = geom.riem_raised(s, h, m, r);
                }
            }
        }
    }
    out
}

/// Levi-Civita connection on any `(p, q)` bundle:
///
/// * `C^r_{lj} = Γ^r_{lj} + A^r_{lj}/2f`, `C^a_{lj} = ½ Ω_{lj}^a`;
/// * `C^m_{l,a} = C^m_{a,l} = (1/2f) g^{mk} G(E_a, Ω_{kl})`;
/// * `C^b_{l,a} = (Γ_l ·)^b_a`, the fiber action of the base connection;
/// * vertical-vertical coefficients vanish.
pub fn levi_civita_pq(b: &BundleAt) -> ConnectionField {
    let geom = &b.geom;
    let rs = &b.rs;
    let ft = b.ft();
    let n = geom.n;
    let fd = ft.dim();
    let dim = n + fd;
    let mut c = ConnectionField::zeros(dim);
    let omegas: Vec<Vec<f64>> = (0..n * n).map(|k| omega(geom, &b.p, k / n, k % n)).collect();
    // G(E_a, Ω_{kl}) for all a, k, l.
    let lowered: Vec<Vec<f64>> = omegas
        .iter()
        .map(|om| (0..fd).map(|a| (0..fd).map(|bb| b.metric.fiber[a * fd + bb] * om[bb]).sum()).collect())
        .collect();
    for l in 0..n {
        for j in 0..n {
            for r in 0..n {
                c.set(r, l, j, geom.gamma(r, l, j) + rs.b(r, l, j));
            }
            for a in 0..fd {
                c.set(n + a, l, j, 0.5 * omegas[l * n + j][a]);
            }
        }
        for a in 0..fd {
            for m in 0..n {
                let v: f64 = (0..n).map(|k| geom.gi(m, k) * lowered[k * n + l][a]).sum::<f64>() / (2.0 * rs.f);
                c.set(m, l, n + a, v);
                c.set(m, n + a, l, v);
            }
        }
        let act = ft.action_matrix(&geom.gamma_dir(&crate::frames::unit(n, l)));
        for bb in 0..fd {
            for a in 0..fd {
                c.set(n + bb, l, n + a, act[bb * fd + a]);
            }
        }
    }
    c
}

/// `∇_X Y` at the point `b`, where `Y` is a field given in adapted
/// components as a function of natural coordinates. The frame derivative
/// `X(Y^α)` is a central difference along the natural vector of `X`.
pub fn covariant_derivative_bundle<F>(
    conn: &ConnectionField,
    b: &BundleAt,
    x: &[f64],
    y: F,
    h: f64,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let y0 = b.p.coords();
    let dir = b.natural(x);
    let plus: Vec<f64> = y0.iter().zip(&dir).map(|(a, d)| a + h * d).collect();
    let minus: Vec<f64> = y0.iter().zip(&dir).map(|(a, d)| a - h * d).collect();
    let yp = y(&plus)?;
    let ym = y(&minus)?;
    let here = y(&y0)?;
    let conn_term = conn.apply(x, &here);
    Ok((0..conn.dim)
        .map(|a| (yp[a] - ym[a]) / (2.0 * h) + conn_term[a])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::Preset;

    fn bundle(preset: Preset, f: &str) -> SasakiBundle {
        let chart = ManifoldChart::preset(&preset).unwrap();
        let n = chart.n;
        SasakiBundle::new(chart, RescaleFunction::parse(f, n).unwrap(), 1, 1).unwrap()
    }

    #[test]
    fn a_tensor_for_exponential() {
        let sb = bundle(Preset::Euclidean(2), "exp(x1)");
        let b = sb.at(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((b.rs.a(0, 0, 0) - 1.0).abs() < 1e-15);
        assert!((b.rs.a(0, 1, 1) + 1.0).abs() < 1e-15);
        assert!((b.rs.a(1, 0, 1) - 1.0).abs() < 1e-15);
        assert!((b.rs.a(1, 1, 0) - 1.0).abs() < 1e-15);
        let c = levi_civita_11(&b).unwrap();
        assert!((c.get(0, 0, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn metric_blocks() {
        let sb = bundle(Preset::Euclidean(2), "2");
        let b = sb.at(&[0.1, 0.2, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let e1 = AdaptedField {
            h: vec![1.0, 0.0],
            v: vec![0.0; 4],
        };
        assert_eq!(b.metric.inner(&e1, &e1), 2.0);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(b.metric.component(2 + i, 2 + j), if i == j { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(b.metric.component(0, 3), 0.0);
    }

    #[test]
    fn metric_inverse_is_inverse() {
        let sb = bundle(Preset::Sphere(1.3), "1 + x1^2");
        let b = sb.at(&[0.9, 0.4, 0.5, -0.2, 0.3, 1.1]).unwrap();
        let d = b.metric.dim();
        let (m, mi) = (b.metric.matrix(), b.metric.inverse_matrix());
        for i in 0..d {
            for j in 0..d {
                let v: f64 = (0..d).map(|k| m[i * d + k] * mi[k * d + j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nonpositive_rescale_rejected() {
        let sb = bundle(Preset::Euclidean(2), "x1");
        assert!(matches!(
            sb.at(&[-0.5, 0.0, 0.0, 0.0, 0.0, 0.0]),
            Err(Error::NonPositiveRescale { .. })
        ));
    }

    #[test]
    fn transcribed_and_general_forms_agree() {
        let sb = bundle(Preset::Sphere(1.0), "exp(x1/5)");
        let b = sb.at(&[0.9, 0.4, 0.5, -0.2, 0.3, 1.1]).unwrap();
        let c11 = levi_civita_11(&b).unwrap();
        let cpq = levi_civita_pq(&b);
        assert!(c11.max_abs_diff(&cpq) < 1e-12, "{}", c11.max_abs_diff(&cpq));
    }

    #[test]
    fn constant_rescale_has_no_a_term() {
        let sb = bundle(Preset::Sphere(1.0), "3");
        let b = sb.at(&[0.9, 0.4, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(b.rs.a.iter().all(|v| *v == 0.0));
        assert_eq!(b.rs.f_l(&b.geom), 0.0);
    }
}
