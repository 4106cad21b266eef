//! Riemannian base manifolds given on a single chart.
//!
//! Index conventions used throughout the crate:
//!
//! * `gamma(h, i, j)` is `Γ^h_{ij}` with `∇_{∂_i} ∂_j = Γ^h_{ij} ∂_h`;
//! * `riemann(k, l, j, s)` is `R_{klj}^s` with `R(∂_k, ∂_l) ∂_j = R_{klj}^s ∂_s`
//!   and `R(X, Y) = [∇_X, ∇_Y] - ∇_{[X, Y]}`;
//! * `ricci(l, j) = R_{klj}^k`, `scalar = g^{lj} R_{lj}`.
//!
//! All arrays are dense and row-major in the order the indices are written.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::fiber::FiberType;
use crate::jet::{invert_matrix, Jet, JetSpace};

/// Per-coordinate sampling box on the chart.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartBox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ChartBox {
    pub fn uniform(n: usize, lo: f64, hi: f64) -> Self {
        ChartBox {
            min: vec![lo; n],
            max: vec![hi; n],
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(v, (lo, hi))| v.is_finite() && *v >= *lo && *v <= *hi)
    }

    pub fn center(&self) -> Vec<f64> {
        self.min.iter().zip(&self.max).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Preset {
    Euclidean(usize),
    /// Round sphere of the given radius in polar coordinates `(θ, φ)`.
    Sphere(f64),
    /// Upper half-space model of curvature -1; the last coordinate is the height.
    Hyperbolic(usize),
    /// Sphere of the given radius times a flat factor of dimension `flat`.
    Product { radius: f64, flat: usize },
}

/// A metric `g_ij(x)` on one chart of an `n`-manifold.
#[derive(Clone, Debug)]
pub struct ManifoldChart {
    pub name: String,
    pub n: usize,
    g: Vec<Expression>,
    pub default_box: ChartBox,
    /// Sectional curvature when the preset has constant curvature.
    pub kappa: Option<f64>,
}

impl ManifoldChart {
    pub fn preset(kind: &Preset) -> Result<ManifoldChart> {
        let diag = |n: usize, entries: Vec<String>| -> Result<Vec<Expression>> {
            let mut g = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    g.push(if i == j {
                        Expression::parse_in(&entries[i], n)?
                    } else {
                        Expression::constant(0.0)
                    });
                }
            }
            Ok(g)
        };
        match *kind {
            Preset::Euclidean(n) => {
                if n == 0 {
                    return Err(Error::BadParameter("dimension must be positive".into()));
                }
                Ok(ManifoldChart {
                    name: format!("euclidean{n}"),
                    n,
                    g: diag(n, vec!["1".into(); n])?,
                    default_box: ChartBox::uniform(n, -1.0, 1.0),
                    kappa: Some(0.0),
                })
            }
            Preset::Sphere(r) => {
                if !(r > 0.0 && r.is_finite()) {
                    return Err(Error::BadParameter(format!("sphere radius must be positive, got {r}")));
                }
                let r2 = r * r;
                Ok(ManifoldChart {
                    name: format!("sphere(r={r})"),
                    n: 2,
                    g: diag(2, vec![format!("{r2}"), format!("{r2}*sin(x1)^2")])?,
                    default_box: sphere_box(2),
                    kappa: Some(1.0 / r2),
                })
            }
            Preset::Hyperbolic(n) => {
                if n < 2 {
                    return Err(Error::BadParameter("hyperbolic space needs n >= 2".into()));
                }
                let mut b = ChartBox::uniform(n, -1.0, 1.0);
                b.min[n - 1] = 0.5;
                b.max[n - 1] = 2.0;
                Ok(ManifoldChart {
                    name: format!("hyperbolic{n}"),
                    n,
                    g: diag(n, vec![format!("x{n}^-2"); n])?,
                    default_box: b,
                    kappa: Some(-1.0),
                })
            }
            Preset::Product { radius, flat } => {
                if !(radius > 0.0 && radius.is_finite()) || flat == 0 {
                    return Err(Error::BadParameter(
                        "product needs positive radius and a flat factor".into(),
                    ));
                }
                let n = 2 + flat;
                let r2 = radius * radius;
                let mut entries = vec![format!("{r2}"), format!("{r2}*sin(x1)^2")];
                entries.extend(std::iter::repeat_n("1".to_string(), flat));
                Ok(ManifoldChart {
                    name: format!("sphere(r={radius})xR{flat}"),
                    n,
                    g: diag(n, entries)?,
                    default_box: sphere_box(n),
                    kappa: None,
                })
            }
        }
    }

    /// Chart from a full row-major `n x n` table of expressions.
    pub fn custom(name: &str, n: usize, g: Vec<Expression>) -> Result<ManifoldChart> {
        if g.len() != n * n {
            return Err(Error::ShapeMismatch {
                expected: n * n,
                got: g.len(),
            });
        }
        for e in &g {
            if e.arity() > n {
                return Err(Error::UnknownIdentifier {
                    name: format!("x{}", e.arity()),
                    offset: 0,
                });
            }
        }
        for i in 0..n {
            for j in 0..i {
                if g[i * n + j].ast() != g[j * n + i].ast() {
                    return Err(Error::BadParameter(format!(
                        "metric is not symmetric in entries ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(ManifoldChart {
            name: name.to_string(),
            n,
            g,
            default_box: ChartBox::uniform(n, -1.0, 1.0),
            kappa: None,
        })
    }

    pub fn metric_expr(&self, i: usize, j: usize) -> &Expression {
        &self.g[i * self.n + j]
    }

    /// Metric components as jets; `vars[k]` stands for coordinate `x_{k+1}`.
    pub fn metric_jets(&self, vars: &[Jet], zero: &Jet) -> Result<Vec<Jet>> {
        let n = self.n;
        let mut out = vec![zero.clone(); n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.g[i * n + j].eval_jet(vars, zero)?;
                out[j * n + i] = v.clone();
                out[i * n + j] = v;
            }
        }
        Ok(out)
    }

    pub fn metric_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.g[i * n + j].eval(x)?;
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        Ok(out)
    }

    /// Full geometry at `x` (Christoffels, curvature and its covariant derivative).
    pub fn geometry_at(&self, x: &[f64]) -> Result<BaseGeometryAt> {
        self.geometry_at_order(x, 3)
    }

    /// Geometry at `x` computed from metric derivatives up to `order`:
    /// 1 gives `g`, `Γ`; 2 adds curvature; 3 adds `∇R`. Omitted parts are zero.
    pub fn geometry_at_order(&self, x: &[f64], order: usize) -> Result<BaseGeometryAt> {
        let n = self.n;
        if x.len() != n {
            return Err(Error::ShapeMismatch { expected: n, got: x.len() });
        }
        let order = order.clamp(1, 3);
        let space = JetSpace::shared(n, order);
        let zero = Jet::zero(&space);
        let vars: Vec<Jet> = (0..n).map(|k| Jet::variable(&space, k, x[k])).collect();
        let g = self.metric_jets(&vars, &zero)?;
        let gv: Vec<f64> = g.iter().map(|j| j.value()).collect();
        check_positive_definite(n, &gv, x)?;
        let g_inv = invert_matrix(&g, n).ok_or_else(|| Error::NotPositiveDefinite { point: x.to_vec() })?;
        let gamma = christoffel_jets(n, &g, &g_inv);

        let mut geom = BaseGeometryAt {
            x: x.to_vec(),
            n,
            order,
            g: gv,
            g_inv: g_inv.iter().map(|j| j.value()).collect(),
            dg: vec![0.0; n * n * n],
            gamma: gamma.iter().map(|j| j.value()).collect(),
            dgamma: vec![0.0; n * n * n * n],
            riemann: vec![0.0; n * n * n * n],
            nabla_riemann: vec![0.0; n * n * n * n * n],
            ricci: vec![0.0; n * n],
            scalar: 0.0,
        };
        for k in 0..n {
            for ij in 0..n * n {
                geom.dg[k * n * n + ij] = g[ij].partial(&[k]);
            }
        }
        if order < 2 {
            return Ok(geom);
        }
        for m in 0..n {
            for hij in 0..n * n * n {
                geom.dgamma[m * n * n * n + hij] = gamma[hij].partial(&[m]);
            }
        }
        let riem = riemann_jets(n, &gamma);
        geom.riemann = riem.iter().map(|j| j.value()).collect();
        for l in 0..n {
            for j in 0..n {
                geom.ricci[l * n + j] = (0..n).map(|k| geom.riem(k, l, j, k)).sum();
            }
        }
        geom.scalar = (0..n * n).map(|a| geom.g_inv[a] * geom.ricci[a]).sum();
        if order < 3 {
            return Ok(geom);
        }
        let n4 = n * n * n * n;
        for m in 0..n {
            for k in 0..n {
                for l in 0..n {
                    for j in 0..n {
                        for s in 0..n {
                            let flat = ((k * n + l) * n + j) * n + s;
                            let mut v = riem[flat].partial(&[m]);
                            for a in 0..n {
                                v += geom.gamma(s, m, a) * geom.riem(k, l, j, a)
                                    - geom.gamma(a, m, k) * geom.riem(a, l, j, s)
                                    - geom.gamma(a, m, l) * geom.riem(k, a, j, s)
                                    - geom.gamma(a, m, j) * geom.riem(k, l, a, s);
                            }
                            geom.nabla_riemann[m * n4 + flat] = v;
                        }
                    }
                }
            }
        }
        Ok(geom)
    }
}

fn sphere_box(n: usize) -> ChartBox {
    let mut b = ChartBox::uniform(n, -1.0, 1.0);
    b.min[0] = 0.2;
    b.max[0] = std::f64::consts::PI - 0.2;
    b.min[1] = -std::f64::consts::PI;
    b.max[1] = std::f64::consts::PI;
    b
}

pub(crate) fn check_positive_definite(n: usize, g: &[f64], x: &[f64]) -> Result<()> {
    let m = DMatrix::from_row_slice(n, n, g);
    if g.iter().any(|v| !v.is_finite()) || m.cholesky().is_none() {
        return Err(Error::NotPositiveDefinite { point: x.to_vec() });
    }
    Ok(())
}

/// `Γ^h_{ij} = ½ g^{hm}(∂_i g_{mj} + ∂_j g_{im} - ∂_m g_{ij})` as jets of one
/// order less than the metric. Works for any number of jet variables as long
/// as the first `n` are the chart coordinates.
pub fn christoffel_jets(n: usize, g: &[Jet], g_inv: &[Jet]) -> Vec<Jet> {
    let dg: Vec<Vec<Jet>> = (0..n)
        .map(|k| g.iter().map(|e| e.derivative(k)).collect())
        .collect();
    let zero = dg[0][0].scale(0.0);
    // Christoffel symbols of the first kind, [ij, m].
    let mut first = vec![zero.clone(); n * n * n];
    for i in 0..n {
        for j in i..n {
            for m in 0..n {
                let v = (&dg[i][m * n + j] + &dg[j][i * n + m] - &dg[m][i * n + j]).scale(0.5);
                first[(i * n + j) * n + m] = v.clone();
                first[(j * n + i) * n + m] = v;
            }
        }
    }
    let mut gamma = vec![zero.clone(); n * n * n];
    for h in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut acc = zero.clone();
                for m in 0..n {
                    acc += &(&g_inv[h * n + m] * &first[(i * n + j) * n + m]);
                }
                gamma[(h * n + j) * n + i] = acc.clone();
                gamma[(h * n + i) * n + j] = acc;
            }
        }
    }
    gamma
}

/// `R_{klj}^s` as jets, from Christoffel jets (coordinates are the first `n`
/// jet variables).
pub fn riemann_jets(n: usize, gamma: &[Jet]) -> Vec<Jet> {
    let gi = |h: usize, i: usize, j: usize| (h * n + i) * n + j;
    let dgam: Vec<Vec<Jet>> = (0..n)
        .map(|k| gamma.iter().map(|e| e.derivative(k)).collect())
        .collect();
    let zero = dgam[0][0].scale(0.0);
    let mut out = vec![zero.clone(); n * n * n * n];
    for k in 0..n {
        for l in (k + 1)..n {
            for j in 0..n {
                for s in 0..n {
                    let mut v = &dgam[k][gi(s, l, j)] - &dgam[l][gi(s, k, j)];
                    for m in 0..n {
                        let a = &gamma[gi(s, k, m)] * &gamma[gi(m, l, j)];
                        let b = &gamma[gi(s, l, m)] * &gamma[gi(m, k, j)];
                        v += &(&a - &b);
                    }
                    out[((l * n + k) * n + j) * n + s] = -&v;
                    out[((k * n + l) * n + j) * n + s] = v;
                }
            }
        }
    }
    out
}

/// Everything about the base at one point that the bundle formulas use.
#[derive(Clone, Debug)]
pub struct BaseGeometryAt {
    pub x: Vec<f64>,
    pub n: usize,
    /// Metric derivative order used to build this value (1, 2 or 3).
    pub order: usize,
    pub g: Vec<f64>,
    pub g_inv: Vec<f64>,
    /// `dg[k][i][j] = ∂_k g_ij`.
    pub dg: Vec<f64>,
    pub gamma: Vec<f64>,
    /// `dgamma[m][h][i][j] = ∂_m Γ^h_ij`.
    pub dgamma: Vec<f64>,
    pub riemann: Vec<f64>,
    /// `nabla_riemann[m][k][l][j][s] = ∇_m R_{klj}^s`.
    pub nabla_riemann: Vec<f64>,
    pub ricci: Vec<f64>,
    pub scalar: f64,
}

impl BaseGeometryAt {
    #[inline]
    pub fn g(&self, i: usize, j: usize) -> f64 {
        self.g[i * self.n + j]
    }

    #[inline]
    pub fn gi(&self, i: usize, j: usize) -> f64 {
        self.g_inv[i * self.n + j]
    }

    #[inline]
    pub fn dg(&self, k: usize, i: usize, j: usize) -> f64 {
        self.dg[(k * self.n + i) * self.n + j]
    }

    #[inline]
    pub fn gamma(&self, h: usize, i: usize, j: usize) -> f64 {
        self.gamma[(h * self.n + i) * self.n + j]
    }

    #[inline]
    pub fn dgamma(&self, m: usize, h: usize, i: usize, j: usize) -> f64 {
        let n = self.n;
        self.dgamma[((m * n + h) * n + i) * n + j]
    }

    #[inline]
    pub fn riem(&self, k: usize, l: usize, j: usize, s: usize) -> f64 {
        let n = self.n;
        self.riemann[((k * n + l) * n + j) * n + s]
    }

    #[inline]
    pub fn nabla_riem(&self, m: usize, k: usize, l: usize, j: usize, s: usize) -> f64 {
        let n = self.n;
        self.nabla_riemann[(((m * n + k) * n + l) * n + j) * n + s]
    }

    #[inline]
    pub fn ricci(&self, l: usize, j: usize) -> f64 {
        self.ricci[l * self.n + j]
    }

    /// `R^{sh}{}_m{}^r = g^{as} g^{bh} R_{abm}^r`.
    pub fn riem_raised(&self, s: usize, h: usize, m: usize, r: usize) -> f64 {
        let n = self.n;
        let mut v = 0.0;
        for a in 0..n {
            for b in 0..n {
                v += self.gi(a, s) * self.gi(b, h) * self.riem(a, b, m, r);
            }
        }
        v
    }

    /// Matrix `(Γ_l)^i_s = Γ^i_{ls}` contracted with a direction: `Σ_l v^l Γ^i_{ls}`.
    pub fn gamma_dir(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut m = vec![0.0; n * n];
        for (l, &vl) in v.iter().enumerate() {
            if vl == 0.0 {
                continue;
            }
            for i in 0..n {
                for s in 0..n {
                    m[i * n + s] += vl * self.gamma(i, l, s);
                }
            }
        }
        m
    }

    /// Curvature endomorphism `(R(∂_l, ∂_j))^i_s = R_{ljs}^i`.
    pub fn riem_matrix(&self, l: usize, j: usize) -> Vec<f64> {
        let n = self.n;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for s in 0..n {
                m[i * n + s] = self.riem(l, j, s, i);
            }
        }
        m
    }

    /// Riemann tensor of a space of constant curvature `kappa` with this metric.
    pub fn constant_curvature_riemann(&self, kappa: f64) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n * n * n];
        for k in 0..n {
            for l in 0..n {
                for j in 0..n {
                    for s in 0..n {
                        let dk = if s == k { 1.0 } else { 0.0 };
                        let dl = if s == l { 1.0 } else { 0.0 };
                        out[((k * n + l) * n + j) * n + s] = kappa * (dk * self.g(l, j) - dl * self.g(k, j));
                    }
                }
            }
        }
        out
    }

    /// Largest absolute Riemann component.
    pub fn riemann_max_abs(&self) -> f64 {
        self.riemann.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Covariant derivative along a curve of a tensor field of type `ft`:
/// `δS/dt = dS/dt + Σ Γ^{v}_{ls} S^{..s..} ẋ^l - Σ Γ^s_{lr} S_{..s..} ẋ^l`.
pub fn covariant_derivative_along(
    geom: &BaseGeometryAt,
    xdot: &[f64],
    ft: FiberType,
    s: &[f64],
    ds_dt: &[f64],
) -> Result<Vec<f64>> {
    if xdot.len() != geom.n {
        return Err(Error::ShapeMismatch { expected: geom.n, got: xdot.len() });
    }
    ft.check(s)?;
    ft.check(ds_dt)?;
    let mut out = ds_dt.to_vec();
    ft.action_into(&geom.gamma_dir(xdot), s, &mut out, 1.0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn euclidean_is_flat() {
        let m = ManifoldChart::preset(&Preset::Euclidean(2)).unwrap();
        let geo = m.geometry_at(&[0.3, -0.7]).unwrap();
        assert!(geo.gamma.iter().all(|v| *v == 0.0));
        assert!(geo.riemann.iter().all(|v| *v == 0.0));
        assert_eq!(geo.scalar, 0.0);
    }

    #[test]
    fn unit_sphere_values() {
        let m = ManifoldChart::preset(&Preset::Sphere(1.0)).unwrap();
        let geo = m.geometry_at(&[PI / 2.0, 0.0]).unwrap();
        assert!(geo.gamma(0, 1, 1).abs() < 1e-15);
        assert!((geo.scalar - 2.0).abs() < 1e-12);
        let geo = m.geometry_at(&[0.7, 0.1]).unwrap();
        let (s, c) = 0.7f64.sin_cos();
        assert!((geo.gamma(0, 1, 1) + s * c).abs() < 1e-14);
        assert!((geo.gamma(1, 0, 1) - c / s).abs() < 1e-14);
        assert!((geo.scalar - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_radius_two() {
        let m = ManifoldChart::preset(&Preset::Sphere(2.0)).unwrap();
        assert_eq!(m.kappa, Some(0.25));
        let geo = m.geometry_at(&[1.1, 0.4]).unwrap();
        assert!((geo.scalar - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_constant_curvature() {
        let m = ManifoldChart::preset(&Preset::Hyperbolic(3)).unwrap();
        let geo = m.geometry_at(&[0.2, -0.4, 1.3]).unwrap();
        let expect = geo.constant_curvature_riemann(-1.0);
        for (a, b) in geo.riemann.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!((geo.scalar + 6.0).abs() < 1e-11);
        // ∇R = 0 on a space form.
        assert!(geo.nabla_riemann.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(ManifoldChart::preset(&Preset::Sphere(0.0)), Err(Error::BadParameter(_))));
        assert!(matches!(ManifoldChart::preset(&Preset::Sphere(-1.0)), Err(Error::BadParameter(_))));
        let g = ["x1", "0", "0", "1"].iter().map(|s| Expression::parse(s).unwrap()).collect();
        let m = ManifoldChart::custom("c", 2, g).unwrap();
        assert!(matches!(m.geometry_at(&[-1.0, 0.0]), Err(Error::NotPositiveDefinite { .. })));
        let g = ["1", "x1", "0", "1"].iter().map(|s| Expression::parse(s).unwrap()).collect();
        assert!(matches!(ManifoldChart::custom("c", 2, g), Err(Error::BadParameter(_))));
    }

    #[test]
    fn identity_is_parallel() {
        let m = ManifoldChart::preset(&Preset::Sphere(1.0)).unwrap();
        let geo = m.geometry_at(&[0.9, 0.3]).unwrap();
        let ft = FiberType::new(2, 1, 1);
        let id = ft.identity().unwrap();
        let d = covariant_derivative_along(&geo, &[0.3, -1.2], ft, &id, &[0.0; 4]).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-15));
        assert!(matches!(
            covariant_derivative_along(&geo, &[0.3], ft, &id, &[0.0; 4]),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
