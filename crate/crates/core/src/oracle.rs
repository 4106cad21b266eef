//! Independent reference values computed in natural coordinates `(x, t)`.
//!
//! The bundle metric is assembled as Taylor jets in all `n + n^(p+q)`
//! coordinates, Christoffel symbols and curvature follow from the plain
//! coordinate formulas, and results are moved to the adapted frame with the
//! frame transition matrix. Nothing here uses the block formulas.

use crate::error::{Error, Result};
use crate::fiber::FiberType;
use crate::jet::{invert_matrix, Jet, JetSpace};
use crate::base::{christoffel_jets, riemann_jets};
use crate::sasaki::{ConnectionField, SasakiBundle};

/// Largest total bundle dimension the oracle accepts.
pub const MAX_ORACLE_DIM: usize = 12;

/// Reference data at one point.
#[derive(Clone, Debug)]
pub struct OracleAt {
    pub dim: usize,
    /// Natural-coordinate metric, row-major.
    pub metric: Vec<f64>,
    /// Natural Christoffel symbols `Γ^a_{bc}`, stored `[a][b][c]`.
    pub gamma: Vec<f64>,
    /// Adapted-to-natural transition `F` (columns are adapted frame vectors).
    pub frame: Vec<f64>,
    pub frame_inv: Vec<f64>,
    /// Levi-Civita connection in the adapted frame.
    pub connection: ConnectionField,
    /// Curvature in the adapted frame, `[a][b][c][d]` = component `d` of
    /// `R(E_a, E_b) E_c`. Present when requested.
    pub curvature: Option<Vec<f64>>,
    /// Scalar curvature from the natural-coordinate Ricci tensor.
    pub scalar: Option<f64>,
}

impl OracleAt {
    pub fn curv(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.dim;
        self.curvature.as_ref().expect("curvature not computed")[((a * n + b) * n + c) * n + d]
    }
}

/// Computes the reference connection (and curvature when `with_curvature`)
/// at natural coordinates `y`.
pub fn oracle_at(bundle: &SasakiBundle, y: &[f64], with_curvature: bool) -> Result<OracleAt> {
    let ft = bundle.ft;
    let n = ft.n;
    let fd = ft.dim();
    let dim = n + fd;
    if dim > MAX_ORACLE_DIM {
        return Err(Error::DimensionGuard {
            dim,
            max: MAX_ORACLE_DIM,
        });
    }
    if y.len() != dim {
        return Err(Error::ShapeMismatch {
            expected: dim,
            got: y.len(),
        });
    }
    // Natural metric needs order 2 for curvature, 1 for the connection; the
    // frame transition contains Γ, one more derivative of g.
    let metric_order = if with_curvature { 2 } else { 1 };
    let space = JetSpace::shared(dim, metric_order + 1);
    let zero = Jet::zero(&space);
    let vars: Vec<Jet> = (0..dim).map(|k| Jet::variable(&space, k, y[k])).collect();

    let g = bundle.chart.metric_jets(&vars[..n], &zero)?;
    let g_inv = invert_matrix(&g, n).ok_or_else(|| Error::NotPositiveDefinite { point: y[..n].to_vec() })?;
    let base_gamma = christoffel_jets(n, &g, &g_inv);
    let f = bundle.f.expr.eval_jet(&vars[..n], &zero)?;
    if f.value().is_nan() || f.value() <= 0.0 {
        return Err(Error::NonPositiveRescale {
            point: y[..n].to_vec(),
            value: f.value(),
        });
    }

    // K = -N: vertical adapted component of a natural horizontal vector,
    // K[a][l] = (Γ_l · t)^a.
    let basis: Vec<Vec<f64>> = (0..n * n)
        .map(|k| {
            let mut e = vec![0.0; n * n];
            e[k] = 1.0;
            ft.action_matrix(&e)
        })
        .collect();
    let mut k_mat = vec![zero.truncate(metric_order); fd * n];
    for l in 0..n {
        for i in 0..n {
            for s in 0..n {
                let gam = base_gamma[(i * n + l) * n + s].truncate(metric_order);
                let m = &basis[i * n + s];
                for a in 0..fd {
                    let mut lin = zero.truncate(metric_order);
                    let mut any = false;
                    for b in 0..fd {
                        let c = m[a * fd + b];
                        if c != 0.0 {
                            lin = &lin + &vars[n + b].scale(c);
                            any = true;
                        }
                    }
                    if any {
                        k_mat[a * n + l] = &k_mat[a * n + l] + &(&gam * &lin);
                    }
                }
            }
        }
    }

    let fiber = fiber_metric_jets(ft, &g, &g_inv, &zero);
    // Natural metric = F^{-T} diag(f g, G) F^{-1} with F^{-1} = [[I,0],[K,I]].
    let mut gn = vec![zero.clone(); dim * dim];
    // G K, fd x n
    let mut gk = vec![zero.clone(); fd * n];
    for a in 0..fd {
        for l in 0..n {
            let mut acc = zero.clone();
            for b in 0..fd {
                acc += &(&fiber[a * fd + b] * &k_mat[b * n + l]);
            }
            gk[a * n + l] = acc;
        }
    }
    for i in 0..n {
        for j in 0..n {
            let mut acc = &f * &g[i * n + j];
            for a in 0..fd {
                acc += &(&k_mat[a * n + i] * &gk[a * n + j]);
            }
            gn[i * dim + j] = acc;
        }
        for a in 0..fd {
            gn[i * dim + n + a] = gk[a * n + i].clone();
            gn[(n + a) * dim + i] = gk[a * n + i].clone();
        }
    }
    for a in 0..fd {
        for b in 0..fd {
            gn[(n + a) * dim + n + b] = fiber[a * fd + b].clone();
        }
    }
    let gn: Vec<Jet> = gn.iter().map(|j| j.truncate(metric_order)).collect();
    let gn_inv = invert_matrix(&gn, dim).ok_or_else(|| Error::NotPositiveDefinite { point: y.to_vec() })?;
    let gn_inv: Vec<Jet> = gn_inv.iter().map(|j| j.truncate(metric_order - 1)).collect();
    let gamma = christoffel_jets(dim, &gn, &gn_inv);

    // F = [[I,0],[-K,I]] as jets of order >= 1 for its derivatives.
    let mut fr = vec![zero.truncate(metric_order); dim * dim];
    let mut fr_inv = vec![0.0; dim * dim];
    for i in 0..dim {
        fr[i * dim + i] = Jet::constant(&space, 1.0).truncate(metric_order);
        fr_inv[i * dim + i] = 1.0;
    }
    for a in 0..fd {
        for l in 0..n {
            fr[(n + a) * dim + l] = -&k_mat[a * n + l];
            fr_inv[(n + a) * dim + l] = k_mat[a * n + l].value();
        }
    }
    let frv: Vec<f64> = fr.iter().map(|j| j.value()).collect();
    let gv: Vec<f64> = gamma.iter().map(|j| j.value()).collect();
    let gam = |a: usize, b: usize, c: usize| gv[(a * dim + b) * dim + c];

    // ∇_{E_a} E_b = F^ν_a (∂_ν F^μ_b + Γ^μ_{νλ} F^λ_b) ∂_μ
    let mut conn = ConnectionField::zeros(dim);
    let mut nat = vec![0.0; dim];
    for a in 0..dim {
        for b in 0..dim {
            for (mu, out) in nat.iter_mut().enumerate() {
                let mut v = 0.0;
                for nu in 0..dim {
                    let fa = frv[nu * dim + a];
                    if fa == 0.0 {
                        continue;
                    }
                    let mut inner = fr[mu * dim + b].partial(&[nu]);
                    for la in 0..dim {
                        inner += gam(mu, nu, la) * frv[la * dim + b];
                    }
                    v += fa * inner;
                }
                *out = v;
            }
            for c in 0..dim {
                let v: f64 = (0..dim).map(|mu| fr_inv[c * dim + mu] * nat[mu]).sum();
                conn.set(c, a, b, v);
            }
        }
    }

    let (curvature, scalar) = if with_curvature {
        let rn = riemann_jets(dim, &gamma);
        let rv: Vec<f64> = rn.iter().map(|j| j.value()).collect();
        let d = dim;
        let r = |a: usize, b: usize, c: usize, e: usize| rv[((a * d + b) * d + c) * d + e];
        let mut scalar = 0.0;
        for b in 0..d {
            for c in 0..d {
                let ric: f64 = (0..d).map(|a| r(a, b, c, a)).sum();
                scalar += gn_inv[b * d + c].value() * ric;
            }
        }
        let out = transform_curvature(d, &rv, &frv, &fr_inv);
        (Some(out), Some(scalar))
    } else {
        (None, None)
    };

    Ok(OracleAt {
        dim,
        metric: gn.iter().map(|j| j.value()).collect(),
        gamma: gv,
        frame: frv,
        frame_inv: fr_inv,
        connection: conn,
        curvature,
        scalar,
    })
}

/// `R'[a][b][c][d] = F^{-1 d}_σ R[μ][ν][λ][σ] F^μ_a F^ν_b F^λ_c`.
fn transform_curvature(d: usize, r: &[f64], fr: &[f64], fr_inv: &[f64]) -> Vec<f64> {
    // Successive single-index contractions keep this at d^5.
    let idx = |a: usize, b: usize, c: usize, e: usize| ((a * d + b) * d + c) * d + e;
    let mut cur = r.to_vec();
    let mut next = vec![0.0; d * d * d * d];
    for slot in 0..4 {
        next.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        let mut v = 0.0;
                        for k in 0..d {
                            v += match slot {
                                0 => cur[idx(k, b, c, e)] * fr[k * d + a],
                                1 => cur[idx(a, k, c, e)] * fr[k * d + b],
                                2 => cur[idx(a, b, k, e)] * fr[k * d + c],
                                _ => fr_inv[e * d + k] * cur[idx(a, b, c, k)],
                            };
                        }
                        next[idx(a, b, c, e)] = v;
                    }
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

fn fiber_metric_jets(ft: FiberType, g: &[Jet], g_inv: &[Jet], zero: &Jet) -> Vec<Jet> {
    let d = ft.dim();
    let n = ft.n;
    let idx: Vec<Vec<usize>> = (0..d).map(|k| ft.unflatten(k)).collect();
    let mut out = vec![zero.clone(); d * d];
    for a in 0..d {
        for b in 0..d {
            let mut v = zero.add_scalar(1.0);
            for slot in 0..ft.rank() {
                let (i, j) = (idx[a][slot], idx[b][slot]);
                v = &v * if slot < ft.p { &g[i * n + j] } else { &g_inv[i * n + j] };
            }
            out[a * d + b] = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{ManifoldChart, Preset};
    use crate::sasaki::{levi_civita_11, RescaleFunction};

    #[test]
    fn oracle_matches_block_connection_on_sphere() {
        let chart = ManifoldChart::preset(&Preset::Sphere(1.0)).unwrap();
        let sb = SasakiBundle::new(chart, RescaleFunction::parse("exp(x1/5)", 2).unwrap(), 1, 1).unwrap();
        let y = [1.1, 0.3, 0.4, -0.7, 0.2, 0.9];
        let o = oracle_at(&sb, &y, false).unwrap();
        let c = levi_civita_11(&sb.at(&y).unwrap()).unwrap();
        assert!(o.connection.max_abs_diff(&c) < 1e-10, "{}", o.connection.max_abs_diff(&c));
    }

    #[test]
    fn flat_sasaki_has_zero_curvature() {
        let chart = ManifoldChart::preset(&Preset::Euclidean(2)).unwrap();
        let sb = SasakiBundle::new(chart, RescaleFunction::constant(1.0), 1, 1).unwrap();
        let o = oracle_at(&sb, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6], true).unwrap();
        assert!(o.curvature.as_ref().unwrap().iter().all(|v| v.abs() < 1e-12));
        assert!(o.scalar.unwrap().abs() < 1e-12);
    }

    #[test]
    fn dimension_guard() {
        let chart = ManifoldChart::preset(&Preset::Euclidean(4)).unwrap();
        let sb = SasakiBundle::new(chart, RescaleFunction::constant(1.0), 1, 1).unwrap();
        let y = vec![0.0; 20];
        assert!(matches!(oracle_at(&sb, &y, false), Err(Error::DimensionGuard { dim: 20, .. })));
    }
}
