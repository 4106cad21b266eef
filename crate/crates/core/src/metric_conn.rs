//! Metric connections of the bundle metric other than Levi-Civita: the
//! torsionful connection with torsion concentrated on horizontal pairs, its
//! curvature, and product conjugate connections.

use crate::error::{Error, Result};
use crate::frames::{omega, unit};
use crate::norden::{torsion_of, StructureTensor};
use crate::sasaki::{levi_civita_pq, raised_riemann, BundleAt, BundleMetricAt, ConnectionField, SasakiBundle};

fn require_11(b: &BundleAt, what: &str) -> Result<()> {
    let ft = b.ft();
    if (ft.p, ft.q) != (1, 1) {
        return Err(Error::BadParameter(format!("{what} needs a (1,1) bundle")));
    }
    Ok(())
}

/// Prescribed torsion of the `(1,1)` bundle:
/// `T^{(v,r)}_{lj} = t^m_r R_{ljm}^v - t^v_m R_{ljr}^m`, skew in `(l, j)`,
/// all other components zero. Stored `[(c*dim + a)*dim + b]`.
pub fn prescribed_torsion_11(b: &BundleAt) -> Result<Vec<f64>> {
    require_11(b, "prescribed_torsion_11")?;
    let geom = &b.geom;
    let n = geom.n;
    let dim = n + n * n;
    let t = &b.p.t;
    let mut out = vec![0.0; dim * dim * dim];
    for l in 0..n {
        for j in 0..n {
            for v in 0..n {
                for r in 0..n {
                    let mut acc = 0.0;
                    for m in 0..n {
                        acc += t[m * n + r] * geom.riem(l, j, m, v) - t[v * n + m] * geom.riem(l, j, r, m);
                    }
                    out[((n + v * n + r) * dim + l) * dim + j] = acc;
                }
            }
        }
    }
    Ok(out)
}

/// Prescribed torsion for any `(p,q)`: `T(E_l, E_j)` is the vertical vector
/// `R(∂_l, ∂_j)·t` (derivation action on the fiber), zero elsewhere.
pub fn prescribed_torsion_pq(b: &BundleAt) -> Vec<f64> {
    let n = b.n();
    let dim = b.dim();
    let mut out = vec![0.0; dim * dim * dim];
    for l in 0..n {
        for j in 0..n {
            let om = omega(&b.geom, &b.p, l, j);
            for (k, v) in om.iter().enumerate() {
                out[((n + k) * dim + l) * dim + j] = -v;
            }
        }
    }
    out
}

/// Contorsion `U^e_{ab}` of a torsion `T^c_{ab}` for the bundle metric:
/// `U_{abc} = ½(T_{abc} + T_{cab} + T_{cba})`, `T_{abc} = T^e_{ab} g_{ec}`.
/// Adding it to the Levi-Civita connection gives the metric connection with
/// torsion `T`.
pub fn contorsion(metric: &BundleMetricAt, torsion: &[f64]) -> ConnectionField {
    let dim = metric.dim();
    let g = metric.matrix();
    let gi = metric.inverse_matrix();
    let mut low = vec![0.0; dim * dim * dim];
    for a in 0..dim {
        for bb in 0..dim {
            for c in 0..dim {
                low[(a * dim + bb) * dim + c] = (0..dim).map(|e| torsion[(e * dim + a) * dim + bb] * g[e * dim + c]).sum();
            }
        }
    }
    let tl = |a: usize, bb: usize, c: usize| low[(a * dim + bb) * dim + c];
    let mut u = ConnectionField::zeros(dim);
    for a in 0..dim {
        for bb in 0..dim {
            for e in 0..dim {
                let mut v = 0.0;
                for c in 0..dim {
                    let w = gi[e * dim + c];
                    if w != 0.0 {
                        v += w * 0.5 * (tl(a, bb, c) + tl(c, a, bb) + tl(c, bb, a));
                    }
                }
                u.set(e, a, bb, v);
            }
        }
    }
    u
}

/// Contorsion of the prescribed torsion written block by block:
/// `U^{(v,r)}_{lj} = ½ T^{(v,r)}_{lj}`,
/// `U^r_{l(i,j)} = (1/2f)(g^{jb} R_{isl}^r t^s_b - g_{ia} R^{sj}{}_l{}^r t^a_s)`,
/// `U^r_{(t,l)j} = (1/2f)(g^{lb} R_{tsj}^r t^s_b - g_{ta} R^{sl}{}_j{}^r t^a_s)`.
pub fn contorsion_closed_11(b: &BundleAt) -> Result<ConnectionField> {
    let tor = prescribed_torsion_11(b)?;
    let geom = &b.geom;
    let n = geom.n;
    let dim = n + n * n;
    let f = b.rs.f;
    let t = &b.p.t;
    let tt = |up: usize, lo: usize| t[up * n + lo];
    let bar = |up: usize, lo: usize| n + up * n + lo;
    let rr = raised_riemann(geom);
    let rr = |s: usize, h: usize, m: usize, r: usize| rr[((s * n + h) * n + m) * n + r];
    let mut u = ConnectionField::zeros(dim);
    for l in 0..n {
        for j in 0..n {
            for k in n..dim {
                u.set(k, l, j, 0.5 * tor[(k * dim + l) * dim + j]);
            }
        }
    }
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for r in 0..n {
                    let mut acc = 0.0;
                    for s in 0..n {
                        for c in 0..n {
                            acc += geom.gi(j, c) * geom.riem(i, s, l, r) * tt(s, c) - geom.g(i, c) * rr(s, j, l, r) * tt(c, s);
                        }
                    }
                    u.set(r, l, bar(i, j), acc / (2.0 * f));
                    // Renaming indices shows the (vertical, horizontal) block is the same value.
                    u.set(r, bar(i, j), l, acc / (2.0 * f));
                }
            }
        }
    }
    Ok(u)
}

/// Metric connection with prescribed torsion on a `(1,1)` bundle, block by
/// block: `Γ^r_{lj} + A^r_{lj}/2f` on horizontal pairs and
/// `Γ^v_{li} δ^j_r - Γ^j_{lr} δ^v_i` on `(E_l, E_(i,j))`; all else zero.
pub fn metric_connection_11(b: &BundleAt) -> Result<ConnectionField> {
    require_11(b, "metric_connection_11")?;
    let geom = &b.geom;
    let n = geom.n;
    let dim = n + n * n;
    let bar = |up: usize, lo: usize| n + up * n + lo;
    let mut c = ConnectionField::zeros(dim);
    for l in 0..n {
        for j in 0..n {
            for r in 0..n {
                c.set(r, l, j, geom.gamma(r, l, j) + b.rs.a(r, l, j) / (2.0 * b.rs.f));
            }
        }
        for i in 0..n {
            for j in 0..n {
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
    Ok(c)
}

/// The same connection for any `(p,q)`: `Γ + A/2f` on horizontal pairs and
/// the fiber action of `Γ_l` on `(E_l, vertical)`.
pub fn metric_connection_pq(b: &BundleAt) -> ConnectionField {
    let geom = &b.geom;
    let ft = b.ft();
    let n = geom.n;
    let fd = ft.dim();
    let mut c = ConnectionField::zeros(n + fd);
    for l in 0..n {
        for j in 0..n {
            for r in 0..n {
                c.set(r, l, j, geom.gamma(r, l, j) + b.rs.b(r, l, j));
            }
        }
        let act = ft.action_matrix(&geom.gamma_dir(&unit(n, l)));
        for bb in 0..fd {
            for a in 0..fd {
                c.set(n + bb, l, n + a, act[bb * fd + a]);
            }
        }
    }
    c
}

/// Levi-Civita connection plus the contorsion of the prescribed torsion.
pub fn metric_connection_from_torsion(b: &BundleAt) -> ConnectionField {
    let lc = levi_civita_pq(b);
    lc.add(&contorsion(&b.metric, &prescribed_torsion_pq(b)))
}

/// Largest `|(∇_a g)_{bc}| = |E_a(g_{bc}) - C^e_{ab} g_{ec} - C^e_{ac} g_{be}|`
/// at `y`, with frame derivatives of the metric by central differences.
pub fn metricity_residual<F>(bundle: &SasakiBundle, y: &[f64], conn: F, h: f64) -> Result<f64>
where
    F: Fn(&BundleAt) -> Result<ConnectionField>,
{
    let b = bundle.at(y)?;
    let c = conn(&b)?;
    let dim = b.dim();
    let g = b.metric.matrix();
    let mut worst = 0.0f64;
    for a in 0..dim {
        let mut e = vec![0.0; dim];
        e[a] = 1.0;
        let dir = b.natural(&e);
        let plus: Vec<f64> = y.iter().zip(&dir).map(|(u, d)| u + h * d).collect();
        let minus: Vec<f64> = y.iter().zip(&dir).map(|(u, d)| u - h * d).collect();
        let gp = bundle.at_order(&plus, 1)?.metric.matrix();
        let gm = bundle.at_order(&minus, 1)?.metric.matrix();
        for bb in 0..dim {
            for cc in 0..dim {
                let mut v = (gp[bb * dim + cc] - gm[bb * dim + cc]) / (2.0 * h);
                for e in 0..dim {
                    v -= c.get(e, a, bb) * g[e * dim + cc] + c.get(e, a, cc) * g[bb * dim + e];
                }
                worst = worst.max(v.abs());
            }
        }
    }
    Ok(worst)
}

/// Largest deviation of the realized torsion of `conn` from `expected`.
pub fn torsion_residual(b: &BundleAt, conn: &ConnectionField, expected: &[f64]) -> f64 {
    torsion_of(b, conn)
        .iter()
        .zip(expected)
        .fold(0.0f64, |m, (a, e)| m.max((a - e).abs()))
}

/// Curvature of the metric connection in closed form.
#[derive(Clone, Debug)]
pub struct MetricCurvatureAt {
    pub dim: usize,
    /// `R[a][b][c][d]`, component `d` of `R(E_a, E_b) E_c`.
    pub r: Vec<f64>,
    pub ricci: Vec<f64>,
    /// `(1/f) r + fL`.
    pub scalar: f64,
    pub f_l: f64,
}

/// `R(E_m,E_l)E_j = (R_{mlj}^r + K^r_{mlj}) E_r`,
/// `R(E_m,E_l)E_(i,j) = (R_{mli}^v δ^j_r - R_{mlr}^j δ^v_i) E_(v,r)` (fiber
/// action of `R(∂_m,∂_l)` in general), zero otherwise.
pub fn metric_connection_curvature(b: &BundleAt) -> Result<MetricCurvatureAt> {
    let geom = &b.geom;
    if geom.order < 3 {
        return Err(Error::BadParameter("curvature needs third-order base geometry".into()));
    }
    let ft = b.ft();
    let n = geom.n;
    let fd = ft.dim();
    let dim = n + fd;
    let k = b.rs.flatness_combination();
    let mut r = vec![0.0; dim * dim * dim * dim];
    let idx = |a: usize, bb: usize, c: usize, d: usize| ((a * dim + bb) * dim + c) * dim + d;
    for m in 0..n {
        for l in 0..n {
            for j in 0..n {
                for s in 0..n {
                    r[idx(m, l, j, s)] = geom.riem(m, l, j, s) + k[((m * n + l) * n + j) * n + s];
                }
            }
            let act = ft.action_matrix(&geom.riem_matrix(m, l));
            for bb in 0..fd {
                for a in 0..fd {
                    r[idx(m, l, n + a, n + bb)] = act[bb * fd + a];
                }
            }
        }
    }
    let ricci = crate::curvature::contract_ricci(dim, &r);
    let f_l = b.rs.f_l(geom);
    Ok(MetricCurvatureAt {
        dim,
        r,
        ricci,
        scalar: geom.scalar / b.rs.f + f_l,
        f_l,
    })
}

/// Product conjugate connection `P(∇_X (P Y))` of the Levi-Civita connection
/// for a block structure `P` with eigenvalues `±1`:
/// `C^c_{ab} ↦ P_c P_b C^c_{ab}`.
pub fn conjugate_connection(b: &BundleAt, p: &StructureTensor) -> Result<ConnectionField> {
    let (n, hm, vm) = match p {
        StructureTensor::Block { n, h, v } => (*n, *h, *v),
        StructureTensor::Dense { .. } => {
            return Err(Error::BadParameter("conjugate connection needs a block structure".into()));
        }
    };
    let lc = levi_civita_pq(b);
    let dim = lc.dim;
    let mult = |k: usize| if k < n { hm } else { vm };
    let mut out = ConnectionField::zeros(dim);
    for a in 0..dim {
        for bb in 0..dim {
            for c in 0..dim {
                out.set(c, a, bb, mult(c) * mult(bb) * lc.get(c, a, bb));
            }
        }
    }
    Ok(out)
}

/// Conjugate connection of `J` on a `(1,1)` bundle with its displayed signs:
/// the vertical part on horizontal pairs and the horizontal part on
/// `(E_l, E_(i,j))` flip sign relative to Levi-Civita, the rest is unchanged.
pub fn conjugate_connection_closed_11(b: &BundleAt) -> Result<ConnectionField> {
    let lc = crate::sasaki::levi_civita_11(b)?;
    let n = b.n();
    let dim = lc.dim;
    let mut out = lc.clone();
    for l in 0..n {
        for j in 0..n {
            for k in n..dim {
                out.set(k, l, j, -lc.get(k, l, j));
            }
        }
        for a in n..dim {
            for r in 0..n {
                out.set(r, l, a, -lc.get(r, l, a));
            }
        }
    }
    Ok(out)
}

/// Largest `|R^P(a,b)c - P R(a,b) P c|` between two frame curvature arrays.
pub fn conjugate_curvature_defect(n: usize, dim: usize, p: &StructureTensor, r_conj: &[f64], r: &[f64]) -> f64 {
    let m = p.matrix(dim);
    let mult = |k: usize| if k < n { m[0] } else { m[dim * dim - 1] };
    let mut worst = 0.0f64;
    for a in 0..dim {
        for bb in 0..dim {
            for c in 0..dim {
                for d in 0..dim {
                    let k = ((a * dim + bb) * dim + c) * dim + d;
                    worst = worst.max((r_conj[k] - mult(d) * mult(c) * r[k]).abs());
                }
            }
        }
    }
    worst
}
