//! Almost paracomplex, almost product and Golden structures on the bundle,
//! the Tachibana φ-operator applied to the bundle metric, and the almost
//! product connection built from the Levi-Civita connection.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::{directional_derivative, lie_bracket, map_field, metric_of, random_polynomial_field, FieldFn};
use crate::frames::{adapted_brackets, curvature_vertical};
use crate::sasaki::{levi_civita_pq, BundleAt, ConnectionField, SasakiBundle};

const SQRT5: f64 = 2.236_067_977_499_79;

/// A `(1,1)` tensor on the bundle in adapted components.
#[derive(Clone, Debug, PartialEq)]
pub enum StructureTensor {
    /// Multiplies the horizontal block by `h` and the vertical block by `v`.
    Block { n: usize, h: f64, v: f64 },
    /// Arbitrary matrix, row-major `dim x dim`.
    Dense { dim: usize, m: Vec<f64> },
}

impl StructureTensor {
    /// `J`: `-1` on horizontal, `+1` on vertical vectors.
    pub fn paracomplex(n: usize) -> Self {
        StructureTensor::Block { n, h: -1.0, v: 1.0 }
    }

    /// Diagonal lift of the identity: `+1` horizontal, `-1` vertical.
    pub fn diagonal_identity(n: usize) -> Self {
        StructureTensor::Block { n, h: 1.0, v: -1.0 }
    }

    /// Golden structure `(I + √5 J)/2`.
    pub fn golden_tilde(n: usize) -> Self {
        StructureTensor::Block {
            n,
            h: (1.0 - SQRT5) / 2.0,
            v: (1.0 + SQRT5) / 2.0,
        }
    }

    /// Golden structure built from the diagonal lift of the identity.
    pub fn golden_bar(n: usize) -> Self {
        StructureTensor::Block {
            n,
            h: (1.0 + SQRT5) / 2.0,
            v: (1.0 - SQRT5) / 2.0,
        }
    }

    /// Swaps `E_j` and the `j`-th vertical frame vector for `j < n`; not
    /// pure for the bundle metric in general.
    pub fn swap_control(n: usize, dim: usize) -> Self {
        let mut m = vec![0.0; dim * dim];
        for k in 0..dim {
            let img = if k < n {
                n + k
            } else if k < 2 * n {
                k - n
            } else {
                k
            };
            m[img * dim + k] = 1.0;
        }
        StructureTensor::Dense { dim, m }
    }

    pub fn matrix(&self, dim: usize) -> Vec<f64> {
        match self {
            StructureTensor::Block { n, h, v } => {
                let mut m = vec![0.0; dim * dim];
                for k in 0..dim {
                    m[k * dim + k] = if k < *n { *h } else { *v };
                }
                m
            }
            StructureTensor::Dense { m, .. } => m.clone(),
        }
    }

    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        match self {
            StructureTensor::Block { n, h, v } => w
                .iter()
                .enumerate()
                .map(|(k, x)| if k < *n { h * x } else { v * x })
                .collect(),
            StructureTensor::Dense { dim, m } => (0..*dim)
                .map(|i| (0..*dim).map(|j| m[i * dim + j] * w[j]).sum())
                .collect(),
        }
    }

    /// `a S + b I`.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        match self {
            StructureTensor::Block { n, h, v } => StructureTensor::Block {
                n: *n,
                h: a * h + b,
                v: a * v + b,
            },
            StructureTensor::Dense { dim, m } => {
                let mut out: Vec<f64> = m.iter().map(|x| a * x).collect();
                for k in 0..*dim {
                    out[k * dim + k] += b;
                }
                StructureTensor::Dense { dim: *dim, m: out }
            }
        }
    }

    /// Almost product structure `(2ψ - I)/√5` of a Golden structure `ψ`.
    pub fn product_from_golden(&self) -> Self {
        self.affine(2.0 / SQRT5, -1.0 / SQRT5)
    }

    /// Golden structure `(I + √5 F)/2` of an almost product structure `F`.
    pub fn golden_from_product(&self) -> Self {
        self.affine(SQRT5 / 2.0, 0.5)
    }

    pub fn as_field_map(&self) -> impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static {
        let s = self.clone();
        move |w: &[f64]| s.apply(w)
    }
}

/// `max |S² - a S - b I|` applied to the given vectors.
pub fn polynomial_defect(s: &StructureTensor, a: f64, b: f64, vectors: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for w in vectors {
        let sw = s.apply(w);
        let ssw = s.apply(&sw);
        for k in 0..w.len() {
            worst = worst.max((ssw[k] - a * sw[k] - b * w[k]).abs());
        }
    }
    worst
}

/// Largest `|g(SX, Y) - g(X, SY)|` over random pairs at each point.
pub fn purity_check(
    s: &StructureTensor,
    bundle: &SasakiBundle,
    points: &[Vec<f64>],
    pairs: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let dim = bundle.dim();
    let mut worst = 0.0f64;
    for y in points {
        let b = bundle.at_order(y, 1)?;
        for _ in 0..pairs {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let z: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let d = b.metric.inner_flat(&s.apply(&x), &z) - b.metric.inner_flat(&x, &s.apply(&z));
            worst = worst.max(d.abs());
        }
    }
    Ok(worst)
}

/// `(φ_S g)(X, Y, Z) = (SX)(g(Y,Z)) - X(g(SY,Z)) + g((L_Y S)X, Z) + g(Y, (L_Z S)X)`
/// at `y`, with `(L_Y S)X = [Y, SX] - S[Y, X]` and all derivatives by
/// central differences of step `h`.
pub fn phi_operator(
    s: &StructureTensor,
    bundle: &SasakiBundle,
    x: &FieldFn,
    yf: &FieldFn,
    z: &FieldFn,
    y: &[f64],
    h: f64,
) -> Result<f64> {
    let sx = map_field(x.clone(), s.as_field_map());
    let sy = map_field(yf.clone(), s.as_field_map());
    let g_yz = |q: &[f64]| metric_of(bundle, yf, z, q);
    let g_syz = |q: &[f64]| metric_of(bundle, &sy, z, q);
    let term1 = directional_derivative(bundle, &sx, &g_yz, y, h)?;
    let term2 = directional_derivative(bundle, x, &g_syz, y, h)?;
    let b = bundle.at_order(y, 1)?;
    let lie = |w: &FieldFn| -> Result<Vec<f64>> {
        let a = lie_bracket(bundle, w, &sx, y, h)?;
        let c = s.apply(&lie_bracket(bundle, w, x, y, h)?);
        Ok(a.iter().zip(&c).map(|(p, q)| p - q).collect())
    };
    let ly = lie(yf)?;
    let lz = lie(z)?;
    let term3 = b.metric.inner_flat(&ly, &z(y)?);
    let term4 = b.metric.inner_flat(&yf(y)?, &lz);
    Ok(term1 - term2 + term3 + term4)
}

/// Pointwise value of `φ_J g` for adapted vectors at one point:
/// `2 G(Y_v, (γ̃-γ)R(X_h, Z_h)) + 2 G((γ̃-γ)R(X_h, Y_h), Z_v)`.
pub fn phi_j_closed_form(b: &BundleAt, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
    let n = b.n();
    let om_xz = curvature_vertical(&b.geom, &b.p, &x[..n], &z[..n]);
    let om_xy = curvature_vertical(&b.geom, &b.p, &x[..n], &y[..n]);
    let fiber = &b.metric.fiber;
    2.0 * crate::fiber::quad(fiber, &y[n..], &om_xz) + 2.0 * crate::fiber::quad(fiber, &om_xy, &z[n..])
}

/// `φ(X,Y,Z) + φ(Y,Z,X) + φ(Z,X,Y)` for `φ = φ_J g` by finite differences.
pub fn cyclic_phi(bundle: &SasakiBundle, x: &FieldFn, yf: &FieldFn, z: &FieldFn, y: &[f64], h: f64) -> Result<f64> {
    let j = StructureTensor::paracomplex(bundle.n());
    Ok(phi_operator(&j, bundle, x, yf, z, y, h)?
        + phi_operator(&j, bundle, yf, z, x, y, h)?
        + phi_operator(&j, bundle, z, x, yf, y, h)?)
}

/// Largest cyclic sum of `φ_J g` over `triples` random polynomial field
/// triples per point.
pub fn quasi_para_kahler_check(
    bundle: &SasakiBundle,
    points: &[Vec<f64>],
    triples: usize,
    rng: &mut ChaCha8Rng,
    h: f64,
) -> Result<f64> {
    let n = bundle.n();
    let dim = bundle.dim();
    let mut worst = 0.0f64;
    for y in points {
        for _ in 0..triples {
            let x = random_polynomial_field(rng, n, dim, y, (true, true));
            let yy = random_polynomial_field(rng, n, dim, y, (true, true));
            let z = random_polynomial_field(rng, n, dim, y, (true, true));
            worst = worst.max(cyclic_phi(bundle, &x, &yy, &z, y, h)?.abs());
        }
    }
    Ok(worst)
}

/// Almost product connection `∇_X Y - S(X,Y)` with
/// `S(X,Y) = ½{(∇_{PY}P)X + P((∇_Y P)X) - P((∇_X P)Y)}` for a block structure
/// `P` with eigenvalues `±1`.
pub fn product_connection(b: &BundleAt, p: &StructureTensor) -> Result<ConnectionField> {
    let (n, hm, vm) = match p {
        StructureTensor::Block { n, h, v } => (*n, *h, *v),
        StructureTensor::Dense { .. } => {
            return Err(Error::BadParameter("product connection needs a block structure".into()));
        }
    };
    let lc = levi_civita_pq(b);
    let dim = lc.dim;
    let mult = |k: usize| if k < n { hm } else { vm };
    // ((∇_a P) E_b)^c = (P_b - P_c) C^c_{ab}
    let dp = |a: usize, bb: usize, c: usize| (mult(bb) - mult(c)) * lc.get(c, a, bb);
    let mut out = ConnectionField::zeros(dim);
    for a in 0..dim {
        for bb in 0..dim {
            for c in 0..dim {
                let s = 0.5 * (mult(bb) * dp(bb, a, c) + mult(c) * dp(bb, a, c) - mult(c) * dp(a, bb, c));
                out.set(c, a, bb, lc.get(c, a, bb) - s);
            }
        }
    }
    Ok(out)
}

/// Closed block form of the almost product connection of `J` on a `(1,1)`
/// bundle: `Γ + A/2f` on horizontal pairs, the fiber action of `Γ` on
/// (horizontal, vertical), three times the Levi-Civita coefficient on
/// (vertical, horizontal), zero on vertical pairs.
pub fn product_connection_closed_11(b: &BundleAt) -> Result<ConnectionField> {
    let lc = crate::sasaki::levi_civita_11(b)?;
    let n = b.n();
    let dim = lc.dim;
    let mut out = ConnectionField::zeros(dim);
    for a in 0..dim {
        for bb in 0..dim {
            for c in 0..dim {
                let v = match (a < n, bb < n, c < n) {
                    (true, true, true) => lc.get(c, a, bb),
                    (true, false, false) => lc.get(c, a, bb),
                    (false, true, true) => 3.0 * lc.get(c, a, bb),
                    _ => 0.0,
                };
                out.set(c, a, bb, v);
            }
        }
    }
    Ok(out)
}

/// Realized torsion `T^c_{ab} = C^c_{ab} - C^c_{ba} - c^c_{ab}` at the point.
pub fn torsion_of(b: &BundleAt, conn: &ConnectionField) -> Vec<f64> {
    let dim = conn.dim;
    let br = adapted_brackets(&b.p, &b.geom);
    let mut t = vec![0.0; dim * dim * dim];
    for c in 0..dim {
        for a in 0..dim {
            for bb in 0..dim {
                t[(c * dim + a) * dim + bb] = conn.get(c, a, bb) - conn.get(c, bb, a) - br.get(c, a, bb);
            }
        }
    }
    t
}

/// Torsion of the almost product connection of `J` in closed form:
/// `T(E_l, E_j) = -(γ̃-γ)R(∂_l, ∂_j)`, `T(E_a, E_j) = 3 C^m_{a j}` for vertical
/// `a`, zero on vertical pairs.
pub fn product_torsion_closed_11(b: &BundleAt) -> Result<Vec<f64>> {
    let lc = crate::sasaki::levi_civita_11(b)?;
    let n = b.n();
    let dim = lc.dim;
    let mut t = vec![0.0; dim * dim * dim];
    let mut e = vec![0.0; n];
    let mut f = vec![0.0; n];
    for l in 0..n {
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            f.iter_mut().for_each(|v| *v = 0.0);
            e[l] = 1.0;
            f[j] = 1.0;
            let om = curvature_vertical(&b.geom, &b.p, &e, &f);
            for (k, v) in om.iter().enumerate() {
                t[((n + k) * dim + l) * dim + j] = -v;
            }
        }
    }
    for a in n..dim {
        for j in 0..n {
            for m in 0..n {
                let v = 3.0 * lc.get(m, a, j);
                t[(m * dim + a) * dim + j] = v;
                t[(m * dim + j) * dim + a] = -v;
            }
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{ManifoldChart, Preset};
    use crate::fields::{horizontal_field, vertical_field, FD_STEP};
    use crate::sasaki::RescaleFunction;
    use rand::SeedableRng;

    fn bundle(preset: Preset, f: &str) -> SasakiBundle {
        let chart = ManifoldChart::preset(&preset).unwrap();
        let n = chart.n;
        SasakiBundle::new(chart, RescaleFunction::parse(f, n).unwrap(), 1, 1).unwrap()
    }

    #[test]
    fn structure_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vs: Vec<Vec<f64>> = (0..10).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        assert_eq!(polynomial_defect(&StructureTensor::paracomplex(2), 0.0, 1.0, &vs), 0.0);
        assert_eq!(polynomial_defect(&StructureTensor::diagonal_identity(2), 0.0, 1.0, &vs), 0.0);
        assert!(polynomial_defect(&StructureTensor::golden_tilde(2), 1.0, 1.0, &vs) < 1e-12);
        assert!(polynomial_defect(&StructureTensor::golden_bar(2), 1.0, 1.0, &vs) < 1e-12);
        let f = StructureTensor::golden_tilde(2).product_from_golden();
        assert!(polynomial_defect(&f, 0.0, 1.0, &vs) < 1e-12);
        assert_eq!(f.apply(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0])[0], -1.0 + 0.0 * 1.0);
    }

    #[test]
    fn purity_and_impure_control() {
        let sb = bundle(Preset::Sphere(1.0), "exp(x1/5)");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = vec![vec![1.0, 0.2, 0.3, -0.4, 0.5, 0.9]];
        assert!(purity_check(&StructureTensor::paracomplex(2), &sb, &pts, 5, &mut rng).unwrap() < 1e-12);
        assert!(purity_check(&StructureTensor::golden_tilde(2), &sb, &pts, 5, &mut rng).unwrap() < 1e-12);
        assert!(purity_check(&StructureTensor::swap_control(2, 6), &sb, &pts, 5, &mut rng).unwrap() > 1e-3);
    }

    #[test]
    fn phi_matches_closed_form_on_lifts() {
        let sb = bundle(Preset::Sphere(1.0), "1");
        let y = [1.0, 0.2, 0.3, -0.4, 0.5, 0.9];
        let x = horizontal_field(2, 4, |x: &[f64]| vec![1.0 + x[0], x[1]]);
        let z = horizontal_field(2, 4, |x: &[f64]| vec![x[1] * x[0], 2.0]);
        let bv = vertical_field(2, |x: &[f64]| vec![x[0], 1.0, -x[1], 0.5]);
        let j = StructureTensor::paracomplex(2);
        let b = sb.at(&y).unwrap();
        let fd = phi_operator(&j, &sb, &x, &bv, &z, &y, FD_STEP).unwrap();
        let cf = phi_j_closed_form(&b, &x(&y).unwrap(), &bv(&y).unwrap(), &z(&y).unwrap());
        assert!(cf.abs() > 1e-3);
        assert!((fd - cf).abs() < 1e-5, "{fd} vs {cf}");
    }

    #[test]
    fn product_connection_blocks() {
        let sb = bundle(Preset::Sphere(1.0), "exp(x1/5)");
        let b = sb.at(&[1.0, 0.2, 0.3, -0.4, 0.5, 0.9]).unwrap();
        let built = product_connection(&b, &StructureTensor::paracomplex(2)).unwrap();
        let closed = product_connection_closed_11(&b).unwrap();
        assert!(built.max_abs_diff(&closed) < 1e-12);
        let t = torsion_of(&b, &built);
        let tc = product_torsion_closed_11(&b).unwrap();
        let d = t.iter().zip(&tc).fold(0.0f64, |m, (a, c)| m.max((a - c).abs()));
        assert!(d < 1e-12, "{d}");
    }
}
