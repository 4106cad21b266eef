//! Points of the tensor bundle, lifts, and the adapted frame.
//!
//! The adapted frame is `{E_j, E_jbar}`: `E_j` is the horizontal lift of `∂_j`
//! and `E_jbar` the vertical lift of the `jbar`-th basis tensor. Components of
//! bundle vectors are stored in this frame as `(h, v)` blocks. In natural
//! coordinates `(x^h, t^a)` the frame is
//!
//! ```text
//! E_l    = ∂_l - (Γ_l · t)^a ∂_a,      (Γ_l)^i_s = Γ^i_{ls}
//! E_abar = ∂_a
//! ```
//!
//! where `φ · t` is the derivation action of [`FiberType::action`].

use nalgebra::DMatrix;

use crate::base::BaseGeometryAt;
use crate::error::{Error, Result};
use crate::fiber::FiberType;

/// A point `(x, t)` of `T^p_q(M)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberPoint {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub ft: FiberType,
}

impl FiberPoint {
    pub fn new(x: Vec<f64>, t: Vec<f64>, ft: FiberType) -> Result<FiberPoint> {
        if x.len() != ft.n {
            return Err(Error::ShapeMismatch { expected: ft.n, got: x.len() });
        }
        ft.check(&t)?;
        Ok(FiberPoint { x, t, ft })
    }

    /// Natural coordinates `(x, t)` as one vector.
    pub fn coords(&self) -> Vec<f64> {
        let mut y = self.x.clone();
        y.extend_from_slice(&self.t);
        y
    }

    pub fn from_coords(y: &[f64], ft: FiberType) -> Result<FiberPoint> {
        if y.len() != ft.total_dim() {
            return Err(Error::ShapeMismatch { expected: ft.total_dim(), got: y.len() });
        }
        Ok(FiberPoint {
            x: y[..ft.n].to_vec(),
            t: y[ft.n..].to_vec(),
            ft,
        })
    }
}

/// Bundle vector in adapted-frame components.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptedField {
    pub h: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdaptedField {
    pub fn zeros(ft: FiberType) -> Self {
        AdaptedField {
            h: vec![0.0; ft.n],
            v: vec![0.0; ft.dim()],
        }
    }

    pub fn from_flat(flat: &[f64], n: usize) -> Self {
        AdaptedField {
            h: flat[..n].to_vec(),
            v: flat[n..].to_vec(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = self.h.clone();
        out.extend_from_slice(&self.v);
        out
    }

    pub fn scale_blocks(&self, h: f64, v: f64) -> Self {
        AdaptedField {
            h: self.h.iter().map(|x| x * h).collect(),
            v: self.v.iter().map(|x| x * v).collect(),
        }
    }

    pub fn axpy(&self, a: f64, other: &AdaptedField) -> Self {
        AdaptedField {
            h: self.h.iter().zip(&other.h).map(|(x, y)| x + a * y).collect(),
            v: self.v.iter().zip(&other.v).map(|(x, y)| x + a * y).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.h.iter().chain(&self.v).fold(0.0, |m, x| m.max(x.abs()))
    }
}

pub fn vertical_lift(a: &[f64], p: &FiberPoint) -> Result<AdaptedField> {
    p.ft.check(a)?;
    Ok(AdaptedField {
        h: vec![0.0; p.ft.n],
        v: a.to_vec(),
    })
}

pub fn horizontal_lift(x: &[f64], p: &FiberPoint) -> Result<AdaptedField> {
    if x.len() != p.ft.n {
        return Err(Error::ShapeMismatch { expected: p.ft.n, got: x.len() });
    }
    Ok(AdaptedField {
        h: x.to_vec(),
        v: vec![0.0; p.ft.dim()],
    })
}

/// Natural-frame components of the horizontal lift of `x`.
pub fn horizontal_lift_natural(x: &[f64], p: &FiberPoint, geom: &BaseGeometryAt) -> Result<Vec<f64>> {
    let lifted = horizontal_lift(x, p)?;
    Ok(FrameTransition::at(p, geom).to_natural(&lifted))
}

/// `(γφ, γ̃φ)`: upper-slot and lower-slot contractions of `t` with `φ`,
/// as vertical fields. `γφ - γ̃φ = φ · t`.
pub fn gamma_ops(phi: &[f64], p: &FiberPoint) -> Result<(AdaptedField, AdaptedField)> {
    let ft = p.ft;
    if phi.len() != ft.n * ft.n {
        return Err(Error::ShapeMismatch { expected: ft.n * ft.n, got: phi.len() });
    }
    let upper = FiberType::new(ft.n, ft.p, 0);
    let mut gamma = vec![0.0; ft.dim()];
    let mut gamma_tilde = vec![0.0; ft.dim()];
    // Split the derivation action into its upper-slot and lower-slot parts by
    // acting on a tensor with the lower slots frozen.
    let lower_dim = ft.n.pow(ft.q as u32);
    let upper_dim = upper.dim();
    for lo in 0..lower_dim {
        let slice: Vec<f64> = (0..upper_dim).map(|u| p.t[u * lower_dim + lo]).collect();
        let acted = upper.action(phi, &slice);
        for u in 0..upper_dim {
            gamma[u * lower_dim + lo] = acted[u];
        }
    }
    let full = ft.action(phi, &p.t);
    for k in 0..ft.dim() {
        gamma_tilde[k] = gamma[k] - full[k];
    }
    let wrap = |v: Vec<f64>| AdaptedField { h: vec![0.0; ft.n], v };
    Ok((wrap(gamma), wrap(gamma_tilde)))
}

/// `(γ̃ - γ) R(X, Y)`: the vertical field `-(R(X,Y) · t)`.
pub fn curvature_vertical(geom: &BaseGeometryAt, p: &FiberPoint, x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = geom.n;
    let mut phi = vec![0.0; n * n];
    for l in 0..n {
        for j in 0..n {
            let c = x[l] * y[j];
            if c == 0.0 {
                continue;
            }
            let m = geom.riem_matrix(l, j);
            for (a, b) in phi.iter_mut().zip(&m) {
                *a += c * b;
            }
        }
    }
    let mut out = p.ft.action(&phi, &p.t);
    out.iter_mut().for_each(|v| *v = -*v);
    out
}

/// `Ω_{lj} = [E_l, E_j]`, a vertical vector: `-(R(∂_l, ∂_j) · t)`.
pub fn omega(geom: &BaseGeometryAt, p: &FiberPoint, l: usize, j: usize) -> Vec<f64> {
    let mut out = p.ft.action(&geom.riem_matrix(l, j), &p.t);
    out.iter_mut().for_each(|v| *v = -*v);
    out
}

/// Structure coefficients of the adapted frame: `[E_a, E_b] = c^d_{ab} E_d`.
#[derive(Clone, Debug)]
pub struct AdaptedBrackets {
    pub dim: usize,
    /// `c[(d * dim + a) * dim + b]`.
    pub c: Vec<f64>,
}

impl AdaptedBrackets {
    pub fn get(&self, d: usize, a: usize, b: usize) -> f64 {
        self.c[(d * self.dim + a) * self.dim + b]
    }

    /// `[E_a, E_b]` as a flat adapted vector.
    pub fn bracket(&self, a: usize, b: usize) -> Vec<f64> {
        (0..self.dim).map(|d| self.get(d, a, b)).collect()
    }
}

/// Lie brackets of the adapted frame on any `(p, q)` bundle.
pub fn adapted_brackets(p: &FiberPoint, geom: &BaseGeometryAt) -> AdaptedBrackets {
    let ft = p.ft;
    let n = ft.n;
    let dim = ft.total_dim();
    let mut c = vec![0.0; dim * dim * dim];
    let idx = |d: usize, a: usize, b: usize| (d * dim + a) * dim + b;
    for l in 0..n {
        for j in 0..n {
            if l == j {
                continue;
            }
            let om = omega(geom, p, l, j);
            for (k, v) in om.iter().enumerate() {
                c[idx(n + k, l, j)] = *v;
            }
        }
        let m = ft.action_matrix(&geom.gamma_dir(&unit(n, l)));
        let fd = ft.dim();
        for b in 0..fd {
            for a in 0..fd {
                let v = m[a * fd + b];
                c[idx(n + a, l, n + b)] = v;
                c[idx(n + a, n + b, l)] = -v;
            }
        }
    }
    AdaptedBrackets { dim, c }
}

/// `[E_l, E_j]` on a `(1,1)` bundle with components transcribed index by
/// index: `(t^v_s R_{ljr}^s - t^s_r R_{ljs}^v) E_(v,r)`.
pub fn bracket_hh_11(geom: &BaseGeometryAt, t: &[f64], l: usize, j: usize) -> Vec<f64> {
    let n = geom.n;
    let mut out = vec![0.0; n * n];
    for v in 0..n {
        for r in 0..n {
            let mut acc = 0.0;
            for s in 0..n {
                acc += t[v * n + s] * geom.riem(l, j, r, s) - t[s * n + r] * geom.riem(l, j, s, v);
            }
            out[v * n + r] = acc;
        }
    }
    out
}

/// `[E_l, E_(i,j)]` on a `(1,1)` bundle transcribed index by index:
/// `(δ^j_r Γ^v_{li} - δ^v_i Γ^j_{lr}) E_(v,r)`.
pub fn bracket_hv_11(geom: &BaseGeometryAt, l: usize, i: usize, j: usize) -> Vec<f64> {
    let n = geom.n;
    let mut out = vec![0.0; n * n];
    for v in 0..n {
        for r in 0..n {
            let a = if j == r { geom.gamma(v, l, i) } else { 0.0 };
            let b = if v == i { geom.gamma(j, l, r) } else { 0.0 };
            out[v * n + r] = a - b;
        }
    }
    out
}

pub(crate) fn unit(n: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[k] = 1.0;
    e
}

/// Change of basis between the adapted and natural frames at a point.
///
/// `F = [[I, 0], [N, I]]` with column `l` of `N` equal to `-(Γ_l · t)`;
/// natural components are `F` times adapted components.
#[derive(Clone, Debug)]
pub struct FrameTransition {
    pub n: usize,
    pub dim: usize,
    /// Row-major `fiber_dim x n`.
    pub nblock: Vec<f64>,
}

impl FrameTransition {
    pub fn at(p: &FiberPoint, geom: &BaseGeometryAt) -> Self {
        let ft = p.ft;
        let n = ft.n;
        let fd = ft.dim();
        let mut nblock = vec![0.0; fd * n];
        for l in 0..n {
            let col = ft.action(&geom.gamma_dir(&unit(n, l)), &p.t);
            for a in 0..fd {
                nblock[a * n + l] = -col[a];
            }
        }
        FrameTransition {
            n,
            dim: n + fd,
            nblock,
        }
    }

    pub fn to_natural(&self, w: &AdaptedField) -> Vec<f64> {
        let n = self.n;
        let mut out = w.h.clone();
        for (a, va) in w.v.iter().enumerate() {
            let corr: f64 = (0..n).map(|l| self.nblock[a * n + l] * w.h[l]).sum();
            out.push(va + corr);
        }
        out
    }

    pub fn to_adapted(&self, y: &[f64]) -> AdaptedField {
        let n = self.n;
        let h = y[..n].to_vec();
        let v = y[n..]
            .iter()
            .enumerate()
            .map(|(a, va)| va - (0..n).map(|l| self.nblock[a * n + l] * h[l]).sum::<f64>())
            .collect();
        AdaptedField { h, v }
    }

    /// Full matrix `F`, row-major.
    pub fn matrix(&self) -> Vec<f64> {
        let (n, d) = (self.n, self.dim);
        let mut m = vec![0.0; d * d];
        for k in 0..d {
            m[k * d + k] = 1.0;
        }
        for a in 0..d - n {
            for l in 0..n {
                m[(n + a) * d + l] = self.nblock[a * n + l];
            }
        }
        m
    }

    /// Full matrix `F^{-1} = [[I, 0], [-N, I]]`, row-major.
    pub fn inverse_matrix(&self) -> Vec<f64> {
        let (n, d) = (self.n, self.dim);
        let mut m = self.matrix();
        for a in 0..d - n {
            for l in 0..n {
                m[(n + a) * d + l] = -m[(n + a) * d + l];
            }
        }
        m
    }

    /// 2-norm condition number of `F`.
    pub fn condition_number(&self) -> f64 {
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.matrix());
        let sv = m.singular_values();
        let max = sv.iter().cloned().fold(0.0, f64::max);
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{ManifoldChart, Preset};

    fn sphere_point(t: Vec<f64>) -> (BaseGeometryAt, FiberPoint) {
        let m = ManifoldChart::preset(&Preset::Sphere(1.0)).unwrap();
        let x = vec![0.8, 0.3];
        let geom = m.geometry_at(&x).unwrap();
        let p = FiberPoint::new(x, t, FiberType::new(2, 1, 1)).unwrap();
        (geom, p)
    }

    #[test]
    fn lifts_have_expected_blocks() {
        let (_, p) = sphere_point(vec![1.0, 0.0, 0.0, 1.0]);
        let v = vertical_lift(&[1.0, 0.0, 0.0, 1.0], &p).unwrap();
        assert_eq!(v.h, vec![0.0, 0.0]);
        assert_eq!(v.v, vec![1.0, 0.0, 0.0, 1.0]);
        assert!(vertical_lift(&[1.0], &p).is_err());
        let h = horizontal_lift(&[2.0, -1.0], &p).unwrap();
        assert_eq!(h.v, vec![0.0; 4]);
    }

    #[test]
    fn identity_commutes_with_connection() {
        let (geom, p) = sphere_point(vec![1.0, 0.0, 0.0, 1.0]);
        let nat = horizontal_lift_natural(&[1.0, 0.0], &p, &geom).unwrap();
        assert_eq!(&nat[..2], &[1.0, 0.0]);
        assert!(nat[2..].iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn horizontal_lift_matches_transcribed_correction() {
        let t = vec![0.0, 1.0, 0.0, 0.0]; // e_1 ⊗ dx^2
        let (geom, p) = sphere_point(t.clone());
        let x = [0.0, 1.0];
        let nat = horizontal_lift_natural(&x, &p, &geom).unwrap();
        let n = 2;
        for i in 0..n {
            for j in 0..n {
                let mut expect = 0.0;
                for s in 0..n {
                    for m in 0..n {
                        expect += x[s] * (geom.gamma(m, s, j) * t[i * n + m] - geom.gamma(i, s, m) * t[m * n + j]);
                    }
                }
                assert!((nat[2 + i * n + j] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gamma_ops_on_identity_and_zero() {
        let t = vec![0.3, -1.0, 2.0, 0.5];
        let (_, p) = sphere_point(t.clone());
        let (g, gt) = gamma_ops(&[1.0, 0.0, 0.0, 1.0], &p).unwrap();
        assert_eq!(g.v, t);
        assert_eq!(gt.v, t);
        let (g, gt) = gamma_ops(&[0.0; 4], &p).unwrap();
        assert!(g.v.iter().chain(&gt.v).all(|v| *v == 0.0));
    }

    #[test]
    fn transcribed_brackets_match_general_form() {
        let t = vec![0.3, -1.0, 2.0, 0.5];
        let (geom, p) = sphere_point(t.clone());
        let br = adapted_brackets(&p, &geom);
        let hh = bracket_hh_11(&geom, &t, 0, 1);
        for k in 0..4 {
            assert!((br.get(2 + k, 0, 1) - hh[k]).abs() < 1e-14);
            assert!((br.get(2 + k, 1, 0) + hh[k]).abs() < 1e-14);
        }
        for l in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let hv = bracket_hv_11(&geom, l, i, j);
                    for k in 0..4 {
                        assert!((br.get(2 + k, l, 2 + i * 2 + j) - hv[k]).abs() < 1e-14);
                    }
                }
            }
        }
        for a in 2..6 {
            for b in 2..6 {
                assert!(br.bracket(a, b).iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn frame_round_trip() {
        let (geom, p) = sphere_point(vec![0.3, -1.0, 2.0, 0.5]);
        let tr = FrameTransition::at(&p, &geom);
        let w = AdaptedField {
            h: vec![0.4, -0.2],
            v: vec![1.0, 2.0, 3.0, 4.0],
        };
        let back = tr.to_adapted(&tr.to_natural(&w));
        assert!(back.axpy(-1.0, &w).max_abs() < 1e-12);
        let (f, fi) = (tr.matrix(), tr.inverse_matrix());
        let d = tr.dim;
        for i in 0..d {
            for j in 0..d {
                let v: f64 = (0..d).map(|k| f[i * d + k] * fi[k * d + j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        assert!(tr.condition_number() >= 1.0);
    }

    #[test]
    fn flat_base_frame_is_identity() {
        let m = ManifoldChart::preset(&Preset::Euclidean(2)).unwrap();
        let geom = m.geometry_at(&[0.1, 0.2]).unwrap();
        let p = FiberPoint::new(vec![0.1, 0.2], vec![1.0, 2.0, 3.0, 4.0], FiberType::new(2, 1, 1)).unwrap();
        let tr = FrameTransition::at(&p, &geom);
        let f = tr.matrix();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(f[i * 6 + j], if i == j { 1.0 } else { 0.0 });
            }
        }
        assert!(curvature_vertical(&geom, &p, &[1.0, 0.0], &[0.0, 1.0]).iter().all(|v| *v == 0.0));
    }
}
