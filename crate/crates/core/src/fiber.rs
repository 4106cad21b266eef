//! Fiber layout of the tensor bundle `T^p_q(M)` and the algebraic operations
//! on fiber tensors.
//!
//! A `(p, q)` tensor over an `n`-dimensional base has `n^(p+q)` components,
//! flattened row-major with the `p` upper indices first, then the `q` lower
//! ones, each 0-based. For `(1, 1)` the component `t^i_j` sits at `i*n + j`.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FiberType {
    pub n: usize,
    pub p: usize,
    pub q: usize,
}

impl FiberType {
    pub fn new(n: usize, p: usize, q: usize) -> Self {
        FiberType { n, p, q }
    }

    /// Number of fiber components, `n^(p+q)`.
    pub fn dim(&self) -> usize {
        self.n.pow((self.p + self.q) as u32)
    }

    pub fn rank(&self) -> usize {
        self.p + self.q
    }

    /// Dimension of the bundle, `n + n^(p+q)`.
    pub fn total_dim(&self) -> usize {
        self.n + self.dim()
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let r = self.rank();
        let mut idx = vec![0; r];
        for slot in (0..r).rev() {
            idx[slot] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    /// Column label such as `t_010` for the component with indices `(0,1,0)`.
    pub fn label(&self, flat: usize) -> String {
        let idx = self.unflatten(flat);
        let mut s = String::from("t_");
        for i in idx {
            s.push_str(&i.to_string());
        }
        s
    }

    pub fn check(&self, t: &[f64]) -> Result<()> {
        if t.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.dim(),
                got: t.len(),
            });
        }
        Ok(())
    }

    /// Identity `(1,1)` tensor, or error for other types.
    pub fn identity(&self) -> Result<Vec<f64>> {
        if (self.p, self.q) != (1, 1) {
            return Err(Error::BadParameter("identity tensor needs type (1,1)".into()));
        }
        let n = self.n;
        Ok((0..n * n).map(|k| if k / n == k % n { 1.0 } else { 0.0 }).collect())
    }

    /// Derivation action of a matrix `phi[i][s]` (row-major `n x n`):
    /// `sum over upper slots phi^{i}_s t^{..s..} - sum over lower slots phi^s_{j} t_{..s..}`.
    pub fn action(&self, phi: &[f64], t: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.action_into(phi, t, &mut out, 1.0);
        out
    }

    /// `out += scale * action(phi, t)`.
    pub fn action_into(&self, phi: &[f64], t: &[f64], out: &mut [f64], scale: f64) {
        let n = self.n;
        let r = self.rank();
        let mut strides = vec![1usize; r];
        for slot in (0..r.saturating_sub(1)).rev() {
            strides[slot] = strides[slot + 1] * n;
        }
        for (flat, o) in out.iter_mut().enumerate() {
            let idx = self.unflatten(flat);
            let mut acc = 0.0;
            for slot in 0..r {
                let base = flat - idx[slot] * strides[slot];
                if slot < self.p {
                    let i = idx[slot];
                    for s in 0..n {
                        acc += phi[i * n + s] * t[base + s * strides[slot]];
                    }
                } else {
                    let j = idx[slot];
                    for s in 0..n {
                        acc -= phi[s * n + j] * t[base + s * strides[slot]];
                    }
                }
            }
            *o += scale * acc;
        }
    }

    /// Matrix of [`FiberType::action`] for a fixed `phi`, row-major
    /// `dim x dim`: `action(phi, t)[a] = sum_b M[a][b] t[b]`.
    pub fn action_matrix(&self, phi: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut m = vec![0.0; d * d];
        let mut e = vec![0.0; d];
        let mut col = vec![0.0; d];
        for b in 0..d {
            e[b] = 1.0;
            col.iter_mut().for_each(|v| *v = 0.0);
            self.action_into(phi, &e, &mut col, 1.0);
            for a in 0..d {
                m[a * d + b] = col[a];
            }
            e[b] = 0.0;
        }
        m
    }

    /// Fiber inner product matrix: `g` on each upper slot and `g^{-1}` on each
    /// lower slot, as a row-major `dim x dim` matrix.
    pub fn fiber_metric(&self, g: &[f64], g_inv: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let n = self.n;
        let mut m = vec![0.0; d * d];
        let idx: Vec<Vec<usize>> = (0..d).map(|k| self.unflatten(k)).collect();
        for a in 0..d {
            for b in 0..d {
                let mut v = 1.0;
                for slot in 0..self.rank() {
                    let (i, j) = (idx[a][slot], idx[b][slot]);
                    v *= if slot < self.p { g[i * n + j] } else { g_inv[i * n + j] };
                }
                m[a * d + b] = v;
            }
        }
        m
    }

    /// `G(a, b)` for the fiber inner product.
    pub fn inner(&self, g: &[f64], g_inv: &[f64], a: &[f64], b: &[f64]) -> f64 {
        let m = self.fiber_metric(g, g_inv);
        quad(&m, a, b)
    }
}

/// `a^T M b` for a row-major square matrix.
pub fn quad(m: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let d = a.len();
    let mut s = 0.0;
    for i in 0..d {
        if a[i] == 0.0 {
            continue;
        }
        let row = &m[i * d..(i + 1) * d];
        s += a[i] * row.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    }
    s
}

/// Trace of a `(1,1)` tensor.
pub fn trace11(n: usize, t: &[f64]) -> f64 {
    (0..n).map(|i| t[i * n + i]).sum()
}

/// Trace of the square of a `(1,1)` tensor, `t^i_s t^s_i`.
pub fn trace_sq11(n: usize, t: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for k in 0..n {
            s += t[i * n + k] * t[k * n + i];
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_round_trip() {
        let ft = FiberType::new(3, 1, 2);
        assert_eq!(ft.dim(), 27);
        for k in 0..27 {
            assert_eq!(ft.flatten(&ft.unflatten(k)), k);
        }
        assert_eq!(ft.flatten(&[2, 0, 1]), 19);
        assert_eq!(ft.label(19), "t_201");
    }

    #[test]
    fn action_on_11_is_commutator() {
        let n = 2;
        let ft = FiberType::new(n, 1, 1);
        let phi = [1.0, 2.0, 3.0, 4.0];
        let t = [0.5, -1.0, 2.0, 0.25];
        let out = ft.action(&phi, &t);
        for i in 0..n {
            for j in 0..n {
                let mut expect = 0.0;
                for s in 0..n {
                    expect += phi[i * n + s] * t[s * n + j] - t[i * n + s] * phi[s * n + j];
                }
                assert!((out[i * n + j] - expect).abs() < 1e-15);
            }
        }
        let id = ft.identity().unwrap();
        assert!(ft.action(&phi, &id).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn action_on_covectors_and_vectors() {
        let n = 2;
        let phi = [1.0, 2.0, 3.0, 4.0];
        let v = FiberType::new(n, 1, 0);
        assert_eq!(v.action(&phi, &[1.0, 0.0]), vec![1.0, 3.0]);
        let w = FiberType::new(n, 0, 1);
        assert_eq!(w.action(&phi, &[1.0, 0.0]), vec![-1.0, -2.0]);
        let scalar = FiberType::new(n, 0, 0);
        assert_eq!(scalar.dim(), 1);
        assert_eq!(scalar.action(&phi, &[3.0]), vec![0.0]);
    }

    #[test]
    fn action_matrix_matches_action() {
        let ft = FiberType::new(2, 0, 2);
        let phi = [0.3, -1.0, 2.0, 0.7];
        let t = [1.0, 2.0, -0.5, 0.25];
        let m = ft.action_matrix(&phi);
        let direct = ft.action(&phi, &t);
        for a in 0..4 {
            let v: f64 = (0..4).map(|b| m[a * 4 + b] * t[b]).sum();
            assert!((v - direct[a]).abs() < 1e-14);
        }
    }

    #[test]
    fn fiber_metric_for_11() {
        let ft = FiberType::new(2, 1, 1);
        let g = [2.0, 0.0, 0.0, 3.0];
        let gi = [0.5, 0.0, 0.0, 1.0 / 3.0];
        let m = ft.fiber_metric(&g, &gi);
        // G(t, t) = g_ik g^jl t^i_j t^k_l
        let t = [1.0, 2.0, 3.0, 4.0];
        let direct = 2.0 * 0.5 * 1.0 + 2.0 / 3.0 * 4.0 + 3.0 * 0.5 * 9.0 + 3.0 / 3.0 * 16.0;
        assert!((quad(&m, &t, &t) - direct).abs() < 1e-14);
    }
}
