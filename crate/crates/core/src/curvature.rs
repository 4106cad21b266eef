//! Curvature of the rescaled Sasaki metric on `T^1_1(M)`.
//!
//! The block formulas are written out term by term in the index layout in
//! which they are usually printed. A few printed terms contain an index that
//! is either left free or repeated three times; [`Reading`] selects between
//! the literal reading of those terms and the repaired one. Everything else
//! is identical in both readings.
//!
//! Curvature arrays are `[a][b][c][d]` = component `d` of `R(E_a, E_b) E_c`,
//! over adapted indices (horizontal `0..n`, then the fiber `n + v*n + r` for
//! `t^v_r`). Ricci is `R_{bc} = Σ_a R[a][b][c][a]`.

use crate::base::BaseGeometryAt;
use crate::error::{Error, Result};
use crate::fiber::{trace11, trace_sq11};
use crate::frames::adapted_brackets;
use crate::sasaki::{BundleAt, BundleMetricAt, ConnectionField, RescaleAt, SasakiBundle};

/// Which version of the ambiguous printed terms to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reading {
    /// Indices exactly as printed; a free index stands for the output index
    /// it shares a name with, an index repeated three times is summed once.
    Printed,
    /// Index typos repaired.
    Repaired,
}

/// The eight slot families `R(E_a, E_b) E_c` by horizontal/vertical type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Block {
    Hhh,
    Vhh,
    Hvh,
    Vvh,
    Hhv,
    Hvv,
    Vhv,
    Vvv,
}

impl Block {
    pub const ALL: [Block; 8] = [
        Block::Hhh,
        Block::Vhh,
        Block::Hvh,
        Block::Vvh,
        Block::Hhv,
        Block::Hvv,
        Block::Vhv,
        Block::Vvv,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Block::Hhh => "HHH",
            Block::Vhh => "VHH",
            Block::Hvh => "HVH",
            Block::Vvh => "VVH",
            Block::Hhv => "HHV",
            Block::Hvv => "HVV",
            Block::Vhv => "VHV",
            Block::Vvv => "VVV",
        }
    }

    /// Block of adapted indices `(a, b, c)` given the base dimension.
    pub fn of(n: usize, a: usize, b: usize, c: usize) -> Block {
        match (a < n, b < n, c < n) {
            (true, true, true) => Block::Hhh,
            (false, true, true) => Block::Vhh,
            (true, false, true) => Block::Hvh,
            (false, false, true) => Block::Vvh,
            (true, true, false) => Block::Hhv,
            (true, false, false) => Block::Hvv,
            (false, true, false) => Block::Vhv,
            (false, false, false) => Block::Vvv,
        }
    }
}

/// Sum of `f` over all `K`-tuples of indices in `0..n`.
#[inline]
fn sum<const K: usize>(n: usize, mut f: impl FnMut([usize; K]) -> f64) -> f64 {
    let mut idx = [0usize; K];
    let mut acc = 0.0;
    loop {
        acc += f(idx);
        let mut k = K;
        loop {
            if k == 0 {
                return acc;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
        }
    }
}

#[inline]
fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Index helpers over the base quantities at one point.
struct Terms<'a> {
    n: usize,
    geom: &'a BaseGeometryAt,
    rs: &'a RescaleAt,
    t: &'a [f64],
    f: f64,
    raised: Vec<f64>,
    nabla_raised: Vec<f64>,
    flat: Vec<f64>,
    fix: bool,
}

impl<'a> Terms<'a> {
    fn new(b: &'a BundleAt, reading: Reading) -> Self {
        let geom = &b.geom;
        let n = geom.n;
        let n4 = n * n * n * n;
        let mut raised = vec![0.0; n4];
        let mut nabla_raised = vec![0.0; n * n4];
        for s in 0..n {
            for h in 0..n {
                for m in 0..n {
                    for r in 0..n {
                        let k = ((s * n + h) * n + m) * n + r;
                        raised[k] = geom.riem_raised(s, h, m, r);
                        for d in 0..n {
                            nabla_raised[d * n4 + k] =
                                sum(n, |[a, bb]| geom.gi(a, s) * geom.gi(bb, h) * geom.nabla_riem(d, a, bb, m, r));
                        }
                    }
                }
            }
        }
        Terms {
            n,
            geom,
            rs: &b.rs,
            t: &b.p.t,
            f: b.rs.f,
            raised,
            nabla_raised,
            flat: b.rs.flatness_combination(),
            fix: reading == Reading::Repaired,
        }
    }

    /// `R_{klj}^s`.
    #[inline]
    fn r(&self, k: usize, l: usize, j: usize, s: usize) -> f64 {
        self.geom.riem(k, l, j, s)
    }
    /// `R^{sh}{}_m{}^r`.
    #[inline]
    fn rr(&self, s: usize, h: usize, m: usize, r: usize) -> f64 {
        let n = self.n;
        self.raised[((s * n + h) * n + m) * n + r]
    }
    /// `∇_d R_{klj}^s`.
    #[inline]
    fn nr(&self, d: usize, k: usize, l: usize, j: usize, s: usize) -> f64 {
        self.geom.nabla_riem(d, k, l, j, s)
    }
    /// `∇_d R^{sh}{}_m{}^r`.
    #[inline]
    fn nrr(&self, d: usize, s: usize, h: usize, m: usize, r: usize) -> f64 {
        let n = self.n;
        self.nabla_raised[(((d * n + s) * n + h) * n + m) * n + r]
    }
    #[inline]
    fn a(&self, h: usize, j: usize, i: usize) -> f64 {
        self.rs.a(h, j, i)
    }
    /// `t^up_lo`.
    #[inline]
    fn t(&self, up: usize, lo: usize) -> f64 {
        self.t[up * self.n + lo]
    }
    #[inline]
    fn g(&self, i: usize, j: usize) -> f64 {
        self.geom.g(i, j)
    }
    #[inline]
    fn gi(&self, i: usize, j: usize) -> f64 {
        self.geom.gi(i, j)
    }
    #[inline]
    fn df(&self, i: usize) -> f64 {
        self.rs.df[i]
    }
    /// `∇_m B^r_{lj} - ∇_l B^r_{mj} + B^r_{ms} B^s_{lj} - B^r_{ls} B^s_{mj}`.
    #[inline]
    fn k(&self, m: usize, l: usize, j: usize, r: usize) -> f64 {
        let n = self.n;
        self.flat[((m * n + l) * n + j) * n + r]
    }

    // R(E_m, E_l) E_j
    fn hhh_h(&self, m: usize, l: usize, j: usize, r: usize) -> f64 {
        let n = self.n;
        let c = 1.0 / (4.0 * self.f);
        let t1 = sum(n, |[k, a, s, h, p]| {
            self.g(k, a)
                * (self.rr(s, h, m, r) * self.r(l, j, h, p)
                    - self.rr(s, h, l, r) * self.r(m, j, h, p)
                    - 2.0 * self.rr(s, h, j, r) * self.r(m, l, h, p))
                * self.t(a, s)
                * self.t(k, p)
        });
        let t2 = sum(n, |[k, a, s, h, p]| {
            self.g(k, a)
                * (self.rr(s, h, l, r) * self.r(m, j, p, k) - self.rr(s, h, m, r) * self.r(l, j, p, k)
                    + 2.0 * self.rr(s, h, j, r) * self.r(m, l, p, k))
                * self.t(a, s)
                * self.t(p, h)
        });
        let t3 = sum(n, |[h, b, k, p, s]| {
            self.gi(h, b)
                * (self.r(k, p, l, r) * self.r(m, j, h, s) - self.r(k, p, m, r) * self.r(l, j, h, s)
                    + 2.0 * self.r(k, p, j, r) * self.r(m, l, h, s))
                * self.t(p, b)
                * self.t(k, s)
        });
        let t4 = sum(n, |[h, b, k, s, p]| {
            self.gi(h, b)
                * (self.r(k, s, m, r) * self.r(l, j, p, k)
                    - self.r(k, s, l, r) * self.r(m, j, p, k)
                    - 2.0 * self.r(k, s, j, r) * self.r(m, l, p, k))
                * self.t(s, b)
                * self.t(p, h)
        });
        self.r(m, l, j, r) + c * (t1 + t2 + t3 + t4) + self.k(m, l, j, r)
    }

    fn hhh_v(&self, m: usize, l: usize, j: usize, v: usize, r: usize) -> f64 {
        let n = self.n;
        let d1 = sum(n, |[s]| {
            0.5 * (self.nr(m, l, j, r, s) - self.nr(l, m, j, r, s)) * self.t(v, s)
                + 0.5 * (self.nr(l, m, j, s, v) - self.nr(m, l, j, s, v)) * self.t(s, r)
        });
        let d2 = sum(n, |[h, s]| {
            (self.r(m, h, r, s) * self.t(v, s) - self.r(m, h, s, v) * self.t(s, r)) * self.a(h, l, j)
                - (self.r(l, h, r, s) * self.t(v, s) - self.r(l, h, s, v) * self.t(s, r)) * self.a(h, m, j)
        });
        d1 + d2 / (4.0 * self.f)
    }

    // R(E_(nn,m), E_l) E_j
    fn vhh_h(&self, nn: usize, m: usize, l: usize, j: usize, r: usize) -> f64 {
        let n = self.n;
        let f = self.f;
        let d = sum(n, |[a, s]| {
            -self.g(nn, a) * self.nrr(l, s, m, j, r) * self.t(a, s) + self.gi(m, a) * self.nr(l, nn, s, j, r) * self.t(s, a)
        }) / (2.0 * f);
        let q = sum(n, |[h, a, s]| {
            self.g(nn, a) * self.rr(s, m, h, r) * self.a(h, l, j) * self.t(a, s)
                - self.gi(m, a) * self.r(nn, s, h, r) * self.a(h, l, j) * self.t(s, a)
                + self.gi(m, a) * self.r(nn, s, j, h) * self.a(r, l, h) * self.t(s, a)
                - self.g(nn, a) * self.rr(s, m, j, h) * self.a(r, l, h) * self.t(a, s)
        }) + sum(n, |[a, s]| {
            2.0 * self.df(l) * self.g(nn, a) * self.rr(s, m, j, r) * self.t(a, s)
                - 2.0 * self.df(l) * self.gi(m, a) * self.r(nn, s, j, r) * self.t(s, a)
        });
        d + q / (4.0 * f * f)
    }

    fn vhh_v(&self, nn: usize, m: usize, l: usize, j: usize, v: usize, r: usize) -> f64 {
        let n = self.n;
        let lin = 0.5 * self.r(l, j, r, m) * delta(v, nn) - 0.5 * self.r(l, j, nn, v) * delta(r, m);
        let q = sum(n, |[h, s, p, a]| {
            -self.r(l, h, r, s) * self.g(nn, a) * self.rr(p, m, j, h) * self.t(v, s) * self.t(a, p)
                + self.r(l, h, r, s) * self.gi(m, a) * self.r(nn, p, j, h) * self.t(v, s) * self.t(p, a)
                + self.r(l, h, s, v) * self.g(nn, a) * self.rr(p, m, j, h) * self.t(s, r) * self.t(a, p)
                - self.r(l, h, s, v) * self.gi(m, a) * self.r(nn, p, j, h) * self.t(s, r) * self.t(p, a)
        });
        lin + q / (4.0 * self.f)
    }

    // R(E_m, E_(tt,l)) E_j
    fn hvh_h(&self, m: usize, tt: usize, l: usize, j: usize, r: usize) -> f64 {
        let n = self.n;
        let f = self.f;
        let d = sum(n, |[a, s]| {
            self.g(tt, a) * self.nrr(m, s, l, j, r) * self.t(a, s) - self.gi(l, a) * self.nr(m, tt, s, j, r) * self.t(s, a)
        }) / (2.0 * f);
        let q = sum(n, |[h, a, s]| {
            self.g(tt, a) * self.rr(s, l, j, h) * self.a(r, m, h) * self.t(a, s)
                - self.gi(l, a) * self.r(tt, s, j, h) * self.a(r, m, h) * self.t(s, a)
                + self.gi(l, a) * self.r(tt, s, h, r) * self.a(h, m, j) * self.t(s, a)
                - self.g(tt, a) * self.rr(s, l, h, r) * self.a(h, m, j) * self.t(a, s)
        }) + sum(n, |[a, s]| {
            // printed with a free upper index; it stands for the output index r
            -2.0 * self.df(m) * self.g(tt, a) * self.rr(s, l, j, r) * self.t(a, s)
                + 2.0 * self.df(m) * self.gi(l, a) * self.r(tt, s, j, r) * self.t(s, a)
        });
        d + q / (4.0 * f * f)
    }

    fn hvh_v(&self, m: usize, tt: usize, l: usize, j: usize, v: usize, r: usize) -> f64 {
        let n = self.n;
        let lin = -0.5 * self.r(m, j, r, l) * delta(tt, v) + 0.5 * self.r(m, j, tt, v) * delta(r, l);
        // printed as g_{va}; the fiber index of the direction is tt
        let lower = if self.fix { tt } else { v };
        let q = sum(n, |[h, s, p, a]| {
            self.r(m, h, r, s) * self.g(lower, a) * self.rr(p, l, j, h) * self.t(v, s) * self.t(a, p)
                - self.r(m, h, r, s) * self.gi(l, a) * self.r(tt, p, j, h) * self.t(v, s) * self.t(p, a)
                - self.r(m, h, p, v) * self.g(tt, a) * self.rr(s, l, j, h) * self.t(p, r) * self.t(a, s)
                + self.r(m, h, s, v) * self.gi(l, a) * self.r(tt, p, j, h) * self.t(s, r) * self.t(p, a)
        });
        lin + q / (4.0 * self.f)
    }

    // R(E_(nn,m), E_(tt,l)) E_j
    fn vvh_h(&self, nn: usize, m: usize, tt: usize, l: usize, j: usize, r: usize) -> f64 {
        let n = self.n;
        let f = self.f;
        let lin = (self.g(tt, nn) * self.rr(m, l, j, r) - self.gi(l, m) * self.r(tt, nn, j, r)) / f;
        let q1 = sum(n, |[a, s, b, p, h]| {
            (self.g(nn, a) * self.rr(s, m, h, r) * self.g(tt, b) * self.rr(p, l, j, h)
                - self.g(tt, a) * self.rr(s, l, h, r) * self.g(nn, b) * self.rr(p, m, j, h))
                * self.t(a, s)
                * self.t(b, p)
        });
        let q2 = sum(n, |[a, s, b, p, h]| {
            (self.g(tt, a) * self.rr(s, l, h, r) * self.gi(m, b) * self.r(nn, p, j, h)
                - self.g(nn, a) * self.rr(s, m, h, r) * self.gi(l, b) * self.r(tt, p, j, h))
                * self.t(a, s)
                * self.t(p, b)
        });
        let q3 = sum(n, |[a, s, b, p, h]| {
            (self.gi(l, b) * self.r(tt, p, h, r) * self.g(nn, a) * self.rr(s, m, j, h)
                - self.gi(m, b) * self.r(nn, p, h, r) * self.g(tt, a) * self.rr(s, l, j, h))
                * self.t(p, b)
                * self.t(a, s)
        });
        let q4 = if self.fix {
            sum(n, |[a, s, b, p, h]| {
                (self.gi(m, a) * self.r(nn, s, h, r) * self.gi(l, b) * self.r(tt, p, j, h)
                    - self.gi(l, a) * self.r(tt, s, h, r) * self.gi(m, b) * self.r(nn, p, j, h))
                    * self.t(s, a)
                    * self.t(p, b)
            })
        } else {
            // first product printed with s three times and p only on t
            sum(n, |[a, s, b, p, h]| {
                self.gi(m, a) * self.r(nn, s, h, r) * self.gi(l, b) * self.r(tt, s, j, h) * self.t(s, a) * self.t(p, b)
                    - self.gi(l, a) * self.r(tt, s, h, r) * self.gi(m, b) * self.r(nn, p, j, h) * self.t(s, a) * self.t(p, b)
            })
        };
        lin + (q1 + q2 + q3 + q4) / (4.0 * f * f)
    }

    // R(E_m, E_l) E_(i,j)
    fn hhv_h(&self, m: usize, l: usize, i: usize, j: usize, r: usize) -> f64 {
        let n = self.n;
        let f = self.f;
        let d = sum(n, |[a, s]| {
            self.g(i, a) * (self.nrr(m, s, j, l, r) - self.nrr(l, s, j, m, r)) * self.t(a, s)
                + self.gi(j, a) * (self.nr(l, i, s, m, r) - self.nr(m, i, s, l, r)) * self.t(s, a)
        }) / (2.0 * f);
        let q = sum(n, |[h, a, s]| {
            self.g(i, a) * self.rr(s, j, l, h) * self.a(r, m, h) * self.t(a, s)
                - self.gi(j, a) * self.r(i, s, l, h) * self.a(r, m, h) * self.t(s, a)
                + self.gi(j, a) * self.r(i, s, m, h) * self.a(r, l, h) * self.t(s, a)
                - self.g(i, a) * self.rr(s, j, m, h) * self.a(r, l, h) * self.t(a, s)
        });
        let fterm = sum(n, |[a, s]| {
            if self.fix {
                self.df(m) * self.g(i, a) * self.rr(s, j, l, r) * self.t(a, s)
                    - self.df(m) * self.gi(j, a) * self.r(i, s, l, r) * self.t(s, a)
                    - self.df(l) * self.g(i, a) * self.rr(s, j, m, r) * self.t(a, s)
                    + self.df(l) * self.gi(j, a) * self.r(i, s, m, r) * self.t(s, a)
            } else {
                // printed with a free upper index on the first product; it
                // stands for the output index r
                self.df(m) * self.g(i, a) * self.rr(s, j, l, r) * self.t(a, s)
                    + self.df(m) * self.gi(j, a) * self.r(i, s, l, r) * self.t(s, a)
                    + self.df(l) * self.g(i, a) * self.rr(s, j, m, r) * self.t(a, s)
                    - self.df(l) * self.gi(j, a) * self.r(i, s, m, r) * self.t(s, a)
            }
        });
        d + (q - 2.0 * fterm) / (4.0 * f * f)
    }

    fn hhv_v(&self, m: usize, l: usize, i: usize, j: usize, v: usize, r: usize) -> f64 {
        let n = self.n;
        let lin = self.r(m, l, i, v) * delta(j, r) - self.r(m, l, r, j) * delta(v, i);
        // printed R_{lpm}^h; the fiber index of the field is i
        let first = if self.fix { i } else { l };
        let q = sum(n, |[h, s, p, a]| {
            (self.r(m, h, r, s) * self.g(i, a) * self.rr(p, j, l, h) - self.r(l, h, r, s) * self.g(i, a) * self.rr(p, j, m, h))
                * self.t(v, s)
                * self.t(a, p)
                + (self.r(l, h, r, s) * self.gi(j, a) * self.r(first, p, m, h)
                    - self.r(m, h, r, s) * self.gi(j, a) * self.r(i, p, l, h))
                    * self.t(v, s)
                    * self.t(p, a)
                + (self.r(l, h, p, v) * self.g(i, a) * self.rr(s, j, m, h)
                    - self.r(m, h, p, v) * self.g(i, a) * self.rr(s, j, l, h))
                    * self.t(p, r)
                    * self.t(a, s)
                + (self.r(m, h, s, v) * self.gi(j, a) * self.r(i, p, l, h)
                    - self.r(l, h, s, v) * self.gi(j, a) * self.r(i, p, m, h))
                    * self.t(s, r)
                    * self.t(p, a)
        });
        lin + q / (4.0 * self.f)
    }

    // R(E_m, E_(tt,l)) E_(i,j)
    fn hvv_h(&self, m: usize, tt: usize, l: usize, i: usize, j: usize, r: usize) -> f64 {
        let n = self.n;
        let f = self.f;
        let lin = (-self.g(i, tt) * self.rr(l, j, m, r) + self.gi(j, l) * self.r(i, tt, m, r)) / (2.0 * f);
        // printed R^{pl}{}_m{}^h; the lower fiber index of the field is j
        let up = if self.fix { j } else { l };
        let q = sum(n, |[a, s, b, p, h]| {
            -self.g(tt, a) * self.rr(s, l, h, r) * self.g(i, b) * self.rr(p, up, m, h) * self.t(a, s) * self.t(b, p)
                + self.g(tt, a) * self.rr(s, l, h, r) * self.gi(j, b) * self.r(i, p, m, h) * self.t(a, s) * self.t(p, b)
                + self.gi(l, b) * self.r(tt, p, h, r) * self.g(i, a) * self.rr(s, j, m, h) * self.t(p, b) * self.t(a, s)
                - self.gi(l, a) * self.r(tt, s, h, r) * self.gi(j, b) * self.r(i, p, m, h) * self.t(s, a) * self.t(p, b)
        });
        lin + q / (4.0 * f * f)
    }

    // R(E_(nn,m), E_l) E_(i,j)
    fn vhv_h(&self, nn: usize, m: usize, l: usize, i: usize, j: usize, r: usize) -> f64 {
        let n = self.n;
        let f = self.f;
        let lin = (self.g(i, nn) * self.rr(m, j, l, r) - self.gi(j, m) * self.r(i, nn, l, r)) / (2.0 * f);
        // printed R^{sj}{}_m{}^h; the horizontal direction is l
        let dir = if self.fix { l } else { m };
        let q = sum(n, |[a, s, b, p, h]| {
            self.g(nn, a) * self.rr(s, m, h, r) * self.g(i, b) * self.rr(p, j, l, h) * self.t(a, s) * self.t(b, p)
                - self.g(nn, a) * self.rr(s, m, h, r) * self.gi(j, b) * self.r(i, p, l, h) * self.t(a, s) * self.t(p, b)
                - self.gi(m, b) * self.r(nn, p, h, r) * self.g(i, a) * self.rr(s, j, dir, h) * self.t(p, b) * self.t(a, s)
                + self.gi(m, a) * self.r(nn, s, h, r) * self.gi(j, b) * self.r(i, p, l, h) * self.t(s, a) * self.t(p, b)
        });
        lin + q / (4.0 * f * f)
    }

    // Printed Ricci blocks.

    fn ricci_vv(&self, tt: usize, l: usize, i: usize, j: usize) -> f64 {
        let n = self.n;
        let f = self.f;
        sum(n, |[a, s, b, p, h, r]| {
            -self.g(tt, a) * self.rr(s, l, h, r) * self.g(i, b) * self.rr(p, j, r, h) * self.t(a, s) * self.t(b, p)
                + self.g(tt, a) * self.rr(s, l, h, r) * self.gi(j, b) * self.r(i, p, r, h) * self.t(a, s) * self.t(p, b)
                + self.gi(l, b) * self.r(tt, p, h, r) * self.g(i, a) * self.rr(s, j, r, h) * self.t(p, b) * self.t(a, s)
                - self.gi(l, b) * self.r(tt, s, h, r) * self.gi(j, a) * self.r(i, p, r, h) * self.t(s, b) * self.t(p, a)
        }) / (4.0 * f * f)
    }

    fn ricci_vh(&self, tt: usize, l: usize, j: usize) -> f64 {
        let n = self.n;
        let f = self.f;
        let d = sum(n, |[a, s, r]| {
            self.g(tt, a) * self.nrr(r, s, l, j, r) * self.t(a, s) - self.gi(l, a) * self.nr(r, tt, s, j, r) * self.t(s, a)
        }) / (2.0 * f);
        let q = sum(n, |[h, a, s, r]| {
            self.g(tt, a) * self.rr(s, l, j, h) * self.a(r, r, h) * self.t(a, s)
                - self.gi(l, a) * self.r(tt, s, j, h) * self.a(r, r, h) * self.t(s, a)
                + self.gi(l, a) * self.r(tt, s, h, r) * self.a(h, r, j) * self.t(s, a)
                - self.g(tt, a) * self.rr(s, l, h, r) * self.a(h, r, j) * self.t(a, s)
        }) + sum(n, |[a, s, r]| {
            -2.0 * self.df(r) * self.g(tt, a) * self.rr(s, l, j, r) * self.t(a, s)
                + 2.0 * self.df(r) * self.gi(l, a) * self.r(tt, s, j, r) * self.t(s, a)
        });
        d + q / (4.0 * f * f)
    }

    fn ricci_hv(&self, l: usize, i: usize, j: usize) -> f64 {
        let n = self.n;
        let f = self.f;
        let d = sum(n, |[a, s, r]| {
            self.g(i, a) * self.nrr(r, s, j, l, r) * self.t(a, s) - self.gi(j, a) * self.nr(r, i, s, l, r) * self.t(s, a)
        }) / (2.0 * f);
        let q = sum(n, |[h, a, s, r]| {
            self.g(i, a) * self.rr(s, j, l, h) * self.a(r, r, h) * self.t(a, s)
                - self.gi(j, a) * self.r(i, s, l, h) * self.a(r, r, h) * self.t(s, a)
                + self.gi(j, a) * self.r(i, s, r, h) * self.a(r, l, h) * self.t(s, a)
                - self.g(i, a) * self.rr(s, j, r, h) * self.a(r, l, h) * self.t(a, s)
        }) + sum(n, |[a, s, r]| {
            -2.0 * self.df(r) * self.g(i, a) * self.rr(s, j, l, r) * self.t(a, s)
                + 2.0 * self.df(r) * self.gi(j, a) * self.r(i, s, l, r) * self.t(s, a)
        });
        d + q / (4.0 * f * f)
    }

    fn ricci_hh(&self, l: usize, j: usize) -> f64 {
        let n = self.n;
        let f = self.f;
        let quad = sum(n, |[k, a, s, h, p, r]| {
            -0.25 * self.g(k, a) * self.rr(s, h, l, r) * self.r(r, j, h, p) * self.t(a, s) * self.t(k, p)
                - 0.5 * self.g(k, a) * self.rr(s, h, j, r) * self.r(r, l, h, p) * self.t(a, s) * self.t(k, p)
                - 0.25 * self.r(l, h, r, s) * self.g(k, a) * self.rr(p, r, j, h) * self.t(k, s) * self.t(a, p)
                - 0.25 * self.gi(h, a) * self.r(k, s, l, r) * self.r(r, j, p, k) * self.t(s, a) * self.t(p, h)
                - 0.5 * self.gi(h, a) * self.r(k, s, j, r) * self.r(r, l, p, k) * self.t(s, a) * self.t(p, h)
                - 0.25 * self.r(l, h, s, k) * self.gi(r, a) * self.r(k, p, j, h) * self.t(s, r) * self.t(p, a)
                + 0.5 * self.g(k, a) * self.rr(s, h, j, r) * self.r(r, l, p, k) * self.t(a, s) * self.t(p, h)
                + 0.5 * self.gi(h, a) * self.r(k, p, j, r) * self.r(r, l, h, s) * self.t(p, a) * self.t(k, s)
        });
        let kk = sum(n, |[r]| self.k(r, l, j, r));
        self.geom.ricci(l, j) + quad / f + kk
    }
}

/// Closed-form curvature with Ricci and scalar curvature along two paths.
#[derive(Clone, Debug)]
pub struct BundleCurvatureAt {
    pub n: usize,
    pub dim: usize,
    pub reading: Reading,
    /// `[a][b][c][d]` = component `d` of `R(E_a, E_b) E_c`.
    pub r: Vec<f64>,
    /// Ricci by contracting `r`.
    pub ricci: Vec<f64>,
    /// Ricci from the printed Ricci blocks.
    pub ricci_printed: Vec<f64>,
    /// Scalar curvature by contracting `ricci` with the inverse metric.
    pub scalar: f64,
    /// Scalar curvature from the closed scalar formula.
    pub scalar_formula: f64,
    pub f_l: f64,
}

impl BundleCurvatureAt {
    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.dim;
        self.r[((a * n + b) * n + c) * n + d]
    }

    pub fn ricci(&self, b: usize, c: usize) -> f64 {
        self.ricci[b * self.dim + c]
    }
}

/// Assembles every curvature block of a `(1,1)` bundle from base data.
pub fn curvature_closed_form(b: &BundleAt, reading: Reading) -> Result<BundleCurvatureAt> {
    let ft = b.ft();
    if (ft.p, ft.q) != (1, 1) {
        return Err(Error::BadParameter("closed-form curvature needs a (1,1) bundle".into()));
    }
    if b.geom.order < 3 {
        return Err(Error::BadParameter("closed-form curvature needs third metric derivatives".into()));
    }
    let tm = Terms::new(b, reading);
    let n = tm.n;
    let dim = n + n * n;
    let split = |a: usize| ((a - n) / n, (a - n) % n);
    let mut r = vec![0.0; dim * dim * dim * dim];
    for a in 0..dim {
        for bb in 0..dim {
            for c in 0..dim {
                let base = ((a * dim + bb) * dim + c) * dim;
                let out = &mut r[base..base + dim];
                match Block::of(n, a, bb, c) {
                    Block::Hhh => {
                        for d in 0..n {
                            out[d] = tm.hhh_h(a, bb, c, d);
                        }
                        for (k, o) in out[n..].iter_mut().enumerate() {
                            *o = tm.hhh_v(a, bb, c, k / n, k % n);
                        }
                    }
                    Block::Vhh => {
                        let (nn, m) = split(a);
                        for d in 0..n {
                            out[d] = tm.vhh_h(nn, m, bb, c, d);
                        }
                        for (k, o) in out[n..].iter_mut().enumerate() {
                            *o = tm.vhh_v(nn, m, bb, c, k / n, k % n);
                        }
                    }
                    Block::Hvh => {
                        let (tt, l) = split(bb);
                        for d in 0..n {
                            out[d] = tm.hvh_h(a, tt, l, c, d);
                        }
                        for (k, o) in out[n..].iter_mut().enumerate() {
                            *o = tm.hvh_v(a, tt, l, c, k / n, k % n);
                        }
                    }
                    Block::Vvh => {
                        let (nn, m) = split(a);
                        let (tt, l) = split(bb);
                        for d in 0..n {
                            out[d] = tm.vvh_h(nn, m, tt, l, c, d);
                        }
                    }
                    Block::Hhv => {
                        let (i, j) = split(c);
                        for d in 0..n {
                            out[d] = tm.hhv_h(a, bb, i, j, d);
                        }
                        for (k, o) in out[n..].iter_mut().enumerate() {
                            *o = tm.hhv_v(a, bb, i, j, k / n, k % n);
                        }
                    }
                    Block::Hvv => {
                        let (tt, l) = split(bb);
                        let (i, j) = split(c);
                        for d in 0..n {
                            out[d] = tm.hvv_h(a, tt, l, i, j, d);
                        }
                    }
                    Block::Vhv => {
                        let (nn, m) = split(a);
                        let (i, j) = split(c);
                        for d in 0..n {
                            out[d] = tm.vhv_h(nn, m, bb, i, j, d);
                        }
                    }
                    Block::Vvv => {}
                }
            }
        }
    }
    let ricci = contract_ricci(dim, &r);
    let scalar = contract_scalar(&b.metric, &ricci);
    let mut ricci_printed = vec![0.0; dim * dim];
    for x in 0..dim {
        for y in 0..dim {
            ricci_printed[x * dim + y] = match (x < n, y < n) {
                (true, true) => tm.ricci_hh(x, y),
                (false, true) => {
                    let (tt, l) = split(x);
                    tm.ricci_vh(tt, l, y)
                }
                (true, false) => {
                    let (i, j) = split(y);
                    tm.ricci_hv(x, i, j)
                }
                (false, false) => {
                    let (tt, l) = split(x);
                    let (i, j) = split(y);
                    tm.ricci_vv(tt, l, i, j)
                }
            };
        }
    }
    let f_l = b.rs.f_l(&b.geom);
    Ok(BundleCurvatureAt {
        n,
        dim,
        reading,
        r,
        ricci,
        ricci_printed,
        scalar,
        scalar_formula: scalar_formula(&b.geom, &b.p.t, b.rs.f, f_l),
        f_l,
    })
}

/// `R_{bc} = Σ_a R[a][b][c][a]`.
pub fn contract_ricci(dim: usize, r: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; dim * dim];
    for bb in 0..dim {
        for c in 0..dim {
            out[bb * dim + c] = (0..dim).map(|a| r[((a * dim + bb) * dim + c) * dim + a]).sum();
        }
    }
    out
}

/// Trace of a Ricci array with the inverse bundle metric.
pub fn contract_scalar(metric: &BundleMetricAt, ricci: &[f64]) -> f64 {
    let d = metric.dim();
    let mut s = 0.0;
    for a in 0..d {
        for b in 0..d {
            let gi = metric.inverse_component(a, b);
            if gi != 0.0 {
                s += gi * ricci[a * d + b];
            }
        }
    }
    s
}

/// Scalar curvature of the `(1,1)` bundle as a closed expression in base
/// curvature, `t`, `f` and `fL`:
///
/// `r/f - (1/4f²) g^{ab} g^{hk} g^{vr} g_{lj} R_{hvs}^l R_{krp}^j t^s_a t^p_b
///  - (1/4f²) g_{cd} g^{lj} g^{hk} g^{rv} R_{rlh}^s R_{vjk}^p t^c_s t^d_p
///  + (1/2f²) g^{re} g^{bz} R_{cpr}^h R_{hez}^s t^c_s t^p_b + fL`.
pub fn scalar_formula(geom: &BaseGeometryAt, t: &[f64], f: f64, f_l: f64) -> f64 {
    let n = geom.n;
    let tt = |up: usize, lo: usize| t[up * n + lo];
    let r = |k: usize, l: usize, j: usize, s: usize| geom.riem(k, l, j, s);
    // Contract in stages to keep each loop at most n^4.
    // X^{l}{}_{s}{}^{k r} = g^{hk} g^{vr} R_{hvs}^l, then pair with R_{krp}^j g_{lj}.
    let mut term1 = 0.0;
    {
        // Y_{s p} = g_{lj} g^{hk} g^{vr} R_{hvs}^l R_{krp}^j
        let mut rr = vec![0.0; n * n * n * n]; // R^{kr}{}_s{}^l = g^{hk} g^{vr} R_{hvs}^l
        for k in 0..n {
            for rx in 0..n {
                for s in 0..n {
                    for l in 0..n {
                        rr[((k * n + rx) * n + s) * n + l] = sum(n, |[h, v]| geom.gi(h, k) * geom.gi(v, rx) * r(h, v, s, l));
                    }
                }
            }
        }
        for s in 0..n {
            for p in 0..n {
                let y = sum(n, |[k, rx, l, j]| rr[((k * n + rx) * n + s) * n + l] * r(k, rx, p, j) * geom.g(l, j));
                if y == 0.0 {
                    continue;
                }
                term1 += y * sum(n, |[a, b]| geom.gi(a, b) * tt(s, a) * tt(p, b));
            }
        }
    }
    let mut term2 = 0.0;
    {
        for s in 0..n {
            for p in 0..n {
                // Z^{sp} = g^{lj} g^{hk} g^{rv} R_{rlh}^s R_{vjk}^p
                let z = sum(n, |[rx, l, h, v]| {
                    r(rx, l, h, s) * sum(n, |[j, k]| geom.gi(l, j) * geom.gi(h, k) * geom.gi(rx, v) * r(v, j, k, p))
                });
                if z == 0.0 {
                    continue;
                }
                term2 += z * sum(n, |[c, d]| geom.g(c, d) * tt(c, s) * tt(d, p));
            }
        }
    }
    let mut term3 = 0.0;
    for c in 0..n {
        for p in 0..n {
            for s in 0..n {
                for b in 0..n {
                    let w = tt(c, s) * tt(p, b);
                    if w == 0.0 {
                        continue;
                    }
                    term3 += w * sum(n, |[rx, h, e, z]| geom.gi(rx, e) * geom.gi(b, z) * r(c, p, rx, h) * r(h, e, z, s));
                }
            }
        }
    }
    geom.scalar / f + (-0.25 * term1 - 0.25 * term2 + 0.5 * term3) / (f * f) + f_l
}

/// `‖t‖² = g_{ik} g^{jl} t^i_j t^k_l`.
pub fn fiber_norm_sq(geom: &BaseGeometryAt, t: &[f64]) -> f64 {
    let n = geom.n;
    sum(n, |[i, j, k, l]| geom.g(i, k) * geom.gi(j, l) * t[i * n + j] * t[k * n + l])
}

/// Scalar curvature over a base of constant curvature `kappa`:
/// `(1/f)(n-1)κ(n - ‖t‖²κ/f) + (1/f²)κ²((tr t)² - tr t²) + fL`.
pub fn constant_curvature_scalar(kappa: f64, n: usize, f: f64, norm_sq: f64, t: &[f64], f_l: f64) -> f64 {
    let nf = n as f64;
    let tr = trace11(n, t);
    let tr2 = trace_sq11(n, t);
    (nf - 1.0) * kappa * (nf - norm_sq * kappa / f) / f + kappa * kappa * (tr * tr - tr2) / (f * f) + f_l
}

/// Curvature of an arbitrary connection on the adapted frame. `conn`
/// returns coefficients at natural coordinates; frame derivatives are
/// central differences with step `h` along the natural frame vectors.
pub fn connection_curvature<F>(bundle: &SasakiBundle, y: &[f64], conn: F, h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<ConnectionField>,
{
    let b = bundle.at_order(y, 2)?;
    let dim = b.dim();
    let c0 = conn(y)?;
    let brackets = adapted_brackets(&b.p, &b.geom);
    // e_a(C)[a] = E_a applied to every coefficient.
    let mut dc = Vec::with_capacity(dim);
    for a in 0..dim {
        let mut e = vec![0.0; dim];
        e[a] = 1.0;
        let dir = b.natural(&e);
        let plus: Vec<f64> = y.iter().zip(&dir).map(|(u, d)| u + h * d).collect();
        let minus: Vec<f64> = y.iter().zip(&dir).map(|(u, d)| u - h * d).collect();
        let cp = conn(&plus)?;
        let cm = conn(&minus)?;
        dc.push(ConnectionField {
            dim,
            c: cp.c.iter().zip(&cm.c).map(|(p, m)| (p - m) / (2.0 * h)).collect(),
        });
    }
    let mut r = vec![0.0; dim * dim * dim * dim];
    for a in 0..dim {
        for bb in 0..dim {
            for c in 0..dim {
                for d in 0..dim {
                    let mut v = dc[a].get(d, bb, c) - dc[bb].get(d, a, c);
                    for e in 0..dim {
                        v += c0.get(e, bb, c) * c0.get(d, a, e) - c0.get(e, a, c) * c0.get(d, bb, e)
                            - brackets.get(e, a, bb) * c0.get(d, e, c);
                    }
                    r[((a * dim + bb) * dim + c) * dim + d] = v;
                }
            }
        }
    }
    Ok(r)
}

/// Largest `|R|` and the index where it sits.
pub fn max_abs_with_index(r: &[f64]) -> (f64, usize) {
    r.iter()
        .enumerate()
        .fold((0.0, 0), |(m, k), (i, v)| if v.abs() > m { (v.abs(), i) } else { (m, k) })
}

/// Per-block largest deviation between two curvature arrays.
pub fn block_deviation(n: usize, dim: usize, a: &[f64], b: &[f64]) -> Vec<(Block, f64)> {
    let mut out: Vec<(Block, f64)> = Block::ALL.iter().map(|k| (*k, 0.0)).collect();
    for x in 0..dim {
        for y in 0..dim {
            for z in 0..dim {
                let blk = Block::of(n, x, y, z);
                let slot = Block::ALL.iter().position(|k| *k == blk).unwrap();
                let base = ((x * dim + y) * dim + z) * dim;
                for d in 0..dim {
                    let e = (a[base + d] - b[base + d]).abs();
                    if e > out[slot].1 {
                        out[slot].1 = e;
                    }
                }
            }
        }
    }
    out
}

/// Antisymmetry defect `max |R[a][b] + R[b][a]|` per block of the first pair.
pub fn antisymmetry_defect(n: usize, dim: usize, r: &[f64]) -> Vec<(Block, f64)> {
    let mut swapped = vec![0.0; r.len()];
    for a in 0..dim {
        for b in 0..dim {
            for c in 0..dim {
                for d in 0..dim {
                    swapped[((a * dim + b) * dim + c) * dim + d] = -r[((b * dim + a) * dim + c) * dim + d];
                }
            }
        }
    }
    block_deviation(n, dim, r, &swapped)
}

/// Outcome of the flatness test at a set of points.
#[derive(Clone, Debug)]
pub struct FlatnessReport {
    /// Largest `|R|` of the base.
    pub base_max: f64,
    /// Largest `|∇B + BB|` combination (with `B = A/2f`).
    pub combination_max: f64,
    /// Largest `|R̃|` of the bundle from the closed form.
    pub bundle_max: f64,
    /// Points where the two-condition verdict disagrees with `bundle_max`.
    pub disagreements: usize,
    pub points: usize,
}

impl FlatnessReport {
    /// Predicted verdict: flat iff base flat and combination zero.
    pub fn predicted_flat(&self, tol: f64) -> bool {
        self.base_max < tol && self.combination_max < tol
    }
}

/// Evaluates both flatness conditions and the closed-form bundle curvature
/// at each point `y`, counting points where the verdicts differ.
pub fn flatness_check(bundle: &SasakiBundle, points: &[Vec<f64>], tol: f64) -> Result<FlatnessReport> {
    let mut rep = FlatnessReport {
        base_max: 0.0,
        combination_max: 0.0,
        bundle_max: 0.0,
        disagreements: 0,
        points: points.len(),
    };
    for y in points {
        let b = bundle.at(y)?;
        let base = b.geom.riemann_max_abs();
        let comb = b.rs.flatness_combination().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let curv = curvature_closed_form(&b, Reading::Repaired)?;
        let bmax = max_abs_with_index(&curv.r).0;
        let predicted = base < tol && comb < tol;
        if predicted != (bmax < tol) {
            rep.disagreements += 1;
        }
        rep.base_max = rep.base_max.max(base);
        rep.combination_max = rep.combination_max.max(comb);
        rep.bundle_max = rep.bundle_max.max(bmax);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{ManifoldChart, Preset};
    use crate::oracle::oracle_at;
    use crate::sasaki::RescaleFunction;

    fn bundle(preset: Preset, f: &str) -> SasakiBundle {
        let chart = ManifoldChart::preset(&preset).unwrap();
        let n = chart.n;
        SasakiBundle::new(chart, RescaleFunction::parse(f, n).unwrap(), 1, 1).unwrap()
    }

    fn deviations(sb: &SasakiBundle, y: &[f64], reading: Reading) -> (Vec<(Block, f64)>, BundleCurvatureAt, f64) {
        let o = oracle_at(sb, y, true).unwrap();
        let c = curvature_closed_form(&sb.at(y).unwrap(), reading).unwrap();
        (block_deviation(sb.n(), c.dim, &c.r, o.curvature.as_ref().unwrap()), c, o.scalar.unwrap())
    }

    const S2_Y: [f64; 6] = [1.1, 0.3, 0.4, -0.7, 0.2, 0.9];

    #[test]
    fn repaired_blocks_match_oracle() {
        let cases = [
            (Preset::Sphere(1.0), "1", S2_Y.to_vec()),
            (Preset::Sphere(1.0), "exp(x1/5)", S2_Y.to_vec()),
            (Preset::Euclidean(2), "1 + x1^2/10", vec![0.4, 0.3, 0.4, -0.7, 0.2, 0.9]),
            (Preset::Euclidean(3), "exp(x1)", vec![0.4, 0.3, 0.1, 0.4, -0.7, 0.2, 0.9, 0.1, 0.2, 0.3, -0.4, 0.5]),
        ];
        for (preset, f, y) in cases {
            let sb = bundle(preset.clone(), f);
            let (dev, c, oracle_scalar) = deviations(&sb, &y, Reading::Repaired);
            for (blk, d) in dev {
                assert!(d < 1e-8, "{preset:?} {f} {}: {d}", blk.name());
            }
            assert!((c.scalar - c.scalar_formula).abs() < 1e-8);
            assert!((c.scalar - oracle_scalar).abs() < 1e-8);
            let rd = c.ricci.iter().zip(&c.ricci_printed).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(rd < 1e-10, "{rd}");
        }
    }

    #[test]
    fn printed_reading_holds_at_zero_fiber_and_on_flat_base() {
        let sb = bundle(Preset::Sphere(1.0), "1");
        let (dev, _, _) = deviations(&sb, &[1.1, 0.3, 0.0, 0.0, 0.0, 0.0], Reading::Printed);
        assert!(dev.iter().all(|(_, d)| *d < 1e-8), "{dev:?}");
        let sb = bundle(Preset::Euclidean(2), "1 + x1^2/10");
        let (dev, _, _) = deviations(&sb, &[0.4, 0.3, 0.4, -0.7, 0.2, 0.9], Reading::Printed);
        assert!(dev.iter().all(|(_, d)| *d < 1e-8), "{dev:?}");
    }

    #[test]
    fn printed_reading_deviates_in_mistyped_blocks() {
        let sb = bundle(Preset::Sphere(1.0), "1");
        let (dev, _, _) = deviations(&sb, &S2_Y, Reading::Printed);
        let bad: Vec<&str> = dev.iter().filter(|(_, d)| *d > 1e-5).map(|(b, _)| b.name()).collect();
        assert!(bad.contains(&"HVH") && bad.contains(&"VVH"), "{bad:?}");
        assert!(!bad.contains(&"HHH") && !bad.contains(&"VVV"), "{bad:?}");
    }

    #[test]
    fn sphere_scalar_at_zero_and_identity() {
        let sb = bundle(Preset::Sphere(1.0), "1");
        for t in [[0.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 1.0]] {
            let mut y = vec![1.0, 0.4];
            y.extend(t);
            let b = sb.at(&y).unwrap();
            let c = curvature_closed_form(&b, Reading::Repaired).unwrap();
            let k = constant_curvature_scalar(1.0, 2, 1.0, fiber_norm_sq(&b.geom, &b.p.t), &b.p.t, c.f_l);
            assert!((k - 2.0).abs() < 1e-10, "{k}");
            assert!((c.scalar - 2.0).abs() < 1e-8, "{}", c.scalar);
        }
    }

    #[test]
    fn constant_curvature_formula_with_rescale() {
        for (preset, kappa, x) in [(Preset::Sphere(1.0), 1.0, [1.1, 0.3]), (Preset::Hyperbolic(2), -1.0, [0.2, 1.3])] {
            let sb = bundle(preset, "exp(x1/5) + x2^2/10");
            let mut y = x.to_vec();
            y.extend([0.3, -0.7, 1.2, 0.5]);
            let b = sb.at(&y).unwrap();
            let c = curvature_closed_form(&b, Reading::Repaired).unwrap();
            let k = constant_curvature_scalar(kappa, 2, b.rs.f, fiber_norm_sq(&b.geom, &b.p.t), &b.p.t, c.f_l);
            assert!((k - c.scalar).abs() < 1e-10, "{k} vs {}", c.scalar);
        }
    }

    #[test]
    fn finite_difference_curvature_of_levi_civita() {
        let sb = bundle(Preset::Sphere(1.0), "exp(x1/5)");
        let fd = connection_curvature(&sb, &S2_Y, |q| sb.levi_civita(q), 1e-5).unwrap();
        let c = curvature_closed_form(&sb.at(&S2_Y).unwrap(), Reading::Repaired).unwrap();
        let d = fd.iter().zip(&c.r).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(d < 1e-6, "{d}");
        assert!(antisymmetry_defect(2, 6, &c.r).iter().all(|(_, v)| *v < 1e-12));
    }

    #[test]
    fn flatness_verdicts() {
        let pts: Vec<Vec<f64>> = (0..5).map(|k| vec![0.1 * k as f64, -0.2, 0.3, 0.1 * k as f64, -0.5, 0.7]).collect();
        let rep = flatness_check(&bundle(Preset::Euclidean(2), "1"), &pts, 1e-10).unwrap();
        assert!(rep.bundle_max < 1e-10 && rep.disagreements == 0);
        let pts3: Vec<Vec<f64>> = (0..3)
            .map(|k| {
                let mut y = vec![0.1 * k as f64, 0.2, -0.1];
                y.extend((0..9).map(|i| 0.1 * i as f64 - 0.3));
                y
            })
            .collect();
        let rep = flatness_check(&bundle(Preset::Euclidean(3), "exp(x1)"), &pts3, 1e-10).unwrap();
        assert!(rep.combination_max > 1e-3 && rep.bundle_max > 1e-3 && rep.disagreements == 0);
        // In two dimensions exp(x1) leaves the combination zero.
        let rep = flatness_check(&bundle(Preset::Euclidean(2), "exp(x1)"), &pts, 1e-10).unwrap();
        assert!(rep.combination_max < 1e-10 && rep.disagreements == 0);
    }
}
