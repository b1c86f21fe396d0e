//! Truncated Taylor series on phase space.
//!
//! A [`Jet`] holds the Taylor coefficients of a function of `(x, v)` around a base
//! point, truncated to the box `x-degree <= ox`, `v-degree <= ov`. Arithmetic keeps
//! track of the box: a product of two jets is exact on the intersection of their
//! boxes, a derivative in `x` shrinks `ox` by one, and so on. Every value read out
//! of a jet is therefore an exact derivative of the evaluation rule (up to
//! floating-point rounding), never a difference quotient.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use super::monomial::MonomialTable;

/// Highest x-order the engine propagates.
pub const MAX_X_ORDER: usize = 3;
/// Highest v-order the engine propagates.
pub const MAX_V_ORDER: usize = 6;

#[derive(Debug)]
pub struct JetSpace {
    n: usize,
    pub(crate) xs: MonomialTable,
    pub(crate) vs: MonomialTable,
}

impl JetSpace {
    /// Shared tables for dimension `n`, built once per process.
    pub fn get(n: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard
            .entry(n)
            .or_insert_with(|| {
                Arc::new(JetSpace {
                    n,
                    xs: MonomialTable::new(n, MAX_X_ORDER),
                    vs: MonomialTable::new(n, MAX_V_ORDER),
                })
            })
            .clone()
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    ox: usize,
    ov: usize,
    c: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("ox", &self.ox)
            .field("ov", &self.ov)
            .field("value", &self.value())
            .finish()
    }
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, ox: usize, ov: usize, value: f64) -> Jet {
        let mut j = Jet::zeros(space, ox, ov);
        j.c[0] = value;
        j
    }

    pub fn zeros(space: &Arc<JetSpace>, ox: usize, ov: usize) -> Jet {
        assert!(ox <= MAX_X_ORDER && ov <= MAX_V_ORDER, "jet box out of range");
        let len = space.xs.count_upto(ox) * space.vs.count_upto(ov);
        Jet {
            space: space.clone(),
            ox,
            ov,
            c: vec![0.0; len],
        }
    }

    /// The coordinate function `x^i` seeded at `x0`.
    pub fn x_var(space: &Arc<JetSpace>, ox: usize, ov: usize, i: usize, x0: f64) -> Jet {
        let mut j = Jet::constant(space, ox, ov, x0);
        if ox >= 1 {
            let nv = j.nv();
            j.c[(1 + i) * nv] = 1.0;
        }
        j
    }

    /// The coordinate function `v^i` seeded at `v0`.
    pub fn v_var(space: &Arc<JetSpace>, ox: usize, ov: usize, i: usize, v0: f64) -> Jet {
        let mut j = Jet::constant(space, ox, ov, v0);
        if ov >= 1 {
            j.c[1 + i] = 1.0;
        }
        j
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn x_order(&self) -> usize {
        self.ox
    }

    pub fn v_order(&self) -> usize {
        self.ov
    }

    #[inline]
    fn nv(&self) -> usize {
        self.space.vs.count_upto(self.ov)
    }

    #[inline]
    fn nx(&self) -> usize {
        self.space.xs.count_upto(self.ox)
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Taylor coefficient of `dx^ex dv^ev`; zero outside the box.
    pub fn coefficient(&self, ex: &[u8], ev: &[u8]) -> Option<f64> {
        let ix = self.space.xs.index_of(ex)?;
        let iv = self.space.vs.index_of(ev)?;
        if self.space.xs.degree(ix) > self.ox || self.space.vs.degree(iv) > self.ov {
            return None;
        }
        Some(self.c[ix * self.nv() + iv])
    }

    /// Partial derivative `d_x^ex d_v^ev` at the base point, if inside the box.
    pub fn partial(&self, ex: &[u8], ev: &[u8]) -> Option<f64> {
        let ix = self.space.xs.index_of(ex)?;
        let iv = self.space.vs.index_of(ev)?;
        if self.space.xs.degree(ix) > self.ox || self.space.vs.degree(iv) > self.ov {
            return None;
        }
        let w = self.space.xs.factorial_weight(ix) * self.space.vs.factorial_weight(iv);
        Some(self.c[ix * self.nv() + iv] * w)
    }

    /// Copy restricted to a smaller box.
    pub fn truncate(&self, ox: usize, ov: usize) -> Jet {
        let (ox, ov) = (ox.min(self.ox), ov.min(self.ov));
        if ox == self.ox && ov == self.ov {
            return self.clone();
        }
        let mut r = Jet::zeros(&self.space, ox, ov);
        let (nvs, nvr) = (self.nv(), r.nv());
        for ix in 0..r.nx() {
            r.c[ix * nvr..(ix + 1) * nvr].copy_from_slice(&self.c[ix * nvs..ix * nvs + nvr]);
        }
        r
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let (ox, ov) = (self.ox.min(other.ox), self.ov.min(other.ov));
        let mut r = Jet::zeros(&self.space, ox, ov);
        let (na, nb, nr) = (self.nv(), other.nv(), r.nv());
        for ix in 0..r.nx() {
            for iv in 0..nr {
                r.c[ix * nr + iv] = f(self.c[ix * na + iv], other.c[ix * nb + iv]);
            }
        }
        r
    }

    pub fn add(&self, other: &Jet) -> Jet {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn neg(&self) -> Jet {
        self.scale(-1.0)
    }

    pub fn scale(&self, s: f64) -> Jet {
        let mut r = self.clone();
        r.c.iter_mut().for_each(|c| *c *= s);
        r
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut r = self.clone();
        r.c[0] += s;
        r
    }

    /// `self += s * other` on the common box.
    pub fn axpy(&mut self, s: f64, other: &Jet) {
        if other.ox < self.ox || other.ov < self.ov {
            *self = self.truncate(other.ox, other.ov);
        }
        let (na, nb) = (self.nv(), other.nv());
        for ix in 0..self.nx() {
            for iv in 0..na {
                self.c[ix * na + iv] += s * other.c[ix * nb + iv];
            }
        }
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        let (ox, ov) = (self.ox.min(other.ox), self.ov.min(other.ov));
        let mut r = Jet::zeros(&self.space, ox, ov);
        let (na, nb, nr) = (self.nv(), other.nv(), r.nv());
        let nrx = r.nx();
        let row_live = |j: &Jet, n: usize, ix: usize| j.c[ix * n..ix * n + nr].iter().any(|&c| c != 0.0);
        let a_live: Vec<bool> = (0..nrx).map(|ix| row_live(self, na, ix)).collect();
        let b_live: Vec<bool> = (0..nrx).map(|ix| row_live(other, nb, ix)).collect();
        let vpairs = self.space.vs.pairs_upto(ov);
        for &(i1, j1, k1) in self.space.xs.pairs_upto(ox) {
            let (i1, j1, k1) = (i1 as usize, j1 as usize, k1 as usize);
            if !a_live[i1] || !b_live[j1] {
                continue;
            }
            let a = &self.c[i1 * na..i1 * na + nr];
            let b = &other.c[j1 * nb..j1 * nb + nr];
            let out = &mut r.c[k1 * nr..(k1 + 1) * nr];
            for &(i2, j2, k2) in vpairs {
                out[k2 as usize] += a[i2 as usize] * b[j2 as usize];
            }
        }
        r
    }

    /// Highest total degree present in the box.
    fn total_degree(&self) -> usize {
        self.ox + self.ov
    }

    /// `f(self)` given the Taylor coefficients `f^(j)(a0) / j!` of `f` at the value.
    pub fn compose(&self, taylor: &[f64]) -> Jet {
        let d = self.total_degree();
        let mut tail = self.clone();
        tail.c[0] = 0.0;
        let top = d.min(taylor.len() - 1);
        let mut r = Jet::constant(&self.space, self.ox, self.ov, taylor[top]);
        for j in (0..top).rev() {
            r = r.mul(&tail);
            r.c[0] += taylor[j];
        }
        r
    }

    fn taylor_of(&self, deriv: impl Fn(usize) -> f64) -> Vec<f64> {
        let d = self.total_degree();
        let mut fact = 1.0;
        (0..=d)
            .map(|j| {
                if j > 0 {
                    fact *= j as f64;
                }
                deriv(j) / fact
            })
            .collect()
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose(&self.taylor_of(|_| e))
    }

    pub fn ln(&self) -> Jet {
        let a = self.value();
        let t: Vec<f64> = (0..=self.total_degree())
            .map(|j| {
                if j == 0 {
                    a.ln()
                } else {
                    let s = if j % 2 == 1 { 1.0 } else { -1.0 };
                    s / (j as f64 * a.powi(j as i32))
                }
            })
            .collect();
        self.compose(&t)
    }

    pub fn recip(&self) -> Jet {
        let a = self.value();
        let t: Vec<f64> = (0..=self.total_degree())
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                s / a.powi(j as i32 + 1)
            })
            .collect();
        self.compose(&t)
    }

    pub fn div(&self, other: &Jet) -> Jet {
        self.mul(&other.recip())
    }

    /// `self^p` for a real exponent; needs a positive value unless `p` is an integer.
    pub fn powf(&self, p: f64) -> Jet {
        let a = self.value();
        let t = self.taylor_of(|j| {
            let falling: f64 = (0..j).map(|i| p - i as f64).product();
            falling * a.powf(p - j as f64)
        });
        self.compose(&t)
    }

    pub fn powi(&self, p: i32) -> Jet {
        match p {
            0 => Jet::constant(&self.space, self.ox, self.ov, 1.0),
            1 => self.clone(),
            2 => self.mul(self),
            p if p > 0 => {
                let half = self.powi(p / 2);
                let sq = half.mul(&half);
                if p % 2 == 1 {
                    sq.mul(self)
                } else {
                    sq
                }
            }
            p => self.powi(-p).recip(),
        }
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose(&self.taylor_of(|j| match j % 4 {
            0 => s,
            1 => c,
            2 => -s,
            _ => -c,
        }))
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose(&self.taylor_of(|j| match j % 4 {
            0 => c,
            1 => -s,
            2 => -c,
            _ => s,
        }))
    }

    /// Derivative with respect to `x^var`.
    pub fn dx(&self, var: usize) -> Jet {
        assert!(self.ox >= 1, "x-derivative of a jet with no x-order left");
        let mut r = Jet::zeros(&self.space, self.ox - 1, self.ov);
        let (ns, nr) = (self.nv(), r.nv());
        for ix in 0..r.nx() {
            let up = self.space.xs.raise(var, ix).expect("raise inside box");
            let m = self.space.xs.exponents(ix)[var] as f64 + 1.0;
            for iv in 0..nr {
                r.c[ix * nr + iv] = m * self.c[up * ns + iv];
            }
        }
        r
    }

    /// Derivative with respect to `v^var`.
    pub fn dv(&self, var: usize) -> Jet {
        assert!(self.ov >= 1, "v-derivative of a jet with no v-order left");
        let mut r = Jet::zeros(&self.space, self.ox, self.ov - 1);
        let (ns, nr) = (self.nv(), r.nv());
        let lifts: Vec<(usize, f64)> = (0..nr)
            .map(|iv| {
                let up = self.space.vs.raise(var, iv).expect("raise inside box");
                (up, self.space.vs.exponents(iv)[var] as f64 + 1.0)
            })
            .collect();
        for ix in 0..r.nx() {
            for (iv, &(up, m)) in lifts.iter().enumerate() {
                r.c[ix * nr + iv] = m * self.c[ix * ns + up];
            }
        }
        r
    }

    /// Largest coefficient magnitude; used for scale estimates.
    pub fn max_abs_coefficient(&self) -> f64 {
        self.c.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp() -> Arc<JetSpace> {
        JetSpace::get(2)
    }

    #[test]
    fn product_of_seeds() {
        let s = sp();
        let x = Jet::x_var(&s, 2, 2, 0, 1.5);
        let v = Jet::v_var(&s, 2, 2, 1, -2.0);
        let p = x.mul(&v).mul(&v);
        // f = x0 v1^2 : df/dx0 = v1^2, d2f/dv1^2 = 2 x0, d3f/dx0 dv1^2 = 2
        assert_eq!(p.value(), 1.5 * 4.0);
        assert_eq!(p.partial(&[1, 0], &[0, 0]), Some(4.0));
        assert_eq!(p.partial(&[0, 0], &[0, 2]), Some(3.0));
        assert_eq!(p.partial(&[1, 0], &[0, 2]), Some(2.0));
        assert_eq!(p.partial(&[2, 0], &[0, 2]), Some(0.0));
        assert_eq!(p.partial(&[0, 0], &[0, 3]), None);
    }

    #[test]
    fn exp_log_roundtrip() {
        let s = sp();
        let a = Jet::v_var(&s, 1, 4, 0, 0.7).add(&Jet::x_var(&s, 1, 4, 1, 0.2));
        let b = a.exp().ln();
        for (p, q) in a.c.iter().zip(&b.c) {
            assert!((p - q).abs() < 1e-13);
        }
        let r = a.mul(&a.recip());
        assert!((r.value() - 1.0).abs() < 1e-15);
        assert!(r.c[1..].iter().all(|c| c.abs() < 1e-13));
    }

    #[test]
    fn sin_cos_identity() {
        let s = sp();
        let a = Jet::v_var(&s, 2, 3, 1, 0.4).mul(&Jet::x_var(&s, 2, 3, 0, 1.3));
        let one = a.sin().mul(&a.sin()).add(&a.cos().mul(&a.cos()));
        assert!((one.value() - 1.0).abs() < 1e-15);
        assert!(one.c[1..].iter().all(|c| c.abs() < 1e-13));
    }

    #[test]
    fn powf_matches_repeated_product() {
        let s = sp();
        let a = Jet::v_var(&s, 1, 4, 0, 1.7).add_scalar(0.1);
        let p = a.powf(3.0);
        let q = a.mul(&a).mul(&a);
        for (x, y) in p.c.iter().zip(&q.c) {
            assert!((x - y).abs() < 1e-12 * (1.0 + y.abs()));
        }
        let neg = Jet::v_var(&s, 1, 4, 0, -1.3);
        let cube = neg.powi(3);
        assert!((cube.value() + 1.3f64.powi(3)).abs() < 1e-14);
        assert!((cube.partial(&[0, 0], &[2, 0]).unwrap() - 6.0 * -1.3).abs() < 1e-13);
    }

    #[test]
    fn derivatives_shrink_box() {
        let s = sp();
        let v = Jet::v_var(&s, 1, 3, 0, 2.0);
        let f = v.powi(3);
        let d = f.dv(0);
        assert_eq!(d.v_order(), 2);
        assert!((d.value() - 12.0).abs() < 1e-14);
        assert!((d.partial(&[0, 0], &[1, 0]).unwrap() - 12.0).abs() < 1e-14);
        let x = Jet::x_var(&s, 1, 3, 1, 0.5).mul(&v);
        assert!((x.dx(1).value() - 2.0).abs() < 1e-15);
    }
}
