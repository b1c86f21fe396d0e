//! Hyper-dual numbers `a + b e1 + c e2 + d e1 e2` with `e1^2 = e2^2 = 0`.
//!
//! Seeding two coordinates (or one coordinate twice) yields exact first and mixed
//! second derivatives. This is a deliberately separate derivative path from the
//! truncated-series engine; the classical curvature oracle is built on it.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperDual {
    pub re: f64,
    pub e1: f64,
    pub e2: f64,
    pub e12: f64,
}

impl HyperDual {
    pub const fn constant(re: f64) -> Self {
        HyperDual { re, e1: 0.0, e2: 0.0, e12: 0.0 }
    }

    pub const fn new(re: f64, e1: f64, e2: f64, e12: f64) -> Self {
        HyperDual { re, e1, e2, e12 }
    }

    /// Apply a scalar function given `f(a)`, `f'(a)`, `f''(a)`.
    #[inline]
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        HyperDual {
            re: f0,
            e1: f1 * self.e1,
            e2: f1 * self.e2,
            e12: f1 * self.e12 + f2 * self.e1 * self.e2,
        }
    }

    #[inline]
    pub fn add(&self, o: &Self) -> Self {
        HyperDual::new(self.re + o.re, self.e1 + o.e1, self.e2 + o.e2, self.e12 + o.e12)
    }

    #[inline]
    pub fn sub(&self, o: &Self) -> Self {
        HyperDual::new(self.re - o.re, self.e1 - o.e1, self.e2 - o.e2, self.e12 - o.e12)
    }

    #[inline]
    pub fn mul(&self, o: &Self) -> Self {
        HyperDual {
            re: self.re * o.re,
            e1: self.re * o.e1 + self.e1 * o.re,
            e2: self.re * o.e2 + self.e2 * o.re,
            e12: self.re * o.e12 + self.e1 * o.e2 + self.e2 * o.e1 + self.e12 * o.re,
        }
    }

    #[inline]
    pub fn recip(&self) -> Self {
        let r = 1.0 / self.re;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn scale(&self, s: f64) -> Self {
        HyperDual::new(self.re * s, self.e1 * s, self.e2 * s, self.e12 * s)
    }

    pub fn powf(&self, p: f64) -> Self {
        let a = self.re;
        self.chain(a.powf(p), p * a.powf(p - 1.0), p * (p - 1.0) * a.powf(p - 2.0))
    }

    pub fn powi(&self, p: i32) -> Self {
        let a = self.re;
        let pf = p as f64;
        let d1 = if p == 0 { 0.0 } else { pf * a.powi(p - 1) };
        let d2 = if p == 0 || p == 1 { 0.0 } else { pf * (pf - 1.0) * a.powi(p - 2) };
        self.chain(a.powi(p), d1, d2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_second_derivative() {
        // f(x, y) = x^2 y at (3, 2): f_x = 12, f_y = 9, f_xy = 6
        let x = HyperDual::new(3.0, 1.0, 0.0, 0.0);
        let y = HyperDual::new(2.0, 0.0, 1.0, 0.0);
        let f = x.mul(&x).mul(&y);
        assert_eq!(f, HyperDual::new(18.0, 12.0, 9.0, 6.0));
        // same variable in both slots: f_xx = 2y = 4
        let xx = HyperDual::new(3.0, 1.0, 1.0, 0.0);
        let g = xx.mul(&xx).mul(&HyperDual::constant(2.0));
        assert_eq!(g.e12, 4.0);
    }

    #[test]
    fn recip_and_powers() {
        let x = HyperDual::new(2.0, 1.0, 1.0, 0.0);
        let r = x.recip();
        assert!((r.e12 - 2.0 / 8.0).abs() < 1e-15);
        let c = x.powi(-2);
        assert!((c.e1 + 2.0 / 8.0).abs() < 1e-15);
        let s = x.powf(0.5);
        assert!((s.e12 + 0.25 * 2f64.powf(-1.5)).abs() < 1e-15);
    }
}
