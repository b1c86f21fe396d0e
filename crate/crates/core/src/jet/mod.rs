//! Exact mixed derivatives of scalar fields on phase space.

pub mod fd;
pub mod hyperdual;
pub mod monomial;
pub mod series;

use std::sync::Arc;

pub use hyperdual::HyperDual;
pub use series::{Jet, JetSpace, MAX_V_ORDER, MAX_X_ORDER};

use crate::error::{GeomError, Result};
use crate::field::ScalarField;

/// A point `(x, v)` of the tangent bundle with the zero section removed.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if x.len() != v.len() {
            return Err(GeomError::validation(format!(
                "phase point has {} base and {} velocity coordinates",
                x.len(),
                v.len()
            )));
        }
        if x.len() < 2 {
            return Err(GeomError::validation("phase space dimension must be at least 2"));
        }
        if v.iter().all(|&c| c == 0.0) {
            return Err(GeomError::validation("velocity must be nonzero"));
        }
        if x.iter().chain(&v).any(|c| !c.is_finite()) {
            return Err(GeomError::validation("phase point has non-finite coordinates"));
        }
        Ok(PhasePoint { x, v })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Same base point, velocity scaled by `t`.
    pub fn scaled(&self, t: f64) -> PhasePoint {
        PhasePoint {
            x: self.x.clone(),
            v: self.v.iter().map(|c| c * t).collect(),
        }
    }

    /// `[x.., v..]` as one vector.
    pub fn to_state(&self) -> Vec<f64> {
        self.x.iter().chain(&self.v).copied().collect()
    }

    pub fn from_state(y: &[f64]) -> PhasePoint {
        let n = y.len() / 2;
        PhasePoint {
            x: y[..n].to_vec(),
            v: y[n..2 * n].to_vec(),
        }
    }
}

/// Arithmetic needed to evaluate an expression tree.
///
/// Implemented for plain values, truncated series and hyper-dual numbers so one
/// evaluation rule serves values, exact jets and the independent oracle path.
pub trait Scalar: Clone {
    fn value(&self) -> f64;
    /// A constant of the same kind as `self`.
    fn lift(&self, c: f64) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn add_f(&self, c: f64) -> Self;
    fn mul_f(&self, c: f64) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn powi(&self, p: i32) -> Self;
    fn powf(&self, p: f64) -> Self;
    /// True when the type carries no derivative information.
    fn is_plain() -> bool {
        false
    }
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn lift(&self, c: f64) -> Self {
        c
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn add_f(&self, c: f64) -> Self {
        self + c
    }
    fn mul_f(&self, c: f64) -> Self {
        self * c
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn powi(&self, p: i32) -> Self {
        f64::powi(*self, p)
    }
    fn powf(&self, p: f64) -> Self {
        f64::powf(*self, p)
    }
    fn is_plain() -> bool {
        true
    }
}

impl Scalar for Jet {
    fn value(&self) -> f64 {
        Jet::value(self)
    }
    fn lift(&self, c: f64) -> Self {
        Jet::constant(self.space(), self.x_order(), self.v_order(), c)
    }
    fn add(&self, o: &Self) -> Self {
        Jet::add(self, o)
    }
    fn sub(&self, o: &Self) -> Self {
        Jet::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        Jet::mul(self, o)
    }
    fn div(&self, o: &Self) -> Self {
        Jet::div(self, o)
    }
    fn neg(&self) -> Self {
        Jet::neg(self)
    }
    fn add_f(&self, c: f64) -> Self {
        self.add_scalar(c)
    }
    fn mul_f(&self, c: f64) -> Self {
        self.scale(c)
    }
    fn exp(&self) -> Self {
        Jet::exp(self)
    }
    fn ln(&self) -> Self {
        Jet::ln(self)
    }
    fn sqrt(&self) -> Self {
        Jet::sqrt(self)
    }
    fn sin(&self) -> Self {
        Jet::sin(self)
    }
    fn cos(&self) -> Self {
        Jet::cos(self)
    }
    fn powi(&self, p: i32) -> Self {
        Jet::powi(self, p)
    }
    fn powf(&self, p: f64) -> Self {
        Jet::powf(self, p)
    }
}

impl Scalar for HyperDual {
    fn value(&self) -> f64 {
        self.re
    }
    fn lift(&self, c: f64) -> Self {
        HyperDual::constant(c)
    }
    fn add(&self, o: &Self) -> Self {
        HyperDual::add(self, o)
    }
    fn sub(&self, o: &Self) -> Self {
        HyperDual::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        HyperDual::mul(self, o)
    }
    fn div(&self, o: &Self) -> Self {
        HyperDual::mul(self, &o.recip())
    }
    fn neg(&self) -> Self {
        self.scale(-1.0)
    }
    fn add_f(&self, c: f64) -> Self {
        HyperDual::new(self.re + c, self.e1, self.e2, self.e12)
    }
    fn mul_f(&self, c: f64) -> Self {
        self.scale(c)
    }
    fn exp(&self) -> Self {
        let e = self.re.exp();
        self.chain(e, e, e)
    }
    fn ln(&self) -> Self {
        let a = self.re;
        self.chain(a.ln(), 1.0 / a, -1.0 / (a * a))
    }
    fn sqrt(&self) -> Self {
        HyperDual::powf(self, 0.5)
    }
    fn sin(&self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(&self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(c, -s, -c)
    }
    fn powi(&self, p: i32) -> Self {
        HyperDual::powi(self, p)
    }
    fn powf(&self, p: f64) -> Self {
        HyperDual::powf(self, p)
    }
}

/// Seed jets for `[x_1.., v_1..]` at `p` on the box `(ox, ov)`.
pub fn seed_variables(space: &Arc<JetSpace>, p: &PhasePoint, ox: usize, ov: usize) -> Vec<Jet> {
    let n = p.dim();
    (0..n)
        .map(|i| Jet::x_var(space, ox, ov, i, p.x[i]))
        .chain((0..n).map(|i| Jet::v_var(space, ox, ov, i, p.v[i])))
        .collect()
}

pub fn check_capability(x_order: usize, v_order: usize) -> Result<()> {
    if x_order > MAX_X_ORDER || v_order > MAX_V_ORDER {
        return Err(GeomError::Capability {
            req_x: x_order,
            req_v: v_order,
            max_x: MAX_X_ORDER,
            max_v: MAX_V_ORDER,
        });
    }
    Ok(())
}

/// Jet of `f` at `p` as a raw series.
pub fn field_jet(f: &ScalarField, p: &PhasePoint, x_order: usize, v_order: usize) -> Result<Jet> {
    check_capability(x_order, v_order)?;
    if p.dim() != f.dim() {
        return Err(GeomError::validation(format!(
            "field has dimension {}, point has {}",
            f.dim(),
            p.dim()
        )));
    }
    let space = JetSpace::get(p.dim());
    let vars = seed_variables(&space, p, x_order, v_order);
    f.eval(&vars)
}

/// All mixed partials `d_x^alpha d_v^beta f` at one point.
#[derive(Clone, Debug)]
pub struct JetTable {
    pub base: PhasePoint,
    jet: Jet,
}

fn exponents(n: usize, idx: &[usize]) -> Option<Vec<u8>> {
    let mut e = vec![0u8; n];
    for &i in idx {
        *e.get_mut(i)? += 1;
    }
    Some(e)
}

impl JetTable {
    pub fn from_jet(base: PhasePoint, jet: Jet) -> Self {
        JetTable { base, jet }
    }

    pub fn jet(&self) -> &Jet {
        &self.jet
    }

    pub fn n(&self) -> usize {
        self.base.dim()
    }

    pub fn x_order(&self) -> usize {
        self.jet.x_order()
    }

    pub fn v_order(&self) -> usize {
        self.jet.v_order()
    }

    /// `d_{x^xs[0]} d_{x^xs[1]}.. d_{v^vs[0]}..` f; index order is irrelevant.
    pub fn get(&self, xs: &[usize], vs: &[usize]) -> Option<f64> {
        let n = self.n();
        self.jet.partial(&exponents(n, xs)?, &exponents(n, vs)?)
    }

    pub fn value(&self) -> f64 {
        self.jet.value()
    }

    /// `g_a = D_a G`.
    pub fn g_a(&self) -> Vec<f64> {
        (0..self.n()).map(|a| self.get(&[], &[a]).unwrap_or(f64::NAN)).collect()
    }

    /// `G_a = d_a G`.
    pub fn big_g_a(&self) -> Vec<f64> {
        (0..self.n()).map(|a| self.get(&[a], &[]).unwrap_or(f64::NAN)).collect()
    }

    /// Velocity Hessian `g_ab`.
    pub fn g_ab(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        (0..n)
            .map(|a| (0..n).map(|b| self.get(&[], &[a, b]).unwrap_or(f64::NAN)).collect())
            .collect()
    }

    pub fn g_abc(&self, a: usize, b: usize, c: usize) -> Option<f64> {
        self.get(&[], &[a, b, c])
    }

    /// Every stored entry as `(x exponents, v exponents, value)`.
    pub fn entries(&self) -> Vec<(Vec<u8>, Vec<u8>, f64)> {
        let space = self.jet.space();
        let mut out = Vec::new();
        for ix in 0..space.xs.count_upto(self.x_order()) {
            for iv in 0..space.vs.count_upto(self.v_order()) {
                let ex = space.xs.exponents(ix).to_vec();
                let ev = space.vs.exponents(iv).to_vec();
                let val = self.jet.partial(&ex, &ev).expect("entry inside box");
                out.push((ex, ev, val));
            }
        }
        out
    }
}

/// Jet table of `f` at `p` up to the requested mixed orders.
pub fn evaluate_jets(f: &ScalarField, p: &PhasePoint, x_order: usize, v_order: usize) -> Result<JetTable> {
    let jet = field_jet(f, p, x_order, v_order)?;
    Ok(JetTable::from_jet(p.clone(), jet))
}

/// Max-norms of `v^a g_a - kG`, `v^a g_ab - (k-1) g_b`, `v^a g_abc - (k-2) g_bc`.
///
/// Entries the table does not contain contribute zero.
pub fn euler_residuals(jets: &JetTable, k: f64) -> [f64; 3] {
    let n = jets.n();
    let v = &jets.base.v;
    let mut out = [0.0f64; 3];
    let mut idx: Vec<usize> = Vec::with_capacity(3);
    // Level `l` contracts the order-(l+1) derivatives against v.
    for (level, slot) in out.iter_mut().enumerate() {
        if jets.v_order() < level + 1 {
            continue;
        }
        let combos = index_tuples(n, level);
        for rest in combos {
            idx.clear();
            idx.extend_from_slice(&rest);
            let lower = jets.get(&[], &rest).unwrap_or(0.0);
            let mut s = 0.0;
            for (a, va) in v.iter().enumerate() {
                idx.push(a);
                s += va * jets.get(&[], &idx).unwrap_or(0.0);
                idx.pop();
            }
            *slot = slot.max((s - (k - level as f64) * lower).abs());
        }
    }
    out
}

/// Non-decreasing index tuples of length `len` over `0..n`.
pub fn index_tuples(n: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|t: Vec<usize>| {
                let start = t.last().copied().unwrap_or(0);
                (start..n).map(move |i| {
                    let mut u = t.clone();
                    u.push(i);
                    u
                })
            })
            .collect();
    }
    out
}
