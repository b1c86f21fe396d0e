//! Central-difference oracle for the derivative engine.
//!
//! Mixed partials are estimated with tensor products of second-order central
//! stencils. Each estimate carries a rounding floor so a step-halving study can
//! tell truncation error (which must shrink by about 4x per halving) apart from
//! floating-point noise.

use std::collections::HashMap;

use crate::error::Result;
use crate::field::ScalarField;
use crate::jet::{evaluate_jets, Jet, JetTable, PhasePoint};

/// Integer offsets and weights of the O(h^2) central stencil for `d^m/dz^m`
/// (to be divided by `h^m`).
pub fn central_weights(m: usize) -> Vec<(i32, f64)> {
    if m == 0 {
        return vec![(0, 1.0)];
    }
    // delta^m on the half-integer lattice, then averaged (odd m) onto integers.
    let binom = |k: usize| -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
    };
    let mut w: HashMap<i32, f64> = HashMap::new();
    for j in 0..=m {
        let s = if j % 2 == 0 { 1.0 } else { -1.0 };
        let c = s * binom(j);
        // offset m/2 - j, doubled to stay integral
        let twice = m as i32 - 2 * j as i32;
        if m % 2 == 0 {
            *w.entry(twice / 2).or_insert(0.0) += c;
        } else {
            *w.entry((twice + 1) / 2).or_insert(0.0) += 0.5 * c;
            *w.entry((twice - 1) / 2).or_insert(0.0) += 0.5 * c;
        }
    }
    let mut out: Vec<(i32, f64)> = w.into_iter().filter(|&(_, c)| c != 0.0).collect();
    out.sort_by_key(|&(o, _)| o);
    out
}

/// One finite-difference estimate with its noise floor.
#[derive(Clone, Debug)]
pub struct FdEstimate {
    pub value: Vec<f64>,
    /// Rounding-error estimate per component (root-sum-square of stencil terms).
    pub floor: Vec<f64>,
}

/// Memoizing stencil evaluator around a fixed base point and step.
pub struct Stencil<'a, F>
where
    F: FnMut(&PhasePoint) -> Result<Vec<f64>>,
{
    base: &'a PhasePoint,
    h: f64,
    f: F,
    memo: HashMap<Vec<i32>, Vec<f64>>,
    magnitudes: Option<Vec<f64>>,
}

impl<'a, F> Stencil<'a, F>
where
    F: FnMut(&PhasePoint) -> Result<Vec<f64>>,
{
    pub fn new(base: &'a PhasePoint, h: f64, f: F) -> Self {
        Stencil {
            base,
            h,
            f,
            memo: HashMap::new(),
            magnitudes: None,
        }
    }

    /// Per-component size of the terms each value was computed from; rounding
    /// is assumed relative to the larger of this, the value and 1.
    pub fn with_magnitudes(mut self, m: Vec<f64>) -> Self {
        self.magnitudes = Some(m);
        self
    }

    fn at(&mut self, offset: &[i32]) -> Result<Vec<f64>> {
        if let Some(v) = self.memo.get(offset) {
            return Ok(v.clone());
        }
        let n = self.base.dim();
        let mut p = self.base.clone();
        for i in 0..n {
            p.x[i] += offset[i] as f64 * self.h;
            p.v[i] += offset[n + i] as f64 * self.h;
        }
        let val = (self.f)(&p)?;
        self.memo.insert(offset.to_vec(), val.clone());
        Ok(val)
    }

    /// Estimate of the partial with per-variable orders `orders = [x.., v..]`.
    pub fn partial(&mut self, orders: &[u8]) -> Result<FdEstimate> {
        let total: usize = orders.iter().map(|&m| m as usize).sum();
        let mut terms: Vec<(Vec<i32>, f64)> = vec![(vec![0; orders.len()], 1.0)];
        for (var, &m) in orders.iter().enumerate() {
            if m == 0 {
                continue;
            }
            let w = central_weights(m as usize);
            terms = terms
                .into_iter()
                .flat_map(|(off, c)| {
                    w.iter().map(move |&(o, wc)| {
                        let mut off = off.clone();
                        off[var] += o;
                        (off, c * wc)
                    })
                })
                .collect();
        }
        let scale = self.h.powi(total as i32);
        let mut value: Vec<f64> = Vec::new();
        let mut abs_sum: Vec<f64> = Vec::new();
        for (off, c) in &terms {
            let f = self.at(off)?;
            if value.is_empty() {
                value = vec![0.0; f.len()];
                abs_sum = vec![0.0; f.len()];
            }
            for (k, fk) in f.iter().enumerate() {
                value[k] += c * fk;
                // on-cone values are cancellations of O(1) terms, so never below 1
                let mag = self.magnitudes.as_ref().map_or(1.0, |m| m[k].max(1.0));
                abs_sum[k] += (c * fk.abs().max(mag)).powi(2);
            }
        }
        let floor = abs_sum
            .iter()
            .map(|s| 32.0 * f64::EPSILON * s.sqrt() / scale)
            .collect();
        Ok(FdEstimate {
            value: value.into_iter().map(|v| v / scale).collect(),
            floor,
        })
    }
}

/// Verdict of a step-halving study for one scalar entry.
#[derive(Clone, Debug)]
pub struct HalvingOutcome {
    pub pass: bool,
    /// Error ratio of the first consecutive pair with the coarser level above the floor.
    pub ratio: Option<f64>,
    /// True when every level agreed to within rounding.
    pub exact: bool,
    /// Accepted on a ratio near 16: the h^2 error term vanishes at this point
    /// and the O(h^4) term leads.
    pub fourth_order: bool,
    pub errors: Vec<f64>,
    pub floors: Vec<f64>,
}

/// Accept when some consecutive pair of levels whose coarser error is above the
/// noise floor shows an error ratio in `[3.5, 4.5]`, or when every level is within
/// the floor. Noise at the finer level would spoil the ratio, so only the coarser
/// one is tested against the floor. A ratio in `[14, 18]` is accepted and flagged
/// when no pair shows the second-order ratio.
pub fn halving_verdict(errors: &[f64], floors: &[f64]) -> HalvingOutcome {
    let above: Vec<bool> = errors.iter().zip(floors).map(|(e, f)| e > f).collect();
    let exact = !above.iter().any(|&a| a);
    let mut ratio = None;
    let mut pass = exact;
    let mut fourth_order = false;
    for j in 0..errors.len().saturating_sub(1) {
        if above[j] && errors[j + 1] > 0.0 {
            let r = errors[j] / errors[j + 1];
            if ratio.is_none() {
                ratio = Some(r);
            }
            if (3.5..=4.5).contains(&r) {
                ratio = Some(r);
                pass = true;
                fourth_order = false;
                break;
            }
            if (14.0..=18.0).contains(&r) && !pass {
                ratio = Some(r);
                pass = true;
                fourth_order = true;
            }
        }
    }
    HalvingOutcome {
        pass,
        ratio,
        exact,
        fourth_order,
        errors: errors.to_vec(),
        floors: floors.to_vec(),
    }
}

/// Step-halving study of `f`'s partials against claimed exact values.
///
/// `requests[r]` is a per-variable order vector and `exact[r]` the claimed
/// derivative of every output component. Steps are `h0 / 2^j`, `j < levels`.
pub fn step_halving<F>(
    f: F,
    p: &PhasePoint,
    requests: &[Vec<u8>],
    exact: &[Vec<f64>],
    h0: f64,
    levels: usize,
) -> Result<Vec<HalvingOutcome>>
where
    F: FnMut(&PhasePoint) -> Result<Vec<f64>>,
{
    step_halving_with(f, p, requests, exact, h0, levels, None)
}

/// [`step_halving`] with explicit per-component term magnitudes for the noise floor.
pub fn step_halving_with<F>(
    mut f: F,
    p: &PhasePoint,
    requests: &[Vec<u8>],
    exact: &[Vec<f64>],
    h0: f64,
    levels: usize,
    magnitudes: Option<&[f64]>,
) -> Result<Vec<HalvingOutcome>>
where
    F: FnMut(&PhasePoint) -> Result<Vec<f64>>,
{
    let mut errs: Vec<Vec<Vec<f64>>> = vec![Vec::new(); requests.len()];
    let mut floors: Vec<Vec<Vec<f64>>> = vec![Vec::new(); requests.len()];
    let mut h = h0;
    for _ in 0..levels {
        let mut st = Stencil::new(p, h, &mut f);
        if let Some(m) = magnitudes {
            st = st.with_magnitudes(m.to_vec());
        }
        for (r, ord) in requests.iter().enumerate() {
            let est = st.partial(ord)?;
            let e: Vec<f64> = est.value.iter().zip(&exact[r]).map(|(a, b)| (a - b).abs()).collect();
            let fl: Vec<f64> = est
                .floor
                .iter()
                .zip(&exact[r])
                .map(|(fl, b)| fl + 1e-13 * b.abs())
                .collect();
            errs[r].push(e);
            floors[r].push(fl);
        }
        h *= 0.5;
    }
    let mut out = Vec::new();
    for r in 0..requests.len() {
        let comps = exact[r].len();
        for k in 0..comps {
            let e: Vec<f64> = errs[r].iter().map(|lv| lv[k]).collect();
            let fl: Vec<f64> = floors[r].iter().map(|lv| lv[k]).collect();
            out.push(halving_verdict(&e, &fl));
        }
    }
    Ok(out)
}

/// Order vectors `[x.., v..]` of every mixed partial with `|alpha| = xo`, `|beta| = vo`.
pub fn order_vectors(n: usize, xo: usize, vo: usize) -> Vec<Vec<u8>> {
    let xs = crate::jet::index_tuples(n, xo);
    let vs = crate::jet::index_tuples(n, vo);
    let mut out = Vec::new();
    for a in &xs {
        for b in &vs {
            let mut e = vec![0u8; 2 * n];
            for &i in a {
                e[i] += 1;
            }
            for &i in b {
                e[n + i] += 1;
            }
            out.push(e);
        }
    }
    out
}

/// Worst `|fd - jet| / (1 + |jet|)` over the partials of exact mixed order
/// `(x_order, v_order)` at step `h`.
pub fn finite_difference_check(
    f: &ScalarField,
    p: &PhasePoint,
    order_pair: (usize, usize),
    h: f64,
) -> Result<f64> {
    let (xo, vo) = order_pair;
    let table = evaluate_jets(f, p, xo, vo)?;
    let n = p.dim();
    let mut st = Stencil::new(p, h, |q: &PhasePoint| Ok(vec![f.value(q)?]));
    let mut worst: f64 = 0.0;
    for ord in order_vectors(n, xo, vo) {
        let jet = table
            .jet()
            .partial(&ord[..n], &ord[n..])
            .expect("requested entry inside box");
        let est = st.partial(&ord)?;
        worst = worst.max((est.value[0] - jet).abs() / (1.0 + jet.abs()));
    }
    Ok(worst)
}

/// Step-halving study of every derivative stored in a family of jets.
///
/// Each entry of order at least one is compared with the first-order central
/// difference, in one variable, of the entry one order below, evaluated by
/// `jets_at` at the shifted points. Order-zero entries are plain function values,
/// so the checks chain down to evaluation. Returns `(jet index, [x.., v..]
/// exponents, outcome)`.
pub fn ladder_study<F>(mut jets_at: F, p: &PhasePoint, h0: f64, levels: usize) -> Result<Vec<(usize, Vec<u8>, HalvingOutcome)>>
where
    F: FnMut(&PhasePoint) -> Result<Vec<Jet>>,
{
    let n = p.dim();
    let flat = |jets: &[Jet]| -> Vec<(usize, Vec<u8>, f64)> {
        let mut out = Vec::new();
        for (c, j) in jets.iter().enumerate() {
            for (ex, ev, val) in JetTable::from_jet(p.clone(), j.clone()).entries() {
                out.push((c, ex.into_iter().chain(ev).collect(), val));
            }
        }
        out
    };
    let base = flat(&jets_at(p)?);
    let index: HashMap<(usize, Vec<u8>), f64> = base.iter().map(|(c, e, v)| ((*c, e.clone()), *v)).collect();
    let mut requests = Vec::new();
    let mut exact = Vec::new();
    let mut targets = Vec::new();
    for var in 0..2 * n {
        let mut ord = vec![0u8; 2 * n];
        ord[var] = 1;
        let mut ex_row = Vec::with_capacity(base.len());
        for (c, e, _) in &base {
            let mut up = e.clone();
            up[var] += 1;
            match index.get(&(*c, up.clone())) {
                Some(&v) => {
                    ex_row.push(v);
                    targets.push(Some((*c, up)));
                }
                None => {
                    ex_row.push(0.0);
                    targets.push(None);
                }
            }
        }
        requests.push(ord);
        exact.push(ex_row);
    }
    // entries of one jet share arithmetic, so their rounding follows the largest
    let mut largest: HashMap<usize, f64> = HashMap::new();
    for (c, _, v) in &base {
        let e = largest.entry(*c).or_insert(0.0);
        *e = e.max(v.abs());
    }
    let mags: Vec<f64> = base.iter().map(|(c, _, _)| largest[c]).collect();
    let f = |q: &PhasePoint| -> Result<Vec<f64>> { Ok(flat(&jets_at(q)?).into_iter().map(|(_, _, v)| v).collect()) };
    let outcomes = step_halving_with(f, p, &requests, &exact, h0, levels, Some(&mags))?;
    Ok(targets
        .into_iter()
        .zip(outcomes)
        .filter_map(|(t, o)| t.map(|(c, e)| (c, e, o)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_weights() {
        assert_eq!(central_weights(1), vec![(-1, -0.5), (1, 0.5)]);
        assert_eq!(central_weights(2), vec![(-1, 1.0), (0, -2.0), (1, 1.0)]);
        assert_eq!(central_weights(3), vec![(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)]);
        assert_eq!(central_weights(4), vec![(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)]);
        // moments: sum w o^j = 0 for j < m, m! for j = m, 0 for j = m + 1
        for m in 1..=7usize {
            let w = central_weights(m);
            for j in 0..=m + 1 {
                let s: f64 = w.iter().map(|&(o, c)| c * (o as f64).powi(j as i32)).sum();
                let fact: f64 = (1..=m).map(|i| i as f64).product();
                let want = if j == m { fact } else { 0.0 };
                assert!((s - want).abs() < 1e-9, "m={m} j={j} s={s}");
            }
        }
    }

    #[test]
    fn verdict_rules() {
        let v = halving_verdict(&[1.0, 0.25, 0.0625], &[1e-9; 3]);
        assert!(v.pass && !v.exact);
        let v = halving_verdict(&[1e-12, 2e-12], &[1e-9; 2]);
        assert!(v.pass && v.exact);
        let v = halving_verdict(&[1.0, 0.5, 0.25], &[1e-9; 3]);
        assert!(!v.pass);
    }
}
