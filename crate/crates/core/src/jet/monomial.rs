//! Graded monomial tables for truncated multivariate Taylor series.
//!
//! Monomials in `nvars` variables up to total degree `max_deg` are enumerated in
//! order of increasing degree, so the monomials of degree `<= d` always form a
//! prefix of the table. That lets a series truncated at degree `d` store its
//! coefficients densely in the first `count_upto(d)` slots.

use std::collections::HashMap;

const NONE: u32 = u32::MAX;

#[derive(Debug)]
pub struct MonomialTable {
    nvars: usize,
    max_deg: usize,
    exps: Vec<Vec<u8>>,
    degree: Vec<u8>,
    upto: Vec<usize>,
    lookup: HashMap<Vec<u8>, u32>,
    /// `(i, j, k)` with `mono[i] * mono[j] == mono[k]`, sorted by `deg(k)`.
    pairs: Vec<(u32, u32, u32)>,
    pairs_upto: Vec<usize>,
    /// `raise[var][i]` is the index of `mono[i] * z_var`, or `NONE` past `max_deg`.
    raise: Vec<Vec<u32>>,
    /// Product of factorials of the exponents.
    fact: Vec<f64>,
}

impl MonomialTable {
    pub fn new(nvars: usize, max_deg: usize) -> Self {
        let mut exps: Vec<Vec<u8>> = vec![vec![0; nvars]];
        let mut upto = vec![1usize];
        let mut frontier: Vec<Vec<u8>> = vec![vec![0; nvars]];
        for _ in 1..=max_deg {
            // Next degree: multiply every monomial of the previous degree by z_j
            // for j >= its last nonzero variable, which enumerates each exactly once.
            let mut next = Vec::new();
            for m in &frontier {
                let last = m.iter().rposition(|&e| e > 0).unwrap_or(0);
                for j in last..nvars {
                    let mut e = m.clone();
                    e[j] += 1;
                    next.push(e);
                }
            }
            next.sort_by(|a, b| b.cmp(a));
            exps.extend(next.iter().cloned());
            upto.push(exps.len());
            frontier = next;
        }
        let degree: Vec<u8> = exps.iter().map(|e| e.iter().sum()).collect();
        let lookup: HashMap<Vec<u8>, u32> = exps
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i as u32))
            .collect();

        let mut pairs = Vec::new();
        for (i, a) in exps.iter().enumerate() {
            for (j, b) in exps.iter().enumerate() {
                if (degree[i] + degree[j]) as usize > max_deg {
                    continue;
                }
                let s: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                pairs.push((i as u32, j as u32, lookup[&s]));
            }
        }
        pairs.sort_by_key(|&(_, _, k)| (degree[k as usize], k));
        let mut pairs_upto = vec![0usize; max_deg + 1];
        for (d, slot) in pairs_upto.iter_mut().enumerate() {
            *slot = pairs
                .iter()
                .position(|&(_, _, k)| degree[k as usize] as usize > d)
                .unwrap_or(pairs.len());
        }

        let raise = (0..nvars)
            .map(|v| {
                exps.iter()
                    .map(|e| {
                        let mut r = e.clone();
                        r[v] += 1;
                        lookup.get(&r).copied().unwrap_or(NONE)
                    })
                    .collect()
            })
            .collect();

        let fact = exps
            .iter()
            .map(|e| e.iter().map(|&k| factorial(k as usize)).product())
            .collect();

        MonomialTable {
            nvars,
            max_deg,
            exps,
            degree,
            upto,
            lookup,
            pairs,
            pairs_upto,
            raise,
            fact,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn max_deg(&self) -> usize {
        self.max_deg
    }

    /// Number of monomials of total degree `<= d`.
    #[inline]
    pub fn count_upto(&self, d: usize) -> usize {
        self.upto[d.min(self.max_deg)]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.degree[i] as usize
    }

    pub fn exponents(&self, i: usize) -> &[u8] {
        &self.exps[i]
    }

    pub fn index_of(&self, exps: &[u8]) -> Option<usize> {
        self.lookup.get(exps).map(|&i| i as usize)
    }

    /// Product pairs whose result has degree `<= d`.
    #[inline]
    pub fn pairs_upto(&self, d: usize) -> &[(u32, u32, u32)] {
        &self.pairs[..self.pairs_upto[d.min(self.max_deg)]]
    }

    #[inline]
    pub fn raise(&self, var: usize, i: usize) -> Option<usize> {
        let r = self.raise[var][i];
        (r != NONE).then_some(r as usize)
    }

    #[inline]
    pub fn factorial_weight(&self, i: usize) -> f64 {
        self.fact[i]
    }
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn counts_match_binomials() {
        for nvars in 1..=4 {
            for d in 0..=5 {
                let t = MonomialTable::new(nvars, d);
                for e in 0..=d {
                    assert_eq!(t.count_upto(e), binom(nvars + e, e));
                }
                assert_eq!(t.pairs_upto(d).len(), binom(2 * nvars + d, d));
            }
        }
    }

    #[test]
    fn graded_prefix_and_raise() {
        let t = MonomialTable::new(3, 4);
        for i in 1..t.count_upto(4) {
            assert!(t.degree(i - 1) <= t.degree(i));
        }
        let i = t.index_of(&[1, 0, 2]).unwrap();
        let r = t.raise(1, i).unwrap();
        assert_eq!(t.exponents(r), &[1, 1, 2]);
        let top = t.index_of(&[0, 0, 4]).unwrap();
        assert!(t.raise(0, top).is_none());
        assert_eq!(t.factorial_weight(i), 2.0);
    }
}
