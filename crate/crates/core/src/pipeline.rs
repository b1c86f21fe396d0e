//! Series-level geometry: every tensor is carried as a jet around one phase point,
//! so derivatives of `u`, `U`, `S` and `R` are exact consequences of the jets of `G`.
//!
//! Box bookkeeping, starting from `G` on `(X, Y)`:
//!
//! | quantity        | box            |
//! |-----------------|----------------|
//! | `g_a`, `G_a`    | `(X, Y-1)`, `(X-1, Y)` |
//! | `g_ab`          | `(X, Y-2)`     |
//! | `u^a`           | `(X-1, Y-2)`   |
//! | `U_b^a`         | `(X-1, Y-3)`   |
//! | `S_ab`, `R_ab^c`| `(X-2, Y-4)`   |

use crate::error::{GeomError, Result};
use crate::field::ScalarField;
use crate::jet::{check_capability, seed_variables, Jet, JetSpace, PhasePoint};
use crate::linalg::{matrix, GuardedLu};

/// Solve `A y = rhs` for jets, given an LU of the constant part `A0`.
///
/// Fixed point `y <- A0^-1 (rhs - (A - A0) y)`; each sweep fixes one more total
/// degree, so `ox + ov + 1` sweeps are exact on the result box.
pub fn solve_series(lu: &GuardedLu, a: &[Vec<Jet>], rhs: &[Jet]) -> Vec<Jet> {
    let n = rhs.len();
    let (mut ox, mut ov) = (usize::MAX, usize::MAX);
    for j in a.iter().flatten().chain(rhs) {
        ox = ox.min(j.x_order());
        ov = ov.min(j.v_order());
    }
    let a: Vec<Vec<Jet>> = a
        .iter()
        .map(|r| {
            r.iter()
                .map(|j| {
                    let mut t = j.truncate(ox, ov);
                    t = t.add_scalar(-t.value());
                    t
                })
                .collect()
        })
        .collect();
    let rhs: Vec<Jet> = rhs.iter().map(|j| j.truncate(ox, ov)).collect();
    let inv = lu.inverse();
    let apply_inv = |r: &[Jet]| -> Vec<Jet> {
        (0..n)
            .map(|i| {
                let mut acc = r[0].scale(inv[(i, 0)]);
                for (k, rk) in r.iter().enumerate().skip(1) {
                    acc.axpy(inv[(i, k)], rk);
                }
                acc
            })
            .collect()
    };
    let mut y = apply_inv(&rhs);
    for _ in 0..(ox + ov) {
        let resid: Vec<Jet> = (0..n)
            .map(|i| {
                let mut r = rhs[i].clone();
                for (k, yk) in y.iter().enumerate() {
                    if a[i][k].max_abs_coefficient() != 0.0 {
                        r = r.sub(&a[i][k].mul(yk));
                    }
                }
                r
            })
            .collect();
        y = apply_inv(&resid);
    }
    y
}

/// Jets of `G` and the derived spray/connection series at one phase point.
pub struct Series {
    pub n: usize,
    pub point: PhasePoint,
    pub x_order: usize,
    pub v_order: usize,
    pub space: std::sync::Arc<JetSpace>,
    /// `[x.., v..]` seed jets.
    pub vars: Vec<Jet>,
    pub g: Jet,
    pub ga: Vec<Jet>,
    pub gab: Vec<Vec<Jet>>,
    pub big_ga: Vec<Jet>,
    pub u: Vec<Jet>,
    /// `uu[b][a] = U_b^a = -D_b u^a / 2`; empty when `v_order < 3`.
    pub uu: Vec<Vec<Jet>>,
    pub hessian: GuardedLu,
}

impl Series {
    pub fn new(f: &ScalarField, p: &PhasePoint, x_order: usize, v_order: usize) -> Result<Series> {
        check_capability(x_order, v_order)?;
        if x_order < 1 || v_order < 2 {
            return Err(GeomError::precondition("series geometry needs jets of order at least (1, 2)"));
        }
        let n = p.dim();
        if f.dim() != n {
            return Err(GeomError::validation("field and point dimensions differ"));
        }
        let space = JetSpace::get(n);
        let vars = seed_variables(&space, p, x_order, v_order);
        let g = f.eval(&vars)?;
        let ga: Vec<Jet> = (0..n).map(|a| g.dv(a)).collect();
        let gab: Vec<Vec<Jet>> = ga.iter().map(|ja| (0..n).map(|b| ja.dv(b)).collect()).collect();
        let big_ga: Vec<Jet> = (0..n).map(|a| g.dx(a)).collect();
        let h0: Vec<Vec<f64>> = gab.iter().map(|r| r.iter().map(Jet::value).collect()).collect();
        let hessian = GuardedLu::new(&matrix(&h0), "velocity Hessian g_ab")?;

        // u^a g_ab = G_b - v^c d_c g_b
        let rhs: Vec<Jet> = (0..n)
            .map(|b| {
                let mut r = big_ga[b].clone();
                for c in 0..n {
                    r = r.sub(&vars[n + c].mul(&ga[b].dx(c)));
                }
                r
            })
            .collect();
        let u = solve_series(&hessian, &gab, &rhs);
        let uu = if v_order >= 3 {
            (0..n)
                .map(|b| (0..n).map(|a| u[a].dv(b).scale(-0.5)).collect())
                .collect()
        } else {
            Vec::new()
        };
        Ok(Series {
            n,
            point: p.clone(),
            x_order,
            v_order,
            space,
            vars,
            g,
            ga,
            gab,
            big_ga,
            u,
            uu,
            hessian,
        })
    }

    pub fn v_seed(&self, a: usize) -> &Jet {
        &self.vars[self.n + a]
    }

    /// `V f = v^a d_a f + u^a D_a f`.
    pub fn vf(&self, f: &Jet) -> Jet {
        let n = self.n;
        let mut acc: Option<Jet> = None;
        for a in 0..n {
            let t = self.v_seed(a).mul(&f.dx(a)).add(&self.u[a].mul(&f.dv(a)));
            acc = Some(match acc {
                None => t,
                Some(s) => s.add(&t),
            });
        }
        acc.expect("n >= 2")
    }

    /// `H_a f = d_a f - U_a^b D_b f`.
    pub fn hf(&self, a: usize, f: &Jet) -> Jet {
        let mut r = f.dx(a);
        for b in 0..self.n {
            r = r.sub(&self.uu[a][b].mul(&f.dv(b)));
        }
        r
    }

    fn require(&self, xo: usize, vo: usize, what: &str) -> Result<()> {
        if self.x_order < xo || self.v_order < vo {
            return Err(GeomError::precondition(format!(
                "{what} needs jets of order ({xo}, {vo}), series has ({}, {})",
                self.x_order, self.v_order
            )));
        }
        Ok(())
    }

    /// `S_ab = (V^2 g_ab - 2 V(d_(a g_b)) + 2 d_a d_b G - 2 g_cd U_a^c U_b^d) / 2`.
    pub fn tidal(&self) -> Result<Vec<Vec<Jet>>> {
        self.tidal_impl(true)
    }

    /// The same formula evaluated separately for every ordered pair `(a, b)`.
    ///
    /// The literal `V(d_a g_b)` carries an antisymmetric part
    /// (for quadratic `G`, `(d_a g_bc - d_b g_ac) v^c`) that drops out against `dx^a dx^b`, so the
    /// symmetrized derivative is used here too.
    pub fn tidal_raw(&self) -> Result<Vec<Vec<Jet>>> {
        self.tidal_impl(false)
    }

    fn tidal_impl(&self, reuse_transpose: bool) -> Result<Vec<Vec<Jet>>> {
        self.require(2, 4, "tidal tensor")?;
        let n = self.n;
        // W_a^d = g_cd U_a^c
        let w: Vec<Vec<Jet>> = (0..n)
            .map(|a| {
                (0..n)
                    .map(|d| {
                        let mut s = self.gab[0][d].mul(&self.uu[a][0]);
                        for c in 1..n {
                            s = s.add(&self.gab[c][d].mul(&self.uu[a][c]));
                        }
                        s
                    })
                    .collect()
            })
            .collect();
        let mut s: Vec<Vec<Jet>> = vec![Vec::with_capacity(n); n];
        for a in 0..n {
            for b in 0..n {
                if reuse_transpose && b < a {
                    let t = s[b][a].clone();
                    s[a].push(t);
                    continue;
                }
                let v2g = self.vf(&self.vf(&self.gab[a][b]));
                let dg = self.ga[b].dx(a).add(&self.ga[a].dx(b)).scale(0.5);
                let vdg = self.vf(&dg);
                let ddg = self.g.dx(a).dx(b);
                let mut guu = w[a][0].mul(&self.uu[b][0]);
                for d in 1..n {
                    guu = guu.add(&w[a][d].mul(&self.uu[b][d]));
                }
                let sab = v2g
                    .sub(&vdg.scale(2.0))
                    .add(&ddg.scale(2.0))
                    .sub(&guu.scale(2.0))
                    .scale(0.5);
                s[a].push(sab);
            }
        }
        Ok(s)
    }

    /// `R_ab^c = (d_a U_b^c - d_b U_a^c - U_a^d D_d U_b^c + U_b^d D_d U_a^c) / 2`,
    /// indexed `r[a][b][c]`, with every ordered pair `(a, b)` evaluated separately.
    pub fn curvature_raw(&self) -> Result<Vec<Vec<Vec<Jet>>>> {
        self.require(2, 4, "curvature")?;
        let n = self.n;
        // dU[a][b][c] = d_a U_b^c, DU[d][b][c] = D_d U_b^c
        let du: Vec<Vec<Vec<Jet>>> = (0..n)
            .map(|a| (0..n).map(|b| (0..n).map(|c| self.uu[b][c].dx(a)).collect()).collect())
            .collect();
        let vu: Vec<Vec<Vec<Jet>>> = (0..n)
            .map(|d| (0..n).map(|b| (0..n).map(|c| self.uu[b][c].dv(d)).collect()).collect())
            .collect();
        // K[a][b][c] = U_a^d D_d U_b^c
        let k: Vec<Vec<Vec<Jet>>> = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        (0..n)
                            .map(|c| {
                                let mut s = self.uu[a][0].mul(&vu[0][b][c]);
                                for d in 1..n {
                                    s = s.add(&self.uu[a][d].mul(&vu[d][b][c]));
                                }
                                s
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let zero = du[0][0][0].scale(0.0).truncate(self.x_order - 2, self.v_order - 4);
        let mut r = vec![vec![vec![zero; n]; n]; n];
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                for c in 0..n {
                    r[a][b][c] = du[a][b][c]
                        .sub(&du[b][a][c])
                        .sub(&k[a][b][c])
                        .add(&k[b][a][c])
                        .scale(0.5);
                }
            }
        }
        Ok(r)
    }

    /// [`Series::curvature_raw`] with the antisymmetry in `(a, b)` imposed.
    pub fn curvature(&self) -> Result<Vec<Vec<Vec<Jet>>>> {
        let mut r = self.curvature_raw()?;
        let n = self.n;
        for a in 0..n {
            for b in (a + 1)..n {
                for c in 0..n {
                    let t = r[a][b][c].sub(&r[b][a][c]).scale(0.5);
                    r[b][a][c] = t.neg();
                    r[a][b][c] = t;
                }
            }
        }
        Ok(r)
    }

    /// Series of the inverse Hessian `g^ab` on the box `(ox, ov)` (within the Hessian's box).
    pub fn inverse_hessian(&self, ox: usize, ov: usize) -> Vec<Vec<Jet>> {
        let n = self.n;
        let a: Vec<Vec<Jet>> = self
            .gab
            .iter()
            .map(|r| r.iter().map(|j| j.truncate(ox, ov)).collect())
            .collect();
        // column by column: g X_col = e_col
        let mut cols = Vec::with_capacity(n);
        for col in 0..n {
            let rhs: Vec<Jet> = (0..n)
                .map(|i| Jet::constant(&self.space, ox.min(self.x_order), ov.min(self.v_order - 2), if i == col { 1.0 } else { 0.0 }))
                .collect();
            cols.push(solve_series(&self.hessian, &a, &rhs));
        }
        (0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect()
    }
}

pub fn values(v: &[Jet]) -> Vec<f64> {
    v.iter().map(Jet::value).collect()
}

pub fn values2(m: &[Vec<Jet>]) -> Vec<Vec<f64>> {
    m.iter().map(|r| values(r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn minkowski_has_no_spray() {
        let g = catalog::minkowski4();
        let p = PhasePoint::new(vec![0.3, 0.1, -0.2, 0.5], vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let s = Series::new(&g.g, &p, 2, 4).unwrap();
        assert!(s.u.iter().all(|j| j.max_abs_coefficient() == 0.0));
        let t = s.tidal().unwrap();
        assert!(t.iter().flatten().all(|j| j.value() == 0.0));
    }

    #[test]
    fn series_inverse() {
        let g = catalog::kapadia();
        let p = PhasePoint::new(vec![1.3, 0.1, -0.2, 0.5], vec![0.3, 1.0, 0.2, -0.4]).unwrap();
        let s = Series::new(&g.g, &p, 2, 4).unwrap();
        let inv = s.inverse_hessian(1, 2);
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = s.gab[i][0].mul(&inv[0][j]);
                for k in 1..4 {
                    acc = acc.add(&s.gab[i][k].mul(&inv[k][j]));
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((acc.value() - want).abs() < 1e-14);
                assert!(acc.add_scalar(-acc.value()).max_abs_coefficient() < 1e-13);
            }
        }
    }
}
