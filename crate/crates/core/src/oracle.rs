//! Classical Levi-Civita data for quadratic geometries.
//!
//! Independent of the series pipeline: metric derivatives come from hyper-dual
//! evaluation of the coefficient expressions, and the connection and curvature are
//! assembled from the textbook formulas
//!
//! ```text
//! Gamma^a_bc = g^ad (d_b g_dc + d_c g_db - d_d g_bc) / 2
//! R^a_bcd    = d_c Gamma^a_db - d_d Gamma^a_cb + Gamma^a_ce Gamma^e_db - Gamma^a_de Gamma^e_cb
//! ```
//!
//! with `(R(X, Y) Z)^a = R^a_bcd Z^b X^c Y^d` and `Ric_bd = R^a_bad`.

use nalgebra::DMatrix;

use crate::error::{GeomError, Result};
use crate::expr::Expr;
use crate::jet::HyperDual;
use crate::linalg::{condition_number, MAX_CONDITION};

#[derive(Clone, Debug)]
pub struct LeviCivita {
    pub n: usize,
    pub metric: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
    /// `gamma[a][b][c] = Gamma^a_bc`.
    pub gamma: Vec<Vec<Vec<f64>>>,
    /// `riemann[a][b][c][d] = R^a_bcd`.
    pub riemann: Vec<Vec<Vec<Vec<f64>>>>,
    /// `ricci[b][d] = R^a_bad`.
    pub ricci: Vec<Vec<f64>>,
    pub scalar: f64,
}

fn metric_derivatives(
    metric: &[Vec<Expr>],
    x: &[f64],
) -> Result<(Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<Vec<f64>>>>)> {
    let n = x.len();
    let mut g = vec![vec![0.0; n]; n];
    let mut dg = vec![vec![vec![0.0; n]; n]; n];
    let mut ddg = vec![vec![vec![vec![0.0; n]; n]; n]; n];
    for c in 0..n {
        for d in c..n {
            let mut vars: Vec<HyperDual> = x.iter().map(|&xi| HyperDual::constant(xi)).collect();
            vars[c].e1 = 1.0;
            vars[d].e2 = 1.0;
            vars.extend(std::iter::repeat_n(HyperDual::constant(1.0), n));
            for a in 0..n {
                for b in 0..n {
                    let h = metric[a][b].eval(&vars)?;
                    g[a][b] = h.re;
                    dg[c][a][b] = h.e1;
                    dg[d][a][b] = h.e2;
                    ddg[c][d][a][b] = h.e12;
                    ddg[d][c][a][b] = h.e12;
                }
            }
        }
    }
    Ok((g, dg, ddg))
}

/// Christoffel symbols, Riemann and Ricci tensors of `metric` at `x`.
pub fn christoffel_oracle(metric: &[Vec<Expr>], x: &[f64]) -> Result<LeviCivita> {
    let n = x.len();
    if metric.len() != n || metric.iter().any(|r| r.len() != n) {
        return Err(GeomError::validation("metric size does not match the point"));
    }
    let (g, dg, ddg) = metric_derivatives(metric, x)?;
    let gm = DMatrix::from_fn(n, n, |i, j| g[i][j]);
    let cond = condition_number(&gm);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(GeomError::regularity(cond, "metric is singular"));
    }
    let gi = gm.clone().try_inverse().ok_or_else(|| GeomError::regularity(cond, "metric is singular"))?;

    // lowered symbols L[d][b][c] and their derivatives dL[e][d][b][c]
    let mut low = vec![vec![vec![0.0; n]; n]; n];
    let mut dlow = vec![vec![vec![vec![0.0; n]; n]; n]; n];
    for d in 0..n {
        for b in 0..n {
            for c in 0..n {
                low[d][b][c] = 0.5 * (dg[b][d][c] + dg[c][d][b] - dg[d][b][c]);
                for e in 0..n {
                    dlow[e][d][b][c] = 0.5 * (ddg[e][b][d][c] + ddg[e][c][d][b] - ddg[e][d][b][c]);
                }
            }
        }
    }
    // d_e g^ad = -g^ap d_e g_pq g^qd
    let mut dgi = vec![vec![vec![0.0; n]; n]; n];
    for e in 0..n {
        let de = DMatrix::from_fn(n, n, |i, j| dg[e][i][j]);
        let m = -(&gi * de * &gi);
        for a in 0..n {
            for d in 0..n {
                dgi[e][a][d] = m[(a, d)];
            }
        }
    }
    let mut gamma = vec![vec![vec![0.0; n]; n]; n];
    let mut dgamma = vec![vec![vec![vec![0.0; n]; n]; n]; n]; // [e][a][b][c]
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut s = 0.0;
                for d in 0..n {
                    s += gi[(a, d)] * low[d][b][c];
                }
                gamma[a][b][c] = s;
                for e in 0..n {
                    let mut t = 0.0;
                    for d in 0..n {
                        t += dgi[e][a][d] * low[d][b][c] + gi[(a, d)] * dlow[e][d][b][c];
                    }
                    dgamma[e][a][b][c] = t;
                }
            }
        }
    }
    let mut riemann = vec![vec![vec![vec![0.0; n]; n]; n]; n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut r = dgamma[c][a][d][b] - dgamma[d][a][c][b];
                    for e in 0..n {
                        r += gamma[a][c][e] * gamma[e][d][b] - gamma[a][d][e] * gamma[e][c][b];
                    }
                    riemann[a][b][c][d] = r;
                }
            }
        }
    }
    let mut ricci = vec![vec![0.0; n]; n];
    for b in 0..n {
        for d in 0..n {
            ricci[b][d] = (0..n).map(|a| riemann[a][b][a][d]).sum();
        }
    }
    let mut scalar = 0.0;
    for b in 0..n {
        for d in 0..n {
            scalar += gi[(b, d)] * ricci[b][d];
        }
    }
    Ok(LeviCivita {
        n,
        metric: gm,
        inverse: gi,
        gamma,
        riemann,
        ricci,
        scalar,
    })
}

impl LeviCivita {
    /// `-Gamma^a_bc v^b v^c`.
    pub fn geodesic_acceleration(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|a| {
                let mut s = 0.0;
                for b in 0..n {
                    for c in 0..n {
                        s += self.gamma[a][b][c] * v[b] * v[c];
                    }
                }
                -s
            })
            .collect()
    }

    /// `Gamma(X, Y)^a = Gamma^a_bc X^b Y^c`.
    pub fn gamma_apply(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|a| {
                let mut s = 0.0;
                for b in 0..n {
                    for c in 0..n {
                        s += self.gamma[a][b][c] * x[b] * y[c];
                    }
                }
                s
            })
            .collect()
    }

    /// `(R(X, Y) Z)^a`.
    pub fn riemann_apply(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|a| {
                let mut s = 0.0;
                for b in 0..n {
                    for c in 0..n {
                        for d in 0..n {
                            s += self.riemann[a][b][c][d] * z[b] * x[c] * y[d];
                        }
                    }
                }
                s
            })
            .collect()
    }

    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += self.metric[(a, b)] * x[a] * y[b];
            }
        }
        s
    }

    /// Tidal matrix `g(R(k, e_a) k, e_b)` over the coordinate basis.
    pub fn tidal_matrix(&self, k: &[f64]) -> Vec<Vec<f64>> {
        let n = self.n;
        let basis = |i: usize| -> Vec<f64> { (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect() };
        (0..n)
            .map(|a| {
                let rk = self.riemann_apply(k, &basis(a), k);
                (0..n).map(|b| self.inner(&rk, &basis(b))).collect()
            })
            .collect()
    }

    pub fn ricci_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += self.ricci[a][b] * x[a] * y[b];
            }
        }
        s
    }

    /// Fully lowered Weyl tensor `C_abcd` (needs `n >= 3`).
    pub fn weyl_lowered(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        let n = self.n;
        let g = &self.metric;
        let nf = n as f64;
        let mut out = vec![vec![vec![vec![0.0; n]; n]; n]; n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let r: f64 = (0..n).map(|e| g[(a, e)] * self.riemann[e][b][c][d]).sum();
                        let ric = &self.ricci;
                        let p = (g[(a, c)] * ric[b][d] - g[(a, d)] * ric[b][c] - g[(b, c)] * ric[a][d]
                            + g[(b, d)] * ric[a][c])
                            / (nf - 2.0);
                        let s = self.scalar / ((nf - 1.0) * (nf - 2.0))
                            * (g[(a, c)] * g[(b, d)] - g[(a, d)] * g[(b, c)]);
                        out[a][b][c][d] = r - p + s;
                    }
                }
            }
        }
        out
    }

    /// `C(Y, k, k, X)`, the Weyl analogue of the tidal form `g(R(k, X) k, Y)`.
    pub fn weyl_tidal(&self, k: &[f64], x: &[f64], y: &[f64]) -> f64 {
        let c = self.weyl_lowered();
        let n = self.n;
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                for cc in 0..n {
                    for d in 0..n {
                        s += c[a][b][cc][d] * y[a] * k[b] * k[cc] * x[d];
                    }
                }
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    fn metric(entries: &[&[&str]]) -> Vec<Vec<Expr>> {
        let n = entries.len();
        entries
            .iter()
            .map(|r| r.iter().map(|s| parse_expression(s, n).unwrap()).collect())
            .collect()
    }

    #[test]
    fn constant_metric_is_flat() {
        let m = metric(&[&["1", "0.3"], &["0.3", "-2"]]);
        let lc = christoffel_oracle(&m, &[0.2, -0.4]).unwrap();
        assert!(lc.gamma.iter().flatten().flatten().all(|&c| c == 0.0));
        assert!(lc.riemann.iter().flatten().flatten().flatten().all(|&c| c == 0.0));
    }

    #[test]
    fn round_sphere_curvature() {
        // unit 2-sphere: d theta^2 + sin^2 theta d phi^2 has Ric = g, R = 2
        let m = metric(&[&["1", "0"], &["0", "sin(x1)^2"]]);
        let th: f64 = 0.9;
        let lc = christoffel_oracle(&m, &[th, 0.3]).unwrap();
        assert!((lc.gamma[0][1][1] + th.sin() * th.cos()).abs() < 1e-14);
        assert!((lc.gamma[1][0][1] - th.cos() / th.sin()).abs() < 1e-14);
        assert!((lc.ricci[0][0] - 1.0).abs() < 1e-13);
        assert!((lc.ricci[1][1] - th.sin().powi(2)).abs() < 1e-13);
        assert!((lc.scalar - 2.0).abs() < 1e-13);
    }

    #[test]
    fn kapadia_symbols() {
        // only d_u g_yy = u^-2 is nonzero
        let m = metric(&[
            &["0", "0.5", "0", "0"],
            &["0.5", "0", "0", "0"],
            &["0", "0", "-1", "0"],
            &["0", "0", "0", "-1/x1"],
        ]);
        let u = 1.7;
        let lc = christoffel_oracle(&m, &[u, 0.1, 0.2, 0.3]).unwrap();
        // Gamma^v_yy = g^{vu} (-1/2 d_u g_yy) = 2 * (-1/(2u^2)) = -1/u^2
        assert!((lc.gamma[1][3][3] + 1.0 / (u * u)).abs() < 1e-14);
        // Gamma^y_uy = g^{yy} d_u g_yy / 2 = -u * u^-2 / 2 = -1/(2u)
        assert!((lc.gamma[3][0][3] + 0.5 / u).abs() < 1e-14);
        let nonzero = lc.gamma.iter().flatten().flatten().filter(|c| c.abs() > 0.0).count();
        assert_eq!(nonzero, 3);
    }

    #[test]
    fn conformal_transformation_law() {
        let base = [["1 + 0.1*x2^2", "0", "0"], ["0", "-(1 + x1^2)", "0.2*x3"], ["0", "0.2*x3", "-2"]];
        let j = "exp(0.3*x1 - 0.2*x2*x3)";
        let h: Vec<Vec<&str>> = base.iter().map(|r| r.to_vec()).collect();
        let hm = metric(&h.iter().map(|r| r.as_slice()).collect::<Vec<_>>());
        let jm: Vec<Vec<Expr>> = hm
            .iter()
            .map(|r| r.iter().map(|e| parse_expression(j, 3).unwrap() * e.clone()).collect())
            .collect();
        let x = [0.3, -0.5, 0.8];
        let a = christoffel_oracle(&hm, &x).unwrap();
        let b = christoffel_oracle(&jm, &x).unwrap();
        // d_a log J
        let dl = [0.3, -0.2 * x[2], -0.2 * x[1]];
        for i in 0..3 {
            for p in 0..3 {
                for q in 0..3 {
                    let mut want = a.gamma[i][p][q];
                    let mut raised = 0.0;
                    for d in 0..3 {
                        raised += a.inverse[(i, d)] * dl[d];
                    }
                    want -= 0.5 * a.metric[(p, q)] * raised;
                    if i == q {
                        want += 0.5 * dl[p];
                    }
                    if i == p {
                        want += 0.5 * dl[q];
                    }
                    assert!((b.gamma[i][p][q] - want).abs() < 1e-13);
                }
            }
        }
    }
}
