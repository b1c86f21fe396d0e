//! Ehresmann connection, curvature `R_ab^c`, tidal tensor `S_ab` and their identities.
//!
//! Residuals are reported relative to the largest magnitude among the terms being
//! compared, floored at 1 so that flat geometries report absolute rounding.

use crate::catalog::DefiningFunction;
use crate::error::Result;
use crate::jet::{Jet, PhasePoint};
use crate::linalg::max_abs;
use crate::pipeline::{values, values2, Series};

pub use crate::oracle::{christoffel_oracle, LeviCivita};

fn rel(res: f64, scale: f64) -> f64 {
    res / scale.max(1.0)
}

#[derive(Clone, Debug)]
pub struct ConnectionData {
    pub base: PhasePoint,
    pub u: Vec<f64>,
    /// `U[b][a] = U_b^a = -D_b u^a / 2` (row `b`, column `a`).
    pub uu: Vec<Vec<f64>>,
    /// `U_b^a g_a - G_b`.
    pub contraction_residual: f64,
    /// `v^b U_b^a + u^a`.
    pub euler_residual: f64,
    pub condition: f64,
}

impl ConnectionData {
    /// Horizontal lift `H_a = d_a - U_a^b D_b` as the vertical correction `-U_a^b`.
    pub fn horizontal(&self, a: usize) -> Vec<f64> {
        self.uu[a].iter().map(|c| -c).collect()
    }
}

pub fn connection(g: &DefiningFunction, p: &PhasePoint) -> Result<ConnectionData> {
    let s = Series::new(&g.g, p, 1, 3)?;
    connection_from(&s)
}

fn connection_from(s: &Series) -> Result<ConnectionData> {
    let n = s.n;
    let u = values(&s.u);
    let uu = values2(&s.uu);
    let ga = values(&s.ga);
    let big = values(&s.big_ga);
    let v = &s.point.v;
    let mut c_res: f64 = 0.0;
    let mut c_scale: f64 = max_abs(big.iter().copied());
    let mut e_res: f64 = 0.0;
    let mut e_scale: f64 = max_abs(u.iter().copied());
    for b in 0..n {
        let t: f64 = (0..n).map(|a| uu[b][a] * ga[a]).sum();
        c_scale = c_scale.max(max_abs((0..n).map(|a| uu[b][a] * ga[a])));
        c_res = c_res.max((t - big[b]).abs());
    }
    for a in 0..n {
        let t: f64 = (0..n).map(|b| v[b] * uu[b][a]).sum();
        e_scale = e_scale.max(max_abs((0..n).map(|b| v[b] * uu[b][a])));
        e_res = e_res.max((t + u[a]).abs());
    }
    Ok(ConnectionData {
        base: s.point.clone(),
        u,
        uu,
        contraction_residual: rel(c_res, c_scale),
        euler_residual: rel(e_res, e_scale),
        condition: s.hessian.condition,
    })
}

/// Worst relative `|U(x, t v) - t U(x, v)|` for `t` in `{1/2, 2}`.
pub fn connection_homogeneity_defect(g: &DefiningFunction, p: &PhasePoint) -> Result<f64> {
    let base = connection(g, p)?.uu;
    let scale = max_abs(base.iter().flatten().copied());
    let mut worst: f64 = 0.0;
    for t in [0.5, 2.0] {
        let c = connection(g, &p.scaled(t))?.uu;
        let d = max_abs(c.iter().flatten().zip(base.iter().flatten()).map(|(a, b)| a - t * b));
        worst = worst.max(rel(d, t * scale));
    }
    Ok(worst)
}

#[derive(Clone, Debug, Default)]
pub struct CurvatureResiduals {
    /// `R_ab^c g_c`.
    pub rg: f64,
    /// `v^a S_ab` (meaningful on the cone).
    pub vs: f64,
    /// `2 v^a R_ab^c - S_b^c`.
    pub vr_s: f64,
    /// `T_a^c g_cb - S_ab`.
    pub t_s: f64,
    /// `T_a^b - 2 v^c R_ca^b`, the two formulas for `T`.
    pub t_vr: f64,
    /// Antisymmetric part of the per-pair evaluation of `S_ab`.
    pub s_symmetry_defect: f64,
    /// `R_ab^c + R_ba^c` of the raw per-pair evaluation.
    pub r_antisymmetry_defect: f64,
}

impl CurvatureResiduals {
    pub fn max(&self) -> f64 {
        [
            self.rg,
            self.vs,
            self.vr_s,
            self.t_s,
            self.t_vr,
            self.s_symmetry_defect,
            self.r_antisymmetry_defect,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct CurvatureData {
    pub base: PhasePoint,
    /// `r[a][b][c] = R_ab^c`, antisymmetric in `(a, b)`.
    pub r: Vec<Vec<Vec<f64>>>,
    /// Symmetric `S_ab`.
    pub s: Vec<Vec<f64>>,
    /// `t[a][b] = T_a^b = V(U_a^b) + H_a u^b - U_a^c U_c^b`.
    pub t: Vec<Vec<f64>>,
    /// Velocity Hessian `g_ab` and its inverse at the point.
    pub g: Vec<Vec<f64>>,
    pub g_inv: Vec<Vec<f64>>,
    pub residuals: CurvatureResiduals,
}

impl CurvatureData {
    /// `S_b^c = S_ba g^ac`.
    pub fn s_mixed(&self) -> Vec<Vec<f64>> {
        let n = self.s.len();
        (0..n)
            .map(|b| (0..n).map(|c| (0..n).map(|a| self.s[b][a] * self.g_inv[a][c]).sum()).collect())
            .collect()
    }
}

pub fn curvature(g: &DefiningFunction, p: &PhasePoint) -> Result<CurvatureData> {
    let s = Series::new(&g.g, p, 2, 4)?;
    curvature_from(&s)
}

pub(crate) fn curvature_from(s: &Series) -> Result<CurvatureData> {
    let n = s.n;
    let v = s.point.v.clone();
    let raw_r = s.curvature_raw()?;
    let raw_s = s.tidal_raw()?;
    let rr: Vec<Vec<Vec<f64>>> = raw_r.iter().map(|m| values2(m)).collect();
    let mut r = rr.clone();
    let mut r_defect: f64 = 0.0;
    for a in 0..n {
        for b in (a + 1)..n {
            for c in 0..n {
                r_defect = r_defect.max((rr[a][b][c] + rr[b][a][c]).abs());
                let t = 0.5 * (rr[a][b][c] - rr[b][a][c]);
                r[a][b][c] = t;
                r[b][a][c] = -t;
            }
        }
    }
    let sr = values2(&raw_s);
    let mut st = vec![vec![0.0; n]; n];
    let mut s_defect: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            st[a][b] = 0.5 * (sr[a][b] + sr[b][a]);
            s_defect = s_defect.max((sr[a][b] - sr[b][a]).abs() * 0.5);
        }
    }
    let gab = values2(&s.gab);
    let ga = values(&s.ga);
    let g_inv = crate::linalg::rows(&s.hessian.inverse());

    // T_a^b = V(U_a^b) + H_a u^b - U_a^c U_c^b
    let uu = values2(&s.uu);
    let mut t = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..n {
            let vu = s.vf(&s.uu[a][b]).value();
            let hu = s.hf(a, &s.u[b]).value();
            let quad: f64 = (0..n).map(|c| uu[a][c] * uu[c][b]).sum();
            t[a][b] = vu + hu - quad;
        }
    }

    let r_scale = max_abs(r.iter().flatten().flatten().copied());
    let s_scale = max_abs(st.iter().flatten().copied());
    let mut res = CurvatureResiduals {
        r_antisymmetry_defect: rel(r_defect, r_scale),
        s_symmetry_defect: rel(s_defect, s_scale),
        ..Default::default()
    };
    let mut acc: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let terms = (0..n).map(|c| r[a][b][c] * ga[c]);
            scale = scale.max(max_abs(terms.clone()));
            acc = acc.max(terms.sum::<f64>().abs());
        }
    }
    res.rg = rel(acc, scale);
    let (mut acc, mut scale) = (0.0f64, s_scale);
    for b in 0..n {
        acc = acc.max((0..n).map(|a| v[a] * st[a][b]).sum::<f64>().abs());
        scale = scale.max(max_abs((0..n).map(|a| v[a] * st[a][b])));
    }
    res.vs = rel(acc, scale);

    let data = CurvatureData {
        base: s.point.clone(),
        r,
        s: st,
        t,
        g: gab,
        g_inv,
        residuals: CurvatureResiduals::default(),
    };
    let sm = data.s_mixed();
    let (mut acc, mut scale) = (0.0f64, max_abs(sm.iter().flatten().copied()));
    let (mut acc_t, mut scale_t) = (0.0f64, max_abs(data.t.iter().flatten().copied()));
    for b in 0..n {
        for c in 0..n {
            let vr: f64 = 2.0 * (0..n).map(|a| v[a] * data.r[a][b][c]).sum::<f64>();
            scale = scale.max(vr.abs());
            acc = acc.max((vr - sm[b][c]).abs());
            acc_t = acc_t.max((data.t[b][c] - vr).abs());
            scale_t = scale_t.max(vr.abs());
        }
    }
    res.vr_s = rel(acc, scale);
    res.t_vr = rel(acc_t, scale_t);
    let (mut acc, mut scale) = (0.0f64, s_scale);
    for a in 0..n {
        for b in 0..n {
            let tl: f64 = (0..n).map(|c| data.t[a][c] * data.g[c][b]).sum();
            scale = scale.max(tl.abs());
            acc = acc.max((tl - data.s[a][b]).abs());
        }
    }
    res.t_s = rel(acc, scale);
    Ok(CurvatureData { residuals: res, ..data })
}

/// Worst relative degree defect of `R` (degree 1) and `S` (degree `k`) for `t` in `{1/2, 2}`.
pub fn curvature_homogeneity_defect(g: &DefiningFunction, p: &PhasePoint) -> Result<f64> {
    let c = curvature(g, p)?;
    let rs = max_abs(c.r.iter().flatten().flatten().copied());
    let ss = max_abs(c.s.iter().flatten().copied());
    let mut worst: f64 = 0.0;
    for t in [0.5, 2.0] {
        let d = curvature(g, &p.scaled(t))?;
        let dr = max_abs(d.r.iter().flatten().flatten().zip(c.r.iter().flatten().flatten()).map(|(a, b)| a - t * b));
        let ds = max_abs(d.s.iter().flatten().zip(c.s.iter().flatten()).map(|(a, b)| a - t.powf(g.k) * b));
        worst = worst.max(rel(dr, t * rs)).max(rel(ds, t.powf(g.k) * ss));
    }
    Ok(worst)
}

/// Max relative residuals of the differential identities at one point.
#[derive(Clone, Debug, Default)]
pub struct IdentityResiduals {
    /// `D_[a S_b]^c - 3 R_ab^c`.
    pub ds_r: f64,
    /// `D_[a R_bc]^d`.
    pub dr: f64,
    /// `H_[a R_bc]^d + R_[ab^e D_c] U_e^d`.
    pub bianchi: f64,
    /// `R_ab^c g_c`.
    pub rg: f64,
    /// `v^a S_ab`.
    pub vs: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        [self.ds_r, self.dr, self.bianchi, self.rg, self.vs].into_iter().fold(0.0, f64::max)
    }

    fn merge(&mut self, o: &IdentityResiduals) {
        self.ds_r = self.ds_r.max(o.ds_r);
        self.dr = self.dr.max(o.dr);
        self.bianchi = self.bianchi.max(o.bianchi);
        self.rg = self.rg.max(o.rg);
        self.vs = self.vs.max(o.vs);
    }
}

#[derive(Clone, Debug)]
pub struct IdentityReport {
    pub points: usize,
    pub worst: IdentityResiduals,
    pub per_point: Vec<IdentityResiduals>,
}

/// Differential identities at one on-cone point, from jets of `G` of order (3, 5).
pub fn identities_at(g: &DefiningFunction, p: &PhasePoint) -> Result<IdentityResiduals> {
    let s = Series::new(&g.g, p, 3, 5)?;
    let n = s.n;
    let r = s.curvature()?;
    let st = s.tidal()?;
    let ginv = s.inverse_hessian(1, 1);
    let v = &p.v;
    // S_b^c = S_ba g^ac
    let smix: Vec<Vec<Jet>> = (0..n)
        .map(|b| {
            (0..n)
                .map(|c| {
                    let mut acc = st[b][0].mul(&ginv[0][c]);
                    for a in 1..n {
                        acc = acc.add(&st[b][a].mul(&ginv[a][c]));
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let rv: Vec<Vec<Vec<f64>>> = r.iter().map(|m| values2(m)).collect();
    let r_scale = max_abs(rv.iter().flatten().flatten().copied());
    let mut out = IdentityResiduals::default();

    // D_[a S_b]^c = 3 R_ab^c
    let (mut acc, mut scale) = (0.0f64, 3.0 * r_scale);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let da = smix[b][c].dv(a).value();
                let db = smix[a][c].dv(b).value();
                scale = scale.max(da.abs()).max(db.abs());
                acc = acc.max((0.5 * (da - db) - 3.0 * rv[a][b][c]).abs());
            }
        }
    }
    out.ds_r = rel(acc, scale);

    // cyclic sums over (a, b, c) with weight 1/3
    let dr: Vec<Vec<Vec<Vec<f64>>>> = (0..n)
        .map(|e| (0..n).map(|a| (0..n).map(|b| (0..n).map(|c| r[a][b][c].dv(e).value()).collect()).collect()).collect())
        .collect();
    let hr: Vec<Vec<Vec<Vec<f64>>>> = (0..n)
        .map(|e| (0..n).map(|a| (0..n).map(|b| (0..n).map(|c| s.hf(e, &r[a][b][c]).value()).collect()).collect()).collect())
        .collect();
    // DU[c][e][d] = D_c U_e^d
    let du: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|c| (0..n).map(|e| (0..n).map(|d| s.uu[e][d].dv(c).value()).collect()).collect())
        .collect();
    let (mut acc_d, mut scale_d) = (0.0f64, 0.0f64);
    let (mut acc_b, mut scale_b) = (0.0f64, 0.0f64);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let cyc = [(a, b, c), (b, c, a), (c, a, b)];
                    let mut sd = 0.0;
                    let mut sb = 0.0;
                    for &(i, j, k) in &cyc {
                        let t = dr[i][j][k][d];
                        sd += t;
                        scale_d = scale_d.max(t.abs());
                        let h = hr[i][j][k][d];
                        let q: f64 = (0..n).map(|e| rv[i][j][e] * du[k][e][d]).sum();
                        sb += h + q;
                        scale_b = scale_b.max(h.abs()).max(q.abs());
                    }
                    acc_d = acc_d.max((sd / 3.0).abs());
                    acc_b = acc_b.max((sb / 3.0).abs());
                }
            }
        }
    }
    out.dr = rel(acc_d, scale_d);
    out.bianchi = rel(acc_b, scale_b);

    let ga = values(&s.ga);
    let (mut acc, mut scale) = (0.0f64, 0.0f64);
    for a in 0..n {
        for b in 0..n {
            let terms = (0..n).map(|c| rv[a][b][c] * ga[c]);
            scale = scale.max(max_abs(terms.clone()));
            acc = acc.max(terms.sum::<f64>().abs());
        }
    }
    out.rg = rel(acc, scale);
    let sv = values2(&st);
    let (mut acc, mut scale) = (0.0f64, max_abs(sv.iter().flatten().copied()));
    for b in 0..n {
        let terms = (0..n).map(|a| v[a] * sv[a][b]);
        scale = scale.max(max_abs(terms.clone()));
        acc = acc.max(terms.sum::<f64>().abs());
    }
    out.vs = rel(acc, scale);
    Ok(out)
}

pub fn identity_suite(g: &DefiningFunction, points: &[PhasePoint]) -> Result<IdentityReport> {
    let mut worst = IdentityResiduals::default();
    let mut per_point = Vec::with_capacity(points.len());
    for p in points {
        let r = identities_at(g, p)?;
        worst.merge(&r);
        per_point.push(r);
    }
    Ok(IdentityReport {
        points: points.len(),
        worst,
        per_point,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn flat_space_is_flat() {
        let g = catalog::minkowski4();
        let p = PhasePoint::new(vec![0.1, 0.2, 0.3, 0.4], vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let c = connection(&g, &p).unwrap();
        assert!(c.uu.iter().flatten().all(|&x| x == 0.0));
        let k = curvature(&g, &p).unwrap();
        assert!(k.r.iter().flatten().flatten().all(|&x| x == 0.0));
        assert!(k.s.iter().flatten().all(|&x| x == 0.0));
        assert!(k.t.iter().flatten().all(|&x| x == 0.0));
        assert_eq!(identities_at(&g, &p).unwrap().max(), 0.0);
    }
}
