//! Shadow space `E = ker(alpha) / span(v)` at on-cone points and the generalized Weyl tensor.
//!
//! `E` is realized by `n - 2` vectors annihilated by `g_a` and independent modulo `v`.
//! Tensors on `E` are compared as endomorphisms (raised with `g_E`), which is the
//! level at which conformal invariance holds.

use nalgebra::DMatrix;

use crate::catalog::{conformal_rescale, ConformalFactor, DefiningFunction};
use crate::curvature::{curvature_from, CurvatureData};
use crate::error::{GeomError, Result};
use crate::jet::{evaluate_jets, PhasePoint};
use crate::linalg::{dot, matrix, max_abs, norm, rows, signature, GuardedLu};
use crate::pipeline::Series;

/// Relative comparisons divide by `max(scale, EPS_FLOOR)`.
pub const EPS_FLOOR: f64 = 1e-12;

/// Tolerance on `|G|` for a point to count as on the cone.
pub const CONE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisRule {
    /// Householder completion of `g_a`, then elimination of `v` on the pivot column.
    Householder,
    /// Gram-Schmidt of the projected coordinate vectors, `v` removed first.
    GramSchmidt,
}

#[derive(Clone, Debug)]
pub struct ShadowFrame {
    pub base: PhasePoint,
    pub basis: Vec<Vec<f64>>,
    /// `g_E(e_i, e_j) = g_ab e_i^a e_j^b`.
    pub ge: Vec<Vec<f64>>,
    pub signature: (usize, usize),
    pub det: f64,
    /// Max `|g_a e_i^a| / |g_a|`.
    pub kernel_residual: f64,
    pub rule: BasisRule,
}

impl ShadowFrame {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

fn frame_vectors(w: &[f64], v: &[f64], rule: BasisRule) -> Vec<Vec<f64>> {
    let n = w.len();
    match rule {
        BasisRule::Householder => {
            let wn = norm(w);
            let s = if w[0] >= 0.0 { 1.0 } else { -1.0 };
            let mut u = w.to_vec();
            u[0] += s * wn;
            let uu = dot(&u, &u);
            let q: Vec<Vec<f64>> = (1..n)
                .map(|j| (0..n).map(|i| (if i == j { 1.0 } else { 0.0 }) - 2.0 * u[i] * u[j] / uu).collect())
                .collect();
            let c: Vec<f64> = q.iter().map(|qj| dot(qj, v)).collect();
            let piv = (0..c.len())
                .max_by(|&a, &b| c[a].abs().total_cmp(&c[b].abs()))
                .expect("n >= 2");
            (0..q.len())
                .filter(|&j| j != piv)
                .map(|j| (0..n).map(|i| q[j][i] - c[j] / c[piv] * q[piv][i]).collect())
                .collect()
        }
        BasisRule::GramSchmidt => {
            let wn2 = dot(w, w);
            let mut out: Vec<Vec<f64>> = Vec::new();
            let vn = norm(v);
            let mut ortho: Vec<Vec<f64>> = vec![v.iter().map(|c| c / vn).collect()];
            for i in (0..n).rev() {
                let mut e: Vec<f64> = (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect();
                let ew = dot(&e, w) / wn2;
                for j in 0..n {
                    e[j] -= ew * w[j];
                }
                for o in &ortho {
                    let c = dot(&e, o);
                    for j in 0..n {
                        e[j] -= c * o[j];
                    }
                }
                let en = norm(&e);
                if en > 1e-8 {
                    let e: Vec<f64> = e.iter().map(|c| c / en).collect();
                    ortho.push(e.clone());
                    out.push(e);
                }
                if out.len() == n - 2 {
                    break;
                }
            }
            out
        }
    }
}

pub fn shadow_frame(g: &DefiningFunction, p: &PhasePoint) -> Result<ShadowFrame> {
    shadow_frame_with(g, p, BasisRule::Householder)
}

pub fn shadow_frame_with(g: &DefiningFunction, p: &PhasePoint, rule: BasisRule) -> Result<ShadowFrame> {
    shadow_frame_near(g, p, rule, CONE_TOL)
}

/// As [`shadow_frame_with`], accepting `|G| <= cone_tol` (for states along a flow).
pub fn shadow_frame_near(g: &DefiningFunction, p: &PhasePoint, rule: BasisRule, cone_tol: f64) -> Result<ShadowFrame> {
    let jets = evaluate_jets(&g.g, p, 0, 2)?;
    if jets.value().abs() > cone_tol {
        return Err(GeomError::precondition(format!(
            "shadow space needs an on-cone point (|G| = {:.3e})",
            jets.value().abs()
        )));
    }
    let w = jets.g_a();
    if norm(&w) == 0.0 {
        return Err(GeomError::precondition("g_a vanishes at the point"));
    }
    let basis = frame_vectors(&w, &p.v, rule);
    if basis.len() != p.dim() - 2 {
        return Err(GeomError::regularity(f64::INFINITY, "could not complete a shadow basis"));
    }
    frame_from(p, &jets.g_ab(), &w, basis, rule)
}

fn frame_from(p: &PhasePoint, gab: &[Vec<f64>], w: &[f64], basis: Vec<Vec<f64>>, rule: BasisRule) -> Result<ShadowFrame> {
    let ge = restrict(gab, &basis);
    let m = matrix(&ge);
    GuardedLu::new(&m, "shadow metric g_E")?;
    let wn = norm(w);
    let kernel_residual = basis.iter().map(|e| dot(e, w).abs() / wn).fold(0.0, f64::max);
    Ok(ShadowFrame {
        base: p.clone(),
        signature: signature(&m),
        det: m.determinant(),
        ge,
        basis,
        kernel_residual,
        rule,
    })
}

/// `M(e_i, e_j)` for a bilinear form `M`.
pub fn restrict(m: &[Vec<f64>], basis: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    basis
        .iter()
        .map(|ei| {
            basis
                .iter()
                .map(|ej| {
                    let mut s = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            s += m[a][b] * ei[a] * ej[b];
                        }
                    }
                    s
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct WeylData {
    pub frame: ShadowFrame,
    /// `S_ab e_i^a e_j^b`.
    pub sproj: Vec<Vec<f64>>,
    /// `X = 4 / (n - 2) * tr(T on E)`.
    pub x: f64,
    /// Trace-free part with an index raised: `g_E^-1 Sproj - tr / (n - 2) * I`.
    pub w: Vec<Vec<f64>>,
    /// Lowered form `Sproj - tr / (n - 2) * g_E`.
    pub w_lowered: Vec<Vec<f64>>,
    /// `tr(g_E^-1 Sproj)`.
    pub trace: f64,
    /// Worst relative change of `Sproj`, `X`, `W` under `e_i -> e_i + c v`, `c` in `{-1, 1, 10}`.
    pub quotient_defect: f64,
}

impl WeylData {
    /// `tr(W)` as an endomorphism.
    pub fn trace_defect(&self) -> f64 {
        (0..self.w.len()).map(|i| self.w[i][i]).sum::<f64>().abs()
    }

    /// `|W_ij - W_ji|` of the lowered form.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.w_lowered.len();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                worst = worst.max((self.w_lowered[i][j] - self.w_lowered[j][i]).abs());
            }
        }
        worst
    }

    pub fn norm(&self) -> f64 {
        max_abs(self.w.iter().flatten().copied())
    }
}

struct Projected {
    sproj: Vec<Vec<f64>>,
    x: f64,
    w: Vec<Vec<f64>>,
    w_lowered: Vec<Vec<f64>>,
    trace: f64,
}

fn project(c: &CurvatureData, basis: &[Vec<f64>]) -> Result<Projected> {
    let n = c.s.len();
    let m = basis.len();
    let ge = restrict(&c.g, basis);
    let lu = GuardedLu::new(&matrix(&ge), "shadow metric g_E")?;
    let ginv = lu.inverse();
    let sproj = restrict(&c.s, basis);
    // T lowered with g: T_ab = T_a^c g_cb
    let tl: Vec<Vec<f64>> = (0..n)
        .map(|a| (0..n).map(|b| (0..n).map(|k| c.t[a][k] * c.g[k][b]).sum()).collect())
        .collect();
    let te = restrict(&tl, basis);
    let raised = &ginv * matrix(&sproj);
    let trace = raised.trace();
    let t_trace = (&ginv * matrix(&te)).trace();
    let md = m as f64;
    let w = raised - DMatrix::identity(m, m) * (trace / md);
    let w_lowered: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| sproj[i][j] - trace / md * ge[i][j]).collect())
        .collect();
    Ok(Projected {
        sproj,
        x: 4.0 / md * t_trace,
        w: rows(&w),
        w_lowered,
        trace,
    })
}

fn rel_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let d = max_abs(a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| x - y));
    let s = max_abs(a.iter().flatten().copied()).max(max_abs(b.iter().flatten().copied()));
    d / s.max(1.0)
}

fn weyl_from(c: &CurvatureData, frame: ShadowFrame) -> Result<WeylData> {
    let pr = project(c, &frame.basis)?;
    let v = &frame.base.v;
    let mut defect: f64 = 0.0;
    for shift in [-1.0, 1.0, 10.0] {
        let shifted: Vec<Vec<f64>> = frame
            .basis
            .iter()
            .map(|e| e.iter().zip(v).map(|(a, b)| a + shift * b).collect())
            .collect();
        let q = project(c, &shifted)?;
        defect = defect
            .max(rel_diff(&pr.sproj, &q.sproj))
            .max(rel_diff(&pr.w, &q.w))
            .max((pr.x - q.x).abs() / pr.x.abs().max(1.0));
    }
    Ok(WeylData {
        frame,
        sproj: pr.sproj,
        x: pr.x,
        w: pr.w,
        w_lowered: pr.w_lowered,
        trace: pr.trace,
        quotient_defect: defect,
    })
}

pub fn weyl_tensor(g: &DefiningFunction, p: &PhasePoint) -> Result<WeylData> {
    weyl_tensor_with(g, p, BasisRule::Householder)
}

pub fn weyl_tensor_with(g: &DefiningFunction, p: &PhasePoint, rule: BasisRule) -> Result<WeylData> {
    let frame = shadow_frame_with(g, p, rule)?;
    let s = Series::new(&g.g, p, 2, 4)?;
    weyl_from(&curvature_from(&s)?, frame)
}

/// Sorted real parts of the eigenvalues of `W` (endomorphism form).
pub fn weyl_eigenvalues(w: &WeylData) -> Vec<f64> {
    let m = matrix(&w.w);
    let mut ev: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.re).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[derive(Clone, Debug)]
pub struct ConformalReport {
    pub point: PhasePoint,
    /// Degree of the rescaled function, `p = k + q`.
    pub p: f64,
    pub j: f64,
    pub vj: f64,
    pub v2j: f64,
    pub w: Vec<Vec<f64>>,
    pub w_prime: Vec<Vec<f64>>,
    /// `|W' - W| / max(|W|, EPS_FLOOR)` (max norms, endomorphism form).
    pub weyl_deviation: f64,
    pub x: f64,
    pub x_measured: f64,
    pub x_predicted: f64,
    /// `|X' - X'_pred| / max(1, |X'_pred|)`.
    pub x_law_residual: f64,
    /// `X + 2 V(delta) - delta^2` with `delta = V(J) / ((p - 1) J)`: the printed law with
    /// the sign of `delta^2` flipped, which the classical Ricci transformation confirms.
    pub x_predicted_corrected: f64,
    pub x_law_residual_corrected: f64,
    pub ge_signature: (usize, usize),
    /// Residual of the shared-realization assumptions `g'_a = J g_a`, `g'_E = J g_E`.
    /// A large value means the identification of the two shadow spaces, not the
    /// invariance itself, is in doubt.
    pub identification_residual: f64,
}

/// Weyl tensors and trace scalars of `G` and `J G` at `p`, compared through the
/// common realization `ker(alpha) / span(v)` of both shadow spaces.
pub fn conformal_compare(g: &DefiningFunction, j: &ConformalFactor, p: &PhasePoint) -> Result<ConformalReport> {
    let gp = conformal_rescale(g, j)?;
    let pdeg = gp.k;
    let frame = shadow_frame(g, p)?;
    let s = Series::new(&g.g, p, 2, 4)?;
    let jj = j.j.eval(&s.vars)?;
    let jv = jj.value();
    if jv == 0.0 {
        return Err(GeomError::domain("conformal factor vanishes at the point"));
    }
    let vj = s.vf(&jj);
    let v2j = s.vf(&vj).value();
    let vj = vj.value();
    let w0 = weyl_from(&curvature_from(&s)?, frame.clone())?;

    let sp = Series::new(&gp.g, p, 2, 4)?;
    let cp = curvature_from(&sp)?;
    let ga = crate::pipeline::values(&s.ga);
    let gpa = crate::pipeline::values(&sp.ga);
    let mut ident = max_abs(gpa.iter().zip(&ga).map(|(a, b)| a - jv * b)) / max_abs(gpa.iter().copied()).max(1.0);
    let ge_p = restrict(&cp.g, &frame.basis);
    ident = ident.max(rel_diff(&ge_p, &frame.ge.iter().map(|r| r.iter().map(|c| jv * c).collect()).collect::<Vec<_>>()));
    let frame_p = frame_from(p, &cp.g, &gpa, frame.basis.clone(), frame.rule)?;
    let w1 = weyl_from(&cp, frame_p)?;

    let dev = max_abs(w1.w.iter().flatten().zip(w0.w.iter().flatten()).map(|(a, b)| a - b));
    let weyl_deviation = dev / w0.norm().max(EPS_FLOOR);
    let pm1 = pdeg - 1.0;
    let x_predicted = w0.x + 2.0 / pm1 * v2j / jv - (2.0 * pdeg - 3.0) / (pm1 * pm1) * (vj / jv).powi(2);
    let x_law_residual = (w1.x - x_predicted).abs() / x_predicted.abs().max(1.0);
    let x_predicted_corrected = w0.x + 2.0 / pm1 * v2j / jv - (2.0 * pdeg - 1.0) / (pm1 * pm1) * (vj / jv).powi(2);
    let x_law_residual_corrected = (w1.x - x_predicted_corrected).abs() / x_predicted_corrected.abs().max(1.0);
    Ok(ConformalReport {
        point: p.clone(),
        p: pdeg,
        j: jv,
        vj,
        v2j,
        w: w0.w,
        w_prime: w1.w,
        weyl_deviation,
        x: w0.x,
        x_measured: w1.x,
        x_predicted,
        x_law_residual,
        x_predicted_corrected,
        x_law_residual_corrected,
        ge_signature: frame.signature,
        identification_residual: ident,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn minkowski_frame() {
        let g = catalog::minkowski4();
        let p = PhasePoint::new(vec![0.0; 4], vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let f = shadow_frame(&g, &p).unwrap();
        assert_eq!(f.basis, vec![vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]]);
        assert_eq!(f.ge, vec![vec![-1.0, 0.0], vec![0.0, -1.0]]);
        assert_eq!(f.signature, (0, 2));
        let w = weyl_tensor(&g, &p).unwrap();
        assert_eq!(w.norm(), 0.0);
        assert_eq!(w.x, 0.0);
    }

    #[test]
    fn off_cone_is_rejected() {
        let g = catalog::minkowski4();
        // G = (1 - 0.8) / 2 = 0.1
        let p = PhasePoint::new(vec![0.0; 4], vec![1.0, 0.8f64.sqrt(), 0.0, 0.0]).unwrap();
        assert!(matches!(shadow_frame(&g, &p), Err(GeomError::Precondition(_))));
    }
}
