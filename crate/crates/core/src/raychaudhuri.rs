//! Vertex-cone congruences: Jacobi fields from the linearized spray flow, their
//! expansion, shear and rotation on the shadow space, the Raychaudhuri equation
//! and the focusing bound.
//!
//! The state vector is `[x, v, J_1, J'_1, ..., J_m, J'_m]` with `m = n - 2`.
//! `J'` is the coordinate velocity variation; the covariant derivative along the
//! flow is `J' + J^b U_b^a`.

use nalgebra::DMatrix;

use crate::catalog::DefiningFunction;
use crate::error::{GeomError, Result};
use crate::jet::{evaluate_jets, PhasePoint};
use crate::linalg::{matrix, max_abs, GuardedLu};
use crate::ode::{self, ExitFlag, OdeOptions, OdeStats, Solution};
use crate::pipeline::{values, values2, Series};
use crate::weyl::{restrict, shadow_frame, shadow_frame_near, BasisRule};

/// States farther than this from `G = 0` are not decomposed.
pub const FLOW_CONE_TOL: f64 = 1e-8;

/// Smallest singular value of `J_E`, relative to `nabla J`, below which a state is flagged.
pub const SINGULAR_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
pub struct CongruenceOptions {
    pub tol: f64,
    /// Spacing of the emitted parameter grid.
    pub grid_step: f64,
    /// Vertex exclusion for residuals.
    pub t_min: f64,
}

impl Default for CongruenceOptions {
    fn default() -> Self {
        CongruenceOptions {
            tol: 1e-11,
            grid_step: 1e-3,
            t_min: 0.2,
        }
    }
}

/// Derivative of `(x, v, J_i, J'_i)` under the spray and its linearization.
pub fn jacobi_rhs(g: &DefiningFunction, y: &[f64]) -> Result<Vec<f64>> {
    let n = g.n;
    let p = PhasePoint::from_state(&y[..2 * n]);
    let s = Series::new(&g.g, &p, 2, 3)?;
    let fields = (y.len() - 2 * n) / (2 * n);
    let mut out = Vec::with_capacity(y.len());
    out.extend_from_slice(&p.v);
    out.extend(values(&s.u));
    let dux: Vec<Vec<f64>> = (0..n).map(|a| (0..n).map(|b| s.u[a].dx(b).value()).collect()).collect();
    let duv: Vec<Vec<f64>> = (0..n).map(|a| (0..n).map(|b| s.u[a].dv(b).value()).collect()).collect();
    for i in 0..fields {
        let off = 2 * n + 2 * n * i;
        let j = &y[off..off + n];
        let jd = &y[off + n..off + 2 * n];
        out.extend_from_slice(jd);
        for a in 0..n {
            out.push((0..n).map(|b| dux[a][b] * j[b] + duv[a][b] * jd[b]).sum());
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct CongruenceState {
    pub t: f64,
    pub phase: PhasePoint,
    pub jacobi: Vec<(Vec<f64>, Vec<f64>)>,
    /// Shadow frame basis at the state (re-derived, not transported).
    pub basis: Vec<Vec<f64>>,
    pub ge: Vec<Vec<f64>>,
    pub theta: f64,
    pub sigma: Vec<Vec<f64>>,
    pub rho: Vec<Vec<f64>>,
    pub tr_sigma2: f64,
    pub tr_rho2: f64,
    pub lambda_k: f64,
    pub tr_s: f64,
    /// Jacobi matrix on `E` singular (vertex or conjugate point); derived fields are NaN.
    pub singular: bool,
}

fn state_vector_parts(n: usize, y: &[f64]) -> (PhasePoint, Vec<(Vec<f64>, Vec<f64>)>) {
    let p = PhasePoint::from_state(&y[..2 * n]);
    let fields = (y.len() - 2 * n) / (2 * n);
    let jac = (0..fields)
        .map(|i| {
            let off = 2 * n + 2 * n * i;
            (y[off..off + n].to_vec(), y[off + n..off + 2 * n].to_vec())
        })
        .collect();
    (p, jac)
}

/// Components along `e_1..e_m` of `w` modulo `v` (least squares).
fn shadow_components(basis: &[Vec<f64>], v: &[f64], w: &[f64]) -> Vec<f64> {
    let n = v.len();
    let m = basis.len();
    let a = DMatrix::from_fn(n, m + 1, |i, j| if j < m { basis[j][i] } else { v[i] });
    let b = DMatrix::from_column_slice(n, 1, w);
    let sol = a.svd(true, true).solve(&b, 1e-14).expect("svd with vectors");
    (0..m).map(|i| sol[(i, 0)]).collect()
}

fn trace_square(ginv: &DMatrix<f64>, m: &[Vec<f64>]) -> f64 {
    let r = ginv * matrix(m);
    (&r * &r).trace()
}

/// `theta`, `sigma`, `rho`, `lambda_K` and `tr S` at one state vector.
pub fn expansion_decomposition(g: &DefiningFunction, t: f64, y: &[f64]) -> Result<CongruenceState> {
    let n = g.n;
    let (p, jacobi) = state_vector_parts(n, y);
    let frame = shadow_frame_near(g, &p, BasisRule::Householder, FLOW_CONE_TOL)?;
    let m = frame.dim();
    let s = Series::new(&g.g, &p, 2, 4)?;
    let uu = values2(&s.uu);
    let st = values2(&s.tidal()?);
    let ge = frame.ge.clone();
    let ge_lu = GuardedLu::new(&matrix(&ge), "shadow metric g_E")?;
    let ginv = ge_lu.inverse();
    let tr_s = (&ginv * matrix(&restrict(&st, &frame.basis))).trace();

    let mut je = DMatrix::zeros(m, m);
    let mut ye = DMatrix::zeros(m, m);
    for (i, (j, jd)) in jacobi.iter().enumerate() {
        let cov: Vec<f64> = (0..n).map(|a| jd[a] + (0..n).map(|b| j[b] * uu[b][a]).sum::<f64>()).collect();
        let cj = shadow_components(&frame.basis, &p.v, j);
        let cy = shadow_components(&frame.basis, &p.v, &cov);
        for r in 0..m {
            je[(r, i)] = cj[r];
            ye[(r, i)] = cy[r];
        }
    }
    let lambda_k = je.determinant().abs() * ge_lu_det(&ge).abs().sqrt();
    let nan = vec![vec![f64::NAN; m]; m];
    let singular_state = |lambda_k: f64| CongruenceState {
        t,
        phase: p.clone(),
        jacobi: jacobi.clone(),
        basis: frame.basis.clone(),
        ge: ge.clone(),
        theta: f64::NAN,
        sigma: nan.clone(),
        rho: nan.clone(),
        tr_sigma2: f64::NAN,
        tr_rho2: f64::NAN,
        lambda_k,
        tr_s,
        singular: true,
    };
    // absolute floor too: J = t e is perfectly conditioned at any t
    let smin = je.singular_values().min();
    let scale = ye.amax().max(1.0);
    let jlu = match GuardedLu::new(&je, "shadow Jacobi matrix") {
        Ok(l) if smin > SINGULAR_FLOOR * scale => l,
        _ => return Ok(singular_state(lambda_k)),
    };
    let b = &ye * jlu.inverse();
    let theta = b.trace();
    let bl = matrix(&ge) * &b;
    let md = m as f64;
    let sigma: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| 0.5 * (bl[(i, j)] + bl[(j, i)]) - theta / md * ge[i][j]).collect())
        .collect();
    let rho: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| 0.5 * (bl[(i, j)] - bl[(j, i)])).collect()).collect();
    Ok(CongruenceState {
        t,
        phase: p,
        jacobi,
        basis: frame.basis,
        tr_sigma2: trace_square(&ginv, &sigma),
        tr_rho2: trace_square(&ginv, &rho),
        ge,
        theta,
        sigma,
        rho,
        lambda_k,
        tr_s,
        singular: false,
    })
}

fn ge_lu_det(ge: &[Vec<f64>]) -> f64 {
    matrix(ge).determinant()
}

/// An integrated congruence with its grid states and continuous extension.
pub struct Congruence {
    pub g: DefiningFunction,
    pub states: Vec<CongruenceState>,
    pub flag: ExitFlag,
    pub stats: OdeStats,
    pub grid_step: f64,
    pub t_min: f64,
    solution: Solution,
}

impl Congruence {
    pub fn completed(&self) -> bool {
        self.flag == ExitFlag::Completed
    }

    pub fn t_last(&self) -> f64 {
        self.solution.t_last()
    }

    pub fn state_vector(&self, t: f64) -> Option<Vec<f64>> {
        self.solution.at(t)
    }

    /// `lambda_K^2 = |det g(J_i, J_j)|` straight from the state vector; frame free.
    pub fn lambda_squared(&self, t: f64) -> Result<f64> {
        let y = self
            .solution
            .at(t)
            .ok_or_else(|| GeomError::precondition("parameter outside the integrated range"))?;
        lambda_squared(&self.g, &y)
    }
}

pub fn lambda_squared(g: &DefiningFunction, y: &[f64]) -> Result<f64> {
    let n = g.n;
    let (p, jac) = state_vector_parts(n, y);
    let gab = evaluate_jets(&g.g, &p, 0, 2)?.g_ab();
    let m = jac.len();
    let gram = DMatrix::from_fn(m, m, |i, j| {
        let (a, b) = (&jac[i].0, &jac[j].0);
        (0..n).map(|r| (0..n).map(|c| gab[r][c] * a[r] * b[c]).sum::<f64>()).sum::<f64>()
    });
    Ok(gram.determinant().abs())
}

/// Integrate the congruence from arbitrary initial data, sampling a grid
/// `t0 + k h` (toward `t1`).
pub fn integrate_congruence(g: &DefiningFunction, t0: f64, y0: &[f64], t1: f64, o: &CongruenceOptions) -> Result<Congruence> {
    if !(o.grid_step > 0.0) {
        return Err(GeomError::validation("grid step must be positive"));
    }
    let opts = OdeOptions {
        rtol: o.tol,
        atol: o.tol,
        ..Default::default()
    };
    let sol = ode::integrate(|_t, y| jacobi_rhs(g, y), t0, y0, t1, &opts)?;
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let reach = (sol.t_last() - t0).abs();
    let count = (reach / o.grid_step + 1e-9).floor() as usize;
    let mut states = Vec::with_capacity(count + 1);
    for k in 0..=count {
        let t = t0 + dir * k as f64 * o.grid_step;
        let y = sol.at(t).expect("grid inside integrated range");
        match expansion_decomposition(g, t, &y) {
            Ok(s) => states.push(s),
            Err(GeomError::Precondition(_)) | Err(GeomError::Regularity { .. }) | Err(GeomError::Domain(_)) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(Congruence {
        g: g.clone(),
        states,
        flag: sol.flag,
        stats: sol.stats.clone(),
        grid_step: o.grid_step,
        t_min: o.t_min,
        solution: sol,
    })
}

/// All null geodesics through `p0.x`, with Jacobi data `J_i(0) = 0`, `J'_i(0) = e_i`.
pub fn vertex_congruence(g: &DefiningFunction, p0: &PhasePoint, t_end: f64, o: &CongruenceOptions) -> Result<Congruence> {
    let frame = shadow_frame(g, p0)?;
    let n = g.n;
    let mut y = p0.to_state();
    for e in &frame.basis {
        y.extend(std::iter::repeat_n(0.0, n));
        y.extend_from_slice(e);
    }
    integrate_congruence(g, 0.0, &y, t_end, o)
}

fn d1(f: &[f64], k: usize, h: f64) -> f64 {
    (-f[k + 2] + 8.0 * f[k + 1] - 8.0 * f[k - 1] + f[k - 2]) / (12.0 * h)
}

#[derive(Clone, Debug, Default)]
pub struct RaychaudhuriReport {
    /// Max `|theta' + tr rho^2 + tr sigma^2 + theta^2 / (n - 2) - tr S|` for `t >= t_min`.
    pub max_residual: f64,
    /// Max `|rho|` over all regular states.
    pub max_rho: f64,
    /// Max `|theta_B - d/dt log lambda_K| / (1 + |theta|)` for `t >= t_min`.
    pub max_theta_mismatch: f64,
    pub interior_points: usize,
    /// Per-state residual (NaN where not evaluated).
    pub residuals: Vec<f64>,
}

pub fn raychaudhuri_residual(c: &Congruence) -> Result<RaychaudhuriReport> {
    let st = &c.states;
    if st.len() < 5 {
        return Err(GeomError::precondition("need at least five grid states"));
    }
    let h = (st[1].t - st[0].t).abs();
    let dir = (st[1].t - st[0].t).signum();
    let theta: Vec<f64> = st.iter().map(|s| s.theta).collect();
    let logl: Vec<f64> = st.iter().map(|s| s.lambda_k.ln()).collect();
    let mut rep = RaychaudhuriReport {
        residuals: vec![f64::NAN; st.len()],
        ..Default::default()
    };
    for s in st.iter().filter(|s| !s.singular) {
        rep.max_rho = rep.max_rho.max(max_abs(s.rho.iter().flatten().copied()));
    }
    let m = st[0].basis.len() as f64;
    for k in 2..st.len().saturating_sub(2) {
        if (st[k].t - st[0].t).abs() < c.t_min || (k - 2..=k + 2).any(|i| st[i].singular) {
            continue;
        }
        let dtheta = dir * d1(&theta, k, h);
        let s = &st[k];
        let r = (dtheta + s.tr_rho2 + s.tr_sigma2 + s.theta * s.theta / m - s.tr_s).abs();
        rep.residuals[k] = r;
        rep.max_residual = rep.max_residual.max(r);
        let tl = dir * d1(&logl, k, h);
        rep.max_theta_mismatch = rep.max_theta_mismatch.max((s.theta - tl).abs() / (1.0 + s.theta.abs()));
        rep.interior_points += 1;
    }
    Ok(rep)
}

#[derive(Clone, Debug)]
pub struct FocusingReport {
    /// False when no state has `theta < 0` or `tr S > 0` on the window.
    pub applicable: bool,
    pub reason: Option<String>,
    pub t0: f64,
    pub theta0: f64,
    /// `t0 - (n - 2) / theta(t0)`.
    pub bound: f64,
    pub conjugate: Option<f64>,
    /// `lambda_K` at the located point relative to its maximum on the run.
    pub lambda_at_conjugate: f64,
    pub within_bound: bool,
    /// Max positive second difference of `lambda_K^(1/(n-2))` where `tr S <= 0`.
    pub max_concavity_violation: f64,
}

/// Bisect for the kink of `lambda_K^(1/(n-2))` in `[a, b]` on the sign of its
/// central-difference derivative.
pub fn locate_conjugate(c: &Congruence, a: f64, b: f64, tol: f64) -> Result<f64> {
    let h = 1e-5;
    let m = c.states.first().map_or(1, |s| s.basis.len()) as f64;
    let lo_t = c.solution.t_start().min(c.t_last());
    let hi_t = c.solution.t_start().max(c.t_last());
    let root = |t: f64| -> Result<f64> { Ok(c.lambda_squared(t)?.powf(0.5 / m)) };
    let phi = |t: f64| -> Result<f64> {
        let (t1, t2) = ((t - h).max(lo_t), (t + h).min(hi_t));
        Ok((root(t2)? - root(t1)?) / (t2 - t1))
    };
    let dir = (c.t_last() - c.solution.t_start()).signum();
    let (mut lo, mut hi) = (a, b);
    if dir * phi(lo)? > 0.0 || dir * phi(hi)? < 0.0 {
        return Err(GeomError::precondition("bracket does not contain a minimum of lambda_K"));
    }
    while (hi - lo).abs() > tol {
        let mid = 0.5 * (lo + hi);
        if dir * phi(mid)? <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// First conjugate point of the congruence after its start (a minimum of
/// `lambda_K` that drops to the singular level), if any.
pub fn first_conjugate(c: &Congruence, after: f64, tol: f64) -> Result<Option<(f64, f64)>> {
    let st = &c.states;
    let lmax = st.iter().map(|s| s.lambda_k).fold(0.0, f64::max);
    let dir = (c.t_last() - c.solution.t_start()).signum();
    for k in 1..st.len().saturating_sub(1) {
        if dir * (st[k].t - after) <= 0.0 {
            continue;
        }
        let (a, b, cc) = (st[k - 1].lambda_k, st[k].lambda_k, st[k + 1].lambda_k);
        if b <= a && b <= cc && b < 1e-3 * lmax {
            let t = locate_conjugate(c, st[k - 1].t, st[k + 1].t, tol)?;
            let rel = c.lambda_squared(t)?.sqrt() / lmax.max(f64::MIN_POSITIVE);
            return Ok(Some((t, rel)));
        }
    }
    Ok(None)
}

pub fn focusing_check(c: &Congruence) -> Result<FocusingReport> {
    let st = &c.states;
    let m = st.first().map_or(1, |s| s.basis.len()) as f64;
    let mut rep = FocusingReport {
        applicable: false,
        reason: None,
        t0: f64::NAN,
        theta0: f64::NAN,
        bound: f64::NAN,
        conjugate: None,
        lambda_at_conjugate: f64::NAN,
        within_bound: false,
        max_concavity_violation: 0.0,
    };
    let f: Vec<f64> = st.iter().map(|s| s.lambda_k.powf(1.0 / m)).collect();
    // concave only between zeros; stop at the first conjugate point
    let cut = first_conjugate(c, st.first().map_or(0.0, |s| s.t), 1e-10)?.map(|(t, _)| t);
    let dir = (c.t_last() - c.solution.t_start()).signum();
    for k in 1..st.len().saturating_sub(1) {
        if cut.is_some_and(|t| dir * (st[k + 1].t - t) >= 0.0) {
            break;
        }
        if st[k - 1..=k + 1].iter().all(|s| s.tr_s <= 0.0) {
            let d2 = f[k + 1] - 2.0 * f[k] + f[k - 1];
            rep.max_concavity_violation = rep.max_concavity_violation.max(d2);
        }
    }
    let Some(k0) = st.iter().position(|s| !s.singular && s.theta < 0.0) else {
        rep.reason = Some("theta never negative on the run; bound not triggered".into());
        return Ok(rep);
    };
    rep.t0 = st[k0].t;
    rep.theta0 = st[k0].theta;
    rep.bound = rep.t0 - m / rep.theta0;
    rep.conjugate = first_conjugate(c, rep.t0, 1e-10)?.map(|(t, l)| {
        rep.lambda_at_conjugate = l;
        t
    });
    let window_end = rep.conjugate.unwrap_or(c.t_last());
    if st[k0..].iter().take_while(|s| s.t <= window_end).any(|s| s.tr_s > 0.0) {
        rep.reason = Some("tr S > 0 on the window; energy condition fails, bound not applicable".into());
        return Ok(rep);
    }
    rep.applicable = true;
    rep.within_bound = rep.conjugate.is_some_and(|t| t <= rep.bound + 1e-6);
    if rep.conjugate.is_none() {
        rep.reason = Some("no conjugate point inside the integrated range".into());
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn flat_cone_expands_as_two_over_t() {
        let g = catalog::minkowski4();
        let p = PhasePoint::new(vec![0.0; 4], vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let c = vertex_congruence(&g, &p, 2.0, &CongruenceOptions::default()).unwrap();
        let last = c.states.last().unwrap();
        assert!((last.t - 2.0).abs() < 1e-12);
        assert!((last.theta - 1.0).abs() < 1e-9);
        assert!(max_abs(last.sigma.iter().flatten().copied()) < 1e-9);
        assert!(c.states[0].singular);
        let y = c.state_vector(1.0).unwrap();
        let d = jacobi_rhs(&g, &y).unwrap();
        assert!(d[8..].iter().skip(4).step_by(8).all(|&x| x == 0.0));
        let y2: Vec<f64> = y.iter().enumerate().map(|(i, v)| if i >= 8 { 2.0 * v } else { *v }).collect();
        let d2 = jacobi_rhs(&g, &y2).unwrap();
        assert!(d.iter().zip(&d2).skip(8).all(|(a, b)| 2.0 * a == *b));
    }
}
