//! Null geodesic spray `V = v^a d_a + u^a D_a` and its integral curves.

use crate::catalog::DefiningFunction;
use crate::error::{GeomError, Result};
use crate::jet::PhasePoint;
use crate::linalg::{dot, max_abs};
use crate::ode::{self, ExitFlag, OdeOptions, OdeStats};
use crate::pipeline::{values, values2, Series};

#[derive(Clone, Debug)]
pub struct SprayData {
    pub base: PhasePoint,
    /// Vertical components `u^a`.
    pub u: Vec<f64>,
    /// Contact covector `alpha_a = g_a`.
    pub contact: Vec<f64>,
    /// `|u^a g_ab - (G_b - v^c d_c g_b)|_inf / (1 + |G_b|_inf)`.
    pub residual: f64,
    /// `V(G) = v^a G_a + u^a g_a`, relative to the size of its terms.
    pub vg: f64,
    /// 2-norm condition number of `g_ab`.
    pub condition: f64,
}

/// Spray at one phase point.
pub fn spray(g: &DefiningFunction, p: &PhasePoint) -> Result<SprayData> {
    let s = Series::new(&g.g, p, 1, 2)?;
    let n = p.dim();
    let u = values(&s.u);
    let gab = values2(&s.gab);
    let contact = values(&s.ga);
    let big = values(&s.big_ga);
    let mut worst: f64 = 0.0;
    for b in 0..n {
        let lhs: f64 = (0..n).map(|a| u[a] * gab[a][b]).sum();
        let rhs = big[b] - (0..n).map(|c| p.v[c] * s.ga[b].dx(c).value()).sum::<f64>();
        worst = worst.max((lhs - rhs).abs());
    }
    let residual = worst / (1.0 + max_abs(big.iter().copied()));
    let a = dot(&p.v, &big);
    let b = dot(&u, &contact);
    let scale = (0..n)
        .map(|i| (p.v[i] * big[i]).abs() + (u[i] * contact[i]).abs())
        .sum::<f64>()
        .max(1.0);
    Ok(SprayData {
        base: p.clone(),
        u,
        contact,
        residual,
        vg: (a + b).abs() / scale,
        condition: s.hessian.condition,
    })
}

/// `u(x, v)` only, for use inside integrators.
pub fn spray_u(g: &DefiningFunction, p: &PhasePoint) -> Result<Vec<f64>> {
    Ok(values(&Series::new(&g.g, p, 1, 2)?.u))
}

/// Worst `|u(x, t v) - t^2 u(x, v)| / (1 + |t^2 u|)` over `t` in `{1/2, 2}`.
pub fn spray_homogeneity_defect(g: &DefiningFunction, p: &PhasePoint) -> Result<f64> {
    let u = spray_u(g, p)?;
    let mut worst: f64 = 0.0;
    for t in [0.5, 2.0] {
        let ut = spray_u(g, &p.scaled(t))?;
        let want: Vec<f64> = u.iter().map(|c| t * t * c).collect();
        let d = max_abs(ut.iter().zip(&want).map(|(a, b)| a - b));
        worst = worst.max(d / (1.0 + max_abs(want.iter().copied())));
    }
    Ok(worst)
}

#[derive(Clone, Debug)]
pub struct GeodesicTrajectory {
    pub samples: Vec<(f64, PhasePoint)>,
    pub flag: ExitFlag,
    pub stats: OdeStats,
    /// Max `|G|` over the samples.
    pub max_drift: f64,
    /// Max `|dx/dt - v|` of the dense output at the samples.
    pub semispray_defect: f64,
}

impl GeodesicTrajectory {
    pub fn completed(&self) -> bool {
        self.flag == ExitFlag::Completed
    }

    pub fn end(&self) -> &PhasePoint {
        &self.samples.last().expect("initial sample").1
    }
}

fn options(tol: f64) -> OdeOptions {
    OdeOptions {
        rtol: tol,
        atol: tol,
        ..Default::default()
    }
}

/// Integrate `(x', v') = (v, u)` over `[0, t_end]`; samples are the accepted steps.
pub fn integrate_geodesic(g: &DefiningFunction, p0: &PhasePoint, t_end: f64, tol: f64) -> Result<GeodesicTrajectory> {
    integrate_geodesic_at(g, p0, t_end, tol, None)
}

/// As [`integrate_geodesic`], with dense output at the given sample times when supplied.
pub fn integrate_geodesic_at(
    g: &DefiningFunction,
    p0: &PhasePoint,
    t_end: f64,
    tol: f64,
    times: Option<&[f64]>,
) -> Result<GeodesicTrajectory> {
    if !(tol > 0.0) {
        return Err(GeomError::validation("tolerance must be positive"));
    }
    let g0 = g.value(p0)?;
    if g0.abs() > 1e-10 {
        return Err(GeomError::precondition(format!("initial point is off the cone (|G| = {:.3e})", g0.abs())));
    }
    let n = p0.dim();
    let rhs = |_t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let p = PhasePoint::from_state(y);
        let u = spray_u(g, &p)?;
        Ok(p.v.iter().copied().chain(u).collect())
    };
    let sol = ode::integrate(rhs, 0.0, &p0.to_state(), t_end, &options(tol))?;
    let ts: Vec<f64> = match times {
        Some(ts) => ts
            .iter()
            .copied()
            .filter(|&t| {
                let (lo, hi) = if t_end >= 0.0 { (0.0, sol.t_last()) } else { (sol.t_last(), 0.0) };
                t >= lo && t <= hi
            })
            .collect(),
        None => sol.t.clone(),
    };
    let mut samples = Vec::with_capacity(ts.len());
    let mut max_drift: f64 = 0.0;
    let mut defect: f64 = 0.0;
    for &t in &ts {
        let (y, dy) = match sol.at_with_derivative(t) {
            Some(v) => v,
            None => (sol.at(t).expect("inside range"), rhs(t, &sol.y[0])?),
        };
        let p = PhasePoint::from_state(&y);
        max_drift = max_drift.max(g.value(&p).map(f64::abs).unwrap_or(f64::INFINITY));
        defect = defect.max(max_abs((0..n).map(|i| dy[i] - y[n + i])));
        samples.push((t, p));
    }
    Ok(GeodesicTrajectory {
        samples,
        flag: sol.flag,
        stats: sol.stats,
        max_drift,
        semispray_defect: defect,
    })
}

#[derive(Clone, Debug)]
pub struct ConservationReport {
    /// Max `|G|` over the samples.
    pub max_g: f64,
    /// Max `|alpha(V)| = |v^a g_a|`.
    pub max_contact: f64,
    /// Max `|v^a g_a - k G|` (Euler identity along the curve).
    pub max_contact_euler: f64,
}

pub fn conservation_report(traj: &GeodesicTrajectory, g: &DefiningFunction) -> Result<ConservationReport> {
    let mut r = ConservationReport {
        max_g: 0.0,
        max_contact: 0.0,
        max_contact_euler: 0.0,
    };
    for (_, p) in &traj.samples {
        let jets = crate::jet::evaluate_jets(&g.g, p, 0, 1)?;
        let gv = jets.value();
        let alpha = dot(&p.v, &jets.g_a());
        r.max_g = r.max_g.max(gv.abs());
        r.max_contact = r.max_contact.max(alpha.abs());
        r.max_contact_euler = r.max_contact_euler.max((alpha - g.k * gv).abs());
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn minkowski_lines() {
        let g = catalog::minkowski4();
        let s = 0.5f64.sqrt();
        let p = PhasePoint::new(vec![0.0; 4], vec![1.0, s, s, 0.0]).unwrap();
        let sp = spray(&g, &p).unwrap();
        assert!(sp.u.iter().all(|&c| c == 0.0));
        let tr = integrate_geodesic(&g, &p, 1.0, 1e-10).unwrap();
        assert!(tr.completed());
        let e = tr.end();
        for i in 0..4 {
            assert!((e.x[i] - p.v[i]).abs() < 1e-12);
            assert!((e.v[i] - p.v[i]).abs() < 1e-12);
        }
        assert!(conservation_report(&tr, &g).unwrap().max_g <= 1e-12);
    }

    #[test]
    fn rejects_off_cone_start() {
        let g = catalog::minkowski4();
        let p = PhasePoint::new(vec![0.0; 4], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(integrate_geodesic(&g, &p, 1.0, 1e-10), Err(GeomError::Precondition(_))));
    }
}
