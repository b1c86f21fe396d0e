//! Dormand-Prince 5(4) with FSAL, elementary step control and the usual
//! fifth-order dense output, forward and backward in time.

use crate::error::{GeomError, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; `None` picks one from the right-hand side.
    pub h0: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            h0: None,
            max_steps: 200_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitFlag {
    Completed,
    /// The right-hand side kept failing (left the domain or hit a singular Hessian).
    StepTooSmall,
    MaxSteps,
}

#[derive(Clone, Debug, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub rhs_failures: usize,
}

/// One accepted step with its dense-output coefficients.
#[derive(Clone, Debug)]
struct Segment {
    t0: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

impl Segment {
    fn eval(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.r;
        let m = r1.len();
        let mut y = vec![0.0; m];
        let mut dy = vec![0.0; m];
        for i in 0..m {
            let a = r4[i] + th1 * r5[i];
            let b = r3[i] + th * a;
            let c = r2[i] + th1 * b;
            y[i] = r1[i] + th * c;
            let da = -r5[i];
            let db = a + th * da;
            let dc = -b + th1 * db;
            dy[i] = (c + th * dc) / self.h;
        }
        (y, dy)
    }
}

/// Accepted-step trajectory with continuous extension.
#[derive(Clone, Debug)]
pub struct Solution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub flag: ExitFlag,
    pub stats: OdeStats,
    segments: Vec<Segment>,
    direction: f64,
}

impl Solution {
    pub fn t_start(&self) -> f64 {
        self.t[0]
    }

    pub fn t_last(&self) -> f64 {
        *self.t.last().expect("initial point stored")
    }

    pub fn completed(&self) -> bool {
        self.flag == ExitFlag::Completed
    }

    fn segment(&self, t: f64) -> Option<&Segment> {
        if self.segments.is_empty() {
            return None;
        }
        let s = self.direction;
        let lo = s * self.t_start();
        let hi = s * self.t_last();
        let tt = s * t;
        let span = (hi - lo).abs().max(1.0);
        if tt < lo - 1e-12 * span || tt > hi + 1e-12 * span {
            return None;
        }
        let idx = self.segments.partition_point(|seg| s * (seg.t0 + seg.h) < tt);
        Some(&self.segments[idx.min(self.segments.len() - 1)])
    }

    /// Interpolated state at `t` inside the integrated range.
    pub fn at(&self, t: f64) -> Option<Vec<f64>> {
        if self.segments.is_empty() {
            return (t == self.t_start()).then(|| self.y[0].clone());
        }
        self.segment(t).map(|s| s.eval(t).0)
    }

    /// Interpolated state and derivative at `t`.
    pub fn at_with_derivative(&self, t: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        self.segment(t).map(|s| s.eval(t))
    }
}

fn norm_err(err: &[f64], y: &[f64], ynew: &[f64], o: &OdeOptions) -> f64 {
    let m = err.len() as f64;
    let s: f64 = err
        .iter()
        .zip(y.iter().zip(ynew))
        .map(|(e, (a, b))| {
            let sc = o.atol + o.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / m).sqrt()
}

/// Integrate `y' = f(t, y)` from `t0` to `t1` (either direction).
///
/// A right-hand side error halves the step; when the step shrinks below
/// `1e-14 * |t1 - t0|` the run ends with [`ExitFlag::StepTooSmall`] and the
/// trajectory up to that point.
pub fn integrate<F>(mut f: F, t0: f64, y0: &[f64], t1: f64, o: &OdeOptions) -> Result<Solution>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    if !(o.rtol > 0.0 && o.atol >= 0.0) {
        return Err(GeomError::validation("ODE tolerances must be positive"));
    }
    let m = y0.len();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let mut stats = OdeStats::default();
    let mut sol = Solution {
        t: vec![t0],
        y: vec![y0.to_vec()],
        flag: ExitFlag::Completed,
        stats: OdeStats::default(),
        segments: Vec::new(),
        direction: dir,
    };
    if span == 0.0 {
        return Ok(sol);
    }
    let mut k1 = f(t0, y0)?;
    stats.evaluations += 1;
    let hmin = 1e-14 * span.max(1e-300);
    let mut h = match o.h0 {
        Some(h) => h.abs().min(span),
        None => {
            let sc: Vec<f64> = y0.iter().map(|y| o.atol + o.rtol * y.abs()).collect();
            let d0 = (y0.iter().zip(&sc).map(|(y, s)| (y / s).powi(2)).sum::<f64>() / m as f64).sqrt();
            let d1 = (k1.iter().zip(&sc).map(|(y, s)| (y / s).powi(2)).sum::<f64>() / m as f64).sqrt();
            let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            h.min(span).min(0.1 * span.max(1e-3))
        }
    };
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut last_rejected = false;
    let stage = |y: &[f64], h: f64, terms: &[(&[f64], f64)]| -> Vec<f64> {
        let mut out = y.to_vec();
        for (k, c) in terms {
            for i in 0..out.len() {
                out[i] += h * c * k[i];
            }
        }
        out
    };
    loop {
        if sol.t.len() > o.max_steps {
            sol.flag = ExitFlag::MaxSteps;
            break;
        }
        let remaining = (t1 - t) * dir;
        if remaining <= 1e-15 * span {
            break;
        }
        let hs = h.min(remaining) * dir;
        let attempt = (|| -> Result<(Vec<f64>, [Vec<f64>; 7])> {
            let k2 = f(t + C2 * hs, &stage(&y, hs, &[(&k1, A21)]))?;
            let k3 = f(t + C3 * hs, &stage(&y, hs, &[(&k1, A31), (&k2, A32)]))?;
            let k4 = f(t + C4 * hs, &stage(&y, hs, &[(&k1, A41), (&k2, A42), (&k3, A43)]))?;
            let k5 = f(
                t + C5 * hs,
                &stage(&y, hs, &[(&k1, A51), (&k2, A52), (&k3, A53), (&k4, A54)]),
            )?;
            let k6 = f(
                t + hs,
                &stage(&y, hs, &[(&k1, A61), (&k2, A62), (&k3, A63), (&k4, A64), (&k5, A65)]),
            )?;
            let ynew = stage(&y, hs, &[(&k1, A71), (&k3, A73), (&k4, A74), (&k5, A75), (&k6, A76)]);
            let k7 = f(t + hs, &ynew)?;
            Ok((ynew, [k1.clone(), k2, k3, k4, k5, k6, k7]))
        })();
        match attempt {
            Err(_) => {
                stats.evaluations += 6;
                stats.rhs_failures += 1;
                h *= 0.5;
                last_rejected = true;
                if h < hmin {
                    sol.flag = ExitFlag::StepTooSmall;
                    break;
                }
            }
            Ok((ynew, k)) => {
                stats.evaluations += 6;
                let err: Vec<f64> = (0..m)
                    .map(|i| {
                        hs * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                            + E7 * k[6][i])
                    })
                    .collect();
                let e = norm_err(&err, &y, &ynew, o);
                if !e.is_finite() {
                    stats.rejected += 1;
                    h *= 0.2;
                    last_rejected = true;
                    if h < hmin {
                        sol.flag = ExitFlag::StepTooSmall;
                        break;
                    }
                    continue;
                }
                let mut fac = 0.9 * e.max(1e-10).powf(-0.2);
                fac = fac.clamp(0.2, 10.0);
                if e <= 1.0 {
                    let r2: Vec<f64> = (0..m).map(|i| ynew[i] - y[i]).collect();
                    let r3: Vec<f64> = (0..m).map(|i| hs * k[0][i] - r2[i]).collect();
                    let r4: Vec<f64> = (0..m).map(|i| r2[i] - hs * k[6][i] - r3[i]).collect();
                    let r5: Vec<f64> = (0..m)
                        .map(|i| {
                            hs * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i]
                                + D7 * k[6][i])
                        })
                        .collect();
                    sol.segments.push(Segment {
                        t0: t,
                        h: hs,
                        r: [y.clone(), r2, r3, r4, r5],
                    });
                    stats.accepted += 1;
                    t = if (t1 - (t + hs)) * dir <= 1e-15 * span { t1 } else { t + hs };
                    y = ynew;
                    k1 = k[6].clone();
                    sol.t.push(t);
                    sol.y.push(y.clone());
                    if last_rejected {
                        fac = fac.min(1.0);
                    }
                    last_rejected = false;
                    h *= fac;
                } else {
                    stats.rejected += 1;
                    last_rejected = true;
                    h *= fac.min(1.0);
                    if h < hmin {
                        sol.flag = ExitFlag::StepTooSmall;
                        break;
                    }
                }
            }
        }
    }
    sol.stats = stats;
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let o = OdeOptions {
            rtol: 1e-11,
            atol: 1e-13,
            ..Default::default()
        };
        let sol = integrate(|_, y| Ok(vec![y[1], -y[0]]), 0.0, &[0.0, 1.0], 10.0, &o).unwrap();
        assert!(sol.completed());
        let y = sol.y.last().unwrap();
        assert!((y[0] - 10f64.sin()).abs() < 1e-9);
        for &t in &[0.37, 3.3, 7.77] {
            let (y, dy) = sol.at_with_derivative(t).unwrap();
            assert!((y[0] - t.sin()).abs() < 1e-9, "{t}");
            assert!((dy[0] - t.cos()).abs() < 1e-8, "{t}");
        }
    }

    #[test]
    fn backward_and_failure() {
        let o = OdeOptions::default();
        let sol = integrate(|_, y| Ok(vec![y[0]]), 1.0, &[1.0], -1.0, &o).unwrap();
        assert!((sol.y.last().unwrap()[0] - (-2f64).exp()).abs() < 1e-9);
        assert!((sol.at(0.0).unwrap()[0] - (-1f64).exp()).abs() < 1e-9);
        let sol = integrate(
            |t, y| if t > 0.5 { Err(GeomError::domain("wall")) } else { Ok(vec![y[0]]) },
            0.0,
            &[1.0],
            1.0,
            &o,
        )
        .unwrap();
        assert_eq!(sol.flag, ExitFlag::StepTooSmall);
        assert!(sol.t_last() <= 0.5 && sol.t_last() > 0.49);
    }
}
