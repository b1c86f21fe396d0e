//! Acceptance run: one line per criterion, tolerances pinned below.

use std::process::ExitCode;
use std::time::Instant;

use causal_geometry::catalog::{self, ConformalFactor, DefiningFunction};
use causal_geometry::curvature::{connection, curvature, identity_suite};
use causal_geometry::jet::fd::ladder_study;
use causal_geometry::oracle::christoffel_oracle;
use causal_geometry::pipeline::{values, values2, Series};
use causal_geometry::raychaudhuri::{focusing_check, raychaudhuri_residual, vertex_congruence, CongruenceOptions};
use causal_geometry::spray::{integrate_geodesic, spray};
use causal_geometry::weyl::{conformal_compare, weyl_tensor};
use causal_geometry::{evaluate_jets, euler_residuals, Jet, PhasePoint, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ORACLE_TOL: f64 = 1e-8;
const CONE_TOL: f64 = 1e-6;
const IDENTITY_TOL: f64 = 1e-7;
const WEYL_TOL: f64 = 1e-6;
const TRACE_LAW_TOL: f64 = 1e-6;
const RAY_TOL: f64 = 1e-5;
const RHO_TOL: f64 = 1e-6;
const BOUND_SLACK: f64 = 1e-6;

struct Line {
    pass: bool,
    gating: bool,
}

fn report(id: &str, pass: bool, detail: String, t: Instant, budget: Option<f64>) -> Line {
    let secs = t.elapsed().as_secs_f64();
    let in_budget = budget.is_none_or(|b| secs < b);
    let pass = pass && in_budget;
    let tag = if pass { "PASS" } else { "FAIL" };
    let b = budget.map_or(String::new(), |b| format!(" budget {b:.0}s"));
    println!("[{tag}] {id}: {detail} ({secs:.2}s{b})");
    Line { pass, gating: true }
}

fn info(id: &str, detail: String) -> Line {
    println!("[INFO] {id}: {detail}");
    Line { pass: true, gating: false }
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1.0)
}

fn oracle_worst(g: &DefiningFunction) -> Result<[f64; 3]> {
    let metric = g.metric.as_ref().expect("quadratic entry");
    let mut w = [0.0f64; 3];
    for p in catalog::cone_points(g, 100, 7)? {
        let lc = christoffel_oracle(metric, &p.x)?;
        let s = Series::new(&g.g, &p, 2, 4)?;
        let n = p.dim();
        let u = values(&s.u);
        let want = lc.geodesic_acceleration(&p.v);
        let su = want.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for a in 0..n {
            w[0] = w[0].max(rel(u[a], want[a], su));
        }
        let uu = values2(&s.uu);
        for b in 0..n {
            let mut eb = vec![0.0; n];
            eb[b] = 1.0;
            let want = lc.gamma_apply(&eb, &p.v);
            for a in 0..n {
                w[1] = w[1].max(rel(uu[b][a], want[a], 1.0));
            }
        }
        let st = values2(&s.tidal()?);
        let want = lc.tidal_matrix(&p.v);
        let ss = want.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        for a in 0..n {
            for b in 0..n {
                w[2] = w[2].max(rel(st[a][b], want[a][b], ss));
            }
        }
    }
    Ok(w)
}

fn criterion1() -> Result<Line> {
    let t = Instant::now();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for g in [catalog::minkowski4(), catalog::kapadia(), catalog::diag_poly()] {
        let w = oracle_worst(&g)?;
        worst = worst.max(w[0]).max(w[1]).max(w[2]);
        parts.push(format!("{} u {:.1e} U {:.1e} S {:.1e}", g.name, w[0], w[1], w[2]));
    }
    Ok(report(
        "1 oracle equivalence",
        worst <= ORACLE_TOL,
        format!("worst {worst:.2e} <= {ORACLE_TOL:e}; {}", parts.join(", ")),
        t,
        Some(10.0),
    ))
}

fn criterion2() -> Result<Line> {
    let t = Instant::now();
    let g = catalog::kapadia();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x0 = [1.0, 0.0, 0.0, 0.0];
    let mut worst = 0.0f64;
    let mut done = 0;
    for _ in 0..50 {
        let mut a: f64 = rng.random_range(0.5..1.5);
        if rng.random_bool(0.5) {
            a = -a;
        }
        let b: f64 = rng.random_range(-1.0..1.0);
        let c: f64 = rng.random_range(-1.0..1.0);
        let p = PhasePoint::new(x0.to_vec(), vec![a, (b * b + c * c) / a, b, c])?;
        let tr = integrate_geodesic(&g, &p, 0.5, 1e-10)?;
        if tr.completed() {
            done += 1;
        }
        let x = &tr.end().x;
        let terms = [
            (x[0] - x0[0]) * (x[1] - x0[1]),
            -(x[2] - x0[2]).powi(2),
            -2.0 * (x[3] - x0[3]).powi(2) / (x[0] + x0[0]),
        ];
        let scale: f64 = terms.iter().map(|t| t.abs()).sum();
        worst = worst.max(terms.iter().sum::<f64>().abs() / scale.max(f64::MIN_POSITIVE));
    }
    Ok(report(
        "2 Kapadia cone",
        worst <= CONE_TOL && done == 50,
        format!("{done}/50 completed, worst normalized residual {worst:.2e} <= {CONE_TOL:e}"),
        t,
        Some(10.0),
    ))
}

fn criterion3() -> Result<Line> {
    let t = Instant::now();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for g in catalog::builtins() {
        let pts = catalog::cone_points(&g, 100, 8)?;
        let mut local = 0.0f64;
        for p in &pts {
            let jets = evaluate_jets(&g.g, p, 0, 3)?;
            let scale = jets.jet().max_abs_coefficient().max(1.0);
            local = local.max(euler_residuals(&jets, g.k).iter().fold(0.0f64, |m, e| m.max(e.abs())) / scale);
            local = local.max(spray(&g, p)?.vg);
            let c = connection(&g, p)?;
            local = local.max(c.contraction_residual).max(c.euler_residual);
            let k = curvature(&g, p)?;
            local = local.max(k.residuals.rg).max(k.residuals.vs).max(k.residuals.vr_s);
        }
        local = local.max(identity_suite(&g, &pts)?.worst.max());
        parts.push(format!("{} {local:.1e}", g.name));
        worst = worst.max(local);
    }
    Ok(report(
        "3 identity suite",
        worst <= IDENTITY_TOL,
        format!("worst {worst:.2e} <= {IDENTITY_TOL:e}; {}", parts.join(", ")),
        t,
        Some(30.0),
    ))
}

fn criterion4() -> Result<Vec<Line>> {
    let t = Instant::now();
    let cases = [
        (catalog::minkowski4(), "2", 0.0),
        (catalog::minkowski4(), "sqrt(v1^2 + v2^2 + v3^2 + v4^2)", 1.0),
        (catalog::kapadia(), "exp(0.3*x1 + 0.2*x3)", 0.0),
        (catalog::kapadia(), "sqrt(v1^2 + v2^2 + v3^2 + 2*v4^2)*exp(0.1*x2)", 1.0),
    ];
    let (mut w_worst, mut printed, mut corrected) = (0.0f64, 0.0f64, 0.0f64);
    for (g, src, q) in &cases {
        let j = ConformalFactor::parse(src, g.n, *q)?;
        for p in catalog::cone_points(g, 20, 12)? {
            let r = conformal_compare(g, &j, &p)?;
            w_worst = w_worst.max(r.weyl_deviation);
            printed = printed.max(r.x_law_residual);
            corrected = corrected.max(r.x_law_residual_corrected);
        }
    }
    let tw = t.elapsed().as_secs_f64();
    let ok = tw < 20.0;
    Ok(vec![
        report(
            "4a Weyl invariance",
            w_worst <= WEYL_TOL && ok,
            format!("max |W' - W| / max(|W|, 1e-12) = {w_worst:.2e} <= {WEYL_TOL:e} over 4 factors x 20 points"),
            t,
            Some(20.0),
        ),
        report(
            "4b trace law as printed",
            printed <= TRACE_LAW_TOL,
            format!("max X' residual {printed:.2e} <= {TRACE_LAW_TOL:e} (coefficient 2p-3 on the (VJ)^2 term)"),
            t,
            None,
        ),
        info(
            "4c trace law, sign-corrected",
            format!("max X' residual {corrected:.2e} with coefficient 2p-1 on the (VJ)^2 term"),
        ),
    ])
}

fn criterion5() -> Result<Line> {
    let t = Instant::now();
    let g = catalog::wuenschmann_cone();
    let pts = catalog::cone_points(&g, 100, 3)?;
    let mut worst = 0.0f64;
    for p in &pts {
        worst = worst.max(weyl_tensor(&g, p)?.norm());
    }
    Ok(report(
        "5 three-dimensional Weyl",
        worst == 0.0,
        format!("max |W| = {worst:e} over {} points", pts.len()),
        t,
        None,
    ))
}

fn criterion6() -> Result<Line> {
    let t = Instant::now();
    let o = CongruenceOptions::default();
    let mut runs: Vec<(DefiningFunction, PhasePoint)> = vec![(
        catalog::minkowski4(),
        PhasePoint::new(vec![0.3, -0.2, 0.1, 0.0], vec![1.0, 0.6, 0.0, -0.8])?,
    )];
    let k = catalog::kapadia();
    for v in [[1.0, 0.5, 0.6, -0.4], [0.7, 0.2, -0.8, 0.3]] {
        // complete the null vector: u' v' = x'^2 + y'^2
        let vv = vec![v[0], (v[2] * v[2] + v[3] * v[3]) / v[0], v[2], v[3]];
        runs.push((k.clone(), PhasePoint::new(vec![1.0, 0.0, 0.0, 0.0], vv)?));
    }
    let w = catalog::wuenschmann_cone();
    for p in catalog::cone_points(&w, 2, 17)? {
        runs.push((w.clone(), p));
    }
    let (mut res, mut rho, mut pts) = (0.0f64, 0.0f64, 0usize);
    let mut parts = Vec::new();
    for (g, p) in &runs {
        let t_end = if g.name == "wuenschmann_cone" { 0.6 } else { 1.0 };
        let c = vertex_congruence(g, p, t_end, &o)?;
        let r = raychaudhuri_residual(&c)?;
        res = res.max(r.max_residual);
        rho = rho.max(r.max_rho);
        pts += r.interior_points;
        parts.push(format!("{} {:.1e}", g.name, r.max_residual));
    }
    Ok(report(
        "6 Raychaudhuri residual",
        res <= RAY_TOL && rho <= RHO_TOL && pts > 0,
        format!(
            "max residual {res:.2e} <= {RAY_TOL:e}, max |rho| {rho:.2e} <= {RHO_TOL:e}, {pts} grid states with t >= {}; {}",
            o.t_min,
            parts.join(", ")
        ),
        t,
        Some(30.0),
    ))
}

fn criterion7() -> Result<Line> {
    let t = Instant::now();
    let g = catalog::frw_like();
    let p = PhasePoint::new(vec![0.0, 1.0, 0.0, 0.0], vec![1.0, -1.0, 0.0, 0.0])?;
    let c = vertex_congruence(&g, &p, 3.4, &CongruenceOptions::default())?;
    let f = focusing_check(&c)?;
    let tc = f.conjugate.unwrap_or(f64::NAN);
    let pass = f.applicable && tc <= f.bound + BOUND_SLACK;
    Ok(report(
        "7 focusing",
        pass,
        format!(
            "theta < 0 first at t0 = {:.3} (theta {:.3e}), conjugate point at {tc:.10} <= bound {:.4e} + {BOUND_SLACK:e}; lambda ratio there {:.1e}",
            f.t0, f.theta0, f.bound, f.lambda_at_conjugate
        ),
        t,
        None,
    ))
}

/// Step-halving on every stored jet entry of `G` up to the largest box the pipeline
/// requests, and on the spray and connection jets built from it.
fn criterion8() -> Result<Line> {
    let t = Instant::now();
    let (mut checked, mut failed, mut flat, mut fourth) = (0usize, 0usize, 0usize, 0usize);
    let mut flat_err = 0.0f64;
    let mut bad: Option<String> = None;
    for g in catalog::builtins() {
        for p in catalog::cone_points(&g, 2, 31)? {
            let gj = |q: &PhasePoint| -> Result<Vec<Jet>> { Ok(vec![evaluate_jets(&g.g, q, 3, 5)?.jet().clone()]) };
            let uj = |q: &PhasePoint| -> Result<Vec<Jet>> {
                let s = Series::new(&g.g, q, 2, 4)?;
                Ok(s.u.iter().chain(s.uu.iter().flatten()).cloned().collect())
            };
            let mut all = ladder_study(gj, &p, 0.02, 4)?;
            all.extend(ladder_study(uj, &p, 0.02, 4)?);
            for (_, ord, o) in all {
                checked += 1;
                if o.exact {
                    flat += 1;
                    flat_err = o.errors.iter().fold(flat_err, |m, e| m.max(*e));
                }
                fourth += usize::from(o.fourth_order);
                if !o.pass {
                    failed += 1;
                    bad.get_or_insert_with(|| format!("{} {ord:?} ratio {:?}", g.name, o.ratio));
                }
            }
        }
    }
    Ok(report(
        "8 jet soundness",
        failed == 0,
        format!(
            "{checked} derivatives: {} with ratio in [3.5, 4.5], {fourth} fourth-order (ratio in [14, 18], h^2 term vanishes), {flat} within rounding at every step (largest error {flat_err:.1e}), {failed} failing{}",
            checked - failed - flat - fourth,
            bad.map_or(String::new(), |b| format!(" (first: {b})"))
        ),
        t,
        None,
    ))
}

fn main() -> ExitCode {
    let total = Instant::now();
    let mut lines = Vec::new();
    let runs: Vec<(&str, Box<dyn Fn() -> Result<Vec<Line>>>)> = vec![
        ("1", Box::new(|| criterion1().map(|l| vec![l]))),
        ("2", Box::new(|| criterion2().map(|l| vec![l]))),
        ("3", Box::new(|| criterion3().map(|l| vec![l]))),
        ("4", Box::new(criterion4)),
        ("5", Box::new(|| criterion5().map(|l| vec![l]))),
        ("6", Box::new(|| criterion6().map(|l| vec![l]))),
        ("7", Box::new(|| criterion7().map(|l| vec![l]))),
        ("8", Box::new(|| criterion8().map(|l| vec![l]))),
    ];
    for (id, f) in runs {
        match f() {
            Ok(ls) => lines.extend(ls),
            Err(e) => {
                println!("[FAIL] {id}: error {e}");
                lines.push(Line { pass: false, gating: true });
            }
        }
    }
    let secs = total.elapsed().as_secs_f64();
    let budget = secs < 120.0;
    println!("[{}] full suite: {secs:.1}s (budget 120s)", if budget { "PASS" } else { "FAIL" });
    let failed = lines.iter().filter(|l| l.gating && !l.pass).count() + usize::from(!budget);
    println!("acceptance: {failed} failing criteria");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
