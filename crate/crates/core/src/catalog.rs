//! Built-in defining functions, conformal rescaling and cone sampling.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GeomError, Result};
use crate::expr::{parse_constraint, parse_expression, Constraint, Expr};
use crate::field::ScalarField;
use crate::jet::{field_jet, PhasePoint};
use crate::linalg::{self, matrix};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Provenance {
    Builtin,
    User,
}

impl Provenance {
    pub fn label(&self) -> &'static str {
        match self {
            Provenance::Builtin => "builtin",
            Provenance::User => "user",
        }
    }
}

/// A regular causal geometry: `G` homogeneous of degree `k != 1` in `v`.
#[derive(Clone, Debug)]
pub struct DefiningFunction {
    pub name: String,
    pub n: usize,
    pub k: f64,
    pub g: ScalarField,
    /// Coordinate box the samplers draw base points from.
    pub sample_box: Vec<(f64, f64)>,
    pub provenance: Provenance,
    pub note: String,
    /// Metric components `g_ab(x)` when `G = g_ab v^a v^b / 2`.
    pub metric: Option<Arc<Vec<Vec<Expr>>>>,
}

/// A nonvanishing factor `J`, homogeneous of degree `q`.
#[derive(Clone, Debug)]
pub struct ConformalFactor {
    pub j: ScalarField,
    pub q: f64,
}

impl ConformalFactor {
    pub fn parse(src: &str, n: usize, q: f64) -> Result<Self> {
        Ok(ConformalFactor {
            j: ScalarField::parse(src, n, &[])?,
            q,
        })
    }

    /// `1/J`, of degree `-q`.
    pub fn inverse(&self) -> Result<ConformalFactor> {
        let e = Expr::num(1.0) / self.j.expr().clone();
        Ok(ConformalFactor {
            j: ScalarField::new(self.j.dim(), e, self.j.domain().to_vec())?,
            q: -self.q,
        })
    }
}

impl DefiningFunction {
    pub fn new(name: &str, g: ScalarField, k: f64, sample_box: Vec<(f64, f64)>) -> Result<Self> {
        if !k.is_finite() || (k - 1.0).abs() < 1e-12 {
            return Err(GeomError::validation(format!(
                "homogeneity degree must differ from 1 (got {k})"
            )));
        }
        if sample_box.len() != g.dim() {
            return Err(GeomError::validation(format!(
                "sample box has {} ranges for dimension {}",
                sample_box.len(),
                g.dim()
            )));
        }
        if sample_box.iter().any(|&(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(GeomError::validation("sample box ranges must be finite with lo <= hi"));
        }
        Ok(DefiningFunction {
            name: name.to_string(),
            n: g.dim(),
            k,
            g,
            sample_box,
            provenance: Provenance::Builtin,
            note: String::new(),
            metric: None,
        })
    }

    /// User geometry from an expression and inequality list.
    pub fn from_expression(
        name: &str,
        n: usize,
        k: f64,
        expression: &str,
        domain: &[&str],
        sample_box: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let g = ScalarField::parse(expression, n, domain)?;
        let mut d = DefiningFunction::new(name, g, k, sample_box)?;
        d.provenance = Provenance::User;
        d.note = "defined by configuration".into();
        Ok(d)
    }

    fn with_note(mut self, note: &str) -> Self {
        self.note = note.to_string();
        self
    }

    pub fn value(&self, p: &PhasePoint) -> Result<f64> {
        self.g.value(p)
    }

    pub fn contains(&self, p: &PhasePoint) -> bool {
        self.g.contains(p)
    }

    pub fn domain_description(&self) -> String {
        let d = self.g.domain();
        if d.is_empty() {
            "all (x, v) with v != 0".into()
        } else {
            d.iter().map(|c| c.source.clone()).collect::<Vec<_>>().join(", ")
        }
    }

    pub fn is_quadratic(&self) -> bool {
        self.metric.is_some()
    }

    /// Condition number of the velocity Hessian at `p`.
    pub fn hessian_condition(&self, p: &PhasePoint) -> Result<f64> {
        let jet = field_jet(&self.g, p, 0, 2)?;
        let n = self.n;
        let mut h = vec![vec![0.0; n]; n];
        for (a, row) in h.iter_mut().enumerate() {
            for (b, slot) in row.iter_mut().enumerate() {
                let mut e = vec![0u8; n];
                e[a] += 1;
                e[b] += 1;
                *slot = jet.partial(&vec![0; n], &e).unwrap_or(0.0);
            }
        }
        Ok(linalg::condition_number(&matrix(&h)))
    }
}

/// `G = g_ab(x) v^a v^b / 2` from a symmetric matrix of coefficient expressions.
pub fn make_quadratic(
    name: &str,
    metric: Vec<Vec<Expr>>,
    domain: Vec<Constraint>,
    sample_box: Vec<(f64, f64)>,
) -> Result<DefiningFunction> {
    let n = metric.len();
    if n < 2 || metric.iter().any(|r| r.len() != n) {
        return Err(GeomError::validation("metric must be a square matrix of size >= 2"));
    }
    if metric.iter().flatten().any(Expr::has_velocity) {
        return Err(GeomError::validation("metric coefficients must depend on x only"));
    }
    let mut terms: Vec<Expr> = Vec::new();
    for a in 0..n {
        for b in a..n {
            let c = &metric[a][b];
            if *c == Expr::Num(0.0) {
                continue;
            }
            let w = if a == b { 0.5 } else { 1.0 };
            let vv = if a == b { Expr::v(a).powi(2) } else { Expr::v(a) * Expr::v(b) };
            terms.push(w * c.clone() * vv);
        }
    }
    let expr = terms
        .into_iter()
        .reduce(|acc, t| acc + t)
        .ok_or_else(|| GeomError::validation("metric is identically zero"))?;
    let g = ScalarField::new(n, expr, domain)?;
    let mut d = DefiningFunction::new(name, g, 2.0, sample_box)?;

    // symmetry and regularity, checked at the box center and seeded box points
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut probes = vec![d.sample_box.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect::<Vec<f64>>()];
    for _ in 0..8 {
        probes.push(d.sample_box.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect());
    }
    for x in probes {
        let mut vars = x.clone();
        vars.extend(std::iter::repeat_n(1.0, n));
        if !d.g.contains_state(&vars) {
            continue;
        }
        let mut m = vec![vec![0.0; n]; n];
        for a in 0..n {
            for b in 0..n {
                m[a][b] = metric[a][b].eval(&vars)?;
            }
        }
        for a in 0..n {
            for b in 0..a {
                let scale = 1.0 + m[a][b].abs().max(m[b][a].abs());
                if (m[a][b] - m[b][a]).abs() > 1e-14 * scale {
                    return Err(GeomError::validation(format!(
                        "metric not symmetric: g[{a}][{b}] = {} but g[{b}][{a}] = {} at x = {x:?}",
                        m[a][b], m[b][a]
                    )));
                }
            }
        }
        let cond = linalg::condition_number(&matrix(&m));
        if !cond.is_finite() || cond > linalg::MAX_CONDITION {
            return Err(GeomError::regularity(cond, format!("metric degenerate at x = {x:?}")));
        }
    }
    d.metric = Some(Arc::new(metric));
    Ok(d)
}

fn px(src: &str, n: usize) -> Expr {
    parse_expression(src, n).expect("builtin expression parses")
}

fn constraints(srcs: &[&str], n: usize) -> Vec<Constraint> {
    srcs.iter()
        .map(|s| parse_constraint(s, n).expect("builtin constraint parses"))
        .collect()
}

fn diag_metric(entries: &[&str]) -> Vec<Vec<Expr>> {
    let n = entries.len();
    (0..n)
        .map(|a| {
            (0..n)
                .map(|b| if a == b { px(entries[a], n) } else { Expr::num(0.0) })
                .collect()
        })
        .collect()
}

/// Flat space of signature (+, -, ..., -).
pub fn minkowski(n: usize) -> DefiningFunction {
    let entries: Vec<String> = (0..n).map(|a| if a == 0 { "1".into() } else { "-1".into() }).collect();
    let refs: Vec<&str> = entries.iter().map(String::as_str).collect();
    make_quadratic(
        &format!("minkowski{n}"),
        diag_metric(&refs),
        vec![],
        vec![(-1.0, 1.0); n],
    )
    .expect("minkowski metric is regular")
    .with_note("flat metric diag(1, -1, ..., -1)")
}

pub fn minkowski4() -> DefiningFunction {
    minkowski(4)
}

/// `g = du dv - dx^2 - dy^2 / u` on `u > 0`, coordinates `(u, v, x, y)`.
pub fn kapadia() -> DefiningFunction {
    let n = 4;
    let z = || Expr::num(0.0);
    let metric = vec![
        vec![z(), px("0.5", n), z(), z()],
        vec![px("0.5", n), z(), z(), z()],
        vec![z(), z(), px("-1", n), z()],
        vec![z(), z(), z(), px("-1/x1", n)],
    ];
    make_quadratic(
        "kapadia",
        metric,
        constraints(&["x1 > 0"], n),
        vec![(0.5, 2.0), (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
    )
    .expect("kapadia metric is regular")
    .with_note("plane-wave metric du dv - dx^2 - dy^2/u with closed-form null cones")
}

/// Degree-2 homogenization of the cone `exp(1 - u'/t') + s'/t' = 0`, coordinates `(s, t, u)`.
pub fn wuenschmann_cone() -> DefiningFunction {
    let n = 3;
    let g = ScalarField::new(
        n,
        px("v2^2 - v2*v3 - v2^2*log(-v1/v2)", n),
        constraints(&["v2 > 0", "v1 < 0"], n),
    )
    .expect("valid field");
    DefiningFunction::new("wuenschmann_cone", g, 2.0, vec![(-1.0, 1.0); 3])
        .expect("valid geometry")
        .with_note("non-metric cone field in three dimensions, homogenized as t'^2 (1 - u'/t' - log(-s'/t'))")
}

/// Einstein static universe `dt^2 - 4 |dx|^2 / (1 + |x|^2)^2` (round unit three-sphere).
pub fn frw_like() -> DefiningFunction {
    let c = "-4/(1 + x2^2 + x3^2 + x4^2)^2";
    make_quadratic(
        "frw_like",
        diag_metric(&["1", c, c, c]),
        vec![],
        vec![(0.0, 3.0), (-1.5, 1.5), (-1.5, 1.5), (-1.5, 1.5)],
    )
    .expect("regular metric")
    .with_note("closed FRW with constant scale factor, stereographic chart; refocuses null cones at affine distance pi")
}

/// Generic diagonal metric with polynomial coefficients.
pub fn diag_poly() -> DefiningFunction {
    make_quadratic(
        "diag_poly",
        diag_metric(&[
            "1 + 0.2*x2^2",
            "-(1 + 0.1*x1^2)",
            "-(1 + 0.1*x2*x4 + 0.05*x3^2)",
            "-(2 + x1 + 0.3*x3^2)",
        ]),
        vec![],
        vec![(-1.0, 1.0); 4],
    )
    .expect("regular metric")
    .with_note("diagonal Lorentzian metric with polynomial coefficients")
}

/// `J * G`, of degree `k + q`.
pub fn conformal_rescale(base: &DefiningFunction, factor: &ConformalFactor) -> Result<DefiningFunction> {
    conformal_rescale_named(base, factor, &format!("{}*J", base.name))
}

pub fn conformal_rescale_named(
    base: &DefiningFunction,
    factor: &ConformalFactor,
    name: &str,
) -> Result<DefiningFunction> {
    let p = base.k + factor.q;
    if (p - 1.0).abs() < 1e-12 {
        return Err(GeomError::validation(format!(
            "rescaled degree p = k + q = {p} must differ from 1"
        )));
    }
    if factor.j.dim() != base.n {
        return Err(GeomError::validation("conformal factor dimension mismatch"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    for _ in 0..16 {
        let pt = sample_cone_point(base, &mut rng)?;
        let j = factor.j.value(&pt)?;
        if j == 0.0 || !j.is_finite() {
            return Err(GeomError::domain(format!("conformal factor vanishes at cone point {pt:?}")));
        }
    }
    let g = factor.j.product(&base.g)?;
    let mut d = DefiningFunction::new(name, g, p, base.sample_box.clone())?;
    d.provenance = base.provenance.clone();
    d.note = format!("{} rescaled by J = {} (q = {})", base.name, factor.j.expr(), factor.q);
    Ok(d)
}

/// Minkowski rescaled by a velocity-dependent degree-1 factor (degree 3 overall).
pub fn minkowski4_conformal() -> DefiningFunction {
    let j = ConformalFactor::parse("sqrt(v1^2 + v2^2 + v3^2 + v4^2)*exp(0.1*x3)", 4, 1.0).expect("valid factor");
    conformal_rescale_named(&minkowski4(), &j, "minkowski4_conformal").expect("valid rescale")
}

/// Kapadia rescaled by a velocity-dependent degree-1 factor (degree 3 overall).
pub fn kapadia_conformal() -> DefiningFunction {
    let j = ConformalFactor::parse("sqrt(v1^2 + v2^2 + v3^2 + 2*v4^2)*exp(0.1*x2)", 4, 1.0).expect("valid factor");
    conformal_rescale_named(&kapadia(), &j, "kapadia_conformal").expect("valid rescale")
}

pub fn builtins() -> Vec<DefiningFunction> {
    vec![
        minkowski4(),
        kapadia(),
        wuenschmann_cone(),
        frw_like(),
        diag_poly(),
        minkowski4_conformal(),
        kapadia_conformal(),
    ]
}

pub fn builtin(name: &str) -> Option<DefiningFunction> {
    match name {
        "minkowski4" => Some(minkowski4()),
        "kapadia" => Some(kapadia()),
        "wuenschmann_cone" => Some(wuenschmann_cone()),
        "frw_like" => Some(frw_like()),
        "diag_poly" => Some(diag_poly()),
        "minkowski4_conformal" => Some(minkowski4_conformal()),
        "kapadia_conformal" => Some(kapadia_conformal()),
        _ => None,
    }
}

/// One row of a catalog listing.
#[derive(Clone, Debug, PartialEq)]
pub struct CatalogEntry {
    pub name: String,
    pub n: usize,
    pub k: f64,
    pub domain: String,
    pub provenance: String,
    pub note: String,
}

/// Built-ins plus geometries registered at run time.
#[derive(Default)]
pub struct Registry {
    user: Vec<DefiningFunction>,
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    pub fn register(&mut self, mut g: DefiningFunction) -> Result<()> {
        if builtin(&g.name).is_some() || self.user.iter().any(|u| u.name == g.name) {
            return Err(GeomError::validation(format!("geometry '{}' already registered", g.name)));
        }
        g.provenance = Provenance::User;
        self.user.push(g);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<DefiningFunction> {
        builtin(name).or_else(|| self.user.iter().find(|g| g.name == name).cloned())
    }

    pub fn list(&self) -> Vec<CatalogEntry> {
        builtins()
            .iter()
            .chain(&self.user)
            .map(|g| CatalogEntry {
                name: g.name.clone(),
                n: g.n,
                k: g.k,
                domain: g.domain_description(),
                provenance: g.provenance.label().to_string(),
                note: g.note.clone(),
            })
            .collect()
    }
}

fn unit_vector<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = linalg::norm(&v);
        if (0.1..=1.0).contains(&r) {
            return v.into_iter().map(|c| c / r).collect();
        }
    }
}

/// Samplers skip points whose velocity Hessian is worse conditioned than this.
pub const SAMPLE_MAX_CONDITION: f64 = 1e6;

fn well_conditioned(g: &DefiningFunction, p: &PhasePoint) -> bool {
    g.hessian_condition(p).is_ok_and(|c| c <= SAMPLE_MAX_CONDITION)
}

/// Base point uniform in the sample box, velocity uniform on the unit sphere, inside the domain.
pub fn sample_domain_point<R: Rng>(g: &DefiningFunction, rng: &mut R) -> Result<PhasePoint> {
    for _ in 0..100_000 {
        let x: Vec<f64> = g.sample_box.iter().map(|&(lo, hi)| if hi > lo { rng.random_range(lo..hi) } else { lo }).collect();
        let v = unit_vector(g.n, rng);
        let p = PhasePoint { x, v };
        if g.contains(&p) && g.value(&p).is_ok() && well_conditioned(g, &p) {
            return Ok(p);
        }
    }
    Err(GeomError::domain(format!("no domain points found for '{}'", g.name)))
}

/// Root-polish `G(x, v + tau w) = 0` along `w = g_a` by safeguarded Newton.
pub fn polish_to_cone(g: &DefiningFunction, p: &PhasePoint) -> Result<PhasePoint> {
    let n = g.n;
    let eval = |q: &PhasePoint| -> Result<(f64, Vec<f64>)> {
        let jet = field_jet(&g.g, q, 0, 1)?;
        let grad = (0..n)
            .map(|a| {
                let mut e = vec![0u8; n];
                e[a] = 1;
                jet.partial(&vec![0; n], &e).expect("inside box")
            })
            .collect();
        Ok((jet.value(), grad))
    };
    let (g0, w) = eval(p)?;
    let wn = linalg::norm(&w);
    if wn == 0.0 {
        return Err(GeomError::precondition("g_a vanishes; no polishing direction"));
    }
    let w: Vec<f64> = w.iter().map(|c| c / wn).collect();
    let mut tau = 0.0;
    let mut val = g0;
    let at = |tau: f64| PhasePoint {
        x: p.x.clone(),
        v: p.v.iter().zip(&w).map(|(v, w)| v + tau * w).collect(),
    };
    let vnorm = linalg::norm(&p.v);
    for _ in 0..50 {
        let q = at(tau);
        let (gv, grad) = eval(&q)?;
        val = gv;
        let scale = linalg::norm(&q.v).powf(g.k);
        if gv.abs() <= 1e-13 * scale {
            break;
        }
        let slope = linalg::dot(&grad, &w);
        if slope == 0.0 || !slope.is_finite() {
            return Err(GeomError::domain("polishing stalled on a flat direction"));
        }
        let mut step = (-gv / slope).clamp(-0.5 * vnorm, 0.5 * vnorm);
        let mut accepted = false;
        for _ in 0..30 {
            let trial = at(tau + step);
            if let Ok(tv) = g.value(&trial) {
                if tv.abs() < gv.abs() {
                    tau += step;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(GeomError::domain("polishing could not reduce |G|"));
        }
    }
    let q = at(tau);
    let r = linalg::norm(&q.v);
    let unit = PhasePoint {
        x: q.x,
        v: q.v.iter().map(|c| c / r).collect(),
    };
    let gv = g.value(&unit)?;
    if gv.abs() > 1e-12 {
        return Err(GeomError::domain(format!("polishing ended at |G| = {:.3e}", gv.abs().max(val.abs()))));
    }
    Ok(unit)
}

/// One on-cone point (`|G| <= 1e-12`, unit velocity) from the seeded stream.
pub fn sample_cone_point<R: Rng>(g: &DefiningFunction, rng: &mut R) -> Result<PhasePoint> {
    for _ in 0..1000 {
        let p = sample_domain_point(g, rng)?;
        if let Ok(q) = polish_to_cone(g, &p) {
            if well_conditioned(g, &q) {
                return Ok(q);
            }
        }
    }
    Err(GeomError::domain(format!("cone sampler failed for '{}'", g.name)))
}

/// `count` on-cone points from a ChaCha8 stream seeded with `seed`.
pub fn cone_points(g: &DefiningFunction, count: usize, seed: u64) -> Result<Vec<PhasePoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sample_cone_point(g, &mut rng)).collect()
}

/// `count` domain points (generally off the cone).
pub fn domain_points(g: &DefiningFunction, count: usize, seed: u64) -> Result<Vec<PhasePoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sample_domain_point(g, &mut rng)).collect()
}

/// Max over samples and `t in {1/2, 2, e}` of `|G(x, tv) - t^k G(x, v)| / (1 + |G(x, v)|)`.
pub fn verify_homogeneity(g: &DefiningFunction, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(GeomError::precondition("verify_homogeneity needs at least one sample"));
    }
    let mut worst: f64 = 0.0;
    for p in domain_points(g, samples, seed)? {
        let g0 = g.value(&p)?;
        for t in [0.5, 2.0, std::f64::consts::E] {
            let gt = g.value(&p.scaled(t))?;
            worst = worst.max((gt - t.powf(g.k) * g0).abs() / (1.0 + g0.abs()));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_contract() {
        let names: Vec<String> = Registry::new().list().into_iter().map(|e| e.name).collect();
        for want in ["minkowski4", "kapadia", "wuenschmann_cone", "frw_like"] {
            assert!(names.iter().any(|n| n == want), "{want} missing");
        }
    }

    #[test]
    fn quadratic_rejects_bad_metrics() {
        let n = 2;
        let asym = vec![vec![Expr::num(1.0), px("x1", n)], vec![Expr::num(0.0), Expr::num(-1.0)]];
        assert!(matches!(
            make_quadratic("a", asym, vec![], vec![(0.5, 1.0); 2]),
            Err(GeomError::Validation(_))
        ));
        let degenerate = vec![vec![Expr::num(1.0), Expr::num(0.0)], vec![Expr::num(0.0), Expr::num(0.0)]];
        assert!(matches!(
            make_quadratic("b", degenerate, vec![], vec![(0.0, 1.0); 2]),
            Err(GeomError::Regularity { .. })
        ));
    }

    #[test]
    fn cone_sampler_lands_on_cone() {
        for g in builtins() {
            let pts = cone_points(&g, 5, 7).unwrap();
            for p in pts {
                assert!(g.value(&p).unwrap().abs() <= 1e-12, "{}", g.name);
            }
        }
    }
}
