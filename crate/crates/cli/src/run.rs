//! Dispatch of a configured run over its point set.

use std::time::Instant;

use causal_geometry::catalog::{self, ConformalFactor, DefiningFunction};
use causal_geometry::curvature::{connection, curvature, identities_at};
use causal_geometry::raychaudhuri::{focusing_check, raychaudhuri_residual, vertex_congruence, CongruenceOptions};
use causal_geometry::spray::{conservation_report, integrate_geodesic, spray};
use causal_geometry::weyl::{conformal_compare, weyl_eigenvalues, weyl_tensor};
use causal_geometry::{GeomError, PhasePoint};
use serde_json::{json, Value};

use crate::config::{ConfigError, Operation, RunConfig};
use crate::report::{num, nums, RunReport, Tally};

pub enum RunError {
    Config(ConfigError),
    Runtime(String),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

fn point_value(p: &PhasePoint) -> Value {
    json!({ "x": nums(&p.x), "v": nums(&p.v) })
}

fn geometry_value(g: &DefiningFunction) -> Value {
    json!({
        "name": g.name,
        "n": g.n,
        "k": num(g.k),
        "domain": g.domain_description(),
        "provenance": g.provenance.label(),
        "note": g.note,
    })
}

/// Normalized closed-form cone residual for Kapadia geodesics from `x0`.
fn kapadia_cone_residual(x0: &[f64], x: &[f64]) -> f64 {
    let terms = [
        (x[0] - x0[0]) * (x[1] - x0[1]),
        -(x[2] - x0[2]).powi(2),
        -2.0 * (x[3] - x0[3]).powi(2) / (x[0] + x0[0]),
    ];
    let scale: f64 = terms.iter().map(|t| t.abs()).sum();
    if scale == 0.0 {
        return 0.0;
    }
    terms.iter().sum::<f64>().abs() / scale
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    g: &'a DefiningFunction,
    factor: Option<ConformalFactor>,
    tally: Tally,
    records: Vec<Value>,
    table: Vec<Value>,
}

impl Ctx<'_> {
    fn check(&mut self, name: &str, default: f64, value: f64) {
        let tol = self.cfg.tolerance(name, default);
        self.tally.push(name, tol, value);
    }

    fn eval(&mut self, i: usize, p: &PhasePoint) -> Result<(), GeomError> {
        let s = spray(self.g, p)?;
        self.check("spray_residual", 1e-9, s.residual);
        self.check("vg", 1e-10, s.vg);
        self.records.push(json!({
            "index": i,
            "point": point_value(p),
            "G": num(self.g.value(p)?),
            "g_a": nums(&s.contact),
            "u": nums(&s.u),
            "hessian_condition": num(s.condition),
            "spray_residual": num(s.residual),
            "vg": num(s.vg),
        }));
        Ok(())
    }

    fn geodesic(&mut self, i: usize, p: &PhasePoint) -> Result<(), GeomError> {
        let it = &self.cfg.integrator;
        let tr = integrate_geodesic(self.g, p, it.t_end, it.tol)?;
        let c = conservation_report(&tr, self.g)?;
        let end = tr.end().clone();
        self.check("incomplete", 0.0, if tr.completed() { 0.0 } else { 1.0 });
        self.check("g_drift", 1e-8, c.max_g);
        self.check("semispray_defect", 1e-8, tr.semispray_defect);
        let mut rec = json!({
            "index": i,
            "start": point_value(p),
            "completed": tr.completed(),
            "flag": format!("{:?}", tr.flag),
            "t_last": num(tr.samples.last().map_or(0.0, |s| s.0)),
            "end": point_value(&end),
            "g_drift": num(c.max_g),
            "contact_drift": num(c.max_contact),
            "semispray_defect": num(tr.semispray_defect),
            "accepted_steps": tr.stats.accepted,
        });
        if self.g.name == "kapadia" {
            let r = kapadia_cone_residual(&p.x, &end.x);
            self.check("kapadia_cone", 1e-6, r);
            rec["kapadia_cone"] = num(r);
        }
        self.records.push(rec);
        Ok(())
    }

    fn invariants(&mut self, i: usize, p: &PhasePoint) -> Result<(), GeomError> {
        let c = connection(self.g, p)?;
        let k = curvature(self.g, p)?;
        let id = identities_at(self.g, p)?;
        let r = &k.residuals;
        let vals = [
            ("vg", spray(self.g, p)?.vg),
            ("u_g_contraction", c.contraction_residual),
            ("v_u_euler", c.euler_residual),
            ("r_g", r.rg),
            ("v_s", r.vs),
            ("v_r_s", r.vr_s),
            ("t_s", r.t_s),
            ("t_v_r", r.t_vr),
            ("s_symmetry", r.s_symmetry_defect),
            ("r_antisymmetry", r.r_antisymmetry_defect),
            ("d_s_r", id.ds_r),
            ("d_r", id.dr),
            ("bianchi", id.bianchi),
        ];
        let mut rec = json!({ "index": i, "point": point_value(p) });
        for (name, v) in vals {
            self.check(name, 1e-7, v);
            rec[name] = num(v);
        }
        self.records.push(rec);
        Ok(())
    }

    fn weyl(&mut self, i: usize, p: &PhasePoint) -> Result<(), GeomError> {
        let w = weyl_tensor(self.g, p)?;
        self.check("trace_defect", 1e-9, w.trace_defect());
        self.check("symmetry_defect", 1e-9, w.symmetry_defect());
        self.check("quotient_defect", 1e-9, w.quotient_defect);
        if self.g.n == 3 {
            self.check("weyl_norm_n3", 0.0, w.norm());
        }
        self.records.push(json!({
            "index": i,
            "point": point_value(p),
            "eigenvalues": nums(&weyl_eigenvalues(&w)),
            "x": num(w.x),
            "norm": num(w.norm()),
            "signature": [w.frame.signature.0, w.frame.signature.1],
            "trace_defect": num(w.trace_defect()),
            "symmetry_defect": num(w.symmetry_defect()),
            "quotient_defect": num(w.quotient_defect),
        }));
        Ok(())
    }

    fn conformal(&mut self, i: usize, p: &PhasePoint) -> Result<(), GeomError> {
        let j = self.factor.as_ref().expect("checked before dispatch");
        let r = conformal_compare(self.g, j, p)?;
        self.check("weyl_deviation", 1e-6, r.weyl_deviation);
        self.check("x_law_corrected", 1e-6, r.x_law_residual_corrected);
        self.check("identification_residual", 1e-10, r.identification_residual);
        let tol = self.cfg.tolerance("x_law_printed", 1e-6);
        self.tally.info("x_law_printed", tol, r.x_law_residual);
        self.records.push(json!({
            "index": i,
            "point": point_value(p),
            "p": num(r.p),
            "j": num(r.j),
            "vj": num(r.vj),
            "v2j": num(r.v2j),
            "weyl_deviation": num(r.weyl_deviation),
            "x": num(r.x),
            "x_measured": num(r.x_measured),
            "x_predicted_printed": num(r.x_predicted),
            "x_predicted_corrected": num(r.x_predicted_corrected),
            "x_law_printed": num(r.x_law_residual),
            "x_law_corrected": num(r.x_law_residual_corrected),
            "identification_residual": num(r.identification_residual),
        }));
        Ok(())
    }

    fn raychaudhuri(&mut self, i: usize, p: &PhasePoint) -> Result<(), GeomError> {
        let it = &self.cfg.integrator;
        let o = CongruenceOptions {
            tol: it.tol,
            grid_step: it.grid,
            t_min: it.t_min,
        };
        let c = vertex_congruence(self.g, p, it.t_end, &o)?;
        let r = raychaudhuri_residual(&c)?;
        let f = focusing_check(&c)?;
        self.check("raychaudhuri_residual", 1e-5, r.max_residual);
        self.check("rotation", 1e-6, r.max_rho);
        self.check("theta_mismatch", 1e-5, r.max_theta_mismatch);
        self.check("concavity", 1e-7, f.max_concavity_violation);
        if f.applicable {
            // missing conjugate point inside the window is not a violation
            let over = f.conjugate.map_or(0.0, |t| (t - f.bound).max(0.0));
            self.check("focusing_bound", 1e-6, over);
        }
        for (k, s) in c.states.iter().enumerate() {
            self.table.push(json!({
                "trajectory": i,
                "t": num(s.t),
                "theta": num(s.theta),
                "tr_sigma2": num(s.tr_sigma2),
                "tr_rho2": num(s.tr_rho2),
                "lambda_k": num(s.lambda_k),
                "tr_s": num(s.tr_s),
                "residual": num(r.residuals[k]),
            }));
        }
        self.records.push(json!({
            "index": i,
            "vertex": point_value(p),
            "completed": c.completed(),
            "t_last": num(c.t_last()),
            "states": c.states.len(),
            "interior_points": r.interior_points,
            "max_residual": num(r.max_residual),
            "max_rho": num(r.max_rho),
            "max_theta_mismatch": num(r.max_theta_mismatch),
            "focusing": {
                "applicable": f.applicable,
                "reason": f.reason,
                "t0": num(f.t0),
                "theta0": num(f.theta0),
                "bound": num(f.bound),
                "conjugate": f.conjugate.map_or(Value::Null, num),
                "lambda_at_conjugate": num(f.lambda_at_conjugate),
                "within_bound": f.within_bound,
                "max_concavity_violation": num(f.max_concavity_violation),
            },
        }));
        Ok(())
    }
}

pub fn run(op: Operation, cfg: &RunConfig, g: &DefiningFunction) -> Result<RunReport, RunError> {
    let start = Instant::now();
    cfg.validate()?;
    let factor = cfg.conformal_factor(g.n)?;
    if op == Operation::ConformalCheck && factor.is_none() {
        return Err(ConfigError("conformal-check needs a [conformal] section".into()).into());
    }
    let points = if !cfg.points.explicit.is_empty() {
        cfg.explicit_points(g.n)?
    } else if op == Operation::Eval {
        catalog::domain_points(g, cfg.points.count, cfg.points.seed).map_err(|e| RunError::Runtime(format!("sampling: {e}")))?
    } else {
        catalog::cone_points(g, cfg.points.count, cfg.points.seed).map_err(|e| RunError::Runtime(format!("sampling: {e}")))?
    };
    let mut ctx = Ctx {
        cfg,
        g,
        factor,
        tally: Tally::default(),
        records: Vec::new(),
        table: Vec::new(),
    };
    let mut errors = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let out = match op {
            Operation::Eval => ctx.eval(i, p),
            Operation::Geodesic => ctx.geodesic(i, p),
            Operation::Invariants => ctx.invariants(i, p),
            Operation::Weyl => ctx.weyl(i, p),
            Operation::ConformalCheck => ctx.conformal(i, p),
            Operation::Raychaudhuri => ctx.raychaudhuri(i, p),
        };
        if let Err(e) = out {
            errors.push(json!({ "index": i, "point": point_value(p), "error": e.to_string() }));
        }
    }
    let tables = if ctx.table.is_empty() { Vec::new() } else { vec![("congruence".to_string(), ctx.table)] };
    Ok(RunReport {
        operation: op.name().to_string(),
        config: serde_json::to_value(cfg).expect("config serializes"),
        geometry: geometry_value(g),
        records: ctx.records,
        invariants: ctx.tally.finish(),
        errors,
        tables,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}
