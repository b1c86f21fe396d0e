//! Run configuration: a TOML file plus command-line overrides.

use std::collections::BTreeMap;
use std::path::Path;

use causal_geometry::catalog::{ConformalFactor, DefiningFunction, Registry};
use causal_geometry::PhasePoint;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operation {
    Eval,
    Geodesic,
    Invariants,
    Weyl,
    ConformalCheck,
    Raychaudhuri,
}

impl Operation {
    pub fn name(self) -> &'static str {
        match self {
            Operation::Eval => "eval",
            Operation::Geodesic => "geodesic",
            Operation::Invariants => "invariants",
            Operation::Weyl => "weyl",
            Operation::ConformalCheck => "conformal-check",
            Operation::Raychaudhuri => "raychaudhuri",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Either a catalog name or a user expression.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub builtin: Option<String>,
    pub name: Option<String>,
    pub n: Option<usize>,
    pub k: Option<f64>,
    pub expression: Option<String>,
    #[serde(default)]
    pub domain: Vec<String>,
    pub sample_box: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConformalSpec {
    pub expression: String,
    #[serde(default)]
    pub q: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitPoint {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointsSpec {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_count")]
    pub count: usize,
    /// Used instead of the sampler when non-empty.
    #[serde(default)]
    pub explicit: Vec<ExplicitPoint>,
}

fn default_seed() -> u64 {
    1
}

fn default_count() -> usize {
    10
}

impl Default for PointsSpec {
    fn default() -> Self {
        PointsSpec {
            seed: default_seed(),
            count: default_count(),
            explicit: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_grid")]
    pub grid: f64,
    #[serde(default = "default_t_min")]
    pub t_min: f64,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_t_end() -> f64 {
    0.5
}

fn default_grid() -> f64 {
    1e-3
}

fn default_t_min() -> f64 {
    0.2
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        IntegratorSpec {
            tol: default_tol(),
            t_end: default_t_end(),
            grid: default_grid(),
            t_min: default_t_min(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<String>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub operation: Option<Operation>,
    #[serde(default)]
    pub geometry: GeometrySpec,
    pub conformal: Option<ConformalSpec>,
    #[serde(default)]
    pub points: PointsSpec,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    /// Per-invariant tolerance overrides, keyed by invariant name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Flag values that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub geometry: Option<String>,
    pub seed: Option<u64>,
    pub points: Option<usize>,
    pub tol: Option<f64>,
    pub out: Option<String>,
    pub format: Option<Format>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl RunConfig {
    pub fn parse(src: &str) -> Result<RunConfig, ConfigError> {
        toml::from_str(src).map_err(|e| ConfigError(format!("config parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::parse(&src).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(g) = &o.geometry {
            self.geometry = GeometrySpec {
                builtin: Some(g.clone()),
                ..Default::default()
            };
        }
        if let Some(s) = o.seed {
            self.points.seed = s;
        }
        if let Some(c) = o.points {
            self.points.count = c;
            self.points.explicit.clear();
        }
        if let Some(t) = o.tol {
            self.integrator.tol = t;
        }
        if let Some(p) = &o.out {
            self.output.path = Some(p.clone());
        }
        if let Some(f) = o.format {
            self.output.format = f;
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let i = &self.integrator;
        let positive = [("integrator.tol", i.tol), ("integrator.t_end", i.t_end), ("integrator.grid", i.grid)];
        for (k, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError(format!("{k} must be positive and finite, got {v}")));
            }
        }
        if !(i.t_min.is_finite() && i.t_min >= 0.0) {
            return Err(ConfigError(format!("integrator.t_min must be non-negative, got {}", i.t_min)));
        }
        for (k, v) in &self.tolerances {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(ConfigError(format!("tolerances.{k} must be non-negative, got {v}")));
            }
        }
        if self.points.explicit.is_empty() && self.points.count == 0 {
            return Err(ConfigError("points.count must be at least 1".into()));
        }
        Ok(())
    }

    /// The user geometry described by `[geometry]`, if it is not a builtin reference.
    pub fn user_geometry(&self) -> Result<Option<DefiningFunction>, ConfigError> {
        let g = &self.geometry;
        let Some(expr) = &g.expression else {
            if g.n.is_some() || g.k.is_some() || !g.domain.is_empty() || g.sample_box.is_some() {
                return Err(ConfigError("geometry: n, k, domain and sample_box need an expression".into()));
            }
            return Ok(None);
        };
        if g.builtin.is_some() {
            return Err(ConfigError("geometry: give either builtin or expression, not both".into()));
        }
        let name = g.name.clone().unwrap_or_else(|| "user".into());
        let n = g.n.ok_or_else(|| ConfigError("geometry.n is required with an expression".into()))?;
        let k = g.k.ok_or_else(|| ConfigError("geometry.k is required with an expression".into()))?;
        let sample_box = match &g.sample_box {
            Some(b) => b.iter().map(|r| (r[0], r[1])).collect(),
            None => vec![(-1.0, 1.0); n],
        };
        let domain: Vec<&str> = g.domain.iter().map(String::as_str).collect();
        DefiningFunction::from_expression(&name, n, k, expr, &domain, sample_box)
            .map(Some)
            .map_err(|e| ConfigError(format!("geometry: {e}")))
    }

    /// Registry with the config geometry (if any) added.
    pub fn registry(&self) -> Result<Registry, ConfigError> {
        let mut r = Registry::new();
        if let Some(g) = self.user_geometry()? {
            r.register(g).map_err(|e| ConfigError(format!("geometry: {e}")))?;
        }
        Ok(r)
    }

    pub fn resolve_geometry(&self, reg: &Registry) -> Result<DefiningFunction, ConfigError> {
        let name = match (&self.geometry.builtin, &self.geometry.expression) {
            (Some(b), _) => b.clone(),
            (None, Some(_)) => self.geometry.name.clone().unwrap_or_else(|| "user".into()),
            (None, None) => return Err(ConfigError("no geometry: pass --geometry or a [geometry] section".into())),
        };
        reg.get(&name).ok_or_else(|| ConfigError(format!("unknown geometry '{name}' (see `geom list`)")))
    }

    pub fn conformal_factor(&self, n: usize) -> Result<Option<ConformalFactor>, ConfigError> {
        self.conformal
            .as_ref()
            .map(|c| ConformalFactor::parse(&c.expression, n, c.q).map_err(|e| ConfigError(format!("conformal: {e}"))))
            .transpose()
    }

    pub fn explicit_points(&self, n: usize) -> Result<Vec<PhasePoint>, ConfigError> {
        self.points
            .explicit
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if p.x.len() != n || p.v.len() != n {
                    return Err(ConfigError(format!("points.explicit[{i}]: expected {n} coordinates in x and v")));
                }
                PhasePoint::new(p.x.clone(), p.v.clone()).map_err(|e| ConfigError(format!("points.explicit[{i}]: {e}")))
            })
            .collect()
    }

    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_file() {
        let c = RunConfig::parse(
            r#"
operation = "conformal-check"
[geometry]
builtin = "minkowski4"
[conformal]
expression = "2"
q = 0
[points]
seed = 4
count = 3
[integrator]
tol = 1e-9
[tolerances]
weyl_deviation = 1e-7
[output]
format = "csv"
"#,
        )
        .unwrap();
        assert_eq!(c.operation, Some(Operation::ConformalCheck));
        assert_eq!(c.points.count, 3);
        assert_eq!(c.tolerance("weyl_deviation", 1.0), 1e-7);
        assert_eq!(c.output.format, Format::Csv);
        c.validate().unwrap();
    }

    #[test]
    fn errors_carry_position() {
        let e = RunConfig::parse("[points]\ncount = \"x\"\n").unwrap_err();
        assert!(e.0.contains("line 2"), "{}", e.0);
        assert!(RunConfig::parse("bogus = 1").is_err());
    }

    #[test]
    fn flags_win() {
        let mut c = RunConfig::parse("[geometry]\nbuiltin = \"kapadia\"\n[points]\nseed = 3\n").unwrap();
        c.apply(&Overrides {
            geometry: Some("frw_like".into()),
            seed: Some(9),
            ..Default::default()
        });
        assert_eq!(c.geometry.builtin.as_deref(), Some("frw_like"));
        assert_eq!(c.points.seed, 9);
    }

    #[test]
    fn user_geometry_is_registered() {
        let c = RunConfig::parse(
            "[geometry]\nname = \"flat3\"\nn = 3\nk = 2\nexpression = \"(v1^2 - v2^2 - v3^2)/2\"\n",
        )
        .unwrap();
        let reg = c.registry().unwrap();
        let g = c.resolve_geometry(&reg).unwrap();
        assert_eq!(g.n, 3);
        assert!(reg.list().iter().any(|e| e.name == "flat3" && e.provenance == "user"));
    }
}
