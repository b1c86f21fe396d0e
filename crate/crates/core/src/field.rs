use std::sync::Arc;

use crate::error::{GeomError, Result};
use crate::expr::{parse_constraint, parse_expression, Constraint, Expr};
use crate::jet::{PhasePoint, Scalar};

/// A scalar function on phase space together with the region where it is defined.
///
/// Evaluation is generic over [`Scalar`], so the same rule yields plain values,
/// truncated Taylor series or hyper-dual numbers.
#[derive(Clone, Debug)]
pub struct ScalarField {
    n: usize,
    expr: Arc<Expr>,
    domain: Arc<Vec<Constraint>>,
}

impl ScalarField {
    pub fn new(n: usize, expr: Expr, domain: Vec<Constraint>) -> Result<Self> {
        if n < 2 {
            return Err(GeomError::validation("dimension must be at least 2"));
        }
        let too_big = |e: &Expr| e.max_index().is_some_and(|i| i >= n);
        if too_big(&expr) || domain.iter().any(|c| too_big(&c.lhs) || too_big(&c.rhs)) {
            return Err(GeomError::validation(format!(
                "expression uses a coordinate beyond dimension {n}"
            )));
        }
        Ok(ScalarField {
            n,
            expr: Arc::new(expr),
            domain: Arc::new(domain),
        })
    }

    pub fn parse(src: &str, n: usize, domain: &[&str]) -> Result<Self> {
        let expr = parse_expression(src, n)?;
        let domain = domain
            .iter()
            .map(|c| parse_constraint(c, n))
            .collect::<Result<Vec<_>>>()?;
        ScalarField::new(n, expr, domain)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn domain(&self) -> &[Constraint] {
        &self.domain
    }

    pub fn contains_state(&self, vars: &[f64]) -> bool {
        self.domain.iter().all(|c| c.holds(vars))
    }

    pub fn contains(&self, p: &PhasePoint) -> bool {
        p.dim() == self.n && self.contains_state(&p.to_state())
    }

    pub fn eval<S: Scalar>(&self, vars: &[S]) -> Result<S> {
        if vars.len() != 2 * self.n {
            return Err(GeomError::validation(format!(
                "expected {} phase coordinates, got {}",
                2 * self.n,
                vars.len()
            )));
        }
        if !self.domain.is_empty() {
            let vals: Vec<f64> = vars.iter().map(Scalar::value).collect();
            if let Some(c) = self.domain.iter().find(|c| !c.holds(&vals)) {
                return Err(GeomError::domain(format!("constraint '{c}' violated")));
            }
        }
        self.expr.eval(vars)
    }

    pub fn value(&self, p: &PhasePoint) -> Result<f64> {
        self.eval(&p.to_state())
    }

    /// Pointwise product; the domain is the intersection.
    pub fn product(&self, other: &ScalarField) -> Result<ScalarField> {
        if self.n != other.n {
            return Err(GeomError::validation("dimension mismatch in field product"));
        }
        let mut domain = self.domain.as_ref().clone();
        for c in other.domain.iter() {
            if !domain.contains(c) {
                domain.push(c.clone());
            }
        }
        ScalarField::new(self.n, self.expr.as_ref().clone() * other.expr.as_ref().clone(), domain)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_is_enforced() {
        let f = ScalarField::parse("v1*v2 - x1", 2, &["x1 > 0"]).unwrap();
        assert_eq!(f.eval(&[1.0, 0.0, 2.0, 3.0]).unwrap(), 5.0);
        assert!(matches!(f.eval(&[-1.0, 0.0, 2.0, 3.0]), Err(GeomError::Domain(_))));
        assert!(ScalarField::parse("x3", 2, &[]).is_err());
    }
}
