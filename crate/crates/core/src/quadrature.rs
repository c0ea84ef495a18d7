//! Riemann-sum grids for single and double path integrals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on `k * m` for one interaction matrix.
pub const DEFAULT_MAX_POINTS: usize = 1 << 24;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiemannRule {
    /// Nodes at `l/k`, `l = 1..=k`.
    #[default]
    Right,
    /// Nodes at `(l - 1/2)/k`.
    Midpoint,
}

/// Interpolation counts for the outer (`k`) and inner (`m`) path integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub k: usize,
    pub m: usize,
    pub rule: RiemannRule,
    pub max_points: usize,
}

/// One distinct node of the double-integral grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathNode {
    /// Position `alpha * beta` along the straight path.
    pub t: f64,
    /// Multiplicity of the node divided by `k * m`.
    pub weight: f64,
}

impl QuadratureSpec {
    pub fn new(k: usize, m: usize) -> Result<Self> {
        let spec = Self {
            k,
            m,
            rule: RiemannRule::Right,
            max_points: DEFAULT_MAX_POINTS,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn square(k: usize) -> Result<Self> {
        Self::new(k, k)
    }

    /// Smallest square grid holding at least `budget` path points; `k` records
    /// the effective count.
    pub fn from_budget(budget: usize) -> Result<Self> {
        if budget == 0 {
            return Err(Error::InvalidArgument("quadrature budget must be >= 1".into()));
        }
        let mut k = (budget as f64).sqrt().floor() as usize;
        while k * k < budget {
            k += 1;
        }
        Self::square(k)
    }

    pub fn with_rule(mut self, rule: RiemannRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_max_points(mut self, cap: usize) -> Self {
        self.max_points = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.m == 0 {
            return Err(Error::InvalidArgument(format!(
                "interpolation counts must be >= 1 (k = {}, m = {})",
                self.k, self.m
            )));
        }
        Ok(())
    }

    pub(crate) fn check_budget(&self) -> Result<()> {
        self.validate()?;
        let requested = self.k.saturating_mul(self.m);
        if requested > self.max_points {
            return Err(Error::Budget {
                requested,
                cap: self.max_points,
            });
        }
        Ok(())
    }

    /// Nodes of the single integral, each carrying weight `1/k`.
    pub fn line_nodes(&self) -> Vec<f64> {
        let k = self.k as f64;
        (1..=self.k)
            .map(|l| match self.rule {
                RiemannRule::Right => l as f64 / k,
                RiemannRule::Midpoint => (l as f64 - 0.5) / k,
            })
            .collect()
    }

    /// Distinct products `(l/k)(p/m)` in increasing order with their weights.
    ///
    /// Many grid cells share a product, so each distinct node is evaluated once.
    pub fn product_nodes(&self) -> Vec<PathNode> {
        // Integer numerators over a common denominator make deduplication exact.
        let (denom, num): (u64, Box<dyn Fn(u64) -> u64>) = match self.rule {
            RiemannRule::Right => ((self.k * self.m) as u64, Box::new(|l| l)),
            RiemannRule::Midpoint => ((4 * self.k * self.m) as u64, Box::new(|l| 2 * l - 1)),
        };
        let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
        for l in 1..=self.k as u64 {
            for p in 1..=self.m as u64 {
                *counts.entry(num(l) * num(p)).or_insert(0) += 1;
            }
        }
        let cells = (self.k * self.m) as f64;
        counts
            .into_iter()
            .map(|(n, c)| PathNode {
                t: n as f64 / denom as f64,
                weight: c as f64 / cells,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_rounds_up_to_square() {
        assert_eq!(QuadratureSpec::from_budget(300).unwrap().k, 18);
        assert_eq!(QuadratureSpec::from_budget(256).unwrap().k, 16);
        assert_eq!(QuadratureSpec::from_budget(1).unwrap().k, 1);
        assert!(QuadratureSpec::from_budget(0).is_err());
    }

    #[test]
    fn rejects_zero_counts() {
        assert!(QuadratureSpec::new(0, 3).is_err());
        assert!(QuadratureSpec::new(3, 0).is_err());
    }

    #[test]
    fn budget_cap_is_enforced() {
        let q = QuadratureSpec::square(100).unwrap().with_max_points(5000);
        assert!(matches!(q.check_budget(), Err(Error::Budget { requested: 10000, cap: 5000 })));
    }

    #[test]
    fn product_nodes_are_deduplicated_and_weights_sum_to_one() {
        for rule in [RiemannRule::Right, RiemannRule::Midpoint] {
            let q = QuadratureSpec::new(16, 12).unwrap().with_rule(rule);
            let nodes = q.product_nodes();
            assert!(nodes.len() < 16 * 12);
            let total: f64 = nodes.iter().map(|n| n.weight).sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(nodes.windows(2).all(|w| w[0].t < w[1].t));
        }
        let right = QuadratureSpec::square(2).unwrap().product_nodes();
        let ts: Vec<f64> = right.iter().map(|n| n.t).collect();
        assert_eq!(ts, vec![0.25, 0.5, 1.0]);
        assert_eq!(right[1].weight, 0.5);
    }

    #[test]
    fn line_nodes_follow_rule() {
        let q = QuadratureSpec::new(4, 1).unwrap();
        assert_eq!(q.line_nodes(), vec![0.25, 0.5, 0.75, 1.0]);
        let q = q.with_rule(RiemannRule::Midpoint);
        assert_eq!(q.line_nodes(), vec![0.125, 0.375, 0.625, 0.875]);
    }
}
