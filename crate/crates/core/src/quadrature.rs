//! Composite Gauss-Legendre quadrature.
//!
//! Every time integral in the crate (forward mild solutions, adjoint pairings
//! and Gramians) goes through [`QuadratureConfig::nodes`], so the same control
//! evaluated against the same system always sees the same nodes.

use std::f64::consts::PI;

use crate::{Error, Result};

/// Largest single-panel Gauss-Legendre order used by a composite rule.
pub const MAX_RULE_ORDER: usize = 16;

/// Default number of nodes per impulse subinterval.
pub const DEFAULT_NODES: usize = 64;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..order.div_ceil(2) {
            // Tricomi's initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(order, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        if order % 2 == 1 {
            nodes[order / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A node of a composite rule: absolute position and weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub s: f64,
    pub w: f64,
}

/// Composite Gauss-Legendre configuration.
///
/// `nodes_per_subinterval` nodes are spread over each integration interval as
/// `ceil(N / order)` equal panels of an order-`min(N, 16)` rule. Control
/// breakpoints inside an interval split panels further so that every panel
/// sees a smooth integrand.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureConfig {
    nodes_per_subinterval: usize,
    rule: GaussLegendre,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self::new(DEFAULT_NODES).expect("default node count is valid")
    }
}

impl QuadratureConfig {
    pub fn new(nodes_per_subinterval: usize) -> Result<Self> {
        if nodes_per_subinterval < 2 {
            return Err(Error::InvalidParameter(format!(
                "nodes_per_subinterval must be at least 2, got {nodes_per_subinterval}"
            )));
        }
        let order = nodes_per_subinterval.min(MAX_RULE_ORDER);
        Ok(QuadratureConfig { nodes_per_subinterval, rule: GaussLegendre::new(order) })
    }

    pub fn nodes_per_subinterval(&self) -> usize {
        self.nodes_per_subinterval
    }

    pub fn rule(&self) -> &GaussLegendre {
        &self.rule
    }

    pub fn panels(&self) -> usize {
        self.nodes_per_subinterval.div_ceil(self.rule.order())
    }

    /// Composite nodes on `[a, b]`, with extra panel boundaries at every
    /// breakpoint strictly inside the interval.
    pub fn nodes(&self, a: f64, b: f64, breakpoints: &[f64]) -> Vec<Node> {
        if b.partial_cmp(&a) != Some(std::cmp::Ordering::Greater) {
            return Vec::new();
        }
        let panels = self.panels();
        let len = b - a;
        let mut cuts: Vec<f64> = (0..=panels).map(|j| a + len * j as f64 / panels as f64).collect();
        cuts[panels] = b;
        let guard = 1e-13 * len;
        cuts.extend(breakpoints.iter().copied().filter(|&t| t > a + guard && t < b - guard));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|x, y| (*x - *y).abs() <= guard);

        let mut out = Vec::with_capacity((cuts.len() - 1) * self.rule.order());
        for seg in cuts.windows(2) {
            let (lo, hi) = (seg[0], seg[1]);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (x, w) in self.rule.nodes.iter().zip(&self.rule.weights) {
                out.push(Node { s: mid + half * x, w: half * w });
            }
        }
        out
    }

    /// `∫_a^b f(s) ds` for a scalar integrand.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.nodes(a, b, &[]).iter().map(|n| n.w * f(n.s)).sum()
    }
}
