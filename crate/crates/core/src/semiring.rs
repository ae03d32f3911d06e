//! Paired graph/acoustic costs in the tropical semiring.
//!
//! Costs are negated log-probabilities. The graph and acoustic parts are kept
//! apart so lattices can be re-scaled or rescored after decoding; ordering and
//! `plus` only ever look at the total, with the graph part as tie-break.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};

/// A `(graph, acoustic)` cost pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DualCost {
    pub graph: f64,
    pub acoustic: f64,
}

impl DualCost {
    pub const ZERO: DualCost = DualCost {
        graph: f64::INFINITY,
        acoustic: f64::INFINITY,
    };
    pub const ONE: DualCost = DualCost {
        graph: 0.0,
        acoustic: 0.0,
    };

    #[inline]
    pub const fn new(graph: f64, acoustic: f64) -> Self {
        DualCost { graph, acoustic }
    }

    #[inline]
    pub const fn graph_only(graph: f64) -> Self {
        DualCost {
            graph,
            acoustic: 0.0,
        }
    }

    /// Semiring zero (unreachable).
    #[inline]
    pub const fn zero() -> Self {
        Self::ZERO
    }

    /// Semiring one (free).
    #[inline]
    pub const fn one() -> Self {
        Self::ONE
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.graph + self.acoustic
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.total() == f64::INFINITY
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.total().is_finite()
    }

    /// Min under [`DualCost::cmp_cost`]; the left operand wins exact ties.
    #[inline]
    pub fn plus(self, other: DualCost) -> DualCost {
        if other.cmp_cost(&self) == Ordering::Less {
            other
        } else {
            self
        }
    }

    /// Componentwise sum.
    #[inline]
    pub fn times(self, other: DualCost) -> DualCost {
        DualCost {
            graph: self.graph + other.graph,
            acoustic: self.acoustic + other.acoustic,
        }
    }

    /// Total order: by total cost, then by graph cost.
    #[inline]
    pub fn cmp_cost(&self, other: &DualCost) -> Ordering {
        self.total()
            .total_cmp(&other.total())
            .then_with(|| self.graph.total_cmp(&other.graph))
    }

    #[inline]
    pub fn better_than(&self, other: &DualCost) -> bool {
        self.cmp_cost(other) == Ordering::Less
    }

    pub fn approx_eq(&self, other: &DualCost, tol: f64) -> bool {
        if self.is_zero() || other.is_zero() {
            return self.is_zero() && other.is_zero();
        }
        (self.total() - other.total()).abs() <= tol
    }
}

impl Add for DualCost {
    type Output = DualCost;

    fn add(self, rhs: DualCost) -> DualCost {
        self.times(rhs)
    }
}

impl fmt::Display for DualCost {
    /// Writes `g` when the acoustic part is zero, `g,a` otherwise.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.acoustic == 0.0 {
            write!(f, "{}", self.graph)
        } else {
            write!(f, "{},{}", self.graph, self.acoustic)
        }
    }
}
