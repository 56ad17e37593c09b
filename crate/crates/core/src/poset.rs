//! Product orders over resource vectors and antichain maintenance.
//!
//! Every comparison here is exact. Resource values that should compare equal
//! are expected to be snapped upstream (see [`crate::design::aggregate_resources`]).

use serde::{Deserialize, Serialize};

/// A partial order given by componentwise comparison.
pub trait ProductOrder {
    /// `true` iff every component of `self` is `<=` the matching component of `other`.
    fn leq(&self, other: &Self) -> bool;

    /// The infeasibility sentinel. Top elements never enter an antichain.
    fn is_top(&self) -> bool {
        false
    }

    fn strictly_below(&self, other: &Self) -> bool {
        self.leq(other) && !other.leq(self)
    }

    fn incomparable(&self, other: &Self) -> bool {
        !self.leq(other) && !other.leq(self)
    }
}

/// Cost (USD/month), average travel time (s) and emissions (kg CO2/month).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceVector {
    pub cost: f64,
    pub time: f64,
    pub emissions: f64,
}

impl ResourceVector {
    pub const TOP: ResourceVector = ResourceVector {
        cost: f64::INFINITY,
        time: f64::INFINITY,
        emissions: f64::INFINITY,
    };

    pub fn new(cost: f64, time: f64, emissions: f64) -> Self {
        ResourceVector {
            cost,
            time,
            emissions,
        }
    }

    /// Finite and non-negative in every component.
    pub fn is_valid(&self) -> bool {
        self.is_top()
            || [self.cost, self.time, self.emissions]
                .iter()
                .all(|v| v.is_finite() && *v >= 0.0)
    }
}

impl ProductOrder for ResourceVector {
    fn leq(&self, other: &Self) -> bool {
        self.cost <= other.cost && self.time <= other.time && self.emissions <= other.emissions
    }

    fn is_top(&self) -> bool {
        self.cost == f64::INFINITY && self.time == f64::INFINITY && self.emissions == f64::INFINITY
    }
}

/// Monetized resources: cost with emissions folded in, and travel time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostTime {
    pub cost: f64,
    pub time: f64,
}

impl CostTime {
    pub const TOP: CostTime = CostTime {
        cost: f64::INFINITY,
        time: f64::INFINITY,
    };
}

impl ProductOrder for CostTime {
    fn leq(&self, other: &Self) -> bool {
        self.cost <= other.cost && self.time <= other.time
    }

    fn is_top(&self) -> bool {
        self.cost == f64::INFINITY && self.time == f64::INFINITY
    }
}

/// A resource point tagged with the implementation that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint<P, L> {
    pub resources: P,
    pub label: L,
}

impl<P, L> LabeledPoint<P, L> {
    pub fn new(resources: P, label: L) -> Self {
        LabeledPoint { resources, label }
    }
}

/// A set of mutually incomparable labeled points, kept in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct Antichain<P, L> {
    elements: Vec<LabeledPoint<P, L>>,
}

impl<P, L> Default for Antichain<P, L> {
    fn default() -> Self {
        Antichain {
            elements: Vec::new(),
        }
    }
}

impl<P: ProductOrder, L> Antichain<P, L> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn elements(&self) -> &[LabeledPoint<P, L>] {
        &self.elements
    }

    pub fn into_elements(self) -> Vec<LabeledPoint<P, L>> {
        self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &LabeledPoint<P, L>> {
        self.elements.iter()
    }

    /// Adds `p` unless something already present is `<=` it (this covers exact
    /// duplicates, which keep the earlier label). Elements strictly above `p`
    /// are evicted. Returns whether `p` was kept.
    pub fn insert_minimal(&mut self, p: LabeledPoint<P, L>) -> bool {
        if p.resources.is_top() {
            return false;
        }
        if self.elements.iter().any(|q| q.resources.leq(&p.resources)) {
            return false;
        }
        self.elements.retain(|q| !p.resources.leq(&q.resources));
        self.elements.push(p);
        true
    }

    /// Union followed by minimization. Associative and commutative on the
    /// resulting resource set.
    pub fn merge(mut self, other: Antichain<P, L>) -> Antichain<P, L> {
        for p in other.elements {
            self.insert_minimal(p);
        }
        self
    }

    /// Whether some element of the antichain is `<=` `r`.
    pub fn dominates_point(&self, r: &P) -> bool {
        self.elements.iter().any(|q| q.resources.leq(r))
    }

    /// Checks the antichain invariant. Used by tests and debug assertions.
    pub fn is_antichain(&self) -> bool {
        self.elements.iter().enumerate().all(|(i, a)| {
            self.elements
                .iter()
                .enumerate()
                .all(|(j, b)| i == j || a.resources.incomparable(&b.resources))
        })
    }
}

impl<P: ProductOrder, L> FromIterator<LabeledPoint<P, L>> for Antichain<P, L> {
    fn from_iter<I: IntoIterator<Item = LabeledPoint<P, L>>>(iter: I) -> Self {
        let mut ac = Antichain::new();
        for p in iter {
            ac.insert_minimal(p);
        }
        ac
    }
}

pub fn leq<P: ProductOrder>(a: &P, b: &P) -> bool {
    a.leq(b)
}

/// The minimal (non-dominated) elements of `points`.
pub fn minimal_elements<P: ProductOrder, L>(
    points: impl IntoIterator<Item = LabeledPoint<P, L>>,
) -> Antichain<P, L> {
    points.into_iter().collect()
}
