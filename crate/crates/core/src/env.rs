//! Perishable-inventory MDP with three shelf-life buckets.
//!
//! A day runs in a fixed order: stock ages by one day and yesterday's order
//! arrives, the holding/shortage cost is charged on that pre-sale stock, and
//! demand is then served oldest-first. The post-sale stock is the state the
//! next order is chosen on.
//!
//! Holding cost is charged on the pre-sale inventory, not end-of-day stock.
//! Units with one day left are dropped at the next aging step, so their
//! disposal cost is the `b1` term of the period cost.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_STOCK: u32 = 10;
pub const DEFAULT_MAX_ORDER: u32 = 10;

/// Stock levels grouped by remaining shelf-life (1, 2 and 3 days).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub struct InventoryState {
    pub s1: u32,
    pub s2: u32,
    pub s3: u32,
}

impl InventoryState {
    pub const EMPTY: InventoryState = InventoryState {
        s1: 0,
        s2: 0,
        s3: 0,
    };

    pub const fn new(s1: u32, s2: u32, s3: u32) -> Self {
        Self { s1, s2, s3 }
    }

    pub fn total(&self) -> u32 {
        self.s1 + self.s2 + self.s3
    }
}

impl fmt::Display for InventoryState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.s1, self.s2, self.s3)
    }
}

impl From<(u32, u32, u32)> for InventoryState {
    fn from((s1, s2, s3): (u32, u32, u32)) -> Self {
        Self { s1, s2, s3 }
    }
}

/// Units ordered at the end of a day, delivered the next morning.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub struct Action(pub u32);

impl Action {
    pub fn order_qty(self) -> u32 {
        self.0
    }
}

/// Per-unit holding costs by shelf-life bucket plus the per-unit shortage cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub shortage: f64,
}

impl Default for CostParams {
    /// The bakery setting: `[0.7, 0.3, 0.0]` holding and 1.0 shortage.
    fn default() -> Self {
        Self {
            b1: 0.7,
            b2: 0.3,
            b3: 0.0,
            shortage: 1.0,
        }
    }
}

impl CostParams {
    /// Checks `b1 > b2 >= b3 >= 0` and `shortage >= 0`.
    pub fn validate(&self) -> Result<()> {
        let all = [self.b1, self.b2, self.b3, self.shortage];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("cost parameters {self:?}")));
        }
        if !(self.b1 > self.b2 && self.b2 >= self.b3 && self.b3 >= 0.0) {
            return Err(Error::domain(format!(
                "holding costs must satisfy b1 > b2 >= b3 >= 0, got {:?}",
                [self.b1, self.b2, self.b3]
            )));
        }
        if self.shortage < 0.0 {
            return Err(Error::domain("shortage cost must be non-negative"));
        }
        Ok(())
    }
}

/// Result of one simulated day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayOutcome {
    /// Stock after aging and receiving, before any sales.
    pub received: InventoryState,
    /// Stock after sales; the state the next order is placed on.
    pub next_state: InventoryState,
    pub cost: f64,
    /// Units of demand that could not be served.
    pub shortage: u32,
    pub demand_served: u32,
}

/// Aging step: every bucket loses one day of shelf-life, the oldest bucket
/// is dropped and the order arrives as fresh stock.
pub fn age(state: InventoryState, action: Action) -> InventoryState {
    InventoryState {
        s1: state.s2,
        s2: state.s3,
        s3: action.0,
    }
}

/// Cost of a day given the pre-sale stock and the realised demand.
///
/// Demand is unsigned, so the negative-demand case cannot be expressed.
pub fn period_cost(state: InventoryState, demand: u32, params: &CostParams) -> f64 {
    let unmet = demand.saturating_sub(state.total());
    params.b3 * f64::from(state.s3)
        + params.b2 * f64::from(state.s2)
        + params.b1 * f64::from(state.s1)
        + params.shortage * f64::from(unmet)
}

/// Serves demand oldest-first. All three buckets are updated from the same
/// pre-sale levels.
pub fn consume_demand(state: InventoryState, demand: u32) -> InventoryState {
    let InventoryState { s1, s2, s3 } = state;
    let new_s3 = if demand < s1 + s2 {
        s3
    } else {
        s3.saturating_sub(demand - s1 - s2)
    };
    let new_s2 = if demand < s1 {
        s2
    } else {
        s2.saturating_sub(demand - s1)
    };
    let new_s1 = s1.saturating_sub(demand);
    InventoryState::new(new_s1, new_s2, new_s3)
}

/// Bounds of the tabular state and action spaces plus the cost structure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InventoryMdp {
    pub max_stock: u32,
    pub max_order: u32,
    pub costs: CostParams,
}

impl Default for InventoryMdp {
    fn default() -> Self {
        Self {
            max_stock: DEFAULT_MAX_STOCK,
            max_order: DEFAULT_MAX_ORDER,
            costs: CostParams::default(),
        }
    }
}

impl InventoryMdp {
    pub fn new(max_stock: u32, max_order: u32, costs: CostParams) -> Result<Self> {
        costs.validate()?;
        if max_order > max_stock {
            // A fresh order lands in s3 and has to fit the bucket cap.
            return Err(Error::domain(format!(
                "max_order ({max_order}) cannot exceed max_stock ({max_stock})"
            )));
        }
        Ok(Self {
            max_stock,
            max_order,
            costs,
        })
    }

    pub fn num_states(&self) -> usize {
        let side = self.max_stock as usize + 1;
        side * side * side
    }

    pub fn num_actions(&self) -> usize {
        self.max_order as usize + 1
    }

    pub fn check_state(&self, state: InventoryState) -> Result<()> {
        let m = self.max_stock;
        if state.s1 > m || state.s2 > m || state.s3 > m {
            return Err(Error::domain(format!(
                "state {state} exceeds the per-bucket cap {m}"
            )));
        }
        Ok(())
    }

    pub fn check_action(&self, action: Action) -> Result<()> {
        if action.0 > self.max_order {
            return Err(Error::domain(format!(
                "order quantity {} exceeds the cap {}",
                action.0, self.max_order
            )));
        }
        Ok(())
    }

    /// Dense index in `[0, (max_stock + 1)^3)`, `s1` most significant.
    pub fn state_index(&self, state: InventoryState) -> usize {
        let side = self.max_stock as usize + 1;
        (state.s1 as usize * side + state.s2 as usize) * side + state.s3 as usize
    }

    pub fn state_at(&self, index: usize) -> InventoryState {
        let side = self.max_stock as usize + 1;
        InventoryState::new(
            (index / (side * side)) as u32,
            ((index / side) % side) as u32,
            (index % side) as u32,
        )
    }

    pub fn action_index(&self, action: Action) -> usize {
        action.0 as usize
    }

    pub fn action_at(&self, index: usize) -> Action {
        Action(index as u32)
    }

    /// All states in dense-index order.
    pub fn enumerate_states(&self) -> Vec<InventoryState> {
        (0..self.num_states()).map(|i| self.state_at(i)).collect()
    }

    /// All actions in dense-index order.
    pub fn enumerate_actions(&self) -> Vec<Action> {
        (0..=self.max_order).map(Action).collect()
    }

    pub fn age_and_receive(&self, state: InventoryState, action: Action) -> Result<InventoryState> {
        self.check_action(action)?;
        Ok(age(state, action))
    }

    /// One full day: age and receive, charge cost on pre-sale stock, then sell.
    pub fn step(&self, state: InventoryState, action: Action, demand: u32) -> Result<DayOutcome> {
        self.check_state(state)?;
        let received = self.age_and_receive(state, action)?;
        Ok(self.step_received(received, demand))
    }

    /// The part of a day that follows delivery.
    pub fn step_received(&self, received: InventoryState, demand: u32) -> DayOutcome {
        let cost = period_cost(received, demand, &self.costs);
        let next_state = consume_demand(received, demand);
        let on_hand = received.total();
        DayOutcome {
            received,
            next_state,
            cost,
            shortage: demand.saturating_sub(on_hand),
            demand_served: demand.min(on_hand),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn study_costs() -> CostParams {
        CostParams::default()
    }

    #[test]
    fn aging_examples() {
        let mdp = InventoryMdp::default();
        let s = mdp
            .age_and_receive(InventoryState::new(0, 1, 4), Action(6))
            .unwrap();
        assert_eq!(s, InventoryState::new(1, 4, 6));
        let s = mdp
            .age_and_receive(InventoryState::EMPTY, Action(0))
            .unwrap();
        assert_eq!(s, InventoryState::EMPTY);
        let s = mdp
            .age_and_receive(InventoryState::new(0, 0, 5), Action(3))
            .unwrap();
        assert_eq!(s, InventoryState::new(0, 5, 3));
    }

    #[test]
    fn aging_rejects_large_order() {
        let mdp = InventoryMdp::default();
        assert!(matches!(
            mdp.age_and_receive(InventoryState::EMPTY, Action(11)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn cost_examples() {
        let c = study_costs();
        assert!((period_cost(InventoryState::new(0, 0, 5), 7, &c) - 2.0).abs() < 1e-12);
        assert_eq!(period_cost(InventoryState::EMPTY, 0, &c), 0.0);
        assert!((period_cost(InventoryState::new(2, 3, 4), 1, &c) - 2.3).abs() < 1e-12);
    }

    #[test]
    fn consume_examples() {
        let s = InventoryState::new(2, 3, 4);
        assert_eq!(consume_demand(s, 4), InventoryState::new(0, 1, 4));
        assert_eq!(consume_demand(s, 0), s);
        assert_eq!(
            consume_demand(InventoryState::new(1, 1, 1), 10),
            InventoryState::EMPTY
        );
    }

    #[test]
    fn step_examples() {
        let mdp = InventoryMdp::default();

        let out = mdp
            .step(InventoryState::new(0, 0, 5), Action(0), 7)
            .unwrap();
        assert_eq!(out.received, InventoryState::new(0, 5, 0));
        assert!((out.cost - 3.5).abs() < 1e-12);
        assert_eq!(out.next_state, InventoryState::EMPTY);
        assert_eq!(out.shortage, 2);
        assert_eq!(out.demand_served, 5);

        let out = mdp.step(InventoryState::EMPTY, Action(0), 0).unwrap();
        assert_eq!(out.next_state, InventoryState::EMPTY);
        assert_eq!(out.cost, 0.0);
        assert_eq!(out.shortage, 0);

        let out = mdp
            .step(InventoryState::new(0, 0, 3), Action(2), 2)
            .unwrap();
        assert_eq!(out.received, InventoryState::new(0, 3, 2));
        assert!((out.cost - 0.9).abs() < 1e-12);
        assert_eq!(out.next_state, InventoryState::new(0, 1, 2));
        assert_eq!(out.shortage, 0);
    }

    #[test]
    fn enumeration_sizes() {
        let small = InventoryMdp::new(1, 1, study_costs()).unwrap();
        assert_eq!(small.enumerate_states().len(), 8);
        let mdp = InventoryMdp::default();
        assert_eq!(mdp.enumerate_states().len(), 1331);
        assert_eq!(mdp.enumerate_actions().len(), 11);
    }

    #[test]
    fn indices_are_bijective() {
        let mdp = InventoryMdp::default();
        for (i, s) in mdp.enumerate_states().into_iter().enumerate() {
            assert_eq!(mdp.state_index(s), i);
            assert_eq!(mdp.state_at(i), s);
        }
    }

    #[test]
    fn cost_params_validation() {
        assert!(study_costs().validate().is_ok());
        let bad = CostParams {
            b1: 0.3,
            b2: 0.3,
            ..study_costs()
        };
        assert!(bad.validate().is_err());
        let negative = CostParams {
            shortage: -1.0,
            ..study_costs()
        };
        assert!(negative.validate().is_err());
    }

    #[test]
    fn out_of_range_state_is_rejected() {
        let mdp = InventoryMdp::default();
        assert!(mdp
            .step(InventoryState::new(11, 0, 0), Action(0), 0)
            .is_err());
    }
}
