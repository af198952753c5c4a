// Copyright 2026 The qres Authors
// SPDX-License-Identifier: Apache-2.0

//! Closed-form second stage for one triple under one scenario.
//!
//! Once demand `b` and waiting time `a` are observed, the second stage is
//!
//! ```text
//! min  U*xu + O*xo + P*y
//! s.t. xu <= reserved,  xu + xo >= b,  t_exe <= a + y,  xu, xo in Z+, y >= 0
//! ```
//!
//! The over-wait `y` is decoupled from the qubit variables, and the qubit
//! part is a two-price cover: use the cheaper plan first.

use crate::instance::CostRates;
use crate::scenario::Scenario;
use crate::units::{Cost, Seconds};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecourseDecision {
    pub utilized: u32,
    pub on_demand: u32,
    pub over_wait: Seconds,
    pub cost: Cost,
}

impl RecourseDecision {
    pub fn utilization_cost(&self, rates: &CostRates) -> Cost {
        Cost::qubits(self.utilized as u64, rates.utilize_per_qubit)
    }

    pub fn on_demand_cost(&self, rates: &CostRates) -> Cost {
        Cost::qubits(self.on_demand as u64, rates.on_demand_per_qubit)
    }

    pub fn penalty_cost(&self, rates: &CostRates) -> Cost {
        Cost::over_wait(self.over_wait, rates.penalty_per_second)
    }

    /// Checks the three second-stage constraints and the cost identity.
    pub fn is_feasible_for(&self, reserved: u32, scenario: &Scenario, rates: &CostRates, exec_time: Seconds) -> bool {
        self.utilized <= reserved
            && self.utilized as u64 + self.on_demand as u64 >= scenario.demand_qubits as u64
            && exec_time <= scenario.wait_time + self.over_wait
            && !self.over_wait.is_negative()
            && self.cost == self.utilization_cost(rates) + self.on_demand_cost(rates) + self.penalty_cost(rates)
    }
}

/// Over-wait `max(0, exec_time - wait_time)`.
pub fn penalty_time(exec_time: Seconds, wait_time: Seconds) -> Seconds {
    exec_time.saturating_excess(wait_time)
}

/// Optimal recourse. Reserved qubits are used first when `U <= O` (ties go
/// to utilization); otherwise all demand is bought on demand. Demand is
/// covered exactly, never over-provisioned, and `y` takes its smallest
/// feasible value.
pub fn optimal_recourse(reserved: u32, scenario: &Scenario, rates: &CostRates, exec_time: Seconds) -> RecourseDecision {
    let demand = scenario.demand_qubits;
    let utilized = if rates.utilize_per_qubit <= rates.on_demand_per_qubit {
        reserved.min(demand)
    } else {
        0
    };
    let on_demand = demand - utilized;
    let over_wait = penalty_time(exec_time, scenario.wait_time);
    let cost = Cost::qubits(utilized as u64, rates.utilize_per_qubit)
        + Cost::qubits(on_demand as u64, rates.on_demand_per_qubit)
        + Cost::over_wait(over_wait, rates.penalty_per_second);
    RecourseDecision {
        utilized,
        on_demand,
        over_wait,
        cost,
    }
}
