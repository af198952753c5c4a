// Copyright 2026 The qres Authors
// SPDX-License-Identifier: Apache-2.0

//! Exact solution of the two-stage program.
//!
//! No constraint links two distinct (circuit, provider, machine) triples,
//! so the program splits into one reservation problem per triple. Each of
//! those is a newsvendor: with recourse priced by [`optimal_recourse`], the
//! expected cost of reserving `x` qubits is
//!
//! ```text
//! g(x) = R*x + E[U*min(x, b) + O*(b - x)^+] + E[P*(t - a)^+]
//! ```
//!
//! and the x-th reserved qubit saves `(O - U) * Pr(b >= x) - R`. That saving
//! is non-increasing in `x`, so the optimum is the last unit with a strictly
//! positive saving, clamped to capacity.
//!
//! [`brute_force_triple`] and [`joint_enumeration_oracle`] are the
//! independent checks: a full scan per triple, and a scan over every joint
//! reservation vector that never assumes separability.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;
use thiserror::Error;

use crate::instance::{has_errors, validate, CostRates, Diagnostic, Instance, Severity, TripleKey};
use crate::recourse::{optimal_recourse, RecourseDecision};
use crate::scenario::{Marginal, ScenarioError, ScenarioSpace};
use crate::units::{Amount, Cost, Money, Seconds};

/// Largest capacity [`brute_force_triple`] will scan.
pub const BRUTE_FORCE_CAPACITY_LIMIT: u32 = 10_000;

/// Largest number of joint reservation vectors
/// [`joint_enumeration_oracle`] will evaluate.
pub const JOINT_ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("instance is invalid:\n{}", format_errors(.0))]
    InvalidInstance(Vec<Diagnostic>),
    #[error("reservation {reserved} on {key} exceeds machine capacity {capacity}")]
    ReservationExceedsCapacity {
        key: TripleKey,
        reserved: u32,
        capacity: u32,
    },
    #[error("no reservation given for {0}")]
    MissingReservation(TripleKey),
    #[error("reservation given for {0}, which is not a triple of the instance")]
    UnknownTriple(TripleKey),
    #[error("search space of {needed} exceeds the limit of {limit}")]
    GuardExceeded { needed: u128, limit: u128 },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

fn format_errors(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .filter(|d| d.severity == Severity::Error)
        .map(|d| format!("  {d}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Expected cost of one triple at a fixed reservation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostBreakdown {
    pub first_stage: Amount,
    /// Utilization plus on-demand, penalty excluded.
    pub second_stage: Amount,
    /// The on-demand part of `second_stage`.
    pub on_demand: Amount,
    pub penalty: Amount,
    pub total: Amount,
}

impl CostBreakdown {
    fn zero() -> Self {
        CostBreakdown {
            first_stage: Amount::zero(),
            second_stage: Amount::zero(),
            on_demand: Amount::zero(),
            penalty: Amount::zero(),
            total: Amount::zero(),
        }
    }

    fn accumulate(&mut self, other: &CostBreakdown) {
        self.first_stage += &other.first_stage;
        self.second_stage += &other.second_stage;
        self.on_demand += &other.on_demand;
        self.penalty += &other.penalty;
        self.total += &other.total;
    }
}

/// Reservation levels for every triple and the resulting expected costs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub reservations: BTreeMap<TripleKey, u32>,
    pub expected_first_stage: Amount,
    pub expected_second_stage: Amount,
    pub expected_on_demand: Amount,
    pub expected_penalty: Amount,
    pub expected_total: Amount,
    pub per_triple: BTreeMap<TripleKey, CostBreakdown>,
    pub per_scenario: Option<BTreeMap<(TripleKey, usize), RecourseDecision>>,
}

/// Everything needed to evaluate one triple.
#[derive(Debug, Clone)]
pub struct TripleModel {
    pub key: TripleKey,
    pub rates: CostRates,
    pub exec_time: Seconds,
    pub capacity: u32,
    pub space: ScenarioSpace,
}

impl TripleModel {
    /// Exact expected cost with `reserved` qubits, evaluated scenario by
    /// scenario.
    pub fn evaluate(&self, reserved: u32) -> CostBreakdown {
        let first_stage = Amount::from(Cost::qubits(reserved as u64, self.rates.reserve_per_qubit));
        let decide = |s: &_| optimal_recourse(reserved, s, &self.rates, self.exec_time);
        let second_stage = self.space.expected_cost(|s| {
            let d = decide(s);
            d.utilization_cost(&self.rates) + d.on_demand_cost(&self.rates)
        });
        let on_demand = self.space.expected_cost(|s| decide(s).on_demand_cost(&self.rates));
        let penalty = self.space.expected_cost(|s| decide(s).penalty_cost(&self.rates));
        let total = &(&first_stage + &second_stage) + &penalty;
        CostBreakdown {
            first_stage,
            second_stage,
            on_demand,
            penalty,
            total,
        }
    }

    pub fn decisions(&self, reserved: u32) -> Vec<RecourseDecision> {
        self.space
            .scenarios()
            .iter()
            .map(|s| optimal_recourse(reserved, s, &self.rates, self.exec_time))
            .collect()
    }
}

/// A validated instance with its scenario spaces built.
#[derive(Debug, Clone)]
pub struct Model {
    triples: Vec<TripleModel>,
}

impl Model {
    pub fn new(instance: &Instance) -> Result<Self, SolveError> {
        let diags = validate(instance);
        if has_errors(&diags) {
            return Err(SolveError::InvalidInstance(diags));
        }
        let mut spaces: BTreeMap<&str, ScenarioSpace> = BTreeMap::new();
        for c in &instance.circuits {
            spaces.insert(&c.id, ScenarioSpace::from_instance(instance, &c.id)?);
        }
        let triples = instance
            .triples()
            .into_iter()
            .map(|t| {
                let rates = *instance
                    .rates_for(&t.key.circuit_id, &t.key.provider_id)
                    .expect("validated");
                let exec_time = instance.exec_times.get(&t.key).expect("validated");
                let capacity = instance.machines[t.machine_slot].capacity_qubits as u32;
                let space = spaces[t.key.circuit_id.as_str()].clone();
                TripleModel {
                    key: t.key,
                    rates,
                    exec_time,
                    capacity,
                    space,
                }
            })
            .collect();
        Ok(Model { triples })
    }

    /// Triples in instance order.
    pub fn triples(&self) -> &[TripleModel] {
        &self.triples
    }

    pub fn triple(&self, key: &TripleKey) -> Option<&TripleModel> {
        self.triples.iter().find(|t| &t.key == key)
    }

    /// The smallest machine capacity, or `None` for an instance without
    /// triples.
    pub fn min_capacity(&self) -> Option<u32> {
        self.triples.iter().map(|t| t.capacity).min()
    }

    /// The same reservation level on every triple.
    pub fn uniform_reservations(&self, reserved: u32) -> BTreeMap<TripleKey, u32> {
        self.triples.iter().map(|t| (t.key.clone(), reserved)).collect()
    }

    fn checked_levels(&self, reservations: &BTreeMap<TripleKey, u32>) -> Result<Vec<u32>, SolveError> {
        for key in reservations.keys() {
            if self.triple(key).is_none() {
                return Err(SolveError::UnknownTriple(key.clone()));
            }
        }
        self.triples
            .iter()
            .map(|t| {
                let x = *reservations
                    .get(&t.key)
                    .ok_or_else(|| SolveError::MissingReservation(t.key.clone()))?;
                if x > t.capacity {
                    return Err(SolveError::ReservationExceedsCapacity {
                        key: t.key.clone(),
                        reserved: x,
                        capacity: t.capacity,
                    });
                }
                Ok(x)
            })
            .collect()
    }

    fn assemble(&self, levels: &[u32], per_scenario: bool) -> Solution {
        let breakdowns: Vec<CostBreakdown> = self
            .triples
            .par_iter()
            .zip(levels.par_iter())
            .map(|(t, &x)| t.evaluate(x))
            .collect();
        let mut totals = CostBreakdown::zero();
        let mut per_triple = BTreeMap::new();
        let mut reservations = BTreeMap::new();
        for ((t, &x), b) in self.triples.iter().zip(levels).zip(breakdowns) {
            totals.accumulate(&b);
            per_triple.insert(t.key.clone(), b);
            reservations.insert(t.key.clone(), x);
        }
        let per_scenario = per_scenario.then(|| {
            let mut map = BTreeMap::new();
            for (t, &x) in self.triples.iter().zip(levels) {
                for (i, d) in t.decisions(x).into_iter().enumerate() {
                    map.insert((t.key.clone(), i), d);
                }
            }
            map
        });
        Solution {
            reservations,
            expected_first_stage: totals.first_stage,
            expected_second_stage: totals.second_stage,
            expected_on_demand: totals.on_demand,
            expected_penalty: totals.penalty,
            expected_total: totals.total,
            per_triple,
            per_scenario,
        }
    }

    pub fn expected_cost(&self, reservations: &BTreeMap<TripleKey, u32>) -> Result<Solution, SolveError> {
        let levels = self.checked_levels(reservations)?;
        Ok(self.assemble(&levels, false))
    }

    /// Like [`Self::expected_cost`], also recording every recourse decision.
    pub fn expected_cost_detailed(&self, reservations: &BTreeMap<TripleKey, u32>) -> Result<Solution, SolveError> {
        let levels = self.checked_levels(reservations)?;
        Ok(self.assemble(&levels, true))
    }

    /// Marginal analysis on every triple, in parallel.
    pub fn solve(&self) -> Solution {
        let levels: Vec<u32> = self
            .triples
            .par_iter()
            .map(|t| {
                solve_triple(
                    &t.rates,
                    t.space.demand_marginal(),
                    t.space.wait_marginal(),
                    t.exec_time,
                    t.capacity,
                )
                .0
            })
            .collect();
        self.assemble(&levels, false)
    }

    /// Full scan of every joint reservation vector; first minimum in
    /// lexicographic order (instance triple order) wins.
    pub fn joint_enumeration(&self) -> Result<Solution, SolveError> {
        let needed = self
            .triples
            .iter()
            .try_fold(1u128, |acc, t| acc.checked_mul(t.capacity as u128 + 1))
            .unwrap_or(u128::MAX);
        if needed > JOINT_ENUMERATION_LIMIT {
            return Err(SolveError::GuardExceeded {
                needed,
                limit: JOINT_ENUMERATION_LIMIT,
            });
        }
        let mut levels = vec![0u32; self.triples.len()];
        let mut best: Option<(Amount, Vec<u32>)> = None;
        loop {
            let reservations: BTreeMap<TripleKey, u32> = self
                .triples
                .iter()
                .zip(&levels)
                .map(|(t, &x)| (t.key.clone(), x))
                .collect();
            let total = self.expected_cost(&reservations)?.expected_total;
            if best.as_ref().is_none_or(|(b, _)| total < *b) {
                best = Some((total, levels.clone()));
            }
            // odometer, last triple fastest
            let mut i = levels.len();
            loop {
                if i == 0 {
                    let (_, winner) = best.expect("at least one vector");
                    return Ok(self.assemble(&winner, false));
                }
                i -= 1;
                if levels[i] < self.triples[i].capacity {
                    levels[i] += 1;
                    break;
                }
                levels[i] = 0;
            }
        }
    }
}

/// Expected cost of a reservation vector.
pub fn expected_cost(instance: &Instance, reservations: &BTreeMap<TripleKey, u32>) -> Result<Solution, SolveError> {
    Model::new(instance)?.expected_cost(reservations)
}

/// Globally optimal reservations for the whole instance.
pub fn solve_instance(instance: &Instance) -> Result<Solution, SolveError> {
    Ok(Model::new(instance)?.solve())
}

/// Verification oracle for separability. See [`Model::joint_enumeration`].
pub fn joint_enumeration_oracle(instance: &Instance) -> Result<Solution, SolveError> {
    Model::new(instance)?.joint_enumeration()
}

/// Expected cost of one triple computed from the two marginals:
/// `R*x + E_b[recourse qubits] + E_a[P*(t - a)^+]`.
pub fn triple_cost(
    rates: &CostRates,
    demand: &Marginal<u32>,
    wait: &Marginal<Seconds>,
    exec_time: Seconds,
    reserved: u32,
) -> Amount {
    let use_reserved = rates.utilize_per_qubit <= rates.on_demand_per_qubit;
    let mut qubits = BigRational::from_integer(BigInt::from(0));
    for (&b, p) in demand.iter() {
        let used = if use_reserved { reserved.min(b) } else { 0 };
        let c = Cost::qubits(used as u64, rates.utilize_per_qubit)
            + Cost::qubits((b - used) as u64, rates.on_demand_per_qubit);
        qubits += p * Amount::from(c).into_rational();
    }
    let mut penalty = BigRational::from_integer(BigInt::from(0));
    for (&a, p) in wait.iter() {
        let c = Cost::over_wait(exec_time.saturating_excess(a), rates.penalty_per_second);
        penalty += p * Amount::from(c).into_rational();
    }
    let first = Amount::from(Cost::qubits(reserved as u64, rates.reserve_per_qubit));
    first + Amount::new(qubits) + Amount::new(penalty)
}

/// Optimal reservation for one triple by marginal analysis, with its exact
/// expected cost (penalty included).
///
/// Returns 0 when utilization is dearer than on-demand: reserved qubits
/// would never be used.
pub fn solve_triple(
    rates: &CostRates,
    demand: &Marginal<u32>,
    wait: &Marginal<Seconds>,
    exec_time: Seconds,
    capacity: u32,
) -> (u32, Amount) {
    let mut best = 0u32;
    if rates.utilize_per_qubit <= rates.on_demand_per_qubit {
        let spread = money_rational(Money::from_micros(
            rates.on_demand_per_qubit.micros() - rates.utilize_per_qubit.micros(),
        ));
        let reserve = money_rational(rates.reserve_per_qubit);
        for x in 1..=capacity {
            let tail: BigRational = demand.iter().filter(|(&b, _)| b >= x).map(|(_, p)| p).sum();
            if &spread * tail > reserve {
                best = x;
            } else {
                break;
            }
        }
    }
    (best, triple_cost(rates, demand, wait, exec_time, best))
}

/// Verification oracle for [`solve_triple`]: evaluates every `x` in
/// `0..=capacity` scenario by scenario and keeps the first minimum.
pub fn brute_force_triple(
    rates: &CostRates,
    demand: &Marginal<u32>,
    wait: &Marginal<Seconds>,
    exec_time: Seconds,
    capacity: u32,
) -> Result<(u32, Amount), SolveError> {
    if capacity > BRUTE_FORCE_CAPACITY_LIMIT {
        return Err(SolveError::GuardExceeded {
            needed: capacity as u128 + 1,
            limit: BRUTE_FORCE_CAPACITY_LIMIT as u128 + 1,
        });
    }
    let space = ScenarioSpace::product("", demand.clone(), wait.clone());
    let mut best: Option<(u32, Amount)> = None;
    for x in 0..=capacity {
        let first = Amount::from(Cost::qubits(x as u64, rates.reserve_per_qubit));
        let second = space.expected_cost(|s| optimal_recourse(x, s, rates, exec_time).cost);
        let total = first + second;
        if best.as_ref().is_none_or(|(_, b)| total < *b) {
            best = Some((x, total));
        }
    }
    Ok(best.expect("capacity range is never empty"))
}

fn money_rational(m: Money) -> BigRational {
    Amount::from(m).into_rational()
}
