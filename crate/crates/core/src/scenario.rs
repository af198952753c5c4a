// Copyright 2026 The qres Authors
// SPDX-License-Identifier: Apache-2.0

//! Finite scenario spaces: the product of a circuit's demand set and
//! waiting-time set, with exact rational probabilities.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::instance::{exact_prob_sum, within_prob_tolerance, Instance};
use crate::units::{exact_decimal, Amount, Cost, Seconds};

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("{0} set is empty")]
    EmptySet(&'static str),
    #[error("{which} probabilities have {got} entries, expected {expected}")]
    ProbabilityLength {
        which: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{which} probabilities contain a negative or non-finite entry")]
    InvalidProbability { which: &'static str },
    #[error("{which} probabilities sum to {sum}, expected 1 within 1e-9")]
    Normalization { which: &'static str, sum: f64 },
    #[error("circuit `{0}` has no uncertainty sets in the instance")]
    UnknownCircuit(String),
}

/// A finite distribution over `values` with exact probabilities that sum
/// to one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Marginal<T> {
    values: Vec<T>,
    probs: Vec<BigRational>,
}

fn normalized(which: &'static str, probs: &[f64], len: usize) -> Result<Vec<BigRational>, ScenarioError> {
    if probs.len() != len {
        return Err(ScenarioError::ProbabilityLength {
            which,
            expected: len,
            got: probs.len(),
        });
    }
    let sum = exact_prob_sum(probs).ok_or(ScenarioError::InvalidProbability { which })?;
    if !within_prob_tolerance(&sum) {
        return Err(ScenarioError::Normalization {
            which,
            sum: probs.iter().sum(),
        });
    }
    Ok(probs
        .iter()
        .map(|&p| exact_decimal(p).expect("checked finite") / &sum)
        .collect())
}

impl<T: Clone> Marginal<T> {
    pub fn uniform(which: &'static str, values: Vec<T>) -> Result<Self, ScenarioError> {
        if values.is_empty() {
            return Err(ScenarioError::EmptySet(which));
        }
        let p = BigRational::new(BigInt::one(), BigInt::from(values.len()));
        let probs = vec![p; values.len()];
        Ok(Marginal { values, probs })
    }

    /// Uses `probs` when given (rescaled exactly to sum to one), otherwise
    /// uniform.
    pub fn new(which: &'static str, values: Vec<T>, probs: Option<&[f64]>) -> Result<Self, ScenarioError> {
        match probs {
            None => Self::uniform(which, values),
            Some(p) => {
                if values.is_empty() {
                    return Err(ScenarioError::EmptySet(which));
                }
                let probs = normalized(which, p, values.len())?;
                Ok(Marginal { values, probs })
            }
        }
    }

    /// Takes already-exact probabilities. They must be non-negative and sum
    /// to exactly one.
    pub fn from_exact(which: &'static str, values: Vec<T>, probs: Vec<BigRational>) -> Result<Self, ScenarioError> {
        if values.is_empty() {
            return Err(ScenarioError::EmptySet(which));
        }
        if probs.len() != values.len() {
            return Err(ScenarioError::ProbabilityLength {
                which,
                expected: values.len(),
                got: probs.len(),
            });
        }
        if probs.iter().any(Signed::is_negative) {
            return Err(ScenarioError::InvalidProbability { which });
        }
        let sum: BigRational = probs.iter().sum();
        if !sum.is_one() {
            return Err(ScenarioError::Normalization {
                which,
                sum: sum.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Marginal { values, probs })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn probs(&self) -> &[BigRational] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, &BigRational)> {
        self.values.iter().zip(&self.probs)
    }
}

/// One joint realization of demand and waiting time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scenario {
    pub demand_qubits: u32,
    pub wait_time: Seconds,
    /// Position within the owning space.
    pub index: usize,
}

/// The scenario space of one circuit, ordered demand-major then by wait
/// time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpace {
    circuit_id: String,
    demand: Marginal<u32>,
    wait: Marginal<Seconds>,
    scenarios: Vec<Scenario>,
    probabilities: Vec<BigRational>,
    // P(w) = weights[w] / denominator
    weights: Vec<BigInt>,
    denominator: BigInt,
    probabilities_f64: Vec<f64>,
}

impl ScenarioSpace {
    /// Independent product of the two marginals.
    pub fn product(circuit_id: impl Into<String>, demand: Marginal<u32>, wait: Marginal<Seconds>) -> Self {
        let mut probs = Vec::with_capacity(demand.len() * wait.len());
        for (_, pb) in demand.iter() {
            for (_, pa) in wait.iter() {
                probs.push(pb * pa);
            }
        }
        Self::assemble(circuit_id.into(), demand, wait, probs)
    }

    /// Explicit joint table indexed `[demand][wait]`. The marginals are
    /// derived from it.
    pub fn joint(
        circuit_id: impl Into<String>,
        demand_set: Vec<u32>,
        wait_set: Vec<Seconds>,
        table: &[Vec<f64>],
    ) -> Result<Self, ScenarioError> {
        if demand_set.is_empty() {
            return Err(ScenarioError::EmptySet("demand"));
        }
        if wait_set.is_empty() {
            return Err(ScenarioError::EmptySet("wait"));
        }
        if table.len() != demand_set.len() || table.iter().any(|r| r.len() != wait_set.len()) {
            return Err(ScenarioError::ProbabilityLength {
                which: "joint",
                expected: demand_set.len() * wait_set.len(),
                got: table.iter().map(Vec::len).sum(),
            });
        }
        let flat: Vec<f64> = table.iter().flatten().copied().collect();
        let probs = normalized("joint", &flat, flat.len())?;
        let nw = wait_set.len();
        let demand_probs = (0..demand_set.len())
            .map(|i| probs[i * nw..(i + 1) * nw].iter().sum())
            .collect();
        let wait_probs = (0..nw).map(|j| probs.iter().skip(j).step_by(nw).sum()).collect();
        let demand = Marginal::from_exact("demand", demand_set, demand_probs)?;
        let wait = Marginal::from_exact("wait", wait_set, wait_probs)?;
        Ok(Self::assemble(circuit_id.into(), demand, wait, probs))
    }

    fn assemble(
        circuit_id: String,
        demand: Marginal<u32>,
        wait: Marginal<Seconds>,
        probabilities: Vec<BigRational>,
    ) -> Self {
        let mut scenarios = Vec::with_capacity(probabilities.len());
        for &b in demand.values() {
            for &a in wait.values() {
                scenarios.push(Scenario {
                    demand_qubits: b,
                    wait_time: a,
                    index: scenarios.len(),
                });
            }
        }
        let denominator = probabilities.iter().fold(BigInt::one(), |acc, p| acc.lcm(p.denom()));
        let weights = probabilities
            .iter()
            .map(|p| p.numer() * (&denominator / p.denom()))
            .collect();
        let probabilities_f64 = probabilities.iter().map(|p| p.to_f64().unwrap_or(f64::NAN)).collect();
        ScenarioSpace {
            circuit_id,
            demand,
            wait,
            scenarios,
            probabilities,
            weights,
            denominator,
            probabilities_f64,
        }
    }

    /// The circuit's space as described by the instance.
    pub fn from_instance(instance: &Instance, circuit_id: &str) -> Result<Self, ScenarioError> {
        let demand = instance
            .demand_sets
            .get(circuit_id)
            .ok_or_else(|| ScenarioError::UnknownCircuit(circuit_id.into()))?;
        let wait = instance
            .wait_sets
            .get(circuit_id)
            .ok_or_else(|| ScenarioError::UnknownCircuit(circuit_id.into()))?;
        if let Some(table) = instance.joint_probs.get(circuit_id) {
            return Self::joint(circuit_id, demand.clone(), wait.clone(), table);
        }
        build_space(
            circuit_id,
            demand.clone(),
            wait.clone(),
            instance.demand_probs.get(circuit_id).map(Vec::as_slice),
            instance.wait_probs.get(circuit_id).map(Vec::as_slice),
        )
    }

    pub fn circuit_id(&self) -> &str {
        &self.circuit_id
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn probabilities(&self) -> &[BigRational] {
        &self.probabilities
    }

    pub fn probability(&self, index: usize) -> &BigRational {
        &self.probabilities[index]
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn demand_marginal(&self) -> &Marginal<u32> {
        &self.demand
    }

    pub fn wait_marginal(&self) -> &Marginal<Seconds> {
        &self.wait
    }

    /// Least common denominator of all scenario probabilities.
    pub fn common_denominator(&self) -> &BigInt {
        &self.denominator
    }

    /// Integer weight of a scenario over [`Self::common_denominator`].
    pub fn weight(&self, index: usize) -> &BigInt {
        &self.weights[index]
    }

    /// `sum P(w) f(w)` in scenario order, with `f64` probabilities.
    pub fn expectation<F: Fn(&Scenario) -> f64>(&self, f: F) -> f64 {
        self.scenarios
            .iter()
            .zip(&self.probabilities_f64)
            .map(|(s, p)| p * f(s))
            .sum()
    }

    /// Exact expectation of a rational-valued function.
    pub fn expectation_exact<F: Fn(&Scenario) -> BigRational>(&self, f: F) -> BigRational {
        self.scenarios
            .iter()
            .zip(&self.probabilities)
            .fold(BigRational::zero(), |acc, (s, p)| acc + p * f(s))
    }

    /// Exact expectation of a per-scenario cost, in dollars.
    pub fn expected_cost<F: FnMut(&Scenario) -> Cost>(&self, mut f: F) -> Amount {
        let mut acc = BigInt::zero();
        for (s, w) in self.scenarios.iter().zip(&self.weights) {
            let c = f(s).picos();
            if c != 0 && !w.is_zero() {
                acc += w * BigInt::from(c);
            }
        }
        Amount::new(BigRational::new(
            acc,
            &self.denominator * BigInt::from(1_000_000_000_000_i64),
        ))
    }

    /// Exact expectation of a per-scenario duration, in seconds.
    pub fn expected_seconds<F: FnMut(&Scenario) -> Seconds>(&self, mut f: F) -> Amount {
        let mut acc = BigInt::zero();
        for (s, w) in self.scenarios.iter().zip(&self.weights) {
            acc += w * BigInt::from(f(s).micros());
        }
        Amount::new(BigRational::new(acc, &self.denominator * BigInt::from(1_000_000_i64)))
    }
}

/// Cartesian product of the demand and waiting-time sets with
/// `P(b, a) = P(b) P(a)`; missing marginals default to uniform.
pub fn build_space(
    circuit_id: impl Into<String>,
    demand_set: Vec<u32>,
    wait_set: Vec<Seconds>,
    demand_probs: Option<&[f64]>,
    wait_probs: Option<&[f64]>,
) -> Result<ScenarioSpace, ScenarioError> {
    let demand = Marginal::new("demand", demand_set, demand_probs)?;
    let wait = Marginal::new("wait", wait_set, wait_probs)?;
    Ok(ScenarioSpace::product(circuit_id, demand, wait))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn secs(v: &[f64]) -> Vec<Seconds> {
        v.iter().map(|&s| Seconds::from_secs(s)).collect()
    }

    fn reference_space() -> ScenarioSpace {
        let waits: Vec<Seconds> = (1..=9).map(|k| Seconds::from_micros(k * 1000)).collect();
        build_space("qft", (10..=22).collect(), waits, None, None).unwrap()
    }

    #[test]
    fn reference_space_is_uniform_over_117() {
        let space = reference_space();
        assert_eq!(space.len(), 117);
        let p = BigRational::new(1.into(), 117.into());
        assert!(space.probabilities().iter().all(|q| *q == p));
        assert_eq!(space.common_denominator(), &BigInt::from(117));
    }

    #[test]
    fn singleton_product() {
        let space = build_space("c", vec![5], secs(&[0.002]), None, None).unwrap();
        assert_eq!(space.len(), 1);
        assert!(space.probability(0).is_one());
        assert_eq!(space.scenarios()[0].demand_qubits, 5);
    }

    #[test]
    fn weighted_demand_with_singleton_wait() {
        let space = build_space("c", vec![1, 2], secs(&[1.0]), Some(&[0.3, 0.7]), None).unwrap();
        assert_eq!(space.probability(0), &BigRational::new(3.into(), 10.into()));
        assert_eq!(space.probability(1), &BigRational::new(7.into(), 10.into()));
    }

    #[test]
    fn demand_major_ordering() {
        let space = build_space("c", vec![1, 2], secs(&[0.1, 0.2, 0.3]), None, None).unwrap();
        let order: Vec<(u32, i64)> = space
            .scenarios()
            .iter()
            .map(|s| (s.demand_qubits, s.wait_time.micros()))
            .collect();
        assert_eq!(
            order,
            vec![
                (1, 100_000),
                (1, 200_000),
                (1, 300_000),
                (2, 100_000),
                (2, 200_000),
                (2, 300_000)
            ]
        );
        assert!(space.scenarios().iter().enumerate().all(|(i, s)| s.index == i));
    }

    #[test]
    fn build_errors() {
        assert_eq!(
            build_space("c", vec![], secs(&[1.0]), None, None).unwrap_err(),
            ScenarioError::EmptySet("demand")
        );
        assert!(matches!(
            build_space("c", vec![1, 2], secs(&[1.0]), Some(&[1.0]), None),
            Err(ScenarioError::ProbabilityLength { .. })
        ));
        assert!(matches!(
            build_space("c", vec![1, 2], secs(&[1.0]), Some(&[0.5, 0.4]), None),
            Err(ScenarioError::Normalization { .. })
        ));
        assert!(matches!(
            build_space("c", vec![1, 2], secs(&[1.0]), Some(&[1.5, -0.5]), None),
            Err(ScenarioError::InvalidProbability { .. })
        ));
    }

    #[test]
    fn expectation_examples() {
        let space = reference_space();
        assert!((space.expectation(|_| 1.0) - 1.0).abs() < 1e-12);
        assert!((space.expectation(|s| s.demand_qubits as f64) - 16.0).abs() < 1e-12);

        // (0.005 - a)^+ over a = 0.001..0.009 sums to 0.010 across nine values.
        let t = Seconds::from_micros(5000);
        let exact = space.expected_seconds(|s| t.saturating_excess(s.wait_time));
        assert_eq!(exact.as_rational(), &BigRational::new(1.into(), 900.into()));
        let approx = space.expectation(|s| t.saturating_excess(s.wait_time).as_secs());
        assert!((approx - 0.010 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn joint_table_overrides_marginals() {
        let table = vec![vec![0.1, 0.2], vec![0.3, 0.4]];
        let space = ScenarioSpace::joint("c", vec![1, 2], secs(&[0.1, 0.2]), &table).unwrap();
        assert_eq!(space.probability(3), &BigRational::new(2.into(), 5.into()));
        assert_eq!(
            space.demand_marginal().probs()[0],
            BigRational::new(3.into(), 10.into())
        );
        assert_eq!(space.wait_marginal().probs()[1], BigRational::new(3.into(), 5.into()));
    }

    #[test]
    fn tolerance_slack_is_renormalized_exactly() {
        let space = build_space("c", vec![1, 2], secs(&[1.0]), Some(&[0.5, 0.5000000001]), None).unwrap();
        let total: BigRational = space.probabilities().iter().sum();
        assert!(total.is_one());
    }
}
