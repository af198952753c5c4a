// Copyright 2026 The qres Authors
// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::path::PathBuf;

use proptest::test_runner::{Config, RngSeed};
use qres_core::instance::Circuit;
use qres_core::{load_instance_file, CostRates, Instance, Machine, Seconds, TripleKey};
use rand::seq::SliceRandom;
use rand::Rng;

pub const RATE_MENU: [f64; 8] = [0.0, 0.1, 0.5, 1.0, 1.68, 3.0, 7.0, 10.0];

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn reference_instance() -> Instance {
    load_instance_file(&data_path("reference.json")).expect("reference instance loads")
}

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_circuits: usize,
    pub max_providers: usize,
    pub max_machines: usize,
    pub max_triples: usize,
    pub max_capacity: i64,
    pub max_demand: u32,
    pub max_demand_values: usize,
    pub max_wait_values: usize,
}

impl Shape {
    pub const SMALL: Shape = Shape {
        max_circuits: 2,
        max_providers: 2,
        max_machines: 2,
        max_triples: 2,
        max_capacity: 8,
        max_demand: 10,
        max_demand_values: 4,
        max_wait_values: 3,
    };
}

fn sorted_subset<T: Copy + Ord>(rng: &mut impl Rng, pool: &[T], max: usize) -> Vec<T> {
    let k = rng.gen_range(1..=max.min(pool.len()));
    let mut v: Vec<T> = pool.choose_multiple(rng, k).copied().collect();
    v.sort();
    v
}

/// Probabilities that are multiples of 1/20, so every one is an exact
/// short decimal.
fn twentieths(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut w = vec![1u32; n];
    for _ in n..20 {
        w[rng.gen_range(0..n)] += 1;
    }
    w.into_iter().map(|k| k as f64 / 20.0).collect()
}

fn random_rates(rng: &mut impl Rng) -> CostRates {
    let mut pick = || *RATE_MENU.choose(rng).expect("non-empty");
    CostRates::from_dollars(pick(), pick(), pick(), pick())
}

/// A valid random instance within `shape`. When `total_triples` exceeds
/// `shape.max_triples`, machines are dropped until it fits.
pub fn random_instance(rng: &mut impl Rng, shape: Shape) -> Instance {
    let mut inst = Instance::default();
    let n_circuits = rng.gen_range(1..=shape.max_circuits);
    let n_providers = rng.gen_range(1..=shape.max_providers);
    for c in 0..n_circuits {
        let mut circuit = Circuit::new(format!("c{c}"));
        circuit.num_qubits = Some(rng.gen_range(1..=16));
        inst.circuits.push(circuit);
    }
    for p in 0..n_providers {
        inst.providers.push(format!("p{p}"));
    }
    let budget = (shape.max_triples / n_circuits).max(1);
    let mut machines = Vec::new();
    for p in 0..n_providers {
        for m in 0..rng.gen_range(1..=shape.max_machines) {
            machines.push((p, m));
        }
    }
    machines.shuffle(rng);
    machines.truncate(budget);
    machines.sort();
    for (p, m) in machines {
        inst.machines.push(Machine {
            provider_id: format!("p{p}"),
            machine_id: format!("m{m}"),
            capacity_qubits: rng.gen_range(0..=shape.max_capacity),
        });
    }
    let demand_pool: Vec<u32> = (0..=shape.max_demand).collect();
    let wait_pool: Vec<i64> = (0..=9).map(|k| k * 1000).collect();
    for c in inst.circuits.clone() {
        for p in &inst.providers {
            inst.rates.insert((c.id.clone(), p.clone()), random_rates(rng));
        }
        let demand = sorted_subset(rng, &demand_pool, shape.max_demand_values);
        let waits = sorted_subset(rng, &wait_pool, shape.max_wait_values);
        if rng.gen_bool(0.5) {
            inst.demand_probs.insert(c.id.clone(), twentieths(rng, demand.len()));
        }
        if rng.gen_bool(0.5) {
            inst.wait_probs.insert(c.id.clone(), twentieths(rng, waits.len()));
        }
        inst.demand_sets.insert(c.id.clone(), demand);
        inst.wait_sets
            .insert(c.id.clone(), waits.into_iter().map(Seconds::from_micros).collect());
        for m in &inst.machines {
            let key = TripleKey::new(c.id.clone(), m.provider_id.clone(), m.machine_id.clone());
            inst.exec_times
                .insert(key, Seconds::from_micros(rng.gen_range(0..=10) * 1000));
        }
    }
    inst
}

/// Property-test configuration with a fixed seed.
pub fn seeded(cases: u32, seed: u64) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: None,
        ..Config::default()
    }
}
