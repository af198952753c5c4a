// Copyright 2026 The qres Authors
// SPDX-License-Identifier: Apache-2.0

mod common;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use qres_core::solver::triple_cost;
use qres_core::{
    build_space, load_instance, serialize_instance, synth_exec_time, validate, Amount, Cost, CostRates, Marginal,
    Model, Money, Seconds, Severity,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{random_instance, seeded, Shape};

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1u32..50, n).prop_map(|w| {
        let total: u32 = w.iter().sum();
        w.into_iter().map(|k| k as f64 / total as f64).collect()
    })
}

fn space_inputs() -> impl Strategy<Value = (Vec<u32>, Vec<f64>, Vec<Seconds>, Vec<f64>)> {
    (1usize..6, 1usize..5)
        .prop_flat_map(|(nd, nw)| {
            (
                prop::collection::btree_set(0u32..40, nd).prop_map(|s| s.into_iter().collect::<Vec<_>>()),
                weights(nd),
                prop::collection::btree_set(0i64..20_000, nw)
                    .prop_map(|s| s.into_iter().map(Seconds::from_micros).collect::<Vec<_>>()),
                weights(nw),
            )
        })
        .prop_filter("set sizes shrink on collisions", |(d, dp, w, wp)| {
            d.len() == dp.len() && w.len() == wp.len()
        })
}

proptest! {
    #![proptest_config(seeded(128, 0x5eed_0101))]

    #[test]
    fn scenario_probabilities_sum_to_one((demand, dp, waits, wp) in space_inputs()) {
        let space = build_space("c", demand.clone(), waits.clone(), Some(&dp), Some(&wp)).unwrap();
        prop_assert_eq!(space.len(), demand.len() * waits.len());
        let total: BigRational = space.probabilities().iter().sum();
        prop_assert!(total.is_one());
        prop_assert!(space.probabilities().iter().all(|p| *p > BigRational::zero()));
        // demand-major order
        prop_assert_eq!(space.scenarios()[0].demand_qubits, demand[0]);
        if waits.len() > 1 {
            prop_assert_eq!(space.scenarios()[1].demand_qubits, demand[0]);
            prop_assert_eq!(space.scenarios()[1].wait_time, waits[1]);
        }
    }

    #[test]
    fn expectation_is_linear((demand, dp, waits, wp) in space_inputs(), a in -50i64..50, b in -50i64..50) {
        let space = build_space("c", demand, waits, Some(&dp), Some(&wp)).unwrap();
        let f = |s: &qres_core::Scenario| BigRational::from_integer(BigInt::from(s.demand_qubits));
        let g = |s: &qres_core::Scenario| s.wait_time.as_rational();
        let (ra, rb) = (BigRational::from_integer(a.into()), BigRational::from_integer(b.into()));
        let lhs = space.expectation_exact(|s| &ra * f(s) + &rb * g(s));
        let rhs = &ra * space.expectation_exact(f) + &rb * space.expectation_exact(g);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn triple_cost_is_convex_and_penalty_decision_free(
        (demand, dp, waits, wp) in space_inputs(),
        r in 0i64..5_000_000, u in 0i64..5_000_000, o in 0i64..10_000_000, p in 0i64..20_000_000,
        exec in 0i64..20_000,
    ) {
        let rates = CostRates {
            reserve_per_qubit: Money::from_micros(r),
            utilize_per_qubit: Money::from_micros(u),
            on_demand_per_qubit: Money::from_micros(o),
            penalty_per_second: Money::from_micros(p),
        };
        let dm = Marginal::new("demand", demand, Some(&dp)).unwrap();
        let wm = Marginal::new("wait", waits, Some(&wp)).unwrap();
        let exec = Seconds::from_micros(exec);
        let costs: Vec<Amount> = (0..=45).map(|x| triple_cost(&rates, &dm, &wm, exec, x)).collect();
        for w in costs.windows(3) {
            let d1 = &w[1] - &w[0];
            let d2 = &w[2] - &w[1];
            prop_assert!(d1 <= d2, "not convex");
        }
        let penalty_only = triple_cost(&CostRates { reserve_per_qubit: Money::ZERO, utilize_per_qubit: Money::ZERO, on_demand_per_qubit: Money::ZERO, ..rates }, &dm, &wm, exec, 0);
        for x in [0, 3, 17, 45] {
            let no_penalty = triple_cost(&CostRates { penalty_per_second: Money::ZERO, ..rates }, &dm, &wm, exec, x);
            prop_assert_eq!(&no_penalty + &penalty_only, costs[x as usize].clone());
        }
    }

    #[test]
    fn synthetic_time_is_monotone(n in 1u32..=16, v in any::<u64>(), base in 1i64..10_000, slope in 1i64..1_000) {
        let v = v & ((1u64 << n) - 1);
        let (b, s) = (Seconds::from_micros(base), Seconds::from_micros(slope));
        let t = synth_exec_time(n, v, b, s).unwrap();
        if n < 16 {
            prop_assert!(synth_exec_time(n + 1, v, b, s).unwrap() >= t);
        }
        if v.count_ones() < n {
            let more = v | (1u64 << v.trailing_ones());
            prop_assert!(synth_exec_time(n, more, b, s).unwrap() > t);
        }
    }
}

#[test]
fn expected_cost_non_increasing_second_stage() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0102);
    for _ in 0..30 {
        let inst = random_instance(&mut rng, Shape::SMALL);
        let model = Model::new(&inst).unwrap();
        let cap = model.min_capacity().unwrap();
        let mut previous: Option<Amount> = None;
        let mut penalty: Option<Amount> = None;
        for x in 0..=cap {
            let sol = model.expected_cost(&model.uniform_reservations(x)).unwrap();
            let cheap_use = model
                .triples()
                .iter()
                .all(|t| t.rates.utilize_per_qubit <= t.rates.on_demand_per_qubit);
            if cheap_use {
                if let Some(prev) = &previous {
                    assert!(sol.expected_second_stage <= *prev);
                }
            }
            previous = Some(sol.expected_second_stage.clone());
            match &penalty {
                Some(p) => assert_eq!(*p, sol.expected_penalty),
                None => penalty = Some(sol.expected_penalty.clone()),
            }
        }
    }
}

#[test]
fn instance_json_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0103);
    for _ in 0..50 {
        let inst = random_instance(&mut rng, Shape::SMALL);
        assert!(validate(&inst).iter().all(|d| d.severity != Severity::Error));
        let text = serialize_instance(&inst);
        assert_eq!(load_instance(&text).unwrap(), inst);
        assert_eq!(serialize_instance(&load_instance(&text).unwrap()), text);
    }
}

#[test]
fn expected_over_wait_for_uniform_waits() {
    let waits: Vec<Seconds> = (1..=9).map(|k| Seconds::from_micros(k * 1000)).collect();
    let space = build_space("c", vec![0], waits, None, None).unwrap();
    let exec = Seconds::from_micros(5000);
    let over = space.expected_seconds(|s| exec.saturating_excess(s.wait_time));
    assert_eq!(*over.as_rational(), BigRational::new(1.into(), 900.into()));
    let penalty =
        space.expected_cost(|s| Cost::over_wait(exec.saturating_excess(s.wait_time), Money::from_micros(10_000_000)));
    assert_eq!(*penalty.as_rational(), BigRational::new(1.into(), 90.into()));
}
