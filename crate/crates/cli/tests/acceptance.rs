// Copyright 2026 The qres Authors
// SPDX-License-Identifier: Apache-2.0

//! Acceptance criteria, one check each. Every check prints a PASS/FAIL line
//! to standard error (uncaptured) and the test fails if any check fails.
//!
//! Oracles here are written independently of the library's own solvers:
//! exhaustive loops over integer decisions, hand sums, and closed forms.

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use qres_core::extensive::lp_string;
use qres_core::instance::Circuit;
use qres_core::{
    build_extensive_form, build_space, joint_enumeration_oracle, load_instance_file, optimal_recourse, parse_lp,
    solve_enumerative, solve_instance, sweep_reservation, sweep_reservation_waiting, Amount, Cost, CostRates,
    ExtensiveForm, Fixed, Instance, Machine, Model, Money, Row, Scenario, Seconds, Sense, TripleKey, VarKind, Variable,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, started: Instant) -> Check {
    let took = started.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn reference() -> Instance {
    load_instance_file(&data("reference.json")).expect("reference instance")
}

fn money(micros: i64) -> Amount {
    Amount::from(Money::from_micros(micros))
}

// ---------------------------------------------------------------------------
// Random instances and forms
// ---------------------------------------------------------------------------

const RATE_MENU: [f64; 8] = [0.0, 0.1, 0.5, 1.0, 1.68, 3.0, 7.0, 10.0];

fn sorted_pick<T: Copy + Ord>(rng: &mut ChaCha8Rng, pool: &[T], max: usize) -> Vec<T> {
    let k = rng.gen_range(1..=max.min(pool.len()));
    let mut v: Vec<T> = pool.choose_multiple(rng, k).copied().collect();
    v.sort();
    v
}

/// Multiples of 1/10, so every probability is a short exact decimal.
fn tenths(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut w = vec![1u32; n];
    for _ in n..10 {
        w[rng.gen_range(0..n)] += 1;
    }
    w.into_iter().map(|k| k as f64 / 10.0).collect()
}

/// At most two triples: one circuit on two machines or two circuits on one.
fn random_instance(rng: &mut ChaCha8Rng, max_capacity: i64, max_demand: u32) -> Instance {
    let mut inst = Instance::default();
    let two_circuits = rng.gen_bool(0.5);
    let n_circuits = if two_circuits { 2 } else { 1 };
    let n_machines = if two_circuits { 1 } else { rng.gen_range(1..=2) };
    for c in 0..n_circuits {
        inst.circuits.push(Circuit::new(format!("c{c}")));
    }
    let n_providers = rng.gen_range(1..=n_machines);
    for p in 0..n_providers {
        inst.providers.push(format!("p{p}"));
    }
    for m in 0..n_machines {
        inst.machines.push(Machine {
            provider_id: format!("p{}", m % n_providers),
            machine_id: format!("m{m}"),
            capacity_qubits: rng.gen_range(0..=max_capacity),
        });
    }
    let demand_pool: Vec<u32> = (0..=max_demand).collect();
    let wait_pool: Vec<i64> = (0..=8).map(|k| k * 1000).collect();
    for c in inst.circuits.clone() {
        for p in inst.providers.clone() {
            let mut pick = || *RATE_MENU.choose(rng).unwrap();
            inst.rates.insert(
                (c.id.clone(), p),
                CostRates::from_dollars(pick(), pick(), pick(), pick()),
            );
        }
        let demand = sorted_pick(rng, &demand_pool, 4);
        let waits = sorted_pick(rng, &wait_pool, 3);
        if rng.gen_bool(0.5) {
            inst.demand_probs.insert(c.id.clone(), tenths(rng, demand.len()));
        }
        if rng.gen_bool(0.5) {
            inst.wait_probs.insert(c.id.clone(), tenths(rng, waits.len()));
        }
        inst.demand_sets.insert(c.id.clone(), demand);
        inst.wait_sets
            .insert(c.id.clone(), waits.into_iter().map(Seconds::from_micros).collect());
        for m in inst.machines.clone() {
            inst.exec_times.insert(
                TripleKey::new(c.id.clone(), m.provider_id, m.machine_id),
                Seconds::from_micros(rng.gen_range(0..=9) * 1000),
            );
        }
    }
    inst
}

fn random_fixed(rng: &mut ChaCha8Rng) -> Fixed {
    Fixed::from_raw(rng.gen_range(-9_999_999_999i64..=9_999_999_999) as i128)
}

fn random_form(rng: &mut ChaCha8Rng) -> ExtensiveForm {
    let n = rng.gen_range(1..=15);
    let variables: Vec<Variable> = (0..n)
        .map(|i| {
            let lower = random_fixed(rng);
            Variable {
                name: format!("v{i}_{}", rng.gen_range(0..1000)),
                kind: if rng.gen_bool(0.5) {
                    VarKind::Integer
                } else {
                    VarKind::Continuous
                },
                lower,
                upper: rng
                    .gen_bool(0.5)
                    .then(|| Fixed::from_raw(lower.raw() + rng.gen_range(0..1_000_000_000))),
            }
        })
        .collect();
    let terms = |rng: &mut ChaCha8Rng, lo: usize, hi: usize| -> Vec<(usize, Fixed)> {
        (0..rng.gen_range(lo..=hi))
            .map(|_| (rng.gen_range(0..n), random_fixed(rng)))
            .collect()
    };
    let objective = terms(rng, 0, 20);
    let constraints = (0..rng.gen_range(0..10))
        .map(|i| Row {
            name: format!("r{i}"),
            terms: terms(rng, 1, 12),
            sense: if rng.gen_bool(0.5) { Sense::Le } else { Sense::Ge },
            rhs: random_fixed(rng),
        })
        .collect();
    ExtensiveForm {
        variables,
        objective,
        constraints,
        objective_scale: rng.gen_range(1..10_000),
    }
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

/// Reference instance: `solve --oracle` under a second, every triple at the
/// brute-force argmin, and that argmin is 19.
fn reference_optimum() -> Check {
    let started = Instant::now();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let path = data("reference.json");
    let code = qres_cli::run(
        ["qres", "solve", "--oracle", path.to_str().unwrap()],
        &mut out,
        &mut err,
    );
    within(Duration::from_secs(1), started)?;
    ensure(code == 0, || format!("exit {code}: {}", String::from_utf8_lossy(&err)))?;

    let inst = reference();
    let model = Model::new(&inst).map_err(|e| e.to_string())?;
    let solved = model.solve();
    for t in model.triples() {
        // scan every level scenario by scenario
        let mut best: Option<(u32, Amount)> = None;
        for x in 0..=t.capacity {
            let mut cost = Amount::from(Cost::qubits(x as u64, t.rates.reserve_per_qubit));
            for (s, p) in t.space.scenarios().iter().zip(t.space.probabilities()) {
                let used = x.min(s.demand_qubits);
                let c = Cost::qubits(used as u64, t.rates.utilize_per_qubit)
                    + Cost::qubits((s.demand_qubits - used) as u64, t.rates.on_demand_per_qubit)
                    + Cost::over_wait(t.exec_time.saturating_excess(s.wait_time), t.rates.penalty_per_second);
                cost = cost + &Amount::from(c) * p;
            }
            if best.as_ref().is_none_or(|(_, b)| cost < *b) {
                best = Some((x, cost));
            }
        }
        let (x, cost) = best.unwrap();
        ensure(x == 19, || format!("{}: brute force argmin {x}, expected 19", t.key))?;
        ensure(solved.reservations[&t.key] == x, || {
            format!("{}: solver picks {}", t.key, solved.reservations[&t.key])
        })?;
        ensure(solved.per_triple[&t.key].total == cost, || {
            format!("{}: cost mismatch", t.key)
        })?;
    }
    let text = String::from_utf8(out).unwrap();
    ensure(
        text.lines().filter(|l| l.split(',').nth(3) == Some("19")).count() == 6,
        || text.clone(),
    )
}

/// Closed-form recourse against exhaustive `(xu, xo)` enumeration.
fn recourse_grid() -> Check {
    let started = Instant::now();
    let rates_grid = [0.0, 0.1, 1.0, 7.0, 10.0];
    let exec = Seconds::from_micros(5000);
    let waits = [0, 2000, 5000, 8000].map(Seconds::from_micros);
    let mut mismatches = 0usize;
    for &u in &rates_grid {
        for &o in &rates_grid {
            let rates = CostRates::from_dollars(1.68, u, o, 10.0);
            for reserved in 0..=8u32 {
                for demand in 0..=8u32 {
                    let mut best: Option<Cost> = None;
                    for xu in 0..=reserved {
                        for xo in 0..=demand + 2 {
                            if xu + xo >= demand {
                                let c = Cost::qubits(xu as u64, rates.utilize_per_qubit)
                                    + Cost::qubits(xo as u64, rates.on_demand_per_qubit);
                                best = Some(best.map_or(c, |b: Cost| b.min(c)));
                            }
                        }
                    }
                    for &w in &waits {
                        let s = Scenario {
                            demand_qubits: demand,
                            wait_time: w,
                            index: 0,
                        };
                        let y = Seconds::from_micros((exec.micros() - w.micros()).max(0));
                        let want = best.unwrap() + Cost::over_wait(y, rates.penalty_per_second);
                        let got = optimal_recourse(reserved, &s, &rates, exec);
                        if got.cost != want || !got.is_feasible_for(reserved, &s, &rates, exec) {
                            mismatches += 1;
                        }
                    }
                }
            }
        }
    }
    ensure(mismatches == 0, || format!("{mismatches} mismatches"))?;
    within(Duration::from_secs(5), started)
}

/// Per-triple solution against the joint scan on random instances.
fn separability() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0003);
    for case in 0..50 {
        let inst = random_instance(&mut rng, 8, 12);
        let fast = solve_instance(&inst).map_err(|e| format!("case {case}: {e}"))?;
        let joint = joint_enumeration_oracle(&inst).map_err(|e| format!("case {case}: {e}"))?;
        ensure(fast.reservations == joint.reservations, || {
            format!("case {case}: argmin differs")
        })?;
        ensure(fast.expected_total == joint.expected_total, || {
            format!("case {case}: value differs")
        })?;
    }
    within(Duration::from_secs(30), started)
}

/// Enumerating the deterministic equivalent reproduces the solver.
fn deterministic_equivalent() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0004);
    for case in 0..20 {
        let inst = random_instance(&mut rng, 5, 6);
        let form = build_extensive_form(&inst).map_err(|e| format!("case {case}: {e}"))?;
        let enumerated = solve_enumerative(&form, 10_000_000).map_err(|e| format!("case {case}: {e}"))?;
        let solved = solve_instance(&inst).map_err(|e| format!("case {case}: {e}"))?;
        ensure(enumerated.objective == solved.expected_total, || {
            format!(
                "case {case}: {} vs {}",
                enumerated.objective.to_fixed6(),
                solved.expected_total.to_fixed6()
            )
        })?;
    }
    Ok(())
}

/// Reservation curve: linear first stage, falling second stage, convex
/// total, no on-demand purchases once every demand is reserved.
fn reservation_curve() -> Check {
    let curve = sweep_reservation(&reference(), &(0..=30).collect::<Vec<_>>()).map_err(|e| e.to_string())?;
    ensure(curve.points.len() == 31, || "wrong point count".into())?;
    let slope = money(6 * 1_680_000);
    for w in curve.points.windows(2) {
        ensure(&w[1].first_stage - &w[0].first_stage == slope, || {
            format!("slope breaks at {}", w[1].reserved)
        })?;
        ensure(w[1].second_stage <= w[0].second_stage, || {
            format!("second stage rises at {}", w[1].reserved)
        })?;
    }
    for w in curve.points.windows(3) {
        ensure(&w[1].total - &w[0].total <= &w[2].total - &w[1].total, || {
            format!("not convex at {}", w[1].reserved)
        })?;
    }
    for p in curve.points.iter().filter(|p| p.reserved >= 22) {
        ensure(p.on_demand.is_zero(), || format!("on-demand cost at {}", p.reserved))?;
    }
    ensure(curve.points[0].first_stage.is_zero(), || "first stage at 0".into())
}

/// Surface: penalty independent of the reservation axis, minimum at the
/// curve argmin once the arranged wait covers every execution time, slope
/// of the summed penalty rates below the execution times.
fn reservation_wait_surface() -> Check {
    let inst = reference();
    let xs: Vec<u32> = (0..=30).collect();
    let waits: Vec<Seconds> = (0..=12).map(|k| Seconds::from_micros(k * 1000)).collect();
    let surface = sweep_reservation_waiting(&inst, &xs, &waits).map_err(|e| e.to_string())?;
    for (j, w) in waits.iter().enumerate() {
        for i in 1..xs.len() {
            ensure(surface.row(i, j).penalty == surface.row(0, j).penalty, || {
                format!("penalty varies with x at wait {w}")
            })?;
        }
    }
    let max_exec = inst.exec_times.iter().map(|(_, t)| *t).max().unwrap();
    let min_exec = inst.exec_times.iter().map(|(_, t)| *t).min().unwrap();
    let minimum = surface.rows.iter().map(|r| r.total.clone()).min().unwrap();
    let x_star = sweep_reservation(&inst, &xs)
        .map_err(|e| e.to_string())?
        .argmin()
        .unwrap()
        .reserved;
    ensure(x_star == 19, || format!("curve argmin {x_star}"))?;
    for (j, w) in waits.iter().enumerate().filter(|(_, w)| **w >= max_exec) {
        ensure(surface.row(x_star as usize, j).total == minimum, || {
            format!("({x_star}, {w}) is not minimal")
        })?;
    }
    let total_penalty_rate = Money::from_micros(6 * 10_000_000);
    for i in [0usize, 19, 30] {
        for j in 0..waits.len() - 1 {
            if waits[j + 1] > min_exec {
                break;
            }
            let drop = &surface.row(i, j).total - &surface.row(i, j + 1).total;
            let want = Amount::from(Cost::over_wait(waits[j + 1] - waits[j], total_penalty_rate));
            ensure(drop == want, || format!("slope at x={i}, wait {}", waits[j]))?;
        }
    }
    Ok(())
}

/// Expected over-wait for a 5 ms job against waits of 1..9 ms.
fn expected_penalty() -> Check {
    let waits: Vec<Seconds> = (1..=9).map(|k| Seconds::from_micros(k * 1000)).collect();
    let space = build_space("c", vec![10], waits, None, None).map_err(|e| e.to_string())?;
    let exec = 0.005;
    let over = space.expectation(|s| (exec - s.wait_time.as_secs()).max(0.0));
    let analytic = 0.010 / 9.0;
    ensure((over - analytic).abs() <= 1e-12, || {
        format!("over-wait {over} vs {analytic}")
    })?;
    let penalty = space.expectation(|s| 10.0 * (exec - s.wait_time.as_secs()).max(0.0));
    ensure((penalty - 10.0 * analytic).abs() <= 1e-12, || {
        format!("penalty {penalty}")
    })?;
    let exact = space.expected_cost(|s| {
        Cost::over_wait(
            Seconds::from_micros(5000).saturating_excess(s.wait_time),
            Money::from_micros(10_000_000),
        )
    });
    ensure((exact.to_f64() - 10.0 * analytic).abs() <= 1e-12, || {
        "exact penalty".into()
    })
}

/// LP text round-trips, and the one-triple file matches the golden copy.
fn lp_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0008);
    for case in 0..20 {
        let form = random_form(&mut rng);
        let back = parse_lp(&lp_string(&form)).map_err(|e| format!("case {case}: {e}"))?;
        ensure(back == form, || format!("case {case}: form changed"))?;
    }
    let inst = load_instance_file(&data("singleton.json")).map_err(|e| e.to_string())?;
    let form = build_extensive_form(&inst).map_err(|e| e.to_string())?;
    let golden = std::fs::read(data("singleton.lp")).map_err(|e| e.to_string())?;
    ensure(lp_string(&form).as_bytes() == golden.as_slice(), || {
        "golden LP differs".into()
    })
}

/// Seeded property sweep over random instances.
fn property_suites() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0009);
    for case in 0..40 {
        let inst = random_instance(&mut rng, 8, 12);
        let model = Model::new(&inst).map_err(|e| format!("case {case}: {e}"))?;
        for t in model.triples() {
            // normalization
            let total: Amount = t.space.probabilities().iter().map(|p| &money(1_000_000) * p).sum();
            ensure(total == money(1_000_000), || {
                format!("case {case}: probabilities do not sum to 1")
            })?;
            // linearity of expectation over two cost streams
            let demand = |s: &Scenario| Cost::qubits(s.demand_qubits as u64, Money::from_micros(1_000_000));
            let late = |s: &Scenario| {
                Cost::over_wait(
                    t.exec_time.saturating_excess(s.wait_time),
                    Money::from_micros(3_000_000),
                )
            };
            let joint = t.space.expected_cost(|s| demand(s) + late(s));
            ensure(
                joint == t.space.expected_cost(demand) + t.space.expected_cost(late),
                || format!("case {case}: expectation not linear"),
            )?;
            let mut totals = Vec::new();
            for x in 0..=t.capacity {
                for s in t.space.scenarios() {
                    let d = optimal_recourse(x, s, &t.rates, t.exec_time);
                    ensure(d.is_feasible_for(x, s, &t.rates, t.exec_time), || {
                        format!("case {case}: infeasible recourse")
                    })?;
                }
                let b = t.evaluate(x);
                ensure(b.penalty == t.evaluate(0).penalty, || {
                    format!("case {case}: penalty depends on x")
                })?;
                totals.push(b);
            }
            if t.rates.utilize_per_qubit <= t.rates.on_demand_per_qubit {
                for w in totals.windows(2) {
                    ensure(w[1].second_stage <= w[0].second_stage, || {
                        format!("case {case}: second stage rises")
                    })?;
                }
            }
            for w in totals.windows(3) {
                ensure(&w[1].total - &w[0].total <= &w[2].total - &w[1].total, || {
                    format!("case {case}: not convex")
                })?;
            }
        }
        let levels: BTreeMap<TripleKey, u32> = model.triples().iter().map(|t| (t.key.clone(), 0)).collect();
        model.expected_cost(&levels).map_err(|e| e.to_string())?;
    }
    Ok(())
}

#[test]
fn acceptance_criteria() {
    let checks: [Criterion; 9] = [
        ("reference optimum via solve --oracle", reference_optimum),
        ("recourse equals exhaustive enumeration", recourse_grid),
        ("separable solve equals joint enumeration", separability),
        ("deterministic equivalent equals solver", deterministic_equivalent),
        ("reservation curve shape", reservation_curve),
        ("reservation/wait surface shape", reservation_wait_surface),
        ("expected penalty formula", expected_penalty),
        ("LP round trip and golden file", lp_round_trip),
        ("seeded property suites", property_suites),
    ];
    let started = Instant::now();
    let mut failed = Vec::new();
    let mut report = String::new();
    for (i, (name, check)) in checks.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let line = match &outcome {
            Ok(()) => format!("criterion {}: PASS  {name} ({:.2?})\n", i + 1, t0.elapsed()),
            Err(why) => {
                failed.push(i + 1);
                format!("criterion {}: FAIL  {name} ({:.2?}): {why}\n", i + 1, t0.elapsed())
            }
        };
        report.push_str(&line);
    }
    report.push_str(&format!(
        "acceptance: {} of 9 passed in {:.2?}\n",
        9 - failed.len(),
        started.elapsed()
    ));
    let _ = std::io::stderr().write_all(report.as_bytes());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
