// Copyright 2026 The qres Authors
// SPDX-License-Identifier: Apache-2.0

//! Two-stage stochastic provisioning of reserved, utilized and on-demand
//! qubits across quantum cloud providers.
//!
//! The first stage reserves qubits on every (circuit, provider, machine)
//! triple before demand and waiting time are known. Once a scenario is
//! revealed, reserved qubits are utilized, any shortfall is bought on
//! demand, and execution past the waiting time is penalized.
//!
//! - [`instance`]: problem data, JSON schema, validation.
//! - [`scenario`]: finite scenario spaces with exact probabilities.
//! - [`recourse`]: closed-form second stage.
//! - [`solver`]: exact per-triple solver and brute-force oracles.
//! - [`extensive`]: deterministic-equivalent MILP, LP export/import and an
//!   enumerative solver for small models.
//! - [`sweep`]: cost curves and surfaces over forced reservation levels.

pub mod extensive;
pub mod instance;
pub mod recourse;
pub mod scenario;
pub mod solver;
pub mod sweep;
pub mod units;

pub use extensive::{
    build_extensive_form, export_lp, parse_lp, solve_enumerative, write_lp_file, EnumerationError, EnumerationResult,
    ExtensiveForm, Fixed, FormError, LpParseError, Row, Sense, VarKind, Variable,
};
pub use instance::{
    load_exec_times, load_instance, load_instance_file, serialize_instance, synth_exec_time, validate, CostRates,
    Diagnostic, ExecTimeTable, Instance, InstanceError, Machine, Severity, TripleKey,
};
pub use recourse::{optimal_recourse, penalty_time, RecourseDecision};
pub use scenario::{build_space, Marginal, Scenario, ScenarioError, ScenarioSpace};
pub use solver::{
    brute_force_triple, expected_cost, joint_enumeration_oracle, solve_instance, solve_triple, CostBreakdown, Model,
    Solution, SolveError,
};
pub use sweep::{
    emit_csv, sweep_reservation, sweep_reservation_waiting, CostCurve, CostSurface, CurvePoint, SurfaceRow, SweepError,
};
pub use units::{Amount, Cost, Money, Seconds};
