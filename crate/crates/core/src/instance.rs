// Copyright 2026 The qres Authors
// SPDX-License-Identifier: Apache-2.0

//! Static problem data: circuits, providers, machines, rates, execution
//! times and the per-circuit uncertainty sets.
//!
//! Instances are loaded from a JSON document (see [`InstanceDocument`]) and
//! checked in two passes. [`load_instance`] rejects documents that cannot be
//! turned into an instance at all (parse failures, missing rates or
//! execution times, probability vectors that do not normalize).
//! [`validate`] reports every remaining invariant breach as a
//! [`Diagnostic`], including the pricing-sanity warnings.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{exact_decimal, Money, Seconds};

/// Capacity assumed for a machine whose document entry omits it.
pub const DEFAULT_CAPACITY: i64 = 30;

/// Probability vectors must sum to one within this tolerance.
pub const PROB_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("parse error at line {line}, column {column} (field `{field}`): {message}")]
    Parse {
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("no cost rates for circuit `{circuit}` on provider `{provider}`")]
    MissingRate { circuit: String, provider: String },
    #[error("no execution time for circuit `{circuit}` on provider `{provider}`, machine `{machine}`")]
    MissingExecTime {
        circuit: String,
        provider: String,
        machine: String,
    },
    #[error("{which} probabilities for circuit `{circuit}` sum to {sum}, expected 1 within 1e-9")]
    ProbabilitySum {
        circuit: String,
        which: &'static str,
        sum: f64,
    },
    #[error("{which} probabilities for circuit `{circuit}` have {got} entries but the set has {expected}")]
    ProbabilityLength {
        circuit: String,
        which: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{which} probabilities for circuit `{circuit}` contain a negative or non-finite entry")]
    ProbabilityValue { circuit: String, which: &'static str },
    #[error("invalid range for {which} of circuit `{circuit}`: {reason}")]
    InvalidRange {
        circuit: String,
        which: &'static str,
        reason: String,
    },
    #[error("machine `{machine}` references unknown provider `{provider}`")]
    UnknownProvider { provider: String, machine: String },
    #[error("circuit `{0}` needs `num_qubits` and `encoded_value` for synthetic timing")]
    MissingTimingMetadata(String),
    #[error("encoded value {value} does not fit in {num_qubits} qubits")]
    EncodedValueOutOfRange { num_qubits: u32, value: u64 },
    #[error("synthetic timing needs num_qubits > 0 and base, slope > 0")]
    InvalidTimingParameters,
    #[error(transparent)]
    ExecTimes(#[from] ExecTimeError),
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum ExecTimeError {
    #[error("malformed execution-time row at line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("duplicate execution time for ({circuit}, {provider}, {machine}) at line {line}")]
    DuplicateTriple {
        circuit: String,
        provider: String,
        machine: String,
        line: u64,
    },
    #[error("negative execution time {seconds} at line {line}")]
    NegativeTime { seconds: f64, line: u64 },
}

/// Per-qubit and per-second prices a provider charges for one circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostRates {
    pub reserve_per_qubit: Money,
    pub utilize_per_qubit: Money,
    pub on_demand_per_qubit: Money,
    pub penalty_per_second: Money,
}

impl CostRates {
    pub fn from_dollars(reserve: f64, utilize: f64, on_demand: f64, penalty: f64) -> Self {
        CostRates {
            reserve_per_qubit: Money::from_dollars(reserve),
            utilize_per_qubit: Money::from_dollars(utilize),
            on_demand_per_qubit: Money::from_dollars(on_demand),
            penalty_per_second: Money::from_dollars(penalty),
        }
    }

    pub fn is_non_negative(&self) -> bool {
        !(self.reserve_per_qubit.is_negative()
            || self.utilize_per_qubit.is_negative()
            || self.on_demand_per_qubit.is_negative()
            || self.penalty_per_second.is_negative())
    }

    /// Reservation should be the cheap plan: `utilize <= on_demand` and
    /// `reserve < on_demand`.
    pub fn is_sanely_priced(&self) -> bool {
        self.utilize_per_qubit <= self.on_demand_per_qubit && self.reserve_per_qubit < self.on_demand_per_qubit
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Machine {
    pub provider_id: String,
    pub machine_id: String,
    #[serde(default = "default_capacity")]
    pub capacity_qubits: i64,
}

fn default_capacity() -> i64 {
    DEFAULT_CAPACITY
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Circuit {
    pub id: String,
    pub label: Option<String>,
    pub num_qubits: Option<u32>,
    pub encoded_value: Option<u64>,
}

impl Circuit {
    pub fn new(id: impl Into<String>) -> Self {
        Circuit {
            id: id.into(),
            ..Default::default()
        }
    }
}

/// A (circuit, provider, machine) combination.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TripleKey {
    pub circuit_id: String,
    pub provider_id: String,
    pub machine_id: String,
}

impl TripleKey {
    pub fn new(circuit_id: impl Into<String>, provider_id: impl Into<String>, machine_id: impl Into<String>) -> Self {
        TripleKey {
            circuit_id: circuit_id.into(),
            provider_id: provider_id.into(),
            machine_id: machine_id.into(),
        }
    }
}

impl fmt::Display for TripleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.circuit_id, self.provider_id, self.machine_id)
    }
}

/// A triple together with its positions in the instance: circuit index,
/// provider index, and machine index within that provider.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triple {
    pub key: TripleKey,
    pub circuit_index: usize,
    pub provider_index: usize,
    pub machine_index: usize,
    /// Index into [`Instance::machines`].
    pub machine_slot: usize,
}

/// Execution time of each circuit on each machine.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExecTimeTable {
    entries: BTreeMap<TripleKey, Seconds>,
}

impl ExecTimeTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an entry, returning the previous value if the triple was
    /// already present.
    pub fn insert(&mut self, key: TripleKey, seconds: Seconds) -> Option<Seconds> {
        self.entries.insert(key, seconds)
    }

    pub fn get(&self, key: &TripleKey) -> Option<Seconds> {
        self.entries.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TripleKey, &Seconds)> {
        self.entries.iter()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExecTimeRecord {
    circuit_id: String,
    provider_id: String,
    machine_id: String,
    seconds: f64,
}

/// Reads `circuit_id,provider_id,machine_id,seconds` rows.
pub fn load_exec_times<R: Read>(reader: R) -> Result<ExecTimeTable, ExecTimeError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let malformed = |e: csv::Error| ExecTimeError::Malformed {
        line: e.position().map(|p| p.line()).unwrap_or(0),
        message: e.to_string(),
    };
    let headers = rdr.headers().map_err(malformed)?.clone();
    let mut table = ExecTimeTable::new();
    let mut row = csv::StringRecord::new();
    while rdr.read_record(&mut row).map_err(malformed)? {
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let record: ExecTimeRecord = row.deserialize(Some(&headers)).map_err(|e| ExecTimeError::Malformed {
            line,
            message: e.to_string(),
        })?;
        if !record.seconds.is_finite() {
            return Err(ExecTimeError::Malformed {
                line,
                message: "seconds must be finite".into(),
            });
        }
        if record.seconds < 0.0 {
            return Err(ExecTimeError::NegativeTime {
                seconds: record.seconds,
                line,
            });
        }
        let key = TripleKey::new(record.circuit_id, record.provider_id, record.machine_id);
        if table.entries.contains_key(&key) {
            return Err(ExecTimeError::DuplicateTriple {
                circuit: key.circuit_id,
                provider: key.provider_id,
                machine: key.machine_id,
                line,
            });
        }
        table.insert(key, Seconds::from_secs(record.seconds));
    }
    Ok(table)
}

/// Monotone execution-time surrogate: `base + slope * num_qubits *
/// popcount(encoded_value)`.
pub fn synth_exec_time(
    num_qubits: u32,
    encoded_value: u64,
    base: Seconds,
    slope: Seconds,
) -> Result<Seconds, InstanceError> {
    if num_qubits == 0 || base.micros() <= 0 || slope.micros() <= 0 {
        return Err(InstanceError::InvalidTimingParameters);
    }
    if num_qubits < 64 && encoded_value >> num_qubits != 0 {
        return Err(InstanceError::EncodedValueOutOfRange {
            num_qubits,
            value: encoded_value,
        });
    }
    let bits = encoded_value.count_ones() as i64;
    Ok(Seconds::from_micros(
        base.micros() + slope.micros() * num_qubits as i64 * bits,
    ))
}

/// The full static problem.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Instance {
    pub circuits: Vec<Circuit>,
    pub providers: Vec<String>,
    pub machines: Vec<Machine>,
    /// Keyed by (circuit id, provider id).
    pub rates: BTreeMap<(String, String), CostRates>,
    pub exec_times: ExecTimeTable,
    /// `B_c`: possible qubit demands per circuit, strictly increasing.
    pub demand_sets: BTreeMap<String, Vec<u32>>,
    /// `E_c`: possible waiting times per circuit, strictly increasing.
    pub wait_sets: BTreeMap<String, Vec<Seconds>>,
    /// Absent means uniform.
    pub demand_probs: BTreeMap<String, Vec<f64>>,
    pub wait_probs: BTreeMap<String, Vec<f64>>,
    /// Optional joint table `[demand index][wait index]`; overrides the
    /// marginals when present.
    pub joint_probs: BTreeMap<String, Vec<Vec<f64>>>,
}

impl Instance {
    /// All triples in circuit, provider, machine order. Machines keep their
    /// document order within a provider.
    pub fn triples(&self) -> Vec<Triple> {
        let mut out = Vec::new();
        for (ci, circuit) in self.circuits.iter().enumerate() {
            for (pi, provider) in self.providers.iter().enumerate() {
                let machines = self
                    .machines
                    .iter()
                    .enumerate()
                    .filter(|(_, m)| &m.provider_id == provider);
                for (mi, (slot, machine)) in machines.enumerate() {
                    out.push(Triple {
                        key: TripleKey::new(&circuit.id, provider, &machine.machine_id),
                        circuit_index: ci,
                        provider_index: pi,
                        machine_index: mi,
                        machine_slot: slot,
                    });
                }
            }
        }
        out
    }

    pub fn rates_for(&self, circuit: &str, provider: &str) -> Option<&CostRates> {
        self.rates.get(&(circuit.to_string(), provider.to_string()))
    }

    pub fn machine(&self, provider: &str, machine: &str) -> Option<&Machine> {
        self.machines
            .iter()
            .find(|m| m.provider_id == provider && m.machine_id == machine)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Warning => "warning",
            Severity::Error => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub location: String,
    pub message: String,
}

impl Diagnostic {
    fn error(location: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            location: location.into(),
            message: message.into(),
        }
    }

    fn warning(location: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            location: location.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.severity, self.location, self.message)
    }
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(|d| d.severity == Severity::Error)
}

/// Exact sum of a probability vector, or `None` if an entry is negative or
/// not finite.
pub(crate) fn exact_prob_sum(probs: &[f64]) -> Option<BigRational> {
    let mut sum = BigRational::zero();
    for &p in probs {
        let exact = exact_decimal(p)?;
        if exact.is_negative() {
            return None;
        }
        sum += exact;
    }
    Some(sum)
}

pub(crate) fn within_prob_tolerance(sum: &BigRational) -> bool {
    let tol = exact_decimal(PROB_TOLERANCE).expect("finite tolerance");
    (sum - BigRational::one()).abs() <= tol
}

fn check_prob_vector(diags: &mut Vec<Diagnostic>, location: String, probs: &[f64], expected_len: usize) {
    if probs.len() != expected_len {
        diags.push(Diagnostic::error(
            location,
            format!("has {} entries, set has {expected_len}", probs.len()),
        ));
        return;
    }
    match exact_prob_sum(probs) {
        None => diags.push(Diagnostic::error(location, "negative or non-finite probability")),
        Some(sum) if !within_prob_tolerance(&sum) => diags.push(Diagnostic::error(
            location,
            format!("probabilities sum to {}, expected 1", probs.iter().sum::<f64>()),
        )),
        Some(_) => {}
    }
}

fn strictly_increasing<T: PartialOrd>(values: &[T]) -> bool {
    values.windows(2).all(|w| w[0] < w[1])
}

/// Checks every instance invariant. An empty result means the instance is
/// valid; pricing-sanity findings are warnings only.
pub fn validate(instance: &Instance) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    let mut seen_circuits = BTreeSet::new();
    for c in &instance.circuits {
        if !seen_circuits.insert(c.id.as_str()) {
            diags.push(Diagnostic::error(format!("circuit {}", c.id), "duplicate circuit id"));
        }
    }
    let mut seen_providers = BTreeSet::new();
    for p in &instance.providers {
        if !seen_providers.insert(p.as_str()) {
            diags.push(Diagnostic::error(format!("provider {p}"), "duplicate provider id"));
        }
    }

    let mut seen_machines = BTreeSet::new();
    for m in &instance.machines {
        let loc = format!("machine ({}, {})", m.provider_id, m.machine_id);
        if !seen_providers.contains(m.provider_id.as_str()) {
            diags.push(Diagnostic::error(&loc, "unknown provider"));
        }
        if !seen_machines.insert((m.provider_id.as_str(), m.machine_id.as_str())) {
            diags.push(Diagnostic::error(&loc, "duplicate (provider, machine) pair"));
        }
        if m.capacity_qubits < 0 {
            diags.push(Diagnostic::error(
                &loc,
                format!("capacity {} is negative", m.capacity_qubits),
            ));
        } else if m.capacity_qubits > u32::MAX as i64 {
            diags.push(Diagnostic::error(&loc, "capacity exceeds 32-bit range"));
        }
    }

    for ((c, p), rates) in &instance.rates {
        let loc = format!("rates ({c}, {p})");
        if !rates.is_non_negative() {
            diags.push(Diagnostic::error(&loc, "rates must be non-negative"));
        } else if !rates.is_sanely_priced() {
            diags.push(Diagnostic::warning(
                &loc,
                format!(
                    "reservation is not the cheap plan (reserve {}, utilize {}, on-demand {})",
                    rates.reserve_per_qubit, rates.utilize_per_qubit, rates.on_demand_per_qubit
                ),
            ));
        }
    }

    for c in &instance.circuits {
        let demand = instance.demand_sets.get(&c.id).map(Vec::as_slice);
        let wait = instance.wait_sets.get(&c.id).map(Vec::as_slice);
        let nd = demand.map_or(0, <[u32]>::len);
        let nw = wait.map_or(0, <[Seconds]>::len);
        match demand {
            None | Some([]) => diags.push(Diagnostic::error(format!("circuit {}", c.id), "demand set is empty")),
            Some(set) if !strictly_increasing(set) => diags.push(Diagnostic::error(
                format!("circuit {}", c.id),
                "demand set must be strictly increasing",
            )),
            _ => {}
        }
        match wait {
            None | Some([]) => diags.push(Diagnostic::error(
                format!("circuit {}", c.id),
                "waiting-time set is empty",
            )),
            Some(set) if set.iter().any(|s| s.is_negative()) => diags.push(Diagnostic::error(
                format!("circuit {}", c.id),
                "waiting times must be non-negative",
            )),
            Some(set) if !strictly_increasing(set) => diags.push(Diagnostic::error(
                format!("circuit {}", c.id),
                "waiting-time set must be strictly increasing",
            )),
            _ => {}
        }
        if let Some(probs) = instance.demand_probs.get(&c.id) {
            check_prob_vector(&mut diags, format!("demand_probs of {}", c.id), probs, nd);
        }
        if let Some(probs) = instance.wait_probs.get(&c.id) {
            check_prob_vector(&mut diags, format!("wait_probs of {}", c.id), probs, nw);
        }
        if let Some(table) = instance.joint_probs.get(&c.id) {
            let loc = format!("joint_probs of {}", c.id);
            if table.len() != nd || table.iter().any(|row| row.len() != nw) {
                diags.push(Diagnostic::error(loc, format!("table must be {nd} x {nw}")));
            } else {
                let flat: Vec<f64> = table.iter().flatten().copied().collect();
                check_prob_vector(&mut diags, loc, &flat, nd * nw);
            }
        }
    }

    let mut expected_times = BTreeSet::new();
    for t in instance.triples() {
        let loc = format!("triple {}", t.key);
        if instance.rates_for(&t.key.circuit_id, &t.key.provider_id).is_none()
            && !diags
                .iter()
                .any(|d| d.location == format!("rates ({}, {})", t.key.circuit_id, t.key.provider_id))
        {
            diags.push(Diagnostic::error(
                format!("rates ({}, {})", t.key.circuit_id, t.key.provider_id),
                "missing cost rates",
            ));
        }
        match instance.exec_times.get(&t.key) {
            None => diags.push(Diagnostic::error(&loc, "missing execution time")),
            Some(s) if s.is_negative() => diags.push(Diagnostic::error(&loc, "negative execution time")),
            Some(_) => {}
        }
        expected_times.insert(t.key);
    }
    for (key, _) in instance.exec_times.iter() {
        if !expected_times.contains(key) {
            diags.push(Diagnostic::warning(
                format!("triple {key}"),
                "execution time given for a triple that is not in the instance",
            ));
        }
    }

    diags
}

// ---------------------------------------------------------------------------
// Document schema
// ---------------------------------------------------------------------------

/// Integer set: an explicit list or an inclusive `{lo, hi, step}` range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DemandSetDoc {
    List(Vec<u32>),
    Range {
        lo: u32,
        hi: u32,
        #[serde(default)]
        step: Option<u32>,
    },
}

/// Time set in seconds: an explicit list or an inclusive range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WaitSetDoc {
    List(Vec<Seconds>),
    Range { lo: Seconds, hi: Seconds, step: Seconds },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitDoc {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_qubits: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoded_value: Option<u64>,
    pub demand_set: DemandSetDoc,
    pub wait_set: WaitSetDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand_probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wait_probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_probs: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateDoc {
    pub circuit_id: String,
    pub provider_id: String,
    #[serde(flatten)]
    pub rates: CostRates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecTimeDoc {
    pub circuit_id: String,
    pub provider_id: String,
    pub machine_id: String,
    pub seconds: Seconds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTimingDoc {
    pub base: Seconds,
    pub slope: Seconds,
}

/// The on-disk JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub circuits: Vec<CircuitDoc>,
    pub providers: Vec<String>,
    pub machines: Vec<Machine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_rates: Option<CostRates>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rates: Vec<RateDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exec_times: Vec<ExecTimeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exec_times_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic_timing: Option<SyntheticTimingDoc>,
}

fn expand_demand(circuit: &str, doc: &DemandSetDoc) -> Result<Vec<u32>, InstanceError> {
    match doc {
        DemandSetDoc::List(v) => Ok(v.clone()),
        DemandSetDoc::Range { lo, hi, step } => {
            let step = step.unwrap_or(1);
            if step == 0 || lo > hi {
                return Err(InstanceError::InvalidRange {
                    circuit: circuit.into(),
                    which: "demand_set",
                    reason: format!("need lo <= hi and step > 0 (lo {lo}, hi {hi}, step {step})"),
                });
            }
            Ok((*lo..=*hi).step_by(step as usize).collect())
        }
    }
}

fn expand_wait(circuit: &str, doc: &WaitSetDoc) -> Result<Vec<Seconds>, InstanceError> {
    match doc {
        WaitSetDoc::List(v) => Ok(v.clone()),
        WaitSetDoc::Range { lo, hi, step } => {
            if step.micros() <= 0 || lo > hi {
                return Err(InstanceError::InvalidRange {
                    circuit: circuit.into(),
                    which: "wait_set",
                    reason: format!("need lo <= hi and step > 0 (lo {lo}, hi {hi}, step {step})"),
                });
            }
            let mut out = Vec::new();
            let mut t = lo.micros();
            while t <= hi.micros() {
                out.push(Seconds::from_micros(t));
                t += step.micros();
            }
            Ok(out)
        }
    }
}

fn require_normalized(circuit: &str, which: &'static str, probs: &[f64], len: usize) -> Result<(), InstanceError> {
    if probs.len() != len {
        return Err(InstanceError::ProbabilityLength {
            circuit: circuit.into(),
            which,
            expected: len,
            got: probs.len(),
        });
    }
    let sum = exact_prob_sum(probs).ok_or_else(|| InstanceError::ProbabilityValue {
        circuit: circuit.into(),
        which,
    })?;
    if !within_prob_tolerance(&sum) {
        return Err(InstanceError::ProbabilitySum {
            circuit: circuit.into(),
            which,
            sum: probs.iter().sum(),
        });
    }
    Ok(())
}

impl InstanceDocument {
    /// Builds the instance. Relative `exec_times_csv` paths resolve against
    /// `base_dir`.
    pub fn into_instance(self, base_dir: Option<&Path>) -> Result<Instance, InstanceError> {
        let mut inst = Instance {
            providers: self.providers,
            machines: self.machines,
            ..Default::default()
        };

        for m in &inst.machines {
            if !inst.providers.contains(&m.provider_id) {
                return Err(InstanceError::UnknownProvider {
                    provider: m.provider_id.clone(),
                    machine: m.machine_id.clone(),
                });
            }
        }

        for c in &self.circuits {
            let demand = expand_demand(&c.id, &c.demand_set)?;
            let wait = expand_wait(&c.id, &c.wait_set)?;
            if let Some(p) = &c.demand_probs {
                require_normalized(&c.id, "demand", p, demand.len())?;
                inst.demand_probs.insert(c.id.clone(), p.clone());
            }
            if let Some(p) = &c.wait_probs {
                require_normalized(&c.id, "wait", p, wait.len())?;
                inst.wait_probs.insert(c.id.clone(), p.clone());
            }
            if let Some(table) = &c.joint_probs {
                if table.len() != demand.len() || table.iter().any(|r| r.len() != wait.len()) {
                    return Err(InstanceError::ProbabilityLength {
                        circuit: c.id.clone(),
                        which: "joint",
                        expected: demand.len() * wait.len(),
                        got: table.iter().map(Vec::len).sum(),
                    });
                }
                let flat: Vec<f64> = table.iter().flatten().copied().collect();
                require_normalized(&c.id, "joint", &flat, flat.len())?;
                inst.joint_probs.insert(c.id.clone(), table.clone());
            }
            inst.demand_sets.insert(c.id.clone(), demand);
            inst.wait_sets.insert(c.id.clone(), wait);
            inst.circuits.push(Circuit {
                id: c.id.clone(),
                label: c.label.clone(),
                num_qubits: c.num_qubits,
                encoded_value: c.encoded_value,
            });
        }

        if let Some(defaults) = self.default_rates {
            for c in &inst.circuits {
                for p in &inst.providers {
                    inst.rates.insert((c.id.clone(), p.clone()), defaults);
                }
            }
        }
        for r in self.rates {
            inst.rates.insert((r.circuit_id, r.provider_id), r.rates);
        }

        let mut times = match &self.exec_times_csv {
            Some(path) => {
                let full = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                let file = std::fs::File::open(&full).map_err(|source| InstanceError::Io {
                    path: full.clone(),
                    source,
                })?;
                load_exec_times(file)?
            }
            None => ExecTimeTable::new(),
        };
        for row in self.exec_times {
            let key = TripleKey::new(row.circuit_id, row.provider_id, row.machine_id);
            if row.seconds.is_negative() {
                return Err(ExecTimeError::NegativeTime {
                    seconds: row.seconds.as_secs(),
                    line: 0,
                }
                .into());
            }
            if times.insert(key.clone(), row.seconds).is_some() {
                return Err(ExecTimeError::DuplicateTriple {
                    circuit: key.circuit_id,
                    provider: key.provider_id,
                    machine: key.machine_id,
                    line: 0,
                }
                .into());
            }
        }

        for t in inst.triples() {
            if inst.rates_for(&t.key.circuit_id, &t.key.provider_id).is_none() {
                return Err(InstanceError::MissingRate {
                    circuit: t.key.circuit_id,
                    provider: t.key.provider_id,
                });
            }
            if times.get(&t.key).is_none() {
                let Some(timing) = self.synthetic_timing else {
                    return Err(InstanceError::MissingExecTime {
                        circuit: t.key.circuit_id,
                        provider: t.key.provider_id,
                        machine: t.key.machine_id,
                    });
                };
                let circuit = &inst.circuits[t.circuit_index];
                let (Some(n), Some(v)) = (circuit.num_qubits, circuit.encoded_value) else {
                    return Err(InstanceError::MissingTimingMetadata(circuit.id.clone()));
                };
                let secs = synth_exec_time(n, v, timing.base, timing.slope)?;
                times.insert(t.key, secs);
            }
        }
        inst.exec_times = times;
        Ok(inst)
    }
}

/// Parses an instance document. Relative CSV paths resolve against the
/// current directory.
pub fn load_instance(source: &str) -> Result<Instance, InstanceError> {
    load_instance_with_base(source, None)
}

pub fn load_instance_with_base(source: &str, base_dir: Option<&Path>) -> Result<Instance, InstanceError> {
    parse_document(source)?.into_instance(base_dir)
}

pub fn load_instance_file(path: &Path) -> Result<Instance, InstanceError> {
    let text = std::fs::read_to_string(path).map_err(|source| InstanceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_instance_with_base(&text, path.parent())
}

pub fn parse_document(source: &str) -> Result<InstanceDocument, InstanceError> {
    let mut de = serde_json::Deserializer::from_str(source);
    let doc: InstanceDocument = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        InstanceError::Parse {
            line: inner.line(),
            column: inner.column(),
            field,
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| InstanceError::Parse {
        line: e.line(),
        column: e.column(),
        field: ".".into(),
        message: e.to_string(),
    })?;
    Ok(doc)
}

/// The fully explicit document for an instance: expanded sets, one rate
/// block per pair, inline execution times.
pub fn to_document(instance: &Instance) -> InstanceDocument {
    let circuits = instance
        .circuits
        .iter()
        .map(|c| CircuitDoc {
            id: c.id.clone(),
            label: c.label.clone(),
            num_qubits: c.num_qubits,
            encoded_value: c.encoded_value,
            demand_set: DemandSetDoc::List(instance.demand_sets.get(&c.id).cloned().unwrap_or_default()),
            wait_set: WaitSetDoc::List(instance.wait_sets.get(&c.id).cloned().unwrap_or_default()),
            demand_probs: instance.demand_probs.get(&c.id).cloned(),
            wait_probs: instance.wait_probs.get(&c.id).cloned(),
            joint_probs: instance.joint_probs.get(&c.id).cloned(),
        })
        .collect();
    InstanceDocument {
        circuits,
        providers: instance.providers.clone(),
        machines: instance.machines.clone(),
        default_rates: None,
        rates: instance
            .rates
            .iter()
            .map(|((c, p), r)| RateDoc {
                circuit_id: c.clone(),
                provider_id: p.clone(),
                rates: *r,
            })
            .collect(),
        exec_times: instance
            .exec_times
            .iter()
            .map(|(k, s)| ExecTimeDoc {
                circuit_id: k.circuit_id.clone(),
                provider_id: k.provider_id.clone(),
                machine_id: k.machine_id.clone(),
                seconds: *s,
            })
            .collect(),
        exec_times_csv: None,
        synthetic_timing: None,
    }
}

pub fn serialize_instance(instance: &Instance) -> String {
    serde_json::to_string_pretty(&to_document(instance)).expect("instance documents always serialize")
}

/// Number of scenarios a circuit contributes, `|B_c| * |E_c|`.
pub fn scenario_count(instance: &Instance, circuit: &str) -> usize {
    instance.demand_sets.get(circuit).map_or(0, Vec::len) * instance.wait_sets.get(circuit).map_or(0, Vec::len)
}
