// Copyright 2026 The qres Authors
// SPDX-License-Identifier: Apache-2.0

//! Deterministic-equivalent MILP.
//!
//! Every triple contributes one reservation variable `xr` and, per
//! scenario, the recourse variables `xu`, `xo` and `y` with three rows:
//!
//! ```text
//! util:    xu - xr <= 0
//! demand:  xu + xo >= b
//! wait:    -y      <= a - t_exe
//! ```
//!
//! Capacity is an upper bound on `xr`, not a row. Scenario probabilities are
//! folded into the objective. To keep every coefficient an exact decimal the
//! whole objective is multiplied by [`ExtensiveForm::objective_scale`], the
//! least common denominator of all scenario probabilities; the true
//! objective is the written one divided by that scale.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{self, Write};
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::instance::{has_errors, validate, Instance};
use crate::scenario::{ScenarioError, ScenarioSpace};
use crate::units::Amount;

const FIXED_ONE: i128 = 1_000_000;

/// Exact decimal with six fraction digits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fixed(i128);

impl Fixed {
    pub const ZERO: Fixed = Fixed(0);
    pub const ONE: Fixed = Fixed(FIXED_ONE);

    pub const fn from_raw(raw: i128) -> Self {
        Fixed(raw)
    }

    pub const fn raw(self) -> i128 {
        self.0
    }

    pub fn from_int(v: i128) -> Self {
        Fixed(v * FIXED_ONE)
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn to_rational(self) -> BigRational {
        BigRational::new(BigInt::from(self.0), BigInt::from(FIXED_ONE))
    }

    /// Parses a plain decimal with at most six fraction digits.
    pub fn parse(text: &str) -> Option<Self> {
        let (neg, body) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text.strip_prefix('+').unwrap_or(text)),
        };
        let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
        if (int_part.is_empty() && frac_part.is_empty())
            || frac_part.len() > 6
            || !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit())
        {
            return None;
        }
        let whole: i128 = if int_part.is_empty() { 0 } else { int_part.parse().ok()? };
        let mut frac: i128 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().ok()?
        };
        for _ in frac_part.len()..6 {
            frac *= 10;
        }
        let raw = whole.checked_mul(FIXED_ONE)?.checked_add(frac)?;
        Some(Fixed(if neg { -raw } else { raw }))
    }
}

impl fmt::Display for Fixed {
    /// Shortest exact form: `7`, `196.56`, `-0.003`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let whole = abs / FIXED_ONE as u128;
        let frac = abs % FIXED_ONE as u128;
        if frac == 0 {
            write!(f, "{sign}{whole}")
        } else {
            let digits = format!("{frac:06}");
            write!(f, "{sign}{whole}.{}", digits.trim_end_matches('0'))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Integer,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: Fixed,
    /// `None` is `+inf`.
    pub upper: Option<Fixed>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(usize, Fixed)>,
    pub sense: Sense,
    pub rhs: Fixed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtensiveForm {
    pub variables: Vec<Variable>,
    pub objective: Vec<(usize, Fixed)>,
    pub constraints: Vec<Row>,
    /// Positive integer the objective has been multiplied by.
    pub objective_scale: i128,
}

#[derive(Debug, Error)]
pub enum FormError {
    #[error("instance is invalid")]
    InvalidInstance,
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("coefficient overflow while building the form")]
    Overflow,
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("row `{row}` references variable index {index}, but only {count} variables exist")]
    DanglingIndex { row: String, index: usize, count: usize },
    #[error("objective scale must be positive")]
    BadScale,
}

impl ExtensiveForm {
    /// Structural checks: unique names, valid indices, positive scale.
    pub fn check(&self) -> Result<(), FormError> {
        if self.objective_scale <= 0 {
            return Err(FormError::BadScale);
        }
        let mut seen = HashMap::new();
        for (i, v) in self.variables.iter().enumerate() {
            if seen.insert(v.name.as_str(), i).is_some() {
                return Err(FormError::DuplicateName(v.name.clone()));
            }
        }
        let count = self.variables.len();
        let rows = self
            .constraints
            .iter()
            .map(|r| (r.name.as_str(), &r.terms))
            .chain(std::iter::once(("objective", &self.objective)));
        for (name, terms) in rows {
            if let Some(&(index, _)) = terms.iter().find(|(i, _)| *i >= count) {
                return Err(FormError::DanglingIndex {
                    row: name.to_string(),
                    index,
                    count,
                });
            }
        }
        Ok(())
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Objective coefficient of a variable in the unscaled model.
    pub fn effective_objective_coefficient(&self, index: usize) -> BigRational {
        let sum: i128 = self
            .objective
            .iter()
            .filter(|(i, _)| *i == index)
            .map(|(_, c)| c.raw())
            .sum();
        Fixed::from_raw(sum).to_rational() / BigRational::from_integer(BigInt::from(self.objective_scale))
    }
}

fn scaled(coef_micros: i64, factor: i128) -> Result<Fixed, FormError> {
    (coef_micros as i128)
        .checked_mul(factor)
        .map(Fixed)
        .ok_or(FormError::Overflow)
}

/// Builds the deterministic equivalent. Variables are ordered by triple
/// (instance order), then scenario, then `xu, xo, y`, with each triple's
/// `xr` first.
pub fn build_extensive_form(instance: &Instance) -> Result<ExtensiveForm, FormError> {
    if has_errors(&validate(instance)) {
        return Err(FormError::InvalidInstance);
    }
    let mut spaces = BTreeMap::new();
    for c in &instance.circuits {
        spaces.insert(c.id.as_str(), ScenarioSpace::from_instance(instance, &c.id)?);
    }
    let scale = spaces.values().fold(BigInt::from(1), |acc, s| {
        num_integer::Integer::lcm(&acc, s.common_denominator())
    });
    let scale = scale.to_i128().ok_or(FormError::Overflow)?;

    let mut variables = Vec::new();
    let mut objective = Vec::new();
    let mut constraints = Vec::new();
    let mut push_var = |name: String, kind, upper, coef: Fixed, objective: &mut Vec<(usize, Fixed)>| {
        variables.push(Variable {
            name,
            kind,
            lower: Fixed::ZERO,
            upper,
        });
        let idx = variables.len() - 1;
        objective.push((idx, coef));
        idx
    };

    for t in instance.triples() {
        let rates = instance
            .rates_for(&t.key.circuit_id, &t.key.provider_id)
            .expect("validated");
        let exec = instance.exec_times.get(&t.key).expect("validated");
        let capacity = instance.machines[t.machine_slot].capacity_qubits as i128;
        let space = &spaces[t.key.circuit_id.as_str()];
        let tag = format!("c{}_p{}_m{}", t.circuit_index, t.provider_index, t.machine_index);
        let per_denominator = (BigInt::from(scale) / space.common_denominator())
            .to_i128()
            .ok_or(FormError::Overflow)?;

        let xr = push_var(
            format!("xr_{tag}"),
            VarKind::Integer,
            Some(Fixed::from_int(capacity)),
            scaled(rates.reserve_per_qubit.micros(), scale)?,
            &mut objective,
        );
        for s in space.scenarios() {
            let weight = space.weight(s.index).to_i128().ok_or(FormError::Overflow)?;
            let factor = weight.checked_mul(per_denominator).ok_or(FormError::Overflow)?;
            let si = s.index;
            let xu = push_var(
                format!("xu_{tag}_s{si}"),
                VarKind::Integer,
                None,
                scaled(rates.utilize_per_qubit.micros(), factor)?,
                &mut objective,
            );
            let xo = push_var(
                format!("xo_{tag}_s{si}"),
                VarKind::Integer,
                None,
                scaled(rates.on_demand_per_qubit.micros(), factor)?,
                &mut objective,
            );
            let y = push_var(
                format!("y_{tag}_s{si}"),
                VarKind::Continuous,
                None,
                scaled(rates.penalty_per_second.micros(), factor)?,
                &mut objective,
            );
            constraints.push(Row {
                name: format!("util_{tag}_s{si}"),
                terms: vec![(xu, Fixed::ONE), (xr, Fixed::from_int(-1))],
                sense: Sense::Le,
                rhs: Fixed::ZERO,
            });
            constraints.push(Row {
                name: format!("demand_{tag}_s{si}"),
                terms: vec![(xu, Fixed::ONE), (xo, Fixed::ONE)],
                sense: Sense::Ge,
                rhs: Fixed::from_int(s.demand_qubits as i128),
            });
            constraints.push(Row {
                name: format!("wait_{tag}_s{si}"),
                terms: vec![(y, Fixed::from_int(-1))],
                sense: Sense::Le,
                rhs: Fixed::from_raw((s.wait_time.micros() - exec.micros()) as i128),
            });
        }
    }

    Ok(ExtensiveForm {
        variables,
        objective,
        constraints,
        objective_scale: scale,
    })
}

// ---------------------------------------------------------------------------
// LP text format
// ---------------------------------------------------------------------------

const TERMS_PER_LINE: usize = 8;
const MAX_NAME_LEN: usize = 255;
const SCALE_TAG: &str = "\\ objective scale: ";

/// Restricts a name to `[A-Za-z0-9_]`, at most 255 characters, not starting
/// with a digit.
pub fn sanitize_name(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert(0, '_');
    }
    out.truncate(MAX_NAME_LEN);
    out
}

fn write_terms(out: &mut String, form: &ExtensiveForm, terms: &[(usize, Fixed)], wrap: bool) {
    for (k, (idx, coef)) in terms.iter().enumerate() {
        if wrap && k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let name = sanitize_name(&form.variables[*idx].name);
        if k == 0 {
            out.push_str(&format!("{coef} {name}"));
        } else if coef.is_negative() {
            out.push_str(&format!(" - {} {name}", Fixed::from_raw(-coef.raw())));
        } else {
            out.push_str(&format!(" + {coef} {name}"));
        }
    }
}

/// Renders the form in CPLEX LP format.
pub fn lp_string(form: &ExtensiveForm) -> String {
    let mut out = String::new();
    out.push_str("\\ qres deterministic equivalent\n");
    out.push_str(&format!("{SCALE_TAG}{}\n", form.objective_scale));
    out.push_str("Minimize\n obj: ");
    if form.objective.is_empty() {
        out.push('0');
    } else {
        write_terms(&mut out, form, &form.objective, true);
    }
    out.push_str("\nSubject To\n");
    for row in &form.constraints {
        out.push_str(&format!(" {}: ", sanitize_name(&row.name)));
        write_terms(&mut out, form, &row.terms, true);
        out.push_str(&format!(" {} {}\n", row.sense.symbol(), row.rhs));
    }
    out.push_str("Bounds\n");
    for v in &form.variables {
        let name = sanitize_name(&v.name);
        match v.upper {
            Some(ub) => out.push_str(&format!(" {} <= {name} <= {ub}\n", v.lower)),
            None => out.push_str(&format!(" {name} >= {}\n", v.lower)),
        }
    }
    let generals: Vec<String> = form
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Integer)
        .map(|v| sanitize_name(&v.name))
        .collect();
    if !generals.is_empty() {
        out.push_str("Generals\n");
        for chunk in generals.chunks(TERMS_PER_LINE) {
            out.push_str(&format!(" {}\n", chunk.join(" ")));
        }
    }
    out.push_str("End\n");
    out
}

/// Writes the LP text to `sink`, returning the number of bytes written.
pub fn export_lp<W: Write>(form: &ExtensiveForm, sink: &mut W) -> io::Result<usize> {
    let text = lp_string(form);
    sink.write_all(text.as_bytes())?;
    Ok(text.len())
}

/// Writes the LP file through a temporary file in the same directory and
/// renames it into place.
pub fn write_lp_file(form: &ExtensiveForm, path: &Path) -> io::Result<usize> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    let n = export_lp(form, &mut tmp)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(n)
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("LP parse error at line {line}: {message}")]
pub struct LpParseError {
    pub line: usize,
    pub message: String,
}

fn lp_err(line: usize, message: impl Into<String>) -> LpParseError {
    LpParseError {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Generals,
    Done,
}

fn section_keyword(line: &str) -> Option<Section> {
    match line.to_ascii_lowercase().as_str() {
        "minimize" | "minimise" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "generals" | "general" | "gen" => Some(Section::Generals),
        "end" => Some(Section::Done),
        _ => None,
    }
}

/// A linear expression: `(name, coefficient)` in order of appearance.
fn parse_linear(tokens: &[&str], line: usize) -> Result<Vec<(String, Fixed)>, LpParseError> {
    let mut terms = Vec::new();
    let mut sign = 1i128;
    let mut coef: Option<Fixed> = None;
    for tok in tokens {
        match *tok {
            "+" => {}
            "-" => sign = -sign,
            _ => {
                if let Some(c) = Fixed::parse(tok) {
                    if coef.is_some() {
                        return Err(lp_err(line, format!("two coefficients in a row near `{tok}`")));
                    }
                    coef = Some(c);
                } else {
                    if !tok.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                        return Err(lp_err(line, format!("bad token `{tok}`")));
                    }
                    let c = coef.take().unwrap_or(Fixed::ONE);
                    terms.push((tok.to_string(), Fixed::from_raw(sign * c.raw())));
                    sign = 1;
                }
            }
        }
    }
    if coef.is_some() {
        // a lone constant such as `obj: 0`
        if terms.is_empty() && coef == Some(Fixed::ZERO) {
            return Ok(terms);
        }
        return Err(lp_err(line, "dangling coefficient"));
    }
    Ok(terms)
}

fn parse_sense(tok: &str) -> Option<Sense> {
    match tok {
        "<=" | "=<" | "<" => Some(Sense::Le),
        ">=" | "=>" | ">" => Some(Sense::Ge),
        _ => None,
    }
}

struct PendingRow {
    name: String,
    text: String,
    line: usize,
}

/// Reads the subset of the LP format written by [`export_lp`]. Variable
/// order follows the `Bounds` section, then first appearance.
pub fn parse_lp(source: &str) -> Result<ExtensiveForm, LpParseError> {
    let mut section = Section::Preamble;
    let mut scale: i128 = 1;
    let mut objective_text: Option<(String, usize)> = None;
    let mut rows: Vec<PendingRow> = Vec::new();
    let mut bounds: Vec<(String, Fixed, Option<Fixed>)> = Vec::new();
    let mut generals: Vec<String> = Vec::new();

    for (i, raw) in source.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if let Some(rest) = raw.strip_prefix(SCALE_TAG) {
            scale = rest
                .trim()
                .parse()
                .ok()
                .filter(|s| *s > 0)
                .ok_or_else(|| lp_err(lineno, "bad objective scale"))?;
            continue;
        }
        if line.is_empty() || line.starts_with('\\') {
            continue;
        }
        if let Some(next) = section_keyword(line) {
            section = next;
            continue;
        }
        match section {
            Section::Preamble => return Err(lp_err(lineno, "content before `Minimize`")),
            Section::Done => return Err(lp_err(lineno, "content after `End`")),
            Section::Objective => match &mut objective_text {
                None => {
                    let body = line.split_once(':').map_or(line, |(_, b)| b);
                    objective_text = Some((body.to_string(), lineno));
                }
                Some((text, _)) => {
                    text.push(' ');
                    text.push_str(line);
                }
            },
            Section::Constraints => match line.split_once(':') {
                Some((name, body)) => rows.push(PendingRow {
                    name: name.trim().to_string(),
                    text: body.to_string(),
                    line: lineno,
                }),
                None => {
                    let last = rows
                        .last_mut()
                        .ok_or_else(|| lp_err(lineno, "continuation line without a row"))?;
                    last.text.push(' ');
                    last.text.push_str(line);
                }
            },
            Section::Bounds => {
                let toks: Vec<&str> = line.split_whitespace().collect();
                let bound = match toks.as_slice() {
                    [lo, "<=", name, "<=", hi] => {
                        let lo = Fixed::parse(lo).ok_or_else(|| lp_err(lineno, "bad lower bound"))?;
                        let hi = match *hi {
                            "+inf" | "inf" | "+infinity" | "infinity" => None,
                            h => Some(Fixed::parse(h).ok_or_else(|| lp_err(lineno, "bad upper bound"))?),
                        };
                        (name.to_string(), lo, hi)
                    }
                    [name, ">=", lo] => {
                        let lo = Fixed::parse(lo).ok_or_else(|| lp_err(lineno, "bad lower bound"))?;
                        (name.to_string(), lo, None)
                    }
                    _ => return Err(lp_err(lineno, format!("unsupported bound `{line}`"))),
                };
                bounds.push(bound);
            }
            Section::Generals => generals.extend(line.split_whitespace().map(str::to_string)),
        }
    }
    if section != Section::Done {
        return Err(lp_err(source.lines().count(), "missing `End`"));
    }

    let (obj_text, obj_line) = objective_text.ok_or_else(|| lp_err(1, "missing objective"))?;
    let obj_tokens: Vec<&str> = obj_text.split_whitespace().collect();
    let obj_terms = parse_linear(&obj_tokens, obj_line)?;

    let mut parsed_rows = Vec::new();
    for row in &rows {
        let toks: Vec<&str> = row.text.split_whitespace().collect();
        let pos = toks
            .iter()
            .position(|t| parse_sense(t).is_some())
            .ok_or_else(|| lp_err(row.line, "row without a sense"))?;
        if pos + 2 != toks.len() {
            return Err(lp_err(row.line, "expected a single right-hand side"));
        }
        let sense = parse_sense(toks[pos]).expect("found above");
        let rhs = Fixed::parse(toks[pos + 1]).ok_or_else(|| lp_err(row.line, "bad right-hand side"))?;
        let terms = parse_linear(&toks[..pos], row.line)?;
        parsed_rows.push((row.name.clone(), terms, sense, rhs));
    }

    let mut index: HashMap<String, usize> = HashMap::new();
    let mut variables: Vec<Variable> = Vec::new();
    let mut intern = |name: &str, variables: &mut Vec<Variable>| -> usize {
        *index.entry(name.to_string()).or_insert_with(|| {
            variables.push(Variable {
                name: name.to_string(),
                kind: VarKind::Continuous,
                lower: Fixed::ZERO,
                upper: None,
            });
            variables.len() - 1
        })
    };
    for (name, lo, hi) in &bounds {
        let i = intern(name, &mut variables);
        variables[i].lower = *lo;
        variables[i].upper = *hi;
    }
    let objective = obj_terms.iter().map(|(n, c)| (intern(n, &mut variables), *c)).collect();
    let constraints = parsed_rows
        .into_iter()
        .map(|(name, terms, sense, rhs)| Row {
            name,
            terms: terms.iter().map(|(n, c)| (intern(n, &mut variables), *c)).collect(),
            sense,
            rhs,
        })
        .collect();
    for g in &generals {
        let i = intern(g, &mut variables);
        variables[i].kind = VarKind::Integer;
    }

    Ok(ExtensiveForm {
        variables,
        objective,
        constraints,
        objective_scale: scale,
    })
}

// ---------------------------------------------------------------------------
// Enumerative solver
// ---------------------------------------------------------------------------

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnumerationError {
    #[error("enumeration needs more than {guard} nodes")]
    GuardExceeded { guard: u64 },
    #[error("no feasible assignment")]
    Infeasible,
    #[error("variable `{0}` has no finite enumeration bound")]
    Unbounded(String),
    #[error("continuous variable `{0}` must have a non-negative cost and unit coefficients in rows without other continuous variables")]
    UnsupportedContinuous(String),
    #[error("arithmetic overflow")]
    Overflow,
    #[error("malformed form: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumerationResult {
    /// Objective of the unscaled model, in dollars.
    pub objective: Amount,
    pub assignment: Vec<Fixed>,
    pub nodes: u64,
}

fn floor_div(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -floor_div(-a, b)
}

/// Value of one term: coefficient times variable value, in 1e-12 units.
fn term(coef: Fixed, value: Fixed) -> Result<i128, EnumerationError> {
    coef.raw().checked_mul(value.raw()).ok_or(EnumerationError::Overflow)
}

struct Enumerator<'a> {
    form: &'a ExtensiveForm,
    obj: Vec<Fixed>,
    rows_of: Vec<Vec<usize>>,
    guard: u64,
    nodes: u64,
}

impl<'a> Enumerator<'a> {
    fn new(form: &'a ExtensiveForm, guard: u64) -> Self {
        let n = form.variables.len();
        let mut obj = vec![Fixed::ZERO; n];
        for &(i, c) in &form.objective {
            obj[i] = Fixed::from_raw(obj[i].raw() + c.raw());
        }
        let mut rows_of = vec![Vec::new(); n];
        for (r, row) in form.constraints.iter().enumerate() {
            for &(i, _) in &row.terms {
                if rows_of[i].last() != Some(&r) {
                    rows_of[i].push(r);
                }
            }
        }
        Enumerator {
            form,
            obj,
            rows_of,
            guard,
            nodes: 0,
        }
    }

    fn tick(&mut self) -> Result<(), EnumerationError> {
        self.nodes += 1;
        if self.nodes > self.guard {
            return Err(EnumerationError::GuardExceeded { guard: self.guard });
        }
        Ok(())
    }

    /// Smallest possible value of `sum coef*x` over the row's variables
    /// other than `skip`, using fixed values where known and bounds
    /// otherwise. `None` when unbounded below.
    fn min_activity(&self, row: &Row, skip: usize, fixed: &[Option<Fixed>]) -> Option<i128> {
        let mut total = 0i128;
        for &(j, c) in &row.terms {
            if j == skip {
                continue;
            }
            let v = &self.form.variables[j];
            let val = match fixed[j] {
                Some(x) => x,
                None if c.raw() > 0 => v.lower,
                None => v.upper?,
            };
            total = total.checked_add(c.raw().checked_mul(val.raw())?)?;
        }
        Some(total)
    }

    /// Largest value worth enumerating for an integer variable.
    fn upper_limit(&self, var: usize, fixed: &[Option<Fixed>]) -> Result<i128, EnumerationError> {
        let v = &self.form.variables[var];
        let lower = ceil_div(v.lower.raw(), FIXED_ONE);
        let mut limit = v.upper.map(|u| floor_div(u.raw(), FIXED_ONE));

        // constraint bounds from <= rows with a positive coefficient
        for &r in &self.rows_of[var] {
            let row = &self.form.constraints[r];
            let coef: i128 = row.terms.iter().filter(|(j, _)| *j == var).map(|(_, c)| c.raw()).sum();
            if row.sense == Sense::Le && coef > 0 {
                if let Some(act) = self.min_activity(row, var, fixed) {
                    // coef*x/1e6 <= rhs - act/1e6 (all in 1e-12 units)
                    let room = row.rhs.raw() * FIXED_ONE - act;
                    let ub = floor_div(room, coef * FIXED_ONE);
                    limit = Some(limit.map_or(ub, |l| l.min(ub)));
                }
            }
        }

        // dominance: with a non-negative cost and no <= row that rewards a
        // larger value, nothing is gained past covering every >= row alone
        let loosens_le = self.rows_of[var].iter().any(|&r| {
            let row = &self.form.constraints[r];
            row.sense == Sense::Le && row.terms.iter().any(|&(j, c)| j == var && c.raw() < 0)
        });
        if self.obj[var].raw() >= 0 && !loosens_le {
            let mut dom = lower;
            let mut finite = true;
            for &r in &self.rows_of[var] {
                let row = &self.form.constraints[r];
                let coef: i128 = row.terms.iter().filter(|(j, _)| *j == var).map(|(_, c)| c.raw()).sum();
                if row.sense == Sense::Ge && coef > 0 {
                    match self.min_activity(row, var, fixed) {
                        Some(act) => {
                            let need = row.rhs.raw() * FIXED_ONE - act;
                            dom = dom.max(ceil_div(need, coef * FIXED_ONE));
                        }
                        None => finite = false,
                    }
                }
            }
            if finite {
                limit = Some(limit.map_or(dom, |l| l.min(dom)));
            }
        }
        limit.ok_or_else(|| EnumerationError::Unbounded(v.name.clone()))
    }

    /// Smallest feasible value of a continuous variable given all integer
    /// values in its rows.
    fn continuous_value(&self, var: usize, fixed: &[Option<Fixed>]) -> Result<Fixed, EnumerationError> {
        let v = &self.form.variables[var];
        let mut value = v.lower.raw();
        for &r in &self.rows_of[var] {
            let row = &self.form.constraints[r];
            let coef: i128 = row.terms.iter().filter(|(j, _)| *j == var).map(|(_, c)| c.raw()).sum();
            let pushes_up = (row.sense == Sense::Ge && coef > 0) || (row.sense == Sense::Le && coef < 0);
            if !pushes_up {
                continue;
            }
            let mut others = 0i128;
            for &(j, c) in &row.terms {
                if j != var {
                    let x = fixed[j].expect("integer values fixed before continuous ones");
                    others = others.checked_add(term(c, x)?).ok_or(EnumerationError::Overflow)?;
                }
            }
            // coef*y (1e-12) vs rhs*1e6 - others, coef is +-1e6
            let need = row.rhs.raw() * FIXED_ONE - others;
            value = value.max(need / coef);
        }
        Ok(Fixed::from_raw(value))
    }

    fn rows_satisfied(&self, rows: &[usize], values: &[Option<Fixed>]) -> Result<bool, EnumerationError> {
        for &r in rows {
            let row = &self.form.constraints[r];
            let mut act = 0i128;
            for &(j, c) in &row.terms {
                let Some(x) = values[j] else { continue };
                act = act.checked_add(term(c, x)?).ok_or(EnumerationError::Overflow)?;
            }
            let rhs = row.rhs.raw() * FIXED_ONE;
            let ok = match row.sense {
                Sense::Le => act <= rhs,
                Sense::Ge => act >= rhs,
            };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn bounds_ok(&self, var: usize, value: Fixed) -> bool {
        let v = &self.form.variables[var];
        value >= v.lower && v.upper.is_none_or(|u| value <= u)
    }

    /// Enumerates the integer variables of `block` (others already fixed),
    /// derives continuous ones, and returns the cheapest feasible
    /// completion: objective contribution and values.
    fn solve_block(
        &mut self,
        block: &Block,
        values: &mut [Option<Fixed>],
    ) -> Result<Option<(i128, Vec<Fixed>)>, EnumerationError> {
        let mut limits = Vec::with_capacity(block.integers.len());
        for &v in &block.integers {
            let lo = ceil_div(self.form.variables[v].lower.raw(), FIXED_ONE);
            // bounds are re-derived with the rest of the block unfixed
            let hi = self.upper_limit(v, values)?;
            limits.push((lo, hi));
        }
        if limits.iter().any(|(lo, hi)| lo > hi) {
            return Ok(None);
        }
        let mut current: Vec<i128> = limits.iter().map(|(lo, _)| *lo).collect();
        let mut best: Option<(i128, Vec<Fixed>)> = None;
        loop {
            self.tick()?;
            for (&v, &x) in block.integers.iter().zip(&current) {
                values[v] = Some(Fixed::from_int(x));
            }
            let mut feasible = true;
            for &v in &block.continuous {
                let y = self.continuous_value(v, values)?;
                if !self.bounds_ok(v, y) {
                    feasible = false;
                }
                values[v] = Some(y);
            }
            if feasible && self.rows_satisfied(&block.rows, values)? {
                let mut cost = 0i128;
                for &v in block.integers.iter().chain(&block.continuous) {
                    cost = cost
                        .checked_add(term(self.obj[v], values[v].expect("set"))?)
                        .ok_or(EnumerationError::Overflow)?;
                }
                if best.as_ref().is_none_or(|(b, _)| cost < *b) {
                    let vals = block
                        .integers
                        .iter()
                        .chain(&block.continuous)
                        .map(|&v| values[v].expect("set"))
                        .collect();
                    best = Some((cost, vals));
                }
            }
            // odometer, last variable fastest
            let mut k = current.len();
            let advanced = loop {
                if k == 0 {
                    break false;
                }
                k -= 1;
                if current[k] < limits[k].1 {
                    current[k] += 1;
                    break true;
                }
                current[k] = limits[k].0;
            };
            if !advanced {
                break;
            }
        }
        for &v in block.integers.iter().chain(&block.continuous) {
            values[v] = None;
        }
        Ok(best)
    }
}

#[derive(Debug, Default)]
struct Block {
    integers: Vec<usize>,
    continuous: Vec<usize>,
    rows: Vec<usize>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut cur = x;
        while self.0[cur] != root {
            let next = self.0[cur];
            self.0[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Groups `vars` into blocks connected through rows, ignoring variables
/// outside `vars`. Blocks come out ordered by their smallest variable.
fn connected_blocks(form: &ExtensiveForm, vars: &[usize], rows: &[usize]) -> Vec<Block> {
    let n = form.variables.len();
    let mut member = vec![false; n];
    for &v in vars {
        member[v] = true;
    }
    let mut uf = UnionFind::new(n);
    for &r in rows {
        let inside: Vec<usize> = form.constraints[r]
            .terms
            .iter()
            .map(|(j, _)| *j)
            .filter(|&j| member[j])
            .collect();
        for w in inside.windows(2) {
            uf.union(w[0], w[1]);
        }
    }
    let mut by_root: BTreeMap<usize, Block> = BTreeMap::new();
    for &v in vars {
        let root = uf.find(v);
        let block = by_root.entry(root).or_default();
        match form.variables[v].kind {
            VarKind::Integer => block.integers.push(v),
            VarKind::Continuous => block.continuous.push(v),
        }
    }
    for &r in rows {
        if let Some(&(j, _)) = form.constraints[r].terms.iter().find(|(j, _)| member[*j]) {
            let root = uf.find(j);
            by_root.get_mut(&root).expect("member").rows.push(r);
        }
    }
    by_root.into_values().collect()
}

fn is_first_stage(name: &str) -> bool {
    name.starts_with("xr_")
}

/// Exact minimization of a small extensive form by enumeration.
///
/// The model is split into independent components; within a component the
/// first-stage variables (named `xr_*`) are enumerated jointly, and for
/// each of their values the remaining scenario blocks are enumerated
/// independently. Integer variables without an upper bound are enumerated
/// up to the point past which increasing them cannot help, and continuous
/// variables take their smallest feasible value. `guard` caps the total
/// number of assignments visited.
pub fn solve_enumerative(form: &ExtensiveForm, guard: u64) -> Result<EnumerationResult, EnumerationError> {
    form.check().map_err(|e| EnumerationError::Malformed(e.to_string()))?;
    let mut en = Enumerator::new(form, guard);

    for (v, var) in form.variables.iter().enumerate() {
        if var.kind != VarKind::Continuous {
            continue;
        }
        let ok = en.obj[v].raw() >= 0
            && !is_first_stage(&var.name)
            && en.rows_of[v].iter().all(|&r| {
                form.constraints[r].terms.iter().all(|&(j, c)| {
                    if j == v {
                        c.raw().abs() == FIXED_ONE
                    } else {
                        form.variables[j].kind == VarKind::Integer
                    }
                })
            });
        if !ok {
            return Err(EnumerationError::UnsupportedContinuous(var.name.clone()));
        }
    }

    let all_vars: Vec<usize> = (0..form.variables.len()).collect();
    let all_rows: Vec<usize> = (0..form.constraints.len()).collect();
    let components = connected_blocks(form, &all_vars, &all_rows);

    let mut values: Vec<Option<Fixed>> = vec![None; form.variables.len()];
    let mut assignment = vec![Fixed::ZERO; form.variables.len()];
    let mut total = 0i128;

    for comp in components {
        let comp_vars: Vec<usize> = comp.integers.iter().chain(&comp.continuous).copied().collect();
        let first: Vec<usize> = comp
            .integers
            .iter()
            .copied()
            .filter(|&v| is_first_stage(&form.variables[v].name))
            .collect();
        let rest: Vec<usize> = comp_vars.iter().copied().filter(|v| !first.contains(v)).collect();
        let first_rows: Vec<usize> = comp
            .rows
            .iter()
            .copied()
            .filter(|&r| form.constraints[r].terms.iter().all(|(j, _)| first.contains(j)))
            .collect();
        let rest_rows: Vec<usize> = comp.rows.iter().copied().filter(|r| !first_rows.contains(r)).collect();
        let blocks = connected_blocks(form, &rest, &rest_rows);

        if first.is_empty() {
            for block in &blocks {
                let (cost, vals) = en
                    .solve_block(block, &mut values)?
                    .ok_or(EnumerationError::Infeasible)?;
                total = total.checked_add(cost).ok_or(EnumerationError::Overflow)?;
                for (&v, x) in block.integers.iter().chain(&block.continuous).zip(vals) {
                    assignment[v] = x;
                }
            }
            continue;
        }

        let mut limits = Vec::new();
        for &v in &first {
            let var = &form.variables[v];
            let lo = ceil_div(var.lower.raw(), FIXED_ONE);
            let hi = en.upper_limit(v, &values)?;
            limits.push((lo, hi));
        }
        if limits.iter().any(|(lo, hi)| lo > hi) {
            return Err(EnumerationError::Infeasible);
        }
        let mut current: Vec<i128> = limits.iter().map(|(lo, _)| *lo).collect();
        let mut best: Option<(i128, Vec<(usize, Fixed)>)> = None;
        loop {
            en.tick()?;
            for (&v, &x) in first.iter().zip(&current) {
                values[v] = Some(Fixed::from_int(x));
            }
            if en.rows_satisfied(&first_rows, &values)? {
                let mut cost = 0i128;
                let mut chosen: Vec<(usize, Fixed)> = Vec::new();
                for &v in &first {
                    let x = values[v].expect("set");
                    cost = cost
                        .checked_add(term(en.obj[v], x)?)
                        .ok_or(EnumerationError::Overflow)?;
                    chosen.push((v, x));
                }
                let mut feasible = true;
                for block in &blocks {
                    match en.solve_block(block, &mut values)? {
                        Some((c, vals)) => {
                            cost = cost.checked_add(c).ok_or(EnumerationError::Overflow)?;
                            chosen.extend(block.integers.iter().chain(&block.continuous).copied().zip(vals));
                        }
                        None => {
                            feasible = false;
                            break;
                        }
                    }
                }
                if feasible && best.as_ref().is_none_or(|(b, _)| cost < *b) {
                    best = Some((cost, chosen));
                }
            }
            let mut k = current.len();
            let advanced = loop {
                if k == 0 {
                    break false;
                }
                k -= 1;
                if current[k] < limits[k].1 {
                    current[k] += 1;
                    break true;
                }
                current[k] = limits[k].0;
            };
            if !advanced {
                break;
            }
        }
        for &v in &first {
            values[v] = None;
        }
        let (cost, chosen) = best.ok_or(EnumerationError::Infeasible)?;
        total = total.checked_add(cost).ok_or(EnumerationError::Overflow)?;
        for (v, x) in chosen {
            assignment[v] = x;
        }
    }

    let denom = BigInt::from(FIXED_ONE * FIXED_ONE) * BigInt::from(form.objective_scale);
    let objective = if total == 0 {
        Amount::new(BigRational::zero())
    } else {
        Amount::new(BigRational::new(BigInt::from(total), denom))
    };
    Ok(EnumerationResult {
        objective,
        assignment,
        nodes: en.nodes,
    })
}
