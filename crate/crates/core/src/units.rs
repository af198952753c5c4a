// Copyright 2026 The qres Authors
// SPDX-License-Identifier: Apache-2.0

//! Fixed-point money and time, plus the exact rational type used for
//! expectations.
//!
//! Rates are held in micro-dollars and times in microseconds. A single
//! scenario cost (`qubits * rate + over_wait * penalty_rate`) is then an
//! integer number of pico-dollars, and every expectation is an exact
//! rational number of dollars. Nothing on the cost path touches floating
//! point.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const MICROS_PER_UNIT: i64 = 1_000_000;
const PICOS_PER_MICRO: i128 = 1_000_000;
const PICOS_PER_DOLLAR: i128 = 1_000_000_000_000;

/// Fixed-point dollars, stored as an integer count of micro-dollars.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_micros(micros: i64) -> Self {
        Money(micros)
    }

    /// Rounds to the nearest micro-dollar.
    pub fn from_dollars(dollars: f64) -> Self {
        Money((dollars * MICROS_PER_UNIT as f64).round() as i64)
    }

    pub const fn micros(self) -> i64 {
        self.0
    }

    pub fn dollars(self) -> f64 {
        self.0 as f64 / MICROS_PER_UNIT as f64
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_micros(self.0 as i128))
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.dollars())
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        if !v.is_finite() {
            return Err(serde::de::Error::custom("money value must be finite"));
        }
        Ok(Money::from_dollars(v))
    }
}

/// Fixed-point seconds, stored as an integer count of microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Seconds(i64);

impl Seconds {
    pub const ZERO: Seconds = Seconds(0);

    pub const fn from_micros(micros: i64) -> Self {
        Seconds(micros)
    }

    /// Rounds to the nearest microsecond.
    pub fn from_secs(secs: f64) -> Self {
        Seconds((secs * MICROS_PER_UNIT as f64).round() as i64)
    }

    pub const fn micros(self) -> i64 {
        self.0
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / MICROS_PER_UNIT as f64
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    /// `max(0, self - other)`.
    pub fn saturating_excess(self, other: Seconds) -> Seconds {
        Seconds((self.0 - other.0).max(0))
    }

    pub fn as_rational(self) -> BigRational {
        BigRational::new(BigInt::from(self.0), BigInt::from(MICROS_PER_UNIT))
    }

    /// Parses a plain decimal with at most six fraction digits, exactly.
    pub fn parse(text: &str) -> Option<Self> {
        let micros = parse_decimal(text)? * BigInt::from(MICROS_PER_UNIT);
        if !micros.is_integer() {
            return None;
        }
        micros.to_integer().to_i64().map(Seconds)
    }
}

impl Add for Seconds {
    type Output = Seconds;
    fn add(self, rhs: Seconds) -> Seconds {
        Seconds(self.0 + rhs.0)
    }
}

impl Sub for Seconds {
    type Output = Seconds;
    fn sub(self, rhs: Seconds) -> Seconds {
        Seconds(self.0 - rhs.0)
    }
}

impl fmt::Display for Seconds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_micros(self.0 as i128))
    }
}

impl Serialize for Seconds {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_secs())
    }
}

impl<'de> Deserialize<'de> for Seconds {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        if !v.is_finite() {
            return Err(serde::de::Error::custom("time value must be finite"));
        }
        Ok(Seconds::from_secs(v))
    }
}

/// Cost of a single scenario, in pico-dollars.
///
/// `qubits * rate` lands on whole micro-dollars; `over_wait * penalty_rate`
/// is micro-seconds times micro-dollars-per-second, i.e. pico-dollars.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cost(i128);

impl Cost {
    pub const ZERO: Cost = Cost(0);

    pub const fn from_picos(picos: i128) -> Self {
        Cost(picos)
    }

    pub fn from_money(m: Money) -> Self {
        Cost(m.micros() as i128 * PICOS_PER_MICRO)
    }

    /// `count` qubits charged at `rate` per qubit.
    pub fn qubits(count: u64, rate: Money) -> Self {
        Cost(count as i128 * rate.micros() as i128 * PICOS_PER_MICRO)
    }

    /// `time` of over-waiting charged at `rate` per second.
    pub fn over_wait(time: Seconds, rate: Money) -> Self {
        Cost(time.micros() as i128 * rate.micros() as i128)
    }

    pub const fn picos(self) -> i128 {
        self.0
    }

    pub fn dollars(self) -> f64 {
        self.0 as f64 / PICOS_PER_DOLLAR as f64
    }
}

impl Add for Cost {
    type Output = Cost;
    fn add(self, rhs: Cost) -> Cost {
        Cost(self.0 + rhs.0)
    }
}

impl AddAssign for Cost {
    fn add_assign(&mut self, rhs: Cost) {
        self.0 += rhs.0;
    }
}

impl Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Cost {
        iter.fold(Cost::ZERO, Add::add)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Amount::from(*self).fmt(f)
    }
}

/// An exact amount of dollars (or seconds, for expected over-wait).
///
/// Expectations over scenario spaces are weighted sums with rational
/// probabilities, so they are carried as big rationals and only rounded
/// when printed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Amount(BigRational);

impl Amount {
    pub fn zero() -> Self {
        Amount(BigRational::zero())
    }

    pub fn new(value: BigRational) -> Self {
        Amount(value)
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    pub fn into_rational(self) -> BigRational {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Decimal rendering with exactly six fraction digits, rounded half away
    /// from zero.
    pub fn to_fixed6(&self) -> String {
        let scaled = &self.0 * BigRational::from_integer(BigInt::from(MICROS_PER_UNIT));
        let rounded = scaled.round().to_integer();
        format_micros_big(&rounded)
    }
}

impl From<Money> for Amount {
    fn from(m: Money) -> Self {
        Amount(BigRational::new(
            BigInt::from(m.micros()),
            BigInt::from(MICROS_PER_UNIT),
        ))
    }
}

impl From<Cost> for Amount {
    fn from(c: Cost) -> Self {
        Amount(BigRational::new(
            BigInt::from(c.picos()),
            BigInt::from(PICOS_PER_DOLLAR),
        ))
    }
}

impl From<Seconds> for Amount {
    fn from(s: Seconds) -> Self {
        Amount(s.as_rational())
    }
}

impl Add for Amount {
    type Output = Amount;
    fn add(self, rhs: Amount) -> Amount {
        Amount(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a Amount> for &'a Amount {
    type Output = Amount;
    fn add(self, rhs: &'a Amount) -> Amount {
        Amount(&self.0 + &rhs.0)
    }
}

impl AddAssign<&Amount> for Amount {
    fn add_assign(&mut self, rhs: &Amount) {
        self.0 += &rhs.0;
    }
}

impl Sub for Amount {
    type Output = Amount;
    fn sub(self, rhs: Amount) -> Amount {
        Amount(self.0 - rhs.0)
    }
}

impl<'a> Sub<&'a Amount> for &'a Amount {
    type Output = Amount;
    fn sub(self, rhs: &'a Amount) -> Amount {
        Amount(&self.0 - &rhs.0)
    }
}

impl Mul<&BigRational> for &Amount {
    type Output = Amount;
    fn mul(self, rhs: &BigRational) -> Amount {
        Amount(&self.0 * rhs)
    }
}

impl Sum for Amount {
    fn sum<I: Iterator<Item = Amount>>(iter: I) -> Amount {
        iter.fold(Amount::zero(), Add::add)
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_fixed6())
    }
}

/// The exact decimal that `v` prints as (shortest round-trip form), as a
/// rational. `0.3_f64` becomes exactly `3/10`.
pub fn exact_decimal(v: f64) -> Option<BigRational> {
    if !v.is_finite() {
        return None;
    }
    parse_decimal(&format!("{v}"))
}

/// Parses `[-]digits[.digits]` into an exact rational.
pub fn parse_decimal(text: &str) -> Option<BigRational> {
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut numer: BigInt = digits.parse().ok()?;
    if neg {
        numer = -numer;
    }
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    Some(BigRational::new(numer, denom))
}

fn format_micros(micros: i128) -> String {
    let sign = if micros < 0 { "-" } else { "" };
    let abs = micros.unsigned_abs();
    format!("{sign}{}.{:06}", abs / 1_000_000, abs % 1_000_000)
}

fn format_micros_big(micros: &BigInt) -> String {
    let sign = if micros.is_negative() { "-" } else { "" };
    let (whole, frac) = micros.abs().div_rem(&BigInt::from(MICROS_PER_UNIT));
    let frac = frac.to_u64().unwrap_or(0);
    format!("{sign}{whole}.{frac:06}")
}
