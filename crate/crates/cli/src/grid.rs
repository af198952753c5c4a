// Copyright 2026 The qres Authors
// SPDX-License-Identifier: Apache-2.0

//! `lo:hi[:step]` axis syntax. Bounds are inclusive.

use qres_core::Seconds;

/// Largest number of points a single axis may expand to.
pub const MAX_AXIS_POINTS: usize = 1_000_000;

fn split(spec: &str) -> Result<(&str, &str, Option<&str>), String> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [single] => Ok((single, single, None)),
        [lo, hi] => Ok((lo, hi, None)),
        [lo, hi, step] => Ok((lo, hi, Some(step))),
        _ => Err(format!("`{spec}` is not of the form lo:hi[:step]")),
    }
}

/// Integer axis; `step` defaults to 1.
pub fn parse_int_grid(spec: &str) -> Result<Vec<u32>, String> {
    let (lo, hi, step) = split(spec)?;
    let num = |s: &str, what: &str| {
        s.trim()
            .parse::<u32>()
            .map_err(|_| format!("{what} `{s}` in `{spec}` is not a non-negative integer"))
    };
    let (lo, hi) = (num(lo, "lower bound")?, num(hi, "upper bound")?);
    let step = step.map(|s| num(s, "step")).transpose()?.unwrap_or(1);
    if step == 0 {
        return Err(format!("step in `{spec}` must be positive"));
    }
    if lo > hi {
        return Err(format!("lower bound exceeds upper bound in `{spec}`"));
    }
    if ((hi - lo) / step) as usize >= MAX_AXIS_POINTS {
        return Err(format!("`{spec}` expands to more than {MAX_AXIS_POINTS} points"));
    }
    Ok((lo..=hi).step_by(step as usize).collect())
}

/// Exact seconds with at most six fraction digits.
pub fn parse_seconds(text: &str) -> Result<Seconds, String> {
    Seconds::parse(text.trim())
        .ok_or_else(|| format!("`{text}` is not a decimal number of seconds with at most six fraction digits"))
}

/// Time axis in seconds; `default_step` applies when the spec omits one.
pub fn parse_time_grid(spec: &str, default_step: Option<Seconds>) -> Result<Vec<Seconds>, String> {
    let (lo, hi, step) = split(spec)?;
    let (lo, hi) = (parse_seconds(lo)?, parse_seconds(hi)?);
    if lo.is_negative() {
        return Err(format!("waiting times in `{spec}` must be non-negative"));
    }
    if lo > hi {
        return Err(format!("lower bound exceeds upper bound in `{spec}`"));
    }
    let step = match step {
        Some(s) => parse_seconds(s)?,
        None if lo == hi => Seconds::from_micros(1),
        None => default_step.ok_or_else(|| format!("`{spec}` needs an explicit step"))?,
    };
    if step.micros() <= 0 {
        return Err(format!("step in `{spec}` must be positive"));
    }
    let count = ((hi.micros() - lo.micros()) / step.micros()) as usize + 1;
    if count > MAX_AXIS_POINTS {
        return Err(format!("`{spec}` expands to more than {MAX_AXIS_POINTS} points"));
    }
    Ok((0..count)
        .map(|k| Seconds::from_micros(lo.micros() + k as i64 * step.micros()))
        .collect())
}
