// Copyright 2026 The qres Authors
// SPDX-License-Identifier: Apache-2.0

//! Expected cost under a uniform forced reservation level, optionally with
//! the waiting time fixed to an arranged value.

use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::instance::Instance;
use crate::solver::{Model, SolveError};
use crate::units::{Amount, Seconds};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("grid is empty")]
    EmptyGrid,
    #[error("reservation grid must be strictly increasing")]
    UnorderedGrid,
    #[error("grid value {reserved} exceeds the smallest machine capacity {capacity}")]
    ExceedsCapacity { reserved: u32, capacity: u32 },
    #[error("instance has no triples")]
    NoTriples,
    #[error("arranged waiting time {0} is negative")]
    NegativeWait(Seconds),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurvePoint {
    pub reserved: u32,
    pub first_stage: Amount,
    pub second_stage: Amount,
    /// Part of `second_stage`; not written to CSV.
    pub on_demand: Amount,
    pub penalty: Amount,
    pub total: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostCurve {
    pub points: Vec<CurvePoint>,
}

impl CostCurve {
    /// First point with the smallest total.
    pub fn argmin(&self) -> Option<&CurvePoint> {
        self.points
            .iter()
            .fold(None, |best: Option<&CurvePoint>, p| match best {
                Some(b) if b.total <= p.total => Some(b),
                _ => Some(p),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceRow {
    pub reserved: u32,
    pub arranged_wait: Seconds,
    pub penalty: Amount,
    pub total: Amount,
}

/// Rows in reserved-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostSurface {
    pub reserved_grid: Vec<u32>,
    pub wait_grid: Vec<Seconds>,
    pub rows: Vec<SurfaceRow>,
}

impl CostSurface {
    pub fn row(&self, reserved_pos: usize, wait_pos: usize) -> &SurfaceRow {
        &self.rows[reserved_pos * self.wait_grid.len() + wait_pos]
    }

    /// First row with the smallest total.
    pub fn argmin(&self) -> Option<&SurfaceRow> {
        self.rows.iter().fold(None, |best: Option<&SurfaceRow>, r| match best {
            Some(b) if b.total <= r.total => Some(b),
            _ => Some(r),
        })
    }
}

fn check_grid(model: &Model, grid: &[u32]) -> Result<(), SweepError> {
    if grid.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SweepError::UnorderedGrid);
    }
    let capacity = model.min_capacity().ok_or(SweepError::NoTriples)?;
    match grid.iter().find(|&&x| x > capacity) {
        Some(&reserved) => Err(SweepError::ExceedsCapacity { reserved, capacity }),
        None => Ok(()),
    }
}

fn evaluate_curve(model: &Model, grid: &[u32]) -> Result<Vec<CurvePoint>, SweepError> {
    grid.par_iter()
        .map(|&x| {
            let s = model.expected_cost(&model.uniform_reservations(x))?;
            Ok(CurvePoint {
                reserved: x,
                first_stage: s.expected_first_stage,
                second_stage: s.expected_second_stage,
                on_demand: s.expected_on_demand,
                penalty: s.expected_penalty,
                total: s.expected_total,
            })
        })
        .collect()
}

/// Forces the same reservation on every triple for each grid value.
pub fn sweep_reservation(instance: &Instance, grid: &[u32]) -> Result<CostCurve, SweepError> {
    let model = Model::new(instance)?;
    check_grid(&model, grid)?;
    Ok(CostCurve {
        points: evaluate_curve(&model, grid)?,
    })
}

/// Copy of `instance` whose every circuit waits exactly `wait`.
pub fn with_arranged_wait(instance: &Instance, wait: Seconds) -> Instance {
    let mut out = instance.clone();
    for c in &instance.circuits {
        out.wait_sets.insert(c.id.clone(), vec![wait]);
    }
    out.wait_probs.clear();
    out.joint_probs.clear();
    out
}

/// Evaluates every `(reserved, arranged wait)` pair. The demand marginal
/// is kept; the wait-time set collapses to the arranged value.
pub fn sweep_reservation_waiting(
    instance: &Instance,
    x_grid: &[u32],
    wait_grid: &[Seconds],
) -> Result<CostSurface, SweepError> {
    if wait_grid.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    if let Some(&w) = wait_grid.iter().find(|w| w.is_negative()) {
        return Err(SweepError::NegativeWait(w));
    }
    check_grid(&Model::new(instance)?, x_grid)?;
    let columns: Vec<Vec<CurvePoint>> = wait_grid
        .par_iter()
        .map(|&w| {
            let model = Model::new(&with_arranged_wait(instance, w))?;
            evaluate_curve(&model, x_grid)
        })
        .collect::<Result<_, SweepError>>()?;
    let mut rows = Vec::with_capacity(x_grid.len() * wait_grid.len());
    for (i, &x) in x_grid.iter().enumerate() {
        for (j, &w) in wait_grid.iter().enumerate() {
            let p = &columns[j][i];
            rows.push(SurfaceRow {
                reserved: x,
                arranged_wait: w,
                penalty: p.penalty.clone(),
                total: p.total.clone(),
            });
        }
    }
    Ok(CostSurface {
        reserved_grid: x_grid.to_vec(),
        wait_grid: wait_grid.to_vec(),
        rows,
    })
}

pub const CURVE_HEADER: &str = "reserved,first_stage,second_stage,penalty,total";
pub const SURFACE_HEADER: &str = "reserved,arranged_wait,total";

pub fn curve_csv(curve: &CostCurve) -> String {
    let mut out = format!("{CURVE_HEADER}\n");
    for p in &curve.points {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.reserved,
            p.first_stage.to_fixed6(),
            p.second_stage.to_fixed6(),
            p.penalty.to_fixed6(),
            p.total.to_fixed6()
        ));
    }
    out
}

pub fn surface_csv(surface: &CostSurface) -> String {
    let mut out = format!("{SURFACE_HEADER}\n");
    for r in &surface.rows {
        out.push_str(&format!("{},{},{}\n", r.reserved, r.arranged_wait, r.total.to_fixed6()));
    }
    out
}

/// Either sweep result, for [`emit_csv`].
#[derive(Debug, Clone, Copy)]
pub enum SweepTable<'a> {
    Curve(&'a CostCurve),
    Surface(&'a CostSurface),
}

impl<'a> From<&'a CostCurve> for SweepTable<'a> {
    fn from(c: &'a CostCurve) -> Self {
        SweepTable::Curve(c)
    }
}

impl<'a> From<&'a CostSurface> for SweepTable<'a> {
    fn from(s: &'a CostSurface) -> Self {
        SweepTable::Surface(s)
    }
}

/// Writes the CSV form and returns the number of bytes written.
pub fn emit_csv<'a, W: Write>(table: impl Into<SweepTable<'a>>, sink: &mut W) -> io::Result<usize> {
    let text = match table.into() {
        SweepTable::Curve(c) => curve_csv(c),
        SweepTable::Surface(s) => surface_csv(s),
    };
    sink.write_all(text.as_bytes())?;
    Ok(text.len())
}
