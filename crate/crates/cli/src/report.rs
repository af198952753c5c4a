// Copyright 2026 The qres Authors
// SPDX-License-Identifier: Apache-2.0

//! Solution summaries: one row per triple and a closing `total` row.

use qres_core::Solution;

pub const SOLUTION_HEADER: [&str; 9] = [
    "circuit_id",
    "provider_id",
    "machine_id",
    "reserved",
    "first_stage",
    "second_stage",
    "on_demand",
    "penalty",
    "total",
];

fn rows(solution: &Solution) -> Vec<[String; 9]> {
    let mut out = Vec::with_capacity(solution.per_triple.len() + 1);
    for (key, b) in &solution.per_triple {
        out.push([
            key.circuit_id.clone(),
            key.provider_id.clone(),
            key.machine_id.clone(),
            solution.reservations[key].to_string(),
            b.first_stage.to_fixed6(),
            b.second_stage.to_fixed6(),
            b.on_demand.to_fixed6(),
            b.penalty.to_fixed6(),
            b.total.to_fixed6(),
        ]);
    }
    let reserved: u64 = solution.reservations.values().map(|&x| x as u64).sum();
    out.push([
        "total".into(),
        String::new(),
        String::new(),
        reserved.to_string(),
        solution.expected_first_stage.to_fixed6(),
        solution.expected_second_stage.to_fixed6(),
        solution.expected_on_demand.to_fixed6(),
        solution.expected_penalty.to_fixed6(),
        solution.expected_total.to_fixed6(),
    ]);
    out
}

pub fn solution_csv(solution: &Solution) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(SOLUTION_HEADER).expect("in-memory write");
    for row in rows(solution) {
        writer.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("UTF-8 input")
}

/// Text columns left-aligned, numbers right-aligned.
pub fn solution_table(solution: &Solution) -> String {
    let body = rows(solution);
    let mut widths: Vec<usize> = SOLUTION_HEADER.iter().map(|h| h.len()).collect();
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| if i < 3 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        format!("{}\n", parts.join("  ").trim_end())
    };
    let mut out = line(SOLUTION_HEADER.to_vec());
    let rule: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    out.push_str(&"-".repeat(rule));
    out.push('\n');
    let last = body.len() - 1;
    for (i, row) in body.iter().enumerate() {
        if i == last {
            out.push_str(&"-".repeat(rule));
            out.push('\n');
        }
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}
