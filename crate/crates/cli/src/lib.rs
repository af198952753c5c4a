// Copyright 2026 The qres Authors
// SPDX-License-Identifier: Apache-2.0

//! The `qres` command line.
//!
//! Exit codes: 0 on success, 1 for model, validation or I/O errors, 2 for
//! usage errors. Data goes to standard output unless `-o` names a file;
//! diagnostics and progress go to standard error.

pub mod grid;
pub mod report;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use qres_core::{
    brute_force_triple, build_extensive_form, load_instance_file, sweep_reservation, sweep_reservation_waiting,
    validate, Instance, Model, Seconds, Severity, Solution, TripleKey,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "QRES_THREADS";

/// Random reservation vectors checked against the optimum by `--oracle`.
const ORACLE_SPOT_CHECKS: usize = 32;

#[derive(Debug, Parser)]
#[command(name = "qres", version, about = "Two-stage qubit reservation planning")]
struct Cli {
    /// More log output on standard error (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Instance JSON file.
    instance: PathBuf,

    /// Write the result here instead of standard output.
    #[arg(short, long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check an instance and print its diagnostics.
    Validate {
        /// Instance JSON file.
        instance: PathBuf,
    },
    /// Compute optimal reservations and their expected cost.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Re-check every triple by brute force, plus random spot checks.
        #[arg(long)]
        oracle: bool,
        /// Seed for the random spot checks done by --oracle.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Aligned table instead of CSV.
        #[arg(long)]
        human: bool,
    },
    /// Expected cost for each uniform reservation level.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Reservation levels as lo:hi[:step], inclusive. Default: 0 to the
        /// smallest machine capacity.
        #[arg(long, value_name = "LO:HI[:STEP]")]
        grid: Option<String>,
    },
    /// Expected total over reservation levels and arranged waiting times.
    Surface {
        #[command(flatten)]
        common: Common,
        /// Reservation levels as lo:hi[:step], inclusive. Default: 0 to the
        /// smallest machine capacity.
        #[arg(long, value_name = "LO:HI[:STEP]")]
        grid: Option<String>,
        /// Arranged waiting times in seconds as lo:hi[:step], inclusive. The
        /// step defaults to the smallest gap in the instance's wait sets.
        /// Default: every waiting time in the instance.
        #[arg(long, value_name = "LO:HI[:STEP]")]
        waits: Option<String>,
    },
    /// Write the deterministic-equivalent MILP in CPLEX LP format.
    ExportLp {
        #[command(flatten)]
        common: Common,
    },
    /// Expected cost of a given reservation vector.
    Eval {
        #[command(flatten)]
        common: Common,
        /// CSV with columns circuit_id,provider_id,machine_id,reserved.
        #[arg(long, value_name = "CSV")]
        reservations: PathBuf,
        /// Aligned table instead of CSV.
        #[arg(long)]
        human: bool,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Model(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Model(_) | CliError::Io { .. } => 1,
        }
    }
}

fn model_err(e: impl std::fmt::Display) -> CliError {
    CliError::Model(e.to_string())
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                2
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    init_logging(cli.verbose);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let outcome = thread_pool().and_then(|pool| pool.install(|| dispatch(cli.command, &mut out, &mut err)));
    let _ = stdout.write_all(&out).and_then(|()| stdout.flush());
    let _ = stderr.write_all(&err);
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    // a second initialization in the same process is harmless
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let n: usize = value
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(model_err)
}

fn load(path: &Path) -> Result<Instance, CliError> {
    let inst = load_instance_file(path).map_err(model_err)?;
    info!("loaded {} with {} triples", path.display(), inst.triples().len());
    Ok(inst)
}

fn build_model(inst: &Instance) -> Result<Model, CliError> {
    Model::new(inst).map_err(model_err)
}

/// Writes to `path` through a temporary file and rename, or to `stdout`.
fn emit(output: Option<&Path>, bytes: &[u8], stdout: &mut dyn Write) -> Result<(), CliError> {
    match output {
        None => stdout.write_all(bytes).map_err(io_err("cannot write standard output")),
        Some(path) => {
            let context = format!("cannot write `{}`", path.display());
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(context.clone()))?;
            tmp.write_all(bytes).map_err(io_err(context.clone()))?;
            tmp.persist(path).map_err(|e| CliError::Io {
                context,
                source: e.error,
            })?;
            Ok(())
        }
    }
}

fn dispatch(command: Command, stdout: &mut Vec<u8>, stderr: &mut Vec<u8>) -> Result<i32, CliError> {
    match command {
        Command::Validate { instance } => {
            let inst = load(&instance)?;
            let diags = validate(&inst);
            let mut text = String::new();
            for d in &diags {
                text.push_str(&format!("{d}\n"));
            }
            let errors = diags.iter().filter(|d| d.severity == Severity::Error).count();
            let warnings = diags.len() - errors;
            text.push_str(&format!(
                "{} triple(s), {errors} error(s), {warnings} warning(s)\n",
                inst.triples().len()
            ));
            stdout
                .write_all(text.as_bytes())
                .map_err(io_err("cannot write standard output"))?;
            Ok(if errors > 0 { 1 } else { 0 })
        }
        Command::Solve {
            common,
            oracle,
            seed,
            human,
        } => {
            let inst = load(&common.instance)?;
            let model = build_model(&inst)?;
            let solution = model.solve();
            if oracle {
                verify(&model, &solution, seed)?;
                writeln!(
                    stderr,
                    "oracle: {} triple(s) and {ORACLE_SPOT_CHECKS} random vectors agree",
                    model.triples().len()
                )
                .map_err(io_err("cannot write standard error"))?;
            }
            let text = render_solution(&solution, human);
            emit(common.output.as_deref(), text.as_bytes(), stdout)?;
            Ok(0)
        }
        Command::Sweep { common, grid } => {
            let inst = load(&common.instance)?;
            let grid = reservation_grid(&inst, grid.as_deref())?;
            let curve = sweep_reservation(&inst, &grid).map_err(model_err)?;
            emit(
                common.output.as_deref(),
                qres_core::sweep::curve_csv(&curve).as_bytes(),
                stdout,
            )?;
            Ok(0)
        }
        Command::Surface { common, grid, waits } => {
            let inst = load(&common.instance)?;
            let grid = reservation_grid(&inst, grid.as_deref())?;
            let waits = wait_grid(&inst, waits.as_deref())?;
            let surface = sweep_reservation_waiting(&inst, &grid, &waits).map_err(model_err)?;
            emit(
                common.output.as_deref(),
                qres_core::sweep::surface_csv(&surface).as_bytes(),
                stdout,
            )?;
            Ok(0)
        }
        Command::ExportLp { common } => {
            let inst = load(&common.instance)?;
            let form = build_extensive_form(&inst).map_err(|e| match e {
                qres_core::FormError::InvalidInstance => {
                    let diags: Vec<String> = validate(&inst)
                        .into_iter()
                        .filter(|d| d.severity == Severity::Error)
                        .map(|d| d.to_string())
                        .collect();
                    CliError::Model(format!("instance is invalid:\n  {}", diags.join("\n  ")))
                }
                other => model_err(other),
            })?;
            match common.output.as_deref() {
                Some(path) => {
                    qres_core::write_lp_file(&form, path)
                        .map_err(io_err(format!("cannot write `{}`", path.display())))?;
                }
                None => {
                    qres_core::export_lp(&form, stdout).map_err(io_err("cannot write standard output"))?;
                }
            }
            info!("{} variables, {} rows", form.variables.len(), form.constraints.len());
            Ok(0)
        }
        Command::Eval {
            common,
            reservations,
            human,
        } => {
            let inst = load(&common.instance)?;
            let model = build_model(&inst)?;
            let levels = read_reservations(&reservations)?;
            let solution = model.expected_cost(&levels).map_err(model_err)?;
            let text = render_solution(&solution, human);
            emit(common.output.as_deref(), text.as_bytes(), stdout)?;
            Ok(0)
        }
    }
}

fn render_solution(solution: &Solution, human: bool) -> String {
    if human {
        report::solution_table(solution)
    } else {
        report::solution_csv(solution)
    }
}

fn reservation_grid(inst: &Instance, spec: Option<&str>) -> Result<Vec<u32>, CliError> {
    match spec {
        Some(s) => grid::parse_int_grid(s).map_err(CliError::Usage),
        None => {
            let cap = build_model(inst)?
                .min_capacity()
                .ok_or_else(|| CliError::Model("instance has no triples".into()))?;
            Ok((0..=cap).collect())
        }
    }
}

/// Every waiting time in the instance, deduplicated and sorted.
fn instance_waits(inst: &Instance) -> Vec<Seconds> {
    let mut all: Vec<Seconds> = inst.wait_sets.values().flatten().copied().collect();
    all.sort();
    all.dedup();
    all
}

fn smallest_gap(inst: &Instance) -> Option<Seconds> {
    inst.wait_sets
        .values()
        .flat_map(|set| set.windows(2).map(|w| w[1] - w[0]))
        .filter(|gap| gap.micros() > 0)
        .min()
}

fn wait_grid(inst: &Instance, spec: Option<&str>) -> Result<Vec<Seconds>, CliError> {
    match spec {
        Some(s) => grid::parse_time_grid(s, smallest_gap(inst)).map_err(CliError::Usage),
        None => Ok(instance_waits(inst)),
    }
}

fn read_reservations(path: &Path) -> Result<BTreeMap<TripleKey, u32>, CliError> {
    let context = format!("cannot read `{}`", path.display());
    let file = std::fs::File::open(path).map_err(io_err(context))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers().map_err(model_err)?.clone();
    let expected = ["circuit_id", "provider_id", "machine_id", "reserved"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(CliError::Model(format!(
            "{}: header must be `{}`",
            path.display(),
            expected.join(",")
        )));
    }
    let mut out = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| CliError::Model(format!("{}:{line}: {e}", path.display())))?;
        let reserved: u32 = row[3].parse().map_err(|_| {
            CliError::Model(format!(
                "{}:{line}: `{}` is not a reservation level",
                path.display(),
                &row[3]
            ))
        })?;
        let key = TripleKey::new(&row[0], &row[1], &row[2]);
        if out.insert(key.clone(), reserved).is_some() {
            return Err(CliError::Model(format!(
                "{}:{line}: duplicate row for {key}",
                path.display()
            )));
        }
    }
    Ok(out)
}

/// Brute-force scan on every triple, then random reservation vectors that
/// must never beat the optimum.
fn verify(model: &Model, solution: &Solution, seed: u64) -> Result<(), CliError> {
    for t in model.triples() {
        let (x, cost) = brute_force_triple(
            &t.rates,
            t.space.demand_marginal(),
            t.space.wait_marginal(),
            t.exec_time,
            t.capacity,
        )
        .map_err(model_err)?;
        let ours = solution.reservations[&t.key];
        if x != ours || cost != solution.per_triple[&t.key].total {
            return Err(CliError::Model(format!(
                "oracle disagrees on {}: brute force picks {x} at {}, solver picks {ours} at {}",
                t.key,
                cost.to_fixed6(),
                solution.per_triple[&t.key].total.to_fixed6()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..ORACLE_SPOT_CHECKS {
        let levels: BTreeMap<TripleKey, u32> = model
            .triples()
            .iter()
            .map(|t| (t.key.clone(), rng.gen_range(0..=t.capacity)))
            .collect();
        let other = model.expected_cost(&levels).map_err(model_err)?;
        if other.expected_total < solution.expected_total {
            return Err(CliError::Model(format!(
                "oracle found a cheaper vector: {} < {}",
                other.expected_total.to_fixed6(),
                solution.expected_total.to_fixed6()
            )));
        }
    }
    Ok(())
}
