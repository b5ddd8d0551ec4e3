//! Strong-scaling benchmark harness.
//!
//! Each gradient subcommand sweeps a list of virtual-QPU counts, evaluates
//! one parameter update `--reps` times per point, and appends one CSV row per
//! evaluation. Only the pool execution span is timed. Plotting is left to
//! external tools reading the CSV.

use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use qpuvirt::algorithms::{
    ddcl_execution_count, ddcl_gradient, ddcl_parameter_count, load_distribution, mcvqe_counts,
    mcvqe_gradient, DdclSpec, GradientReport, McvqeAnsatzSpec,
};
use qpuvirt::observables::{aiem_hamiltonian, AiemCoefficients};
use qpuvirt::{ExecutionMode, VqpuPoolConfig};

/// Environment variable naming the directory for CSV output when `--out` is
/// not given.
pub const OUT_DIR_ENV: &str = "QPUVIRT_OUT_DIR";

pub const CSV_HEADER: &str =
    "algorithm,n_qubits,n_layers,n_vqpus,n_circuits,wall_time_s,repetition,seed";

#[derive(Debug, Parser)]
#[command(
    name = "qpuvirt-bench",
    version,
    about = "Virtual-QPU strong-scaling benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// MC-VQE energy gradient over the exciton-model Hamiltonian.
    McvqeGrad(McvqeArgs),
    /// DDCL Jensen–Shannon loss gradient.
    DdclGrad(DdclArgs),
    /// Recompute the workload size tables from closed forms.
    VerifyCounts,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub qubits: usize,
    /// Virtual-QPU counts to sweep, comma separated.
    #[arg(long = "n-virtual-qpus", value_delimiter = ',', default_value = "1")]
    pub n_virtual_qpus: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    /// CSV destination; defaults to `$QPUVIRT_OUT_DIR/<algorithm>.csv`, else stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the last evaluation's result buffer here.
    #[arg(long = "dump-buffer")]
    pub dump_buffer: Option<PathBuf>,
    #[arg(long, default_value_t = qpuvirt::accelerator::DEFAULT_SHOTS)]
    pub shots: u64,
    /// Print the gradient of the last evaluation, one component per line.
    #[arg(long = "print-gradient")]
    pub print_gradient: bool,
}

#[derive(Debug, Clone, Args)]
pub struct McvqeArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    #[arg(long, default_value = "expectation")]
    pub mode: ExecutionMode,
    /// AIEM coefficient file; random coefficients from `--seed` otherwise.
    #[arg(long)]
    pub coefficients: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DdclArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    #[arg(long, default_value_t = 10)]
    pub layers: usize,
    #[arg(long, default_value = "counts")]
    pub mode: ExecutionMode,
    /// Target distribution file; random target from `--seed` otherwise.
    #[arg(long)]
    pub target: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub algorithm: &'static str,
    pub n_qubits: usize,
    pub n_layers: usize,
    pub n_vqpus: usize,
    pub n_circuits: usize,
    pub wall_time_s: f64,
    pub repetition: usize,
    pub seed: u64,
}

/// Mean and sample standard deviation of the wall times at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub n_vqpus: usize,
    pub mean_s: f64,
    pub std_s: f64,
}

pub fn summarize(records: &[BenchRecord]) -> Vec<SweepPoint> {
    let mut vqpus: Vec<usize> = records.iter().map(|r| r.n_vqpus).collect();
    vqpus.dedup();
    vqpus
        .into_iter()
        .map(|v| {
            let times: Vec<f64> = records
                .iter()
                .filter(|r| r.n_vqpus == v)
                .map(|r| r.wall_time_s)
                .collect();
            let n = times.len() as f64;
            let mean = times.iter().sum::<f64>() / n;
            let var = if times.len() > 1 {
                times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            SweepPoint {
                n_vqpus: v,
                mean_s: mean,
                std_s: var.sqrt(),
            }
        })
        .collect()
}

/// Output of one sweep.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub records: Vec<BenchRecord>,
    pub last: GradientReport,
}

fn check_sweep(args: &SweepArgs) -> Result<()> {
    if args.n_virtual_qpus.is_empty() || args.n_virtual_qpus.contains(&0) {
        bail!("--n-virtual-qpus needs positive counts");
    }
    if args.reps == 0 {
        bail!("--reps must be at least 1");
    }
    if args.shots == 0 {
        bail!("--shots must be at least 1");
    }
    Ok(())
}

fn sweep(
    algorithm: &'static str,
    args: &SweepArgs,
    n_layers: usize,
    expected_circuits: usize,
    mode: ExecutionMode,
    mut evaluate: impl FnMut(&VqpuPoolConfig) -> Result<GradientReport>,
) -> Result<SweepOutcome> {
    let mut records = Vec::new();
    let mut last = None;
    for &v in &args.n_virtual_qpus {
        let config = VqpuPoolConfig {
            n_virtual_qpus: v,
            base_seed: args.seed,
            mode,
            shots: args.shots,
        };
        for repetition in 0..args.reps {
            let report = evaluate(&config)?;
            if report.n_circuit_executions != expected_circuits {
                bail!(
                    "{algorithm}: executed {} circuits, closed form gives {expected_circuits}",
                    report.n_circuit_executions
                );
            }
            records.push(BenchRecord {
                algorithm,
                n_qubits: args.qubits,
                n_layers,
                n_vqpus: v,
                n_circuits: report.n_circuit_executions,
                wall_time_s: report.wall_time.as_secs_f64().max(f64::MIN_POSITIVE),
                repetition,
                seed: args.seed,
            });
            last = Some(report);
        }
    }
    Ok(SweepOutcome {
        records,
        last: last.expect("at least one evaluation"),
    })
}

pub fn run_mcvqe(args: &McvqeArgs) -> Result<SweepOutcome> {
    let sweep_args = &args.sweep;
    check_sweep(sweep_args)?;
    let n = sweep_args.qubits;
    if n < 2 {
        bail!("--qubits must be at least 2 for MC-VQE, got {n}");
    }
    let coeffs = match &args.coefficients {
        Some(path) => AiemCoefficients::from_file(path, n)
            .with_context(|| format!("reading {}", path.display()))?,
        None => AiemCoefficients::random(n, sweep_args.seed),
    };
    let hamiltonian = aiem_hamiltonian(n, &coeffs)?;
    let spec = McvqeAnsatzSpec::random(n, sweep_args.seed.wrapping_add(1))?;
    let expected = mcvqe_counts(n).n_executions;
    sweep("mcvqe", sweep_args, 0, expected, args.mode, |config| {
        Ok(mcvqe_gradient(&hamiltonian, &spec, config)?)
    })
}

pub fn run_ddcl(args: &DdclArgs) -> Result<SweepOutcome> {
    let sweep_args = &args.sweep;
    check_sweep(sweep_args)?;
    let n = sweep_args.qubits;
    if n == 0 || !n.is_multiple_of(2) {
        bail!("--qubits must be even for DDCL (Bell-pair initialization), got {n}");
    }
    let mut spec = DdclSpec::random(n, args.layers, sweep_args.shots, sweep_args.seed)?;
    if let Some(path) = &args.target {
        let target =
            load_distribution(path).with_context(|| format!("reading {}", path.display()))?;
        spec = DdclSpec::new(n, args.layers, spec.theta, target, sweep_args.shots)?;
    }
    let expected = ddcl_execution_count(n, args.layers);
    sweep(
        "ddcl",
        sweep_args,
        args.layers,
        expected,
        args.mode,
        |config| Ok(ddcl_gradient(&spec, config)?),
    )
}

/// Appends `records` as CSV, writing the header only to an empty file.
pub fn append_csv(path: &Path, records: &[BenchRecord]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let fresh = file.metadata()?.len() == 0;
    write_csv(file, records, fresh)
}

pub fn write_csv(out: impl Write, records: &[BenchRecord], header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(header)
        .from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_destination(algorithm: &str, explicit: &Option<PathBuf>) -> Option<PathBuf> {
    explicit.clone().or_else(|| {
        std::env::var_os(OUT_DIR_ENV).map(|dir| PathBuf::from(dir).join(format!("{algorithm}.csv")))
    })
}

/// Writes CSV, summary, optional buffer dump and optional gradient.
pub fn report(algorithm: &str, sweep_args: &SweepArgs, outcome: &SweepOutcome) -> Result<()> {
    let stdout = io::stdout();
    let mut stdout = stdout.lock();
    let dest = csv_destination(algorithm, &sweep_args.out);
    match &dest {
        Some(path) => append_csv(path, &outcome.records)?,
        None => write_csv(&mut stdout, &outcome.records, true)?,
    }
    let mut summary: Box<dyn Write> = if dest.is_some() {
        Box::new(io::stdout())
    } else {
        Box::new(io::stderr())
    };
    let base = summarize(&outcome.records).first().map(|p| p.mean_s);
    for p in summarize(&outcome.records) {
        let speedup = base.map_or(1.0, |b| b / p.mean_s);
        writeln!(
            summary,
            "# {algorithm} n_qubits={} n_vqpus={} mean={:.6}s std={:.6}s speedup={speedup:.2}",
            sweep_args.qubits, p.n_vqpus, p.mean_s, p.std_s
        )?;
    }
    if let Some(path) = &sweep_args.dump_buffer {
        std::fs::write(path, outcome.last.buffer.serialize())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if sweep_args.print_gradient {
        for g in &outcome.last.gradient {
            writeln!(summary, "{g:.16e}")?;
        }
    }
    Ok(())
}

/// One reference table row and its closed-form recomputation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableRow {
    pub table: u8,
    pub n_qubits: usize,
    pub expected: [usize; 3],
    pub computed: [usize; 3],
}

impl TableRow {
    pub fn matches(&self) -> bool {
        self.expected == self.computed
    }
}

/// MC-VQE rows: (N_q, N_H, N_θ, executions).
pub const MCVQE_TABLE: [(usize, usize, usize, usize); 4] = [
    (16, 92, 76, 13984),
    (18, 104, 86, 17888),
    (20, 116, 96, 22272),
    (22, 128, 106, 27136),
];

/// DDCL rows at 10 layers: (N_q, N_θ, executions).
pub const DDCL_TABLE: [(usize, usize, usize); 4] = [
    (20, 1200, 2400),
    (22, 1320, 2640),
    (24, 1440, 2880),
    (26, 1560, 3120),
];

pub const DDCL_TABLE_LAYERS: usize = 10;

pub fn table_rows() -> Vec<TableRow> {
    let mut rows = Vec::with_capacity(8);
    for (n, h, p, e) in MCVQE_TABLE {
        let c = mcvqe_counts(n);
        rows.push(TableRow {
            table: 1,
            n_qubits: n,
            expected: [h, p, e],
            computed: [c.n_terms, c.n_params, c.n_executions],
        });
    }
    for (n, p, e) in DDCL_TABLE {
        rows.push(TableRow {
            table: 2,
            n_qubits: n,
            expected: [0, p, e],
            computed: [
                0,
                ddcl_parameter_count(n, DDCL_TABLE_LAYERS),
                ddcl_execution_count(n, DDCL_TABLE_LAYERS),
            ],
        });
    }
    rows
}

/// Prints every table row next to its recomputation; `true` when all match.
pub fn verify_counts(out: &mut impl Write) -> io::Result<bool> {
    let rows = table_rows();
    writeln!(
        out,
        "MC-VQE        n   N_H  N_theta  executions   (expected)"
    )?;
    for r in rows.iter().filter(|r| r.table == 1) {
        let [h, p, e] = r.computed;
        let [ph, pp, pe] = r.expected;
        writeln!(
            out,
            "{:<12} {:>2} {h:>5} {p:>8} {e:>11}   ({ph}, {pp}, {pe})",
            if r.matches() { "ok" } else { "MISMATCH" },
            r.n_qubits
        )?;
    }
    writeln!(
        out,
        "DDCL (L={DDCL_TABLE_LAYERS})   n  N_theta  executions   (expected)"
    )?;
    for r in rows.iter().filter(|r| r.table == 2) {
        let [_, p, e] = r.computed;
        let [_, pp, pe] = r.expected;
        writeln!(
            out,
            "{:<12} {:>2} {p:>8} {e:>11}   ({pp}, {pe})",
            if r.matches() { "ok" } else { "MISMATCH" },
            r.n_qubits
        )?;
    }
    Ok(rows.iter().all(TableRow::matches))
}
