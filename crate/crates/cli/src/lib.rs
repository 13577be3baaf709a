//! Command-line driver: runs experiments, writes CSV series and a manifest
//! per command.

pub mod experiment;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use lbe_core::bench::{compare, time_task, BenchError, TimingStats};
use lbe_core::lbe::{
    lbe_growth_rate, lbe_multi, relative_precision, reliability_horizon_multi, verify_theorem, HorizonReport,
    LbeError, LbeSeries, PrecisionSeries,
};
use lbe_core::simulator::{reference_orbit, simulate, PseudoOrbit, SimError};

use experiment::{load_experiment, Experiment, Overrides};
use output::{
    fmt_f64, lbe_csv, orbit_csv, sha256_hex, HorizonSummary, Manifest, OutputDir, PairVerification, PlanSnapshot,
    SpecSnapshot, TimingSummary, VerifySummary,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Spec(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Spec(_) | CliError::Usage(_) => 2,
            CliError::Runtime(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<LbeError> for CliError {
    fn from(e: LbeError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::TooFewReps(_) | BenchError::TooFewStats(_) => CliError::Usage(e.to_string()),
            BenchError::TaskFailed { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lbe", version, about = "Lower bound error analysis of polynomial NARMAX simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate every plan and write one orbit CSV per plan.
    Simulate(Common),
    /// Simulate and write the lower bound error series.
    Lbe(Common),
    /// Simulate and report the reliability horizon.
    Horizon(Common),
    /// Check the lower bound against a high-precision reference orbit.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Iterations to check; defaults to the spec's `verify_window`, then `iters`.
        #[arg(long)]
        window: Option<usize>,
    },
    /// Time the full simulate + LBE pipeline of one or more experiments.
    Bench {
        /// Experiment file; repeat to compare several.
        #[arg(long = "spec", required = true)]
        specs: Vec<PathBuf>,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(2..))]
        reps: u64,
        /// Time every repetition, including the first.
        #[arg(long)]
        no_warmup: bool,
        #[command(flatten)]
        opts: RunOptions,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long = "spec")]
    pub spec: PathBuf,
    #[command(flatten)]
    pub opts: RunOptions,
}

#[derive(Debug, Clone, Args)]
pub struct RunOptions {
    /// Stop threshold for the relative precision [default: 0.001]
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Reference precision in bits [default: 256]
    #[arg(long = "ref-bits")]
    pub ref_bits: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunOptions {
    fn overrides(&self) -> Overrides {
        Overrides {
            iters: self.iters,
            epsilon: self.epsilon,
            ref_bits: self.ref_bits,
            out: self.out.clone(),
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(c) => cmd_simulate(&load(&c)?),
        Command::Lbe(c) => cmd_lbe(&load(&c)?, "lbe"),
        Command::Horizon(c) => cmd_lbe(&load(&c)?, "horizon"),
        Command::Verify { common, window } => cmd_verify(&load(&common)?, window),
        Command::Bench {
            specs,
            reps,
            no_warmup,
            opts,
        } => {
            let overrides = opts.overrides();
            let exps = specs
                .iter()
                .map(|p| load_experiment(p, &overrides))
                .collect::<Result<Vec<_>, _>>()?;
            cmd_bench(&exps, reps as usize, !no_warmup, opts.out.clone())
        }
    }
}

fn load(c: &Common) -> Result<Experiment, CliError> {
    load_experiment(&c.spec, &c.opts.overrides())
}

pub fn snapshot(exp: &Experiment) -> SpecSnapshot {
    let model_text = std::fs::read(&exp.model_path).unwrap_or_default();
    SpecSnapshot {
        name: exp.name.clone(),
        path: exp.path.display().to_string(),
        text: exp.text.clone(),
        sha256: sha256_hex(exp.text.as_bytes()),
        model_path: exp.model_path.display().to_string(),
        model_sha256: sha256_hex(&model_text),
        iterations: exp.iterations,
        epsilon: exp.epsilon,
        ref_bits: exp.ref_bits,
        seed: exp.init.y_seed.clone(),
        input: exp.init.u_signal.to_string(),
        plans: exp
            .plans
            .iter()
            .map(|p| PlanSnapshot {
                id: p.id().to_string(),
                order: p.term_order().iter().map(|t| t + 1).collect(),
                trees: p.trees().iter().map(|t| t.to_string()).collect(),
            })
            .collect(),
    }
}

/// Simulates every plan. With `parallel`, plans run on scoped threads; the
/// results do not depend on it.
pub fn simulate_all(exp: &Experiment, iterations: usize, parallel: bool) -> Vec<Result<PseudoOrbit, SimError>> {
    let one = |plan| simulate(&exp.model, plan, &exp.init, iterations);
    if parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = exp.plans.iter().map(|p| s.spawn(move || one(p))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("simulation thread panicked"))
                .collect()
        })
    } else {
        exp.plans.iter().map(one).collect()
    }
}

/// Writes an orbit CSV for every run, partial ones included, and fails on
/// the first failed run.
fn write_orbits(
    dir: &mut OutputDir,
    exp: &Experiment,
    runs: Vec<Result<PseudoOrbit, SimError>>,
) -> Result<Vec<PseudoOrbit>, CliError> {
    let mut orbits = Vec::new();
    let mut failure = None;
    for (plan, run) in exp.plans.iter().zip(runs) {
        let orbit = match run {
            Ok(o) => o,
            Err(SimError::NonFinite { index, partial }) => {
                failure.get_or_insert(format!(
                    "plan `{}`: non-finite value at orbit index {index}; partial orbit written",
                    plan.id()
                ));
                *partial
            }
            Err(e) => return Err(e.into()),
        };
        dir.write(&format!("orbit_{}.csv", plan.id()), &orbit_csv(&orbit))?;
        orbits.push(orbit);
    }
    match failure {
        Some(msg) => Err(CliError::Runtime(msg)),
        None => Ok(orbits),
    }
}

pub fn cmd_simulate(exp: &Experiment) -> Result<(), CliError> {
    let mut dir = OutputDir::create(&exp.out)?;
    let runs = simulate_all(exp, exp.iterations, true);
    let result = write_orbits(&mut dir, exp, runs);
    Manifest::new("simulate", vec![snapshot(exp)], &dir).write(&dir.dir)?;
    let orbits = result?;
    for o in &orbits {
        println!("{}: plan {} -> {} values", exp.name, o.plan_id, o.len());
    }
    Ok(())
}

/// LBE, pairwise relative precision, horizon and growth rate of a set of
/// orbits.
pub struct Analysis {
    pub lbe: LbeSeries,
    pub pairs: Vec<PrecisionSeries>,
    pub horizon: HorizonReport,
    pub growth_rate: Option<f64>,
}

pub fn analyse(orbits: &[PseudoOrbit], epsilon: f64) -> Result<Analysis, LbeError> {
    let lbe = lbe_multi(orbits)?;
    let mut pairs = Vec::new();
    for i in 0..orbits.len() {
        for j in i + 1..orbits.len() {
            pairs.push(relative_precision(&orbits[i], &orbits[j])?);
        }
    }
    let horizon = reliability_horizon_multi(orbits, epsilon)?;
    let end = horizon.horizon_n.unwrap_or(lbe.len());
    let growth_rate = match lbe_growth_rate(&lbe, 0..end) {
        Ok(r) => Some(r),
        Err(LbeError::InsufficientData(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(Analysis {
        lbe,
        pairs,
        horizon,
        growth_rate,
    })
}

pub fn cmd_lbe(exp: &Experiment, command: &str) -> Result<(), CliError> {
    let mut dir = OutputDir::create(&exp.out)?;
    let runs = simulate_all(exp, exp.iterations, true);
    let orbits = match write_orbits(&mut dir, exp, runs) {
        Ok(o) => o,
        Err(e) => {
            Manifest::new(command, vec![snapshot(exp)], &dir).write(&dir.dir)?;
            return Err(e);
        }
    };
    let analysis = analyse(&orbits, exp.epsilon)?;
    dir.write("lbe.csv", &lbe_csv(&analysis.lbe, &analysis.pairs))?;
    let line = format!(
        "{}: {} triggered_by={:?}",
        exp.name, analysis.horizon, analysis.horizon.triggered_by
    );
    let rate = match analysis.growth_rate {
        Some(r) => format!("{r:.6}"),
        None => "n/a".into(),
    };
    println!("{line}");
    println!("{}: lbe growth rate {rate} bits/iteration before the horizon", exp.name);
    let mut manifest = Manifest::new(command, vec![snapshot(exp)], &dir);
    manifest.horizon = Some(HorizonSummary {
        report: analysis.horizon,
        line,
        growth_rate_bits_per_iter: analysis.growth_rate,
    });
    manifest.write(&dir.dir)?;
    Ok(())
}

pub fn cmd_verify(exp: &Experiment, window: Option<usize>) -> Result<(), CliError> {
    let iterations = window.or(exp.verify_window).unwrap_or(exp.iterations);
    if iterations == 0 {
        return Err(CliError::Usage("verify window must be at least 1".into()));
    }
    let mut dir = OutputDir::create(&exp.out)?;
    let reference = reference_orbit(&exp.model, &exp.init, iterations, exp.ref_bits)?;
    let orbits = simulate_all(exp, iterations, true)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let entries = exp.model.n_y() + iterations;
    if reference.trusted_len < entries {
        return Err(CliError::Runtime(format!(
            "verify window of {iterations} iterations ({entries} orbit values) exceeds the reference trust \
             window: {}-bit reference is trusted for {} values; raise --ref-bits or shorten --window",
            exp.ref_bits, reference.trusted_len
        )));
    }
    let mut pairs = Vec::new();
    let mut margins = vec![f64::INFINITY; entries];
    for i in 0..orbits.len() {
        for j in i + 1..orbits.len() {
            let report = verify_theorem(&reference, &orbits[i], &orbits[j], entries)?;
            for (m, r) in margins.iter_mut().zip(&report.margins) {
                *m = m.min(*r);
            }
            pairs.push(PairVerification {
                a: orbits[i].plan_id.clone(),
                b: orbits[j].plan_id.clone(),
                violations: report.violations,
                min_margin: report.min_margin(),
            });
        }
    }
    let mut csv = String::from("n,reference,min_margin\n");
    for (n, m) in margins.iter().enumerate() {
        csv.push_str(&format!("{n},{},{}\n", fmt_f64(reference.orbit.values[n]), fmt_f64(*m)));
    }
    dir.write("verify.csv", &csv)?;
    let violations: usize = pairs.iter().map(|p| p.violations).sum();
    for p in &pairs {
        println!(
            "{}: {} vs {} over {iterations} iterations: {} violations, min margin {:e}",
            exp.name, p.a, p.b, p.violations, p.min_margin
        );
    }
    let mut manifest = Manifest::new("verify", vec![snapshot(exp)], &dir);
    manifest.verification = Some(VerifySummary {
        window: iterations,
        trusted_len: reference.trusted_len,
        pairs,
    });
    manifest.write(&dir.dir)?;
    if violations > 0 {
        return Err(CliError::Runtime(format!("{violations} violations of the lower bound")));
    }
    Ok(())
}

/// One timed repetition: simulate every plan serially, then the LBE
/// analysis.
pub fn pipeline(exp: &Experiment) -> Result<Analysis, CliError> {
    let orbits = simulate_all(exp, exp.iterations, false)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(analyse(&orbits, exp.epsilon)?)
}

pub fn cmd_bench(exps: &[Experiment], reps: usize, warmup: bool, out: Option<PathBuf>) -> Result<(), CliError> {
    let out = out.unwrap_or_else(|| exps[0].out.clone());
    let mut dir = OutputDir::create(&out)?;
    let mut stats: Vec<TimingStats> = Vec::new();
    for exp in exps {
        let mut id = exp.name.clone();
        let mut k = 2;
        while stats.iter().any(|s| s.task_id == id) {
            id = format!("{}#{k}", exp.name);
            k += 1;
        }
        stats.push(time_task(&id, reps, warmup, || pipeline(exp).map(|_| ()))?);
    }

    let mut runs = String::from("task,rep,seconds\n");
    let mut summary = String::from("task,reps,mean_s,std_s\n");
    for s in &stats {
        for (rep, t) in s.samples.iter().enumerate() {
            runs.push_str(&format!("{},{},{}\n", s.task_id, rep + 1, fmt_f64(*t)));
        }
        summary.push_str(&format!(
            "{},{},{},{}\n",
            s.task_id,
            s.repetitions,
            fmt_f64(s.mean_s),
            fmt_f64(s.std_s)
        ));
        println!(
            "{}: {} reps, {:.6} s +/- {:.6} s",
            s.task_id, s.repetitions, s.mean_s, s.std_s
        );
    }
    dir.write("bench_runs.csv", &runs)?;
    dir.write("bench_summary.csv", &summary)?;
    if stats.len() >= 2 {
        let ranking = compare(&stats)?;
        let mut table = String::from("task,mean_s,std_s,ratio,ratio_min,ratio_max\n");
        for r in &ranking.rows {
            table.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.task_id,
                fmt_f64(r.mean_s),
                fmt_f64(r.std_s),
                fmt_f64(r.ratio),
                fmt_f64(r.ratio_min),
                fmt_f64(r.ratio_max)
            ));
            println!("{}: {:.3}x [{:.3}, {:.3}]", r.task_id, r.ratio, r.ratio_min, r.ratio_max);
        }
        dir.write("bench_compare.csv", &table)?;
    }
    let mut manifest = Manifest::new("bench", exps.iter().map(snapshot).collect(), &dir);
    manifest.timing = Some(
        stats
            .iter()
            .map(|s| TimingSummary {
                task: s.task_id.clone(),
                reps: s.repetitions,
                mean_s: s.mean_s,
                std_s: s.std_s,
            })
            .collect(),
    );
    manifest.warmup = Some(warmup);
    manifest.write(&dir.dir)?;
    Ok(())
}
