use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use celldiv::analysis::identities::verify_identities;
use celldiv::analysis::{consistency_test, rate_estimate, ConsistencyConfig, Verdict};
use celldiv::engine::dump::{write_dump, DumpError, DumpHeader};
use celldiv::engine::{guard_rules, Process};

mod config;
mod svg;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("dump: {0}")]
    Dump(#[from] DumpError),
    #[error(transparent)]
    Core(#[from] celldiv::Error),
}

fn core<T, E: Into<celldiv::Error>>(r: Result<T, E>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Core(e.into()))
}

#[derive(Parser)]
#[command(name = "celldiv", version, about = "Cell-division tessellations and spatial-consistency experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Grow one tessellation; writes dump.txt and plot.svg.
    Simulate(Common),
    /// Run the spatial-consistency test; writes report.json and report.txt.
    Consistency(Common),
    /// Check the analytic identities; writes verify.json.
    Verify(Common),
    /// Estimate the small-time hitting rate of a probe; writes rate.json.
    Rate(Common),
}

fn prepare(c: &Common) -> Result<(config::ExperimentConfig, u64), CliError> {
    let cfg = config::load(&c.config)?;
    if let Some(n) = c.threads {
        if n == 0 {
            return Err(CliError::Config("--threads: must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    fs::create_dir_all(&c.out)?;
    let seed = c.seed.unwrap_or(cfg.seed);
    Ok((cfg, seed))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn simulate(c: &Common) -> Result<ExitCode, CliError> {
    let (cfg, seed) = prepare(c)?;
    let rules = cfg.build_rules()?;
    let (w, time) = cfg.simulate()?;
    core(guard_rules(&rules, &w, seed))?;
    let mut p = core(Process::new(w.clone(), rules, seed))?;
    core(p.advance(time))?;
    let header = DumpHeader::new(seed, time, &w, cfg.rules_record());
    let dump = c.out.join("dump.txt");
    write_dump(BufWriter::new(fs::File::create(&dump)?), &header, p.segments())?;
    fs::write(c.out.join("plot.svg"), svg::render(&w, p.segments(), time))?;
    println!(
        "{} divisions, {} segments at t = {time}; wrote {}",
        p.division_count(),
        p.segments().len(),
        dump.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn consistency(c: &Common) -> Result<ExitCode, CliError> {
    let (cfg, seed) = prepare(c)?;
    let rules = cfg.build_rules()?;
    let (b, inner, outer, probes) = cfg.consistency()?;
    let report = core(consistency_test(&ConsistencyConfig {
        rules,
        inner,
        outer,
        times: b.times.clone(),
        n_reps: b.n_reps,
        probes,
        seed,
        alpha: b.alpha,
    }))?;
    write_json(&c.out.join("report.json"), &report)?;
    let table = report.to_table();
    fs::write(c.out.join("report.txt"), &table)?;
    print!("{table}");
    Ok(match report.verdict {
        Verdict::ConsistentNotRejected => ExitCode::SUCCESS,
        Verdict::InconsistentDetected => ExitCode::from(2),
    })
}

fn verify(c: &Common) -> Result<ExitCode, CliError> {
    let (cfg, seed) = prepare(c)?;
    let rules = cfg.build_rules()?;
    let v = cfg.verify()?;
    let checks = core(verify_identities(&rules, &v.identities, v.n_configs, seed))?;
    for ch in &checks {
        println!(
            "{:<4} {:<22} residual {:.3e} (tolerance {:.1e}, {} configurations)",
            if ch.passed { "pass" } else { "FAIL" },
            ch.identity.name(),
            ch.residual,
            ch.tolerance,
            ch.configurations
        );
    }
    write_json(&c.out.join("verify.json"), &checks)?;
    Ok(if checks.iter().all(|ch| ch.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn rate(c: &Common) -> Result<ExitCode, CliError> {
    let (cfg, seed) = prepare(c)?;
    let rules = cfg.build_rules()?;
    let (b, w, probe) = cfg.rate()?;
    let mut out = Vec::with_capacity(b.dt.len());
    for &dt in &b.dt {
        let e = core(rate_estimate(&rules, &w, &probe, dt, b.n_reps, seed))?;
        println!(
            "dt {dt:<10} hits {:>8}/{:<8} estimate {:.6} ± {:.6}",
            e.hits, e.n_reps, e.estimate, e.std_error
        );
        out.push(e);
    }
    write_json(&c.out.join("rate.json"), &out)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    // Usage errors exit 1; exit 2 is reserved for detected inconsistencies.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Consistency(c) => consistency(c),
        Command::Verify(c) => verify(c),
        Command::Rate(c) => rate(c),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
