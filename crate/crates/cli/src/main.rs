use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use bdris::experiments::{
    emit_results, load_config, run_sweep_with, scheme_means, Axis, ExperimentConfig, ResultRow, Scheme, SweepSpec,
};
use clap::{Args, Parser, Subcommand};

/// Meta-learned BD-RIS / RSMA uplink experiments.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scheme and seed at the configured N and M.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Vary M or N over a list of values.
    Sweep {
        config: PathBuf,
        #[arg(long, value_parser = parse_axis)]
        vary: Axis,
        /// Comma-separated values, e.g. `4,8,16`.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Diagonal meta-learner against the exhaustive phase grid (M ≤ 2).
    Oracle {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Seeds as `a..b` (half-open) or a comma list.
    #[arg(long, value_parser = parse_seeds)]
    seeds: Option<Seeds>,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Restrict to these schemes (repeatable or comma-separated).
    #[arg(long, value_delimiter = ',', value_parser = parse_scheme)]
    scheme: Vec<Scheme>,
    /// Indicator-weighted loss, full-phase SMN update, best-by-loss tracking and unit-modulus blocks.
    #[arg(long)]
    strict_paper: bool,
}

#[derive(Clone)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let err = |e: std::num::ParseIntError| format!("bad seed list {s:?}: {e}");
    let seeds: Vec<u64> = match s.split_once("..") {
        Some((a, b)) => (a.trim().parse().map_err(err)?..b.trim().parse().map_err(err)?).collect(),
        None => s.split(',').map(|v| v.trim().parse().map_err(err)).collect::<Result<_, _>>()?,
    };
    if seeds.is_empty() {
        return Err(format!("seed list {s:?} is empty"));
    }
    Ok(Seeds(seeds))
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    s.parse().map_err(|e: bdris::Error| e.to_string())
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: bdris::Error| e.to_string())
}

fn apply(mut cfg: ExperimentConfig, common: Common) -> Result<ExperimentConfig> {
    if let Some(Seeds(s)) = common.seeds {
        cfg.seeds = s;
    }
    if let Some(dir) = common.out_dir {
        cfg.output_dir = dir;
    }
    if !common.scheme.is_empty() {
        cfg.schemes = common.scheme;
    }
    if common.strict_paper {
        cfg = cfg.strict_paper();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let records = run_sweep_with(cfg, &|row| {
        eprintln!(
            "{:<14} seed {:<4} N {:<3} M {:<3} sum rate {:>9.4} ({:.1} s) {}",
            row.scheme, row.seed, row.n, row.m, row.best_sum_rate, row.wall_time_seconds, row.status
        );
    })?;
    emit_results(&records, cfg, &cfg.output_dir)
        .with_context(|| format!("writing results to {}", cfg.output_dir.display()))?;
    let rows: Vec<ResultRow> = records.into_iter().map(|r| r.row).collect();
    println!("{:>4} {:>4} {:<14} {:>10} {:>5}", "N", "M", "scheme", "mean rate", "runs");
    for ((n, m, scheme), mean, count) in scheme_means(&rows) {
        println!("{n:>4} {m:>4} {:<14} {mean:>10.4} {count:>5}", scheme.name());
    }
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        eprintln!("{failed} run(s) failed; see the status column");
    }
    println!("results written to {}", cfg.output_dir.display());
    Ok(rows)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, common } => {
            let cfg = apply(load_config(&config)?, common)?;
            execute(&cfg)?;
        }
        Command::Sweep {
            config,
            vary,
            values,
            common,
        } => {
            let mut cfg = load_config(&config)?;
            cfg.sweep = Some(SweepSpec { vary, values });
            let cfg = apply(cfg, common)?;
            execute(&cfg)?;
        }
        Command::Oracle { config, common } => {
            let mut cfg = load_config(&config)?;
            if common.scheme.is_empty() {
                cfg.schemes = vec![Scheme::DiagonalRis, Scheme::GridOracle];
            }
            let cfg = apply(cfg, common)?;
            if !cfg.schemes.contains(&Scheme::GridOracle) {
                bail!("the oracle command needs the grid-oracle scheme");
            }
            let rows = execute(&cfg)?;
            for seed in &cfg.seeds {
                let find = |s: Scheme| rows.iter().find(|r| r.seed == *seed && r.scheme == s && r.is_ok());
                if let (Some(o), Some(d)) = (find(Scheme::GridOracle), find(Scheme::DiagonalRis)) {
                    println!("seed {seed}: learner / oracle = {:.4}", d.best_sum_rate / o.best_sum_rate);
                }
            }
        }
    }
    Ok(())
}
