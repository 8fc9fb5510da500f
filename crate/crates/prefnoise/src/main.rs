//! `prefnoise` — run preference-noise experiments, sweep noise grids, and
//! summarize result CSVs.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use prefnoise::config::load_config;
use prefnoise::harness::{run_experiment, sweep, write_aggregates};
use prefnoise::records::write_csv;
use prefnoise::report::{format_summary, report};
use prefnoise_core::noise::NoiseModelSpec;

#[derive(Parser)]
#[command(name = "prefnoise", version, about = "Preference-noise laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config over its seeds and write a run CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replace the config's seed list with a single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross noise kinds with rates over the config's seeds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated target rates, e.g. 0.1,0.2,0.3,0.4.
        #[arg(long, value_delimiter = ',')]
        rates: Vec<f64>,
        /// Comma-separated kind names; defaults to the full standard suite.
        /// Known names: uniform, similarity_l2, similarity_latent,
        /// magnitude, uncertainty, adversarial, hybrid_similarity_l2,
        /// hybrid_magnitude, or `config` for the config file's own model.
        #[arg(long, value_delimiter = ',')]
        kinds: Vec<String>,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Output stem: writes <out> (runs) and <out stem>.agg.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the config's seed list with a single seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize a run CSV and emit per-round curve files.
    Report {
        csv: PathBuf,
        /// Directory for curve files (default: alongside the CSV).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run { config, seed, out } => {
            let mut cfg = load_config(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            if let Some(s) = seed {
                cfg.protocol.seeds = vec![s];
            }
            if let Some(path) = out {
                cfg.protocol.output_path = Some(path);
            }
            let records = run_experiment(&cfg)?;
            match &cfg.protocol.output_path {
                Some(path) => println!(
                    "wrote {} records ({} seeds x {} rounds) to {}",
                    records.len(),
                    cfg.protocol.seeds.len(),
                    cfg.protocol.rounds,
                    path.display()
                ),
                None => {
                    for r in &records {
                        println!("{}", r.to_csv_row());
                    }
                }
            }
            Ok(())
        }
        Command::Sweep {
            config,
            rates,
            kinds,
            jobs,
            out,
            seed,
        } => {
            let mut cfg = load_config(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            if let Some(s) = seed {
                cfg.protocol.seeds = vec![s];
            }
            if rates.is_empty() {
                bail!("--rates needs at least one value");
            }
            let kind_specs = resolve_kinds(&kinds, &cfg.noise)?;
            let (runs, aggregates) = sweep(&cfg, &kind_specs, &rates, jobs)?;

            let out_path = out
                .or(cfg.protocol.output_path.clone())
                .unwrap_or_else(|| PathBuf::from("sweep.csv"));
            write_csv(&out_path, &runs)?;
            let agg_path = out_path.with_extension("agg.csv");
            write_aggregates(&agg_path, &aggregates)?;
            println!(
                "wrote {} run rows to {} and {} aggregate rows to {}",
                runs.len(),
                out_path.display(),
                aggregates.len(),
                agg_path.display()
            );
            for row in &aggregates {
                println!("{}", row.to_csv_row());
            }
            Ok(())
        }
        Command::Report { csv, out } => {
            let out_dir = out.unwrap_or_else(|| {
                csv.parent()
                    .map(|p| p.join("curves"))
                    .unwrap_or_else(|| PathBuf::from("curves"))
            });
            let rep = report(&csv, &out_dir)?;
            print!("{}", format_summary(&rep.summary));
            for (kind, rate) in &rep.single_seed_cells {
                println!("note: cell ({kind}, {rate:.2}) has a single seed; std is 0 by construction");
            }
            println!(
                "wrote {} curve file(s) under {}",
                rep.curve_files.len(),
                out_dir.display()
            );
            Ok(())
        }
    }
}

/// Maps `--kinds` names to noise specs; the target rate is overridden per
/// sweep cell, so the placeholder rate here never matters.
fn resolve_kinds(names: &[String], from_config: &NoiseModelSpec) -> anyhow::Result<Vec<NoiseModelSpec>> {
    if names.is_empty() {
        return Ok(NoiseModelSpec::standard_suite(0.1));
    }
    let suite = NoiseModelSpec::standard_suite(0.1);
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        if name == "config" {
            out.push(from_config.clone());
            continue;
        }
        match suite.iter().find(|s| s.name() == *name) {
            Some(spec) => out.push(spec.clone()),
            None => bail!(
                "unknown noise kind '{name}'; known: {}, config",
                suite
                    .iter()
                    .map(|s| s.name())
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        }
    }
    Ok(out)
}
