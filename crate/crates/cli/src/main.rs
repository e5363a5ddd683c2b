use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use lsg_core::harness::{
    decode_sample, export_kl_trace, kl_trace_tsv, load_corpus, run_experiment, sample_heatmap, sweep, ExperimentConfig,
    Grid,
};

#[derive(Parser)]
#[command(name = "lsg", version, about = "Simultaneous decoding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and print its summary row.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the experiment once per grid point.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the decoder with the brute-force simulator on random cases.
    OracleCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        cases: usize,
    },
    /// Print the per-consultation KL trace of one sample.
    Trace {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sample: String,
        /// Print KL for every read count instead of the visited ones.
        #[arg(long)]
        heatmap: bool,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` means the command ran but something in it failed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config } => {
            let config = ExperimentConfig::load(&config)?;
            let report = run_experiment(&config)?;
            print!("{}", report.summary_tsv());
            for s in report.samples.iter().filter(|s| s.error.is_some()) {
                eprintln!("{}: {}", s.id, s.error.as_deref().unwrap_or_default());
            }
            Ok(!report.has_errors())
        }
        Command::Sweep { config, grid, out } => {
            let config = ExperimentConfig::load(&config)?;
            let grid = Grid::load(&grid)?;
            let samples = load_corpus(&config.corpus)?;
            let table = sweep(&config, &grid, &samples)?;
            let tsv = table.to_tsv();
            match out {
                Some(path) => std::fs::write(&path, tsv).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{tsv}"),
            }
            Ok(!table.has_errors())
        }
        Command::OracleCheck { seed, cases } => {
            let report = lsg_core::oracle::check(seed, cases);
            for m in &report.mismatches {
                eprintln!(
                    "case {}: engine {:?} oracle {:?} {}",
                    m.case, m.engine, m.oracle, m.detail
                );
            }
            println!(
                "{} cases, {} mismatches, {:.2} s",
                report.cases,
                report.mismatches.len(),
                report.elapsed.as_secs_f64()
            );
            Ok(report.mismatches.is_empty())
        }
        Command::Trace {
            config,
            sample,
            heatmap,
        } => {
            let config = ExperimentConfig::load(&config)?;
            let samples = load_corpus(&config.corpus)?;
            if !heatmap {
                let (result, _) = decode_sample(&config, &samples, &sample)?;
                print!("{}", kl_trace_tsv(&export_kl_trace(&result)?));
                return Ok(true);
            }
            let rows = sample_heatmap(&config, &samples, &sample)?;
            for (i, row) in rows.iter().enumerate() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
                println!("{}\t{}", i + 1, cells.join("\t"));
            }
            Ok(true)
        }
    }
}
