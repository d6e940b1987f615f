use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use photonic_link::experiment::{load_config, read_results, run_file, summarize, write_summary, RunOptions};
use photonic_link::Error;

/// Sweep runner for the PAM-4 link and photonic-node simulations.
#[derive(Parser)]
#[command(name = "pam4link", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Added to every seed in the config.
    #[arg(long, global = true, default_value_t = 0)]
    seed_offset: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every sweep point and seed, writing `<out>/<config stem>.csv`.
    Run {
        config: PathBuf,
        /// Record wall-clock time per row (makes the file non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
    /// Median, quartiles and extremes of log10 BER per group.
    Report {
        csv: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        group_by: Vec<String>,
    },
}

fn located(file: &Path, e: Error) -> String {
    match e {
        Error::Config { line, message } => format!("{}:{line}: {message}", file.display()),
        other => format!("{}: {other}", file.display()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, timing } => {
            let opts = RunOptions {
                threads: cli.threads,
                seed_offset: cli.seed_offset,
                timing: *timing,
                dump_dir: None,
            };
            run_file(config, &cli.out, &opts)
                .map(|p| log::info!("wrote {}", p.display()))
                .map_err(|e| located(config, e))
        }
        Command::Validate { config } => load_config(config)
            .and_then(|c| Ok((c.run_count()?, c)))
            .map(|(n, c)| log::info!("{}: ok, {} run(s) in mode {}", config.display(), n, c.mode))
            .map_err(|e| located(config, e)),
        Command::Report { csv, group_by } => (|| {
            let table = read_results(csv)?;
            let rows = summarize(&table, group_by)?;
            let stem = csv.file_stem().map_or("results".into(), |s| s.to_string_lossy().into_owned());
            std::fs::create_dir_all(&cli.out)?;
            let path = cli.out.join(format!("{stem}_summary.csv"));
            write_summary(&path, group_by, &rows)?;
            log::info!("wrote {} ({} group(s))", path.display(), rows.len());
            Ok(())
        })()
        .map_err(|e: Error| located(csv, e)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
