use clap::Parser;
use std::path::PathBuf;
use wolff_cli::config::Command;
use wolff_cli::{run, Invocation};

/// Evaluate potentials, capacity checks and pointwise bounds from a JSON config.
#[derive(Debug, Parser)]
#[command(name = "wolffpot", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Multiply every quadrature resolution by this factor.
    #[arg(long, default_value_t = 1)]
    refine: usize,
    /// Compare frozen constants against this file, recording missing ones.
    #[arg(long)]
    baseline: Option<PathBuf>,
}

fn main() {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { wolff_cli::EXIT_CONFIG } else { 0 });
        }
    };
    let inv = Invocation {
        command: args.command,
        config: args.config,
        out: args.out,
        seed: args.seed,
        refine: args.refine,
        baseline: args.baseline,
    };
    let r = run(&inv);
    for m in &r.messages {
        eprintln!("{m}");
    }
    if let Some(p) = &r.csv_path {
        println!("{}", p.display());
    }
    std::process::exit(r.code);
}
