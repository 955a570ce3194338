use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use grassfield_dsl::{run_source, Options};

#[derive(Parser)]
#[command(name = "grassfield", version, about = "Run derivation scripts against the grassfield engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a `.gft` script and report every assertion.
    Run {
        script: PathBuf,
        /// Cross-check equalities on random finite Grassmann algebras.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        fail_fast: bool,
        /// Lowest power of c kept by series_c, e.g. `-2` or `-3/2`.
        #[arg(long, allow_hyphen_values = true)]
        order: Option<String>,
        /// Include per-assertion wall time in the report.
        #[arg(long)]
        timing: bool,
    },
}

fn parse_half(s: &str) -> Option<i32> {
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim().parse::<i32>().ok()?, d.trim().parse::<i32>().ok()?),
        None => (s.trim().parse::<i32>().ok()?, 1),
    };
    match d {
        1 => Some(2 * n),
        2 => Some(n),
        _ => None,
    }
}

fn main() -> ExitCode {
    let Command::Run { script, oracle, trials, seed, report, fail_fast, order, timing } = Cli::parse().command;
    let order_half = match order.as_deref().map(parse_half) {
        Some(None) => {
            eprintln!("--order expects an integer or half-integer such as -3/2");
            return ExitCode::from(2);
        }
        Some(h) => h,
        None => None,
    };
    let text = match std::fs::read_to_string(&script) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", script.display());
            return ExitCode::from(2);
        }
    };
    let opts = Options { oracle, trials, seed, fail_fast, order_half, timing };
    std::panic::set_hook(Box::new(|_| {}));
    let name = script.display().to_string();
    let rep = match run_source(&text, &name, &opts) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    print!("{}", rep.human());
    if let Some(path) = report {
        if let Err(e) = std::fs::write(&path, rep.to_json() + "\n") {
            eprintln!("cannot write {}: {e}", path.display());
            return ExitCode::from(3);
        }
    }
    ExitCode::from(rep.exit_code as u8)
}
