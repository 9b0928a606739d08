use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hyppen::exec::Exec;
use hyppen::harness::{run_experiment, Command, ExperimentConfig};

#[derive(Parser)]
#[command(name = "hyppen", version, about = "Penalization solvers for hyperbolic boundary-value problems")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Uniform Lopatinski scan over the frequency hemisphere.
    Scan(Common),
    /// Kreiss symmetrizer and Rauch matrix certificates.
    RauchVerify(Common),
    /// Rate study of the symmetrizer-based penalization.
    PenalizeKreiss(Common),
    /// Rate study of the projector-based penalization.
    PenalizeProjector(Common),
    /// Penalized 1-D wave equation and its boundary layer.
    WaveDemo(Common),
}

#[derive(Args)]
struct Common {
    /// System spec (JSON).
    #[arg(long)]
    system: Option<PathBuf>,
    /// Laplace weight gamma (default 8 / T).
    #[arg(long)]
    gamma: Option<f64>,
    /// Comma-separated, strictly decreasing eps ladder.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    eps: Option<Vec<f64>>,
    /// Number of frequency samples.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, default_value = "hyppen-out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write symmetrizer, Rauch matrix and root per frequency (rauch-verify).
    #[arg(long)]
    dump_symmetrizer: Option<PathBuf>,
    /// Write the finest wave run as a flat binary dump (wave-demo).
    #[arg(long)]
    dump_field: Option<PathBuf>,
    /// Disable the thread pool.
    #[arg(long)]
    sequential: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Scan(a) => (Command::Scan, a),
        Cmd::RauchVerify(a) => (Command::RauchVerify, a),
        Cmd::PenalizeKreiss(a) => (Command::PenalizeKreiss, a),
        Cmd::PenalizeProjector(a) => (Command::PenalizeProjector, a),
        Cmd::WaveDemo(a) => (Command::WaveDemo, a),
    };
    let mut cfg = ExperimentConfig::new(command, args.system, args.out);
    cfg.gamma = args.gamma;
    if let Some(e) = args.eps {
        cfg.eps_ladder = e;
    }
    if let Some(g) = args.grid {
        cfg.grid = g;
    }
    cfg.seed = args.seed;
    cfg.dump_symmetrizer = args.dump_symmetrizer;
    cfg.dump_field = args.dump_field;
    let exec = if args.sequential { Exec::Sequential } else { Exec::default() };

    match run_experiment(&cfg, exec) {
        Ok(outcome) => {
            for v in &outcome.verdicts {
                println!("{} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
            }
            for f in &outcome.failures {
                eprintln!("error at {:?} eps {:?}: {}", f.zeta, f.eps, f.error);
            }
            println!("report: {}", cfg.output_dir.join("report.json").display());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("hyppen: {}", e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
