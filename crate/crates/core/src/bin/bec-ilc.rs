//! Command-line front end: offline table and kernel design, single ground
//! states, closed-loop runs and run reports.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bec_ilc::harness::{
    desired_potential, error_ratios, export_records, ground_state_csv, read_potential_csv, report,
    run_closed_loop, solve_ground_state, Design, ScenarioConfig,
};
use bec_ilc::inputmap::Lut;
use bec_ilc::HarnessError;

#[derive(Parser)]
#[command(name = "bec-ilc", version, about = "Learning control of DMD-shaped potentials for quasi-1D condensates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the transversal patterns and write the input look-up table.
    BuildLut {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the optimizer seed of the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write the position-space learning kernel as `z,kernel` CSV.
    DesignKernel {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ground state of the desired potential or of a `z,V` CSV file.
    Groundstate {
        #[arg(long)]
        config: PathBuf,
        /// `desired`, or `file PATH`.
        #[arg(long, num_args = 1..=2, value_names = ["KIND", "PATH"])]
        potential: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the closed loop and export the record trail.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        lut: PathBuf,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the master seed of the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-check an exported run and print its summary table.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn execute(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::BuildLut { config, out, seed } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.lut.optimizer.seed = s;
            }
            cfg.validate()?;
            let lut = cfg.build_lut()?;
            let step = 1.0 / (lut.n_nu() - 1) as f64;
            write(&out, &lut.to_json())?;
            println!(
                "{} entries, worst |achieved - nu| = {:.3} steps, sha256 {}",
                lut.n_nu(),
                lut.max_entry_error() / step,
                lut.sha256()
            );
        }
        Command::DesignKernel { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let design = Design::new(&cfg)?;
            write(&out, &design.kernel.to_csv())?;
            println!(
                "alpha_bar {:.5}, gamma {:.4e}, {} samples",
                design.gain.alpha_bar,
                design.kernel.gamma,
                design.kernel.kernel.grid().len()
            );
        }
        Command::Groundstate { config, potential, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let v = match potential.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
                ["desired"] => desired_potential(&cfg.desired, cfg.grid)?,
                ["file", path] => read_potential_csv(Path::new(path), cfg.grid)?,
                other => {
                    return Err(HarnessError::Config(format!(
                        "--potential expects `desired` or `file PATH`, got {other:?}"
                    )))
                }
            };
            let gs = solve_ground_state(&cfg, &v)?;
            write(&out, &ground_state_csv(&gs, &v))?;
            println!("mu {:.6} rad/ms after {} steps", gs.mu, gs.steps);
        }
        Command::Run { config, lut, iterations, out, seed } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(n) = iterations {
                cfg.iterations = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let text = fs::read_to_string(&lut).map_err(|e| HarnessError::io(&lut, e))?;
            let lut = Lut::from_json(&text)?;
            let design = Design::new(&cfg)?;
            let (records, abort) = match run_closed_loop(&cfg, &design, &lut) {
                Ok(r) => (r, None),
                Err(a) => (a.records, Some(a.error)),
            };
            export_records(&records, &cfg, Some(&design), Some(&lut), abort.as_ref(), &out)?;
            if let (Some(last), Some(q)) = (records.last(), error_ratios(&records).last()) {
                println!("{} iterations, final |e| = {:.5e} ({:.3e} of initial)", records.len(), last.error_norm, q);
            }
            if let Some(e) = abort {
                return Err(e);
            }
        }
        Command::Report { input } => {
            let r = report(&input)?;
            print!("{}", r.table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
