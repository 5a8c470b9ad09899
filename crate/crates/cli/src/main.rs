use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cpcl_core::mapfile::{export_heatmap, MapFileError};
use cpcl_core::scenario::{load_scenario, run_scenario, ScenarioError};

#[derive(Parser)]
#[command(name = "cpcl", version, about = "Multistatic OFDM passive radar simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write maps, detections and positions.
    Run {
        scenario: PathBuf,
        /// Output directory; defaults to the scenario's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base seed; grid, scene and noise use N, N+1 and N+2.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render a map file as a grayscale PGM image.
    Heatmap {
        map: PathBuf,
        image: PathBuf,
        /// Dynamic range below the peak, in dB.
        #[arg(long = "floor-db", default_value_t = 40.0, allow_negative_numbers = true)]
        floor_db: f64,
    },
    /// Check a scenario without running it.
    Validate { scenario: PathBuf },
}

fn fail(err: &ScenarioError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match cli.command {
        Command::Run { scenario, out, seed } => match run_scenario(&scenario, out.as_deref(), seed) {
            Ok((report, dir)) => {
                for p in &report.pairs {
                    println!("{}: {} detections", p.pair.id, p.detections.len());
                }
                for row in &report.positions {
                    let e = &row.estimate;
                    println!(
                        "{}: ({:.2}, {:.2}) m, residual {:.3} m",
                        row.target_hint, e.position.x, e.position.y, e.residual_rms_m
                    );
                }
                for note in &report.notes {
                    println!("note: {note}");
                }
                println!("wrote {}", dir.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Heatmap { map, image, floor_db } => match export_heatmap(&map, &image, floor_db) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e @ MapFileError::UnreadableMap(_)) | Err(e @ MapFileError::Io(_)) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Command::Validate { scenario } => match load_scenario(&scenario) {
            Ok(s) => {
                println!("{}: ok ({} pairs)", s.name, s.pairs.len());
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
    }
}
