use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chns::app::{self, CliOverrides, RunConfig, SnapshotFormat};
use chns::scenarios::{scenario_mms_ladder, ScenarioKind, StepLaw};

#[derive(Parser)]
#[command(name = "chns", version, about = "Cahn-Hilliard-Navier-Stokes solver with the Flory-Huggins potential")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write diagnostics, snapshots and run.json.
    Run(RunArgs),
    /// Manufactured-solution convergence table.
    Mms(MmsArgs),
    /// Check a configuration without running it.
    Validate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config, or a previous run.json.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<ScenarioKind>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    snapshot_every: Option<usize>,
    #[arg(long, value_parser = ["vtk", "csv"])]
    format: Option<String>,
}

#[derive(Args)]
struct MmsArgs {
    #[arg(long, default_value_t = 2)]
    degree: usize,
    /// Values of 1/h.
    #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
    ladder: Vec<usize>,
    /// Fixed time step instead of the degree's step law.
    #[arg(long)]
    dt: Option<f64>,
    /// Temporal Cauchy study on an `nx x nx` mesh over these values of 1/dt.
    #[arg(long, value_delimiter = ',')]
    temporal: Option<Vec<usize>>,
    #[arg(long, default_value_t = 32)]
    nx: usize,
    /// Directory for convergence.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> chns::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let format = self.format.as_deref().map(str::parse::<SnapshotFormat>).transpose()?;
        cfg.apply(&CliOverrides {
            scenario: self.scenario,
            nx: self.nx,
            ny: self.ny,
            degree: self.degree,
            dt: self.dt,
            t_final: self.t_final,
            seed: self.seed,
            out: self.out.clone(),
            snapshot_every: self.snapshot_every,
            format,
        });
        Ok(cfg)
    }
}

fn run(cmd: Command) -> chns::Result<()> {
    match cmd {
        Command::Run(a) => {
            let cfg = a.config()?;
            let s = app::run(&cfg)?;
            let last = s.diagnostics.last().expect("initial record");
            println!(
                "{} steps written to {} (energy {:.6e}, mass {:.6e}, phi in [{:.4}, {:.4}])",
                s.metadata.steps_completed,
                s.dir.display(),
                last.energy,
                last.mass,
                last.phi_min,
                last.phi_max
            );
        }
        Command::Validate(a) => println!("{}", app::validate(&a.config()?)?),
        Command::Mms(a) => {
            let table = match &a.temporal {
                Some(inv) => app::temporal_study(a.degree, a.nx, inv)?,
                None => {
                    let law = a.dt.map_or(StepLaw::for_degree(a.degree), StepLaw::Fixed);
                    app::spatial_study(&scenario_mms_ladder(a.degree, &a.ladder, law))?
                }
            };
            print!("{table}");
            if let Some(dir) = a.out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("convergence.csv"), table.to_csv())?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
