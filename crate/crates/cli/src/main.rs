use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fes_core::config::RunConfig;
use fes_core::error::FesError;
use fes_core::pipeline::{
    cmd_bench, cmd_evaluate, cmd_ingest, cmd_schedule, cmd_train, render_gaps, render_metrics, Method, ScheduleTarget,
};

#[derive(Parser)]
#[command(name = "fes", version, about = "Forecast PV generation and schedule household appliances")]
struct Cli {
    /// Run configuration (TOML); built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the run seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Fes,
    Exact,
    Ga,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Fes => Method::Fes,
            MethodArg::Exact => Method::Exact,
            MethodArg::Ga => Method::Ga,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Ingest (or synthesize) the dataset and write the cleaned CSVs.
    Ingest,
    /// Two-stage training; writes rtpnn.ckpt, fes.ckpt and loss histories.
    Train,
    /// Schedule one test day or a scenario file.
    Schedule {
        #[arg(long, value_enum, default_value = "fes")]
        method: MethodArg,
        /// Zero-based test day.
        #[arg(long, default_value_t = 0, conflicts_with = "scenario")]
        day: usize,
        /// Standalone scenario file (TOML) instead of a test day.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Forecast metrics and cost gaps on the test split.
    Evaluate,
    /// Per-window timing of every method.
    Bench {
        #[arg(long)]
        windows: Option<usize>,
        #[arg(long)]
        repetitions: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<(), FesError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out: &Path = &cli.out_dir;
    match cli.command {
        Command::Ingest => {
            let r = cmd_ingest(&cfg, out)?;
            println!(
                "ingested {} generation and {} weather rows into {} hourly rows ({} imputed)",
                r.generation_rows, r.weather_rows, r.rows_out, r.imputed_rows
            );
        }
        Command::Train => {
            let s = cmd_train(&cfg, out)?;
            println!("stage 1: {} windows, final loss {:.6}", s.train_windows, s.stage1_final_loss);
            println!(
                "stage 2: {} labelled days, {} skipped as infeasible, final loss {:.6}",
                s.label_days,
                s.skipped_days.len(),
                s.stage2_final_loss
            );
            println!("checksums: rtpnn {:016x}, fes {:016x}", s.rtpnn_checksum, s.fes_checksum);
        }
        Command::Schedule { method, day, scenario } => {
            let target = match scenario {
                Some(p) => ScheduleTarget::File(p),
                None => ScheduleTarget::Day(day),
            };
            let o = cmd_schedule(&cfg, out, &target, method.into())?;
            for (n, (d, s)) in o.scenario.devices().iter().zip(o.schedule.starts()).enumerate() {
                println!("{:>3} {:<34} slot {:>2}", n + 1, d.name, s + 1);
            }
            println!("method {} objective {:.6}", o.method, o.objective);
        }
        Command::Evaluate => {
            let s = cmd_evaluate(&cfg, out)?;
            print!("{}", render_metrics(&s.metrics));
            println!();
            print!("{}", render_gaps(&s.gaps));
        }
        Command::Bench { windows, repetitions } => {
            let t = cmd_bench(&cfg, out, windows, repetitions)?;
            print!("{}", t.render());
            if let Some(r) = t.ratio("exact", "fes") {
                println!("exact / fes time ratio: {r:.2}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
