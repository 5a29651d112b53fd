//! `curriculum`: run and compare task-mixing schedulers on the simulated
//! trainer.
//!
//! Exit codes: 0 on success, 1 on validation errors, 2 on i/o errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use curriculum_core::emit;
use curriculum_core::experiment::run_experiment;
use curriculum_core::{
    ArmId, ComparisonReport, EmitFlags, Error, ExperimentConfig, load_config, run,
};

#[derive(Parser)]
#[command(name = "curriculum", version, about = "Bandit-scheduled task mixing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (scheduler, seed) pair of a config and persist trajectories
    /// plus a summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replace the config's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's step count.
        #[arg(long)]
        steps: Option<u64>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Trajectory format to emit (svg keeps csv enabled so the summary
        /// stays recomputable).
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Run an experiment and print the scheduler comparison table.
    Compare {
        #[arg(long)]
        config: PathBuf,
    },
    /// Emit the windowed transfer series of one ordered (trained task,
    /// reward task) pair, from the config's first scheduler and first seed.
    Transfer {
        #[arg(long)]
        config: PathBuf,
        /// Pair as `X,Y` with arm indices, or `MT`/`LM` for two-arm runs.
        #[arg(long)]
        pair: String,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

fn apply_format(emit: &mut EmitFlags, format: Format) {
    *emit = match format {
        Format::Csv => EmitFlags { csv: true, json: false, svg: false },
        Format::Json => EmitFlags { csv: false, json: true, svg: false },
        Format::Svg => EmitFlags { csv: true, json: false, svg: true },
    };
}

fn parse_arm(token: &str, n_arms: usize) -> Result<ArmId, Error> {
    let arm = match token.trim().to_ascii_lowercase().as_str() {
        "mt" => ArmId(0),
        "lm" => ArmId(1),
        other => ArmId(other.parse::<usize>().map_err(|_| {
            Error::InvalidConfig(format!("cannot parse arm '{token}'; use an index, MT or LM"))
        })?),
    };
    arm.validate(n_arms)?;
    Ok(arm)
}

fn arm_name(arm: ArmId, n_arms: usize) -> String {
    if n_arms == 2 {
        ["MT", "LM"][arm.index()].to_string()
    } else {
        format!("task{}", arm.index())
    }
}

fn print_report(report: &ComparisonReport) {
    let n_tasks = report
        .schedulers
        .first()
        .map(|s| s.final_losses.len())
        .unwrap_or(0);
    println!(
        "scenario {} | {} steps | seeds {:?} | final window {}",
        report.scenario, report.steps, report.seeds, report.final_window
    );
    let mut header = format!("{:<24} {:>10}", "scheduler", "lambda_MT");
    for task in 0..n_tasks {
        header.push_str(&format!(
            " {:>20}",
            format!("loss[{}]", arm_name(ArmId(task), n_tasks))
        ));
    }
    println!("{header}");
    for sched in &report.schedulers {
        let mut row = format!("{:<24} {:>10.4}", sched.label, sched.final_lambda_mt);
        for stat in &sched.final_losses {
            match stat.mean {
                Some(mean) => row.push_str(&format!(
                    " {:>20}",
                    format!("{mean:.4} +/- {:.4}", stat.sd)
                )),
                None => row.push_str(&format!(" {:>20}", "-")),
            }
        }
        println!("{row}");
    }
}

fn cmd_run(
    config: PathBuf,
    seed: Option<u64>,
    steps: Option<u64>,
    out: Option<PathBuf>,
    format: Option<Format>,
) -> Result<(), Error> {
    let mut experiment: ExperimentConfig = load_config(&config)?;
    if let Some(seed) = seed {
        experiment.seeds = vec![seed];
    }
    if let Some(steps) = steps {
        experiment.steps = steps;
    }
    if let Some(out) = out {
        experiment.output_dir = out;
    }
    if let Some(format) = format {
        apply_format(&mut experiment.emit, format);
    }
    let report = run_experiment(&experiment)?;
    let pairs: usize = report.schedulers.iter().map(|s| s.runs.len()).sum();
    println!(
        "wrote {pairs} trajectories and summary.json to {}",
        experiment.output_dir.display()
    );
    Ok(())
}

fn cmd_compare(config: PathBuf) -> Result<(), Error> {
    let experiment = load_config(&config)?;
    let report = run_experiment(&experiment)?;
    print_report(&report);
    Ok(())
}

fn cmd_transfer(config: PathBuf, pair: String, format: Format) -> Result<(), Error> {
    let experiment = load_config(&config)?;
    let scenario = experiment.resolve_scenario()?;
    let n_arms = scenario.n_arms();

    let (tau_token, rho_token) = pair.split_once(',').ok_or_else(|| {
        Error::InvalidConfig(format!("pair must be 'X,Y', got '{pair}'"))
    })?;
    let tau = parse_arm(tau_token, n_arms)?;
    let rho = parse_arm(rho_token, n_arms)?;

    let scheduler = &experiment.schedulers[0];
    let seed = experiment.seeds[0];
    let log = run(&scenario, scheduler, experiment.steps, seed)?;
    let points = emit::pair_series(&log, tau, rho)?;

    std::fs::create_dir_all(&experiment.output_dir)
        .map_err(|e| Error::Io { path: experiment.output_dir.clone(), source: e })?;
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
        Format::Svg => "svg",
    };
    let path = experiment
        .output_dir
        .join(format!("transfer_{}_{}.{ext}", tau.index(), rho.index()));
    let title = format!("{} to {}", arm_name(tau, n_arms), arm_name(rho, n_arms));
    let body = match format {
        Format::Csv => emit::transfer_csv_string(&points),
        Format::Json => emit::transfer_json_string(&points),
        Format::Svg => emit::transfer_svg_string(&points, &title),
    };
    std::fs::write(&path, body).map_err(|e| Error::Io { path: path.clone(), source: e })?;

    match (points.first(), points.last()) {
        (Some(first), Some(last)) => println!(
            "{title}: {} points, window mean {:.6e} at step {} -> {:.6e} at step {}; wrote {}",
            points.len(),
            first.mean,
            first.step,
            last.mean,
            last.step,
            path.display()
        ),
        _ => println!("{title}: pair never occurred in {} steps; wrote {}", experiment.steps, path.display()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, steps, out, format } => cmd_run(config, seed, steps, out, format),
        Command::Compare { config } => cmd_compare(config),
        Command::Transfer { config, pair, format } => cmd_transfer(config, pair, format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
