//! Experiment execution and comparison reports.
//!
//! `run_experiment` runs every (scheduler, seed) pair of a config, writes
//! one trajectory file per pair plus a `summary.json`, and aggregates the
//! pairs into a [`ComparisonReport`]. Pairs execute in parallel; each owns
//! its environment, scheduler, normalizer and random streams, and the
//! report is assembled afterwards in config order, so outputs are
//! byte-stable regardless of thread count. `CURRICULUM_THREADS` caps the
//! parallelism (default: available cores).
//!
//! Every report statistic is recomputable from the persisted trajectories;
//! [`recompute_from_disk`] does exactly that and must reproduce the summary.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::curriculum::{TrajectoryLog, run};
use crate::emit;
use crate::error::{Error, Result};
use crate::reward::percentile_sorted;

/// Environment variable capping replicate parallelism.
pub const THREADS_ENV_VAR: &str = "CURRICULUM_THREADS";

/// Fraction of the run treated as the "final" window for summary stats.
pub fn final_window(steps: u64) -> u64 {
    (steps / 10).max(1)
}

/// Manifest entry: where one (scheduler, seed) pair's trajectory lives,
/// relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRef {
    pub seed: u64,
    pub csv: Option<String>,
    pub json: Option<String>,
    pub svg: Option<String>,
}

/// Mean and population standard deviation over seeds of the final-window
/// average loss on one task. `mean` is `None` when no final-window record
/// measured this task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskLossStat {
    pub task: usize,
    pub mean: Option<f64>,
    pub sd: f64,
}

/// Deciles (10th..90th percentile) of the arm-0 sampling probability inside
/// one step bucket, pooled over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketDeciles {
    pub start_step: u64,
    pub end_step: u64,
    pub deciles: Vec<f64>,
}

/// Aggregate view of one scheduler across its seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerReport {
    pub scheduler: String,
    pub label: String,
    /// Mean over seeds of the final-window average arm-0 probability.
    pub final_lambda_mt: f64,
    /// Final-window average of `loss_after` per reward task.
    pub final_losses: Vec<TaskLossStat>,
    pub lambda_deciles: Vec<BucketDeciles>,
    pub runs: Vec<TrajectoryRef>,
}

/// Everything `compare` prints and `summary.json` stores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub scenario: String,
    pub steps: u64,
    pub seeds: Vec<u64>,
    pub final_window: u64,
    pub schedulers: Vec<SchedulerReport>,
}

const LAMBDA_BUCKETS: u64 = 20;

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn population_sd(values: &[f64], center: f64) -> f64 {
    (values.iter().map(|v| (v - center).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

fn scheduler_stats(
    id: &str,
    label: &str,
    logs: &[TrajectoryLog],
    runs: Vec<TrajectoryRef>,
    steps: u64,
) -> SchedulerReport {
    let window = final_window(steps);
    let n_tasks = logs
        .iter()
        .find_map(|l| l.n_arms())
        .expect("at least one non-empty log per scheduler");

    let lambda_means: Vec<f64> = logs
        .iter()
        .map(|log| {
            let tail = &log.records[log.records.len().saturating_sub(window as usize)..];
            mean(&tail.iter().map(|r| r.policy.probs()[0]).collect::<Vec<_>>())
        })
        .collect();

    let final_losses = (0..n_tasks)
        .map(|task| {
            let per_seed: Vec<f64> = logs
                .iter()
                .filter_map(|log| {
                    let tail =
                        &log.records[log.records.len().saturating_sub(window as usize)..];
                    let losses: Vec<f64> = tail
                        .iter()
                        .filter(|r| r.rho.index() == task)
                        .map(|r| r.loss_after)
                        .collect();
                    if losses.is_empty() { None } else { Some(mean(&losses)) }
                })
                .collect();
            if per_seed.is_empty() {
                TaskLossStat { task, mean: None, sd: 0.0 }
            } else {
                let m = mean(&per_seed);
                TaskLossStat {
                    task,
                    mean: Some(m),
                    sd: population_sd(&per_seed, m),
                }
            }
        })
        .collect();

    let buckets = LAMBDA_BUCKETS.min(steps);
    let lambda_deciles = (0..buckets)
        .map(|b| {
            let start_step = b * steps / buckets;
            let end_step = (b + 1) * steps / buckets;
            let mut pooled: Vec<f64> = logs
                .iter()
                .flat_map(|log| {
                    log.records[start_step as usize..(end_step as usize).min(log.records.len())]
                        .iter()
                        .map(|r| r.policy.probs()[0])
                })
                .collect();
            pooled.sort_by(f64::total_cmp);
            let deciles = (1..=9)
                .map(|d| percentile_sorted(&pooled, d as f64 / 10.0))
                .collect();
            BucketDeciles {
                start_step,
                end_step,
                deciles,
            }
        })
        .collect();

    SchedulerReport {
        scheduler: id.into(),
        label: label.into(),
        final_lambda_mt: mean(&lambda_means),
        final_losses,
        lambda_deciles,
        runs,
    }
}

/// Scheduler file ids, disambiguated when a config repeats a kind.
fn unique_ids(config: &ExperimentConfig) -> Vec<String> {
    let mut ids: Vec<String> = config.schedulers.iter().map(|s| s.id()).collect();
    let mut counts = std::collections::HashMap::new();
    for id in &ids {
        *counts.entry(id.clone()).or_insert(0usize) += 1;
    }
    let mut seen = std::collections::HashMap::new();
    for id in ids.iter_mut() {
        if counts[id.as_str()] > 1 {
            let occurrence = seen.entry(id.clone()).or_insert(0usize);
            *occurrence += 1;
            *id = format!("{id}_{occurrence}");
        }
    }
    ids
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV_VAR) {
        Ok(v) => v.trim().parse::<usize>().ok().filter(|&n| n >= 1).ok_or_else(|| {
            Error::InvalidConfig(format!("{THREADS_ENV_VAR} must be a positive integer, got '{v}'"))
        })?,
        Err(_) => 0, // rayon default: available cores
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))
}

/// Run every (scheduler, seed) pair, persist trajectories and the summary,
/// and return the aggregated report. A failed pair aborts the experiment
/// but leaves already-written files intact.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ComparisonReport> {
    config.validate()?;
    let scenario = config.resolve_scenario()?;
    let out_dir = &config.output_dir;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let ids = unique_ids(config);
    let pairs: Vec<(usize, u64)> = (0..config.schedulers.len())
        .flat_map(|s| config.seeds.iter().map(move |&seed| (s, seed)))
        .collect();

    let executed: Vec<(usize, u64, TrajectoryLog, TrajectoryRef)> = thread_pool()?
        .install(|| {
            pairs
                .par_iter()
                .map(|&(sched_idx, seed)| {
                    let log = run(&scenario, &config.schedulers[sched_idx], config.steps, seed)?;
                    let stem = format!("{}_seed{}", ids[sched_idx], seed);
                    let mut traj_ref = TrajectoryRef {
                        seed,
                        csv: None,
                        json: None,
                        svg: None,
                    };
                    if config.emit.csv {
                        let name = format!("{stem}.csv");
                        emit::write_csv(&log, &out_dir.join(&name))?;
                        traj_ref.csv = Some(name);
                    }
                    if config.emit.json {
                        let name = format!("{stem}.json");
                        emit::write_json(&log, &out_dir.join(&name))?;
                        traj_ref.json = Some(name);
                    }
                    if config.emit.svg {
                        let name = format!("{stem}.svg");
                        emit::write_svg(&log, &out_dir.join(&name))?;
                        traj_ref.svg = Some(name);
                    }
                    Ok((sched_idx, seed, log, traj_ref))
                })
                .collect::<Result<Vec<_>>>()
        })?;

    let mut report = ComparisonReport {
        scenario: executed
            .first()
            .map(|(_, _, log, _)| log.scenario.clone())
            .unwrap_or_default(),
        steps: config.steps,
        seeds: config.seeds.clone(),
        final_window: final_window(config.steps),
        schedulers: Vec::with_capacity(config.schedulers.len()),
    };
    for (sched_idx, scheduler) in config.schedulers.iter().enumerate() {
        // Seed order from the config keeps the report deterministic.
        let mut logs = Vec::new();
        let mut runs = Vec::new();
        for &seed in &config.seeds {
            let (_, _, log, traj_ref) = executed
                .iter()
                .find(|(s, sd, _, _)| *s == sched_idx && *sd == seed)
                .expect("every pair executed");
            logs.push(log.clone());
            runs.push(traj_ref.clone());
        }
        report.schedulers.push(scheduler_stats(
            &ids[sched_idx],
            &scheduler.label(),
            &logs,
            runs,
            config.steps,
        ));
    }

    let summary_path = out_dir.join("summary.json");
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&summary_path, text).map_err(|e| Error::io(&summary_path, e))?;
    Ok(report)
}

pub fn load_report(path: &Path) -> Result<ComparisonReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::TrajectoryParse {
        path: path.into(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Rebuild the report purely from persisted trajectories, using the summary
/// only as a manifest. Must equal the in-memory report.
pub fn recompute_from_disk(summary_path: &Path) -> Result<ComparisonReport> {
    let stored = load_report(summary_path)?;
    let dir = summary_path.parent().unwrap_or(Path::new("."));
    let mut recomputed = ComparisonReport {
        scenario: stored.scenario.clone(),
        steps: stored.steps,
        seeds: stored.seeds.clone(),
        final_window: stored.final_window,
        schedulers: Vec::with_capacity(stored.schedulers.len()),
    };
    for scheduler in &stored.schedulers {
        let mut logs = Vec::new();
        for traj_ref in &scheduler.runs {
            let log = if let Some(csv) = &traj_ref.csv {
                TrajectoryLog {
                    scenario: stored.scenario.clone(),
                    scheduler: scheduler.scheduler.clone(),
                    seed: traj_ref.seed,
                    records: emit::parse_csv_records(&dir.join(csv))?,
                }
            } else if let Some(json) = &traj_ref.json {
                emit::parse_json(&dir.join(json))?
            } else {
                return Err(Error::Domain(format!(
                    "trajectory for {} seed {} has no csv or json file",
                    scheduler.scheduler, traj_ref.seed
                )));
            };
            logs.push(log);
        }
        recomputed.schedulers.push(scheduler_stats(
            &scheduler.scheduler,
            &scheduler.label,
            &logs,
            scheduler.runs.clone(),
            stored.steps,
        ));
    }
    Ok(recomputed)
}
