//! Command-line surface.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use rto_sim_core::metrics::Summary;
use rto_sim_core::{run_batch, RunOptions, RunResult, Scenario};

use crate::output::{batch_report, events_csv, file_token, fmt_num, runs_csv, BatchInfo, Staging};
use crate::schema::{load_scenario, LoadedScenario, PolicyName};

/// Environment variable consulted for the master seed when neither the
/// command line nor the scenario file sets one.
pub const SEED_ENV: &str = "RTO_SIM_SEED";

const DEFAULT_OUT: &str = "rto-sim-out";

#[derive(Debug, Parser)]
#[command(
    name = "rto-sim",
    version,
    about = "Monte Carlo simulation of request-to-order procurement"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a batch of replications and write result files.
    Run(RunArgs),
    /// Run a policy x competition-slope grid under common random numbers.
    Compare(CompareArgs),
    /// Check a scenario file and exit.
    Validate { scenario: PathBuf },
}

/// Settings shared by `run` and `compare`. Each one overrides the scenario file.
#[derive(Debug, Clone, Default, Args)]
pub struct BatchArgs {
    /// Number of replications.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub runs: Option<u64>,
    /// Master seed (falls back to the file, then RTO_SIM_SEED, then 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub parallelism: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Histogram bin count.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub bins: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    pub scenario: PathBuf,
    #[command(flatten)]
    pub batch: BatchArgs,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyName>,
    #[arg(long)]
    pub competition_slope: Option<f64>,
    /// Also write one event log per run.
    #[arg(long)]
    pub export_events: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    pub scenario: PathBuf,
    #[command(flatten)]
    pub batch: BatchArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "naive,dynamic")]
    pub policies: Vec<PolicyName>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.10")]
    pub slopes: Vec<f64>,
}

/// Batch settings after applying flags > file > defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub runs: u64,
    pub seed: u64,
    pub parallelism: usize,
    pub out: PathBuf,
    pub bins: usize,
    pub export_events: bool,
}

pub fn resolve_seed(flag: Option<u64>, file: Option<u64>, env: Option<&str>) -> Result<u64> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match env {
        Some(text) => text
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV}={text:?} is not an unsigned integer")),
        None => Ok(0),
    }
}

pub fn resolve(args: &BatchArgs, loaded: &LoadedScenario, export_events: bool) -> Result<Resolved> {
    let env = std::env::var(SEED_ENV).ok();
    let default_parallelism = std::thread::available_parallelism().map_or(1, |n| n.get());
    Ok(Resolved {
        runs: args.runs.unwrap_or(loaded.runs.count),
        seed: resolve_seed(args.seed, loaded.runs.seed, env.as_deref())?,
        parallelism: args
            .parallelism
            .map(|p| p as usize)
            .or(loaded.runs.parallelism)
            .unwrap_or(default_parallelism),
        out: args
            .out
            .clone()
            .or_else(|| loaded.output.directory.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        bins: args.bins.map_or(loaded.output.histogram_bins, |b| b as usize),
        export_events: export_events || loaded.output.export_events,
    })
}

fn load(path: &Path) -> Result<LoadedScenario> {
    load_scenario(path).with_context(|| format!("invalid scenario {}", path.display()))
}

fn simulate(scenario: &Scenario, r: &Resolved) -> Result<(Vec<RunResult>, f64)> {
    let options = RunOptions {
        record_log: r.export_events,
        ..RunOptions::default()
    };
    let batch = run_batch(scenario, r.runs, r.seed, r.parallelism, &options)?;
    Ok((batch.runs, batch.elapsed_secs))
}

/// Stages every result file of one batch under `prefix`.
fn stage_batch(
    st: &mut Staging,
    prefix: &Path,
    scenario: &Scenario,
    results: &[RunResult],
    r: &Resolved,
) -> Result<Vec<(String, Summary)>> {
    st.write(prefix.join("runs.csv"), &runs_csv(results, scenario))?;
    let info = BatchInfo {
        runs: r.runs,
        seed: r.seed,
    };
    let report = batch_report(results, scenario, &info, r.bins);
    let mut json = serde_json::to_string_pretty(&report.summary)?;
    json.push('\n');
    st.write(prefix.join("summary.json"), &json)?;
    for (name, csv) in &report.histograms {
        st.write(prefix.join(name), csv)?;
    }
    if r.export_events {
        for res in results {
            if let Some(log) = &res.log {
                st.write(
                    prefix.join(format!("events_{}.csv", res.run_index)),
                    &events_csv(log, scenario),
                )?;
            }
        }
    }
    Ok(rto_sim_core::summarize_batch(results, scenario, r.bins))
}

fn mean_utilization(results: &[RunResult], scenario: &Scenario) -> Vec<(String, f64)> {
    scenario
        .suppliers
        .iter()
        .enumerate()
        .filter(|(s, _)| results[0].compliance[*s].utilization.is_some())
        .map(|(s, sup)| {
            let total: f64 = results.iter().filter_map(|r| r.compliance[s].utilization).sum();
            (sup.name.clone(), total / results.len() as f64)
        })
        .collect()
}

pub fn cmd_run(args: &RunArgs) -> Result<String> {
    let mut loaded = load(&args.scenario)?;
    if let Some(p) = args.policy {
        loaded.scenario.policy.kind = p.into();
    }
    if let Some(slope) = args.competition_slope {
        loaded.scenario.spot.competition_slope = slope;
    }
    let scenario = rto_sim_core::validate_scenario(loaded.scenario.clone())?;
    let r = resolve(&args.batch, &loaded, args.export_events)?;

    let mut st = Staging::new(&r.out).with_context(|| format!("cannot create {}", r.out.display()))?;
    let (results, elapsed) = simulate(&scenario, &r)?;
    let summaries = stage_batch(&mut st, Path::new(""), &scenario, &results, &r)?;
    st.commit()
        .with_context(|| format!("cannot write results to {}", r.out.display()))?;

    let mut line = format!(
        "{} runs, policy {}, slope {}: mean cost {}",
        r.runs,
        scenario.policy.kind.as_str(),
        fmt_num(scenario.spot.competition_slope),
        fmt_num(summaries[0].1.mean)
    );
    for (name, u) in mean_utilization(&results, &scenario) {
        line.push_str(&format!(", mean utilization {name} {}", fmt_num(u)));
    }
    line.push_str(&format!(" ({elapsed:.2}s)"));
    Ok(line)
}

/// Directory name of one grid cell.
pub fn cell_name(policy: PolicyName, slope: f64) -> String {
    let p = match policy {
        PolicyName::Naive => "naive",
        PolicyName::Dynamic => "dynamic",
    };
    format!("{p}_slope_{}", file_token(&fmt_num(slope)))
}

pub fn cmd_compare(args: &CompareArgs) -> Result<String> {
    let loaded = load(&args.scenario)?;
    let cells: Vec<(PolicyName, f64)> = args
        .policies
        .iter()
        .flat_map(|&p| args.slopes.iter().map(move |&s| (p, s)))
        .collect();
    if cells.len() < 2 {
        bail!(
            "a comparison needs at least two (policy, slope) cells, got {}",
            cells.len()
        );
    }
    let r = resolve(&args.batch, &loaded, false)?;
    let mut st = Staging::new(&r.out).with_context(|| format!("cannot create {}", r.out.display()))?;

    let mut header: Vec<String> = [
        "cell",
        "policy",
        "competition_slope",
        "mean_cost",
        "median_cost",
        "sd_cost",
    ]
    .map(String::from)
    .to_vec();
    let mut rows = Vec::new();
    let mut dirs: Vec<String> = Vec::new();
    for &(policy, slope) in &cells {
        let base = cell_name(policy, slope);
        let mut dir = base.clone();
        let mut k = 1;
        while dirs.contains(&dir) {
            k += 1;
            dir = format!("{base}_{k}");
        }
        dirs.push(dir.clone());
        let mut scenario = loaded.scenario.clone();
        scenario.policy.kind = policy.into();
        scenario.spot.competition_slope = slope;
        let scenario = rto_sim_core::validate_scenario(scenario)?;
        // every cell shares the master seed, hence the demand and noise streams
        let (results, _) = simulate(&scenario, &r)?;
        let summaries = stage_batch(&mut st, Path::new(&dir), &scenario, &results, &r)?;
        let cost = &summaries[0].1;
        let mut row = vec![
            dir,
            scenario.policy.kind.as_str().to_string(),
            fmt_num(slope),
            fmt_num(cost.mean),
            fmt_num(cost.median()),
            fmt_num(cost.std_dev),
        ];
        for (name, s) in summaries.iter().filter(|(n, _)| n.starts_with("utilization_")) {
            if rows.is_empty() {
                let supplier = name.trim_start_matches("utilization_");
                header.push(format!("mean_u_{}", file_token(supplier)));
                header.push(format!("median_u_{}", file_token(supplier)));
            }
            row.push(fmt_num(s.mean));
            row.push(fmt_num(s.median()));
        }
        rows.push(row);
    }
    let mut csv = header.join(",");
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    st.write("comparison.csv", &csv)?;
    st.commit()
        .with_context(|| format!("cannot write results to {}", r.out.display()))?;
    Ok(render_table(&header, &rows))
}

fn render_table(header: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|i| {
            rows.iter()
                .map(|r| r[i].len())
                .chain([header[i].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(header);
    for r in rows {
        out.push('\n');
        out.push_str(&line(r));
    }
    out
}

pub fn cmd_validate(path: &Path) -> Result<String> {
    let loaded = load(path)?;
    let s = &loaded.scenario;
    Ok(format!(
        "{}: ok ({} vessels, {} products in {} categories, {} suppliers, {} contracts, horizon {} days)",
        path.display(),
        s.vessels.len(),
        s.catalog.products.len(),
        s.catalog.categories.len(),
        s.suppliers.len(),
        s.contracts.len(),
        fmt_num(s.horizon)
    ))
}

pub fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Validate { scenario } => cmd_validate(scenario),
    }
}
