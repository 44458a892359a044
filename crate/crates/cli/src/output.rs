//! Result files: `runs.csv`, `histogram_<metric>.csv`, `summary.json` and
//! optional `events_<run>.csv`.
//!
//! Every number is rounded to 9 significant digits and printed in its
//! shortest round-trip form, so identical batches give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use rto_sim_core::metrics::summarize_batch;
use rto_sim_core::{EventPayload, EventRecord, RunResult, Scenario};

/// `x` rounded to 9 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

/// Locale-independent decimal text of `x` at 9 significant digits.
pub fn fmt_num(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        // no negative zero in output files
        "0".into()
    } else {
        format!("{r}")
    }
}

fn json_num(x: f64) -> Value {
    let r = round_sig(x);
    if r.fract() == 0.0 && r.abs() < 1e15 {
        json!(r as i64)
    } else {
        json!(r)
    }
}

/// File-name-safe form of a metric or entity name.
pub fn file_token(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn runs_csv(results: &[RunResult], scenario: &Scenario) -> String {
    let names: Vec<String> = scenario.suppliers.iter().map(|s| file_token(&s.name)).collect();
    let mut header = vec!["run_index".to_string(), "terminal_cost".to_string()];
    for n in &names {
        header.extend([format!("V_{n}"), format!("u_{n}"), format!("d_{n}")]);
    }
    header.extend(["n_pr".into(), "n_hl".into()]);
    header.extend(names.iter().map(|n| format!("n_rfq_{n}")));
    header.extend(["n_po".into(), "in_flight".into(), "empty_draws".into()]);

    let mut out = header.join(",");
    out.push('\n');
    for r in results {
        let mut row = vec![r.run_index.to_string(), fmt_num(r.terminal_cost)];
        for c in &r.compliance {
            row.push(c.volume.to_string());
            row.push(c.utilization.map(fmt_num).unwrap_or_default());
            row.push(fmt_num(c.deviation));
        }
        row.push(r.counts.requisitions.to_string());
        row.push(r.counts.handled.to_string());
        row.extend(r.counts.rfq_responses.iter().map(u64::to_string));
        row.push(r.counts.orders.to_string());
        row.push(r.in_flight.to_string());
        row.push(r.empty_draws.to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn events_csv(log: &[EventRecord], scenario: &Scenario) -> String {
    let supplier = |s: rto_sim_core::SupplierId| scenario.suppliers[s.index()].name.clone();
    let product = |p: rto_sim_core::ProductId| scenario.catalog.product(p).name.clone();
    let mut out = String::from("time,kind,pr,supplier,detail\n");
    for rec in log {
        let detail = match &rec.payload {
            EventPayload::None => String::new(),
            EventPayload::Requisition(req) => req
                .included()
                .map(|(p, q)| format!("{}={q}", product(p)))
                .collect::<Vec<_>>()
                .join(" "),
            EventPayload::Handling(h) => {
                let rfq: Vec<String> = h.rfq_suppliers.iter().map(|&s| supplier(s)).collect();
                format!("rfq=[{}]", rfq.join(" "))
            }
            EventPayload::Quote(q) => q
                .rates
                .iter()
                .map(|&(p, r)| format!("{}@{}", product(p), fmt_num(r)))
                .collect::<Vec<_>>()
                .join(" "),
            EventPayload::Allocation(a) => {
                let mut s = a
                    .assignments
                    .iter()
                    .map(|x| {
                        let tag = if x.provenance.is_contract() { "contract" } else { "spot" };
                        format!(
                            "{}:{}x{}@{}/{tag}",
                            product(x.product),
                            supplier(x.supplier),
                            x.quantity,
                            fmt_num(x.unit_cost)
                        )
                    })
                    .collect::<Vec<_>>()
                    .join(" ");
                let _ = write!(s, " cost={}", fmt_num(a.total_cost()));
                s
            }
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_num(rec.time),
            rec.kind.as_str(),
            rec.pr.map(|p| p.to_string()).unwrap_or_default(),
            rec.supplier.map(supplier).unwrap_or_default(),
            detail
        );
    }
    out
}

/// Identifies a batch in `summary.json`.
#[derive(Debug, Clone)]
pub struct BatchInfo {
    pub runs: u64,
    pub seed: u64,
}

/// Batch summaries and histograms of every metric.
pub struct BatchReport {
    pub summary: Value,
    pub histograms: Vec<(String, String)>,
}

pub fn batch_report(results: &[RunResult], scenario: &Scenario, info: &BatchInfo, bins: usize) -> BatchReport {
    let mut metrics = Map::new();
    let mut histograms = Vec::new();
    for (name, s) in summarize_batch(results, scenario, bins) {
        let mut q = Map::new();
        for &(level, v) in &s.quantiles {
            q.insert(format!("p{:02}", (level * 100.0).round() as u32), json_num(v));
        }
        metrics.insert(
            name.clone(),
            json!({
                "count": s.count,
                "mean": json_num(s.mean),
                "std_dev": json_num(s.std_dev),
                "min": json_num(s.min),
                "max": json_num(s.max),
                "quantiles": q,
            }),
        );
        let mut csv = String::from("bin_left,bin_right,count\n");
        for (l, r, c) in s.histogram.rows() {
            let _ = writeln!(csv, "{},{},{c}", fmt_num(l), fmt_num(r));
        }
        histograms.push((format!("histogram_{}.csv", file_token(&name)), csv));
    }
    let summary = json!({
        "runs": info.runs,
        "seed": info.seed,
        "policy": scenario.policy.kind.as_str(),
        "competition_slope": json_num(scenario.spot.competition_slope),
        "po_overhead": json_num(scenario.policy.po_overhead),
        "metrics": metrics,
    });
    BatchReport { summary, histograms }
}

/// Collects files in a hidden staging directory and moves them into place
/// only on [`Staging::commit`]. Dropping without committing removes
/// everything written so far.
pub struct Staging {
    target: PathBuf,
    dir: PathBuf,
    created_target: bool,
    files: Vec<PathBuf>,
    committed: bool,
}

impl Staging {
    pub fn new(target: &Path) -> io::Result<Self> {
        let created_target = !target.exists();
        fs::create_dir_all(target)?;
        let dir = target.join(format!(".rto-sim-staging-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir(&dir)?;
        Ok(Self {
            target: target.to_path_buf(),
            dir,
            created_target,
            files: Vec::new(),
            committed: false,
        })
    }

    /// Writes `contents` to `relative` (which may contain subdirectories).
    pub fn write(&mut self, relative: impl AsRef<Path>, contents: &str) -> io::Result<()> {
        let relative = relative.as_ref();
        let path = self.dir.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        self.files.push(relative.to_path_buf());
        Ok(())
    }

    pub fn commit(mut self) -> io::Result<()> {
        for rel in &self.files {
            let dest = self.target.join(rel);
            if let Some(parent) = dest.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::rename(self.dir.join(rel), dest)?;
        }
        fs::remove_dir_all(&self.dir)?;
        self.committed = true;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
            if self.created_target {
                // only succeeds if nothing else was put there meanwhile
                let _ = fs::remove_dir(&self.target);
            }
        }
    }
}
