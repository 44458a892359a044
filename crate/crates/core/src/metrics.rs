//! Cost, contract compliance and counting-process bookkeeping.

use crate::domain::{EventLog, Scenario, SupplierId};
use crate::policy::Allocation;

/// Quantile levels reported by [`Summary`].
pub const QUANTILE_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.50, 0.75, 0.95, 0.99];

pub const DEFAULT_HISTOGRAM_BINS: usize = 100;

/// Contract volume allocated per supplier against its commitment.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplianceLedger {
    commitments: Vec<u32>,
    volumes: Vec<u64>,
}

impl ComplianceLedger {
    pub fn new(commitments: Vec<u32>) -> Self {
        let volumes = vec![0; commitments.len()];
        Self { commitments, volumes }
    }

    pub fn for_scenario(scenario: &Scenario) -> Self {
        Self::new(scenario.commitments())
    }

    pub fn commitment(&self, supplier: SupplierId) -> u32 {
        self.commitments[supplier.index()]
    }

    pub fn volume(&self, supplier: SupplierId) -> u64 {
        self.volumes[supplier.index()]
    }

    /// Books `allocation` and returns its cost. Only contract-priced items
    /// count toward a supplier's volume.
    pub fn record_allocation(&mut self, allocation: &Allocation) -> f64 {
        for a in allocation.assignments.iter().filter(|a| a.provenance.is_contract()) {
            self.volumes[a.supplier.index()] += u64::from(a.quantity);
        }
        allocation.total_cost()
    }

    pub fn compliance(&self) -> Vec<SupplierCompliance> {
        self.commitments
            .iter()
            .zip(&self.volumes)
            .map(|(&k, &v)| SupplierCompliance::new(v, k))
            .collect()
    }
}

/// `V/K`, absent when nothing was committed.
pub fn utilization(volume: u64, commitment: u32) -> Option<f64> {
    (commitment > 0).then(|| volume as f64 / f64::from(commitment))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupplierCompliance {
    pub commitment: u32,
    pub volume: u64,
    pub utilization: Option<f64>,
    /// Signed `V - K`.
    pub deviation: f64,
}

impl SupplierCompliance {
    pub fn new(volume: u64, commitment: u32) -> Self {
        Self {
            commitment,
            volume,
            utilization: utilization(volume, commitment),
            deviation: volume as f64 - f64::from(commitment),
        }
    }
}

/// Terminal values of the counting processes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Counts {
    pub requisitions: u64,
    pub handled: u64,
    /// RFQ responses per supplier.
    pub rfq_responses: Vec<u64>,
    pub orders: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run_index: u64,
    /// Cost of all completed requisitions, overheads included.
    pub terminal_cost: f64,
    pub compliance: Vec<SupplierCompliance>,
    pub counts: Counts,
    /// Requisitions still in the pipeline at the horizon.
    pub in_flight: u64,
    /// Demand triggers that drew no items.
    pub empty_draws: u64,
    /// Per-order cost increments in order of issue.
    pub cost_deltas: Vec<f64>,
    pub log: Option<EventLog>,
}

/// Distribution summary of one metric over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (zero for a single value).
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
    /// `(level, value)` for each of [`QUANTILE_LEVELS`].
    pub quantiles: Vec<(f64, f64)>,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// Bin edges, one more than `counts`.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Equal-width bins over `[min, max]`; the last bin is closed.
    pub fn build(values: &[f64], bins: usize, min: f64, max: f64) -> Self {
        let bins = bins.max(1);
        let width = (max - min) / bins as f64;
        let edges: Vec<f64> = (0..=bins)
            .map(|i| if i == bins { max } else { min + width * i as f64 })
            .collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let k = if width > 0.0 {
                (((v - min) / width) as usize).min(bins - 1)
            } else {
                0
            };
            counts[k] += 1;
        }
        Self { edges, counts }
    }

    /// Bins `(left, right, count)`.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (self.edges[i], self.edges[i + 1], c))
    }

    /// Local maxima of the counts after a centred moving average over
    /// `window` bins. A plateau counts once.
    pub fn modes(&self, window: usize) -> usize {
        let n = self.counts.len();
        let half = window / 2;
        let smooth: Vec<f64> = (0..n)
            .map(|i| {
                let lo = i.saturating_sub(half);
                let hi = (i + half + 1).min(n);
                self.counts[lo..hi].iter().sum::<u64>() as f64 / (hi - lo) as f64
            })
            .collect();
        let mut modes = 0;
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && smooth[j + 1] == smooth[i] {
                j += 1;
            }
            let left_lower = i == 0 || smooth[i - 1] < smooth[i];
            let right_lower = j + 1 == n || smooth[j + 1] < smooth[i];
            if left_lower && right_lower && smooth[i] > 0.0 {
                modes += 1;
            }
            i = j + 1;
        }
        modes
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Summary {
    pub fn of(values: &[f64], bins: usize) -> Self {
        assert!(!values.is_empty(), "summary of an empty sample");
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let (min, max) = (sorted[0], sorted[n - 1]);
        Self {
            count: n,
            mean,
            std_dev: var.sqrt(),
            min,
            max,
            quantiles: QUANTILE_LEVELS
                .iter()
                .map(|&p| (p, quantile_sorted(&sorted, p)))
                .collect(),
            histogram: Histogram::build(values, bins, min, max),
        }
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5).expect("median is reported")
    }

    pub fn quantile(&self, level: f64) -> Option<f64> {
        self.quantiles
            .iter()
            .find(|(p, _)| (p - level).abs() < 1e-12)
            .map(|&(_, v)| v)
    }
}

/// Per-run values of every reported metric, in a fixed order.
pub fn metric_series(results: &[RunResult], scenario: &Scenario) -> Vec<(String, Vec<f64>)> {
    let mut out = vec![(
        "terminal_cost".to_string(),
        results.iter().map(|r| r.terminal_cost).collect(),
    )];
    for (s, supplier) in scenario.suppliers.iter().enumerate() {
        let commitment = results.first().map_or(0, |r| r.compliance[s].commitment);
        if commitment == 0 {
            continue;
        }
        out.push((
            format!("utilization_{}", supplier.name),
            results
                .iter()
                .map(|r| r.compliance[s].utilization.unwrap_or(0.0))
                .collect(),
        ));
        out.push((
            format!("deviation_{}", supplier.name),
            results.iter().map(|r| r.compliance[s].deviation).collect(),
        ));
    }
    out.push((
        "n_pr".into(),
        results.iter().map(|r| r.counts.requisitions as f64).collect(),
    ));
    out.push(("n_po".into(), results.iter().map(|r| r.counts.orders as f64).collect()));
    out.push(("in_flight".into(), results.iter().map(|r| r.in_flight as f64).collect()));
    out.push((
        "empty_draws".into(),
        results.iter().map(|r| r.empty_draws as f64).collect(),
    ));
    out
}

/// Summaries of every metric in [`metric_series`].
pub fn summarize_batch(results: &[RunResult], scenario: &Scenario, bins: usize) -> Vec<(String, Summary)> {
    metric_series(results, scenario)
        .into_iter()
        .map(|(name, values)| {
            let s = Summary::of(&values, bins);
            (name, s)
        })
        .collect()
}
