//! Brute-force references for the simulator's test suites.
//!
//! Nothing in here depends on `rto-sim-core`: every routine is written from
//! the closed-form definition (or by plain enumeration) so that it can be
//! used to check the production code paths without sharing any of them.

use thiserror::Error;

/// Largest number of assignments [`exhaustive_allocation`] will enumerate.
pub const MAX_ASSIGNMENTS: u64 = 1 << 20;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance has {0} assignments, more than the enumeration bound")]
    TooLarge(u64),
    #[error("item {0} has no admissible supplier")]
    Infeasible(usize),
    #[error("cost matrix and quantity vector disagree in length")]
    Shape,
}

/// A small allocation problem: `costs[item][supplier]` is the unit cost of
/// buying the item from that supplier, `None` when the supplier may not
/// receive the item.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleInstance {
    pub costs: Vec<Vec<Option<f64>>>,
    pub quantities: Vec<u32>,
    pub overhead: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub min_cost: f64,
    /// Every assignment (supplier index per item) attaining `min_cost`.
    pub minimizers: Vec<Vec<usize>>,
}

impl OracleSolution {
    /// Minimizers that use the fewest distinct suppliers.
    pub fn fewest_supplier_minimizers(&self) -> Vec<&Vec<usize>> {
        let fewest = self.minimizers.iter().map(|a| distinct(a)).min().unwrap_or(0);
        self.minimizers.iter().filter(|a| distinct(a) == fewest).collect()
    }
}

fn distinct(assignment: &[usize]) -> usize {
    let mut seen: Vec<usize> = assignment.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Total cost of one assignment: unit cost times quantity for every item,
/// plus `overhead` for every supplier beyond the first.
pub fn assignment_cost(instance: &OracleInstance, assignment: &[usize]) -> Option<f64> {
    let mut total = 0.0;
    for (item, &s) in assignment.iter().enumerate() {
        let unit = instance.costs[item][s]?;
        total += unit * f64::from(instance.quantities[item]);
    }
    let used = distinct(assignment);
    Some(total + instance.overhead * used.saturating_sub(1) as f64)
}

/// Enumerates every supplier assignment and returns the minimum total cost
/// together with all assignments that reach it (within `1e-9`).
pub fn exhaustive_allocation(instance: &OracleInstance) -> Result<OracleSolution, OracleError> {
    let items = instance.costs.len();
    if items != instance.quantities.len() {
        return Err(OracleError::Shape);
    }
    let suppliers = instance.costs.first().map_or(0, Vec::len);
    for (i, row) in instance.costs.iter().enumerate() {
        if row.len() != suppliers {
            return Err(OracleError::Shape);
        }
        if row.iter().all(Option::is_none) {
            return Err(OracleError::Infeasible(i));
        }
    }
    let count = (suppliers as u64).checked_pow(items as u32).unwrap_or(u64::MAX);
    if count > MAX_ASSIGNMENTS {
        return Err(OracleError::TooLarge(count));
    }

    let mut best = f64::INFINITY;
    let mut minimizers: Vec<Vec<usize>> = Vec::new();
    let mut assignment = vec![0usize; items];
    for code in 0..count {
        let mut rest = code;
        for slot in assignment.iter_mut() {
            *slot = (rest % suppliers as u64) as usize;
            rest /= suppliers as u64;
        }
        let Some(cost) = assignment_cost(instance, &assignment) else {
            continue;
        };
        if cost < best - 1e-9 {
            best = cost;
            minimizers.clear();
            minimizers.push(assignment.clone());
        } else if (cost - best).abs() <= 1e-9 {
            minimizers.push(assignment.clone());
        }
    }
    Ok(OracleSolution {
        min_cost: best,
        minimizers,
    })
}

/// Weibull distribution function `1 - exp(-(x/scale)^shape)`.
pub fn weibull_cdf(shape: f64, scale: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    1.0 - (-(x / scale).powf(shape)).exp()
}

/// Lanczos approximation of the gamma function (g = 7, n = 9).
pub fn gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Mean of a Weibull(shape, scale) variate.
pub fn weibull_mean(shape: f64, scale: f64) -> f64 {
    scale * gamma(1.0 + 1.0 / shape)
}

/// One-sample Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let lo = f - i as f64 / n;
            let hi = (i + 1) as f64 / n - f;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value `sqrt(-ln(alpha/2)/2) / sqrt(n)`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Distribution function of the first event time after `start` for a
/// point process with intensity `hazard(elapsed, absolute_time)`, obtained
/// by composite Simpson quadrature of the cumulative hazard on `[0, x]`.
///
/// The integral is taken in the variable `w` with `elapsed = x * w^4`, which
/// turns an integrable singularity at the origin (no stronger than
/// `elapsed^-0.75`) into a smooth integrand vanishing at `w = 0`.
pub fn first_event_cdf(hazard: impl Fn(f64, f64) -> f64, start: f64, x: f64, panels: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let panels = panels.max(2) & !1;
    let h = 1.0 / panels as f64;
    let integrand = |w: f64| {
        if w == 0.0 {
            return 0.0;
        }
        let u = x * w.powi(4);
        hazard(u, start + u) * 4.0 * x * w.powi(3)
    };
    let mut sum = integrand(0.0) + integrand(1.0);
    for k in 1..panels {
        let weight = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += weight * integrand(k as f64 * h);
    }
    1.0 - (-(sum * h / 3.0)).exp()
}

/// Renewal function `E[N(t)]` on the grid `0, step, 2*step, ..`, up to
/// `horizon`, for inter-event distribution `cdf`, by trapezoidal
/// discretisation of `M(t) = F(t) + integral of M(t - x) dF(x)`.
pub fn renewal_function(cdf: impl Fn(f64) -> f64, horizon: f64, step: f64) -> Vec<f64> {
    let n = (horizon / step).round() as usize;
    let f: Vec<f64> = (0..=n).map(|i| cdf(i as f64 * step)).collect();
    let df: Vec<f64> = (1..=n).map(|k| f[k] - f[k - 1]).collect();
    let mut m = vec![0.0; n + 1];
    for i in 1..=n {
        // k = 1 term involves m[i] itself; solve for it.
        let mut acc = f[i] + 0.5 * df[0] * m[i - 1];
        for k in 2..=i {
            acc += df[k - 1] * 0.5 * (m[i - k] + m[i - k + 1]);
        }
        m[i] = acc / (1.0 - 0.5 * df[0]);
    }
    m
}

/// Exponential variate by inversion of a supplied uniform.
pub fn exponential_by_inversion(mean: f64, u: f64) -> f64 {
    -mean * u.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_item_takes_cheaper_supplier() {
        let inst = OracleInstance {
            costs: vec![vec![Some(3.0), Some(7.0)]],
            quantities: vec![1],
            overhead: 10.0,
        };
        let sol = exhaustive_allocation(&inst).unwrap();
        assert_eq!(sol.min_cost, 3.0);
        assert_eq!(sol.minimizers, vec![vec![0]]);
    }

    #[test]
    fn split_or_consolidate_depends_on_overhead() {
        let mut inst = OracleInstance {
            costs: vec![vec![Some(5.0), Some(20.0)], vec![Some(20.0), Some(5.0)]],
            quantities: vec![1, 1],
            overhead: 10.0,
        };
        let sol = exhaustive_allocation(&inst).unwrap();
        assert_eq!(sol.min_cost, 20.0);
        assert_eq!(sol.minimizers, vec![vec![0, 1]]);

        inst.overhead = 25.0;
        let sol = exhaustive_allocation(&inst).unwrap();
        assert_eq!(sol.min_cost, 25.0);
        // split costs 35; the two consolidations tie at 25
        assert_eq!(sol.minimizers, vec![vec![0, 0], vec![1, 1]]);
    }

    #[test]
    fn inadmissible_pairs_are_skipped() {
        let inst = OracleInstance {
            costs: vec![vec![None, Some(4.0)]],
            quantities: vec![2],
            overhead: 0.0,
        };
        assert_eq!(exhaustive_allocation(&inst).unwrap().min_cost, 8.0);
        let bad = OracleInstance {
            costs: vec![vec![None, None]],
            quantities: vec![2],
            overhead: 0.0,
        };
        assert_eq!(exhaustive_allocation(&bad), Err(OracleError::Infeasible(0)));
    }

    #[test]
    fn size_bound_is_enforced() {
        let inst = OracleInstance {
            costs: vec![vec![Some(1.0); 5]; 9],
            quantities: vec![1; 9],
            overhead: 0.0,
        };
        assert!(matches!(exhaustive_allocation(&inst), Err(OracleError::TooLarge(_))));
    }

    #[test]
    fn weibull_cdf_values() {
        assert_eq!(weibull_cdf(2.0, 10.0, 0.0), 0.0);
        assert!((weibull_cdf(2.0, 10.0, 1e6) - 1.0).abs() < 1e-15);
        assert!((weibull_cdf(2.0, 10.0, 10.0) - 0.632_120_558_8).abs() < 1e-9);
    }

    #[test]
    fn gamma_known_values() {
        assert!((gamma(1.5) - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-13);
        assert!((gamma(5.0) - 24.0).abs() < 1e-10);
        assert!((weibull_mean(2.0, 10.0) - 8.862_269_254_5).abs() < 1e-9);
    }

    #[test]
    fn renewal_function_of_exponential_is_linear() {
        let m = renewal_function(|x| 1.0 - (-x / 4.0).exp(), 40.0, 0.01);
        assert!((m.last().unwrap() - 10.0).abs() < 1e-3);
    }

    #[test]
    fn quadrature_cdf_matches_weibull_closed_form() {
        let (a, b) = (2.0_f64, 10.0_f64);
        let hz = |e: f64, _t: f64| a / b * (e / b).powf(a - 1.0);
        for x in [1.0, 5.0, 10.0, 25.0] {
            let q = first_event_cdf(hz, 3.0, x, 2000);
            assert!((q - weibull_cdf(a, b, x)).abs() < 1e-9);
        }
    }

    #[test]
    fn ks_statistic_of_perfect_grid_is_small() {
        let n = 1000;
        let samples: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&samples, |x| x.clamp(0.0, 1.0));
        assert!(d <= 0.5 / n as f64 + 1e-12);
        assert!((ks_critical_value(10_000, 0.01) - 0.016_276).abs() < 1e-5);
    }
}
