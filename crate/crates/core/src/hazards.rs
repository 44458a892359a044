//! Intensity functions and exact sampling of next-event times.
//!
//! A [`HazardSpec`] describes a multiplicative intensity
//! `baseline(elapsed) * exp(sum_k coefficient_k * x_k(t))` where `elapsed`
//! is the time since the last event of the process and `x_k` are bounded
//! periodic covariates evaluated at absolute time `t`.

use std::f64::consts::TAU;

use rand::Rng;
use thiserror::Error;

/// Lookahead window used by the thinning sampler, as a fraction of the
/// Weibull scale.
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Baseline {
    /// Constant rate in events per day.
    Constant { rate: f64 },
    /// `shape/scale * (elapsed/scale)^(shape-1)`.
    Weibull { shape: f64, scale: f64 },
}

/// `amplitude * cos(2*pi*t/period + phase)`, entering the intensity with
/// weight `coefficient`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicCovariate {
    pub amplitude: f64,
    pub period: f64,
    pub phase: f64,
    pub coefficient: f64,
}

impl PeriodicCovariate {
    pub fn value(&self, t: f64) -> f64 {
        self.amplitude * (TAU * t / self.period + self.phase).cos()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HazardSpec {
    pub baseline: Baseline,
    pub covariates: Vec<PeriodicCovariate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum HazardError {
    #[error("hazard diverges at zero elapsed time for Weibull shape {0} < 1")]
    DivergentAtOrigin(f64),
    #[error("elapsed time {0} is negative")]
    NegativeElapsed(f64),
}

impl HazardSpec {
    pub fn constant(rate: f64) -> Self {
        Self {
            baseline: Baseline::Constant { rate },
            covariates: Vec::new(),
        }
    }

    pub fn weibull(shape: f64, scale: f64) -> Self {
        Self {
            baseline: Baseline::Weibull { shape, scale },
            covariates: Vec::new(),
        }
    }

    pub fn with_covariate(mut self, covariate: PeriodicCovariate) -> Self {
        self.covariates.push(covariate);
        self
    }

    pub fn check(&self) -> Result<(), &'static str> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        match self.baseline {
            Baseline::Constant { rate } if !positive(rate) => return Err("constant rate must be positive"),
            Baseline::Weibull { shape, scale } if !(positive(shape) && positive(scale)) => {
                return Err("Weibull shape and scale must be positive")
            }
            _ => {}
        }
        for c in &self.covariates {
            if !positive(c.period) {
                return Err("covariate period must be positive");
            }
            if !(c.amplitude.is_finite() && c.phase.is_finite() && c.coefficient.is_finite()) {
                return Err("covariate terms must be finite");
            }
        }
        Ok(())
    }

    pub fn baseline_value(&self, elapsed: f64) -> Result<f64, HazardError> {
        if elapsed < 0.0 {
            return Err(HazardError::NegativeElapsed(elapsed));
        }
        Ok(match self.baseline {
            Baseline::Constant { rate } => rate,
            Baseline::Weibull { shape, scale } => {
                if elapsed == 0.0 {
                    if shape < 1.0 {
                        return Err(HazardError::DivergentAtOrigin(shape));
                    }
                    if shape > 1.0 {
                        return Ok(0.0);
                    }
                }
                shape / scale * (elapsed / scale).powf(shape - 1.0)
            }
        })
    }

    /// `exp(sum coefficient * x(t))`.
    pub fn modulation(&self, t: f64) -> f64 {
        self.covariates
            .iter()
            .map(|c| c.coefficient * c.value(t))
            .sum::<f64>()
            .exp()
    }

    /// Upper bound of [`Self::modulation`] over all `t`.
    pub fn modulation_bound(&self) -> f64 {
        self.covariates
            .iter()
            .map(|c| (c.coefficient * c.amplitude).abs())
            .sum::<f64>()
            .exp()
    }
}

/// Intensity at `t_abs`, `elapsed` days after the last event.
pub fn hazard_value(spec: &HazardSpec, elapsed: f64, t_abs: f64) -> Result<f64, HazardError> {
    Ok(spec.baseline_value(elapsed)? * spec.modulation(t_abs))
}

/// Uniform draw on `(0, 1]`, safe to take the logarithm of.
#[inline]
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Inter-event gap of a constant-rate process from a uniform `u` in `(0, 1]`.
#[inline]
pub fn exponential_gap(rate: f64, u: f64) -> f64 {
    -u.ln() / rate
}

/// Exponential waiting time with the given mean from a uniform `u` in `(0, 1]`.
#[inline]
pub fn exponential_delay_from_uniform(mean: f64, u: f64) -> f64 {
    // -0.0 for u == 1
    (-mean * u.ln()).max(0.0)
}

pub fn sample_exponential_delay<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    exponential_delay_from_uniform(mean, open_unit(rng))
}

/// Next event time in `(t_last, horizon]` using the default thinning window.
pub fn sample_gap<R: Rng + ?Sized>(spec: &HazardSpec, t_last: f64, horizon: f64, rng: &mut R) -> Option<f64> {
    sample_gap_with(spec, t_last, horizon, DEFAULT_WINDOW_FRACTION, rng)
}

/// Next event time in `(t_last, horizon]` for a process whose clock was
/// reset at `t_last`, or `None` when no event occurs before the horizon.
///
/// Constant intensities are sampled by inversion. Everything else is
/// sampled by thinning: candidates come from a dominating process and are
/// accepted with probability `intensity / bound`. Increasing (or flat)
/// Weibull baselines are bounded piecewise over windows of
/// `window_fraction * scale` days; decreasing ones, which blow up at the
/// origin, are dominated by the baseline itself scaled by the covariate
/// bound and sampled through its closed-form cumulative hazard.
pub fn sample_gap_with<R: Rng + ?Sized>(
    spec: &HazardSpec,
    t_last: f64,
    horizon: f64,
    window_fraction: f64,
    rng: &mut R,
) -> Option<f64> {
    if t_last >= horizon {
        return None;
    }
    let bound_mod = spec.modulation_bound();
    match spec.baseline {
        Baseline::Constant { rate } if spec.covariates.is_empty() => {
            let t = t_last + exponential_gap(rate, open_unit(rng));
            (t <= horizon).then_some(t)
        }
        Baseline::Constant { rate } => {
            let bound = rate * bound_mod;
            let mut t = t_last;
            loop {
                t += exponential_gap(bound, open_unit(rng));
                if t > horizon {
                    return None;
                }
                let lam = rate * spec.modulation(t);
                assert_dominated(lam, bound);
                if rng.random::<f64>() * bound < lam {
                    return Some(t);
                }
            }
        }
        Baseline::Weibull { shape, scale } if shape >= 1.0 => {
            let width = window_fraction * scale;
            let mut t = t_last;
            loop {
                let window_end = (t + width).min(horizon);
                // increasing baseline: its window maximum sits at the right edge
                let bound = spec
                    .baseline_value(window_end - t_last)
                    .expect("elapsed is non-negative")
                    * bound_mod;
                let candidate = if bound > 0.0 {
                    t + exponential_gap(bound, open_unit(rng))
                } else {
                    f64::INFINITY
                };
                if candidate > window_end {
                    if window_end >= horizon {
                        return None;
                    }
                    t = window_end;
                    continue;
                }
                let lam = hazard_value(spec, candidate - t_last, candidate).expect("elapsed is non-negative");
                assert_dominated(lam, bound);
                if rng.random::<f64>() * bound < lam {
                    return Some(candidate);
                }
                t = candidate;
            }
        }
        Baseline::Weibull { shape, scale } => {
            // Dominating intensity bound_mod * baseline(elapsed) has
            // cumulative bound_mod * (elapsed/scale)^shape.
            let mut cum = 0.0;
            loop {
                cum += exponential_gap(1.0, open_unit(rng)) / bound_mod;
                let elapsed = scale * cum.powf(1.0 / shape);
                let t = t_last + elapsed;
                if t > horizon {
                    return None;
                }
                let ratio = spec.modulation(t) / bound_mod;
                assert_dominated(ratio, 1.0);
                if rng.random::<f64>() < ratio {
                    return Some(t);
                }
            }
        }
    }
}

#[inline]
fn assert_dominated(value: f64, bound: f64) {
    assert!(
        value <= bound * (1.0 + 1e-12),
        "thinning bound violated: intensity {value} exceeds dominating rate {bound}"
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rto_sim_oracles as oracles;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn weibull_shape_one_is_constant() {
        let s = HazardSpec::weibull(1.0, 5.0);
        for e in [0.0, 0.3, 7.0, 400.0] {
            assert!((hazard_value(&s, e, 12.0).unwrap() - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn weibull_at_scale() {
        let s = HazardSpec::weibull(2.0, 10.0);
        assert!((hazard_value(&s, 10.0, 0.0).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn covariate_multiplies_baseline() {
        // amplitude 1 and phase 0 at t = 0 give covariate value 1
        let s = HazardSpec::weibull(1.5, 20.0).with_covariate(PeriodicCovariate {
            amplitude: 1.0,
            period: 365.0,
            phase: 0.0,
            coefficient: 0.3,
        });
        let expected = 0.075 * 0.3_f64.exp();
        let got = hazard_value(&s, 20.0, 0.0).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.101_24).abs() < 1e-5);
    }

    #[test]
    fn decreasing_hazard_diverges_at_origin() {
        let s = HazardSpec::weibull(0.7, 3.0);
        assert_eq!(hazard_value(&s, 0.0, 0.0), Err(HazardError::DivergentAtOrigin(0.7)));
        assert!(hazard_value(&s, 1e-3, 0.0).unwrap().is_finite());
    }

    #[test]
    fn exponential_inversion_values() {
        assert!((exponential_gap(0.5, 0.5) - 1.386_294_361).abs() < 1e-9);
        assert!((exponential_delay_from_uniform(2.0, (-1.0f64).exp()) - 2.0).abs() < 1e-15);
        assert_eq!(exponential_delay_from_uniform(5.0, 1.0), 0.0);
    }

    #[test]
    fn exponential_delay_sample_mean() {
        let mut r = rng(7);
        let n = 100_000;
        let mean = (0..n).map(|_| sample_exponential_delay(0.1, &mut r)).sum::<f64>() / n as f64;
        assert!((0.099..=0.101).contains(&mean), "{mean}");
    }

    #[test]
    fn vanishing_rate_yields_no_event() {
        let s = HazardSpec::constant(1e-12);
        let mut r = rng(1);
        assert!((0..1000).all(|_| sample_gap(&s, 0.0, 365.0, &mut r).is_none()));
    }

    #[test]
    fn empty_window_yields_no_event() {
        let s = HazardSpec::weibull(2.0, 10.0);
        assert_eq!(sample_gap(&s, 0.0, 0.0, &mut rng(3)), None);
    }

    #[test]
    fn weibull_thinning_matches_closed_form() {
        let s = HazardSpec::weibull(2.0, 10.0);
        let mut r = rng(11);
        let n = 10_000;
        let gaps: Vec<f64> = (0..n)
            .map(|_| sample_gap(&s, 0.0, f64::INFINITY, &mut r).unwrap())
            .collect();
        let mean = gaps.iter().sum::<f64>() / n as f64;
        let target = oracles::weibull_mean(2.0, 10.0);
        assert!((mean / target - 1.0).abs() < 0.02, "{mean} vs {target}");
        let d = oracles::ks_statistic(&gaps, |x| oracles::weibull_cdf(2.0, 10.0, x));
        assert!(d < oracles::ks_critical_value(n, 0.01), "KS {d}");
    }

    #[test]
    fn decreasing_weibull_matches_closed_form() {
        let s = HazardSpec::weibull(0.6, 8.0);
        let mut r = rng(12);
        let n = 10_000;
        let gaps: Vec<f64> = (0..n)
            .map(|_| sample_gap(&s, 5.0, f64::INFINITY, &mut r).unwrap() - 5.0)
            .collect();
        let d = oracles::ks_statistic(&gaps, |x| oracles::weibull_cdf(0.6, 8.0, x));
        assert!(d < oracles::ks_critical_value(n, 0.01), "KS {d}");
    }

    fn seasonal(spec: HazardSpec) -> HazardSpec {
        spec.with_covariate(PeriodicCovariate {
            amplitude: 1.0,
            period: 365.0,
            phase: 0.0,
            coefficient: 0.5,
        })
        .with_covariate(PeriodicCovariate {
            amplitude: 1.0,
            period: 365.0,
            phase: std::f64::consts::FRAC_PI_3,
            coefficient: 0.3,
        })
    }

    fn ks_against_quadrature(spec: &HazardSpec, start: f64, seed: u64) {
        let mut r = rng(seed);
        let n = 10_000;
        let horizon = start + 2_000.0;
        let gaps: Vec<f64> = (0..n)
            .map(|_| sample_gap(spec, start, horizon, &mut r).expect("event before horizon") - start)
            .collect();
        let hz = |e: f64, t: f64| hazard_value(spec, e, t).unwrap();
        // Tabulate the reference distribution once on a fine grid.
        let max = gaps.iter().cloned().fold(0.0, f64::max);
        let step = max / 4000.0;
        let grid: Vec<f64> = (0..=4000)
            .map(|k| oracles::first_event_cdf(hz, start, k as f64 * step, 400))
            .collect();
        let cdf = |x: f64| {
            let pos = (x / step).min(3999.999);
            let k = pos.floor() as usize;
            let w = pos - k as f64;
            grid[k] * (1.0 - w) + grid[k + 1] * w
        };
        let d = oracles::ks_statistic(&gaps, cdf);
        assert!(d < oracles::ks_critical_value(n, 0.01), "KS {d}");
    }

    #[test]
    fn seasonal_weibull_thinning_matches_quadrature() {
        ks_against_quadrature(&seasonal(HazardSpec::weibull(2.0, 40.0)), 100.0, 21);
    }

    #[test]
    fn seasonal_decreasing_weibull_matches_quadrature() {
        ks_against_quadrature(&seasonal(HazardSpec::weibull(0.8, 30.0)), 10.0, 22);
    }

    #[test]
    fn seasonal_constant_matches_quadrature() {
        ks_against_quadrature(&seasonal(HazardSpec::constant(0.05)), 200.0, 23);
    }

    proptest! {
        #[test]
        fn hazard_is_monotone_in_elapsed(
            shape in 0.2f64..4.0,
            scale in 0.5f64..200.0,
            a in 0.01f64..100.0,
            b in 0.01f64..100.0,
        ) {
            prop_assume!((shape - 1.0).abs() > 1e-3 && (a - b).abs() > 1e-6);
            let s = HazardSpec::weibull(shape, scale);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let hl = hazard_value(&s, lo, 0.0).unwrap();
            let hh = hazard_value(&s, hi, 0.0).unwrap();
            if shape > 1.0 {
                prop_assert!(hh > hl);
            } else {
                prop_assert!(hh < hl);
            }
        }

        #[test]
        fn sampled_time_lies_in_window(
            shape in 0.3f64..3.0,
            scale in 1.0f64..100.0,
            t_last in 0.0f64..300.0,
            span in 0.1f64..400.0,
            seed in any::<u64>(),
        ) {
            let s = seasonal(HazardSpec::weibull(shape, scale));
            if let Some(t) = sample_gap(&s, t_last, t_last + span, &mut rng(seed)) {
                prop_assert!(t > t_last && t <= t_last + span);
            }
        }
    }
}
