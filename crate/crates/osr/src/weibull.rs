//! Extreme-value kernel: shifted Weibull tail fitting and CDF evaluation.
//!
//! A fit selects the `eta` largest distances, shifts them just below their
//! minimum so the tail is strictly positive, and estimates shape and scale
//! by maximum likelihood on the shifted values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Shifted Weibull parameters: location `tau`, shape `beta`, scale `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullParams {
    tau: f64,
    beta: f64,
    lambda: f64,
}

impl WeibullParams {
    pub fn new(tau: f64, beta: f64, lambda: f64) -> Result<Self> {
        if !tau.is_finite() {
            return Err(Error::InvalidParams(format!("location {tau} not finite")));
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "shape {beta} not finite and positive"
            )));
        }
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "scale {lambda} not finite and positive"
            )));
        }
        Ok(WeibullParams { tau, beta, lambda })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// CDF of the shifted Weibull: `1 - exp(-(max(x - tau, 0)/lambda)^beta)`.
/// Zero at and below the location, monotone toward one.
pub fn weibull_cdf(x: f64, params: &WeibullParams) -> f64 {
    let shifted = x - params.tau;
    if shifted <= 0.0 {
        return 0.0;
    }
    1.0 - (-(shifted / params.lambda).powf(params.beta)).exp()
}

/// Inverse CDF. `u` must lie in `[0, 1)`.
pub fn weibull_quantile(u: f64, params: &WeibullParams) -> Result<f64> {
    if !(0.0..1.0).contains(&u) {
        return Err(Error::InvalidInput(format!("quantile level {u} not in [0, 1)")));
    }
    Ok(params.tau + params.lambda * (-(1.0 - u).ln()).powf(1.0 / params.beta))
}

/// Draws `n` samples by inverse-CDF transform from a seeded generator.
/// The same seed always yields the same sequence.
pub fn sample_weibull(params: &WeibullParams, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            weibull_quantile(u, params).expect("u in [0, 1)")
        })
        .collect()
}

/// Convergence tolerance on the per-observation profile score.
const SCORE_TOL: f64 = 1e-10;
/// Iteration cap shared by the Newton stage and the bisection fallback.
const MAX_ITERS: usize = 200;

/// Fits a shifted Weibull to the `eta` largest distances.
///
/// The location is set to `min(tail) - range(tail)/eta`, which keeps every
/// shifted value strictly positive without planting a near-zero point whose
/// log would dominate a small tail. Shape and scale then come from
/// [`fit_weibull_at`] on the shifted values.
pub fn fit_weibull_tail(distances: &[f64], eta: usize) -> Result<WeibullParams> {
    let tail = select_tail(distances, eta)?;
    let min = tail[0];
    let max = tail[eta - 1];
    if max == min {
        return Err(Error::DegenerateTail {
            count: eta,
            value: min,
        });
    }
    let tau = min - (max - min) / eta as f64;
    fit_tail_at(&tail, tau)
}

/// Fits shape and scale with the location pinned at `tau`; every selected
/// tail distance must exceed `tau`.
pub fn fit_weibull_at(distances: &[f64], eta: usize, tau: f64) -> Result<WeibullParams> {
    let tail = select_tail(distances, eta)?;
    if tail[0] == tail[eta - 1] {
        return Err(Error::DegenerateTail {
            count: eta,
            value: tail[0],
        });
    }
    fit_tail_at(&tail, tau)
}

/// Validates inputs and returns the `eta` largest distances, ascending.
fn select_tail(distances: &[f64], eta: usize) -> Result<Vec<f64>> {
    if eta < 2 {
        return Err(Error::InvalidInput(format!("tail size {eta} below 2")));
    }
    if distances.len() < eta {
        return Err(Error::InsufficientData {
            needed: eta,
            got: distances.len(),
        });
    }
    if distances.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::InvalidInput(
            "distances must be finite and non-negative".into(),
        ));
    }
    let mut sorted = distances.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Ok(sorted.split_off(sorted.len() - eta))
}

fn fit_tail_at(tail: &[f64], tau: f64) -> Result<WeibullParams> {
    if !tau.is_finite() {
        return Err(Error::InvalidParams(format!("location {tau} not finite")));
    }
    if tail[0] <= tau {
        return Err(Error::InvalidInput(format!(
            "smallest tail distance {} does not exceed location {tau}",
            tail[0]
        )));
    }
    let shifted: Vec<f64> = tail.iter().map(|d| d - tau).collect();
    let (beta, lambda) = solve_shape_scale(&shifted)?;
    WeibullParams::new(tau, beta, lambda)
}

/// Profile-likelihood solve for the two-parameter Weibull on positive data.
///
/// The scale has a closed form given the shape, so only the per-observation
/// score in the shape remains:
///
/// ```text
/// score(b) = 1/b + mean(ln t) - sum(t^b ln t) / sum(t^b)
/// ```
///
/// `score` is strictly decreasing with a positive limit at b -> 0, so a root
/// is unique when the data have spread. Newton from b = 1 converges in a
/// handful of steps; if a step leaves the domain or the cap is reached, a
/// sign-bracketing bisection takes over.
fn solve_shape_scale(shifted: &[f64]) -> Result<(f64, f64)> {
    let n = shifted.len() as f64;
    let ln_t: Vec<f64> = shifted.iter().map(|t| t.ln()).collect();
    let mean_ln: f64 = ln_t.iter().sum::<f64>() / n;
    let max_ln = ln_t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    // Weighted sums with t^b computed as exp(b (ln t - max ln)) so large
    // shapes cannot overflow; the common factor cancels in every ratio.
    let sums = |beta: f64| -> (f64, f64, f64) {
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for lt in &ln_t {
            let w = (beta * (lt - max_ln)).exp();
            s0 += w;
            s1 += w * lt;
            s2 += w * lt * lt;
        }
        (s0, s1, s2)
    };
    let score = |beta: f64| -> f64 {
        let (s0, s1, _) = sums(beta);
        1.0 / beta + mean_ln - s1 / s0
    };

    let mut trace = Vec::new();
    let mut beta = 1.0f64;
    for _ in 0..MAX_ITERS {
        trace.push(beta);
        let (s0, s1, s2) = sums(beta);
        let f = 1.0 / beta + mean_ln - s1 / s0;
        if f.abs() < SCORE_TOL {
            return finish(beta, max_ln, s0, n);
        }
        let fprime = -1.0 / (beta * beta) - (s2 * s0 - s1 * s1) / (s0 * s0);
        if !fprime.is_finite() || fprime == 0.0 {
            break;
        }
        let next = beta - f / fprime;
        if !next.is_finite() || next <= 0.0 {
            break;
        }
        beta = next;
    }

    // Bisection fallback: bracket the root over shape decades, then halve.
    let mut lo = 1e-8;
    let mut hi = 1.0;
    while score(hi) > 0.0 && hi < 1e8 {
        hi *= 2.0;
    }
    if score(lo) <= 0.0 || score(hi) > 0.0 {
        let last = *trace.last().unwrap_or(&beta);
        return Err(Error::NoConvergence {
            iterations: trace.len(),
            last_shape: last,
            last_score: score(last),
            trace,
        });
    }
    for _ in 0..MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        trace.push(mid);
        let f = score(mid);
        if f.abs() < SCORE_TOL || (hi - lo) < f64::EPSILON * hi {
            let (s0, _, _) = sums(mid);
            return finish(mid, max_ln, s0, n);
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let last = *trace.last().expect("trace non-empty");
    Err(Error::NoConvergence {
        iterations: trace.len(),
        last_shape: last,
        last_score: score(last),
        trace,
    })
}

fn finish(beta: f64, max_ln: f64, s0: f64, n: f64) -> Result<(f64, f64)> {
    // lambda^beta = sum(t^beta)/n, with the exp(beta * max_ln) factor restored.
    let lambda = max_ln.exp() * (s0 / n).powf(1.0 / beta);
    if !lambda.is_finite() || lambda <= 0.0 || !beta.is_finite() || beta <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "fit produced shape {beta}, scale {lambda}"
        )));
    }
    Ok((beta, lambda))
}

/// Kolmogorov-Smirnov distance between data and a fitted CDF evaluated on
/// the same values. Exposed for fit-quality checks.
pub fn ks_statistic(values: &[f64], params: &WeibullParams) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = sorted.len() as f64;
    let mut worst = 0.0f64;
    for (i, x) in sorted.iter().enumerate() {
        let f = weibull_cdf(*x, params);
        let hi = ((i + 1) as f64 / n - f).abs();
        let lo = (i as f64 / n - f).abs();
        worst = worst.max(hi).max(lo);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel_err(actual: f64, expected: f64) -> f64 {
        (actual - expected).abs() / expected.abs()
    }

    #[test]
    fn cdf_identities() {
        let p = WeibullParams::new(1.0, 2.5, 0.7).unwrap();
        assert_eq!(weibull_cdf(1.0, &p), 0.0);
        assert_eq!(weibull_cdf(0.2, &p), 0.0);
        // Frozen: 1 - e^-1 at one scale above the location.
        assert!((weibull_cdf(1.7, &p) - 0.63212055882855768).abs() < 1e-15);
        // Frozen: 1 - exp(-4) for (tau 1, shape 2, scale 0.5) at x = 2.
        let p = WeibullParams::new(1.0, 2.0, 0.5).unwrap();
        assert!((weibull_cdf(2.0, &p) - 0.98168436111126582).abs() < 1e-15);
    }

    #[test]
    fn params_validation() {
        assert!(WeibullParams::new(0.0, 0.0, 1.0).is_err());
        assert!(WeibullParams::new(0.0, -1.0, 1.0).is_err());
        assert!(WeibullParams::new(0.0, 1.0, 0.0).is_err());
        assert!(WeibullParams::new(f64::NAN, 1.0, 1.0).is_err());
        assert!(WeibullParams::new(-3.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn quantile_hits_location_plus_scale() {
        let p = WeibullParams::new(2.0, 3.7, 1.3).unwrap();
        let u = 1.0 - (-1.0f64).exp();
        assert_eq!(weibull_quantile(u, &p).unwrap(), 2.0 + 1.3);
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = WeibullParams::new(0.0, 2.0, 1.0).unwrap();
        assert_eq!(sample_weibull(&p, 100, 42), sample_weibull(&p, 100, 42));
        assert_ne!(sample_weibull(&p, 100, 42), sample_weibull(&p, 100, 43));
    }

    #[test]
    fn sample_mean_matches_closed_form() {
        // E[Weibull(shape 2, scale 1)] = Gamma(1.5) = 0.88622692545275801.
        let p = WeibullParams::new(0.0, 2.0, 1.0).unwrap();
        let xs = sample_weibull(&p, 100_000, 7);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(rel_err(mean, 0.88622692545275801) < 0.01, "mean {mean}");
    }

    #[test]
    fn fit_recovers_generating_parameters() {
        // tau 1 plus Weibull(shape 2, scale 3); the fitter re-estimates the
        // location near the sample minimum.
        let p = WeibullParams::new(1.0, 2.0, 3.0).unwrap();
        let d = sample_weibull(&p, 10_000, 11);
        let fit = fit_weibull_tail(&d, 10_000).unwrap();
        assert!(rel_err(fit.beta(), 2.0) < 0.05, "shape {}", fit.beta());
        assert!(rel_err(fit.lambda(), 3.0) < 0.05, "scale {}", fit.lambda());
        assert!((fit.tau() - 1.0).abs() < 0.1, "location {}", fit.tau());
    }

    #[test]
    fn degenerate_tail_is_an_error() {
        let d = vec![2.0; 50];
        match fit_weibull_tail(&d, 20) {
            Err(Error::DegenerateTail { count: 20, .. }) => {}
            other => panic!("expected degenerate-tail error, got {other:?}"),
        }
    }

    #[test]
    fn exponential_data_fits_unit_shape() {
        // Exponential(1) is Weibull(shape 1, scale 1); location pinned at zero.
        let p = WeibullParams::new(0.0, 1.0, 1.0).unwrap();
        let d = sample_weibull(&p, 1000, 5);
        let fit = fit_weibull_at(&d, 1000, 0.0).unwrap();
        assert!(
            (0.9..=1.1).contains(&fit.beta()),
            "shape {} outside [0.9, 1.1]",
            fit.beta()
        );
        assert!(rel_err(fit.lambda(), 1.0) < 0.1);
    }

    #[test]
    fn fit_errors_on_bad_input() {
        assert!(matches!(
            fit_weibull_tail(&[1.0, 2.0], 5),
            Err(Error::InsufficientData { needed: 5, got: 2 })
        ));
        assert!(fit_weibull_tail(&[1.0, 2.0, 3.0], 1).is_err());
        assert!(fit_weibull_tail(&[1.0, -2.0, 3.0], 2).is_err());
    }

    #[test]
    fn round_trip_grid_within_five_percent() {
        // Fit at the generating location: the pure likelihood round trip.
        for (i, &beta) in [0.8, 1.0, 2.0, 5.0].iter().enumerate() {
            for (j, &lambda) in [0.5, 1.0, 10.0].iter().enumerate() {
                let p = WeibullParams::new(0.0, beta, lambda).unwrap();
                let d = sample_weibull(&p, 5000, 1000 + (i * 3 + j) as u64);
                let fit = fit_weibull_at(&d, 5000, 0.0).unwrap();
                assert!(
                    rel_err(fit.beta(), beta) < 0.05,
                    "shape {beta}/{lambda}: {}",
                    fit.beta()
                );
                assert!(
                    rel_err(fit.lambda(), lambda) < 0.05,
                    "scale {beta}/{lambda}: {}",
                    fit.lambda()
                );
            }
        }
    }

    #[test]
    fn tail_selection_matches_sort_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let d: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..10.0)).collect();
        let tail = select_tail(&d, 20).unwrap();
        let mut oracle = d.clone();
        oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(tail, oracle[30..].to_vec());
    }

    #[test]
    fn small_tail_fit_tracks_the_tail() {
        // A 20-point tail fit should still describe the tail it was given.
        let p = WeibullParams::new(0.0, 2.0, 1.0).unwrap();
        let d = sample_weibull(&p, 60, 21);
        let fit = fit_weibull_tail(&d, 20).unwrap();
        let tail = select_tail(&d, 20).unwrap();
        let shifted: Vec<f64> = tail.iter().map(|x| x - fit.tau()).collect();
        let centred = WeibullParams::new(0.0, fit.beta(), fit.lambda()).unwrap();
        let ks = ks_statistic(&shifted, &centred);
        assert!(ks < 0.15, "KS {ks}");
    }

    #[test]
    fn likelihood_beats_a_parameter_grid() {
        // The returned point should dominate a 50x50 grid around itself.
        let p = WeibullParams::new(0.0, 1.7, 2.2).unwrap();
        let d = sample_weibull(&p, 200, 13);
        let fit = fit_weibull_at(&d, 200, 0.0).unwrap();
        let loglik = |beta: f64, lambda: f64| -> f64 {
            d.iter()
                .map(|t| {
                    beta.ln() - beta * lambda.ln() + (beta - 1.0) * t.ln()
                        - (t / lambda).powf(beta)
                })
                .sum()
        };
        let best = loglik(fit.beta(), fit.lambda());
        for i in 0..50 {
            for j in 0..50 {
                let beta = fit.beta() * (0.5 + i as f64 * 1.5 / 49.0);
                let lambda = fit.lambda() * (0.5 + j as f64 * 1.5 / 49.0);
                assert!(
                    loglik(beta, lambda) <= best + 1e-9,
                    "grid point ({beta}, {lambda}) beats the fit"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn cdf_is_monotone_and_bounded(
            tau in -5.0f64..5.0,
            beta in 0.2f64..8.0,
            lambda in 0.05f64..20.0,
            xs in proptest::collection::vec(-10.0f64..50.0, 2..40),
        ) {
            let p = WeibullParams::new(tau, beta, lambda).unwrap();
            let mut sorted = xs.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut prev = 0.0;
            for x in sorted {
                let c = weibull_cdf(x, &p);
                prop_assert!((0.0..=1.0).contains(&c));
                prop_assert!(c + 1e-15 >= prev);
                prev = c;
            }
            prop_assert_eq!(weibull_cdf(tau, &p), 0.0);
            prop_assert!(weibull_cdf(tau + 1e6 * lambda.max(1.0), &p) > 1.0 - 1e-9);
        }
    }
}
