//! Polya-number estimation and recurrence classification.
//!
//! The truncated product over 1 - p_o(t) is accumulated in log space so it
//! can never underflow. Decay exponents come from a least-squares line
//! through log-binned geometric means of the series: geometric means keep
//! the fit exact on pure power laws while smoothing the oscillations real
//! return series carry, and exact zeros (parity) are excluded from the fit
//! but kept in the product.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::ReturnSeries;
use crate::spectral::ExponentPrediction;

/// The boundary band around alpha = 1 inside which a fitted exponent cannot
/// distinguish recurrence from transience on its own.
pub const ALPHA_MARGIN: f64 = 0.1;

/// alpha below this together with a non-vanishing tail reads as a constant
/// leading term.
const FLAT_ALPHA: f64 = 0.2;
const FLAT_TAIL_MEAN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Recurrent,
    Transient,
    Localised,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailPolicy {
    None,
    PowerLawExtrapolation,
}

/// Least-squares fit of p_o(t) ~ C t^{-alpha} over a window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExponentFit {
    pub alpha: f64,
    pub amplitude: f64,
    /// RMS residual of the binned regression.
    pub residual: f64,
    /// Two standard errors of the slope; absent with fewer than 3 bins.
    pub half_width: Option<f64>,
    pub window: (usize, usize),
    pub bins: usize,
    pub positive_points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailModel {
    pub amplitude: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolyaEstimate {
    /// Product over t = 1..T of (1 - p_o(t)).
    pub truncated_product: f64,
    pub log_truncated_product: f64,
    pub tail: Option<TailModel>,
    /// ln of the extrapolated tail factor (0 when no tail is applied).
    pub tail_log_factor: f64,
    /// Bound on the log(1-p) ~ -p approximation error in the tail.
    pub tail_error_bound: f64,
    /// P = 1 - truncated_product * exp(tail_log_factor).
    pub polya: f64,
    pub verdict: Verdict,
    pub fit: Option<ExponentFit>,
}

/// One log-spaced bin of the fit.
struct Bin {
    log_t: f64,
    log_p: f64,
}

fn log_bins(series: &ReturnSeries, window: (usize, usize)) -> (Vec<Bin>, usize) {
    let (t_min, t_max) = window;
    let t_max = t_max.min(series.t_max());
    // Entries this far below the window peak are quadrature roundoff (the
    // momentum engine returns parity zeros as ~1e-30), not dynamics; they
    // are excluded like exact zeros.
    let t_lo = t_min.max(1);
    let peak = series.p[t_lo..=t_max.max(t_lo)]
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    let floor = peak * 1e-12;
    let mut bins = Vec::new();
    let mut positives = 0usize;
    let mut lo = t_lo;
    while lo <= t_max {
        // Bins grow by a factor sqrt(2); pure powers of t stay exactly
        // linear under geometric means, whatever the bin layout.
        let hi = ((lo as f64 * std::f64::consts::SQRT_2).ceil() as usize).max(lo + 1);
        let hi = hi.min(t_max + 1);
        let mut sum_log_t = 0.0;
        let mut sum_log_p = 0.0;
        let mut count = 0usize;
        for t in lo..hi {
            let p = series.p[t];
            if p > floor {
                sum_log_t += (t as f64).ln();
                sum_log_p += p.ln();
                count += 1;
            }
        }
        if count > 0 {
            bins.push(Bin {
                log_t: sum_log_t / count as f64,
                log_p: sum_log_p / count as f64,
            });
            positives += count;
        }
        lo = hi;
    }
    (bins, positives)
}

/// Fits log p against log t over `window` = [t_min, t_max].
pub fn fit_decay_exponent(series: &ReturnSeries, window: (usize, usize)) -> Result<ExponentFit> {
    let (bins, positives) = log_bins(series, window);
    if positives < 8 {
        return Err(Error::InsufficientPositivePoints {
            found: positives,
            required: 8,
        });
    }
    if bins.len() < 2 {
        return Err(Error::InconclusiveFit {
            context: format!("only {} usable log bins in {:?}", bins.len(), window),
        });
    }
    let n = bins.len() as f64;
    let mean_x: f64 = bins.iter().map(|b| b.log_t).sum::<f64>() / n;
    let mean_y: f64 = bins.iter().map(|b| b.log_p).sum::<f64>() / n;
    let sxx: f64 = bins.iter().map(|b| (b.log_t - mean_x).powi(2)).sum();
    let sxy: f64 = bins
        .iter()
        .map(|b| (b.log_t - mean_x) * (b.log_p - mean_y))
        .sum();
    if sxx <= 0.0 {
        return Err(Error::InconclusiveFit {
            context: "degenerate abscissa spread".into(),
        });
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = bins
        .iter()
        .map(|b| (b.log_p - (intercept + slope * b.log_t)).powi(2))
        .sum();
    let residual = (ss_res / n).sqrt();
    let half_width = if bins.len() >= 3 {
        Some(2.0 * (ss_res / (n - 2.0) / sxx).sqrt())
    } else {
        None
    };
    Ok(ExponentFit {
        alpha: -slope,
        amplitude: intercept.exp(),
        residual,
        half_width,
        window,
        bins: bins.len(),
        positive_points: positives,
    })
}

/// Default fit window [T/4, T], skipping the pre-asymptotic transient.
pub fn default_fit_window(series: &ReturnSeries) -> (usize, usize) {
    let t_max = series.t_max();
    ((t_max / 4).max(1), t_max)
}

fn log_truncated_product(series: &ReturnSeries) -> f64 {
    let mut log_prod = 0.0f64;
    for &p in series.p.iter().skip(1) {
        if p >= 1.0 {
            return f64::NEG_INFINITY;
        }
        log_prod += (-p).ln_1p();
    }
    log_prod
}

fn tail_mean(series: &ReturnSeries, fraction_from: f64) -> f64 {
    let t_max = series.t_max();
    let start = ((t_max as f64 * fraction_from) as usize).max(1).min(t_max);
    let slice = &series.p[start..=t_max];
    slice.iter().sum::<f64>() / slice.len() as f64
}

/// Constant-leading-term signature read off the series itself.
fn flat_signature(fit: &ExponentFit, series: &ReturnSeries) -> bool {
    fit.alpha < FLAT_ALPHA && tail_mean(series, 0.8) > FLAT_TAIL_MEAN
}

/// Polya number from a truncated series, with optional power-law tail
/// extrapolation when the fitted exponent indicates transience.
pub fn polya_number(series: &ReturnSeries, tail_policy: TailPolicy) -> Result<PolyaEstimate> {
    let t_max = series.t_max();
    let log_prod = log_truncated_product(series);
    let base = |verdict: Verdict, polya: f64, fit: Option<ExponentFit>| PolyaEstimate {
        truncated_product: log_prod.exp(),
        log_truncated_product: log_prod,
        tail: None,
        tail_log_factor: 0.0,
        tail_error_bound: 0.0,
        polya,
        verdict,
        fit,
    };

    let fit = match fit_decay_exponent(series, default_fit_window(series)) {
        Ok(f) => f,
        Err(Error::InsufficientPositivePoints { .. })
            if series
                .p
                .iter()
                .skip(1)
                .all(|&p| p <= 1e-12 * series.p[0].max(1.0)) =>
        {
            // The walker provably never returns inside the horizon.
            return Ok(base(Verdict::Transient, 1.0 - log_prod.exp(), None));
        }
        Err(e) => return Err(e),
    };

    if flat_signature(&fit, series) {
        // Constant leading term: the infinite product vanishes.
        return Ok(base(Verdict::Localised, 1.0, Some(fit)));
    }
    if fit.alpha <= 1.0 - ALPHA_MARGIN {
        // sum p_o(t) diverges, the walk is recurrent.
        return Ok(base(Verdict::Recurrent, 1.0, Some(fit)));
    }
    if fit.alpha <= 1.0 + ALPHA_MARGIN {
        // A fitted exponent this close to 1 cannot reliably distinguish
        // log corrections; report the truncated value only.
        return Ok(base(Verdict::Inconclusive, 1.0 - log_prod.exp(), Some(fit)));
    }

    let mut estimate = base(Verdict::Transient, 0.0, None);
    match tail_policy {
        TailPolicy::None => {
            estimate.polya = 1.0 - log_prod.exp();
        }
        TailPolicy::PowerLawExtrapolation => {
            // sum_{t>T} C t^-a ~ C T^{1-a} / (a-1); log(1-p) ~ -p since the
            // tail probabilities are tiny.
            let c = fit.amplitude;
            let a = fit.alpha;
            let tail_sum = c * (t_max as f64).powf(1.0 - a) / (a - 1.0);
            let p_edge = (c * (t_max as f64).powf(-a)).min(0.5);
            estimate.tail = Some(TailModel {
                amplitude: c,
                alpha: a,
            });
            estimate.tail_log_factor = -tail_sum;
            estimate.tail_error_bound = tail_sum * p_edge / (2.0 * (1.0 - p_edge));
            estimate.polya = 1.0 - (log_prod - tail_sum).exp();
        }
    }
    estimate.fit = Some(fit);
    Ok(estimate)
}

/// Verdict for a series, optionally cross-checked against a spectral
/// prediction, which breaks ties in the alpha ~ 1 band and flags
/// localisation directly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub fit: Option<ExponentFit>,
    pub spectral_exponent: Option<f64>,
    pub spectral_localised: bool,
    pub localised_signature: bool,
    pub note: String,
}

pub fn classify(series: &ReturnSeries, spectral: Option<&ExponentPrediction>) -> Classification {
    let fit = fit_decay_exponent(series, default_fit_window(series)).ok();

    // Series-level localisation signature: either a near-zero exponent with
    // a non-vanishing tail, or a tail sitting an order of magnitude above
    // its own fitted power law.
    let localised_signature = match &fit {
        Some(f) => {
            let quartile_start = (series.t_max() * 3 / 4).max(1);
            let model_mean: f64 = (quartile_start..=series.t_max())
                .map(|t| f.amplitude * (t as f64).powf(-f.alpha))
                .sum::<f64>()
                / (series.t_max() - quartile_start + 1) as f64;
            flat_signature(f, series)
                || (tail_mean(series, 0.75) > 10.0 * model_mean && tail_mean(series, 0.75) > 1e-6)
        }
        None => false,
    };

    let (spectral_exponent, spectral_localised) = match spectral {
        Some(ExponentPrediction::Localised { .. }) => (None, true),
        Some(ExponentPrediction::PowerLaw { exponent, .. }) => (Some(*exponent), false),
        Some(ExponentPrediction::Unclassified { .. }) | None => (None, false),
    };

    let alpha = fit.as_ref().map(|f| f.alpha);
    let (verdict, note) = match (spectral, alpha) {
        (Some(ExponentPrediction::Localised { .. }), Some(a)) => {
            if localised_signature || a < 0.5 {
                (
                    Verdict::Localised,
                    "flat band with non-vanishing weight".to_string(),
                )
            } else {
                (
                    Verdict::Inconclusive,
                    format!(
                        "spectral prediction is localised but fitted alpha = {:.3}",
                        a
                    ),
                )
            }
        }
        (Some(ExponentPrediction::Localised { .. }), None) => (
            Verdict::Localised,
            "flat band with non-vanishing weight".to_string(),
        ),
        (Some(ExponentPrediction::PowerLaw { exponent, .. }), Some(a)) => {
            if localised_signature {
                (
                    Verdict::Inconclusive,
                    "series looks localised but spectrum predicts decay".to_string(),
                )
            } else if (a - exponent).abs() <= 0.5 {
                let v = if *exponent <= 1.0 + 1e-9 {
                    Verdict::Recurrent
                } else {
                    Verdict::Transient
                };
                (v, format!("fit agrees with spectral exponent {}", exponent))
            } else {
                (
                    Verdict::Inconclusive,
                    format!(
                        "fitted alpha = {:.3} disagrees with spectral exponent {}",
                        a, exponent
                    ),
                )
            }
        }
        (Some(ExponentPrediction::PowerLaw { exponent, .. }), None) => {
            let v = if *exponent <= 1.0 + 1e-9 {
                Verdict::Recurrent
            } else {
                Verdict::Transient
            };
            (v, "spectral exponent only".to_string())
        }
        (Some(ExponentPrediction::Unclassified { .. }), _) | (None, _) => match alpha {
            Some(_) if localised_signature => {
                (Verdict::Localised, "series tail signature".to_string())
            }
            Some(a) if a <= 1.0 - ALPHA_MARGIN => {
                (Verdict::Recurrent, "fitted exponent".to_string())
            }
            Some(a) if a <= 1.0 + ALPHA_MARGIN => (
                Verdict::Inconclusive,
                format!("fitted alpha = {:.3} within the margin around 1", a),
            ),
            Some(_) => (Verdict::Transient, "fitted exponent".to_string()),
            None => (Verdict::Inconclusive, "no usable fit".to_string()),
        },
    };

    Classification {
        verdict,
        fit,
        spectral_exponent,
        spectral_localised,
        localised_signature,
        note,
    }
}

/// Folds the classification verdict back into the estimate: a recurrent or
/// localised verdict forces P = 1 (the infinite product vanishes), which the
/// truncated estimate alone cannot see in the marginal-exponent band.
pub fn reconcile(estimate: &mut PolyaEstimate, classification: &Classification) {
    estimate.verdict = classification.verdict;
    if matches!(
        classification.verdict,
        Verdict::Recurrent | Verdict::Localised
    ) {
        estimate.polya = 1.0;
        estimate.tail = None;
        estimate.tail_log_factor = 0.0;
        estimate.tail_error_bound = 0.0;
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub successes: usize,
    pub records: usize,
    pub seed: u64,
}

/// Simulates the measure-and-discard ensemble protocol: record r draws a
/// Bernoulli(p_o(t)) for t = 1..T and succeeds on the first hit.
///
/// Each record uses ChaCha8 with the 64-bit stream index set to its record
/// number, so the estimate depends only on (seed, records, T), not on
/// scheduling.
pub fn monte_carlo_polya(series: &ReturnSeries, records: usize, seed: u64) -> MonteCarloEstimate {
    assert!(records >= 1);
    let p = &series.p;
    let t_max = series.t_max();
    let successes = (0..records)
        .into_par_iter()
        .filter(|&r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            p[1..=t_max].iter().any(|&prob| rng.gen::<f64>() < prob)
        })
        .count();
    let p_hat = successes as f64 / records as f64;
    let stderr = (p_hat * (1.0 - p_hat) / records as f64).sqrt();
    MonteCarloEstimate {
        p_hat,
        stderr,
        successes,
        records,
        seed,
    }
}
