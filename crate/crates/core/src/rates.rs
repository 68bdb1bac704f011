//! Algebraic rate fitting: least squares of `log value` against `log(1+t)`.

use crate::error::{Error, Result};

pub const MIN_FIT_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub exponent: f64,
    /// Half-width of the 95% confidence interval on the exponent.
    pub ci: f64,
    pub prefactor: f64,
    pub samples: usize,
    pub window: (f64, f64),
}

impl RateFit {
    pub fn within(&self, predicted: f64, tolerance: f64) -> bool {
        (self.exponent - predicted).abs() <= tolerance
    }
}

/// Fits `value ≈ C (1+t)^exponent` over samples with `t` in `window`.
pub fn fit_rate(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<RateFit> {
    if times.len() != values.len() {
        return Err(Error::InvalidParameter(format!(
            "{} times but {} values",
            times.len(),
            values.len()
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t < window.0 || t > window.1 {
            continue;
        }
        if !(v > 0.0) {
            return Err(Error::NonPositive { time: t, value: v });
        }
        xs.push((1.0 + t).ln());
        ys.push(v.ln());
    }
    let n = xs.len();
    if n < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples(format!(
            "{n} samples in window [{}, {}], need {MIN_FIT_SAMPLES}",
            window.0, window.1
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientSamples("all samples at one time".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let se = (ssr / (nf - 2.0) / sxx).sqrt();
    Ok(RateFit {
        exponent: slope,
        ci: 1.96 * se,
        prefactor: intercept.exp(),
        samples: n,
        window,
    })
}

/// `n` log-spaced times covering `[t0, t1]`.
pub fn log_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    let (a, b) = (t0.ln(), t1.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1).max(1) as f64).exp())
        .collect()
}
