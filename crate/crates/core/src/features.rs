//! Stage 2 feature maps: first-order differencing followed by the
//! autocorrelation function, with PACF, periodogram and fixed-length raw
//! baselines for comparison.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TimeSeries;

pub const DEFAULT_LAGS: usize = 20;
pub const DEFAULT_RAW_LENGTH: usize = 1802;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureMethod {
    Acf,
    Pacf,
    Periodogram,
    /// Raw values truncated or zero-padded to a fixed length.
    Raw,
}

impl fmt::Display for FeatureMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMethod::Acf => "acf",
            FeatureMethod::Pacf => "pacf",
            FeatureMethod::Periodogram => "periodogram",
            FeatureMethod::Raw => "raw",
        })
    }
}

impl FromStr for FeatureMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "acf" => Ok(FeatureMethod::Acf),
            "pacf" => Ok(FeatureMethod::Pacf),
            "periodogram" => Ok(FeatureMethod::Periodogram),
            "raw" => Ok(FeatureMethod::Raw),
            other => Err(Error::InvalidConfig(format!(
                "unknown feature method {other:?}; expected acf, pacf, periodogram or raw"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub method: FeatureMethod,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub method: FeatureMethod,
    /// Lags for ACF/PACF, bins for the periodogram.
    pub lags: usize,
    pub raw_length: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            method: FeatureMethod::Acf,
            lags: DEFAULT_LAGS,
            raw_length: DEFAULT_RAW_LENGTH,
        }
    }
}

impl FeatureConfig {
    pub fn dim(&self) -> usize {
        match self.method {
            FeatureMethod::Raw => self.raw_length,
            _ => self.lags,
        }
    }
}

/// First-order difference with the first element pinned to zero; output
/// length equals input length.
pub fn difference(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::TooShort {
            needed: 1,
            got: values.len(),
        });
    }
    let mut out = Vec::with_capacity(values.len());
    out.push(0.0);
    out.extend(values.windows(2).map(|w| w[1] - w[0]));
    Ok(out)
}

/// Biased (divide-by-T) sample autocorrelation at lags `1..=max_lag`.
pub fn acf(values: &[f64], max_lag: usize) -> Result<FeatureVector> {
    let n = values.len();
    if n <= max_lag {
        return Err(Error::TooShort {
            needed: max_lag,
            got: n,
        });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let autocov = |h: usize| {
        centered[h..]
            .iter()
            .zip(&centered)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let gamma0 = autocov(0);
    if gamma0 == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let values = (1..=max_lag).map(|h| autocov(h) / gamma0).collect();
    Ok(FeatureVector {
        values,
        method: FeatureMethod::Acf,
    })
}

/// Partial autocorrelation via the Durbin-Levinson recursion on the ACF.
pub fn pacf(values: &[f64], max_lag: usize) -> Result<FeatureVector> {
    let rho = acf(values, max_lag)?.values;
    let mut out = Vec::with_capacity(max_lag);
    let mut phi: Vec<f64> = Vec::with_capacity(max_lag);
    for k in 1..=max_lag {
        let kk = if k == 1 {
            rho[0]
        } else {
            let num = rho[k - 1] - (1..k).map(|j| phi[j - 1] * rho[k - j - 1]).sum::<f64>();
            let den = 1.0 - (1..k).map(|j| phi[j - 1] * rho[j - 1]).sum::<f64>();
            if den == 0.0 {
                return Err(Error::DegenerateRecursion { lag: k });
            }
            num / den
        };
        if k < max_lag && kk.abs() >= 1.0 {
            return Err(Error::DegenerateRecursion { lag: k });
        }
        let prev = phi.clone();
        for j in 1..k {
            phi[j - 1] = prev[j - 1] - kk * prev[k - j - 1];
        }
        phi.push(kk);
        out.push(kk);
    }
    Ok(FeatureVector {
        values: out,
        method: FeatureMethod::Pacf,
    })
}

/// Power spectrum of the mean-removed series, averaged into `n_bins`
/// equal-width bins over `(0, Nyquist]` and normalized to sum to one.
pub fn periodogram(values: &[f64], n_bins: usize) -> Result<FeatureVector> {
    let n = values.len();
    if n_bins == 0 || n < 2 * n_bins {
        return Err(Error::TooShort {
            needed: 2 * n_bins.max(1) - 1,
            got: n,
        });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = values.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    let fft: Arc<dyn rustfft::Fft<f64>> = FftPlanner::new().plan_fft_forward(n);
    fft.process(&mut buf);

    let mut sums = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    for (k, c) in buf.iter().enumerate().take(n / 2 + 1).skip(1) {
        // Frequency k/n lies in bin ceil(k / (n / (2 n_bins))) - 1.
        let bin = (2 * k * n_bins).div_ceil(n) - 1;
        sums[bin] += c.norm_sqr();
        counts[bin] += 1;
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect();
    let total: f64 = means.iter().sum();
    if total == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(FeatureVector {
        values: means.iter().map(|m| m / total).collect(),
        method: FeatureMethod::Periodogram,
    })
}

/// Raw values truncated or zero-padded to `length`.
pub fn raw_fixed(values: &[f64], length: usize) -> FeatureVector {
    let mut v: Vec<f64> = values.iter().copied().take(length).collect();
    v.resize(length, 0.0);
    FeatureVector {
        values: v,
        method: FeatureMethod::Raw,
    }
}

/// Canonical Stage 2 representation of a raw window of samples.
pub fn extract_values(values: &[f64], config: &FeatureConfig) -> Result<FeatureVector> {
    if config.method == FeatureMethod::Raw {
        return Ok(raw_fixed(values, config.raw_length));
    }
    let diffed = difference(values)?;
    let out = match config.method {
        FeatureMethod::Acf => acf(&diffed, config.lags),
        FeatureMethod::Pacf => pacf(&diffed, config.lags),
        FeatureMethod::Periodogram => periodogram(&diffed, config.lags),
        FeatureMethod::Raw => unreachable!("handled above"),
    };
    out.map_err(|e| e.context(format!("{} of differenced series", config.method)))
}

pub fn extract(series: &TimeSeries, config: &FeatureConfig) -> Result<FeatureVector> {
    extract_values(&series.values, config)
        .map_err(|e| e.context(format!("station {}", series.station_id())))
}
