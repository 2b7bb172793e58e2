//! Return-probability series with provenance metadata.

use serde::{Deserialize, Serialize};

/// How a [`ReturnSeries`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesMethod {
    /// Direct lattice evolution (brute-force oracle).
    Direct,
    /// Momentum-space quadrature.
    Fourier,
    /// Hand-constructed values (tests, tail studies).
    Synthetic,
}

/// The sequence p_o(t) for t = 0..T together with how it was computed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReturnSeries {
    /// p_o(t), indexed by t starting at 0.
    pub p: Vec<f64>,
    pub method: SeriesMethod,
    /// Points per axis of the momentum grid, when method is Fourier.
    pub grid: Option<usize>,
    pub label: String,
    /// True when the quadrature met the Nyquist bound (always true for Direct).
    pub exact: bool,
}

impl ReturnSeries {
    pub fn synthetic(p: Vec<f64>, label: impl Into<String>) -> Self {
        ReturnSeries {
            p,
            method: SeriesMethod::Synthetic,
            grid: None,
            label: label.into(),
            exact: true,
        }
    }

    /// Largest time index in the series.
    pub fn t_max(&self) -> usize {
        self.p.len().saturating_sub(1)
    }
}
