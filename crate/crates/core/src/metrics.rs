//! Cohort statistics with standard errors.

use serde::{Deserialize, Serialize};

/// Sample mean with its standard error and 95% normal interval.
///
/// The standard error uses the population standard deviation, so a rate
/// `p` over `n` trials has SEM `√(p(1−p)/n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std: f64,
    pub sem: f64,
    pub ci95: [f64; 2],
}

impl Estimate {
    /// `None` for an empty sample. Summation is in iteration order.
    pub fn from_samples(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        let sem = std / n.sqrt();
        Some(Self { mean, std, sem, ci95: [mean - 1.96 * sem, mean + 1.96 * sem] })
    }

    pub fn rate(hits: usize, n: usize) -> Option<Self> {
        if n == 0 {
            return None;
        }
        let p = hits as f64 / n as f64;
        let std = (p * (1.0 - p)).sqrt();
        let sem = std / (n as f64).sqrt();
        Some(Self { mean: p, std, sem, ci95: [p - 1.96 * sem, p + 1.96 * sem] })
    }
}
