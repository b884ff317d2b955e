//! Pearson goodness-of-fit with tail merging.

#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF};

pub struct FitResult {
    pub statistic: f64,
    pub df: usize,
    pub critical: f64,
}

impl FitResult {
    pub fn passes(&self) -> bool {
        self.statistic < self.critical
    }
}

/// `probs` need not be normalised. Adjacent bins are merged, left to right,
/// until every bin expects at least five hits; a short remainder folds into
/// the last kept bin.
pub fn chi_square(observed: &[u64], probs: &[f64], alpha: f64) -> FitResult {
    assert_eq!(observed.len(), probs.len());
    let total: u64 = observed.iter().sum();
    let norm: f64 = probs.iter().sum();
    let expected: Vec<f64> = probs.iter().map(|p| p / norm * total as f64).collect();

    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (o, e) in observed.iter().zip(&expected) {
        o_acc += *o as f64;
        e_acc += e;
        if e_acc >= 5.0 {
            bins.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => bins.push((o_acc, e_acc)),
        }
    }

    let statistic = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = bins.len().saturating_sub(1).max(1);
    let critical = ChiSquared::new(df as f64).unwrap().inverse_cdf(1.0 - alpha);
    FitResult {
        statistic,
        df,
        critical,
    }
}

/// Truncated geometric over `window` ranks, written out independently of
/// the client's weight table.
pub fn truncated_geometric(lambda: f64, window: usize) -> Vec<f64> {
    let q = 1.0 - lambda;
    let z = (1.0 - q.powf(window as f64)) / lambda;
    (0..window).map(|r| q.powf(r as f64) / z).collect()
}
