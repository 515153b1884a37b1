//! Sample distributions of named variables under a (conditional) model.

use std::fmt::Write as _;

use jointshape::summary::{sample_histograms, Histogram};
use jointshape::{Error, LatentModel, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub samples: usize,
    pub seed: u64,
    pub histograms: Vec<Histogram>,
}

impl DistributionReport {
    pub fn get(&self, variable: &str) -> Option<&Histogram> {
        self.histograms.iter().find(|h| h.variable == variable)
    }

    /// One line per bin: `variable,lower,upper,mass`. Level bins repeat the
    /// level in both bounds.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variable,lower,upper,mass\n");
        for h in &self.histograms {
            for (k, m) in h.mass.iter().enumerate() {
                let (lo, hi) = if h.levels.is_empty() {
                    let (a, b) = (h.edges[k], h.edges[k + 1]);
                    if h.log_scale { (a.exp(), b.exp()) } else { (a, b) }
                } else {
                    (h.levels[k], h.levels[k])
                };
                let _ = writeln!(out, "{},{lo},{hi},{m:.6}", h.variable);
            }
        }
        out
    }
}

/// Histograms of `n` samples of each named variable.
pub fn sample_distribution_report<M: LatentModel + ?Sized>(
    model: &M,
    variables: &[&str],
    n: usize,
    bins: usize,
    seed: u64,
) -> Result<DistributionReport> {
    if n == 0 {
        return Err(Error::InvalidTask("sample count must be positive".into()));
    }
    let rows = variables
        .iter()
        .map(|v| {
            model
                .prior()
                .index_of(v)
                .ok_or_else(|| Error::InvalidTask(format!("unknown variable '{v}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DistributionReport {
        samples: n,
        seed,
        histograms: sample_histograms(model, &rows, n, seed, bins),
    })
}
