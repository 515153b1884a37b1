//! Posterior summaries and sample histograms shared by the command-line
//! tool and the HTTP service.

use serde::{Deserialize, Serialize};

use crate::model::LatentModel;
use crate::spec::{ValueSource, VariableSpec};

/// Point prediction, spread and leading modes of a (conditional) model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub predicted: Vec<f64>,
    /// Data-space spread per component, see [`LatentModel::data_stddev`].
    pub stddev: Vec<f64>,
    pub modes: Vec<ModeSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub eigenvalue: f64,
    /// Data-space change from the mean instance to one standard deviation
    /// along the mode.
    pub displacement: Vec<f64>,
}

/// Summarizes `model` with its `mode_count` leading modes.
pub fn summarize<M: LatentModel + ?Sized>(model: &M, mode_count: usize) -> PosteriorSummary {
    let prior = model.prior();
    let predicted = model.predict();
    let mean = model.latent_mean();
    let modes = model
        .modes(mode_count)
        .into_iter()
        .map(|mode| {
            let shifted = mean + &mode.direction * mode.variance.max(0.0).sqrt();
            let displacement = prior
                .from_latent(&shifted)
                .iter()
                .zip(&predicted)
                .map(|(a, b)| a - b)
                .collect();
            ModeSummary {
                eigenvalue: mode.variance,
                displacement,
            }
        })
        .collect();
    PosteriorSummary {
        predicted,
        stddev: model.data_stddev(),
        modes,
    }
}

/// Sample distribution of one variable. Level-valued variables get one bin
/// per admissible level (`levels`); continuous ones get equal-width bins
/// (`edges`, one more than `mass`). Totals of feature values are binned on
/// the natural-log scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub variable: String,
    pub log_scale: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
}

/// Bins `samples` of the variable declared by `spec`.
pub fn histogram(spec: &VariableSpec, samples: &[f64], bins: usize) -> Histogram {
    let n = samples.len().max(1) as f64;
    if let Some(levels) = spec.levels.as_ref().filter(|_| !spec.is_continuous()) {
        let mut counts = vec![0usize; levels.len()];
        for &s in samples {
            if let Some(k) = levels.iter().position(|&l| l == s) {
                counts[k] += 1;
            }
        }
        let mass = counts.iter().map(|&c| c as f64 / n).collect();
        return Histogram {
            variable: spec.name.clone(),
            log_scale: false,
            levels: levels.clone(),
            edges: Vec::new(),
            mass,
        };
    }
    let log_scale = spec.source == ValueSource::FeatureTotal;
    let values: Vec<f64> = if log_scale {
        samples.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect()
    } else {
        samples.to_vec()
    };
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || lo == hi {
        let (lo, hi) = if values.is_empty() { (0.0, 0.0) } else { (lo, hi) };
        return Histogram {
            variable: spec.name.clone(),
            log_scale,
            levels: Vec::new(),
            edges: vec![lo, hi],
            mass: vec![if values.is_empty() { 0.0 } else { 1.0 }],
        };
    }
    let bins = bins.max(1);
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| if k == bins { hi } else { lo + k as f64 * width }).collect();
    let mut counts = vec![0usize; bins];
    for v in values {
        counts[(((v - lo) / width).floor() as usize).min(bins - 1)] += 1;
    }
    let mass = counts.iter().map(|&c| c as f64 / n).collect();
    Histogram {
        variable: spec.name.clone(),
        log_scale,
        levels: Vec::new(),
        edges,
        mass,
    }
}

/// Histograms of `n` samples of the selected components.
pub fn sample_histograms<M: LatentModel + ?Sized>(
    model: &M,
    rows: &[usize],
    n: usize,
    seed: u64,
    bins: usize,
) -> Vec<Histogram> {
    let samples = model.sample_rows(n, seed, rows);
    rows.iter()
        .enumerate()
        .map(|(k, &i)| {
            let values: Vec<f64> = samples.row(k).iter().copied().collect();
            histogram(model.prior().spec(i), &values, bins)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{Block, MarginalChoice};

    #[test]
    fn level_histogram_counts_levels() {
        let spec = VariableSpec::ordinal("mrs", (0..=6).map(f64::from));
        let h = histogram(&spec, &[0.0, 2.0, 2.0, 6.0], 10);
        assert_eq!(h.levels.len(), 7);
        assert_eq!(h.mass, vec![0.25, 0.0, 0.5, 0.0, 0.0, 0.0, 0.25]);
    }

    #[test]
    fn continuous_histogram_is_normalized() {
        let spec = VariableSpec::continuous("age", Block::Indicator, MarginalChoice::Empirical);
        let samples: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin() * 10.0 + 60.0).collect();
        let h = histogram(&spec, &samples, 20);
        assert_eq!(h.edges.len(), 21);
        assert!((h.mass.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_samples_make_one_bin() {
        let spec = VariableSpec::continuous("age", Block::Indicator, MarginalChoice::Empirical);
        let h = histogram(&spec, &[80.0; 50], 20);
        assert_eq!(h.mass, vec![1.0]);
    }

    #[test]
    fn totals_are_binned_on_log_scale() {
        let spec = VariableSpec::continuous("volume", Block::Indicator, MarginalChoice::Empirical)
            .with_source(ValueSource::FeatureTotal);
        let h = histogram(&spec, &[1.0, std::f64::consts::E], 2);
        assert!(h.log_scale);
        assert_eq!(h.edges, vec![0.0, 0.5, 1.0]);
    }
}
