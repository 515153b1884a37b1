//! Held-out reconstruction of one part of an instance from other parts.

use std::fmt::Write as _;

use jointshape::crossval::{cross_validate_sigma, SigmaGrid};
use jointshape::normal;
use jointshape::shape::Cohort;
use jointshape::{
    fit_joint_model, Block, BlockSigmas, ConditioningPlan, Error, FitConfig, LatentModel, MarginalModel, Result, ValueSource, VariableKind,
};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Disjoint training and validation instance indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

impl Split {
    pub fn new(train: Vec<usize>, validation: Vec<usize>, instances: usize) -> Result<Self> {
        let mut seen = vec![false; instances];
        for &j in train.iter().chain(&validation) {
            if j >= instances || std::mem::replace(&mut seen[j], true) {
                return Err(Error::InvalidConfig(format!("split index {j} is out of range or repeated")));
            }
        }
        if train.len() < 3 {
            return Err(Error::InvalidConfig(format!("training set needs at least 3 instances, got {}", train.len())));
        }
        if validation.is_empty() {
            return Err(Error::InvalidConfig("validation set is empty".into()));
        }
        Ok(Self { train, validation })
    }

    /// Random split keeping 600 of every 793 instances for training.
    pub fn proportional(instances: usize, seed: u64) -> Result<Self> {
        let train_size = ((instances * 600) as f64 / 793.0).round() as usize;
        Self::with_train_size(instances, train_size, seed)
    }

    pub fn with_train_size(instances: usize, train_size: usize, seed: u64) -> Result<Self> {
        let mut order: Vec<usize> = (0..instances).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let split = train_size.min(instances);
        let mut train = order[..split].to_vec();
        let mut validation = order[split..].to_vec();
        train.sort_unstable();
        validation.sort_unstable();
        Self::new(train, validation, instances)
    }
}

/// What is observed when predicting a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Column {
    /// No observation: the marginal medians.
    Mean,
    /// The mesh coordinates.
    Ventricles,
    /// The per-vertex features.
    Wmh,
    /// Recorded indicators (not the feature total).
    Indicators,
    /// All indicators including the feature total.
    IndicatorsVolume,
    /// Everything except the target itself.
    Combined,
}

impl Column {
    pub const ALL: [Column; 6] = [
        Column::Mean,
        Column::Ventricles,
        Column::Wmh,
        Column::Indicators,
        Column::IndicatorsVolume,
        Column::Combined,
    ];

    /// Observation sets made of a single block.
    pub const SINGLE_BLOCK: [Column; 3] = [Column::Ventricles, Column::Wmh, Column::Indicators];

    pub fn label(self) -> &'static str {
        match self {
            Column::Mean => "mean",
            Column::Ventricles => "ventricles",
            Column::Wmh => "WMH",
            Column::Indicators => "indicators",
            Column::IndicatorsVolume => "ind + vol",
            Column::Combined => "combined",
        }
    }
}

/// A prediction target: one indicator, or a whole block.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    Indicator(String),
    Shape,
    Feature,
}

impl Target {
    pub fn parse(name: &str, cohort: &Cohort) -> Result<Self> {
        match name {
            "shape" | "ventricles" => Ok(Target::Shape),
            "feature" | "wmh" | "WMH" => Ok(Target::Feature),
            _ if cohort.indicator_specs().iter().any(|s| s.name == name) => Ok(Target::Indicator(name.to_string())),
            _ => Err(Error::InvalidTask(format!("unknown target '{name}'"))),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Target::Indicator(name) => name,
            Target::Shape => "shape",
            Target::Feature => "WMH",
        }
    }

    fn indices(&self, cohort: &Cohort) -> Vec<usize> {
        let layout = &cohort.layout;
        match self {
            Target::Shape => layout.range(Block::Coordinate).collect(),
            Target::Feature => layout.range(Block::Feature).collect(),
            Target::Indicator(name) => layout
                .range(Block::Indicator)
                .filter(|&i| cohort.specs[i].name == *name)
                .collect(),
        }
    }

    /// The column that would observe the target itself.
    pub fn self_column(&self) -> Option<Column> {
        match self {
            Target::Shape => Some(Column::Ventricles),
            Target::Feature => Some(Column::Wmh),
            Target::Indicator(_) => None,
        }
    }
}

/// How predictions of multi-level indicators are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum OrdinalScoring {
    /// The level obtained by mapping the latent mean through the marginal.
    #[default]
    Level,
    /// The posterior expectation of the level, not rounded.
    Expected,
}

fn is_ordinal(target: &Target, cohort: &Cohort) -> bool {
    match target {
        Target::Indicator(name) => cohort
            .specs
            .iter()
            .any(|s| s.name == *name && !s.is_continuous() && s.kind != VariableKind::Binary),
        _ => false,
    }
}

/// `E[g(x)]` for `x ~ N(mean, variance)` and `g` the inverse marginal, by
/// midpoint quadrature in probability.
fn expected_value(marginal: &MarginalModel, mean: f64, variance: f64) -> f64 {
    const NODES: usize = 400;
    let s = variance.max(0.0).sqrt();
    (0..NODES)
        .map(|k| marginal.from_latent(mean + s * normal::quantile((k as f64 + 0.5) / NODES as f64)))
        .sum::<f64>()
        / NODES as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub targets: Vec<String>,
    /// Fixed noise per block; `None` selects it by cross-validation on the
    /// training set.
    pub sigmas: Option<BlockSigmas>,
    pub sigma_grid: SigmaGrid,
    pub folds: usize,
    pub seed: u64,
    pub fit: FitConfig,
    /// Also report the sanity column in which a block target observes itself
    /// without noise.
    pub include_self: bool,
    pub ordinal_scoring: OrdinalScoring,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            targets: ["age", "sex", "mrs", "shape", "feature"].map(String::from).to_vec(),
            sigmas: None,
            sigma_grid: SigmaGrid::default(),
            folds: 3,
            seed: 42,
            fit: FitConfig::default(),
            include_self: false,
            ordinal_scoring: OrdinalScoring::Level,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub target: String,
    pub column: Column,
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    pub stddev: f64,
    /// Per-instance errors in validation order.
    #[serde(skip)]
    pub errors: Vec<f64>,
}

impl ReportRow {
    /// Standard error of the mean.
    pub fn standard_error(&self) -> f64 {
        self.stddev / (self.count as f64).sqrt()
    }

    /// Percentages are better when higher, every other metric when lower.
    pub fn higher_is_better(&self) -> bool {
        self.metric == METRIC_CORRECT
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub train_size: usize,
    pub validation_size: usize,
    pub seed: u64,
    pub sigmas: BlockSigmas,
}

const METRIC_MAE: &str = "mean absolute error";
const METRIC_CORRECT: &str = "% correct";
const METRIC_SHAPE: &str = "mean vertex distance";
const METRIC_FEATURE: &str = "L1 feature error";

/// Per-instance errors of one target, one column.
fn errors(target: &Target, cohort: &Cohort, predicted: &[Vec<f64>], truth: &[Vec<f64>]) -> (String, Vec<f64>) {
    match target {
        Target::Shape => (
            METRIC_SHAPE.into(),
            predicted
                .iter()
                .zip(truth)
                .map(|(p, t)| {
                    let n = p.len() / 3;
                    (0..n)
                        .map(|k| (0..3).map(|a| (p[3 * k + a] - t[3 * k + a]).powi(2)).sum::<f64>().sqrt())
                        .sum::<f64>()
                        / n as f64
                })
                .collect(),
        ),
        Target::Feature => (
            METRIC_FEATURE.into(),
            predicted
                .iter()
                .zip(truth)
                .map(|(p, t)| p.iter().zip(t).map(|(a, b)| (a - b).abs()).sum())
                .collect(),
        ),
        Target::Indicator(name) => {
            let spec = cohort.specs.iter().find(|s| s.name == *name).expect("target exists");
            if spec.kind == VariableKind::Binary {
                (
                    METRIC_CORRECT.into(),
                    predicted
                        .iter()
                        .zip(truth)
                        .map(|(p, t)| if p[0] == t[0] { 100.0 } else { 0.0 })
                        .collect(),
                )
            } else {
                (METRIC_MAE.into(), predicted.iter().zip(truth).map(|(p, t)| (p[0] - t[0]).abs()).collect())
            }
        }
    }
}

fn mean_and_stddev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Components observed by `column` when predicting `target`, or `None` when
/// the column is the target observing itself and self rows are disabled.
fn observed_components(column: Column, target: &Target, cohort: &Cohort, include_self: bool) -> Option<Vec<usize>> {
    let layout = &cohort.layout;
    let own = target.indices(cohort);
    let is_self = target.self_column() == Some(column);
    if is_self && !include_self {
        return None;
    }
    let recorded = |i: &usize| cohort.specs[*i].source == ValueSource::Recorded;
    let set: Vec<usize> = match column {
        Column::Mean => Vec::new(),
        Column::Ventricles => layout.range(Block::Coordinate).collect(),
        Column::Wmh => layout.range(Block::Feature).collect(),
        Column::Indicators => layout.range(Block::Indicator).filter(recorded).collect(),
        Column::IndicatorsVolume => layout.range(Block::Indicator).collect(),
        Column::Combined => (0..layout.dimension()).collect(),
    };
    if is_self {
        return Some(set);
    }
    Some(set.into_iter().filter(|i| !own.contains(i)).collect())
}

/// Fits on the training instances and predicts every target of every
/// validation instance from each observation column.
pub fn run_reconstruction_experiment(cohort: &Cohort, split: &Split, options: &ExperimentOptions) -> Result<ExperimentReport> {
    let split = Split::new(split.train.clone(), split.validation.clone(), cohort.len())?;
    let targets = options
        .targets
        .iter()
        .map(|t| Target::parse(t, cohort))
        .collect::<Result<Vec<_>>>()?;
    let train = cohort.data.select_columns(&split.train);
    let validation = cohort.data.select_columns(&split.validation);
    let model = fit_joint_model(&train, &cohort.specs, cohort.layout, cohort.topology.clone(), &options.fit)?;
    let sigmas = match options.sigmas {
        Some(s) => s,
        None => {
            cross_validate_sigma(
                &train,
                &cohort.specs,
                cohort.layout,
                &options.sigma_grid,
                options.folds,
                options.seed,
                &options.fit,
            )?
            .sigmas
        }
    };
    let validation_latent = jointshape::crossval::held_out_latent(&model, &validation, &(0..validation.ncols()).collect::<Vec<_>>())?;

    let mut rows = Vec::new();
    for target in &targets {
        let own = target.indices(cohort);
        let truth: Vec<Vec<f64>> = (0..validation.ncols())
            .map(|j| own.iter().map(|&i| validation[(i, j)]).collect())
            .collect();
        for column in Column::ALL {
            let Some(observed) = observed_components(column, target, cohort, options.include_self) else {
                continue;
            };
            let is_self = target.self_column() == Some(column);
            let noise: Vec<f64> = observed
                .iter()
                .map(|&i| if is_self { 0.0 } else { sigmas.get(cohort.specs[i].block) })
                .collect();
            let means: DMatrix<f64> = if observed.is_empty() {
                DMatrix::from_fn(model.dimension(), validation.ncols(), |i, _| model.latent_mean()[i])
            } else {
                let plan = ConditioningPlan::new(&model, &observed, &noise)?;
                plan.latent_means(&validation_latent.select_rows(&observed))
            };
            let expected = options.ordinal_scoring == OrdinalScoring::Expected && is_ordinal(target, cohort);
            let predicted: Vec<Vec<f64>> = if expected {
                // posterior variance does not depend on the observed values
                let i = own[0];
                let variance = if observed.is_empty() {
                    model.latent_variance()[i]
                } else {
                    let first: Vec<f64> = observed.iter().map(|&k| validation[(k, 0)]).collect();
                    ConditioningPlan::new(&model, &observed, &noise)?.condition(&first)?.latent_variance()[i]
                };
                let marginal = &model.marginals()[i];
                (0..validation.ncols())
                    .map(|j| vec![expected_value(marginal, means[(i, j)], variance)])
                    .collect()
            } else {
                (0..validation.ncols())
                    .map(|j| own.iter().map(|&i| model.marginals()[i].from_latent(means[(i, j)])).collect())
                    .collect()
            };
            let (metric, errs) = errors(target, cohort, &predicted, &truth);
            let (mean, stddev) = mean_and_stddev(&errs);
            rows.push(ReportRow {
                target: target.label().to_string(),
                column,
                metric,
                count: errs.len(),
                mean,
                stddev,
                errors: errs,
            });
        }
    }
    Ok(ExperimentReport {
        rows,
        train_size: split.train.len(),
        validation_size: split.validation.len(),
        seed: options.seed,
        sigmas,
    })
}

impl ExperimentReport {
    pub fn get(&self, target: &str, column: Column) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.target == target && r.column == column)
    }

    pub fn targets(&self) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !seen.contains(&r.target.as_str()) {
                seen.push(&r.target);
            }
        }
        seen
    }

    /// For every target and single-block column: whether the combined column
    /// is at least as good, allowing one standard error of the combined mean.
    pub fn combined_within_one_se(&self) -> Vec<(String, Column, bool)> {
        let mut out = Vec::new();
        for target in self.targets() {
            let Some(combined) = self.get(target, Column::Combined) else {
                continue;
            };
            let se = combined.standard_error();
            for column in Column::SINGLE_BLOCK {
                if let Some(other) = self.get(target, column) {
                    let ok = if combined.higher_is_better() {
                        combined.mean >= other.mean - se
                    } else {
                        combined.mean <= other.mean + se
                    };
                    out.push((target.to_string(), column, ok));
                }
            }
        }
        out
    }

    /// Comma-separated rows: `target,column,metric,n,mean,stddev`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("target,column,metric,n,mean,stddev\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{:.6}",
                r.target,
                r.column.label(),
                r.metric,
                r.count,
                r.mean,
                r.stddev
            );
        }
        out
    }

    /// Targets as rows, observation columns as columns, `mean ± stddev` cells.
    pub fn to_table(&self) -> String {
        let columns: Vec<Column> = Column::ALL
            .into_iter()
            .filter(|c| self.rows.iter().any(|r| r.column == *c))
            .collect();
        let mut cells: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["target".to_string(), "metric".to_string()];
        header.extend(columns.iter().map(|c| c.label().to_string()));
        cells.push(header);
        for target in self.targets() {
            let metric = self.rows.iter().find(|r| r.target == target).map(|r| r.metric.clone()).unwrap_or_default();
            let mut line = vec![target.to_string(), metric];
            for &c in &columns {
                line.push(match self.get(target, c) {
                    Some(r) => format!("{:.2} ± {:.2}", r.mean, r.stddev),
                    None => "-".into(),
                });
            }
            cells.push(line);
        }
        let widths: Vec<usize> = (0..cells[0].len())
            .map(|k| cells.iter().map(|l| l[k].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = format!(
            "train {} / validation {}, seed {}, sigma shape {} feature {} indicator {}\n",
            self.train_size, self.validation_size, self.seed, self.sigmas.shape, self.sigmas.feature, self.sigmas.indicator
        );
        for line in cells {
            let padded: Vec<String> = line
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            let _ = writeln!(out, "{}", padded.join("  ").trim_end());
        }
        out
    }
}
