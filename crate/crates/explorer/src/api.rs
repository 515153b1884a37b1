//! Request and response bodies, and the pure functions that compute them.

use std::collections::BTreeMap;

use jointshape::io::topology_checksum;
use jointshape::shape::devectorize;
use jointshape::summary::{sample_histograms, Histogram};
use jointshape::{
    condition, summarize, Block, BlockSigmas, Error, JointModel, LatentModel, MarginalChoice, PartialObservation, Result,
    VariableKind,
};
use serde::{Deserialize, Serialize};

/// Observed values and noise shared by every query on a (conditional) model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Conditioning {
    /// Variable name to value: a number, or a label string for labelled
    /// binary variables.
    pub assignments: BTreeMap<String, serde_json::Value>,
    /// Observation noise per block (`shape`, `feature`, `indicator`);
    /// missing blocks use 0.
    pub sigmas: BlockSigmas,
    /// Keep only the leading `rank` components of the prior.
    pub rank: Option<usize>,
}

impl Conditioning {
    fn assignment_pairs(&self) -> Result<Vec<(String, String)>> {
        self.assignments
            .iter()
            .map(|(name, value)| {
                let text = match value {
                    serde_json::Value::String(s) => s.clone(),
                    serde_json::Value::Number(n) => n.to_string(),
                    serde_json::Value::Bool(b) => u8::from(*b).to_string(),
                    other => return Err(Error::InvalidInput(format!("value of '{name}' must be a number or a string, got {other}"))),
                };
                Ok((name.clone(), text))
            })
            .collect()
    }

    /// Runs `f` on the prior (possibly truncated) or on the conditional model.
    pub fn with_model<T>(&self, model: &JointModel, f: impl FnOnce(&dyn LatentModel) -> Result<T>) -> Result<T> {
        let truncated;
        let model = match self.rank {
            Some(r) if r == 0 || r > model.latent().rank() => {
                return Err(Error::InvalidRank { rank: r, max: model.latent().rank() });
            }
            Some(r) if r < model.latent().rank() => {
                truncated = model.truncated(r);
                &truncated
            }
            _ => model,
        };
        if self.assignments.is_empty() {
            return f(model);
        }
        let pairs = self.assignment_pairs()?;
        let obs = PartialObservation::from_assignments(model, &pairs, &self.sigmas)?;
        f(&condition(model, &obs)?)
    }
}

fn default_samples() -> usize {
    1000
}

fn default_modes() -> usize {
    3
}

fn default_bins() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRequest {
    #[serde(flatten)]
    pub conditioning: Conditioning,
    /// Samples drawn for the histograms.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub seed: u64,
    /// Variables to histogram; all indicators when omitted.
    #[serde(default)]
    pub histograms: Option<Vec<String>>,
}

impl Default for ConditionRequest {
    fn default() -> Self {
        Self {
            conditioning: Conditioning::default(),
            samples: default_samples(),
            modes: default_modes(),
            bins: default_bins(),
            seed: 0,
            histograms: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorValue {
    pub name: String,
    pub value: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeField {
    pub eigenvalue: f64,
    /// Vertex displacement at one standard deviation along the mode.
    pub displacement: Vec<[f64; 3]>,
    pub feature_change: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResponse {
    pub vertices: Vec<[f64; 3]>,
    /// Per vertex, the norm of the three coordinate standard deviations.
    pub vertex_stddev: Vec<f64>,
    pub features: Vec<f64>,
    pub feature_stddev: Vec<f64>,
    pub indicators: Vec<IndicatorValue>,
    pub histograms: Vec<Histogram>,
    pub modes: Vec<ModeField>,
}

fn vertex_triples(values: &[f64]) -> Vec<[f64; 3]> {
    values.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

fn histogram_rows(model: &JointModel, names: Option<&[String]>) -> Result<Vec<usize>> {
    match names {
        None => Ok(model.layout().range(Block::Indicator).collect()),
        Some(names) => names
            .iter()
            .map(|n| model.index_of(n).ok_or_else(|| Error::InvalidTask(format!("unknown variable '{n}'"))))
            .collect(),
    }
}

pub fn condition_response(model: &JointModel, req: &ConditionRequest) -> Result<ConditionResponse> {
    if req.samples == 0 || req.bins == 0 {
        return Err(Error::InvalidInput("samples and bins must be positive".into()));
    }
    let rows = histogram_rows(model, req.histograms.as_deref())?;
    let layout = *model.layout();
    req.conditioning.with_model(model, |m| {
        let summary = summarize(m, req.modes);
        let predicted = devectorize(&summary.predicted, &layout)?;
        let sd = &summary.stddev;
        let coords = layout.range(Block::Coordinate).start;
        let vertex_stddev = (0..layout.vertices)
            .map(|k| (0..3).map(|a| sd[coords + 3 * k + a].powi(2)).sum::<f64>().sqrt())
            .collect();
        let features = layout.range(Block::Feature);
        let indicators = layout
            .range(Block::Indicator)
            .zip(predicted.indicators)
            .map(|(i, value)| IndicatorValue {
                name: model.spec(i).name.clone(),
                value,
                stddev: sd[i],
            })
            .collect();
        let modes = summary
            .modes
            .iter()
            .map(|mode| ModeField {
                eigenvalue: mode.eigenvalue,
                displacement: vertex_triples(&mode.displacement[layout.range(Block::Coordinate)]),
                feature_change: mode.displacement[features.clone()].to_vec(),
            })
            .collect();
        Ok(ConditionResponse {
            vertices: predicted.vertices,
            vertex_stddev,
            features: predicted.features,
            feature_stddev: sd[features.clone()].to_vec(),
            indicators,
            histograms: sample_histograms(m, &rows, req.samples, req.seed, req.bins),
            modes,
        })
    })
}

fn default_k() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRequest {
    #[serde(flatten)]
    pub conditioning: Conditioning,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeResponse {
    pub k: usize,
    pub t: f64,
    pub eigenvalue: f64,
    /// Euclidean distance from the latent mean: `|t|·√λ_k`.
    pub latent_offset: f64,
    pub vertices: Vec<[f64; 3]>,
    pub features: Vec<f64>,
    pub indicators: BTreeMap<String, f64>,
}

pub fn mode_response(model: &JointModel, req: &ModeRequest) -> Result<ModeResponse> {
    if !req.t.is_finite() {
        return Err(Error::InvalidInput(format!("t must be finite, got {}", req.t)));
    }
    let layout = *model.layout();
    req.conditioning.with_model(model, |m| {
        let latent = m.mode_latent(req.k, req.t)?;
        let eigenvalue = m.modes(req.k).pop().map(|mode| mode.variance).unwrap_or(0.0);
        let parts = devectorize(&m.prior().from_latent(&latent), &layout)?;
        Ok(ModeResponse {
            k: req.k,
            t: req.t,
            eigenvalue,
            latent_offset: (&latent - m.latent_mean()).norm(),
            vertices: parts.vertices,
            features: parts.features,
            indicators: layout
                .range(Block::Indicator)
                .map(|i| model.spec(i).name.clone())
                .zip(parts.indicators)
                .collect(),
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRequest {
    #[serde(flatten)]
    pub conditioning: Conditioning,
    #[serde(default = "default_samples")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    /// Variables to return; all indicators when omitted.
    #[serde(default)]
    pub variables: Option<Vec<String>>,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResponse {
    pub variables: Vec<String>,
    /// One row per draw, values in `variables` order.
    pub samples: Vec<Vec<f64>>,
    pub histograms: Vec<Histogram>,
}

/// Largest number of draws served by `/sample`.
pub const MAX_SAMPLES: usize = 100_000;

pub fn sample_response(model: &JointModel, req: &SampleRequest) -> Result<SampleResponse> {
    if req.n == 0 || req.n > MAX_SAMPLES || req.bins == 0 {
        return Err(Error::InvalidInput(format!("n must lie in 1..={MAX_SAMPLES} and bins be positive")));
    }
    let rows = histogram_rows(model, req.variables.as_deref())?;
    req.conditioning.with_model(model, |m| {
        let samples = m.sample_rows(req.n, req.seed, &rows);
        let histograms = rows
            .iter()
            .enumerate()
            .map(|(k, &i)| {
                let values: Vec<f64> = samples.row(k).iter().copied().collect();
                jointshape::summary::histogram(model.spec(i), &values, req.bins)
            })
            .collect();
        Ok(SampleResponse {
            variables: rows.iter().map(|&i| model.spec(i).name.clone()).collect(),
            samples: samples.column_iter().map(|c| c.iter().copied().collect()).collect(),
            histograms,
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableMeta {
    pub name: String,
    pub kind: VariableKind,
    /// Smallest and largest training value.
    pub range: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMeta {
    pub block: Block,
    pub components: usize,
    pub marginal: MarginalChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ModelMeta {
    pub N: usize,
    pub K: usize,
    pub d: usize,
    pub M: usize,
    pub rank: usize,
    /// One entry per indicator followed by the two per-vertex blocks.
    pub specs: Vec<VariableMeta>,
    pub blocks: Vec<BlockMeta>,
    pub topology_checksum: String,
    pub faces: Vec<[u32; 3]>,
}

pub fn model_meta(model: &JointModel) -> ModelMeta {
    let layout = model.layout();
    let specs = layout
        .range(Block::Indicator)
        .map(|i| {
            let spec = model.spec(i);
            let (lo, hi) = model.marginals()[i].range();
            VariableMeta {
                name: spec.name.clone(),
                kind: spec.kind,
                range: [lo, hi],
                levels: spec.levels.clone(),
                labels: spec.labels.clone(),
            }
        })
        .collect();
    let blocks = [Block::Coordinate, Block::Feature]
        .into_iter()
        .map(|block| {
            let range = layout.range(block);
            BlockMeta {
                block,
                components: range.len(),
                marginal: model.spec(range.start).marginal,
            }
        })
        .collect();
    ModelMeta {
        N: layout.vertices,
        K: layout.indicators,
        d: model.dimension(),
        M: model.fit_metadata().training_size,
        rank: model.latent().rank(),
        specs,
        blocks,
        topology_checksum: topology_checksum(model.topology()),
        faces: model.topology().to_vec(),
    }
}
