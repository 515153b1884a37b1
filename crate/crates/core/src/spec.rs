//! Per-component variable declarations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Continuous,
    Binary,
    Discrete,
    Ordinal,
}

/// Which section of the instance vector a component belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Coordinate,
    Feature,
    Indicator,
}

impl Block {
    pub const ALL: [Block; 3] = [Block::Coordinate, Block::Feature, Block::Indicator];

    pub fn name(self) -> &'static str {
        match self {
            Block::Coordinate => "shape",
            Block::Feature => "feature",
            Block::Indicator => "indicator",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginalChoice {
    Empirical,
    Gaussian,
}

/// Where an indicator's value comes from when a cohort is loaded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueSource {
    #[default]
    Recorded,
    /// Sum of the instance's per-vertex feature values.
    FeatureTotal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VariableKind,
    pub block: Block,
    pub marginal: MarginalChoice,
    /// Ordered admissible values. Required for ordinal variables; binary
    /// variables default to `[0, 1]`.
    #[serde(default, alias = "ordinal_levels", skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
    /// Optional display names for `levels`, index-aligned (e.g. `female`, `male`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "is_recorded")]
    pub source: ValueSource,
}

fn is_recorded(s: &ValueSource) -> bool {
    *s == ValueSource::Recorded
}

impl VariableSpec {
    pub fn continuous(name: impl Into<String>, block: Block, marginal: MarginalChoice) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Continuous,
            block,
            marginal,
            levels: None,
            labels: None,
            source: ValueSource::Recorded,
        }
    }

    pub fn binary(name: impl Into<String>, labels: Option<[&str; 2]>) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Binary,
            block: Block::Indicator,
            marginal: MarginalChoice::Empirical,
            levels: Some(vec![0.0, 1.0]),
            labels: labels.map(|l| l.iter().map(|s| s.to_string()).collect()),
            source: ValueSource::Recorded,
        }
    }

    pub fn ordinal(name: impl Into<String>, levels: impl IntoIterator<Item = f64>) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Ordinal,
            block: Block::Indicator,
            marginal: MarginalChoice::Empirical,
            levels: Some(levels.into_iter().collect()),
            labels: None,
            source: ValueSource::Recorded,
        }
    }

    pub fn with_source(mut self, source: ValueSource) -> Self {
        self.source = source;
        self
    }

    pub fn is_continuous(&self) -> bool {
        self.kind == VariableKind::Continuous
    }

    /// Checks the declaration itself and fills in default binary levels.
    pub fn validated(mut self) -> Result<Self> {
        let bad = |msg: &str| Err(Error::InvalidInput(format!("variable '{}': {msg}", self.name)));
        if self.kind != VariableKind::Continuous && self.marginal == MarginalChoice::Gaussian {
            return bad("non-continuous variables require an empirical marginal");
        }
        if self.kind == VariableKind::Binary && self.levels.is_none() {
            self.levels = Some(vec![0.0, 1.0]);
        }
        if let Some(levels) = &self.levels {
            if levels.iter().any(|v| !v.is_finite()) {
                return bad("levels must be finite");
            }
            if levels.windows(2).any(|w| w[0] >= w[1]) {
                return bad("levels must be strictly increasing");
            }
            if let Some(labels) = &self.labels {
                if labels.len() != levels.len() {
                    return bad("labels must align with levels");
                }
            }
        } else if self.labels.is_some() {
            return bad("labels require levels");
        }
        match self.kind {
            VariableKind::Binary if self.levels.as_ref().map_or(0, Vec::len) != 2 => {
                bad("binary variables have exactly two levels")
            }
            VariableKind::Ordinal if self.levels.as_ref().map_or(0, Vec::len) < 2 => {
                bad("ordinal variables need at least two levels")
            }
            _ => Ok(self),
        }
    }

    /// Whether `value` is an admissible value of this variable.
    pub fn admits(&self, value: f64) -> bool {
        if !value.is_finite() {
            return false;
        }
        match (&self.levels, self.kind) {
            (_, VariableKind::Continuous) => true,
            (Some(levels), _) => levels.contains(&value),
            (None, _) => value.fract() == 0.0,
        }
    }

    /// Parses a user-supplied value, accepting level labels as well as numbers.
    pub fn parse_value(&self, text: &str) -> Result<f64> {
        let text = text.trim();
        let value = match text.parse::<f64>() {
            Ok(v) => v,
            Err(_) => {
                let idx = self
                    .labels
                    .as_ref()
                    .and_then(|labels| labels.iter().position(|l| l.eq_ignore_ascii_case(text)));
                match (idx, &self.levels) {
                    (Some(i), Some(levels)) => levels[i],
                    _ => return Err(self.invalid_level(text)),
                }
            }
        };
        if self.admits(value) {
            Ok(value)
        } else {
            Err(self.invalid_level(text))
        }
    }

    pub(crate) fn invalid_level(&self, value: impl ToString) -> Error {
        Error::InvalidLevel {
            name: self.name.clone(),
            value: value.to_string(),
        }
    }
}
