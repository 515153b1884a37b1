//! One-dimensional marginal distributions and the latent normal-scores map.
//!
//! A marginal sends a data value `v` to `W(v)` in the open unit interval and
//! on to the latent value `Φ⁻¹(W(v))`. Empirical marginals use the plotting
//! position `r / (M + 1)` for rank `r`, so latents stay finite at the extremes.
//! Tied values share a plateau at their mid-rank.

use crate::error::{Error, Result};
use crate::normal;
use crate::spec::{MarginalChoice, VariableSpec};

/// A run of equal training values occupying ranks `lo..=hi` (1-based).
#[derive(Debug, Clone, PartialEq)]
struct TieGroup {
    value: f64,
    lo: usize,
    hi: usize,
    /// `Φ⁻¹` of the plateau, so attained values invert exactly.
    latent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMarginal {
    values: Vec<f64>,
    positions: Vec<f64>,
    groups: Vec<TieGroup>,
}

impl EmpiricalMarginal {
    /// Builds the marginal from training values in any order.
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        let m = values.len();
        let denom = (m + 1) as f64;
        let mut groups: Vec<TieGroup> = Vec::new();
        for (i, &v) in values.iter().enumerate() {
            match groups.last_mut() {
                Some(g) if g.value == v => g.hi = i + 1,
                _ => groups.push(TieGroup {
                    value: v,
                    lo: i + 1,
                    hi: i + 1,
                    latent: 0.0,
                }),
            }
        }
        for g in &mut groups {
            g.latent = normal::quantile((g.lo + g.hi) as f64 / 2.0 / denom);
        }
        let mut positions = Vec::with_capacity(m);
        for g in &groups {
            let mid = (g.lo + g.hi) as f64 / 2.0 / denom;
            positions.extend(std::iter::repeat_n(mid, g.hi - g.lo + 1));
        }
        Self { values, positions, groups }
    }

    /// Sorted training values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Plotting position of each sorted training value; ties share their mid-rank.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Distinct attained values in increasing order.
    pub fn attained(&self) -> impl Iterator<Item = f64> + '_ {
        self.groups.iter().map(|g| g.value)
    }

    pub fn is_constant(&self) -> bool {
        self.groups.len() == 1
    }

    fn denom(&self) -> f64 {
        (self.values.len() + 1) as f64
    }

    fn plateau(&self, g: &TieGroup) -> f64 {
        (g.lo + g.hi) as f64 / 2.0 / self.denom()
    }

    /// Index of the group holding `v`, or the number of groups below it.
    fn locate(&self, v: f64) -> std::result::Result<usize, usize> {
        self.groups.binary_search_by(|g| g.value.total_cmp(&v))
    }

    /// CDF for a continuous variable: plateau on attained values, linear
    /// between them, clamped to the extreme plateaus outside the training range.
    fn cdf_continuous(&self, v: f64) -> f64 {
        match self.locate(v) {
            Ok(i) => self.plateau(&self.groups[i]),
            Err(0) => self.plateau(&self.groups[0]),
            Err(i) if i == self.groups.len() => self.plateau(&self.groups[i - 1]),
            Err(i) => {
                let (a, b) = (&self.groups[i - 1], &self.groups[i]);
                let (ua, ub) = (self.plateau(a), self.plateau(b));
                ua + (ub - ua) * (v - a.value) / (b.value - a.value)
            }
        }
    }

    /// CDF for a level-valued variable. Unattained levels sit on the boundary
    /// between the neighbouring plateaus.
    fn cdf_levels(&self, v: f64) -> f64 {
        match self.locate(v) {
            Ok(i) => self.plateau(&self.groups[i]),
            Err(i) => {
                let below = if i == 0 { 0 } else { self.groups[i - 1].hi };
                (below as f64 + 0.5) / self.denom()
            }
        }
    }

    /// Inverse of the continuous CDF on the latent scale. Segments are
    /// located by their latent knots so training values come back exactly.
    fn from_latent_continuous(&self, x: f64) -> f64 {
        let first = &self.groups[0];
        let last = &self.groups[self.groups.len() - 1];
        if x <= first.latent {
            return first.value;
        }
        if x >= last.latent {
            return last.value;
        }
        // first group whose knot lies strictly above x
        let i = self.groups.partition_point(|g| g.latent <= x);
        let (a, b) = (&self.groups[i - 1], &self.groups[i]);
        if a.latent == x {
            return a.value;
        }
        let (ua, ub) = (self.plateau(a), self.plateau(b));
        let u = normal::cdf(x).clamp(ua, ub);
        a.value + (b.value - a.value) * (u - ua) / (ub - ua)
    }

    /// Smallest attained level whose interval `[(lo-½)/(M+1), (hi+½)/(M+1))` contains `u`.
    fn quantile_levels(&self, u: f64) -> f64 {
        let denom = self.denom();
        let i = self.groups.partition_point(|g| (g.hi as f64 + 0.5) / denom <= u);
        self.groups[i.min(self.groups.len() - 1)].value
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MarginalKind {
    Empirical(EmpiricalMarginal),
    Gaussian { mean: f64, stddev: f64 },
}

/// An invertible marginal for one instance component.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalModel {
    spec: VariableSpec,
    kind: MarginalKind,
}

/// Fits the marginal declared by `spec` to one training column.
pub fn fit_marginal(column: &[f64], spec: &VariableSpec) -> Result<MarginalModel> {
    let spec = spec.clone().validated()?;
    if column.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "variable '{}': need at least two training values, got {}",
            spec.name,
            column.len()
        )));
    }
    if let Some(v) = column.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("variable '{}': non-finite value {v}", spec.name)));
    }
    if !spec.is_continuous() {
        if let Some(&v) = column.iter().find(|&&v| !spec.admits(v)) {
            return Err(spec.invalid_level(v));
        }
    }
    let kind = match spec.marginal {
        MarginalChoice::Empirical => MarginalKind::Empirical(EmpiricalMarginal::new(column.to_vec())),
        MarginalChoice::Gaussian => {
            let n = column.len() as f64;
            let mean = column.iter().sum::<f64>() / n;
            let var = column.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let stddev = var.sqrt();
            if !(stddev > 0.0) {
                return Err(Error::DegenerateMarginal(spec.name.clone()));
            }
            MarginalKind::Gaussian { mean, stddev }
        }
    };
    Ok(MarginalModel { spec, kind })
}

impl MarginalModel {
    /// Reassembles a marginal from stored parts, e.g. when loading a model file.
    pub fn from_parts(spec: VariableSpec, kind: MarginalKind) -> Result<Self> {
        let spec = spec.validated()?;
        match (&kind, spec.marginal) {
            (MarginalKind::Empirical(e), MarginalChoice::Empirical) if e.len() >= 2 => {}
            (MarginalKind::Gaussian { stddev, .. }, MarginalChoice::Gaussian) if *stddev > 0.0 => {}
            _ => {
                return Err(Error::FormatError(format!(
                    "marginal table for '{}' does not match its declaration",
                    spec.name
                )))
            }
        }
        Ok(Self { spec, kind })
    }

    pub fn spec(&self) -> &VariableSpec {
        &self.spec
    }

    pub fn kind(&self) -> &MarginalKind {
        &self.kind
    }

    pub fn as_empirical(&self) -> Option<&EmpiricalMarginal> {
        match &self.kind {
            MarginalKind::Empirical(e) => Some(e),
            MarginalKind::Gaussian { .. } => None,
        }
    }

    /// `W(value)`, strictly inside (0, 1).
    pub fn cdf(&self, value: f64) -> Result<f64> {
        self.check(value)?;
        Ok(match &self.kind {
            MarginalKind::Empirical(e) if self.spec.is_continuous() => e.cdf_continuous(value),
            MarginalKind::Empirical(e) => e.cdf_levels(value),
            MarginalKind::Gaussian { mean, stddev } => {
                normal::cdf((value - mean) / stddev).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
            }
        })
    }

    /// `Φ⁻¹(W(value))`.
    pub fn to_latent(&self, value: f64) -> Result<f64> {
        match &self.kind {
            MarginalKind::Gaussian { mean, stddev } => {
                self.check(value)?;
                Ok((value - mean) / stddev)
            }
            MarginalKind::Empirical(e) if e.is_constant() => {
                self.check(value)?;
                Ok(0.0)
            }
            MarginalKind::Empirical(_) => Ok(normal::quantile(self.cdf(value)?)),
        }
    }

    /// Maps a latent value back to data space. Total on finite inputs.
    pub fn from_latent(&self, x: f64) -> f64 {
        match &self.kind {
            MarginalKind::Gaussian { mean, stddev } => mean + stddev * x,
            MarginalKind::Empirical(e) => {
                if self.spec.is_continuous() {
                    e.from_latent_continuous(x)
                } else {
                    e.quantile_levels(normal::cdf(x))
                }
            }
        }
    }

    /// Data-space value of the latent origin (the marginal median).
    pub fn median(&self) -> f64 {
        self.from_latent(0.0)
    }

    /// Smallest and largest training values (for Gaussian marginals, ±4 sd).
    pub fn range(&self) -> (f64, f64) {
        match &self.kind {
            MarginalKind::Empirical(e) => (e.values[0], e.values[e.len() - 1]),
            MarginalKind::Gaussian { mean, stddev } => (mean - 4.0 * stddev, mean + 4.0 * stddev),
        }
    }

    fn check(&self, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::InvalidInput(format!(
                "variable '{}': non-finite value {value}",
                self.spec.name
            )));
        }
        if !self.spec.admits(value) {
            return Err(self.spec.invalid_level(value));
        }
        Ok(())
    }
}
