//! Gaussian-process conditioning in the latent space.
//!
//! The prior latent vector is `y = μ + W·ξ + √δ·η` with `W = U·diag(√λ)`,
//! `ξ ~ N(0, I_r)` and `η ~ N(0, I_d)`. An observation of component `i` is
//! `ẑ_i = y_i + ε_i` with `ε_i ~ N(0, σ_i²)`. Marginalizing the residual of
//! the observed components gives `ẑ_O = μ_O + W_O·ξ + noise(A)`, with
//! `A = diag(δ + σ_i²)`, so the posterior of `ξ` needs only an `r × r` or a
//! `q × q` solve. Given `ξ`, each observed residual is shrunk by
//! `κ_i = δ / (δ + σ_i²)`. The resulting posterior
//!
//! ```text
//! y | ẑ = m₀ + W̃·ξ + ν,   ξ ~ N(m_ξ, P),   ν ~ N(0, diag(ω))
//! ```
//!
//! with `W̃_i = (1 − κ_i)·W_i` and `ω_i = δσ_i²/(δ + σ_i²)` on observed rows
//! (`W̃_i = W_i`, `ω_i = δ` elsewhere) reproduces the dense conditional mean
//! `μ + Σ_{·O}(Σ_OO + diag σ²)⁻¹(ẑ − μ_O)` and covariance
//! `Σ − Σ_{·O}(Σ_OO + diag σ²)⁻¹Σ_{O·}` exactly.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{JointModel, LatentModel, Mode};
use crate::spec::Block;

/// One observed component, value in data space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedValue {
    pub index: usize,
    pub value: f64,
    pub sigma: f64,
}

/// A set of observed components with per-entry noise.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartialObservation {
    entries: Vec<ObservedValue>,
}

impl PartialObservation {
    pub fn new(entries: Vec<ObservedValue>) -> Result<Self> {
        let mut obs = Self::default();
        for e in entries {
            obs.push(e)?;
        }
        Ok(obs)
    }

    pub fn push(&mut self, entry: ObservedValue) -> Result<()> {
        if self.entries.iter().any(|e| e.index == entry.index) {
            return Err(Error::InvalidInput(format!("component {} observed twice", entry.index)));
        }
        if !(entry.sigma >= 0.0) || !entry.sigma.is_finite() {
            return Err(Error::InvalidInput(format!("noise sigma must be finite and ≥ 0, got {}", entry.sigma)));
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Builds an observation from `name = value` pairs, with noise chosen per block.
    pub fn from_assignments<S: AsRef<str>>(
        model: &JointModel,
        assignments: &[(S, S)],
        sigmas: &BlockSigmas,
    ) -> Result<Self> {
        let mut obs = Self::default();
        for (name, value) in assignments {
            let (name, value) = (name.as_ref(), value.as_ref());
            let index = model.index_of(name).ok_or_else(|| Error::InvalidLevel {
                name: name.to_string(),
                value: format!("{value} (unknown variable)"),
            })?;
            let spec = model.spec(index);
            let value = spec.parse_value(value)?;
            obs.push(ObservedValue {
                index,
                value,
                sigma: sigmas.get(spec.block),
            })?;
        }
        Ok(obs)
    }

    pub fn entries(&self) -> &[ObservedValue] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.index).collect()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.sigma).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }
}

/// Observation noise per block of the instance vector.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct BlockSigmas {
    pub shape: f64,
    pub feature: f64,
    pub indicator: f64,
}

impl Default for BlockSigmas {
    fn default() -> Self {
        Self::uniform(0.0)
    }
}

impl BlockSigmas {
    pub fn uniform(sigma: f64) -> Self {
        Self {
            shape: sigma,
            feature: sigma,
            indicator: sigma,
        }
    }

    pub fn get(&self, block: Block) -> f64 {
        match block {
            Block::Coordinate => self.shape,
            Block::Feature => self.feature,
            Block::Indicator => self.indicator,
        }
    }

    pub fn set(&mut self, block: Block, sigma: f64) {
        match block {
            Block::Coordinate => self.shape = sigma,
            Block::Feature => self.feature = sigma,
            Block::Indicator => self.indicator = sigma,
        }
    }
}

/// Posterior covariance of the factor coordinates `ξ`.
#[derive(Debug, Clone)]
enum FactorPosterior {
    /// `P = (I + W_Oᵀ A⁻¹ W_O)⁻¹`, solved in `r × r`.
    Information { factor: DMatrix<f64> },
    /// `P = I − HᵀH` with `H = L_S⁻¹ W_O`, solved in `q × q`.
    Downdate { h: DMatrix<f64> },
}

/// Everything about a conditioning problem that does not depend on the
/// observed values: which components are observed and with what noise.
/// One plan serves any number of observations of the same components.
#[derive(Debug, Clone)]
pub struct ConditioningPlan<'a> {
    model: &'a JointModel,
    indices: Vec<usize>,
    kappa: Vec<f64>,
    omega: Vec<f64>,
    /// `m_ξ = gain · (ẑ_O − μ_O)`, `r × q`.
    gain: DMatrix<f64>,
    posterior: FactorPosterior,
}

impl<'a> ConditioningPlan<'a> {
    pub fn new(model: &'a JointModel, indices: &[usize], sigmas: &[f64]) -> Result<Self> {
        let d = model.dimension();
        if indices.is_empty() {
            return Err(Error::InvalidInput("observation is empty".into()));
        }
        if indices.len() != sigmas.len() {
            return Err(Error::InvalidInput("one sigma per observed component is required".into()));
        }
        let mut seen = vec![false; d];
        for &i in indices {
            if i >= d {
                return Err(Error::InvalidInput(format!("component {i} out of range 0..{d}")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidInput(format!("component {i} observed twice")));
            }
        }
        if sigmas.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidInput("noise sigma must be finite and ≥ 0".into()));
        }
        let delta = model.latent().jitter();
        let q = indices.len();
        let noise: Vec<f64> = sigmas.iter().map(|s| delta + s * s).collect();
        let (kappa, omega): (Vec<f64>, Vec<f64>) = sigmas
            .iter()
            .map(|s| {
                if delta > 0.0 {
                    let s2 = s * s;
                    (delta / (delta + s2), delta * s2 / (delta + s2))
                } else {
                    (0.0, 0.0)
                }
            })
            .unzip();
        let w_o = model.factor_rows(indices);
        let r = w_o.ncols();

        let use_information = q > r && noise.iter().all(|&a| a > 0.0);
        let (gain, posterior) = if use_information {
            // M = I + W_Oᵀ A⁻¹ W_O
            let mut scaled = w_o.clone();
            for (mut row, a) in scaled.row_iter_mut().zip(&noise) {
                row /= *a;
            }
            let wt_ainv = scaled.transpose();
            let mut m = DMatrix::identity(r, r);
            m.gemm(1.0, &wt_ainv, &w_o, 1.0);
            let chol = Cholesky::new(m).ok_or(Error::SingularConditioning)?;
            let gain = chol.solve(&wt_ainv);
            let l = chol.l();
            let factor = l
                .transpose()
                .solve_upper_triangular(&DMatrix::identity(r, r))
                .ok_or(Error::SingularConditioning)?;
            (gain, FactorPosterior::Information { factor })
        } else {
            // S = W_O W_Oᵀ + A
            let mut s = &w_o * w_o.transpose();
            for (k, a) in noise.iter().enumerate() {
                s[(k, k)] += a;
            }
            let scale = s.diagonal().amax().max(f64::MIN_POSITIVE);
            let chol = Cholesky::new(s).ok_or(Error::SingularConditioning)?;
            let l = chol.l();
            if l.diagonal().iter().any(|&p| p * p <= 1e-13 * scale) {
                return Err(Error::SingularConditioning);
            }
            let h = l.solve_lower_triangular(&w_o).ok_or(Error::SingularConditioning)?;
            let gain = chol.solve(&w_o).transpose();
            (gain, FactorPosterior::Downdate { h })
        };
        Ok(Self {
            model,
            indices: indices.to_vec(),
            kappa,
            omega,
            gain,
            posterior,
        })
    }

    pub fn from_observation(model: &'a JointModel, obs: &PartialObservation) -> Result<Self> {
        Self::new(model, &obs.indices(), &obs.sigmas())
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Maps data-space observed values to their latent scores.
    pub fn latent_values(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.indices.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for {} observed components",
                values.len(),
                self.indices.len()
            )));
        }
        self.indices
            .iter()
            .zip(values)
            .map(|(&i, &v)| self.model.marginals()[i].to_latent(v))
            .collect()
    }

    fn factor_mean(&self, latent_values: &[f64]) -> DVector<f64> {
        let mu = self.model.latent().mean();
        let residual = DVector::from_iterator(
            self.indices.len(),
            self.indices.iter().zip(latent_values).map(|(&i, &z)| z - mu[i]),
        );
        &self.gain * residual
    }

    /// Posterior latent mean for the given latent observed values.
    pub fn latent_mean(&self, latent_values: &[f64]) -> DVector<f64> {
        let m_xi = self.factor_mean(latent_values);
        let mu = self.model.latent().mean();
        let projected = self.model.latent().basis()
            * DVector::from_iterator(
                m_xi.len(),
                m_xi.iter().zip(self.model.latent().eigenvalues().iter()).map(|(m, l)| m * l.sqrt()),
            );
        let mut mean = mu + projected;
        for (k, &i) in self.indices.iter().enumerate() {
            let kappa = self.kappa[k];
            mean[i] = kappa * latent_values[k] + (1.0 - kappa) * mean[i];
        }
        mean
    }

    /// Posterior latent means for many observations at once: `q × n` latent
    /// values in, `d × n` means out.
    pub fn latent_means(&self, latent_values: &DMatrix<f64>) -> DMatrix<f64> {
        let latent = self.model.latent();
        let mu = latent.mean();
        let mut residual = latent_values.clone();
        for (k, &i) in self.indices.iter().enumerate() {
            residual.row_mut(k).add_scalar_mut(-mu[i]);
        }
        let mut m_xi = &self.gain * residual;
        for (mut row, l) in m_xi.row_iter_mut().zip(latent.eigenvalues().iter()) {
            row *= l.sqrt();
        }
        let mut means = latent.basis() * m_xi;
        for mut col in means.column_iter_mut() {
            col += mu;
        }
        for (k, &i) in self.indices.iter().enumerate() {
            let kappa = self.kappa[k];
            for j in 0..means.ncols() {
                means[(i, j)] = kappa * latent_values[(k, j)] + (1.0 - kappa) * means[(i, j)];
            }
        }
        means
    }

    /// Posterior latent mean for data-space observed values.
    pub fn posterior_mean(&self, values: &[f64]) -> Result<DVector<f64>> {
        Ok(self.latent_mean(&self.latent_values(values)?))
    }

    /// Data-space prediction for data-space observed values.
    pub fn predict(&self, values: &[f64]) -> Result<Vec<f64>> {
        Ok(self.model.from_latent(&self.posterior_mean(values)?))
    }

    /// Conditional model for one observation.
    pub fn condition(self, values: &[f64]) -> Result<ConditionalModel<'a>> {
        let mean = self.posterior_mean(values)?;
        let d = self.model.dimension();
        let delta = self.model.latent().jitter();
        let mut row_scale = vec![1.0; d];
        let mut residual = vec![delta; d];
        for (k, &i) in self.indices.iter().enumerate() {
            row_scale[i] = 1.0 - self.kappa[k];
            residual[i] = self.omega[k];
        }
        let factor = match &self.posterior {
            FactorPosterior::Information { factor } => factor.clone(),
            FactorPosterior::Downdate { h } => downdate_sqrt(h),
        };
        Ok(ConditionalModel {
            plan: self,
            mean,
            row_scale,
            residual,
            factor,
        })
    }
}

/// Symmetric square root of `I − HᵀH` (eigenvalues of `HHᵀ` lie in [0, 1]).
fn downdate_sqrt(h: &DMatrix<f64>) -> DMatrix<f64> {
    let r = h.ncols();
    let mut f = DMatrix::identity(r, r);
    if h.nrows() == 0 || r == 0 {
        return f;
    }
    let eig = SymmetricEigen::new(h * h.transpose());
    let tol = 1e-14 * eig.eigenvalues.amax().max(1.0);
    for (k, &s) in eig.eigenvalues.iter().enumerate() {
        if s <= tol {
            continue;
        }
        let v = h.transpose() * eig.eigenvectors.column(k) / s.sqrt();
        let shrink = 1.0 - (1.0 - s.min(1.0)).sqrt();
        f.ger(-shrink, &v, &v, 1.0);
    }
    f
}

/// Posterior latent Gaussian given a partial observation.
#[derive(Debug, Clone)]
pub struct ConditionalModel<'a> {
    plan: ConditioningPlan<'a>,
    mean: DVector<f64>,
    /// `1 − κ_i` on observed rows, 1 elsewhere.
    row_scale: Vec<f64>,
    residual: Vec<f64>,
    /// `F` with `P = F·Fᵀ`.
    factor: DMatrix<f64>,
}

/// Conditions `model` on `obs`.
pub fn condition<'a>(model: &'a JointModel, obs: &PartialObservation) -> Result<ConditionalModel<'a>> {
    ConditioningPlan::from_observation(model, obs)?.condition(&obs.values())
}

/// Data-space prediction of the full instance from a partial observation.
pub fn predict(model: &JointModel, obs: &PartialObservation) -> Result<Vec<f64>> {
    ConditioningPlan::from_observation(model, obs)?.predict(&obs.values())
}

impl<'a> ConditionalModel<'a> {
    pub fn observed(&self) -> &[usize] {
        &self.plan.indices
    }

    /// `W̃`, the prior loadings with observed rows shrunk by `1 − κ`.
    fn scaled_loadings(&self, rows: &[usize]) -> DMatrix<f64> {
        let mut w = self.plan.model.factor_rows(rows);
        for (mut row, &i) in w.row_iter_mut().zip(rows) {
            row *= self.row_scale[i];
        }
        w
    }

    /// Posterior covariance as a dense matrix. Intended for small `d`.
    pub fn covariance_dense(&self) -> DMatrix<f64> {
        let all: Vec<usize> = (0..self.plan.model.dimension()).collect();
        let l = self.factor_rows(&all);
        let mut c = &l * l.transpose();
        for (i, w) in self.residual.iter().enumerate() {
            c[(i, i)] += w;
        }
        c
    }

    pub fn plan(&self) -> &ConditioningPlan<'a> {
        &self.plan
    }
}

impl LatentModel for ConditionalModel<'_> {
    fn prior(&self) -> &JointModel {
        self.plan.model
    }

    fn latent_mean(&self) -> &DVector<f64> {
        &self.mean
    }

    fn factor_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        self.scaled_loadings(rows) * &self.factor
    }

    fn residual_variance(&self, i: usize) -> f64 {
        self.residual[i]
    }

    fn latent_variance(&self) -> DVector<f64> {
        let d = self.plan.model.dimension();
        let all: Vec<usize> = (0..d).collect();
        let low_rank: Vec<f64> = match &self.plan.posterior {
            FactorPosterior::Downdate { h } => {
                // ‖W̃_i‖² − ‖H·W̃_iᵀ‖², with ‖W_i‖² from the prior variance
                let prior_var = self.plan.model.latent().variance();
                let delta = self.plan.model.latent().jitter();
                let wh = self.plan.model.factor_rows(&all) * h.transpose();
                (0..d)
                    .map(|i| {
                        let s2 = self.row_scale[i] * self.row_scale[i];
                        let prior_low = prior_var[i] - delta;
                        s2 * (prior_low - wh.row(i).norm_squared()).max(0.0)
                    })
                    .collect()
            }
            FactorPosterior::Information { .. } => {
                let l = self.factor_rows(&all);
                l.row_iter().map(|r| r.norm_squared()).collect()
            }
        };
        DVector::from_iterator(d, low_rank.into_iter().zip(&self.residual).map(|(a, b)| a + b))
    }

    fn modes(&self, count: usize) -> Vec<Mode> {
        let model = self.plan.model;
        let r = model.latent().rank();
        if r == 0 || count == 0 {
            return Vec::new();
        }
        // Gram of W̃: diag(λ) minus the observed-row correction
        let lambda = model.latent().eigenvalues();
        let mut gram = DMatrix::from_diagonal(lambda);
        let w_o = model.factor_rows(&self.plan.indices);
        let mut weighted = w_o.clone();
        for (mut row, &i) in weighted.row_iter_mut().zip(&self.plan.indices) {
            let s = self.row_scale[i];
            row *= 1.0 - s * s;
        }
        gram.gemm(-1.0, &w_o.transpose(), &weighted, 1.0);
        let core = self.factor.transpose() * gram * &self.factor;
        let core = (&core + core.transpose()) * 0.5;
        let eig = SymmetricEigen::new(core);
        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let all: Vec<usize> = (0..model.dimension()).collect();
        let chosen: Vec<usize> = order.into_iter().take(count).collect();
        let coeffs = DMatrix::from_fn(r, chosen.len(), |a, c| eig.eigenvectors[(a, chosen[c])]);
        let directions = self.scaled_loadings(&all) * (&self.factor * coeffs);
        chosen
            .iter()
            .enumerate()
            .map(|(c, &k)| {
                let variance = eig.eigenvalues[k].max(0.0);
                let mut direction = directions.column(c).into_owned();
                let norm = direction.norm();
                if norm > 0.0 {
                    direction /= norm;
                }
                let pivot = direction.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
                if pivot < 0.0 {
                    direction.neg_mut();
                }
                Mode { variance, direction }
            })
            .collect()
    }

    fn mode_count(&self) -> usize {
        self.plan.model.latent().rank()
    }
}
