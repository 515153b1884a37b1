//! The fitted joint model and the operations shared by prior and
//! conditional models: prediction, sampling and principal-mode traversal.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use serde::{Deserialize, Serialize};
use crate::error::{Error, Result};
use crate::latent::{self, LatentGaussian, LatentRows};
use crate::marginal::{fit_marginal, MarginalModel};
use crate::shape::{Cohort, InstanceLayout};
use crate::spec::{Block, VariableSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Number of random tie-breaking rankings averaged into the covariance.
    pub rankings: usize,
    pub seed: u64,
    /// Retained components; `None` keeps the maximum `M − 1`.
    pub rank: Option<usize>,
    /// Isotropic residual variance added on the latent scale.
    pub jitter: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            rankings: 50,
            seed: 42,
            rank: None,
            jitter: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub rankings: usize,
    pub seed: u64,
    pub training_size: usize,
}

/// Gaussian-copula model: per-component marginals plus a low-rank latent Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct JointModel {
    marginals: Arc<[MarginalModel]>,
    latent: LatentGaussian,
    layout: InstanceLayout,
    topology: Vec<[u32; 3]>,
    fit: FitMetadata,
}

/// Fits marginals and the latent dependency structure to a `d × M` matrix.
pub fn fit_joint_model(
    data: &DMatrix<f64>,
    specs: &[VariableSpec],
    layout: InstanceLayout,
    topology: Vec<[u32; 3]>,
    config: &FitConfig,
) -> Result<JointModel> {
    let (d, m) = data.shape();
    if d == 0 || specs.len() != d {
        return Err(Error::InvalidInput(format!("{} specs for {d} data rows", specs.len())));
    }
    if layout.dimension() != d {
        return Err(Error::LayoutMismatch(format!("layout has d = {}, data has {d} rows", layout.dimension())));
    }
    if m < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 training instances, got {m}")));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("training matrix contains non-finite values".into()));
    }
    if config.rankings == 0 {
        return Err(Error::InvalidInput("at least one ranking is required".into()));
    }
    let rank = config.rank.unwrap_or(m - 1);
    if rank > m - 1 {
        return Err(Error::InvalidRank { rank, max: m - 1 });
    }
    let marginals = specs
        .iter()
        .enumerate()
        .map(|(i, spec)| fit_marginal(&data.row(i).iter().copied().collect::<Vec<_>>(), spec))
        .collect::<Result<Vec<_>>>()?;
    let rows = LatentRows::new(data, &marginals, config.seed);
    let latent = latent::estimate(&rows, d, m, config.rankings, rank, config.jitter)?;
    JointModel::from_parts(
        marginals,
        latent,
        layout,
        topology,
        FitMetadata {
            rankings: config.rankings,
            seed: config.seed,
            training_size: m,
        },
    )
}

impl JointModel {
    pub fn fit(cohort: &Cohort, config: &FitConfig) -> Result<Self> {
        fit_joint_model(&cohort.data, &cohort.specs, cohort.layout, cohort.topology.clone(), config)
    }

    pub fn from_parts(
        marginals: Vec<MarginalModel>,
        latent: LatentGaussian,
        layout: InstanceLayout,
        topology: Vec<[u32; 3]>,
        fit: FitMetadata,
    ) -> Result<Self> {
        if marginals.len() != latent.dimension() || layout.dimension() != latent.dimension() {
            return Err(Error::LayoutMismatch(format!(
                "{} marginals, latent dimension {}, layout dimension {}",
                marginals.len(),
                latent.dimension(),
                layout.dimension()
            )));
        }
        if fit.training_size >= 1 && latent.rank() > fit.training_size.saturating_sub(1) {
            return Err(Error::InvalidRank {
                rank: latent.rank(),
                max: fit.training_size.saturating_sub(1),
            });
        }
        if let Some(f) = topology.iter().find(|f| f.iter().any(|&v| v as usize >= layout.vertices)) {
            return Err(Error::FormatError(format!("face {f:?} indexes past {} vertices", layout.vertices)));
        }
        Ok(Self {
            marginals: marginals.into(),
            latent,
            layout,
            topology,
            fit,
        })
    }

    pub fn dimension(&self) -> usize {
        self.latent.dimension()
    }

    pub fn marginals(&self) -> &[MarginalModel] {
        &self.marginals
    }

    pub fn spec(&self, i: usize) -> &VariableSpec {
        self.marginals[i].spec()
    }

    pub fn specs(&self) -> impl Iterator<Item = &VariableSpec> + '_ {
        self.marginals.iter().map(MarginalModel::spec)
    }

    pub fn latent(&self) -> &LatentGaussian {
        &self.latent
    }

    pub fn layout(&self) -> &InstanceLayout {
        &self.layout
    }

    pub fn topology(&self) -> &[[u32; 3]] {
        &self.topology
    }

    pub fn fit_metadata(&self) -> &FitMetadata {
        &self.fit
    }

    /// Index of the component called `name`.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        // indicators are looked up far more often than vertices
        let ind = self.layout.range(Block::Indicator);
        ind.clone()
            .chain(0..ind.start)
            .find(|&i| self.marginals[i].spec().name == name)
    }

    /// Latent image of a data-space instance.
    pub fn to_latent(&self, instance: &[f64]) -> Result<DVector<f64>> {
        if instance.len() != self.dimension() {
            return Err(Error::LayoutMismatch(format!(
                "instance of length {} for d = {}",
                instance.len(),
                self.dimension()
            )));
        }
        let values = instance
            .iter()
            .zip(self.marginals.iter())
            .map(|(&v, m)| m.to_latent(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(values))
    }

    /// Data-space image of a latent vector.
    pub fn from_latent(&self, latent: &DVector<f64>) -> Vec<f64> {
        latent.iter().zip(self.marginals.iter()).map(|(&x, m)| m.from_latent(x)).collect()
    }

    /// Same model with only the leading `rank` latent components.
    pub fn truncated(&self, rank: usize) -> Self {
        Self {
            latent: self.latent.truncated(rank),
            ..self.clone()
        }
    }
}

/// One principal direction of a latent Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub variance: f64,
    /// Unit-norm latent direction.
    pub direction: DVector<f64>,
}

/// Shared interface of prior and conditional models. Covariances have the
/// form `L·Lᵀ + diag(ω)` with a `d × r` factor `L`.
pub trait LatentModel {
    fn prior(&self) -> &JointModel;

    fn latent_mean(&self) -> &DVector<f64>;

    /// Selected rows of the covariance factor `L`.
    fn factor_rows(&self, rows: &[usize]) -> DMatrix<f64>;

    /// Residual variance `ω_i` of component `i`.
    fn residual_variance(&self, i: usize) -> f64;

    /// Diagonal of the latent covariance.
    fn latent_variance(&self) -> DVector<f64>;

    /// Leading `count` eigenpairs of the low-rank part `L·Lᵀ`, decreasing.
    fn modes(&self, count: usize) -> Vec<Mode>;

    /// Number of available principal modes.
    fn mode_count(&self) -> usize;

    /// Point prediction: the latent mean mapped through the marginals.
    fn predict(&self) -> Vec<f64> {
        self.prior().from_latent(self.latent_mean())
    }

    /// Per-component data-space spread: half the data-space width of the
    /// latent `mean ± stddev` interval.
    fn data_stddev(&self) -> Vec<f64> {
        let mean = self.latent_mean();
        let var = self.latent_variance();
        self.prior()
            .marginals()
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let s = var[i].max(0.0).sqrt();
                (m.from_latent(mean[i] + s) - m.from_latent(mean[i] - s)) / 2.0
            })
            .collect()
    }

    /// Latent samples of the selected components, `rows.len() × n`.
    ///
    /// Factor normals come from stream 0 of a generator seeded with `seed`,
    /// the residual normals of component `i` from stream `i + 1`, so a
    /// component's samples do not depend on which other rows are requested.
    fn sample_latent_rows(&self, n: usize, seed: u64, rows: &[usize]) -> DMatrix<f64> {
        let factor = self.factor_rows(rows);
        let r = factor.ncols();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xi = DMatrix::zeros(r, n);
        for j in 0..n {
            for a in 0..r {
                xi[(a, j)] = StandardNormal.sample(&mut rng);
            }
        }
        let mut out = &factor * &xi;
        let mean = self.latent_mean();
        for (k, &i) in rows.iter().enumerate() {
            let s = self.residual_variance(i).max(0.0).sqrt();
            let mut stream = ChaCha8Rng::seed_from_u64(seed);
            stream.set_stream(i as u64 + 1);
            for j in 0..n {
                let z: f64 = StandardNormal.sample(&mut stream);
                out[(k, j)] += mean[i] + s * z;
            }
        }
        out
    }

    /// `n` data-space samples of the selected components, `rows.len() × n`.
    fn sample_rows(&self, n: usize, seed: u64, rows: &[usize]) -> DMatrix<f64> {
        let mut out = self.sample_latent_rows(n, seed, rows);
        let marginals = self.prior().marginals();
        for (k, &i) in rows.iter().enumerate() {
            for j in 0..n {
                out[(k, j)] = marginals[i].from_latent(out[(k, j)]);
            }
        }
        out
    }

    /// `n` full data-space instances.
    fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let rows: Vec<usize> = (0..self.prior().dimension()).collect();
        let s = self.sample_rows(n, seed, &rows);
        s.column_iter().map(|c| c.iter().copied().collect()).collect()
    }

    /// Latent point `mean + t·√λ_k·u_k` along mode `k` (1-based).
    fn mode_latent(&self, k: usize, t: f64) -> Result<DVector<f64>> {
        let max = self.mode_count();
        if k == 0 || k > max {
            return Err(Error::InvalidMode { k, max });
        }
        let mode = self.modes(k).pop().expect("k modes available");
        Ok(self.latent_mean() + mode.direction * (t * mode.variance.max(0.0).sqrt()))
    }

    /// Data-space instance along mode `k` (1-based) at `t` standard deviations.
    fn mode_instance(&self, k: usize, t: f64) -> Result<Vec<f64>> {
        Ok(self.prior().from_latent(&self.mode_latent(k, t)?))
    }
}

impl LatentModel for JointModel {
    fn prior(&self) -> &JointModel {
        self
    }

    fn latent_mean(&self) -> &DVector<f64> {
        self.latent.mean()
    }

    fn factor_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        let basis = self.latent.basis();
        let sqrt_l: Vec<f64> = self.latent.eigenvalues().iter().map(|l| l.sqrt()).collect();
        DMatrix::from_fn(rows.len(), self.latent.rank(), |k, a| basis[(rows[k], a)] * sqrt_l[a])
    }

    fn residual_variance(&self, _i: usize) -> f64 {
        self.latent.jitter()
    }

    fn latent_variance(&self) -> DVector<f64> {
        self.latent.variance()
    }

    fn modes(&self, count: usize) -> Vec<Mode> {
        (0..count.min(self.latent.rank()))
            .map(|k| Mode {
                variance: self.latent.eigenvalues()[k],
                direction: self.latent.basis().column(k).into_owned(),
            })
            .collect()
    }

    fn mode_count(&self) -> usize {
        self.latent.rank()
    }
}
