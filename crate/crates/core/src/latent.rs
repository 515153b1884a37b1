//! The latent (normal-scores) representation of training data and the
//! low-rank Gaussian fitted to it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::marginal::{MarginalKind, MarginalModel};
use crate::normal;

/// Zero-mean-residual Gaussian `N(mean, U·diag(λ)·Uᵀ + δ·I)` with orthonormal `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGaussian {
    mean: DVector<f64>,
    basis: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    jitter: f64,
}

impl LatentGaussian {
    pub fn new(mean: DVector<f64>, basis: DMatrix<f64>, eigenvalues: DVector<f64>, jitter: f64) -> Result<Self> {
        let d = mean.len();
        let r = eigenvalues.len();
        if basis.nrows() != d || basis.ncols() != r {
            return Err(Error::InvalidInput(format!(
                "basis is {}×{}, expected {d}×{r}",
                basis.nrows(),
                basis.ncols()
            )));
        }
        if !(jitter >= 0.0) || !jitter.is_finite() {
            return Err(Error::InvalidInput(format!("jitter must be finite and non-negative, got {jitter}")));
        }
        if eigenvalues.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidInput("eigenvalues must be finite and non-negative".into()));
        }
        if eigenvalues.as_slice().windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput("eigenvalues must be sorted in decreasing order".into()));
        }
        if mean.iter().chain(basis.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite latent parameter".into()));
        }
        Ok(Self { mean, basis, eigenvalues, jitter })
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `U·diag(√λ)`, the factor with `R = W·Wᵀ + δ·I`.
    pub fn loadings(&self) -> DMatrix<f64> {
        let mut w = self.basis.clone();
        for (mut col, &l) in w.column_iter_mut().zip(self.eigenvalues.iter()) {
            col *= l.sqrt();
        }
        w
    }

    /// Diagonal of the represented covariance.
    pub fn variance(&self) -> DVector<f64> {
        DVector::from_fn(self.dimension(), |i, _| {
            self.basis
                .row(i)
                .iter()
                .zip(self.eigenvalues.iter())
                .map(|(u, l)| u * u * l)
                .sum::<f64>()
                + self.jitter
        })
    }

    /// The represented covariance as a dense matrix. Intended for small `d`.
    pub fn covariance_dense(&self) -> DMatrix<f64> {
        let w = self.loadings();
        let mut c = &w * w.transpose();
        for i in 0..self.dimension() {
            c[(i, i)] += self.jitter;
        }
        c
    }

    /// Keeps the leading `rank` components.
    pub fn truncated(&self, rank: usize) -> Self {
        let r = rank.min(self.rank());
        Self {
            mean: self.mean.clone(),
            basis: self.basis.columns(0, r).into_owned(),
            eigenvalues: self.eigenvalues.rows(0, r).into_owned(),
            jitter: self.jitter,
        }
    }
}

/// How a training row is mapped to latent values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    /// Same latent row for every ranking (Gaussian marginal, constant or tie-free row).
    Stable,
    /// Contains ties that are broken randomly per ranking.
    Tied,
}

/// Precomputed sort order and tie runs of one training row.
struct RowRanking {
    /// Column indices in increasing value order.
    order: Vec<usize>,
    /// Half-open runs `[start, end)` into `order` of tied values (length ≥ 2).
    ties: Vec<(usize, usize)>,
}

impl RowRanking {
    fn new(row: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..row.len()).collect();
        order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        let mut ties = Vec::new();
        let mut start = 0;
        for i in 1..=order.len() {
            if i == order.len() || row[order[i]] != row[order[start]] {
                if i - start > 1 {
                    ties.push((start, i));
                }
                start = i;
            }
        }
        Self { order, ties }
    }

    fn is_constant(&self) -> bool {
        self.ties.len() == 1 && self.ties[0] == (0, self.order.len())
    }

    /// Latent scores `Φ⁻¹(rank / (M + 1))`, shuffling ranks within each tie run.
    fn scores(&self, rng: Option<&mut ChaCha8Rng>, out: &mut [f64]) {
        let m = self.order.len();
        let denom = (m + 1) as f64;
        let mut ranks: Vec<usize> = (1..=m).collect();
        if let Some(rng) = rng {
            for &(a, b) in &self.ties {
                ranks[a..b].shuffle(rng);
            }
        }
        for (pos, &col) in self.order.iter().enumerate() {
            out[col] = normal::quantile(ranks[pos] as f64 / denom);
        }
    }
}

/// Latent representation of a training matrix, split into rows that are
/// identical across rankings and rows with randomly broken ties.
pub(crate) struct LatentRows {
    kinds: Vec<RowKind>,
    rankings: Vec<Option<RowRanking>>,
    stable: Vec<(usize, DVector<f64>)>,
    seed: u64,
}

impl LatentRows {
    pub(crate) fn new(data: &DMatrix<f64>, marginals: &[MarginalModel], seed: u64) -> Self {
        let m = data.ncols();
        let mut kinds = Vec::with_capacity(data.nrows());
        let mut rankings = Vec::with_capacity(data.nrows());
        let mut stable = Vec::new();
        for (i, marginal) in marginals.iter().enumerate() {
            let row: Vec<f64> = data.row(i).iter().copied().collect();
            match marginal.kind() {
                MarginalKind::Gaussian { mean, stddev } => {
                    kinds.push(RowKind::Stable);
                    rankings.push(None);
                    stable.push((i, DVector::from_iterator(m, row.iter().map(|v| (v - mean) / stddev))));
                }
                MarginalKind::Empirical(_) => {
                    let ranking = RowRanking::new(&row);
                    if ranking.is_constant() {
                        kinds.push(RowKind::Stable);
                        stable.push((i, DVector::zeros(m)));
                        rankings.push(None);
                    } else if ranking.ties.is_empty() {
                        let mut out = vec![0.0; m];
                        ranking.scores(None, &mut out);
                        kinds.push(RowKind::Stable);
                        stable.push((i, DVector::from_vec(out)));
                        rankings.push(None);
                    } else {
                        kinds.push(RowKind::Tied);
                        rankings.push(Some(ranking));
                    }
                }
            }
        }
        Self { kinds, rankings, stable, seed }
    }

    pub(crate) fn tied_rows(&self) -> Vec<usize> {
        (0..self.kinds.len()).filter(|&i| self.kinds[i] == RowKind::Tied).collect()
    }

    fn rng(&self, ranking_index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(ranking_index as u64);
        rng
    }

    /// Latent values of the tied rows under one ranking, `|tied| × M`.
    pub(crate) fn tied_block(&self, ranking_index: usize, m: usize) -> DMatrix<f64> {
        let tied = self.tied_rows();
        let mut rng = self.rng(ranking_index);
        let mut block = DMatrix::zeros(tied.len(), m);
        let mut buf = vec![0.0; m];
        for (k, &i) in tied.iter().enumerate() {
            let ranking = self.rankings[i].as_ref().expect("tied row has a ranking");
            ranking.scores(Some(&mut rng), &mut buf);
            block.row_mut(k).copy_from_slice(&buf);
        }
        block
    }

    /// Full `d × M` latent matrix for one ranking.
    pub(crate) fn matrix(&self, ranking_index: usize, m: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.kinds.len(), m);
        for (i, row) in &self.stable {
            out.row_mut(*i).copy_from(&row.transpose());
        }
        let tied = self.tied_block(ranking_index, m);
        for (k, i) in self.tied_rows().into_iter().enumerate() {
            out.row_mut(i).copy_from(&tied.row(k));
        }
        out
    }

    pub(crate) fn stable(&self) -> &[(usize, DVector<f64>)] {
        &self.stable
    }
}

/// Replaces every training value by the latent score of its tie-broken
/// plotting position. Ties are permuted by a generator derived from `seed`
/// and `ranking_index`; rows without ties do not depend on either.
pub fn build_latent_matrix(
    data: &DMatrix<f64>,
    marginals: &[MarginalModel],
    seed: u64,
    ranking_index: usize,
) -> Result<DMatrix<f64>> {
    if marginals.len() != data.nrows() {
        return Err(Error::InvalidInput(format!(
            "{} marginals for {} rows",
            marginals.len(),
            data.nrows()
        )));
    }
    Ok(LatentRows::new(data, marginals, seed).matrix(ranking_index, data.ncols()))
}

fn center_rows(mut x: DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let m = x.ncols() as f64;
    let means = DVector::from_iterator(x.nrows(), x.row_iter().map(|r| r.sum() / m));
    for (mut row, mu) in x.row_iter_mut().zip(means.iter()) {
        row.add_scalar_mut(-mu);
    }
    (x, means)
}

/// Averages the sample covariance over `rankings` tie-broken latent matrices
/// and eigendecomposes the average once, keeping `rank` components.
///
/// With `X̄` the ranking-averaged centred latent matrix and `Dₜ` the
/// per-ranking deviations (non-zero on tied rows only), the average is
/// `(X̄X̄ᵀ + mean DₜDₜᵀ) / (M−1)`. Its column space lies in
/// `span(X̄ restricted to stable rows) ⊕ span(tied coordinates)`, so the
/// eigenproblem is solved in that subspace when it is smaller than `d`.
pub(crate) fn estimate(
    rows: &LatentRows,
    d: usize,
    m: usize,
    rankings: usize,
    rank: usize,
    jitter: f64,
) -> Result<LatentGaussian> {
    let stable_idx: Vec<usize> = rows.stable().iter().map(|(i, _)| *i).collect();
    let tied_idx = rows.tied_rows();
    let (ds, dv) = (stable_idx.len(), tied_idx.len());
    let scale = 1.0 / (m as f64 - 1.0);

    let mut xs = DMatrix::zeros(ds, m);
    for (k, (_, row)) in rows.stable().iter().enumerate() {
        xs.row_mut(k).copy_from(&row.transpose());
    }
    let (xs, mean_s) = center_rows(xs);

    // tied rows: ranking-averaged centred block and averaged second moment
    let mut xv_bar = DMatrix::zeros(dv, m);
    let mut second = DMatrix::zeros(dv, dv);
    let mut mean_v = DVector::zeros(dv);
    if dv > 0 {
        for t in 0..rankings {
            let (xc, mu) = center_rows(rows.tied_block(t, m));
            second.gemm(1.0, &xc, &xc.transpose(), 1.0);
            xv_bar += &xc;
            mean_v += mu;
        }
        let inv_t = 1.0 / rankings as f64;
        second *= inv_t;
        xv_bar *= inv_t;
        mean_v *= inv_t;
    }

    let mut mean = DVector::zeros(d);
    for (k, &i) in stable_idx.iter().enumerate() {
        mean[i] = mean_s[k];
    }
    for (k, &i) in tied_idx.iter().enumerate() {
        mean[i] = mean_v[k];
    }

    // eigenproblem in stable ⊕ tied coordinates, possibly compressed on the stable side
    let compress = ds > m;
    let (q, rs) = if compress {
        let qr = xs.clone().qr();
        (Some(qr.q()), qr.r())
    } else {
        (None, xs.clone())
    };
    let ks = rs.nrows();
    let size = ks + dv;
    let mut p = DMatrix::zeros(size, size);
    p.view_mut((0, 0), (ks, ks)).gemm(scale, &rs, &rs.transpose(), 0.0);
    if dv > 0 {
        let cross = &rs * xv_bar.transpose() * scale;
        p.view_mut((0, ks), (ks, dv)).copy_from(&cross);
        p.view_mut((ks, 0), (dv, ks)).copy_from(&cross.transpose());
        p.view_mut((ks, ks), (dv, dv)).copy_from(&(second * scale));
    }
    // exact symmetry before the eigensolver
    let p = (&p + p.transpose()) * 0.5;
    let eig = SymmetricEigen::new(p);

    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let r = rank.min(size);
    let mut basis = DMatrix::zeros(d, r);
    let mut eigenvalues = DVector::zeros(r);
    for (c, &k) in order.iter().take(r).enumerate() {
        let v = eig.eigenvectors.column(k);
        let top = v.rows(0, ks);
        let stable_part = match &q {
            Some(q) => q * top,
            None => top.into_owned(),
        };
        let mut col = DVector::zeros(d);
        for (k2, &i) in stable_idx.iter().enumerate() {
            col[i] = stable_part[k2];
        }
        for (k2, &i) in tied_idx.iter().enumerate() {
            col[i] = v[ks + k2];
        }
        // deterministic sign: largest-magnitude entry positive
        let pivot = col.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            col.neg_mut();
        }
        basis.set_column(c, &col);
        eigenvalues[c] = eig.eigenvalues[k].max(0.0);
    }
    LatentGaussian::new(mean, basis, eigenvalues, jitter)
}
