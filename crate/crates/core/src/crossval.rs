//! Choosing the per-block observation noise by k-fold cross-validation.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::condition::{BlockSigmas, ConditioningPlan};
use crate::error::{Error, Result};
use crate::model::{fit_joint_model, FitConfig, JointModel};
use crate::shape::InstanceLayout;
use crate::spec::{Block, VariableSpec};

/// Candidate noise levels per block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaGrid {
    pub shape: Vec<f64>,
    pub feature: Vec<f64>,
    pub indicator: Vec<f64>,
}

impl Default for SigmaGrid {
    fn default() -> Self {
        Self::uniform(&[0.01, 0.03, 0.1, 0.3, 1.0])
    }
}

impl SigmaGrid {
    pub fn uniform(grid: &[f64]) -> Self {
        Self {
            shape: grid.to_vec(),
            feature: grid.to_vec(),
            indicator: grid.to_vec(),
        }
    }

    pub fn get(&self, block: Block) -> &[f64] {
        match block {
            Block::Coordinate => &self.shape,
            Block::Feature => &self.feature,
            Block::Indicator => &self.indicator,
        }
    }
}

/// Outcome of [`cross_validate_sigma`].
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSelection {
    pub sigmas: BlockSigmas,
    /// Mean held-out error for every `(block, σ)` tried, in grid order.
    pub errors: Vec<(Block, Vec<(f64, f64)>)>,
}

impl SigmaSelection {
    pub fn errors_for(&self, block: Block) -> &[(f64, f64)] {
        self.errors
            .iter()
            .find(|(b, _)| *b == block)
            .map(|(_, e)| e.as_slice())
            .unwrap_or(&[])
    }
}

/// Fold index of each of `m` instances: a seeded permutation dealt round-robin.
pub fn fold_assignment(m: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; m];
    for (pos, &j) in order.iter().enumerate() {
        fold[j] = pos % folds;
    }
    fold
}

/// For each block, picks the grid σ with the lowest mean squared latent
/// error of the unobserved components when only that block is observed.
/// Ties go to the earlier grid entry. Blocks without components keep their
/// first grid value and report no errors.
#[allow(clippy::too_many_arguments)]
pub fn cross_validate_sigma(
    data: &DMatrix<f64>,
    specs: &[VariableSpec],
    layout: InstanceLayout,
    grid: &SigmaGrid,
    folds: usize,
    seed: u64,
    config: &FitConfig,
) -> Result<SigmaSelection> {
    let m = data.ncols();
    if folds < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 folds, got {folds}")));
    }
    if m < folds {
        return Err(Error::InvalidInput(format!("{m} instances cannot fill {folds} folds")));
    }
    for block in Block::ALL {
        let g = grid.get(block);
        if g.is_empty() {
            return Err(Error::InvalidInput(format!("empty σ grid for the {} block", block.name())));
        }
        if g.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidInput(format!("σ grid for the {} block must be finite and ≥ 0", block.name())));
        }
    }
    let assignment = fold_assignment(m, folds, seed);
    let blocks: Vec<Block> = Block::ALL.into_iter().filter(|&b| !layout.range(b).is_empty()).collect();
    let mut totals: Vec<Vec<f64>> = blocks.iter().map(|&b| vec![0.0; grid.get(b).len()]).collect();
    let mut counts = vec![0usize; blocks.len()];

    for fold in 0..folds {
        let train: Vec<usize> = (0..m).filter(|&j| assignment[j] != fold).collect();
        let held: Vec<usize> = (0..m).filter(|&j| assignment[j] == fold).collect();
        let model = fit_joint_model(&data.select_columns(&train), specs, layout, vec![], config)?;
        let latent = held_out_latent(&model, data, &held)?;
        for (b, &block) in blocks.iter().enumerate() {
            let observed: Vec<usize> = layout.range(block).collect();
            let hidden: Vec<usize> = (0..layout.dimension()).filter(|i| !layout.range(block).contains(i)).collect();
            if hidden.is_empty() {
                continue;
            }
            let values = latent.select_rows(&observed);
            for (s, &sigma) in grid.get(block).iter().enumerate() {
                let plan = ConditioningPlan::new(&model, &observed, &vec![sigma; observed.len()])?;
                let means = plan.latent_means(&values);
                let mut sq = 0.0;
                for &i in &hidden {
                    for j in 0..held.len() {
                        sq += (means[(i, j)] - latent[(i, j)]).powi(2);
                    }
                }
                totals[b][s] += sq / hidden.len() as f64;
            }
            counts[b] += held.len();
        }
    }

    let mut sigmas = BlockSigmas::uniform(0.0);
    for block in Block::ALL {
        sigmas.set(block, grid.get(block)[0]);
    }
    let mut errors = Vec::new();
    for (b, &block) in blocks.iter().enumerate() {
        if counts[b] == 0 {
            continue;
        }
        let table: Vec<(f64, f64)> = grid
            .get(block)
            .iter()
            .zip(&totals[b])
            .map(|(&sigma, &total)| (sigma, total / counts[b] as f64))
            .collect();
        let best = table
            .iter()
            .enumerate()
            .fold(0, |best, (k, e)| if e.1 < table[best].1 { k } else { best });
        sigmas.set(block, table[best].0);
        errors.push((block, table));
    }
    Ok(SigmaSelection { sigmas, errors })
}

/// Latent images of the selected data columns, `d × n`.
pub fn held_out_latent(model: &JointModel, data: &DMatrix<f64>, columns: &[usize]) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(model.dimension(), columns.len());
    for (k, &j) in columns.iter().enumerate() {
        let z = model.to_latent(data.column(j).as_slice())?;
        out.set_column(k, &z);
    }
    Ok(out)
}
