use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spec::Block;

/// Index layout of an instance vector:
/// `[x₁ y₁ z₁ … x_N y_N z_N, f₁ … f_N, a₁ … a_K]`, so `d = 4N + K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceLayout {
    pub vertices: usize,
    pub indicators: usize,
}

impl InstanceLayout {
    pub fn new(vertices: usize, indicators: usize) -> Self {
        Self { vertices, indicators }
    }

    pub fn dimension(&self) -> usize {
        4 * self.vertices + self.indicators
    }

    pub fn range(&self, block: Block) -> Range<usize> {
        let n = self.vertices;
        match block {
            Block::Coordinate => 0..3 * n,
            Block::Feature => 3 * n..4 * n,
            Block::Indicator => 4 * n..4 * n + self.indicators,
        }
    }

    pub fn block_of(&self, index: usize) -> Option<Block> {
        Block::ALL.into_iter().find(|b| self.range(*b).contains(&index))
    }

    /// Index of coordinate `axis` (0..3) of vertex `k`.
    pub fn coordinate(&self, k: usize, axis: usize) -> usize {
        3 * k + axis
    }

    pub fn feature(&self, k: usize) -> usize {
        3 * self.vertices + k
    }

    pub fn indicator(&self, j: usize) -> usize {
        4 * self.vertices + j
    }
}

/// The parts of one instance in data space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub vertices: Vec<[f64; 3]>,
    pub features: Vec<f64>,
    pub indicators: Vec<f64>,
}

pub fn vectorize(
    vertices: &[[f64; 3]],
    features: &[f64],
    indicators: &[f64],
    layout: &InstanceLayout,
) -> Result<Vec<f64>> {
    if vertices.len() != layout.vertices
        || features.len() != layout.vertices
        || indicators.len() != layout.indicators
    {
        return Err(Error::LayoutMismatch(format!(
            "expected {} vertices/features and {} indicators, got {}/{}/{}",
            layout.vertices,
            layout.indicators,
            vertices.len(),
            features.len(),
            indicators.len()
        )));
    }
    let mut out = Vec::with_capacity(layout.dimension());
    out.extend(vertices.iter().flatten());
    out.extend_from_slice(features);
    out.extend_from_slice(indicators);
    Ok(out)
}

pub fn devectorize(v: &[f64], layout: &InstanceLayout) -> Result<Instance> {
    if v.len() != layout.dimension() {
        return Err(Error::LayoutMismatch(format!(
            "vector of length {} does not match d = {}",
            v.len(),
            layout.dimension()
        )));
    }
    let coords = &v[layout.range(Block::Coordinate)];
    Ok(Instance {
        vertices: coords.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        features: v[layout.range(Block::Feature)].to_vec(),
        indicators: v[layout.range(Block::Indicator)].to_vec(),
    })
}

impl Instance {
    pub fn to_vector(&self, layout: &InstanceLayout) -> Result<Vec<f64>> {
        vectorize(&self.vertices, &self.features, &self.indicators, layout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dimensions() {
        assert_eq!(InstanceLayout::new(1504, 9).dimension(), 6025);
        assert_eq!(InstanceLayout::new(1, 0).dimension(), 4);
        let l = InstanceLayout::new(2, 1);
        assert_eq!(l.coordinate(1, 2), 5);
        assert_eq!(l.feature(1), 7);
        assert_eq!(l.indicator(0), 8);
        assert_eq!(l.block_of(8), Some(Block::Indicator));
        assert_eq!(l.block_of(9), None);
    }

    #[test]
    fn interleaves_coordinates_per_vertex() {
        let l = InstanceLayout::new(2, 1);
        let v = vectorize(&[[1., 2., 3.], [4., 5., 6.]], &[7., 8.], &[9.], &l).unwrap();
        assert_eq!(v, vec![1., 2., 3., 4., 5., 6., 7., 8., 9.]);
    }

    #[test]
    fn mismatches_are_rejected() {
        let l = InstanceLayout::new(2, 1);
        assert!(matches!(vectorize(&[[0.; 3]], &[0., 0.], &[0.], &l), Err(Error::LayoutMismatch(_))));
        assert!(matches!(devectorize(&[0.; 8], &l), Err(Error::LayoutMismatch(_))));
    }

    #[test]
    fn zero_vector() {
        let l = InstanceLayout::new(3, 2);
        let inst = devectorize(&vec![0.0; l.dimension()], &l).unwrap();
        assert!(inst.vertices.iter().flatten().all(|&x| x == 0.0));
        assert!(inst.features.iter().chain(&inst.indicators).all(|&x| x == 0.0));
    }

    proptest! {
        #[test]
        fn round_trip(n in 0usize..6, k in 0usize..4, seed in prop::collection::vec(-1e6f64..1e6, 40)) {
            let l = InstanceLayout::new(n, k);
            let v: Vec<f64> = seed.iter().cycle().take(l.dimension()).copied().collect();
            let inst = devectorize(&v, &l).unwrap();
            prop_assert_eq!(inst.to_vector(&l).unwrap(), v);
        }
    }
}
