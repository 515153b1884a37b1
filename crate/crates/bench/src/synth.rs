//! Synthetic cohorts with a known factor structure.
//!
//! A handful of latent factors drive a set of named channels (overall size,
//! elongation, a bulge, feature burden and spread, and one channel per
//! recorded indicator). Meshes are deformed ellipsoids sharing one sphere
//! triangulation, features are smooth lognormal fields, and indicators are
//! threshold or quantile maps of their channel.

use std::f64::consts::PI;

use jointshape::shape::{Cohort, CohortSpec, Instance};
use jointshape::{Block, Error, MarginalChoice, Result, ValueSource, VariableSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    /// Number of instances `M`.
    pub instances: usize,
    /// Number of mesh vertices `N`.
    pub vertices: usize,
    /// Number of latent factors.
    pub factors: usize,
    /// Multiplies every factor loading.
    pub loading_scale: f64,
    /// Size of the per-channel and per-vertex noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            instances: 793,
            vertices: 200,
            factors: 4,
            loading_scale: 1.0,
            noise: 0.35,
            seed: 42,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.instances < 3 {
            return bad(format!("need at least 3 instances, got {}", self.instances));
        }
        if self.vertices < 5 {
            return bad(format!("need at least 5 vertices, got {}", self.vertices));
        }
        if self.factors == 0 || self.factors > self.instances - 1 {
            return bad(format!("factor count must be in 1..={}, got {}", self.instances - 1, self.factors));
        }
        for (name, v) in [("loading_scale", self.loading_scale), ("noise", self.noise)] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        Ok(())
    }
}

/// Channel names, in row order of [`GroundTruth::loadings`].
pub const CHANNELS: [&str; 13] = [
    "size",
    "elongation",
    "bulge",
    "burden",
    "spread",
    "age",
    "sex",
    "hypertension",
    "hyperlipidemia",
    "afib",
    "smoking",
    "nihss",
    "mrs",
];

/// Loadings of the first four factors (ageing, vascular risk, stroke
/// severity, sex and head size) on each channel.
const BASE_LOADINGS: [[f64; 4]; 13] = [
    [0.6, 0.0, 0.0, 0.5],
    [0.0, 0.0, 0.0, 0.6],
    [0.5, 0.0, 0.3, 0.0],
    [0.7, 0.5, 0.0, 0.0],
    [0.0, 0.4, 0.2, 0.0],
    [0.9, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.9],
    [0.4, 0.6, 0.0, 0.0],
    [0.0, 0.6, 0.0, 0.0],
    [0.4, 0.0, 0.0, 0.0],
    [0.0, 0.5, 0.0, 0.3],
    [0.0, 0.3, 0.8, 0.0],
    [0.3, 0.0, 0.8, 0.0],
];

const SMOKING_CUTS: [f64; 5] = [-0.5, 0.0, 0.5, 1.0, 1.5];
const MRS_CUTS: [f64; 6] = [-1.0, -0.3, 0.3, 0.8, 1.3, 1.9];

/// The generator's hidden state, kept for oracle tests.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// `factors × M` factor scores.
    pub factors: DMatrix<f64>,
    /// `channels × factors`, already multiplied by the loading scale.
    pub loadings: DMatrix<f64>,
    /// `channels × M` channel values: loadings · factors + noise.
    pub channels: DMatrix<f64>,
}

impl GroundTruth {
    pub fn channel(&self, name: &str) -> Option<usize> {
        CHANNELS.iter().position(|&c| c == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    pub cohort: Cohort,
    pub spec: CohortSpec,
    pub instances: Vec<Instance>,
    pub truth: GroundTruth,
}

/// Indicator declarations of the synthetic cohort.
pub fn indicator_specs() -> Vec<VariableSpec> {
    vec![
        VariableSpec::continuous("age", Block::Indicator, MarginalChoice::Empirical),
        VariableSpec::binary("sex", Some(["female", "male"])),
        VariableSpec::binary("hypertension", None),
        VariableSpec::binary("hyperlipidemia", None),
        VariableSpec::binary("afib", None),
        VariableSpec::ordinal("smoking", (1..=6).map(f64::from)),
        VariableSpec::ordinal("nihss", (0..=42).map(f64::from)),
        VariableSpec::ordinal("mrs", (0..=6).map(f64::from)),
        VariableSpec::continuous("volume", Block::Indicator, MarginalChoice::Empirical)
            .with_source(ValueSource::FeatureTotal),
    ]
}

pub fn cohort_spec() -> CohortSpec {
    CohortSpec {
        coordinate_marginal: MarginalChoice::Gaussian,
        feature_marginal: MarginalChoice::Empirical,
        indicators: indicator_specs(),
    }
}

/// Unit-sphere vertices on latitude rings plus two poles, and a closed
/// triangulation of them.
pub fn sphere_mesh(n: usize) -> (Vec<[f64; 3]>, Vec<[u32; 3]>) {
    assert!(n >= 5, "sphere mesh needs at least 5 vertices");
    let inner = n - 2;
    let rings = (((PI * n as f64).sqrt() / 2.0).round() as usize).clamp(1, inner / 3);
    let theta: Vec<f64> = (0..rings).map(|k| PI * (k as f64 + 0.5) / rings as f64).collect();
    // ring sizes proportional to circumference, at least 3 each
    let weights: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
    let total: f64 = weights.iter().sum();
    let spare = inner - 3 * rings;
    let mut sizes: Vec<usize> = weights.iter().map(|w| 3 + (spare as f64 * w / total).floor() as usize).collect();
    let mut left = inner - sizes.iter().sum::<usize>();
    let mut k = 0;
    while left > 0 {
        // hand out the remainder from the equator outwards
        let idx = if k % 2 == 0 { rings / 2 + k / 2 } else { (rings / 2).saturating_sub(k / 2 + 1) };
        sizes[idx.min(rings - 1)] += 1;
        left -= 1;
        k += 1;
    }

    let mut vertices = vec![[0.0, 0.0, 1.0]];
    let mut starts = Vec::with_capacity(rings);
    let mut angles: Vec<Vec<f64>> = Vec::with_capacity(rings);
    for (k, (&t, &size)) in theta.iter().zip(&sizes).enumerate() {
        starts.push(vertices.len());
        let offset = if k % 2 == 0 { 0.0 } else { 0.5 };
        let ring: Vec<f64> = (0..size).map(|i| 2.0 * PI * (i as f64 + offset) / size as f64).collect();
        for &phi in &ring {
            vertices.push([t.sin() * phi.cos(), t.sin() * phi.sin(), t.cos()]);
        }
        angles.push(ring);
    }
    let south = vertices.len();
    vertices.push([0.0, 0.0, -1.0]);

    let mut faces = Vec::with_capacity(2 * n - 4);
    let idx = |k: usize, i: usize| (starts[k] + i % sizes[k]) as u32;
    for i in 0..sizes[0] {
        faces.push([0, idx(0, i), idx(0, i + 1)]);
    }
    for k in 0..rings - 1 {
        let (a, b) = (sizes[k], sizes[k + 1]);
        let (mut i, mut j) = (0, 0);
        while i < a || j < b {
            let next_a = if i < a { angles[k][i] + 2.0 * PI / a as f64 } else { f64::INFINITY };
            let next_b = if j < b { angles[k + 1][j] + 2.0 * PI / b as f64 } else { f64::INFINITY };
            if next_a <= next_b {
                faces.push([idx(k, i), idx(k + 1, j), idx(k, i + 1)]);
                i += 1;
            } else {
                faces.push([idx(k, i), idx(k + 1, j), idx(k + 1, j + 1)]);
                j += 1;
            }
        }
    }
    let last = rings - 1;
    for i in 0..sizes[last] {
        faces.push([south as u32, idx(last, i + 1), idx(last, i)]);
    }
    (vertices, faces)
}

fn threshold_level(z: f64, cuts: &[f64], first: f64) -> f64 {
    first + cuts.iter().filter(|&&c| z > c).count() as f64
}

/// Draws a cohort. Identical configurations give identical cohorts.
pub fn generate_cohort(config: &SyntheticConfig) -> Result<SyntheticCohort> {
    config.validate()?;
    let m = config.instances;
    let f = config.factors;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut loadings = DMatrix::from_fn(CHANNELS.len(), f, |c, k| if k < 4 { BASE_LOADINGS[c][k] } else { 0.0 });
    for k in 4..f {
        for c in 0..CHANNELS.len() {
            loadings[(c, k)] = rng.random_range(-0.3..0.3);
        }
    }
    loadings *= config.loading_scale;
    let factors = DMatrix::from_fn(f, m, |_, _| StandardNormal.sample(&mut rng));
    let mut channels = &loadings * &factors;
    for x in channels.iter_mut() {
        let e: f64 = StandardNormal.sample(&mut rng);
        *x += config.noise * e;
    }

    let (sphere, faces) = sphere_mesh(config.vertices);
    let ch = |name: &str| CHANNELS.iter().position(|&c| c == name).expect("known channel");
    let base_radii = [22.0, 14.0, 10.0];
    let bulge_center = [0.8, 0.0, 0.6];
    let mut instances = Vec::with_capacity(m);
    for j in 0..m {
        let z = |name: &str| channels[(ch(name), j)];
        let scale = 1.0 + 0.08 * z("size");
        let radii = [
            base_radii[0] * scale * (1.0 + 0.05 * z("elongation")),
            base_radii[1] * scale,
            base_radii[2] * scale * (1.0 - 0.03 * z("elongation")),
        ];
        let bulge = 1.5 + z("bulge");
        let mut vertices = Vec::with_capacity(sphere.len());
        let mut features = Vec::with_capacity(sphere.len());
        for p in &sphere {
            let dist2: f64 = (0..3).map(|a| (p[a] - bulge_center[a]).powi(2)).sum();
            let bump = bulge * (-dist2 / 0.3).exp();
            let mut v = [0.0; 3];
            for a in 0..3 {
                let e: f64 = StandardNormal.sample(&mut rng);
                v[a] = radii[a] * p[a] + bump * p[a] + 0.1 * config.noise * e;
            }
            vertices.push(v);
            let e: f64 = StandardNormal.sample(&mut rng);
            let log_burden = -1.0 + 1.5 * p[2] + 0.8 * z("burden") + 0.5 * z("spread") * p[0] + 0.5 * config.noise * e;
            features.push(log_burden.exp());
        }
        let volume: f64 = features.iter().sum();
        let indicators = vec![
            (68.0 + 11.0 * z("age")).clamp(20.0, 99.0),
            f64::from(u8::from(z("sex") > 0.0)),
            f64::from(u8::from(z("hypertension") > -0.4)),
            f64::from(u8::from(z("hyperlipidemia") > 0.1)),
            f64::from(u8::from(z("afib") > 1.0)),
            threshold_level(z("smoking"), &SMOKING_CUTS, 1.0),
            (1.2 + 0.9 * z("nihss")).exp().floor().min(42.0),
            threshold_level(z("mrs"), &MRS_CUTS, 0.0),
            volume,
        ];
        instances.push(Instance {
            vertices,
            features,
            indicators,
        });
    }
    let spec = cohort_spec();
    let ids = (0..m).map(|j| format!("s{j:04}")).collect();
    let cohort = Cohort::from_instances(ids, &instances, faces, &spec)?;
    Ok(SyntheticCohort {
        cohort,
        spec,
        instances,
        truth: GroundTruth {
            factors,
            loadings,
            channels,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use jointshape::shape::{devectorize, TriangleMesh};
    use std::collections::HashMap;

    #[test]
    fn sphere_mesh_is_a_closed_surface() {
        for n in [5, 6, 12, 50, 200, 1504] {
            let (v, f) = sphere_mesh(n);
            assert_eq!(v.len(), n);
            assert_eq!(f.len(), 2 * n - 4, "n = {n}");
            TriangleMesh::new(v.clone(), f.clone()).unwrap();
            // every edge is shared by exactly two faces with opposite orientation
            let mut edges: HashMap<(u32, u32), i32> = HashMap::new();
            for t in &f {
                for e in 0..3 {
                    *edges.entry((t[e], t[(e + 1) % 3])).or_default() += 1;
                }
            }
            for (&(a, b), &count) in &edges {
                assert_eq!(count, 1, "n = {n}: directed edge {a}->{b}");
                assert_eq!(edges.get(&(b, a)), Some(&1), "n = {n}: edge {a}-{b} is open");
            }
            for p in &v {
                assert!(((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn same_seed_same_cohort() {
        let config = SyntheticConfig {
            instances: 20,
            vertices: 30,
            ..SyntheticConfig::default()
        };
        let a = generate_cohort(&config).unwrap();
        assert_eq!(a, generate_cohort(&config).unwrap());
        let b = generate_cohort(&SyntheticConfig { seed: 1, ..config }).unwrap();
        assert_ne!(a.cohort.data, b.cohort.data);
    }

    #[test]
    fn vectors_recover_the_generated_parts() {
        let s = generate_cohort(&SyntheticConfig {
            instances: 10,
            vertices: 40,
            ..SyntheticConfig::default()
        })
        .unwrap();
        for (j, inst) in s.instances.iter().enumerate() {
            let back = devectorize(s.cohort.data.column(j).as_slice(), &s.cohort.layout).unwrap();
            assert_eq!(&back, inst);
        }
    }

    #[test]
    fn zero_loadings_and_noise_give_identical_instances() {
        let s = generate_cohort(&SyntheticConfig {
            instances: 8,
            vertices: 20,
            loading_scale: 0.0,
            noise: 0.0,
            ..SyntheticConfig::default()
        })
        .unwrap();
        for j in 1..8 {
            assert_eq!(s.cohort.data.column(j), s.cohort.data.column(0));
        }
    }

    #[test]
    fn features_are_nonnegative_and_indicators_admissible() {
        let s = generate_cohort(&SyntheticConfig {
            instances: 200,
            vertices: 50,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let specs = indicator_specs();
        for inst in &s.instances {
            assert!(inst.features.iter().all(|&f| f >= 0.0));
            for (v, spec) in inst.indicators.iter().zip(&specs) {
                assert!(spec.admits(*v), "{} = {v}", spec.name);
            }
            assert_eq!(inst.indicators[8], inst.features.iter().sum::<f64>());
        }
    }

    #[test]
    fn invalid_recipes_are_rejected() {
        for bad in [
            SyntheticConfig { instances: 2, ..SyntheticConfig::default() },
            SyntheticConfig { vertices: 4, ..SyntheticConfig::default() },
            SyntheticConfig { factors: 0, ..SyntheticConfig::default() },
            SyntheticConfig { instances: 5, factors: 5, ..SyntheticConfig::default() },
            SyntheticConfig { noise: -1.0, ..SyntheticConfig::default() },
            SyntheticConfig { loading_scale: f64::NAN, ..SyntheticConfig::default() },
        ] {
            assert!(matches!(generate_cohort(&bad), Err(Error::InvalidConfig(_))));
        }
    }
}
