use jointshape::shape::InstanceLayout;
use jointshape::{cross_validate_sigma, Block, FitConfig, MarginalChoice, SigmaGrid, VariableSpec};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[test]
fn recovers_injected_observation_noise() {
    // two factors drive every component; only the indicators carry extra
    // noise of known size on the standardized scale
    let layout = InstanceLayout::new(2, 6);
    let d = layout.dimension();
    let m = 300;
    let tau: f64 = 0.2;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut loadings = DMatrix::from_fn(d, 2, |i, k| (((i * 7 + k * 3) % 11) as f64 - 5.0) / 5.0 + 0.1);
    for i in layout.range(Block::Indicator) {
        let norm = loadings.row(i).norm();
        let target = (1.0 - tau * tau).sqrt();
        for k in 0..2 {
            loadings[(i, k)] *= target / norm;
        }
    }
    let factors = DMatrix::from_fn(2, m, |_, _| StandardNormal.sample(&mut rng));
    let mut data = &loadings * factors;
    for i in layout.range(Block::Indicator) {
        for j in 0..m {
            let e: f64 = StandardNormal.sample(&mut rng);
            data[(i, j)] += tau * e;
        }
    }
    let specs: Vec<VariableSpec> = (0..d)
        .map(|i| VariableSpec::continuous(format!("c{i}"), layout.block_of(i).unwrap(), MarginalChoice::Gaussian))
        .collect();
    let grid = [0.025, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6];
    let config = FitConfig {
        rank: Some(2),
        ..FitConfig::default()
    };
    let sel = cross_validate_sigma(&data, &specs, layout, &SigmaGrid::uniform(&grid), 3, 1, &config).unwrap();
    let chosen = sel.sigmas.indicator;
    let step = grid.iter().position(|&g| g == chosen).unwrap() as i64;
    let truth = grid.iter().position(|&g| g == tau).unwrap() as i64;
    assert!((step - truth).abs() <= 1, "chose σ = {chosen}, errors {:?}", sel.errors_for(Block::Indicator));
}
