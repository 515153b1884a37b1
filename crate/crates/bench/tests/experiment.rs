use jointshape::crossval::held_out_latent;
use jointshape::shape::Cohort;
use jointshape::{fit_joint_model, BlockSigmas, Block, ConditioningPlan, Error, FitConfig, LatentModel};
use jointshape_bench::{
    generate_cohort, run_reconstruction_experiment, Column, ExperimentOptions, OrdinalScoring, Split, SyntheticConfig,
};

fn small(instances: usize, vertices: usize, seed: u64) -> SyntheticConfig {
    SyntheticConfig {
        instances,
        vertices,
        seed,
        ..SyntheticConfig::default()
    }
}

fn fixed_sigmas() -> BlockSigmas {
    BlockSigmas {
        shape: 0.1,
        feature: 0.3,
        indicator: 0.3,
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn shared_factor_correlates_latent_rows() {
    // a single factor drives head size and age; noise is small
    let config = SyntheticConfig {
        instances: 1000,
        vertices: 20,
        factors: 1,
        noise: 0.1,
        seed: 3,
        ..SyntheticConfig::default()
    };
    let synth = generate_cohort(&config).unwrap();
    let c = &synth.cohort;
    // the vertex farthest along x is a radius of the ellipsoid
    let far = (0..c.layout.vertices)
        .max_by(|&a, &b| synth.instances[0].vertices[a][0].total_cmp(&synth.instances[0].vertices[b][0]))
        .unwrap();
    let model = fit_joint_model(&c.data, &c.specs, c.layout, c.topology.clone(), &FitConfig::default()).unwrap();
    let all: Vec<usize> = (0..c.len()).collect();
    let latent = held_out_latent(&model, &c.data, &all).unwrap();
    let radius: Vec<f64> = latent.row(c.layout.coordinate(far, 0)).iter().copied().collect();
    let age: Vec<f64> = latent.row(model.index_of("age").unwrap()).iter().copied().collect();
    let r = pearson(&radius, &age);
    assert!(r > 0.9, "correlation {r}");
}

fn run(cohort: &Cohort, options: &ExperimentOptions) -> jointshape_bench::ExperimentReport {
    let split = Split::proportional(cohort.len(), options.seed).unwrap();
    run_reconstruction_experiment(cohort, &split, options).unwrap()
}

#[test]
fn conditioning_beats_the_median_baseline() {
    let synth = generate_cohort(&SyntheticConfig {
        loading_scale: 1.5,
        noise: 0.2,
        ..small(300, 60, 11)
    })
    .unwrap();
    let options = ExperimentOptions {
        sigmas: Some(fixed_sigmas()),
        ..ExperimentOptions::default()
    };
    let report = run(&synth.cohort, &options);
    for target in report.targets() {
        let base = report.get(target, Column::Mean).unwrap();
        for row in report.rows.iter().filter(|r| r.target == target && r.column != Column::Mean) {
            // paired per-instance differences, in the direction of improvement
            let diffs: Vec<f64> = base
                .errors
                .iter()
                .zip(&row.errors)
                .map(|(b, e)| if row.higher_is_better() { e - b } else { b - e })
                .collect();
            let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
            let slack = if row.higher_is_better() { base.standard_error() } else { 0.0 };
            assert!(mean >= -slack, "{target} from {:?}: paired gain {mean}", row.column);
        }
    }
    // block targets improve strictly when everything else is observed
    for target in ["shape", "WMH"] {
        let base = report.get(target, Column::Mean).unwrap();
        let combined = report.get(target, Column::Combined).unwrap();
        let better = base.errors.iter().zip(&combined.errors).filter(|(b, c)| c < b).count();
        assert!(better * 10 > base.errors.len() * 7, "{target}: {better} of {}", base.errors.len());
        assert!(combined.mean < base.mean);
    }
}

#[test]
fn report_has_one_row_per_target_and_column() {
    let synth = generate_cohort(&small(120, 30, 5)).unwrap();
    let options = ExperimentOptions {
        sigmas: Some(fixed_sigmas()),
        ..ExperimentOptions::default()
    };
    let report = run(&synth.cohort, &options);
    assert_eq!(report.train_size + report.validation_size, 120);
    assert_eq!(report.train_size, 91);
    assert_eq!(report.targets(), vec!["age", "sex", "mrs", "shape", "WMH"]);
    // three indicator targets with all six columns, two block targets without their own block
    assert_eq!(report.rows.len(), 3 * 6 + 2 * 5);
    for row in &report.rows {
        assert_eq!(report.rows.iter().filter(|r| r.target == row.target && r.column == row.column).count(), 1);
        assert_eq!(row.count, report.validation_size);
        assert_eq!(row.errors.len(), row.count);
    }
    assert!(report.get("shape", Column::Ventricles).is_none());
    assert!(report.get("WMH", Column::Wmh).is_none());
    let sex = report.get("sex", Column::Combined).unwrap();
    assert!(sex.errors.iter().all(|&e| e == 0.0 || e == 100.0));
}

#[test]
fn shape_observing_itself_without_noise_is_exact() {
    let synth = generate_cohort(&small(80, 20, 9)).unwrap();
    let options = ExperimentOptions {
        sigmas: Some(fixed_sigmas()),
        targets: vec!["shape".into()],
        include_self: true,
        ..ExperimentOptions::default()
    };
    let report = run(&synth.cohort, &options);
    let row = report.get("shape", Column::Ventricles).unwrap();
    assert!(row.mean < 1e-9, "self error {}", row.mean);
}

#[test]
fn expected_ordinal_scoring_is_an_option() {
    let synth = generate_cohort(&small(120, 20, 2)).unwrap();
    let base = ExperimentOptions {
        sigmas: Some(fixed_sigmas()),
        targets: vec!["mrs".into(), "age".into()],
        ..ExperimentOptions::default()
    };
    let levels = run(&synth.cohort, &base);
    let expected = run(
        &synth.cohort,
        &ExperimentOptions {
            ordinal_scoring: OrdinalScoring::Expected,
            ..base.clone()
        },
    );
    // level-scored errors are integers, expectations generally are not
    let row = levels.get("mrs", Column::Combined).unwrap();
    assert!(row.errors.iter().all(|e| e.fract() == 0.0));
    let row = expected.get("mrs", Column::Combined).unwrap();
    assert!(row.errors.iter().any(|e| e.fract() != 0.0));
    assert_eq!(levels.get("age", Column::Combined), expected.get("age", Column::Combined));
}

#[test]
fn unknown_targets_and_bad_splits_are_rejected() {
    let synth = generate_cohort(&small(40, 10, 1)).unwrap();
    let c = &synth.cohort;
    let options = ExperimentOptions {
        targets: vec!["blood_type".into()],
        ..ExperimentOptions::default()
    };
    let split = Split::proportional(c.len(), 1).unwrap();
    assert!(matches!(run_reconstruction_experiment(c, &split, &options), Err(Error::InvalidTask(_))));
    assert!(matches!(Split::new(vec![0, 1, 2], vec![2, 3], 40), Err(Error::InvalidConfig(_))));
    assert!(matches!(Split::new(vec![0, 1], vec![3], 40), Err(Error::InvalidConfig(_))));
    assert!(matches!(Split::new(vec![0, 1, 2], vec![], 40), Err(Error::InvalidConfig(_))));
    let overlapping = Split {
        train: vec![0, 1, 2, 3],
        validation: vec![3, 4],
    };
    let err = run_reconstruction_experiment(c, &overlapping, &ExperimentOptions::default()).unwrap_err();
    assert!(matches!(err, Error::InvalidConfig(_)));
}

#[test]
fn reports_are_deterministic() {
    let synth = generate_cohort(&small(100, 20, 4)).unwrap();
    let again = generate_cohort(&small(100, 20, 4)).unwrap();
    assert_eq!(synth.cohort, again.cohort);
    let options = ExperimentOptions {
        targets: vec!["age".into(), "shape".into()],
        ..ExperimentOptions::default()
    };
    let a = run(&synth.cohort, &options);
    let b = run(&again.cohort, &options);
    assert_eq!(a, b);
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn report_matches_golden_file() {
    let synth = generate_cohort(&small(120, 30, 7)).unwrap();
    let report = run(&synth.cohort, &ExperimentOptions::default());
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/small_report.csv");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, report.to_csv()).unwrap();
    }
    let golden = std::fs::read_to_string(&path).unwrap();
    assert_eq!(report.to_csv(), golden);
}

#[test]
fn posterior_variance_shrinks_as_blocks_are_added() {
    let synth = generate_cohort(&small(150, 30, 8)).unwrap();
    let c = &synth.cohort;
    let model = fit_joint_model(&c.data, &c.specs, c.layout, c.topology.clone(), &FitConfig::default()).unwrap();
    let instance: Vec<f64> = c.data.column(0).iter().copied().collect();
    let sigmas = fixed_sigmas();
    let mut observed: Vec<usize> = Vec::new();
    let mut previous = model.latent_variance();
    for block in [Block::Indicator, Block::Coordinate, Block::Feature] {
        observed.extend(c.layout.range(block));
        let noise: Vec<f64> = observed.iter().map(|&i| sigmas.get(c.specs[i].block)).collect();
        let values: Vec<f64> = observed.iter().map(|&i| instance[i]).collect();
        let posterior = ConditioningPlan::new(&model, &observed, &noise).unwrap().condition(&values).unwrap();
        let variance = posterior.latent_variance();
        for i in 0..variance.len() {
            assert!(variance[i] <= previous[i] + 1e-10, "{block:?}: component {i}");
        }
        previous = variance;
    }
}
