use std::path::Path;

use jointshape::shape::{load_cohort, write_cohort, Cohort, CohortSpec, Instance, TriangleMesh};
use jointshape::{Error, ValueSource, VariableSpec};

fn tetra(scale: f64) -> Vec<[f64; 3]> {
    vec![[0.0, 0.0, 0.0], [scale, 0.0, 0.0], [0.0, scale, 0.0], [0.0, 0.0, scale]]
}

const FACES: [[u32; 3]; 4] = [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];

fn spec() -> CohortSpec {
    CohortSpec {
        coordinate_marginal: jointshape::MarginalChoice::Gaussian,
        feature_marginal: jointshape::MarginalChoice::Empirical,
        indicators: vec![
            VariableSpec::binary("sex", Some(["female", "male"])),
            VariableSpec::ordinal("mrs", (0..=6).map(f64::from)),
            VariableSpec::continuous("volume", jointshape::Block::Indicator, jointshape::MarginalChoice::Empirical)
                .with_source(ValueSource::FeatureTotal),
        ],
    }
}

fn three_instances() -> Cohort {
    let instances: Vec<Instance> = (0..3)
        .map(|j| {
            let features = vec![j as f64, 1.5, 0.0, 2.0 * j as f64];
            Instance {
                vertices: tetra(1.0 + j as f64),
                indicators: vec![(j % 2) as f64, j as f64, features.iter().sum()],
                features,
            }
        })
        .collect();
    let ids = vec!["p01".into(), "p02".into(), "p03".into()];
    Cohort::from_instances(ids, &instances, FACES.to_vec(), &spec()).unwrap()
}

fn indicators_path(dir: &Path) -> std::path::PathBuf {
    dir.join("indicators.csv")
}

#[test]
fn round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = three_instances();
    write_cohort(dir.path(), &cohort, &spec()).unwrap();
    let loaded = load_cohort(dir.path(), &indicators_path(dir.path()), &spec()).unwrap();
    assert_eq!(loaded.len(), 3);
    assert_eq!(loaded.data.nrows(), 4 * 4 + 3);
    assert_eq!(loaded, cohort);
}

#[test]
fn volume_indicator_is_the_feature_sum() {
    let dir = tempfile::tempdir().unwrap();
    write_cohort(dir.path(), &three_instances(), &spec()).unwrap();
    // the recorded volume column is ignored; overwrite it with nonsense
    let csv = std::fs::read_to_string(indicators_path(dir.path())).unwrap();
    let edited: String = csv
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                format!("{l}\n")
            } else {
                let mut cells: Vec<&str> = l.split(',').collect();
                cells[3] = "-99";
                format!("{}\n", cells.join(","))
            }
        })
        .collect();
    std::fs::write(indicators_path(dir.path()), edited).unwrap();
    let loaded = load_cohort(dir.path(), &indicators_path(dir.path()), &spec()).unwrap();
    for j in 0..loaded.len() {
        let inst = loaded.instance(j);
        let mut total = 0.0;
        for f in &inst.features {
            total += f;
        }
        assert_eq!(inst.indicators[2], total);
    }
}

#[test]
fn vertex_count_mismatch_is_a_correspondence_error() {
    let dir = tempfile::tempdir().unwrap();
    write_cohort(dir.path(), &three_instances(), &spec()).unwrap();
    let mut verts = tetra(1.0);
    verts.push([1.0, 1.0, 1.0]);
    let odd = TriangleMesh::new(verts, FACES.to_vec()).unwrap();
    std::fs::write(dir.path().join("p02.csm"), odd.to_csm()).unwrap();
    let err = load_cohort(dir.path(), &indicators_path(dir.path()), &spec()).unwrap_err();
    assert!(matches!(err, Error::CorrespondenceError(_)), "{err}");
}

#[test]
fn face_list_mismatch_is_a_correspondence_error() {
    let dir = tempfile::tempdir().unwrap();
    write_cohort(dir.path(), &three_instances(), &spec()).unwrap();
    let mut faces = FACES.to_vec();
    faces.swap(0, 1);
    let odd = TriangleMesh::new(tetra(2.0), faces).unwrap();
    std::fs::write(dir.path().join("p03.csm"), odd.to_csm()).unwrap();
    let err = load_cohort(dir.path(), &indicators_path(dir.path()), &spec()).unwrap_err();
    assert!(matches!(err, Error::CorrespondenceError(_)));
}

#[test]
fn missing_indicator_row_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    write_cohort(dir.path(), &three_instances(), &spec()).unwrap();
    let csv = std::fs::read_to_string(indicators_path(dir.path())).unwrap();
    let kept: String = csv.lines().filter(|l| !l.starts_with("p02")).map(|l| format!("{l}\n")).collect();
    std::fs::write(indicators_path(dir.path()), kept).unwrap();
    let err = load_cohort(dir.path(), &indicators_path(dir.path()), &spec()).unwrap_err();
    assert!(matches!(err, Error::MissingRecord(_)));
}

#[test]
fn unparseable_files_are_format_errors() {
    let dir = tempfile::tempdir().unwrap();
    write_cohort(dir.path(), &three_instances(), &spec()).unwrap();
    std::fs::write(dir.path().join("p01.csm"), "CSM1 4 4\nv 0 0\n").unwrap();
    let err = load_cohort(dir.path(), &indicators_path(dir.path()), &spec()).unwrap_err();
    assert!(matches!(err, Error::FormatError(_)), "{err}");
}

#[test]
fn inadmissible_indicator_level_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_cohort(dir.path(), &three_instances(), &spec()).unwrap();
    let csv = std::fs::read_to_string(indicators_path(dir.path())).unwrap();
    std::fs::write(indicators_path(dir.path()), csv.replacen("p01,0,0", "p01,0,9", 1)).unwrap();
    let err = load_cohort(dir.path(), &indicators_path(dir.path()), &spec()).unwrap_err();
    assert!(matches!(err, Error::InvalidLevel { .. }), "{err}");
}

#[test]
fn voxel_lists_and_other_mesh_formats_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let obj = |s: f64| {
        let mut text = String::from("# tetra\n");
        for v in tetra(s) {
            text.push_str(&format!("v {} {} {}\n", v[0], v[1], v[2]));
        }
        for f in FACES {
            text.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
        }
        text
    };
    std::fs::write(d.join("a.obj"), obj(1.0)).unwrap();
    std::fs::write(d.join("b.obj"), obj(2.0)).unwrap();
    std::fs::write(d.join("a.vox"), "0.9 0 0\n0.1 0.1 0.1\n0 0 0.8\n").unwrap();
    std::fs::write(d.join("b.feat"), "1\n2\n3\n4\n").unwrap();
    std::fs::write(d.join("ind.tsv"), "id\tsex\tmrs\nb\tmale\t2\na\tFemale\t0\n").unwrap();
    let cohort = load_cohort(d, &d.join("ind.tsv"), &spec()).unwrap();
    assert_eq!(cohort.ids, vec!["a", "b"]);
    let a = cohort.instance(0);
    assert_eq!(a.features, vec![1.0, 1.0, 0.0, 1.0]);
    assert_eq!(a.indicators, vec![0.0, 0.0, 3.0]);
    let b = cohort.instance(1);
    assert_eq!(b.indicators, vec![1.0, 2.0, 10.0]);
    assert_eq!(b.vertices, tetra(2.0));
}

#[test]
fn missing_feature_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    write_cohort(dir.path(), &three_instances(), &spec()).unwrap();
    std::fs::remove_file(dir.path().join("p03.feat")).unwrap();
    let err = load_cohort(dir.path(), &indicators_path(dir.path()), &spec()).unwrap_err();
    assert!(matches!(err, Error::MissingRecord(_)));
}
