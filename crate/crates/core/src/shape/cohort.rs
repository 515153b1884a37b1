use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::layout::{devectorize, vectorize, Instance, InstanceLayout};
use super::mesh::{read_mesh, TriangleMesh};
use super::voxels::assign_voxels_to_vertices;
use crate::error::{Error, Result};
use crate::spec::{Block, MarginalChoice, ValueSource, VariableSpec};

/// Declares how a cohort's components are modelled. Coordinates and features
/// share one marginal choice per block; indicators are declared individually.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    #[serde(default = "gaussian")]
    pub coordinate_marginal: MarginalChoice,
    #[serde(default = "empirical")]
    pub feature_marginal: MarginalChoice,
    pub indicators: Vec<VariableSpec>,
}

fn gaussian() -> MarginalChoice {
    MarginalChoice::Gaussian
}

fn empirical() -> MarginalChoice {
    MarginalChoice::Empirical
}

impl CohortSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::FormatError(format!("specs: {e}")))?;
        for ind in &spec.indicators {
            ind.clone().validated()?;
            if ind.block != Block::Indicator {
                return Err(Error::InvalidInput(format!("'{}' must be in the indicator block", ind.name)));
            }
        }
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// One declaration per instance component, in layout order.
    pub fn component_specs(&self, vertices: usize) -> Vec<VariableSpec> {
        let mut specs = Vec::with_capacity(4 * vertices + self.indicators.len());
        for k in 0..vertices {
            for axis in ["x", "y", "z"] {
                specs.push(VariableSpec::continuous(
                    format!("v{k}.{axis}"),
                    Block::Coordinate,
                    self.coordinate_marginal,
                ));
            }
        }
        for k in 0..vertices {
            specs.push(VariableSpec::continuous(format!("f{k}"), Block::Feature, self.feature_marginal));
        }
        specs.extend(self.indicators.iter().cloned());
        specs
    }
}

/// A loaded training cohort: one data column per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub ids: Vec<String>,
    /// `d × M` data matrix.
    pub data: DMatrix<f64>,
    pub layout: InstanceLayout,
    pub topology: Vec<[u32; 3]>,
    pub specs: Vec<VariableSpec>,
}

impl Cohort {
    pub fn from_instances(
        ids: Vec<String>,
        instances: &[Instance],
        topology: Vec<[u32; 3]>,
        spec: &CohortSpec,
    ) -> Result<Self> {
        let n = instances.first().map_or(0, |i| i.vertices.len());
        let layout = InstanceLayout::new(n, spec.indicators.len());
        let mut data = DMatrix::zeros(layout.dimension(), instances.len());
        for (j, inst) in instances.iter().enumerate() {
            let col = vectorize(&inst.vertices, &inst.features, &inst.indicators, &layout)?;
            data.set_column(j, &nalgebra::DVector::from_vec(col));
        }
        Ok(Self {
            ids,
            data,
            layout,
            topology,
            specs: spec.component_specs(n),
        })
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn instance(&self, j: usize) -> Instance {
        devectorize(self.data.column(j).as_slice(), &self.layout).expect("cohort column matches layout")
    }

    pub fn indicator_specs(&self) -> &[VariableSpec] {
        &self.specs[self.layout.range(Block::Indicator)]
    }
}

const MESH_EXTENSIONS: [&str; 3] = ["csm", "obj", "ply"];

fn mesh_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if ext.is_some_and(|e| MESH_EXTENSIONS.contains(&e.as_str())) {
            let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            files.push((id, path));
        }
    }
    files.sort();
    if let Some(w) = files.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::FormatError(format!("instance '{}' has more than one mesh file", w[0].0)));
    }
    Ok(files)
}

fn read_features(dir: &Path, id: &str, mesh: &TriangleMesh) -> Result<Vec<f64>> {
    let feat = dir.join(format!("{id}.feat"));
    if feat.exists() {
        let text = std::fs::read_to_string(&feat)?;
        let values: Vec<f64> = text
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::FormatError(format!("{}: bad value '{t}'", feat.display()))))
            .collect::<Result<_>>()?;
        if values.len() != mesh.vertex_count() {
            return Err(Error::CorrespondenceError(format!(
                "{}: {} feature values for {} vertices",
                feat.display(),
                values.len(),
                mesh.vertex_count()
            )));
        }
        return Ok(values);
    }
    let vox = dir.join(format!("{id}.vox"));
    if vox.exists() {
        let text = std::fs::read_to_string(&vox)?;
        let mut centers = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let p: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::FormatError(format!("{}: bad value '{t}'", vox.display()))))
                .collect::<Result<_>>()?;
            if p.len() != 3 {
                return Err(Error::FormatError(format!("{}: expected 'x y z' per line", vox.display())));
            }
            centers.push([p[0], p[1], p[2]]);
        }
        return Ok(assign_voxels_to_vertices(&centers, &mesh.vertices));
    }
    Err(Error::MissingRecord(format!("no {id}.feat or {id}.vox feature file")))
}

/// Indicator rows keyed by id. The delimiter is sniffed from the header line.
fn read_indicators(path: &Path, specs: &[VariableSpec]) -> Result<HashMap<String, Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let header = text.lines().next().unwrap_or_default();
    let delimiter = [b'\t', b';', b','].into_iter().find(|d| header.as_bytes().contains(d)).unwrap_or(b',');
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let fmt = |e: csv::Error| Error::FormatError(format!("{}: {e}", path.display()));
    let headers = reader.headers().map_err(fmt)?.clone();
    if headers.get(0) != Some("id") {
        return Err(Error::FormatError(format!("{}: first column must be 'id'", path.display())));
    }
    let columns: Vec<Option<usize>> = specs
        .iter()
        .map(|s| match s.source {
            ValueSource::FeatureTotal => Ok(None),
            ValueSource::Recorded => headers
                .iter()
                .position(|h| h == s.name)
                .map(Some)
                .ok_or_else(|| Error::FormatError(format!("{}: no column '{}'", path.display(), s.name))),
        })
        .collect::<Result<_>>()?;
    let mut rows = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(fmt)?;
        let id = record.get(0).unwrap_or_default().to_string();
        let values = specs
            .iter()
            .zip(&columns)
            .map(|(spec, col)| match col {
                None => Ok(f64::NAN),
                Some(c) => spec.parse_value(record.get(*c).unwrap_or_default()),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.insert(id, values);
    }
    Ok(rows)
}

/// Loads every mesh in `mesh_dir` together with its feature file and
/// indicator row, ordered by instance id.
pub fn load_cohort(mesh_dir: &Path, indicators_file: &Path, spec: &CohortSpec) -> Result<Cohort> {
    let files = mesh_files(mesh_dir)?;
    if files.is_empty() {
        return Err(Error::InvalidInput(format!("no meshes in {}", mesh_dir.display())));
    }
    let rows = read_indicators(indicators_file, &spec.indicators)?;
    let mut topology: Option<TriangleMesh> = None;
    let mut ids = Vec::with_capacity(files.len());
    let mut instances = Vec::with_capacity(files.len());
    for (id, path) in files {
        let mesh = read_mesh(&path)?;
        if let Some(reference) = &topology {
            if mesh.vertex_count() != reference.vertex_count() {
                return Err(Error::CorrespondenceError(format!(
                    "{id} has {} vertices, expected {}",
                    mesh.vertex_count(),
                    reference.vertex_count()
                )));
            }
            if mesh.faces != reference.faces {
                return Err(Error::CorrespondenceError(format!("{id} does not share the cohort face list")));
            }
        }
        let features = read_features(mesh_dir, &id, &mesh)?;
        let mut indicators = rows
            .get(&id)
            .cloned()
            .ok_or_else(|| Error::MissingRecord(format!("no indicator row for '{id}'")))?;
        for (value, ind) in indicators.iter_mut().zip(&spec.indicators) {
            if ind.source == ValueSource::FeatureTotal {
                *value = features.iter().sum();
            }
        }
        if topology.is_none() {
            topology = Some(mesh.clone());
        }
        instances.push(Instance {
            vertices: mesh.vertices,
            features,
            indicators,
        });
        ids.push(id);
    }
    let faces = topology.map(|m| m.faces).unwrap_or_default();
    Cohort::from_instances(ids, &instances, faces, spec)
}

/// Writes a cohort as `<id>.csm` + `<id>.feat` files, `indicators.csv` and `specs.json`.
pub fn write_cohort(dir: &Path, cohort: &Cohort, spec: &CohortSpec) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut csv = String::from("id");
    for s in &spec.indicators {
        csv.push(',');
        csv.push_str(&s.name);
    }
    csv.push('\n');
    for (j, id) in cohort.ids.iter().enumerate() {
        let inst = cohort.instance(j);
        let mesh = TriangleMesh::new(inst.vertices.clone(), cohort.topology.clone())?;
        std::fs::write(dir.join(format!("{id}.csm")), mesh.to_csm())?;
        let mut feat = String::new();
        for f in &inst.features {
            let _ = writeln!(feat, "{f}");
        }
        std::fs::write(dir.join(format!("{id}.feat")), feat)?;
        csv.push_str(id);
        for v in &inst.indicators {
            let _ = write!(csv, ",{v}");
        }
        csv.push('\n');
    }
    std::fs::write(dir.join("indicators.csv"), csv)?;
    std::fs::write(dir.join("specs.json"), spec.to_json())?;
    Ok(())
}
