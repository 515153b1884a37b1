//! Model files: a canonical JSON text form and a compact CBOR binary form
//! carrying the same record.

use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::latent::LatentGaussian;
use crate::marginal::{EmpiricalMarginal, MarginalKind, MarginalModel};
use crate::model::{FitMetadata, JointModel};
use crate::shape::InstanceLayout;
use crate::spec::VariableSpec;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFormat {
    Json,
    Binary,
}

impl ModelFormat {
    /// `.cbor` and `.bin` files are binary, everything else is JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("cbor" | "bin") => ModelFormat::Binary,
            _ => ModelFormat::Json,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum MarginalRecord {
    Empirical { values: Vec<f64> },
    Gaussian { mean: f64, stddev: f64 },
}

#[derive(Serialize, Deserialize)]
struct LatentRecord {
    mean: Vec<f64>,
    /// Column-major `d × r`.
    basis: Vec<f64>,
    eigenvalues: Vec<f64>,
    jitter: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    format_version: u32,
    layout: InstanceLayout,
    specs: Vec<VariableSpec>,
    marginals: Vec<MarginalRecord>,
    latent: LatentRecord,
    topology: Vec<[u32; 3]>,
    fit: FitMetadata,
}

impl ModelRecord {
    fn from_model(model: &JointModel) -> Self {
        let latent = model.latent();
        Self {
            format_version: FORMAT_VERSION,
            layout: *model.layout(),
            specs: model.specs().cloned().collect(),
            marginals: model
                .marginals()
                .iter()
                .map(|m| match m.kind() {
                    MarginalKind::Empirical(e) => MarginalRecord::Empirical { values: e.values().to_vec() },
                    MarginalKind::Gaussian { mean, stddev } => MarginalRecord::Gaussian {
                        mean: *mean,
                        stddev: *stddev,
                    },
                })
                .collect(),
            latent: LatentRecord {
                mean: latent.mean().as_slice().to_vec(),
                basis: latent.basis().as_slice().to_vec(),
                eigenvalues: latent.eigenvalues().as_slice().to_vec(),
                jitter: latent.jitter(),
            },
            topology: model.topology().to_vec(),
            fit: *model.fit_metadata(),
        }
    }

    fn into_model(self) -> Result<JointModel> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::FormatError(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.specs.len() != self.marginals.len() {
            return Err(Error::FormatError(format!(
                "{} specs but {} marginal tables",
                self.specs.len(),
                self.marginals.len()
            )));
        }
        let marginals = self
            .specs
            .into_iter()
            .zip(self.marginals)
            .map(|(spec, record)| {
                let kind = match record {
                    MarginalRecord::Empirical { values } => {
                        if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[0] > w[1]) {
                            return Err(Error::FormatError(format!(
                                "marginal table for '{}' is not a sorted finite list",
                                spec.name
                            )));
                        }
                        MarginalKind::Empirical(EmpiricalMarginal::new(values))
                    }
                    MarginalRecord::Gaussian { mean, stddev } => MarginalKind::Gaussian { mean, stddev },
                };
                MarginalModel::from_parts(spec, kind)
            })
            .collect::<Result<Vec<_>>>()?;
        let LatentRecord {
            mean,
            basis,
            eigenvalues,
            jitter,
        } = self.latent;
        let (d, r) = (mean.len(), eigenvalues.len());
        if basis.len() != d * r {
            return Err(Error::FormatError(format!("basis has {} entries, expected {d}×{r}", basis.len())));
        }
        let latent = LatentGaussian::new(
            DVector::from_vec(mean),
            DMatrix::from_vec(d, r, basis),
            DVector::from_vec(eigenvalues),
            jitter,
        )
        .map_err(|e| Error::FormatError(e.to_string()))?;
        JointModel::from_parts(marginals, latent, self.layout, self.topology, self.fit)
    }
}

/// Canonical text form. Numbers use the shortest representation that
/// parses back to the identical `f64`.
pub fn model_to_json(model: &JointModel) -> String {
    serde_json::to_string(&ModelRecord::from_model(model)).expect("model record serializes")
}

pub fn model_from_json(text: &str) -> Result<JointModel> {
    let record: ModelRecord = serde_json::from_str(text).map_err(|e| Error::FormatError(format!("model json: {e}")))?;
    record.into_model()
}

pub fn model_to_binary(model: &JointModel) -> Vec<u8> {
    let mut out = Vec::new();
    ciborium::into_writer(&ModelRecord::from_model(model), &mut out).expect("model record serializes");
    out
}

pub fn model_from_binary(bytes: &[u8]) -> Result<JointModel> {
    let record: ModelRecord =
        ciborium::from_reader(bytes).map_err(|e| Error::FormatError(format!("model cbor: {e}")))?;
    record.into_model()
}

pub fn model_to_bytes(model: &JointModel, format: ModelFormat) -> Vec<u8> {
    match format {
        ModelFormat::Json => model_to_json(model).into_bytes(),
        ModelFormat::Binary => model_to_binary(model),
    }
}

/// Decodes either form; JSON is recognized by its leading `{`.
pub fn model_from_bytes(bytes: &[u8]) -> Result<JointModel> {
    let first = bytes.iter().find(|b| !b.is_ascii_whitespace());
    if first == Some(&b'{') {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::FormatError(format!("model json: {e}")))?;
        model_from_json(text)
    } else {
        model_from_binary(bytes)
    }
}

pub fn load_model(path: &Path) -> Result<JointModel> {
    model_from_bytes(&std::fs::read(path)?)
}

/// Writes the model next to `path` first and renames it into place.
pub fn save_model(model: &JointModel, path: &Path, format: ModelFormat) -> Result<()> {
    write_atomic(path, &model_to_bytes(model, format))
}

/// Replaces `path` with `bytes` so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut file = std::fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// SHA-256 of the canonical text form, hex encoded.
pub fn model_digest(model: &JointModel) -> String {
    hex::encode(Sha256::digest(model_to_json(model).as_bytes()))
}

/// SHA-256 of the face list (little-endian `u32` triples), hex encoded.
pub fn topology_checksum(faces: &[[u32; 3]]) -> String {
    let mut hasher = Sha256::new();
    for f in faces {
        for v in f {
            hasher.update(v.to_le_bytes());
        }
    }
    hex::encode(hasher.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fit_joint_model, FitConfig};
    use crate::spec::{Block, MarginalChoice};

    fn small_model() -> JointModel {
        let data = DMatrix::from_fn(5, 9, |i, j| match i {
            0 => ((j * 7) % 5) as f64 * 0.37,
            1 => (j % 2) as f64,
            2 => ((j * 3) % 4 + 1) as f64,
            _ => (j as f64).sin() * (i as f64 + 1.0) + 1.0 / 3.0,
        });
        let specs = vec![
            VariableSpec::continuous("a", Block::Indicator, MarginalChoice::Empirical),
            VariableSpec::binary("sex", Some(["female", "male"])),
            VariableSpec::ordinal("grade", vec![1.0, 2.0, 3.0, 4.0, 5.0]),
            VariableSpec::continuous("g", Block::Indicator, MarginalChoice::Gaussian),
            VariableSpec::continuous("h", Block::Indicator, MarginalChoice::Empirical),
        ];
        fit_joint_model(&data, &specs, InstanceLayout::new(0, 5), vec![], &FitConfig::default()).unwrap()
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let model = small_model();
        let text = model_to_json(&model);
        assert!(text.contains("\"format_version\":1"));
        let back = model_from_json(&text).unwrap();
        assert_eq!(back, model);
        assert_eq!(model_to_json(&back), text);
    }

    #[test]
    fn binary_and_text_agree() {
        let model = small_model();
        let bin = model_to_binary(&model);
        let from_bin = model_from_bytes(&bin).unwrap();
        assert_eq!(from_bin, model);
        assert_eq!(model_to_json(&from_bin), model_to_json(&model));
        assert!(bin.len() < model_to_json(&model).len());
    }

    #[test]
    fn rejects_other_versions_and_garbage() {
        let text = model_to_json(&small_model()).replace("\"format_version\":1", "\"format_version\":2");
        assert!(matches!(model_from_json(&text), Err(Error::FormatError(_))));
        assert!(matches!(model_from_bytes(b"{not json"), Err(Error::FormatError(_))));
        assert!(matches!(model_from_bytes(&[0xff, 0x00, 0x13]), Err(Error::FormatError(_))));
    }

    #[test]
    fn save_and_load_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let model = small_model();
        for name in ["m.json", "m.cbor"] {
            let path = dir.path().join(name);
            save_model(&model, &path, ModelFormat::from_path(&path)).unwrap();
            assert_eq!(load_model(&path).unwrap(), model);
        }
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
    }

    #[test]
    fn digests_are_stable() {
        let model = small_model();
        assert_eq!(model_digest(&model), model_digest(&model.clone()));
        assert_eq!(model_digest(&model).len(), 64);
        assert_ne!(topology_checksum(&[[0, 1, 2]]), topology_checksum(&[[0, 2, 1]]));
    }
}
