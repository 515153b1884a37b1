use std::io::Write;
use std::path::{Path, PathBuf};

use jointshape::io::write_atomic;
use jointshape::shape::{devectorize, load_cohort, write_cohort, Cohort, CohortSpec, TriangleMesh};
use jointshape::{
    condition, fit_joint_model, load_model, save_model, summarize, BlockSigmas, Error, FitConfig, JointModel,
    LatentModel, ModelFormat, PartialObservation, PosteriorSummary, Result,
};
use jointshape_bench::{
    generate_cohort, run_reconstruction_experiment, sample_distribution_report, ExperimentOptions, OrdinalScoring,
    Split, SyntheticConfig,
};
use serde::Serialize;

use crate::args::*;

/// Runs one parsed command, writing human-readable progress to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, out),
        Command::Condition(a) => cmd_condition(a, out),
        Command::Sample(a) => cmd_sample(a, out),
        Command::Mode(a) => cmd_mode(a, out),
        Command::Synth(a) => cmd_synth(a, out),
        Command::Eval(a) => cmd_eval(a, out),
    }
}

fn read_cohort(meshes: &Path, indicators: Option<&PathBuf>, spec: Option<&PathBuf>) -> Result<(Cohort, CohortSpec)> {
    let spec_path = spec.cloned().unwrap_or_else(|| meshes.join("specs.json"));
    let spec = CohortSpec::from_json(&std::fs::read_to_string(&spec_path)?)?;
    let indicators = indicators.cloned().unwrap_or_else(|| meshes.join("indicators.csv"));
    Ok((load_cohort(meshes, &indicators, &spec)?, spec))
}

impl FitOptions {
    pub fn config(&self) -> FitConfig {
        FitConfig {
            rankings: self.rankings,
            seed: self.seed,
            rank: self.rank,
            jitter: self.jitter,
        }
    }
}

impl SigmaArgs {
    fn any(&self) -> bool {
        self.sigma_shape.is_some() || self.sigma_feature.is_some() || self.sigma_indicator.is_some()
    }

    /// Given values, unset blocks at 0.
    pub fn sigmas(&self) -> BlockSigmas {
        BlockSigmas {
            shape: self.sigma_shape.unwrap_or(0.0),
            feature: self.sigma_feature.unwrap_or(0.0),
            indicator: self.sigma_indicator.unwrap_or(0.0),
        }
    }
}

impl SynthOptions {
    pub fn config(&self, seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            instances: self.instances,
            vertices: self.vertices,
            factors: self.factors,
            loading_scale: self.loading_scale,
            noise: self.noise,
            seed,
        }
    }
}

fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let (cohort, _) = read_cohort(&a.cohort.meshes, a.cohort.indicators.as_ref(), a.cohort.spec.as_ref())?;
    let model = fit_joint_model(&cohort.data, &cohort.specs, cohort.layout, cohort.topology.clone(), &a.fit.config())?;
    save_model(&model, &a.out, ModelFormat::from_path(&a.out))?;
    let eigen = model.latent().eigenvalues();
    let leading: Vec<String> = eigen.iter().take(5).map(|l| format!("{l:.4}")).collect();
    writeln!(
        out,
        "M = {}, d = {}, r = {}\nleading eigenvalues: {}",
        cohort.len(),
        model.dimension(),
        model.latent().rank(),
        leading.join(" ")
    )?;
    Ok(())
}

fn split_assignment(text: &str) -> Result<(&str, &str)> {
    text.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| Error::InvalidInput(format!("expected name=value, got '{text}'")))
}

/// Parses the `--set` assignments against the model.
pub fn observation(model: &JointModel, a: &ObservationArgs) -> Result<PartialObservation> {
    let pairs = a.assignments.iter().map(|s| split_assignment(s)).collect::<Result<Vec<_>>>()?;
    PartialObservation::from_assignments(model, &pairs, &a.sigmas.sigmas())
}

/// Runs `f` on the prior, or on the posterior when values are assigned.
fn with_model<T>(model: &JointModel, a: &ObservationArgs, f: impl FnOnce(&dyn LatentModel) -> Result<T>) -> Result<T> {
    if a.assignments.is_empty() {
        return f(model);
    }
    let posterior = condition(model, &observation(model, a)?)?;
    f(&posterior)
}

#[derive(Debug, Serialize)]
struct ObservedEntry<'a> {
    name: &'a str,
    value: f64,
    sigma: f64,
}

#[derive(Debug, Serialize)]
struct ConditionSummary<'a> {
    names: Vec<&'a str>,
    observed: Vec<ObservedEntry<'a>>,
    #[serde(flatten)]
    posterior: PosteriorSummary,
}

fn cmd_condition(a: &ConditionArgs, out: &mut dyn Write) -> Result<()> {
    if a.observation.assignments.is_empty() {
        return Err(Error::InvalidInput("condition needs at least one --set name=value".into()));
    }
    let model = load_model(&a.observation.model)?;
    let obs = observation(&model, &a.observation)?;
    let posterior = condition(&model, &obs)?;
    let summary = ConditionSummary {
        names: model.specs().map(|s| s.name.as_str()).collect(),
        observed: obs
            .entries()
            .iter()
            .map(|e| ObservedEntry {
                name: &model.spec(e.index).name,
                value: e.value,
                sigma: e.sigma,
            })
            .collect(),
        posterior: summarize(&posterior, a.modes),
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::FormatError(e.to_string()))?;
    write_atomic(&a.out, json.as_bytes())?;
    if let Some(path) = &a.mesh {
        write_mesh_atomic(path, &model, &summary.posterior.predicted)?;
    }
    let layout = model.layout();
    for i in layout.range(jointshape::Block::Indicator) {
        writeln!(
            out,
            "{:<16} {:>12.4} ± {:.4}",
            model.spec(i).name,
            summary.posterior.predicted[i],
            summary.posterior.stddev[i]
        )?;
    }
    Ok(())
}

fn write_mesh_atomic(path: &Path, model: &JointModel, instance: &[f64]) -> Result<()> {
    let parts = devectorize(instance, model.layout())?;
    let mesh = TriangleMesh::new(parts.vertices, model.topology().to_vec())?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or_default();
    let text = if ext.eq_ignore_ascii_case("obj") { mesh.to_obj() } else { mesh.to_csm() };
    write_atomic(path, text.as_bytes())
}

fn rows_for(model: &JointModel, vars: &[String]) -> Result<Vec<usize>> {
    if vars.is_empty() {
        return Ok((0..model.dimension()).collect());
    }
    vars.iter()
        .map(|v| model.index_of(v).ok_or_else(|| Error::InvalidTask(format!("unknown variable '{v}'"))))
        .collect()
}

fn cmd_sample(a: &SampleArgs, out: &mut dyn Write) -> Result<()> {
    let model = load_model(&a.observation.model)?;
    let rows = rows_for(&model, &a.vars)?;
    with_model(&model, &a.observation, |m| {
        let samples = m.sample_rows(a.n, a.seed, &rows);
        let mut text = rows.iter().map(|&i| model.spec(i).name.as_str()).collect::<Vec<_>>().join(",");
        text.push('\n');
        for j in 0..a.n {
            let line: Vec<String> = (0..rows.len()).map(|k| samples[(k, j)].to_string()).collect();
            text.push_str(&line.join(","));
            text.push('\n');
        }
        write_atomic(&a.out, text.as_bytes())?;
        if let Some(path) = &a.histograms {
            let names: Vec<&str> = rows.iter().map(|&i| model.spec(i).name.as_str()).collect();
            let report = sample_distribution_report(m, &names, a.n, a.bins, a.seed)?;
            write_atomic(path, report.to_csv().as_bytes())?;
        }
        writeln!(out, "{} samples of {} variables written to {}", a.n, rows.len(), a.out.display())?;
        Ok(())
    })
}

#[derive(Debug, Serialize)]
struct InstanceFile {
    vertices: Vec<[f64; 3]>,
    features: Vec<f64>,
    indicators: serde_json::Map<String, serde_json::Value>,
}

fn cmd_mode(a: &ModeArgs, out: &mut dyn Write) -> Result<()> {
    let model = load_model(&a.observation.model)?;
    let instance = with_model(&model, &a.observation, |m| m.mode_instance(a.k, a.t))?;
    let ext = a.out.extension().and_then(|e| e.to_str()).unwrap_or_default();
    if ext.eq_ignore_ascii_case("json") {
        let parts = devectorize(&instance, model.layout())?;
        let names = model.layout().range(jointshape::Block::Indicator).map(|i| model.spec(i).name.clone());
        let file = InstanceFile {
            vertices: parts.vertices,
            features: parts.features,
            indicators: names.zip(parts.indicators).map(|(n, v)| (n, v.into())).collect(),
        };
        let json = serde_json::to_string_pretty(&file).map_err(|e| Error::FormatError(e.to_string()))?;
        write_atomic(&a.out, json.as_bytes())?;
    } else {
        write_mesh_atomic(&a.out, &model, &instance)?;
    }
    writeln!(out, "mode {} at {} sd written to {}", a.k, a.t, a.out.display())?;
    Ok(())
}

fn cmd_synth(a: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let synth = generate_cohort(&a.synth.config(a.seed))?;
    write_cohort(&a.out, &synth.cohort, &synth.spec)?;
    writeln!(
        out,
        "{} instances, {} vertices, {} indicators written to {}",
        synth.cohort.len(),
        synth.cohort.layout.vertices,
        synth.cohort.layout.indicators,
        a.out.display()
    )?;
    Ok(())
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let cohort = match &a.meshes {
        Some(dir) => read_cohort(dir, a.indicators.as_ref(), a.spec.as_ref())?.0,
        None => generate_cohort(&a.synth.config(a.fit.seed))?.cohort,
    };
    let split = match a.train_fraction {
        None => Split::proportional(cohort.len(), a.fit.seed)?,
        Some(f) if f > 0.0 && f < 1.0 => {
            Split::with_train_size(cohort.len(), (cohort.len() as f64 * f).round() as usize, a.fit.seed)?
        }
        Some(f) => return Err(Error::InvalidConfig(format!("train fraction must lie in (0, 1), got {f}"))),
    };
    let options = ExperimentOptions {
        targets: a.targets.clone(),
        sigmas: a.sigmas.any().then(|| a.sigmas.sigmas()),
        folds: a.folds,
        seed: a.fit.seed,
        fit: a.fit.config(),
        include_self: a.include_self,
        ordinal_scoring: match a.ordinal_scoring {
            OrdinalScoringArg::Level => OrdinalScoring::Level,
            OrdinalScoringArg::Expected => OrdinalScoring::Expected,
        },
        ..ExperimentOptions::default()
    };
    let report = run_reconstruction_experiment(&cohort, &split, &options)?;
    std::fs::create_dir_all(&a.out)?;
    let table = report.to_table();
    write_atomic(&a.out.join("report.csv"), report.to_csv().as_bytes())?;
    write_atomic(&a.out.join("report.txt"), table.as_bytes())?;
    write!(out, "{table}")?;
    Ok(())
}
