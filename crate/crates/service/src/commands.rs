//! File-level entry points behind the CLI subcommands.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ikiwisi_core::fixture::{generate, FixtureConfig};
use ikiwisi_core::simrater::{run_experiment, ExperimentConfig, ExperimentOutput};
use ikiwisi_core::stats::{analyze, read_ratings_csv, write_ratings_csv, AnalysisOptions, AnalysisReport};
use ikiwisi_core::CacheStore;
use serde::{Deserialize, Serialize};

use crate::data::{load_data_dir, write_data_dir};

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Reads a ratings table and runs the analysis pipeline. Models named in
/// `random_models` are left out of the model-level regression.
pub fn analyze_csv(csv: &Path, random_models: &[String]) -> Result<AnalysisReport<f64>> {
    let file = fs::File::open(csv).with_context(|| format!("opening {}", csv.display()))?;
    let records = read_ratings_csv(file).with_context(|| format!("reading {}", csv.display()))?;
    if records.is_empty() {
        bail!("{} has no rating rows", csv.display());
    }
    let options = AnalysisOptions {
        random_models: random_models.iter().cloned().collect::<BTreeSet<_>>(),
        model_f1: Default::default(),
    };
    Ok(analyze(&records, &options))
}

pub fn run_analyze(csv: &Path, out: Option<&Path>, random_models: &[String]) -> Result<String> {
    let report = analyze_csv(csv, random_models)?;
    let text = serde_json::to_string_pretty(&report)?;
    if let Some(out) = out {
        write_json(out, &report)?;
    }
    Ok(text)
}

/// Simulation config: an experiment plus where its dataset comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateConfig {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    /// Dataset to use when a data directory is given.
    #[serde(default)]
    pub dataset_id: Option<String>,
    /// Without a data directory the seeded reference fixture is generated;
    /// defaults to the experiment seed.
    #[serde(default)]
    pub fixture_seed: Option<u64>,
}

pub fn simulate(config: &SimulateConfig, data_dir: Option<&Path>) -> Result<ExperimentOutput> {
    let exp = &config.experiment;
    match data_dir {
        Some(dir) => {
            let data = load_data_dir(dir)?;
            let ds = match &config.dataset_id {
                Some(id) => data
                    .datasets
                    .get(id)
                    .with_context(|| format!("unknown dataset {id:?}"))?,
                None if data.datasets.len() == 1 => data.datasets.values().next().expect("one dataset"),
                None => bail!("data directory holds several datasets; set dataset_id in the config"),
            };
            Ok(run_experiment(ds, data.caches_for(&ds.dataset_id), exp)?)
        }
        None => {
            let bundle = generate(&FixtureConfig::reference(config.fixture_seed.unwrap_or(exp.seed)));
            let mut caches = CacheStore::new();
            bundle.caches.into_iter().for_each(|c| caches.insert(c));
            Ok(run_experiment(&bundle.dataset, &caches, exp)?)
        }
    }
}

pub fn run_simulate(
    config: &Path,
    data_dir: Option<&Path>,
    out: &Path,
    report: Option<&Path>,
) -> Result<ExperimentOutput> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let config: SimulateConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
    let output = simulate(&config, data_dir)?;
    let file = fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
    write_ratings_csv(file, &output.records)?;
    if let Some(path) = report {
        write_json(path, &output.report)?;
    }
    Ok(output)
}

pub fn run_gen_fixture(config: &FixtureConfig, out: &Path) -> Result<()> {
    let bundle = generate(config);
    write_data_dir(out, &bundle)?;
    Ok(())
}
