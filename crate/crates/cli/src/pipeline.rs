use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::Value;
use tempofuse::augment::{decisions_to_csv, read_class_map};
use tempofuse::ingest::read_manifest;
use tempofuse::temporal_model::{models_to_json, read_models};
use tempofuse::{filter_by_temporal, EvalReport, TemporalConfig, TrainOptions};

use crate::args::PipelineArgs;
use crate::artifacts::{ArtifactSet, Provenance};
use crate::commands::*;
use crate::config::{validate_value, ConfigErrors, RunConfig};

/// A pipeline failure, tagged with the stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub source: anyhow::Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage `{}` failed: {:#}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {}

trait InStage<T> {
    fn in_stage(self, stage: &'static str) -> Result<T, StageError>;
}

impl<T, E: Into<anyhow::Error>> InStage<T> for Result<T, E> {
    fn in_stage(self, stage: &'static str) -> Result<T, StageError> {
        self.map_err(|e| StageError {
            stage,
            source: e.into(),
        })
    }
}

#[derive(Debug)]
pub struct PipelineOutcome {
    pub report: EvalReport,
    pub artifacts: Vec<PathBuf>,
}

/// Reads a configuration file and applies command-line overrides before
/// validating, so overridden values are checked like written ones.
pub fn load_config(args: &PipelineArgs, seed: Option<u64>) -> Result<RunConfig> {
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let mut value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", args.config.display()))?;
    if let Value::Object(map) = &mut value {
        if let Some(s) = seed {
            map.insert("seed".into(), s.into());
        }
        if let Some(p) = &args.placement {
            map.insert("placement".into(), p.clone().into());
        }
        if let Some(f) = args.folds {
            map.insert("folds".into(), f.into());
        }
        if let Some(c) = args.cost {
            map.insert("cost".into(), c.into());
        }
        if let Some(d) = &args.output_dir {
            map.insert("output_dir".into(), d.display().to_string().into());
        }
        if let Some(a) = &args.ap {
            map.insert("ap".into(), a.clone().into());
        }
    }
    let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    validate_value(&value, &base).map_err(|e: ConfigErrors| anyhow::Error::new(e))
}

/// Runs every stage, writing artifacts under the configured output directory.
pub fn run_pipeline(config: &RunConfig, reporter: Reporter) -> Result<PipelineOutcome, StageError> {
    let provenance = Provenance::of(config, config.seed);
    let mut set = ArtifactSet::new(provenance);
    let seed = config.seed;

    let manifest = read_manifest(config.resolve(&config.manifest), Some(config.class_count)).in_stage(FIT_TEMPORAL)?;
    let models = match &config.models {
        Some(path) => read_models(config.resolve(path)).in_stage(FIT_TEMPORAL)?,
        None => {
            let temporal = TemporalConfig {
                smoothing: config.smoothing,
                pad: config.pad,
            };
            fit_models(&manifest, config.class_count, &temporal, config.merge_validation).in_stage(FIT_TEMPORAL)?
        }
    };
    set.write(&config.output_path("models.json"), models_to_json(&models).as_bytes())
        .in_stage(FIT_TEMPORAL)?;
    reporter.note(format!("{FIT_TEMPORAL}: {} class models", models.len()));

    let feature_paths: Vec<PathBuf> = config.features.iter().map(|p| config.resolve(p)).collect();
    let sources = load_sources(&feature_paths).in_stage(TRAIN_FUSION)?;
    let options = TrainOptions {
        cost: config.cost,
        l2_normalize: config.l2_normalize,
        ..TrainOptions::default()
    };
    let fusion = train_fusion_stage(
        &sources,
        &manifest,
        config.class_count,
        Some(&models),
        config.placement,
        config.folds,
        seed,
        &options,
        config.merge_validation,
    )
    .in_stage(TRAIN_FUSION)?;
    set.write_json(&config.output_path("fusion.json"), &fusion).in_stage(TRAIN_FUSION)?;
    reporter.note(format!("{TRAIN_FUSION}: {} sources, placement {}", sources.len(), config.placement));

    // Refinement at either level happens inside prediction, per placement.
    let table = predict_stage(&fusion, &sources, &manifest, Some(config.eval_split), Some(&models)).in_stage(PREDICT)?;
    let csv = table.to_csv().in_stage(PREDICT)?;
    set.write(&config.output_path("probs.csv"), csv.as_bytes()).in_stage(PREDICT)?;
    reporter.note(format!("{PREDICT}: {} items", table.item_ids.len()));

    let (report, labels) = evaluate_stage(&table, &manifest, config.ap).in_stage(EVALUATE)?;
    set.write_json(&config.output_path("report.json"), &report).in_stage(EVALUATE)?;
    if config.curves {
        write_curves(&mut set, &config.output_path("curves"), &table, &labels).in_stage(EVALUATE)?;
    }

    if let Some(path) = &config.class_map {
        let decisions = fs::read_to_string(config.resolve(path))
            .map_err(anyhow::Error::from)
            .and_then(|text| Ok(read_class_map(&text, &manifest)?))
            .and_then(|items| Ok(filter_by_temporal(&items, &models, config.threshold)?))
            .and_then(|d| Ok(decisions_to_csv(&d)?))
            .in_stage(FILTER_AUGMENT)?;
        set.write(&config.output_path("decisions.csv"), decisions.as_bytes())
            .in_stage(FILTER_AUGMENT)?;
    }

    let root = config.resolve(&config.output_dir);
    set.write_record(&root.join("provenance.json"), &root).in_stage(EVALUATE)?;
    let artifacts = set.commit().in_stage(EVALUATE)?;
    Ok(PipelineOutcome { report, artifacts })
}
