use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use tempofuse::augment::{decisions_to_csv, read_class_map};
use tempofuse::classifier::train_multiclass;
use tempofuse::evaluation::{class_curves, generate_synthetic, SyntheticConfig};
use tempofuse::fusion::{predict_fusion, train_fusion_with_trace, TrainingSet};
use tempofuse::ingest::read_manifest;
use tempofuse::seeding::derive_seed;
use tempofuse::temporal_model::{fit_class_models, models_to_json, read_models};
use tempofuse::{
    evaluate, filter_by_temporal, refine_batch, ApConvention, DayIndex, EvalReport, FeatureMatrix, FusionModel,
    ItemRecord, Placement, ProbabilityTable, Split, StackingPlan, TemporalConfig, TemporalModel, TrainOptions,
};

use crate::args::*;
use crate::artifacts::{ArtifactSet, Provenance};

/// Stage labels; each stage's seed is derived from the root seed by label.
pub const FIT_TEMPORAL: &str = "fit-temporal";
pub const TRAIN: &str = "train";
pub const TRAIN_FUSION: &str = "train-fusion";
pub const PREDICT: &str = "predict";
pub const REFINE: &str = "refine";
pub const EVALUATE: &str = "evaluate";
pub const FILTER_AUGMENT: &str = "filter-augment";
pub const SYNTH: &str = "synth";

/// Progress messages on standard error, silenced by `--quiet`.
#[derive(Debug, Clone, Copy)]
pub struct Reporter {
    pub quiet: bool,
}

impl Reporter {
    pub fn note(&self, message: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", message.as_ref());
        }
    }
}

pub fn training_splits(merge_validation: bool) -> Vec<Split> {
    if merge_validation {
        vec![Split::Train, Split::Validation]
    } else {
        vec![Split::Train]
    }
}

pub fn parse_placement(text: &str) -> Result<Placement> {
    text.parse().map_err(|e| anyhow!("{e}"))
}

pub fn parse_ap(text: &str) -> Result<ApConvention> {
    text.parse().map_err(|e| anyhow!("{e}"))
}

fn parse_split_filter(text: &str) -> Result<Option<Split>> {
    Ok(match text {
        "all" => None,
        "train" => Some(Split::Train),
        "validation" => Some(Split::Validation),
        "test" => Some(Split::Test),
        other => bail!("unknown split `{other}` (expected train, validation, test or all)"),
    })
}

pub fn load_sources(paths: &[PathBuf]) -> Result<Vec<FeatureMatrix>> {
    paths
        .iter()
        .map(|p| FeatureMatrix::load(p).with_context(|| format!("loading features {}", p.display())))
        .collect()
}

fn load_manifest(path: &Path, n_classes: Option<usize>) -> Result<Vec<ItemRecord>> {
    read_manifest(path, n_classes).with_context(|| format!("reading manifest {}", path.display()))
}

fn load_models(path: &Path) -> Result<Vec<TemporalModel>> {
    read_models(path).with_context(|| format!("reading temporal models {}", path.display()))
}

fn infer_classes(manifest: &[ItemRecord]) -> Result<usize> {
    manifest
        .iter()
        .filter_map(|r| r.label)
        .max()
        .map(|m| m + 1)
        .ok_or_else(|| anyhow!("manifest has no labeled items"))
}

/// Item ids and capture days of the manifest items in `split`.
pub fn scored_items(manifest: &[ItemRecord], split: Option<Split>) -> (Vec<&str>, Vec<Option<DayIndex>>) {
    manifest
        .iter()
        .filter(|r| split.is_none_or(|s| r.split == s))
        .map(|r| (r.item_id.as_str(), r.day()))
        .unzip()
}

fn days_for(ids: &[String], manifest: &[ItemRecord]) -> Result<Vec<Option<DayIndex>>> {
    let by_id: HashMap<&str, &ItemRecord> = manifest.iter().map(|r| (r.item_id.as_str(), r)).collect();
    ids.iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .map(|r| r.day())
                .ok_or_else(|| anyhow!("item `{id}` is not in the manifest"))
        })
        .collect()
}

fn labels_for(ids: &[String], manifest: &[ItemRecord]) -> Result<Vec<usize>> {
    let by_id: HashMap<&str, &ItemRecord> = manifest.iter().map(|r| (r.item_id.as_str(), r)).collect();
    ids.iter()
        .map(|id| match by_id.get(id.as_str()) {
            Some(r) => r.label.ok_or_else(|| anyhow!("item `{id}` has no label to evaluate against")),
            None => Err(anyhow!("item `{id}` is not in the manifest")),
        })
        .collect()
}

pub fn fit_models(
    manifest: &[ItemRecord],
    n_classes: usize,
    config: &TemporalConfig,
    merge_validation: bool,
) -> Result<Vec<TemporalModel>> {
    Ok(fit_class_models(manifest, n_classes, &training_splits(merge_validation), config)?)
}

#[allow(clippy::too_many_arguments)]
pub fn train_fusion_stage(
    sources: &[FeatureMatrix],
    manifest: &[ItemRecord],
    n_classes: usize,
    models: Option<&[TemporalModel]>,
    placement: Placement,
    folds: usize,
    root_seed: u64,
    options: &TrainOptions,
    merge_validation: bool,
) -> Result<FusionModel> {
    let training = TrainingSet::from_manifest(manifest, &training_splits(merge_validation));
    let plan = StackingPlan {
        n_folds: folds,
        seed: derive_seed(root_seed, TRAIN_FUSION),
    };
    Ok(train_fusion_with_trace(sources, &training, n_classes, models, placement, &plan, options)?.model)
}

pub fn predict_stage(
    fusion: &FusionModel,
    sources: &[FeatureMatrix],
    manifest: &[ItemRecord],
    split: Option<Split>,
    models: Option<&[TemporalModel]>,
) -> Result<ProbabilityTable> {
    let (ids, days) = scored_items(manifest, split);
    if ids.is_empty() {
        bail!("no manifest items to score");
    }
    let probs = predict_fusion(fusion, sources, &ids, &days, models)?;
    Ok(ProbabilityTable::new(ids.iter().map(|s| s.to_string()).collect(), probs)?)
}

pub fn evaluate_stage(
    table: &ProbabilityTable,
    manifest: &[ItemRecord],
    convention: ApConvention,
) -> Result<(EvalReport, Vec<usize>)> {
    let labels = labels_for(&table.item_ids, manifest)?;
    Ok((evaluate(&table.values, &labels, convention)?, labels))
}

pub fn write_curves(set: &mut ArtifactSet, dir: &Path, table: &ProbabilityTable, labels: &[usize]) -> Result<()> {
    for (class, curve) in class_curves(&table.values, labels)?.iter().enumerate() {
        set.write(&dir.join(format!("class_{class:03}.csv")), curve.to_csv().as_bytes())?;
    }
    Ok(())
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().expect("output has a file name").to_os_string();
    name.push(".provenance.json");
    path.with_file_name(name)
}

/// Writes a non-JSON artifact and a provenance record beside it.
fn write_with_sidecar(set: &mut ArtifactSet, path: &Path, contents: &[u8]) -> Result<()> {
    set.write(path, contents)?;
    let root = path.parent().unwrap_or(Path::new(""));
    set.write_record(&sidecar(path), root)
}

pub fn synth(args: &SynthArgs, seed: u64, reporter: Reporter) -> Result<()> {
    let mut config = match &args.spec {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)
            .with_context(|| format!("parsing synthetic spec {}", path.display()))?,
        None => SyntheticConfig::default(),
    };
    macro_rules! set {
        ($field:ident, $value:expr) => {
            if let Some(v) = $value {
                config.$field = v;
            }
        };
    }
    set!(n_classes, args.classes);
    set!(per_class_train, args.per_class_train);
    set!(per_class_test, args.per_class_test);
    set!(feature_dim, args.dim);
    set!(n_sources, args.sources);
    set!(feature_noise, args.noise);
    set!(timestamp_coverage, args.coverage);
    if args.pair_adjacent {
        config.confusable_pairs = (0..config.n_classes / 2).map(|k| (2 * k, 2 * k + 1)).collect();
    }
    let placement = parse_placement(&args.placement)?;
    let data = generate_synthetic(&config, derive_seed(seed, SYNTH))?;

    let mut set = ArtifactSet::new(Provenance::of(&config, seed));
    let out = &args.out;
    set.write(&out.join("manifest.jsonl"), tempofuse::ingest::serialize_manifest(&data.manifest).as_bytes())?;
    let mut feature_names = Vec::new();
    for source in &data.sources {
        let name = format!("{}.fmat", source.source_name());
        set.write(&out.join(&name), &source.to_binary())?;
        feature_names.push(name);
    }
    set.write_json(&out.join("synthetic.json"), &config)?;
    let run = serde_json::json!({
        "manifest": "manifest.jsonl",
        "features": feature_names,
        "class_count": config.n_classes,
        "output_dir": "run",
        "seed": seed,
        "placement": placement.to_string(),
    });
    let mut text = serde_json::to_string_pretty(&run)?;
    text.push('\n');
    set.write(&out.join("config.json"), text.as_bytes())?;
    set.write_record(&out.join("provenance.json"), out)?;
    set.commit()?;
    reporter.note(format!(
        "wrote {} items, {} sources and config.json to {}",
        data.manifest.len(),
        data.sources.len(),
        out.display()
    ));
    Ok(())
}

pub fn fit_temporal(args: &FitTemporalArgs, seed: u64, reporter: Reporter) -> Result<()> {
    let manifest = load_manifest(&args.manifest, Some(args.classes))?;
    let defaults = TemporalConfig::default();
    let config = TemporalConfig {
        smoothing: args.smoothing.unwrap_or(defaults.smoothing),
        pad: args.pad.unwrap_or(defaults.pad),
    };
    let models = fit_models(&manifest, args.classes, &config, args.merge_validation)?;
    let mut set = ArtifactSet::new(Provenance::of(args, seed));
    write_with_sidecar(&mut set, &args.out, models_to_json(&models).as_bytes())?;
    set.commit()?;
    let fitted = models.iter().filter(|m| m.n_samples() > 0).count();
    reporter.note(format!("fitted {fitted} of {} classes from dated items", args.classes));
    Ok(())
}

pub fn train(args: &TrainArgs, seed: u64, reporter: Reporter) -> Result<()> {
    let manifest = load_manifest(&args.manifest, args.classes)?;
    let n_classes = match args.classes {
        Some(c) => c,
        None => infer_classes(&manifest)?,
    };
    let source = FeatureMatrix::load(&args.features)?;
    let training = TrainingSet::from_manifest(&manifest, &training_splits(args.merge_validation));
    let ids: Vec<&str> = training.item_ids.iter().map(String::as_str).collect();
    let x = source.select(&ids)?.to_array::<f64>();
    let options = TrainOptions {
        cost: args.cost,
        l2_normalize: args.l2_normalize,
        seed: derive_seed(seed, TRAIN),
        ..TrainOptions::default()
    };
    let model = train_multiclass(x.view(), &training.labels, n_classes, source.source_name(), &options)?;
    let mut set = ArtifactSet::new(Provenance::of(args, seed));
    set.write_json(&args.out, &model)?;
    set.commit()?;
    reporter.note(format!("trained {} pairwise SVMs on {} rows", model.pairs.len(), ids.len()));
    Ok(())
}

pub fn train_fusion(args: &TrainFusionArgs, seed: u64, reporter: Reporter) -> Result<()> {
    let manifest = load_manifest(&args.manifest, args.classes)?;
    let n_classes = match args.classes {
        Some(c) => c,
        None => infer_classes(&manifest)?,
    };
    let placement = parse_placement(&args.placement)?;
    let models = args.models.as_deref().map(load_models).transpose()?;
    let sources = load_sources(&args.features)?;
    let options = TrainOptions {
        cost: args.cost,
        l2_normalize: args.l2_normalize,
        ..TrainOptions::default()
    };
    let fusion = train_fusion_stage(
        &sources,
        &manifest,
        n_classes,
        models.as_deref(),
        placement,
        args.folds,
        seed,
        &options,
        args.merge_validation,
    )?;
    let mut set = ArtifactSet::new(Provenance::of(args, seed));
    set.write_json(&args.out, &fusion)?;
    set.commit()?;
    reporter.note(format!(
        "trained fusion over {} sources, placement {placement}",
        sources.len()
    ));
    Ok(())
}

pub fn predict(args: &PredictArgs, seed: u64, reporter: Reporter) -> Result<()> {
    let fusion = FusionModel::read(&args.fusion).with_context(|| format!("reading {}", args.fusion.display()))?;
    let manifest = load_manifest(&args.manifest, Some(fusion.n_classes))?;
    let models = args.models.as_deref().map(load_models).transpose()?;
    let sources = load_sources(&args.features)?;
    let table = predict_stage(&fusion, &sources, &manifest, parse_split_filter(&args.split)?, models.as_deref())?;
    let mut set = ArtifactSet::new(Provenance::of(args, seed));
    write_with_sidecar(&mut set, &args.out, table.to_csv()?.as_bytes())?;
    set.commit()?;
    reporter.note(format!("scored {} items", table.item_ids.len()));
    Ok(())
}

pub fn refine(args: &RefineArgs, seed: u64, reporter: Reporter) -> Result<()> {
    let table = ProbabilityTable::read(&args.probs).with_context(|| format!("reading {}", args.probs.display()))?;
    let manifest = load_manifest(&args.manifest, Some(table.n_classes()))?;
    let models = load_models(&args.models)?;
    let days = days_for(&table.item_ids, &manifest)?;
    let refined = refine_batch(&table.values, &days, &models)?;
    let dated = days.iter().filter(|d| d.is_some()).count();
    let out = ProbabilityTable::new(table.item_ids, refined)?;
    let mut set = ArtifactSet::new(Provenance::of(args, seed));
    write_with_sidecar(&mut set, &args.out, out.to_csv()?.as_bytes())?;
    set.commit()?;
    reporter.note(format!("refined {dated} dated of {} items", days.len()));
    Ok(())
}

pub fn evaluate_command(args: &EvaluateArgs, seed: u64) -> Result<f64> {
    let table = ProbabilityTable::read(&args.probs).with_context(|| format!("reading {}", args.probs.display()))?;
    let manifest = load_manifest(&args.manifest, Some(table.n_classes()))?;
    let (report, labels) = evaluate_stage(&table, &manifest, parse_ap(&args.ap)?)?;
    let mut set = ArtifactSet::new(Provenance::of(args, seed));
    set.write_json(&args.out, &report)?;
    if let Some(dir) = &args.curves {
        write_curves(&mut set, dir, &table, &labels)?;
    }
    set.commit()?;
    Ok(report.map)
}

pub fn filter_augment(args: &FilterAugmentArgs, seed: u64, reporter: Reporter) -> Result<()> {
    let manifest = load_manifest(&args.manifest, None)?;
    let text = fs::read_to_string(&args.class_map).with_context(|| format!("reading {}", args.class_map.display()))?;
    let items = read_class_map(&text, &manifest)?;
    let models = load_models(&args.models)?;
    let decisions = filter_by_temporal(&items, &models, args.threshold)?;
    let mut set = ArtifactSet::new(Provenance::of(args, seed));
    write_with_sidecar(&mut set, &args.out, decisions_to_csv(&decisions)?.as_bytes())?;
    set.commit()?;
    let kept = decisions.iter().filter(|d| d.kept).count();
    reporter.note(format!("kept {kept} of {} items at threshold {}", decisions.len(), args.threshold));
    Ok(())
}
