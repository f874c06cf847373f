use ndarray::Array2;
use tempofuse::classifier::{argmax_rows, predict_proba, train_multiclass};
use tempofuse::evaluation::{generate_synthetic, SyntheticConfig, SyntheticDataset};
use tempofuse::fusion::{predict_fusion, train_fusion_with_trace, TrainingSet};
use tempofuse::temporal_model::fit_class_models;
use tempofuse::{
    evaluate, ApConvention, DayIndex, FeatureMatrix, FusionModel, Placement, Split, StackingPlan, TemporalConfig,
    TemporalModel, TrainOptions,
};

fn confusable(coverage: f64) -> SyntheticConfig {
    SyntheticConfig {
        n_classes: 10,
        timestamp_coverage: coverage,
        confusable_pairs: vec![(0, 1), (2, 3), (4, 5), (6, 7), (8, 9)],
        ..SyntheticConfig::default()
    }
}

struct Split2<'a> {
    train: TrainingSet,
    test_ids: Vec<&'a str>,
    test_days: Vec<Option<DayIndex>>,
    test_labels: Vec<usize>,
}

fn split(data: &SyntheticDataset) -> Split2<'_> {
    let test: Vec<_> = data.manifest.iter().filter(|r| r.split == Split::Test).collect();
    Split2 {
        train: TrainingSet::from_manifest(&data.manifest, &[Split::Train]),
        test_ids: test.iter().map(|r| r.item_id.as_str()).collect(),
        test_days: test.iter().map(|r| r.day()).collect(),
        test_labels: test.iter().map(|r| r.label.unwrap()).collect(),
    }
}

fn models_for(data: &SyntheticDataset, n_classes: usize) -> Vec<TemporalModel> {
    fit_class_models(&data.manifest, n_classes, &[Split::Train], &TemporalConfig::default()).unwrap()
}

fn run(
    data: &SyntheticDataset,
    sources: &[FeatureMatrix],
    placement: Placement,
    models: Option<&[TemporalModel]>,
    plan: &StackingPlan,
) -> (FusionModel, Array2<f64>) {
    let parts = split(data);
    let n_classes = data.windows.len();
    let trace = train_fusion_with_trace(
        sources,
        &parts.train,
        n_classes,
        models,
        placement,
        plan,
        &TrainOptions::default(),
    )
    .unwrap();
    let probs = predict_fusion(&trace.model, sources, &parts.test_ids, &parts.test_days, models).unwrap();
    (trace.model, probs)
}

#[test]
fn refining_low_level_outputs_helps_on_confusable_classes() {
    let data = generate_synthetic(&confusable(1.0), 42).unwrap();
    let models = models_for(&data, 10);
    let plan = StackingPlan { n_folds: 5, seed: 42 };
    let labels = split(&data).test_labels;
    let (_, none) = run(&data, &data.sources, Placement::None, Some(&models), &plan);
    let (_, low) = run(&data, &data.sources, Placement::Low, Some(&models), &plan);
    let map_none = evaluate(&none, &labels, ApConvention::Step).unwrap().map;
    let map_low = evaluate(&low, &labels, ApConvention::Step).unwrap().map;
    assert!(map_low >= map_none + 0.02, "none {map_none} low {map_low}");
}

#[test]
fn low_placement_without_dates_matches_none() {
    let data = generate_synthetic(&confusable(0.0), 4).unwrap();
    let models: Vec<TemporalModel> = (0..10).map(TemporalModel::uninformative).collect();
    let plan = StackingPlan { n_folds: 3, seed: 4 };
    let (none, p_none) = run(&data, &data.sources, Placement::None, None, &plan);
    let (low, p_low) = run(&data, &data.sources, Placement::Low, Some(&models), &plan);
    assert_eq!(none.high_model, low.high_model);
    assert_eq!(none.low_models, low.low_models);
    assert_eq!(p_none, p_low);
}

#[test]
fn high_placement_leaves_undated_rows_alone() {
    let data = generate_synthetic(&confusable(0.5), 6).unwrap();
    let models = models_for(&data, 10);
    let plan = StackingPlan { n_folds: 3, seed: 6 };
    let (_, p_none) = run(&data, &data.sources, Placement::None, Some(&models), &plan);
    let (_, p_high) = run(&data, &data.sources, Placement::High, Some(&models), &plan);
    let days = split(&data).test_days;
    let mut dated_changes = 0;
    for (i, day) in days.iter().enumerate() {
        if day.is_none() {
            assert_eq!(p_none.row(i), p_high.row(i), "row {i}");
        } else if p_none.row(i) != p_high.row(i) {
            dated_changes += 1;
        }
    }
    assert!(dated_changes > 0);
}

#[test]
fn contradicting_date_flips_the_decision() {
    let data = generate_synthetic(&confusable(1.0), 42).unwrap();
    let models = models_for(&data, 10);
    let plan = StackingPlan { n_folds: 5, seed: 42 };
    let labels = split(&data).test_labels;
    let (_, none) = run(&data, &data.sources, Placement::None, Some(&models), &plan);
    let (_, low) = run(&data, &data.sources, Placement::Low, Some(&models), &plan);
    let (top_none, top_low) = (argmax_rows(&none), argmax_rows(&low));
    let flipped: Vec<usize> = (0..labels.len())
        .filter(|&i| top_none[i] != labels[i] && top_low[i] == labels[i])
        .collect();
    let days = split(&data).test_days;
    let contradicted = flipped.iter().filter(|&&i| {
        let day = days[i].unwrap();
        models[top_none[i]].score(day) < 0.5 && models[labels[i]].score(day) > 0.5
    });
    assert!(contradicted.count() > 0, "no contradicted item was corrected ({} flips)", flipped.len());
}

#[test]
fn permuting_sources_permutes_nothing_in_the_output() {
    let data = generate_synthetic(&confusable(1.0), 12).unwrap();
    let models = models_for(&data, 10);
    let plan = StackingPlan { n_folds: 3, seed: 12 };
    let swapped = vec![data.sources[1].clone(), data.sources[0].clone()];
    let (_, forward) = run(&data, &data.sources, Placement::Low, Some(&models), &plan);
    let (_, backward) = run(&data, &swapped, Placement::Low, Some(&models), &plan);
    let diff = (&forward - &backward).mapv(f64::abs).fold(0.0, |a: f64, &b| a.max(b));
    assert!(diff < 1e-6, "max difference {diff}");
}

#[test]
fn single_source_stacking_keeps_low_level_decisions() {
    let data = generate_synthetic(&confusable(1.0), 21).unwrap();
    let parts = split(&data);
    let plan = StackingPlan { n_folds: 5, seed: 21 };
    let one = &data.sources[..1];
    let (_, fused) = run(&data, one, Placement::None, None, &plan);
    let x_train = one[0].select(&parts.train.item_ids.iter().map(String::as_str).collect::<Vec<_>>()).unwrap();
    let low = train_multiclass(
        x_train.to_array::<f64>().view(),
        &parts.train.labels,
        10,
        "src0",
        &TrainOptions {
            seed: tempofuse::seeding::derive_seed(plan.seed, "low"),
            ..TrainOptions::default()
        },
    )
    .unwrap();
    let x_test = one[0].select(&parts.test_ids).unwrap().to_array::<f64>();
    let direct = predict_proba(&low, x_test.view()).unwrap();
    let (a, b) = (argmax_rows(&fused), argmax_rows(&direct));
    let agree = a.iter().zip(&b).filter(|(x, y)| x == y).count();
    assert!(agree as f64 >= 0.95 * a.len() as f64, "agreement {agree}/{}", a.len());
}

#[test]
fn stacked_blocks_are_probability_blocks() {
    let data = generate_synthetic(&confusable(1.0), 3).unwrap();
    let models = models_for(&data, 10);
    let parts = split(&data);
    let trace = train_fusion_with_trace(
        &data.sources,
        &parts.train,
        10,
        Some(&models),
        Placement::Low,
        &StackingPlan { n_folds: 3, seed: 3 },
        &TrainOptions::default(),
    )
    .unwrap();
    assert_eq!(trace.stacked.ncols(), 20);
    for block in &trace.low_blocks {
        for row in block.rows() {
            assert!(row.iter().all(|&v| v >= 0.0));
            assert!(row.sum() <= 1.0 + 1e-6);
        }
    }
}
