//! Acceptance checks. Each criterion prints one `PASS`/`FAIL` line; the test
//! fails at the end if any criterion failed, after all of them have run.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::Array2;
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tempofuse::classifier::{couple_pairwise, predict_proba, solve_binary_svm, train_multiclass, SvmOptions};
use tempofuse::evaluation::{average_precision, generate_synthetic, SyntheticConfig, SyntheticDataset};
use tempofuse::fusion::{predict_fusion, train_fusion_with_trace, TrainingSet};
use tempofuse::spline::fit_smoothing_spline;
use tempofuse::temporal_model::fit_class_models;
use tempofuse::{
    evaluate, filter_by_temporal, fit_temporal_model, refine, ApConvention, AugmentItem, DayIndex, Placement, Split,
    StackingPlan, TemporalConfig, TemporalModel, TrainOptions,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_secs, || {
        format!("took {:.2}s, limit {limit_secs}s", elapsed.as_secs_f64())
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

fn refinement_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let p: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
        let s: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
        let ours = refine(&p, &s).map_err(|e| e.to_string())?;
        for k in 0..50 {
            let expected = oracles::refine_scalar(p[k], s[k]);
            worst = worst.max((ours[k] - expected).abs());
            if s[k] >= p[k] {
                ensure(ours[k] == p[k], || format!("score {} >= prob {} changed it to {}", s[k], p[k], ours[k]))?;
            } else {
                ensure(ours[k] < p[k] && ours[k] >= 0.0, || {
                    format!("prob {} with score {} became {}", p[k], s[k], ours[k])
                })?;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    within(elapsed, 1.0)?;
    Ok(format!("max deviation {worst:e}, {:.3}s", elapsed.as_secs_f64()))
}

fn spline_instance(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(n);
    let mut t = rng.random_range(-5.0..5.0);
    for _ in 0..n {
        x.push(t);
        t += rng.random_range(0.2..2.0);
    }
    let y = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let w = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    (x, y, w)
}

fn spline_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for _ in 0..25 {
        let n = rng.random_range(3..=20);
        let (x, y, w) = spline_instance(&mut rng, n);
        let p = rng.random_range(0.05..1.0);
        let fit = fit_smoothing_spline(&x, &y, &w, p).map_err(|e| e.to_string())?;
        let expected = oracles::smoothing_spline_values(&x, &y, &w, p, 10_000);
        worst = worst.max(max_abs_diff(&fit.fitted_values(), &expected));
    }
    ensure(worst < 1e-6, || format!("oracle deviation {worst:e}"))?;

    let mut interp = 0.0f64;
    let mut bend = 0.0f64;
    for _ in 0..10 {
        let n = rng.random_range(3..=20);
        let (x, y, w) = spline_instance(&mut rng, n);
        let fit = fit_smoothing_spline(&x, &y, &w, 1.0).map_err(|e| e.to_string())?;
        interp = interp.max(max_abs_diff(&fit.fitted_values(), &y));

        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let affine: Vec<f64> = x.iter().map(|t| a + b * t).collect();
        let fit = fit_smoothing_spline(&x, &affine, &w, 1e-9).map_err(|e| e.to_string())?;
        bend = bend.max(fit.second_derivatives().iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    ensure(interp < 1e-8, || format!("p=1 misses data by {interp:e}"))?;
    ensure(bend < 1e-4, || format!("p=1e-9 on affine data has |f''| {bend:e}"))?;
    let elapsed = start.elapsed();
    within(elapsed, 10.0)?;
    Ok(format!(
        "oracle {worst:e}, interpolation {interp:e}, affine |f''| {bend:e}, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

fn temporal_shape() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let normal = Normal::new(150.0f64, 5.0).unwrap();
    let days: Vec<DayIndex> = (0..500)
        .map(|_| DayIndex::new(normal.sample(&mut rng).round().clamp(1.0, 365.0) as u16).unwrap())
        .collect();
    let model = fit_temporal_model(0, &days, &TemporalConfig::default()).map_err(|e| e.to_string())?;
    let scores = model.scores();
    let peak = model.peak_day().get();
    let max = scores.iter().copied().fold(f64::MIN, f64::max);
    ensure((148..=152).contains(&peak), || format!("peak at day {peak}"))?;
    ensure(max == 1.0, || format!("max score {max}"))?;
    ensure(scores.iter().all(|&s| s >= 0.0), || "negative score".into())?;

    let spike = vec![DayIndex::new(19).unwrap(); 30];
    let spiked = fit_temporal_model(1, &spike, &TemporalConfig::default()).map_err(|e| e.to_string())?;
    ensure(spiked.peak_day().get() == 19 && spiked.scores()[18] == 1.0, || {
        format!("spike model peaks at {}", spiked.peak_day().get())
    })?;
    let elapsed = start.elapsed();
    within(elapsed, 5.0)?;
    Ok(format!("gaussian peak {peak}, spike peak 19, {:.3}s", elapsed.as_secs_f64()))
}

fn classifier_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0f64;
    for case in 0..15 {
        let n = rng.random_range(4..=10);
        let cost = [0.1, 1.0, 10.0][case % 3];
        let mut y: Vec<i8> = (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        y[n - 1] = -y[0];
        let x = Array2::from_shape_fn((n, 3), |(i, _)| {
            let shift = if y[i] > 0 { 0.5 } else { -0.5 };
            shift + rng.random_range(-1.0..1.0)
        });
        let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
        let expected = oracles::svm_dual_optimum(&rows, &y, cost);
        let options = SvmOptions {
            cost,
            ..SvmOptions::default()
        };
        let ours = solve_binary_svm(x.view(), &y, &options).map_err(|e| e.to_string())?.dual_objective();
        worst = worst.max((ours - expected).abs());
    }
    ensure(worst < 1e-6, || format!("dual objective deviation {worst:e}"))?;

    // Three blobs in five dimensions.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise = Normal::new(0.0, 0.2).unwrap();
    let centres: Vec<Vec<f64>> = (0..3)
        .map(|_| {
            let v: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.into_iter().map(|a| a / norm).collect()
        })
        .collect();
    let sample = |rng: &mut ChaCha8Rng, per_class: usize| {
        let labels: Vec<usize> = (0..3 * per_class).map(|i| i / per_class).collect();
        let x = Array2::from_shape_fn((labels.len(), 5), |(i, j)| centres[labels[i]][j] + noise.sample(rng));
        (x, labels)
    };
    let (train_x, train_y) = sample(&mut rng, 40);
    let (test_x, test_y) = sample(&mut rng, 20);
    let model = train_multiclass(train_x.view(), &train_y, 3, "blobs", &TrainOptions::default())
        .map_err(|e| e.to_string())?;
    let predicted = model.predict(test_x.view()).map_err(|e| e.to_string())?;
    let accuracy =
        predicted.iter().zip(&test_y).filter(|(a, b)| a == b).count() as f64 / test_y.len() as f64;
    ensure(accuracy >= 0.95, || format!("held-out accuracy {accuracy}"))?;

    let random_rows = Array2::from_shape_fn((1000, 5), |_| rng.random_range(-3.0..3.0));
    let probs = predict_proba(&model, random_rows.view()).map_err(|e| e.to_string())?;
    let row_error = probs
        .rows()
        .into_iter()
        .map(|r| (r.sum() - 1.0).abs())
        .fold(0.0, f64::max);
    ensure(row_error <= 1e-6, || format!("row sums off by {row_error:e}"))?;
    Ok(format!("dual {worst:e}, rows {row_error:e}, blob accuracy {accuracy:.3}"))
}

fn coupling_inversion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for k in [3usize, 5, 10] {
        for _ in 0..50 {
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let truth: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let r = Array2::from_shape_fn((k, k), |(a, b)| {
                if a == b {
                    0.0
                } else {
                    truth[a] / (truth[a] + truth[b])
                }
            });
            let recovered = couple_pairwise(&r).map_err(|e| e.to_string())?;
            worst = worst.max(max_abs_diff(&recovered, &truth));
        }
    }
    ensure(worst < 1e-6, || format!("max deviation {worst:e}"))?;
    Ok(format!("150 distributions, max deviation {worst:e}"))
}

fn ap_cases() -> Outcome {
    let r = |n: i64, d: i64| Ratio::new(n, d);
    let cases = [
        (vec![r(9, 10), r(8, 10), r(7, 10)], vec![true, true, true], r(1, 1)),
        (vec![r(9, 10), r(8, 10), r(7, 10), r(6, 10)], vec![true, false, true, false], r(5, 6)),
        (vec![r(9, 10), r(8, 10), r(7, 10)], vec![false, false, true], r(1, 3)),
    ];
    for (scores, relevance, expected) in &cases {
        let ap = average_precision(scores, relevance).map_err(|e| e.to_string())?;
        ensure(ap == *expected, || format!("AP {ap} expected {expected}"))?;
    }
    let as_f64 = average_precision(&[0.9, 0.8, 0.7, 0.6], &[true, false, true, false]).map_err(|e| e.to_string())?;
    ensure(as_f64 == (1.0 + 2.0 / 3.0) / 2.0, || format!("f64 AP {as_f64}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut labels: Vec<usize> = (0..10_000).map(|i| i % 2).collect();
    labels.shuffle(&mut rng);
    let probs = Array2::from_shape_fn((10_000, 2), |_| rng.random::<f64>());
    let map = evaluate(&probs, &labels, ApConvention::Step).map_err(|e| e.to_string())?.map;
    ensure((map - 0.5).abs() <= 0.02, || format!("random map {map}"))?;
    Ok(format!("hand cases exact, random map {map:.4}"))
}

fn confusable(coverage: f64) -> SyntheticConfig {
    SyntheticConfig {
        n_classes: 10,
        timestamp_coverage: coverage,
        confusable_pairs: vec![(0, 1), (2, 3), (4, 5), (6, 7), (8, 9)],
        ..SyntheticConfig::default()
    }
}

fn windows_disjoint(data: &SyntheticDataset) -> bool {
    let w = &data.windows;
    (0..w.len()).all(|a| {
        (a + 1..w.len()).all(|b| (1..=365u16).all(|d| {
            let day = DayIndex::new(d).unwrap();
            !(w[a].contains(day) && w[b].contains(day))
        }))
    })
}

fn map_for(data: &SyntheticDataset, placement: Placement, seed: u64) -> Result<f64, String> {
    let n_classes = data.windows.len();
    let models = fit_class_models(&data.manifest, n_classes, &[Split::Train], &TemporalConfig::default())
        .map_err(|e| e.to_string())?;
    let train = TrainingSet::from_manifest(&data.manifest, &[Split::Train]);
    let test: Vec<_> = data.manifest.iter().filter(|r| r.split == Split::Test).collect();
    let ids: Vec<&str> = test.iter().map(|r| r.item_id.as_str()).collect();
    let days: Vec<Option<DayIndex>> = test.iter().map(|r| r.day()).collect();
    let labels: Vec<usize> = test.iter().map(|r| r.label.unwrap()).collect();
    let plan = StackingPlan { n_folds: 5, seed };
    let trace = train_fusion_with_trace(
        &data.sources,
        &train,
        n_classes,
        Some(&models),
        placement,
        &plan,
        &TrainOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let probs = predict_fusion(&trace.model, &data.sources, &ids, &days, Some(&models)).map_err(|e| e.to_string())?;
    Ok(evaluate(&probs, &labels, ApConvention::Step).map_err(|e| e.to_string())?.map)
}

fn direction_of_effect() -> Outcome {
    let start = Instant::now();
    let full = generate_synthetic(&confusable(1.0), 42).map_err(|e| e.to_string())?;
    ensure(windows_disjoint(&full), || "date windows overlap".into())?;
    let (none, low) = (map_for(&full, Placement::None, 42)?, map_for(&full, Placement::Low, 42)?);
    ensure(low >= none + 0.02, || format!("coverage 1.0: none {none:.4} low {low:.4}"))?;

    let sparse = generate_synthetic(&confusable(0.24), 42).map_err(|e| e.to_string())?;
    let (sparse_none, sparse_low) = (map_for(&sparse, Placement::None, 42)?, map_for(&sparse, Placement::Low, 42)?);
    ensure(sparse_low >= sparse_none, || {
        format!("coverage 1.0: none {none:.4} low {low:.4}; coverage 0.24: none {sparse_none:.4} low {sparse_low:.4}")
    })?;
    let elapsed = start.elapsed();
    within(elapsed, 120.0)?;
    Ok(format!(
        "coverage 1.0: {none:.4} -> {low:.4}; coverage 0.24: {sparse_none:.4} -> {sparse_low:.4}; {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn filter_monotonicity() -> Outcome {
    let data = generate_synthetic(&SyntheticConfig::default(), 8).map_err(|e| e.to_string())?;
    let n_classes = data.windows.len();
    let models: Vec<TemporalModel> =
        fit_class_models(&data.manifest, n_classes, &[Split::Train], &TemporalConfig::default())
            .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let items: Vec<AugmentItem> = (0..1000)
        .map(|i| AugmentItem {
            item_id: format!("aug{i:04}"),
            class_id: rng.random_range(0..n_classes),
            day: (rng.random::<f64>() < 0.9).then(|| DayIndex::new(rng.random_range(1..=365)).unwrap()),
        })
        .collect();
    let thresholds: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    let mut previous: Option<Vec<bool>> = None;
    for &t in &thresholds {
        let kept: Vec<bool> = filter_by_temporal(&items, &models, t)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|d| d.kept)
            .collect();
        if let Some(looser) = &previous {
            ensure(kept.iter().zip(looser).all(|(&k, &l)| !k || l), || {
                format!("item kept at {t} but dropped at a lower threshold")
            })?;
        }
        previous = Some(kept);
    }
    let decisions = filter_by_temporal(&items, &models, 0.9).map_err(|e| e.to_string())?;
    let mut kept_count = 0;
    for (d, item) in decisions.iter().zip(&items) {
        if d.kept {
            kept_count += 1;
            let score = models[item.class_id].score(item.day.unwrap());
            ensure(score >= 0.9, || format!("{} kept with score {score}", d.item_id))?;
        }
    }
    ensure(kept_count > 0, || "nothing kept at 0.9".into())?;
    Ok(format!("{} thresholds, {kept_count} kept at 0.9", thresholds.len()))
}

fn run_cli(args: &[&str], cwd: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tempofuse"))
        .args(args)
        .current_dir(cwd)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn pipeline_determinism() -> Outcome {
    let runs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for dir in &runs {
        run_cli(&["--seed", "42", "--quiet", "synth", "--out", "data", "--pair-adjacent"], dir.path())?;
        run_cli(&["--quiet", "pipeline", "--config", "data/config.json"], dir.path())?;
    }
    let files = ["report.json", "models.json", "fusion.json", "probs.csv", "provenance.json"];
    for file in files {
        let read = |d: &tempfile::TempDir| fs::read(d.path().join("data/run").join(file)).map_err(|e| e.to_string());
        let (a, b) = (read(&runs[0])?, read(&runs[1])?);
        ensure(a == b, || format!("{file} differs between runs"))?;
    }
    Ok(format!("{} files byte-identical", files.len()))
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 9] = [
        ("refinement matches scalar definition", refinement_exactness),
        ("smoothing spline matches dense oracle", spline_oracle),
        ("temporal model shape", temporal_shape),
        ("classifier oracle and probabilities", classifier_checks),
        ("pairwise coupling inversion", coupling_inversion),
        ("average precision cases", ap_cases),
        ("low-level refinement improves mAP", direction_of_effect),
        ("augmentation filter monotonicity", filter_monotonicity),
        ("pipeline determinism", pipeline_determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                println!("FAIL {} {name}: {detail}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
