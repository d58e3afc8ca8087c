//! Leave-one-person-out cross-validation, metric computation, run
//! repetition/averaging, and the discrimination-task ablation harness.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{LabeledDataset, Window};
use crate::model::{softmax_rows, windows_to_tensor};
use crate::nn::{Mode, Sequential, Tensor};

/// One LOOCV fold: 1 test subject, 2 validation subjects, rest training.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub test_subject: u32,
    pub validation_subjects: [u32; 2],
    pub training_subjects: Vec<u32>,
}

/// One fold per subject as test; validation subjects are the next two
/// cyclically after the test subject in the given ordering.
pub fn loocv_splits(subjects: &[u32]) -> Result<Vec<FoldSplit>> {
    let n = subjects.len();
    if n < 4 {
        return Err(Error::Data(format!(
            "LOOCV needs at least 4 subjects, got {n}"
        )));
    }
    Ok((0..n)
        .map(|i| {
            let v1 = subjects[(i + 1) % n];
            let v2 = subjects[(i + 2) % n];
            let training = subjects
                .iter()
                .copied()
                .filter(|&s| s != subjects[i] && s != v1 && s != v2)
                .collect();
            FoldSplit {
                test_subject: subjects[i],
                validation_subjects: [v1, v2],
                training_subjects: training,
            }
        })
        .collect())
}

/// K x K confusion counts, rows = true, columns = predicted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }
}

/// Batched argmax prediction over the test windows using only the feature
/// extractor and classifier, both in inference mode.
pub fn evaluate(
    f: &mut Sequential,
    c: &mut Sequential,
    test_windows: &[Window],
    num_activities: usize,
) -> Result<ConfusionMatrix> {
    if test_windows.is_empty() {
        return Err(Error::Data("empty test set".into()));
    }
    let mut cm = ConfusionMatrix::new(num_activities);
    for chunk in test_windows.chunks(64) {
        let refs: Vec<&Window> = chunk.iter().collect();
        let x = windows_to_tensor(&refs);
        let latents = f.forward(Tensor::D3(x), Mode::Eval);
        let logits = c.forward(latents, Mode::Eval).d2();
        let probs = softmax_rows(&logits);
        for (row, win) in probs.rows().into_iter().zip(chunk) {
            let pred = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            cm.record(win.activity, pred);
        }
    }
    Ok(cm)
}

/// accuracy = trace/total; per-class F1 = 2PR/(P+R) with F1 = 0 when
/// P+R = 0; macro = unweighted class mean; weighted = support-weighted.
pub fn metrics_from_confusion(cm: &ConfusionMatrix) -> (f64, f64, f64) {
    let k = cm.k();
    let total = cm.total() as f64;
    assert!(total > 0.0, "empty confusion matrix");
    let trace: u64 = (0..k).map(|i| cm.counts[i][i]).sum();
    let accuracy = trace as f64 / total;
    let mut macro_sum = 0.0;
    let mut weighted_sum = 0.0;
    for class in 0..k {
        let tp = cm.counts[class][class] as f64;
        let support: u64 = cm.counts[class].iter().sum();
        let predicted: u64 = (0..k).map(|r| cm.counts[r][class]).sum();
        let precision = if predicted > 0 {
            tp / predicted as f64
        } else {
            0.0
        };
        let recall = if support > 0 { tp / support as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        macro_sum += f1;
        weighted_sum += f1 * support as f64;
    }
    (accuracy, macro_sum / k as f64, weighted_sum / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct FoldMetrics {
    pub accuracy: f64,
    pub f1_macro: f64,
    pub f1_weighted: f64,
}

impl FoldMetrics {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Self {
        let (accuracy, f1_macro, f1_weighted) = metrics_from_confusion(cm);
        FoldMetrics {
            accuracy,
            f1_macro,
            f1_weighted,
        }
    }
}

/// Per-fold and aggregate metrics: per-fold value is the mean over
/// repeats; mean +- population standard deviation across folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_fold: Vec<FoldMetrics>,
    /// Raw values per fold per repeat, retained for box-plot emission.
    pub raw: Vec<Vec<FoldMetrics>>,
    pub mean: FoldMetrics,
    pub std: FoldMetrics,
    pub repeats: usize,
    /// "population" (divide by N); recorded because the convention matters
    /// when comparing reported results.
    pub std_convention: String,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Collapse `[fold][repeat]` metric grids into a report.
pub fn aggregate_runs(per_fold_per_repeat: &[Vec<FoldMetrics>]) -> Result<MetricsReport> {
    if per_fold_per_repeat.is_empty() {
        return Err(Error::Data("no fold results to aggregate".into()));
    }
    let repeats = per_fold_per_repeat[0].len();
    if repeats == 0 || per_fold_per_repeat.iter().any(|f| f.len() != repeats) {
        return Err(Error::Data(
            "every fold must have the same repetition count".into(),
        ));
    }
    let per_fold: Vec<FoldMetrics> = per_fold_per_repeat
        .iter()
        .map(|reps| {
            let n = reps.len() as f64;
            FoldMetrics {
                accuracy: reps.iter().map(|m| m.accuracy).sum::<f64>() / n,
                f1_macro: reps.iter().map(|m| m.f1_macro).sum::<f64>() / n,
                f1_weighted: reps.iter().map(|m| m.f1_weighted).sum::<f64>() / n,
            }
        })
        .collect();
    let (acc_m, acc_s) = mean_std(&per_fold.iter().map(|m| m.accuracy).collect::<Vec<_>>());
    let (mac_m, mac_s) = mean_std(&per_fold.iter().map(|m| m.f1_macro).collect::<Vec<_>>());
    let (wei_m, wei_s) = mean_std(&per_fold.iter().map(|m| m.f1_weighted).collect::<Vec<_>>());
    Ok(MetricsReport {
        per_fold,
        raw: per_fold_per_repeat.to_vec(),
        mean: FoldMetrics {
            accuracy: acc_m,
            f1_macro: mac_m,
            f1_weighted: wei_m,
        },
        std: FoldMetrics {
            accuracy: acc_s,
            f1_macro: mac_s,
            f1_weighted: wei_s,
        },
        repeats,
        std_convention: "population".into(),
    })
}

/// Quartile data for box-plot emission (per metric, across folds).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxPlotData {
    pub metric: String,
    pub values: Vec<f64>,
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub q4: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn box_plot_data(metric: &str, values: &[f64]) -> BoxPlotData {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    BoxPlotData {
        metric: metric.to_owned(),
        values: values.to_vec(),
        q0: sorted[0],
        q1: quantile(&sorted, 0.25),
        q2: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        q4: *sorted.last().unwrap(),
    }
}

/// Definition-level F1 oracle used by the tests: recompute precision,
/// recall, and F1 from first principles, scanning the matrix cell by cell.
pub fn metrics_oracle(cm: &ConfusionMatrix) -> (f64, f64, f64) {
    let k = cm.k();
    let total: f64 = cm.total() as f64;
    let mut correct = 0.0;
    for i in 0..k {
        correct += cm.counts[i][i] as f64;
    }
    let mut f1s = vec![0.0f64; k];
    let mut supports = vec![0.0f64; k];
    for class in 0..k {
        let mut tp = 0.0;
        let mut fp = 0.0;
        let mut fn_ = 0.0;
        for t in 0..k {
            for p in 0..k {
                let c = cm.counts[t][p] as f64;
                if t == class && p == class {
                    tp += c;
                }
                if t != class && p == class {
                    fp += c;
                }
                if t == class && p != class {
                    fn_ += c;
                }
            }
        }
        supports[class] = tp + fn_;
        let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        f1s[class] = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    }
    let macro_f1 = f1s.iter().sum::<f64>() / k as f64;
    let weighted_f1 = f1s
        .iter()
        .zip(&supports)
        .map(|(f, s)| f * s)
        .sum::<f64>()
        / total;
    (correct / total, macro_f1, weighted_f1)
}

/// Pull one metric's per-fold means out of a report, for box plots.
pub fn per_fold_values(report: &MetricsReport, metric: &str) -> Vec<f64> {
    report
        .per_fold
        .iter()
        .map(|m| match metric {
            "accuracy" => m.accuracy,
            "f1_macro" => m.f1_macro,
            _ => m.f1_weighted,
        })
        .collect()
}

/// Restrict a dataset to a fold split's three parts.
pub fn split_dataset(
    dataset: &LabeledDataset,
    split: &FoldSplit,
) -> (LabeledDataset, LabeledDataset, LabeledDataset) {
    let train = dataset.filter_subjects(&split.training_subjects);
    let val = dataset.filter_subjects(&split.validation_subjects);
    let test = dataset.filter_subjects(&[split.test_subject]);
    (train, val, test)
}

/// Accuracy of a probability-threshold discriminator on labeled pair
/// logits; helper shared by the trainer's validation pass.
pub fn binary_accuracy(probs: &Array2<f32>, labels: &[u8]) -> f64 {
    let correct = probs
        .column(0)
        .iter()
        .zip(labels)
        .filter(|(&p, &g)| (p > 0.5) == (g == 1))
        .count();
    correct as f64 / labels.len() as f64
}
