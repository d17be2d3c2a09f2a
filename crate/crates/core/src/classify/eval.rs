//! Repeated stratified train/test evaluation, training-budget sweeps and the
//! preemptive (truncated window) study.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::{train, Classifier, LabeledDataset, LabeledRow, ModelKind, TrainParams};
use crate::anomaly::{find_trigger, DetectorConfig};
use crate::error::{Error, Result};
use crate::features::{extract_values, FeatureConfig};
use crate::ingest::{FaultLabel, Record};
use crate::rng;

const K: usize = FaultLabel::COUNT;

fn train_count(n_class: usize, fraction: f64) -> usize {
    ((fraction * n_class as f64).round() as usize).clamp(1, n_class - 1)
}

/// Per class, shuffles that class's indices and sends
/// `round(fraction * n_c)` (kept within `[1, n_c - 1]`) to training.
/// Returns sorted `(train, test)` index lists.
pub fn stratified_split<R: Rng>(
    labels: &[FaultLabel],
    fraction: f64,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); K];
    for (i, l) in labels.iter().enumerate() {
        by_class[l.code()].push(i);
    }
    let mut tr = Vec::new();
    let mut te = Vec::new();
    for (code, mut idx) in by_class.into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::TooFewSamples {
                label: FaultLabel::ALL[code].to_string(),
                count: idx.len(),
            });
        }
        idx.shuffle(rng);
        let k = train_count(idx.len(), fraction);
        tr.extend_from_slice(&idx[..k]);
        te.extend_from_slice(&idx[k..]);
    }
    tr.sort_unstable();
    te.sort_unstable();
    Ok((tr, te))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model: String,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation across trials (0 for a single trial).
    pub std: f64,
    /// `confusion[true][predicted]`, pooled over trials.
    pub confusion: [[u64; K]; K],
    pub train_seconds: f64,
    pub predict_seconds: f64,
    pub n_train: usize,
    pub n_test: usize,
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() < 2 {
        0.0
    } else {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

/// Runs `n_trials` stratified splits, training with `fit(train_set, seed)`.
/// Trial `t` draws its split from stream `t` of `seed` and passes
/// `derive(seed, [t])` to `fit`.
pub fn evaluate_with<C, F>(
    data: &LabeledDataset,
    model: &str,
    n_trials: usize,
    train_fraction: f64,
    seed: u64,
    fit: F,
) -> Result<EvalReport>
where
    C: Classifier,
    F: Fn(&LabeledDataset, u64) -> Result<C>,
{
    if n_trials == 0 {
        return Err(Error::InvalidConfig("need at least one trial".into()));
    }
    let labels = data.labels();
    let mut accuracies = Vec::with_capacity(n_trials);
    let mut confusion = [[0u64; K]; K];
    let (mut train_seconds, mut predict_seconds) = (0.0, 0.0);
    let (mut n_train, mut n_test) = (0, 0);
    for t in 0..n_trials as u64 {
        let (tr, te) = stratified_split(&labels, train_fraction, &mut rng::stream(seed, t))?;
        n_train = tr.len();
        n_test = te.len();
        let train_set = data.subset(&tr);
        let start = Instant::now();
        let fitted = fit(&train_set, rng::derive(seed, &[t]))
            .map_err(|e| e.context(format!("{model} trial {t}")))?;
        train_seconds += start.elapsed().as_secs_f64();

        let start = Instant::now();
        let rows = data.rows();
        let preds: Vec<FaultLabel> = te
            .iter()
            .map(|&i| fitted.predict(&rows[i].features).map(|p| p.label))
            .collect::<Result<_>>()?;
        predict_seconds += start.elapsed().as_secs_f64();

        let mut hits = 0;
        for (&i, p) in te.iter().zip(&preds) {
            confusion[rows[i].label.code()][p.code()] += 1;
            hits += usize::from(rows[i].label == *p);
        }
        accuracies.push(hits as f64 / te.len() as f64);
    }
    let (mean, std) = mean_std(&accuracies);
    Ok(EvalReport {
        model: model.to_string(),
        accuracies,
        mean,
        std,
        confusion,
        train_seconds,
        predict_seconds,
        n_train,
        n_test,
    })
}

pub fn evaluate(
    data: &LabeledDataset,
    kind: ModelKind,
    params: &TrainParams,
    n_trials: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<EvalReport> {
    evaluate_with(data, &kind.to_string(), n_trials, train_fraction, seed, |d, s| {
        train(kind, d, &TrainParams { seed: s, ..*params })
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub fraction: f64,
    pub model: ModelKind,
    pub mean: f64,
    pub std: f64,
}

/// Mean accuracy per (fraction, model). A fraction that would leave some
/// class without training samples is skipped with a warning.
pub fn budget_sweep(
    data: &LabeledDataset,
    kinds: &[ModelKind],
    fractions: &[f64],
    trials: usize,
    params: &TrainParams,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    let counts = data.class_counts();
    let mut out = Vec::new();
    for &f in fractions {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidConfig(format!("fraction {f} outside (0, 1)")));
        }
        let missing: Vec<&str> = FaultLabel::ALL
            .iter()
            .filter(|l| {
                let c = counts[l.code()];
                c > 0 && (f * c as f64).round() < 1.0
            })
            .map(|l| l.name())
            .collect();
        if !missing.is_empty() {
            log::warn!(
                "skipping fraction {f}: no training samples for {}",
                missing.join(", ")
            );
            continue;
        }
        for &kind in kinds {
            let r = evaluate(data, kind, params, trials, f, seed)?;
            out.push(SweepPoint {
                fraction: f,
                model: kind,
                mean: r.mean,
                std: r.std,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreemptiveOptions {
    pub detector: DetectorConfig,
    pub features: FeatureConfig,
    pub sample_counts: Vec<usize>,
    pub kinds: Vec<ModelKind>,
    pub trials: usize,
    pub train_fraction: f64,
    pub params: TrainParams,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreemptPoint {
    pub samples: usize,
    pub model: ModelKind,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PreemptiveCurve {
    pub points: Vec<PreemptPoint>,
    /// Stations whose series never triggered.
    pub never_triggered: Vec<u64>,
    /// Requested counts that were skipped as too short for the features.
    pub skipped_counts: Vec<usize>,
}

/// For every labeled series, finds the triggering run and classifies using
/// only the `c` samples starting at its first outlier. Windows that run
/// past the end of a series are shortened to what is available.
pub fn preemptive_curve(records: &[Record], opts: &PreemptiveOptions) -> Result<PreemptiveCurve> {
    let triggered: Vec<Option<usize>> = records
        .par_iter()
        .map(|r| {
            find_trigger(&r.series.values, &opts.detector)
                .map(|t| t.map(|t| t.first_outlier_index))
        })
        .collect::<Result<_>>()?;
    let mut curve = PreemptiveCurve::default();
    for (r, t) in records.iter().zip(&triggered) {
        if t.is_none() {
            curve.never_triggered.push(r.series.station_id());
        }
    }
    if !curve.never_triggered.is_empty() {
        log::warn!(
            "excluding {} series that never triggered: stations {:?}",
            curve.never_triggered.len(),
            curve.never_triggered
        );
    }

    for &c in &opts.sample_counts {
        if c <= opts.features.lags {
            log::warn!(
                "skipping window of {c} samples: features need more than {}",
                opts.features.lags
            );
            curve.skipped_counts.push(c);
            continue;
        }
        let mut rows = Vec::new();
        let mut shortened = 0;
        for (r, t) in records.iter().zip(&triggered) {
            let (Some(start), Some(label)) = (*t, r.label) else {
                continue;
            };
            let end = (start + c).min(r.series.len());
            shortened += usize::from(end - start < c);
            match extract_values(&r.series.values[start..end], &opts.features) {
                Ok(fv) => rows.push(LabeledRow {
                    station_id: r.series.station_id(),
                    label,
                    features: fv.values,
                }),
                Err(e) => log::warn!("station {}: window of {c} dropped: {e}", r.series.station_id()),
            }
        }
        if shortened > 0 {
            log::warn!("{shortened} series have fewer than {c} samples after their first outlier");
        }
        let data = LabeledDataset::new(rows).map_err(|e| e.context(format!("window of {c} samples")))?;
        for &kind in &opts.kinds {
            let r = evaluate(&data, kind, &opts.params, opts.trials, opts.train_fraction, opts.seed)?;
            curve.points.push(PreemptPoint {
                samples: c,
                model: kind,
                mean: r.mean,
                std: r.std,
            });
        }
    }
    Ok(curve)
}

fn io(e: std::io::Error) -> Error {
    Error::io("<report>", e)
}

/// `trial,accuracy`
pub fn write_report<W: Write>(report: &EvalReport, mut w: W) -> Result<()> {
    writeln!(w, "trial,accuracy").map_err(io)?;
    for (t, a) in report.accuracies.iter().enumerate() {
        writeln!(w, "{t},{a}").map_err(io)?;
    }
    Ok(())
}

/// `true_label,pred_label,count`, all 81 cells.
pub fn write_confusion<W: Write>(report: &EvalReport, mut w: W) -> Result<()> {
    writeln!(w, "true_label,pred_label,count").map_err(io)?;
    for t in FaultLabel::ALL {
        for p in FaultLabel::ALL {
            writeln!(w, "{t},{p},{}", report.confusion[t.code()][p.code()]).map_err(io)?;
        }
    }
    Ok(())
}

/// `fraction,model,mean_accuracy,std_accuracy`
pub fn write_sweep<W: Write>(points: &[SweepPoint], mut w: W) -> Result<()> {
    writeln!(w, "fraction,model,mean_accuracy,std_accuracy").map_err(io)?;
    for p in points {
        writeln!(w, "{},{},{},{}", p.fraction, p.model, p.mean, p.std).map_err(io)?;
    }
    Ok(())
}

/// `samples,model,mean_accuracy,std_accuracy`
pub fn write_preemptive<W: Write>(curve: &PreemptiveCurve, mut w: W) -> Result<()> {
    writeln!(w, "samples,model,mean_accuracy,std_accuracy").map_err(io)?;
    for p in &curve.points {
        writeln!(w, "{},{},{},{}", p.samples, p.model, p.mean, p.std).map_err(io)?;
    }
    Ok(())
}
