//! End-to-end replay: stream each station through the detector, classify
//! triggered stations from the window after their first outlier, and
//! optionally cluster the stations of one predicted class.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::anomaly::{heatmap_score, DetectorConfig, Detector, Event, Severity};
use crate::classify::{Classifier, TrainedModel};
use crate::cluster::{self, Clustering};
use crate::error::{Error, Result};
use crate::features::{extract_values, FeatureConfig};
use crate::ingest::{load_dataset, Channel, FaultLabel, Record, StationMeta};
use crate::svg;

pub const DEFAULT_CLASSIFY_BUDGET: usize = 600;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    /// Only stations predicted as this class are clustered.
    pub class: FaultLabel,
    pub clusters: usize,
    pub restarts: usize,
    pub band: Option<usize>,
    pub assignments_csv: PathBuf,
    pub map_svg: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub channel: Option<Channel>,
    pub model: PathBuf,
    pub detector: DetectorConfig,
    pub heatmap_window: usize,
    pub features: FeatureConfig,
    /// Samples from the first outlier on that feed the classifier.
    pub classify_budget: usize,
    pub alerts_csv: PathBuf,
    pub outliers_csv: Option<PathBuf>,
    pub heatmap_svg: Option<PathBuf>,
    pub cluster: Option<ClusterConfig>,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(input: impl Into<PathBuf>, model: impl Into<PathBuf>, alerts_csv: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            channel: None,
            model: model.into(),
            detector: DetectorConfig::default(),
            heatmap_window: 70,
            features: FeatureConfig::default(),
            classify_budget: DEFAULT_CLASSIFY_BUDGET,
            alerts_csv: alerts_csv.into(),
            outliers_csv: None,
            heatmap_svg: None,
            cluster: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        if self.heatmap_window == 0 {
            return Err(Error::InvalidConfig("heat-map window must be at least 1".into()));
        }
        if self.classify_budget <= self.features.lags {
            return Err(Error::InvalidConfig(format!(
                "classification budget {} must exceed the {} feature lags",
                self.classify_budget, self.features.lags
            )));
        }
        for (what, p) in [("input", &self.input), ("model", &self.model)] {
            if !p.is_file() {
                return Err(Error::InvalidConfig(format!("{what} file {} does not exist", p.display())));
            }
        }
        if let Some(c) = &self.cluster {
            if c.clusters == 0 {
                return Err(Error::InvalidConfig("cluster count must be at least 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaultAlert {
    pub station_id: u64,
    /// 0-based sample index at which the run reached `trigger_n`.
    pub trigger_index: usize,
    /// `trigger_index / sample_rate`.
    pub time_s: f64,
    pub label: FaultLabel,
    pub confidence: f64,
    /// Samples after the first outlier used for classification.
    pub latency_samples: usize,
}

/// Per-station outcome of the streaming phase.
#[derive(Debug, Clone, PartialEq)]
pub struct StationResult {
    pub station: StationMeta,
    /// Severities of every consumed sample; stops at the trigger.
    pub outliers: Vec<Severity>,
    pub alert: Option<FaultAlert>,
    /// The classification window, kept for clustering.
    pub window: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub stations: Vec<StationResult>,
    pub clustering: Option<(Vec<u64>, Clustering)>,
}

impl PipelineResult {
    pub fn alerts(&self) -> Vec<&FaultAlert> {
        self.stations.iter().filter_map(|s| s.alert.as_ref()).collect()
    }

    /// Heat-map score of each station at its last consumed sample.
    pub fn heat_scores(&self, window: usize) -> Result<Vec<u32>> {
        self.stations
            .iter()
            .map(|s| match s.outliers.len() {
                0 => Ok(0),
                t => heatmap_score(&s.outliers, t, window),
            })
            .collect()
    }
}

/// Feeds `values` through a fresh detector until it triggers. Returns the
/// severity of every consumed sample and the trigger index, if any; samples
/// after the trigger are never read.
pub fn stream_station(values: &[f64], detector: &DetectorConfig) -> Result<(Vec<Severity>, Option<usize>)> {
    let mut det = Detector::new(*detector)?;
    let mut outliers = Vec::with_capacity(values.len());
    for (i, &x) in values.iter().enumerate() {
        let ev = det.feed(x)?;
        outliers.push(match ev {
            Event::Normal => Severity::Normal,
            Event::Outlier(s) | Event::Triggered(s) => s,
        });
        if let Event::Triggered(_) = ev {
            return Ok((outliers, Some(i)));
        }
    }
    Ok((outliers, None))
}

fn process_station<C: Classifier>(
    record: &Record,
    model: &C,
    detector: &DetectorConfig,
    features: &FeatureConfig,
    budget: usize,
) -> Result<StationResult> {
    let series = &record.series;
    let (outliers, trigger) = stream_station(&series.values, detector)
        .map_err(|e| e.context(format!("station {}", series.station_id())))?;
    let Some(trigger_index) = trigger else {
        return Ok(StationResult {
            station: series.station.clone(),
            outliers,
            alert: None,
            window: None,
        });
    };
    let first = trigger_index + 1 - detector.trigger_n;
    let end = (first + budget).min(series.len());
    let window = series.values[first..end].to_vec();
    let fv = extract_values(&window, features)
        .map_err(|e| e.context(format!("station {}", series.station_id())))?;
    let pred = model.predict(&fv.values)?;
    Ok(StationResult {
        station: series.station.clone(),
        outliers,
        alert: Some(FaultAlert {
            station_id: series.station_id(),
            trigger_index,
            time_s: trigger_index as f64 / series.sample_rate_hz,
            label: pred.label,
            confidence: pred.confidence,
            latency_samples: window.len(),
        }),
        window: Some(window),
    })
}

/// Streams every record and classifies the triggered ones. Stations are
/// independent and processed in parallel; results keep input order.
pub fn process_records<C: Classifier + Sync>(
    records: &[Record],
    model: &C,
    detector: &DetectorConfig,
    features: &FeatureConfig,
    budget: usize,
) -> Result<Vec<StationResult>> {
    records
        .par_iter()
        .map(|r| process_station(r, model, detector, features, budget))
        .collect()
}

/// Clusters the classification windows of stations predicted as `class`.
/// Returns `None` (with a warning) when fewer stations than clusters qualify.
pub fn cluster_class(
    stations: &[StationResult],
    class: FaultLabel,
    clusters: usize,
    restarts: usize,
    band: Option<usize>,
    seed: u64,
) -> Result<Option<(Vec<u64>, Clustering)>> {
    let chosen: Vec<&StationResult> = stations
        .iter()
        .filter(|s| s.alert.as_ref().is_some_and(|a| a.label == class))
        .collect();
    if chosen.len() < clusters.max(2) {
        log::warn!(
            "skipping clustering: {} station(s) predicted {class}, need at least {}",
            chosen.len(),
            clusters.max(2)
        );
        return Ok(None);
    }
    let norm: Vec<Vec<f64>> = chosen
        .iter()
        .map(|s| cluster::minmax_normalize(s.window.as_deref().expect("alerted stations keep a window")))
        .collect();
    let dist = cluster::dtw_matrix(&norm, band)?;
    let c = cluster::pam_with_restarts(&dist, clusters, restarts, seed)?;
    Ok(Some((chosen.iter().map(|s| s.station.station_id).collect(), c)))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// `station_id,trigger_index,time_s,label,confidence,latency_samples`
pub fn write_alerts<W: Write>(alerts: &[&FaultAlert], mut w: W) -> Result<()> {
    let io = |e| Error::io("<alerts>", e);
    writeln!(w, "station_id,trigger_index,time_s,label,confidence,latency_samples").map_err(io)?;
    for a in alerts {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            a.station_id, a.trigger_index, a.time_s, a.label, a.confidence, a.latency_samples
        )
        .map_err(io)?;
    }
    Ok(())
}

/// `station_id,t,severity` for every consumed sample.
pub fn write_outliers<W: Write>(stations: &[StationResult], mut w: W) -> Result<()> {
    let io = |e| Error::io("<outliers>", e);
    writeln!(w, "station_id,t,severity").map_err(io)?;
    for s in stations {
        for (t, sev) in s.outliers.iter().enumerate() {
            writeln!(w, "{},{t},{}", s.station.station_id, sev.level()).map_err(io)?;
        }
    }
    Ok(())
}

pub fn heatmap_svg(stations: &[StationResult], scores: &[u32], window: usize) -> String {
    let max = 2 * window as u32;
    let points: Vec<svg::Point> = stations
        .iter()
        .zip(scores)
        .map(|(s, &score)| svg::Point {
            latitude: s.station.latitude,
            longitude: s.station.longitude,
            fill: svg::heat_color(score, max),
            label: format!("{} score {score}", s.station.name),
        })
        .collect();
    svg::scatter(&points, &format!("outlier heat map (window {window})"))
}

/// Loads inputs, runs all stages and writes every requested artifact.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineResult> {
    config.validate()?;
    let model = TrainedModel::load(&config.model)?;
    if model.feature_dim() != config.features.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.feature_dim(),
            got: config.features.dim(),
        }
        .context("model and feature config disagree"));
    }
    let records = load_dataset(&config.input, config.channel)?;
    let stations = process_records(
        &records,
        &model,
        &config.detector,
        &config.features,
        config.classify_budget,
    )?;

    let mut result = PipelineResult {
        stations,
        clustering: None,
    };
    let alerts = result.alerts();
    log::info!("{} of {} stations triggered", alerts.len(), result.stations.len());
    let mut w = create(&config.alerts_csv)?;
    write_alerts(&alerts, &mut w)?;
    w.flush().map_err(|e| Error::io(&config.alerts_csv, e))?;

    if let Some(p) = &config.outliers_csv {
        let mut w = create(p)?;
        write_outliers(&result.stations, &mut w)?;
        w.flush().map_err(|e| Error::io(p, e))?;
    }
    if let Some(p) = &config.heatmap_svg {
        let scores = result.heat_scores(config.heatmap_window)?;
        std::fs::write(p, heatmap_svg(&result.stations, &scores, config.heatmap_window))
            .map_err(|e| Error::io(p, e))?;
    }

    if let Some(cc) = &config.cluster {
        result.clustering = cluster_class(
            &result.stations,
            cc.class,
            cc.clusters,
            cc.restarts,
            cc.band,
            config.seed,
        )?;
        if let Some((ids, c)) = &result.clustering {
            let metas: Vec<StationMeta> = ids
                .iter()
                .map(|id| {
                    result
                        .stations
                        .iter()
                        .find(|s| s.station.station_id == *id)
                        .expect("clustered ids come from stations")
                        .station
                        .clone()
                })
                .collect();
            cluster::geo_export(c, &metas, &cc.assignments_csv, cc.map_svg.as_deref())?;
        }
    }
    Ok(result)
}
