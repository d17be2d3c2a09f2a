mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use gridwarn::anomaly::{DetectorConfig, SeverityThreshold};
use gridwarn::classify::{
    self, budget_sweep, evaluate, preemptive_curve, train, AnnParams, ForestParams,
    ModelKind, PreemptiveOptions, SvmParams, TrainParams,
};
use gridwarn::cluster;
use gridwarn::features::{extract, extract_values, FeatureConfig, FeatureMethod};
use gridwarn::ingest::{
    generate_corpus, generate_scenario, load_dataset, save_dataset, Channel, CorpusSpec, FaultLabel,
    GeneratedSeries, Record, ScenarioSpec,
};
use gridwarn::pipeline::{self, ClusterConfig, PipelineConfig};

const SUBCOMMANDS: [&str; 9] = [
    "generate", "detect", "featurize", "train", "eval", "sweep", "preempt", "cluster", "run",
];

/// Early warning of grid faults from synchrophasor time series.
///
/// Any flag may also come from `--config <file>` holding `flag = value`
/// lines; flags given on the command line take precedence.
#[derive(Parser, Debug)]
#[command(name = "gridwarn", version, args_override_self = true)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic labeled dataset CSV.
    Generate(GenerateArgs),
    /// Stream series through the outlier detector.
    Detect(DetectArgs),
    /// Turn series into feature vectors.
    Featurize(FeaturizeArgs),
    /// Train a classifier on a feature CSV.
    Train(TrainArgs),
    /// Repeated stratified train/test evaluation.
    Eval(EvalArgs),
    /// Accuracy as a function of training-set fraction.
    Sweep(SweepArgs),
    /// Accuracy as a function of samples after the first outlier.
    Preempt(PreemptArgs),
    /// Cluster the series of one class with DTW and PAM.
    Cluster(ClusterArgs),
    /// Detect, classify and optionally cluster, writing all artifacts.
    Run(RunArgs),
}

#[derive(Args, Debug)]
struct DetectorArgs {
    /// Consecutive outliers that declare a fault.
    #[arg(long, default_value_t = 70)]
    trigger_n: usize,
    /// Leading samples always graded normal.
    #[arg(long, default_value_t = 30)]
    warmup: usize,
    /// Severity that counts toward the trigger run: moderate or severe.
    #[arg(long, default_value = "severe")]
    threshold: SeverityThreshold,
}

impl DetectorArgs {
    fn config(&self) -> DetectorConfig {
        DetectorConfig {
            trigger_n: self.trigger_n,
            warmup: self.warmup,
            threshold: self.threshold,
        }
    }
}

#[derive(Args, Debug)]
struct FeatureArgs {
    /// acf, pacf, periodogram or raw.
    #[arg(long, default_value = "acf")]
    method: FeatureMethod,
    /// Lags (ACF/PACF) or bins (periodogram).
    #[arg(long, default_value_t = 20)]
    lags: usize,
    /// Length of the raw baseline features.
    #[arg(long, default_value_t = 1802)]
    raw_length: usize,
}

impl FeatureArgs {
    fn config(&self) -> FeatureConfig {
        FeatureConfig {
            method: self.method,
            lags: self.lags,
            raw_length: self.raw_length,
        }
    }
}

#[derive(Args, Debug)]
struct HyperArgs {
    /// RBF kernel width for the SVM.
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    /// SVM soft-margin cost.
    #[arg(long = "c", default_value_t = 1.0)]
    cost: f64,
    /// SMO stopping tolerance.
    #[arg(long, default_value_t = 1e-3)]
    svm_tolerance: f64,
    /// SMO iteration cap per class pair.
    #[arg(long, default_value_t = 1_000_000)]
    svm_max_iterations: u64,
    /// Trees in the random forest.
    #[arg(long, default_value_t = 500)]
    trees: usize,
    /// Candidate features per split [default: ceil(sqrt(dim))].
    #[arg(long)]
    mtry: Option<usize>,
    /// Hidden units of the network.
    #[arg(long, default_value_t = 5)]
    hidden: usize,
    #[arg(long, default_value_t = 2000)]
    epochs: usize,
    #[arg(long = "lr", default_value_t = 0.01)]
    learning_rate: f64,
    /// Learning rate at epoch e is lr / (1 + lr_decay * e).
    #[arg(long, default_value_t = 0.0)]
    lr_decay: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
}

impl HyperArgs {
    fn params(&self, seed: u64) -> TrainParams {
        TrainParams {
            svm: SvmParams {
                gamma: self.gamma,
                c: self.cost,
                tolerance: self.svm_tolerance,
                max_iterations: self.svm_max_iterations,
            },
            forest: ForestParams {
                n_trees: self.trees,
                features_per_split: self.mtry,
            },
            ann: AnnParams {
                hidden: self.hidden,
                epochs: self.epochs,
                learning_rate: self.learning_rate,
                lr_decay: self.lr_decay,
                batch_size: self.batch_size,
                ..AnnParams::default()
            },
            seed,
        }
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output dataset CSV.
    #[arg(long)]
    out: PathBuf,
    /// Generate a single grid-wide event of this class instead of the corpus.
    #[arg(long)]
    class: Option<FaultLabel>,
    /// Corpus with this many series per class instead of the 2001-series default.
    #[arg(long)]
    per_class: Option<usize>,
    /// Scenario file (`key = value`) for a single event; overrides the other generator flags.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Stations on the grid.
    #[arg(long, default_value_t = 126)]
    stations: usize,
    #[arg(long, default_value_t = 1802)]
    series_length: usize,
    #[arg(long, default_value_t = 0.0005)]
    noise_sigma: f64,
    /// Nominal fault onset sample.
    #[arg(long, default_value_t = 300)]
    onset: usize,
    /// Also write `station_id,label,zone,onset` ground truth.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DetectArgs {
    #[arg(long)]
    input: PathBuf,
    /// Keep only this channel: frequency, voltage or phase_angle.
    #[arg(long)]
    channel: Option<Channel>,
    #[command(flatten)]
    detector: DetectorArgs,
    /// Per-sample severities `station_id,t,severity`.
    #[arg(long)]
    outliers: Option<PathBuf>,
    /// Triggered stations `station_id,trigger_index,first_outlier_index,time_s`.
    #[arg(long)]
    triggers: Option<PathBuf>,
    /// Heat-map SVG at each station's last consumed sample.
    #[arg(long)]
    heatmap: Option<PathBuf>,
    #[arg(long, default_value_t = 70)]
    heatmap_window: usize,
}

#[derive(Args, Debug)]
struct FeaturizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    channel: Option<Channel>,
    /// Output feature CSV `station_id,label,f1..fK`.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    features: FeatureArgs,
    /// Use only this many samples from each series' first outlier on;
    /// series that never trigger are skipped.
    #[arg(long)]
    budget: Option<usize>,
    #[command(flatten)]
    detector: DetectorArgs,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// svm, rf or ann.
    #[arg(long)]
    model: ModelKind,
    #[arg(long)]
    features: PathBuf,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    model_kind: ModelKind,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0.8)]
    train_frac: f64,
    /// Per-trial accuracies `trial,accuracy`.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Pooled confusion matrix `true_label,pred_label,count`.
    #[arg(long)]
    confusion: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "svm,rf,ann")]
    model_kinds: Vec<ModelKind>,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2,0.4,0.8")]
    fractions: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Output `fraction,model,mean_accuracy,std_accuracy`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Args, Debug)]
struct PreemptArgs {
    /// Labeled dataset CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    channel: Option<Channel>,
    #[arg(long, value_delimiter = ',', default_value = "30,60,120,300,600")]
    samples: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "svm,rf,ann")]
    model_kinds: Vec<ModelKind>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0.8)]
    train_frac: f64,
    /// Output `samples,model,mean_accuracy,std_accuracy`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    detector: DetectorArgs,
    #[command(flatten)]
    features: FeatureArgs,
    #[command(flatten)]
    hyper: HyperArgs,
}

/// Inclusive range of cluster counts.
#[derive(Debug, Clone)]
struct CountRange(Vec<usize>);

fn parse_range(s: &str) -> std::result::Result<CountRange, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected a range like 2..10, got {s:?}"))?;
    let a: usize = a.trim().parse().map_err(|_| format!("bad range start {a:?}"))?;
    let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| format!("bad range end {b:?}"))?;
    if a == 0 || a > b {
        return Err(format!("range {s:?} must satisfy 1 <= start <= end"));
    }
    Ok(CountRange((a..=b).collect()))
}

#[derive(Args, Debug)]
struct ClusterArgs {
    /// Labeled dataset CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    channel: Option<Channel>,
    /// Class whose series are clustered.
    #[arg(long, default_value = "GMD2")]
    class: FaultLabel,
    /// Number of clusters.
    #[arg(long = "L", visible_alias = "clusters", default_value_t = 5)]
    clusters: usize,
    /// Inclusive range of cluster counts for the elbow table, e.g. 2..10.
    #[arg(long, value_parser = parse_range)]
    elbow: Option<CountRange>,
    /// Elbow table output `clusters,mean_intra_distance` (printed when absent).
    #[arg(long)]
    elbow_out: Option<PathBuf>,
    /// PAM restarts; the lowest-cost result is kept.
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Assignment CSV `station_id,lat,lon,cluster`.
    #[arg(long)]
    emit_assignments: Option<PathBuf>,
    /// Map of stations colored by cluster (requires --emit-assignments).
    #[arg(long)]
    emit_geo: Option<PathBuf>,
    /// Sakoe-Chiba band half-width; exact DTW when absent.
    #[arg(long)]
    band: Option<usize>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    channel: Option<Channel>,
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    /// Alert CSV `station_id,trigger_index,time_s,label,confidence,latency_samples`.
    #[arg(long)]
    alerts: PathBuf,
    #[arg(long)]
    outliers: Option<PathBuf>,
    #[arg(long)]
    heatmap: Option<PathBuf>,
    #[arg(long, default_value_t = 70)]
    heatmap_window: usize,
    /// Samples from the first outlier on used for classification.
    #[arg(long, default_value_t = pipeline::DEFAULT_CLASSIFY_BUDGET)]
    budget: usize,
    #[command(flatten)]
    detector: DetectorArgs,
    #[command(flatten)]
    features: FeatureArgs,
    /// Cluster stations predicted as this class.
    #[arg(long)]
    cluster_class: Option<FaultLabel>,
    #[arg(long, default_value_t = 5)]
    clusters: usize,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long)]
    band: Option<usize>,
    /// Required with --cluster-class.
    #[arg(long)]
    cluster_assignments: Option<PathBuf>,
    #[arg(long)]
    cluster_map: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> gridwarn::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let series: Vec<GeneratedSeries> = if let Some(p) = &a.scenario {
        generate_scenario(&ScenarioSpec::from_config_file(p)?)?
    } else {
        let mut template = ScenarioSpec::new(a.class.unwrap_or(FaultLabel::DroppedLoad), a.seed);
        template.n_stations = a.stations;
        template.series_length = a.series_length;
        template.noise_sigma = a.noise_sigma;
        template.onset_index = a.onset;
        template.long_length = template.long_length.max(a.series_length);
        if a.class.is_some() {
            generate_scenario(&template)?
        } else {
            let mut spec = match a.per_class {
                Some(n) => CorpusSpec::small(a.seed, n),
                None => CorpusSpec::standard(a.seed),
            };
            template.n_stations = if a.per_class.is_some() { spec.template.n_stations } else { a.stations };
            spec.template = template;
            generate_corpus(&spec)?
        }
    };
    let records: Vec<Record> = series.iter().map(GeneratedSeries::to_record).collect();
    save_dataset(&records, &a.out)?;
    if let Some(t) = &a.truth {
        let mut w = create(t)?;
        writeln!(w, "station_id,label,zone,onset")?;
        for g in &series {
            writeln!(w, "{},{},{},{}", g.series.station_id(), g.label, g.zone, g.onset)?;
        }
        w.flush()?;
    }
    println!("wrote {} series to {}", records.len(), a.out.display());
    Ok(())
}

fn cmd_detect(a: &DetectArgs) -> Result<()> {
    let records = load_dataset(&a.input, a.channel)?;
    let det = a.detector.config();
    det.validate()?;
    let streamed: Vec<(Vec<_>, Option<usize>)> = records
        .iter()
        .map(|r| pipeline::stream_station(&r.series.values, &det))
        .collect::<gridwarn::Result<_>>()?;
    let triggered = streamed.iter().filter(|s| s.1.is_some()).count();
    if let Some(p) = &a.triggers {
        let mut w = create(p)?;
        writeln!(w, "station_id,trigger_index,first_outlier_index,time_s")?;
        for (r, (_, t)) in records.iter().zip(&streamed) {
            if let Some(t) = t {
                let first = t + 1 - det.trigger_n;
                let secs = *t as f64 / r.series.sample_rate_hz;
                writeln!(w, "{},{t},{first},{secs}", r.series.station_id())?;
            }
        }
        w.flush()?;
    }
    let results: Vec<pipeline::StationResult> = records
        .iter()
        .zip(streamed)
        .map(|(r, (outliers, _))| pipeline::StationResult {
            station: r.series.station.clone(),
            outliers,
            alert: None,
            window: None,
        })
        .collect();
    if let Some(p) = &a.outliers {
        write_with(p, |w| pipeline::write_outliers(&results, w))?;
    }
    if let Some(p) = &a.heatmap {
        let r = pipeline::PipelineResult {
            stations: results,
            clustering: None,
        };
        let scores = r.heat_scores(a.heatmap_window)?;
        std::fs::write(p, pipeline::heatmap_svg(&r.stations, &scores, a.heatmap_window))
            .with_context(|| format!("writing {}", p.display()))?;
    }
    println!("{triggered} of {} stations triggered", records.len());
    Ok(())
}

fn cmd_featurize(a: &FeaturizeArgs) -> Result<()> {
    let records = load_dataset(&a.input, a.channel)?;
    let cfg = a.features.config();
    let det = a.detector.config();
    let mut rows = Vec::with_capacity(records.len());
    for r in &records {
        let fv = match a.budget {
            None => extract(&r.series, &cfg)?,
            Some(budget) => {
                let (_, trigger) = pipeline::stream_station(&r.series.values, &det)?;
                let Some(t) = trigger else {
                    log::warn!("station {} never triggered; skipped", r.series.station_id());
                    continue;
                };
                let first = t + 1 - det.trigger_n;
                let end = (first + budget).min(r.series.len());
                extract_values(&r.series.values[first..end], &cfg)
                    .with_context(|| format!("station {}", r.series.station_id()))?
            }
        };
        rows.push((r.series.station_id(), r.label, fv));
    }
    classify::save_features(&rows, &a.out)?;
    println!("wrote {} feature rows of dimension {} to {}", rows.len(), cfg.dim(), a.out.display());
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let data = classify::load_features(&a.features)?;
    let model = train(a.model, &data, &a.hyper.params(a.seed))?;
    model.save(&a.out)?;
    let extra = match &model {
        classify::TrainedModel::Rf(f) => f.oob_score.map_or(String::new(), |s| format!(" oob_tree_accuracy={s:.4}")),
        _ => String::new(),
    };
    println!("model={} rows={} dim={}{extra} out={}", a.model, data.len(), data.feature_dim(), a.out.display());
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let data = classify::load_features(&a.features)?;
    let r = evaluate(&data, a.model_kind, &a.hyper.params(a.seed), a.trials, a.train_frac, a.seed)?;
    if let Some(p) = &a.report {
        write_with(p, |w| classify::write_report(&r, w))?;
    }
    if let Some(p) = &a.confusion {
        write_with(p, |w| classify::write_confusion(&r, w))?;
    }
    println!(
        "model={} trials={} train={} test={} mean={:.4} std={:.4} train_s={:.2} predict_s={:.2}",
        r.model,
        r.accuracies.len(),
        r.n_train,
        r.n_test,
        r.mean,
        r.std,
        r.train_seconds,
        r.predict_seconds
    );
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let data = classify::load_features(&a.features)?;
    let pts = budget_sweep(&data, &a.model_kinds, &a.fractions, a.trials, &a.hyper.params(a.seed), a.seed)?;
    match &a.out {
        Some(p) => write_with(p, |w| classify::write_sweep(&pts, w))?,
        None => classify::write_sweep(&pts, std::io::stdout().lock())?,
    }
    Ok(())
}

fn labeled(records: Vec<Record>) -> Result<Vec<Record>> {
    let n = records.len();
    let out: Vec<Record> = records.into_iter().filter(|r| r.label.is_some()).collect();
    if out.len() < n {
        log::warn!("ignoring {} unlabeled series", n - out.len());
    }
    if out.is_empty() {
        bail!("no labeled series in input");
    }
    Ok(out)
}

fn cmd_preempt(a: &PreemptArgs) -> Result<()> {
    let records = labeled(load_dataset(&a.input, a.channel)?)?;
    let opts = PreemptiveOptions {
        detector: a.detector.config(),
        features: a.features.config(),
        sample_counts: a.samples.clone(),
        kinds: a.model_kinds.clone(),
        trials: a.trials,
        train_fraction: a.train_frac,
        params: a.hyper.params(a.seed),
        seed: a.seed,
    };
    let curve = preemptive_curve(&records, &opts)?;
    match &a.out {
        Some(p) => write_with(p, |w| classify::write_preemptive(&curve, w))?,
        None => classify::write_preemptive(&curve, std::io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_cluster(a: &ClusterArgs) -> Result<()> {
    if a.emit_geo.is_some() && a.emit_assignments.is_none() {
        bail!("--emit-geo requires --emit-assignments");
    }
    let records: Vec<Record> = load_dataset(&a.input, a.channel)?
        .into_iter()
        .filter(|r| r.label == Some(a.class))
        .collect();
    if records.len() < 2 {
        bail!("need at least 2 series labeled {}, found {}", a.class, records.len());
    }
    let norm: Vec<Vec<f64>> = records.iter().map(|r| cluster::minmax_normalize(&r.series.values)).collect();
    let dist = cluster::dtw_matrix(&norm, a.band)?;
    let c = cluster::pam_with_restarts(&dist, a.clusters, a.restarts, a.seed)?;
    println!(
        "class={} series={} clusters={} total_cost={} sizes={:?} mean_intra_distance={}",
        a.class,
        records.len(),
        a.clusters,
        c.total_cost,
        c.sizes(),
        c.mean_intra_distance(&dist)
    );
    if let Some(p) = &a.emit_assignments {
        let metas: Vec<_> = records.iter().map(|r| r.series.station.clone()).collect();
        cluster::geo_export(&c, &metas, p, a.emit_geo.as_deref())?;
    }
    if let Some(range) = &a.elbow {
        let table = cluster::elbow(&dist, &range.0, a.restarts, a.seed)?;
        match &a.elbow_out {
            Some(p) => write_with(p, |w| cluster::write_elbow(&table, w))?,
            None => cluster::write_elbow(&table, std::io::stdout().lock())?,
        }
    }
    Ok(())
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let mut cfg = PipelineConfig::new(&a.input, &a.model, &a.alerts);
    cfg.channel = a.channel;
    cfg.detector = a.detector.config();
    cfg.heatmap_window = a.heatmap_window;
    cfg.features = a.features.config();
    cfg.classify_budget = a.budget;
    cfg.outliers_csv = a.outliers.clone();
    cfg.heatmap_svg = a.heatmap.clone();
    cfg.seed = a.seed;
    if let Some(class) = a.cluster_class {
        let Some(assignments_csv) = a.cluster_assignments.clone() else {
            bail!("--cluster-class requires --cluster-assignments");
        };
        cfg.cluster = Some(ClusterConfig {
            class,
            clusters: a.clusters,
            restarts: a.restarts,
            band: a.band,
            assignments_csv,
            map_svg: a.cluster_map.clone(),
        });
    }
    let result = pipeline::run_pipeline(&cfg)?;
    let alerts = result.alerts();
    println!("stations={} alerts={} out={}", result.stations.len(), alerts.len(), a.alerts.display());
    if let Some((ids, c)) = &result.clustering {
        println!("clustered={} sizes={:?} total_cost={}", ids.len(), c.sizes(), c.total_cost);
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Featurize(a) => cmd_featurize(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Preempt(a) => cmd_preempt(a),
        Command::Cluster(a) => cmd_cluster(a),
        Command::Run(a) => cmd_run(a),
    }
}

/// Cause chain joined with `: `, skipping causes already spelled out by
/// their parent.
fn chain_message(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if msg.contains(&text) {
            continue;
        }
        if !msg.is_empty() {
            msg.push_str(": ");
        }
        msg.push_str(&text);
    }
    msg
}

/// Single-line error for scripts: `error: <message>`.
fn report(msg: &str) {
    let line = msg.split_whitespace().collect::<Vec<_>>().join(" ");
    eprintln!("error: {}", line.trim_start_matches("error: "));
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args_os().collect(), &SUBCOMMANDS) {
        Ok(a) => a,
        Err(e) => {
            report(&chain_message(&e));
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            report(text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&chain_message(&e));
            ExitCode::FAILURE
        }
    }
}
