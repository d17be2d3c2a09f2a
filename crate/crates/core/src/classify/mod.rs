//! Stage 2 fault classification: SVM, random forest and a small neural
//! network behind one train/predict interface, plus the evaluation protocols.

mod ann;
mod eval;
mod forest;
mod svm;

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::ingest::FaultLabel;

pub use ann::{train_ann, train_ann_traced, AnnModel, AnnParams};
pub use eval::{
    budget_sweep, evaluate, evaluate_with, preemptive_curve, stratified_split, write_confusion,
    write_preemptive, write_report, write_sweep, EvalReport, PreemptPoint, PreemptiveCurve,
    PreemptiveOptions, SweepPoint,
};
pub use forest::{train_forest, DecisionTree, ForestModel, ForestParams, Node};
pub use svm::{train_svm, BinaryMachine, SvmModel, SvmParams};

pub const MODEL_MAGIC: &str = "GRIDWARN-MODEL";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRow {
    pub station_id: u64,
    pub label: FaultLabel,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    rows: Vec<LabeledRow>,
    feature_dim: usize,
}

impl LabeledDataset {
    pub fn new(rows: Vec<LabeledRow>) -> Result<Self> {
        let feature_dim = rows.first().ok_or(Error::Empty)?.features.len();
        for row in &rows {
            if row.features.len() != feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: feature_dim,
                    got: row.features.len(),
                }
                .context(format!("station {}", row.station_id)));
            }
            if let Some(i) = row.features.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    station_id: row.station_id,
                    index: i,
                });
            }
        }
        Ok(Self { rows, feature_dim })
    }

    pub fn rows(&self) -> &[LabeledRow] {
        &self.rows
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<FaultLabel> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn class_counts(&self) -> [usize; FaultLabel::COUNT] {
        let mut c = [0; FaultLabel::COUNT];
        for r in &self.rows {
            c[r.label.code()] += 1;
        }
        c
    }

    /// Labels present, in code order.
    pub fn classes(&self) -> Vec<FaultLabel> {
        let counts = self.class_counts();
        FaultLabel::ALL
            .into_iter()
            .filter(|l| counts[l.code()] > 0)
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            feature_dim: self.feature_dim,
        }
    }

    pub(crate) fn require_classes(&self) -> Result<Vec<FaultLabel>> {
        let classes = self.classes();
        if classes.len() < 2 {
            return Err(Error::SingleClass(classes.len()));
        }
        Ok(classes)
    }
}

/// Writes `station_id,label,f1..fK`; the label cell is empty for unlabeled rows.
pub fn write_features<W: Write>(
    rows: &[(u64, Option<FaultLabel>, FeatureVector)],
    writer: W,
) -> Result<()> {
    let dim = rows.first().map_or(0, |r| r.2.dim());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["station_id".to_string(), "label".to_string()];
    header.extend((1..=dim).map(|k| format!("f{k}")));
    w.write_record(&header).map_err(csv_err)?;
    for (id, label, fv) in rows {
        if fv.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: fv.dim(),
            });
        }
        let mut rec = vec![id.to_string(), label.map_or(String::new(), |l| l.to_string())];
        rec.extend(fv.values.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<features>", e))?;
    Ok(())
}

pub fn save_features(rows: &[(u64, Option<FaultLabel>, FeatureVector)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_features(rows, BufWriter::new(file))
}

/// Reads a feature CSV; every row must carry a label.
pub fn read_features<R: Read>(reader: R) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.len() < 3 || &headers[0] != "station_id" || &headers[1] != "label" {
        return Err(Error::Malformed {
            line: 1,
            message: "expected header station_id,label,f1,...".into(),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Malformed { line, message };
        let station_id = rec[0]
            .parse()
            .map_err(|_| bad(format!("invalid station_id {:?}", &rec[0])))?;
        if rec[1].is_empty() {
            return Err(bad("missing label".into()));
        }
        let label = rec[1].parse::<FaultLabel>().map_err(|e| bad(e.to_string()))?;
        let features = rec
            .iter()
            .skip(2)
            .map(|v| v.parse::<f64>().map_err(|_| bad(format!("invalid feature {v:?}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(LabeledRow {
            station_id,
            label,
            features,
        });
    }
    LabeledDataset::new(rows)
}

pub fn load_features(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_features(BufReader::new(file)).map_err(|e| e.context(path.display().to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Malformed {
        line,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    Svm,
    Rf,
    Ann,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Svm, ModelKind::Rf, ModelKind::Ann];
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Svm => "svm",
            ModelKind::Rf => "rf",
            ModelKind::Ann => "ann",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "svm" => Ok(ModelKind::Svm),
            "rf" | "forest" => Ok(ModelKind::Rf),
            "ann" | "nn" => Ok(ModelKind::Ann),
            other => Err(Error::InvalidConfig(format!(
                "unknown model kind {other:?}; expected svm, rf or ann"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[derive(Default)]
pub struct TrainParams {
    pub svm: SvmParams,
    pub forest: ForestParams,
    pub ann: AnnParams,
    pub seed: u64,
}


#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: FaultLabel,
    pub confidence: f64,
}

pub trait Classifier {
    fn predict(&self, x: &[f64]) -> Result<Prediction>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "lowercase")]
pub enum TrainedModel {
    Svm(SvmModel),
    Rf(ForestModel),
    Ann(AnnModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Svm(_) => ModelKind::Svm,
            TrainedModel::Rf(_) => ModelKind::Rf,
            TrainedModel::Ann(_) => ModelKind::Ann,
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            TrainedModel::Svm(m) => m.feature_dim,
            TrainedModel::Rf(m) => m.feature_dim,
            TrainedModel::Ann(m) => m.input_dim,
        }
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let file = ModelFile {
            magic: MODEL_MAGIC.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        serde_json::to_writer(writer, &file).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let fmt_err = |e: serde_json::Error| Error::ModelFormat(e.to_string());
        let value: serde_json::Value = serde_json::from_reader(reader).map_err(fmt_err)?;
        let magic = value.get("magic").and_then(|m| m.as_str());
        if magic != Some(MODEL_MAGIC) {
            return Err(Error::ModelFormat(format!("bad magic {magic:?}")));
        }
        let version = value.get("version").and_then(|v| v.as_u64());
        if version != Some(MODEL_VERSION as u64) {
            return Err(Error::ModelFormat(format!(
                "unsupported version {version:?} (expected {MODEL_VERSION})"
            )));
        }
        let file: ModelFile = serde_json::from_value(value).map_err(fmt_err)?;
        Ok(file.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file)).map_err(|e| e.context(path.display().to_string()))
    }
}

impl Classifier for TrainedModel {
    fn predict(&self, x: &[f64]) -> Result<Prediction> {
        match self {
            TrainedModel::Svm(m) => m.predict(x),
            TrainedModel::Rf(m) => m.predict(x),
            TrainedModel::Ann(m) => m.predict(x),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    magic: String,
    version: u32,
    #[serde(flatten)]
    model: TrainedModel,
}

pub fn train(kind: ModelKind, data: &LabeledDataset, params: &TrainParams) -> Result<TrainedModel> {
    Ok(match kind {
        ModelKind::Svm => TrainedModel::Svm(train_svm(data, &params.svm)?),
        ModelKind::Rf => TrainedModel::Rf(train_forest(data, &params.forest, params.seed)?),
        ModelKind::Ann => TrainedModel::Ann(train_ann(data, &params.ann, params.seed)?),
    })
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}
