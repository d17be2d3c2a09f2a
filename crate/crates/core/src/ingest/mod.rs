//! Station metadata, labeled time series and the dataset CSV format.
//!
//! A dataset file has the header
//! `station_id,name,lat,lon,channel,label,t,value` with one row per sample.
//! Rows of one series are contiguous and ordered by `t` starting at 0. The
//! `label` column is empty for unlabeled series.

mod scenario;

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use scenario::{
    generate_corpus, generate_scenario, grid_layout, CorpusSpec, Family, GeneratedSeries,
    GridSite, ScenarioSpec, Signature, SignatureParams, ZONE_COUNT,
};

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 30.0;

pub const DATASET_HEADER: [&str; 8] = [
    "station_id",
    "name",
    "lat",
    "lon",
    "channel",
    "label",
    "t",
    "value",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultLabel {
    DroppedLoad,
    OpenAC,
    OpenDC,
    OpenGenerator,
    GMD2,
    IceStorm,
    McNaryAttack,
    Ponderosa,
    Quake1,
}

impl FaultLabel {
    pub const COUNT: usize = 9;

    pub const ALL: [FaultLabel; 9] = [
        FaultLabel::DroppedLoad,
        FaultLabel::OpenAC,
        FaultLabel::OpenDC,
        FaultLabel::OpenGenerator,
        FaultLabel::GMD2,
        FaultLabel::IceStorm,
        FaultLabel::McNaryAttack,
        FaultLabel::Ponderosa,
        FaultLabel::Quake1,
    ];

    /// Stable integer code used in serialized models and reports.
    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            FaultLabel::DroppedLoad => "DroppedLoad",
            FaultLabel::OpenAC => "OpenAC",
            FaultLabel::OpenDC => "OpenDC",
            FaultLabel::OpenGenerator => "OpenGenerator",
            FaultLabel::GMD2 => "GMD2",
            FaultLabel::IceStorm => "IceStorm",
            FaultLabel::McNaryAttack => "McNaryAttack",
            FaultLabel::Ponderosa => "Ponderosa",
            FaultLabel::Quake1 => "Quake1",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL
            .iter()
            .map(|l| l.name())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl fmt::Display for FaultLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FaultLabel {
    type Err = Error;

    /// Accepts the canonical names, ignoring case, spaces and underscores
    /// (`"GMD 2"`, `"ice_storm"`).
    fn from_str(s: &str) -> Result<Self> {
        let squash = |t: &str| {
            t.chars()
                .filter(|c| !matches!(c, ' ' | '_' | '-'))
                .flat_map(char::to_lowercase)
                .collect::<String>()
        };
        let wanted = squash(s);
        Self::ALL
            .iter()
            .copied()
            .find(|l| squash(l.name()) == wanted)
            .ok_or_else(|| Error::UnknownLabel {
                given: s.to_string(),
                valid: Self::valid_names(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    Frequency,
    Voltage,
    PhaseAngle,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::Frequency => "frequency",
            Channel::Voltage => "voltage",
            Channel::PhaseAngle => "phase_angle",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "frequency" => Ok(Channel::Frequency),
            "voltage" => Ok(Channel::Voltage),
            "phase_angle" | "phase-angle" | "phaseangle" => Ok(Channel::PhaseAngle),
            other => Err(Error::InvalidConfig(format!(
                "unknown channel {other:?}; expected frequency, voltage or phase_angle"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationMeta {
    pub station_id: u64,
    pub name: String,
    pub latitude: f64,
    pub longitude: f64,
}

impl StationMeta {
    pub fn new(station_id: u64, name: impl Into<String>, latitude: f64, longitude: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&latitude) || !(-180.0..=180.0).contains(&longitude) {
            return Err(Error::InvalidConfig(format!(
                "station {station_id}: coordinates ({latitude}, {longitude}) out of range"
            )));
        }
        Ok(Self {
            station_id,
            name: name.into(),
            latitude,
            longitude,
        })
    }
}

/// One station's sampled channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub station: StationMeta,
    pub channel: Channel,
    pub sample_rate_hz: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(station: StationMeta, channel: Channel, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooShort {
                needed: 1,
                got: values.len(),
            }
            .context(format!("station {}", station.station_id)));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                station_id: station.station_id,
                index,
            });
        }
        Ok(Self {
            station,
            channel,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn station_id(&self) -> u64 {
        self.station.station_id
    }
}

/// A series with its (optional) fault label, as stored in a dataset file.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub series: TimeSeries,
    pub label: Option<FaultLabel>,
}

pub fn load_dataset(path: impl AsRef<Path>, channel: Option<Channel>) -> Result<Vec<Record>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, channel).map_err(|e| match e {
        Error::Io { .. } => e,
        other => other.context(path.display().to_string()),
    })
}

struct Group {
    station: StationMeta,
    channel: Channel,
    label: Option<FaultLabel>,
    values: Vec<f64>,
}

impl Group {
    fn finish(self) -> Result<Record> {
        let series = TimeSeries::new(self.station, self.channel, self.values)?;
        Ok(Record {
            series,
            label: self.label,
        })
    }
}

pub fn read_dataset<R: Read>(reader: R, channel: Option<Channel>) -> Result<Vec<Record>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Malformed {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != DATASET_HEADER {
        return Err(Error::Malformed {
            line: 1,
            message: format!("expected header {}", DATASET_HEADER.join(",")),
        });
    }

    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut current: Option<Group> = None;
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Malformed {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| Error::Malformed { line, message };
        if row.len() != DATASET_HEADER.len() {
            return Err(bad(format!("expected 8 fields, got {}", row.len())));
        }
        let station_id: u64 = row[0]
            .parse()
            .map_err(|_| bad(format!("invalid station_id {:?}", &row[0])))?;
        let lat: f64 = row[2].parse().map_err(|_| bad(format!("invalid lat {:?}", &row[2])))?;
        let lon: f64 = row[3].parse().map_err(|_| bad(format!("invalid lon {:?}", &row[3])))?;
        let ch: Channel = row[4].parse().map_err(|e: Error| bad(e.to_string()))?;
        let label = if row[5].is_empty() {
            None
        } else {
            Some(row[5].parse::<FaultLabel>()?)
        };
        let t: usize = row[6].parse().map_err(|_| bad(format!("invalid t {:?}", &row[6])))?;
        let value: f64 = row[7]
            .parse()
            .map_err(|_| bad(format!("invalid value {:?}", &row[7])))?;

        let same_group = current
            .as_ref()
            .is_some_and(|g| g.station.station_id == station_id && g.channel == ch);
        if !same_group {
            if let Some(g) = current.take() {
                if channel.is_none_or(|c| c == g.channel) {
                    out.push(g.finish()?);
                }
            }
            if !seen.insert((station_id, ch)) {
                return Err(bad(format!(
                    "rows of station {station_id} ({ch}) are not contiguous"
                )));
            }
            let station = StationMeta::new(station_id, &row[1], lat, lon)
                .map_err(|e| bad(e.to_string()))?;
            current = Some(Group {
                station,
                channel: ch,
                label,
                values: Vec::new(),
            });
        }
        let g = current.as_mut().expect("group initialized above");
        if g.station.name != row[1] || g.station.latitude != lat || g.station.longitude != lon {
            return Err(bad(format!("station {station_id} metadata changes within its rows")));
        }
        if g.label != label {
            return Err(bad(format!("station {station_id} label changes within its rows")));
        }
        if t != g.values.len() {
            return Err(bad(format!(
                "station {station_id}: expected t = {}, got {t}",
                g.values.len()
            )));
        }
        if !value.is_finite() {
            return Err(Error::NonFinite {
                station_id,
                index: t,
            });
        }
        g.values.push(value);
    }
    if let Some(g) = current.take() {
        if channel.is_none_or(|c| c == g.channel) {
            out.push(g.finish()?);
        }
    }
    Ok(out)
}

pub fn save_dataset(records: &[Record], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(records, std::io::BufWriter::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn write_dataset<W: Write>(records: &[Record], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io_err = |e: csv::Error| Error::io("<dataset>", std::io::Error::other(e.to_string()));
    w.write_record(DATASET_HEADER).map_err(io_err)?;
    for rec in records {
        let s = &rec.series.station;
        let id = s.station_id.to_string();
        let lat = s.latitude.to_string();
        let lon = s.longitude.to_string();
        let label = rec.label.map(|l| l.name()).unwrap_or("");
        for (t, v) in rec.series.values.iter().enumerate() {
            w.write_record([
                id.as_str(),
                s.name.as_str(),
                lat.as_str(),
                lon.as_str(),
                rec.series.channel.name(),
                label,
                &t.to_string(),
                // `Display` for f64 prints the shortest string that parses back
                // to the same bits.
                &v.to_string(),
            ])
            .map_err(io_err)?;
        }
    }
    w.flush().map_err(|e| Error::io("<dataset>", e))?;
    Ok(())
}
