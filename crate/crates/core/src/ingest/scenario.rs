//! Synthetic fault scenarios over a fixed fictional grid.
//!
//! Each fault class gets its own parametric signature family. The signature is
//! added to `baseline + N(0, noise_sigma)` from the station's onset sample on.
//! Stations sit in five geographic zones; the zone scales the signature
//! amplitude and sets how far the post-fault level settles back toward the
//! baseline, which gives each class a recoverable subgroup structure even after
//! min-max normalization.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Channel, FaultLabel, Record, StationMeta, TimeSeries, DEFAULT_SAMPLE_RATE_HZ};
use crate::error::{Error, Result};
use crate::{kv, rng};

pub const ZONE_COUNT: usize = 5;

// Bounding box of the fictional grid (Washington/Oregon).
const LAT_RANGE: (f64, f64) = (42.0, 49.0);
const LON_RANGE: (f64, f64) = (-124.5, -116.5);
const ZONE_CENTERS: [(f64, f64); ZONE_COUNT] = [
    (48.0, -122.5),
    (47.8, -117.8),
    (44.5, -123.3),
    (43.2, -118.5),
    (45.9, -120.2),
];
const LAYOUT_SEED: u64 = 0x6772_6964_7761_726e;

/// Seconds for the zone-dependent settling of the fault level.
const SETTLE_SECONDS: f64 = 7.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Step,
    Ramp,
    DampedSinusoid,
    GrowingSinusoid,
    DoubleStep,
    SpikeTrain,
    ExponentialSag,
    SquarePerturbation,
    Chirp,
}

impl Family {
    pub fn of(label: FaultLabel) -> Self {
        match label {
            FaultLabel::DroppedLoad => Family::Step,
            FaultLabel::OpenAC => Family::DampedSinusoid,
            FaultLabel::OpenDC => Family::SquarePerturbation,
            FaultLabel::OpenGenerator => Family::ExponentialSag,
            FaultLabel::GMD2 => Family::Ramp,
            FaultLabel::IceStorm => Family::GrowingSinusoid,
            FaultLabel::McNaryAttack => Family::SpikeTrain,
            FaultLabel::Ponderosa => Family::DoubleStep,
            FaultLabel::Quake1 => Family::Chirp,
        }
    }
}

/// Shape parameters of a signature. Units: `amplitude` in channel units,
/// `decay_rate` in 1/s, `osc_freq_hz` in Hz, `ramp_slope` in units/s (for the
/// chirp family it is the sweep rate in Hz/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignatureParams {
    pub amplitude: f64,
    pub decay_rate: f64,
    pub osc_freq_hz: f64,
    pub ramp_slope: f64,
}

impl SignatureParams {
    pub fn for_class(label: FaultLabel) -> Self {
        let (amplitude, decay_rate, osc_freq_hz, ramp_slope) = match Family::of(label) {
            Family::Step => (0.10, 5.0, 1.0, 0.0),
            Family::DampedSinusoid => (0.10, 0.25, 2.5, 0.0),
            Family::SquarePerturbation => (0.10, 0.125, 1.875, 0.0),
            Family::ExponentialSag => (0.10, 15.0, 0.0, 0.0),
            Family::Ramp => (0.10, 0.1, 0.5, 0.10 / 3.0),
            Family::GrowingSinusoid => (0.10, 0.16, 1.5, 0.0),
            Family::SpikeTrain => (0.10, 0.1, 2.0, 0.0),
            Family::DoubleStep => (0.10, 0.4, 3.75, 0.0),
            Family::Chirp => (0.10, 0.1, 1.0, 0.4),
        };
        Self {
            amplitude,
            decay_rate,
            osc_freq_hz,
            ramp_slope,
        }
    }
}

/// A fully specified signature for one station: family, jittered parameters
/// and the zone modifiers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Signature {
    pub family: Family,
    pub params: SignatureParams,
    /// Multiplier on `params.amplitude` from the station's zone.
    pub gain: f64,
    /// Fraction of the fault level that persists after settling.
    pub residual: f64,
    pub sample_rate_hz: f64,
}

fn rise(tau: f64, rate: f64) -> f64 {
    if tau <= 0.0 {
        0.0
    } else {
        1.0 - (-rate * tau).exp()
    }
}

impl Signature {
    /// Deviation from the baseline `k` samples after onset.
    pub fn offset(&self, k: usize) -> f64 {
        let tau = k as f64 / self.sample_rate_hz;
        let p = &self.params;
        let a = p.amplitude * self.gain;
        let settle = self.residual + (1.0 - self.residual) * (-tau / SETTLE_SECONDS).exp();
        let osc = |f: f64| (2.0 * PI * f * tau).sin();
        let unit = match self.family {
            Family::Step => {
                settle * rise(tau, p.decay_rate) + 0.15 * osc(p.osc_freq_hz) * (-0.5 * tau).exp()
            }
            Family::DampedSinusoid => {
                -(settle * rise(tau, 10.0) + 0.5 * osc(p.osc_freq_hz) * (-p.decay_rate * tau).exp())
            }
            Family::SquarePerturbation => {
                let phase = (p.osc_freq_hz * tau).fract();
                let square = if tau < 1.0 / p.decay_rate {
                    if phase < 0.5 {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    0.0
                };
                -(settle * rise(tau, 10.0) + 0.3 * square)
            }
            Family::ExponentialSag => -(settle * rise(tau, p.decay_rate)),
            Family::Ramp => {
                let ramp = (p.ramp_slope * tau / p.amplitude).min(1.0);
                settle * ramp + 0.3 * osc(p.osc_freq_hz) * (-p.decay_rate * tau).exp()
            }
            Family::GrowingSinusoid => {
                let grow_until = 10.0;
                let env = if tau <= grow_until {
                    0.1 * (p.decay_rate * tau).exp()
                } else {
                    0.1 * (p.decay_rate * grow_until).exp() * (-(tau - grow_until)).exp()
                };
                -(settle * rise(tau, 10.0) + env * osc(p.osc_freq_hz))
            }
            Family::SpikeTrain => {
                let period = (self.sample_rate_hz / p.osc_freq_hz).round().max(2.0) as usize;
                let spike = if k > 0 && k.is_multiple_of(period) && tau < 1.0 / p.decay_rate {
                    0.5
                } else {
                    0.0
                };
                settle * rise(tau, 10.0) + spike
            }
            Family::DoubleStep => {
                let steps = 0.5 * rise(tau, 10.0) + 0.5 * rise(tau - 1.5, 10.0);
                settle * steps + 0.2 * osc(p.osc_freq_hz) * (-p.decay_rate * tau).exp()
            }
            Family::Chirp => {
                let sweep = if tau < 10.0 {
                    (2.0 * PI * (p.osc_freq_hz * tau + 0.5 * p.ramp_slope * tau * tau)).sin()
                } else {
                    0.0
                };
                -(settle * rise(tau, 10.0) + 0.4 * sweep)
            }
        };
        a * unit
    }
}

/// Location and planted zone of one bus of the fictional grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSite {
    pub latitude: f64,
    pub longitude: f64,
    pub zone: usize,
}

/// The fixed bus layout for a grid of `n` stations: uniform over the bounding
/// box, zoned by nearest zone center.
pub fn grid_layout(n: usize) -> Vec<GridSite> {
    let mut r = rng::stream(LAYOUT_SEED, n as u64);
    (0..n)
        .map(|_| {
            let latitude = r.gen_range(LAT_RANGE.0..LAT_RANGE.1);
            let longitude = r.gen_range(LON_RANGE.0..LON_RANGE.1);
            let zone = ZONE_CENTERS
                .iter()
                .enumerate()
                .map(|(z, &(la, lo))| {
                    // Longitude degrees are shorter at these latitudes.
                    let d = (latitude - la).powi(2) + (0.7 * (longitude - lo)).powi(2);
                    (z, d)
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(z, _)| z)
                .expect("zone centers nonempty");
            GridSite {
                latitude,
                longitude,
                zone,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub fault_class: FaultLabel,
    pub n_stations: usize,
    pub series_length: usize,
    pub baseline: f64,
    pub noise_sigma: f64,
    pub onset_index: usize,
    /// Per-station onset shift drawn uniformly from `-onset_jitter..=onset_jitter`.
    pub onset_jitter: usize,
    pub signature: SignatureParams,
    /// Per-zone amplitude decay: zone `z` has gain `(1 - geo_attenuation)^z`.
    pub geo_attenuation: f64,
    /// Relative per-station jitter applied to every signature parameter.
    pub param_jitter: f64,
    /// Fraction of stations whose series is lengthened to `long_length`.
    pub long_fraction: f64,
    pub long_length: usize,
    pub seed: u64,
    pub first_station_id: u64,
}

impl ScenarioSpec {
    pub fn new(fault_class: FaultLabel, seed: u64) -> Self {
        Self {
            fault_class,
            n_stations: 126,
            series_length: 1802,
            baseline: 60.0,
            noise_sigma: 0.0005,
            onset_index: 300,
            onset_jitter: 45,
            signature: SignatureParams::for_class(fault_class),
            geo_attenuation: 0.15,
            param_jitter: 0.05,
            long_fraction: 0.1,
            long_length: 3000,
            seed,
            first_station_id: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_stations == 0 {
            return bad("n_stations must be at least 1".into());
        }
        if self.series_length < 3 {
            return bad(format!("series_length {} must be at least 3", self.series_length));
        }
        if self.onset_index < 2 || self.onset_index >= self.series_length {
            return bad(format!(
                "onset_index {} must satisfy 2 <= onset_index < series_length ({})",
                self.onset_index, self.series_length
            ));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma {} must be positive", self.noise_sigma));
        }
        if !self.baseline.is_finite() {
            return bad("baseline must be finite".into());
        }
        if !(0.0..1.0).contains(&self.geo_attenuation) {
            return bad(format!("geo_attenuation {} must be in [0, 1)", self.geo_attenuation));
        }
        if !(0.0..1.0).contains(&self.param_jitter) {
            return bad(format!("param_jitter {} must be in [0, 1)", self.param_jitter));
        }
        if !(0.0..=1.0).contains(&self.long_fraction) {
            return bad(format!("long_fraction {} must be in [0, 1]", self.long_fraction));
        }
        if self.long_fraction > 0.0 && self.long_length < self.series_length {
            return bad("long_length must be at least series_length".into());
        }
        let s = &self.signature;
        for (name, v) in [
            ("amplitude", s.amplitude),
            ("decay_rate", s.decay_rate),
            ("osc_freq_hz", s.osc_freq_hz),
            ("ramp_slope", s.ramp_slope),
        ] {
            if !v.is_finite() || v < 0.0 {
                return bad(format!("{name} must be finite and non-negative"));
            }
        }
        if s.amplitude == 0.0 {
            return bad("amplitude must be positive".into());
        }
        Ok(())
    }

    /// Parse `key = value` lines; unknown keys are rejected.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let entries = kv::parse(text)?;
        let class = match entries.iter().find(|e| e.key == "fault_class") {
            Some(e) => e.value.parse::<FaultLabel>()?,
            None => FaultLabel::DroppedLoad,
        };
        let mut spec = ScenarioSpec::new(class, 0);
        for e in &entries {
            match e.key.as_str() {
                "fault_class" => {}
                "n_stations" => spec.n_stations = kv::parse_value(e)?,
                "series_length" => spec.series_length = kv::parse_value(e)?,
                "baseline" => spec.baseline = kv::parse_value(e)?,
                "noise_sigma" => spec.noise_sigma = kv::parse_value(e)?,
                "onset_index" => spec.onset_index = kv::parse_value(e)?,
                "onset_jitter" => spec.onset_jitter = kv::parse_value(e)?,
                "amplitude" => spec.signature.amplitude = kv::parse_value(e)?,
                "decay_rate" => spec.signature.decay_rate = kv::parse_value(e)?,
                "osc_freq_hz" => spec.signature.osc_freq_hz = kv::parse_value(e)?,
                "ramp_slope" => spec.signature.ramp_slope = kv::parse_value(e)?,
                "geo_attenuation" => spec.geo_attenuation = kv::parse_value(e)?,
                "param_jitter" => spec.param_jitter = kv::parse_value(e)?,
                "long_fraction" => spec.long_fraction = kv::parse_value(e)?,
                "long_length" => spec.long_length = kv::parse_value(e)?,
                "seed" => spec.seed = kv::parse_value(e)?,
                "first_station_id" => spec.first_station_id = kv::parse_value(e)?,
                other => {
                    return Err(Error::Malformed {
                        line: e.line,
                        message: format!("unknown key {other:?}"),
                    })
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_config_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_config_str(&text).map_err(|e| e.context(path.display().to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSeries {
    pub series: TimeSeries,
    pub label: FaultLabel,
    /// Planted geographic zone (ground truth for subgroup recovery).
    pub zone: usize,
    /// Sample index at which the signature starts.
    pub onset: usize,
    pub signature: Signature,
}

impl GeneratedSeries {
    pub fn to_record(&self) -> Record {
        Record {
            series: self.series.clone(),
            label: Some(self.label),
        }
    }
}

pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Vec<GeneratedSeries>> {
    spec.validate()?;
    let layout = grid_layout(spec.n_stations);
    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| Error::InvalidConfig(format!("noise_sigma: {e}")))?;
    let family = Family::of(spec.fault_class);

    layout
        .iter()
        .enumerate()
        .map(|(i, site)| {
            let mut r = rng::stream(spec.seed, i as u64 + 1);
            let len = if r.gen_bool(spec.long_fraction) {
                spec.long_length
            } else {
                spec.series_length
            };
            let jitter = spec.onset_jitter as i64;
            let shift = if jitter > 0 { r.gen_range(-jitter..=jitter) } else { 0 };
            let onset = (spec.onset_index as i64 + shift).clamp(2, len as i64 - 1) as usize;

            let mut jittered = |v: f64| {
                if spec.param_jitter > 0.0 {
                    v * (1.0 + r.gen_range(-spec.param_jitter..spec.param_jitter))
                } else {
                    v
                }
            };
            let p = spec.signature;
            let params = SignatureParams {
                amplitude: jittered(p.amplitude),
                decay_rate: jittered(p.decay_rate),
                osc_freq_hz: jittered(p.osc_freq_hz),
                ramp_slope: jittered(p.ramp_slope),
            };
            let signature = Signature {
                family,
                params,
                gain: (1.0 - spec.geo_attenuation).powi(site.zone as i32),
                residual: site.zone as f64 / (ZONE_COUNT - 1) as f64,
                sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            };

            let values = (0..len)
                .map(|t| {
                    let base = spec.baseline + noise.sample(&mut r);
                    if t >= onset {
                        base + signature.offset(t - onset)
                    } else {
                        base
                    }
                })
                .collect();
            let station_id = spec.first_station_id + i as u64;
            let station = StationMeta::new(
                station_id,
                format!("BUS-{i:03}"),
                site.latitude,
                site.longitude,
            )?;
            Ok(GeneratedSeries {
                series: TimeSeries::new(station, Channel::Frequency, values)?,
                label: spec.fault_class,
                zone: site.zone,
                onset,
                signature,
            })
        })
        .collect()
}

/// A multi-class corpus: per class, as many grid-wide events as needed to
/// reach the class count.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub seed: u64,
    pub class_counts: [usize; FaultLabel::COUNT],
    /// Template for every event; `fault_class`, `signature`, `seed` and
    /// `first_station_id` are overwritten per event.
    pub template: ScenarioSpec,
}

impl CorpusSpec {
    /// 2001 series: two consolidated classes (OpenAC, OpenDC) with about 500+
    /// examples each and 126 for the others.
    pub fn standard(seed: u64) -> Self {
        let mut class_counts = [126; FaultLabel::COUNT];
        class_counts[FaultLabel::OpenAC.code()] = 560;
        class_counts[FaultLabel::OpenDC.code()] = 559;
        Self {
            seed,
            class_counts,
            template: ScenarioSpec::new(FaultLabel::DroppedLoad, seed),
        }
    }

    /// Same shape as [`CorpusSpec::standard`], scaled down to `per_class`
    /// series per class on a grid of `per_class` stations.
    pub fn small(seed: u64, per_class: usize) -> Self {
        let mut spec = Self::standard(seed);
        spec.class_counts = [per_class; FaultLabel::COUNT];
        spec.template.n_stations = per_class.max(1);
        spec
    }

    pub fn total(&self) -> usize {
        self.class_counts.iter().sum()
    }
}

pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<GeneratedSeries>> {
    let mut out = Vec::with_capacity(spec.total());
    let mut next_id = 0u64;
    for label in FaultLabel::ALL {
        let want = spec.class_counts[label.code()];
        let mut event = 0u64;
        let mut have = 0;
        while have < want {
            let mut s = spec.template.clone();
            s.fault_class = label;
            s.signature = SignatureParams::for_class(label);
            s.seed = rng::derive(spec.seed, &[label.code() as u64, event]);
            s.first_station_id = next_id;
            let take = (want - have).min(s.n_stations);
            let series = generate_scenario(&s)?;
            out.extend(series.into_iter().take(take));
            have += take;
            next_id += take as u64;
            event += 1;
        }
    }
    Ok(out)
}
