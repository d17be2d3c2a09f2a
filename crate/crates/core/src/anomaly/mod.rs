//! Stage 1: online quartile outlier detection.
//!
//! Every incoming sample is inserted into the station's prefix multiset and
//! then compared against the prefix quartiles (the prefix includes the sample
//! itself). A sample beyond `1.5 * IQR` outside `[Q1, Q3]` is moderate, beyond
//! `3 * IQR` severe. `trigger_n` consecutive samples at or above the
//! configured severity raise a trigger and freeze the station.
//!
//! Sample indices are 0-based throughout.

mod multiset;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use multiset::OrderedMultiset;

pub const MODERATE_FACTOR: f64 = 1.5;
pub const SEVERE_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuartileSummary {
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
}

/// Quantile at probability `p` of an ascending order-statistic accessor, by
/// linear interpolation at 0-based position `(n - 1) * p`.
fn interpolated<F: Fn(usize) -> f64>(n: usize, p: f64, order_stat: F) -> f64 {
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    let x_lo = order_stat(lo);
    if frac == 0.0 {
        x_lo
    } else {
        x_lo + frac * (order_stat(lo + 1) - x_lo)
    }
}

impl QuartileSummary {
    pub fn from_multiset(ms: &OrderedMultiset) -> Result<Self> {
        if ms.is_empty() {
            return Err(Error::Empty);
        }
        let at = |k| ms.select(k).expect("rank within bounds");
        let q1 = interpolated(ms.len(), 0.25, at);
        let q3 = interpolated(ms.len(), 0.75, at);
        Ok(Self { q1, q3, iqr: q3 - q1 })
    }

    pub fn severity(&self, x: f64) -> Severity {
        let outside = |k: f64| x > self.q3 + k * self.iqr || x < self.q1 - k * self.iqr;
        if outside(SEVERE_FACTOR) {
            Severity::Severe
        } else if outside(MODERATE_FACTOR) {
            Severity::Moderate
        } else {
            Severity::Normal
        }
    }
}

/// Batch quartiles of a nonempty sample (selection-based, no full sort).
pub fn quartiles(values: &[f64]) -> Result<QuartileSummary> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSample(bad));
    }
    let mut buf = values.to_vec();
    let n = buf.len();
    let mut quantile = |p: f64| {
        let h = (n - 1) as f64 * p;
        let lo = h.floor() as usize;
        let (_, &mut x_lo, upper) = buf.select_nth_unstable_by(lo, f64::total_cmp);
        let frac = h - lo as f64;
        if frac == 0.0 {
            x_lo
        } else {
            let x_hi = upper
                .iter()
                .copied()
                .min_by(f64::total_cmp)
                .expect("frac > 0 implies lo + 1 < n");
            x_lo + frac * (x_hi - x_lo)
        }
    };
    let q1 = quantile(0.25);
    let q3 = quantile(0.75);
    Ok(QuartileSummary { q1, q3, iqr: q3 - q1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    Normal = 0,
    Moderate = 1,
    Severe = 2,
}

impl Severity {
    pub fn level(self) -> u8 {
        self as u8
    }

    pub fn from_level(level: u8) -> Option<Self> {
        match level {
            0 => Some(Severity::Normal),
            1 => Some(Severity::Moderate),
            2 => Some(Severity::Severe),
            _ => None,
        }
    }
}

/// Minimum severity that counts toward the consecutive run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeverityThreshold {
    Moderate,
    Severe,
}

impl SeverityThreshold {
    pub fn is_met(self, s: Severity) -> bool {
        match self {
            SeverityThreshold::Moderate => s >= Severity::Moderate,
            SeverityThreshold::Severe => s == Severity::Severe,
        }
    }
}

impl fmt::Display for SeverityThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeverityThreshold::Moderate => "moderate",
            SeverityThreshold::Severe => "severe",
        })
    }
}

impl FromStr for SeverityThreshold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "moderate" | "1" => Ok(SeverityThreshold::Moderate),
            "severe" | "2" => Ok(SeverityThreshold::Severe),
            other => Err(Error::InvalidConfig(format!(
                "unknown severity {other:?}; expected moderate or severe"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub trigger_n: usize,
    pub warmup: usize,
    pub threshold: SeverityThreshold,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            trigger_n: 70,
            warmup: 30,
            threshold: SeverityThreshold::Severe,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trigger_n == 0 {
            return Err(Error::InvalidConfig("trigger_n must be at least 1".into()));
        }
        Ok(())
    }
}

/// Counts consecutive threshold-meeting severities and fires once when the
/// run reaches `trigger_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunCounter {
    trigger_n: usize,
    threshold: SeverityThreshold,
    count: usize,
    fired: bool,
}

impl RunCounter {
    pub fn new(trigger_n: usize, threshold: SeverityThreshold) -> Self {
        Self {
            trigger_n,
            threshold,
            count: 0,
            fired: false,
        }
    }

    /// Returns `true` exactly on the sample at which the run first reaches
    /// `trigger_n`.
    pub fn push(&mut self, s: Severity) -> bool {
        if self.threshold.is_met(s) {
            self.count += 1;
        } else {
            self.count = 0;
        }
        if !self.fired && self.count == self.trigger_n {
            self.fired = true;
            return true;
        }
        false
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn fired(&self) -> bool {
        self.fired
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Normal,
    Outlier(Severity),
    /// The run reached `trigger_n` at this sample; the detector is now frozen.
    Triggered(Severity),
}

/// Per-station streaming state.
#[derive(Debug, Clone)]
pub struct Detector {
    config: DetectorConfig,
    prefix: OrderedMultiset,
    counter: RunCounter,
    frozen: bool,
}

impl Detector {
    pub fn new(config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            prefix: OrderedMultiset::with_capacity(2048),
            counter: RunCounter::new(config.trigger_n, config.threshold),
            frozen: false,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    /// Number of samples consumed so far.
    pub fn consumed(&self) -> usize {
        self.prefix.len()
    }

    pub fn consecutive(&self) -> usize {
        self.counter.count()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn quartiles(&self) -> Result<QuartileSummary> {
        QuartileSummary::from_multiset(&self.prefix)
    }

    /// Insert `x` into the prefix and grade it against the prefix quartiles.
    /// Does not touch the consecutive-run counter; use [`Detector::feed`] for
    /// the full streaming step.
    pub fn classify_sample(&mut self, x: f64) -> Result<Severity> {
        if self.frozen {
            return Err(Error::Frozen);
        }
        if !x.is_finite() {
            return Err(Error::NonFiniteSample(x));
        }
        self.prefix.insert(x);
        if self.prefix.len() <= self.config.warmup {
            return Ok(Severity::Normal);
        }
        Ok(self.quartiles()?.severity(x))
    }

    pub fn feed(&mut self, x: f64) -> Result<Event> {
        let s = self.classify_sample(x)?;
        if self.counter.push(s) {
            self.frozen = true;
            return Ok(Event::Triggered(s));
        }
        Ok(match s {
            Severity::Normal => Event::Normal,
            other => Event::Outlier(other),
        })
    }
}

/// Offline outlier vector: element `t` grades sample `t` against the
/// quartiles of samples `0..=t`. Freezing does not apply.
pub fn outlier_vector(values: &[f64], config: &DetectorConfig) -> Result<Vec<Severity>> {
    config.validate()?;
    let mut prefix = OrderedMultiset::with_capacity(values.len());
    values
        .iter()
        .map(|&x| {
            if !x.is_finite() {
                return Err(Error::NonFiniteSample(x));
            }
            prefix.insert(x);
            if prefix.len() <= config.warmup {
                Ok(Severity::Normal)
            } else {
                Ok(QuartileSummary::from_multiset(&prefix)?.severity(x))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trigger {
    /// Sample at which the run reached `trigger_n`.
    pub trigger_index: usize,
    /// First sample of that run.
    pub first_outlier_index: usize,
}

/// Stream `values` through a fresh detector and report the first trigger.
pub fn find_trigger(values: &[f64], config: &DetectorConfig) -> Result<Option<Trigger>> {
    let mut det = Detector::new(*config)?;
    for (i, &x) in values.iter().enumerate() {
        if let Event::Triggered(_) = det.feed(x)? {
            return Ok(Some(Trigger {
                trigger_index: i,
                first_outlier_index: i + 1 - config.trigger_n,
            }));
        }
    }
    Ok(None)
}

/// Sum of the last `window` severities up to and including sample `t - 1`
/// (`t` counts samples, `1 <= t <= len`).
pub fn heatmap_score(outliers: &[Severity], t: usize, window: usize) -> Result<u32> {
    if window == 0 {
        return Err(Error::InvalidConfig("heat-map window must be at least 1".into()));
    }
    if t == 0 || t > outliers.len() {
        return Err(Error::OutOfRange {
            index: t,
            len: outliers.len(),
        });
    }
    let start = t.saturating_sub(window);
    Ok(outliers[start..t].iter().map(|s| s.level() as u32).sum())
}

/// Per-station heat-map scores at sample count `t`, each in `[0, 2 * window]`.
pub fn heatmap_scores<V: AsRef<[Severity]>>(outliers: &[V], t: usize, window: usize) -> Result<Vec<u32>> {
    outliers
        .iter()
        .map(|o| heatmap_score(o.as_ref(), t, window))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Sort-then-interpolate oracle at 1-based position 1 + (n - 1) p.
    fn oracle(values: &[f64]) -> (f64, f64) {
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = (s.len() - 1) as f64 * p;
            let i = pos.floor() as usize;
            let f = pos - i as f64;
            if f == 0.0 {
                s[i]
            } else {
                s[i] + f * (s[i + 1] - s[i])
            }
        };
        (q(0.25), q(0.75))
    }

    #[test]
    fn quartiles_of_one_to_five() {
        let q = quartiles(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((q.q1, q.q3, q.iqr), (2.0, 4.0, 2.0));
        assert_eq!(oracle(&[5.0, 1.0, 4.0, 2.0, 3.0]), (2.0, 4.0));
    }

    #[test]
    fn quartiles_interpolate_between_order_statistics() {
        // n = 4: positions 0.75 and 2.25.
        let q = quartiles(&[10.0, 0.0, 30.0, 20.0]).unwrap();
        assert_eq!(q.q1, 7.5);
        assert_eq!(q.q3, 22.5);
    }

    #[test]
    fn constant_quartiles() {
        let q = quartiles(&[4.2; 4]).unwrap();
        assert_eq!((q.q1, q.q3, q.iqr), (4.2, 4.2, 0.0));
        assert!(matches!(quartiles(&[]), Err(Error::Empty)));
    }

    #[test]
    fn batch_quartiles_match_oracle_on_random_prefix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v: Vec<f64> = (0..1000).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let q = quartiles(&v).unwrap();
        assert_eq!((q.q1, q.q3), oracle(&v));
    }

    #[test]
    fn big_jump_after_noise_is_severe() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noise: Vec<f64> = (0..100).map(|_| rng.sample(StandardNormal)).collect();
        let mean = noise.iter().sum::<f64>() / 100.0;
        let mut det = Detector::new(DetectorConfig::default()).unwrap();
        for &x in &noise {
            det.classify_sample(x).unwrap();
        }
        let x = mean + 100.0;
        let mut with_x = noise.clone();
        with_x.push(x);
        let (q1, q3) = oracle(&with_x);
        assert!(x > q3 + 3.0 * (q3 - q1));
        assert_eq!(det.classify_sample(x).unwrap(), Severity::Severe);
    }

    #[test]
    fn warmup_forces_normal() {
        let mut det = Detector::new(DetectorConfig::default()).unwrap();
        for i in 0..30 {
            let x = if i % 2 == 0 { 0.0 } else { 1e9 * i as f64 };
            assert_eq!(det.classify_sample(x).unwrap(), Severity::Normal);
        }
    }

    #[test]
    fn constant_prefix_same_value_is_normal() {
        let mut det = Detector::new(DetectorConfig::default()).unwrap();
        for _ in 0..50 {
            det.classify_sample(60.0).unwrap();
        }
        assert_eq!(det.classify_sample(60.0).unwrap(), Severity::Normal);
        // Zero IQR: any departure is severe.
        assert_eq!(det.classify_sample(60.000001).unwrap(), Severity::Severe);
    }

    fn severe_feed() -> Detector {
        let mut det = Detector::new(DetectorConfig::default()).unwrap();
        for _ in 0..400 {
            det.feed(60.0).unwrap();
        }
        det
    }

    #[test]
    fn sixty_nine_severe_then_normal_never_triggers() {
        let mut det = severe_feed();
        // Each jump grows so it stays outside the (still degenerate) IQR.
        for k in 0..69 {
            let ev = det.feed(61.0 + k as f64).unwrap();
            assert_eq!(ev, Event::Outlier(Severity::Severe));
        }
        assert_eq!(det.consecutive(), 69);
        assert_eq!(det.feed(60.0).unwrap(), Event::Normal);
        assert_eq!(det.consecutive(), 0);
        assert!(!det.is_frozen());
    }

    #[test]
    fn seventieth_severe_triggers_and_freezes() {
        let mut det = severe_feed();
        for k in 0..69 {
            assert!(matches!(det.feed(61.0 + k as f64).unwrap(), Event::Outlier(_)));
        }
        assert_eq!(det.feed(200.0).unwrap(), Event::Triggered(Severity::Severe));
        assert!(det.is_frozen());
        assert!(matches!(det.feed(60.0), Err(Error::Frozen)));
        assert!(matches!(det.classify_sample(60.0), Err(Error::Frozen)));
    }

    #[test]
    fn constant_series_has_no_outliers() {
        let v = outlier_vector(&[7.0; 300], &DetectorConfig::default()).unwrap();
        assert!(v.iter().all(|&s| s == Severity::Normal));
    }

    #[test]
    fn heatmap_ranges() {
        let zeros = vec![Severity::Normal; 100];
        assert_eq!(heatmap_scores(&[zeros.clone(), zeros], 100, 40).unwrap(), vec![0, 0]);
        let mut v = vec![Severity::Normal; 100];
        for s in &mut v[60..100] {
            *s = Severity::Severe;
        }
        assert_eq!(heatmap_score(&v, 100, 40).unwrap(), 80);
        let twos = vec![Severity::Severe; 100];
        assert_eq!(heatmap_score(&twos, 20, 40).unwrap(), 40);
        assert!(heatmap_score(&twos, 101, 40).is_err());
        assert!(heatmap_score(&twos, 0, 40).is_err());
    }

    proptest! {
        #[test]
        fn severe_implies_moderate_bounds(values in prop::collection::vec(-100f64..100.0, 4..200), x in -1e4f64..1e4) {
            let mut v = values.clone();
            v.push(x);
            let q = quartiles(&v).unwrap();
            if q.severity(x) == Severity::Severe {
                prop_assert!(x > q.q3 + 1.5 * q.iqr || x < q.q1 - 1.5 * q.iqr);
            }
        }

        #[test]
        fn online_equals_offline(values in prop::collection::vec(-5f64..5.0, 1..400), warmup in 0usize..40) {
            let config = DetectorConfig { trigger_n: usize::MAX, warmup, threshold: SeverityThreshold::Severe };
            let batch = outlier_vector(&values, &config).unwrap();
            let mut det = Detector::new(config).unwrap();
            let online: Vec<Severity> = values.iter().map(|&x| match det.feed(x).unwrap() {
                Event::Normal => Severity::Normal,
                Event::Outlier(s) | Event::Triggered(s) => s,
            }).collect();
            prop_assert_eq!(batch, online);
        }

        #[test]
        fn streaming_quartiles_are_exact(values in prop::collection::vec(-1e3f64..1e3, 1..300)) {
            let mut ms = OrderedMultiset::new();
            for (i, &x) in values.iter().enumerate() {
                ms.insert(x);
                let q = QuartileSummary::from_multiset(&ms).unwrap();
                let (q1, q3) = oracle(&values[..=i]);
                prop_assert_eq!(q.q1.to_bits(), q1.to_bits());
                prop_assert_eq!(q.q3.to_bits(), q3.to_bits());
            }
        }

        #[test]
        fn trigger_iff_long_run(levels in prop::collection::vec(0u8..3, 0..200), n in 1usize..20) {
            let sev: Vec<Severity> = levels.iter().map(|&l| Severity::from_level(l).unwrap()).collect();
            let mut c = RunCounter::new(n, SeverityThreshold::Severe);
            let fired = sev.iter().any(|&s| c.push(s));
            let longest = sev.split(|&s| s != Severity::Severe).map(<[_]>::len).max().unwrap_or(0);
            prop_assert_eq!(fired, longest >= n);
        }
    }
}
