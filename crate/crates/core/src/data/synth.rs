use std::f64::consts::TAU;
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::series::TimeSeries;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// Sinusoids with jagged point and collective bursts.
    SineSpike,
    /// Sinusoids with constant offsets over each collective event.
    LevelShift,
    /// Sinusoids plus binary square waves that flip during anomalies.
    MixedDiscrete,
}

impl std::fmt::Display for SynthKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SynthKind::SineSpike => "sine_spike",
            SynthKind::LevelShift => "level_shift",
            SynthKind::MixedDiscrete => "mixed_discrete",
        })
    }
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine_spike" => Ok(SynthKind::SineSpike),
            "level_shift" => Ok(SynthKind::LevelShift),
            "mixed_discrete" => Ok(SynthKind::MixedDiscrete),
            other => Err(Error::config(format!("unknown synthetic kind {other:?}"))),
        }
    }
}

const PERIODS: [usize; 8] = [10, 12, 15, 20, 24, 30, 40, 60];
const SQUARE_PERIODS: [usize; 4] = [20, 24, 30, 40];
const LEAD_IN: usize = 30;
const MAX_GAP: usize = 40;
const MIN_MAGNITUDE: f64 = 5.0;
const MAX_MAGNITUDE: f64 = 7.0;
const PRECURSOR_MAGNITUDE: f64 = 1.5;
const POINT_SPIKE_PROB: f64 = 0.15;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthOptions {
    pub kind: SynthKind,
    pub features: usize,
    /// Noise standard deviation as a fraction of each channel's signal deviation.
    pub noise: f64,
    pub anomaly_rate: f64,
    pub seed: u64,
}

/// Generated series with the ground truth used to build it.
#[derive(Clone, Debug)]
pub struct Synthesized {
    pub series: TimeSeries,
    /// Labeled anomaly intervals, in time order.
    pub events: Vec<Range<usize>>,
    /// Unlabeled ramps immediately preceding some collective events.
    pub precursors: Vec<Range<usize>>,
}

#[derive(Clone, Debug)]
struct Wave {
    amplitude: f64,
    period: usize,
    phase: usize,
}

#[derive(Clone, Debug)]
enum Channel {
    Sines { level: f64, waves: Vec<Wave> },
    Square { period: usize, phase: usize },
}

impl Channel {
    fn value(&self, t: usize) -> f64 {
        match self {
            Channel::Sines { level, waves } => {
                level
                    + waves
                        .iter()
                        .map(|w| w.amplitude * (TAU * ((t + w.phase) % w.period) as f64 / w.period as f64).sin())
                        .sum::<f64>()
            }
            Channel::Square { period, phase } => (((t + phase) % period) < period / 2) as u8 as f64,
        }
    }

    fn signal_std(&self) -> f64 {
        match self {
            Channel::Sines { waves, .. } => waves.iter().map(|w| w.amplitude * w.amplitude / 2.0).sum::<f64>().sqrt(),
            Channel::Square { .. } => 0.5,
        }
    }

    fn is_binary(&self) -> bool {
        matches!(self, Channel::Square { .. })
    }
}

impl SynthOptions {
    pub fn new(kind: SynthKind, features: usize, anomaly_rate: f64, seed: u64) -> Self {
        SynthOptions { kind, features, noise: 0.1, anomaly_rate, seed }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn channels(&self) -> Vec<Channel> {
        let mut rng = self.rng(0);
        let binary = if self.kind == SynthKind::MixedDiscrete { self.features / 2 } else { 0 };
        (0..self.features)
            .map(|c| {
                if c >= self.features - binary {
                    let period = SQUARE_PERIODS[rng.random_range(0..SQUARE_PERIODS.len())];
                    Channel::Square { period, phase: rng.random_range(0..period) }
                } else {
                    let waves = (0..2)
                        .map(|_| {
                            let period = PERIODS[rng.random_range(0..PERIODS.len())];
                            Wave { amplitude: rng.random_range(0.5..1.5), period, phase: rng.random_range(0..period) }
                        })
                        .collect();
                    Channel::Sines { level: rng.random_range(-1.0..1.0), waves }
                }
            })
            .collect()
    }

    /// Exact period of the noise-free, anomaly-free signal.
    pub fn period(&self) -> usize {
        fn gcd(a: usize, b: usize) -> usize {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        let mut p = 1;
        for ch in self.channels() {
            let periods: Vec<usize> = match ch {
                Channel::Sines { waves, .. } => waves.iter().map(|w| w.period).collect(),
                Channel::Square { period, .. } => vec![period],
            };
            for q in periods {
                p = p / gcd(p, q) * q;
            }
        }
        p
    }

    fn check(&self, length: usize) -> Result<()> {
        if length < 100 {
            return Err(Error::config(format!("synthetic length {length} is below 100")));
        }
        if self.features == 0 {
            return Err(Error::config("synthetic series needs at least one feature"));
        }
        if !(self.anomaly_rate > 0.0 && self.anomaly_rate < 0.5) {
            return Err(Error::config(format!("anomaly rate {} outside (0, 0.5)", self.anomaly_rate)));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::config("noise must be non-negative"));
        }
        Ok(())
    }

    /// Rows `offset..offset + length` of the signal with noise drawn from
    /// `stream`, optionally with injected anomalies.
    fn render(&self, offset: usize, length: usize, stream: u64, anomalies: bool) -> Result<Synthesized> {
        let channels = self.channels();
        let d = self.features;
        let mut rng = self.rng(stream);
        let mut data = vec![0.0; length * d];
        let scales: Vec<f64> = channels
            .iter()
            .map(|ch| {
                let s = ch.signal_std();
                let noise = if ch.is_binary() { 0.0 } else { self.noise * s };
                (s * s + noise * noise).sqrt()
            })
            .collect();
        for (c, ch) in channels.iter().enumerate() {
            let noise_std = if ch.is_binary() { 0.0 } else { self.noise * ch.signal_std() };
            let normal = (noise_std > 0.0).then(|| Normal::new(0.0, noise_std).expect("finite std"));
            for t in 0..length {
                let mut v = ch.value(offset + t);
                if let Some(n) = &normal {
                    v += n.sample(&mut rng);
                }
                data[t * d + c] = v;
            }
        }
        let mut labels = vec![0u8; length];
        let (mut events, mut precursors) = (Vec::new(), Vec::new());
        if anomalies {
            self.inject(&channels, &scales, &mut rng, &mut data, &mut labels, &mut events, &mut precursors)?;
        }
        let series = TimeSeries::new(Tensor::new(vec![length, d], data)?, Some(labels))?;
        Ok(Synthesized { series, events, precursors })
    }

    #[allow(clippy::too_many_arguments)]
    fn inject(
        &self,
        channels: &[Channel],
        scales: &[f64],
        rng: &mut ChaCha8Rng,
        data: &mut [f64],
        labels: &mut [u8],
        events: &mut Vec<Range<usize>>,
        precursors: &mut Vec<Range<usize>>,
    ) -> Result<()> {
        let length = labels.len();
        let d = self.features;
        let budget = (self.anomaly_rate * length as f64).round() as usize;
        let mut lengths = Vec::new();
        let mut left = budget;
        while left > 0 {
            let len = if left < 5 || rng.random_bool(POINT_SPIKE_PROB) {
                1
            } else {
                let len = rng.random_range(5..=20).min(left);
                if left - len < 5 && left - len > 0 && left <= 20 {
                    left
                } else {
                    len
                }
            };
            lengths.push(len);
            left -= len;
        }
        lengths.shuffle(rng);
        let n = lengths.len();
        let total: usize = lengths.iter().sum();
        let avail = length - LEAD_IN - 1;
        if total + n > avail {
            return Err(Error::config(format!("anomaly rate {} does not fit in length {length}", self.anomaly_rate)));
        }
        let gap = MAX_GAP.min((avail - total) / n.max(1));
        let slack = avail - total - n * gap;
        let mut cuts: Vec<usize> = (0..n).map(|_| rng.random_range(0..=slack)).collect();
        cuts.sort_unstable();
        let continuous: Vec<usize> = (0..d).filter(|&c| !channels[c].is_binary()).collect();
        let binary: Vec<usize> = (0..d).filter(|&c| channels[c].is_binary()).collect();
        let mut before = 0;
        for (i, &len) in lengths.iter().enumerate() {
            let start = LEAD_IN + (i + 1) * gap + cuts[i] + before;
            before += len;
            let mut picked = Vec::new();
            for &c in &continuous {
                if rng.random_bool(0.5) {
                    picked.push((c, if rng.random_bool(0.5) { 1.0 } else { -1.0 }));
                }
            }
            if picked.is_empty() && !continuous.is_empty() {
                let c = continuous[rng.random_range(0..continuous.len())];
                picked.push((c, if rng.random_bool(0.5) { 1.0 } else { -1.0 }));
            }
            let level = rng.random_range(MIN_MAGNITUDE..MAX_MAGNITUDE);
            for t in start..start + len {
                labels[t] = 1;
                for &(c, sign) in &picked {
                    let m = match self.kind {
                        SynthKind::LevelShift => level,
                        _ => rng.random_range(MIN_MAGNITUDE..MAX_MAGNITUDE),
                    };
                    data[t * d + c] += sign * m * scales[c];
                }
                for &c in &binary {
                    data[t * d + c] = 1.0 - data[t * d + c];
                }
            }
            if len > 1 && gap >= 10 {
                let r = rng.random_range(3..=5);
                for j in 0..r {
                    let t = start - r + j;
                    for &(c, sign) in &picked {
                        data[t * d + c] += sign * PRECURSOR_MAGNITUDE * scales[c] * (j + 1) as f64 / r as f64;
                    }
                }
                precursors.push(start - r..start);
            }
            events.push(start..start + len);
        }
        Ok(())
    }

    /// `length` rows with noise and injected anomalies.
    pub fn generate(&self, length: usize) -> Result<Synthesized> {
        self.check(length)?;
        self.render(0, length, 1, true)
    }

    /// `length` rows of the noise-free, anomaly-free signal.
    pub fn clean(&self, length: usize) -> Result<TimeSeries> {
        let quiet = SynthOptions { noise: 0.0, ..self.clone() };
        Ok(quiet.render(0, length, 1, false)?.series)
    }

    /// An anomaly-free training series followed by an anomalous test series
    /// continuing the same signal with independent noise.
    pub fn pair(&self, train_len: usize, test_len: usize) -> Result<(TimeSeries, Synthesized)> {
        self.check(train_len)?;
        self.check(test_len)?;
        let train = self.render(0, train_len, 2, false)?.series;
        let test = self.render(train_len, test_len, 3, true)?;
        Ok((train, test))
    }
}

pub fn synth_generate(
    kind: SynthKind,
    length: usize,
    features: usize,
    anomaly_rate: f64,
    seed: u64,
) -> Result<TimeSeries> {
    Ok(SynthOptions::new(kind, features, anomaly_rate, seed).generate(length)?.series)
}

pub fn synth_pair(
    kind: SynthKind,
    train_len: usize,
    test_len: usize,
    features: usize,
    anomaly_rate: f64,
    seed: u64,
) -> Result<(TimeSeries, Synthesized)> {
    SynthOptions::new(kind, features, anomaly_rate, seed).pair(train_len, test_len)
}
