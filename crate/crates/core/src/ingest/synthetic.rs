//! Synthetic action-composed recordings.
//!
//! Every activity is a sequence of latent actions. While an action is being
//! performed each sensor channel emits a fixed sinusoid specific to that
//! (sensor, action, channel), scaled by how well the sensor observes the action,
//! plus Gaussian noise. A sensor with zero observability for an action sees only
//! noise while it happens, which is what makes some activity pairs
//! indistinguishable from that sensor alone.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{ChannelKey, LabelInterval, QualityTier, Sample, SensorChannel, SensorDataset, SensorSpec};
use crate::error::{Error, Result};
use crate::seed::RngSeed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivityDef {
    pub label: String,
    pub actions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub n_subjects: usize,
    pub n_sensors: usize,
    pub n_actions: usize,
    pub activities: Vec<ActivityDef>,
    /// `n_sensors x n_actions`, entries in `[0, 1]`.
    pub observability: Vec<Vec<f64>>,
    pub noise_std: f64,
    pub samples_per_action: usize,
    pub seed: RngSeed,
    #[serde(default = "default_channels")]
    pub channels_per_sensor: usize,
    #[serde(default = "default_rate")]
    pub sampling_rate_hz: f64,
    /// Occurrences of each activity per subject, shuffled into a random order.
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Times each occurrence loops through its action sequence.
    #[serde(default = "default_cycles")]
    pub cycles: usize,
    /// Standard deviation of a per-subject, per-sensor multiplicative gain around 1.
    #[serde(default)]
    pub subject_gain_std: f64,
    /// Sensors (by index) declared with the low quality tier.
    #[serde(default)]
    pub low_quality_sensors: Vec<usize>,
    /// Extra occurrences of each activity per subject that are recorded but
    /// left without a label interval.
    #[serde(default)]
    pub unlabeled_repetitions: usize,
}

fn default_name() -> String {
    "synthetic".into()
}
fn default_channels() -> usize {
    3
}
fn default_rate() -> f64 {
    20.0
}
fn default_repetitions() -> usize {
    2
}
fn default_cycles() -> usize {
    1
}

impl SyntheticSpec {
    pub fn sensor_id(index: usize) -> String {
        format!("S{}", index + 1)
    }

    pub fn subject_id(index: usize) -> String {
        format!("subj{:02}", index + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synthetic spec: {m}")));
        if self.n_subjects == 0 || self.n_sensors == 0 || self.n_actions == 0 {
            return bad("n_subjects, n_sensors and n_actions must be positive".into());
        }
        if self.samples_per_action == 0 || self.channels_per_sensor == 0 || self.repetitions == 0 || self.cycles == 0 {
            return bad("samples_per_action, channels_per_sensor, repetitions and cycles must be positive".into());
        }
        if !(self.sampling_rate_hz > 0.0) {
            return bad("sampling_rate_hz must be positive".into());
        }
        if !(self.noise_std >= 0.0) || !(self.subject_gain_std >= 0.0) {
            return bad("noise_std and subject_gain_std must be nonnegative".into());
        }
        if self.activities.is_empty() {
            return bad("no activities".into());
        }
        for a in &self.activities {
            if a.actions.is_empty() {
                return bad(format!("activity {} has no actions", a.label));
            }
            if let Some(&x) = a.actions.iter().find(|&&x| x >= self.n_actions) {
                return bad(format!("activity {} uses undeclared action {x}", a.label));
            }
        }
        if self.observability.len() != self.n_sensors
            || self.observability.iter().any(|r| r.len() != self.n_actions)
        {
            return bad(format!(
                "observability must be {} x {}",
                self.n_sensors, self.n_actions
            ));
        }
        for (s, row) in self.observability.iter().enumerate() {
            if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return bad(format!("observability row {s} has entries outside [0, 1]"));
            }
            if !row.iter().any(|&v| v > 0.0) {
                return bad(format!("sensor {s} observes no action"));
            }
        }
        if let Some(&s) = self.low_quality_sensors.iter().find(|&&s| s >= self.n_sensors) {
            return bad(format!("low-quality sensor index {s} out of range"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Wave {
    offset: f64,
    amplitude: f64,
    freq_hz: f64,
    phase: f64,
}

impl Wave {
    fn at(&self, tau: f64) -> f64 {
        self.offset + self.amplitude * (TAU * self.freq_hz * tau + self.phase).sin()
    }
}

/// Contiguous stretch of one latent action, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionSpan {
    pub start: f64,
    pub end: f64,
    pub action: usize,
}

/// Generates a labeled multi-subject recording; deterministic in `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SensorDataset> {
    generate_synthetic_with_actions(spec).map(|(ds, _)| ds)
}

/// Like [`generate_synthetic`], also returning each subject's latent action spans.
pub fn generate_synthetic_with_actions(
    spec: &SyntheticSpec,
) -> Result<(SensorDataset, BTreeMap<String, Vec<ActionSpan>>)> {
    spec.validate()?;
    let n_ch = spec.channels_per_sensor;

    let mut wave_rng = spec.seed.derive("waveforms").rng();
    // indexed [sensor][action][channel]
    let waves: Vec<Vec<Vec<Wave>>> = (0..spec.n_sensors)
        .map(|_| {
            (0..spec.n_actions)
                .map(|_| {
                    (0..n_ch)
                        .map(|_| Wave {
                            offset: wave_rng.random_range(-2.0..2.0),
                            amplitude: wave_rng.random_range(0.5..2.0),
                            freq_hz: wave_rng.random_range(0.5..3.0),
                            phase: wave_rng.random_range(0.0..TAU),
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let sensors: Vec<SensorSpec> = (0..spec.n_sensors)
        .map(|s| SensorSpec {
            sensor_id: SyntheticSpec::sensor_id(s),
            channel_ids: (0..n_ch).map(|c| format!("ch{c}")).collect(),
            sampling_rate_hz: spec.sampling_rate_hz,
            quality_tier: if spec.low_quality_sensors.contains(&s) {
                QualityTier::Low
            } else {
                QualityTier::High
            },
        })
        .collect();

    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::Config(e.to_string()))?;
    let gain_dist = Normal::new(1.0, spec.subject_gain_std).map_err(|e| Error::Config(e.to_string()))?;
    let dt = 1.0 / spec.sampling_rate_hz;

    let mut channels = BTreeMap::new();
    let mut labels = BTreeMap::new();
    let mut subjects = Vec::with_capacity(spec.n_subjects);
    let mut action_spans = BTreeMap::new();

    for subj in 0..spec.n_subjects {
        let subject = SyntheticSpec::subject_id(subj);
        let subj_seed = spec.seed.derive("subject").derive_index(subj as u64);
        let mut order_rng = subj_seed.derive("order").rng();
        let mut gain_rng = subj_seed.derive("gain").rng();
        let mut noise_rng = subj_seed.derive("noise").rng();

        let gains: Vec<f64> = (0..spec.n_sensors).map(|_| gain_dist.sample(&mut gain_rng)).collect();

        // (activity, labeled)
        let mut occurrences: Vec<(usize, bool)> = (0..spec.activities.len())
            .flat_map(|a| {
                std::iter::repeat_n((a, true), spec.repetitions)
                    .chain(std::iter::repeat_n((a, false), spec.unlabeled_repetitions))
            })
            .collect();
        occurrences.shuffle(&mut order_rng);

        // (action, time since action start) for every sample index
        let mut timeline: Vec<(usize, f64)> = Vec::new();
        let mut intervals = Vec::with_capacity(occurrences.len());
        let mut spans = Vec::new();
        for &(act, labeled) in &occurrences {
            let start = timeline.len();
            for _ in 0..spec.cycles {
                for &action in &spec.activities[act].actions {
                    let from = timeline.len();
                    timeline.extend((0..spec.samples_per_action).map(|k| (action, k as f64 * dt)));
                    spans.push(ActionSpan {
                        start: from as f64 * dt,
                        end: timeline.len() as f64 * dt,
                        action,
                    });
                }
            }
            if labeled {
                intervals.push(LabelInterval {
                    start: start as f64 * dt,
                    end: timeline.len() as f64 * dt,
                    activity: act,
                });
            }
        }

        for (s, sensor) in sensors.iter().enumerate() {
            for (c, channel_id) in sensor.channel_ids.iter().enumerate() {
                let samples: Vec<Sample> = timeline
                    .iter()
                    .enumerate()
                    .map(|(i, &(action, tau))| {
                        let clean = spec.observability[s][action] * gains[s] * waves[s][action][c].at(tau);
                        Sample::valid(i as f64 * dt, clean + noise.sample(&mut noise_rng))
                    })
                    .collect();
                channels.insert(
                    ChannelKey::new(&subject, &sensor.sensor_id, channel_id),
                    SensorChannel::new(&sensor.sensor_id, channel_id, spec.sampling_rate_hz, samples)?,
                );
            }
        }
        labels.insert(subject.clone(), intervals);
        action_spans.insert(subject.clone(), spans);
        subjects.push(subject);
    }

    let ds = SensorDataset {
        name: spec.name.clone(),
        subjects,
        sensors,
        channels,
        labels,
        class_set: spec.activities.iter().map(|a| a.label.clone()).collect(),
    };
    Ok((ds, action_spans))
}
