//! Sliding-window segmentation and per-channel statistical features.
//!
//! Each channel contributes four columns per window, in this order: mean,
//! population standard deviation, range (max - min), and mean - median.

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnGroup, FeatureTable, LabelInterval, SensorDataset};
use crate::error::{Error, Result};

pub const FEATURES_PER_CHANNEL: usize = 4;
pub const FEATURE_NAMES: [&str; FEATURES_PER_CHANNEL] = ["mean", "std", "range", "mean_minus_median"];

const TIME_EPS: f64 = 1e-9;
const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LabelRule {
    /// Activity with the largest overlap; ties go to the interval that starts first.
    #[default]
    Majority,
    /// Window must lie inside a single label interval, otherwise it is dropped.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub length_s: f64,
    pub step_s: f64,
    #[serde(default = "default_min_valid")]
    pub min_valid_fraction: f64,
    #[serde(default)]
    pub label_rule: LabelRule,
}

fn default_min_valid() -> f64 {
    1.0
}

impl WindowSpec {
    pub fn new(length_s: f64, step_s: f64) -> Self {
        WindowSpec {
            length_s,
            step_s,
            min_valid_fraction: 1.0,
            label_rule: LabelRule::Majority,
        }
    }

    /// Cooking: 1 s windows, 0.25 s step.
    pub fn cooking() -> Self {
        Self::new(1.0, 0.25)
    }

    /// Opportunity high-level activities: 30 s windows, 15 s step.
    pub fn opportunity_high_level() -> Self {
        Self::new(30.0, 15.0)
    }

    /// Opportunity locomotion: 3 s windows, 2 s step.
    pub fn opportunity_locomotion() -> Self {
        Self::new(3.0, 2.0)
    }

    /// PAMAP: 5.12 s windows, 1 s step.
    pub fn pamap() -> Self {
        Self::new(5.12, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_s > 0.0 && self.length_s.is_finite()) {
            return Err(Error::Config(format!("window length must be positive, got {}", self.length_s)));
        }
        if !(self.step_s > 0.0 && self.step_s.is_finite()) {
            return Err(Error::Config(format!("window step must be positive, got {}", self.step_s)));
        }
        if !(self.min_valid_fraction > 0.0 && self.min_valid_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "min_valid_fraction must be in (0, 1], got {}",
                self.min_valid_fraction
            )));
        }
        Ok(())
    }

    /// Window count for a recording of `duration_s`.
    pub fn window_count(&self, duration_s: f64) -> usize {
        if duration_s + TIME_EPS < self.length_s {
            0
        } else {
            ((duration_s - self.length_s) / self.step_s + TIME_EPS).floor() as usize + 1
        }
    }
}

/// mean, population std, range, mean - median of a non-empty slice.
pub fn window_stats(values: &[f64]) -> [f64; FEATURES_PER_CHANNEL] {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 0 {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    };
    let range = sorted[sorted.len() - 1] - sorted[0];
    [mean, var.sqrt(), range, mean - median]
}

fn window_label(
    intervals: &[LabelInterval],
    start: f64,
    end: f64,
    rule: LabelRule,
) -> Option<Option<usize>> {
    let overlapping: Vec<&LabelInterval> = intervals
        .iter()
        .filter(|iv| iv.start < end - TIME_EPS && iv.end > start + TIME_EPS)
        .collect();
    if overlapping.is_empty() {
        return Some(None);
    }
    match rule {
        LabelRule::Strict => {
            let containing = overlapping
                .iter()
                .find(|iv| iv.start <= start + TIME_EPS && iv.end >= end - TIME_EPS);
            match (containing, overlapping.len()) {
                (Some(iv), 1) => Some(Some(iv.activity)),
                _ => None,
            }
        }
        LabelRule::Majority => {
            // (activity, total overlap, earliest start)
            let mut totals: Vec<(usize, f64, f64)> = Vec::new();
            for iv in &overlapping {
                let ov = iv.end.min(end) - iv.start.max(start);
                match totals.iter_mut().find(|(a, _, _)| *a == iv.activity) {
                    Some(entry) => {
                        entry.1 += ov;
                        entry.2 = entry.2.min(iv.start);
                    }
                    None => totals.push((iv.activity, ov, iv.start)),
                }
            }
            let covered: f64 = totals.iter().map(|t| t.1).sum();
            let unlabeled = (end - start) - covered;
            let best = totals
                .iter()
                .copied()
                .reduce(|a, b| {
                    if b.1 > a.1 + TIME_EPS || ((b.1 - a.1).abs() <= TIME_EPS && b.2 < a.2) {
                        b
                    } else {
                        a
                    }
                })
                .expect("non-empty");
            if unlabeled > best.1 + TIME_EPS {
                Some(None)
            } else {
                Some(Some(best.0))
            }
        }
    }
}

struct SubjectRows {
    subject: String,
    rows: Vec<Vec<f64>>,
    labels: Vec<Option<usize>>,
    windows: Vec<(f64, f64)>,
}

fn subject_windows(ds: &SensorDataset, subject: &str, spec: &WindowSpec) -> Result<SubjectRows> {
    let mut out = SubjectRows {
        subject: subject.to_owned(),
        rows: Vec::new(),
        labels: Vec::new(),
        windows: Vec::new(),
    };
    let Some((lo, hi)) = ds.subject_range(subject) else {
        return Ok(out);
    };
    let channels: Vec<_> = ds
        .sensors
        .iter()
        .flat_map(|s| s.channel_ids.iter().map(move |c| (s, c)))
        .map(|(s, c)| {
            ds.channel(subject, &s.sensor_id, c).ok_or_else(|| {
                Error::InvalidDataset(format!("subject {subject} lacks channel {}/{c}", s.sensor_id))
            })
        })
        .collect::<Result<_>>()?;
    let no_labels = Vec::new();
    let intervals = ds.labels.get(subject).unwrap_or(&no_labels);
    let n_windows = spec.window_count(hi - lo);
    let mut values = Vec::new();
    'window: for w in 0..n_windows {
        let start = lo + w as f64 * spec.step_s;
        let end = start + spec.length_s;
        let Some(label) = window_label(intervals, start, end, spec.label_rule) else {
            continue;
        };
        let mut row = Vec::with_capacity(channels.len() * FEATURES_PER_CHANNEL);
        for ch in &channels {
            let a = ch.samples.partition_point(|s| s.t < start - TIME_EPS);
            let b = ch.samples.partition_point(|s| s.t < end - TIME_EPS);
            let in_window = &ch.samples[a..b];
            values.clear();
            values.extend(in_window.iter().filter(|s| s.valid).map(|s| s.value));
            if in_window.is_empty()
                || values.is_empty()
                || (values.len() as f64) < spec.min_valid_fraction * in_window.len() as f64 - TIME_EPS
            {
                continue 'window;
            }
            row.extend(window_stats(&values));
        }
        out.rows.push(row);
        out.labels.push(label);
        out.windows.push((start, end));
    }
    Ok(out)
}

/// Segments every subject's recording into windows and extracts features.
///
/// Windows are anchored at each subject's first timestamp. Subjects whose
/// recording is shorter than one window contribute no rows.
pub fn window_features(ds: &SensorDataset, spec: &WindowSpec) -> Result<FeatureTable> {
    spec.validate()?;
    let per_subject: Vec<SubjectRows> = ds
        .subjects
        .par_iter()
        .map(|s| subject_windows(ds, s, spec))
        .collect::<Result<_>>()?;

    let mut groups = Vec::with_capacity(ds.sensors.len());
    let mut col = 0;
    for s in &ds.sensors {
        let width = s.channel_ids.len() * FEATURES_PER_CHANNEL;
        groups.push(ColumnGroup {
            sensor_id: s.sensor_id.clone(),
            columns: col..col + width,
        });
        col += width;
    }

    let n_rows: usize = per_subject.iter().map(|p| p.rows.len()).sum();
    if n_rows == 0 {
        return Err(Error::Empty(format!(
            "no windows of {} s fit dataset `{}`",
            spec.length_s, ds.name
        )));
    }
    let mut flat = Vec::with_capacity(n_rows * col);
    let mut subjects = Vec::with_capacity(n_rows);
    let mut labels = Vec::with_capacity(n_rows);
    let mut windows = Vec::with_capacity(n_rows);
    for p in per_subject {
        for row in p.rows {
            flat.extend(row);
            subjects.push(p.subject.clone());
        }
        labels.extend(p.labels);
        windows.extend(p.windows);
    }
    let rows = Array2::from_shape_vec((n_rows, col), flat).map_err(|e| Error::InvalidDataset(e.to_string()))?;
    FeatureTable::new(rows, subjects, labels, ds.class_set.clone(), groups, windows)
}

/// Per-column z-scoring fitted on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Standardizer {
    pub fn fit(table: &FeatureTable) -> Result<Self> {
        Self::fit_matrix(table.rows())
    }

    pub fn fit_matrix(x: &Array2<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::Empty("cannot fit a standardizer on zero rows".into()));
        }
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let std = x.std_axis(Axis(0), 0.0).mapv(|s| s.max(STD_FLOOR));
        Ok(Standardizer { mean, std })
    }

    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                actual: x.ncols(),
                context: "standardizer columns",
            });
        }
        Ok((x - &self.mean) / &self.std)
    }

    pub fn apply(&self, table: &FeatureTable) -> Result<FeatureTable> {
        table.with_matrix(self.transform(table.rows())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ChannelKey, Sample, SensorChannel, SensorSpec};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use std::collections::BTreeMap;

    #[test]
    fn stats_of_one_to_four() {
        let f = window_stats(&[1.0, 2.0, 3.0, 4.0]);
        assert_abs_diff_eq!(f[0], 2.5);
        assert_abs_diff_eq!(f[1], (5.0f64 / 4.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(f[2], 3.0);
        assert_abs_diff_eq!(f[3], 0.0);
    }

    #[test]
    fn stats_of_constant() {
        assert_eq!(window_stats(&[5.0, 5.0, 5.0]), [5.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn skewed_window_has_nonzero_mean_minus_median() {
        let f = window_stats(&[0.0, 0.0, 3.0]);
        assert_abs_diff_eq!(f[3], 1.0);
    }

    fn ramp_dataset(duration_s: f64, rate: f64, labels: Vec<LabelInterval>) -> SensorDataset {
        let n = (duration_s * rate).round() as usize;
        let samples: Vec<Sample> = (0..n).map(|i| Sample::valid(i as f64 / rate, i as f64)).collect();
        let mut channels = BTreeMap::new();
        for c in ["x", "y"] {
            channels.insert(
                ChannelKey::new("s1", "A", c),
                SensorChannel::new("A", c, rate, samples.clone()).unwrap(),
            );
        }
        SensorDataset {
            name: "ramp".into(),
            subjects: vec!["s1".into()],
            sensors: vec![SensorSpec {
                sensor_id: "A".into(),
                channel_ids: vec!["x".into(), "y".into()],
                sampling_rate_hz: rate,
                quality_tier: Default::default(),
            }],
            channels,
            labels: BTreeMap::from([("s1".to_string(), labels)]),
            class_set: vec!["p".into(), "q".into()],
        }
    }

    #[test]
    fn window_count_arithmetic() {
        let ds = ramp_dataset(10.0, 10.0, vec![]);
        let t = window_features(&ds, &WindowSpec::new(4.0, 2.0)).unwrap();
        assert_eq!(t.n_rows(), 4);
        let starts: Vec<f64> = t.window_meta().iter().map(|w| w.0).collect();
        assert_eq!(starts, vec![0.0, 2.0, 4.0, 6.0]);
        assert_eq!(t.n_cols(), 8);
        assert_eq!(t.column_groups()[0].columns, 0..8);
        assert!(t.label_of_row().iter().all(Option::is_none));
    }

    #[test]
    fn short_recording_yields_error_when_no_rows() {
        let ds = ramp_dataset(2.0, 10.0, vec![]);
        assert!(matches!(window_features(&ds, &WindowSpec::new(4.0, 1.0)), Err(Error::Empty(_))));
    }

    #[test]
    fn majority_and_strict_labels() {
        let labels = vec![
            LabelInterval { start: 0.0, end: 3.0, activity: 0 },
            LabelInterval { start: 3.0, end: 10.0, activity: 1 },
        ];
        let ds = ramp_dataset(10.0, 10.0, labels);
        let maj = window_features(&ds, &WindowSpec::new(4.0, 2.0)).unwrap();
        // [0,4): 3 s of p; [2,6): 1 s p + 3 s q; [4,8) and [6,10): q
        assert_eq!(maj.label_of_row(), &[Some(0), Some(1), Some(1), Some(1)]);
        let mut strict = WindowSpec::new(4.0, 2.0);
        strict.label_rule = LabelRule::Strict;
        let st = window_features(&ds, &strict).unwrap();
        assert_eq!(st.n_rows(), 2);
        assert_eq!(st.label_of_row(), &[Some(1), Some(1)]);
    }

    #[test]
    fn majority_tie_goes_to_earlier_interval() {
        let labels = vec![
            LabelInterval { start: 0.0, end: 2.0, activity: 1 },
            LabelInterval { start: 2.0, end: 4.0, activity: 0 },
        ];
        let ds = ramp_dataset(4.0, 10.0, labels);
        let t = window_features(&ds, &WindowSpec::new(4.0, 4.0)).unwrap();
        assert_eq!(t.label_of_row(), &[Some(1)]);
    }

    #[test]
    fn invalid_samples_drop_window() {
        let mut ds = ramp_dataset(8.0, 10.0, vec![]);
        let key = ChannelKey::new("s1", "A", "y");
        ds.channels.get_mut(&key).unwrap().samples[5] = Sample::missing(0.5);
        let t = window_features(&ds, &WindowSpec::new(4.0, 4.0)).unwrap();
        assert_eq!(t.n_rows(), 1);
        assert_eq!(t.window_meta()[0].0, 4.0);
        let mut lenient = WindowSpec::new(4.0, 4.0);
        lenient.min_valid_fraction = 0.9;
        assert_eq!(window_features(&ds, &lenient).unwrap().n_rows(), 2);
    }

    #[test]
    fn shift_equivariance() {
        let ds = ramp_dataset(10.0, 10.0, vec![]);
        let mut shifted = ds.clone();
        for ch in shifted.channels.values_mut() {
            for s in &mut ch.samples {
                s.t += 1000.0;
            }
        }
        let spec = WindowSpec::new(3.0, 1.5);
        let a = window_features(&ds, &spec).unwrap();
        let b = window_features(&shifted, &spec).unwrap();
        assert_eq!(a.rows(), b.rows());
    }

    #[test]
    fn standardizer_two_point() {
        let x = array![[0.0, 7.0], [2.0, 7.0]];
        let st = Standardizer::fit_matrix(&x).unwrap();
        assert_eq!(st.mean, array![1.0, 7.0]);
        assert_eq!(st.std[0], 1.0);
        let z = st.transform(&x).unwrap();
        assert_eq!(z, array![[-1.0, 0.0], [1.0, 0.0]]);
    }

    #[test]
    fn standardizer_rejects_wrong_width() {
        let st = Standardizer::fit_matrix(&Array2::zeros((3, 4))).unwrap();
        assert!(st.transform(&Array2::zeros((3, 5))).is_err());
    }

    #[test]
    fn presets() {
        assert_eq!(WindowSpec::pamap().length_s, 5.12);
        assert_eq!(WindowSpec::cooking().step_s, 0.25);
        assert_eq!(WindowSpec::opportunity_locomotion().window_count(3.0), 1);
        assert_eq!(WindowSpec::opportunity_high_level().window_count(60.0), 3);
    }
}
