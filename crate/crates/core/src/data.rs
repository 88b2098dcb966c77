//! Canonical in-memory data model: raw sensor recordings and windowed feature tables.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One reading of one channel. Invalid samples carry `NaN` as their value.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub value: f64,
    pub valid: bool,
}

impl Sample {
    pub fn valid(t: f64, value: f64) -> Self {
        Sample { t, value, valid: true }
    }

    pub fn missing(t: f64) -> Self {
        Sample {
            t,
            value: f64::NAN,
            valid: false,
        }
    }
}

impl PartialEq for Sample {
    fn eq(&self, other: &Self) -> bool {
        self.t == other.t
            && self.valid == other.valid
            && (!self.valid || self.value.to_bits() == other.value.to_bits())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum QualityTier {
    #[default]
    High,
    Low,
}

/// Declared physical sensor: device and placement, with its channel layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub sensor_id: String,
    pub channel_ids: Vec<String>,
    pub sampling_rate_hz: f64,
    #[serde(default)]
    pub quality_tier: QualityTier,
}

/// Time series of a single channel for one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorChannel {
    pub sensor_id: String,
    pub channel_id: String,
    pub sampling_rate_hz: f64,
    pub samples: Vec<Sample>,
}

impl SensorChannel {
    /// Builds a channel, checking the rate and strict timestamp ordering.
    pub fn new(
        sensor_id: impl Into<String>,
        channel_id: impl Into<String>,
        sampling_rate_hz: f64,
        samples: Vec<Sample>,
    ) -> Result<Self> {
        let ch = SensorChannel {
            sensor_id: sensor_id.into(),
            channel_id: channel_id.into(),
            sampling_rate_hz,
            samples,
        };
        ch.check()?;
        Ok(ch)
    }

    fn check(&self) -> Result<()> {
        if !(self.sampling_rate_hz > 0.0 && self.sampling_rate_hz.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "channel {}/{} has non-positive sampling rate {}",
                self.sensor_id, self.channel_id, self.sampling_rate_hz
            )));
        }
        for pair in self.samples.windows(2) {
            if !(pair[1].t > pair[0].t) {
                return Err(Error::InvalidDataset(format!(
                    "channel {}/{}: timestamps not strictly increasing at t = {}",
                    self.sensor_id, self.channel_id, pair[1].t
                )));
            }
        }
        Ok(())
    }

    /// `[first timestamp, last timestamp + one sample period)`, or `None` when empty.
    pub fn time_range(&self) -> Option<(f64, f64)> {
        let first = self.samples.first()?.t;
        let last = self.samples.last()?.t;
        Some((first, last + 1.0 / self.sampling_rate_hz))
    }
}

/// Labeled activity span `[start, end)` for one subject; `activity` indexes the class set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelInterval {
    pub start: f64,
    pub end: f64,
    pub activity: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChannelKey {
    pub subject: String,
    pub sensor_id: String,
    pub channel_id: String,
}

impl ChannelKey {
    pub fn new(subject: &str, sensor_id: &str, channel_id: &str) -> Self {
        ChannelKey {
            subject: subject.to_owned(),
            sensor_id: sensor_id.to_owned(),
            channel_id: channel_id.to_owned(),
        }
    }
}

/// Raw multi-subject, multi-sensor recording with activity labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorDataset {
    pub name: String,
    /// Sorted, unique.
    pub subjects: Vec<String>,
    /// Declaration order; this order defines the column-group order of feature tables.
    pub sensors: Vec<SensorSpec>,
    pub channels: BTreeMap<ChannelKey, SensorChannel>,
    pub labels: BTreeMap<String, Vec<LabelInterval>>,
    pub class_set: Vec<String>,
}

impl SensorDataset {
    pub fn sensor(&self, sensor_id: &str) -> Option<&SensorSpec> {
        self.sensors.iter().find(|s| s.sensor_id == sensor_id)
    }

    pub fn channel(&self, subject: &str, sensor_id: &str, channel_id: &str) -> Option<&SensorChannel> {
        self.channels.get(&ChannelKey::new(subject, sensor_id, channel_id))
    }

    /// Recording span of a subject across all its channels.
    pub fn subject_range(&self, subject: &str) -> Option<(f64, f64)> {
        self.channels
            .iter()
            .filter(|(k, _)| k.subject == subject)
            .filter_map(|(_, ch)| ch.time_range())
            .fold(None, |acc, (a, b)| match acc {
                None => Some((a, b)),
                Some((lo, hi)) => Some((f64::min(lo, a), f64::max(hi, b))),
            })
    }

    /// Checks every dataset invariant and returns one message per violation.
    pub fn validate(&self) -> Vec<String> {
        let mut issues = Vec::new();
        for subject in &self.subjects {
            for sensor in &self.sensors {
                for channel_id in &sensor.channel_ids {
                    match self.channel(subject, &sensor.sensor_id, channel_id) {
                        None => issues.push(format!(
                            "subject {subject}: declared channel {}/{channel_id} has no samples",
                            sensor.sensor_id
                        )),
                        Some(ch) => {
                            if let Err(e) = ch.check() {
                                issues.push(format!("subject {subject}: {e}"));
                            }
                        }
                    }
                }
            }
        }
        for (subject, intervals) in &self.labels {
            if !self.subjects.contains(subject) {
                issues.push(format!("labels reference unknown subject {subject}"));
                continue;
            }
            let range = self.subject_range(subject);
            let mut sorted: Vec<&LabelInterval> = intervals.iter().collect();
            sorted.sort_by(|a, b| a.start.total_cmp(&b.start));
            for iv in &sorted {
                if !(iv.end > iv.start) {
                    issues.push(format!(
                        "subject {subject}: empty label interval [{}, {})",
                        iv.start, iv.end
                    ));
                }
                if iv.activity >= self.class_set.len() {
                    issues.push(format!(
                        "subject {subject}: label interval [{}, {}) has activity index {} outside class set",
                        iv.start, iv.end, iv.activity
                    ));
                }
                if let Some((lo, hi)) = range {
                    if iv.start < lo || iv.end > hi + 1e-9 {
                        issues.push(format!(
                            "subject {subject}: label interval [{}, {}) lies outside recording [{lo}, {hi})",
                            iv.start, iv.end
                        ));
                    }
                }
            }
            for pair in sorted.windows(2) {
                if pair[1].start < pair[0].end {
                    issues.push(format!(
                        "subject {subject}: label intervals [{}, {}) and [{}, {}) overlap",
                        pair[0].start, pair[0].end, pair[1].start, pair[1].end
                    ));
                }
            }
        }
        issues
    }
}

/// Contiguous block of feature columns produced by one sensor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnGroup {
    pub sensor_id: String,
    pub columns: Range<usize>,
}

/// Windowed feature matrix, one row per window.
///
/// Selecting a single sensor group from a multi-sensor table yields the
/// single-sensor view of the same windows, so the two stay row-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    rows: Array2<f64>,
    subjects: Vec<String>,
    labels: Vec<Option<usize>>,
    class_set: Vec<String>,
    groups: Vec<ColumnGroup>,
    windows: Vec<(f64, f64)>,
}

impl FeatureTable {
    pub fn new(
        rows: Array2<f64>,
        subjects: Vec<String>,
        labels: Vec<Option<usize>>,
        class_set: Vec<String>,
        groups: Vec<ColumnGroup>,
        windows: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let n = rows.nrows();
        if subjects.len() != n || labels.len() != n || windows.len() != n {
            return Err(Error::InvalidDataset(format!(
                "feature table metadata lengths ({}, {}, {}) do not match {n} rows",
                subjects.len(),
                labels.len(),
                windows.len()
            )));
        }
        let mut next = 0;
        for g in &groups {
            if g.columns.start != next || g.columns.end < g.columns.start {
                return Err(Error::InvalidDataset(format!(
                    "column group {} is not contiguous with its predecessor",
                    g.sensor_id
                )));
            }
            next = g.columns.end;
        }
        if next != rows.ncols() {
            return Err(Error::InvalidDataset(format!(
                "column groups cover {next} columns, table has {}",
                rows.ncols()
            )));
        }
        let unique: BTreeSet<&str> = groups.iter().map(|g| g.sensor_id.as_str()).collect();
        if unique.len() != groups.len() {
            return Err(Error::InvalidDataset("duplicate sensor group".into()));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature table"));
        }
        if labels.iter().flatten().any(|&l| l >= class_set.len()) {
            return Err(Error::InvalidDataset("row label outside class set".into()));
        }
        let mut seen = BTreeSet::new();
        for (i, s) in subjects.iter().enumerate() {
            let starts_run = i == 0 || subjects[i - 1] != *s;
            if starts_run && !seen.insert(s.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "rows of subject {s} are not contiguous"
                )));
            }
        }
        Ok(FeatureTable {
            rows,
            subjects,
            labels,
            class_set,
            groups,
            windows,
        })
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.rows.ncols()
    }

    pub fn subject_of_row(&self) -> &[String] {
        &self.subjects
    }

    pub fn label_of_row(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn class_set(&self) -> &[String] {
        &self.class_set
    }

    pub fn column_groups(&self) -> &[ColumnGroup] {
        &self.groups
    }

    pub fn window_meta(&self) -> &[(f64, f64)] {
        &self.windows
    }

    pub fn sensor_ids(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.sensor_id.clone()).collect()
    }

    pub fn group(&self, sensor_id: &str) -> Option<&ColumnGroup> {
        self.groups.iter().find(|g| g.sensor_id == sensor_id)
    }

    /// Distinct subjects in row order.
    pub fn subject_ids(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.subjects {
            if out.last() != Some(s) {
                out.push(s.clone());
            }
        }
        out
    }

    /// Same rows and metadata with a replacement matrix of identical shape.
    pub fn with_matrix(&self, rows: Array2<f64>) -> Result<FeatureTable> {
        if rows.dim() != self.rows.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.rows.ncols(),
                actual: rows.ncols(),
                context: "replacement feature matrix",
            });
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature table"));
        }
        Ok(FeatureTable {
            rows,
            ..self.clone()
        })
    }

    /// Keeps only the columns of the requested sensor groups, in the requested order.
    pub fn select_sensor_columns<S: AsRef<str>>(&self, sensor_ids: &[S]) -> Result<FeatureTable> {
        let mut groups = Vec::with_capacity(sensor_ids.len());
        let mut columns = Vec::new();
        for id in sensor_ids {
            let id = id.as_ref();
            let g = self.group(id).ok_or_else(|| Error::UnknownSensor {
                missing: id.to_owned(),
                available: self.sensor_ids(),
            })?;
            let start = columns.len();
            columns.extend(g.columns.clone());
            groups.push(ColumnGroup {
                sensor_id: id.to_owned(),
                columns: start..columns.len(),
            });
        }
        let rows = self.rows.select(Axis(1), &columns);
        FeatureTable::new(
            rows,
            self.subjects.clone(),
            self.labels.clone(),
            self.class_set.clone(),
            groups,
            self.windows.clone(),
        )
    }

    /// Subset of rows, order preserved as given.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureTable {
        FeatureTable {
            rows: self.rows.select(Axis(0), indices),
            subjects: indices.iter().map(|&i| self.subjects[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_set: self.class_set.clone(),
            groups: self.groups.clone(),
            windows: indices.iter().map(|&i| self.windows[i]).collect(),
        }
    }

    /// Rows that carry a label.
    pub fn labeled(&self) -> FeatureTable {
        let idx: Vec<usize> = (0..self.n_rows()).filter(|&i| self.labels[i].is_some()).collect();
        self.select_rows(&idx)
    }

    /// Rows without a label.
    pub fn unlabeled(&self) -> FeatureTable {
        let idx: Vec<usize> = (0..self.n_rows()).filter(|&i| self.labels[i].is_none()).collect();
        self.select_rows(&idx)
    }

    /// Labels of a fully labeled table.
    pub fn label_indices(&self) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .map(|l| l.ok_or_else(|| Error::InvalidDataset("row without label where labels are required".into())))
            .collect()
    }

    /// Partition into (all other subjects, `held_out`), preserving row order in both parts.
    pub fn split_by_subject(&self, held_out: &str) -> Result<(FeatureTable, FeatureTable)> {
        if !self.subjects.iter().any(|s| s == held_out) {
            return Err(Error::UnknownSubject(held_out.to_owned()));
        }
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..self.n_rows()).partition(|&i| self.subjects[i] == held_out);
        Ok((self.select_rows(&train), self.select_rows(&test)))
    }

    /// Stacks tables with identical column layout and class set.
    pub fn concat(tables: &[&FeatureTable]) -> Result<FeatureTable> {
        let first = tables
            .first()
            .ok_or_else(|| Error::Empty("no tables to concatenate".into()))?;
        for t in tables {
            if t.groups != first.groups || t.class_set != first.class_set {
                return Err(Error::InvalidDataset(
                    "cannot concatenate tables with different layouts".into(),
                ));
            }
        }
        let views: Vec<_> = tables.iter().map(|t| t.rows.view()).collect();
        let rows = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| Error::InvalidDataset(e.to_string()))?;
        FeatureTable::new(
            rows,
            tables.iter().flat_map(|t| t.subjects.iter().cloned()).collect(),
            tables.iter().flat_map(|t| t.labels.iter().copied()).collect(),
            first.class_set.clone(),
            first.groups.clone(),
            tables.iter().flat_map(|t| t.windows.iter().copied()).collect(),
        )
    }

    /// Columns of one group as a standalone matrix.
    pub fn group_matrix(&self, sensor_id: &str) -> Result<Array2<f64>> {
        let g = self.group(sensor_id).ok_or_else(|| Error::UnknownSensor {
            missing: sensor_id.to_owned(),
            available: self.sensor_ids(),
        })?;
        Ok(self.rows.slice(s![.., g.columns.clone()]).to_owned())
    }
}
