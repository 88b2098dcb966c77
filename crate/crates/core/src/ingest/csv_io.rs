//! Canonical CSV schema.
//!
//! Samples are stored long-form, one value per row:
//! `timestamp,subject,sensor_id,channel_id,value`, where `value` may be the
//! literal `NaN` for a missing reading. Labels use `subject,start,end,activity`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::data::{ChannelKey, LabelInterval, Sample, SensorChannel, SensorDataset};
use crate::error::{Error, Result};

use super::manifest::DatasetManifest;

pub const SAMPLE_HEADER: [&str; 5] = ["timestamp", "subject", "sensor_id", "channel_id", "value"];
pub const LABEL_HEADER: [&str; 4] = ["subject", "start", "end", "activity"];

type ParsedSamples = BTreeMap<ChannelKey, Vec<Sample>>;

fn schema(file: &Path, line: u64, column: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        file: file.to_path_buf(),
        line,
        column: column.to_owned(),
        message: message.into(),
    }
}

fn check_header(path: &Path, reader: &mut csv::Reader<File>, expected: &[&str]) -> Result<()> {
    let header = reader.headers()?.clone();
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found != expected {
        return Err(schema(
            path,
            1,
            "header",
            format!("expected `{}`, found `{}`", expected.join(","), found.join(",")),
        ));
    }
    Ok(())
}

fn parse_real(path: &Path, line: u64, column: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| schema(path, line, column, format!("`{raw}` is not a decimal number")))?;
    if !v.is_finite() {
        return Err(schema(path, line, column, format!("`{raw}` is not finite")));
    }
    Ok(v)
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn read_sample_file(path: &Path, manifest: &DatasetManifest) -> Result<ParsedSamples> {
    let mut reader = open(path)?;
    check_header(path, &mut reader, &SAMPLE_HEADER)?;
    let mut out: ParsedSamples = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != SAMPLE_HEADER.len() {
            return Err(schema(
                path,
                line,
                "record",
                format!("expected {} fields, found {}", SAMPLE_HEADER.len(), record.len()),
            ));
        }
        let t = parse_real(path, line, "timestamp", &record[0])?;
        let subject = record[1].trim();
        let sensor_id = record[2].trim();
        let channel_id = record[3].trim();
        if subject.is_empty() {
            return Err(schema(path, line, "subject", "empty subject"));
        }
        let sensor = manifest
            .sensors
            .iter()
            .find(|s| s.sensor_id == sensor_id)
            .ok_or_else(|| schema(path, line, "sensor_id", format!("undeclared sensor `{sensor_id}`")))?;
        if !sensor.channel_ids.iter().any(|c| c == channel_id) {
            return Err(schema(
                path,
                line,
                "channel_id",
                format!("channel `{channel_id}` not declared for sensor `{sensor_id}`"),
            ));
        }
        let raw = record[4].trim();
        let sample = if raw == "NaN" {
            Sample::missing(t)
        } else {
            Sample::valid(t, parse_real(path, line, "value", raw)?)
        };
        let samples = out
            .entry(ChannelKey::new(subject, sensor_id, channel_id))
            .or_default();
        if let Some(prev) = samples.last() {
            if !(t > prev.t) {
                return Err(Error::TimestampRegression {
                    file: path.to_path_buf(),
                    line,
                    timestamp: t,
                    subject: subject.to_owned(),
                    sensor_id: sensor_id.to_owned(),
                    channel_id: channel_id.to_owned(),
                });
            }
        }
        samples.push(sample);
    }
    Ok(out)
}

fn read_label_file(path: &Path, class_set: &[String]) -> Result<BTreeMap<String, Vec<LabelInterval>>> {
    let mut reader = open(path)?;
    check_header(path, &mut reader, &LABEL_HEADER)?;
    let mut out: BTreeMap<String, Vec<LabelInterval>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != LABEL_HEADER.len() {
            return Err(schema(
                path,
                line,
                "record",
                format!("expected {} fields, found {}", LABEL_HEADER.len(), record.len()),
            ));
        }
        let subject = record[0].trim().to_owned();
        let start = parse_real(path, line, "start", &record[1])?;
        let end = parse_real(path, line, "end", &record[2])?;
        let name = record[3].trim();
        let activity = class_set
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| schema(path, line, "activity", format!("`{name}` is not in class_set")))?;
        if !(end > start) {
            return Err(schema(path, line, "end", format!("end {end} is not after start {start}")));
        }
        out.entry(subject).or_default().push(LabelInterval { start, end, activity });
    }
    for intervals in out.values_mut() {
        intervals.sort_by(|a, b| a.start.total_cmp(&b.start));
    }
    Ok(out)
}

/// Parses every file of a manifest without checking cross-file dataset invariants.
pub fn read_dataset(manifest: &DatasetManifest) -> Result<SensorDataset> {
    let paths = manifest.sample_paths();
    let parsed: Vec<ParsedSamples> = paths
        .par_iter()
        .map(|p| read_sample_file(p, manifest))
        .collect::<Result<_>>()?;

    let mut merged: ParsedSamples = BTreeMap::new();
    for (path, file) in paths.iter().zip(parsed) {
        for (key, samples) in file {
            let dst = merged.entry(key.clone()).or_default();
            if let (Some(prev), Some(next)) = (dst.last(), samples.first()) {
                if !(next.t > prev.t) {
                    return Err(Error::TimestampRegression {
                        file: path.clone(),
                        line: 0,
                        timestamp: next.t,
                        subject: key.subject,
                        sensor_id: key.sensor_id,
                        channel_id: key.channel_id,
                    });
                }
            }
            dst.extend(samples);
        }
    }

    let labels = read_label_file(&manifest.label_path(), &manifest.class_set)?;

    let mut subjects: Vec<String> = merged.keys().map(|k| k.subject.clone()).collect();
    subjects.dedup();
    let mut channels = BTreeMap::new();
    for (key, samples) in merged {
        let spec = manifest
            .sensors
            .iter()
            .find(|s| s.sensor_id == key.sensor_id)
            .expect("sensor checked while parsing");
        let ch = SensorChannel::new(&key.sensor_id, &key.channel_id, spec.sampling_rate_hz, samples)?;
        channels.insert(key, ch);
    }
    for spec in &manifest.sensors {
        for c in &spec.channel_ids {
            if !channels.keys().any(|k| k.sensor_id == spec.sensor_id && &k.channel_id == c) {
                return Err(Error::InvalidDataset(format!(
                    "declared channel {}/{c} does not appear in any sample file",
                    spec.sensor_id
                )));
            }
        }
    }

    Ok(SensorDataset {
        name: manifest.name.clone(),
        subjects,
        sensors: manifest.sensors.clone(),
        channels,
        labels,
        class_set: manifest.class_set.clone(),
    })
}

/// Loads a dataset and enforces every dataset invariant.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<SensorDataset> {
    let ds = read_dataset(manifest)?;
    let issues = ds.validate();
    if !issues.is_empty() {
        return Err(Error::InvalidDataset(issues.join("; ")));
    }
    Ok(ds)
}

/// Writes `samples.csv`, `labels.csv` and `manifest.toml` into `dir`.
pub fn save_dataset(ds: &SensorDataset, dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let sample_path = dir.join("samples.csv");
    let mut w = csv::Writer::from_path(&sample_path)?;
    w.write_record(SAMPLE_HEADER)?;
    for (key, ch) in &ds.channels {
        for s in &ch.samples {
            let value = if s.valid { s.value.to_string() } else { "NaN".to_owned() };
            w.write_record([
                s.t.to_string().as_str(),
                &key.subject,
                &key.sensor_id,
                &key.channel_id,
                &value,
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(&sample_path, e))?;

    let label_path = dir.join("labels.csv");
    let mut w = csv::Writer::from_path(&label_path)?;
    w.write_record(LABEL_HEADER)?;
    for (subject, intervals) in &ds.labels {
        for iv in intervals {
            w.write_record([
                subject.as_str(),
                &iv.start.to_string(),
                &iv.end.to_string(),
                &ds.class_set[iv.activity],
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(&label_path, e))?;

    let manifest = DatasetManifest {
        name: ds.name.clone(),
        sample_files: vec![PathBuf::from("samples.csv")],
        label_file: PathBuf::from("labels.csv"),
        class_set: ds.class_set.clone(),
        sensors: ds.sensors.clone(),
        base_dir: dir.to_path_buf(),
    };
    let manifest_path = dir.join("manifest.toml");
    let mut f = File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    f.write_all(manifest.to_toml()?.as_bytes())
        .map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest)
}
