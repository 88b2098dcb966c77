//! Versioned JSON persistence for models and reports.
//!
//! Every file is an envelope `{"format_version", "kind", "body"}`. Floats are
//! written with shortest round-trip formatting, so save then load is bit-exact.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::classify::{BoostedEnsemble, LinearClassifier};
use crate::error::{Error, Result};
use crate::eval::{PipelineModel, RunReport};
use crate::features::Standardizer;
use crate::mapping::MappingModel;
use crate::representation::RepresentationModel;

pub const FORMAT_VERSION: u32 = 1;

/// A type with a stable name in the envelope.
pub trait Persist: Serialize + DeserializeOwned {
    const KIND: &'static str;
}

impl Persist for RepresentationModel {
    const KIND: &'static str = "representation";
}
impl Persist for MappingModel {
    const KIND: &'static str = "mapping";
}
impl Persist for LinearClassifier {
    const KIND: &'static str = "classifier";
}
impl Persist for BoostedEnsemble {
    const KIND: &'static str = "boosted_ensemble";
}
impl Persist for Standardizer {
    const KIND: &'static str = "standardizer";
}
impl Persist for PipelineModel {
    const KIND: &'static str = "pipeline";
}
impl Persist for RunReport {
    const KIND: &'static str = "run_report";
}

#[derive(Serialize)]
struct EnvelopeOut<'a, T> {
    format_version: u32,
    kind: &'a str,
    body: &'a T,
}

/// Envelope header with the body left unparsed.
#[derive(Debug, Clone, Deserialize)]
pub struct Envelope {
    pub format_version: u32,
    pub kind: String,
    pub body: serde_json::Value,
}

pub fn to_json<T: Persist>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&EnvelopeOut {
        format_version: FORMAT_VERSION,
        kind: T::KIND,
        body: value,
    })?;
    s.push('\n');
    Ok(s)
}

pub fn read_envelope(text: &str) -> Result<Envelope> {
    let env: Envelope = serde_json::from_str(text)?;
    if env.format_version != FORMAT_VERSION {
        return Err(Error::FormatVersion {
            found: env.format_version,
            expected: FORMAT_VERSION,
        });
    }
    Ok(env)
}

pub fn from_json<T: Persist>(text: &str) -> Result<T> {
    let env = read_envelope(text)?;
    if env.kind != T::KIND {
        return Err(Error::ModelKind {
            found: env.kind,
            expected: T::KIND.into(),
        });
    }
    Ok(serde_json::from_value(env.body)?)
}

pub fn save<T: Persist>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_json(value)?).map_err(|e| Error::io(path, e))
}

pub fn load<T: Persist>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::representation::{EncodingMode, SensorClusters};
    use ndarray::array;

    fn rep() -> RepresentationModel {
        RepresentationModel {
            groups: vec![SensorClusters {
                sensor_id: "A".into(),
                centroids: array![[0.1, 1.0 / 3.0], [-2.5e-300, f64::MAX]],
            }],
            k_per_sensor: 2,
            encoding: EncodingMode::Soft,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = rep();
        let back: RepresentationModel = from_json(&to_json(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        for (a, b) in m.groups[0].centroids.iter().zip(back.groups[0].centroids.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn wrong_kind_and_version_rejected() {
        let text = to_json(&rep()).unwrap();
        assert!(matches!(from_json::<MappingModel>(&text), Err(Error::ModelKind { .. })));
        let bumped = text.replace("\"format_version\": 1", "\"format_version\": 9");
        assert!(matches!(
            from_json::<RepresentationModel>(&bumped),
            Err(Error::FormatVersion { found: 9, .. })
        ));
    }
}
