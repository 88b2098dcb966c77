use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::SensorSpec;
use crate::error::{Error, Result};

/// Describes a dataset on disk in the canonical CSV layout.
///
/// Relative file paths are resolved against the directory holding the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    pub sample_files: Vec<PathBuf>,
    pub label_file: PathBuf,
    pub class_set: Vec<String>,
    pub sensors: Vec<SensorSpec>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: DatasetManifest = toml::from_str(&text)?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        manifest.check()?;
        Ok(manifest)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn resolve(&self, file: &Path) -> PathBuf {
        if file.is_absolute() {
            file.to_path_buf()
        } else {
            self.base_dir.join(file)
        }
    }

    pub fn sample_paths(&self) -> Vec<PathBuf> {
        self.sample_files.iter().map(|f| self.resolve(f)).collect()
    }

    pub fn label_path(&self) -> PathBuf {
        self.resolve(&self.label_file)
    }

    fn check(&self) -> Result<()> {
        if self.sensors.is_empty() {
            return Err(Error::Config(format!("manifest `{}` declares no sensors", self.name)));
        }
        if self.sample_files.is_empty() {
            return Err(Error::Config(format!("manifest `{}` lists no sample files", self.name)));
        }
        for s in &self.sensors {
            if s.channel_ids.is_empty() {
                return Err(Error::Config(format!("sensor {} declares no channels", s.sensor_id)));
            }
            if !(s.sampling_rate_hz > 0.0) {
                return Err(Error::Config(format!(
                    "sensor {} has non-positive sampling rate",
                    s.sensor_id
                )));
            }
        }
        let mut ids: Vec<&str> = self.sensors.iter().map(|s| s.sensor_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.sensors.len() {
            return Err(Error::Config("duplicate sensor_id in manifest".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::QualityTier;

    #[test]
    fn parses_and_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.toml");
        std::fs::write(
            &path,
            r#"
name = "demo"
sample_files = ["a.csv", "/abs/b.csv"]
label_file = "labels.csv"
class_set = ["walk", "sit"]

[[sensors]]
sensor_id = "RLA"
channel_ids = ["acc_x", "acc_y", "acc_z"]
sampling_rate_hz = 30.0

[[sensors]]
sensor_id = "HIP"
channel_ids = ["acc_x"]
sampling_rate_hz = 30.0
quality_tier = "low"
"#,
        )
        .unwrap();
        let m = DatasetManifest::from_path(&path).unwrap();
        assert_eq!(m.sample_paths()[0], dir.path().join("a.csv"));
        assert_eq!(m.sample_paths()[1], PathBuf::from("/abs/b.csv"));
        assert_eq!(m.sensors[0].quality_tier, QualityTier::High);
        assert_eq!(m.sensors[1].quality_tier, QualityTier::Low);
    }

    #[test]
    fn rejects_duplicate_sensor() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.toml");
        std::fs::write(
            &path,
            r#"
name = "dup"
sample_files = ["a.csv"]
label_file = "l.csv"
class_set = []
[[sensors]]
sensor_id = "A"
channel_ids = ["x"]
sampling_rate_hz = 1.0
[[sensors]]
sensor_id = "A"
channel_ids = ["y"]
sampling_rate_hz = 1.0
"#,
        )
        .unwrap();
        assert!(DatasetManifest::from_path(&path).is_err());
    }
}
