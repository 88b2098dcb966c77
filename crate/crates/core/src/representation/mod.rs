//! Shared representation space learned from multi-sensor features.
//!
//! Each sensor group is clustered independently with k-means; a row is encoded
//! as the concatenation of its per-sensor cluster memberships, giving
//! `d = sum of k over sensors` output dimensions.

pub mod kmeans;

use ndarray::{s, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureTable;
use crate::error::{Error, Result};
use crate::seed::RngSeed;

pub use kmeans::{KMeansConfig, KMeansFit};

pub const DEFAULT_K_PER_SENSOR: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EncodingMode {
    /// One-hot on the nearest centroid.
    #[default]
    Hard,
    /// Softmax of negative squared distances.
    Soft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorClusters {
    pub sensor_id: String,
    /// `k x width` in the sensor group's column order.
    pub centroids: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationModel {
    pub groups: Vec<SensorClusters>,
    pub k_per_sensor: usize,
    pub encoding: EncodingMode,
}

impl RepresentationModel {
    pub fn dim(&self) -> usize {
        self.groups.iter().map(|g| g.centroids.nrows()).sum()
    }

    pub fn sensor_ids(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.sensor_id.clone()).collect()
    }

    /// Encodes each row into the representation space (`rows x d`).
    ///
    /// Groups are looked up by sensor id, so extra or reordered groups in the
    /// table are ignored.
    pub fn encode(&self, table: &FeatureTable) -> Result<Array2<f64>> {
        let mut out = Array2::<f64>::zeros((table.n_rows(), self.dim()));
        let mut offset = 0;
        for g in &self.groups {
            let cols = table
                .group(&g.sensor_id)
                .ok_or_else(|| Error::UnknownSensor {
                    missing: g.sensor_id.clone(),
                    available: table.sensor_ids(),
                })?
                .columns
                .clone();
            if cols.len() != g.centroids.ncols() {
                return Err(Error::DimensionMismatch {
                    expected: g.centroids.ncols(),
                    actual: cols.len(),
                    context: "sensor group width",
                });
            }
            let k = g.centroids.nrows();
            let x = table.rows().slice(s![.., cols]);
            for (i, row) in x.outer_iter().enumerate() {
                let block = out.slice_mut(s![i, offset..offset + k]);
                encode_block(row, &g.centroids, self.encoding, block);
            }
            offset += k;
        }
        Ok(out)
    }
}

fn encode_block(
    row: ndarray::ArrayView1<f64>,
    centroids: &Array2<f64>,
    mode: EncodingMode,
    mut block: ndarray::ArrayViewMut1<f64>,
) {
    match mode {
        EncodingMode::Hard => {
            let (j, _) = kmeans::nearest(row, centroids);
            block[j] = 1.0;
        }
        EncodingMode::Soft => {
            let d2: Vec<f64> = centroids.outer_iter().map(|c| kmeans::sq_dist(row, c)).collect();
            let min = d2.iter().copied().fold(f64::INFINITY, f64::min);
            let mut total = 0.0;
            for (j, d) in d2.iter().enumerate() {
                let e = (min - d).exp();
                block[j] = e;
                total += e;
            }
            block.mapv_inplace(|v| v / total);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct RepresentationConfig {
    pub k_per_sensor: usize,
    pub encoding: EncodingMode,
    pub kmeans: KMeansConfig,
}

impl Default for RepresentationConfig {
    fn default() -> Self {
        RepresentationConfig {
            k_per_sensor: DEFAULT_K_PER_SENSOR,
            encoding: EncodingMode::Hard,
            kmeans: KMeansConfig::default(),
        }
    }
}

/// Clusters every sensor group of an (already standardized) multi-sensor table.
///
/// Labels are not used; unlabeled rows are as good as labeled ones here.
pub fn learn_representation(
    table: &FeatureTable,
    cfg: &RepresentationConfig,
    seed: RngSeed,
) -> Result<RepresentationModel> {
    let k = cfg.k_per_sensor;
    if k == 0 {
        return Err(Error::Config("k_per_sensor must be positive".into()));
    }
    if table.rows().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("representation input"));
    }
    let groups: Vec<SensorClusters> = table
        .column_groups()
        .par_iter()
        .map(|g| {
            let x = table.rows().slice(s![.., g.columns.clone()]);
            let distinct = kmeans::distinct_rows(x);
            if distinct < k {
                return Err(Error::TooFewDistinctRows {
                    sensor_id: g.sensor_id.clone(),
                    distinct,
                    k,
                });
            }
            let fit = kmeans::kmeans(x, k, &cfg.kmeans, seed.derive(&g.sensor_id));
            Ok(SensorClusters {
                sensor_id: g.sensor_id.clone(),
                centroids: fit.centroids,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RepresentationModel {
        groups,
        k_per_sensor: k,
        encoding: cfg.encoding,
    })
}
