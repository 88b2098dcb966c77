//! Leave-one-subject-out experiments over the six algorithm variants.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{fit_boosted, fit_classifier, BoostedEnsemble, Classifier, ClassifierConfig, LinearClassifier};
use crate::data::{ColumnGroup, FeatureTable, QualityTier, SensorDataset};
use crate::error::{Error, Result};
use crate::features::{window_features, Standardizer, WindowSpec};
use crate::ingest::{generate_synthetic, impute_missing, load_dataset, DatasetManifest, SyntheticSpec, DEFAULT_MAX_GAP_S};
use crate::mapping::{fit_mapping, MappingConfig, MappingKind, MappingModel};
use crate::representation::{learn_representation, EncodingMode, RepresentationConfig, RepresentationModel};
use crate::seed::RngSeed;

use super::metrics::{ClassMetrics, ConfusionMatrix};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Classifier trained and tested on the test sensor's own features.
    Trad,
    /// Classifier on the multi-sensor cluster encoding at train and test time.
    Clusters,
    LinR,
    LogR,
    LinB,
    LogB,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Trad,
        Variant::Clusters,
        Variant::LinR,
        Variant::LogR,
        Variant::LinB,
        Variant::LogB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Trad => "Trad",
            Variant::Clusters => "Clusters",
            Variant::LinR => "LinR",
            Variant::LogR => "LogR",
            Variant::LinB => "LinB",
            Variant::LogB => "LogB",
        }
    }

    pub fn mapping_kind(self) -> Option<MappingKind> {
        match self {
            Variant::LinR | Variant::LinB => Some(MappingKind::Linear),
            Variant::LogR | Variant::LogB => Some(MappingKind::Logistic),
            Variant::Trad | Variant::Clusters => None,
        }
    }

    pub fn boosted(self) -> bool {
        matches!(self, Variant::LinB | Variant::LogB)
    }

    pub fn uses_representation(self) -> bool {
        self != Variant::Trad
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    /// Path to a dataset manifest, relative to the experiment config file.
    Manifest(PathBuf),
    Synthetic(SyntheticSpec),
}

/// Which training rows feed representation and mapping learning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UnlabeledPolicy {
    /// Labeled and unlabeled training rows together.
    #[default]
    Concat,
    /// Only unlabeled training rows.
    UnlabeledOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct MappingSettings {
    pub linear_lambda: f64,
    pub logistic_lambda: f64,
    pub max_epochs: usize,
    pub grad_tol: f64,
}

impl Default for MappingSettings {
    fn default() -> Self {
        let lin = MappingConfig::linear();
        MappingSettings {
            linear_lambda: lin.lambda,
            logistic_lambda: MappingConfig::logistic().lambda,
            max_epochs: lin.max_epochs,
            grad_tol: lin.grad_tol,
        }
    }
}

impl MappingSettings {
    pub fn config(&self, kind: MappingKind) -> MappingConfig {
        MappingConfig {
            kind,
            lambda: match kind {
                MappingKind::Linear => self.linear_lambda,
                MappingKind::Logistic => self.logistic_lambda,
            },
            max_epochs: self.max_epochs,
            grad_tol: self.grad_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub test_sensors: Vec<String>,
    #[serde(default = "all_variants")]
    pub variants: Vec<Variant>,
    /// Encodings to sweep; defaults to the experiment's own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encodings: Option<Vec<EncodingMode>>,
}

fn all_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}

fn default_name() -> String {
    "experiment".into()
}

fn default_max_gap() -> f64 {
    DEFAULT_MAX_GAP_S
}

fn default_variant() -> Variant {
    Variant::LinR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: RngSeed,
    pub test_sensor: String,
    /// Sensors whose features build the representation. Defaults to every
    /// sensor declared with the high quality tier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_sensors: Option<Vec<String>>,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default = "default_max_gap")]
    pub max_gap_s: f64,
    #[serde(default)]
    pub unlabeled: UnlabeledPolicy,
    pub data: DataSource,
    pub window: WindowSpec,
    #[serde(default)]
    pub representation: RepresentationConfig,
    #[serde(default)]
    pub mapping: MappingSettings,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    /// Directory that relative data paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.base_dir = base_dir.map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path.parent())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    fn manifest_path(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Sensor ids used for representation learning.
    pub fn resolved_training_sensors(&self, ds: &SensorDataset) -> Vec<String> {
        match &self.training_sensors {
            Some(ids) => ids.clone(),
            None => ds
                .sensors
                .iter()
                .filter(|s| s.quality_tier == QualityTier::High)
                .map(|s| s.sensor_id.clone())
                .collect(),
        }
    }

    /// The single-cell configurations of this experiment's grid, sensor-major.
    pub fn grid_cells(&self) -> Vec<ExperimentConfig> {
        let Some(grid) = &self.grid else {
            return vec![self.clone()];
        };
        let encodings = grid.encodings.clone().unwrap_or_else(|| vec![self.representation.encoding]);
        let mut cells = Vec::new();
        for sensor in &grid.test_sensors {
            for &encoding in &encodings {
                for &variant in &grid.variants {
                    let mut c = self.clone();
                    c.grid = None;
                    c.test_sensor = sensor.clone();
                    c.variant = variant;
                    c.representation.encoding = encoding;
                    cells.push(c);
                }
            }
        }
        cells
    }

    fn check_static(&self) -> Result<()> {
        self.window.validate()?;
        if !(self.max_gap_s > 0.0) {
            return Err(Error::Config("max_gap_s must be positive".into()));
        }
        if self.representation.k_per_sensor == 0 {
            return Err(Error::Config("k_per_sensor must be positive".into()));
        }
        if !(self.classifier.c_inv >= 0.0) {
            return Err(Error::Config("classifier c_inv must be nonnegative".into()));
        }
        if !(self.mapping.linear_lambda >= 0.0 && self.mapping.logistic_lambda >= 0.0) {
            return Err(Error::Config("mapping lambdas must be nonnegative".into()));
        }
        if let Some(grid) = &self.grid {
            if grid.test_sensors.is_empty() || grid.variants.is_empty() {
                return Err(Error::Config("grid needs at least one test sensor and one variant".into()));
            }
        }
        Ok(())
    }

    fn check_against(&self, ds: &SensorDataset, table: &FeatureTable) -> Result<()> {
        let known: Vec<String> = ds.sensors.iter().map(|s| s.sensor_id.clone()).collect();
        let require = |id: &String| -> Result<()> {
            if known.contains(id) {
                Ok(())
            } else {
                Err(Error::UnknownSensor {
                    missing: id.clone(),
                    available: known.clone(),
                })
            }
        };
        let test_sensors = match &self.grid {
            Some(g) => g.test_sensors.clone(),
            None => vec![self.test_sensor.clone()],
        };
        test_sensors.iter().try_for_each(require)?;
        let training = self.resolved_training_sensors(ds);
        if training.is_empty() {
            return Err(Error::Config("no training sensors (none declared high quality)".into()));
        }
        training.iter().try_for_each(require)?;
        let mut sorted = training.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != training.len() {
            return Err(Error::Config("training sensors listed twice".into()));
        }
        if fold_subjects(table).len() < 2 {
            return Err(Error::Config("leave-one-subject-out needs at least 2 labeled subjects".into()));
        }
        if self.unlabeled == UnlabeledPolicy::UnlabeledOnly && table.unlabeled().n_rows() == 0 {
            return Err(Error::Config("unlabeled_only policy but the dataset has no unlabeled windows".into()));
        }
        Ok(())
    }
}

/// Dataset and features shared by every cell of an experiment.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub dataset: SensorDataset,
    /// Unstandardized window features of all declared sensors.
    pub table: FeatureTable,
}

/// Loads (or generates) the dataset, imputes short gaps and extracts features.
pub fn prepare(cfg: &ExperimentConfig) -> Result<PreparedData> {
    cfg.check_static()?;
    let raw = match &cfg.data {
        DataSource::Manifest(p) => load_dataset(&DatasetManifest::from_path(cfg.manifest_path(p))?)?,
        DataSource::Synthetic(spec) => generate_synthetic(spec)?,
    };
    let dataset = impute_missing(&raw, cfg.max_gap_s)?;
    let table = window_features(&dataset, &cfg.window)?;
    cfg.check_against(&dataset, &table)?;
    Ok(PreparedData { dataset, table })
}

/// Subjects with at least one labeled window, in table order.
pub fn fold_subjects(table: &FeatureTable) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for (s, l) in table.subject_of_row().iter().zip(table.label_of_row()) {
        if l.is_some() && !out.contains(s) {
            out.push(s.clone());
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitStage {
    Standardizer,
    Representation,
    Mapping,
    Classifier,
    Boosting,
}

/// Called with every table that reaches a fitting stage.
pub type FitObserver<'a> = &'a (dyn Fn(Option<&str>, FitStage, &FeatureTable) + Sync);

/// Rejects any fitting input that contains a row of the held-out subject.
#[derive(Clone, Copy)]
pub struct LeakGuard<'a> {
    pub held_out: Option<&'a str>,
    pub observer: Option<FitObserver<'a>>,
}

impl LeakGuard<'_> {
    pub fn none() -> LeakGuard<'static> {
        LeakGuard {
            held_out: None,
            observer: None,
        }
    }

    pub fn check(&self, stage: FitStage, table: &FeatureTable) -> Result<()> {
        if let Some(observer) = self.observer {
            observer(self.held_out, stage, table);
        }
        if let Some(h) = self.held_out {
            if table.subject_of_row().iter().any(|s| s == h) {
                return Err(Error::Leak {
                    subject: h.to_owned(),
                    stage: format!("{stage:?}"),
                });
            }
        }
        Ok(())
    }
}

/// Per-variant settings of one pipeline fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSettings {
    pub variant: Variant,
    pub test_sensor: String,
    pub training_sensors: Vec<String>,
    pub representation: RepresentationConfig,
    pub mapping: MappingSettings,
    pub classifier: ClassifierConfig,
    pub unlabeled: UnlabeledPolicy,
    pub seed: RngSeed,
}

impl PipelineSettings {
    pub fn from_config(cfg: &ExperimentConfig, ds: &SensorDataset) -> Self {
        PipelineSettings {
            variant: cfg.variant,
            test_sensor: cfg.test_sensor.clone(),
            training_sensors: cfg.resolved_training_sensors(ds),
            representation: cfg.representation,
            mapping: cfg.mapping,
            classifier: cfg.classifier,
            unlabeled: cfg.unlabeled,
            seed: cfg.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PipelineStages {
    Traditional {
        classifier: LinearClassifier,
    },
    Clusters {
        representation: RepresentationModel,
        classifier: LinearClassifier,
    },
    Mapped {
        representation: RepresentationModel,
        mapping: MappingModel,
        classifier: LinearClassifier,
    },
    Boosted {
        representation: RepresentationModel,
        mapping: MappingModel,
        ensemble: BoostedEnsemble,
    },
}

/// A fitted variant: standardizer plus the models it needs at test time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub variant: Variant,
    pub test_sensor: String,
    pub class_set: Vec<String>,
    /// Column layout the standardizer was fitted on.
    pub layout: Vec<(String, usize, usize)>,
    pub standardizer: Standardizer,
    pub stages: PipelineStages,
}

fn layout_of(table: &FeatureTable) -> Vec<(String, usize, usize)> {
    table
        .column_groups()
        .iter()
        .map(|ColumnGroup { sensor_id, columns }| (sensor_id.clone(), columns.start, columns.end))
        .collect()
}

/// Fits one variant on `train` (raw features, all sensors).
pub fn fit_pipeline(train: &FeatureTable, s: &PipelineSettings, guard: LeakGuard<'_>) -> Result<PipelineModel> {
    guard.check(FitStage::Standardizer, train)?;
    let standardizer = Standardizer::fit(train)?;
    let train = standardizer.apply(train)?;
    let labeled = train.labeled();
    if labeled.n_rows() == 0 {
        return Err(Error::Empty("no labeled training rows".into()));
    }
    let y = labeled.label_indices()?;
    let k = train.class_set().len();
    let single = labeled.group_matrix(&s.test_sensor)?;

    let stages = if s.variant == Variant::Trad {
        guard.check(FitStage::Classifier, &labeled)?;
        PipelineStages::Traditional {
            classifier: fit_classifier(single.view(), &y, k, None, &s.classifier)?,
        }
    } else {
        let source = match s.unlabeled {
            UnlabeledPolicy::Concat => train.clone(),
            UnlabeledPolicy::UnlabeledOnly => train.unlabeled(),
        };
        if source.n_rows() == 0 {
            return Err(Error::Empty("no rows for representation learning".into()));
        }
        let multi = source.select_sensor_columns(&s.training_sensors)?;
        guard.check(FitStage::Representation, &multi)?;
        let representation = learn_representation(&multi, &s.representation, s.seed.derive("representation"))?;

        match s.variant.mapping_kind() {
            None => {
                let encoded = representation.encode(&labeled)?;
                guard.check(FitStage::Classifier, &labeled)?;
                let classifier = fit_classifier(encoded.view(), &y, k, None, &s.classifier)?;
                PipelineStages::Clusters {
                    representation,
                    classifier,
                }
            }
            Some(kind) => {
                let targets = representation.encode(&source)?;
                let input = source.select_sensor_columns(&[&s.test_sensor])?;
                guard.check(FitStage::Mapping, &input)?;
                let mapping = fit_mapping(&input, &targets, &s.mapping.config(kind))?;
                let mapped = mapping.apply_matrix(single.view())?;
                if s.variant.boosted() {
                    guard.check(FitStage::Boosting, &labeled)?;
                    let ensemble = fit_boosted(mapped.view(), single.view(), &y, k, &s.classifier)?;
                    PipelineStages::Boosted {
                        representation,
                        mapping,
                        ensemble,
                    }
                } else {
                    guard.check(FitStage::Classifier, &labeled)?;
                    let classifier = fit_classifier(mapped.view(), &y, k, None, &s.classifier)?;
                    PipelineStages::Mapped {
                        representation,
                        mapping,
                        classifier,
                    }
                }
            }
        }
    };
    Ok(PipelineModel {
        variant: s.variant,
        test_sensor: s.test_sensor.clone(),
        class_set: train.class_set().to_vec(),
        layout: layout_of(&train),
        standardizer,
        stages,
    })
}

impl PipelineModel {
    pub fn representation(&self) -> Option<&RepresentationModel> {
        match &self.stages {
            PipelineStages::Traditional { .. } => None,
            PipelineStages::Clusters { representation, .. }
            | PipelineStages::Mapped { representation, .. }
            | PipelineStages::Boosted { representation, .. } => Some(representation),
        }
    }

    /// One class index per row of `table` (raw features, same layout as training).
    ///
    /// Only the Clusters variant reads sensors other than the test sensor.
    pub fn predict(&self, table: &FeatureTable) -> Result<Vec<usize>> {
        if layout_of(table) != self.layout {
            return Err(Error::DimensionMismatch {
                expected: self.layout.last().map_or(0, |l| l.2),
                actual: table.n_cols(),
                context: "pipeline feature layout",
            });
        }
        let table = self.standardizer.apply(table)?;
        let single = table.group_matrix(&self.test_sensor)?;
        match &self.stages {
            PipelineStages::Traditional { classifier } => classifier.predict(single.view()),
            PipelineStages::Clusters {
                representation,
                classifier,
            } => classifier.predict(representation.encode(&table)?.view()),
            PipelineStages::Mapped { mapping, classifier, .. } => {
                classifier.predict(mapping.apply_matrix(single.view())?.view())
            }
            PipelineStages::Boosted { mapping, ensemble, .. } => {
                ensemble.predict(mapping.apply_matrix(single.view())?.view(), single.view())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub held_out: String,
    pub n_train_rows: usize,
    pub n_test_rows: usize,
    pub micro_f1: f64,
    pub confusion: ConfusionMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub dataset: String,
    pub class_set: Vec<String>,
    pub variant: Variant,
    pub test_sensor: String,
    pub training_sensors: Vec<String>,
    pub encoding: EncodingMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation_dim: Option<usize>,
    pub folds: Vec<FoldReport>,
    /// Summed over folds.
    pub confusion: ConfusionMatrix,
    /// Micro-F1 of all folds' predictions pooled together.
    pub pooled_micro_f1: f64,
    pub mean_fold_micro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub config: ExperimentConfig,
}

fn run_fold(
    prepared: &PreparedData,
    settings: &PipelineSettings,
    held_out: &str,
    observer: Option<FitObserver<'_>>,
) -> Result<(FoldReport, Option<usize>)> {
    let (train, test) = prepared.table.split_by_subject(held_out)?;
    let guard = LeakGuard {
        held_out: Some(held_out),
        observer,
    };
    let model = fit_pipeline(&train, settings, guard)?;
    let test = test.labeled();
    let truth = test.label_indices()?;
    let pred = model.predict(&test)?;
    let confusion = ConfusionMatrix::from_labels(&truth, &pred, model.class_set.len())?;
    let alphas = match &model.stages {
        PipelineStages::Boosted { ensemble, .. } => Some(ensemble.alphas),
        _ => None,
    };
    tracing::debug!(held_out, variant = %settings.variant, f1 = confusion.micro_f1(), "fold done");
    Ok((
        FoldReport {
            held_out: held_out.to_owned(),
            n_train_rows: train.labeled().n_rows(),
            n_test_rows: truth.len(),
            micro_f1: confusion.micro_f1(),
            confusion,
            alphas,
        },
        model.representation().map(RepresentationModel::dim),
    ))
}

/// Runs leave-one-subject-out over already prepared data.
///
/// Folds run concurrently; results are merged in subject order, so the report
/// does not depend on scheduling.
pub fn run_prepared(
    cfg: &ExperimentConfig,
    prepared: &PreparedData,
    observer: Option<FitObserver<'_>>,
) -> Result<RunReport> {
    let settings = PipelineSettings::from_config(cfg, &prepared.dataset);
    let subjects = fold_subjects(&prepared.table);
    let folds: Vec<(FoldReport, Option<usize>)> = subjects
        .par_iter()
        .map(|s| run_fold(prepared, &settings, s, observer))
        .collect::<Result<_>>()?;
    let class_set = prepared.table.class_set().to_vec();
    let mut confusion = ConfusionMatrix::zeros(class_set.len());
    for (f, _) in &folds {
        confusion.add(&f.confusion)?;
    }
    let mean_fold_micro_f1 = folds.iter().map(|(f, _)| f.micro_f1).sum::<f64>() / folds.len() as f64;
    Ok(RunReport {
        format_version: REPORT_FORMAT_VERSION,
        dataset: prepared.dataset.name.clone(),
        per_class: confusion.per_class(&class_set),
        pooled_micro_f1: confusion.micro_f1(),
        mean_fold_micro_f1,
        confusion,
        class_set,
        variant: cfg.variant,
        test_sensor: cfg.test_sensor.clone(),
        training_sensors: settings.training_sensors.clone(),
        encoding: cfg.representation.encoding,
        representation_dim: folds.first().and_then(|(_, d)| *d),
        folds: folds.into_iter().map(|(f, _)| f).collect(),
        config: cfg.clone(),
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    run_experiment_observed(cfg, None)
}

pub fn run_experiment_observed(cfg: &ExperimentConfig, observer: Option<FitObserver<'_>>) -> Result<RunReport> {
    let prepared = prepare(cfg)?;
    run_prepared(cfg, &prepared, observer)
}

/// Fits the configured variant on every subject, for deployment or inspection.
pub fn fit_final(cfg: &ExperimentConfig, prepared: &PreparedData) -> Result<PipelineModel> {
    let settings = PipelineSettings::from_config(cfg, &prepared.dataset);
    fit_pipeline(&prepared.table, &settings, LeakGuard::none())
}

#[derive(Debug)]
pub struct GridCell {
    pub config: ExperimentConfig,
    pub result: Result<RunReport>,
}

/// Runs every cell of the config's grid over one shared dataset. A failing
/// cell does not stop the others.
pub fn run_grid(cfg: &ExperimentConfig) -> Result<Vec<GridCell>> {
    let prepared = prepare(cfg)?;
    Ok(cfg
        .grid_cells()
        .into_par_iter()
        .map(|c| {
            let result = run_prepared(&c, &prepared, None);
            GridCell { config: c, result }
        })
        .collect())
}
