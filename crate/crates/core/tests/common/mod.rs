//! Synthetic designs and helpers shared by the integration tests.

#![allow(dead_code)]

pub mod oracle;

use sensebridge::eval::{prepare, run_prepared, DataSource, ExperimentConfig, PreparedData, RunReport, Variant};
use sensebridge::features::WindowSpec;
use sensebridge::ingest::{ActivityDef, SyntheticSpec};
use sensebridge::RngSeed;

/// Four activities built from six actions. Activities A and B share action 0,
/// C and D share action 1, and each pair differs only in the second action.
/// Sensor S1 sees actions 0 and 1 clearly but barely registers 2 to 5, so it
/// confuses A with B and C with D. Sensor S2 sees every action.
pub fn confusable_pairs(seed: RngSeed) -> SyntheticSpec {
    let weak = 0.15;
    SyntheticSpec {
        name: "confusable-pairs".into(),
        n_subjects: 4,
        n_sensors: 2,
        n_actions: 6,
        activities: vec![
            ActivityDef { label: "A".into(), actions: vec![0, 2] },
            ActivityDef { label: "B".into(), actions: vec![0, 3] },
            ActivityDef { label: "C".into(), actions: vec![1, 4] },
            ActivityDef { label: "D".into(), actions: vec![1, 5] },
        ],
        observability: vec![vec![1.0, 1.0, weak, weak, weak, weak], vec![1.0; 6]],
        noise_std: 0.5,
        samples_per_action: 10,
        seed,
        channels_per_sensor: 3,
        sampling_rate_hz: 20.0,
        repetitions: 1,
        cycles: 6,
        subject_gain_std: 0.0,
        low_quality_sensors: vec![],
        unlabeled_repetitions: 8,
    }
}

/// The same activities with six times the sensor noise, four labeled
/// occurrences and no unlabeled recording, so the mapping into the
/// representation is itself noisy.
pub fn noisy_mapping(seed: RngSeed) -> SyntheticSpec {
    SyntheticSpec {
        name: "noisy-mapping".into(),
        noise_std: 3.0,
        repetitions: 4,
        unlabeled_repetitions: 0,
        ..confusable_pairs(seed)
    }
}

pub fn window() -> WindowSpec {
    WindowSpec::new(2.0, 0.5)
}

/// Experiment on a synthetic spec, testing on S1 with k = 4 per sensor.
pub fn experiment(spec: SyntheticSpec, variant: Variant) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml_str("test_sensor = \"S1\"\n[data]\nmanifest = \"unused\"\n[window]\nlength_s = 2.0\nstep_s = 0.5\n", None)
        .expect("minimal config parses");
    cfg.seed = spec.seed;
    cfg.data = DataSource::Synthetic(spec);
    cfg.window = window();
    cfg.variant = variant;
    cfg.representation.k_per_sensor = 4;
    cfg.classifier.c_inv = 0.01;
    cfg
}

pub struct CohortRun {
    pub seed: RngSeed,
    pub reports: Vec<RunReport>,
    pub oracle: oracle::OracleScores,
}

/// Runs each variant on one cohort, sharing the prepared features.
pub fn run_cohort(spec: SyntheticSpec, variants: &[Variant]) -> CohortRun {
    let seed = spec.seed;
    let oracle = oracle::action_oracle(&spec, &window(), "S1");
    let base = experiment(spec, variants[0]);
    let prepared: PreparedData = prepare(&base).expect("synthetic data prepares");
    let reports = variants
        .iter()
        .map(|v| {
            let mut cfg = base.clone();
            cfg.variant = *v;
            run_prepared(&cfg, &prepared, None).expect("variant runs")
        })
        .collect();
    CohortRun { seed, reports, oracle }
}
