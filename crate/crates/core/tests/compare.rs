//! Comparison tables built from run reports.

mod common;

use std::sync::OnceLock;

use sensebridge::eval::{compare_runs, run_experiment, RunReport, Variant};
use sensebridge::representation::EncodingMode;
use sensebridge::RngSeed;

fn base_report() -> RunReport {
    static REPORT: OnceLock<RunReport> = OnceLock::new();
    REPORT
        .get_or_init(|| {
            let mut spec = common::confusable_pairs(RngSeed(1));
            spec.n_subjects = 2;
            run_experiment(&common::experiment(spec, Variant::Trad)).unwrap()
        })
        .clone()
}

fn report(sensor: &str, variant: Variant, score: f64) -> RunReport {
    let mut r = base_report();
    r.test_sensor = sensor.into();
    r.variant = variant;
    r.pooled_micro_f1 = score;
    r
}

#[test]
fn boosted_gain_over_trad_in_percentage_points() {
    let table = compare_runs(&[report("RL", Variant::Trad, 0.17), report("RL", Variant::LinB, 0.34)]).unwrap();
    assert_eq!(table.variants, [Variant::Trad, Variant::LinB]);
    let row = &table.rows[0];
    assert_eq!(row.key, "RL");
    assert!((row.delta_pp[1].unwrap() - 17.0).abs() < 1e-9);
    assert_eq!(row.best, Some(1));
    let csv = table.to_csv().unwrap();
    assert_eq!(csv, "test_sensor,Trad,LinB,LinB_delta_pp,best\nRL,0.1700,0.3400,+17.0,LinB\n");
    assert!(table.to_text().contains("0.340 (+17.0pp)*"));
}

#[test]
fn single_report_is_one_row_without_other_deltas() {
    let table = compare_runs(&[report("S1", Variant::Trad, 0.5)]).unwrap();
    assert_eq!(table.rows.len(), 1);
    assert_eq!(table.rows[0].delta_pp, [Some(0.0)]);
    assert_eq!(table.rows[0].best, Some(0));
    assert_eq!(table.to_csv().unwrap(), "test_sensor,Trad,best\nS1,0.5000,Trad\n");
}

#[test]
fn identical_scores_flag_the_first_variant() {
    let reports: Vec<RunReport> = Variant::ALL.iter().rev().map(|&v| report("S1", v, 0.6)).collect();
    let table = compare_runs(&reports).unwrap();
    assert_eq!(table.variants, Variant::ALL);
    let row = &table.rows[0];
    assert_eq!(row.best, Some(0));
    assert!(row.delta_pp.iter().all(|d| *d == Some(0.0)));
    assert!(!table.to_text().contains("-0.0"));
}

#[test]
fn rows_follow_first_appearance_and_gaps_stay_empty() {
    let table = compare_runs(&[
        report("S2", Variant::LinR, 0.7),
        report("S1", Variant::Trad, 0.4),
        report("S1", Variant::LinR, 0.5),
    ])
    .unwrap();
    let keys: Vec<&str> = table.rows.iter().map(|r| r.key.as_str()).collect();
    assert_eq!(keys, ["S2", "S1"]);
    assert_eq!(table.rows[0].scores, [None, Some(0.7)]);
    assert_eq!(table.rows[0].delta_pp, [None, None]);
    let csv = table.to_csv().unwrap();
    assert!(csv.contains("S2,,0.7000,,LinR\n"), "{csv}");
}

#[test]
fn mixed_encodings_get_separate_rows() {
    let mut soft = report("S1", Variant::LinR, 0.6);
    soft.encoding = EncodingMode::Soft;
    let table = compare_runs(&[report("S1", Variant::LinR, 0.5), soft]).unwrap();
    let keys: Vec<&str> = table.rows.iter().map(|r| r.key.as_str()).collect();
    assert_eq!(keys, ["S1 [hard]", "S1 [soft]"]);
}

#[test]
fn incompatible_or_duplicate_reports_are_rejected() {
    assert!(compare_runs(&[]).is_err());
    let mut other = report("S1", Variant::LinR, 0.5);
    other.dataset = "elsewhere".into();
    assert!(compare_runs(&[report("S1", Variant::Trad, 0.5), other]).is_err());
    assert!(compare_runs(&[report("S1", Variant::Trad, 0.5), report("S1", Variant::Trad, 0.6)]).is_err());
}
