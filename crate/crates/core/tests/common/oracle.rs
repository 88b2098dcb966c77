//! Brute-force reference classifier for synthetic data with known latent actions.
//!
//! Each window is keyed by its latent action composition: the set of actions
//! covering at least a fifth of it. A nearest-centroid classifier over the
//! composition centroids (fitted on the training subjects) recognises the
//! composition, which maps to the activity it co-occurs with most often in
//! training. This is the accuracy a pipeline could reach by recognising action
//! content from the given columns and nothing else.

#![allow(dead_code)]

use ndarray::{s, Array2, Axis};
use sensebridge::features::{window_features, Standardizer, WindowSpec};
use sensebridge::ingest::{generate_synthetic_with_actions, ActionSpan, SyntheticSpec};

#[derive(Debug, Clone, Copy)]
pub struct OracleScores {
    /// Compositions recognised from the test sensor only.
    pub single: f64,
    /// Compositions recognised from every sensor.
    pub multi: f64,
    /// True compositions.
    pub perfect: f64,
}

const MIN_SHARE: f64 = 0.2;

/// Bit set of the actions covering at least `MIN_SHARE` of the window.
fn composition(spans: &[ActionSpan], start: f64, end: f64, n_actions: usize) -> u64 {
    let mut overlap = vec![0.0; n_actions];
    for sp in spans {
        let o = sp.end.min(end) - sp.start.max(start);
        if o > 0.0 {
            overlap[sp.action] += o;
        }
    }
    (0..n_actions)
        .filter(|&a| overlap[a] >= MIN_SHARE * (end - start))
        .fold(0, |m, a| m | 1 << a)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

pub fn action_oracle(spec: &SyntheticSpec, window: &WindowSpec, test_sensor: &str) -> OracleScores {
    let (ds, spans) = generate_synthetic_with_actions(spec).unwrap();
    let table = window_features(&ds, window).unwrap().labeled();
    let n_classes = spec.activities.len();
    let keys: Vec<u64> = (0..table.n_rows())
        .map(|i| {
            let (a, b) = table.window_meta()[i];
            composition(&spans[&table.subject_of_row()[i]], a, b, spec.n_actions)
        })
        .collect();
    let mut distinct = keys.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let n_actions = distinct.len();
    let actions: Vec<usize> = keys.iter().map(|k| distinct.binary_search(k).unwrap()).collect();
    let labels = table.label_indices().unwrap();
    let single_cols = table.group(test_sensor).unwrap().columns.clone();

    let (mut hits_single, mut hits_multi, mut hits_perfect, mut total) = (0usize, 0usize, 0usize, 0usize);
    for held in table.subject_ids() {
        let train: Vec<usize> = (0..table.n_rows()).filter(|&i| table.subject_of_row()[i] != held).collect();
        let test: Vec<usize> = (0..table.n_rows()).filter(|&i| table.subject_of_row()[i] == held).collect();
        let x_train = table.rows().select(Axis(0), &train);
        let scaler = Standardizer::fit_matrix(&x_train).unwrap();
        let x_train = scaler.transform(&x_train).unwrap();
        let x_test = scaler.transform(&table.rows().select(Axis(0), &test)).unwrap();

        let mut cooc = vec![vec![0.0; n_classes]; n_actions];
        for &i in &train {
            cooc[actions[i]][labels[i]] += 1.0;
        }
        let activity_of: Vec<usize> = cooc.iter().map(|c| argmax(c)).collect();

        let nearest_centroid = |cols: std::ops::Range<usize>| -> Vec<usize> {
            let xt = x_train.slice(s![.., cols.clone()]);
            let mut centroids = Array2::<f64>::zeros((n_actions, cols.len()));
            let mut counts = vec![0.0; n_actions];
            for (r, &i) in train.iter().enumerate() {
                centroids.row_mut(actions[i]).scaled_add(1.0, &xt.row(r));
                counts[actions[i]] += 1.0;
            }
            for a in 0..n_actions {
                if counts[a] > 0.0 {
                    centroids.row_mut(a).mapv_inplace(|v| v / counts[a]);
                } else {
                    centroids.row_mut(a).fill(f64::INFINITY);
                }
            }
            x_test
                .slice(s![.., cols])
                .outer_iter()
                .map(|row| {
                    let d: Vec<f64> = centroids
                        .outer_iter()
                        .map(|c| -row.iter().zip(c.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
                        .collect();
                    argmax(&d)
                })
                .collect()
        };
        let single = nearest_centroid(single_cols.clone());
        let multi = nearest_centroid(0..table.n_cols());
        for (r, &i) in test.iter().enumerate() {
            total += 1;
            hits_single += (activity_of[single[r]] == labels[i]) as usize;
            hits_multi += (activity_of[multi[r]] == labels[i]) as usize;
            hits_perfect += (activity_of[actions[i]] == labels[i]) as usize;
        }
    }
    OracleScores {
        single: hits_single as f64 / total as f64,
        multi: hits_multi as f64 / total as f64,
        perfect: hits_perfect as f64 / total as f64,
    }
}
