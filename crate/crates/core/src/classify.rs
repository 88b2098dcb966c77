//! Activity classifiers: a weighted multinomial logistic model and the
//! two-stage SAMME ensemble that combines the mapped-representation model with
//! the traditional single-sensor model.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{gradient_descent, DescentConfig};

/// Anything that assigns one class index per input row.
pub trait Classifier {
    fn n_classes(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct ClassifierConfig {
    /// L2 strength on the weight matrix, relative to the weighted mean loss.
    pub c_inv: f64,
    pub max_epochs: usize,
    pub grad_tol: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            c_inv: 1e-3,
            max_epochs: 5000,
            grad_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    /// `K x D`.
    pub weights: Array2<f64>,
    pub intercepts: Array1<f64>,
    pub c_inv: f64,
}

impl LinearClassifier {
    pub fn scores(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.weights.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.ncols(),
                actual: x.ncols(),
                context: "classifier input",
            });
        }
        Ok(x.dot(&self.weights.t()) + &self.intercepts)
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut z = self.scores(x)?;
        for mut row in z.axis_iter_mut(Axis(0)) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|v| (v - max).exp());
            let total = row.sum();
            row.mapv_inplace(|v| v / total);
        }
        Ok(z)
    }
}

fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

impl Classifier for LinearClassifier {
    fn n_classes(&self) -> usize {
        self.weights.nrows()
    }

    fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        let z = self.scores(x)?;
        Ok(z.outer_iter().map(|r| argmax_first(r.iter().copied())).collect())
    }
}

/// Weighted multinomial logistic loss plus `c_inv / 2 |W|^2`, with its gradient.
///
/// The loss is `sum_i w_i (logsumexp(z_i) - z_{i, y_i}) / sum_i w_i`; intercepts
/// are not penalized. Parameters are `[W row-major..., b...]`.
pub fn multinomial_objective(
    x: ArrayView2<f64>,
    labels: &[usize],
    sample_weights: &Array1<f64>,
    n_classes: usize,
    c_inv: f64,
    params: &Array1<f64>,
) -> (f64, Array1<f64>) {
    let d = x.ncols();
    let k = n_classes;
    let w = params
        .slice(s![..k * d])
        .to_owned()
        .into_shape_with_order((k, d))
        .expect("parameter layout");
    let b = params.slice(s![k * d..]);
    let mut z = x.dot(&w.t()) + &b;
    let total_weight = sample_weights.sum();
    let mut loss = 0.0;
    for (i, mut row) in z.axis_iter_mut(Axis(0)).enumerate() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let lse = max + sum_exp.ln();
        loss += sample_weights[i] * (lse - row[labels[i]]);
        // row becomes the weighted residual (p - onehot) * w_i
        row.mapv_inplace(|v| (v - lse).exp());
        row[labels[i]] -= 1.0;
        row *= sample_weights[i] / total_weight;
    }
    loss = loss / total_weight + 0.5 * c_inv * w.iter().map(|v| v * v).sum::<f64>();
    let grad_w = z.t().dot(&x) + &(&w * c_inv);
    let grad_b = z.sum_axis(Axis(0));
    let mut grad = Array1::zeros(k * d + k);
    grad.slice_mut(s![..k * d]).assign(&Array1::from_iter(grad_w.iter().copied()));
    grad.slice_mut(s![k * d..]).assign(&grad_b);
    (loss, grad)
}

/// Fits a multinomial logistic classifier by full-batch gradient descent from zero.
///
/// `labels` are class indices below `n_classes`; classes absent from the data
/// still get a (pushed-down) score row. `sample_weights` defaults to uniform.
pub fn fit_classifier(
    x: ArrayView2<f64>,
    labels: &[usize],
    n_classes: usize,
    sample_weights: Option<&[f64]>,
    cfg: &ClassifierConfig,
) -> Result<LinearClassifier> {
    if labels.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: labels.len(),
            context: "classifier labels",
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("classifier input"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::Config(format!("label {bad} outside {n_classes} classes")));
    }
    let weights = match sample_weights {
        Some(w) => {
            if w.len() != labels.len() {
                return Err(Error::DimensionMismatch {
                    expected: labels.len(),
                    actual: w.len(),
                    context: "sample weights",
                });
            }
            if w.iter().any(|&v| !(v >= 0.0 && v.is_finite())) || w.iter().all(|&v| v == 0.0) {
                return Err(Error::InvalidWeights);
            }
            Array1::from_vec(w.to_vec())
        }
        None => Array1::from_elem(labels.len(), 1.0),
    };
    let mut present: Vec<usize> = labels
        .iter()
        .zip(weights.iter())
        .filter(|(_, &w)| w > 0.0)
        .map(|(&l, _)| l)
        .collect();
    present.sort_unstable();
    present.dedup();
    match present.len() {
        0 => return Err(Error::Empty("no training rows".into())),
        1 => return Err(Error::SingleClass(present[0].to_string())),
        _ => {}
    }

    let d = x.ncols();
    let result = gradient_descent(
        |p| multinomial_objective(x, labels, &weights, n_classes, cfg.c_inv, p),
        Array1::zeros(n_classes * d + n_classes),
        DescentConfig {
            max_epochs: cfg.max_epochs,
            grad_tol: cfg.grad_tol,
        },
    );
    tracing::debug!(
        epochs = result.epochs,
        grad_norm = result.grad_norm,
        converged = result.converged,
        "classifier fit"
    );
    let p = result.params;
    Ok(LinearClassifier {
        weights: p
            .slice(s![..n_classes * d])
            .to_owned()
            .into_shape_with_order((n_classes, d))
            .expect("parameter layout"),
        intercepts: p.slice(s![n_classes * d..]).to_owned(),
        c_inv: cfg.c_inv,
    })
}

/// Upper bound on a stage weight: `ln(1e12) + ln(K - 1)`.
pub fn alpha_cap(n_classes: usize) -> f64 {
    1e12f64.ln() + ((n_classes - 1) as f64).ln()
}

/// SAMME stage weight `ln((1 - err) / err) + ln(K - 1)`.
///
/// Zero when `err >= (K - 1) / K` (the stage abstains); capped at
/// [`alpha_cap`] when the stage is perfect.
pub fn samme_alpha(err: f64, n_classes: usize) -> f64 {
    let k = n_classes as f64;
    if err >= (k - 1.0) / k {
        return 0.0;
    }
    let cap = alpha_cap(n_classes);
    if err <= 0.0 {
        return cap;
    }
    (((1.0 - err) / err).ln() + (k - 1.0).ln()).min(cap)
}

/// Two-stage discrete SAMME combination of the mapped-representation
/// classifier (stage 1) and the raw single-sensor classifier (stage 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    pub proposed: LinearClassifier,
    pub traditional: LinearClassifier,
    pub alphas: [f64; 2],
    /// Weighted training error of each stage under the weights it was fitted with.
    pub errors: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostTrace {
    pub stage1_predictions: Vec<usize>,
    pub stage2_weights: Vec<f64>,
}

fn weighted_error(pred: &[usize], labels: &[usize], w: &[f64]) -> f64 {
    pred.iter()
        .zip(labels)
        .zip(w)
        .filter(|((p, y), _)| p != y)
        .map(|(_, w)| w)
        .sum()
}

/// Fits the two-stage ensemble; see [`fit_boosted_traced`].
pub fn fit_boosted(
    rep_inputs: ArrayView2<f64>,
    raw_inputs: ArrayView2<f64>,
    labels: &[usize],
    n_classes: usize,
    cfg: &ClassifierConfig,
) -> Result<BoostedEnsemble> {
    fit_boosted_traced(rep_inputs, raw_inputs, labels, n_classes, cfg).map(|(e, _)| e)
}

/// Stage 1 is fitted on `rep_inputs` with uniform weights. Rows it gets wrong
/// are up-weighted by `exp(alpha_1)` before stage 2 is fitted on `raw_inputs`.
/// Also returns the stage-1 predictions and stage-2 weights for inspection.
pub fn fit_boosted_traced(
    rep_inputs: ArrayView2<f64>,
    raw_inputs: ArrayView2<f64>,
    labels: &[usize],
    n_classes: usize,
    cfg: &ClassifierConfig,
) -> Result<(BoostedEnsemble, BoostTrace)> {
    let n = labels.len();
    if rep_inputs.nrows() != n || raw_inputs.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: rep_inputs.nrows().min(raw_inputs.nrows()),
            context: "boosting rows",
        });
    }
    let uniform = vec![1.0 / n as f64; n];
    let proposed = fit_classifier(rep_inputs, labels, n_classes, Some(&uniform), cfg)?;
    let pred1 = proposed.predict(rep_inputs)?;
    let err1 = weighted_error(&pred1, labels, &uniform);
    let alpha1 = samme_alpha(err1, n_classes);

    let stage2_weights = if err1 <= 0.0 {
        uniform.clone()
    } else {
        let mut w: Vec<f64> = pred1
            .iter()
            .zip(labels)
            .zip(&uniform)
            .map(|((p, y), w)| if p != y { w * alpha1.exp() } else { *w })
            .collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        w
    };
    let traditional = fit_classifier(raw_inputs, labels, n_classes, Some(&stage2_weights), cfg)?;
    let pred2 = traditional.predict(raw_inputs)?;
    let err2 = weighted_error(&pred2, labels, &stage2_weights);
    let alpha2 = samme_alpha(err2, n_classes);
    if alpha1 == 0.0 && alpha2 == 0.0 {
        return Err(Error::DegenerateEnsemble);
    }
    tracing::debug!(err1, alpha1, err2, alpha2, "boosted ensemble");
    Ok((
        BoostedEnsemble {
            proposed,
            traditional,
            alphas: [alpha1, alpha2],
            errors: [err1, err2],
        },
        BoostTrace {
            stage1_predictions: pred1,
            stage2_weights,
        },
    ))
}

/// Vote of stages weighted by alpha; ties go to the lower class index.
pub fn combine_votes(stage_predictions: &[&[usize]], alphas: &[f64], n_classes: usize) -> Vec<usize> {
    let n = stage_predictions.first().map_or(0, |p| p.len());
    (0..n)
        .map(|i| {
            let mut votes = vec![0.0; n_classes];
            for (pred, &a) in stage_predictions.iter().zip(alphas) {
                votes[pred[i]] += a;
            }
            argmax_first(votes.into_iter())
        })
        .collect()
}

impl BoostedEnsemble {
    pub fn n_classes(&self) -> usize {
        self.proposed.n_classes()
    }

    pub fn predict(&self, rep_inputs: ArrayView2<f64>, raw_inputs: ArrayView2<f64>) -> Result<Vec<usize>> {
        if rep_inputs.nrows() != raw_inputs.nrows() {
            return Err(Error::DimensionMismatch {
                expected: rep_inputs.nrows(),
                actual: raw_inputs.nrows(),
                context: "ensemble rows",
            });
        }
        let p1 = self.proposed.predict(rep_inputs)?;
        let p2 = self.traditional.predict(raw_inputs)?;
        Ok(combine_votes(&[&p1, &p2], &self.alphas, self.n_classes()))
    }
}
