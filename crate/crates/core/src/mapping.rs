//! Regression from single-sensor features into the representation space.
//!
//! One independent regressor is fitted per representation dimension: ridge
//! least squares for the linear kind, L2-regularized binary logistic
//! regression on targets thresholded at 0.5 for the logistic kind.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureTable;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve};
use crate::optim::{gradient_descent, DescentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingKind {
    Linear,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingConfig {
    pub kind: MappingKind,
    /// Ridge penalty. Linear: on the summed squared error. Logistic: on the
    /// summed log loss, i.e. `lambda / n_rows` relative to the mean loss.
    pub lambda: f64,
    pub max_epochs: usize,
    pub grad_tol: f64,
}

impl MappingConfig {
    pub fn linear() -> Self {
        MappingConfig {
            kind: MappingKind::Linear,
            lambda: 1e-3,
            max_epochs: 2000,
            grad_tol: 1e-6,
        }
    }

    pub fn logistic() -> Self {
        MappingConfig {
            kind: MappingKind::Logistic,
            lambda: 1.0,
            max_epochs: 2000,
            grad_tol: 1e-6,
        }
    }

    pub fn for_kind(kind: MappingKind) -> Self {
        match kind {
            MappingKind::Linear => Self::linear(),
            MappingKind::Logistic => Self::logistic(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingModel {
    pub kind: MappingKind,
    pub sensor_id: String,
    pub lambda: f64,
    /// `d x m`, one row per representation dimension.
    pub weights: Array2<f64>,
    pub intercepts: Array1<f64>,
}

impl MappingModel {
    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn apply(&self, single: &FeatureTable) -> Result<Array2<f64>> {
        self.apply_matrix(single.rows().view())
    }

    /// Linear: raw affine outputs. Logistic: sigmoid probabilities.
    pub fn apply_matrix(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.ncols(),
                context: "mapping input",
            });
        }
        let z = x.dot(&self.weights.t()) + &self.intercepts;
        Ok(match self.kind {
            MappingKind::Linear => z,
            MappingKind::Logistic => z.mapv(sigmoid),
        })
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Fits one regressor per target column.
///
/// `single` holds x*: the single-sensor rows paired, window by window, with
/// the multi-sensor rows whose encodings form `targets`.
pub fn fit_mapping(single: &FeatureTable, targets: &Array2<f64>, cfg: &MappingConfig) -> Result<MappingModel> {
    let sensor_id = single.sensor_ids().join("+");
    let (weights, intercepts) = fit_mapping_matrix(single.rows().view(), targets.view(), cfg)?;
    Ok(MappingModel {
        kind: cfg.kind,
        sensor_id,
        lambda: cfg.lambda,
        weights,
        intercepts,
    })
}

pub fn fit_mapping_matrix(
    x: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    cfg: &MappingConfig,
) -> Result<(Array2<f64>, Array1<f64>)> {
    if x.nrows() != targets.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: targets.nrows(),
            context: "mapping target rows",
        });
    }
    if x.nrows() == 0 {
        return Err(Error::Empty("mapping needs at least one row".into()));
    }
    if !(cfg.lambda >= 0.0) {
        return Err(Error::Config("mapping lambda must be nonnegative".into()));
    }
    if x.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mapping input"));
    }
    match cfg.kind {
        MappingKind::Linear => fit_ridge(x, targets, cfg.lambda),
        MappingKind::Logistic => {
            let fits: Vec<(Array1<f64>, f64)> = (0..targets.ncols())
                .into_par_iter()
                .map(|j| fit_logistic_column(x, targets.column(j), cfg))
                .collect();
            let mut w = Array2::zeros((targets.ncols(), x.ncols()));
            let mut b = Array1::zeros(targets.ncols());
            for (j, (wj, bj)) in fits.into_iter().enumerate() {
                w.row_mut(j).assign(&wj);
                b[j] = bj;
            }
            Ok((w, b))
        }
    }
}

/// Closed-form ridge with an unpenalized intercept, via centred normal equations.
fn fit_ridge(x: ArrayView2<f64>, t: ArrayView2<f64>, lambda: f64) -> Result<(Array2<f64>, Array1<f64>)> {
    let x_mean = x.mean_axis(Axis(0)).expect("non-empty");
    let t_mean = t.mean_axis(Axis(0)).expect("non-empty");
    let xc = &x - &x_mean;
    let tc = &t - &t_mean;
    let mut gram = xc.t().dot(&xc);
    for i in 0..gram.nrows() {
        gram[[i, i]] += lambda;
    }
    let l = cholesky(&gram).ok_or(Error::Singular)?;
    let rhs = xc.t().dot(&tc);
    let mut w = Array2::zeros((t.ncols(), x.ncols()));
    for (j, col) in rhs.axis_iter(Axis(1)).enumerate() {
        w.row_mut(j).assign(&cholesky_solve(&l, col));
    }
    let b = &t_mean - &w.dot(&x_mean);
    Ok((w, b))
}

/// Binary logistic loss `sum log(1 + e^z) - y z + lambda/2 |w|^2`, divided by n,
/// with its gradient. Parameters are `[w..., b]`.
pub fn logistic_objective(x: ArrayView2<f64>, y: ArrayView1<f64>, lambda: f64, params: &Array1<f64>) -> (f64, Array1<f64>) {
    let m = x.ncols();
    let n = x.nrows() as f64;
    let w = params.slice(ndarray::s![..m]);
    let b = params[m];
    let z = x.dot(&w) + b;
    let mut loss = 0.0;
    let mut resid = Array1::zeros(z.len());
    for i in 0..z.len() {
        loss += softplus(z[i]) - y[i] * z[i];
        resid[i] = sigmoid(z[i]) - y[i];
    }
    loss = (loss + 0.5 * lambda * w.dot(&w)) / n;
    let mut grad = Array1::zeros(m + 1);
    let gw = (x.t().dot(&resid) + &(&w * lambda)) / n;
    grad.slice_mut(ndarray::s![..m]).assign(&gw);
    grad[m] = resid.sum() / n;
    (loss, grad)
}

const RATE_CLAMP: f64 = 1e-9;

fn fit_logistic_column(x: ArrayView2<f64>, target: ArrayView1<f64>, cfg: &MappingConfig) -> (Array1<f64>, f64) {
    let m = x.ncols();
    let y: Array1<f64> = target.mapv(|t| if t >= 0.5 { 1.0 } else { 0.0 });
    let positives = y.sum();
    if positives == 0.0 || positives == y.len() as f64 {
        let rate = (positives / y.len() as f64).clamp(RATE_CLAMP, 1.0 - RATE_CLAMP);
        return (Array1::zeros(m), (rate / (1.0 - rate)).ln());
    }
    let result = gradient_descent(
        |p| logistic_objective(x, y.view(), cfg.lambda, p),
        Array1::zeros(m + 1),
        DescentConfig {
            max_epochs: cfg.max_epochs,
            grad_tol: cfg.grad_tol,
        },
    );
    let p = result.params;
    (p.slice(ndarray::s![..m]).to_owned(), p[m])
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn recovers_affine_scalar() {
        let x = Array2::from_shape_fn((20, 1), |(i, _)| i as f64 * 0.3 - 2.0);
        let t = x.mapv(|v| 2.0 * v + 1.0);
        let mut cfg = MappingConfig::linear();
        cfg.lambda = 0.0;
        let (w, b) = fit_mapping_matrix(x.view(), t.view(), &cfg).unwrap();
        assert!((w[[0, 0]] - 2.0).abs() < 1e-10);
        assert!((b[0] - 1.0).abs() < 1e-10);
        let model = MappingModel { kind: MappingKind::Linear, sensor_id: "A".into(), lambda: 0.0, weights: w, intercepts: b };
        let pred = model.apply_matrix(x.view()).unwrap();
        let mse = (&pred - &t).mapv(|v| v * v).mean().unwrap();
        assert!(mse < 1e-10);
        let at3 = model.apply_matrix(array![[3.0]].view()).unwrap();
        assert!((at3[[0, 0]] - 7.0).abs() < 1e-8);
    }

    #[test]
    fn identity_on_one_column() {
        let mut rng = crate::seed::RngSeed(5).rng();
        let x = Array2::from_shape_fn((40, 4), |_| rng.random_range(-1.0..1.0));
        let t = x.column(2).to_owned().insert_axis(Axis(1));
        let mut cfg = MappingConfig::linear();
        cfg.lambda = 0.0;
        let (w, b) = fit_mapping_matrix(x.view(), t.view(), &cfg).unwrap();
        for j in 0..4 {
            let expected = if j == 2 { 1.0 } else { 0.0 };
            assert!((w[[0, j]] - expected).abs() < 1e-8, "{w}");
        }
        assert!(b[0].abs() < 1e-8);
    }

    #[test]
    fn separable_logistic_reaches_full_accuracy() {
        let x = Array2::from_shape_fn((40, 2), |(i, j)| {
            let side = if i < 20 { -1.0 } else { 1.0 };
            side * (1.0 + (i % 5) as f64 * 0.2) + j as f64 * 0.1 * ((i % 3) as f64 - 1.0)
        });
        let t = Array2::from_shape_fn((40, 1), |(i, _)| if i < 20 { 0.0 } else { 1.0 });
        let mut cfg = MappingConfig::logistic();
        cfg.lambda = 0.01;
        let (w, b) = fit_mapping_matrix(x.view(), t.view(), &cfg).unwrap();
        let m = MappingModel { kind: MappingKind::Logistic, sensor_id: "A".into(), lambda: cfg.lambda, weights: w, intercepts: b };
        let p = m.apply_matrix(x.view()).unwrap();
        for i in 0..40 {
            assert_eq!(p[[i, 0]] >= 0.5, i >= 20);
            assert!(p[[i, 0]] > 0.0 && p[[i, 0]] < 1.0);
        }
    }

    #[test]
    fn constant_target_column_gives_constant_predictor() {
        let x = Array2::from_shape_fn((10, 2), |(i, j)| (i + j) as f64);
        let t = Array2::from_shape_fn((10, 2), |(_, j)| j as f64);
        let (w, b) = fit_mapping_matrix(x.view(), t.view(), &MappingConfig::logistic()).unwrap();
        assert!(w.iter().all(|&v| v == 0.0));
        assert!(sigmoid(b[0]) < 1e-8 && sigmoid(b[1]) > 1.0 - 1e-8);
    }

    #[test]
    fn sigmoid_at_boundary_is_half() {
        let m = MappingModel {
            kind: MappingKind::Logistic,
            sensor_id: "A".into(),
            lambda: 1.0,
            weights: array![[1.0, -1.0]],
            intercepts: array![0.5],
        };
        let p = m.apply_matrix(array![[0.25, 0.75]].view()).unwrap();
        assert!((p[[0, 0]] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn zero_weights_give_intercept() {
        let m = MappingModel {
            kind: MappingKind::Linear,
            sensor_id: "A".into(),
            lambda: 0.0,
            weights: Array2::zeros((2, 3)),
            intercepts: array![0.3, -4.0],
        };
        let out = m.apply_matrix(array![[1.0, 2.0, 3.0], [-7.0, 0.0, 1e6]].view()).unwrap();
        assert_eq!(out, array![[0.3, -4.0], [0.3, -4.0]]);
    }

    #[test]
    fn row_mismatch_and_width_mismatch() {
        let x = Array2::zeros((5, 2));
        let t = Array2::zeros((4, 1));
        assert!(fit_mapping_matrix(x.view(), t.view(), &MappingConfig::linear()).is_err());
        let m = MappingModel {
            kind: MappingKind::Linear,
            sensor_id: "A".into(),
            lambda: 0.0,
            weights: Array2::zeros((1, 3)),
            intercepts: array![0.0],
        };
        assert!(m.apply_matrix(x.view()).is_err());
    }
}
