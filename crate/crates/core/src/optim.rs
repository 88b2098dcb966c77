//! Full-batch gradient descent with step-halving line search.

use ndarray::Array1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentConfig {
    pub max_epochs: usize,
    pub grad_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentResult {
    pub params: Array1<f64>,
    pub loss: f64,
    pub grad_norm: f64,
    pub epochs: usize,
    pub converged: bool,
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Minimizes a smooth convex objective given as `objective(params) -> (loss, gradient)`.
///
/// Each epoch tries twice the previously accepted step and halves it until the
/// Armijo sufficient-decrease condition holds. Stops when the gradient norm drops
/// below `grad_tol`, when no decreasing step exists, or after `max_epochs`.
pub fn gradient_descent<F>(objective: F, init: Array1<f64>, cfg: DescentConfig) -> DescentResult
where
    F: Fn(&Array1<f64>) -> (f64, Array1<f64>),
{
    let mut params = init;
    let (mut loss, mut grad) = objective(&params);
    let mut step = 1.0;
    let mut epochs = 0;
    loop {
        let grad_norm = grad.dot(&grad).sqrt();
        if grad_norm < cfg.grad_tol {
            return DescentResult { params, loss, grad_norm, epochs, converged: true };
        }
        if epochs >= cfg.max_epochs {
            return DescentResult { params, loss, grad_norm, epochs, converged: false };
        }
        epochs += 1;
        step *= 2.0;
        let g2 = grad_norm * grad_norm;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate = &params - &(&grad * step);
            let (l, g) = objective(&candidate);
            if l.is_finite() && l <= loss - ARMIJO * step * g2 {
                accepted = Some((candidate, l, g));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((p, l, g)) => {
                params = p;
                loss = l;
                grad = g;
            }
            None => {
                // no representable decrease left along the gradient
                return DescentResult { params, loss, grad_norm, epochs, converged: false };
            }
        }
    }
}
