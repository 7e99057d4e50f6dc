//! Iteratively reweighted least squares for the row-sparse projection fit:
//! minimize ||X^T W - F||_F^2 plus a row-sparsity penalty on W.
//!
//! Each iteration solves a ridge-type system (X X^T + lambda Q) W = X F with
//! Q a diagonal reweighting computed from the current row norms, which is a
//! majorize-minimize step for the smoothed objective, so the traced objective
//! never increases.

use ndarray::{Array1, Array2};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg;
use crate::markov::Template;

/// Form of the row-sparsity penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Penalty {
    /// Squared sum of smoothed row norms (default).
    #[default]
    Squared,
    /// Plain (unsquared) sum of smoothed row norms.
    Plain,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Regularization weight, >= 0.
    pub lambda: f64,
    /// Row-norm smoothing constant, > 0.
    pub epsilon: f64,
    /// Relative convergence threshold on the objective or on the step.
    pub tol: f64,
    pub max_iter: usize,
    pub penalty: Penalty,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            epsilon: 1e-8,
            tol: 1e-6,
            max_iter: 100,
            penalty: Penalty::Squared,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::InvalidSolverConfig {
                reason: format!("lambda must be finite and >= 0, got {}", self.lambda),
            });
        }
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(Error::InvalidSolverConfig {
                reason: format!("epsilon must be finite and > 0, got {}", self.epsilon),
            });
        }
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(Error::InvalidSolverConfig {
                reason: format!("tol must be finite and > 0, got {}", self.tol),
            });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidSolverConfig {
                reason: "max_iter must be at least 1".to_string(),
            });
        }
        Ok(())
    }
}

/// Result of [`solve_irls`].
#[derive(Debug, Clone)]
pub struct SolverState {
    /// d x d weight matrix.
    pub w: Array2<f64>,
    /// Diagonal of the reweighting matrix at the final W.
    pub q_diag: Array1<f64>,
    /// Objective value after each W update.
    pub objective_trace: Vec<f64>,
    /// Frobenius norm of the step at each iteration (first entry: ||W_1||).
    pub delta_w_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn check_shapes(x: &DataMatrix, w: &Array2<f64>, f: &Template) -> Result<()> {
    let d = x.feature_count();
    let n = x.instance_count();
    if w.dim() != (d, d) {
        return Err(Error::ShapeMismatch {
            context: "weight matrix",
            expected: (d, d),
            got: w.dim(),
        });
    }
    if f.values().dim() != (n, d) {
        return Err(Error::ShapeMismatch {
            context: "template",
            expected: (n, d),
            got: f.values().dim(),
        });
    }
    Ok(())
}

fn smoothed_row_norms(w: &Array2<f64>, epsilon: f64) -> Array1<f64> {
    Array1::from_iter(
        w.rows()
            .into_iter()
            .map(|row| (row.iter().map(|v| v * v).sum::<f64>() + epsilon).sqrt()),
    )
}

fn penalty_value(w: &Array2<f64>, epsilon: f64, penalty: Penalty) -> f64 {
    let sum: f64 = smoothed_row_norms(w, epsilon).sum();
    match penalty {
        Penalty::Squared => sum * sum,
        Penalty::Plain => sum,
    }
}

/// The smoothed objective with the squared row-sparsity penalty:
/// ||X^T W - F||_F^2 + lambda (sum_j sqrt(||W^j||^2 + epsilon))^2.
pub fn objective(
    x: &DataMatrix,
    w: &Array2<f64>,
    f: &Template,
    lambda: f64,
    epsilon: f64,
) -> Result<f64> {
    objective_with(x, w, f, lambda, epsilon, Penalty::Squared)
}

/// Objective under an explicit penalty form.
pub fn objective_with(
    x: &DataMatrix,
    w: &Array2<f64>,
    f: &Template,
    lambda: f64,
    epsilon: f64,
    penalty: Penalty,
) -> Result<f64> {
    check_shapes(x, w, f)?;
    let fit: f64 = {
        let projected = x.values().t().dot(w);
        let diff = &projected - f.values();
        diff.iter().map(|v| v * v).sum()
    };
    Ok(fit + lambda * penalty_value(w, epsilon, penalty))
}

/// Diagonal reweighting for the squared penalty: entry j is the ratio of the
/// summed smoothed row norms to row j's smoothed norm. Every entry is >= 1.
pub fn update_q(w: &Array2<f64>, epsilon: f64) -> Array1<f64> {
    update_q_with(w, epsilon, Penalty::Squared)
}

/// Diagonal reweighting under an explicit penalty form. The plain form uses
/// 1 / (2 sqrt(||W^j||^2 + epsilon)).
pub fn update_q_with(w: &Array2<f64>, epsilon: f64, penalty: Penalty) -> Array1<f64> {
    let norms = smoothed_row_norms(w, epsilon);
    match penalty {
        Penalty::Squared => {
            let total = norms.sum();
            norms.mapv(|a| total / a)
        }
        Penalty::Plain => norms.mapv(|a| 1.0 / (2.0 * a)),
    }
}

/// Single ridge-type update: solves (X X^T + lambda diag(q)) W = X F.
pub fn update_w(
    x: &DataMatrix,
    f: &Template,
    q_diag: &Array1<f64>,
    lambda: f64,
) -> Result<Array2<f64>> {
    let d = x.feature_count();
    let n = x.instance_count();
    if f.values().dim() != (n, d) {
        return Err(Error::ShapeMismatch {
            context: "template",
            expected: (n, d),
            got: f.values().dim(),
        });
    }
    if q_diag.len() != d {
        return Err(Error::ShapeMismatch {
            context: "reweighting diagonal",
            expected: (d, 1),
            got: (q_diag.len(), 1),
        });
    }
    let gram = x.values().dot(&x.values().t());
    let xf = x.values().dot(f.values());
    solve_regularized(&gram, &xf, q_diag, lambda)
}

fn solve_regularized(
    gram: &Array2<f64>,
    xf: &Array2<f64>,
    q_diag: &Array1<f64>,
    lambda: f64,
) -> Result<Array2<f64>> {
    let mut a = gram.clone();
    for (i, q) in q_diag.iter().enumerate() {
        a[[i, i]] += lambda * q;
    }
    linalg::solve_spd(&a, xf)
}

/// Quadratic surrogate with the reweighting frozen:
/// ||X^T W - F||_F^2 + lambda sum_j q_j ||W^j||^2.
pub fn frozen_q_quadratic(
    x: &DataMatrix,
    w: &Array2<f64>,
    f: &Template,
    q_diag: &Array1<f64>,
    lambda: f64,
) -> f64 {
    let projected = x.values().t().dot(w);
    let diff = &projected - f.values();
    let fit: f64 = diff.iter().map(|v| v * v).sum();
    let ridge: f64 = w
        .rows()
        .into_iter()
        .zip(q_diag)
        .map(|(row, &q)| q * row.iter().map(|v| v * v).sum::<f64>())
        .sum();
    fit + lambda * ridge
}

/// Gradient of [`frozen_q_quadratic`] in W: 2 X (X^T W - F) + 2 lambda Q W.
///
/// Evaluated at q = q(W), this is also the gradient of the smoothed
/// objective, so its norm is the stationarity residual.
pub fn frozen_q_gradient(
    x: &DataMatrix,
    w: &Array2<f64>,
    f: &Template,
    q_diag: &Array1<f64>,
    lambda: f64,
) -> Array2<f64> {
    let projected = x.values().t().dot(w);
    let diff = &projected - f.values();
    let mut grad = x.values().dot(&diff) * 2.0;
    for (j, mut row) in grad.rows_mut().into_iter().enumerate() {
        row.scaled_add(2.0 * lambda * q_diag[j], &w.row(j));
    }
    grad
}

fn frobenius_norm(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Alternates the W and Q updates from Q = I until the relative change in
/// objective or in W drops below `config.tol`, or `max_iter` is reached.
///
/// With lambda = 0 the reweighting is irrelevant and the first W update is
/// already the least-squares solution, so the loop exits immediately.
pub fn solve_irls(x: &DataMatrix, f: &Template, config: &SolverConfig) -> Result<SolverState> {
    config.validate()?;
    let d = x.feature_count();
    let n = x.instance_count();
    if f.values().dim() != (n, d) {
        return Err(Error::ShapeMismatch {
            context: "template",
            expected: (n, d),
            got: f.values().dim(),
        });
    }

    let gram = x.values().dot(&x.values().t());
    let xf = x.values().dot(f.values());

    let mut q = Array1::ones(d);
    let mut w_prev: Option<Array2<f64>> = None;
    let mut obj_prev = f64::INFINITY;
    let mut objective_trace = Vec::new();
    let mut delta_w_trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut w = Array2::zeros((d, d));

    for _ in 0..config.max_iter {
        let w_next = solve_regularized(&gram, &xf, &q, config.lambda)?;
        let obj = objective_with(x, &w_next, f, config.lambda, config.epsilon, config.penalty)?;
        let delta = match &w_prev {
            Some(prev) => frobenius_norm(&(&w_next - prev)),
            None => frobenius_norm(&w_next),
        };
        objective_trace.push(obj);
        delta_w_trace.push(delta);
        iterations += 1;

        q = update_q_with(&w_next, config.epsilon, config.penalty);
        let w_norm = frobenius_norm(&w_next);

        if config.lambda == 0.0 {
            w = w_next;
            converged = true;
            break;
        }
        if w_prev.is_some() {
            let rel_obj = (obj_prev - obj).abs() / obj_prev.abs().max(f64::MIN_POSITIVE);
            let rel_dw = delta / w_norm.max(f64::MIN_POSITIVE);
            if rel_obj < config.tol || rel_dw < config.tol {
                w = w_next;
                converged = true;
                break;
            }
        }
        obj_prev = obj;
        w = w_next.clone();
        w_prev = Some(w_next);
    }

    Ok(SolverState {
        w,
        q_diag: q,
        objective_trace,
        delta_w_trace,
        iterations,
        converged,
    })
}
