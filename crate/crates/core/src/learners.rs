//! Ridge and one-vs-rest logistic regression.
//!
//! These are the base learners used both to build the prediction features of
//! the φ-transform and to produce per-example cross-validated errors.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::linalg::cholesky_solve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ridge,
    Logistic,
}

/// Learner hyperparameters shared by ridge and logistic fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub lambda: f64,
    /// Newton iteration cap for logistic fits.
    pub max_iter: usize,
    /// Target gradient ∞-norm for logistic fits.
    pub grad_tol: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            max_iter: 200,
            grad_tol: 1e-6,
        }
    }
}

impl LearnerConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }
}

/// A fitted linear model with `k` output columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: ModelKind,
    pub lambda: f64,
    /// `d × k`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LinearModel {
    pub fn input_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Ridge for regression, logistic for classification.
pub fn fit(train: &Dataset, cfg: &LearnerConfig) -> Result<LinearModel> {
    match train.task() {
        Task::Regression => fit_ridge(train, cfg.lambda),
        Task::Classification { .. } => fit_logistic_with(train, cfg),
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be finite and ≥ 0, got {lambda}")));
    }
    Ok(())
}

/// Minimizes `‖y - Xw - b‖² + λ‖w‖²` with an unpenalized intercept.
pub fn fit_ridge(train: &Dataset, lambda: f64) -> Result<LinearModel> {
    if train.task() != Task::Regression {
        return Err(Error::TaskMismatch("ridge regression needs a regression dataset"));
    }
    check_lambda(lambda)?;
    let x = train.covariates();
    let y = train.targets();
    let x_mean = x.mean_axis(Axis(0)).expect("non-empty dataset");
    let y_mean = y.mean().expect("non-empty dataset");
    let xc = &x - &x_mean;
    let yc = y - y_mean;

    let mut gram = xc.t().dot(&xc);
    for j in 0..gram.nrows() {
        gram[[j, j]] += lambda;
    }
    let rhs = xc.t().dot(&yc);
    let w = cholesky_solve(gram.view(), rhs.view())?;
    let bias = y_mean - x_mean.dot(&w);
    let d = w.len();
    Ok(LinearModel {
        kind: ModelKind::Ridge,
        lambda,
        weights: w.into_shape_with_order((d, 1)).expect("column vector"),
        bias: Array1::from_elem(1, bias),
    })
}

pub fn fit_logistic(train: &Dataset, lambda: f64) -> Result<LinearModel> {
    fit_logistic_with(train, &LearnerConfig::with_lambda(lambda))
}

/// One-vs-rest regularized logistic regression, one column per class.
pub fn fit_logistic_with(train: &Dataset, cfg: &LearnerConfig) -> Result<LinearModel> {
    let classes = match train.task() {
        Task::Classification { classes } => classes,
        Task::Regression => return Err(Error::TaskMismatch("logistic regression needs class labels")),
    };
    check_lambda(cfg.lambda)?;
    if classes < 2 {
        return Err(Error::InvalidParameter("logistic regression needs at least two classes".into()));
    }
    let labels = train.labels();
    let mut counts = vec![0usize; classes];
    for &l in &labels {
        counts[l] += 1;
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::DegenerateClass(missing));
    }
    let x = train.covariates();
    let d = x.ncols();
    let mut weights = Array2::<f64>::zeros((d, classes));
    let mut bias = Array1::<f64>::zeros(classes);
    for c in 0..classes {
        let positive: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        let fit = fit_binary_logistic(x, &positive, cfg)?;
        weights.column_mut(c).assign(&fit.weights);
        bias[c] = fit.bias;
    }
    Ok(LinearModel {
        kind: ModelKind::Logistic,
        lambda: cfg.lambda,
        weights,
        bias,
    })
}

/// Result of a single binary logistic fit.
#[derive(Debug, Clone)]
pub struct BinaryLogisticFit {
    pub weights: Array1<f64>,
    pub bias: f64,
    /// Objective value before the first step and after every line-search step;
    /// the final gradient-judged steps move it only at rounding level.
    pub objective_trace: Vec<f64>,
    pub grad_inf_norm: f64,
}

#[inline]
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `Σ_i log(1 + exp(-s_i z_i)) + λ/2 ‖w‖²` with `z = Xw + b`, `s_i = ±1`.
pub(crate) fn logistic_objective(
    x: ArrayView2<'_, f64>,
    positive: &[bool],
    lambda: f64,
    w: ArrayView1<'_, f64>,
    b: f64,
) -> f64 {
    let z = x.dot(&w) + b;
    let loss: f64 = z
        .iter()
        .zip(positive)
        .map(|(&zi, &p)| if p { softplus(-zi) } else { softplus(zi) })
        .sum();
    loss + 0.5 * lambda * w.dot(&w)
}

/// Gradient of [`logistic_objective`]; the last entry is the bias component.
pub(crate) fn logistic_gradient(
    x: ArrayView2<'_, f64>,
    positive: &[bool],
    lambda: f64,
    w: ArrayView1<'_, f64>,
    b: f64,
) -> Array1<f64> {
    let z = x.dot(&w) + b;
    let r: Array1<f64> = z
        .iter()
        .zip(positive)
        .map(|(&zi, &p)| sigmoid(zi) - if p { 1.0 } else { 0.0 })
        .collect();
    let d = x.ncols();
    let mut g = Array1::<f64>::zeros(d + 1);
    g.slice_mut(ndarray::s![..d]).assign(&(x.t().dot(&r) + &(&w * lambda)));
    g[d] = r.sum();
    g
}

/// Damped Newton with Armijo backtracking (start 1.0, factor 0.5, c = 1e-4).
///
/// Falls back to the steepest-descent direction when the Hessian is not
/// numerically positive definite.
pub fn fit_binary_logistic(
    x: ArrayView2<'_, f64>,
    positive: &[bool],
    cfg: &LearnerConfig,
) -> Result<BinaryLogisticFit> {
    let (n, d) = x.dim();
    if positive.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: positive.len(),
        });
    }
    let lambda = cfg.lambda;
    let mut w = Array1::<f64>::zeros(d);
    let mut b = 0.0;
    let mut obj = logistic_objective(x, positive, lambda, w.view(), b);
    let mut trace = vec![obj];
    let mut grad = logistic_gradient(x, positive, lambda, w.view(), b);
    let mut gnorm = inf_norm(&grad);

    let mut iter = 0;
    while gnorm > cfg.grad_tol {
        if iter >= cfg.max_iter {
            return Err(Error::NotConverged {
                iterations: iter,
                residual: gnorm,
            });
        }
        iter += 1;

        let z = x.dot(&w) + b;
        let s: Array1<f64> = z.mapv(|zi| {
            let p = sigmoid(zi);
            p * (1.0 - p)
        });
        let hess = logistic_hessian(x, s.view(), lambda);
        let dir = match cholesky_solve(hess.view(), grad.view()) {
            Ok(step) => -step,
            Err(_) => -grad.clone(),
        };
        let slope = grad.dot(&dir);
        let dir = if slope < 0.0 { dir } else { -grad.clone() };
        let slope = grad.dot(&dir);

        // Near the optimum the predicted decrease drops below the rounding of
        // the summed loss; judge the full step by its gradient instead.
        if -slope <= 1e-12 * obj.abs().max(1.0) {
            let w_new = &w + &dir.slice(ndarray::s![..d]);
            let b_new = b + dir[d];
            let g_new = logistic_gradient(x, positive, lambda, w_new.view(), b_new);
            if inf_norm(&g_new) >= gnorm {
                break;
            }
            w = w_new;
            b = b_new;
            obj = logistic_objective(x, positive, lambda, w.view(), b);
            grad = g_new;
            gnorm = inf_norm(&grad);
            continue;
        }

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let w_new = &w + &(&dir.slice(ndarray::s![..d]) * t);
            let b_new = b + t * dir[d];
            let obj_new = logistic_objective(x, positive, lambda, w_new.view(), b_new);
            if obj_new <= obj + 1e-4 * t * slope {
                w = w_new;
                b = b_new;
                obj = obj_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No representable decrease left along a descent direction.
            break;
        }
        trace.push(obj);
        grad = logistic_gradient(x, positive, lambda, w.view(), b);
        gnorm = inf_norm(&grad);
    }
    if gnorm > cfg.grad_tol {
        return Err(Error::NotConverged {
            iterations: iter,
            residual: gnorm,
        });
    }
    Ok(BinaryLogisticFit {
        weights: w,
        bias: b,
        objective_trace: trace,
        grad_inf_norm: gnorm,
    })
}

fn logistic_hessian(x: ArrayView2<'_, f64>, s: ArrayView1<'_, f64>, lambda: f64) -> Array2<f64> {
    let (n, d) = x.dim();
    let mut h = Array2::<f64>::zeros((d + 1, d + 1));
    for i in 0..n {
        let si = s[i];
        if si == 0.0 {
            continue;
        }
        let row = x.row(i);
        for a in 0..d {
            let va = si * row[a];
            for bcol in a..d {
                h[[a, bcol]] += va * row[bcol];
            }
            h[[a, d]] += va;
        }
        h[[d, d]] += si;
    }
    for a in 0..=d {
        for bcol in 0..a {
            h[[a, bcol]] = h[[bcol, a]];
        }
    }
    for a in 0..d {
        h[[a, a]] += lambda;
    }
    h
}

fn inf_norm(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Pre-threshold scores: linear outputs for ridge, per-class one-vs-rest
/// probabilities (not renormalized) for logistic.
pub fn predict_raw(model: &LinearModel, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if x.ncols() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            found: x.ncols(),
        });
    }
    let mut scores = x.dot(&model.weights) + &model.bias;
    if model.kind == ModelKind::Logistic {
        const UPPER: f64 = 1.0 - f64::EPSILON / 2.0;
        scores.mapv_inplace(|z| sigmoid(z).clamp(f64::MIN_POSITIVE, UPPER));
    }
    Ok(scores)
}

/// Argmax over score columns; ties go to the lowest class index.
pub fn predict_labels(model: &LinearModel, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    let scores = predict_raw(model, x)?;
    Ok(scores
        .outer_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect())
}

/// 0/1 loss for classification, squared error for regression.
pub fn per_example_error(model: &LinearModel, data: &Dataset) -> Result<Vec<f64>> {
    match (data.task(), model.kind) {
        (Task::Classification { .. }, ModelKind::Logistic) => {
            let pred = predict_labels(model, data.covariates())?;
            Ok(pred
                .iter()
                .zip(data.labels())
                .map(|(&p, l)| if p == l { 0.0 } else { 1.0 })
                .collect())
        }
        (Task::Regression, ModelKind::Ridge) => {
            let pred = predict_raw(model, data.covariates())?;
            Ok(pred
                .column(0)
                .iter()
                .zip(data.targets())
                .map(|(p, y)| (y - p) * (y - p))
                .collect())
        }
        _ => Err(Error::TaskMismatch("model kind does not match dataset task")),
    }
}
