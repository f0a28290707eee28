//! Constrained solvers behind KMM and KLIEP.
//!
//! * [`solve_box_sum_qp`]: `min ½wᵀHw − cᵀw` over `0 ≤ w ≤ B`, `|Σw − s| ≤ sε`,
//!   by spectral projected gradient with an exact line search along the
//!   projected direction, interleaved with conjugate gradients on the current
//!   face (kernel matrices are badly conditioned, and gradient steps alone crawl).
//! * [`kliep_ascent`]: projected gradient ascent on the mean test
//!   log-likelihood with the train-mean normalization restored by rescaling.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub h: Array2<f64>,
    pub c: Array1<f64>,
    pub upper: f64,
    pub sum_target: f64,
    pub sum_slack: f64,
}

impl QpProblem {
    pub fn validate(&self) -> Result<()> {
        let n = self.c.len();
        if self.h.dim() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.h.nrows(),
            });
        }
        if !(self.upper > 0.0 && self.upper.is_finite()) {
            return Err(Error::InvalidParameter(format!("upper bound must be positive, got {}", self.upper)));
        }
        if !(self.sum_target > 0.0 && self.sum_target.is_finite()) {
            return Err(Error::InvalidParameter(format!("sum target must be positive, got {}", self.sum_target)));
        }
        if !(self.sum_slack >= 0.0 && self.sum_slack.is_finite()) {
            return Err(Error::InvalidParameter(format!("sum slack must be ≥ 0, got {}", self.sum_slack)));
        }
        if self.h.iter().chain(self.c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("QP data"));
        }
        let scale = self.h.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in (i + 1)..n {
                if (self.h[[i, j]] - self.h[[j, i]]).abs() > 1e-10 * scale {
                    return Err(Error::InvalidParameter(format!("H is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }

    pub fn objective(&self, w: ArrayView1<'_, f64>) -> f64 {
        0.5 * w.dot(&self.h.dot(&w)) - self.c.dot(&w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub solution: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
}

impl SolverReport {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the starting objective")
    }

    /// `Err(NotConverged)` unless the convergence flag is set.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                residual: self.kkt_residual,
            })
        }
    }
}

/// Euclidean projection onto `{0 ≤ w ≤ B} ∩ {|Σw − s| ≤ sε}`.
///
/// The projection has the form `clip(v − μ, 0, B)` for a scalar `μ`; the sum
/// is piecewise linear and non-increasing in `μ`, so `μ` is found exactly by
/// a search over the sorted breakpoints.
pub fn project_box_slab(v: ArrayView1<'_, f64>, upper: f64, sum_target: f64, slack: f64) -> Result<Array1<f64>> {
    if !(upper > 0.0) || !(slack >= 0.0) {
        return Err(Error::InvalidParameter("need B > 0 and ε ≥ 0".into()));
    }
    let n = v.len() as f64;
    let lo = sum_target * (1.0 - slack);
    let hi = sum_target * (1.0 + slack);
    if lo > n * upper {
        return Err(Error::Infeasible(format!(
            "s(1-ε) = {lo} exceeds nB = {}",
            n * upper
        )));
    }
    if hi < 0.0 {
        return Err(Error::Infeasible(format!("s(1+ε) = {hi} is negative")));
    }
    let clip = |mu: f64| v.mapv(|x| (x - mu).clamp(0.0, upper));
    let total = |mu: f64| v.iter().map(|x| (x - mu).clamp(0.0, upper)).sum::<f64>();

    let s0 = total(0.0);
    let target = if s0 > hi {
        hi
    } else if s0 < lo {
        lo
    } else {
        return Ok(clip(0.0));
    };

    let mut breaks: Vec<f64> = v.iter().flat_map(|&x| [x - upper, x]).collect();
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup();
    // total() is n·B at or below the first breakpoint and 0 at or above the last.
    let (mut a, mut b) = (0usize, breaks.len() - 1);
    if total(breaks[a]) <= target {
        return Ok(clip(breaks[a]));
    }
    if total(breaks[b]) >= target {
        return Ok(clip(breaks[b]));
    }
    while b - a > 1 {
        let mid = (a + b) / 2;
        if total(breaks[mid]) >= target {
            a = mid;
        } else {
            b = mid;
        }
    }
    let (ma, mb) = (breaks[a], breaks[b]);
    let (sa, sb) = (total(ma), total(mb));
    let mu = if sa == sb { ma } else { ma + (sa - target) * (mb - ma) / (sa - sb) };
    Ok(clip(mu))
}

fn inf_norm(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

struct QpState {
    w: Array1<f64>,
    g: Array1<f64>,
    f: f64,
}

impl QpState {
    fn new(p: &QpProblem, w: Array1<f64>) -> Self {
        let hw = p.h.dot(&w);
        let g = &hw - &p.c;
        let f = 0.5 * w.dot(&hw) - p.c.dot(&w);
        Self { w, g, f }
    }
}

// Conjugate gradients on the current face: bound coordinates stay fixed and,
// when the slab is binding, directions are kept in the zero-sum subspace.
// Each step is an exact line minimization truncated at the first constraint
// it would cross; hitting one ends the call since the face has changed.
// Kernel matrices are numerically singular, which CG tolerates where a
// factorization would not. Returns the number of accepted steps.
fn face_cg(p: &QpProblem, st: &mut QpState, max_steps: usize, tol: f64, trace: &mut Vec<f64>) -> Result<usize> {
    let (b, s, eps) = (p.upper, p.sum_target, p.sum_slack);
    let (lo, hi) = (s * (1.0 - eps), s * (1.0 + eps));
    let free: Vec<bool> = st.w.iter().map(|&v| v > 0.0 && v < b).collect();
    let m = free.iter().filter(|&&f| f).count();
    if m == 0 {
        return Ok(0);
    }
    let total = st.w.sum();
    let slab_tol = 1e-10 * s.max(1.0);
    let slab_active = (total - lo).abs() <= slab_tol || (total - hi).abs() <= slab_tol;
    let restrict = |v: &Array1<f64>| -> Array1<f64> {
        let mut out = Array1::from_iter(v.iter().zip(&free).map(|(&x, &f)| if f { x } else { 0.0 }));
        if slab_active {
            let mean = out.sum() / m as f64;
            out.iter_mut().zip(&free).filter(|(_, &f)| f).for_each(|(x, _)| *x -= mean);
        }
        out
    };

    let mut r = restrict(&st.g.mapv(|v| -v));
    let mut dir = r.clone();
    let mut taken = 0;
    for _ in 0..max_steps {
        if inf_norm(&r) <= tol {
            break;
        }
        let hd = p.h.dot(&dir);
        let (gd, dhd, dd) = (st.g.dot(&dir), dir.dot(&hd), dir.dot(&dir));
        if gd >= 0.0 {
            break;
        }
        if dhd < -1e-8 * dd {
            return Err(Error::NonPsd(dhd / dd));
        }
        let t_star = if dhd > 0.0 { -gd / dhd } else { f64::INFINITY };
        let mut t_max = f64::INFINITY;
        for (i, &di) in dir.iter().enumerate() {
            if di < 0.0 {
                t_max = t_max.min(st.w[i] / -di);
            } else if di > 0.0 {
                t_max = t_max.min((b - st.w[i]) / di);
            }
        }
        let sd = dir.sum();
        let total = st.w.sum();
        if !slab_active && sd != 0.0 {
            let room = if sd > 0.0 { (hi - total) / sd } else { (lo - total) / sd };
            t_max = t_max.min(room.max(0.0));
        }
        let t = t_star.min(t_max);
        if !(t > 0.0 && t.is_finite()) {
            break;
        }
        let hit = t_max <= t_star;
        let mut w = st.w.clone();
        w.scaled_add(t, &dir);
        if hit {
            // Snap the coordinates that reached a bound.
            for (i, &di) in dir.iter().enumerate() {
                if di < 0.0 && st.w[i] / -di <= t_max * (1.0 + 1e-12) {
                    w[i] = 0.0;
                } else if di > 0.0 && (b - st.w[i]) / di <= t_max * (1.0 + 1e-12) {
                    w[i] = b;
                }
            }
        }
        w.mapv_inplace(|v| v.clamp(0.0, b));
        let next = QpState::new(p, w);
        if !(next.f <= st.f) {
            break;
        }
        *st = next;
        trace.push(st.f);
        taken += 1;
        if hit {
            break;
        }
        // Polak–Ribière with restart: a fresh residual each step keeps the
        // recurrence honest against drift.
        let r_next = restrict(&st.g.mapv(|v| -v));
        let beta = ((r_next.dot(&r_next) - r_next.dot(&r)) / r.dot(&r)).max(0.0);
        dir = &r_next + &(&dir * beta);
        r = r_next;
    }
    Ok(taken)
}

fn projected_residual(p: &QpProblem, st: &QpState) -> Result<f64> {
    let pg = project_box_slab((&st.w - &st.g).view(), p.upper, p.sum_target, p.sum_slack)?;
    Ok(inf_norm(&(pg - &st.w)))
}

/// Projected-gradient solve of a box-and-slab constrained QP.
///
/// Each iteration takes one spectral projected-gradient step, which can both
/// add and release bounds, then runs conjugate gradients on the resulting
/// face (restarting whenever a bound is hit, at most `n` CG steps).
/// `iterations` counts the gradient steps. `converged` is set once `‖P(w − ∇f) − w‖∞ ≤ tol`. Negative
/// curvature along a search direction beyond `1e-8` per unit length fails
/// with `NonPsd`. Every recorded objective is no larger than the one before.
pub fn solve_box_sum_qp(p: &QpProblem, tol: f64, max_iter: usize) -> Result<SolverReport> {
    p.validate()?;
    let n = p.c.len();
    let (b, s, eps) = (p.upper, p.sum_target, p.sum_slack);
    let start = Array1::from_elem(n, (s / n as f64).min(b));
    let mut st = QpState::new(p, project_box_slab(start.view(), b, s, eps)?);
    let mut trace = vec![st.f];

    // Safe first step: inverse of the ∞-norm bound on the largest eigenvalue.
    let row_norm = p
        .h
        .outer_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let mut step = if row_norm > 0.0 { 1.0 / row_norm } else { 1.0 };

    let mut iterations = 0;
    let mut residual = projected_residual(p, &st)?;
    while residual > tol && iterations < max_iter {
        iterations += 1;

        let trial = project_box_slab((&st.w - &(&st.g * step)).view(), b, s, eps)?;
        let d = &trial - &st.w;
        let hd = p.h.dot(&d);
        let (dhd, gd, dd) = (d.dot(&hd), st.g.dot(&d), d.dot(&d));
        if dd == 0.0 || gd >= 0.0 {
            // No descent at this step length; shrink until the numerical floor.
            step *= 0.5;
            if step < 1e-16 {
                break;
            }
            continue;
        }
        if dhd < -1e-8 * dd {
            return Err(Error::NonPsd(dhd / dd));
        }
        let lambda = if dhd > 0.0 { (-gd / dhd).min(1.0) } else { 1.0 };
        let mut w = st.w.clone();
        w.scaled_add(lambda, &d);
        let next = QpState::new(p, w);
        if next.f > st.f {
            step *= 0.5;
            if step < 1e-16 {
                break;
            }
            continue;
        }
        st = next;
        trace.push(st.f);
        let sy = lambda * lambda * dhd;
        step = if sy > 0.0 { (lambda * lambda * dd / sy).clamp(1e-12, 1e12) } else { 1e12 };

        // CG sweeps, restarted on each new face, add bounds until the face
        // optimum is reached; the next gradient step may release them again.
        let mut budget = n;
        while budget > 0 {
            let k = face_cg(p, &mut st, budget, 0.1 * tol, &mut trace)?;
            if k == 0 {
                break;
            }
            budget = budget.saturating_sub(k);
        }
        residual = projected_residual(p, &st)?;
    }

    Ok(SolverReport {
        solution: st.w.to_vec(),
        objective_trace: trace,
        iterations,
        converged: residual <= tol,
        kkt_residual: residual,
    })
}

/// Mean test log-likelihood `(1/n_te) Σ_j log (A_te α)_j`.
pub fn kliep_objective(basis_te: ArrayView2<'_, f64>, alpha: ArrayView1<'_, f64>) -> f64 {
    let w = basis_te.dot(&alpha);
    w.iter().map(|v| v.ln()).sum::<f64>() / w.len() as f64
}

/// Maximizes `Σ_j log(Σ_k α_k φ_k(x_j))` over test rows subject to
/// `Σ_i Σ_k α_k φ_k(x_i) = n_tr` over training rows and `α ≥ 0`.
///
/// Steps are taken in the normalized coordinates `β_k = α_k b_k / n_tr`
/// (`b_k` the training mass of basis `k`), where the constraint reads
/// `Σβ = 1`. Each gradient step is projected back onto that hyperplane, then
/// `β` is clipped at zero and rescaled to unit sum. Armijo backtracking
/// (start 1.0, factor 0.5, c = 1e-4) keeps the trace non-decreasing. Stops
/// when the relative objective change is at most `tol`.
pub fn kliep_ascent(
    basis_tr: ArrayView2<'_, f64>,
    basis_te: ArrayView2<'_, f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(Array1<f64>, SolverReport)> {
    let (n_tr, b) = basis_tr.dim();
    let (n_te, b_te) = basis_te.dim();
    if b != b_te {
        return Err(Error::DimensionMismatch { expected: b, found: b_te });
    }
    if n_tr == 0 || n_te == 0 || b == 0 {
        return Err(Error::EmptyDataset);
    }
    if basis_tr.iter().chain(basis_te.iter()).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter("basis values must be finite and ≥ 0".into()));
    }
    if let Some(row) = basis_te.outer_iter().position(|r| r.iter().all(|&v| v == 0.0)) {
        return Err(Error::DegenerateBasis(row));
    }
    let mass: Array1<f64> = basis_tr.sum_axis(ndarray::Axis(0));
    if let Some(k) = mass.iter().position(|&m| m == 0.0) {
        return Err(Error::Infeasible(format!("basis function {k} has no training mass")));
    }
    let n_tr_f = n_tr as f64;
    // Test basis in β coordinates: column k scaled by n_tr / b_k.
    let scaled_te = &basis_te * &mass.mapv(|m| n_tr_f / m);

    let eval = |beta: &Array1<f64>| -> f64 {
        let w = scaled_te.dot(beta);
        w.iter().map(|v| v.ln()).sum::<f64>() / n_te as f64
    };

    let mut beta = Array1::from_elem(b, 1.0 / b as f64);
    let mut obj = eval(&beta);
    let mut trace = vec![obj];
    let mut iterations = 0;
    let mut converged = false;
    let mut rel_change = f64::INFINITY;

    while iterations < max_iter {
        iterations += 1;
        let w = scaled_te.dot(&beta);
        let inv: Array1<f64> = w.mapv(|v| 1.0 / v);
        let grad = scaled_te.t().dot(&inv) / n_te as f64;

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut cand = &beta + &(&grad * t);
            // Back onto Σβ = 1 along the constraint normal, then clip.
            let shift = (1.0 - cand.sum()) / b as f64;
            cand.mapv_inplace(|v| (v + shift).max(0.0));
            let total = cand.sum();
            if total > 0.0 {
                cand /= total;
                let cand_obj = eval(&cand);
                let gain = grad.dot(&(&cand - &beta));
                if cand_obj.is_finite() && cand_obj >= obj + 1e-4 * gain.max(0.0) {
                    accepted = Some((cand, cand_obj));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((cand, cand_obj)) = accepted else {
            // No ascent left at machine precision.
            converged = true;
            rel_change = 0.0;
            break;
        };
        rel_change = (cand_obj - obj).abs() / obj.abs().max(1.0);
        beta = cand;
        obj = cand_obj;
        trace.push(obj);
        if rel_change <= tol {
            converged = true;
            break;
        }
    }

    let mut alpha = &beta * &mass.mapv(|m| n_tr_f / m);
    let total = mass.dot(&alpha);
    alpha *= n_tr_f / total;
    let report = SolverReport {
        solution: alpha.to_vec(),
        objective_trace: trace,
        iterations,
        converged,
        kkt_residual: rel_change,
    };
    Ok((alpha, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_hessian_unconstrained_optimum() {
        let p = QpProblem {
            h: Array2::eye(3),
            c: array![1.0, 1.0, 1.0],
            upper: 1000.0,
            sum_target: 3.0,
            sum_slack: 0.9,
        };
        let r = solve_box_sum_qp(&p, 1e-10, 100).unwrap();
        assert!(r.converged);
        for v in &r.solution {
            assert!((v - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn identity_hessian_box_clipping() {
        let p = QpProblem {
            h: Array2::eye(2),
            c: array![2.0, 2.0],
            upper: 1.0,
            sum_target: 2.0,
            sum_slack: 0.9,
        };
        let r = solve_box_sum_qp(&p, 1e-10, 100).unwrap();
        assert!(r.converged);
        assert!((r.solution[0] - 1.0).abs() < 1e-10 && (r.solution[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn indefinite_hessian_is_rejected() {
        let p = QpProblem {
            h: array![[1.0, 0.0], [0.0, -2.0]],
            c: array![0.0, 0.0],
            upper: 1.0,
            sum_target: 1.0,
            sum_slack: 0.5,
        };
        assert!(matches!(solve_box_sum_qp(&p, 1e-10, 100), Err(Error::NonPsd(_))));
    }

    #[test]
    fn asymmetric_hessian_is_rejected() {
        let p = QpProblem {
            h: array![[1.0, 0.5], [0.0, 1.0]],
            c: array![0.0, 0.0],
            upper: 1.0,
            sum_target: 1.0,
            sum_slack: 0.5,
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn projection_keeps_feasible_points() {
        let v = array![0.5, 1.0, 1.5];
        let p = project_box_slab(v.view(), 2.0, 3.0, 0.1).unwrap();
        assert_eq!(p, v);
    }

    #[test]
    fn projection_clamps_box() {
        let b = 3.0;
        let v = array![-1.0, 2.0 * b];
        let p = project_box_slab(v.view(), b, 3.0, 0.99).unwrap();
        assert_eq!(p, array![0.0, b]);
    }

    #[test]
    fn infeasible_slab() {
        let v = array![0.0, 0.0];
        assert!(matches!(
            project_box_slab(v.view(), 1.0, 10.0, 0.1),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn kliep_single_basis_is_pinned_by_constraint() {
        let tr = array![[0.5], [0.25], [1.0], [0.125]];
        let te = array![[0.9], [0.3]];
        let (alpha, report) = kliep_ascent(tr.view(), te.view(), 1e-8, 100).unwrap();
        let expected = 4.0 / (0.5 + 0.25 + 1.0 + 0.125);
        assert!((alpha[0] - expected).abs() <= 1e-14 * expected);
        assert!(report.converged);
    }

    #[test]
    fn kliep_zero_test_row_is_degenerate() {
        let tr = array![[0.5, 0.1]];
        let te = array![[0.9, 0.0], [0.0, 0.0]];
        assert!(matches!(
            kliep_ascent(tr.view(), te.view(), 1e-8, 100),
            Err(Error::DegenerateBasis(1))
        ));
    }

    #[test]
    fn kliep_constraint_and_monotone_trace() {
        let tr = Array2::from_shape_fn((7, 3), |(i, k)| (-(((i as f64) - 2.0 * k as f64).powi(2)) / 4.0).exp());
        let te = Array2::from_shape_fn((5, 3), |(j, k)| (-(((j as f64) + 1.0 - 2.0 * k as f64).powi(2)) / 4.0).exp());
        let (alpha, report) = kliep_ascent(tr.view(), te.view(), 1e-10, 5000).unwrap();
        let total: f64 = tr.dot(&alpha).sum();
        assert!((total - 7.0).abs() < 1e-9);
        assert!(alpha.iter().all(|&a| a >= 0.0));
        for pair in report.objective_trace.windows(2) {
            assert!(pair[1] >= pair[0]);
        }
    }
}
