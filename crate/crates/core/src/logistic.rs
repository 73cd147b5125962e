//! Weighted, optionally L1-penalized logistic regression with a fixed
//! per-row offset.
//!
//! The objective is
//!
//!   (1/n) sum_i w_i * l(y_i, offset_i + x_i . theta) + lambda * sum_{j penalized} |theta_j|
//!
//! solved by IRLS: each outer iteration builds the weighted quadratic
//! model at the current iterate and takes a damped Newton step (lambda = 0)
//! or runs cyclic coordinate descent with soft thresholding on that
//! quadratic (lambda > 0). Step halving keeps the recorded objective
//! non-increasing.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{entropy_loss, sigmoid};

pub const MAX_OUTER_ITERATIONS: usize = 200;
pub const OBJECTIVE_REL_TOL: f64 = 1e-9;
pub const KKT_TOL: f64 = 1e-7;
/// Coefficient cap past which an unpenalized fit is declared divergent
/// (probabilities are then within ~1e-13 of {0,1}).
pub const COEFFICIENT_CAP: f64 = 30.0;

/// Working probabilities are pulled this far inside (0,1) when building
/// the quadratic model, keeping IRLS moving through saturated rows until
/// the coefficient cap can catch separable fits.
const WORKING_PROB_EPS: f64 = 1e-14;
/// Cap on the working-response shift (y - p)/var for rows whose label
/// opposes a saturated probability.
const WORKING_SHIFT_CAP: f64 = 1e6;
const CD_COORD_TOL: f64 = 1e-12;
const CD_MAX_SWEEPS: usize = 10_000;

/// L1 penalty strength; `None` disables the penalty regardless of lambda.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Penalty {
    pub lambda: f64,
    pub kind: PenaltyKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    None,
    L1,
}

impl Penalty {
    pub fn none() -> Self {
        Penalty {
            lambda: 0.0,
            kind: PenaltyKind::None,
        }
    }

    pub fn l1(lambda: f64) -> Self {
        Penalty {
            lambda,
            kind: PenaltyKind::L1,
        }
    }

    /// Lambda actually applied: 0 when the kind is `None`.
    pub fn effective_lambda(&self) -> f64 {
        match self.kind {
            PenaltyKind::None => 0.0,
            PenaltyKind::L1 => self.lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::Config(format!(
                "penalty lambda must be a nonnegative real, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

impl Default for Penalty {
    fn default() -> Self {
        Penalty::none()
    }
}

/// Diagnostics from one solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub iterations: usize,
    pub objective: f64,
    pub kkt_residual: f64,
    pub converged: bool,
    /// Set when the separable-data coefficient cap was hit.
    pub diverged: bool,
    /// Objective after each accepted iterate, starting at the initial
    /// point; non-increasing by construction.
    pub objective_trace: Vec<f64>,
}

/// Fits theta from a zero start. `penalized[j]` marks columns the L1
/// penalty applies to (intercepts are excluded by callers).
pub fn solve_logistic(
    design: ArrayView2<f64>,
    y: ArrayView1<f64>,
    w: ArrayView1<f64>,
    offset: Option<ArrayView1<f64>>,
    penalty: &Penalty,
    penalized: &[bool],
) -> Result<(Array1<f64>, FitReport)> {
    let n = design.nrows();
    let p = design.ncols();
    if n == 0 {
        return Err(Error::Data("cannot fit on an empty dataset".into()));
    }
    if y.len() != n || w.len() != n {
        return Err(Error::DimensionMismatch {
            context: "labels/weights vs design rows".into(),
            expected: n,
            got: y.len().min(w.len()),
        });
    }
    if penalized.len() != p {
        return Err(Error::DimensionMismatch {
            context: "penalty mask vs design columns".into(),
            expected: p,
            got: penalized.len(),
        });
    }
    if let Some(o) = offset {
        if o.len() != n {
            return Err(Error::DimensionMismatch {
                context: "offset vs design rows".into(),
                expected: n,
                got: o.len(),
            });
        }
        if o.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("offset contains non-finite values".into()));
        }
    }
    penalty.validate()?;
    let lambda = penalty.effective_lambda();

    let inv_n = 1.0 / n as f64;
    let offset_vec = offset.map(|o| o.to_owned());
    let eta_of = |theta: &Array1<f64>| -> Array1<f64> {
        let mut eta = design.dot(theta);
        if let Some(o) = &offset_vec {
            eta += o;
        }
        eta
    };
    let objective_of = |theta: &Array1<f64>, eta: &Array1<f64>| -> f64 {
        let mut obj = 0.0;
        for i in 0..n {
            obj += w[i] * entropy_loss(y[i], eta[i]);
        }
        obj *= inv_n;
        if lambda > 0.0 {
            for j in 0..p {
                if penalized[j] {
                    obj += lambda * theta[j].abs();
                }
            }
        }
        obj
    };
    // (1/n) X^T (w .* (p - y))
    let gradient_of = |probs: &Array1<f64>| -> Array1<f64> {
        let resid: Array1<f64> =
            Array1::from_iter((0..n).map(|i| w[i] * (probs[i] - y[i]) * inv_n));
        design.t().dot(&resid)
    };

    let mut theta: Array1<f64> = Array1::zeros(p);
    let mut eta = eta_of(&theta);
    let mut probs = eta.mapv(sigmoid);
    let mut objective = objective_of(&theta, &eta);
    let mut gradient = gradient_of(&probs);
    let mut kkt = kkt_residual(&gradient, &theta, lambda, penalized);
    let mut trace = vec![objective];
    let mut converged = kkt < KKT_TOL;
    let mut diverged = false;
    let mut iterations = 0;

    while !converged && iterations < MAX_OUTER_ITERATIONS {
        iterations += 1;

        // quadratic model weights and working response
        let mut qw = Array1::zeros(n);
        let mut z = Array1::zeros(n);
        for i in 0..n {
            let p_work = probs[i].clamp(WORKING_PROB_EPS, 1.0 - WORKING_PROB_EPS);
            let var = p_work * (1.0 - p_work);
            qw[i] = w[i] * var;
            let lin = eta[i] - offset_vec.as_ref().map_or(0.0, |o| o[i]);
            let shift = ((y[i] - probs[i]) / var).clamp(-WORKING_SHIFT_CAP, WORKING_SHIFT_CAP);
            z[i] = lin + shift;
        }

        let candidate = if lambda > 0.0 {
            coordinate_descent(design, &qw, &z, lambda, penalized, &theta, inv_n)
        } else {
            newton_candidate(design, &qw, &gradient, &theta, inv_n)
        };

        // step halving against the true penalized objective
        let direction = &candidate - &theta;
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-12 {
            let trial = &theta + &direction.mapv(|v| v * step);
            let trial_eta = eta_of(&trial);
            let trial_obj = objective_of(&trial, &trial_eta);
            if trial_obj <= objective {
                accepted = Some((trial, trial_eta, trial_obj));
                break;
            }
            step *= 0.5;
        }
        let Some((new_theta, new_eta, new_obj)) = accepted else {
            // no descent direction left; report whatever the KKT check says
            break;
        };

        let previous_objective = objective;
        theta = new_theta;
        eta = new_eta;
        objective = new_obj;
        probs = eta.mapv(sigmoid);
        gradient = gradient_of(&probs);
        kkt = kkt_residual(&gradient, &theta, lambda, penalized);
        trace.push(objective);

        let max_abs = theta.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let unpenalized_max = theta
            .iter()
            .zip(penalized)
            .filter(|(_, &pen)| !pen)
            .fold(0.0f64, |m, (&v, _)| m.max(v.abs()));
        if (lambda == 0.0 && max_abs > COEFFICIENT_CAP)
            || (lambda > 0.0 && unpenalized_max > COEFFICIENT_CAP)
        {
            diverged = true;
            break;
        }

        // relative to the objective itself so separable fits whose loss
        // decays toward zero keep running into the coefficient cap
        let rel_change =
            (previous_objective - objective).abs() / objective.abs().max(f64::MIN_POSITIVE);
        if kkt < KKT_TOL && rel_change < OBJECTIVE_REL_TOL {
            converged = true;
        }
    }

    let report = FitReport {
        iterations,
        objective,
        kkt_residual: kkt,
        converged: converged && !diverged,
        diverged,
        objective_trace: trace,
    };
    Ok((theta, report))
}

/// Max violation of the first-order conditions for the penalized
/// objective: plain gradient norm on unpenalized columns, subgradient
/// conditions elsewhere.
pub fn kkt_residual(
    gradient: &Array1<f64>,
    theta: &Array1<f64>,
    lambda: f64,
    penalized: &[bool],
) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..gradient.len() {
        let g = gradient[j];
        let v = if lambda == 0.0 || !penalized[j] {
            g.abs()
        } else if theta[j] > 0.0 {
            (g + lambda).abs()
        } else if theta[j] < 0.0 {
            (g - lambda).abs()
        } else {
            (g.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Damped Newton target: theta - H^{-1} g with H the (1/n)-scaled weighted
/// Gram matrix; a tiny jitter keeps Cholesky alive on collinear designs
/// without moving the fixed point.
fn newton_candidate(
    design: ArrayView2<f64>,
    qw: &Array1<f64>,
    gradient: &Array1<f64>,
    theta: &Array1<f64>,
    inv_n: f64,
) -> Array1<f64> {
    let p = design.ncols();
    let mut hessian = weighted_gram(design, qw, inv_n);
    let mean_diag = (0..p).map(|j| hessian[(j, j)]).sum::<f64>() / p as f64;
    let mut jitter = 0.0;
    loop {
        match cholesky_solve(&hessian, gradient) {
            Some(delta) => return theta - &delta,
            None => {
                let bump = if jitter == 0.0 {
                    1e-10 * mean_diag.max(1e-10)
                } else {
                    jitter * 100.0
                };
                for j in 0..p {
                    hessian[(j, j)] += bump - jitter;
                }
                jitter = bump;
                if jitter > 1e2 * mean_diag.max(1.0) {
                    // hopeless Hessian; fall back to a gradient step
                    return theta - &gradient.mapv(|g| g / mean_diag.max(1e-10));
                }
            }
        }
    }
}

/// Cyclic coordinate descent with soft thresholding on the weighted
/// quadratic (1/2n) sum_i qw_i (z_i - x_i.theta)^2 + lambda |theta_pen|_1,
/// warm-started at the current iterate.
fn coordinate_descent(
    design: ArrayView2<f64>,
    qw: &Array1<f64>,
    z: &Array1<f64>,
    lambda: f64,
    penalized: &[bool],
    start: &Array1<f64>,
    inv_n: f64,
) -> Array1<f64> {
    let n = design.nrows();
    let p = design.ncols();
    let mut theta = start.clone();
    // column curvatures c_j = (1/n) sum_i qw_i x_ij^2
    let mut curvature = vec![0.0f64; p];
    for i in 0..n {
        let row = design.row(i);
        for j in 0..p {
            curvature[j] += qw[i] * row[j] * row[j];
        }
    }
    for c in curvature.iter_mut() {
        *c *= inv_n;
    }
    // residual r = z - X theta
    let mut residual: Array1<f64> = z - &design.dot(&theta);

    for _ in 0..CD_MAX_SWEEPS {
        let mut max_change = 0.0f64;
        for j in 0..p {
            if curvature[j] <= 0.0 {
                continue;
            }
            let old = theta[j];
            let mut rho = 0.0;
            for i in 0..n {
                rho += qw[i] * design[(i, j)] * residual[i];
            }
            rho = rho * inv_n + curvature[j] * old;
            let new = if penalized[j] {
                soft_threshold(rho, lambda) / curvature[j]
            } else {
                rho / curvature[j]
            };
            if new != old {
                let delta = new - old;
                for i in 0..n {
                    residual[i] -= delta * design[(i, j)];
                }
                theta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < CD_COORD_TOL {
            break;
        }
    }
    theta
}

#[inline]
fn soft_threshold(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

/// (1/n) X^T diag(qw) X.
fn weighted_gram(design: ArrayView2<f64>, qw: &Array1<f64>, inv_n: f64) -> Array2<f64> {
    let n = design.nrows();
    let p = design.ncols();
    let mut scaled = design.to_owned();
    for i in 0..n {
        let s = qw[i] * inv_n;
        scaled.row_mut(i).mapv_inplace(|v| v * s);
    }
    let mut gram = scaled.t().dot(&design);
    // enforce exact symmetry against rounding
    for j in 0..p {
        for k in (j + 1)..p {
            let avg = 0.5 * (gram[(j, k)] + gram[(k, j)]);
            gram[(j, k)] = avg;
            gram[(k, j)] = avg;
        }
    }
    gram
}

/// Solves A x = b for symmetric positive definite A; None when the
/// factorization hits a non-positive pivot.
fn cholesky_solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let p = a.nrows();
    let mut l = Array2::<f64>::zeros((p, p));
    for j in 0..p {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return None;
        }
        let dj = diag.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..p {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / dj;
        }
    }
    // forward then back substitution
    let mut x = b.clone();
    for i in 0..p {
        for k in 0..i {
            let t = l[(i, k)] * x[k];
            x[i] -= t;
        }
        x[i] /= l[(i, i)];
    }
    for i in (0..p).rev() {
        for k in (i + 1)..p {
            let t = l[(k, i)] * x[k];
            x[i] -= t;
        }
        x[i] /= l[(i, i)];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ones(n: usize) -> Array1<f64> {
        Array1::ones(n)
    }

    #[test]
    fn intercept_only_matches_weighted_class_frequency() {
        let design = Array2::ones((8, 1));
        let y = array![1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let w = array![2.0, 2.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let (theta, report) = solve_logistic(
            design.view(),
            y.view(),
            w.view(),
            None,
            &Penalty::none(),
            &[false],
        )
        .unwrap();
        assert!(report.converged);
        // weighted mean of y is 6/11
        let expected = crate::glm::logit(6.0 / 11.0).unwrap();
        assert!((theta[0] - expected).abs() < 1e-9, "theta={theta}");
    }

    #[test]
    fn offset_shifts_the_optimum() {
        // with offset equal to the previous linear predictor and a free
        // intercept, the intercept must come back ~0
        let design = Array2::ones((6, 1));
        let y = array![1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let offsets = array![0.3, 0.3, 0.3, 0.3, 0.3, 0.3];
        let (theta, report) = solve_logistic(
            design.view(),
            y.view(),
            ones(6).view(),
            Some(offsets.view()),
            &Penalty::none(),
            &[false],
        )
        .unwrap();
        assert!(report.converged);
        assert!((theta[0] - (-0.3)).abs() < 1e-9);
    }

    #[test]
    fn score_equations_hold_at_the_unpenalized_optimum() {
        let design = array![
            [1.0, -1.2],
            [1.0, -0.4],
            [1.0, 0.1],
            [1.0, 0.3],
            [1.0, 0.9],
            [1.0, 1.4],
        ];
        let y = array![0.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let w = array![1.0, 2.0, 1.0, 1.5, 1.0, 0.5];
        let (theta, report) = solve_logistic(
            design.view(),
            y.view(),
            w.view(),
            None,
            &Penalty::none(),
            &[false, true],
        )
        .unwrap();
        assert!(report.converged);
        assert!(report.kkt_residual <= KKT_TOL);
        // recompute the score directly
        let n = design.nrows();
        let mut score = [0.0f64; 2];
        for i in 0..n {
            let a = design.row(i).dot(&theta);
            let r = w[i] * (sigmoid(a) - y[i]) / n as f64;
            score[0] += r * design[(i, 0)];
            score[1] += r * design[(i, 1)];
        }
        assert!(score[0].abs() <= 1e-7 && score[1].abs() <= 1e-7);
    }

    #[test]
    fn null_signal_l1_shrinks_to_exact_zero() {
        // balanced labels independent of x
        let n = 400;
        let mut xs = Vec::with_capacity(n * 2);
        let mut ys = Vec::with_capacity(n);
        let mut state = 0x243f6a8885a308d3u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for i in 0..n {
            xs.push(next() * 2.0 - 1.0);
            xs.push(next() * 2.0 - 1.0);
            ys.push(if i % 2 == 0 { 1.0 } else { 0.0 });
        }
        let design = {
            let mut m = Array2::ones((n, 3));
            for i in 0..n {
                m[(i, 1)] = xs[2 * i];
                m[(i, 2)] = xs[2 * i + 1];
            }
            m
        };
        let (theta, report) = solve_logistic(
            design.view(),
            Array1::from(ys).view(),
            ones(n).view(),
            None,
            &Penalty::l1(0.1),
            &[false, true, true],
        )
        .unwrap();
        assert!(report.converged);
        assert_eq!(theta[1], 0.0);
        assert_eq!(theta[2], 0.0);
        assert!(theta[0].abs() < 1e-9);
    }

    #[test]
    fn l1_kkt_conditions_hold_with_active_coefficients() {
        let design = array![
            [1.0, -2.0, 0.3],
            [1.0, -1.1, -0.8],
            [1.0, -0.6, 1.2],
            [1.0, -0.2, -0.1],
            [1.0, 0.4, 0.9],
            [1.0, 0.9, -1.4],
            [1.0, 1.3, 0.2],
            [1.0, 2.2, -0.5],
        ];
        let y = array![0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0];
        let lambda = 0.02;
        let (theta, report) = solve_logistic(
            design.view(),
            y.view(),
            ones(8).view(),
            None,
            &Penalty::l1(lambda),
            &[false, true, true],
        )
        .unwrap();
        assert!(report.converged);
        assert!(theta[1] != 0.0, "slope should survive a small lambda");
        let n = design.nrows();
        let mut grad = [0.0f64; 3];
        for i in 0..n {
            let a = design.row(i).dot(&theta);
            let r = (sigmoid(a) - y[i]) / n as f64;
            for j in 0..3 {
                grad[j] += r * design[(i, j)];
            }
        }
        assert!(grad[0].abs() <= 1e-7);
        for j in 1..3 {
            if theta[j] == 0.0 {
                assert!(grad[j].abs() <= lambda + 1e-7);
            } else {
                assert!((grad[j] + lambda * theta[j].signum()).abs() <= 1e-7);
            }
        }
    }

    #[test]
    fn separable_data_flags_divergence() {
        let design = array![[1.0, -2.0], [1.0, -1.0], [1.0, 1.0], [1.0, 2.0]];
        let y = array![0.0, 0.0, 1.0, 1.0];
        let (theta, report) = solve_logistic(
            design.view(),
            y.view(),
            ones(4).view(),
            None,
            &Penalty::none(),
            &[false, true],
        )
        .unwrap();
        assert!(!report.converged);
        assert!(report.diverged);
        assert!(theta.iter().any(|&v| v.abs() > COEFFICIENT_CAP));
    }

    #[test]
    fn single_class_flags_divergence() {
        let design = Array2::ones((5, 1));
        let y = Array1::ones(5);
        let (_, report) = solve_logistic(
            design.view(),
            y.view(),
            ones(5).view(),
            None,
            &Penalty::none(),
            &[false],
        )
        .unwrap();
        assert!(!report.converged);
        assert!(report.diverged);
    }

    #[test]
    fn objective_trace_is_non_increasing() {
        let design = array![
            [1.0, 0.5, -0.3],
            [1.0, -1.5, 0.8],
            [1.0, 0.7, 1.1],
            [1.0, -0.2, -0.9],
            [1.0, 1.9, 0.4],
            [1.0, -0.8, -1.6],
            [1.0, 0.1, 0.2],
            [1.0, -1.1, 1.4],
        ];
        let y = array![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        for penalty in [Penalty::none(), Penalty::l1(0.05)] {
            let (_, report) = solve_logistic(
                design.view(),
                y.view(),
                ones(8).view(),
                None,
                &penalty,
                &[false, true, true],
            )
            .unwrap();
            for pair in report.objective_trace.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-15);
            }
        }
    }

    #[test]
    fn doubling_weights_leaves_theta_unchanged() {
        let design = array![
            [1.0, -1.2],
            [1.0, -0.4],
            [1.0, 0.1],
            [1.0, 0.3],
            [1.0, 0.9],
            [1.0, 1.4],
        ];
        let y = array![0.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let w1 = ones(6);
        let w2 = Array1::from_elem(6, 2.0);
        let (a, _) = solve_logistic(
            design.view(),
            y.view(),
            w1.view(),
            None,
            &Penalty::none(),
            &[false, true],
        )
        .unwrap();
        let (b, _) = solve_logistic(
            design.view(),
            y.view(),
            w2.view(),
            None,
            &Penalty::none(),
            &[false, true],
        )
        .unwrap();
        for j in 0..2 {
            assert!((a[j] - b[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn lambda_zero_l1_equals_unpenalized() {
        let design = array![[1.0, -1.0], [1.0, -0.3], [1.0, 0.2], [1.0, 0.8], [1.0, -0.1], [1.0, 0.4]];
        let y = array![0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        let (a, _) = solve_logistic(
            design.view(),
            y.view(),
            ones(6).view(),
            None,
            &Penalty::none(),
            &[false, true],
        )
        .unwrap();
        let (b, _) = solve_logistic(
            design.view(),
            y.view(),
            ones(6).view(),
            None,
            &Penalty::l1(0.0),
            &[false, true],
        )
        .unwrap();
        for j in 0..2 {
            assert!((a[j] - b[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let design = array![[1.0], [1.0]];
        let y = array![0.0, 1.0];
        let w = ones(2);
        assert!(solve_logistic(
            Array2::zeros((0, 1)).view(),
            Array1::zeros(0).view(),
            Array1::zeros(0).view(),
            None,
            &Penalty::none(),
            &[false],
        )
        .is_err());
        let bad_offset = array![f64::NAN, 0.0];
        assert!(solve_logistic(
            design.view(),
            y.view(),
            w.view(),
            Some(bad_offset.view()),
            &Penalty::none(),
            &[false],
        )
        .is_err());
        assert!(solve_logistic(
            design.view(),
            y.view(),
            w.view(),
            None,
            &Penalty::l1(-1.0),
            &[false],
        )
        .is_err());
    }
}
