//! Linear adjustment of a source model on the logit scale: offset MLE for
//! the shift vector, target probability estimates, the plug-in classifier,
//! the stacked joint estimator, and the Gaussian least-squares reduction.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::glm::{logit, sigmoid};
use crate::logistic::{FitReport, Penalty};
use crate::source::{fit_logistic, SourceModel};

/// Default clamp applied to source probabilities before taking logits.
pub const DEFAULT_CLAMP_EPS: f64 = 1e-6;

/// A source model plus the estimated linear shift on the logit scale.
#[derive(Debug, Clone)]
pub struct TransferModel {
    pub source: SourceModel,
    pub shift_map: FeatureMap,
    pub beta: Array1<f64>,
    pub clamp_eps: f64,
}

/// Per-row source logits, the transfer offsets.
///
/// Coefficient sources yield their linear predictor exactly: gamma(eta_P)
/// for them is the linear predictor itself, finite for every x, so no
/// truncation is needed or applied. Kernel and external sources produce
/// probabilities that can reach 0 or 1; those are clamped to
/// [eps, 1-eps] before the logit.
pub fn clamped_source_logits(
    source: &SourceModel,
    data: &Dataset,
    clamp_eps: f64,
) -> Result<Array1<f64>> {
    validate_clamp(clamp_eps)?;
    match source {
        SourceModel::Coefficients { .. } => {
            let mut out = Array1::zeros(data.n());
            for (i, xi) in data.x.outer_iter().enumerate() {
                out[i] = source.linear_predictor(xi)?;
            }
            Ok(out)
        }
        _ => {
            let probs = source.predict_dataset(data)?;
            let mut out = Array1::zeros(data.n());
            for (i, &p) in probs.iter().enumerate() {
                out[i] = logit(p.clamp(clamp_eps, 1.0 - clamp_eps))?;
            }
            Ok(out)
        }
    }
}

fn validate_clamp(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Config(format!(
            "clamp epsilon must lie in (0, 0.5), got {eps}"
        )));
    }
    Ok(())
}

/// Offset MLE for the shift: beta minimizes
/// (1/n) sum_i w_i l(y_i, offset_i + beta . T(x_i)) + lambda |beta_pen|_1
/// with offset_i the source logit (clamped for probability-valued
/// sources). Defined as `fit_logistic` with that offset and the shift
/// map.
pub fn fit_transfer(
    source: &SourceModel,
    target: &Dataset,
    shift_map: &FeatureMap,
    penalty: &Penalty,
    clamp_eps: f64,
) -> Result<(TransferModel, FitReport)> {
    if target.n() == 0 {
        return Err(Error::Data("transfer fit needs at least one target row".into()));
    }
    let offsets = clamped_source_logits(source, target, clamp_eps)?;
    let (fitted, report) = fit_logistic(target, shift_map, penalty, Some(offsets.view()))?;
    let SourceModel::Coefficients { theta, .. } = fitted else {
        unreachable!("fit_logistic returns a coefficient model")
    };
    Ok((
        TransferModel {
            source: source.clone(),
            shift_map: shift_map.clone(),
            beta: theta,
            clamp_eps,
        },
        report,
    ))
}

impl TransferModel {
    /// Source logit plus beta . T(x); the log odds of the target
    /// probability estimate.
    pub fn shift_score(&self, x: ArrayView1<f64>, id: Option<&str>) -> Result<f64> {
        let base = match (&self.source, id) {
            (SourceModel::Coefficients { .. }, _) => self.source.linear_predictor(x)?,
            (SourceModel::External { .. }, Some(id)) => {
                let p = self.source.predict_proba_id(id)?;
                logit(p.clamp(self.clamp_eps, 1.0 - self.clamp_eps))?
            }
            (SourceModel::External { .. }, None) => return Err(Error::NeedsRowId),
            _ => {
                let p = self.source.predict_proba(x)?;
                logit(p.clamp(self.clamp_eps, 1.0 - self.clamp_eps))?
            }
        };
        let t_row = self.shift_map.build_row(x)?;
        Ok(base + t_row.dot(&self.beta))
    }

    /// Estimated target regression function sigma(shift_score).
    pub fn predict_target_proba(&self, x: ArrayView1<f64>, id: Option<&str>) -> Result<f64> {
        Ok(sigmoid(self.shift_score(x, id)?))
    }

    /// Plug-in label: 1 iff the estimated target probability exceeds 1/2
    /// (strict, so an exact tie yields 0).
    pub fn classify(&self, x: ArrayView1<f64>, id: Option<&str>) -> Result<u8> {
        Ok(u8::from(self.shift_score(x, id)? > 0.0))
    }

    /// Probabilities and labels for a whole dataset; row ids feed external
    /// source tables.
    pub fn predict_dataset(&self, data: &Dataset) -> Result<(Array1<f64>, Vec<u8>)> {
        let offsets = clamped_source_logits(&self.source, data, self.clamp_eps)?;
        let t = self.shift_map.build_design(data.x.view())?;
        let scores = offsets + t.dot(&self.beta);
        let probs = scores.mapv(sigmoid);
        let labels = scores.iter().map(|&s| u8::from(s > 0.0)).collect();
        Ok((probs, labels))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "source": self.source.to_json(),
            "shift_map": self.shift_map,
            "beta": self.beta.to_vec(),
            "clamp_eps": self.clamp_eps,
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let source = SourceModel::from_json(
            value
                .get("source")
                .ok_or_else(|| Error::Config("transfer model JSON lacks source".into()))?,
        )?;
        let shift_map: FeatureMap =
            serde_json::from_value(value.get("shift_map").cloned().ok_or_else(|| {
                Error::Config("transfer model JSON lacks shift_map".into())
            })?)?;
        let beta: Vec<f64> = serde_json::from_value(
            value
                .get("beta")
                .cloned()
                .ok_or_else(|| Error::Config("transfer model JSON lacks beta".into()))?,
        )?;
        let clamp_eps = value
            .get("clamp_eps")
            .and_then(|v| v.as_f64())
            .unwrap_or(DEFAULT_CLAMP_EPS);
        validate_clamp(clamp_eps)?;
        if beta.len() != shift_map.width() {
            return Err(Error::DimensionMismatch {
                context: "beta vs shift map width".into(),
                expected: shift_map.width(),
                got: beta.len(),
            });
        }
        Ok(TransferModel {
            source,
            shift_map,
            beta: Array1::from(beta),
            clamp_eps,
        })
    }
}

/// Joint estimator over the pooled sample: one logistic fit on the stacked
/// design [S | T | indicator * T]; the target coefficient on T is
/// beta_p + beta by construction.
#[derive(Debug, Clone)]
pub struct JointModel {
    pub s_map: FeatureMap,
    pub t_map: FeatureMap,
    pub xi: Array1<f64>,
    pub beta_p: Array1<f64>,
    pub beta: Array1<f64>,
}

impl JointModel {
    /// Log odds in the source (indicator 0) or target (indicator 1) domain.
    pub fn linear_predictor(&self, x: ArrayView1<f64>, target_domain: bool) -> Result<f64> {
        let s = self.s_map.build_row(x)?;
        let t = self.t_map.build_row(x)?;
        let mut a = s.dot(&self.xi) + t.dot(&self.beta_p);
        if target_domain {
            a += t.dot(&self.beta);
        }
        Ok(a)
    }
}

pub fn fit_joint(
    source: &Dataset,
    target: &Dataset,
    s_map: &FeatureMap,
    t_map: &FeatureMap,
    penalty: &Penalty,
) -> Result<(JointModel, FitReport)> {
    let m = source.n();
    let n = target.n();
    if m + n == 0 {
        return Err(Error::Data("joint fit needs at least one row".into()));
    }
    if m > 0 && n > 0 && source.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            context: "source vs target feature dimension".into(),
            expected: source.dim(),
            got: target.dim(),
        });
    }
    source.require_binary_labels()?;
    target.require_binary_labels()?;
    let d = if m > 0 { source.dim() } else { target.dim() };
    s_map.validate(d)?;
    t_map.validate(d)?;

    let ps = s_map.width();
    let pt = t_map.width();
    let width = ps + 2 * pt;
    let mut design = Array2::zeros((m + n, width));
    let mut y = Array1::zeros(m + n);
    let mut w = Array1::zeros(m + n);
    let mut fill = |row: usize, x: ArrayView1<f64>, is_target: bool| -> Result<()> {
        let s = s_map.build_row(x)?;
        let t = t_map.build_row(x)?;
        for (j, &v) in s.iter().enumerate() {
            design[(row, j)] = v;
        }
        for (j, &v) in t.iter().enumerate() {
            design[(row, ps + j)] = v;
            if is_target {
                design[(row, ps + pt + j)] = v;
            }
        }
        Ok(())
    };
    for i in 0..m {
        fill(i, source.x.row(i), false)?;
        y[i] = source.y[i];
        w[i] = source.w[i];
    }
    for i in 0..n {
        fill(m + i, target.x.row(i), true)?;
        y[m + i] = target.y[i];
        w[m + i] = target.w[i];
    }

    let mut penalized = vec![true; width];
    if s_map.include_intercept {
        penalized[0] = false;
    }
    if t_map.include_intercept {
        penalized[ps] = false;
        penalized[ps + pt] = false;
    }

    let (theta, report) = crate::logistic::solve_logistic(
        design.view(),
        y.view(),
        w.view(),
        None,
        penalty,
        &penalized,
    )?;
    let xi = theta.slice(ndarray::s![0..ps]).to_owned();
    let beta_p = theta.slice(ndarray::s![ps..ps + pt]).to_owned();
    let beta = theta.slice(ndarray::s![ps + pt..]).to_owned();
    Ok((
        JointModel {
            s_map: s_map.clone(),
            t_map: t_map.clone(),
            xi,
            beta_p,
            beta,
        },
        report,
    ))
}

/// Gaussian-GLM reduction: the shift solves the least squares problem
/// min (1/n) sum_i (y_i - mu_hat_i - beta . T(x_i))^2, by Householder QR
/// with column pivoting. The prediction rule is mu_hat(x) + beta . T(x).
pub fn fit_transfer_gaussian(
    mu_hat: ArrayView1<f64>,
    target: &Dataset,
    shift_map: &FeatureMap,
) -> Result<Array1<f64>> {
    let n = target.n();
    if mu_hat.len() != n {
        return Err(Error::DimensionMismatch {
            context: "mu_hat vs target rows".into(),
            expected: n,
            got: mu_hat.len(),
        });
    }
    let design = shift_map.build_design(target.x.view())?;
    let p = design.ncols();
    if n < p {
        return Err(Error::Data(format!(
            "least squares needs at least {p} rows for a width-{p} shift map, got {n}"
        )));
    }
    let residual = &target.y - &mu_hat;
    least_squares(design.view(), residual.view())
}

/// Minimum-norm-free full-rank least squares; errors with the dependent
/// column indices when the pivoted R becomes numerically singular.
pub fn least_squares(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    let p = a.ncols();
    let mut qr = a.to_owned();
    let mut rhs = b.to_owned();
    let mut pivots: Vec<usize> = (0..p).collect();

    let initial_max_norm = (0..p)
        .map(|j| qr.column(j).dot(&qr.column(j)).sqrt())
        .fold(0.0f64, f64::max);
    let tol = 1e-10 * initial_max_norm.max(1e-300);

    for k in 0..p {
        // pivot on the largest remaining column norm
        let (best, best_norm) = (k..p)
            .map(|j| {
                let nrm = qr
                    .slice(ndarray::s![k.., j])
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt();
                (j, nrm)
            })
            .fold((k, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best_norm <= tol {
            let mut dependent: Vec<usize> = pivots[k..].to_vec();
            dependent.sort_unstable();
            return Err(Error::RankDeficient { columns: dependent });
        }
        if best != k {
            for i in 0..n {
                qr.swap((i, k), (i, best));
            }
            pivots.swap(k, best);
        }

        // Householder reflector for column k
        let alpha = {
            let x0 = qr[(k, k)];
            -x0.signum() * best_norm
        };
        let mut v: Vec<f64> = (k..n).map(|i| qr[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 > 0.0 {
            for j in k..p {
                let dot: f64 = (k..n).map(|i| v[i - k] * qr[(i, j)]).sum();
                let c = 2.0 * dot / vnorm2;
                for i in k..n {
                    qr[(i, j)] -= c * v[i - k];
                }
            }
            let dot: f64 = (k..n).map(|i| v[i - k] * rhs[i]).sum();
            let c = 2.0 * dot / vnorm2;
            for i in k..n {
                rhs[i] -= c * v[i - k];
            }
        }
        qr[(k, k)] = alpha;
    }

    // back substitution on the p x p upper triangle
    let mut solution = Array1::zeros(p);
    for i in (0..p).rev() {
        let mut v = rhs[i];
        for j in (i + 1)..p {
            v -= qr[(i, j)] * solution[j];
        }
        solution[i] = v / qr[(i, i)];
    }
    let mut unpivoted = Array1::zeros(p);
    for (k, &orig) in pivots.iter().enumerate() {
        unpivoted[orig] = solution[k];
    }
    Ok(unpivoted)
}
