//! Source-domain probability models: coefficient-based logistic fits over
//! a feature map, a Nadaraya-Watson kernel smoother, and externally
//! supplied probability tables keyed by row id.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::glm::sigmoid;
use crate::logistic::{solve_logistic, FitReport, Penalty};

/// Fitted estimate of the source regression function.
#[derive(Debug, Clone)]
pub enum SourceModel {
    Coefficients {
        map: FeatureMap,
        theta: Array1<f64>,
        meta: FitMeta,
    },
    Kernel {
        bandwidth: f64,
        x: Array2<f64>,
        y: Array1<f64>,
    },
    External {
        probabilities: BTreeMap<String, f64>,
    },
}

/// Provenance of a coefficient model, carried through serialization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitMeta {
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Extra fitting switches; defaults match the unscaled generative model.
#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    /// Z-score non-intercept design columns before a penalized fit;
    /// coefficients are mapped back to the original scale.
    pub standardize: bool,
}

/// Inverse class-proportion weights: w_i = 1 / (fraction of samples in
/// y_i's class).
pub fn balanced_weights(y: ArrayView1<f64>) -> Result<Array1<f64>> {
    let n = y.len();
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    let zeros = n - ones;
    if ones == 0 || zeros == 0 {
        return Err(Error::SingleClass(
            "balanced weights need both classes present".into(),
        ));
    }
    let w1 = n as f64 / ones as f64;
    let w0 = n as f64 / zeros as f64;
    Ok(y.mapv(|v| if v == 1.0 { w1 } else { w0 }))
}

/// Weighted, optionally L1-penalized logistic fit of the map's columns,
/// with an optional fixed per-row offset added to the linear predictor.
pub fn fit_logistic(
    data: &Dataset,
    map: &FeatureMap,
    penalty: &Penalty,
    offset: Option<ArrayView1<f64>>,
) -> Result<(SourceModel, FitReport)> {
    fit_logistic_with(data, map, penalty, offset, &FitOptions::default())
}

pub fn fit_logistic_with(
    data: &Dataset,
    map: &FeatureMap,
    penalty: &Penalty,
    offset: Option<ArrayView1<f64>>,
    options: &FitOptions,
) -> Result<(SourceModel, FitReport)> {
    data.require_binary_labels()?;
    map.validate(data.dim())?;
    let design = map.build_design(data.x.view())?;
    let penalized = penalty_mask(map);

    let (theta, report) = if options.standardize {
        let (scaled, centers, scales) = standardize(design, map.include_intercept);
        let (theta_s, report) = solve_logistic(
            scaled.view(),
            data.y.view(),
            data.w.view(),
            offset,
            penalty,
            &penalized,
        )?;
        (unstandardize(theta_s, &centers, &scales, map.include_intercept), report)
    } else {
        solve_logistic(
            design.view(),
            data.y.view(),
            data.w.view(),
            offset,
            penalty,
            &penalized,
        )?
    };

    let model = SourceModel::Coefficients {
        map: map.clone(),
        theta,
        meta: FitMeta {
            lambda: penalty.effective_lambda(),
            converged: report.converged,
            iterations: report.iterations,
        },
    };
    Ok((model, report))
}

fn penalty_mask(map: &FeatureMap) -> Vec<bool> {
    let mut mask = vec![true; map.width()];
    if map.include_intercept {
        mask[0] = false;
    }
    mask
}

fn standardize(
    mut design: Array2<f64>,
    has_intercept: bool,
) -> (Array2<f64>, Vec<f64>, Vec<f64>) {
    let n = design.nrows();
    let p = design.ncols();
    let start = usize::from(has_intercept);
    let mut centers = vec![0.0; p];
    let mut scales = vec![1.0; p];
    for j in start..p {
        let col = design.column(j);
        let mean = if has_intercept { col.sum() / n as f64 } else { 0.0 };
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        centers[j] = mean;
        if sd > 0.0 {
            scales[j] = sd;
        }
    }
    for j in start..p {
        let (c, s) = (centers[j], scales[j]);
        design.column_mut(j).mapv_inplace(|v| (v - c) / s);
    }
    (design, centers, scales)
}

fn unstandardize(
    theta_scaled: Array1<f64>,
    centers: &[f64],
    scales: &[f64],
    has_intercept: bool,
) -> Array1<f64> {
    let p = theta_scaled.len();
    let start = usize::from(has_intercept);
    let mut theta = theta_scaled.clone();
    for j in start..p {
        theta[j] = theta_scaled[j] / scales[j];
    }
    if has_intercept {
        let mut shift = 0.0;
        for j in start..p {
            shift += theta_scaled[j] * centers[j] / scales[j];
        }
        theta[0] = theta_scaled[0] - shift;
    }
    theta
}

/// Rate-driven default bandwidth m^{-1/(2*beta+d)} with beta = 2.
pub fn default_bandwidth(m: usize, d: usize) -> f64 {
    (m as f64).powf(-1.0 / (4.0 + d as f64))
}

/// Nadaraya-Watson smoother with a Gaussian kernel.
pub fn fit_kernel(data: &Dataset, bandwidth: f64) -> Result<SourceModel> {
    if data.n() == 0 {
        return Err(Error::Data("kernel fit needs at least one row".into()));
    }
    data.require_binary_labels()?;
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::Config(format!(
            "kernel bandwidth must be positive, got {bandwidth}"
        )));
    }
    Ok(SourceModel::Kernel {
        bandwidth,
        x: data.x.clone(),
        y: data.y.clone(),
    })
}

impl SourceModel {
    /// Probability at a feature vector. External tables cannot score raw
    /// features and report [`Error::NeedsRowId`].
    pub fn predict_proba(&self, x: ArrayView1<f64>) -> Result<f64> {
        match self {
            SourceModel::Coefficients { .. } => Ok(sigmoid(self.linear_predictor(x)?)),
            SourceModel::Kernel { bandwidth, x: xs, y } => {
                if x.len() != xs.ncols() {
                    return Err(Error::DimensionMismatch {
                        context: "kernel query vs training features".into(),
                        expected: xs.ncols(),
                        got: x.len(),
                    });
                }
                let h2 = bandwidth * bandwidth;
                let mut mass = 0.0;
                let mut weighted = 0.0;
                for (xi, &yi) in xs.outer_iter().zip(y.iter()) {
                    let sq: f64 = xi
                        .iter()
                        .zip(x.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    let k = (-0.5 * sq / h2).exp();
                    mass += k;
                    weighted += k * yi;
                }
                if mass > 0.0 {
                    Ok(weighted / mass)
                } else {
                    // all kernel weights underflowed; fall back to the
                    // global class frequency
                    Ok(y.sum() / y.len() as f64)
                }
            }
            SourceModel::External { .. } => Err(Error::NeedsRowId),
        }
    }

    /// Probability stored for a row id (external tables only).
    pub fn predict_proba_id(&self, id: &str) -> Result<f64> {
        match self {
            SourceModel::External { probabilities } => probabilities
                .get(id)
                .copied()
                .ok_or_else(|| Error::MissingRowIds(vec![id.to_string()])),
            _ => Err(Error::Data(
                "row-id prediction is only available for external probability tables".into(),
            )),
        }
    }

    /// Linear predictor theta . phi(x) of a coefficient model.
    pub fn linear_predictor(&self, x: ArrayView1<f64>) -> Result<f64> {
        match self {
            SourceModel::Coefficients { map, theta, .. } => {
                let row = map.build_row(x)?;
                Ok(row.dot(theta))
            }
            _ => Err(Error::Data(
                "linear predictor is only defined for coefficient models".into(),
            )),
        }
    }

    /// Probabilities for every row of a dataset; external tables join on
    /// the dataset's row ids (indices when absent) and report all missing
    /// ids at once.
    pub fn predict_dataset(&self, data: &Dataset) -> Result<Array1<f64>> {
        match self {
            SourceModel::External { probabilities } => {
                let mut out = Array1::zeros(data.n());
                let mut missing = Vec::new();
                for i in 0..data.n() {
                    let id = data.row_id(i);
                    match probabilities.get(&id) {
                        Some(&p) => out[i] = p,
                        None => missing.push(id),
                    }
                }
                if missing.is_empty() {
                    Ok(out)
                } else {
                    Err(Error::MissingRowIds(missing))
                }
            }
            _ => {
                let mut out = Array1::zeros(data.n());
                for (i, xi) in data.x.outer_iter().enumerate() {
                    out[i] = self.predict_proba(xi)?;
                }
                Ok(out)
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            SourceModel::Coefficients { map, theta, meta } => serde_json::json!({
                "map": map,
                "theta": theta.to_vec(),
                "meta": meta,
            }),
            SourceModel::Kernel { bandwidth, x, y } => serde_json::json!({
                "bandwidth": bandwidth,
                "x": x.outer_iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
                "y": y.to_vec(),
            }),
            SourceModel::External { probabilities } => serde_json::json!({
                "probabilities": probabilities,
            }),
        }
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Config("source model JSON must be an object".into()))?;
        if obj.contains_key("theta") {
            #[derive(Deserialize)]
            struct Dto {
                map: FeatureMap,
                theta: Vec<f64>,
                meta: FitMeta,
            }
            let dto: Dto = serde_json::from_value(value.clone())?;
            if dto.theta.len() != dto.map.width() {
                return Err(Error::DimensionMismatch {
                    context: "theta vs feature map width".into(),
                    expected: dto.map.width(),
                    got: dto.theta.len(),
                });
            }
            Ok(SourceModel::Coefficients {
                map: dto.map,
                theta: Array1::from(dto.theta),
                meta: dto.meta,
            })
        } else if obj.contains_key("bandwidth") {
            #[derive(Deserialize)]
            struct Dto {
                bandwidth: f64,
                x: Vec<Vec<f64>>,
                y: Vec<f64>,
            }
            let dto: Dto = serde_json::from_value(value.clone())?;
            let n = dto.x.len();
            let d = dto.x.first().map_or(0, |r| r.len());
            let flat: Vec<f64> = dto.x.into_iter().flatten().collect();
            let x = Array2::from_shape_vec((n, d), flat)
                .map_err(|e| Error::Config(format!("kernel model rows ragged: {e}")))?;
            if dto.y.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "kernel labels vs rows".into(),
                    expected: n,
                    got: dto.y.len(),
                });
            }
            Ok(SourceModel::Kernel {
                bandwidth: dto.bandwidth,
                x,
                y: Array1::from(dto.y),
            })
        } else if obj.contains_key("probabilities") {
            #[derive(Deserialize)]
            struct Dto {
                probabilities: BTreeMap<String, f64>,
            }
            let dto: Dto = serde_json::from_value(value.clone())?;
            if let Some((id, &p)) = dto
                .probabilities
                .iter()
                .find(|(_, &p)| !(0.0..=1.0).contains(&p))
            {
                return Err(Error::Data(format!(
                    "external probability for row {id} is {p}, outside [0,1]"
                )));
            }
            Ok(SourceModel::External {
                probabilities: dto.probabilities,
            })
        } else {
            Err(Error::Config(
                "source model JSON matches no known variant".into(),
            ))
        }
    }
}
