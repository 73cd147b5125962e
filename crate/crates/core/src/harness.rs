//! Experiment runner: fits the benchmark model roster per replicate,
//! sweeps one simulation parameter at a time, aggregates target-domain
//! accuracy and excess risk, and regresses estimation error against the
//! target sample size to check the parametric rate.

use ndarray::{Array1, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::logistic::Penalty;
use crate::metrics::{auc, confusion, MetricsReport};
use crate::source::{fit_logistic, FitMeta, SourceModel};
use crate::synth::{
    derive_seed, generate, generate_eval, oracle_source_model, substream, true_eta, true_shift,
    Domain, SimConfig,
};
use crate::transfer::{fit_transfer, TransferModel, DEFAULT_CLAMP_EPS};

const STREAM_SWEEP: u64 = 0x33;
const STREAM_RATE: u64 = 0x44;
const STREAM_BOOT: u64 = 0x55;
const STREAM_SPLIT: u64 = 0x66;

/// Fraction of failed replicates past which a cell is marked unreliable.
const FLAG_FAILURE_FRACTION: f64 = 0.2;

/// The benchmark model roster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "source.main")]
    SourceMain,
    #[serde(rename = "source.full")]
    SourceFull,
    #[serde(rename = "target.main")]
    TargetMain,
    #[serde(rename = "target.full")]
    TargetFull,
    #[serde(rename = "transfer")]
    Transfer,
    #[serde(rename = "transfer.main")]
    TransferMain,
    #[serde(rename = "ideal")]
    Ideal,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::SourceMain => "source.main",
            ModelKind::SourceFull => "source.full",
            ModelKind::TargetMain => "target.main",
            ModelKind::TargetFull => "target.full",
            ModelKind::Transfer => "transfer",
            ModelKind::TransferMain => "transfer.main",
            ModelKind::Ideal => "ideal",
        }
    }

    pub fn all() -> &'static [ModelKind] {
        &[
            ModelKind::SourceMain,
            ModelKind::SourceFull,
            ModelKind::TargetMain,
            ModelKind::TargetFull,
            ModelKind::Transfer,
            ModelKind::TransferMain,
            ModelKind::Ideal,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    M,
    N,
    Delta,
    Xi,
    D,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::M => "m",
            SweepParameter::N => "n",
            SweepParameter::Delta => "delta",
            SweepParameter::Xi => "xi",
            SweepParameter::D => "d",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

fn default_eval_size() -> usize {
    20_000
}

fn default_replicates() -> usize {
    50
}

/// One-parameter sweep over the model roster.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub base: SimConfig,
    pub sweep: SweepSpec,
    pub models: Vec<ModelKind>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub penalty: Penalty,
    /// Fresh target draws per replicate for accuracy/excess evaluation.
    #[serde(default = "default_eval_size")]
    pub eval_size: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.penalty.validate()?;
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("at least one model must be requested".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::Config("sweep values must be non-empty".into()));
        }
        if self.eval_size == 0 {
            return Err(Error::Config("eval_size must be at least 1".into()));
        }
        for &v in &self.sweep.values {
            match self.sweep.parameter {
                SweepParameter::M | SweepParameter::N | SweepParameter::D => {
                    if v < 1.0 || v.fract() != 0.0 {
                        return Err(Error::Config(format!(
                            "sweep values for {} must be positive integers, got {v}",
                            self.sweep.parameter.name()
                        )));
                    }
                }
                SweepParameter::Delta | SweepParameter::Xi => {
                    if !(v >= 0.0) || !v.is_finite() {
                        return Err(Error::Config(format!(
                            "sweep values for {} must be nonnegative reals, got {v}",
                            self.sweep.parameter.name()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn cell_config(&self, value: f64, seed: u64) -> SimConfig {
        let mut cfg = self.base.with_seed(seed);
        match self.sweep.parameter {
            SweepParameter::M => cfg.m = value as usize,
            SweepParameter::N => cfg.n = value as usize,
            SweepParameter::Delta => cfg.delta = value,
            SweepParameter::Xi => cfg.xi = value,
            SweepParameter::D => cfg.d = value as usize,
        }
        cfg
    }
}

/// Aggregated cell of the sweep table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub sweep_param: String,
    pub sweep_value: f64,
    pub model: String,
    pub mean_acc: f64,
    pub se_acc: f64,
    pub mean_excess_risk: f64,
    pub se_excess_risk: f64,
    /// Replicates that converged and entered the means.
    pub replicates: usize,
    /// True when more than 20% of replicates failed to converge.
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub rows: Vec<CellResult>,
}

impl ExperimentResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "sweep_param,sweep_value,model,mean_acc,se_acc,mean_excess_risk,se_excess_risk,replicates,flagged\n",
        );
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                row.sweep_param,
                row.sweep_value,
                row.model,
                row.mean_acc,
                row.se_acc,
                row.mean_excess_risk,
                row.se_excess_risk,
                row.replicates,
                row.flagged
            ));
        }
        out
    }

    pub fn cell(&self, value: f64, model: ModelKind) -> Option<&CellResult> {
        self.rows
            .iter()
            .find(|r| r.sweep_value == value && r.model == model.name())
    }
}

/// A fitted roster entry, reduced to what evaluation needs: a decision
/// score whose sign is the predicted label.
enum FittedModel {
    Linear { map: FeatureMap, theta: Array1<f64> },
    Shifted(TransferModel),
    Bayes,
}

impl FittedModel {
    fn classify(&self, cfg: &SimConfig, x: ArrayView1<f64>) -> u8 {
        match self {
            FittedModel::Linear { map, theta } => {
                let score = map.build_row(x).expect("dims validated").dot(theta);
                u8::from(score > 0.0)
            }
            FittedModel::Shifted(model) => model.classify(x, None).expect("coefficient source"),
            FittedModel::Bayes => u8::from(true_eta(cfg, Domain::Target, x) > 0.5),
        }
    }
}

fn fit_roster_model(
    kind: ModelKind,
    cfg: &SimConfig,
    source: &Dataset,
    target: &Dataset,
    penalty: &Penalty,
) -> Result<Option<FittedModel>> {
    let mains = FeatureMap::intercept_mains(cfg.d);
    let full = FeatureMap::full(cfg.d);
    let fit_linear = |data: &Dataset, map: &FeatureMap| -> Result<Option<FittedModel>> {
        let (model, report) = fit_logistic(data, map, penalty, None)?;
        if !report.converged {
            return Ok(None);
        }
        let SourceModel::Coefficients { map, theta, .. } = model else {
            unreachable!()
        };
        Ok(Some(FittedModel::Linear { map, theta }))
    };

    match kind {
        ModelKind::Ideal => Ok(Some(FittedModel::Bayes)),
        ModelKind::SourceMain => fit_linear(source, &mains),
        ModelKind::SourceFull => fit_linear(source, &full),
        ModelKind::TargetMain => fit_linear(target, &mains),
        ModelKind::TargetFull => fit_linear(target, &full),
        ModelKind::Transfer => {
            // freeze the quadratic block of the source.full fit, refit
            // intercept+mains on the target through the offset path
            let (model, report) = fit_logistic(source, &full, penalty, None)?;
            if !report.converged {
                return Ok(None);
            }
            let SourceModel::Coefficients { theta, .. } = model else {
                unreachable!()
            };
            let quad_map = FeatureMap::quadratic_only(cfg.d);
            // full map order: intercept, mains, squares, interactions
            let quad_theta = theta.slice(ndarray::s![1 + cfg.d..]).to_owned();
            let frozen = SourceModel::Coefficients {
                map: quad_map,
                theta: quad_theta,
                meta: FitMeta {
                    lambda: penalty.effective_lambda(),
                    converged: true,
                    iterations: report.iterations,
                },
            };
            let (shifted, report) =
                fit_transfer(&frozen, target, &mains, penalty, DEFAULT_CLAMP_EPS)?;
            if !report.converged {
                return Ok(None);
            }
            Ok(Some(FittedModel::Shifted(shifted)))
        }
        ModelKind::TransferMain => {
            // main-effect source logits as offsets; the refit shift over
            // intercept+mains gives alpha_Q = alpha_P + delta-hat
            let (source_main, report) = fit_logistic(source, &mains, penalty, None)?;
            if !report.converged {
                return Ok(None);
            }
            let (shifted, report) =
                fit_transfer(&source_main, target, &mains, penalty, DEFAULT_CLAMP_EPS)?;
            if !report.converged {
                return Ok(None);
            }
            Ok(Some(FittedModel::Shifted(shifted)))
        }
    }
}

struct ReplicateOutcome {
    value_idx: usize,
    /// Per model: (accuracy, excess risk), or None when the fit failed.
    scores: Vec<Option<(f64, f64)>>,
}

fn run_replicate(
    config: &ExperimentConfig,
    value_idx: usize,
    replicate: usize,
) -> Result<ReplicateOutcome> {
    let value = config.sweep.values[value_idx];
    let seed = derive_seed(
        config.base.seed,
        &[STREAM_SWEEP, value_idx as u64, replicate as u64],
    );
    let cfg = config.cell_config(value, seed);
    let source = generate(&cfg, Domain::Source)?;
    let target = generate(&cfg, Domain::Target)?;
    let eval = generate_eval(&cfg, config.eval_size)?;

    let mut scores = Vec::with_capacity(config.models.len());
    for &kind in &config.models {
        let fitted = fit_roster_model(kind, &cfg, &source, &target, &config.penalty)?;
        let score = fitted.map(|model| {
            let mut hits = 0u64;
            let mut excess_sum = 0.0;
            for i in 0..eval.n() {
                let x = eval.x.row(i);
                let pred = model.classify(&cfg, x);
                if (pred == 1) == (eval.y[i] == 1.0) {
                    hits += 1;
                }
                let eta = true_eta(&cfg, Domain::Target, x);
                let bayes = u8::from(eta > 0.5);
                if pred != bayes {
                    excess_sum += (2.0 * eta - 1.0).abs();
                }
            }
            let n = eval.n() as f64;
            (hits as f64 / n, excess_sum / n)
        });
        scores.push(score);
    }
    Ok(ReplicateOutcome { value_idx, scores })
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}

/// Runs every (sweep value, replicate) cell, in parallel, and aggregates
/// one row per (value, model). Rerunning with the same config reproduces
/// the table bit for bit.
pub fn run_sweep(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let tasks: Vec<(usize, usize)> = (0..config.sweep.values.len())
        .flat_map(|v| (0..config.replicates).map(move |r| (v, r)))
        .collect();
    let outcomes: Vec<ReplicateOutcome> = tasks
        .par_iter()
        .map(|&(v, r)| run_replicate(config, v, r))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (value_idx, &value) in config.sweep.values.iter().enumerate() {
        for (model_idx, &model) in config.models.iter().enumerate() {
            let mut accs = Vec::new();
            let mut excesses = Vec::new();
            let mut failures = 0usize;
            for outcome in outcomes.iter().filter(|o| o.value_idx == value_idx) {
                match outcome.scores[model_idx] {
                    Some((acc, excess)) => {
                        accs.push(acc);
                        excesses.push(excess);
                    }
                    None => failures += 1,
                }
            }
            let (mean_acc, se_acc) = mean_and_se(&accs);
            let (mean_excess, se_excess) = mean_and_se(&excesses);
            rows.push(CellResult {
                sweep_param: config.sweep.parameter.name().to_string(),
                sweep_value: value,
                model: model.name().to_string(),
                mean_acc,
                se_acc,
                mean_excess_risk: mean_excess,
                se_excess_risk: se_excess,
                replicates: accs.len(),
                flagged: (failures as f64)
                    > FLAG_FAILURE_FRACTION * config.replicates as f64,
            });
        }
    }
    Ok(ExperimentResult {
        config: config.clone(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    BetaError,
    ExcessRisk,
}

impl RateKind {
    pub fn name(&self) -> &'static str {
        match self {
            RateKind::BetaError => "beta_error",
            RateKind::ExcessRisk => "excess_risk",
        }
    }
}

/// Log-log slope of estimation error against target sample size, with a
/// bootstrap confidence band over replicates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateCheckResult {
    pub kind: RateKind,
    pub grid: Vec<usize>,
    /// Mean error at each grid point (converged replicates only).
    pub mean_errors: Vec<f64>,
    pub slope: f64,
    pub slope_ci_lower: f64,
    pub slope_ci_upper: f64,
    pub replicates: usize,
    pub excluded: usize,
}

impl RateCheckResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,mean_error\n");
        for (n, err) in self.grid.iter().zip(&self.mean_errors) {
            out.push_str(&format!("{n},{err}\n"));
        }
        out
    }
}

const BOOTSTRAP_SAMPLES: usize = 1000;

/// With the oracle source model (so the source-estimation term vanishes),
/// fits the shift at each grid size and regresses log mean error on
/// log n. The parametric term predicts a slope near -1/2.
pub fn rate_check(
    kind: RateKind,
    grid: &[usize],
    replicates: usize,
    config: &SimConfig,
) -> Result<RateCheckResult> {
    config.validate()?;
    if grid.len() < 4 {
        return Err(Error::DegenerateGrid(format!(
            "need at least 4 grid points, got {}",
            grid.len()
        )));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::DegenerateGrid(
            "grid sizes must be strictly increasing".into(),
        ));
    }
    if replicates == 0 {
        return Err(Error::Config("replicates must be at least 1".into()));
    }
    let oracle = oracle_source_model(config)?;
    let beta_true = true_shift(config);
    let shift_map = FeatureMap::intercept_mains(config.d);

    let tasks: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..replicates).map(move |r| (g, r)))
        .collect();
    let outcomes: Vec<(usize, Option<f64>)> = tasks
        .par_iter()
        .map(|&(g, r)| -> Result<(usize, Option<f64>)> {
            let seed = derive_seed(config.seed, &[STREAM_RATE, g as u64, r as u64]);
            let mut cfg = config.with_seed(seed);
            cfg.n = grid[g];
            let target = generate(&cfg, Domain::Target)?;
            let (model, report) =
                fit_transfer(&oracle, &target, &shift_map, &Penalty::none(), DEFAULT_CLAMP_EPS)?;
            if !report.converged {
                return Ok((g, None));
            }
            let err = match kind {
                RateKind::BetaError => {
                    let diff = &model.beta - &beta_true;
                    diff.dot(&diff).sqrt()
                }
                RateKind::ExcessRisk => {
                    let eval = generate_eval(&cfg, cfg.n_mc.max(1))?;
                    let mut sum = 0.0;
                    for i in 0..eval.n() {
                        let x = eval.x.row(i);
                        let eta = true_eta(&cfg, Domain::Target, x);
                        let bayes = u8::from(eta > 0.5);
                        let pred = model.classify(x, None)?;
                        if pred != bayes {
                            sum += (2.0 * eta - 1.0).abs();
                        }
                    }
                    sum / eval.n() as f64
                }
            };
            Ok((g, Some(err)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut per_point: Vec<Vec<f64>> = vec![Vec::new(); grid.len()];
    let mut excluded = 0usize;
    for (g, err) in outcomes {
        match err {
            Some(e) => per_point[g].push(e),
            None => excluded += 1,
        }
    }
    if per_point.iter().any(|v| v.is_empty()) {
        return Err(Error::Data(
            "a grid point lost every replicate to non-convergence".into(),
        ));
    }

    let log_n: Vec<f64> = grid.iter().map(|&n| (n as f64).ln()).collect();
    let mean_errors: Vec<f64> = per_point
        .iter()
        .map(|errs| errs.iter().sum::<f64>() / errs.len() as f64)
        .collect();
    let slope = slope_of(&log_n, &mean_errors)?;

    // bootstrap over replicates within each grid point
    let mut rng = substream(config.seed, &[STREAM_BOOT]);
    let mut slopes = Vec::with_capacity(BOOTSTRAP_SAMPLES);
    use rand::Rng;
    for _ in 0..BOOTSTRAP_SAMPLES {
        let resampled: Vec<f64> = per_point
            .iter()
            .map(|errs| {
                let k = errs.len();
                let mut sum = 0.0;
                for _ in 0..k {
                    sum += errs[rng.random_range(0..k)];
                }
                sum / k as f64
            })
            .collect();
        if let Ok(s) = slope_of(&log_n, &resampled) {
            slopes.push(s);
        }
    }
    slopes.sort_by(f64::total_cmp);
    let lo_idx = ((slopes.len() as f64) * 0.025).floor() as usize;
    let hi_idx = (((slopes.len() as f64) * 0.975).ceil() as usize).min(slopes.len() - 1);

    Ok(RateCheckResult {
        kind,
        grid: grid.to_vec(),
        mean_errors,
        slope,
        slope_ci_lower: slopes[lo_idx],
        slope_ci_upper: slopes[hi_idx],
        replicates,
        excluded,
    })
}

/// Least-squares slope of ln(err) on x; errors must be positive.
fn slope_of(x: &[f64], errors: &[f64]) -> Result<f64> {
    if errors.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Data(
            "rate regression needs strictly positive errors".into(),
        ));
    }
    let k = x.len() as f64;
    let logs: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let mx = x.iter().sum::<f64>() / k;
    let my = logs.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateGrid(
            "grid has no variation on the log scale".into(),
        ));
    }
    let sxy: f64 = x
        .iter()
        .zip(&logs)
        .map(|(v, l)| (v - mx) * (l - my))
        .sum();
    Ok(sxy / sxx)
}

/// Picks the L1 penalty strength from a grid (log-spaced by convention)
/// by weighted log loss on a held-out split. Returns the winner and the
/// per-candidate held-out losses; candidates whose fit fails to converge
/// score infinity.
pub fn select_lambda(
    data: &Dataset,
    map: &FeatureMap,
    grid: &[f64],
    holdout_fraction: f64,
    seed: u64,
) -> Result<(f64, Vec<(f64, f64)>)> {
    if grid.is_empty() {
        return Err(Error::Config("lambda grid must be non-empty".into()));
    }
    if grid.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
        return Err(Error::Config("lambda grid values must be nonnegative".into()));
    }
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::Config(format!(
            "holdout fraction must lie in (0,1), got {holdout_fraction}"
        )));
    }
    let n = data.n();
    let holdout_n = (((n as f64) * holdout_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    {
        use rand::seq::SliceRandom;
        let mut rng = substream(seed, &[STREAM_SPLIT, 0x1a]);
        order.shuffle(&mut rng);
    }
    let (test_rows, train_rows) = order.split_at(holdout_n);
    let train = data.select(train_rows);
    let holdout = data.select(test_rows);
    let holdout_design = map.build_design(holdout.x.view())?;

    let mut table = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let (model, report) = fit_logistic(&train, map, &Penalty::l1(lambda), None)?;
        let loss = if report.converged {
            let SourceModel::Coefficients { theta, .. } = &model else {
                unreachable!()
            };
            let scores = holdout_design.dot(theta);
            let mut acc = 0.0;
            for i in 0..holdout.n() {
                acc += holdout.w[i] * crate::glm::entropy_loss(holdout.y[i], scores[i]);
            }
            acc / holdout.n() as f64
        } else {
            f64::INFINITY
        };
        table.push((lambda, loss));
    }
    let best = table
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty grid");
    if best.1.is_infinite() {
        return Err(Error::Data(
            "no lambda candidate produced a converged fit".into(),
        ));
    }
    Ok((best.0, table))
}

/// Builds an external-probability source from a table keyed by row id,
/// fits the L1-penalized shift on a training split of the target, and
/// reports held-out metrics.
pub fn adjust_external(
    probabilities: std::collections::BTreeMap<String, f64>,
    target: &Dataset,
    shift_map: &FeatureMap,
    penalty: &Penalty,
    seed: u64,
    holdout_fraction: f64,
) -> Result<(TransferModel, MetricsReport, crate::logistic::FitReport)> {
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(Error::Config(format!(
            "holdout fraction must lie in [0,1), got {holdout_fraction}"
        )));
    }
    let source = SourceModel::External { probabilities };
    // surfaces every missing row id before any fitting happens
    source.predict_dataset(target)?;

    let n = target.n();
    let mut order: Vec<usize> = (0..n).collect();
    if holdout_fraction > 0.0 {
        use rand::seq::SliceRandom;
        let mut rng = substream(seed, &[STREAM_SPLIT]);
        order.shuffle(&mut rng);
    }
    let holdout_n = ((n as f64) * holdout_fraction).round() as usize;
    let (test_rows, train_rows) = order.split_at(holdout_n);
    let train = if train_rows.is_empty() {
        target.clone()
    } else {
        target.select(train_rows)
    };

    let (model, report) = fit_transfer(&source, &train, shift_map, penalty, DEFAULT_CLAMP_EPS)?;

    let eval = if test_rows.is_empty() {
        target.clone()
    } else {
        target.select(test_rows)
    };
    let (probs, labels) = model.predict_dataset(&eval)?;
    let labels_f: Vec<f64> = labels.iter().map(|&v| v as f64).collect();
    let truth: Vec<f64> = eval.y.to_vec();
    let mut metrics = confusion(&truth, &labels_f)?;
    if truth.iter().any(|&v| v == 1.0) && truth.iter().any(|&v| v == 0.0) {
        metrics.auc = Some(auc(&truth, &probs.to_vec())?);
    }
    Ok((model, metrics, report))
}
