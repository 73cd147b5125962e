//! Synthetic posterior-drift benchmark: covariates are N_d(0, 4I) in both
//! domains, labels are Bernoulli with index
//!
//!   source: sum_j (-1)^{j-1} (xi x_j^2 - delta x_j)
//!   target: sum_j (-1)^{j-1} (xi x_j^2 + delta x_j)
//!
//! pushed through a configurable inverse link. Under the logit link the
//! pair satisfies the drift model exactly with T = mains and
//! beta = 2 delta (+1, -1, +1, ...).
//!
//! Randomness: every draw comes from a ChaCha8 stream whose 64-bit key is
//! derived from (seed, purpose tag, domain tag, extra tags) by chained
//! SplitMix64 finalizers, so any (config, replicate) cell is reproducible
//! in isolation.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::glm::{inverse_link, LinkKind};
use crate::source::{FitMeta, SourceModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::Source => 1,
            Domain::Target => 2,
        }
    }
}

/// Stream purposes; part of the documented key-derivation scheme.
pub const STREAM_GENERATE: u64 = 0x11;
pub const STREAM_EVAL: u64 = 0x22;

/// Simulation cell: dimension, sample sizes, drift strengths, link, seed.
/// Fields omitted from a JSON config fall back to the benchmark defaults
/// (d=5, m=2000, n=100, xi=1, delta=2, logit link, seed 0).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub xi: f64,
    pub delta: f64,
    pub link: LinkKind,
    pub seed: u64,
    pub n_mc: usize,
}

fn default_n_mc() -> usize {
    200_000
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            d: 5,
            m: 2000,
            n: 100,
            xi: 1.0,
            delta: 2.0,
            link: LinkKind::Logit,
            seed: 0,
            n_mc: default_n_mc(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Config("dimension d must be at least 1".into()));
        }
        if !self.xi.is_finite() || !self.delta.is_finite() {
            return Err(Error::Config("xi and delta must be finite".into()));
        }
        Ok(())
    }

    /// Copy with the seed replaced; used by sweep replicates.
    pub fn with_seed(&self, seed: u64) -> Self {
        SimConfig { seed, ..self.clone() }
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// 64-bit sub-stream key for (base seed, tags...).
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut state = mix(base);
    for &t in tags {
        state = mix(state ^ t.wrapping_mul(0x9e3779b97f4a7c15));
    }
    state
}

/// Independent ChaCha8 stream for (base seed, tags...).
pub fn substream(base: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tags))
}

/// Population linear predictor on the link scale; "logit" under the
/// default link. Source and target differ only in the sign of delta.
pub fn true_logit(config: &SimConfig, domain: Domain, x: ArrayView1<f64>) -> f64 {
    let delta = match domain {
        Domain::Source => -config.delta,
        Domain::Target => config.delta,
    };
    let mut acc = 0.0;
    for (j, &xj) in x.iter().enumerate() {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * (config.xi * xj * xj + delta * xj);
    }
    acc
}

/// True regression function eta(x) for the configured link.
pub fn true_eta(config: &SimConfig, domain: Domain, x: ArrayView1<f64>) -> f64 {
    inverse_link(config.link, true_logit(config, domain, x))
}

/// Shift vector over the intercept+mains map that makes the logit-link
/// pair exact: (0, 2 delta, -2 delta, ...).
pub fn true_shift(config: &SimConfig) -> Array1<f64> {
    let mut beta = Array1::zeros(config.d + 1);
    for j in 0..config.d {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        beta[j + 1] = 2.0 * config.delta * sign;
    }
    beta
}

/// Exact source model for the logit link: the generative index is linear
/// in mains and squares. Errors for other links, whose eta_P has no
/// coefficient representation.
pub fn oracle_source_model(config: &SimConfig) -> Result<SourceModel> {
    if config.link != LinkKind::Logit {
        return Err(Error::Config(format!(
            "oracle source model exists only under the logit link, not {}",
            config.link.name()
        )));
    }
    let map = FeatureMap {
        include_intercept: false,
        mains: (0..config.d).collect(),
        squares: (0..config.d).collect(),
        interactions: Vec::new(),
    };
    let mut theta = Array1::zeros(2 * config.d);
    for j in 0..config.d {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        theta[j] = -config.delta * sign; // mains
        theta[config.d + j] = config.xi * sign; // squares
    }
    Ok(SourceModel::Coefficients {
        map,
        theta,
        meta: FitMeta {
            lambda: 0.0,
            converged: true,
            iterations: 0,
        },
    })
}

fn sample(config: &SimConfig, domain: Domain, size: usize, rng: &mut ChaCha8Rng) -> Dataset {
    let d = config.d;
    let mut x = Array2::zeros((size, d));
    let mut y = Array1::zeros(size);
    for i in 0..size {
        for j in 0..d {
            // N(0, 4): standard normal scaled by 2
            let z: f64 = rng.sample(StandardNormal);
            x[(i, j)] = 2.0 * z;
        }
        let eta = true_eta(config, domain, x.row(i));
        y[i] = if rng.random::<f64>() < eta { 1.0 } else { 0.0 };
    }
    Dataset::new(x, y).expect("generated shapes are consistent")
}

/// Draws the domain's training set (m source rows or n target rows) from
/// the (seed, GENERATE, domain) stream.
pub fn generate(config: &SimConfig, domain: Domain) -> Result<Dataset> {
    config.validate()?;
    let size = match domain {
        Domain::Source => config.m,
        Domain::Target => config.n,
    };
    let mut rng = substream(config.seed, &[STREAM_GENERATE, domain.tag()]);
    Ok(sample(config, domain, size, &mut rng))
}

/// Fresh target rows from the evaluation stream, independent of the
/// training draws.
pub fn generate_eval(config: &SimConfig, size: usize) -> Result<Dataset> {
    config.validate()?;
    let mut rng = substream(config.seed, &[STREAM_EVAL, Domain::Target.tag()]);
    Ok(sample(config, Domain::Target, size, &mut rng))
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Accuracy of the population Bayes rule 1{eta > 1/2} in the given
/// domain, by n_mc fresh draws.
pub fn bayes_accuracy(config: &SimConfig, domain: Domain) -> Result<McEstimate> {
    config.validate()?;
    if config.n_mc == 0 {
        return Err(Error::Config("bayes_accuracy needs n_mc >= 1".into()));
    }
    let mut rng = substream(config.seed, &[STREAM_EVAL, domain.tag(), 0xacc]);
    let mut hits = 0u64;
    for _ in 0..config.n_mc {
        let mut x = Array1::zeros(config.d);
        for j in 0..config.d {
            let z: f64 = rng.sample(StandardNormal);
            x[j] = 2.0 * z;
        }
        let eta = true_eta(config, domain, x.view());
        let bayes = eta > 0.5;
        let y = rng.random::<f64>() < eta;
        if bayes == y {
            hits += 1;
        }
    }
    let acc = hits as f64 / config.n_mc as f64;
    Ok(McEstimate {
        value: acc,
        std_error: (acc * (1.0 - acc) / config.n_mc as f64).sqrt(),
    })
}

/// Disagreement-weighted excess risk E_Q[|2 eta - 1| 1{f != f*}] of a
/// classifier against the Bayes rule, sharing one draw for both so the
/// Bayes rule itself scores exactly zero.
pub fn excess_risk<F>(classifier: F, config: &SimConfig) -> Result<McEstimate>
where
    F: Fn(ArrayView1<f64>) -> u8,
{
    config.validate()?;
    if config.n_mc == 0 {
        return Err(Error::Config("excess_risk needs n_mc >= 1".into()));
    }
    let mut rng = substream(config.seed, &[STREAM_EVAL, Domain::Target.tag(), 0xe8]);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..config.n_mc {
        let mut x = Array1::zeros(config.d);
        for j in 0..config.d {
            let z: f64 = rng.sample(StandardNormal);
            x[j] = 2.0 * z;
        }
        let eta = true_eta(config, Domain::Target, x.view());
        let bayes = u8::from(eta > 0.5);
        let predicted = classifier(x.view());
        let contribution = if predicted != bayes {
            (2.0 * eta - 1.0).abs()
        } else {
            0.0
        };
        sum += contribution;
        sum_sq += contribution * contribution;
    }
    let n = config.n_mc as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    Ok(McEstimate {
        value: mean,
        std_error: (var / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn null_config(seed: u64) -> SimConfig {
        SimConfig {
            d: 2,
            xi: 0.0,
            delta: 0.0,
            seed,
            n_mc: 50_000,
            ..SimConfig::default()
        }
    }

    #[test]
    fn true_logit_examples() {
        let null = null_config(0);
        assert_eq!(
            true_logit(&null, Domain::Source, array![1.3, -0.7].view()),
            0.0
        );
        assert_eq!(
            true_logit(&null, Domain::Target, array![1.3, -0.7].view()),
            0.0
        );

        let cfg = SimConfig {
            d: 1,
            xi: 1.0,
            delta: 2.0,
            ..SimConfig::default()
        };
        assert_eq!(true_logit(&cfg, Domain::Target, array![1.0].view()), 3.0);
        assert_eq!(true_logit(&cfg, Domain::Source, array![1.0].view()), -1.0);
    }

    #[test]
    fn drift_identity_holds_pointwise() {
        let cfg = SimConfig {
            seed: 5,
            ..SimConfig::default()
        };
        let beta = true_shift(&cfg);
        let mut rng = substream(17, &[9]);
        for _ in 0..100 {
            let x = Array1::from_iter(
                (0..cfg.d).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)),
            );
            let gap = true_logit(&cfg, Domain::Target, x.view())
                - true_logit(&cfg, Domain::Source, x.view());
            let mut shift = beta[0];
            for j in 0..cfg.d {
                shift += beta[j + 1] * x[j];
            }
            assert!((gap - shift).abs() < 1e-12, "gap {gap} shift {shift}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SimConfig {
            seed: 42,
            m: 50,
            n: 25,
            ..SimConfig::default()
        };
        let a = generate(&cfg, Domain::Source).unwrap();
        let b = generate(&cfg, Domain::Source).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        let t = generate(&cfg, Domain::Target).unwrap();
        assert_eq!(t.n(), 25);
        assert_ne!(a.x.row(0), t.x.row(0), "domains use distinct streams");
    }

    #[test]
    fn empty_sizes_give_empty_datasets() {
        let cfg = SimConfig {
            m: 0,
            n: 0,
            ..SimConfig::default()
        };
        assert_eq!(generate(&cfg, Domain::Source).unwrap().n(), 0);
        assert_eq!(generate(&cfg, Domain::Target).unwrap().n(), 0);
    }

    #[test]
    fn covariates_match_the_declared_gaussian() {
        let cfg = SimConfig {
            d: 3,
            m: 100_000,
            seed: 7,
            ..SimConfig::default()
        };
        let data = generate(&cfg, Domain::Source).unwrap();
        let n = data.n() as f64;
        for j in 0..3 {
            let mean = data.x.column(j).sum() / n;
            assert!(mean.abs() < 0.05, "mean[{j}] = {mean}");
        }
        for j in 0..3 {
            for k in 0..3 {
                let cj = data.x.column(j);
                let ck = data.x.column(k);
                let mj = cj.sum() / n;
                let mk = ck.sum() / n;
                let cov = cj
                    .iter()
                    .zip(ck.iter())
                    .map(|(a, b)| (a - mj) * (b - mk))
                    .sum::<f64>()
                    / n;
                let want = if j == k { 4.0 } else { 0.0 };
                assert!((cov - want).abs() < 0.1, "cov[{j},{k}] = {cov}");
            }
        }
    }

    #[test]
    fn null_model_labels_are_coin_flips() {
        let cfg = SimConfig {
            m: 40_000,
            ..null_config(3)
        };
        let data = generate(&cfg, Domain::Source).unwrap();
        let freq = data.y.sum() / data.n() as f64;
        let se = 0.5 / (data.n() as f64).sqrt();
        assert!((freq - 0.5).abs() < 3.0 * se, "freq {freq}");
    }

    #[test]
    fn source_and_target_share_the_covariate_marginal() {
        let cfg = SimConfig {
            d: 2,
            m: 30_000,
            n: 30_000,
            seed: 11,
            ..SimConfig::default()
        };
        let s = generate(&cfg, Domain::Source).unwrap();
        let t = generate(&cfg, Domain::Target).unwrap();
        for j in 0..2 {
            let ms = s.x.column(j).sum() / s.n() as f64;
            let mt = t.x.column(j).sum() / t.n() as f64;
            // each mean has sd 2/sqrt(n)
            let se = (4.0 / s.n() as f64 + 4.0 / t.n() as f64).sqrt();
            assert!((ms - mt).abs() < 4.0 * se, "col {j}: {ms} vs {mt}");
        }
    }

    #[test]
    fn bayes_accuracy_is_half_under_pure_noise() {
        let est = bayes_accuracy(&null_config(13), Domain::Target).unwrap();
        assert!((est.value - 0.5).abs() <= 3.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn bayes_accuracy_grows_with_separation() {
        let mut last = 0.0;
        for (i, delta) in [0.0, 1.0, 2.0, 4.0, 8.0].into_iter().enumerate() {
            let cfg = SimConfig {
                d: 2,
                xi: 0.0,
                delta,
                seed: 29,
                n_mc: 100_000,
                ..SimConfig::default()
            };
            let est = bayes_accuracy(&cfg, Domain::Target).unwrap();
            if i > 0 {
                assert!(
                    est.value > last - 3.0 * est.std_error,
                    "accuracy dropped at delta={delta}: {} -> {}",
                    last,
                    est.value
                );
            }
            last = est.value;
        }
        assert!(last > 0.9, "delta=8 accuracy {last}");
    }

    #[test]
    fn bayes_rule_has_exactly_zero_excess_risk() {
        let cfg = SimConfig {
            seed: 31,
            n_mc: 20_000,
            ..SimConfig::default()
        };
        let bayes = |x: ArrayView1<f64>| u8::from(true_eta(&cfg, Domain::Target, x) > 0.5);
        let est = excess_risk(bayes, &cfg).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn constant_classifier_under_pure_noise_has_zero_excess_risk() {
        let cfg = null_config(37);
        let est = excess_risk(|_| 0, &cfg).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn anti_bayes_excess_risk_matches_mean_margin() {
        let cfg = SimConfig {
            d: 2,
            seed: 41,
            n_mc: 100_000,
            ..SimConfig::default()
        };
        let anti = |x: ArrayView1<f64>| u8::from(true_eta(&cfg, Domain::Target, x) <= 0.5);
        let est = excess_risk(anti, &cfg).unwrap();

        // independent estimator of E|2 eta - 1| from a different stream
        let mut rng = substream(987, &[1]);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let x = Array1::from_iter(
                (0..cfg.d).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)),
            );
            let v = (2.0 * true_eta(&cfg, Domain::Target, x.view()) - 1.0).abs();
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n as f64;
        let se = ((sum_sq / n as f64 - mean * mean) / n as f64).sqrt();
        let combined = (est.std_error * est.std_error + se * se).sqrt();
        assert!(
            (est.value - mean).abs() <= 4.0 * combined,
            "{} vs {mean} (combined se {combined})",
            est.value
        );
    }

    #[test]
    fn oracle_source_model_matches_true_eta_under_logit() {
        let cfg = SimConfig {
            seed: 43,
            ..SimConfig::default()
        };
        let oracle = oracle_source_model(&cfg).unwrap();
        let mut rng = substream(19, &[4]);
        for _ in 0..50 {
            let x = Array1::from_iter(
                (0..cfg.d).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)),
            );
            let want = true_eta(&cfg, Domain::Source, x.view());
            let got = oracle.predict_proba(x.view()).unwrap();
            assert!((got - want).abs() < 1e-12);
        }
        let probit = SimConfig {
            link: LinkKind::Probit,
            ..cfg
        };
        assert!(oracle_source_model(&probit).is_err());
    }
}
