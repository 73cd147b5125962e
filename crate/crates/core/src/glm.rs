//! Link functions, inverse links and the entropy loss.
//!
//! Fitting always happens on the logit scale; the probit, cauchit and
//! cloglog inverse links exist only so the synthetic generator can produce
//! mis-specified data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inverse link used when generating Bernoulli labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    #[default]
    Logit,
    Probit,
    Cauchit,
    Cloglog,
}

impl LinkKind {
    pub fn name(&self) -> &'static str {
        match self {
            LinkKind::Logit => "logit",
            LinkKind::Probit => "probit",
            LinkKind::Cauchit => "cauchit",
            LinkKind::Cloglog => "cloglog",
        }
    }
}

impl std::str::FromStr for LinkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logit" => Ok(LinkKind::Logit),
            "probit" => Ok(LinkKind::Probit),
            "cauchit" => Ok(LinkKind::Cauchit),
            "cloglog" => Ok(LinkKind::Cloglog),
            other => Err(Error::Config(format!("unknown link: {other}"))),
        }
    }
}

/// Logistic function 1/(1+e^{-a}), branch-free of overflowing exponentials.
#[inline]
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let z = a.exp();
        z / (1.0 + z)
    }
}

/// Log odds log(p/(1-p)). Errors outside the open unit interval; callers
/// that may see boundary probabilities must clamp first.
#[inline]
pub fn logit(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("logit requires p in (0,1), got {p}")));
    }
    Ok((p / (1.0 - p)).ln())
}

/// Negative Bernoulli log-likelihood -ya + log(1+e^a).
///
/// Uses log(1+e^a) = max(a,0) + log1p(e^{-|a|}) so large |a| never
/// overflows.
#[inline]
pub fn entropy_loss(y: f64, a: f64) -> f64 {
    -y * a + a.max(0.0) + (-a.abs()).exp().ln_1p()
}

/// Inverse of the generative link: maps the linear predictor into (0,1).
/// Deep tails are clamped to the open interval, since probit and cloglog
/// saturate to exactly 1.0 in f64 well before the argument overflows.
pub fn inverse_link(kind: LinkKind, a: f64) -> f64 {
    let p = match kind {
        LinkKind::Logit => sigmoid(a),
        LinkKind::Probit => normal_cdf(a),
        LinkKind::Cauchit => 0.5 + a.atan() / std::f64::consts::PI,
        LinkKind::Cloglog => {
            // 1 - exp(-exp(a)); -expm1 keeps precision for small exp(a)
            -(-a.exp()).exp_m1()
        }
    };
    p.clamp(f64::MIN_POSITIVE, ONE_MINUS_EPS)
}

/// Largest f64 strictly below 1.
const ONE_MINUS_EPS: f64 = 1.0 - f64::EPSILON / 2.0;

/// Standard normal CDF via the complementary error function,
/// Phi(a) = erfc(-a / sqrt(2)) / 2.
pub fn normal_cdf(a: f64) -> f64 {
    0.5 * erfc(-a * std::f64::consts::FRAC_1_SQRT_2)
}

// Rational Chebyshev approximation of erf/erfc after W. J. Cody,
// "Rational Chebyshev approximation for the error function",
// Math. Comp. 23 (1969), 631-637 (the SPECFUN coefficient set).
// Maximal relative error is below 6e-17 in each of the three regions,
// far inside the 1e-12 target for Phi.

#[allow(clippy::excessive_precision)]
const ERF_A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
#[allow(clippy::excessive_precision)]
const ERF_B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];
#[allow(clippy::excessive_precision)]
const ERF_C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
#[allow(clippy::excessive_precision)]
const ERF_D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];
#[allow(clippy::excessive_precision)]
const ERF_P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
#[allow(clippy::excessive_precision)]
const ERF_Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];

#[allow(clippy::excessive_precision)]
const FRAC_1_SQRT_PI: f64 = 5.641895835477562869e-1;

/// erfc(x) for all finite x; underflows to 0 past ~27.3.
pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    if y <= 0.46875 {
        return 1.0 - erf_central(x);
    }
    let result = if y <= 4.0 {
        let mut num = ERF_C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + ERF_C[i]) * y;
            den = (den + ERF_D[i]) * y;
        }
        scaled_tail(y, (num + ERF_C[7]) / (den + ERF_D[7]))
    } else if y < 26.6 {
        let ysq = 1.0 / (y * y);
        let mut num = ERF_P[5] * ysq;
        let mut den = ysq;
        for i in 0..4 {
            num = (num + ERF_P[i]) * ysq;
            den = (den + ERF_Q[i]) * ysq;
        }
        let r = ysq * (num + ERF_P[4]) / (den + ERF_Q[4]);
        scaled_tail(y, (FRAC_1_SQRT_PI - r) / y)
    } else {
        0.0
    };
    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

/// erf on |x| <= 0.46875.
fn erf_central(x: f64) -> f64 {
    let z = x * x;
    let mut num = ERF_A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + ERF_A[i]) * z;
        den = (den + ERF_B[i]) * z;
    }
    x * (num + ERF_A[3]) / (den + ERF_B[3])
}

/// exp(-y^2) * r, with the square split so the argument of each exp stays
/// exactly representable (Cody's trick: y^2 = ysq^2 + (y-ysq)(y+ysq) with
/// ysq a multiple of 1/16).
fn scaled_tail(y: f64, r: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp() * r
}
