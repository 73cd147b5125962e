//! Binary classification metrics: confusion counts with derived rates,
//! and rank-based AUC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Confusion counts and the rates derived from them. Rates whose
/// denominator class is absent are `None`, never silent NaN.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub auc: Option<f64>,
    pub balanced_accuracy: Option<f64>,
    pub counts: Counts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl MetricsReport {
    /// One CSV row matching [`Self::csv_header`].
    pub fn to_csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x}"));
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.accuracy,
            opt(self.tpr),
            opt(self.tnr),
            opt(self.auc),
            opt(self.balanced_accuracy),
            self.counts.tp,
            self.counts.fp,
            self.counts.tn,
            self.counts.fn_
        )
    }

    pub fn csv_header() -> &'static str {
        "accuracy,tpr,tnr,auc,balanced_accuracy,tp,fp,tn,fn"
    }
}

fn check_binary(values: &[f64], what: &str) -> Result<()> {
    match values.iter().find(|&&v| v != 0.0 && v != 1.0) {
        Some(bad) => Err(Error::Data(format!("{what} must be 0 or 1, got {bad}"))),
        None => Ok(()),
    }
}

/// Exact confusion counts and rates. AUC is left unset; join scores via
/// [`auc`] when available.
pub fn confusion(labels: &[f64], predictions: &[f64]) -> Result<MetricsReport> {
    if labels.len() != predictions.len() {
        return Err(Error::DimensionMismatch {
            context: "labels vs predictions".into(),
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::Data("confusion needs at least one row".into()));
    }
    check_binary(labels, "labels")?;
    check_binary(predictions, "predictions")?;

    let mut counts = Counts {
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
    };
    for (&y, &p) in labels.iter().zip(predictions) {
        match (y == 1.0, p == 1.0) {
            (true, true) => counts.tp += 1,
            (true, false) => counts.fn_ += 1,
            (false, true) => counts.fp += 1,
            (false, false) => counts.tn += 1,
        }
    }
    let n = labels.len() as f64;
    let positives = counts.tp + counts.fn_;
    let negatives = counts.tn + counts.fp;
    let tpr = (positives > 0).then(|| counts.tp as f64 / positives as f64);
    let tnr = (negatives > 0).then(|| counts.tn as f64 / negatives as f64);
    let balanced_accuracy = match (tpr, tnr) {
        (Some(a), Some(b)) => Some((a + b) / 2.0),
        _ => None,
    };
    Ok(MetricsReport {
        accuracy: (counts.tp + counts.tn) as f64 / n,
        tpr,
        tnr,
        auc: None,
        balanced_accuracy,
        counts,
    })
}

/// Mann-Whitney AUC with half credit for ties, via mid-ranks in
/// O(n log n). Numerator and denominator are exact half-integers, so the
/// result equals brute-force pair enumeration bit for bit.
pub fn auc(labels: &[f64], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            context: "labels vs scores".into(),
            expected: labels.len(),
            got: scores.len(),
        });
    }
    check_binary(labels, "labels")?;
    let n = labels.len();
    let n_pos = labels.iter().filter(|&&y| y == 1.0).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass("AUC needs both classes present".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // mid-ranks over tie groups; accumulate the rank sum of positives
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j share the mid-rank (i+1+j)/2
        let mid_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] == 1.0 {
                rank_sum_pos += mid_rank;
            }
        }
        i = j;
    }
    let n_pos_f = n_pos as f64;
    Ok((rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64))
}
