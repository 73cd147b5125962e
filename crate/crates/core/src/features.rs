//! Declarative feature maps that expand raw covariates into design columns.
//!
//! A map lists which intercept/main/square/interaction columns to emit;
//! column order is fixed: intercept, mains ascending, squares ascending,
//! interaction pairs in lexicographic order.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Recipe for the design columns of one linear part (S(x) or T(x)).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureMap {
    #[serde(rename = "intercept")]
    pub include_intercept: bool,
    pub mains: Vec<usize>,
    pub squares: Vec<usize>,
    /// Pairs (j, j') with j < j'.
    pub interactions: Vec<(usize, usize)>,
}

impl FeatureMap {
    /// Intercept plus all main effects; the default shift map T(x).
    pub fn intercept_mains(d: usize) -> Self {
        FeatureMap {
            include_intercept: true,
            mains: (0..d).collect(),
            squares: Vec::new(),
            interactions: Vec::new(),
        }
    }

    /// Intercept only; the label-shift map T(x) = 1.
    pub fn intercept_only() -> Self {
        FeatureMap {
            include_intercept: true,
            mains: Vec::new(),
            squares: Vec::new(),
            interactions: Vec::new(),
        }
    }

    /// Intercept, all mains, all squares and all ordered pairs:
    /// width 1 + 2d + d(d-1)/2.
    pub fn full(d: usize) -> Self {
        let mut interactions = Vec::with_capacity(d.saturating_sub(1) * d / 2);
        for j in 0..d {
            for k in (j + 1)..d {
                interactions.push((j, k));
            }
        }
        FeatureMap {
            include_intercept: true,
            mains: (0..d).collect(),
            squares: (0..d).collect(),
            interactions,
        }
    }

    /// Squares and pairwise interactions only (no intercept, no mains);
    /// the frozen quadratic part of the transfer model.
    pub fn quadratic_only(d: usize) -> Self {
        let mut m = Self::full(d);
        m.include_intercept = false;
        m.mains.clear();
        m
    }

    /// Number of design columns this map produces.
    pub fn width(&self) -> usize {
        usize::from(self.include_intercept)
            + self.mains.len()
            + self.squares.len()
            + self.interactions.len()
    }

    /// Checks index bounds, ordering of pairs, and uniqueness.
    pub fn validate(&self, d: usize) -> Result<()> {
        let bad_main = self.mains.iter().find(|&&j| j >= d);
        let bad_square = self.squares.iter().find(|&&j| j >= d);
        if let Some(&j) = bad_main.or(bad_square) {
            return Err(Error::Config(format!(
                "feature index {j} out of range for dimension {d}"
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for &(j, k) in &self.interactions {
            if j >= k {
                return Err(Error::Config(format!(
                    "interaction pair ({j},{k}) must satisfy j < j'"
                )));
            }
            if k >= d {
                return Err(Error::Config(format!(
                    "interaction index {k} out of range for dimension {d}"
                )));
            }
            if !seen.insert((j, k)) {
                return Err(Error::Config(format!(
                    "duplicate interaction pair ({j},{k})"
                )));
            }
        }
        Ok(())
    }

    /// Expands one observation into its design row.
    pub fn build_row(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.validate(x.len())?;
        let mut row = Array1::zeros(self.width());
        self.fill_row(x, row.view_mut().into_slice().expect("contiguous"));
        Ok(row)
    }

    fn fill_row(&self, x: ArrayView1<f64>, out: &mut [f64]) {
        let mut c = 0;
        if self.include_intercept {
            out[c] = 1.0;
            c += 1;
        }
        for &j in &self.mains {
            out[c] = x[j];
            c += 1;
        }
        for &j in &self.squares {
            out[c] = x[j] * x[j];
            c += 1;
        }
        for &(j, k) in &self.interactions {
            out[c] = x[j] * x[k];
            c += 1;
        }
    }

    /// Expands a whole matrix of observations; row i is `build_row(X_i)`.
    pub fn build_design(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.validate(x.ncols())?;
        let mut design = Array2::zeros((x.nrows(), self.width()));
        for (i, xi) in x.outer_iter().enumerate() {
            let mut row = design.row_mut(i);
            self.fill_row(xi, row.as_slice_mut().expect("contiguous"));
        }
        Ok(design)
    }

    /// Human-readable column names in design order (x indices are 1-based).
    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.width());
        if self.include_intercept {
            names.push("intercept".to_string());
        }
        for &j in &self.mains {
            names.push(format!("x{}", j + 1));
        }
        for &j in &self.squares {
            names.push(format!("x{}^2", j + 1));
        }
        for &(j, k) in &self.interactions {
            names.push(format!("x{}:x{}", j + 1, k + 1));
        }
        names
    }
}
