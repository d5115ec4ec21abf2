//! In-memory dataset of two positive responses and numeric covariates.

use crate::error::{Error, Result};

/// A rectangular dataset: two response vectors and column-major covariates.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    /// Covariate columns, each of length `n`.
    pub covariates: Vec<Vec<f64>>,
    /// Covariate names, parallel to `covariates`.
    pub names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, validating shape, finiteness and response positivity.
    pub fn new(
        y1: Vec<f64>,
        y2: Vec<f64>,
        covariates: Vec<Vec<f64>>,
        names: Vec<String>,
    ) -> Result<Self> {
        let n = y1.len();
        if n == 0 {
            return Err(Error::Data("dataset has no rows".into()));
        }
        if y2.len() != n {
            return Err(Error::Data(format!(
                "response lengths differ: {} vs {}",
                y1.len(),
                y2.len()
            )));
        }
        if names.len() != covariates.len() {
            return Err(Error::Data(format!(
                "{} covariate names for {} columns",
                names.len(),
                covariates.len()
            )));
        }
        for (k, (y, label)) in [(&y1, "first"), (&y2, "second")].iter().enumerate() {
            for (i, v) in y.iter().enumerate() {
                if !v.is_finite() || *v <= 0.0 {
                    let _ = k;
                    return Err(Error::Data(format!(
                        "{label} response must be a positive real; row {i} has {v}"
                    )));
                }
            }
        }
        for (j, col) in covariates.iter().enumerate() {
            if col.len() != n {
                return Err(Error::Data(format!(
                    "covariate column {j} has {} rows, expected {n}",
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "covariate `{}` row {i} is not finite (missing values are rejected)",
                    names[j]
                )));
            }
        }
        Ok(Dataset {
            y1,
            y2,
            covariates,
            names,
        })
    }

    pub fn n(&self) -> usize {
        self.y1.len()
    }

    pub fn p(&self) -> usize {
        self.covariates.len()
    }

    /// Row subset by index (used by cross-validation folds).
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            y1: rows.iter().map(|&i| self.y1[i]).collect(),
            y2: rows.iter().map(|&i| self.y2[i]).collect(),
            covariates: self
                .covariates
                .iter()
                .map(|col| rows.iter().map(|&i| col[i]).collect())
                .collect(),
            names: self.names.clone(),
        }
    }

    /// True when a column takes only the values 0 and 1.
    pub fn is_binary(&self, j: usize) -> bool {
        self.covariates[j].iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_rows() {
        assert!(Dataset::new(vec![], vec![], vec![], vec![]).is_err());
        assert!(Dataset::new(vec![1.0], vec![-1.0], vec![], vec![]).is_err());
        assert!(Dataset::new(vec![1.0], vec![1.0, 2.0], vec![], vec![]).is_err());
        assert!(Dataset::new(
            vec![1.0],
            vec![1.0],
            vec![vec![f64::NAN]],
            vec!["x1".into()]
        )
        .is_err());
        assert!(Dataset::new(vec![0.0], vec![1.0], vec![], vec![]).is_err());
    }

    #[test]
    fn subset_and_binary_detection() {
        let d = Dataset::new(
            vec![1.0, 2.0, 3.0],
            vec![1.0, 1.0, 1.0],
            vec![vec![0.0, 1.0, 0.0], vec![0.5, 1.5, 2.5]],
            vec!["b".into(), "x".into()],
        )
        .unwrap();
        assert!(d.is_binary(0));
        assert!(!d.is_binary(1));
        let s = d.subset(&[2, 0]);
        assert_eq!(s.y1, vec![3.0, 1.0]);
        assert_eq!(s.covariates[1], vec![2.5, 0.5]);
    }
}
