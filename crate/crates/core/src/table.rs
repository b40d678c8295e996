//! Two-way confusion tables.
//!
//! Rows index the predicted class and columns the true class. Cells are
//! stored densely in row-major order, so cell `(i, j)` lives at `i * r + j`
//! and every gradient vector uses the same layout.

use serde::{Deserialize, Serialize};

use crate::error::{MccError, Result};

/// Largest class count accepted for two-way tables.
pub const MAX_CLASSES_2: usize = 1000;

/// Tolerance on the total probability mass of a table.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Marginals within this distance of 0 or 1 are treated as degenerate.
pub const MARGIN_EPS: f64 = 1e-13;

/// True when a marginal probability lies strictly inside (0, 1).
pub(crate) fn is_interior(x: f64) -> bool {
    x > MARGIN_EPS && x < 1.0 - MARGIN_EPS
}

pub(crate) fn check_class_count(r: usize, max: usize) -> Result<()> {
    if r < 2 {
        return Err(MccError::TooFewClasses { r });
    }
    if r > max {
        return Err(MccError::TooManyClasses { r, max });
    }
    Ok(())
}

/// Observed counts `n_ij` of an `r x r` confusion table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts2 {
    r: usize,
    cells: Vec<u64>,
}

impl ConfusionCounts2 {
    /// Builds a table from row-major counts.
    pub fn new(r: usize, cells: Vec<u64>) -> Result<Self> {
        check_class_count(r, MAX_CLASSES_2)?;
        if cells.len() != r * r {
            return Err(MccError::ShapeMismatch {
                expected: r * r,
                found: cells.len(),
            });
        }
        Ok(Self { r, cells })
    }

    /// Builds a table from nested rows; every row must have `rows.len()` entries.
    pub fn from_rows<R: AsRef<[u64]>>(rows: &[R]) -> Result<Self> {
        let r = rows.len();
        let mut cells = Vec::with_capacity(r * r);
        for row in rows {
            let row = row.as_ref();
            if row.len() != r {
                return Err(MccError::ShapeMismatch {
                    expected: r,
                    found: row.len(),
                });
            }
            cells.extend_from_slice(row);
        }
        Self::new(r, cells)
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn cells(&self) -> &[u64] {
        &self.cells
    }

    pub fn get(&self, pred: usize, truth: usize) -> u64 {
        self.cells[pred * self.r + truth]
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().sum()
    }

    /// Swaps the roles of prediction and truth.
    pub fn transposed(&self) -> Self {
        let r = self.r;
        let mut cells = vec![0; r * r];
        for i in 0..r {
            for j in 0..r {
                cells[j * r + i] = self.cells[i * r + j];
            }
        }
        Self { r, cells }
    }
}

/// Maximum likelihood estimate `pi_ij = n_ij / n` of the cell probabilities.
pub fn normalize_counts(counts: &ConfusionCounts2) -> Result<ProbTable2> {
    let n = counts.total();
    if n == 0 {
        return Err(MccError::ZeroTotal);
    }
    let n = n as f64;
    let pi = counts.cells.iter().map(|&c| c as f64 / n).collect();
    Ok(ProbTable2::build(counts.r, pi))
}

/// Cell probabilities `pi_ij` with their row (`pi_{i+}`) and column
/// (`pi_{+j}`) marginals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbTable2 {
    r: usize,
    pi: Vec<f64>,
    row: Vec<f64>,
    col: Vec<f64>,
}

impl ProbTable2 {
    /// Validates a row-major probability vector.
    pub fn new(r: usize, pi: Vec<f64>) -> Result<Self> {
        check_class_count(r, MAX_CLASSES_2)?;
        if pi.len() != r * r {
            return Err(MccError::ShapeMismatch {
                expected: r * r,
                found: pi.len(),
            });
        }
        validate_probabilities(&pi)?;
        Ok(Self::build(r, pi))
    }

    pub(crate) fn build(r: usize, pi: Vec<f64>) -> Self {
        let mut row = vec![0.0; r];
        let mut col = vec![0.0; r];
        for i in 0..r {
            for j in 0..r {
                let v = pi[i * r + j];
                row[i] += v;
                col[j] += v;
            }
        }
        Self { r, pi, row, col }
    }

    /// `I / r`: every subject classified correctly, classes balanced.
    pub fn identity(r: usize) -> Result<Self> {
        check_class_count(r, MAX_CLASSES_2)?;
        let mut pi = vec![0.0; r * r];
        for i in 0..r {
            pi[i * r + i] = 1.0 / r as f64;
        }
        Ok(Self::build(r, pi))
    }

    /// Every cell `1 / r^2`.
    pub fn uniform(r: usize) -> Result<Self> {
        check_class_count(r, MAX_CLASSES_2)?;
        let v = 1.0 / (r * r) as f64;
        Ok(Self::build(r, vec![v; r * r]))
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn probs(&self) -> &[f64] {
        &self.pi
    }

    pub fn get(&self, pred: usize, truth: usize) -> f64 {
        self.pi[pred * self.r + truth]
    }

    /// Row marginals `pi_{i+}` (prediction distribution).
    pub fn row_marginals(&self) -> &[f64] {
        &self.row
    }

    /// Column marginals `pi_{+j}` (truth distribution).
    pub fn col_marginals(&self) -> &[f64] {
        &self.col
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.r).map(|i| self.get(i, i)).collect()
    }

    /// Accuracy `sum_i pi_ii`.
    pub fn accuracy(&self) -> f64 {
        (0..self.r).map(|i| self.get(i, i)).sum()
    }

    pub fn transposed(&self) -> Self {
        let r = self.r;
        let mut pi = vec![0.0; r * r];
        for i in 0..r {
            for j in 0..r {
                pi[j * r + i] = self.pi[i * r + j];
            }
        }
        Self::build(r, pi)
    }

    /// Relabels classes: class `a` of the result is class `perm[a]` of `self`,
    /// applied to rows and columns simultaneously.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let r = self.r;
        check_permutation(perm, r)?;
        let mut pi = vec![0.0; r * r];
        for a in 0..r {
            for b in 0..r {
                pi[a * r + b] = self.pi[perm[a] * r + perm[b]];
            }
        }
        Ok(Self::build(r, pi))
    }
}

pub(crate) fn check_permutation(perm: &[usize], r: usize) -> Result<()> {
    let mut seen = vec![false; r];
    if perm.len() != r {
        return Err(MccError::ShapeMismatch {
            expected: r,
            found: perm.len(),
        });
    }
    for &p in perm {
        if p >= r || seen[p] {
            return Err(MccError::InvalidConfig {
                reason: format!("{perm:?} is not a permutation of 0..{r}"),
            });
        }
        seen[p] = true;
    }
    Ok(())
}

pub(crate) fn validate_probabilities(pi: &[f64]) -> Result<()> {
    if let Some(bad) = pi.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(MccError::InvalidProbabilities {
            reason: format!("cell probability {bad} outside [0, 1]"),
        });
    }
    let total: f64 = pi.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(MccError::InvalidProbabilities {
            reason: format!("cells sum to {total}, not 1"),
        });
    }
    Ok(())
}

/// Per-class rates as probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassRates {
    pub tp: f64,
    pub fp: f64,
    pub fn_: f64,
    pub tn: f64,
}

/// True/false positive/negative rates for every class of a table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClasswiseRates {
    pub classes: Vec<ClassRates>,
}

/// `TP_a = pi_aa`, `FP_a` the off-diagonal mass of row `a`, `FN_a` the
/// off-diagonal mass of column `a`, and `TN_a` the remainder.
pub fn classwise_rates(p: &ProbTable2) -> ClasswiseRates {
    let classes = (0..p.r)
        .map(|a| {
            let tp = p.get(a, a);
            let fp = p.row[a] - tp;
            let fn_ = p.col[a] - tp;
            ClassRates {
                tp,
                fp,
                fn_,
                tn: 1.0 - tp - fp - fn_,
            }
        })
        .collect();
    ClasswiseRates { classes }
}

/// Which multiclass MCC to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    /// Mean of the per-class binary MCCs.
    #[serde(rename = "mam")]
    MaM,
    /// Pooled micro-average, affine in accuracy.
    #[serde(rename = "mim")]
    MiM,
    /// Covariance-form micro-average.
    #[serde(rename = "mim-star")]
    MiMStar,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::MaM, MetricKind::MiM, MetricKind::MiMStar];

    pub fn label(self) -> &'static str {
        match self {
            MetricKind::MaM => "maM",
            MetricKind::MiM => "miM",
            MetricKind::MiMStar => "miM*",
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}
