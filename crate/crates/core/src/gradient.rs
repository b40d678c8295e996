//! Cell-level partial derivatives of the three multiclass MCCs.
//!
//! Each metric depends on the cells only through the diagonal `pi_aa`, the
//! prediction marginals `pi_{a+}` and the truth marginals `pi_{+a}`. The
//! partial with respect to a cell predicted as `i` with truth `k` is
//! therefore `row[i] + col[k] + [i == k] diag[i]`, which holds equally for
//! a two-way table and for either method of a paired three-way table.

use crate::error::{MccError, Result};
use crate::metrics::class_mcc;
use crate::table::{is_interior, ClassRates, MetricKind, MARGIN_EPS};

/// Per-class building blocks of a gradient.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CellPartials {
    /// Contribution of a cell's prediction class.
    pub row: Vec<f64>,
    /// Contribution of a cell's truth class.
    pub col: Vec<f64>,
    /// Extra contribution of a diagonal cell.
    pub diag: Vec<f64>,
}

impl CellPartials {
    #[inline]
    pub fn at(&self, pred: usize, truth: usize) -> f64 {
        let v = self.row[pred] + self.col[truth];
        if pred == truth {
            v + self.diag[pred]
        } else {
            v
        }
    }
}

/// Summary statistics of a (possibly marginalized) two-way table.
pub(crate) struct TableSummary<'a> {
    pub diag: &'a [f64],
    /// Prediction marginals.
    pub row: &'a [f64],
    /// Truth marginals.
    pub col: &'a [f64],
}

impl TableSummary<'_> {
    fn r(&self) -> usize {
        self.diag.len()
    }

    fn class_rates(&self, a: usize) -> ClassRates {
        let tp = self.diag[a];
        let fp = self.row[a] - tp;
        let fn_ = self.col[a] - tp;
        ClassRates {
            tp,
            fp,
            fn_,
            tn: 1.0 - tp - fp - fn_,
        }
    }

    /// Metric value computed from the summary.
    pub fn value(&self, kind: MetricKind) -> Result<f64> {
        let r = self.r() as f64;
        let acc: f64 = self.diag.iter().sum();
        match kind {
            MetricKind::MaM => {
                let total: f64 = (0..self.r())
                    .filter_map(|a| class_mcc(&self.class_rates(a)))
                    .sum();
                Ok(total / r)
            }
            MetricKind::MiM => Ok((r * acc - 1.0) / (r - 1.0)),
            MetricKind::MiMStar => {
                let (numer, s_col, s_row) = self.micro_star_parts();
                if s_col <= MARGIN_EPS || s_row <= MARGIN_EPS {
                    return Err(MccError::degenerate(
                        "all prediction or truth mass lies in one class",
                    ));
                }
                Ok(numer / (s_col.sqrt() * s_row.sqrt()))
            }
        }
    }

    fn micro_star_parts(&self) -> (f64, f64, f64) {
        let acc: f64 = self.diag.iter().sum();
        let cross: f64 = self.row.iter().zip(self.col).map(|(a, b)| a * b).sum();
        let s_col = 1.0 - self.col.iter().map(|q| q * q).sum::<f64>();
        let s_row = 1.0 - self.row.iter().map(|q| q * q).sum::<f64>();
        (acc - cross, s_col, s_row)
    }

    pub fn partials(&self, kind: MetricKind) -> Result<CellPartials> {
        match kind {
            MetricKind::MaM => self.macro_partials(),
            MetricKind::MiM => Ok(self.micro_partials()),
            MetricKind::MiMStar => self.micro_star_partials(),
        }
    }

    /// Per class `a`, with `p = pi_{a+}`, `q = pi_{+a}`,
    /// `D = p q (1-p)(1-q)` and `N = pi_aa - p q`, the one-vs-rest term is
    /// `N / sqrt(D)`; its partials in `pi_aa`, `p` and `q` are scaled by
    /// `1/r`.
    fn macro_partials(&self) -> Result<CellPartials> {
        let r = self.r();
        let rf = r as f64;
        let mut out = CellPartials {
            row: vec![0.0; r],
            col: vec![0.0; r],
            diag: vec![0.0; r],
        };
        for a in 0..r {
            let (p, q) = (self.row[a], self.col[a]);
            if !(is_interior(p) && is_interior(q)) {
                return Err(MccError::degenerate(format!(
                    "class {} has prediction marginal {p} and truth marginal {q}",
                    a + 1
                )));
            }
            let d = p * q * (1.0 - p) * (1.0 - q);
            let sqrt_d = d.sqrt();
            let d32 = 2.0 * d * sqrt_d;
            let numer = self.diag[a] - p * q;
            // dD/dp and dD/dq
            let dd_p = q * (1.0 - p) * (1.0 - q) - p * q * (1.0 - q);
            let dd_q = p * (1.0 - p) * (1.0 - q) - p * q * (1.0 - p);
            out.row[a] = (-q / sqrt_d - numer * dd_p / d32) / rf;
            out.col[a] = (-p / sqrt_d - numer * dd_q / d32) / rf;
            out.diag[a] = 1.0 / (sqrt_d * rf);
        }
        Ok(out)
    }

    fn micro_partials(&self) -> CellPartials {
        let r = self.r();
        let slope = r as f64 / (r as f64 - 1.0);
        CellPartials {
            row: vec![0.0; r],
            col: vec![0.0; r],
            diag: vec![slope; r],
        }
    }

    fn micro_star_partials(&self) -> Result<CellPartials> {
        let (numer, s_col, s_row) = self.micro_star_parts();
        if s_col <= MARGIN_EPS || s_row <= MARGIN_EPS {
            return Err(MccError::degenerate(
                "all prediction or truth mass lies in one class",
            ));
        }
        let den = s_col.sqrt() * s_row.sqrt();
        // N * d/dp_i of 1/den and N * d/dq_k of 1/den
        let row_scale = numer / (s_col.sqrt() * s_row.powf(1.5));
        let col_scale = numer / (s_row.sqrt() * s_col.powf(1.5));
        let r = self.r();
        Ok(CellPartials {
            row: (0..r)
                .map(|i| -self.col[i] / den + row_scale * self.row[i])
                .collect(),
            col: (0..r)
                .map(|k| -self.row[k] / den + col_scale * self.col[k])
                .collect(),
            diag: vec![1.0 / den; r],
        })
    }
}

/// `Var_pi(g) = sum pi g^2 - (sum pi g)^2`, clamped at zero. The flag is set
/// when clamping was needed.
pub(crate) fn quadratic_form(values: &[f64], probs: &[f64]) -> (f64, bool) {
    let (mut second, mut first) = (0.0, 0.0);
    for (&g, &p) in values.iter().zip(probs) {
        first += p * g;
        second += p * g * g;
    }
    let v = second - first * first;
    if v < 0.0 {
        (0.0, true)
    } else {
        (v, false)
    }
}

/// Covariance `sum pi a b - (sum pi a)(sum pi b)`.
pub(crate) fn cross_form(a: &[f64], b: &[f64], probs: &[f64]) -> f64 {
    let (mut ab, mut ma, mut mb) = (0.0, 0.0, 0.0);
    for ((&x, &y), &p) in a.iter().zip(b).zip(probs) {
        ab += p * x * y;
        ma += p * x;
        mb += p * y;
    }
    ab - ma * mb
}
