//! Point estimators: binary MCC and the three multiclass variants.

use serde::Serialize;

use crate::error::{MccError, Result};
use crate::table::{classwise_rates, is_interior, ClassRates, MetricKind, ProbTable2, MARGIN_EPS};

/// MCC of a 2x2 table, `(pi11 pi22 - pi12 pi21) / sqrt(pi+1 pi1+ pi+2 pi2+)`.
pub fn binary_mcc(p: &ProbTable2) -> Result<f64> {
    if p.r() != 2 {
        return Err(MccError::ShapeMismatch {
            expected: 2,
            found: p.r(),
        });
    }
    let (row, col) = (p.row_marginals(), p.col_marginals());
    if !(is_interior(row[0]) && is_interior(col[0])) {
        return Err(MccError::degenerate("binary table has a zero marginal"));
    }
    let denom = row[0] * row[1] * col[0] * col[1];
    Ok((p.get(0, 0) * p.get(1, 1) - p.get(0, 1) * p.get(1, 0)) / denom.sqrt())
}

/// One-vs-rest MCC from a class's rates, `None` when a marginal vanishes.
pub fn class_mcc(c: &ClassRates) -> Option<f64> {
    if !(is_interior(c.tp + c.fp) && is_interior(c.tp + c.fn_)) {
        return None;
    }
    let denom = (c.tp + c.fp) * (c.tp + c.fn_) * (c.tn + c.fp) * (c.tn + c.fn_);
    Some((c.tp * c.tn - c.fp * c.fn_) / denom.sqrt())
}

/// Macro-averaged MCC together with the classes whose one-vs-rest term was
/// undefined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroMcc {
    pub value: f64,
    /// Zero-based indices of classes never predicted, never true, or
    /// always predicted/true. Each contributes 0 to the average.
    pub degenerate_classes: Vec<usize>,
}

/// Mean of the per-class MCCs; degenerate classes contribute 0.
pub fn macro_mcc_detailed(p: &ProbTable2) -> MacroMcc {
    let rates = classwise_rates(p);
    let mut degenerate_classes = Vec::new();
    let mut total = 0.0;
    for (a, c) in rates.classes.iter().enumerate() {
        match class_mcc(c) {
            Some(v) => total += v,
            None => degenerate_classes.push(a),
        }
    }
    MacroMcc {
        value: total / p.r() as f64,
        degenerate_classes,
    }
}

pub fn macro_mcc(p: &ProbTable2) -> f64 {
    macro_mcc_detailed(p).value
}

/// `(r * sum_i pi_ii - 1) / (r - 1)`.
pub fn micro_mcc(p: &ProbTable2) -> f64 {
    let r = p.r() as f64;
    (r * p.accuracy() - 1.0) / (r - 1.0)
}

/// Micro-averaged MCC evaluated from pooled TP/FP/FN/TN totals. Equal to
/// [`micro_mcc`]; kept as a cross-check of the simplified form.
pub fn micro_mcc_pooled(p: &ProbTable2) -> f64 {
    let rates = classwise_rates(p);
    let (mut tp, mut fp, mut fn_, mut tn) = (0.0, 0.0, 0.0, 0.0);
    for c in &rates.classes {
        tp += c.tp;
        fp += c.fp;
        fn_ += c.fn_;
        tn += c.tn;
    }
    (tp * tn - fp * fn_) / ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt()
}

/// Denominator factors `1 - sum pi_{+i}^2` (truth) and `1 - sum pi_{i+}^2`
/// (prediction) of the covariance-form micro-average.
pub(crate) fn micro_star_parts(p: &ProbTable2) -> (f64, f64, f64) {
    let (row, col) = (p.row_marginals(), p.col_marginals());
    let cross: f64 = row.iter().zip(col).map(|(a, b)| a * b).sum();
    let numer = p.accuracy() - cross;
    let s_col = 1.0 - col.iter().map(|q| q * q).sum::<f64>();
    let s_row = 1.0 - row.iter().map(|q| q * q).sum::<f64>();
    (numer, s_col, s_row)
}

/// `(sum pi_ii - sum pi_{i+} pi_{+i}) / (sqrt(1 - sum pi_{+i}^2) sqrt(1 - sum pi_{i+}^2))`.
pub fn micro_star_mcc(p: &ProbTable2) -> Result<f64> {
    let (numer, s_col, s_row) = micro_star_parts(p);
    if s_col <= MARGIN_EPS || s_row <= MARGIN_EPS {
        return Err(MccError::degenerate(
            "all prediction or truth mass lies in one class",
        ));
    }
    Ok(numer / (s_col.sqrt() * s_row.sqrt()))
}

pub fn estimate(p: &ProbTable2, kind: MetricKind) -> Result<f64> {
    match kind {
        MetricKind::MaM => Ok(macro_mcc(p)),
        MetricKind::MiM => Ok(micro_mcc(p)),
        MetricKind::MiMStar => micro_star_mcc(p),
    }
}
