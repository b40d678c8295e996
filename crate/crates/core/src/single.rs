//! Delta-method inference for one confusion table: analytic gradients, the
//! multinomial sandwich variance, and Wald / Fisher-z intervals.

use serde::{Deserialize, Serialize};

use crate::error::{MccError, Result};
use crate::gradient::{quadratic_form, TableSummary};
use crate::metrics::{macro_mcc_detailed, micro_mcc, micro_star_mcc};
use crate::normal::z_two_sided;
use crate::table::{normalize_counts, ConfusionCounts2, MetricKind, ProbTable2};

/// Largest `|estimate|` fed to the Fisher transform.
pub const FISHER_CLAMP: f64 = 1.0 - 1e-10;

/// Gradient of a metric with respect to the `r^2` cell probabilities, in the
/// same row-major order as [`ProbTable2`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gradient2 {
    r: usize,
    values: Vec<f64>,
}

impl Gradient2 {
    pub fn new(r: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != r * r {
            return Err(MccError::ShapeMismatch {
                expected: r * r,
                found: values.len(),
            });
        }
        Ok(Self { r, values })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, pred: usize, truth: usize) -> f64 {
        self.values[pred * self.r + truth]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            r: self.r,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Interval construction method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CiMethod {
    Wald,
    FisherZ,
    WaldDiff,
    GTransform,
}

impl CiMethod {
    pub fn label(self) -> &'static str {
        match self {
            CiMethod::Wald => "wald",
            CiMethod::FisherZ => "fisher-z",
            CiMethod::WaldDiff => "wald-diff",
            CiMethod::GTransform => "g-transform",
        }
    }

    /// True for the methods that apply to a difference of two metrics.
    pub fn is_paired(self) -> bool {
        matches!(self, CiMethod::WaldDiff | CiMethod::GTransform)
    }
}

impl std::fmt::Display for CiMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Notes on numerically awkward inputs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    /// The estimate sat on the boundary of the transform's domain and was
    /// pulled inside before transforming.
    pub degenerate_estimate: bool,
    /// The quadratic form dipped below zero by rounding and was set to 0.
    pub variance_clamped: bool,
    /// Classes whose one-vs-rest MCC was undefined (zero-based).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate_classes: Vec<usize>,
}

impl Flags {
    pub fn any(&self) -> bool {
        self.degenerate_estimate || self.variance_clamped || !self.degenerate_classes.is_empty()
    }
}

/// A point estimate with its asymptotic confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub estimate: f64,
    /// Asymptotic variance of `sqrt(n) * (estimate - truth)`, untransformed.
    pub variance: f64,
    /// Variance on the transformed scale, for the Fisher-z and g intervals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transformed_variance: Option<f64>,
    pub n: u64,
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
    pub method: CiMethod,
    pub flags: Flags,
}

impl IntervalEstimate {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

fn summary(p: &ProbTable2) -> (Vec<f64>, &[f64], &[f64]) {
    (p.diagonal(), p.row_marginals(), p.col_marginals())
}

fn gradient(p: &ProbTable2, kind: MetricKind) -> Result<Gradient2> {
    let (diag, row, col) = summary(p);
    let partials = TableSummary {
        diag: &diag,
        row,
        col,
    }
    .partials(kind)?;
    let r = p.r();
    let mut values = Vec::with_capacity(r * r);
    for i in 0..r {
        for j in 0..r {
            values.push(partials.at(i, j));
        }
    }
    Ok(Gradient2 { r, values })
}

/// Gradient of the macro-averaged MCC. Every marginal must lie in (0, 1).
pub fn grad_macro(p: &ProbTable2) -> Result<Gradient2> {
    gradient(p, MetricKind::MaM)
}

/// Gradient of the micro-averaged MCC: `r/(r-1)` on the diagonal, 0 elsewhere.
pub fn grad_micro(p: &ProbTable2) -> Gradient2 {
    let r = p.r();
    let slope = r as f64 / (r as f64 - 1.0);
    let mut values = vec![0.0; r * r];
    for i in 0..r {
        values[i * r + i] = slope;
    }
    Gradient2 { r, values }
}

/// Gradient of the covariance-form micro-average.
pub fn grad_micro_star(p: &ProbTable2) -> Result<Gradient2> {
    gradient(p, MetricKind::MiMStar)
}

pub fn grad(p: &ProbTable2, kind: MetricKind) -> Result<Gradient2> {
    match kind {
        MetricKind::MaM => grad_macro(p),
        MetricKind::MiM => Ok(grad_micro(p)),
        MetricKind::MiMStar => grad_micro_star(p),
    }
}

fn check_shared(grad: &Gradient2, p: &ProbTable2) -> Result<()> {
    if grad.r != p.r() {
        return Err(MccError::ShapeMismatch {
            expected: p.r() * p.r(),
            found: grad.values.len(),
        });
    }
    Ok(())
}

/// `grad' (diag(pi) - pi pi') grad`, evaluated as
/// `sum pi_ij A_ij^2 - (sum pi_ij A_ij)^2` and clamped at zero.
pub fn asymptotic_variance(grad: &Gradient2, p: &ProbTable2) -> Result<f64> {
    check_shared(grad, p)?;
    Ok(quadratic_form(&grad.values, p.probs()).0)
}

/// Gradient of `atanh(phi)`: `grad / (1 - phi^2)`.
pub fn chain_fisher(grad: &Gradient2, value: f64) -> Gradient2 {
    grad.scaled(1.0 / (1.0 - value * value))
}

fn check_inputs(variance: f64, n: u64) -> Result<()> {
    if n == 0 {
        return Err(MccError::InvalidSampleSize);
    }
    if !variance.is_finite() || variance < 0.0 {
        return Err(MccError::InvalidConfig {
            reason: format!("variance must be finite and non-negative, got {variance}"),
        });
    }
    Ok(())
}

/// `estimate +- z sqrt(variance / n)`. Bounds are not clipped to the
/// parameter space.
pub fn wald_ci(estimate: f64, variance: f64, n: u64, alpha: f64) -> Result<IntervalEstimate> {
    let z = z_two_sided(alpha)?;
    check_inputs(variance, n)?;
    let half = z * (variance / n as f64).sqrt();
    Ok(IntervalEstimate {
        estimate,
        variance,
        transformed_variance: None,
        n,
        alpha,
        lower: estimate - half,
        upper: estimate + half,
        method: CiMethod::Wald,
        flags: Flags::default(),
    })
}

/// Keeps interval bounds ordered around the estimate and strictly inside
/// `(-limit, limit)` after the back-transform has rounded.
pub(crate) fn tidy_bounds(estimate: f64, lower: f64, upper: f64, limit: f64) -> (f64, f64) {
    let lo = lower.min(estimate).max((-limit).next_up());
    let hi = upper.max(estimate).min(limit.next_down());
    (lo, hi)
}

/// Pulls `|estimate|` below `limit * (1 - 1e-10)`; returns whether it moved.
pub(crate) fn clamp_estimate(estimate: f64, limit: f64) -> (f64, bool) {
    let bound = limit * FISHER_CLAMP;
    if estimate.abs() > bound {
        (bound.copysign(estimate), true)
    } else {
        (estimate, false)
    }
}

/// Fisher-z interval given the untransformed variance of the estimate.
pub fn fisher_z_interval(
    estimate: f64,
    variance: f64,
    n: u64,
    alpha: f64,
) -> Result<IntervalEstimate> {
    let z = z_two_sided(alpha)?;
    check_inputs(variance, n)?;
    let (e, clamped) = clamp_estimate(estimate, 1.0);
    let vf = variance / (1.0 - e * e).powi(2);
    Ok(fisher_from_transformed(e, variance, vf, clamped, z, n, alpha))
}

fn fisher_from_transformed(
    e: f64,
    variance: f64,
    vf: f64,
    clamped: bool,
    z: f64,
    n: u64,
    alpha: f64,
) -> IntervalEstimate {
    let centre = e.atanh();
    let half = z * (vf / n as f64).sqrt();
    let (lower, upper) = tidy_bounds(e, (centre - half).tanh(), (centre + half).tanh(), 1.0);
    IntervalEstimate {
        estimate: e,
        variance,
        transformed_variance: Some(vf),
        n,
        alpha,
        lower,
        upper,
        method: CiMethod::FisherZ,
        flags: Flags {
            degenerate_estimate: clamped,
            ..Flags::default()
        },
    }
}

/// `tanh(atanh(est) +- z sqrt(v_f / n))`, with `v_f` the sandwich variance of
/// the chain-ruled gradient.
pub fn fisher_z_ci(
    estimate: f64,
    grad: &Gradient2,
    p: &ProbTable2,
    n: u64,
    alpha: f64,
) -> Result<IntervalEstimate> {
    let z = z_two_sided(alpha)?;
    check_shared(grad, p)?;
    if n == 0 {
        return Err(MccError::InvalidSampleSize);
    }
    let (e, clamped) = clamp_estimate(estimate, 1.0);
    let (variance, c1) = quadratic_form(&grad.values, p.probs());
    let (vf, c2) = quadratic_form(&chain_fisher(grad, e).values, p.probs());
    let mut out = fisher_from_transformed(e, variance, vf, clamped, z, n, alpha);
    out.flags.variance_clamped = c1 || c2;
    Ok(out)
}

/// Counts to interval: normalize, estimate, differentiate, and build the
/// requested interval.
pub fn single_inference(
    counts: &ConfusionCounts2,
    kind: MetricKind,
    method: CiMethod,
    alpha: f64,
) -> Result<IntervalEstimate> {
    let p = normalize_counts(counts)?;
    single_inference_prob(&p, counts.total(), kind, method, alpha)
}

/// As [`single_inference`] for an already normalized table of `n` subjects.
pub fn single_inference_prob(
    p: &ProbTable2,
    n: u64,
    kind: MetricKind,
    method: CiMethod,
    alpha: f64,
) -> Result<IntervalEstimate> {
    let mut degenerate_classes = Vec::new();
    let value = match kind {
        MetricKind::MaM => {
            let m = macro_mcc_detailed(p);
            degenerate_classes = m.degenerate_classes;
            m.value
        }
        MetricKind::MiM => micro_mcc(p),
        MetricKind::MiMStar => micro_star_mcc(p)?,
    };
    let g = grad(p, kind)?;
    let mut out = match method {
        CiMethod::Wald => {
            let (variance, clamped) = quadratic_form(&g.values, p.probs());
            let mut ci = wald_ci(value, variance, n, alpha)?;
            ci.flags.variance_clamped = clamped;
            ci
        }
        CiMethod::FisherZ => fisher_z_ci(value, &g, p, n, alpha)?,
        other => {
            return Err(MccError::InvalidConfig {
                reason: format!("{other} applies to paired differences"),
            })
        }
    };
    out.flags.degenerate_classes = degenerate_classes;
    Ok(out)
}
