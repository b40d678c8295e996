//! Paired designs: two classifiers scored on the same subjects.
//!
//! The joint table has cells `pi_ijk = P(X1 = i, X2 = j, Y = k)`. Each
//! method's metric depends on the cells only through its own two-way
//! marginal table, so its gradient over the `r^3` cells is the two-way
//! gradient evaluated at that marginal and broadcast across the other
//! method's index. The difference of the two metrics has variance
//! `(X + Y - 2Z) / n` with `X`, `Y`, `Z` the entries of the 2x2 sandwich
//! covariance.

use serde::{Deserialize, Serialize};

use crate::error::{MccError, Result};
use crate::gradient::{cross_form, quadratic_form, TableSummary};
use crate::normal::z_two_sided;
use crate::single::{clamp_estimate, tidy_bounds, CiMethod, Flags, IntervalEstimate};
use crate::table::{check_class_count, validate_probabilities, MetricKind, ProbTable2};

/// Largest class count accepted for three-way tables.
pub const MAX_CLASSES_3: usize = 200;

/// One of the two classifiers of a paired design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    First,
    Second,
}

/// Flat position of cell `(i, j, k)`: truth outermost, then method 1, then
/// method 2.
#[inline]
fn index(r: usize, i: usize, j: usize, k: usize) -> usize {
    (k * r + i) * r + j
}

/// Observed counts `n_ijk` (method-1 prediction, method-2 prediction, truth).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointCounts3 {
    r: usize,
    cells: Vec<u64>,
}

impl JointCounts3 {
    /// All-zero table.
    pub fn zeros(r: usize) -> Result<Self> {
        check_class_count(r, MAX_CLASSES_3)?;
        Ok(Self {
            r,
            cells: vec![0; r * r * r],
        })
    }

    /// Builds a table from cells laid out as [`JointCounts3::index`] describes.
    pub fn new(r: usize, cells: Vec<u64>) -> Result<Self> {
        check_class_count(r, MAX_CLASSES_3)?;
        if cells.len() != r * r * r {
            return Err(MccError::ShapeMismatch {
                expected: r * r * r,
                found: cells.len(),
            });
        }
        Ok(Self { r, cells })
    }

    /// Builds a table from one `r x r` block per true class, rows indexed by
    /// method 1 and columns by method 2.
    pub fn from_truth_blocks(blocks: &[Vec<Vec<u64>>]) -> Result<Self> {
        let r = blocks.len();
        let mut out = Self::zeros(r)?;
        for (k, block) in blocks.iter().enumerate() {
            if block.len() != r || block.iter().any(|row| row.len() != r) {
                return Err(MccError::ShapeMismatch {
                    expected: r * r,
                    found: block.iter().map(Vec::len).sum(),
                });
            }
            for (i, row) in block.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    out.set(i, j, k, v);
                }
            }
        }
        Ok(out)
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        index(self.r, i, j, k)
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn cells(&self) -> &[u64] {
        &self.cells
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> u64 {
        self.cells[index(self.r, i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: u64) {
        let at = index(self.r, i, j, k);
        self.cells[at] = v;
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().sum()
    }
}

/// `pi_ijk = n_ijk / n`.
pub fn normalize_joint(counts: &JointCounts3) -> Result<ProbTable3> {
    let n = counts.total();
    if n == 0 {
        return Err(MccError::ZeroTotal);
    }
    let n = n as f64;
    Ok(ProbTable3 {
        r: counts.r,
        pi: counts.cells.iter().map(|&c| c as f64 / n).collect(),
    })
}

/// Joint cell probabilities of a paired design.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbTable3 {
    r: usize,
    pi: Vec<f64>,
}

impl ProbTable3 {
    pub fn new(r: usize, pi: Vec<f64>) -> Result<Self> {
        check_class_count(r, MAX_CLASSES_3)?;
        if pi.len() != r * r * r {
            return Err(MccError::ShapeMismatch {
                expected: r * r * r,
                found: pi.len(),
            });
        }
        validate_probabilities(&pi)?;
        Ok(Self { r, pi })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn probs(&self) -> &[f64] {
        &self.pi
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.pi[index(self.r, i, j, k)]
    }

    /// Swaps the two methods: `pi'_ijk = pi_jik`.
    pub fn swapped(&self) -> Self {
        let r = self.r;
        let mut pi = vec![0.0; r * r * r];
        for k in 0..r {
            for i in 0..r {
                for j in 0..r {
                    pi[index(r, i, j, k)] = self.get(j, i, k);
                }
            }
        }
        Self { r, pi }
    }

    /// `pi_{i++}` (method 1) or `pi_{+j+}` (method 2).
    pub fn prediction_marginals(&self, method: Method) -> Vec<f64> {
        let mut out = vec![0.0; self.r];
        self.for_each(|i, j, _, v| match method {
            Method::First => out[i] += v,
            Method::Second => out[j] += v,
        });
        out
    }

    /// `pi_{++k}`.
    pub fn truth_marginals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.r];
        self.for_each(|_, _, k, v| out[k] += v);
        out
    }

    /// `pi_{a+a}` (method 1) or `pi_{+aa}` (method 2).
    pub fn agreement(&self, method: Method) -> Vec<f64> {
        let mut out = vec![0.0; self.r];
        self.for_each(|i, j, k, v| {
            let pred = match method {
                Method::First => i,
                Method::Second => j,
            };
            if pred == k {
                out[k] += v;
            }
        });
        out
    }

    /// `sum_i pi_iii`: both methods correct.
    pub fn both_correct(&self) -> f64 {
        (0..self.r).map(|a| self.get(a, a, a)).sum()
    }

    fn for_each(&self, mut f: impl FnMut(usize, usize, usize, f64)) {
        let r = self.r;
        for k in 0..r {
            for i in 0..r {
                for j in 0..r {
                    f(i, j, k, self.pi[index(r, i, j, k)]);
                }
            }
        }
    }
}

/// Two-way table of one method against the truth: cells `pi_{i+k}` for
/// method 1 or `pi_{+jk}` for method 2, prediction on rows.
pub fn marginalize(p3: &ProbTable3, method: Method) -> ProbTable2 {
    let r = p3.r;
    let mut pi = vec![0.0; r * r];
    p3.for_each(|i, j, k, v| {
        let pred = match method {
            Method::First => i,
            Method::Second => j,
        };
        pi[pred * r + k] += v;
    });
    ProbTable2::build(r, pi)
}

/// Metric value of one method, computed from the joint marginals.
pub fn method_metric(p3: &ProbTable3, method: Method, kind: MetricKind) -> Result<f64> {
    let (diag, row, col) = (
        p3.agreement(method),
        p3.prediction_marginals(method),
        p3.truth_marginals(),
    );
    TableSummary {
        diag: &diag,
        row: &row,
        col: &col,
    }
    .value(kind)
}

/// Gradient of one method's metric over the `r^3` cells, in the same order
/// as [`ProbTable3`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gradient3 {
    r: usize,
    values: Vec<f64>,
}

impl Gradient3 {
    pub fn new(r: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != r * r * r {
            return Err(MccError::ShapeMismatch {
                expected: r * r * r,
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

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[index(self.r, i, j, k)]
    }

    /// `self - other`: the gradient of a difference of metrics.
    pub fn minus(&self, other: &Gradient3) -> Result<Gradient3> {
        if self.r != other.r {
            return Err(MccError::ShapeMismatch {
                expected: self.values.len(),
                found: other.values.len(),
            });
        }
        Ok(Gradient3 {
            r: self.r,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            r: self.r,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

fn paired_gradient(p3: &ProbTable3, method: Method, kind: MetricKind) -> Result<Gradient3> {
    let diag = p3.agreement(method);
    let row = p3.prediction_marginals(method);
    let col = p3.truth_marginals();
    let partials = TableSummary {
        diag: &diag,
        row: &row,
        col: &col,
    }
    .partials(kind)?;
    let r = p3.r;
    let mut values = vec![0.0; r * r * r];
    for k in 0..r {
        for i in 0..r {
            for j in 0..r {
                let pred = match method {
                    Method::First => i,
                    Method::Second => j,
                };
                values[index(r, i, j, k)] = partials.at(pred, k);
            }
        }
    }
    Ok(Gradient3 { r, values })
}

/// Gradient of `maM_1` or `maM_2` with respect to `pi_ijk`.
pub fn grad_macro_paired(p3: &ProbTable3, method: Method) -> Result<Gradient3> {
    paired_gradient(p3, method, MetricKind::MaM)
}

/// `r/(r-1)` where the method's prediction equals the truth, else 0.
pub fn grad_micro_paired(p3: &ProbTable3, method: Method) -> Gradient3 {
    let r = p3.r;
    let slope = r as f64 / (r as f64 - 1.0);
    let mut values = vec![0.0; r * r * r];
    for k in 0..r {
        for i in 0..r {
            for j in 0..r {
                let pred = match method {
                    Method::First => i,
                    Method::Second => j,
                };
                if pred == k {
                    values[index(r, i, j, k)] = slope;
                }
            }
        }
    }
    Gradient3 { r, values }
}

pub fn grad_micro_star_paired(p3: &ProbTable3, method: Method) -> Result<Gradient3> {
    paired_gradient(p3, method, MetricKind::MiMStar)
}

pub fn grad_paired(p3: &ProbTable3, method: Method, kind: MetricKind) -> Result<Gradient3> {
    match kind {
        MetricKind::MaM => grad_macro_paired(p3, method),
        MetricKind::MiM => Ok(grad_micro_paired(p3, method)),
        MetricKind::MiMStar => grad_micro_star_paired(p3, method),
    }
}

/// Asymptotic covariance of the `sqrt(n)`-scaled pair of metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedCovBlock {
    /// Variance of method 1's metric.
    pub x: f64,
    /// Variance of method 2's metric.
    pub y: f64,
    /// Covariance between the two.
    pub z: f64,
    /// Set when `x` or `y` needed clamping at zero.
    pub clamped: bool,
}

pub fn paired_cov_block(ga: &Gradient3, gb: &Gradient3, p3: &ProbTable3) -> Result<PairedCovBlock> {
    if ga.r != p3.r || gb.r != p3.r {
        return Err(MccError::ShapeMismatch {
            expected: p3.pi.len(),
            found: if ga.r != p3.r {
                ga.values.len()
            } else {
                gb.values.len()
            },
        });
    }
    let (x, cx) = quadratic_form(&ga.values, &p3.pi);
    let (y, cy) = quadratic_form(&gb.values, &p3.pi);
    let z = cross_form(&ga.values, &gb.values, &p3.pi);
    Ok(PairedCovBlock {
        x,
        y,
        z,
        clamped: cx || cy,
    })
}

/// `X + Y - 2Z` for paired samples, `X + Y` for independent samples (the
/// covariance term set to zero). Excludes the `1/n` factor.
pub fn diff_variance(block: &PairedCovBlock, independent: bool) -> f64 {
    let z = if independent { 0.0 } else { block.z };
    (block.x + block.y - 2.0 * z).max(0.0)
}

/// Wald interval for a difference of metrics.
pub fn diff_wald_ci(diff: f64, variance: f64, n: u64, alpha: f64) -> Result<IntervalEstimate> {
    let mut ci = crate::single::wald_ci(diff, variance, n, alpha)?;
    ci.method = CiMethod::WaldDiff;
    Ok(ci)
}

/// `g(x) = atanh(x / 2)`, defined on (-2, 2).
pub fn g_transform(x: f64) -> f64 {
    0.5 * ((2.0 + x) / (2.0 - x)).ln()
}

/// `g^{-1}(y) = 2 tanh(y)`.
pub fn g_inverse(y: f64) -> f64 {
    2.0 * y.tanh()
}

/// Gradient of `g(psi)`: `2 / (4 - psi^2)` times the gradient of `psi`.
pub fn chain_g(grad: &Gradient3, value: f64) -> Gradient3 {
    grad.scaled(2.0 / (4.0 - value * value))
}

/// g-transform interval from the untransformed variance of the difference.
pub fn diff_g_interval(diff: f64, variance: f64, n: u64, alpha: f64) -> Result<IntervalEstimate> {
    let z = z_two_sided(alpha)?;
    if n == 0 {
        return Err(MccError::InvalidSampleSize);
    }
    if !variance.is_finite() || variance < 0.0 {
        return Err(MccError::InvalidConfig {
            reason: format!("variance must be finite and non-negative, got {variance}"),
        });
    }
    let (d, clamped) = clamp_estimate(diff, 2.0);
    let slope = 2.0 / (4.0 - d * d);
    Ok(g_from_transformed(
        d,
        variance,
        variance * slope * slope,
        clamped,
        z,
        n,
        alpha,
    ))
}

fn g_from_transformed(
    d: f64,
    variance: f64,
    vg: f64,
    clamped: bool,
    z: f64,
    n: u64,
    alpha: f64,
) -> IntervalEstimate {
    let centre = g_transform(d);
    let half = z * (vg / n as f64).sqrt();
    let (lower, upper) = tidy_bounds(d, g_inverse(centre - half), g_inverse(centre + half), 2.0);
    IntervalEstimate {
        estimate: d,
        variance,
        transformed_variance: Some(vg),
        n,
        alpha,
        lower,
        upper,
        method: CiMethod::GTransform,
        flags: Flags {
            degenerate_estimate: clamped,
            ..Flags::default()
        },
    }
}

/// `g^{-1}(g(diff) +- z sqrt(v_g / n))` with `v_g` the sandwich variance of
/// the chain-ruled difference gradient.
pub fn diff_g_ci(
    diff: f64,
    grad: &Gradient3,
    p3: &ProbTable3,
    n: u64,
    alpha: f64,
) -> Result<IntervalEstimate> {
    let z = z_two_sided(alpha)?;
    if n == 0 {
        return Err(MccError::InvalidSampleSize);
    }
    if grad.r != p3.r {
        return Err(MccError::ShapeMismatch {
            expected: p3.pi.len(),
            found: grad.values.len(),
        });
    }
    let (d, clamped) = clamp_estimate(diff, 2.0);
    let (variance, c1) = quadratic_form(&grad.values, &p3.pi);
    let (vg, c2) = quadratic_form(&chain_g(grad, d).values, &p3.pi);
    let mut out = g_from_transformed(d, variance, vg, clamped, z, n, alpha);
    out.flags.variance_clamped = c1 || c2;
    Ok(out)
}

/// Result of a paired comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedEstimate {
    pub kind: MetricKind,
    pub method1: f64,
    pub method2: f64,
    pub diff: f64,
    pub block: PairedCovBlock,
    pub independent: bool,
    pub interval: IntervalEstimate,
}

pub fn paired_inference(
    counts: &JointCounts3,
    kind: MetricKind,
    method: CiMethod,
    alpha: f64,
    independent: bool,
) -> Result<PairedEstimate> {
    let p3 = normalize_joint(counts)?;
    paired_inference_prob(&p3, counts.total(), kind, method, alpha, independent)
}

/// As [`paired_inference`] for an already normalized table of `n` subjects.
pub fn paired_inference_prob(
    p3: &ProbTable3,
    n: u64,
    kind: MetricKind,
    method: CiMethod,
    alpha: f64,
    independent: bool,
) -> Result<PairedEstimate> {
    let m1 = method_metric(p3, Method::First, kind)?;
    let m2 = method_metric(p3, Method::Second, kind)?;
    let ga = grad_paired(p3, Method::First, kind)?;
    let gb = grad_paired(p3, Method::Second, kind)?;
    let block = paired_cov_block(&ga, &gb, p3)?;
    let variance = diff_variance(&block, independent);
    let diff = m1 - m2;
    let mut interval = match method {
        CiMethod::WaldDiff => diff_wald_ci(diff, variance, n, alpha)?,
        CiMethod::GTransform => diff_g_interval(diff, variance, n, alpha)?,
        other => {
            return Err(MccError::InvalidConfig {
                reason: format!("{other} applies to single tables"),
            })
        }
    };
    interval.flags.variance_clamped |= block.clamped;
    Ok(PairedEstimate {
        kind,
        method1: m1,
        method2: m2,
        diff,
        block,
        independent,
        interval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::estimate;
    use crate::single::grad;

    fn scenario(blocks: [[[u64; 3]; 3]; 3]) -> JointCounts3 {
        let b: Vec<Vec<Vec<u64>>> = blocks
            .iter()
            .map(|blk| blk.iter().map(|row| row.to_vec()).collect())
            .collect();
        JointCounts3::from_truth_blocks(&b).unwrap()
    }

    fn paired_s4() -> JointCounts3 {
        scenario([
            [[190, 80, 90], [5, 5, 5], [0, 5, 5]],
            [[5, 5, 0], [5, 10, 5], [5, 5, 5]],
            [[5, 5, 5], [5, 5, 15], [5, 5, 20]],
        ])
    }

    #[test]
    fn single_atom_marginals() {
        let mut c = JointCounts3::zeros(2).unwrap();
        c.set(0, 1, 0, 7);
        let p3 = normalize_joint(&c).unwrap();
        assert_eq!(marginalize(&p3, Method::First).probs(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(marginalize(&p3, Method::Second).probs(), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn method_metric_matches_marginal_table() {
        let p3 = normalize_joint(&paired_s4()).unwrap();
        for m in [Method::First, Method::Second] {
            let p2 = marginalize(&p3, m);
            for kind in MetricKind::ALL {
                let a = method_metric(&p3, m, kind).unwrap();
                let b = estimate(&p2, kind).unwrap();
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gradient_lifts_through_marginalization() {
        let p3 = normalize_joint(&paired_s4()).unwrap();
        for kind in MetricKind::ALL {
            for m in [Method::First, Method::Second] {
                let g3 = grad_paired(&p3, m, kind).unwrap();
                let g2 = grad(&marginalize(&p3, m), kind).unwrap();
                for i in 0..3 {
                    for j in 0..3 {
                        for k in 0..3 {
                            let pred = if m == Method::First { i } else { j };
                            assert!((g3.get(i, j, k) - g2.get(pred, k)).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn swapping_methods_swaps_gradients() {
        let p3 = normalize_joint(&paired_s4()).unwrap();
        let s = p3.swapped();
        let a = grad_macro_paired(&p3, Method::First).unwrap();
        let b = grad_macro_paired(&s, Method::Second).unwrap();
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    assert!((a.get(i, j, k) - b.get(j, i, k)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn micro_gradient_inner_product() {
        let p3 = normalize_joint(&paired_s4()).unwrap();
        let g = grad_micro_paired(&p3, Method::First);
        assert_eq!(g.get(1, 0, 1), 1.5);
        assert_eq!(g.get(1, 1, 0), 0.0);
        let inner: f64 = g.values().iter().zip(p3.probs()).map(|(a, b)| a * b).sum();
        let m1 = method_metric(&p3, Method::First, MetricKind::MiM).unwrap();
        assert!((inner - (m1 + 0.5)).abs() < 1e-14);
    }

    #[test]
    fn identical_gradients_give_zero_difference_variance() {
        let p3 = normalize_joint(&paired_s4()).unwrap();
        let g = grad_macro_paired(&p3, Method::First).unwrap();
        let b = paired_cov_block(&g, &g, &p3).unwrap();
        assert_eq!(b.x, b.y);
        assert!((b.x - b.z).abs() < 1e-15);
        assert!(diff_variance(&b, false).abs() < 1e-15);
    }

    #[test]
    fn diff_variance_arithmetic() {
        let b = PairedCovBlock {
            x: 0.4,
            y: 0.3,
            z: 0.1,
            clamped: false,
        };
        assert!((diff_variance(&b, false) - 0.5).abs() < 1e-15);
        assert!((diff_variance(&b, true) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn diff_wald_examples() {
        let ci = diff_wald_ci(0.15, 1.0, 400, 0.05).unwrap();
        let h = 1.959963984540054 * 0.05;
        assert!((ci.lower - (0.15 - h)).abs() < 1e-12);
        assert!((ci.upper - (0.15 + h)).abs() < 1e-12);
        assert_eq!(ci.method, CiMethod::WaldDiff);
        let ci = diff_wald_ci(0.2, 0.0, 50, 0.05).unwrap();
        assert_eq!((ci.lower, ci.upper), (0.2, 0.2));
    }

    #[test]
    fn g_transform_round_trip() {
        assert!((g_transform(1.0) - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert!((g_transform(1.0) - 0.549_306_144_334_054_9).abs() < 1e-15);
        assert!((g_inverse(g_transform(1.0)) - 1.0).abs() < 1e-12);
        let ci = diff_g_interval(0.0, 0.36, 100, 0.05).unwrap();
        let h: f64 = 1.959963984540054 * (0.36 / 4.0 / 100.0f64).sqrt();
        assert!((ci.upper - 2.0 * h.tanh()).abs() < 1e-15);
        assert!((ci.lower + 2.0 * h.tanh()).abs() < 1e-15);
    }

    #[test]
    fn g_interval_routes_agree() {
        let c = paired_s4();
        let p3 = normalize_joint(&c).unwrap();
        let ga = grad_macro_paired(&p3, Method::First).unwrap();
        let gb = grad_macro_paired(&p3, Method::Second).unwrap();
        let diff = method_metric(&p3, Method::First, MetricKind::MaM).unwrap()
            - method_metric(&p3, Method::Second, MetricKind::MaM).unwrap();
        let a = diff_g_ci(diff, &ga.minus(&gb).unwrap(), &p3, c.total(), 0.05).unwrap();
        let b = paired_inference(&c, MetricKind::MaM, CiMethod::GTransform, 0.05, false)
            .unwrap()
            .interval;
        assert!((a.lower - b.lower).abs() < 1e-12);
        assert!((a.upper - b.upper).abs() < 1e-12);
        assert!(a.lower > -2.0 && a.upper < 2.0);
    }

    #[test]
    fn independent_flag_drops_covariance() {
        let c = paired_s4();
        let p = paired_inference(&c, MetricKind::MiM, CiMethod::WaldDiff, 0.05, true).unwrap();
        assert!((p.interval.variance - (p.block.x + p.block.y)).abs() < 1e-15);
        assert!(p.independent);
    }

    #[test]
    fn three_way_class_cap() {
        assert!(matches!(
            JointCounts3::zeros(201),
            Err(MccError::TooManyClasses { max: 200, .. })
        ));
    }
}
