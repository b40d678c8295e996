//! Multinomial sampling and the Monte Carlo coverage harness.
//!
//! Each replicate draws a table of `n` subjects from a scenario's true cell
//! probabilities, runs the full inference pipeline on it and records whether
//! the interval covers the true value. Replicate `b` draws from its own
//! ChaCha8 stream `b` under the run seed, so results do not depend on how
//! replicates are spread over workers.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MccError, Result};
use crate::metrics::estimate;
use crate::paired::{
    method_metric, normalize_joint, paired_inference_prob, JointCounts3, Method, ProbTable3,
};
use crate::single::{single_inference_prob, CiMethod, IntervalEstimate};
use crate::table::{
    normalize_counts, validate_probabilities, ConfusionCounts2, MetricKind, ProbTable2,
};

/// Draws one `Multinomial(n, probs)` vector by conditioning cell by cell on
/// the subjects not yet placed.
pub fn sample_multinomial<R: Rng + ?Sized>(probs: &[f64], n: u64, rng: &mut R) -> Result<Vec<u64>> {
    if probs.is_empty() {
        return Err(MccError::InvalidProbabilities {
            reason: "no cells".into(),
        });
    }
    validate_probabilities(probs)?;
    if n == 0 {
        return Err(MccError::InvalidSampleSize);
    }
    let mut out = vec![0u64; probs.len()];
    let mut left = n;
    let mut mass = 1.0;
    let last = probs.len() - 1;
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i == last {
            out[i] = left;
            break;
        }
        let share = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 1.0 };
        let draw = if share >= 1.0 {
            left
        } else if share <= 0.0 {
            0
        } else {
            Binomial::new(left, share)
                .map_err(|e| MccError::InvalidProbabilities {
                    reason: e.to_string(),
                })?
                .sample(rng)
        };
        out[i] = draw;
        left -= draw;
        mass -= p;
    }
    Ok(out)
}

/// Values of the three metrics on one table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricTriple {
    pub mam: f64,
    pub mim: f64,
    pub mim_star: f64,
}

impl MetricTriple {
    pub fn get(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::MaM => self.mam,
            MetricKind::MiM => self.mim,
            MetricKind::MiMStar => self.mim_star,
        }
    }

    fn from_fn(mut f: impl FnMut(MetricKind) -> Result<f64>) -> Result<Self> {
        Ok(Self {
            mam: f(MetricKind::MaM)?,
            mim: f(MetricKind::MiM)?,
            mim_star: f(MetricKind::MiMStar)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Single,
    Paired,
}

/// True cell probabilities of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Truth {
    Single(ProbTable2),
    Paired(ProbTable3),
}

/// True metric values: one triple for a single table, one per method for a
/// paired table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TrueMetrics {
    Single(MetricTriple),
    Paired {
        first: MetricTriple,
        second: MetricTriple,
    },
}

impl TrueMetrics {
    /// The quantity an interval should cover: the metric itself, or the
    /// first-minus-second difference.
    pub fn target(&self, kind: MetricKind) -> f64 {
        match self {
            TrueMetrics::Single(t) => t.get(kind),
            TrueMetrics::Paired { first, second } => first.get(kind) - second.get(kind),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub truth: Truth,
    pub true_metrics: TrueMetrics,
}

impl Scenario {
    pub fn single(name: impl Into<String>, truth: ProbTable2) -> Result<Self> {
        let t = MetricTriple::from_fn(|k| estimate(&truth, k))?;
        Ok(Self {
            name: name.into(),
            truth: Truth::Single(truth),
            true_metrics: TrueMetrics::Single(t),
        })
    }

    pub fn paired(name: impl Into<String>, truth: ProbTable3) -> Result<Self> {
        let first = MetricTriple::from_fn(|k| method_metric(&truth, Method::First, k))?;
        let second = MetricTriple::from_fn(|k| method_metric(&truth, Method::Second, k))?;
        Ok(Self {
            name: name.into(),
            truth: Truth::Paired(truth),
            true_metrics: TrueMetrics::Paired { first, second },
        })
    }

    pub fn kind(&self) -> ScenarioKind {
        match self.truth {
            Truth::Single(_) => ScenarioKind::Single,
            Truth::Paired(_) => ScenarioKind::Paired,
        }
    }

    pub fn r(&self) -> usize {
        match &self.truth {
            Truth::Single(p) => p.r(),
            Truth::Paired(p) => p.r(),
        }
    }

    fn probs(&self) -> &[f64] {
        match &self.truth {
            Truth::Single(p) => p.probs(),
            Truth::Paired(p) => p.probs(),
        }
    }

    pub fn target(&self, kind: MetricKind) -> f64 {
        self.true_metrics.target(kind)
    }

    /// Interval for one sampled table of `n` subjects.
    pub fn infer(
        &self,
        counts: Vec<u64>,
        kind: MetricKind,
        method: CiMethod,
        alpha: f64,
    ) -> Result<IntervalEstimate> {
        let r = self.r();
        match self.truth {
            Truth::Single(_) => {
                let c = ConfusionCounts2::new(r, counts)?;
                let p = normalize_counts(&c)?;
                single_inference_prob(&p, c.total(), kind, method, alpha)
            }
            Truth::Paired(_) => {
                let c = JointCounts3::new(r, counts)?;
                let p = normalize_joint(&c)?;
                Ok(paired_inference_prob(&p, c.total(), kind, method, alpha, false)?.interval)
            }
        }
    }

    pub fn find(name: &str) -> Option<Scenario> {
        builtin_scenarios().into_iter().find(|s| s.name == name)
    }
}

fn single_from_counts(name: &str, rows: [[u64; 3]; 3]) -> Scenario {
    let c = ConfusionCounts2::from_rows(&rows).expect("3x3 rows");
    Scenario::single(name, normalize_counts(&c).expect("non-empty")).expect("non-degenerate")
}

// blocks[k][i][j]: truth k, method-1 prediction i, method-2 prediction j
fn paired_from_counts(name: &str, blocks: [[[u64; 3]; 3]; 3]) -> Scenario {
    let b: Vec<Vec<Vec<u64>>> = blocks
        .iter()
        .map(|blk| blk.iter().map(|row| row.to_vec()).collect())
        .collect();
    let c = JointCounts3::from_truth_blocks(&b).expect("3x3x3 blocks");
    Scenario::paired(name, normalize_joint(&c).expect("non-empty")).expect("non-degenerate")
}

/// The four single-table scenarios (cells in hundredths) and four paired
/// scenarios (cells in 300ths or 500ths).
pub fn builtin_scenarios() -> Vec<Scenario> {
    vec![
        single_from_counts("single-1", [[28, 2, 3], [3, 28, 2], [2, 3, 29]]),
        single_from_counts("single-2", [[11, 11, 11], [11, 11, 11], [11, 11, 12]]),
        single_from_counts("single-3", [[2, 5, 0], [2, 70, 2], [2, 2, 15]]),
        single_from_counts("single-4", [[2, 25, 6], [2, 26, 6], [2, 25, 6]]),
        paired_from_counts(
            "paired-1",
            [
                [[40, 10, 10], [10, 5, 5], [10, 5, 5]],
                [[5, 10, 5], [10, 40, 10], [5, 10, 5]],
                [[5, 5, 10], [5, 5, 10], [10, 10, 40]],
            ],
        ),
        paired_from_counts(
            "paired-2",
            [
                [[30, 15, 15], [10, 5, 5], [10, 5, 5]],
                [[5, 10, 5], [15, 30, 15], [5, 10, 5]],
                [[5, 5, 10], [5, 5, 10], [15, 15, 30]],
            ],
        ),
        paired_from_counts(
            "paired-3",
            [
                [[120, 30, 30], [30, 15, 15], [30, 15, 15]],
                [[5, 10, 5], [10, 40, 10], [5, 10, 5]],
                [[5, 5, 10], [5, 5, 10], [10, 10, 40]],
            ],
        ),
        paired_from_counts(
            "paired-4",
            [
                [[190, 80, 90], [5, 5, 5], [0, 5, 5]],
                [[5, 5, 0], [5, 10, 5], [5, 5, 5]],
                [[5, 5, 5], [5, 5, 15], [5, 5, 20]],
            ],
        ),
    ]
}

/// What to do with replicates where the estimator, its gradient or the
/// interval transform is undefined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DegeneracyPolicy {
    /// Count as not covering; coverage is `covered / reps`.
    #[default]
    CountAsMiss,
    /// Drop from the denominator; coverage is `covered / (reps - degenerate)`.
    Exclude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageConfig {
    pub n: u64,
    pub reps: u64,
    pub kind: MetricKind,
    pub method: CiMethod,
    pub alpha: f64,
    pub seed: u64,
    pub policy: DegeneracyPolicy,
    /// Worker threads; 0 uses rayon's default.
    pub workers: usize,
}

impl CoverageConfig {
    pub fn new(n: u64, reps: u64, kind: MetricKind, method: CiMethod, seed: u64) -> Self {
        Self {
            n,
            reps,
            kind,
            method,
            alpha: 0.05,
            seed,
            policy: DegeneracyPolicy::default(),
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub scenario: String,
    pub n: u64,
    pub reps: u64,
    pub kind: MetricKind,
    pub method: CiMethod,
    pub alpha: f64,
    pub policy: DegeneracyPolicy,
    pub covered: u64,
    pub degenerate: u64,
    pub coverage: f64,
    /// Mean width over the replicates that produced an interval.
    pub mean_width: Option<f64>,
    pub seed: u64,
}

#[derive(Clone, Copy)]
enum Outcome {
    Interval { covered: bool, width: f64 },
    Degenerate,
}

/// The generator for replicate `index`: stream `index` of the seeded ChaCha8.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn check_config(scenario: &Scenario, cfg: &CoverageConfig) -> Result<()> {
    if cfg.reps == 0 {
        return Err(MccError::InvalidConfig {
            reason: "reps must be at least 1".into(),
        });
    }
    if cfg.n == 0 {
        return Err(MccError::InvalidSampleSize);
    }
    crate::normal::z_two_sided(cfg.alpha)?;
    let paired = scenario.kind() == ScenarioKind::Paired;
    if cfg.method.is_paired() != paired {
        return Err(MccError::InvalidConfig {
            reason: format!(
                "{} intervals do not apply to {} scenario {}",
                cfg.method,
                if paired { "paired" } else { "single" },
                scenario.name
            ),
        });
    }
    Ok(())
}

/// Runs `cfg.reps` replicates and tallies coverage of the scenario's true
/// value.
pub fn run_coverage(scenario: &Scenario, cfg: &CoverageConfig) -> Result<CoverageResult> {
    check_config(scenario, cfg)?;
    let target = scenario.target(cfg.kind);
    let probs = scenario.probs();
    let one = |b: u64| -> Outcome {
        let mut rng = replicate_rng(cfg.seed, b);
        let counts = match sample_multinomial(probs, cfg.n, &mut rng) {
            Ok(c) => c,
            Err(_) => return Outcome::Degenerate,
        };
        match scenario.infer(counts, cfg.kind, cfg.method, cfg.alpha) {
            Ok(ci) if !ci.flags.degenerate_estimate => Outcome::Interval {
                covered: ci.contains(target),
                width: ci.width(),
            },
            _ => Outcome::Degenerate,
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| MccError::InvalidConfig {
            reason: format!("cannot start worker pool: {e}"),
        })?;
    let outcomes: Vec<Outcome> = pool.install(|| (0..cfg.reps).into_par_iter().map(one).collect());

    let (mut covered, mut degenerate, mut width_sum) = (0u64, 0u64, 0.0);
    for o in outcomes {
        match o {
            Outcome::Interval { covered: c, width } => {
                covered += c as u64;
                width_sum += width;
            }
            Outcome::Degenerate => degenerate += 1,
        }
    }
    let produced = cfg.reps - degenerate;
    let denom = match cfg.policy {
        DegeneracyPolicy::CountAsMiss => cfg.reps,
        DegeneracyPolicy::Exclude => produced,
    };
    Ok(CoverageResult {
        scenario: scenario.name.clone(),
        n: cfg.n,
        reps: cfg.reps,
        kind: cfg.kind,
        method: cfg.method,
        alpha: cfg.alpha,
        policy: cfg.policy,
        covered,
        degenerate,
        coverage: if denom == 0 { 0.0 } else { covered as f64 / denom as f64 },
        mean_width: (produced > 0).then(|| width_sum / produced as f64),
        seed: cfg.seed,
    })
}

/// The six (metric, interval) columns used for a scenario family.
pub fn method_columns(kind: ScenarioKind) -> Vec<(MetricKind, CiMethod)> {
    let methods = match kind {
        ScenarioKind::Single => [CiMethod::Wald, CiMethod::FisherZ],
        ScenarioKind::Paired => [CiMethod::WaldDiff, CiMethod::GTransform],
    };
    MetricKind::ALL
        .iter()
        .flat_map(|&k| methods.iter().map(move |&m| (k, m)))
        .collect()
}

const REPORT_HEADER: &str = "scenario    n     reps  metric  ci           coverage  covered  degenerate  mean_width  seed";

/// One row per result, coverage to 4 decimals.
pub fn coverage_report(results: &[CoverageResult]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in results {
        let _ = writeln!(
            out,
            "{:<10}  {:>4}  {:>7}  {:<6}  {:<11}  {:>8.4}  {:>7}  {:>10}  {:>10}  {}",
            r.scenario,
            r.n,
            r.reps,
            r.kind.label(),
            r.method.label(),
            r.coverage,
            r.covered,
            r.degenerate,
            r.mean_width.map_or("-".to_string(), |w| format!("{w:.4}")),
            r.seed
        );
    }
    out
}

/// Scenario-by-n rows against metric/interval columns, in first-seen order.
/// Missing cells print as `-`.
pub fn coverage_grid(results: &[CoverageResult]) -> String {
    let mut rows: Vec<(String, u64)> = Vec::new();
    let mut cols: Vec<(MetricKind, CiMethod)> = Vec::new();
    for r in results {
        if !rows.contains(&(r.scenario.clone(), r.n)) {
            rows.push((r.scenario.clone(), r.n));
        }
        if !cols.contains(&(r.kind, r.method)) {
            cols.push((r.kind, r.method));
        }
    }
    let mut out = format!("{:<10}  {:>4}", "scenario", "n");
    for (k, m) in &cols {
        let _ = write!(out, "  {:>16}", format!("{}/{}", k.label(), m.label()));
    }
    out.push('\n');
    for (s, n) in &rows {
        let _ = write!(out, "{s:<10}  {n:>4}");
        for (k, m) in &cols {
            let cell = results
                .iter()
                .find(|r| &r.scenario == s && r.n == *n && r.kind == *k && r.method == *m);
            match cell {
                Some(r) => {
                    let _ = write!(out, "  {:>16.4}", r.coverage);
                }
                None => {
                    let _ = write!(out, "  {:>16}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}
