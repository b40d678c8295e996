//! The `mccinf` command line: argument parsing, the three commands and
//! result rendering.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::MccError;
use crate::io::{parse_joint_json, parse_matrix_csv, ParseError};
use crate::paired::{paired_inference, PairedEstimate};
use crate::simulation::{
    builtin_scenarios, coverage_grid, coverage_report, method_columns, run_coverage,
    CoverageConfig, CoverageResult, DegeneracyPolicy, Scenario,
};
use crate::single::{single_inference, CiMethod, IntervalEstimate};
use crate::table::MetricKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

const DEFAULT_SEED: u64 = 20240611;
const PAPER_REPS: u64 = 100_000;

#[derive(Debug, Parser)]
#[command(
    name = "mccinf",
    version,
    about = "Multiclass MCC estimates with asymptotic confidence intervals"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate metrics and intervals from one confusion matrix (CSV).
    Estimate(EstimateArgs),
    /// Compare two classifiers scored on the same subjects (joint JSON).
    PairedDiff(PairedArgs),
    /// Monte Carlo coverage of the intervals on built-in scenarios.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Mam,
    Mim,
    MimStar,
}

impl From<MetricArg> for MetricKind {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Mam => MetricKind::MaM,
            MetricArg::Mim => MetricKind::MiM,
            MetricArg::MimStar => MetricKind::MiMStar,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CiArg {
    /// Plain Wald (single table) or Wald on the difference (paired).
    Wald,
    FisherZ,
    WaldDiff,
    /// g-transformed interval for a paired difference.
    #[value(alias = "g")]
    GTransform,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Table,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    CountAsMiss,
    Exclude,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Metric to report; repeat for several. Default: all three.
    #[arg(long = "metric", value_enum)]
    pub metrics: Vec<MetricArg>,
    /// Two-sided level; intervals have coverage 1 - alpha.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Print table numbers to 12 significant digits instead of 3 or 4
    /// decimals.
    #[arg(long)]
    pub full_precision: bool,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// CSV confusion matrix, rows prediction and columns truth; `-` reads
    /// stdin.
    #[arg(long)]
    pub input: PathBuf,
    /// Interval type: wald or fisher-z.
    #[arg(long, value_enum, default_value_t = CiArg::Wald)]
    pub ci: CiArg,
    /// The CSV has truth on rows and prediction on columns.
    #[arg(long)]
    pub transpose: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct PairedArgs {
    /// JSON joint table; `-` reads stdin.
    #[arg(long)]
    pub input: PathBuf,
    /// Interval type: wald (same as wald-diff) or g-transform.
    #[arg(long, value_enum, default_value_t = CiArg::WaldDiff)]
    pub ci: CiArg,
    /// Treat the two methods as scored on independent samples (covariance
    /// term set to zero).
    #[arg(long)]
    pub independent: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Built-in scenario (single-1..4, paired-1..4); repeat for several.
    /// Single and paired scenarios cannot be mixed.
    #[arg(long = "scenario", required = true)]
    pub scenarios: Vec<String>,
    /// Sample size per replicate; repeat for several.
    #[arg(long = "n", default_values_t = [50u64, 100, 400, 800])]
    pub sizes: Vec<u64>,
    /// Interval type; repeat for several. Default: both types of the
    /// scenario family.
    #[arg(long = "ci", value_enum)]
    pub cis: Vec<CiArg>,
    #[arg(long, default_value_t = 10_000, conflicts_with = "paper_scale")]
    pub reps: u64,
    /// Use 100000 replicates.
    #[arg(long)]
    pub paper_scale: bool,
    #[arg(long, env = "MCC_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Handling of replicates where an estimate or interval is undefined.
    #[arg(long, value_enum, default_value_t = PolicyArg::CountAsMiss)]
    pub policy: PolicyArg,
    /// Worker threads; 0 picks one per core.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Lay the table out as scenario/n rows against metric/interval
    /// columns.
    #[arg(long)]
    pub grid: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Estimate,
    PairedDiff,
    Simulate,
}

/// Resolved settings of one invocation, echoed into the output document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub metrics: Vec<MetricKind>,
    pub ci: Vec<CiMethod>,
    pub alpha: f64,
    pub format: Format,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub transpose: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub independent: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<DegeneracyPolicy>,
}

/// Everything a successful run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub estimates: Vec<MetricResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub differences: Vec<PairedEstimate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coverage: Vec<CoverageResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub metric: MetricKind,
    pub interval: IntervalEstimate,
}

/// A failed run: message plus exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    pub exit: i32,
}

impl CliError {
    fn input(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            exit: EXIT_INPUT,
        }
    }
}

impl From<MccError> for CliError {
    fn from(e: MccError) -> Self {
        let (code, exit) = match &e {
            MccError::DegenerateMarginal { .. } => ("degenerate-input", EXIT_DEGENERATE),
            MccError::InvalidAlpha { .. } | MccError::InvalidConfig { .. } => {
                ("invalid-config", EXIT_INPUT)
            }
            _ => ("invalid-input", EXIT_INPUT),
        };
        Self {
            code,
            message: e.to_string(),
            exit,
        }
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        match e {
            ParseError::Table(inner) => inner.into(),
            other => CliError::input("parse-error", other.to_string()),
        }
    }
}

/// What `run` hands back to `main`: stdout text, stderr warnings, status.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub stdout: String,
    pub stderr: String,
    pub exit: i32,
}

fn read_input(path: &PathBuf) -> Result<String, CliError> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s)
            .map_err(|e| CliError::input("io-error", format!("stdin: {e}")))?;
        Ok(s)
    } else {
        std::fs::read_to_string(path)
            .map_err(|e| CliError::input("io-error", format!("{}: {e}", path.display())))
    }
}

fn metrics(common: &Common) -> Vec<MetricKind> {
    if common.metrics.is_empty() {
        return MetricKind::ALL.to_vec();
    }
    let mut out: Vec<MetricKind> = Vec::new();
    for &m in &common.metrics {
        let k = m.into();
        if !out.contains(&k) {
            out.push(k);
        }
    }
    out
}

fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(MccError::InvalidAlpha { alpha }.into())
    }
}

fn single_ci(ci: CiArg) -> Result<CiMethod, CliError> {
    match ci {
        CiArg::Wald => Ok(CiMethod::Wald),
        CiArg::FisherZ => Ok(CiMethod::FisherZ),
        other => Err(CliError::input(
            "invalid-config",
            format!("{other:?} intervals apply to paired differences; use wald or fisher-z"),
        )),
    }
}

fn paired_ci(ci: CiArg) -> Result<CiMethod, CliError> {
    match ci {
        CiArg::Wald | CiArg::WaldDiff => Ok(CiMethod::WaldDiff),
        CiArg::GTransform => Ok(CiMethod::GTransform),
        CiArg::FisherZ => Err(CliError::input(
            "invalid-config",
            "fisher-z intervals apply to single tables; use wald-diff or g-transform",
        )),
    }
}

fn document(config: RunConfig) -> ResultDocument {
    ResultDocument {
        tool: "mccinf".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config,
        labels: Vec::new(),
        n: None,
        estimates: Vec::new(),
        differences: Vec::new(),
        coverage: Vec::new(),
        warnings: Vec::new(),
    }
}

fn interval_warnings(what: &str, ci: &IntervalEstimate, labels: &[String], out: &mut Vec<String>) {
    if ci.flags.degenerate_estimate {
        out.push(format!(
            "{what}: estimate on the boundary of the {} domain; pulled inside before transforming",
            ci.method
        ));
    }
    if ci.flags.variance_clamped {
        out.push(format!("{what}: variance rounded below zero and was set to 0"));
    }
    if !ci.flags.degenerate_classes.is_empty() {
        let names: Vec<&str> = ci
            .flags
            .degenerate_classes
            .iter()
            .map(|&a| labels.get(a).map_or("?", String::as_str))
            .collect();
        out.push(format!(
            "{what}: one-vs-rest MCC undefined for class(es) {}; counted as 0",
            names.join(", ")
        ));
    }
}

pub fn cmd_estimate(args: &EstimateArgs) -> Result<ResultDocument, CliError> {
    check_alpha(args.common.alpha)?;
    let method = single_ci(args.ci)?;
    let parsed = parse_matrix_csv(&read_input(&args.input)?)?;
    let counts = if args.transpose {
        parsed.counts.transposed()
    } else {
        parsed.counts
    };
    let kinds = metrics(&args.common);
    let mut doc = document(RunConfig {
        command: CommandName::Estimate,
        input: Some(args.input.display().to_string()),
        metrics: kinds.clone(),
        ci: vec![method],
        alpha: args.common.alpha,
        format: args.common.format,
        transpose: args.transpose,
        independent: false,
        scenarios: Vec::new(),
        n: Vec::new(),
        reps: None,
        seed: None,
        policy: None,
    });
    doc.n = Some(counts.total());
    for kind in kinds {
        let interval = single_inference(&counts, kind, method, args.common.alpha)?;
        interval_warnings(kind.label(), &interval, &parsed.labels, &mut doc.warnings);
        doc.estimates.push(MetricResult {
            metric: kind,
            interval,
        });
    }
    doc.labels = parsed.labels;
    Ok(doc)
}

pub fn cmd_paired_diff(args: &PairedArgs) -> Result<ResultDocument, CliError> {
    check_alpha(args.common.alpha)?;
    let method = paired_ci(args.ci)?;
    let parsed = parse_joint_json(&read_input(&args.input)?)?;
    let kinds = metrics(&args.common);
    let mut doc = document(RunConfig {
        command: CommandName::PairedDiff,
        input: Some(args.input.display().to_string()),
        metrics: kinds.clone(),
        ci: vec![method],
        alpha: args.common.alpha,
        format: args.common.format,
        transpose: false,
        independent: args.independent,
        scenarios: Vec::new(),
        n: Vec::new(),
        reps: None,
        seed: None,
        policy: None,
    });
    doc.n = Some(parsed.counts.total());
    for kind in kinds {
        let est = paired_inference(&parsed.counts, kind, method, args.common.alpha, args.independent)?;
        interval_warnings(kind.label(), &est.interval, &parsed.labels, &mut doc.warnings);
        doc.differences.push(est);
    }
    doc.labels = parsed.labels;
    Ok(doc)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<ResultDocument, CliError> {
    check_alpha(args.common.alpha)?;
    let reps = if args.paper_scale { PAPER_REPS } else { args.reps };
    if reps == 0 {
        return Err(CliError::input("invalid-config", "--reps must be at least 1"));
    }
    if args.sizes.contains(&0) {
        return Err(CliError::input("invalid-config", "--n must be at least 1"));
    }
    let known = builtin_scenarios();
    let mut scenarios: Vec<Scenario> = Vec::new();
    for name in &args.scenarios {
        let s = known.iter().find(|s| &s.name == name).ok_or_else(|| {
            let names: Vec<&str> = known.iter().map(|s| s.name.as_str()).collect();
            CliError::input(
                "invalid-config",
                format!("unknown scenario {name:?}; choose from {}", names.join(", ")),
            )
        })?;
        if scenarios.first().is_some_and(|f| f.kind() != s.kind()) {
            return Err(CliError::input(
                "invalid-config",
                "single and paired scenarios cannot be simulated together",
            ));
        }
        if !scenarios.iter().any(|x| x.name == s.name) {
            scenarios.push(s.clone());
        }
    }
    let family = scenarios[0].kind();
    let methods: Vec<CiMethod> = if args.cis.is_empty() {
        method_columns(family)[..2].iter().map(|&(_, m)| m).collect()
    } else {
        let mut out = Vec::new();
        for &c in &args.cis {
            let m = match family {
                crate::simulation::ScenarioKind::Single => single_ci(c)?,
                crate::simulation::ScenarioKind::Paired => paired_ci(c)?,
            };
            if !out.contains(&m) {
                out.push(m);
            }
        }
        out
    };
    let kinds = metrics(&args.common);
    let policy = match args.policy {
        PolicyArg::CountAsMiss => DegeneracyPolicy::CountAsMiss,
        PolicyArg::Exclude => DegeneracyPolicy::Exclude,
    };
    let mut doc = document(RunConfig {
        command: CommandName::Simulate,
        input: None,
        metrics: kinds.clone(),
        ci: methods.clone(),
        alpha: args.common.alpha,
        format: args.common.format,
        transpose: false,
        independent: false,
        scenarios: scenarios.iter().map(|s| s.name.clone()).collect(),
        n: args.sizes.clone(),
        reps: Some(reps),
        seed: Some(args.seed),
        policy: Some(policy),
    });
    for s in &scenarios {
        for &n in &args.sizes {
            for &kind in &kinds {
                for &method in &methods {
                    let cfg = CoverageConfig {
                        n,
                        reps,
                        kind,
                        method,
                        alpha: args.common.alpha,
                        seed: args.seed,
                        policy,
                        workers: args.workers,
                    };
                    let r = run_coverage(s, &cfg)?;
                    if r.degenerate > 0 {
                        doc.warnings.push(format!(
                            "{} n={n} {kind}/{method}: {} of {reps} replicates degenerate",
                            s.name, r.degenerate
                        ));
                    }
                    doc.coverage.push(r);
                }
            }
        }
    }
    Ok(doc)
}

/// Shortest representation of `x` rounded to 12 significant digits.
pub fn sig12(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float");
    format!("{rounded}")
}

fn num(x: f64, decimals: usize, full: bool) -> String {
    if full {
        sig12(x)
    } else {
        format!("{x:.decimals$}")
    }
}

fn render_rows(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(header.to_vec(), &mut out);
    for row in rows {
        line(row.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

fn render_estimates(doc: &ResultDocument, full: bool) -> String {
    let level = 100.0 * (1.0 - doc.config.alpha);
    let mut out = format!(
        "n = {}, {} classes, {level}% intervals\n",
        doc.n.unwrap_or(0),
        doc.labels.len()
    );
    let rows: Vec<Vec<String>> = doc
        .estimates
        .iter()
        .map(|m| {
            let ci = &m.interval;
            vec![
                m.metric.label().to_string(),
                num(ci.estimate, 3, full),
                num(ci.variance, 4, full),
                ci.method.label().to_string(),
                num(ci.lower, 3, full),
                num(ci.upper, 3, full),
            ]
        })
        .collect();
    out.push_str(&render_rows(
        &["metric", "estimate", "variance", "ci", "lower", "upper"],
        &rows,
    ));
    out
}

fn render_differences(doc: &ResultDocument, full: bool) -> String {
    let level = 100.0 * (1.0 - doc.config.alpha);
    let mut out = format!(
        "n = {}, {} classes, {level}% intervals for method 1 - method 2{}\n",
        doc.n.unwrap_or(0),
        doc.labels.len(),
        if doc.config.independent {
            ", covariance set to zero"
        } else {
            ""
        }
    );
    let rows: Vec<Vec<String>> = doc
        .differences
        .iter()
        .map(|d| {
            vec![
                d.kind.label().to_string(),
                num(d.method1, 3, full),
                num(d.method2, 3, full),
                num(d.diff, 3, full),
                num(d.block.x, 4, full),
                num(d.block.y, 4, full),
                num(d.block.z, 4, full),
                d.interval.method.label().to_string(),
                num(d.interval.lower, 3, full),
                num(d.interval.upper, 3, full),
            ]
        })
        .collect();
    out.push_str(&render_rows(
        &["metric", "method1", "method2", "diff", "X", "Y", "Z", "ci", "lower", "upper"],
        &rows,
    ));
    out
}

fn render_coverage(doc: &ResultDocument, full: bool, grid: bool) -> String {
    if grid {
        return coverage_grid(&doc.coverage);
    }
    if !full {
        return coverage_report(&doc.coverage);
    }
    let rows: Vec<Vec<String>> = doc
        .coverage
        .iter()
        .map(|r| {
            vec![
                r.scenario.clone(),
                r.n.to_string(),
                r.reps.to_string(),
                r.kind.label().to_string(),
                r.method.label().to_string(),
                sig12(r.coverage),
                r.covered.to_string(),
                r.degenerate.to_string(),
                r.mean_width.map_or("-".into(), sig12),
                r.seed.to_string(),
            ]
        })
        .collect();
    render_rows(
        &[
            "scenario", "n", "reps", "metric", "ci", "coverage", "covered", "degenerate",
            "mean_width", "seed",
        ],
        &rows,
    )
}

/// Renders a document in the requested format.
pub fn render(doc: &ResultDocument, format: Format, full: bool, grid: bool) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(doc).expect("document serializes");
            s.push('\n');
            s
        }
        Format::Table => match doc.config.command {
            CommandName::Estimate => render_estimates(doc, full),
            CommandName::PairedDiff => render_differences(doc, full),
            CommandName::Simulate => render_coverage(doc, full, grid),
        },
    }
}

fn error_text(e: &CliError, format: Format) -> String {
    match format {
        Format::Json => {
            let v = serde_json::json!({ "error": { "code": e.code, "message": e.message } });
            format!("{v}\n")
        }
        Format::Table => format!("error: {}\n", e.message),
    }
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Output {
    let (result, common, grid) = match &cli.command {
        Command::Estimate(a) => (cmd_estimate(a), &a.common, false),
        Command::PairedDiff(a) => (cmd_paired_diff(a), &a.common, false),
        Command::Simulate(a) => (cmd_simulate(a), &a.common, a.grid),
    };
    match result {
        Ok(doc) => {
            let mut stderr = String::new();
            for w in &doc.warnings {
                let _ = writeln!(stderr, "warning: {w}");
            }
            Output {
                stdout: render(&doc, common.format, common.full_precision, grid),
                stderr,
                exit: EXIT_OK,
            }
        }
        Err(e) => Output {
            stdout: String::new(),
            stderr: error_text(&e, common.format),
            exit: e.exit,
        },
    }
}
