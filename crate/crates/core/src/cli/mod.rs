//! Command-line front end: config parsing, command dispatch and reports.

mod config;
mod report;

use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::{
    parse_config, Command, ConfigError, ConfigIssue, ExperimentConfig, Format, OutputSpec,
    RunParams, GRAMMAR,
};
pub use report::{error_json, Report, SCHEMA_VERSION};

use crate::bowen::{
    ball_volume_growth, separated_entropy, spanning_entropy, BallGrowthReport, CoverMethod,
};
use crate::cocycle::lyapunov_spectrum;
use crate::error::{Error, Result};
use crate::rng::{uniform_point, Stream};
use crate::splitting::{
    compare_bundle_growth, gap_statistics, verify_domination, SplittingOptions,
};
use crate::system::TorusPoint;
use crate::volume::growth_rate;

const MODULE: &str = "cli-reporting";

/// Absolute differences between the three entropy values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbsoluteGaps {
    pub volume_bowen: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volume_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bowen_exact: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub volume_rate: f64,
    pub bowen_value: f64,
    pub exact_value: Option<f64>,
    pub provenance: Option<String>,
    pub absolute_gaps: AbsoluteGaps,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl ComparisonReport {
    pub fn new(
        volume_rate: f64,
        bowen_value: f64,
        exact: Option<(f64, String)>,
        tolerance: f64,
    ) -> Self {
        let exact_value = exact.as_ref().map(|e| e.0);
        let gaps = AbsoluteGaps {
            volume_bowen: (volume_rate - bowen_value).abs(),
            volume_exact: exact_value.map(|e| (volume_rate - e).abs()),
            bowen_exact: exact_value.map(|e| (bowen_value - e).abs()),
        };
        let ok = gaps.volume_bowen <= tolerance
            && gaps.volume_exact.is_none_or(|g| g <= tolerance)
            && gaps.bowen_exact.is_none_or(|g| g <= tolerance);
        ComparisonReport {
            volume_rate,
            bowen_value,
            exact_value,
            provenance: exact.map(|e| e.1),
            absolute_gaps: gaps,
            tolerance,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        }
    }
}

/// Outcome of the ball-growth command over one or more centers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallGrowthSummary {
    pub reports: Vec<BallGrowthReport>,
    pub tolerance: f64,
    /// Every normalized value is `≤ tolerance`.
    pub upper_bound_holds: bool,
    /// Share of centers whose normalized values are all `≥ −tolerance`.
    pub lower_bound_fraction: f64,
    pub lower_bound_majority: bool,
    pub any_unreliable: bool,
}

fn splitting_options(cfg: &ExperimentConfig) -> Result<SplittingOptions> {
    let dims = cfg.dims().ok_or_else(|| {
        Error::argument(
            MODULE,
            "run",
            "no default splitting for this system; set dims",
        )
    })?;
    Ok(SplittingOptions {
        dims,
        n_fwd: cfg.params.n_fwd,
        n_bwd: cfg.params.n_bwd,
    })
}

fn cover(cfg: &ExperimentConfig) -> Result<crate::bowen::EntropyEstimate> {
    let r = &cfg.params;
    match r.cover {
        CoverMethod::Spanning => spanning_entropy(&cfg.system, r.bowen_n, r.delta, r.resolution),
        CoverMethod::Separated => separated_entropy(&cfg.system, r.bowen_n, r.delta, r.resolution),
    }
}

/// Runs `command` under `cfg`.
pub fn run(cfg: &ExperimentConfig, command: Command) -> std::result::Result<Report, RunError> {
    let issues = cfg.check_command(command);
    if !issues.is_empty() {
        return Err(RunError::Config(ConfigError { issues }));
    }
    execute(cfg, command).map_err(RunError::Module)
}

fn execute(cfg: &ExperimentConfig, command: Command) -> Result<Report> {
    let sys = &cfg.system;
    let r = &cfg.params;
    let d = sys.dimension();
    let seed = cfg.seed;
    let report = Report::new(command, cfg);
    Ok(match command {
        Command::EntropyVolume => {
            let curve = growth_rate(sys, &r.n_list, &r.sampler_spec(seed))?;
            let rows = curve
                .samples
                .iter()
                .map(|s| {
                    vec![
                        s.n.to_string(),
                        s.log_integral.to_string(),
                        s.normalized.to_string(),
                        s.stderr.to_string(),
                    ]
                })
                .collect();
            let summary = format!("fitted_rate = {}", curve.fitted_rate);
            report
                .with_result(&curve, summary)
                .with_csv(&["n", "log_integral", "normalized", "stderr"], rows)
        }
        Command::EntropyBowen => {
            let e = cover(cfg)?;
            let rows = vec![vec![
                e.n.to_string(),
                e.value.to_string(),
                e.cover_size.to_string(),
                e.delta.to_string(),
                e.method.as_str().to_string(),
            ]];
            let summary = format!(
                "{} value = {} (cover {})",
                e.method.as_str(),
                e.value,
                e.cover_size
            );
            report
                .with_result(&e, summary)
                .with_csv(&["n", "value", "cover_size", "delta", "method"], rows)
        }
        Command::Lyapunov => {
            let x = r
                .point
                .unwrap_or_else(|| uniform_point(seed, Stream::LyapunovPoint, 0, d));
            let l = lyapunov_spectrum(sys, &x, r.lyapunov_n)?;
            let rows = l
                .exponents
                .iter()
                .enumerate()
                .map(|(i, e)| vec![(i + 1).to_string(), e.to_string()])
                .collect();
            let summary = format!("exponents = {:?}", l.exponents);
            report
                .with_result(&l, summary)
                .with_csv(&["index", "exponent"], rows)
        }
        Command::Domination => {
            let opts = splitting_options(cfg)?;
            let dom = verify_domination(
                sys,
                &opts,
                r.domination_split,
                r.alpha,
                r.iterate,
                r.domination_samples,
                seed,
            )?;
            let summary = format!(
                "passed = {}, empirical_lambda = {}",
                dom.passed, dom.empirical_lambda
            );
            report.with_result(&dom, summary)
        }
        Command::GrassmannCheck => {
            let opts = splitting_options(cfg)?;
            let gaps = gap_statistics(
                sys,
                &opts,
                r.bundle,
                r.gap_n,
                r.point_samples,
                r.frame_samples,
                seed,
            )?;
            #[derive(Serialize)]
            struct Grassmann {
                gap: crate::splitting::GapStatistics,
                bundle_growth: crate::splitting::BundleComparison,
            }
            let bundle_growth = compare_bundle_growth(sys, &opts, r.gap_n, r.point_samples, seed)?;
            let summary = format!(
                "max_gap = {}, max |max_i F^i rate - max_V rate| = {}",
                gaps.max_gap, bundle_growth.max_abs_gap
            );
            report.with_result(
                &Grassmann {
                    gap: gaps,
                    bundle_growth,
                },
                summary,
            )
        }
        Command::BallGrowth => {
            let centers: Vec<TorusPoint> = match r.center {
                Some(c) => vec![c],
                None => (0..r.centers as u64)
                    .map(|i| uniform_point(seed, Stream::BallCenters, i, d))
                    .collect(),
            };
            let opts = match r.ball_bundle {
                crate::bowen::BundleChoice::MaxOverV => None,
                _ => Some(splitting_options(cfg)?),
            };
            let reports = centers
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    ball_volume_growth(
                        sys,
                        c,
                        &r.ball_n,
                        r.delta,
                        r.ball_bundle,
                        opts.as_ref(),
                        r.mc_count,
                        seed,
                    )
                    .map_err(|e| e.with_index(i))
                })
                .collect::<Result<Vec<_>>>()?;
            let tol = r.ball_tolerance;
            let upper = reports
                .iter()
                .all(|b| b.normalized_log_integrals.iter().all(|v| *v <= tol));
            let lower = reports
                .iter()
                .filter(|b| b.normalized_log_integrals.iter().all(|v| *v >= -tol))
                .count();
            let fraction = lower as f64 / reports.len() as f64;
            let mut rows = Vec::new();
            for (i, b) in reports.iter().enumerate() {
                for k in 0..b.n_values.len() {
                    rows.push(vec![
                        i.to_string(),
                        b.n_values[k].to_string(),
                        b.normalized_log_integrals[k].to_string(),
                        b.accepted_fraction[k].to_string(),
                        b.unreliable[k].to_string(),
                    ]);
                }
            }
            let s = BallGrowthSummary {
                any_unreliable: reports.iter().any(|b| b.unreliable.iter().any(|u| *u)),
                reports,
                tolerance: tol,
                upper_bound_holds: upper,
                lower_bound_fraction: fraction,
                lower_bound_majority: fraction >= 0.5,
            };
            let summary = format!("upper_bound_holds = {upper}, lower_bound_fraction = {fraction}");
            report.with_result(&s, summary).with_csv(
                &[
                    "center",
                    "n",
                    "normalized",
                    "accepted_fraction",
                    "unreliable",
                ],
                rows,
            )
        }
        Command::Compare => {
            let curve = growth_rate(sys, &r.n_list, &r.sampler_spec(seed))?;
            let e = cover(cfg)?;
            let exact = sys.exact_entropy().map(|x| (x.value, x.note.clone()));
            let c = ComparisonReport::new(curve.fitted_rate, e.value, exact, r.tolerance);
            let summary = format!(
                "volume_rate = {}, bowen_value = {}, verdict = {:?}",
                c.volume_rate, c.bowen_value, c.verdict
            );
            report.with_result(&c, summary)
        }
    })
}

/// Failure of a command.
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Module(Error),
    ConfigRead(PathBuf, std::io::Error),
    Io(PathBuf, std::io::Error),
}

impl RunError {
    /// Process exit code: 2 for configuration and argument errors, 3 for
    /// numerical failures, 4 for convergence failures, 5 when reports cannot
    /// be written.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::ConfigRead(..) => 2,
            RunError::Module(e) => match e {
                Error::Argument { .. } => 2,
                Error::Numerical { .. } => 3,
                Error::Convergence { .. } => 4,
            },
            RunError::Io(..) => 5,
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            RunError::Config(c) => error_json(&serde_json::json!({
                "kind": "config",
                "module": MODULE,
                "operation": "parse_config",
                "message": c.to_string(),
                "issues": c.issues,
            })),
            RunError::Module(e) => error_json(&e.record()),
            RunError::ConfigRead(path, e) => error_json(&serde_json::json!({
                "kind": "config",
                "module": MODULE,
                "operation": "parse_config",
                "message": format!("{}: {e}", path.display()),
            })),
            RunError::Io(path, e) => error_json(&serde_json::json!({
                "kind": "io",
                "module": MODULE,
                "operation": "run",
                "message": format!("{}: {e}", path.display()),
            })),
        }
    }
}

/// Loads a config file.
pub fn load_config(path: &Path) -> std::result::Result<ExperimentConfig, RunError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| RunError::ConfigRead(path.to_path_buf(), e))?;
    parse_config(&text).map_err(RunError::Config)
}

/// Parses, runs and writes reports; returns the files written.
pub fn run_to_dir(
    cfg: &ExperimentConfig,
    command: Command,
    out: Option<&Path>,
) -> std::result::Result<(Report, Vec<PathBuf>), RunError> {
    let report = run(cfg, command)?;
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let files = report
        .write(&dir, &cfg.output.formats)
        .map_err(|(p, e)| RunError::Io(p, e))?;
    Ok((report, files))
}
