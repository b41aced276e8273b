//! Experiment configuration files.
//!
//! The format is line based: `[section]` headers, `key = value` lines,
//! `#` comments. See [`GRAMMAR`].

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::bowen::{
    default_delta, BundleChoice, CoverMethod, MAX_COVER_GRID, MIN_MC_COUNT, MIN_POINTS_PER_DELTA,
};
use crate::splitting::MAX_DOMINATION_ITERATE;
use crate::system::{ExactEntropy, SystemKind, SystemSpec, TorusPoint};
use crate::volume::{SamplerMode, SamplerSpec};

pub const GRAMMAR: &str = "\
CONFIG FILE GRAMMAR
  UTF-8 text. Blank lines and lines starting with '#' are ignored.
  '[section]' starts a section; 'key = value' sets a key in it.
  Lists are comma separated; integer lists also accept inclusive ranges
  such as '8..20'. Every key may appear once, except 'row'.

  [system]
    kind          = linear_toral | skew_product | perturbed_cat   (required)
    dimension     = 1..4        (linear: number of rows; skew: 3; perturbed: 2)
    row           = a, b, ...   integer matrix row, repeat once per row
                                (required for linear_toral; the 2x2 base for
                                the others, default 2,1 / 1,1)
    epsilon       = real >= 0   perturbation amplitude (not for linear_toral;
                                perturbed_cat needs 2*pi*epsilon < 0.5)
    exact_entropy = real        known entropy, overrides the derived value
    exact_note    = text        provenance of exact_entropy

  [run]
    command       = entropy-volume | entropy-bowen | lyapunov | domination
                    | grassmann-check | ball-growth | compare
                    (optional; must match the command line if given)
    seed          = integer >= 0                    default 0
    # volume growth
    n_list        = ints, >= 3, strictly increasing default 10,20,30,40,50
    sampler       = monte_carlo | grid              default monte_carlo
    samples       = count (monte_carlo) or per-axis resolution (grid)
                                                    default 10000
    # spanning sets
    delta         = 0 < real < 0.5                  default 0.05 (d<=2), 0.08
    bowen_n       = int >= 1                        default 12
    resolution    = grid points per axis            default 1024 (d<=2), 128
    cover         = spanning | separated            default spanning
    tolerance     = real > 0 for compare verdicts   default 0.1
    # lyapunov
    lyapunov_n    = int >= 1                        default 10000
    point         = reals, one per dimension        default: seeded random
    # splittings
    dims          = block sizes s, 1, ..., 1, u     default per system
    n_fwd, n_bwd  = flag iteration lengths          default 40
    alpha         = cone width > 0                  default 1
    iterate       = domination iterate 1..500       default 1
    domination_split   = number of blocks in E      default 1
    domination_samples = points                     default 100
    gap_n         = int >= 1                        default 200
    point_samples = int >= 1                        default 100
    frame_samples = int >= 1                        default 20
    bundle        = index i of F^i                  default 0
    # dynamical balls
    ball_n        = ints, strictly increasing       default 8..20
    mc_count      = int >= 100                      default 100000
    ball_bundle   = max_over_v | max_over_f | fixed_f:<i>
                                                    default max_over_v
    center        = reals, one per dimension        default: seeded random
    centers       = number of random centers        default 1
    ball_tolerance = real > 0                       default 0.05

  [output]
    dir           = path                            default volgrow-out
    formats       = json[, csv]                     default json, csv
";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    EntropyVolume,
    EntropyBowen,
    Lyapunov,
    Domination,
    GrassmannCheck,
    BallGrowth,
    Compare,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::EntropyVolume,
        Command::EntropyBowen,
        Command::Lyapunov,
        Command::Domination,
        Command::GrassmannCheck,
        Command::BallGrowth,
        Command::Compare,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Command::EntropyVolume => "entropy-volume",
            Command::EntropyBowen => "entropy-bowen",
            Command::Lyapunov => "lyapunov",
            Command::Domination => "domination",
            Command::GrassmannCheck => "grassmann-check",
            Command::BallGrowth => "ball-growth",
            Command::Compare => "compare",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

/// One validation failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigIssue {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

/// Every validation failure found in a config.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunParams {
    pub n_list: Vec<usize>,
    pub sampler: SamplerMode,
    pub samples: usize,
    pub delta: f64,
    pub bowen_n: usize,
    pub resolution: usize,
    pub cover: CoverMethod,
    pub tolerance: f64,
    pub lyapunov_n: usize,
    pub point: Option<TorusPoint>,
    pub dims: Option<Vec<usize>>,
    pub n_fwd: usize,
    pub n_bwd: usize,
    pub alpha: f64,
    pub iterate: usize,
    pub domination_split: usize,
    pub domination_samples: usize,
    pub gap_n: usize,
    pub point_samples: usize,
    pub frame_samples: usize,
    pub bundle: usize,
    pub ball_n: Vec<usize>,
    pub mc_count: usize,
    pub ball_bundle: BundleChoice,
    pub center: Option<TorusPoint>,
    pub centers: usize,
    pub ball_tolerance: f64,
}

impl RunParams {
    pub fn defaults(dim: usize) -> Self {
        RunParams {
            n_list: vec![10, 20, 30, 40, 50],
            sampler: SamplerMode::MonteCarlo,
            samples: 10_000,
            delta: default_delta(dim),
            bowen_n: 12,
            resolution: if dim <= 2 { 1024 } else { 128 },
            cover: CoverMethod::Spanning,
            tolerance: 0.1,
            lyapunov_n: 10_000,
            point: None,
            dims: None,
            n_fwd: crate::splitting::DEFAULT_FLAG_STEPS,
            n_bwd: crate::splitting::DEFAULT_FLAG_STEPS,
            alpha: 1.0,
            iterate: 1,
            domination_split: 1,
            domination_samples: 100,
            gap_n: 200,
            point_samples: 100,
            frame_samples: 20,
            bundle: 0,
            ball_n: (8..=20).collect(),
            mc_count: 100_000,
            ball_bundle: BundleChoice::MaxOverV,
            center: None,
            centers: 1,
            ball_tolerance: 0.05,
        }
    }

    pub fn sampler_spec(&self, seed: u64) -> SamplerSpec {
        match self.sampler {
            SamplerMode::MonteCarlo => SamplerSpec::monte_carlo(self.samples, seed),
            SamplerMode::Grid => SamplerSpec::grid(self.samples),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSpec {
    pub dir: String,
    pub formats: Vec<Format>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: "volgrow-out".into(),
            formats: vec![Format::Json, Format::Csv],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    pub command: Option<Command>,
    pub seed: u64,
    pub params: RunParams,
    pub output: OutputSpec,
    /// Line of each key, for validation messages. Not part of equality
    /// across formatting changes, so kept out of serialization.
    #[serde(skip)]
    lines: KeyLines,
}

#[derive(Debug, Clone, Default)]
struct KeyLines(HashMap<String, usize>);

impl PartialEq for KeyLines {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

struct Entry {
    line: usize,
    value: String,
}

const SYSTEM_KEYS: &[&str] = &[
    "kind",
    "dimension",
    "row",
    "epsilon",
    "exact_entropy",
    "exact_note",
];
const RUN_KEYS: &[&str] = &[
    "command",
    "seed",
    "n_list",
    "sampler",
    "samples",
    "delta",
    "bowen_n",
    "resolution",
    "cover",
    "tolerance",
    "lyapunov_n",
    "point",
    "dims",
    "n_fwd",
    "n_bwd",
    "alpha",
    "iterate",
    "domination_split",
    "domination_samples",
    "gap_n",
    "point_samples",
    "frame_samples",
    "bundle",
    "ball_n",
    "mc_count",
    "ball_bundle",
    "center",
    "centers",
    "ball_tolerance",
];
const OUTPUT_KEYS: &[&str] = &["dir", "formats"];

struct Parser {
    entries: HashMap<(String, String), Vec<Entry>>,
    issues: Vec<ConfigIssue>,
}

impl Parser {
    fn issue(&mut self, line: Option<usize>, key: &str, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            line,
            key: key.into(),
            message: message.into(),
        });
    }

    fn take(&mut self, section: &str, key: &str) -> Option<Entry> {
        self.entries
            .remove(&(section.into(), key.into()))
            .and_then(|mut v| v.pop())
    }

    fn take_all(&mut self, section: &str, key: &str) -> Vec<Entry> {
        self.entries
            .remove(&(section.into(), key.into()))
            .unwrap_or_default()
    }

    fn value<T>(
        &mut self,
        lines: &mut KeyLines,
        section: &str,
        key: &str,
        parse: impl Fn(&str) -> std::result::Result<T, String>,
    ) -> Option<T> {
        let e = self.take(section, key)?;
        lines.0.insert(key.into(), e.line);
        match parse(&e.value) {
            Ok(v) => Some(v),
            Err(m) => {
                self.issue(Some(e.line), key, m);
                None
            }
        }
    }
}

fn parse_usize(s: &str) -> std::result::Result<usize, String> {
    s.parse()
        .map_err(|_| format!("expected a non-negative integer, got '{s}'"))
}

fn parse_u64(s: &str) -> std::result::Result<u64, String> {
    s.parse()
        .map_err(|_| format!("expected a non-negative integer, got '{s}'"))
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("expected a finite real number, got '{s}'")),
    }
}

fn split_list(s: &str) -> Vec<&str> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .collect()
}

fn parse_usize_list(s: &str) -> std::result::Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for item in split_list(s) {
        if let Some((a, b)) = item.split_once("..") {
            let (a, b) = (parse_usize(a.trim())?, parse_usize(b.trim())?);
            if a > b {
                return Err(format!("empty range '{item}'"));
            }
            out.extend(a..=b);
        } else {
            out.push(parse_usize(item)?);
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

fn parse_f64_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    let v = split_list(s)
        .into_iter()
        .map(parse_f64)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if v.is_empty() {
        return Err("empty list".into());
    }
    Ok(v)
}

fn parse_row(s: &str) -> std::result::Result<Vec<i64>, String> {
    split_list(s)
        .into_iter()
        .map(|t| {
            t.parse::<i64>()
                .map_err(|_| format!("expected an integer matrix entry, got '{t}'"))
        })
        .collect()
}

fn parse_point(s: &str) -> std::result::Result<TorusPoint, String> {
    TorusPoint::new(&parse_f64_list(s)?).map_err(|e| e.to_string())
}

/// Parses and validates a config. Every problem found is reported, not just
/// the first.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut p = Parser {
        entries: HashMap::new(),
        issues: Vec::new(),
    };
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            let name = name.trim();
            if !["system", "run", "output"].contains(&name) {
                p.issue(
                    Some(line),
                    name,
                    "unknown section (expected system, run or output)",
                );
            }
            section = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = t.split_once('=') else {
            p.issue(Some(line), t, "expected 'key = value' or '[section]'");
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        let Some(sec) = section.clone() else {
            p.issue(Some(line), key, "key outside of any section");
            continue;
        };
        let known = match sec.as_str() {
            "system" => SYSTEM_KEYS,
            "run" => RUN_KEYS,
            "output" => OUTPUT_KEYS,
            _ => continue,
        };
        if !known.contains(&key) {
            p.issue(Some(line), key, format!("unknown key in [{sec}]"));
            continue;
        }
        let slot = p.entries.entry((sec.clone(), key.to_string())).or_default();
        if key != "row" {
            if let Some(prev) = slot.first() {
                let prev = prev.line;
                p.issue(
                    Some(line),
                    key,
                    format!("duplicate key (first set on line {prev})"),
                );
                continue;
            }
        }
        slot.push(Entry {
            line,
            value: value.to_string(),
        });
    }

    let mut lines = KeyLines::default();
    let system = build_system(&mut p, &mut lines);
    let dim = system.as_ref().map_or(2, |s| s.dimension());
    let mut params = RunParams::defaults(dim);

    let command = p.value(&mut lines, "run", "command", |s| {
        Command::parse(s).ok_or_else(|| format!("unknown command '{s}'"))
    });
    let seed = p.value(&mut lines, "run", "seed", parse_u64).unwrap_or(0);

    macro_rules! set {
        ($field:ident, $parse:expr) => {
            if let Some(v) = p.value(&mut lines, "run", stringify!($field), $parse) {
                params.$field = v;
            }
        };
    }
    set!(n_list, parse_usize_list);
    set!(sampler, |s| SamplerMode::parse(s)
        .ok_or_else(|| format!("unknown sampler '{s}'")));
    set!(samples, parse_usize);
    set!(delta, parse_f64);
    set!(bowen_n, parse_usize);
    set!(resolution, parse_usize);
    set!(cover, |s| CoverMethod::parse(s)
        .ok_or_else(|| format!("unknown cover method '{s}'")));
    set!(tolerance, parse_f64);
    set!(lyapunov_n, parse_usize);
    set!(point, |s| parse_point(s).map(Some));
    set!(dims, |s| parse_usize_list(s).map(Some));
    set!(n_fwd, parse_usize);
    set!(n_bwd, parse_usize);
    set!(alpha, parse_f64);
    set!(iterate, parse_usize);
    set!(domination_split, parse_usize);
    set!(domination_samples, parse_usize);
    set!(gap_n, parse_usize);
    set!(point_samples, parse_usize);
    set!(frame_samples, parse_usize);
    set!(bundle, parse_usize);
    set!(ball_n, parse_usize_list);
    set!(mc_count, parse_usize);
    set!(ball_bundle, |s| BundleChoice::parse(s)
        .ok_or_else(|| format!("unknown bundle choice '{s}'")));
    set!(center, |s| parse_point(s).map(Some));
    set!(centers, parse_usize);
    set!(ball_tolerance, parse_f64);

    let mut output = OutputSpec::default();
    if let Some(dir) = p.value(&mut lines, "output", "dir", |s| {
        if s.is_empty() {
            Err("empty path".to_string())
        } else {
            Ok(s.to_string())
        }
    }) {
        output.dir = dir;
    }
    if let Some(f) = p.value(&mut lines, "output", "formats", |s| {
        let mut out = vec![Format::Json];
        for t in split_list(s) {
            match t {
                "json" => {}
                "csv" if !out.contains(&Format::Csv) => out.push(Format::Csv),
                "csv" => {}
                _ => return Err(format!("unknown format '{t}' (expected json or csv)")),
            }
        }
        Ok(out)
    }) {
        output.formats = f;
    }

    let mut issues = p.issues;
    issues.extend(check_params(
        &params,
        system.as_ref().map(|s| s.dimension()),
        &lines,
    ));
    let result = match system {
        Some(system) => {
            let cfg = ExperimentConfig {
                system,
                command,
                seed,
                params,
                output,
                lines,
            };
            if let Some(c) = cfg.command {
                issues.extend(cfg.check_command(c));
            }
            Some(cfg)
        }
        None => None,
    };
    match result {
        Some(cfg) if issues.is_empty() => Ok(cfg),
        _ => {
            issues.sort_by_key(|i| i.line.unwrap_or(0));
            Err(ConfigError { issues })
        }
    }
}

fn build_system(p: &mut Parser, lines: &mut KeyLines) -> Option<SystemSpec> {
    let kind_entry = p.take("system", "kind");
    let rows = p.take_all("system", "row");
    let dimension = p.value(lines, "system", "dimension", parse_usize);
    let epsilon_entry = p.take("system", "epsilon");
    let exact = p.value(lines, "system", "exact_entropy", parse_f64);
    let note = p.value(lines, "system", "exact_note", |s| Ok(s.to_string()));
    let Some(kind_entry) = kind_entry else {
        p.issue(None, "kind", "missing required key in [system]");
        return None;
    };
    let line = kind_entry.line;
    let Some(kind) = SystemKind::parse(&kind_entry.value) else {
        p.issue(
            Some(line),
            "kind",
            format!("unknown system kind '{}'", kind_entry.value),
        );
        return None;
    };
    let mut ok = true;
    let mut matrix = Vec::new();
    for r in &rows {
        match parse_row(&r.value) {
            Ok(v) => matrix.push(v),
            Err(m) => {
                p.issue(Some(r.line), "row", m);
                ok = false;
            }
        }
    }
    let row_line = rows.first().map(|r| r.line);
    let epsilon = match &epsilon_entry {
        None => 0.0,
        Some(e) if kind == SystemKind::LinearToral => {
            p.issue(Some(e.line), "epsilon", "linear_toral takes no epsilon");
            ok = false;
            0.0
        }
        Some(e) => match parse_f64(&e.value) {
            Ok(v) => v,
            Err(m) => {
                p.issue(Some(e.line), "epsilon", m);
                ok = false;
                0.0
            }
        },
    };
    if matrix.is_empty() {
        if kind == SystemKind::LinearToral {
            if ok {
                p.issue(
                    Some(line),
                    "row",
                    "linear_toral needs its matrix as 'row' lines",
                );
            }
            return None;
        }
        matrix = vec![vec![2, 1], vec![1, 1]];
    }
    let dim = match kind {
        SystemKind::LinearToral => matrix.len(),
        SystemKind::SkewProduct => 3,
        SystemKind::PerturbedCat => 2,
    };
    if let Some(d) = dimension {
        if d != dim {
            p.issue(
                lines.0.get("dimension").copied(),
                "dimension",
                format!("dimension {d} does not match the system (expected {dim})"),
            );
            ok = false;
        }
    }
    if exact.is_some() != note.is_some() {
        p.issue(
            lines
                .0
                .get("exact_entropy")
                .or(lines.0.get("exact_note"))
                .copied(),
            "exact_entropy",
            "exact_entropy and exact_note must be given together",
        );
        ok = false;
    }
    if !ok {
        return None;
    }
    match SystemSpec::new(kind, dim, matrix, epsilon) {
        Ok(s) => {
            lines.0.insert("kind".into(), line);
            match (exact, note) {
                (Some(value), Some(note)) => {
                    Some(s.with_exact_entropy(Some(ExactEntropy { value, note })))
                }
                _ => Some(s),
            }
        }
        Err(e) => {
            let (key, at) =
                if e.to_string().contains("epsilon") || e.to_string().contains("determinant") {
                    (
                        "epsilon",
                        epsilon_entry.as_ref().map(|e| e.line).or(Some(line)),
                    )
                } else {
                    ("row", row_line.or(Some(line)))
                };
            p.issue(at, key, e.to_string());
            None
        }
    }
}

fn strictly_increasing(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl ExperimentConfig {
    /// Defaults for `system`, no command.
    pub fn new(system: SystemSpec) -> Self {
        let dim = system.dimension();
        ExperimentConfig {
            system,
            command: None,
            seed: 0,
            params: RunParams::defaults(dim),
            output: OutputSpec::default(),
            lines: KeyLines::default(),
        }
    }

    fn issue(&self, key: &str, message: impl Into<String>) -> ConfigIssue {
        self.lines.issue(key, message)
    }

    /// Splitting block sizes: explicit or the system default.
    pub fn dims(&self) -> Option<Vec<usize>> {
        self.params
            .dims
            .clone()
            .or_else(|| self.system.default_dims())
    }
}

impl KeyLines {
    fn issue(&self, key: &str, message: impl Into<String>) -> ConfigIssue {
        ConfigIssue {
            line: self.0.get(key).copied(),
            key: key.into(),
            message: message.into(),
        }
    }
}

/// Constraints on individual parameters, whatever the command. Dimension
/// checks are skipped when the system itself is invalid.
fn check_params(r: &RunParams, dim: Option<usize>, lines: &KeyLines) -> Vec<ConfigIssue> {
    let mut out = Vec::new();
    if !(r.delta > 0.0 && r.delta < 0.5) {
        out.push(lines.issue(
            "delta",
            format!("delta = {} violates 0 < delta < 0.5", r.delta),
        ));
    }
    if r.n_list.len() < 3 || !strictly_increasing(&r.n_list) || r.n_list[0] == 0 {
        out.push(lines.issue(
            "n_list",
            "n_list needs at least 3 strictly increasing entries >= 1",
        ));
    }
    if r.ball_n.is_empty() || !strictly_increasing(&r.ball_n) || r.ball_n[0] == 0 {
        out.push(lines.issue("ball_n", "ball_n needs strictly increasing entries >= 1"));
    }
    for (key, v) in [
        ("samples", r.samples),
        ("bowen_n", r.bowen_n),
        ("lyapunov_n", r.lyapunov_n),
        ("n_fwd", r.n_fwd),
        ("n_bwd", r.n_bwd),
        ("domination_samples", r.domination_samples),
        ("gap_n", r.gap_n),
        ("point_samples", r.point_samples),
        ("frame_samples", r.frame_samples),
        ("centers", r.centers),
    ] {
        if v == 0 {
            out.push(lines.issue(key, format!("{key} must be >= 1")));
        }
    }
    if r.iterate == 0 || r.iterate > MAX_DOMINATION_ITERATE {
        out.push(lines.issue(
            "iterate",
            format!("iterate must lie in 1..={MAX_DOMINATION_ITERATE}"),
        ));
    }
    if r.mc_count < MIN_MC_COUNT {
        out.push(lines.issue("mc_count", format!("mc_count must be >= {MIN_MC_COUNT}")));
    }
    for (key, v) in [
        ("tolerance", r.tolerance),
        ("alpha", r.alpha),
        ("ball_tolerance", r.ball_tolerance),
    ] {
        if !(v > 0.0) {
            out.push(lines.issue(key, format!("{key} must be > 0")));
        }
    }
    for (key, p) in [("point", &r.point), ("center", &r.center)] {
        if let (Some(p), Some(d)) = (p, dim) {
            if p.dim() != d {
                out.push(lines.issue(
                    key,
                    format!("{key} has {} coordinates, system dimension is {d}", p.dim()),
                ));
            }
        }
    }
    if let (Some(dims), Some(d)) = (&r.dims, dim) {
        if dims.len() < 2
            || dims.iter().sum::<usize>() != d
            || dims[1..dims.len() - 1].iter().any(|&c| c != 1)
        {
            out.push(lines.issue(
                "dims",
                format!("dims must read s, 1, ..., 1, u with sum {d} (got {dims:?})"),
            ));
        }
    }
    out
}

impl ExperimentConfig {
    /// Constraints that depend on what the command will compute.
    pub fn check_command(&self, command: Command) -> Vec<ConfigIssue> {
        let r = &self.params;
        let d = self.system.dimension();
        let mut out = Vec::new();
        if let Some(c) = self.command {
            if c != command {
                out.push(self.issue(
                    "command",
                    format!("config is for '{c}' but '{command}' was requested"),
                ));
            }
        }
        let uses_volume = matches!(command, Command::EntropyVolume | Command::Compare);
        let uses_cover = matches!(command, Command::EntropyBowen | Command::Compare);
        let uses_split = matches!(command, Command::Domination | Command::GrassmannCheck)
            || (command == Command::BallGrowth && r.ball_bundle != BundleChoice::MaxOverV);
        if uses_volume {
            if let Err(e) = r.sampler_spec(self.seed).validate(d) {
                out.push(self.issue("samples", e.to_string()));
            }
        }
        if uses_cover {
            if (r.resolution as f64) * r.delta < MIN_POINTS_PER_DELTA {
                out.push(self.issue(
                    "resolution",
                    format!(
                        "grid too coarse: resolution * delta must be >= {MIN_POINTS_PER_DELTA}"
                    ),
                ));
            }
            if (r.resolution as u128)
                .checked_pow(d as u32)
                .is_none_or(|t| t > MAX_COVER_GRID as u128)
            {
                out.push(self.issue(
                    "resolution",
                    format!("resolution^{d} exceeds the grid budget {MAX_COVER_GRID}"),
                ));
            }
        }
        if uses_split {
            match self.dims() {
                None => {
                    out.push(self.issue("dims", "no default splitting for this system; set dims"))
                }
                Some(dims) => {
                    let blocks = dims.len();
                    if command == Command::Domination && !(1..blocks).contains(&r.domination_split)
                    {
                        out.push(self.issue(
                            "domination_split",
                            format!("domination_split must lie in 1..{blocks}"),
                        ));
                    }
                    let centers = blocks.saturating_sub(2);
                    if command == Command::GrassmannCheck && r.bundle > centers {
                        out.push(self.issue("bundle", format!("bundle must be <= {centers}")));
                    }
                    if let BundleChoice::FixedF(i) = r.ball_bundle {
                        if command == Command::BallGrowth && i > centers {
                            out.push(self.issue(
                                "ball_bundle",
                                format!("fixed_f index must be <= {centers}"),
                            ));
                        }
                    }
                }
            }
        }
        out
    }

    /// Canonical text form; [`parse_config`] reads it back to an equal
    /// config.
    pub fn to_config_text(&self) -> String {
        let s = &self.system;
        let r = &self.params;
        let list = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        let reals = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut t = String::new();
        let _ = writeln!(t, "[system]");
        let _ = writeln!(t, "kind = {}", s.kind().as_str());
        let _ = writeln!(t, "dimension = {}", s.dimension());
        for row in s.matrix() {
            let _ = writeln!(
                t,
                "row = {}",
                row.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            );
        }
        if s.kind() != SystemKind::LinearToral {
            let _ = writeln!(t, "epsilon = {}", s.epsilon());
        }
        if let Some(e) = s.exact_entropy() {
            let _ = writeln!(t, "exact_entropy = {}", e.value);
            let _ = writeln!(t, "exact_note = {}", e.note);
        }
        let _ = writeln!(t, "\n[run]");
        if let Some(c) = self.command {
            let _ = writeln!(t, "command = {c}");
        }
        let _ = writeln!(t, "seed = {}", self.seed);
        let _ = writeln!(t, "n_list = {}", list(&r.n_list));
        let _ = writeln!(t, "sampler = {}", r.sampler.as_str());
        let _ = writeln!(t, "samples = {}", r.samples);
        let _ = writeln!(t, "delta = {}", r.delta);
        let _ = writeln!(t, "bowen_n = {}", r.bowen_n);
        let _ = writeln!(t, "resolution = {}", r.resolution);
        let _ = writeln!(t, "cover = {}", r.cover.as_str());
        let _ = writeln!(t, "tolerance = {}", r.tolerance);
        let _ = writeln!(t, "lyapunov_n = {}", r.lyapunov_n);
        if let Some(p) = &r.point {
            let _ = writeln!(t, "point = {}", reals(p.coords()));
        }
        if let Some(d) = &r.dims {
            let _ = writeln!(t, "dims = {}", list(d));
        }
        let _ = writeln!(t, "n_fwd = {}", r.n_fwd);
        let _ = writeln!(t, "n_bwd = {}", r.n_bwd);
        let _ = writeln!(t, "alpha = {}", r.alpha);
        let _ = writeln!(t, "iterate = {}", r.iterate);
        let _ = writeln!(t, "domination_split = {}", r.domination_split);
        let _ = writeln!(t, "domination_samples = {}", r.domination_samples);
        let _ = writeln!(t, "gap_n = {}", r.gap_n);
        let _ = writeln!(t, "point_samples = {}", r.point_samples);
        let _ = writeln!(t, "frame_samples = {}", r.frame_samples);
        let _ = writeln!(t, "bundle = {}", r.bundle);
        let _ = writeln!(t, "ball_n = {}", list(&r.ball_n));
        let _ = writeln!(t, "mc_count = {}", r.mc_count);
        let _ = writeln!(t, "ball_bundle = {}", r.ball_bundle.label());
        if let Some(c) = &r.center {
            let _ = writeln!(t, "center = {}", reals(c.coords()));
        }
        let _ = writeln!(t, "centers = {}", r.centers);
        let _ = writeln!(t, "ball_tolerance = {}", r.ball_tolerance);
        let _ = writeln!(t, "\n[output]");
        let _ = writeln!(t, "dir = {}", self.output.dir);
        let formats: Vec<&str> = self
            .output
            .formats
            .iter()
            .map(|f| match f {
                Format::Json => "json",
                Format::Csv => "csv",
            })
            .collect();
        let _ = writeln!(t, "formats = {}", formats.join(", "));
        t
    }
}
