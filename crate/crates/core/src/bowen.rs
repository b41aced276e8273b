//! Spanning-set entropy and dynamical-ball volume growth.
//!
//! Covers are built greedily over a midpoint grid scanned in lexicographic
//! order, so a cover is a pure function of `(system, n, δ, resolution)`.
//! Candidate orbits are computed in parallel chunks; the accept/reject scan
//! itself is sequential.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::cocycle::{CocycleAccumulator, FramePusher};
use crate::error::{Error, Result};
use crate::linalg::MAX_DIM;
use crate::rng::{stream_rng, Stream};
use crate::splitting::{estimate_splitting, SplittingOptions};
use crate::system::{circle_distance, torus_distance, SystemSpec, TorusPoint};
use crate::volume::{grid_midpoint, log_mean_exp, max_subspace_log_det};

const MODULE: &str = "bowen-entropy";

/// Largest grid a cover may scan. Memory is about `(4 + 8d)` bytes per
/// center plus the bucket index.
pub const MAX_COVER_GRID: usize = 1 << 22;
/// Grid points required per `δ`.
pub const MIN_POINTS_PER_DELTA: f64 = 10.0;
pub const MIN_MC_COUNT: usize = 100;
/// Entries with fewer accepted samples are flagged unreliable.
pub const RELIABLE_ACCEPTED: usize = 10;

const CHUNK: usize = 8192;

/// Default `δ`: 0.05 in dimension ≤ 2, 0.08 above.
pub fn default_delta(dim: usize) -> f64 {
    if dim <= 2 {
        0.05
    } else {
        0.08
    }
}

fn check_delta(delta: f64, op: &'static str) -> Result<()> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::argument(
            MODULE,
            op,
            format!("delta = {delta} must satisfy 0 < delta < 0.5"),
        ));
    }
    Ok(())
}

/// `B(center, n, δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DynamicalBallQuery {
    pub center: TorusPoint,
    pub n: usize,
    pub delta: f64,
}

impl DynamicalBallQuery {
    pub fn new(center: TorusPoint, n: usize, delta: f64) -> Result<Self> {
        check_delta(delta, "in_dynamical_ball")?;
        if n == 0 {
            return Err(Error::argument(
                MODULE,
                "in_dynamical_ball",
                "n must be >= 1",
            ));
        }
        Ok(DynamicalBallQuery { center, n, delta })
    }
}

/// Whether `d(f^i x, f^i y) ≤ δ` for `0 ≤ i < n`. Stops at the first
/// violation.
pub fn in_dynamical_ball(
    system: &SystemSpec,
    q: &DynamicalBallQuery,
    y: &TorusPoint,
) -> Result<bool> {
    if q.center.dim() != system.dimension() || y.dim() != system.dimension() {
        return Err(Error::argument(
            MODULE,
            "in_dynamical_ball",
            format!("points must have dimension {}", system.dimension()),
        ));
    }
    Ok(exit_time(system, &q.center, y, q.n, q.delta) >= q.n)
}

/// First `i < limit` with `d(f^i x, f^i y) > δ`, or `limit`.
fn exit_time(
    system: &SystemSpec,
    x: &TorusPoint,
    y: &TorusPoint,
    limit: usize,
    delta: f64,
) -> usize {
    let mut a = *x;
    let mut b = *y;
    for i in 0..limit {
        if torus_distance(&a, &b) > delta {
            return i;
        }
        if i + 1 < limit {
            a = system.evaluate_unchecked(&a);
            b = system.evaluate_unchecked(&b);
        }
    }
    limit
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverMethod {
    Spanning,
    Separated,
}

impl CoverMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            CoverMethod::Spanning => "spanning",
            CoverMethod::Separated => "separated",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "spanning" => Some(CoverMethod::Spanning),
            "separated" => Some(CoverMethod::Separated),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyEstimate {
    /// `log(cover_size) / n`.
    pub value: f64,
    pub n: usize,
    pub delta: f64,
    pub cover_size: usize,
    pub method: CoverMethod,
    pub resolution: usize,
}

fn validate_cover(
    system: &SystemSpec,
    n: usize,
    delta: f64,
    resolution: usize,
    op: &'static str,
) -> Result<usize> {
    check_delta(delta, op)?;
    if n == 0 {
        return Err(Error::argument(MODULE, op, "n must be >= 1"));
    }
    if (resolution as f64) * delta < MIN_POINTS_PER_DELTA {
        return Err(Error::argument(
            MODULE,
            op,
            format!(
                "grid too coarse: resolution {resolution} gives {:.2} points per delta, need {MIN_POINTS_PER_DELTA}",
                resolution as f64 * delta
            ),
        ));
    }
    let d = system.dimension();
    let total = (resolution as u128)
        .checked_pow(d as u32)
        .unwrap_or(u128::MAX);
    if total > MAX_COVER_GRID as u128 {
        return Err(Error::argument(
            MODULE,
            op,
            format!("resolution^{d} = {total} exceeds the grid budget {MAX_COVER_GRID}"),
        ));
    }
    Ok(total as usize)
}

/// Bucket index keyed on the cells of the first and last orbit points.
/// Cells have width `1/m ≥ δ`, so anything within `δ` sits in an adjacent
/// cell.
struct CellIndex {
    m: u64,
    dim: usize,
    buckets: Buckets,
    offsets: Vec<[i64; 2 * MAX_DIM]>,
    dedup: bool,
}

/// Center ids with their last orbit points stored inline, so the cheap
/// end-point test stays in one cache line run.
#[derive(Clone, Default)]
struct Bucket {
    ids: Vec<u32>,
    last: Vec<f64>,
}

enum Buckets {
    Flat(Vec<Bucket>),
    Sparse(HashMap<u64, Bucket>),
}

const MAX_FLAT_BUCKETS: u64 = 1 << 22;

impl CellIndex {
    fn new(delta: f64, dim: usize) -> Self {
        let m = ((1.0 / delta).floor() as u64).max(1);
        let coords = 2 * dim;
        let mut offsets = Vec::new();
        for code in 0..3usize.pow(coords as u32) {
            let mut c = code;
            let mut off = [0i64; 2 * MAX_DIM];
            for o in off.iter_mut().take(coords) {
                *o = (c % 3) as i64 - 1;
                c /= 3;
            }
            offsets.push(off);
        }
        let count = m.checked_pow(coords as u32).unwrap_or(u64::MAX);
        let buckets = if count <= MAX_FLAT_BUCKETS {
            Buckets::Flat(vec![Bucket::default(); count as usize])
        } else {
            Buckets::Sparse(HashMap::new())
        };
        CellIndex {
            m,
            dim,
            buckets,
            offsets,
            // with fewer than 3 cells per axis the offsets wrap onto each other
            dedup: m < 3,
        }
    }

    fn cells(&self, first: &TorusPoint, last: &TorusPoint) -> [i64; 2 * MAX_DIM] {
        let mut out = [0i64; 2 * MAX_DIM];
        for (k, c) in first.coords().iter().chain(last.coords()).enumerate() {
            out[k] = ((c * self.m as f64) as i64).min(self.m as i64 - 1);
        }
        out
    }

    fn key(&self, cells: &[i64]) -> u64 {
        let m = self.m as i64;
        cells
            .iter()
            .fold(0u64, |acc, &c| acc * self.m + c.rem_euclid(m) as u64)
    }

    fn bucket(&self, key: u64) -> Option<&Bucket> {
        match &self.buckets {
            Buckets::Flat(v) => Some(&v[key as usize]),
            Buckets::Sparse(h) => h.get(&key),
        }
    }

    fn insert(&mut self, first: &TorusPoint, last: &TorusPoint, id: u32) {
        let cells = self.cells(first, last);
        let key = self.key(&cells[..2 * self.dim]);
        let b = match &mut self.buckets {
            Buckets::Flat(v) => &mut v[key as usize],
            Buckets::Sparse(h) => h.entry(key).or_default(),
        };
        b.ids.push(id);
        b.last.extend_from_slice(last.coords());
    }

    /// Calls `hit` on every center in a neighbouring bucket whose last
    /// orbit point is within `δ` of `last`, until it returns true.
    fn any_neighbor(
        &self,
        first: &TorusPoint,
        last: &TorusPoint,
        delta: f64,
        mut hit: impl FnMut(u32) -> bool,
    ) -> bool {
        let d = self.dim;
        let lc = last.coords();
        let cells = self.cells(first, last);
        let coords = 2 * self.dim;
        let mut seen: Vec<u64> = Vec::new();
        for off in &self.offsets {
            let mut c = [0i64; 2 * MAX_DIM];
            for k in 0..coords {
                c[k] = cells[k] + off[k];
            }
            let key = self.key(&c[..coords]);
            if self.dedup {
                if seen.contains(&key) {
                    continue;
                }
                seen.push(key);
            }
            let Some(b) = self.bucket(key) else { continue };
            for (k, &id) in b.ids.iter().enumerate() {
                let near = b.last[k * d..(k + 1) * d]
                    .iter()
                    .zip(lc)
                    .all(|(x, y)| circle_distance(*x, *y) <= delta);
                if near && hit(id) {
                    return true;
                }
            }
        }
        false
    }
}

fn within(a: &TorusPoint, b: &TorusPoint, delta: f64) -> bool {
    a.coords()
        .iter()
        .zip(b.coords())
        .all(|(x, y)| circle_distance(*x, *y) <= delta)
}

/// Greedy cover of the `resolution^d` midpoint grid: a grid point becomes a
/// center when no earlier center's `(n, δ)`-ball contains it. Returns the
/// center grid indices in scan order.
fn greedy_cover(
    system: &SystemSpec,
    n: usize,
    delta: f64,
    resolution: usize,
    total: usize,
) -> Vec<u32> {
    let d = system.dimension();
    let mut index = CellIndex::new(delta, d);
    let mut centers: Vec<u32> = Vec::new();
    let mut start = 0;
    while start < total {
        let end = (start + CHUNK).min(total);
        let orbits: Vec<Vec<TorusPoint>> = (start..end)
            .into_par_iter()
            .map(|g| {
                let mut orbit = Vec::with_capacity(n);
                let mut p = grid_midpoint(g, resolution, d);
                for i in 0..n {
                    orbit.push(p);
                    if i + 1 < n {
                        p = system.evaluate_unchecked(&p);
                    }
                }
                orbit
            })
            .collect();
        for (off, orbit) in orbits.iter().enumerate() {
            let first = &orbit[0];
            let last = &orbit[n - 1];
            let covered = index.any_neighbor(first, last, delta, |id| {
                let q = grid_midpoint(centers[id as usize] as usize, resolution, d);
                within(&q, first, delta) && follows(system, &q, orbit, delta)
            });
            if !covered {
                let id = centers.len() as u32;
                centers.push((start + off) as u32);
                index.insert(first, last, id);
            }
        }
        start = end;
    }
    centers
}

/// Whether the orbit of `q` stays within `δ` of `orbit` at every step.
fn follows(system: &SystemSpec, q: &TorusPoint, orbit: &[TorusPoint], delta: f64) -> bool {
    let mut p = *q;
    for (i, o) in orbit.iter().enumerate() {
        if !within(&p, o, delta) {
            return false;
        }
        if i + 1 < orbit.len() {
            p = system.evaluate_unchecked(&p);
        }
    }
    true
}

fn cover_estimate(
    system: &SystemSpec,
    n: usize,
    delta: f64,
    resolution: usize,
    method: CoverMethod,
    op: &'static str,
) -> Result<EntropyEstimate> {
    let total = validate_cover(system, n, delta, resolution, op)?;
    let size = greedy_cover(system, n, delta, resolution, total).len();
    Ok(EntropyEstimate {
        value: (size as f64).ln() / n as f64,
        n,
        delta,
        cover_size: size,
        method,
        resolution,
    })
}

/// `(1/n) log` of a greedy `(n, δ)`-spanning set of the grid.
pub fn spanning_entropy(
    system: &SystemSpec,
    n: usize,
    delta: f64,
    resolution: usize,
) -> Result<EntropyEstimate> {
    cover_estimate(
        system,
        n,
        delta,
        resolution,
        CoverMethod::Spanning,
        "spanning_entropy",
    )
}

/// `(1/n) log` of a greedy maximal `(n, δ)`-separated subset of the grid.
///
/// A point joins the set when it lies outside every chosen point's ball,
/// which is the same scan as the spanning cover: a maximal separated set
/// spans.
pub fn separated_entropy(
    system: &SystemSpec,
    n: usize,
    delta: f64,
    resolution: usize,
) -> Result<EntropyEstimate> {
    cover_estimate(
        system,
        n,
        delta,
        resolution,
        CoverMethod::Separated,
        "separated_entropy",
    )
}

/// Center grid indices of the greedy cover, for diagnostics.
pub fn cover_centers(
    system: &SystemSpec,
    n: usize,
    delta: f64,
    resolution: usize,
) -> Result<Vec<TorusPoint>> {
    let total = validate_cover(system, n, delta, resolution, "spanning_entropy")?;
    let d = system.dimension();
    Ok(greedy_cover(system, n, delta, resolution, total)
        .into_iter()
        .map(|g| grid_midpoint(g as usize, resolution, d))
        .collect())
}

/// Integrand of the dynamical-ball integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum BundleChoice {
    /// `max_V |det Df^n|_V|`.
    MaxOverV,
    /// `max_i |det Df^n|_{F^i}|`.
    MaxOverF,
    /// `|det Df^n|_{F^i}|`.
    FixedF(usize),
}

impl BundleChoice {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "max_over_v" => Some(BundleChoice::MaxOverV),
            "max_over_f" => Some(BundleChoice::MaxOverF),
            _ => s
                .strip_prefix("fixed_f:")?
                .parse()
                .ok()
                .map(BundleChoice::FixedF),
        }
    }

    pub fn label(&self) -> String {
        match self {
            BundleChoice::MaxOverV => "max_over_v".into(),
            BundleChoice::MaxOverF => "max_over_f".into(),
            BundleChoice::FixedF(i) => format!("fixed_f:{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallGrowthReport {
    pub center: TorusPoint,
    pub n_values: Vec<usize>,
    /// `log ∫_{B(x,n,δ)} integrand`; `-inf` when no sample was accepted.
    pub log_integrals: Vec<f64>,
    pub normalized_log_integrals: Vec<f64>,
    pub delta: f64,
    /// Per `n`.
    pub accepted_fraction: Vec<f64>,
    pub accepted: Vec<usize>,
    /// Fewer than [`RELIABLE_ACCEPTED`] samples accepted.
    pub unreliable: Vec<bool>,
    pub bundle: BundleChoice,
    pub mc_count: usize,
    pub seed: u64,
}

/// Integrand logs at each `n` in `ns` (ascending) up to `n < limit`.
fn ball_integrand(
    system: &SystemSpec,
    y: &TorusPoint,
    ns: &[usize],
    limit: usize,
    bundle: BundleChoice,
    opts: Option<&SplittingOptions>,
) -> Result<Vec<f64>> {
    let wanted: Vec<usize> = ns.iter().copied().take_while(|&n| n <= limit).collect();
    let mut out = Vec::with_capacity(wanted.len());
    if wanted.is_empty() {
        return Ok(out);
    }
    let mut p = *y;
    match bundle {
        BundleChoice::MaxOverV => {
            let mut acc = CocycleAccumulator::new(*y, 1);
            for &n in &wanted {
                while acc.steps() < n {
                    acc.push(&system.jacobian_unchecked(&p))?;
                    p = system.evaluate_unchecked(&p);
                }
                out.push(max_subspace_log_det(acc.current_log_singular()?)?);
            }
        }
        BundleChoice::MaxOverF | BundleChoice::FixedF(_) => {
            let opts = opts.expect("splitting options");
            let split = estimate_splitting(system, y, opts)?;
            let range: Vec<usize> = match bundle {
                BundleChoice::FixedF(i) => vec![i],
                _ => (0..=split.center_count()).collect(),
            };
            let mut pushers = range
                .iter()
                .map(|&i| FramePusher::new(&split.bundle_f(i)?))
                .collect::<Result<Vec<_>>>()?;
            let mut steps = 0;
            for &n in &wanted {
                while steps < n {
                    let jac = system.jacobian_unchecked(&p);
                    for pu in pushers.iter_mut() {
                        pu.push(&jac)?;
                    }
                    p = system.evaluate_unchecked(&p);
                    steps += 1;
                }
                out.push(
                    pushers
                        .iter()
                        .map(|pu| pu.log_volume())
                        .fold(f64::NEG_INFINITY, f64::max),
                );
            }
        }
    }
    Ok(out)
}

/// Monte-Carlo estimate of `∫_{B(x,n,δ)} integrand dy` for each `n`.
///
/// Samples are uniform in the `L∞` ball `B(x, δ)` of volume `(2δ)^d`;
/// a sample counts toward `n` when its orbit stays within `δ` of `x`'s for
/// `n` steps.
#[allow(clippy::too_many_arguments)]
pub fn ball_volume_growth(
    system: &SystemSpec,
    x: &TorusPoint,
    n_values: &[usize],
    delta: f64,
    bundle: BundleChoice,
    opts: Option<&SplittingOptions>,
    mc_count: usize,
    seed: u64,
) -> Result<BallGrowthReport> {
    let op = "ball_volume_growth";
    check_delta(delta, op)?;
    let d = system.dimension();
    if x.dim() != d {
        return Err(Error::argument(
            MODULE,
            op,
            format!("center must have dimension {d}"),
        ));
    }
    if mc_count < MIN_MC_COUNT {
        return Err(Error::argument(
            MODULE,
            op,
            format!("mc_count = {mc_count} must be >= {MIN_MC_COUNT}"),
        ));
    }
    if n_values.is_empty() || n_values[0] == 0 || n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::argument(
            MODULE,
            op,
            "n_values must be non-empty, >= 1 and strictly increasing",
        ));
    }
    let default_opts;
    let opts = match (bundle, opts) {
        (BundleChoice::MaxOverV, _) => None,
        (_, Some(o)) => Some(o),
        (_, None) => {
            default_opts = SplittingOptions::for_system(system).ok_or_else(|| {
                Error::argument(
                    MODULE,
                    op,
                    "bundle choice needs splitting dims for this system",
                )
            })?;
            Some(&default_opts)
        }
    };
    let n_max = *n_values.last().unwrap();
    let per_sample: Vec<Vec<f64>> = (0..mc_count)
        .into_par_iter()
        .map(|j| {
            use rand::Rng;
            let mut rng = stream_rng(seed, Stream::BallSamples, j as u64);
            let step: Vec<f64> = (0..d)
                .map(|_| delta * (2.0 * rng.random::<f64>() - 1.0))
                .collect();
            let y = x.offset(&step);
            let stay = exit_time(system, x, &y, n_max, delta);
            ball_integrand(system, &y, n_values, stay, bundle, opts).map_err(|e| e.with_index(j))
        })
        .collect::<Result<_>>()?;
    let log_volume = d as f64 * (2.0 * delta).ln();
    let mut log_integrals = Vec::with_capacity(n_values.len());
    let mut accepted = Vec::with_capacity(n_values.len());
    for (k, _) in n_values.iter().enumerate() {
        let vals: Vec<f64> = per_sample
            .iter()
            .filter_map(|s| s.get(k).copied())
            .collect();
        let (lme, _) = log_mean_exp(&vals);
        let li = if vals.is_empty() {
            f64::NEG_INFINITY
        } else {
            log_volume + lme + (vals.len() as f64 / mc_count as f64).ln()
        };
        log_integrals.push(li);
        accepted.push(vals.len());
    }
    Ok(BallGrowthReport {
        center: *x,
        n_values: n_values.to_vec(),
        normalized_log_integrals: log_integrals
            .iter()
            .zip(n_values)
            .map(|(l, &n)| l / n as f64)
            .collect(),
        log_integrals,
        delta,
        accepted_fraction: accepted
            .iter()
            .map(|&a| a as f64 / mc_count as f64)
            .collect(),
        unreliable: accepted.iter().map(|&a| a < RELIABLE_ACCEPTED).collect(),
        accepted,
        bundle,
        mc_count,
        seed,
    })
}
