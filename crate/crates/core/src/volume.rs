//! The volume-growth estimator: `log ∫ max_V |det Df^n_x|_V| dx` and its
//! growth rate in `n`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::CocycleAccumulator;
use crate::error::{Error, Result};
use crate::rng::{uniform_point, Stream};
use crate::system::{SystemSpec, TorusPoint};

const MODULE: &str = "volume-growth";

/// Tail proxies further apart than this trigger a diagnostic warning.
pub const PROXY_GAP_WARNING: f64 = 0.05;

/// Upper limit on `resolution^d` for grid samplers.
pub const MAX_GRID_POINTS: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMode {
    MonteCarlo,
    /// Open grid of cell midpoints.
    Grid,
}

impl SamplerMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SamplerMode::MonteCarlo => "monte_carlo",
            SamplerMode::Grid => "grid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "monte_carlo" => Some(SamplerMode::MonteCarlo),
            "grid" => Some(SamplerMode::Grid),
            _ => None,
        }
    }
}

/// How `∫ … dx` is discretized. `count` is the number of samples for Monte
/// Carlo and the per-dimension resolution for the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub mode: SamplerMode,
    pub count: usize,
    pub seed: u64,
}

impl SamplerSpec {
    pub fn monte_carlo(count: usize, seed: u64) -> Self {
        SamplerSpec {
            mode: SamplerMode::MonteCarlo,
            count,
            seed,
        }
    }

    pub fn grid(resolution: usize) -> Self {
        SamplerSpec {
            mode: SamplerMode::Grid,
            count: resolution,
            seed: 0,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self.mode {
            SamplerMode::MonteCarlo if self.count == 0 => Err(Error::argument(
                MODULE,
                "integrate_growth",
                "sampler needs at least one sample",
            )),
            SamplerMode::Grid if self.count < 2 => Err(Error::argument(
                MODULE,
                "integrate_growth",
                "grid resolution must be >= 2 per dimension",
            )),
            SamplerMode::Grid
                if self
                    .count
                    .checked_pow(dim as u32)
                    .is_none_or(|t| t > MAX_GRID_POINTS) =>
            {
                Err(Error::argument(
                    MODULE,
                    "integrate_growth",
                    format!("grid {}^{dim} exceeds {MAX_GRID_POINTS} points", self.count),
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn total(&self, dim: usize) -> usize {
        match self.mode {
            SamplerMode::MonteCarlo => self.count,
            SamplerMode::Grid => self.count.pow(dim as u32),
        }
    }

    /// The `index`-th sample point.
    pub fn point(&self, index: usize, dim: usize) -> TorusPoint {
        match self.mode {
            SamplerMode::MonteCarlo => {
                uniform_point(self.seed, Stream::VolumeSamples, index as u64, dim)
            }
            SamplerMode::Grid => grid_midpoint(index, self.count, dim),
        }
    }
}

/// Midpoint of cell `index` of a `resolution^dim` grid in lexicographic
/// order (first coordinate varies slowest).
pub fn grid_midpoint(index: usize, resolution: usize, dim: usize) -> TorusPoint {
    let mut c = [0.0; crate::linalg::MAX_DIM];
    let mut rest = index;
    for k in (0..dim).rev() {
        let i = rest % resolution;
        rest /= resolution;
        c[k] = (i as f64 + 0.5) / resolution as f64;
    }
    TorusPoint::wrapped(&c[..dim])
}

fn check_sorted(log_sigma: &[f64], op: &'static str) -> Result<()> {
    if log_sigma.iter().any(|v| v.is_nan()) {
        return Err(Error::argument(
            MODULE,
            op,
            "log singular values contain NaN",
        ));
    }
    if log_sigma.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::argument(
            MODULE,
            op,
            "log singular values must be sorted descending",
        ));
    }
    Ok(())
}

/// `log max_V |det A|_V|` from the log singular values of `A`: the best
/// top-`k` partial sum over `k = 0..=d`, the empty subspace included.
pub fn max_subspace_log_det(log_sigma: &[f64]) -> Result<f64> {
    check_sorted(log_sigma, "max_subspace_log_det")?;
    Ok(log_sigma.iter().map(|s| s.max(0.0)).sum())
}

/// `log max_{dim V = k} |det A|_V|`: the top-`k` partial sum.
pub fn fixed_dim_log_det_max(log_sigma: &[f64], k: usize) -> Result<f64> {
    if k > log_sigma.len() {
        return Err(Error::argument(
            MODULE,
            "fixed_dim_log_det_max",
            format!("k = {k} exceeds dimension {}", log_sigma.len()),
        ));
    }
    check_sorted(log_sigma, "fixed_dim_log_det_max")?;
    Ok(log_sigma[..k].iter().sum())
}

/// `log mean exp(L_j)` with the max shift, plus the delta-method standard
/// error of that log. Reduction runs in slice order.
pub fn log_mean_exp(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NEG_INFINITY, f64::NAN);
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return (f64::NEG_INFINITY, f64::NAN);
    }
    let w: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    let mean = sum / n as f64;
    let stderr = if n > 1 {
        let var = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        var.sqrt() / ((n as f64).sqrt() * mean)
    } else {
        0.0
    };
    (max + mean.ln(), stderr)
}

/// One point of a growth curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthSample {
    pub n: usize,
    pub log_integral: f64,
    pub normalized: f64,
    pub stderr: f64,
}

/// `max_subspace_log_det` of `Df^n_x` for every `n` in `ns` (ascending),
/// from a single orbit.
fn integrand_along_orbit(system: &SystemSpec, x: &TorusPoint, ns: &[usize]) -> Result<Vec<f64>> {
    let mut acc = CocycleAccumulator::new(*x, 1);
    let mut p = *x;
    let mut out = Vec::with_capacity(ns.len());
    for &n in ns {
        while acc.steps() < n {
            acc.push(&system.jacobian_unchecked(&p))?;
            p = system.evaluate_unchecked(&p);
        }
        out.push(max_subspace_log_det(acc.current_log_singular()?)?);
    }
    Ok(out)
}

fn integrate_many(
    system: &SystemSpec,
    ns: &[usize],
    sampler: &SamplerSpec,
) -> Result<Vec<GrowthSample>> {
    let d = system.dimension();
    sampler.validate(d)?;
    if ns.contains(&0) {
        return Err(Error::argument(
            MODULE,
            "integrate_growth",
            "n must be >= 1",
        ));
    }
    let total = sampler.total(d);
    let per_sample: Vec<Vec<f64>> = (0..total)
        .into_par_iter()
        .map(|j| {
            let x = sampler.point(j, d);
            integrand_along_orbit(system, &x, ns).map_err(|e| e.with_index(j))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(ns.len());
    let mut column = vec![0.0; total];
    for (k, &n) in ns.iter().enumerate() {
        for (dst, row) in column.iter_mut().zip(&per_sample) {
            *dst = row[k];
        }
        let (log_integral, stderr) = log_mean_exp(&column);
        out.push(GrowthSample {
            n,
            log_integral,
            normalized: log_integral / n as f64,
            stderr,
        });
    }
    Ok(out)
}

/// `log I_n` with its standard error.
pub fn integrate_growth_with_error(
    system: &SystemSpec,
    n: usize,
    sampler: &SamplerSpec,
) -> Result<GrowthSample> {
    Ok(integrate_many(system, &[n], sampler)?[0])
}

/// `log I_n = log ∫ max_V |det Df^n_x|_V| dx` under normalized Haar
/// measure.
pub fn integrate_growth(system: &SystemSpec, n: usize, sampler: &SamplerSpec) -> Result<f64> {
    Ok(integrate_growth_with_error(system, n, sampler)?.log_integral)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthCurve {
    pub samples: Vec<GrowthSample>,
    /// Least-squares slope of `log I_n` against `n`.
    pub fitted_rate: f64,
    pub intercept: f64,
    /// RMS residual of the fit.
    pub fit_residual: f64,
    pub sample_count: usize,
    pub seed: u64,
    /// Min and max of the normalized values over the last third of `n`.
    pub liminf_proxy: f64,
    pub limsup_proxy: f64,
    pub proxy_warning: bool,
}

/// Least-squares line `y = slope·x + intercept`; returns
/// `(slope, intercept, rms residual)`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Growth curve over `n_list` with fitted rate and liminf/limsup proxies.
pub fn growth_rate(
    system: &SystemSpec,
    n_list: &[usize],
    sampler: &SamplerSpec,
) -> Result<GrowthCurve> {
    if n_list.len() < 3 {
        return Err(Error::argument(
            MODULE,
            "growth_rate",
            "n_list needs at least 3 entries",
        ));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::argument(
            MODULE,
            "growth_rate",
            "n_list must be strictly increasing",
        ));
    }
    let samples = integrate_many(system, n_list, sampler)?;
    if let Some(bad) = samples.iter().find(|s| !s.log_integral.is_finite()) {
        return Err(Error::numerical(
            MODULE,
            "growth_rate",
            format!("non-finite log integral at n = {}", bad.n),
            None,
        ));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.n as f64).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.log_integral).collect();
    let (fitted_rate, intercept, fit_residual) = least_squares(&xs, &ys);
    let tail = samples.len().div_ceil(3);
    let tail_vals = samples[samples.len() - tail..].iter().map(|s| s.normalized);
    let liminf_proxy = tail_vals.clone().fold(f64::INFINITY, f64::min);
    let limsup_proxy = tail_vals.fold(f64::NEG_INFINITY, f64::max);
    Ok(GrowthCurve {
        samples,
        fitted_rate,
        intercept,
        fit_residual,
        sample_count: sampler.total(system.dimension()),
        seed: sampler.seed,
        liminf_proxy,
        limsup_proxy,
        proxy_warning: limsup_proxy - liminf_proxy > PROXY_GAP_WARNING,
    })
}
