//! Invariant splittings `E^s ⊕ E^1 ⊕ … ⊕ E^l ⊕ E^u`, domination checks
//! through cone fields, sub-bundle volume growth and the Grassmannian gap
//! function.
//!
//! Splittings are always computed numerically from flags: pushing a generic
//! full frame forward along the orbit (with QR) makes its leading `k`
//! columns converge to the most expanded `k`-dimensional bundle, and pushing
//! backward with `Df^{-1}` yields the most contracted ones. Each block is the
//! intersection of a forward and a backward flag.

use rayon::prelude::*;
use serde::Serialize;

use crate::cocycle::{accumulate, restricted_log_det};
use crate::error::{Error, Result};
use crate::linalg::{
    log_singular_values, orthonormalize, qr_log_diag, subspace_sin_angle, sym_eigen, Mat,
};
use crate::rng::{gaussian_frame, uniform_point, Stream};
use crate::system::{torus_distance, SystemSpec, TorusPoint};
use crate::volume::max_subspace_log_det;

const MODULE: &str = "splitting-tools";

/// Flags computed from two generic frames must agree to this angle.
pub const STAGNATION_TOLERANCE: f64 = 1e-6;
/// A center block needs `1 − cos θ ≤` this between its two flags.
pub const INTERSECTION_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_FLAG_STEPS: usize = 40;
/// Longest cone-check iterate; keeps the direct product of Jacobians finite.
pub const MAX_DOMINATION_ITERATE: usize = 500;

const GENERIC_SEED_A: u64 = 0x6765_6e65_7269_6361;
const GENERIC_SEED_B: u64 = 0x6765_6e65_7269_6362;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum BlockLabel {
    Stable,
    Center(usize),
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplittingOptions {
    /// Block dimensions `(s, 1, …, 1, u)`; `s` and `u` may be zero.
    pub dims: Vec<usize>,
    pub n_fwd: usize,
    pub n_bwd: usize,
}

impl SplittingOptions {
    pub fn new(dims: Vec<usize>) -> Self {
        SplittingOptions {
            dims,
            n_fwd: DEFAULT_FLAG_STEPS,
            n_bwd: DEFAULT_FLAG_STEPS,
        }
    }

    /// Default block layout for the system, if it has one.
    pub fn for_system(system: &SystemSpec) -> Option<Self> {
        system.default_dims().map(Self::new)
    }

    fn validate(&self, d: usize) -> Result<()> {
        let op = "estimate_splitting";
        if self.dims.len() < 2 {
            return Err(Error::argument(
                MODULE,
                op,
                "dims needs a stable and an unstable entry",
            ));
        }
        if self.dims.iter().sum::<usize>() != d {
            return Err(Error::argument(
                MODULE,
                op,
                format!("dims {:?} must sum to the dimension {d}", self.dims),
            ));
        }
        if self.dims[1..self.dims.len() - 1].iter().any(|&c| c != 1) {
            return Err(Error::argument(
                MODULE,
                op,
                "center blocks must be one-dimensional",
            ));
        }
        if self.n_fwd == 0 || self.n_bwd == 0 {
            return Err(Error::argument(MODULE, op, "n_fwd and n_bwd must be >= 1"));
        }
        Ok(())
    }
}

/// Orthonormal bases of the splitting blocks at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct SplittingFrame {
    pub base_point: TorusPoint,
    /// `d × dims[i]` orthonormal frames, stable first.
    pub blocks: Vec<Mat>,
    pub labels: Vec<BlockLabel>,
}

impl SplittingFrame {
    pub fn from_blocks(base_point: TorusPoint, blocks: Vec<Mat>) -> Self {
        let n = blocks.len();
        let labels = (0..n)
            .map(|i| match i {
                0 => BlockLabel::Stable,
                i if i == n - 1 => BlockLabel::Unstable,
                i => BlockLabel::Center(i),
            })
            .collect();
        SplittingFrame {
            base_point,
            blocks,
            labels,
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.cols()).collect()
    }

    /// Number `l` of center blocks.
    pub fn center_count(&self) -> usize {
        self.blocks.len() - 2
    }

    /// Orthonormal basis of the sum of `blocks[range]`.
    pub fn span(&self, range: std::ops::Range<usize>) -> Mat {
        let d = self.base_point.dim();
        let mut m = Mat::zeros(d, 0);
        for b in &self.blocks[range] {
            m = m.hcat(b);
        }
        orthonormalize(&m)
    }

    /// `F^i = E^{i+1} ⊕ … ⊕ E^l ⊕ E^u` for `0 ≤ i ≤ l`.
    pub fn bundle_f(&self, i: usize) -> Result<Mat> {
        if i > self.center_count() {
            return Err(Error::argument(
                MODULE,
                "subbundle_log_det",
                format!(
                    "bundle index {i} exceeds center count {}",
                    self.center_count()
                ),
            ));
        }
        Ok(self.span(i + 1..self.blocks.len()))
    }
}

fn generic_frame(d: usize, seed: u64) -> Mat {
    gaussian_frame(seed, Stream::GenericFrames, 0, d, d)
}

/// Forward flags at `x`: a full frame pushed from `f^{-n}(x)` to `x`.
fn forward_flag(system: &SystemSpec, x: &TorusPoint, n: usize, start: &Mat) -> Result<Mat> {
    let mut back = Vec::with_capacity(n);
    let mut p = *x;
    for _ in 0..n {
        p = system.evaluate_inverse(&p)?;
        back.push(p);
    }
    let mut frame = *start;
    for p in back.iter().rev() {
        frame = qr_log_diag(&(system.jacobian_unchecked(p) * frame)).0;
    }
    Ok(frame)
}

/// Backward flags at `x`: a full frame pulled back from `f^n(x)` to `x`.
fn backward_flag(system: &SystemSpec, x: &TorusPoint, n: usize, start: &Mat) -> Result<Mat> {
    let mut fwd = Vec::with_capacity(n);
    let mut p = *x;
    for _ in 0..n {
        fwd.push(p);
        p = system.evaluate_unchecked(&p);
    }
    let mut frame = *start;
    for (k, p) in fwd.iter().enumerate().rev() {
        let inv = system.jacobian_unchecked(p).inverse().ok_or_else(|| {
            Error::numerical(
                MODULE,
                "estimate_splitting",
                "singular Jacobian on the orbit",
                Some(k),
            )
        })?;
        frame = qr_log_diag(&(inv * frame)).0;
    }
    Ok(frame)
}

/// Unit vector spanning `span(p) ∩ span(q)` when the two meet in a line,
/// with `1 − cos θ` of the best principal angle.
fn intersect_line(p: &Mat, q: &Mat) -> (Vec<f64>, f64) {
    let m = p.transpose() * *q;
    let (vals, vecs) = sym_eigen(&(m.transpose() * m));
    let cos = vals[0].clamp(0.0, 1.0).sqrt();
    let v = *q * Mat::from_columns(&[vecs.col(0)]);
    let n = crate::linalg::norm(&v.col(0));
    (v.col(0).iter().map(|x| x / n).collect(), 1.0 - cos)
}

struct Flags {
    fwd: Mat,
    bwd: Mat,
}

fn flags(system: &SystemSpec, x: &TorusPoint, opts: &SplittingOptions, seed: u64) -> Result<Flags> {
    let d = system.dimension();
    let start = generic_frame(d, seed);
    // reversed column order for the backward start keeps the fallback
    // blocks transverse when nothing converges
    let reversed = Mat::from_fn(d, d, |i, j| start[(i, d - 1 - j)]);
    Ok(Flags {
        fwd: forward_flag(system, x, opts.n_fwd, &start)?,
        bwd: backward_flag(system, x, opts.n_bwd, &reversed)?,
    })
}

/// Block extraction without the two-frame stagnation check.
fn blocks_from_flags(x: &TorusPoint, dims: &[usize], f: &Flags) -> Result<(SplittingFrame, f64)> {
    let d = x.dim();
    let last = dims.len() - 1;
    let mut blocks = Vec::with_capacity(dims.len());
    let mut worst_defect: f64 = 0.0;
    for (j, &dim) in dims.iter().enumerate() {
        let top: usize = dims[j..].iter().sum();
        let bottom: usize = dims[..=j].iter().sum();
        let block = if j == 0 {
            f.bwd.columns(0, dim)
        } else if j == last {
            f.fwd.columns(0, dim)
        } else {
            let (v, defect) = intersect_line(&f.fwd.columns(0, top), &f.bwd.columns(0, bottom));
            worst_defect = worst_defect.max(defect);
            Mat::from_columns(&[v])
        };
        debug_assert_eq!(block.rows(), d);
        blocks.push(block);
    }
    Ok((SplittingFrame::from_blocks(*x, blocks), worst_defect))
}

/// Numerical splitting at `x` with block dimensions `opts.dims`.
///
/// Fails with a convergence error when flags grown from two different
/// generic frames disagree (no domination between the requested blocks) or
/// a center block is not a clean flag intersection.
pub fn estimate_splitting(
    system: &SystemSpec,
    x: &TorusPoint,
    opts: &SplittingOptions,
) -> Result<SplittingFrame> {
    let d = system.dimension();
    system.jacobian(x)?;
    opts.validate(d)?;
    let a = flags(system, x, opts, GENERIC_SEED_A)?;
    let b = flags(system, x, opts, GENERIC_SEED_B)?;
    let dims = &opts.dims;
    let check = |m_a: &Mat, m_b: &Mat, k: usize, which: &str| -> Result<()> {
        if k == 0 || k == d {
            return Ok(());
        }
        let s = subspace_sin_angle(&m_a.columns(0, k), &m_b.columns(0, k));
        if !(s <= STAGNATION_TOLERANCE) {
            return Err(Error::convergence(
                MODULE,
                "estimate_splitting",
                format!(
                    "{which} flag of dimension {k} stagnated at {:?}: angle between flags from two generic frames {s:.3e} > {STAGNATION_TOLERANCE:e}",
                    x.coords()
                ),
            ));
        }
        Ok(())
    };
    for j in 1..dims.len() {
        check(&a.fwd, &b.fwd, dims[j..].iter().sum(), "forward")?;
    }
    for j in 0..dims.len() - 1 {
        check(&a.bwd, &b.bwd, dims[..=j].iter().sum(), "backward")?;
    }
    let (frame, defect) = blocks_from_flags(x, dims, &a)?;
    if defect > INTERSECTION_TOLERANCE {
        return Err(Error::convergence(
            MODULE,
            "estimate_splitting",
            format!("center flags do not intersect in a line (1 - cos = {defect:.3e})"),
        ));
    }
    Ok(frame)
}

/// Like [`estimate_splitting`], but returns the unvalidated flag estimate
/// when the splitting does not converge. The flag says which happened.
pub fn estimate_splitting_or_flags(
    system: &SystemSpec,
    x: &TorusPoint,
    opts: &SplittingOptions,
) -> Result<(SplittingFrame, bool)> {
    match estimate_splitting(system, x, opts) {
        Ok(s) => Ok((s, true)),
        Err(Error::Convergence { .. }) => {
            let a = flags(system, x, opts, GENERIC_SEED_A)?;
            Ok((blocks_from_flags(x, &opts.dims, &a)?.0, false))
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationReport {
    pub passed: bool,
    /// Per-step domination constant `(worst ratio)^(1/T)`.
    pub empirical_lambda: f64,
    pub worst_ratio: f64,
    pub iterate: usize,
    pub worst_point: TorusPoint,
    pub samples: usize,
    pub alpha: f64,
    /// Whether `Df^T(C^α_F(x)) ⊂ C^{α·worst}_F(f^T x)` held on every tested
    /// boundary ray.
    pub cone_invariant: bool,
    /// Largest observed `width_after / α` over boundary rays.
    pub worst_cone_contraction: f64,
    pub splittings_converged: bool,
}

/// Deterministic boundary rays of a cone: basis vectors of each frame with
/// both signs, plus normalized pairwise sums and differences.
fn boundary_directions(frame: &Mat) -> Vec<Vec<f64>> {
    let k = frame.cols();
    let mut out = Vec::new();
    for i in 0..k {
        let c = frame.col(i);
        out.push(c.clone());
        out.push(c.iter().map(|x| -x).collect());
    }
    for i in 0..k {
        for j in i + 1..k {
            let (a, b) = (frame.col(i), frame.col(j));
            for sign in [1.0, -1.0] {
                let v: Vec<f64> = a
                    .iter()
                    .zip(&b)
                    .map(|(x, y)| (x + sign * y) / 2f64.sqrt())
                    .collect();
                out.push(v);
            }
        }
    }
    out
}

struct PointCheck {
    ratio: f64,
    cone: f64,
}

fn check_point(
    system: &SystemSpec,
    here: &SplittingFrame,
    there: &SplittingFrame,
    split: usize,
    alpha: f64,
    iterate: usize,
) -> Result<PointCheck> {
    let x = here.base_point;
    let mut m = Mat::identity(system.dimension());
    let mut p = x;
    for _ in 0..iterate {
        m = system.jacobian_unchecked(&p) * m;
        p = system.evaluate_unchecked(&p);
    }
    let nb = here.blocks.len();
    let e = here.span(0..split);
    let f = here.span(split..nb);
    let e_growth = log_singular_values(&(m * e)).map(|v| v[0]);
    let f_growth = log_singular_values(&(m * f)).and_then(|v| v.last().copied());
    let (Some(eg), Some(fg)) = (e_growth, f_growth) else {
        return Err(Error::numerical(
            MODULE,
            "verify_domination",
            "degenerate restricted derivative",
            None,
        ));
    };
    let ratio = (eg - fg).exp();

    // decompose images in the splitting at f^T x
    let e2 = there.span(0..split);
    let f2 = there.span(split..nb);
    let basis = e2.hcat(&f2);
    let inv = basis.inverse().ok_or_else(|| {
        Error::numerical(
            MODULE,
            "verify_domination",
            "splitting blocks are not transverse",
            None,
        )
    })?;
    let mut cone: f64 = 0.0;
    for ue in boundary_directions(&e) {
        for uf in boundary_directions(&f) {
            let v: Vec<f64> = ue.iter().zip(&uf).map(|(a, b)| alpha * a + b).collect();
            let w = m.mul_vec(&v);
            let coeff = inv.mul_vec(&w);
            let we = e2.mul_vec(&coeff[..split_dim(&e2)]);
            let wf = f2.mul_vec(&coeff[split_dim(&e2)..]);
            let width = crate::linalg::norm(&we) / crate::linalg::norm(&wf);
            cone = cone.max(width / alpha);
        }
    }
    Ok(PointCheck { ratio, cone })
}

fn split_dim(m: &Mat) -> usize {
    m.cols()
}

/// Domination check `E = blocks[..split]` versus `F = blocks[split..]` at
/// the given points, using `splitting_at` for the splitting at `x` and at
/// `f^T(x)`.
pub fn verify_domination_with<S>(
    system: &SystemSpec,
    points: &[TorusPoint],
    splitting_at: S,
    split: usize,
    alpha: f64,
    iterate: usize,
) -> Result<DominationReport>
where
    S: Fn(&TorusPoint) -> Result<(SplittingFrame, bool)> + Sync,
{
    let op = "verify_domination";
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::argument(
            MODULE,
            op,
            format!("alpha must be > 0, got {alpha}"),
        ));
    }
    if iterate == 0 || iterate > MAX_DOMINATION_ITERATE {
        return Err(Error::argument(
            MODULE,
            op,
            format!("iterate must be in 1..={MAX_DOMINATION_ITERATE}"),
        ));
    }
    if points.is_empty() {
        return Err(Error::argument(MODULE, op, "no sample points"));
    }
    let results: Vec<(PointCheck, bool)> = points
        .par_iter()
        .map(|x| {
            let (here, ok_here) = splitting_at(x)?;
            let nb = here.blocks.len();
            if split == 0 || split >= nb {
                return Err(Error::argument(
                    MODULE,
                    op,
                    format!("split index {split} must be in 1..{nb}"),
                ));
            }
            let mut y = *x;
            for _ in 0..iterate {
                y = system.evaluate_unchecked(&y);
            }
            let (there, ok_there) = splitting_at(&y)?;
            Ok((
                check_point(system, &here, &there, split, alpha, iterate)?,
                ok_here && ok_there,
            ))
        })
        .collect::<Result<_>>()?;

    // associative max, ties resolved by the lower index
    let mut worst = 0;
    for (i, r) in results.iter().enumerate() {
        if r.0.ratio > results[worst].0.ratio {
            worst = i;
        }
    }
    let worst_ratio = results[worst].0.ratio;
    let worst_cone = results.iter().map(|r| r.0.cone).fold(0.0, f64::max);
    let empirical_lambda = worst_ratio.powf(1.0 / iterate as f64);
    Ok(DominationReport {
        passed: empirical_lambda < 1.0,
        empirical_lambda,
        worst_ratio,
        iterate,
        worst_point: points[worst],
        samples: points.len(),
        alpha,
        cone_invariant: worst_cone <= worst_ratio * (1.0 + 1e-6) + 1e-12,
        worst_cone_contraction: worst_cone,
        splittings_converged: results.iter().all(|r| r.1),
    })
}

/// Domination check at `samples` Haar-random points with numerically
/// estimated splittings. Absence of domination is reported, not raised.
pub fn verify_domination(
    system: &SystemSpec,
    opts: &SplittingOptions,
    split: usize,
    alpha: f64,
    iterate: usize,
    samples: usize,
    seed: u64,
) -> Result<DominationReport> {
    let points: Vec<TorusPoint> = (0..samples as u64)
        .map(|i| uniform_point(seed, Stream::DominationPoints, i, system.dimension()))
        .collect();
    verify_domination_with(
        system,
        &points,
        |x| estimate_splitting_or_flags(system, x, opts),
        split,
        alpha,
        iterate,
    )
}

/// `log |det Df^n_x|_{F^i}|`.
pub fn subbundle_log_det(
    system: &SystemSpec,
    x: &TorusPoint,
    n: usize,
    i: usize,
    splitting: &SplittingFrame,
) -> Result<f64> {
    if splitting.base_point.dim() != x.dim() || torus_distance(&splitting.base_point, x) > 1e-12 {
        return Err(Error::argument(
            MODULE,
            "subbundle_log_det",
            "splitting is not based at x",
        ));
    }
    restricted_log_det(system, x, n, &splitting.bundle_f(i)?)
}

/// `(1/n)·(log|det Df^n_x|_V| − log|det Df^n_x|_F|)`.
pub fn grassmann_phi_gap(
    system: &SystemSpec,
    x: &TorusPoint,
    v: &Mat,
    f: &Mat,
    n: usize,
) -> Result<f64> {
    if v.cols() != f.cols() {
        return Err(Error::argument(
            MODULE,
            "grassmann_phi_gap",
            format!("dim V = {} but dim F = {}", v.cols(), f.cols()),
        ));
    }
    if n == 0 {
        return Err(Error::argument(
            MODULE,
            "grassmann_phi_gap",
            "n must be >= 1",
        ));
    }
    let lv = restricted_log_det(system, x, n, v)?;
    let lf = restricted_log_det(system, x, n, f)?;
    Ok((lv - lf) / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapStatistics {
    pub max_gap: f64,
    pub mean_gap: f64,
    pub min_gap: f64,
    pub worst_point: TorusPoint,
    pub n: usize,
    pub bundle: usize,
    pub bundle_dim: usize,
    pub point_samples: usize,
    pub frame_samples: usize,
    pub seed: u64,
    pub splittings_converged: bool,
}

/// Statistics of the gap between random `dim F^i`-frames and `F^i` itself.
#[allow(clippy::too_many_arguments)]
pub fn gap_statistics(
    system: &SystemSpec,
    opts: &SplittingOptions,
    bundle: usize,
    n: usize,
    point_samples: usize,
    frame_samples: usize,
    seed: u64,
) -> Result<GapStatistics> {
    let op = "max_gap_over_grassmannian";
    if n == 0 || point_samples == 0 || frame_samples == 0 {
        return Err(Error::argument(
            MODULE,
            op,
            "n and sample counts must be >= 1",
        ));
    }
    let d = system.dimension();
    let per_point: Vec<(Vec<f64>, bool, usize)> = (0..point_samples)
        .into_par_iter()
        .map(|p| {
            let x = uniform_point(seed, Stream::GapPoints, p as u64, d);
            let (split, ok) = estimate_splitting_or_flags(system, &x, opts)?;
            let f = split.bundle_f(bundle)?;
            let k = f.cols();
            let gaps = (0..frame_samples)
                .map(|j| {
                    let v = gaussian_frame(
                        seed,
                        Stream::GapFrames,
                        (p * frame_samples + j) as u64,
                        d,
                        k,
                    );
                    grassmann_phi_gap(system, &x, &v, &f, n)
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.with_index(p))?;
            Ok((gaps, ok, k))
        })
        .collect::<Result<_>>()?;
    let mut max_gap = f64::NEG_INFINITY;
    let mut min_gap = f64::INFINITY;
    let mut sum = 0.0;
    let mut worst = 0;
    for (p, (gaps, _, _)) in per_point.iter().enumerate() {
        for &g in gaps {
            if g > max_gap {
                max_gap = g;
                worst = p;
            }
            min_gap = min_gap.min(g);
            sum += g;
        }
    }
    Ok(GapStatistics {
        max_gap,
        mean_gap: sum / (point_samples * frame_samples) as f64,
        min_gap,
        worst_point: uniform_point(seed, Stream::GapPoints, worst as u64, d),
        n,
        bundle,
        bundle_dim: per_point[0].2,
        point_samples,
        frame_samples,
        seed,
        splittings_converged: per_point.iter().all(|p| p.1),
    })
}

/// Largest gap over sampled points and uniformly random frames.
pub fn max_gap_over_grassmannian(
    system: &SystemSpec,
    opts: &SplittingOptions,
    bundle: usize,
    n: usize,
    point_samples: usize,
    frame_samples: usize,
    seed: u64,
) -> Result<f64> {
    Ok(gap_statistics(system, opts, bundle, n, point_samples, frame_samples, seed)?.max_gap)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BundleComparison {
    /// `max_x |max_i rate(F^i) − rate(max_V)|`.
    pub max_abs_gap: f64,
    pub mean_abs_gap: f64,
    pub n: usize,
    pub points: usize,
    pub seed: u64,
}

/// Compares `max_i (1/n) log|det Df^n|_{F^i}|` with
/// `(1/n) log max_V |det Df^n|_V|` at Haar-random points.
pub fn compare_bundle_growth(
    system: &SystemSpec,
    opts: &SplittingOptions,
    n: usize,
    points: usize,
    seed: u64,
) -> Result<BundleComparison> {
    if n == 0 || points == 0 {
        return Err(Error::argument(
            MODULE,
            "compare_bundle_growth",
            "n and points must be >= 1",
        ));
    }
    let d = system.dimension();
    let gaps: Vec<f64> = (0..points)
        .into_par_iter()
        .map(|p| {
            let x = uniform_point(seed, Stream::GapPoints, p as u64, d);
            let split = estimate_splitting(system, &x, opts)?;
            let mut best = f64::NEG_INFINITY;
            for i in 0..=split.center_count() {
                best = best.max(subbundle_log_det(system, &x, n, i, &split)?);
            }
            let top = max_subspace_log_det(&accumulate(system, &x, n)?.log_singular)?;
            Ok((best - top).abs() / n as f64)
        })
        .collect::<Result<_>>()?;
    Ok(BundleComparison {
        max_abs_gap: gaps.iter().copied().fold(0.0, f64::max),
        mean_abs_gap: gaps.iter().sum::<f64>() / points as f64,
        n,
        points,
        seed,
    })
}
