//! Derivative cocycle `Df^n_x` along orbits.
//!
//! The product is kept as `U · diag(exp(s)) · Wᵀ` and re-factored with the
//! graded Jacobi SVD after every refresh, so `s` holds the exact log singular
//! values of the finite-time product for any `n`, far past the point where
//! the raw entries would overflow.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{graded_svd, qr_log_diag, Mat};
use crate::system::{SystemSpec, TorusPoint};

const MODULE: &str = "cocycle-engine";

/// Frames must be orthonormal to this tolerance.
pub const FRAME_TOLERANCE: f64 = 1e-10;
/// A single step shrinking a frame's volume by more than `e^300` is treated
/// as rank collapse.
pub const RANK_COLLAPSE_LOG: f64 = -300.0;

/// Factored `n`-step derivative product.
#[derive(Debug, Clone, PartialEq)]
pub struct CocycleProduct {
    pub left_orthogonal: Mat,
    /// Descending.
    pub log_singular: Vec<f64>,
    pub right_orthogonal: Mat,
    pub steps: usize,
    pub base_point: TorusPoint,
}

impl CocycleProduct {
    pub fn identity(base_point: TorusPoint) -> Self {
        let d = base_point.dim();
        CocycleProduct {
            left_orthogonal: Mat::identity(d),
            log_singular: vec![0.0; d],
            right_orthogonal: Mat::identity(d),
            steps: 0,
            base_point,
        }
    }

    /// Multiplies the factors back together. Only meaningful while the
    /// singular values are representable.
    pub fn reconstruct(&self) -> Mat {
        let d = self.log_singular.len();
        let sigma = Mat::from_fn(d, d, |i, j| {
            if i == j {
                self.log_singular[i].exp()
            } else {
                0.0
            }
        });
        self.left_orthogonal * sigma * self.right_orthogonal.transpose()
    }
}

pub fn log_singular_values(c: &CocycleProduct) -> Vec<f64> {
    c.log_singular.clone()
}

/// Incremental builder for [`CocycleProduct`].
///
/// Jacobians are multiplied into a small pending product; every
/// `refresh_every` steps the pending factor is folded into the SVD.
#[derive(Debug, Clone)]
pub struct CocycleAccumulator {
    u: Mat,
    log_s: Vec<f64>,
    w: Mat,
    pending: Mat,
    pending_steps: usize,
    steps: usize,
    refresh_every: usize,
    base_point: TorusPoint,
}

impl CocycleAccumulator {
    pub fn new(base_point: TorusPoint, refresh_every: usize) -> Self {
        let d = base_point.dim();
        CocycleAccumulator {
            u: Mat::identity(d),
            log_s: vec![0.0; d],
            w: Mat::identity(d),
            pending: Mat::identity(d),
            pending_steps: 0,
            steps: 0,
            refresh_every: refresh_every.max(1),
            base_point,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Left-multiplies the next Jacobian along the orbit.
    pub fn push(&mut self, jac: &Mat) -> Result<()> {
        if !jac.is_finite() {
            return Err(Error::numerical(
                MODULE,
                "accumulate",
                "non-finite Jacobian entry",
                Some(self.steps),
            ));
        }
        self.pending = *jac * self.pending;
        self.pending_steps += 1;
        self.steps += 1;
        if self.pending_steps >= self.refresh_every {
            self.refresh()?;
        }
        Ok(())
    }

    /// Folds the pending factor into the SVD.
    pub fn refresh(&mut self) -> Result<()> {
        if self.pending_steps == 0 {
            return Ok(());
        }
        let b = self.pending * self.u;
        let svd = graded_svd(&b, &self.log_s).ok_or_else(|| {
            Error::numerical(
                MODULE,
                "accumulate",
                "degenerate factor during re-factorization",
                Some(self.steps),
            )
        })?;
        self.u = svd.u;
        self.log_s = svd.log_singular().to_vec();
        self.w = self.w * svd.v;
        self.pending = Mat::identity(self.u.rows());
        self.pending_steps = 0;
        Ok(())
    }

    /// Log singular values of the current product.
    pub fn current_log_singular(&mut self) -> Result<&[f64]> {
        self.refresh()?;
        Ok(&self.log_s)
    }

    pub fn finish(mut self) -> Result<CocycleProduct> {
        self.refresh()?;
        Ok(CocycleProduct {
            left_orthogonal: self.u,
            log_singular: self.log_s,
            right_orthogonal: self.w,
            steps: self.steps,
            base_point: self.base_point,
        })
    }
}

/// `Df^n_x` in factored form, refreshed every step.
pub fn accumulate(system: &SystemSpec, x: &TorusPoint, n: usize) -> Result<CocycleProduct> {
    accumulate_with_refresh(system, x, n, 1)
}

/// Same as [`accumulate`] with an explicit refresh cadence.
pub fn accumulate_with_refresh(
    system: &SystemSpec,
    x: &TorusPoint,
    n: usize,
    refresh_every: usize,
) -> Result<CocycleProduct> {
    system.jacobian(x)?;
    let mut acc = CocycleAccumulator::new(*x, refresh_every);
    let mut p = *x;
    for _ in 0..n {
        acc.push(&system.jacobian_unchecked(&p))?;
        p = system.evaluate_unchecked(&p);
    }
    acc.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    /// Descending.
    pub exponents: Vec<f64>,
    pub orbit_length: usize,
    pub base_point: TorusPoint,
}

/// Finite-time Lyapunov exponents `log σ_i(Df^n_x) / n`.
pub fn lyapunov_spectrum(
    system: &SystemSpec,
    x: &TorusPoint,
    n: usize,
) -> Result<LyapunovEstimate> {
    if n == 0 {
        return Err(Error::argument(
            MODULE,
            "lyapunov_spectrum",
            "orbit length must be >= 1",
        ));
    }
    let c = accumulate(system, x, n)?;
    Ok(LyapunovEstimate {
        exponents: c.log_singular.iter().map(|s| s / n as f64).collect(),
        orbit_length: n,
        base_point: *x,
    })
}

/// Pushes a `k`-frame along an orbit, re-orthonormalizing every step and
/// summing `log |R_jj|`.
#[derive(Debug, Clone)]
pub struct FramePusher {
    frame: Mat,
    log_volume: f64,
    steps: usize,
}

impl FramePusher {
    pub fn new(frame: &Mat) -> Result<Self> {
        let defect = frame.orthonormality_defect();
        if defect > FRAME_TOLERANCE || !defect.is_finite() {
            return Err(Error::argument(
                MODULE,
                "restricted_log_det",
                format!("frame is not orthonormal (defect {defect:.3e})"),
            ));
        }
        Ok(FramePusher {
            frame: *frame,
            log_volume: 0.0,
            steps: 0,
        })
    }

    pub fn push(&mut self, jac: &Mat) -> Result<()> {
        if *jac == Mat::identity(jac.rows()) {
            self.steps += 1;
            return Ok(());
        }
        let (q, logs) = qr_log_diag(&(*jac * self.frame));
        let step: f64 = logs[..self.frame.cols()].iter().sum();
        if !(step >= RANK_COLLAPSE_LOG) {
            return Err(Error::numerical(
                MODULE,
                "restricted_log_det",
                format!("rank collapse: step log-volume {step}"),
                Some(self.steps),
            ));
        }
        self.frame = q;
        self.log_volume += step;
        self.steps += 1;
        Ok(())
    }

    pub fn log_volume(&self) -> f64 {
        self.log_volume
    }

    pub fn frame(&self) -> &Mat {
        &self.frame
    }
}

/// `log |det Df^n_x|_V|` for `V` spanned by the orthonormal `frame`.
pub fn restricted_log_det(
    system: &SystemSpec,
    x: &TorusPoint,
    n: usize,
    frame: &Mat,
) -> Result<f64> {
    system.jacobian(x)?;
    if frame.rows() != system.dimension() || frame.cols() == 0 {
        return Err(Error::argument(
            MODULE,
            "restricted_log_det",
            format!("frame must be {}xk with k >= 1", system.dimension()),
        ));
    }
    let mut pusher = FramePusher::new(frame)?;
    let mut p = *x;
    for _ in 0..n {
        pusher.push(&system.jacobian_unchecked(&p))?;
        p = system.evaluate_unchecked(&p);
    }
    Ok(pusher.log_volume())
}
