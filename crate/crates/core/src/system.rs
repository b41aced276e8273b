//! Smooth maps of tori `T^d`, `d ≤ 4`: points, the built-in model systems,
//! their inverses and exact Jacobians.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, MAX_DIM};

const MODULE: &str = "manifold-systems";

/// Newton iteration cap for inverting the perturbed cat map.
pub const NEWTON_MAX_STEPS: usize = 50;
const NEWTON_TOL: f64 = 1e-15;

/// Admissible perturbation bound: `2π·ε < 0.5`.
pub const PERTURBATION_BOUND: f64 = 0.5;

/// Resolution of the grid on which the Jacobian determinant of a perturbed
/// map is checked at construction.
const DET_CHECK_GRID: usize = 64;

/// Reduces a real number into `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed representative of `x mod 1` in `[-0.5, 0.5)`.
#[inline]
pub fn wrap_signed(x: f64) -> f64 {
    let r = wrap_unit(x + 0.5) - 0.5;
    if r < -0.5 {
        r + 1.0
    } else {
        r
    }
}

/// Circle distance `min(|a−b|, 1−|a−b|)` between two points of `[0,1)`.
#[inline]
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let mut t = (a - b).abs();
    if t >= 1.0 {
        t %= 1.0;
    }
    t.min(1.0 - t)
}

/// A point of `T^d` with coordinates in `[0, 1)`.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct TorusPoint {
    dim: usize,
    coords: [f64; MAX_DIM],
}

impl std::fmt::Debug for TorusPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("TorusPoint").field(&self.coords()).finish()
    }
}

impl TorusPoint {
    /// Reduces every coordinate mod 1. Fails on empty, oversized or
    /// non-finite input.
    pub fn new(coords: &[f64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::argument(
                MODULE,
                "TorusPoint::new",
                format!("dimension {} outside 1..={MAX_DIM}", coords.len()),
            ));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::argument(
                MODULE,
                "TorusPoint::new",
                format!("non-finite coordinate {bad}"),
            ));
        }
        Ok(Self::wrapped(coords))
    }

    pub(crate) fn wrapped(coords: &[f64]) -> Self {
        let mut c = [0.0; MAX_DIM];
        for (dst, src) in c.iter_mut().zip(coords) {
            *dst = wrap_unit(*src);
        }
        TorusPoint {
            dim: coords.len(),
            coords: c,
        }
    }

    pub fn origin(dim: usize) -> Self {
        TorusPoint {
            dim,
            coords: [0.0; MAX_DIM],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    /// Translates by a tangent vector and reduces mod 1.
    pub fn offset(&self, v: &[f64]) -> Self {
        debug_assert_eq!(v.len(), self.dim);
        let shifted: Vec<f64> = self.coords().iter().zip(v).map(|(a, b)| a + b).collect();
        Self::wrapped(&shifted)
    }
}

impl From<TorusPoint> for Vec<f64> {
    fn from(p: TorusPoint) -> Self {
        p.coords().to_vec()
    }
}

impl TryFrom<Vec<f64>> for TorusPoint {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        TorusPoint::new(&v)
    }
}

/// L∞ product of circle distances.
pub fn torus_distance(x: &TorusPoint, y: &TorusPoint) -> f64 {
    debug_assert_eq!(x.dim, y.dim);
    x.coords()
        .iter()
        .zip(y.coords())
        .fold(0.0, |m, (a, b)| m.max(circle_distance(*a, *b)))
}

/// Derivative `Df_x` at a base point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian {
    pub entries: Mat,
    pub base_point: TorusPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    /// `x ↦ A x mod 1` with integer unimodular `A`.
    LinearToral,
    /// `(x, y, z) ↦ (A(x, y), z + ε sin(2πx)) mod 1` on `T^3`.
    SkewProduct,
    /// `(x, y) ↦ A(x, y) + ε (sin(2πy), 0) mod 1` on `T^2`.
    PerturbedCat,
}

impl SystemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SystemKind::LinearToral => "linear_toral",
            SystemKind::SkewProduct => "skew_product",
            SystemKind::PerturbedCat => "perturbed_cat",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear_toral" => Some(SystemKind::LinearToral),
            "skew_product" => Some(SystemKind::SkewProduct),
            "perturbed_cat" => Some(SystemKind::PerturbedCat),
            _ => None,
        }
    }
}

/// Known topological entropy of a system together with where it comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactEntropy {
    pub value: f64,
    pub note: String,
}

/// An immutable, validated dynamical system on `T^d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemSpec {
    kind: SystemKind,
    dimension: usize,
    /// Integer matrix rows: the full map for `linear_toral`, the 2×2 base
    /// otherwise.
    matrix: Vec<Vec<i64>>,
    epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_entropy: Option<ExactEntropy>,
    #[serde(skip)]
    a: Mat,
    #[serde(skip)]
    a_inv: Mat,
}

/// Integer unimodularity check and exact integer inverse.
fn integer_inverse(m: &[Vec<i64>]) -> std::result::Result<Mat, String> {
    let n = m.len();
    let fm = Mat::from_fn(n, n, |i, j| m[i][j] as f64);
    let det = fm.determinant().round();
    if det.abs() != 1.0 {
        return Err(format!(
            "matrix must be unimodular (|det A| = 1), got det = {det}"
        ));
    }
    let inv = fm
        .inverse()
        .ok_or_else(|| "matrix is singular".to_string())?;
    let inv = Mat::from_fn(n, n, |i, j| inv[(i, j)].round());
    // exact check in integers
    for i in 0..n {
        for j in 0..n {
            let s: i64 = (0..n).map(|k| m[i][k] * inv[(k, j)] as i64).sum();
            if s != i64::from(i == j) {
                return Err("matrix inverse is not integral".into());
            }
        }
    }
    Ok(inv)
}

impl SystemSpec {
    /// Validates and builds a system. `matrix` is the full map for
    /// `linear_toral` and the 2×2 base matrix for the other kinds.
    pub fn new(
        kind: SystemKind,
        dimension: usize,
        matrix: Vec<Vec<i64>>,
        epsilon: f64,
    ) -> Result<Self> {
        let op = "SystemSpec::new";
        let mdim = match kind {
            SystemKind::LinearToral => {
                if !(1..=MAX_DIM).contains(&dimension) {
                    return Err(Error::argument(
                        MODULE,
                        op,
                        format!("dimension {dimension} outside 1..={MAX_DIM}"),
                    ));
                }
                dimension
            }
            SystemKind::SkewProduct => {
                if dimension != 3 {
                    return Err(Error::argument(
                        MODULE,
                        op,
                        "skew_product requires dimension 3",
                    ));
                }
                2
            }
            SystemKind::PerturbedCat => {
                if dimension != 2 {
                    return Err(Error::argument(
                        MODULE,
                        op,
                        "perturbed_cat requires dimension 2",
                    ));
                }
                2
            }
        };
        if matrix.len() != mdim || matrix.iter().any(|r| r.len() != mdim) {
            return Err(Error::argument(
                MODULE,
                op,
                format!("matrix must be {mdim}x{mdim} for {}", kind.as_str()),
            ));
        }
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::argument(
                MODULE,
                op,
                format!("epsilon must be finite and >= 0, got {epsilon}"),
            ));
        }
        if kind == SystemKind::LinearToral && epsilon != 0.0 {
            return Err(Error::argument(MODULE, op, "linear_toral takes no epsilon"));
        }
        if kind == SystemKind::PerturbedCat && TAU * epsilon >= PERTURBATION_BOUND {
            return Err(Error::argument(
                MODULE,
                op,
                format!("perturbed_cat requires 2*pi*epsilon < {PERTURBATION_BOUND}, got epsilon = {epsilon}"),
            ));
        }
        let a_inv = integer_inverse(&matrix).map_err(|m| Error::argument(MODULE, op, m))?;
        let a = Mat::from_fn(mdim, mdim, |i, j| matrix[i][j] as f64);
        let mut spec = SystemSpec {
            kind,
            dimension,
            matrix,
            epsilon,
            exact_entropy: None,
            a,
            a_inv,
        };
        if kind == SystemKind::PerturbedCat {
            spec.check_determinant_grid()?;
        }
        spec.exact_entropy = spec.derived_entropy();
        Ok(spec)
    }

    /// Arnold's cat map `[[2,1],[1,1]]`.
    pub fn cat_map() -> Self {
        Self::new(
            SystemKind::LinearToral,
            2,
            vec![vec![2, 1], vec![1, 1]],
            0.0,
        )
        .expect("cat map is valid")
    }

    pub fn identity(dimension: usize) -> Result<Self> {
        let m = (0..dimension)
            .map(|i| (0..dimension).map(|j| i64::from(i == j)).collect())
            .collect();
        Self::new(SystemKind::LinearToral, dimension, m, 0.0)
    }

    pub fn linear(matrix: Vec<Vec<i64>>) -> Result<Self> {
        Self::new(SystemKind::LinearToral, matrix.len(), matrix, 0.0)
    }

    /// Skew product over the cat map with fiber map `z ↦ z + ε sin(2πx)`.
    pub fn skew_product(epsilon: f64) -> Result<Self> {
        Self::new(
            SystemKind::SkewProduct,
            3,
            vec![vec![2, 1], vec![1, 1]],
            epsilon,
        )
    }

    /// Cat map plus `ε (sin(2πy), 0)`.
    pub fn perturbed_cat(epsilon: f64) -> Result<Self> {
        Self::new(
            SystemKind::PerturbedCat,
            2,
            vec![vec![2, 1], vec![1, 1]],
            epsilon,
        )
    }

    /// Overrides the exact-entropy metadata.
    pub fn with_exact_entropy(mut self, exact: Option<ExactEntropy>) -> Self {
        self.exact_entropy = exact;
        self
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn matrix(&self) -> &[Vec<i64>] {
        &self.matrix
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn exact_entropy(&self) -> Option<&ExactEntropy> {
        self.exact_entropy.as_ref()
    }

    /// Entropy known in closed form for 2×2 linear parts: `log` of the
    /// expanding eigenvalue. The skew product has isometric fibers and the
    /// admissible perturbations of a hyperbolic cat map stay conjugate to it,
    /// so both inherit the value of their linear part.
    fn derived_entropy(&self) -> Option<ExactEntropy> {
        if self.matrix.len() != 2 {
            return None;
        }
        let m = &self.matrix;
        let tr = (m[0][0] + m[1][1]) as f64;
        let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) as f64;
        let disc = tr * tr - 4.0 * det;
        if disc <= 0.0 {
            // rotations / roots of unity / parabolic cases: zero entropy
            return (self.kind == SystemKind::LinearToral).then(|| ExactEntropy {
                value: 0.0,
                note: "linear map without eigenvalues off the unit circle".into(),
            });
        }
        let lam = (tr.abs() + disc.sqrt()) / 2.0;
        let value = lam.ln();
        let note = match self.kind {
            SystemKind::LinearToral => "log of the expanding eigenvalue of A",
            SystemKind::SkewProduct => "isometric circle extension of the linear base: log of its expanding eigenvalue",
            SystemKind::PerturbedCat if value > 0.0 => {
                "small perturbation of a hyperbolic automorphism, conjugate to it: log of the expanding eigenvalue"
            }
            SystemKind::PerturbedCat => return None,
        };
        Some(ExactEntropy {
            value,
            note: note.into(),
        })
    }

    fn check_determinant_grid(&self) -> Result<()> {
        let r = DET_CHECK_GRID;
        let mut worst = f64::INFINITY;
        for i in 0..r {
            for j in 0..r {
                let p = TorusPoint::wrapped(&[
                    (i as f64 + 0.5) / r as f64,
                    (j as f64 + 0.5) / r as f64,
                ]);
                let det = self.jacobian_unchecked(&p).determinant();
                worst = worst.min(det.abs());
            }
        }
        // sign changes would also show up as a tiny |det| on the grid
        if worst < 1e-3 {
            return Err(Error::argument(
                MODULE,
                "SystemSpec::new",
                format!("Jacobian determinant nearly vanishes on the check grid (min |det| = {worst:.3e})"),
            ));
        }
        Ok(())
    }

    fn check_dim(&self, x: &TorusPoint, op: &'static str) -> Result<()> {
        if x.dim() != self.dimension {
            return Err(Error::argument(
                MODULE,
                op,
                format!(
                    "point has dimension {} but system has dimension {}",
                    x.dim(),
                    self.dimension
                ),
            ));
        }
        Ok(())
    }

    /// `f(x)` reduced mod 1.
    pub fn evaluate(&self, x: &TorusPoint) -> Result<TorusPoint> {
        self.check_dim(x, "evaluate")?;
        Ok(self.evaluate_unchecked(x))
    }

    /// Hot-path variant for callers that already validated dimensions.
    #[inline]
    pub(crate) fn evaluate_unchecked(&self, x: &TorusPoint) -> TorusPoint {
        let c = x.coords();
        let mut out = [0.0; MAX_DIM];
        match self.kind {
            SystemKind::LinearToral => {
                for (i, o) in out.iter_mut().enumerate().take(self.dimension) {
                    *o = (0..self.dimension).map(|j| self.a[(i, j)] * c[j]).sum();
                }
            }
            SystemKind::SkewProduct => {
                out[0] = self.a[(0, 0)] * c[0] + self.a[(0, 1)] * c[1];
                out[1] = self.a[(1, 0)] * c[0] + self.a[(1, 1)] * c[1];
                out[2] = c[2] + self.epsilon * (TAU * c[0]).sin();
            }
            SystemKind::PerturbedCat => {
                out[0] = self.a[(0, 0)] * c[0]
                    + self.a[(0, 1)] * c[1]
                    + self.epsilon * (TAU * c[1]).sin();
                out[1] = self.a[(1, 0)] * c[0] + self.a[(1, 1)] * c[1];
            }
        }
        TorusPoint::wrapped(&out[..self.dimension])
    }

    fn apply_inverse_linear(&self, p: &[f64]) -> [f64; MAX_DIM] {
        let n = self.a_inv.rows();
        let mut out = [0.0; MAX_DIM];
        for (i, o) in out.iter_mut().enumerate().take(n) {
            *o = (0..n).map(|j| self.a_inv[(i, j)] * p[j]).sum();
        }
        out
    }

    /// `f^{-1}(x)`: closed form for linear and skew systems, Newton
    /// iteration for the perturbed cat map.
    pub fn evaluate_inverse(&self, x: &TorusPoint) -> Result<TorusPoint> {
        self.check_dim(x, "evaluate_inverse")?;
        let c = x.coords();
        match self.kind {
            SystemKind::LinearToral => {
                let out = self.apply_inverse_linear(c);
                Ok(TorusPoint::wrapped(&out[..self.dimension]))
            }
            SystemKind::SkewProduct => {
                let base = self.apply_inverse_linear(&c[..2]);
                let bx = wrap_unit(base[0]);
                let by = wrap_unit(base[1]);
                let z = c[2] - self.epsilon * (TAU * bx).sin();
                Ok(TorusPoint::wrapped(&[bx, by, z]))
            }
            SystemKind::PerturbedCat => self.newton_inverse(x),
        }
    }

    fn newton_inverse(&self, target: &TorusPoint) -> Result<TorusPoint> {
        let t = target.coords();
        // the perturbation only shifts the first coordinate by at most ε
        let guess = self.apply_inverse_linear(t);
        let mut u = [guess[0], guess[1]];
        for _ in 0..NEWTON_MAX_STEPS {
            let p = TorusPoint::wrapped(&u);
            let fx = self.evaluate_unchecked(&p);
            let r = [
                wrap_signed(fx.coords()[0] - t[0]),
                wrap_signed(fx.coords()[1] - t[1]),
            ];
            if r[0].abs() <= NEWTON_TOL && r[1].abs() <= NEWTON_TOL {
                return Ok(p);
            }
            let j = self.jacobian_unchecked(&p);
            let step = j.solve(&r).ok_or_else(|| {
                Error::numerical(
                    MODULE,
                    "evaluate_inverse",
                    "singular Jacobian in Newton step",
                    None,
                )
            })?;
            u = [p.coords()[0] - step[0], p.coords()[1] - step[1]];
        }
        // accept near-converged iterates at the documented round-trip tolerance
        let p = TorusPoint::wrapped(&u);
        let fx = self.evaluate_unchecked(&p);
        if torus_distance(&fx, target) <= 1e-13 {
            return Ok(p);
        }
        Err(Error::numerical(
            MODULE,
            "evaluate_inverse",
            format!(
                "Newton iteration did not converge in {NEWTON_MAX_STEPS} steps for {:?}",
                target.coords()
            ),
            None,
        ))
    }

    /// Exact analytic derivative.
    pub fn jacobian(&self, x: &TorusPoint) -> Result<Jacobian> {
        self.check_dim(x, "jacobian")?;
        Ok(Jacobian {
            entries: self.jacobian_unchecked(x),
            base_point: *x,
        })
    }

    #[inline]
    pub(crate) fn jacobian_unchecked(&self, x: &TorusPoint) -> Mat {
        let c = x.coords();
        match self.kind {
            SystemKind::LinearToral => self.a,
            SystemKind::SkewProduct => {
                let mut m = Mat::zeros(3, 3);
                for i in 0..2 {
                    for j in 0..2 {
                        m[(i, j)] = self.a[(i, j)];
                    }
                }
                m[(2, 0)] = self.epsilon * TAU * (TAU * c[0]).cos();
                m[(2, 2)] = 1.0;
                m
            }
            SystemKind::PerturbedCat => {
                let mut m = self.a;
                m[(0, 1)] += self.epsilon * TAU * (TAU * c[1]).cos();
                m
            }
        }
    }

    /// Suggested splitting block dimensions `(s, 1, …, 1, u)`.
    pub fn default_dims(&self) -> Option<Vec<usize>> {
        match self.kind {
            SystemKind::SkewProduct => Some(vec![1, 1, 1]),
            SystemKind::PerturbedCat => Some(vec![1, 1]),
            SystemKind::LinearToral if self.dimension == 2 => Some(vec![1, 1]),
            SystemKind::LinearToral => None,
        }
    }
}
