//! Independent oracles shared by the integration tests. Nothing here calls
//! the crate's linear algebra.

#![allow(dead_code)]

use volgrow_core::{torus_distance, SystemSpec, TorusPoint};

pub type M = Vec<Vec<f64>>;

/// `log((3 + sqrt 5) / 2)` from the characteristic polynomial
/// `t^2 - 3t + 1` of the cat matrix.
pub fn cat_entropy() -> f64 {
    let (tr, det): (f64, f64) = (3.0, 1.0);
    ((tr + (tr * tr - 4.0 * det).sqrt()) / 2.0).ln()
}

pub fn matmul(a: &M, b: &M) -> M {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum())
                .collect()
        })
        .collect()
}

fn subsets(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << d) {
        if mask.count_ones() as usize == k {
            out.push((0..d).filter(|i| mask & (1 << i) != 0).collect());
        }
    }
    out
}

fn det(m: &M) -> f64 {
    match m.len() {
        0 => 1.0,
        1 => m[0][0],
        n => (0..n)
            .map(|j| {
                let minor: M = m[1..]
                    .iter()
                    .map(|r| {
                        r.iter()
                            .enumerate()
                            .filter(|(c, _)| *c != j)
                            .map(|(_, v)| *v)
                            .collect()
                    })
                    .collect();
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                s * m[0][j] * det(&minor)
            })
            .sum(),
    }
}

/// `k`-th compound matrix: all `k×k` minors.
pub fn compound(a: &M, k: usize) -> M {
    let s = subsets(a.len(), k);
    s.iter()
        .map(|r| {
            s.iter()
                .map(|c| {
                    det(&r
                        .iter()
                        .map(|&i| c.iter().map(|&j| a[i][j]).collect())
                        .collect())
                })
                .collect()
        })
        .collect()
}

/// Largest singular value by power iteration on `CᵀC`.
pub fn top_singular(c: &M) -> f64 {
    let m = c[0].len();
    let ct: M = (0..m).map(|j| c.iter().map(|r| r[j]).collect()).collect();
    let g = matmul(&ct, c);
    let mut v: Vec<f64> = (0..m).map(|i| 1.0 + 0.1 * i as f64).collect();
    let mut lam = 0.0;
    for _ in 0..2000 {
        let w: Vec<f64> = g
            .iter()
            .map(|r| r.iter().zip(&v).map(|(a, b)| a * b).sum())
            .collect();
        let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nw == 0.0 {
            return 0.0;
        }
        let next: Vec<f64> = w.iter().map(|x| x / nw).collect();
        let diff: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        lam = nw;
        if diff < 1e-15 {
            break;
        }
    }
    lam.sqrt()
}

/// Log singular values of `J_{n-1} ⋯ J_0` from products of compound
/// matrices (Cauchy-Binet), so tiny singular values are not lost to
/// cancellation.
pub fn compound_log_singular(jacobians: &[M]) -> Vec<f64> {
    let d = jacobians[0].len();
    let mut norms = vec![0.0];
    for k in 1..=d {
        let mut c: Option<M> = None;
        for j in jacobians {
            let cj = compound(j, k);
            c = Some(match c {
                None => cj,
                Some(p) => matmul(&cj, &p),
            });
        }
        norms.push(top_singular(&c.unwrap()).ln());
    }
    (1..=d).map(|k| norms[k] - norms[k - 1]).collect()
}

/// Jacobians along an orbit, via the public API.
pub fn orbit_jacobians(system: &SystemSpec, x: &TorusPoint, n: usize) -> Vec<M> {
    let mut out = Vec::with_capacity(n);
    let mut p = *x;
    for _ in 0..n {
        out.push(system.jacobian(&p).unwrap().entries.to_rows());
        p = system.evaluate(&p).unwrap();
    }
    out
}

type Poly = Vec<(f64, f64)>;

fn clip(poly: &Poly, inside: impl Fn(f64, f64) -> f64) -> Poly {
    // keep inside(p) >= 0; inside is affine
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (fa, fb) = (inside(a.0, a.1), inside(b.0, b.1));
        if fa >= 0.0 {
            out.push(a);
        }
        if (fa >= 0.0) != (fb >= 0.0) {
            let t = fa / (fa - fb);
            out.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
        }
    }
    out
}

fn area(poly: &Poly) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| poly[i].0 * poly[(i + 1) % n].1 - poly[(i + 1) % n].0 * poly[i].1)
        .sum::<f64>()
        .abs()
        / 2.0
}

/// Exact area of the Bowen ball `{v : |A^i v mod Z^2|_∞ <= δ, 0 <= i < n}`
/// of a linear 2D torus map, by polygon clipping. Every lattice translate
/// that an image piece meets is followed separately.
pub fn linear_ball_area(a: [[f64; 2]; 2], n: usize, delta: f64) -> f64 {
    let mut pieces: Vec<Poly> = vec![vec![
        (-delta, -delta),
        (delta, -delta),
        (delta, delta),
        (-delta, delta),
    ]];
    for _ in 1..n {
        let mut next = Vec::new();
        for p in &pieces {
            let q: Poly = p
                .iter()
                .map(|&(x, y)| (a[0][0] * x + a[0][1] * y, a[1][0] * x + a[1][1] * y))
                .collect();
            let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
            for &(x, y) in &q {
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(y);
                y1 = y1.max(y);
            }
            for kx in (x0 - delta).ceil() as i64..=(x1 + delta).floor() as i64 {
                for ky in (y0 - delta).ceil() as i64..=(y1 + delta).floor() as i64 {
                    let (cx, cy) = (kx as f64, ky as f64);
                    let mut c = q.clone();
                    c = clip(&c, |x, _| x - (cx - delta));
                    c = clip(&c, |x, _| (cx + delta) - x);
                    c = clip(&c, |_, y| y - (cy - delta));
                    c = clip(&c, |_, y| (cy + delta) - y);
                    if c.len() >= 3 && area(&c) > 0.0 {
                        next.push(c.into_iter().map(|(x, y)| (x - cx, y - cy)).collect());
                    }
                }
            }
        }
        pieces = next;
    }
    // |det A| = 1, so the pushed pieces have the area of the ball
    pieces.iter().map(area).sum()
}

pub fn grid_point(index: usize, res: usize, dim: usize) -> TorusPoint {
    let mut c = vec![0.0; dim];
    let mut rest = index;
    for k in (0..dim).rev() {
        c[k] = ((rest % res) as f64 + 0.5) / res as f64;
        rest /= res;
    }
    TorusPoint::new(&c).unwrap()
}

fn orbit(system: &SystemSpec, x: &TorusPoint, n: usize) -> Vec<TorusPoint> {
    let mut out = vec![*x];
    for _ in 1..n {
        let p = system.evaluate(out.last().unwrap()).unwrap();
        out.push(p);
    }
    out
}

/// Quadratic-time greedy cover: a grid point becomes a center unless some
/// earlier center's orbit stays within `δ` of it for `n` steps.
pub fn brute_force_cover(system: &SystemSpec, n: usize, delta: f64, res: usize) -> usize {
    let d = system.dimension();
    let mut centers: Vec<Vec<TorusPoint>> = Vec::new();
    for g in 0..res.pow(d as u32) {
        let o = orbit(system, &grid_point(g, res, d), n);
        let covered = centers
            .iter()
            .any(|c| c.iter().zip(&o).all(|(a, b)| torus_distance(a, b) <= delta));
        if !covered {
            centers.push(o);
        }
    }
    centers.len()
}

/// Whether `y` stays within `δ` of `x` for `n` steps, by explicit orbits.
pub fn brute_in_ball(
    system: &SystemSpec,
    x: &TorusPoint,
    y: &TorusPoint,
    n: usize,
    delta: f64,
) -> bool {
    orbit(system, x, n)
        .iter()
        .zip(orbit(system, y, n).iter())
        .all(|(a, b)| torus_distance(a, b) <= delta)
}
