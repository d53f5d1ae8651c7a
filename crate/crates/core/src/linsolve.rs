//! Matrix-free solver for `(-d Lap + c(x)) v = f` with homogeneous Dirichlet
//! data on the square.
//!
//! The iteration is the conjugate residual method applied to the
//! diagonally scaled system `S A S y = S f`, `S = diag(A)^{-1/2}`. Conjugate
//! residual minimizes the residual of the scaled system over the Krylov
//! space, so its residual history is non-increasing.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{neumaier_sum, Field, Grid};
use crate::ops::{dirichlet_zero, laplacian_ghosted};

#[derive(Clone, Debug, PartialEq)]
pub struct LinearOperatorSpec {
    pub diffusion: f64,
    /// Cell-wise nonnegative reaction coefficient.
    pub reaction: Field,
}

impl LinearOperatorSpec {
    pub fn new(diffusion: f64, reaction: Field) -> Result<Self> {
        if !(diffusion > 0.0 && diffusion.is_finite()) {
            return Err(Error::InvalidParam {
                name: "diffusion",
                reason: format!("must be positive, got {diffusion}"),
            });
        }
        reaction.check_finite("reaction")?;
        if reaction.data.iter().any(|&c| c < 0.0) {
            return Err(Error::InvalidParam {
                name: "reaction",
                reason: "must be nonnegative everywhere".into(),
            });
        }
        Ok(Self { diffusion, reaction })
    }

    /// `(-d Lap + c) v` with ghost values chosen so `v = 0` on boundary faces.
    pub fn apply(&self, grid: &Grid, v: &Field) -> Field {
        let lap = laplacian_ghosted(&dirichlet_zero(v), grid);
        let mut out = grid.zeros();
        for k in 0..out.data.len() {
            out.data[k] = -self.diffusion * lap.data[k] + self.reaction.data[k] * v.data[k];
        }
        out
    }

    pub fn diagonal(&self, grid: &Grid) -> Field {
        let (ix, iy) = (1.0 / (grid.dx * grid.dx), 1.0 / (grid.dy * grid.dy));
        let mut d = grid.zeros();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let mut a = 2.0 * ix + 2.0 * iy;
                // the Dirichlet ghost is -v, adding one more unit per wall
                if i == 0 || i == grid.nx - 1 {
                    a += ix;
                }
                if j == 0 || j == grid.ny - 1 {
                    a += iy;
                }
                d[(i, j)] = self.diffusion * a + self.reaction[(i, j)];
            }
        }
        d
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `|f - A v| / |f|` in the grid L2 norm.
    pub relative_residual: f64,
    /// Relative residual of the scaled system after each iteration, starting
    /// with the initial value 1.
    pub residual_history: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SolveFailure {
    pub best: Field,
    pub report: SolveReport,
}

impl From<SolveFailure> for Error {
    fn from(f: SolveFailure) -> Self {
        Error::NotConverged {
            iterations: f.report.iterations,
            residual: f.report.relative_residual,
        }
    }
}

fn dot(a: &Field, b: &Field) -> f64 {
    neumaier_sum(a.data.iter().zip(&b.data).map(|(x, y)| x * y))
}

pub fn solve(
    spec: &LinearOperatorSpec,
    grid: &Grid,
    rhs: &Field,
    tol: f64,
    max_iter: usize,
) -> std::result::Result<(Field, SolveReport), SolveFailure> {
    let b_norm = dot(rhs, rhs).sqrt();
    if b_norm == 0.0 {
        return Ok((
            grid.zeros(),
            SolveReport {
                iterations: 0,
                relative_residual: 0.0,
                residual_history: vec![0.0],
            },
        ));
    }
    let diag = spec.diagonal(grid);
    let s = diag.map(|d| 1.0 / d.sqrt());
    let s_inv = diag.map(f64::sqrt);
    let scaled_apply = |y: &Field| {
        let x = y.zip_map(&s, |a, b| a * b);
        spec.apply(grid, &x).zip_map(&s, |a, b| a * b)
    };
    let b_hat = rhs.zip_map(&s, |a, b| a * b);
    let b_hat_norm = dot(&b_hat, &b_hat).sqrt();

    let mut y = grid.zeros();
    let mut r = b_hat.clone();
    let mut history = vec![1.0];
    let mut iterations = 0;
    let true_rel = |r_hat: &Field| {
        let rt = r_hat.zip_map(&s_inv, |a, b| a * b);
        dot(&rt, &rt).sqrt() / b_norm
    };
    let mut rel = 1.0;

    // Outer loop restarts from the recomputed residual if recursion drift
    // leaves the true residual above tolerance.
    'outer: while iterations < max_iter {
        let mut p = r.clone();
        let mut ar = scaled_apply(&r);
        let mut q = ar.clone();
        let mut rar = dot(&r, &ar);
        while iterations < max_iter {
            let qq = dot(&q, &q);
            if qq == 0.0 {
                break;
            }
            let alpha = dot(&r, &q) / qq;
            for k in 0..y.data.len() {
                y.data[k] += alpha * p.data[k];
                r.data[k] -= alpha * q.data[k];
            }
            iterations += 1;
            let r_norm = dot(&r, &r).sqrt();
            let prev = *history.last().unwrap();
            // the line minimization cannot increase the norm beyond rounding
            history.push((r_norm / b_hat_norm).min(prev));
            rel = true_rel(&r);
            if rel <= tol {
                // confirm against an explicitly recomputed residual
                let exact = b_hat.axpy(-1.0, &scaled_apply(&y));
                rel = true_rel(&exact);
                if rel <= tol {
                    break 'outer;
                }
                r = exact;
                continue 'outer;
            }
            ar = scaled_apply(&r);
            let rar_new = dot(&r, &ar);
            let beta = rar_new / rar;
            rar = rar_new;
            for k in 0..p.data.len() {
                p.data[k] = r.data[k] + beta * p.data[k];
                q.data[k] = ar.data[k] + beta * q.data[k];
            }
        }
        let exact = b_hat.axpy(-1.0, &scaled_apply(&y));
        rel = true_rel(&exact);
        r = exact;
        if rel <= tol {
            break;
        }
    }

    let x = y.zip_map(&s, |a, b| a * b);
    let report = SolveReport {
        iterations,
        relative_residual: rel,
        residual_history: history,
    };
    if rel <= tol {
        Ok((x, report))
    } else {
        Err(SolveFailure { best: x, report })
    }
}
