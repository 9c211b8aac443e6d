//! Symmetric positive definite linear solves.

use crate::fem::CsrMatrix;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Diagonal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// Stop when ‖b − Ax‖ ≤ rel_tol·‖b‖.
    pub rel_tol: f64,
    /// Defaults to 10·n when `None`.
    pub max_iters: Option<usize>,
    pub preconditioner: Preconditioner,
    /// Systems with fewer unknowns than this are factorized densely.
    pub dense_below: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            rel_tol: 1e-10,
            max_iters: None,
            preconditioner: Preconditioner::Diagonal,
            dense_below: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final ‖b − Ax‖/‖b‖ (0 for dense solves and zero right-hand sides).
    pub residual: f64,
}

pub fn solve_spd(a: &CsrMatrix, rhs: &[f64], opts: &SolveOptions) -> Result<Vec<f64>> {
    let mut x = vec![0.0; rhs.len()];
    solve_spd_into(a, rhs, &mut x, opts)?;
    Ok(x)
}

/// Solves in place, using the incoming `x` as the initial guess.
pub fn solve_spd_into(
    a: &CsrMatrix,
    rhs: &[f64],
    x: &mut [f64],
    opts: &SolveOptions,
) -> Result<SolveStats> {
    let n = a.dim();
    for len in [rhs.len(), x.len()] {
        if len != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: len,
            });
        }
    }
    if !(opts.rel_tol > 0.0) {
        return Err(Error::Config(format!("rel_tol must be positive, got {}", opts.rel_tol)));
    }
    if n < opts.dense_below {
        let sol = dense_cholesky_solve(a, rhs)?;
        x.copy_from_slice(&sol);
        return Ok(SolveStats::default());
    }
    pcg(a, rhs, x, opts)
}

fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], opts: &SolveOptions) -> Result<SolveStats> {
    let n = a.dim();
    let bnorm = dotp(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats::default());
    }
    let inv_diag: Option<Vec<f64>> = match opts.preconditioner {
        Preconditioner::None => None,
        Preconditioner::Diagonal => {
            let d = a.diagonal();
            if let Some(&v) = d.iter().find(|&&v| !(v > 0.0)) {
                return Err(Error::Indefinite {
                    iteration: 0,
                    curvature: v,
                });
            }
            Some(d.iter().map(|v| 1.0 / v).collect())
        }
    };
    let precond = |r: &[f64], z: &mut [f64]| match &inv_diag {
        Some(inv) => z.iter_mut().zip(r).zip(inv).for_each(|((z, r), d)| *z = r * d),
        None => z.copy_from_slice(r),
    };

    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    r.iter_mut().zip(b).for_each(|(r, b)| *r = b - *r);
    let target = opts.rel_tol * bnorm;
    let mut rnorm = dotp(&r, &r).sqrt();
    if rnorm <= target {
        return Ok(SolveStats {
            iterations: 0,
            residual: rnorm / bnorm,
        });
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dotp(&r, &z);
    let max_iters = opts.max_iters.unwrap_or(10 * n.max(1));
    for it in 1..=max_iters {
        a.mul_vec(&p, &mut q);
        let curvature = dotp(&p, &q);
        if !(curvature > 0.0) {
            return Err(Error::Indefinite {
                iteration: it,
                curvature,
            });
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        rnorm = dotp(&r, &r).sqrt();
        if rnorm <= target {
            return Ok(SolveStats {
                iterations: it,
                residual: rnorm / bnorm,
            });
        }
        precond(&r, &mut z);
        let rz_new = dotp(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::MaxIterations {
        iterations: max_iters,
        residual: rnorm / bnorm,
    })
}

/// Dense Cholesky factorization and solve.
pub fn dense_cholesky_solve(a: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = a.dim();
    let mut l = a.to_dense();
    for j in 0..n {
        let mut d = l[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if !(d > 0.0) {
            return Err(Error::Indefinite {
                iteration: j,
                curvature: d,
            });
        }
        let d = d.sqrt();
        l[j][j] = d;
        for i in j + 1..n {
            let mut s = l[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / d;
        }
    }
    let mut y = rhs.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i][k] * y[k];
        }
        y[i] /= l[i][i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k][i] * y[k];
        }
        y[i] /= l[i][i];
    }
    Ok(y)
}
