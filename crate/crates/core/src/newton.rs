//! Newton iteration on `r(x) = 0` with a forward-difference Jacobian.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    /// Converged when `|r|_inf <= abs_tolerance`.
    pub abs_tolerance: f64,
    /// ... or when `|r|_inf <= rel_tolerance * |x|_inf`.
    pub rel_tolerance: f64,
    pub max_iterations: usize,
    /// Jacobian column `j` uses step `fd_step * (1 + |x_j|)`.
    pub fd_step: f64,
    /// Step halvings tried when a full step increases the residual.
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { abs_tolerance: 1e-12, rel_tolerance: 0.0, max_iterations: 50, fd_step: 1e-7, max_halvings: 8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Final `|r|_inf`.
    pub residual: f64,
    pub converged: bool,
    /// Condition number of the coefficient extraction system, when one exists.
    pub cond: Option<f64>,
    /// Dimension of the (square) Jacobian.
    pub unknowns: usize,
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl NewtonOptions {
    fn converged(&self, residual: f64, x: &DVector<f64>) -> bool {
        residual <= self.abs_tolerance || residual <= self.rel_tolerance * inf_norm(x)
    }
}

/// Forward-difference Jacobian of `f` at `x`, given `fx = f(x)`.
///
/// Columns are evaluated in parallel and assembled in index order, so the
/// result does not depend on scheduling.
pub fn fd_jacobian<F>(f: &F, x: &DVector<f64>, fx: &DVector<f64>, step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
{
    let n = x.len();
    let columns: Vec<DVector<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let h = step * (1.0 + x[j].abs());
            let mut xp = x.clone();
            xp[j] += h;
            let fp = f(&xp)?;
            Ok((fp - fx) / h)
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_columns(&columns))
}

/// Solve `residual(x) = 0` from `x0`.
///
/// Fails with [`Error::Convergence`] after `max_iterations`, or earlier when
/// the residual stops decreasing for three consecutive iterations.
pub fn solve<F>(residual: F, x0: DVector<f64>, opts: &NewtonOptions) -> Result<(DVector<f64>, NewtonReport)>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
{
    let unknowns = x0.len();
    let mut x = x0;
    let mut r = residual(&x)?;
    let mut norm = inf_norm(&r);
    let mut stalled = 0;
    for iteration in 0..=opts.max_iterations {
        if opts.converged(norm, &x) {
            return Ok((x, NewtonReport { iterations: iteration, residual: norm, converged: true, cond: None, unknowns }));
        }
        if iteration == opts.max_iterations || stalled >= 3 {
            return Err(Error::Convergence { iterations: iteration, residual: norm });
        }
        let jac = fd_jacobian(&residual, &x, &r, opts.fd_step)?;
        let delta = jac
            .lu()
            .solve(&(-&r))
            .ok_or(Error::Singular { cond: f64::INFINITY })?;
        let mut lambda = 1.0;
        let mut trial = &x + &delta;
        let mut trial_r = residual(&trial)?;
        let mut trial_norm = inf_norm(&trial_r);
        let mut halvings = 0;
        while !(trial_norm < norm) && halvings < opts.max_halvings {
            lambda *= 0.5;
            halvings += 1;
            trial = &x + lambda * &delta;
            trial_r = residual(&trial)?;
            trial_norm = inf_norm(&trial_r);
        }
        stalled = if trial_norm < norm { 0 } else { stalled + 1 };
        x = trial;
        r = trial_r;
        norm = trial_norm;
    }
    unreachable!("loop returns on its last iteration")
}
