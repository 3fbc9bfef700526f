//! Regularized comparators: ridge regression and the Lasso solved by
//! monotone FISTA.
//!
//! Objectives, with `G` the stored design and `a` coefficients on its
//! columns:
//!
//! * ridge: `(1/m)‖y − G a‖² + λ‖a‖²`
//! * lasso: `(1/2m)‖y − G a‖² + λ‖a‖₁`

use nalgebra::{DMatrix, DVector};

use crate::dictionary::DesignMatrix;
use crate::error::{Error, Result};
use crate::linalg::empirical_norm;
use crate::types::{SparseModel, TerminationReason};

/// Coefficients with magnitude at or below this count as zero for sparsity.
pub const SPARSITY_TOL: f64 = 1e-8;

pub const FISTA_MAX_ITER: usize = 5000;
pub const FISTA_TOL: f64 = 1e-8;

/// Safety factor applied to the power-iteration estimate of `L`.
const LIPSCHITZ_INFLATION: f64 = 1.01;

/// Dense coefficients over every atom, in the raw atom basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseModel {
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    /// Solver iterations; zero for the closed-form ridge solve.
    pub iterations_used: usize,
    pub termination: TerminationReason,
}

impl DenseModel {
    pub fn sparsity(&self) -> usize {
        self.coefficients.iter().filter(|c| c.abs() > SPARSITY_TOL).count()
    }

    /// Keeps the atoms whose coefficients exceed [`SPARSITY_TOL`].
    pub fn to_sparse(&self) -> SparseModel {
        let (idx, coef): (Vec<usize>, Vec<f64>) = self
            .coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| c.abs() > SPARSITY_TOL)
            .map(|(j, &c)| (j, c))
            .unzip();
        SparseModel::new(idx, coef).expect("indices are distinct")
    }

    /// Predictions on `dm` using every coefficient.
    pub fn predict(&self, dm: &DesignMatrix) -> Result<Vec<f64>> {
        if self.coefficients.len() != dm.cols() {
            return Err(Error::LengthMismatch {
                expected: dm.cols(),
                found: self.coefficients.len(),
            });
        }
        let stored: Vec<f64> = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(j, c)| c / dm.scale(j))
            .collect();
        Ok(dm.mul_vec(&stored))
    }
}

fn check_inputs(dm: &DesignMatrix, y: &[f64], lambda: f64) -> Result<()> {
    if y.len() != dm.rows() {
        return Err(Error::LengthMismatch {
            expected: dm.rows(),
            found: y.len(),
        });
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

fn to_raw(dm: &DesignMatrix, stored: impl IntoIterator<Item = f64>) -> Vec<f64> {
    stored.into_iter().enumerate().map(|(j, c)| dm.to_raw(j, c)).collect()
}

/// Ridge regression via a Cholesky solve of `(GᵀG/m + λI) a = Gᵀy/m`.
pub fn fit_ridge(dm: &DesignMatrix, y: &[f64], lambda: f64) -> Result<DenseModel> {
    check_inputs(dm, y, lambda)?;
    let mut a = dm.gram();
    for i in 0..dm.cols() {
        a[(i, i)] += lambda;
    }
    let b = DVector::from_vec(dm.inner_all(y));
    let chol = a.cholesky().ok_or(Error::FactorizationFailure)?;
    let sol = chol.solve(&b);
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::FactorizationFailure);
    }
    Ok(DenseModel {
        coefficients: to_raw(dm, sol.iter().copied()),
        lambda,
        iterations_used: 0,
        termination: TerminationReason::Converged,
    })
}

/// `sign(v) · max(|v| − t, 0)`
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn power_iteration(gram: &DMatrix<f64>) -> f64 {
    let n = gram.nrows();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut estimate = 0.0;
    for _ in 0..10_000 {
        let w = gram * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - estimate).abs() <= 1e-6 * next.abs() {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// Largest eigenvalue of `GᵀG/m` by power iteration, inflated by 1%.
pub fn lipschitz_estimate(dm: &DesignMatrix) -> Result<f64> {
    if dm.live_count() == 0 {
        return Err(Error::InvalidParameter("design has no live columns".into()));
    }
    Ok(power_iteration(&dm.gram()) * LIPSCHITZ_INFLATION)
}

/// Lasso by monotone FISTA with fixed step `1/L`.
///
/// Each iteration takes the proximal gradient step from the extrapolated
/// point and keeps it only if it does not raise the objective, so the
/// objective of the returned iterates never increases. Stops when the
/// relative change of the iterate falls below `tol`.
pub fn fit_fista(
    dm: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    max_iter: usize,
    tol: f64,
) -> Result<DenseModel> {
    let (model, _) = fista_with_history(dm, y, lambda, max_iter, tol)?;
    Ok(model)
}

/// [`fit_fista`], also returning the objective after every iteration.
pub fn fista_with_history(
    dm: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    max_iter: usize,
    tol: f64,
) -> Result<(DenseModel, Vec<f64>)> {
    check_inputs(dm, y, lambda)?;
    if max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
    }
    let n = dm.cols();
    let gram = dm.gram();
    let b = DVector::from_vec(dm.inner_all(y));
    let y_sq = 0.5 * empirical_norm(y).powi(2);
    let lip = power_iteration(&gram) * LIPSCHITZ_INFLATION;
    if !(lip > 0.0) {
        return Err(Error::InvalidParameter("design has no live columns".into()));
    }
    let objective = |a: &DVector<f64>, ga: &DVector<f64>| {
        0.5 * a.dot(ga) - b.dot(a) + y_sq + lambda * a.iter().map(|v| v.abs()).sum::<f64>()
    };

    let mut x = DVector::zeros(n);
    let mut gx = DVector::zeros(n);
    let mut fx = objective(&x, &gx);
    let mut point = x.clone();
    let mut g_point = gx.clone();
    let mut t = 1.0f64;
    let mut history = Vec::new();
    let mut termination = TerminationReason::MaxIterations;
    let mut iterations = max_iter;

    for iter in 1..=max_iter {
        let grad = &g_point - &b;
        let z = (&point - grad / lip).map(|v| soft_threshold(v, lambda / lip));
        let gz = &gram * &z;
        let fz = objective(&z, &gz);
        let accepted = fz <= fx;
        let (x_new, gx_new, f_new) = if accepted {
            (z.clone(), gz.clone(), fz)
        } else {
            (x.clone(), gx.clone(), fx)
        };
        let t_new = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let w_z = t / t_new;
        let w_x = (t - 1.0) / t_new;
        point = &x_new + (&z - &x_new) * w_z + (&x_new - &x) * w_x;
        g_point = &gx_new + (&gz - &gx_new) * w_z + (&gx_new - &gx) * w_x;

        let change = (&x_new - &x).norm();
        let scale = x_new.norm().max(f64::MIN_POSITIVE);
        x = x_new;
        gx = gx_new;
        fx = f_new;
        t = t_new;
        history.push(fx);
        if accepted && change / scale < tol {
            termination = TerminationReason::Converged;
            iterations = iter;
            break;
        }
    }

    Ok((
        DenseModel {
            coefficients: to_raw(dm, x.iter().copied()),
            lambda,
            iterations_used: iterations,
            termination,
        },
        history,
    ))
}
