#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use togl::algorithms::{fit_delta_togl, fit_ogl, fit_pgl, fit_togl};
use togl::baselines::{fit_fista, fit_ridge, lipschitz_estimate, FISTA_MAX_ITER, FISTA_TOL};
use togl::bench::Problem;
use togl::dictionary::{normalize_columns, DesignMatrix};
use togl::greedy::{Criterion, Delta, Selection};
use togl::linalg::{empirical_inner, empirical_norm, ProjectionState};

/// Outcome of one check: a summary on success, the first failure otherwise.
pub type Check = Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn gaussian_columns(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| gaussian_vec(rng, m)).collect()
}

pub fn matrix(cols: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(cols[0].len(), cols.len(), |i, j| cols[j][i])
}

/// Least squares by SVD, independent of the incremental projection engine.
pub fn least_squares(cols: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let a = matrix(cols);
    let b = DVector::from_column_slice(y);
    a.svd(true, true).solve(&b, 1e-14).expect("svd solve").as_slice().to_vec()
}

/// Orthogonal matching pursuit that re-solves the full least-squares
/// problem from scratch after every selection.
pub fn naive_omp(cols: &[Vec<f64>], y: &[f64], k: usize) -> (Vec<usize>, Vec<f64>) {
    let norms: Vec<f64> = cols.iter().map(|c| empirical_norm(c)).collect();
    let mut selected: Vec<usize> = Vec::new();
    let mut coef = Vec::new();
    let mut r = y.to_vec();
    for _ in 0..k.min(cols.len()) {
        let mut best: Option<(usize, f64)> = None;
        for (j, c) in cols.iter().enumerate() {
            if selected.contains(&j) {
                continue;
            }
            let s = empirical_inner(&r, c).unwrap().abs() / norms[j];
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((j, s));
            }
        }
        selected.push(best.unwrap().0);
        let sub: Vec<Vec<f64>> = selected.iter().map(|&j| cols[j].clone()).collect();
        coef = least_squares(&sub, y);
        r = y.to_vec();
        for (c, a) in sub.iter().zip(&coef) {
            for (ri, ci) in r.iter_mut().zip(c) {
                *ri -= a * ci;
            }
        }
    }
    (selected, coef)
}

pub fn lasso_objective(cols: &[Vec<f64>], y: &[f64], lambda: f64, a: &[f64]) -> f64 {
    let m = y.len() as f64;
    let mut r = y.to_vec();
    for (c, &aj) in cols.iter().zip(a) {
        for (ri, ci) in r.iter_mut().zip(c) {
            *ri -= aj * ci;
        }
    }
    r.iter().map(|v| v * v).sum::<f64>() / (2.0 * m) + lambda * a.iter().map(|v| v.abs()).sum::<f64>()
}

/// Cyclic coordinate descent for the Lasso, run to tight convergence.
pub fn lasso_coordinate_descent(cols: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<f64> {
    let m = y.len() as f64;
    let sq: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / m).collect();
    let mut a = vec![0.0; cols.len()];
    let mut r = y.to_vec();
    for _ in 0..100_000 {
        let mut change = 0.0f64;
        for (j, c) in cols.iter().enumerate() {
            let rho = c.iter().zip(&r).map(|(ci, ri)| ci * ri).sum::<f64>() / m + sq[j] * a[j];
            let new = if rho > lambda {
                (rho - lambda) / sq[j]
            } else if rho < -lambda {
                (rho + lambda) / sq[j]
            } else {
                0.0
            };
            let d = new - a[j];
            if d != 0.0 {
                for (ri, ci) in r.iter_mut().zip(c) {
                    *ri -= d * ci;
                }
                a[j] = new;
            }
            change = change.max(d.abs());
        }
        if change < 1e-15 {
            break;
        }
    }
    a
}

/// Columns with `⟨g_i, g_j⟩_m = δ_ij`.
pub fn orthonormal_columns(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Vec<Vec<f64>> {
    let q = matrix(&gaussian_columns(rng, m, n)).qr().q();
    let s = (m as f64).sqrt();
    (0..n).map(|j| q.column(j).iter().map(|v| v * s).collect()).collect()
}

pub fn sinc_problem(seed: u64, m: usize, n: usize, sigma: f64) -> Problem {
    let mut data = rng(seed);
    let mut dict = rng(seed ^ 0x9e37_79b9);
    Problem::sinc(m, m, n, sigma, 1.0, true, &mut data, &mut dict).expect("sinc problem")
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

pub fn check_omp_oracle(instances: usize) -> Check {
    let mut r = rng(101);
    let mut worst = 0.0f64;
    for inst in 0..instances {
        let m = r.random_range(12..=30);
        let n = r.random_range(3..=10);
        let cols = gaussian_columns(&mut r, m, n);
        let y = gaussian_vec(&mut r, m);
        let k = r.random_range(1..=n);
        let (sel, coef) = naive_omp(&cols, &y, k);
        let dm = normalize_columns(DesignMatrix::from_columns(&cols).unwrap());
        let trace = fit_ogl(&dm, &y, &Criterion::max(), k, &mut r).map_err(|e| e.to_string())?;
        let model = trace.final_model();
        if model.selected() != sel.as_slice() {
            return Err(format!(
                "instance {inst}: selected {:?}, oracle {:?}",
                model.selected(),
                sel
            ));
        }
        for (a, b) in model.coefficients().iter().zip(&coef) {
            worst = worst.max((a - b).abs());
            if !close(*a, *b, 1e-7) {
                return Err(format!("instance {inst}: coefficient {a} vs oracle {b}"));
            }
        }
    }
    Ok(format!("{instances} instances, max coefficient gap {worst:.1e}"))
}

pub fn check_normal_equations(instances: usize) -> Check {
    let mut r = rng(202);
    let mut worst = 0.0f64;
    for inst in 0..instances {
        let m = r.random_range(5..=20);
        let k = r.random_range(1..=5usize.min(m));
        let cols = gaussian_columns(&mut r, m, k);
        let y = gaussian_vec(&mut r, m);
        let mut state = ProjectionState::new(&y).unwrap();
        for c in &cols {
            state.project_append(c).map_err(|e| e.to_string())?;
        }
        let got = state.solve_coefficients().map_err(|e| e.to_string())?;
        let a = matrix(&cols);
        let ata = a.tr_mul(&a);
        let aty = a.tr_mul(&DVector::from_column_slice(&y));
        let want = ata.cholesky().ok_or("normal matrix not positive definite")?.solve(&aty);
        let scale = want.norm().max(1e-300);
        let gap = (DVector::from_column_slice(&got) - &want).norm() / scale;
        worst = worst.max(gap);
        if gap > 1e-8 {
            return Err(format!("instance {inst}: relative error {gap:.2e}"));
        }
    }
    Ok(format!("{instances} instances, max relative error {worst:.1e}"))
}

pub fn check_fista_oracle(instances: usize) -> Check {
    let mut r = rng(303);
    let mut worst = 0.0f64;
    for inst in 0..instances {
        let m = r.random_range(30..=60);
        let n = r.random_range(5..=20);
        let cols = gaussian_columns(&mut r, m, n);
        let y = gaussian_vec(&mut r, m);
        let lambda = 10f64.powf(r.random_range(-3.0..-0.5));
        let dm = DesignMatrix::from_columns(&cols).unwrap();
        let fista = fit_fista(&dm, &y, lambda, FISTA_MAX_ITER, FISTA_TOL).map_err(|e| e.to_string())?;
        let cd = lasso_coordinate_descent(&cols, &y, lambda);
        let gap = lasso_objective(&cols, &y, lambda, &fista.coefficients) - lasso_objective(&cols, &y, lambda, &cd);
        worst = worst.max(gap.abs());
        if gap.abs() > 1e-6 {
            return Err(format!("instance {inst}: objective gap {gap:.2e} (lambda {lambda:.2e})"));
        }
    }
    Ok(format!("{instances} instances, max objective gap {worst:.1e}"))
}

pub fn check_ridge_gradient(instances: usize) -> Check {
    let mut r = rng(404);
    let mut worst = 0.0f64;
    for inst in 0..instances {
        let m = r.random_range(10..=60);
        let n = r.random_range(2..=40);
        let cols = gaussian_columns(&mut r, m, n);
        let y = gaussian_vec(&mut r, m);
        let lambda = 10f64.powf(r.random_range(-6.0..0.0));
        let dm = DesignMatrix::from_columns(&cols).unwrap();
        let model = fit_ridge(&dm, &y, lambda).map_err(|e| e.to_string())?;
        let a = DVector::from_column_slice(&model.coefficients);
        let g = matrix(&cols);
        let mf = m as f64;
        let grad = g.tr_mul(&(&g * &a)) / mf + &a * lambda - g.tr_mul(&DVector::from_column_slice(&y)) / mf;
        let tol = 1e-6 * (1.0 + empirical_norm(&y));
        worst = worst.max(grad.norm());
        if grad.norm() >= tol {
            return Err(format!("instance {inst}: gradient norm {:.2e}", grad.norm()));
        }
    }
    Ok(format!("{instances} instances, max gradient norm {worst:.1e}"))
}

pub fn check_lipschitz(instances: usize) -> Check {
    let mut r = rng(505);
    for inst in 0..instances {
        let m = r.random_range(5..=40);
        let n = r.random_range(1..=15);
        let cols = gaussian_columns(&mut r, m, n);
        let dm = DesignMatrix::from_columns(&cols).unwrap();
        let est = lipschitz_estimate(&dm).map_err(|e| e.to_string())? / 1.01;
        let g = matrix(&cols);
        let eig = (g.tr_mul(&g) / m as f64).symmetric_eigen();
        let top = eig.eigenvalues.iter().copied().fold(f64::MIN, f64::max);
        if (est - top).abs() > 1e-4 * top {
            return Err(format!("instance {inst}: estimate {est} vs eigenvalue {top}"));
        }
    }
    Ok(format!("{instances} instances within 1e-4"))
}

pub fn check_pgl_matches_ogl_on_orthonormal(instances: usize) -> Check {
    let mut r = rng(606);
    for inst in 0..instances {
        let m = r.random_range(10..=30);
        let n = r.random_range(1..=m.min(8));
        let cols = orthonormal_columns(&mut r, m, n);
        let y = gaussian_vec(&mut r, m);
        let dm = DesignMatrix::from_columns(&cols).unwrap();
        let pgl = fit_pgl(&dm, &y, n).map_err(|e| e.to_string())?.final_model();
        let ogl = fit_ogl(&dm, &y, &Criterion::max(), n, &mut r).map_err(|e| e.to_string())?.final_model();
        if pgl.selected() != ogl.selected() {
            return Err(format!("instance {inst}: {:?} vs {:?}", pgl.selected(), ogl.selected()));
        }
        for (a, b) in pgl.coefficients().iter().zip(ogl.coefficients()) {
            if !close(*a, *b, 1e-10) {
                return Err(format!("instance {inst}: coefficient {a} vs {b}"));
            }
        }
    }
    Ok(format!("{instances} instances"))
}

/// Residual of `y` after the model's predictions on `dm`.
pub fn residual(dm: &DesignMatrix, y: &[f64], model: &togl::SparseModel) -> Vec<f64> {
    let pred = dm.predict(model).unwrap();
    y.iter().zip(pred).map(|(a, b)| a - b).collect()
}

/// Projection orthogonality and residual monotonicity over random appends.
pub fn check_projection_invariants(instances: usize) -> Check {
    let mut r = rng(707);
    let mut worst = 0.0f64;
    for inst in 0..instances {
        let m = r.random_range(5..=40);
        let k = r.random_range(1..=m);
        let y = gaussian_vec(&mut r, m);
        let mut state = ProjectionState::new(&y).unwrap();
        let mut last = state.residual_norm();
        for _ in 0..k {
            let c = gaussian_vec(&mut r, m);
            if state.project_append(&c).is_err() {
                continue;
            }
            for j in 0..state.rank() {
                let ip = empirical_inner(state.residual(), state.basis_vector(j)).unwrap().abs();
                worst = worst.max(ip);
                if ip > 1e-8 {
                    return Err(format!("instance {inst}: |<r, q_{j}>| = {ip:.2e}"));
                }
            }
            let rn = state.residual_norm();
            if rn > last + 1e-10 {
                return Err(format!("instance {inst}: residual rose {last} -> {rn}"));
            }
            if (rn - empirical_norm(state.residual())).abs() > 1e-10 {
                return Err(format!("instance {inst}: cached residual norm drifted"));
            }
            last = rn;
        }
    }
    Ok(format!("{instances} instances, max |<r,q>| {worst:.1e}"))
}

/// OGL and δ-TOGL residuals never rise, and the fitted residual is
/// orthogonal to every selected atom, on seeded sinc problems.
pub fn check_greedy_residuals(instances: usize) -> Check {
    let mut r = rng(808);
    for inst in 0..instances as u64 {
        let p = sinc_problem(1000 + inst, 200, 100, 0.5);
        let traces = [
            fit_ogl(&p.train_design, &p.y_train, &Criterion::max(), 40, &mut r),
            fit_delta_togl(&p.train_design, &p.y_train, Delta::new(1e-3).unwrap(), Selection::Random, &mut r),
        ];
        for t in traces {
            let t = t.map_err(|e| e.to_string())?;
            if t.residual_norms().windows(2).any(|w| w[1] > w[0] + 1e-10) {
                return Err(format!("instance {inst}: residual norm increased"));
            }
            let mut state = ProjectionState::new(&p.y_train).unwrap();
            for (step, &j) in t.selected_atoms().iter().enumerate() {
                state.project_append(p.train_design.column(j)).map_err(|e| e.to_string())?;
                if (state.residual_norm() - t.residual_norms()[step]).abs() > 1e-10 {
                    return Err(format!("instance {inst}: replayed residual differs at step {step}"));
                }
            }
            for &j in t.selected_atoms() {
                let c = empirical_inner(state.residual(), p.train_design.column(j)).unwrap().abs();
                if c > 1e-8 {
                    return Err(format!("instance {inst}: residual not orthogonal to atom {j}: {c:.2e}"));
                }
            }
        }
    }
    Ok(format!("{instances} sinc instances"))
}

/// With Max selection, the atoms kept at a larger δ are a prefix of those
/// kept at a smaller δ, for δ-TOGL and TOGL alike.
pub fn check_delta_nesting(instances: usize) -> Check {
    let deltas = [0.4, 0.2, 0.1, 0.05, 0.01, 1e-3, 1e-4];
    let mut r = rng(909);
    for inst in 0..instances as u64 {
        let p = sinc_problem(2000 + inst, 200, 100, 0.5);
        let mut prev_dt: Option<Vec<usize>> = None;
        let mut prev_t: Option<Vec<usize>> = None;
        for &d in &deltas {
            let delta = Delta::new(d).unwrap();
            let dt = fit_delta_togl(&p.train_design, &p.y_train, delta, Selection::Max, &mut r)
                .map_err(|e| e.to_string())?
                .selected_atoms()
                .to_vec();
            let crit = Criterion::thresholded(Selection::Max, delta);
            let t = fit_togl(&p.train_design, &p.y_train, &crit, 60, &mut r)
                .map_err(|e| e.to_string())?
                .selected_atoms()
                .to_vec();
            for (prev, cur, name) in [(&prev_dt, &dt, "delta-TOGL"), (&prev_t, &t, "TOGL")] {
                if let Some(prev) = prev {
                    if !cur.starts_with(prev) {
                        return Err(format!("instance {inst}: {name} at delta {d} breaks nesting"));
                    }
                }
            }
            prev_dt = Some(dt);
            prev_t = Some(t);
        }
    }
    Ok(format!("{instances} sinc instances, {} thresholds", deltas.len()))
}

/// No thresholded fit ever keeps an atom whose correlation was ≤ δ.
pub fn check_threshold_consistency(instances: usize) -> Check {
    let mut r = rng(1010);
    let mut fits = 0;
    for inst in 0..instances as u64 {
        let p = sinc_problem(3000 + inst, 200, 100, 1.0);
        for d in [0.3, 0.1, 0.03, 0.01, 1e-3] {
            let delta = Delta::new(d).unwrap();
            for sel in [Selection::Max, Selection::SecondMax, Selection::ThirdMax, Selection::Random, Selection::First] {
                let t = fit_delta_togl(&p.train_design, &p.y_train, delta, sel, &mut r).map_err(|e| e.to_string())?;
                fits += 1;
                if let Some(c) = t.selected_correlations().iter().find(|&&c| c <= d) {
                    return Err(format!("instance {inst}: {sel} at delta {d} kept correlation {c}"));
                }
            }
        }
    }
    Ok(format!("{fits} thresholded fits"))
}
