//! Empirical inner products, truncation and the incremental projection
//! engine used by every orthogonal greedy fit.
//!
//! All inner products are weighted by `1/m`, so a vector `q` with
//! `‖q‖_m = 1` has Euclidean length `√m`.

use crate::error::{Error, Result};

/// Orthogonalized column norms below this are treated as linear dependence.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Plain dot product with four independent accumulators.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn check_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Empty);
    }
    Ok(())
}

/// `⟨f, g⟩_m = (1/m) Σ f(x_i) g(x_i)`
pub fn empirical_inner(f: &[f64], g: &[f64]) -> Result<f64> {
    check_len(f, g)?;
    Ok(dot(f, g) / f.len() as f64)
}

/// `‖f‖_m`; zero for an empty slice.
pub fn empirical_norm(f: &[f64]) -> f64 {
    if f.is_empty() {
        return 0.0;
    }
    (dot(f, f) / f.len() as f64).sqrt()
}

/// Clamp `u` to `[-bound, bound]`.
pub fn truncate(u: f64, bound: f64) -> Result<f64> {
    if !(bound > 0.0) {
        return Err(Error::NonPositiveBound(bound));
    }
    Ok(u.clamp(-bound, bound))
}

pub fn truncate_all(values: &mut [f64], bound: f64) -> Result<()> {
    if !(bound > 0.0) {
        return Err(Error::NonPositiveBound(bound));
    }
    for v in values {
        *v = v.clamp(-bound, bound);
    }
    Ok(())
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_len(pred, truth)?;
    let ss: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((ss / pred.len() as f64).sqrt())
}

/// Incremental QR factorization of the selected columns under `⟨·,·⟩_m`,
/// together with the least-squares residual of a fixed target.
///
/// Columns are orthogonalized by modified Gram–Schmidt with one
/// reorthogonalization pass. `r_factor` maps the raw selected columns onto
/// the orthonormal basis: `G_S = Q R`.
#[derive(Debug, Clone)]
pub struct ProjectionState {
    m: usize,
    /// Column-major `m × k`, orthonormal under the empirical inner product.
    q_basis: Vec<f64>,
    /// Column `j` holds the `j + 1` nonzero entries of column `j` of `R`.
    r_factor: Vec<Vec<f64>>,
    /// `⟨q_j, y⟩_m`, accumulated against the running residual.
    q_target: Vec<f64>,
    residual: Vec<f64>,
    residual_norm: f64,
}

impl ProjectionState {
    /// Empty basis; the residual starts as the target itself.
    pub fn new(y: &[f64]) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::Empty);
        }
        Ok(Self {
            m: y.len(),
            q_basis: Vec::new(),
            r_factor: Vec::new(),
            q_target: Vec::new(),
            residual: y.to_vec(),
            residual_norm: empirical_norm(y),
        })
    }

    pub fn rank(&self) -> usize {
        self.r_factor.len()
    }

    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    pub fn residual_norm(&self) -> f64 {
        self.residual_norm
    }

    pub fn basis_vector(&self, j: usize) -> &[f64] {
        &self.q_basis[j * self.m..(j + 1) * self.m]
    }

    pub fn r_factor(&self) -> &[Vec<f64>] {
        &self.r_factor
    }

    /// Appends a raw column to the basis and reprojects the target.
    ///
    /// On [`Error::Degenerate`] the state is left unchanged and the caller
    /// should skip the atom.
    pub fn project_append(&mut self, column: &[f64]) -> Result<()> {
        if column.len() != self.m {
            return Err(Error::LengthMismatch {
                expected: self.m,
                found: column.len(),
            });
        }
        let m = self.m as f64;
        let k = self.rank();
        let mut v = column.to_vec();
        let mut coeffs = vec![0.0; k + 1];
        for _pass in 0..2 {
            for (j, c) in coeffs.iter_mut().take(k).enumerate() {
                let q = &self.q_basis[j * self.m..(j + 1) * self.m];
                let h = dot(q, &v) / m;
                axpy(-h, q, &mut v);
                *c += h;
            }
        }
        let norm = empirical_norm(&v);
        if !(norm >= DEGENERACY_TOL) {
            return Err(Error::Degenerate(norm));
        }
        let inv = 1.0 / norm;
        v.iter_mut().for_each(|x| *x *= inv);
        coeffs[k] = norm;

        let alpha = dot(&v, &self.residual) / m;
        axpy(-alpha, &v, &mut self.residual);
        // one more sweep keeps the residual orthogonal to earlier directions
        for j in 0..k {
            let q = &self.q_basis[j * self.m..(j + 1) * self.m];
            let h = dot(q, &self.residual) / m;
            if h != 0.0 {
                axpy(-h, q, &mut self.residual);
                self.q_target[j] += h;
            }
        }
        self.residual_norm = empirical_norm(&self.residual);

        self.q_basis.extend_from_slice(&v);
        self.r_factor.push(coeffs);
        self.q_target.push(alpha);
        Ok(())
    }

    /// Least-squares coefficients of the target on all selected columns.
    pub fn solve_coefficients(&self) -> Result<Vec<f64>> {
        self.solve_prefix(self.rank())
    }

    /// Coefficients of the projection onto the first `k` selected columns.
    pub fn solve_prefix(&self, k: usize) -> Result<Vec<f64>> {
        if k > self.rank() {
            return Err(Error::IndexOutOfRange {
                index: k,
                size: self.rank(),
            });
        }
        let mut c = self.q_target[..k].to_vec();
        for i in (0..k).rev() {
            let diag = self.r_factor[i][i];
            if diag == 0.0 || !diag.is_finite() {
                return Err(Error::SingularFactor(i));
            }
            c[i] /= diag;
            let ci = c[i];
            for (row, cr) in c.iter_mut().enumerate().take(i) {
                *cr -= self.r_factor[i][row] * ci;
            }
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn inner_product_examples() {
        assert_eq!(empirical_inner(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(empirical_inner(&[1.0, -1.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            empirical_inner(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap(),
            32.0 / 3.0,
            epsilon = 1e-14
        );
        assert!(matches!(
            empirical_inner(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(empirical_norm(&[0.0, 0.0, 0.0]), 0.0);
        assert_abs_diff_eq!(empirical_norm(&[3.0, 4.0]), 12.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(empirical_norm(&[-2.5; 7]), 2.5, epsilon = 1e-15);
    }

    #[test]
    fn truncate_examples() {
        assert_eq!(truncate(0.5, 1.0).unwrap(), 0.5);
        assert_eq!(truncate(-3.0, 1.0).unwrap(), -1.0);
        assert_eq!(truncate(1.0, 1.0).unwrap(), 1.0);
        assert!(matches!(truncate(1.0, 0.0), Err(Error::NonPositiveBound(_))));
        assert!(truncate(1.0, f64::NAN).is_err());
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(rmse(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), 2.5f64.sqrt(), epsilon = 1e-15);
        assert!(rmse(&[1.0], &[]).is_err());
    }

    #[test]
    fn target_in_span_leaves_zero_residual() {
        let y = [1.0, 2.0, -0.5];
        let mut st = ProjectionState::new(&y).unwrap();
        st.project_append(&y).unwrap();
        assert!(st.residual_norm() < 1e-15);
        assert_abs_diff_eq!(st.solve_coefficients().unwrap()[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn orthogonal_atom_leaves_target_unchanged() {
        let y = [1.0, -1.0];
        let mut st = ProjectionState::new(&y).unwrap();
        st.project_append(&[1.0, 1.0]).unwrap();
        assert_eq!(st.residual(), &y);
    }

    #[test]
    fn two_atoms_span_the_plane() {
        let mut st = ProjectionState::new(&[2.0, 3.0]).unwrap();
        st.project_append(&[1.0, 0.0]).unwrap();
        st.project_append(&[1.0, 1.0]).unwrap();
        assert!(st.residual_norm() < 1e-14);
        let c = st.solve_coefficients().unwrap();
        assert_abs_diff_eq!(c[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c[1], 3.0, epsilon = 1e-14);
    }

    #[test]
    fn coefficients_for_simple_systems() {
        let g = [0.5, -1.0, 2.0];
        let y: Vec<f64> = g.iter().map(|v| 2.0 * v).collect();
        let mut st = ProjectionState::new(&y).unwrap();
        st.project_append(&g).unwrap();
        assert_abs_diff_eq!(st.solve_coefficients().unwrap()[0], 2.0, epsilon = 1e-14);

        let mut st = ProjectionState::new(&[3.0, 4.0]).unwrap();
        st.project_append(&[1.0, 0.0]).unwrap();
        st.project_append(&[0.0, 1.0]).unwrap();
        let c = st.solve_coefficients().unwrap();
        assert_abs_diff_eq!(c[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c[1], 4.0, epsilon = 1e-14);
    }

    #[test]
    fn dependent_column_is_degenerate_and_state_unchanged() {
        let mut st = ProjectionState::new(&[1.0, 2.0, 3.0]).unwrap();
        st.project_append(&[1.0, 1.0, 0.0]).unwrap();
        let before = st.residual().to_vec();
        let err = st.project_append(&[2.0, 2.0, 0.0]);
        assert!(matches!(err, Err(Error::Degenerate(_))));
        assert_eq!(st.rank(), 1);
        assert_eq!(st.residual(), before.as_slice());
        assert!(matches!(st.project_append(&[0.0; 3]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn prefix_solve_matches_shorter_fit() {
        let y = [1.0, -2.0, 0.5, 4.0];
        let cols = [[1.0, 0.0, 1.0, 0.0], [0.5, 1.0, 0.0, 1.0], [0.0, 0.0, 1.0, 2.0]];
        let mut full = ProjectionState::new(&y).unwrap();
        let mut short = ProjectionState::new(&y).unwrap();
        for c in &cols {
            full.project_append(c).unwrap();
        }
        for c in &cols[..2] {
            short.project_append(c).unwrap();
        }
        let a = full.solve_prefix(2).unwrap();
        let b = short.solve_coefficients().unwrap();
        for (x, z) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, z, epsilon = 1e-12);
        }
        assert!(full.solve_prefix(4).is_err());
    }
}
