//! Gaussian RBF dictionaries and their design matrices.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dot, empirical_norm};
use crate::types::SparseModel;

/// Columns with empirical norm below this are dead and never selectable.
pub const DEAD_COLUMN_TOL: f64 = 1e-12;

/// Centers `t_i` and a shared width `η` for atoms `exp(-‖x - t_i‖² / η²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfSpec {
    centers: Vec<Vec<f64>>,
    eta: f64,
}

impl RbfSpec {
    pub fn new(centers: Vec<Vec<f64>>, eta: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::Empty);
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
        }
        let dim = centers[0].len();
        if centers.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidParameter("centers have mixed dimension".into()));
        }
        if centers.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("centers"));
        }
        Ok(Self { centers, eta })
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Dictionary size `n`.
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Value of atom `j` at `x`.
    pub fn atom(&self, j: usize, x: &[f64]) -> f64 {
        let d2: f64 = self.centers[j]
            .iter()
            .zip(x)
            .map(|(t, v)| (v - t) * (v - t))
            .sum();
        (-d2 / (self.eta * self.eta)).exp()
    }
}

/// `n` centers drawn i.i.d. uniform on `[low, high]` (one-dimensional inputs).
pub fn build_rbf_uniform<R: Rng + ?Sized>(
    n: usize,
    low: f64,
    high: f64,
    eta: f64,
    rng: &mut R,
) -> Result<RbfSpec> {
    if !(low < high) || !low.is_finite() || !high.is_finite() {
        return Err(Error::BadRange { low, high });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("dictionary size must be at least 1".into()));
    }
    let centers = (0..n).map(|_| vec![rng.random_range(low..=high)]).collect();
    RbfSpec::new(centers, eta)
}

/// Centers at the training inputs; width `η = d_max / √(2n)` where `d_max`
/// is the largest pairwise Euclidean distance among the centers.
pub fn build_rbf_from_samples(train_inputs: &[Vec<f64>]) -> Result<RbfSpec> {
    let n = train_inputs.len();
    if n == 0 {
        return Err(Error::Empty);
    }
    let d_max = train_inputs
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            train_inputs[i + 1..]
                .iter()
                .map(|b| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>())
                .fold(0.0f64, f64::max)
        })
        .reduce(|| 0.0, f64::max)
        .sqrt();
    if !(d_max > 0.0) {
        return Err(Error::DegenerateCenters);
    }
    let eta = d_max / (2.0 * n as f64).sqrt();
    RbfSpec::new(train_inputs.to_vec(), eta)
}

/// Dense `m × n` matrix of atoms evaluated at sample inputs, stored column-major.
///
/// `scales[j]` records the factor applied to raw column `j` (1 unless the
/// matrix was normalized), so coefficients can be mapped back to raw atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    scales: Vec<f64>,
    norms: Vec<f64>,
    dead: Vec<bool>,
    normalized: bool,
}

impl DesignMatrix {
    /// Wraps column-major data of shape `rows × cols`.
    pub fn from_column_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty);
        }
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix"));
        }
        let norms: Vec<f64> = data.chunks_exact(rows).map(empirical_norm).collect();
        let dead = norms.iter().map(|&s| s < DEAD_COLUMN_TOL).collect();
        Ok(Self {
            rows,
            cols,
            data,
            scales: vec![1.0; cols],
            norms,
            dead,
            normalized: false,
        })
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != rows) {
            return Err(Error::LengthMismatch {
                expected: rows,
                found: bad.len(),
            });
        }
        Self::from_column_major(rows, columns.len(), columns.concat())
    }

    /// Number of samples `m`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of atoms `n`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.rows)
    }

    pub fn as_column_major(&self) -> &[f64] {
        &self.data
    }

    pub fn column_norm(&self, j: usize) -> f64 {
        self.norms[j]
    }

    pub fn scale(&self, j: usize) -> f64 {
        self.scales[j]
    }

    pub fn is_dead(&self, j: usize) -> bool {
        self.dead[j]
    }

    pub fn dead_mask(&self) -> &[bool] {
        &self.dead
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn live_count(&self) -> usize {
        self.dead.iter().filter(|d| !**d).count()
    }

    /// Maps a coefficient on stored column `j` to the raw atom basis.
    pub fn to_raw(&self, j: usize, c: f64) -> f64 {
        c * self.scales[j]
    }

    /// Predictions `Σ c_j g_j` for a model whose coefficients are in the raw
    /// atom basis.
    pub fn predict(&self, model: &SparseModel) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.rows];
        for (j, c) in model.terms() {
            if j >= self.cols {
                return Err(Error::IndexOutOfRange {
                    index: j,
                    size: self.cols,
                });
            }
            crate::linalg::axpy(c / self.scales[j], self.column(j), &mut out);
        }
        Ok(out)
    }

    /// `G a` for a dense coefficient vector in the stored-column basis.
    pub fn mul_vec(&self, a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for (col, &c) in self.columns().zip(a) {
            if c != 0.0 {
                crate::linalg::axpy(c, col, &mut out);
            }
        }
        out
    }

    /// `Gᵀ v / m` (empirical inner products of every column with `v`).
    pub fn inner_all(&self, v: &[f64]) -> Vec<f64> {
        let m = self.rows as f64;
        self.columns().map(|c| dot(c, v) / m).collect()
    }

    /// Empirical Gram matrix `GᵀG / m`.
    pub fn gram(&self) -> nalgebra::DMatrix<f64> {
        let g = nalgebra::DMatrix::from_column_slice(self.rows, self.cols, &self.data);
        g.tr_mul(&g) / self.rows as f64
    }
}

/// Evaluates every atom of `spec` at `inputs`.
pub fn evaluate_design(spec: &RbfSpec, inputs: &[Vec<f64>]) -> Result<DesignMatrix> {
    if inputs.is_empty() {
        return Err(Error::Empty);
    }
    if inputs.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("inputs"));
    }
    let m = inputs.len();
    let mut data = vec![0.0; m * spec.len()];
    data.par_chunks_mut(m).enumerate().for_each(|(j, col)| {
        for (v, x) in col.iter_mut().zip(inputs) {
            *v = spec.atom(j, x);
        }
    });
    DesignMatrix::from_column_major(m, spec.len(), data)
}

/// Scales each live column to unit empirical norm; dead columns are left
/// as they are.
pub fn normalize_columns(mut dm: DesignMatrix) -> DesignMatrix {
    let rows = dm.rows;
    for (j, col) in dm.data.chunks_exact_mut(rows).enumerate() {
        if dm.dead[j] {
            continue;
        }
        let s = 1.0 / dm.norms[j];
        col.iter_mut().for_each(|v| *v *= s);
        dm.scales[j] *= s;
        dm.norms[j] = empirical_norm(col);
    }
    dm.normalized = true;
    dm
}
