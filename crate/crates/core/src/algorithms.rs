//! Greedy learning schemes built on [`crate::greedy`] and [`crate::linalg`]:
//!
//! * [`fit_pgl`]: pure greedy learning, one correlation-scaled atom per step
//!   with no re-projection; atoms may repeat.
//! * [`fit_ogl`]: orthogonal greedy learning with a fixed iteration budget.
//! * [`fit_togl`]: OGL restricted to active atoms, stopping when none remain
//!   or at the budget.
//! * [`fit_delta_togl`]: thresholded selection with the adaptive stop
//!   "no active atom, or `‖r‖_m ≤ δ‖y‖_m`"; no iteration budget.
//!
//! Orthogonal fits never reselect an atom. A candidate that is numerically
//! dependent on the current span is excluded for the rest of the fit and
//! the next candidate is tried against the same residual.

use std::time::Instant;

use rand::Rng;

use crate::dictionary::{DesignMatrix, RbfSpec};
use crate::error::{Error, Result};
use crate::greedy::{select_with, Criterion, Delta, Scores, Selection, ZERO_RESIDUAL_TOL};
use crate::linalg::{axpy, empirical_norm, truncate, ProjectionState};
use crate::types::{SparseModel, TerminationReason};

/// Column norms of a normalized design must be within this of one.
const UNIT_NORM_TOL: f64 = 1e-9;

/// PGL recomputes correlations from the residual this often to bound drift
/// in the Gram-matrix updates.
const PGL_REFRESH: usize = 256;

#[derive(Debug, Clone, PartialEq)]
enum Path {
    /// Full coefficient vector after every step (orthogonal fits).
    Prefixes(Vec<SparseModel>),
    /// `(atom, raw coefficient increment)` per step (pure greedy).
    Increments(Vec<(usize, f64)>),
}

/// Everything a single greedy run produced, step by step.
///
/// Step `k` (1-based) is the model after `k` accepted atoms (orthogonal
/// fits) or `k` updates (pure greedy). The model for `k = 0` is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    path: Path,
    residual_norms: Vec<f64>,
    selected_correlations: Vec<f64>,
    selected_atoms: Vec<usize>,
    elapsed: Vec<f64>,
    termination: TerminationReason,
    target_norm: f64,
}

impl FitTrace {
    pub fn len(&self) -> usize {
        self.residual_norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residual_norms.is_empty()
    }

    /// `‖r_k‖_m` after each step.
    pub fn residual_norms(&self) -> &[f64] {
        &self.residual_norms
    }

    /// Score of the atom chosen at each step, against the residual it was
    /// chosen for.
    pub fn selected_correlations(&self) -> &[f64] {
        &self.selected_correlations
    }

    /// Atom chosen at each step. Pure greedy runs may repeat atoms.
    pub fn selected_atoms(&self) -> &[usize] {
        &self.selected_atoms
    }

    pub fn termination(&self) -> TerminationReason {
        self.termination
    }

    /// Seconds from the start of the fit until each step completed.
    pub fn elapsed_seconds(&self) -> &[f64] {
        &self.elapsed
    }

    /// `‖y‖_m`
    pub fn target_norm(&self) -> f64 {
        self.target_norm
    }

    /// Model after `k` steps, clamped to the last step.
    pub fn prefix_model(&self, k: usize) -> SparseModel {
        let k = k.min(self.len());
        if k == 0 {
            return SparseModel::empty();
        }
        match &self.path {
            Path::Prefixes(models) => models[k - 1].clone(),
            Path::Increments(steps) => accumulate(&steps[..k]),
        }
    }

    pub fn final_model(&self) -> SparseModel {
        self.prefix_model(self.len())
    }

    /// All prefix models `f^1, …, f^K` in order.
    pub fn prefix_models(&self) -> Vec<SparseModel> {
        match &self.path {
            Path::Prefixes(models) => models.clone(),
            Path::Increments(steps) => {
                let mut order = Vec::new();
                let mut coef = std::collections::HashMap::new();
                steps
                    .iter()
                    .map(|&(j, inc)| {
                        *coef.entry(j).or_insert_with(|| {
                            order.push(j);
                            0.0
                        }) += inc;
                        let c = order.iter().map(|j| coef[j]).collect();
                        SparseModel::new(order.clone(), c).expect("distinct atoms")
                    })
                    .collect()
            }
        }
    }

    /// Predictions of the prefix models at the (ascending) step counts `ks`,
    /// evaluated on `dm`, which must share this fit's dictionary.
    pub fn predictions_at(&self, dm: &DesignMatrix, ks: &[usize]) -> Result<Vec<Vec<f64>>> {
        if ks.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidParameter("step counts must be ascending".into()));
        }
        match &self.path {
            Path::Prefixes(_) => ks.iter().map(|&k| dm.predict(&self.prefix_model(k))).collect(),
            Path::Increments(steps) => {
                let mut pred = vec![0.0; dm.rows()];
                let mut done = 0;
                let mut out = Vec::with_capacity(ks.len());
                for &k in ks {
                    let k = k.min(steps.len());
                    for &(j, inc) in &steps[done..k] {
                        if j >= dm.cols() {
                            return Err(Error::IndexOutOfRange {
                                index: j,
                                size: dm.cols(),
                            });
                        }
                        axpy(inc / dm.scale(j), dm.column(j), &mut pred);
                    }
                    done = done.max(k);
                    out.push(pred.clone());
                }
                Ok(out)
            }
        }
    }
}

fn accumulate(steps: &[(usize, f64)]) -> SparseModel {
    let mut order: Vec<usize> = Vec::new();
    let mut coef: Vec<f64> = Vec::new();
    for &(j, inc) in steps {
        match order.iter().position(|&a| a == j) {
            Some(p) => coef[p] += inc,
            None => {
                order.push(j);
                coef.push(inc);
            }
        }
    }
    SparseModel::new(order, coef).expect("distinct atoms")
}

fn target_norm(dm: &DesignMatrix, y: &[f64]) -> Result<f64> {
    if y.len() != dm.rows() {
        return Err(Error::LengthMismatch {
            expected: dm.rows(),
            found: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("targets"));
    }
    let n = empirical_norm(y);
    if !(n > 0.0) {
        return Err(Error::ZeroResidual);
    }
    Ok(n)
}

struct OrthogonalRun {
    criterion: Criterion,
    k_max: usize,
    residual_ratio: Option<f64>,
}

fn fit_orthogonal<R: Rng + ?Sized>(
    dm: &DesignMatrix,
    y: &[f64],
    run: OrthogonalRun,
    rng: &mut R,
) -> Result<FitTrace> {
    let start = Instant::now();
    let y_norm = target_norm(dm, y)?;
    let mut state = ProjectionState::new(y)?;
    let mut excluded = vec![false; dm.cols()];
    let mut models = Vec::new();
    let mut residual_norms = Vec::new();
    let mut correlations = Vec::new();
    let mut atoms = Vec::new();
    let mut elapsed = Vec::new();

    let termination = loop {
        let rn = state.residual_norm();
        if rn <= ZERO_RESIDUAL_TOL * y_norm {
            break TerminationReason::ZeroResidual;
        }
        if state.rank() >= run.k_max {
            break TerminationReason::FixedK;
        }
        if run.residual_ratio.is_some_and(|d| rn <= d * y_norm) {
            break TerminationReason::ResidualRatio;
        }

        let residual = state.residual().to_vec();
        let mut scores = Scores::new(dm, &residual, rn);
        let picked = loop {
            let Some(j) = select_with(&mut scores, &run.criterion, &excluded, rng) else {
                break None;
            };
            excluded[j] = true;
            match state.project_append(dm.column(j)) {
                Ok(()) => break Some((j, scores.get(j))),
                Err(Error::Degenerate(_)) => continue,
                Err(e) => return Err(e),
            }
        };
        let Some((j, corr)) = picked else {
            break if run.criterion.threshold().is_some() {
                TerminationReason::NoActiveAtom
            } else {
                TerminationReason::DictionaryExhausted
            };
        };

        atoms.push(j);
        correlations.push(corr);
        residual_norms.push(state.residual_norm());
        let coef = state.solve_coefficients()?;
        let raw = atoms.iter().zip(&coef).map(|(&a, &c)| dm.to_raw(a, c)).collect();
        models.push(SparseModel::new(atoms.clone(), raw)?);
        elapsed.push(start.elapsed().as_secs_f64());
    };

    Ok(FitTrace {
        path: Path::Prefixes(models),
        residual_norms,
        selected_correlations: correlations,
        selected_atoms: atoms,
        elapsed,
        termination,
        target_norm: y_norm,
    })
}

/// Orthogonal greedy learning with an unthresholded criterion, run for at
/// most `k_max` atoms.
pub fn fit_ogl<R: Rng + ?Sized>(
    dm: &DesignMatrix,
    y: &[f64],
    criterion: &Criterion,
    k_max: usize,
    rng: &mut R,
) -> Result<FitTrace> {
    if criterion.threshold().is_some() {
        return Err(Error::InvalidParameter(format!(
            "OGL takes an unthresholded criterion, got {criterion}"
        )));
    }
    fit_orthogonal(
        dm,
        y,
        OrthogonalRun {
            criterion: *criterion,
            k_max,
            residual_ratio: None,
        },
        rng,
    )
}

/// Thresholded orthogonal greedy learning: stops when no atom is active or
/// after `k_max` atoms.
pub fn fit_togl<R: Rng + ?Sized>(
    dm: &DesignMatrix,
    y: &[f64],
    criterion: &Criterion,
    k_max: usize,
    rng: &mut R,
) -> Result<FitTrace> {
    if criterion.threshold().is_none() {
        return Err(Error::InvalidParameter(format!(
            "TOGL takes a thresholded criterion, got {criterion}"
        )));
    }
    fit_orthogonal(
        dm,
        y,
        OrthogonalRun {
            criterion: *criterion,
            k_max,
            residual_ratio: None,
        },
        rng,
    )
}

/// δ-thresholding orthogonal greedy learning.
///
/// Starting from the zero estimator, repeatedly picks an active atom under
/// `selection` (score `> δ`), projects the target onto all picked atoms,
/// and stops once no atom is active or `‖r_k‖_m ≤ δ‖y‖_m`.
pub fn fit_delta_togl<R: Rng + ?Sized>(
    dm: &DesignMatrix,
    y: &[f64],
    delta: Delta,
    selection: Selection,
    rng: &mut R,
) -> Result<FitTrace> {
    fit_orthogonal(
        dm,
        y,
        OrthogonalRun {
            criterion: Criterion::thresholded(selection, delta),
            k_max: usize::MAX,
            residual_ratio: Some(delta.value()),
        },
        rng,
    )
}

/// Pure greedy learning: `f_k = f_{k-1} + ⟨r_{k-1}, g_k⟩_m g_k` with `g_k`
/// the most correlated atom. Requires unit-norm columns.
pub fn fit_pgl(dm: &DesignMatrix, y: &[f64], k_max: usize) -> Result<FitTrace> {
    let start = Instant::now();
    let y_norm = target_norm(dm, y)?;
    if k_max == 0 {
        return Err(Error::InvalidParameter("k_max must be at least 1".into()));
    }
    let not_unit = (0..dm.cols()).find(|&j| {
        !dm.is_dead(j) && (dm.column_norm(j) - 1.0).abs() > UNIT_NORM_TOL
    });
    if let Some(j) = not_unit {
        return Err(Error::InvalidParameter(format!(
            "pure greedy learning needs unit-norm columns; column {j} has norm {}",
            dm.column_norm(j)
        )));
    }

    let gram = (k_max > dm.cols()).then(|| dm.gram());
    let mut residual = y.to_vec();
    let mut inner = dm.inner_all(&residual);
    let mut steps = Vec::new();
    let mut residual_norms = Vec::new();
    let mut correlations = Vec::new();
    let mut atoms = Vec::new();
    let mut elapsed = Vec::new();
    let mut rn = y_norm;

    let termination = loop {
        if rn <= ZERO_RESIDUAL_TOL * y_norm {
            break TerminationReason::ZeroResidual;
        }
        if steps.len() >= k_max {
            break TerminationReason::FixedK;
        }
        let mut best: Option<(usize, f64)> = None;
        for (j, &c) in inner.iter().enumerate() {
            if !dm.is_dead(j) && best.is_none_or(|(_, b)| c.abs() > b.abs()) {
                best = Some((j, c));
            }
        }
        let Some((j, alpha)) = best.filter(|&(_, c)| c != 0.0) else {
            break TerminationReason::NoActiveAtom;
        };

        axpy(-alpha, dm.column(j), &mut residual);
        let step = steps.len() + 1;
        match &gram {
            Some(g) if step % PGL_REFRESH != 0 => {
                for (i, c) in inner.iter_mut().enumerate() {
                    *c -= alpha * g[(i, j)];
                }
            }
            _ => inner = dm.inner_all(&residual),
        }
        correlations.push(alpha.abs() / rn);
        rn = empirical_norm(&residual);
        residual_norms.push(rn);
        atoms.push(j);
        steps.push((j, dm.to_raw(j, alpha)));
        elapsed.push(start.elapsed().as_secs_f64());
    };

    Ok(FitTrace {
        path: Path::Increments(steps),
        residual_norms,
        selected_correlations: correlations,
        selected_atoms: atoms,
        elapsed,
        termination,
        target_norm: y_norm,
    })
}

/// Evaluates `Σ c_j g_j(x)` at each input, clamped to `[-M, M]` when a
/// bound is given.
pub fn predict(
    model: &SparseModel,
    spec: &RbfSpec,
    inputs: &[Vec<f64>],
    truncate_at: Option<f64>,
) -> Result<Vec<f64>> {
    if let Some(&bad) = model.selected().iter().find(|&&j| j >= spec.len()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            size: spec.len(),
        });
    }
    inputs
        .iter()
        .map(|x| {
            let v: f64 = model.terms().map(|(j, c)| c * spec.atom(j, x)).sum();
            match truncate_at {
                Some(m) => truncate(v, m),
                None => Ok(v),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::normalize_columns;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    /// Columns `√2·e_i` in R², unit empirical norm and mutually orthogonal.
    fn orthonormal_pair() -> DesignMatrix {
        let s = 2f64.sqrt();
        DesignMatrix::from_columns(&[vec![s, 0.0], vec![0.0, s]]).unwrap()
    }

    #[test]
    fn exact_single_atom_target() {
        let dm = DesignMatrix::from_columns(&[
            vec![1.0, 0.0, 0.5],
            vec![0.2, 1.0, 0.0],
            vec![0.0, 0.3, 1.0],
        ])
        .unwrap();
        let y = dm.column(1).to_vec();
        let tr = fit_ogl(&dm, &y, &Criterion::max(), 3, &mut rng()).unwrap();
        assert_eq!(tr.selected_atoms(), &[1]);
        assert_eq!(tr.termination(), TerminationReason::ZeroResidual);
        assert_abs_diff_eq!(tr.final_model().coefficients()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn orthonormal_pair_selection_order_and_coefficients() {
        let dm = orthonormal_pair();
        let s = 2f64.sqrt();
        let y = [3.0 * s, 1.0 * s];
        let tr = fit_ogl(&dm, &y, &Criterion::max(), 2, &mut rng()).unwrap();
        assert_eq!(tr.selected_atoms(), &[0, 1]);
        let c = tr.final_model();
        assert_abs_diff_eq!(c.coefficients()[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.coefficients()[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn togl_with_huge_threshold_selects_nothing() {
        let dm = orthonormal_pair();
        let crit: Criterion = "max@0.99".parse().unwrap();
        let tr = fit_togl(&dm, &[1.0, 1.0], &crit, 2, &mut rng()).unwrap();
        assert!(tr.is_empty());
        assert_eq!(tr.termination(), TerminationReason::NoActiveAtom);
        assert_eq!(tr.final_model(), SparseModel::empty());
    }

    #[test]
    fn criterion_kind_is_checked() {
        let dm = orthonormal_pair();
        let t: Criterion = "max@0.1".parse().unwrap();
        assert!(fit_ogl(&dm, &[1.0, 0.0], &t, 2, &mut rng()).is_err());
        assert!(fit_togl(&dm, &[1.0, 0.0], &Criterion::max(), 2, &mut rng()).is_err());
        assert!(matches!(
            fit_ogl(&dm, &[0.0, 0.0], &Criterion::max(), 2, &mut rng()),
            Err(Error::ZeroResidual)
        ));
    }

    #[test]
    fn delta_togl_near_one_stops_immediately() {
        let dm = normalize_columns(
            DesignMatrix::from_columns(&[vec![1.0, 0.2, 0.1], vec![0.1, 1.0, 0.4]]).unwrap(),
        );
        let tr = fit_delta_togl(&dm, &[0.3, -0.5, 1.0], Delta::new(0.999).unwrap(), Selection::Max, &mut rng())
            .unwrap();
        assert!(tr.len() <= 1);
    }

    #[test]
    fn dependent_atoms_are_skipped() {
        // atom 1 duplicates atom 0
        let dm = DesignMatrix::from_columns(&[
            vec![1.0, 1.0, 0.0],
            vec![1.0, 1.0, 0.0],
            vec![0.0, 1.0, 1.0],
        ])
        .unwrap();
        let tr = fit_ogl(&dm, &[1.0, 2.0, 0.5], &Criterion::max(), 3, &mut rng()).unwrap();
        assert_eq!(tr.len(), 2);
        assert!(!tr.selected_atoms().contains(&1) || !tr.selected_atoms().contains(&0));
        assert_eq!(tr.termination(), TerminationReason::DictionaryExhausted);
    }

    #[test]
    fn pgl_single_atom_target_converges_in_one_step() {
        let dm = normalize_columns(
            DesignMatrix::from_columns(&[vec![1.0, 0.5, 0.0], vec![0.0, 1.0, 1.0]]).unwrap(),
        );
        let y: Vec<f64> = dm.column(1).iter().map(|v| 2.5 * v).collect();
        let tr = fit_pgl(&dm, &y, 10).unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.termination(), TerminationReason::ZeroResidual);
    }

    #[test]
    fn pgl_requires_unit_columns() {
        let dm = DesignMatrix::from_columns(&[vec![3.0, 0.0]]).unwrap();
        assert!(fit_pgl(&dm, &[1.0, 1.0], 5).is_err());
    }

    #[test]
    fn pgl_repeats_atoms_and_accumulates() {
        let dm = normalize_columns(
            DesignMatrix::from_columns(&[vec![1.0, 0.9, 0.0], vec![0.0, 0.9, 1.0]]).unwrap(),
        );
        let tr = fit_pgl(&dm, &[1.0, 1.0, -1.0], 50).unwrap();
        assert!(tr.len() > 2);
        let model = tr.final_model();
        assert!(model.len() <= 2);
        let preds = tr.predictions_at(&dm, &[tr.len()]).unwrap();
        let direct = dm.predict(&model).unwrap();
        for (a, b) in preds[0].iter().zip(&direct) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let streamed = tr.prefix_models();
        assert_eq!(streamed.len(), tr.len());
        assert_eq!(streamed.last().unwrap(), &model);
    }

    #[test]
    fn predict_examples() {
        let spec = RbfSpec::new(vec![vec![0.0], vec![1.0]], 1.0).unwrap();
        let xs = [vec![0.0], vec![2.0]];
        assert_eq!(predict(&SparseModel::empty(), &spec, &xs, None).unwrap(), vec![0.0, 0.0]);
        let one = SparseModel::new(vec![1], vec![1.0]).unwrap();
        assert_eq!(predict(&one, &spec, &[vec![1.0]], None).unwrap(), vec![1.0]);
        let big = SparseModel::new(vec![0], vec![0.9]).unwrap();
        assert_eq!(predict(&big, &spec, &[vec![0.0]], Some(0.5)).unwrap(), vec![0.5]);
        let bad = SparseModel::new(vec![2], vec![1.0]).unwrap();
        assert!(matches!(predict(&bad, &spec, &xs, None), Err(Error::IndexOutOfRange { .. })));
    }
}
