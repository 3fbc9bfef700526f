//! Domain types shared across the crate: datasets, sparse models and
//! per-run reports.
//!
//! Every type here is immutable once built. Models and reports have a
//! line-oriented CSV form so sweeps can be stored and reloaded.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Test,
}

/// Paired input vectors and scalar targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    role: Role,
}

impl Dataset {
    /// Builds a dataset, checking [`validate_dataset`]'s invariants.
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>, role: Role) -> Result<Self> {
        validate_dataset(Self {
            inputs,
            targets,
            role,
        })
    }

    /// Convenience constructor for scalar inputs.
    pub fn from_scalars(xs: &[f64], targets: Vec<f64>, role: Role) -> Result<Self> {
        Self::new(xs.iter().map(|&x| vec![x]).collect(), targets, role)
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Input dimension `d`.
    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn into_parts(self) -> (Vec<Vec<f64>>, Vec<f64>, Role) {
        (self.inputs, self.targets, self.role)
    }

    /// Writes the dataset as CSV: a header `x0,..,x{d-1},y` then one row per sample.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.dim()).map(|j| format!("x{j}")).collect();
        header.push("y".to_owned());
        w.write_record(&header)?;
        for (x, y) in self.inputs.iter().zip(&self.targets) {
            let mut rec: Vec<String> = x.iter().map(f64::to_string).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Checks that inputs and targets are nonempty, equally long, of a single
/// dimension and finite.
pub fn validate_dataset(d: Dataset) -> Result<Dataset> {
    if d.targets.is_empty() && d.inputs.is_empty() {
        return Err(Error::Empty);
    }
    if d.inputs.len() != d.targets.len() {
        return Err(Error::LengthMismatch {
            expected: d.inputs.len(),
            found: d.targets.len(),
        });
    }
    let dim = d.inputs[0].len();
    if dim == 0 {
        return Err(Error::Empty);
    }
    for x in &d.inputs {
        if x.len() != dim {
            return Err(Error::LengthMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("inputs"));
        }
    }
    if d.targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("targets"));
    }
    Ok(d)
}

/// Ordered selection of atoms with their coefficients in the raw atom basis.
///
/// The order is the order in which atoms were selected, so `prefix(j)`
/// identifies the first `j` picks of a greedy run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseModel {
    selected: Vec<usize>,
    coefficients: Vec<f64>,
    truncation_bound: Option<f64>,
}

impl SparseModel {
    pub fn new(selected: Vec<usize>, coefficients: Vec<f64>) -> Result<Self> {
        if selected.len() != coefficients.len() {
            return Err(Error::LengthMismatch {
                expected: selected.len(),
                found: coefficients.len(),
            });
        }
        let mut seen = HashSet::with_capacity(selected.len());
        if let Some(&dup) = selected.iter().find(|&&i| !seen.insert(i)) {
            return Err(Error::InvalidParameter(format!(
                "atom {dup} selected twice"
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("coefficients"));
        }
        Ok(Self {
            selected,
            coefficients,
            truncation_bound: None,
        })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_truncation(mut self, bound: f64) -> Result<Self> {
        if !(bound > 0.0) {
            return Err(Error::NonPositiveBound(bound));
        }
        self.truncation_bound = Some(bound);
        Ok(self)
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn truncation_bound(&self) -> Option<f64> {
        self.truncation_bound
    }

    /// Number of atoms with a nonzero coefficient.
    pub fn sparsity(&self) -> usize {
        self.coefficients.iter().filter(|c| **c != 0.0).count()
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.selected.iter().copied().zip(self.coefficients.iter().copied())
    }

    /// Serializes as `kind,index,value` rows: an optional `bound` row
    /// followed by one `atom` row per selected atom, in selection order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["kind", "index", "value"])?;
        if let Some(m) = self.truncation_bound {
            w.write_record(["bound", "", &m.to_string()])?;
        }
        for (i, c) in self.terms() {
            w.write_record(["atom", &i.to_string(), &c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut selected = Vec::new();
        let mut coefficients = Vec::new();
        let mut bound = None;
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |col: usize| rec.get(col).unwrap_or("");
            let parse_f = |col: usize| {
                field(col).parse::<f64>().map_err(|e| Error::Parse {
                    row: row + 1,
                    column: col,
                    message: e.to_string(),
                })
            };
            match field(0) {
                "bound" => bound = Some(parse_f(2)?),
                "atom" => {
                    let idx = field(1).parse::<usize>().map_err(|e| Error::Parse {
                        row: row + 1,
                        column: 1,
                        message: e.to_string(),
                    })?;
                    selected.push(idx);
                    coefficients.push(parse_f(2)?);
                }
                other => {
                    return Err(Error::Parse {
                        row: row + 1,
                        column: 0,
                        message: format!("unknown row kind {other:?}"),
                    })
                }
            }
        }
        let model = Self::new(selected, coefficients)?;
        match bound {
            Some(m) => model.with_truncation(m),
            None => Ok(model),
        }
    }
}

/// Why a fit stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TerminationReason {
    /// No atom passes the greedy threshold.
    NoActiveAtom,
    /// Residual norm fell to the fraction δ of the target norm.
    ResidualRatio,
    /// Iteration budget reached.
    FixedK,
    /// Every remaining atom is selected, dead or numerically dependent.
    DictionaryExhausted,
    ZeroResidual,
    /// Dense solvers (ridge, FISTA) that converge rather than stop.
    Converged,
    /// FISTA hit its iteration cap before the tolerance.
    MaxIterations,
    /// The run returned an error; metrics are NaN.
    Failed,
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::NoActiveAtom => "NoActiveAtom",
            Self::ResidualRatio => "ResidualRatio",
            Self::FixedK => "FixedK",
            Self::DictionaryExhausted => "DictionaryExhausted",
            Self::ZeroResidual => "ZeroResidual",
            Self::Converged => "Converged",
            Self::MaxIterations => "MaxIterations",
            Self::Failed => "Failed",
        };
        f.write_str(s)
    }
}

/// The swept value a run was produced with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Parameter {
    K(usize),
    Delta(f64),
    Lambda(f64),
    DeltaK(f64, usize),
}

impl Parameter {
    /// Scalar used to order parameters when breaking ties.
    pub fn magnitude(&self) -> f64 {
        match *self {
            Parameter::K(k) => k as f64,
            Parameter::Delta(d) | Parameter::Lambda(d) => d,
            Parameter::DeltaK(_, k) => k as f64,
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parameter::K(k) => write!(f, "k={k}"),
            Parameter::Delta(d) => write!(f, "delta={d}"),
            Parameter::Lambda(l) => write!(f, "lambda={l}"),
            Parameter::DeltaK(d, k) => write!(f, "delta={d};k={k}"),
        }
    }
}

impl FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("cannot parse parameter {s:?}"));
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad());
        let int = |v: &str| v.parse::<usize>().map_err(|_| bad());
        if let Some((d, k)) = s.split_once(';') {
            let d = d.strip_prefix("delta=").ok_or_else(bad)?;
            let k = k.strip_prefix("k=").ok_or_else(bad)?;
            return Ok(Parameter::DeltaK(num(d)?, int(k)?));
        }
        let (key, value) = s.split_once('=').ok_or_else(bad)?;
        match key {
            "k" => Ok(Parameter::K(int(value)?)),
            "delta" => Ok(Parameter::Delta(num(value)?)),
            "lambda" => Ok(Parameter::Lambda(num(value)?)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Parameter {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Parameter {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Outcome of one fit evaluated on held-out data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub test_rmse: f64,
    pub train_rmse: f64,
    pub sparsity: usize,
    pub iterations: usize,
    pub termination_reason: TerminationReason,
    pub wall_time: f64,
    pub parameter: Parameter,
}

impl fmt::Display for FitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "parameter: {}", self.parameter)?;
        writeln!(f, "test_rmse: {}", self.test_rmse)?;
        writeln!(f, "train_rmse: {}", self.train_rmse)?;
        writeln!(f, "sparsity: {}", self.sparsity)?;
        writeln!(f, "iterations: {}", self.iterations)?;
        writeln!(f, "termination_reason: {}", self.termination_reason)?;
        write!(f, "wall_time: {}", self.wall_time)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_dataset_is_valid() {
        let d = Dataset::from_scalars(&[0.0], vec![1.0], Role::Train).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.dim(), 1);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let err = Dataset::from_scalars(&[0.0, 1.0, 2.0], vec![1.0, 2.0], Role::Train);
        assert!(matches!(
            err,
            Err(Error::LengthMismatch {
                expected: 3,
                found: 2
            })
        ));
    }

    #[test]
    fn nan_target_is_rejected() {
        let err = Dataset::from_scalars(&[0.0], vec![f64::NAN], Role::Train);
        assert!(matches!(err, Err(Error::NonFinite(_))));
        let err = Dataset::from_scalars(&[f64::INFINITY], vec![0.0], Role::Train);
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }

    #[test]
    fn empty_dataset_is_rejected() {
        assert!(matches!(
            Dataset::new(vec![], vec![], Role::Test),
            Err(Error::Empty)
        ));
    }

    #[test]
    fn ragged_inputs_are_rejected() {
        let err = Dataset::new(vec![vec![0.0, 1.0], vec![0.0]], vec![1.0, 2.0], Role::Train);
        assert!(matches!(err, Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn duplicate_atoms_rejected() {
        assert!(SparseModel::new(vec![1, 2, 1], vec![0.1, 0.2, 0.3]).is_err());
    }

    #[test]
    fn model_csv_round_trip() {
        let m = SparseModel::new(vec![4, 0, 7], vec![0.5, -1.25e-7, 3.0])
            .unwrap()
            .with_truncation(1.5)
            .unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(SparseModel::read_csv(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn parameter_encoding_round_trip() {
        for p in [
            Parameter::K(12),
            Parameter::Delta(1e-6),
            Parameter::Lambda(0.25),
            Parameter::DeltaK(0.001, 7),
        ] {
            assert_eq!(p.to_string().parse::<Parameter>().unwrap(), p);
        }
        assert!("gamma=3".parse::<Parameter>().is_err());
    }
}
