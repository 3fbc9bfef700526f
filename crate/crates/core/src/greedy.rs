//! Atom-selection criteria and termination rules.
//!
//! The score of atom `g` against residual `r` is the normalized correlation
//! `|⟨r, g⟩_m| / ‖r‖_m`. With unit-norm atoms it is `|cos θ|` between the
//! two. A threshold `δ` restricts the candidates to atoms scoring strictly
//! above `δ` (the active atoms); an empty active set ends a fit.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::dictionary::DesignMatrix;
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::types::TerminationReason;

/// Relative residual size treated as an exact fit.
pub const ZERO_RESIDUAL_TOL: f64 = 1e-12;

/// Greedy threshold. Accepted range is `(0, 1)`; [`Delta::strict`] enforces
/// the narrower `(0, 1/2]` under which the learning-rate guarantees hold.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Delta(f64);

impl Delta {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {value}")))
        }
    }

    pub fn strict(value: f64) -> Result<Self> {
        if value > 0.0 && value <= 0.5 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidParameter(format!("delta must lie in (0, 1/2], got {value}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Delta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// How to pick among the candidate atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Selection {
    Max,
    SecondMax,
    ThirdMax,
    /// Uniformly random candidate.
    Random,
    /// First candidate in dictionary order; requires a threshold.
    First,
}

impl Selection {
    fn rank(self) -> Option<usize> {
        match self {
            Selection::Max => Some(1),
            Selection::SecondMax => Some(2),
            Selection::ThirdMax => Some(3),
            Selection::Random | Selection::First => None,
        }
    }

    fn token(self) -> &'static str {
        match self {
            Selection::Max => "max",
            Selection::SecondMax => "max2",
            Selection::ThirdMax => "max3",
            Selection::Random => "rand",
            Selection::First => "first",
        }
    }
}

impl FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" | "max1" => Ok(Selection::Max),
            "max2" => Ok(Selection::SecondMax),
            "max3" => Ok(Selection::ThirdMax),
            "rand" | "random" => Ok(Selection::Random),
            "first" => Ok(Selection::First),
            _ => Err(Error::InvalidParameter(format!("unknown selection rule {s:?}"))),
        }
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// A selection rule, optionally restricted to atoms above a threshold.
///
/// Encoded as `max`, `max2`, `max3`, `rand`, or with a threshold
/// `max@0.01`, `rand@0.01`, `first@0.01`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Criterion {
    selection: Selection,
    threshold: Option<Delta>,
}

impl Criterion {
    pub fn new(selection: Selection, threshold: Option<Delta>) -> Result<Self> {
        if selection == Selection::First && threshold.is_none() {
            return Err(Error::InvalidParameter(
                "first-above-threshold selection needs a threshold".into(),
            ));
        }
        Ok(Self {
            selection,
            threshold,
        })
    }

    pub fn unthresholded(selection: Selection) -> Result<Self> {
        Self::new(selection, None)
    }

    pub fn thresholded(selection: Selection, delta: Delta) -> Self {
        Self {
            selection,
            threshold: Some(delta),
        }
    }

    pub fn max() -> Self {
        Self {
            selection: Selection::Max,
            threshold: None,
        }
    }

    pub fn first(delta: Delta) -> Self {
        Self::thresholded(Selection::First, delta)
    }

    pub fn selection(&self) -> Selection {
        self.selection
    }

    pub fn threshold(&self) -> Option<Delta> {
        self.threshold
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.threshold {
            Some(d) => write!(f, "{}@{}", self.selection, d),
            None => write!(f, "{}", self.selection),
        }
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('@') {
            Some((sel, d)) => {
                let d: f64 = d
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad threshold in {s:?}")))?;
                Criterion::new(sel.parse()?, Some(Delta::new(d)?))
            }
            None => Criterion::new(s.parse()?, None),
        }
    }
}

/// When a greedy loop ends, besides exact fits.
///
/// Encoded as `k:<int>`, `delta:<real>` or `both:<real>,<int>`, optionally
/// prefixed with `stop=`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TerminationRule {
    FixedK(usize),
    /// No active atom, or `‖r‖_m ≤ δ‖y‖_m`.
    DeltaRule(Delta),
    /// No active atom, or `k ≥ k_max`.
    ThresholdAndK(Delta, usize),
}

impl fmt::Display for TerminationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerminationRule::FixedK(k) => write!(f, "k:{k}"),
            TerminationRule::DeltaRule(d) => write!(f, "delta:{d}"),
            TerminationRule::ThresholdAndK(d, k) => write!(f, "both:{d},{k}"),
        }
    }
}

impl FromStr for TerminationRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let body = s.strip_prefix("stop=").unwrap_or(s);
        let bad = || Error::InvalidParameter(format!("cannot parse termination rule {s:?}"));
        let k_of = |v: &str| -> Result<usize> {
            let k: usize = v.trim().parse().map_err(|_| bad())?;
            if k == 0 {
                return Err(Error::InvalidParameter("k_max must be at least 1".into()));
            }
            Ok(k)
        };
        let d_of = |v: &str| -> Result<Delta> { Delta::new(v.trim().parse().map_err(|_| bad())?) };
        let (kind, arg) = body.split_once(':').ok_or_else(bad)?;
        match kind {
            "k" => Ok(TerminationRule::FixedK(k_of(arg)?)),
            "delta" => Ok(TerminationRule::DeltaRule(d_of(arg)?)),
            "both" => {
                let (d, k) = arg.split_once(',').ok_or_else(bad)?;
                Ok(TerminationRule::ThresholdAndK(d_of(d)?, k_of(k)?))
            }
            _ => Err(bad()),
        }
    }
}

/// `|⟨r, g⟩_m| / ‖r‖_m`
pub fn correlation(residual: &[f64], residual_norm: f64, column: &[f64]) -> Result<f64> {
    if residual.len() != column.len() {
        return Err(Error::LengthMismatch {
            expected: residual.len(),
            found: column.len(),
        });
    }
    if !(residual_norm > 0.0) {
        return Err(Error::ZeroResidual);
    }
    Ok(raw_score(residual, residual_norm, column))
}

fn raw_score(residual: &[f64], residual_norm: f64, column: &[f64]) -> f64 {
    (dot(residual, column) / residual.len() as f64).abs() / residual_norm
}

/// Lazily computed scores of every atom against one residual.
///
/// Reused across retries within a single greedy iteration, when the
/// residual does not change.
pub(crate) struct Scores<'a> {
    dm: &'a DesignMatrix,
    residual: &'a [f64],
    residual_norm: f64,
    values: Vec<f64>,
}

impl<'a> Scores<'a> {
    pub(crate) fn new(dm: &'a DesignMatrix, residual: &'a [f64], residual_norm: f64) -> Self {
        Self {
            dm,
            residual,
            residual_norm,
            values: vec![f64::NAN; dm.cols()],
        }
    }

    pub(crate) fn get(&mut self, j: usize) -> f64 {
        let v = self.values[j];
        if !v.is_nan() {
            return v;
        }
        let s = raw_score(self.residual, self.residual_norm, self.dm.column(j));
        self.values[j] = s;
        s
    }

    fn max_live(&mut self) -> f64 {
        (0..self.dm.cols())
            .filter(|&j| !self.dm.is_dead(j))
            .map(|j| self.get(j))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn select_with<R: Rng + ?Sized>(
    scores: &mut Scores<'_>,
    criterion: &Criterion,
    excluded: &[bool],
    rng: &mut R,
) -> Option<usize> {
    let dm = scores.dm;
    let delta = criterion.threshold.map(Delta::value);
    let open = |j: usize| !dm.is_dead(j) && !excluded[j];

    match criterion.selection {
        Selection::First => {
            let d = delta.expect("first selection always carries a threshold");
            (0..dm.cols()).find(|&j| open(j) && scores.get(j) > d)
        }
        Selection::Random => {
            let pool: Vec<usize> = match delta {
                Some(d) => (0..dm.cols()).filter(|&j| open(j) && scores.get(j) > d).collect(),
                None => (0..dm.cols()).filter(|&j| open(j)).collect(),
            };
            if pool.is_empty() {
                None
            } else {
                Some(pool[rng.random_range(0..pool.len())])
            }
        }
        sel => {
            let rank = sel.rank().expect("ranked selection");
            // top `rank` candidates, descending score, ties to lower index
            let mut top: Vec<(f64, usize)> = Vec::with_capacity(rank + 1);
            for j in 0..dm.cols() {
                if !open(j) {
                    continue;
                }
                let s = scores.get(j);
                if delta.is_some_and(|d| s <= d) {
                    continue;
                }
                if top.len() == rank && s <= top[rank - 1].0 {
                    continue;
                }
                let pos = top.iter().position(|&(t, _)| s > t).unwrap_or(top.len());
                top.insert(pos, (s, j));
                top.truncate(rank);
            }
            top.last().map(|&(_, j)| j)
        }
    }
}

/// Picks the next atom under `criterion`, skipping dead and `excluded` atoms.
///
/// Ranked rules fall back to the lowest-ranked available candidate when the
/// pool is smaller than the requested rank. `Ok(None)` means no atom is
/// eligible (no active atom, for thresholded rules).
pub fn select_atom<R: Rng + ?Sized>(
    dm: &DesignMatrix,
    residual: &[f64],
    residual_norm: f64,
    criterion: &Criterion,
    excluded: &[bool],
    rng: &mut R,
) -> Result<Option<usize>> {
    if residual.len() != dm.rows() {
        return Err(Error::LengthMismatch {
            expected: dm.rows(),
            found: residual.len(),
        });
    }
    if excluded.len() != dm.cols() {
        return Err(Error::LengthMismatch {
            expected: dm.cols(),
            found: excluded.len(),
        });
    }
    if !(residual_norm > 0.0) {
        return Err(Error::ZeroResidual);
    }
    let mut scores = Scores::new(dm, residual, residual_norm);
    Ok(select_with(&mut scores, criterion, excluded, rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop(TerminationReason),
}

impl StopDecision {
    pub fn is_stop(self) -> bool {
        matches!(self, StopDecision::Stop(_))
    }
}

/// Evaluates `rule` after `k` selected atoms.
///
/// Checks an exact fit first, then the iteration budget, then the residual
/// ratio `‖r‖_m ≤ δ‖y‖_m`, then whether every live atom scores `≤ δ`.
pub fn should_stop(
    dm: &DesignMatrix,
    residual: &[f64],
    residual_norm: f64,
    y_norm: f64,
    k: usize,
    rule: &TerminationRule,
) -> StopDecision {
    if residual_norm <= ZERO_RESIDUAL_TOL * y_norm || residual_norm == 0.0 {
        return StopDecision::Stop(TerminationReason::ZeroResidual);
    }
    let (delta, k_max) = match *rule {
        TerminationRule::FixedK(k_max) => (None, Some(k_max)),
        TerminationRule::DeltaRule(d) => (Some(d.value()), None),
        TerminationRule::ThresholdAndK(d, k_max) => (Some(d.value()), Some(k_max)),
    };
    if k_max.is_some_and(|km| k >= km) {
        return StopDecision::Stop(TerminationReason::FixedK);
    }
    if let Some(d) = delta {
        if matches!(rule, TerminationRule::DeltaRule(_)) && residual_norm <= d * y_norm {
            return StopDecision::Stop(TerminationReason::ResidualRatio);
        }
        let mut scores = Scores::new(dm, residual, residual_norm);
        if scores.max_live() <= d {
            return StopDecision::Stop(TerminationReason::NoActiveAtom);
        }
    }
    StopDecision::Continue
}
