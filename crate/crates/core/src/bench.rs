//! Experiment harness: parameter sweeps over seeds and noise levels,
//! test-set oracle parameter selection, timing and report emission.
//!
//! A sweep is a pure function of its [`ExperimentConfig`]: every random
//! draw comes from a ChaCha stream keyed by the master seed and a counter
//! naming the noise level, the seed index and the purpose of the draw.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{fit_delta_togl, fit_ogl, fit_pgl, fit_togl, FitTrace};
use crate::baselines::{fit_fista, fit_ridge, DenseModel, FISTA_MAX_ITER, FISTA_TOL};
use crate::data::{gen_sinc, load_csv, split_half, zscore_fit_apply, TargetColumn, ZScoreParams};
use crate::dictionary::{
    build_rbf_from_samples, build_rbf_uniform, evaluate_design, normalize_columns, DesignMatrix,
    RbfSpec,
};
use crate::error::{Error, Result};
use crate::greedy::{Criterion, Delta, Selection};
use crate::linalg::{rmse, truncate_all};
use crate::types::{Dataset, FitReport, Parameter, TerminationReason};

/// Runs `f` and returns its output with the elapsed wall-clock seconds.
pub fn time_fit<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// Parameter grid: an explicit list or `count` log-spaced points.
///
/// Encoded as `lo:hi:count` (log-spaced, inclusive) or `v1,v2,...`.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Log { lo: f64, hi: f64, count: usize },
    List(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Log { lo, hi, count } => log_space(*lo, *hi, *count),
        }
    }
}

pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| {
                    if i == count - 1 {
                        hi
                    } else {
                        round_significant((a + (b - a) * i as f64 / (count - 1) as f64).exp())
                    }
                })
                .collect()
        }
    }
}

/// Rounds to 10 significant digits so grid values print cleanly.
fn round_significant(v: f64) -> f64 {
    format!("{v:.9e}").parse().unwrap_or(v)
}

impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse grid {s:?}"));
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        let parts: Vec<&str> = s.split(':').collect();
        let grid = match parts.as_slice() {
            [lo, hi, count] => Grid::Log {
                lo: num(lo)?,
                hi: num(hi)?,
                count: count.trim().parse().map_err(|_| bad())?,
            },
            [list] => Grid::List(list.split(',').map(num).collect::<Result<_>>()?),
            _ => return Err(bad()),
        };
        match &grid {
            Grid::Log { lo, hi, count } if !(*lo > 0.0 && lo <= hi && *count > 0) => Err(bad()),
            Grid::List(v) if v.is_empty() => Err(bad()),
            _ => Ok(grid),
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grid::Log { lo, hi, count } => write!(f, "{lo}:{hi}:{count}"),
            Grid::List(v) => {
                let s: Vec<String> = v.iter().map(f64::to_string).collect();
                f.write_str(&s.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodKind {
    /// OGL k-sweep from a single fit.
    Ogl(Selection),
    /// TOGL: δ grid × k grid, one fit per δ.
    Togl(Selection),
    /// δ-TOGL: one fit per δ.
    DeltaTogl(Selection),
    /// Pure greedy, sampled along one long fit.
    Pgl,
    Ridge,
    Fista,
}

/// A method and, optionally, a pinned parameter that replaces its grid.
///
/// Encodings: `ogl:max`, `ogl:max2`, `ogl:max3`, `ogl:rand`, `togl:<sel>`,
/// `dtogl:<sel>` with `<sel>` one of `max`, `max2`, `max3`, `rand`,
/// `first`, then `pgl`, `ridge`, `fista`. A suffix `@<value>` pins k
/// (OGL, PGL), δ (TOGL, δ-TOGL) or λ (ridge, FISTA).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSpec {
    pub kind: MethodKind,
    pub fixed: Option<f64>,
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |why: &str| Error::Config(format!("bad method {s:?}: {why}"));
        let (body, fixed) = match s.split_once('@') {
            Some((b, v)) => (b, Some(v.parse::<f64>().map_err(|_| bad("parameter is not a number"))?)),
            None => (s, None),
        };
        let sel = |v: &str| v.parse::<Selection>().map_err(|_| bad("unknown selection rule"));
        let kind = match body.split_once(':') {
            Some(("ogl", v)) => {
                let sel = sel(v)?;
                if sel == Selection::First {
                    return Err(bad("OGL has no threshold, use max, max2, max3 or rand"));
                }
                MethodKind::Ogl(sel)
            }
            Some(("togl", v)) => MethodKind::Togl(sel(v)?),
            Some(("dtogl", v)) => MethodKind::DeltaTogl(sel(v)?),
            None if body == "pgl" => MethodKind::Pgl,
            None if body == "ridge" => MethodKind::Ridge,
            None if body == "fista" => MethodKind::Fista,
            _ => return Err(bad("unknown method")),
        };
        if let Some(v) = fixed {
            let ok = match kind {
                MethodKind::Ogl(_) | MethodKind::Pgl => v >= 1.0 && v.fract() == 0.0,
                MethodKind::Togl(_) | MethodKind::DeltaTogl(_) => Delta::new(v).is_ok(),
                MethodKind::Ridge | MethodKind::Fista => v > 0.0,
            };
            if !ok {
                return Err(bad("pinned parameter out of range"));
            }
        }
        Ok(MethodSpec { kind, fixed })
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            MethodKind::Ogl(s) => write!(f, "ogl:{s}")?,
            MethodKind::Togl(s) => write!(f, "togl:{s}")?,
            MethodKind::DeltaTogl(s) => write!(f, "dtogl:{s}")?,
            MethodKind::Pgl => f.write_str("pgl")?,
            MethodKind::Ridge => f.write_str("ridge")?,
            MethodKind::Fista => f.write_str("fista")?,
        }
        if let Some(v) = self.fixed {
            write!(f, "@{v}")?;
        }
        Ok(())
    }
}

pub fn parse_methods(s: &str) -> Result<Vec<MethodSpec>> {
    let methods: Vec<MethodSpec> = s
        .split(',')
        .filter(|m| !m.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if methods.is_empty() {
        return Err(Error::Config("no methods given".into()));
    }
    Ok(methods)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    /// `sinc` on `[−π, π]` with Gaussian noise at each level in `sigmas`.
    Sinc {
        m_train: usize,
        m_test: usize,
        n: usize,
        sigmas: Vec<f64>,
    },
    /// A real dataset, halved at random per seed and z-scored.
    Csv {
        path: PathBuf,
        target: TargetColumn,
        header: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaMode {
    Fixed(f64),
    /// `d_max / √(2n)` with centers at the training inputs.
    FromData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: Task,
    pub eta: EtaMode,
    /// Scale atoms to unit empirical norm before fitting.
    pub normalize: bool,
    pub methods: Vec<MethodSpec>,
    /// OGL/TOGL k grid is `1..=min(n, k_max)`.
    pub k_max: usize,
    pub delta_grid: Grid,
    pub lambda_grid: Grid,
    pub pgl_max_iter: usize,
    /// Number of log-spaced checkpoints along the PGL path.
    pub pgl_points: usize,
    pub fista_max_iter: usize,
    pub fista_tol: f64,
    pub seeds: usize,
    pub master_seed: u64,
    /// Add design-matrix materialization time to every fit's time.
    pub include_design_time: bool,
    /// When false, every `seconds` entry is zero so output is byte-stable.
    pub record_time: bool,
    /// Run sweep cells on a worker pool. Timings are cleaner when false.
    pub parallel: bool,
}

impl ExperimentConfig {
    /// Defaults for the sinc benchmark: `m₁ = m₂ = 1000`, `n = 300`,
    /// `η = 1`, σ ∈ {0.1, 0.5, 1, 2}, 10 seeds.
    pub fn sinc_default() -> Self {
        Self {
            task: Task::Sinc {
                m_train: 1000,
                m_test: 1000,
                n: 300,
                sigmas: vec![0.1, 0.5, 1.0, 2.0],
            },
            eta: EtaMode::Fixed(1.0),
            normalize: true,
            methods: vec![
                MethodSpec {
                    kind: MethodKind::Ogl(Selection::Max),
                    fixed: None,
                },
                MethodSpec {
                    kind: MethodKind::DeltaTogl(Selection::First),
                    fixed: None,
                },
            ],
            k_max: 300,
            delta_grid: Grid::Log {
                lo: 1e-6,
                hi: 0.5,
                count: 50,
            },
            lambda_grid: Grid::Log {
                lo: 1e-8,
                hi: 1e-1,
                count: 15,
            },
            pgl_max_iter: 10_000,
            pgl_points: 40,
            fista_max_iter: FISTA_MAX_ITER,
            fista_tol: FISTA_TOL,
            seeds: 10,
            master_seed: 0,
            include_design_time: false,
            record_time: true,
            parallel: true,
        }
    }

    pub fn csv_default(path: impl Into<PathBuf>, target: TargetColumn) -> Self {
        Self {
            task: Task::Csv {
                path: path.into(),
                target,
                header: true,
            },
            eta: EtaMode::FromData,
            ..Self::sinc_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("no methods given".into()));
        }
        if self.seeds == 0 {
            return Err(Error::Config("need at least one seed".into()));
        }
        if self.k_max == 0 || self.pgl_max_iter == 0 || self.pgl_points == 0 {
            return Err(Error::Config("iteration budgets must be positive".into()));
        }
        for (name, g) in [("delta", &self.delta_grid), ("lambda", &self.lambda_grid)] {
            if g.values().is_empty() {
                return Err(Error::Config(format!("{name} grid is empty")));
            }
        }
        if self.delta_grid.values().iter().any(|&d| Delta::new(d).is_err()) {
            return Err(Error::Config("delta grid must lie in (0, 1)".into()));
        }
        if self.lambda_grid.values().iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Config("lambda grid must be positive".into()));
        }
        if let EtaMode::Fixed(e) = self.eta {
            if !(e > 0.0) {
                return Err(Error::Config("eta must be positive".into()));
            }
        }
        match &self.task {
            Task::Sinc {
                m_train,
                m_test,
                n,
                sigmas,
            } => {
                if *m_train == 0 || *m_test == 0 || *n == 0 {
                    return Err(Error::Config("sample and dictionary sizes must be positive".into()));
                }
                if sigmas.is_empty() || sigmas.iter().any(|s| !(*s >= 0.0)) {
                    return Err(Error::Config("noise levels must be nonnegative".into()));
                }
                if self.eta == EtaMode::FromData {
                    return Err(Error::Config("data-driven eta needs a csv task".into()));
                }
            }
            Task::Csv { .. } => {}
        }
        Ok(())
    }

    fn sigmas(&self) -> Vec<f64> {
        match &self.task {
            Task::Sinc { sigmas, .. } => sigmas.clone(),
            Task::Csv { .. } => vec![0.0],
        }
    }
}

/// Random stream `purpose` for seed `seed_idx` at noise level `sigma_idx`.
pub fn stream_rng(master: u64, sigma_idx: usize, seed_idx: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((sigma_idx as u64) << 40) | ((seed_idx as u64) << 16) | purpose);
    rng
}

const STREAM_DATA: u64 = 0;
const STREAM_DICTIONARY: u64 = 1;
const STREAM_METHOD: u64 = 16;

/// One train/test problem with its materialized designs.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: RbfSpec,
    /// Training design (normalized when requested).
    pub train_design: DesignMatrix,
    /// Test design, raw atoms.
    pub test_design: DesignMatrix,
    pub y_train: Vec<f64>,
    /// Test targets in reporting units.
    pub y_test: Vec<f64>,
    /// Predictions are clamped to `[−M, M]` with `M = max |y_train|`.
    pub bound: Option<f64>,
    /// Maps fitted-scale predictions back to reporting units.
    pub zscore: Option<ZScoreParams>,
    /// Seconds spent building both design matrices.
    pub design_seconds: f64,
}

/// Errors of a fitted model on its problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub test_rmse: f64,
    pub train_rmse: f64,
    pub untruncated_test_rmse: f64,
}

impl Problem {
    pub fn new(
        spec: RbfSpec,
        train: &Dataset,
        test: &Dataset,
        normalize: bool,
        zscore: Option<ZScoreParams>,
        y_test_report: Vec<f64>,
    ) -> Result<Self> {
        let (designs, design_seconds) = time_fit(|| -> Result<_> {
            let raw = evaluate_design(&spec, train.inputs())?;
            let train_design = if normalize { normalize_columns(raw) } else { raw };
            Ok((train_design, evaluate_design(&spec, test.inputs())?))
        });
        let (train_design, test_design) = designs?;
        let bound = train.targets().iter().fold(0.0f64, |m, y| m.max(y.abs()));
        Ok(Self {
            spec,
            train_design,
            test_design,
            y_train: train.targets().to_vec(),
            y_test: y_test_report,
            bound: (bound > 0.0).then_some(bound),
            zscore,
            design_seconds,
        })
    }

    /// A seeded sinc instance with uniformly drawn centers.
    pub fn sinc(
        m_train: usize,
        m_test: usize,
        n: usize,
        sigma: f64,
        eta: f64,
        normalize: bool,
        data_rng: &mut ChaCha8Rng,
        dict_rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let (train, test) = gen_sinc(m_train, m_test, sigma, data_rng)?;
        let spec = build_rbf_uniform(
            n,
            -std::f64::consts::PI,
            std::f64::consts::PI,
            eta,
            dict_rng,
        )?;
        let y_test = test.targets().to_vec();
        Self::new(spec, &train, &test, normalize, None, y_test)
    }

    /// Random halves of `data`, z-scored on the training half, with a
    /// dictionary centered on the training inputs.
    pub fn from_dataset(data: &Dataset, eta: EtaMode, normalize: bool, rng: &mut ChaCha8Rng) -> Result<Self> {
        let (train, test) = split_half(data, rng)?;
        let y_test = test.targets().to_vec();
        let (train, test, params) = zscore_fit_apply(&train, &test)?;
        let centered = build_rbf_from_samples(train.inputs())?;
        let spec = match eta {
            EtaMode::FromData => centered,
            EtaMode::Fixed(e) => RbfSpec::new(centered.centers().to_vec(), e)?,
        };
        Self::new(spec, &train, &test, normalize, Some(params), y_test)
    }

    fn report_units(&self, mut pred: Vec<f64>) -> Vec<f64> {
        if let Some(z) = &self.zscore {
            pred.iter_mut().for_each(|p| *p = z.invert_target(*p));
        }
        pred
    }

    /// RMSE of truncated (and untruncated) predictions on test and train.
    pub fn score(&self, test_pred: Vec<f64>, train_pred: Vec<f64>) -> Result<Scores> {
        let untruncated = rmse(&self.report_units(test_pred.clone()), &self.y_test)?;
        let (mut test_pred, mut train_pred) = (test_pred, train_pred);
        if let Some(m) = self.bound {
            truncate_all(&mut test_pred, m)?;
            truncate_all(&mut train_pred, m)?;
        }
        let y_train_report = self.report_units(self.y_train.clone());
        Ok(Scores {
            test_rmse: rmse(&self.report_units(test_pred), &self.y_test)?,
            train_rmse: rmse(&self.report_units(train_pred), &y_train_report)?,
            untruncated_test_rmse: untruncated,
        })
    }

    pub fn score_dense(&self, model: &DenseModel) -> Result<Scores> {
        self.score(model.predict(&self.test_design)?, model.predict(&self.train_design)?)
    }

    /// Scores of the prefix models at step counts `ks` (ascending).
    pub fn score_path(&self, trace: &FitTrace, ks: &[usize]) -> Result<Vec<Scores>> {
        let test = trace.predictions_at(&self.test_design, ks)?;
        let train = trace.predictions_at(&self.train_design, ks)?;
        test.into_iter().zip(train).map(|(t, r)| self.score(t, r)).collect()
    }
}

/// One fitted parameter value on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub param: Parameter,
    pub sigma: f64,
    pub seed: usize,
    pub test_rmse: f64,
    pub train_rmse: f64,
    pub sparsity: usize,
    pub iterations: usize,
    pub termination: TerminationReason,
    pub seconds: f64,
    /// Test RMSE before clamping predictions to `[−M, M]`.
    pub untruncated_test_rmse: f64,
}

impl ReportRow {
    pub fn report(&self) -> FitReport {
        FitReport {
            test_rmse: self.test_rmse,
            train_rmse: self.train_rmse,
            sparsity: self.sparsity,
            iterations: self.iterations,
            termination_reason: self.termination,
            wall_time: self.seconds,
            parameter: self.param,
        }
    }

    pub fn failed(&self) -> bool {
        self.termination == TerminationReason::Failed
    }
}

/// Total fitting time of one method on one (σ, seed) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTiming {
    pub method: String,
    pub sigma: f64,
    pub seed: usize,
    pub seconds: f64,
    pub fits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<ReportRow>,
    pub timings: Vec<CellTiming>,
}

impl SweepResult {
    /// Total fitting seconds of `method` across every cell.
    pub fn total_seconds(&self, method: &str) -> f64 {
        self.timings.iter().filter(|t| t.method == method).map(|t| t.seconds).sum()
    }
}

struct CellContext<'a> {
    config: &'a ExperimentConfig,
    problem: &'a Problem,
    sigma: f64,
    seed: usize,
}

impl CellContext<'_> {
    fn row(&self, method: &MethodSpec, param: Parameter) -> ReportRow {
        ReportRow {
            method: method.to_string(),
            param,
            sigma: self.sigma,
            seed: self.seed,
            test_rmse: f64::NAN,
            train_rmse: f64::NAN,
            sparsity: 0,
            iterations: 0,
            termination: TerminationReason::Failed,
            seconds: 0.0,
            untruncated_test_rmse: f64::NAN,
        }
    }

    fn seconds(&self, fit_seconds: f64) -> f64 {
        if !self.config.record_time {
            return 0.0;
        }
        if self.config.include_design_time {
            fit_seconds + self.problem.design_seconds
        } else {
            fit_seconds
        }
    }

    fn fill(&self, row: &mut ReportRow, scores: Scores) {
        row.test_rmse = scores.test_rmse;
        row.train_rmse = scores.train_rmse;
        row.untruncated_test_rmse = scores.untruncated_test_rmse;
    }

    /// Rows for step counts `ks` of one greedy fit.
    fn path_rows(
        &self,
        method: &MethodSpec,
        trace: &FitTrace,
        ks: &[usize],
        param: impl Fn(usize) -> Parameter,
    ) -> Result<Vec<ReportRow>> {
        let scores = self.problem.score_path(trace, ks)?;
        let atoms = trace.selected_atoms();
        let mut seen = vec![false; self.problem.train_design.cols()];
        let mut distinct = 0;
        let mut done = 0;
        let mut rows = Vec::with_capacity(ks.len());
        for (&k, s) in ks.iter().zip(scores) {
            let steps = k.min(trace.len());
            for &a in &atoms[done..steps] {
                if !std::mem::replace(&mut seen[a], true) {
                    distinct += 1;
                }
            }
            done = done.max(steps);
            let mut row = self.row(method, param(k));
            self.fill(&mut row, s);
            row.sparsity = distinct;
            row.iterations = steps;
            row.termination = if k < trace.len() {
                TerminationReason::FixedK
            } else {
                trace.termination()
            };
            row.seconds = self.seconds(if steps == 0 { 0.0 } else { trace.elapsed_seconds()[steps - 1] });
            rows.push(row);
        }
        Ok(rows)
    }

    fn dense_row(&self, method: &MethodSpec, lambda: f64, fit: Result<DenseModel>, secs: f64) -> ReportRow {
        let mut row = self.row(method, Parameter::Lambda(lambda));
        let outcome = fit.and_then(|m| Ok((self.problem.score_dense(&m)?, m)));
        if let Ok((s, m)) = outcome {
            self.fill(&mut row, s);
            row.sparsity = m.sparsity();
            row.iterations = m.iterations_used;
            row.termination = m.termination;
            row.seconds = self.seconds(secs);
        }
        row
    }
}

fn k_grid(config: &ExperimentConfig, n: usize) -> Vec<usize> {
    (1..=config.k_max.min(n)).collect()
}

fn pgl_grid(config: &ExperimentConfig) -> Vec<usize> {
    let mut ks: Vec<usize> = log_space(1.0, config.pgl_max_iter as f64, config.pgl_points)
        .into_iter()
        .map(|v| v.round() as usize)
        .collect();
    ks.dedup();
    ks
}

/// Grid of parameters each method is swept over for a dictionary of size `n`.
pub fn method_grid(config: &ExperimentConfig, method: &MethodSpec, n: usize) -> Vec<Parameter> {
    let deltas = || match method.fixed {
        Some(d) => vec![d],
        None => config.delta_grid.values(),
    };
    match method.kind {
        MethodKind::Ogl(_) => match method.fixed {
            Some(k) => vec![Parameter::K(k as usize)],
            None => k_grid(config, n).into_iter().map(Parameter::K).collect(),
        },
        MethodKind::Pgl => match method.fixed {
            Some(k) => vec![Parameter::K(k as usize)],
            None => pgl_grid(config).into_iter().map(Parameter::K).collect(),
        },
        MethodKind::Togl(_) => deltas()
            .into_iter()
            .flat_map(|d| k_grid(config, n).into_iter().map(move |k| Parameter::DeltaK(d, k)))
            .collect(),
        MethodKind::DeltaTogl(_) => deltas().into_iter().map(Parameter::Delta).collect(),
        MethodKind::Ridge | MethodKind::Fista => match method.fixed {
            Some(l) => vec![Parameter::Lambda(l)],
            None => config.lambda_grid.values().into_iter().map(Parameter::Lambda).collect(),
        },
    }
}

/// Runs one method on one problem: rows in grid order plus total fit time.
fn run_method(
    ctx: &CellContext<'_>,
    method: &MethodSpec,
    rng: &mut ChaCha8Rng,
) -> (Vec<ReportRow>, f64, usize) {
    let problem = ctx.problem;
    let dm = &problem.train_design;
    let y = &problem.y_train;
    let grid = method_grid(ctx.config, method, dm.cols());
    let failed = |grid: &[Parameter]| grid.iter().map(|p| ctx.row(method, *p)).collect::<Vec<_>>();

    match method.kind {
        MethodKind::Ogl(_) | MethodKind::Pgl => {
            let ks: Vec<usize> = grid
                .iter()
                .map(|p| match p {
                    Parameter::K(k) => *k,
                    _ => unreachable!("k grid"),
                })
                .collect();
            let k_top = ks.iter().copied().max().unwrap_or(1);
            let (trace, secs) = time_fit(|| match method.kind {
                MethodKind::Ogl(sel) => {
                    let crit = Criterion::unthresholded(sel)?;
                    fit_ogl(dm, y, &crit, k_top, rng)
                }
                _ => fit_pgl(dm, y, k_top),
            });
            match trace.and_then(|t| ctx.path_rows(method, &t, &ks, Parameter::K)) {
                Ok(rows) => (rows, secs, 1),
                Err(_) => (failed(&grid), secs, 1),
            }
        }
        MethodKind::Togl(sel) => {
            let deltas: Vec<f64> = match method.fixed {
                Some(d) => vec![d],
                None => ctx.config.delta_grid.values(),
            };
            let ks = k_grid(ctx.config, dm.cols());
            let k_top = ks.last().copied().unwrap_or(1);
            let mut rows = Vec::new();
            let mut total = 0.0;
            for &d in &deltas {
                let (trace, secs) = time_fit(|| {
                    let crit = Criterion::thresholded(sel, Delta::new(d)?);
                    fit_togl(dm, y, &crit, k_top, rng)
                });
                total += secs;
                let sub: Vec<Parameter> = ks.iter().map(|&k| Parameter::DeltaK(d, k)).collect();
                match trace.and_then(|t| ctx.path_rows(method, &t, &ks, |k| Parameter::DeltaK(d, k))) {
                    Ok(r) => rows.extend(r),
                    Err(_) => rows.extend(failed(&sub)),
                }
            }
            (rows, total, deltas.len())
        }
        MethodKind::DeltaTogl(sel) => {
            let mut rows = Vec::with_capacity(grid.len());
            let mut total = 0.0;
            for p in &grid {
                let Parameter::Delta(d) = *p else { unreachable!("delta grid") };
                let (trace, secs) = time_fit(|| fit_delta_togl(dm, y, Delta::new(d)?, sel, rng));
                total += secs;
                let last = trace.and_then(|t| {
                    let k = t.len();
                    let mut r = ctx.path_rows(method, &t, &[k], |_| *p)?;
                    let mut row = r.pop().expect("one row");
                    row.seconds = ctx.seconds(secs);
                    Ok(row)
                });
                rows.push(last.unwrap_or_else(|_| ctx.row(method, *p)));
            }
            (rows, total, grid.len())
        }
        MethodKind::Ridge | MethodKind::Fista => {
            let mut rows = Vec::with_capacity(grid.len());
            let mut total = 0.0;
            for p in &grid {
                let Parameter::Lambda(l) = *p else { unreachable!("lambda grid") };
                let (fit, secs) = time_fit(|| match method.kind {
                    MethodKind::Ridge => fit_ridge(dm, y, l),
                    _ => fit_fista(dm, y, l, ctx.config.fista_max_iter, ctx.config.fista_tol),
                });
                total += secs;
                rows.push(ctx.dense_row(method, l, fit, secs));
            }
            (rows, total, grid.len())
        }
    }
}

struct Cell {
    sigma_idx: usize,
    sigma: f64,
    seed_idx: usize,
}

fn run_cell(
    config: &ExperimentConfig,
    dataset: Option<&Dataset>,
    cell: &Cell,
) -> Result<Vec<(usize, Vec<ReportRow>, CellTiming)>> {
    let mut data_rng = stream_rng(config.master_seed, cell.sigma_idx, cell.seed_idx, STREAM_DATA);
    let mut dict_rng = stream_rng(config.master_seed, cell.sigma_idx, cell.seed_idx, STREAM_DICTIONARY);
    let problem = match (&config.task, dataset) {
        (Task::Sinc { m_train, m_test, n, .. }, _) => {
            let EtaMode::Fixed(eta) = config.eta else {
                return Err(Error::Config("data-driven eta needs a csv task".into()));
            };
            Problem::sinc(*m_train, *m_test, *n, cell.sigma, eta, config.normalize, &mut data_rng, &mut dict_rng)?
        }
        (Task::Csv { .. }, Some(d)) => Problem::from_dataset(d, config.eta, config.normalize, &mut data_rng)?,
        (Task::Csv { .. }, None) => return Err(Error::Config("csv task without data".into())),
    };
    let ctx = CellContext {
        config,
        problem: &problem,
        sigma: cell.sigma,
        seed: cell.seed_idx,
    };
    Ok(config
        .methods
        .iter()
        .enumerate()
        .map(|(mi, method)| {
            let mut rng =
                stream_rng(config.master_seed, cell.sigma_idx, cell.seed_idx, STREAM_METHOD + mi as u64);
            let (rows, secs, fits) = run_method(&ctx, method, &mut rng);
            let timing = CellTiming {
                method: method.to_string(),
                sigma: cell.sigma,
                seed: cell.seed_idx,
                seconds: ctx.seconds(secs),
                fits,
            };
            (mi, rows, timing)
        })
        .collect())
}

/// Fits every method at every grid value on every (σ, seed) cell.
///
/// Rows come back ordered by method, σ, seed and grid position regardless
/// of execution order. A fit that fails yields rows with NaN metrics and
/// termination `Failed`; only configuration and data-loading problems are
/// returned as errors.
pub fn sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let dataset = match &config.task {
        Task::Csv { path, target, header } => Some(load_csv(path, target, *header)?),
        Task::Sinc { .. } => None,
    };
    let cells: Vec<Cell> = config
        .sigmas()
        .into_iter()
        .enumerate()
        .flat_map(|(sigma_idx, sigma)| {
            (0..config.seeds).map(move |seed_idx| Cell {
                sigma_idx,
                sigma,
                seed_idx,
            })
        })
        .collect();

    let run = |cell: &Cell| run_cell(config, dataset.as_ref(), cell);
    let per_cell: Vec<_> = if config.parallel {
        cells.par_iter().map(run).collect::<Result<_>>()?
    } else {
        cells.iter().map(run).collect::<Result<_>>()?
    };

    let mut keyed = Vec::new();
    let mut timings = Vec::new();
    for (cell, results) in cells.iter().zip(per_cell) {
        for (mi, rows, timing) in results {
            keyed.push(((mi, cell.sigma_idx, cell.seed_idx), rows));
            timings.push(((mi, cell.sigma_idx, cell.seed_idx), timing));
        }
    }
    keyed.sort_by_key(|(k, _)| *k);
    timings.sort_by_key(|(k, _)| *k);
    Ok(SweepResult {
        rows: keyed.into_iter().flat_map(|(_, r)| r).collect(),
        timings: timings.into_iter().map(|(_, t)| t).collect(),
    })
}

/// Best grid value of one method at one noise level, averaged over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub method: String,
    pub sigma: f64,
    pub param: Parameter,
    pub mean_test_rmse: f64,
    /// Standard error of the mean over seeds.
    pub se_test_rmse: f64,
    pub mean_sparsity: f64,
    pub mean_iterations: f64,
    pub mean_seconds: f64,
    pub seeds: usize,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// For each (method, σ), the grid value with the lowest mean test RMSE.
///
/// Ties go to the smaller mean sparsity, then to the smaller parameter.
/// Failed rows are ignored. Output follows first appearance in `rows`.
pub fn oracle_select(rows: &[ReportRow]) -> Result<Vec<OracleRow>> {
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut groups: Vec<((String, u64), Vec<(String, Vec<&ReportRow>)>)> = Vec::new();
    let mut group_index: HashMap<(String, u64), usize> = HashMap::new();
    for row in rows.iter().filter(|r| !r.failed() && r.test_rmse.is_finite()) {
        let key = (row.method.clone(), row.sigma.to_bits());
        let gi = *group_index.entry(key.clone()).or_insert_with(|| {
            groups.push((key, Vec::new()));
            groups.len() - 1
        });
        let params = &mut groups[gi].1;
        let p = row.param.to_string();
        match params.iter_mut().find(|(q, _)| *q == p) {
            Some((_, v)) => v.push(row),
            None => params.push((p, vec![row])),
        }
    }

    let mut out = Vec::with_capacity(groups.len());
    for ((method, sigma_bits), params) in groups {
        let candidates = params.into_iter().map(|(_, rs)| {
            let rm: Vec<f64> = rs.iter().map(|r| r.test_rmse).collect();
            let (mean, se) = mean_se(&rm);
            let avg = |f: &dyn Fn(&ReportRow) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / rs.len() as f64;
            OracleRow {
                method: method.clone(),
                sigma: f64::from_bits(sigma_bits),
                param: rs[0].param,
                mean_test_rmse: mean,
                se_test_rmse: se,
                mean_sparsity: avg(&|r| r.sparsity as f64),
                mean_iterations: avg(&|r| r.iterations as f64),
                mean_seconds: avg(&|r| r.seconds),
                seeds: rs.len(),
            }
        });
        let best = candidates
            .reduce(|best, c| {
                let better = c
                    .mean_test_rmse
                    .total_cmp(&best.mean_test_rmse)
                    .then(c.mean_sparsity.total_cmp(&best.mean_sparsity))
                    .then(c.param.magnitude().total_cmp(&best.param.magnitude()))
                    .is_lt();
                if better {
                    c
                } else {
                    best
                }
            })
            .expect("groups are nonempty");
        out.push(best);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(Error::Config(format!("unknown report format {s:?}"))),
        }
    }
}

/// Line that separates per-run rows from the aggregate block in CSV reports.
pub const AGGREGATE_MARKER: &str = "# aggregate";

const ROW_COLUMNS: [&str; 11] = [
    "method",
    "param",
    "sigma",
    "seed",
    "test_rmse",
    "train_rmse",
    "sparsity",
    "iterations",
    "termination",
    "seconds",
    "untruncated_test_rmse",
];

const AGGREGATE_COLUMNS: [&str; 6] = ["method", "sigma", "param", "test_rmse", "sparsity", "seconds"];

fn aggregate_cells(o: &OracleRow) -> [String; 6] {
    [
        o.method.clone(),
        o.sigma.to_string(),
        o.param.to_string(),
        format!("{:.4}({:.4})", o.mean_test_rmse, o.se_test_rmse),
        format!("{:.1}", o.mean_sparsity),
        format!("{:.4}", o.mean_seconds),
    ]
}

/// Writes the per-run rows followed by the oracle-selected aggregate, each
/// as mean with standard error in parentheses.
pub fn write_report<W: Write>(rows: &[ReportRow], format: ReportFormat, mut out: W) -> Result<()> {
    let aggregate = oracle_select(rows)?;
    match format {
        ReportFormat::Csv => {
            {
                let mut w = csv::Writer::from_writer(&mut out);
                for r in rows {
                    w.serialize(r)?;
                }
                w.flush()?;
            }
            writeln!(out, "{AGGREGATE_MARKER}")?;
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(AGGREGATE_COLUMNS)?;
            for o in &aggregate {
                w.write_record(aggregate_cells(o))?;
            }
            w.flush()?;
        }
        ReportFormat::Markdown => {
            let table = |out: &mut W, head: &[&str], body: Vec<Vec<String>>| -> std::io::Result<()> {
                writeln!(out, "| {} |", head.join(" | "))?;
                writeln!(out, "|{}", "---|".repeat(head.len()))?;
                for cells in body {
                    writeln!(out, "| {} |", cells.join(" | "))?;
                }
                Ok(())
            };
            let body = rows
                .iter()
                .map(|r| {
                    vec![
                        r.method.clone(),
                        r.param.to_string(),
                        r.sigma.to_string(),
                        r.seed.to_string(),
                        r.test_rmse.to_string(),
                        r.train_rmse.to_string(),
                        r.sparsity.to_string(),
                        r.iterations.to_string(),
                        r.termination.to_string(),
                        r.seconds.to_string(),
                        r.untruncated_test_rmse.to_string(),
                    ]
                })
                .collect();
            table(&mut out, &ROW_COLUMNS, body)?;
            writeln!(out)?;
            writeln!(out, "Best parameter per method and noise level (mean (standard error)):")?;
            writeln!(out)?;
            let body = aggregate.iter().map(|o| aggregate_cells(o).to_vec()).collect();
            table(&mut out, &AGGREGATE_COLUMNS, body)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn emit_report(rows: &[ReportRow], format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    let file = std::fs::File::create(path)?;
    write_report(rows, format, std::io::BufWriter::new(file))
}

/// Reads the per-run rows of a CSV report, ignoring any aggregate block.
pub fn read_report(text: &str) -> Result<Vec<ReportRow>> {
    let body = match text.find(AGGREGATE_MARKER) {
        Some(i) => &text[..i],
        None => text,
    };
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let rows = r.deserialize().collect::<std::result::Result<Vec<ReportRow>, _>>()?;
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    Ok(rows)
}

/// Translates `key = value` lines into `--key value` arguments.
///
/// Blank lines and lines starting with `#` are skipped.
pub fn config_args(text: &str) -> Result<Vec<String>> {
    let mut args = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        args.push(format!("--{k}"));
        args.push(v.to_owned());
    }
    Ok(args)
}

/// Interquartile range with linear interpolation between order statistics.
pub fn interquartile_range(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    q(0.75) - q(0.25)
}

/// Outcome of checking selected-atom counts against `C δ⁻² log(1/δ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomBound {
    /// Constant fitted at the calibration threshold.
    pub constant: f64,
    /// `(δ, count, bound)` for every count exceeding its bound.
    pub violations: Vec<(f64, usize, f64)>,
}

/// `δ⁻² log(1/δ)`
pub fn atom_bound_shape(delta: f64) -> f64 {
    (1.0 / delta).ln() / (delta * delta)
}

/// Calibrates `C` as the largest count observed at `calibrate_at` divided
/// by the bound shape there, then lists every `(δ, count)` pair above
/// `C δ⁻² log(1/δ)`.
pub fn atom_count_bound(counts: &[(f64, usize)], calibrate_at: f64) -> Result<AtomBound> {
    let at_cal: Vec<usize> = counts
        .iter()
        .filter(|(d, _)| *d == calibrate_at)
        .map(|&(_, c)| c)
        .collect();
    let Some(&max_cal) = at_cal.iter().max() else {
        return Err(Error::InvalidParameter(format!("no counts at delta {calibrate_at}")));
    };
    let constant = (max_cal.max(1)) as f64 / atom_bound_shape(calibrate_at);
    let violations = counts
        .iter()
        .filter_map(|&(d, c)| {
            let bound = constant * atom_bound_shape(d);
            (c as f64 > bound).then_some((d, c, bound))
        })
        .collect();
    Ok(AtomBound { constant, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn row(method: &str, param: Parameter, seed: usize, rmse: f64, sparsity: usize) -> ReportRow {
        ReportRow {
            method: method.into(),
            param,
            sigma: 0.1,
            seed,
            test_rmse: rmse,
            train_rmse: rmse,
            sparsity,
            iterations: sparsity,
            termination: TerminationReason::FixedK,
            seconds: 0.0,
            untruncated_test_rmse: rmse,
        }
    }

    #[test]
    fn grids() {
        let g: Grid = "1e-6:0.5:50".parse().unwrap();
        let v = g.values();
        assert_eq!(v.len(), 50);
        assert_abs_diff_eq!(v[0], 1e-6, epsilon = 1e-18);
        assert_eq!(v[49], 0.5);
        assert!(v.windows(2).all(|w| w[0] < w[1]));
        let ratio = v[1] / v[0];
        assert!(v.windows(2).all(|w| (w[1] / w[0] - ratio).abs() < 1e-9));
        assert_eq!("0.1,0.2".parse::<Grid>().unwrap().values(), vec![0.1, 0.2]);
        assert!("0:1:5".parse::<Grid>().is_err());
        assert!("a,b".parse::<Grid>().is_err());
        assert_eq!(g.to_string().parse::<Grid>().unwrap(), g);
    }

    #[test]
    fn method_encodings() {
        for s in ["ogl:max", "ogl:max2", "ogl:rand", "togl:max", "dtogl:first", "dtogl:max3@0.01", "pgl", "pgl@78", "ridge", "ridge@0.0001", "fista@5e-6"] {
            let m: MethodSpec = s.parse().unwrap();
            assert_eq!(m.to_string().parse::<MethodSpec>().unwrap(), m, "{s}");
        }
        for s in ["ogl:first", "ogl:max@2.5", "dtogl:first@2", "ridge@-1", "lasso", "ogl:best"] {
            assert!(s.parse::<MethodSpec>().is_err(), "{s}");
        }
        assert_eq!(parse_methods("ogl:max,dtogl:first").unwrap().len(), 2);
        assert!(parse_methods("").is_err());
    }

    #[test]
    fn oracle_single_and_argmin() {
        let rows = [row("a", Parameter::K(3), 0, 0.5, 3)];
        assert_eq!(oracle_select(&rows).unwrap()[0].param, Parameter::K(3));
        let rows = [row("a", Parameter::K(1), 0, 0.3, 1), row("a", Parameter::K(2), 0, 0.2, 2)];
        assert_eq!(oracle_select(&rows).unwrap()[0].param, Parameter::K(2));
        assert!(matches!(oracle_select(&[]), Err(Error::EmptyTable)));
    }

    #[test]
    fn oracle_ties_prefer_sparser() {
        let rows = [
            row("a", Parameter::Delta(0.01), 0, 0.2, 9),
            row("a", Parameter::Delta(0.1), 0, 0.2, 4),
        ];
        let best = &oracle_select(&rows).unwrap()[0];
        assert_eq!(best.param, Parameter::Delta(0.1));
    }

    #[test]
    fn oracle_averages_over_seeds() {
        let rows = [
            row("a", Parameter::K(1), 0, 0.1, 1),
            row("a", Parameter::K(1), 1, 0.5, 1),
            row("a", Parameter::K(2), 0, 0.25, 2),
            row("a", Parameter::K(2), 1, 0.25, 2),
            row("b", Parameter::K(1), 0, 0.9, 1),
        ];
        let out = oracle_select(&rows).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].param, Parameter::K(2));
        assert_eq!(out[0].seeds, 2);
        assert_eq!(out[0].se_test_rmse, 0.0);
        assert_eq!(out[1].method, "b");
        let (m, se) = mean_se(&[0.1, 0.5]);
        assert_abs_diff_eq!(m, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(se, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn csv_report_shape_and_reload() {
        let rows = vec![row("ogl:max", Parameter::K(9), 0, 0.0249, 9)];
        let mut buf = Vec::new();
        write_report(&rows, ReportFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], ROW_COLUMNS.join(","));
        assert_eq!(lines[2], AGGREGATE_MARKER);
        assert_eq!(lines[3], AGGREGATE_COLUMNS.join(","));
        assert!(lines[4].contains("0.0249(0.0000)"));
        assert_eq!(lines.len(), 5);
        assert_eq!(read_report(&text).unwrap(), rows);
    }

    #[test]
    fn markdown_report_is_pipe_delimited() {
        let rows = vec![row("ogl:max", Parameter::K(9), 0, 0.0249, 9)];
        let mut buf = Vec::new();
        write_report(&rows, ReportFormat::Markdown, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("| method | param |"));
        assert!(text.lines().filter(|l| l.starts_with('|')).count() >= 5);
    }

    #[test]
    fn config_file_translation() {
        let args = config_args("# comment\nm-train = 500\n\nsigma=0.1,0.5\n").unwrap();
        assert_eq!(args, vec!["--m-train", "500", "--sigma", "0.1,0.5"]);
        assert!(config_args("novalue\n").is_err());
    }

    #[test]
    fn iqr_examples() {
        assert_eq!(interquartile_range(&[1.0, 2.0, 3.0, 4.0, 5.0]), 2.0);
        assert_eq!(interquartile_range(&[7.0]), 0.0);
    }

    #[test]
    fn atom_bound_calibration() {
        let counts = [(0.4, 3), (0.4, 4), (0.1, 20), (0.05, 300)];
        let b = atom_count_bound(&counts, 0.4).unwrap();
        assert_abs_diff_eq!(b.constant, 4.0 / atom_bound_shape(0.4), epsilon = 1e-12);
        assert_eq!(b.violations.len(), 0);
        let b = atom_count_bound(&[(0.4, 1), (0.2, 1000)], 0.4).unwrap();
        assert_eq!(b.violations.len(), 1);
        assert!(atom_count_bound(&counts, 0.3).is_err());
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        use rand::Rng;
        let a: u64 = stream_rng(1, 0, 0, 0).random();
        let b: u64 = stream_rng(1, 0, 1, 0).random();
        let c: u64 = stream_rng(1, 1, 0, 0).random();
        let d: u64 = stream_rng(1, 0, 0, 1).random();
        assert_eq!(a, stream_rng(1, 0, 0, 0).random::<u64>());
        assert!(a != b && a != c && a != d && b != c);
    }
}
