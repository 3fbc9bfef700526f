//! Synthetic sinc benchmark, CSV ingestion, z-score standardization and
//! random halving of real datasets.

use std::f64::consts::PI;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::types::{Dataset, Role};

/// `sin x / x`, with the removable singularity filled in as 1.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Training set with inputs uniform on `[−π, π]` and targets
/// `sinc(x) + N(0, σ²)`, and a noiseless test set drawn the same way.
pub fn gen_sinc<R: Rng + ?Sized>(
    m_train: usize,
    m_test: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<(Dataset, Dataset)> {
    if m_train == 0 || m_test == 0 {
        return Err(Error::Empty);
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise level must be nonnegative, got {sigma}")));
    }
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let xs: Vec<f64> = (0..m_train).map(|_| rng.random_range(-PI..=PI)).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| sinc(x) + noise.sample(rng)).collect();
    let xt: Vec<f64> = (0..m_test).map(|_| rng.random_range(-PI..=PI)).collect();
    let yt: Vec<f64> = xt.iter().map(|&x| sinc(x)).collect();
    Ok((
        Dataset::from_scalars(&xs, ys, Role::Train)?,
        Dataset::from_scalars(&xt, yt, Role::Test)?,
    ))
}

/// Which CSV column holds the target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetColumn {
    Index(usize),
    Name(String),
    Last,
}

impl FromStr for TargetColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "last" => TargetColumn::Last,
            _ => match s.parse::<usize>() {
                Ok(i) => TargetColumn::Index(i),
                Err(_) => TargetColumn::Name(s.to_owned()),
            },
        })
    }
}

/// Reads a numeric CSV file; every column but the target becomes a feature.
pub fn load_csv(path: impl AsRef<Path>, target: &TargetColumn, header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);

    let names: Vec<String> = if header {
        reader.headers()?.iter().map(str::to_owned).collect()
    } else {
        Vec::new()
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::Parse {
                row: line,
                column: rec.len().min(w) + 1,
                message: format!("expected {w} fields, found {}", rec.len()),
            });
        }
        let vals = rec
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>().map_err(|_| Error::Parse {
                    row: line,
                    column: c + 1,
                    message: format!("not a number: {cell:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(vals);
    }
    let Some(width) = width else {
        return Err(Error::EmptyFile(path.to_owned()));
    };

    let t = match target {
        TargetColumn::Last => width - 1,
        TargetColumn::Index(i) if *i < width => *i,
        TargetColumn::Index(i) => return Err(Error::MissingTarget(i.to_string())),
        TargetColumn::Name(name) => names
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingTarget(name.clone()))?,
    };
    if width < 2 {
        return Err(Error::MissingTarget("no feature columns besides the target".into()));
    }

    let mut inputs = Vec::with_capacity(rows.len());
    let mut targets = Vec::with_capacity(rows.len());
    for mut row in rows {
        targets.push(row.remove(t));
        inputs.push(row);
    }
    Dataset::new(inputs, targets, Role::Train)
}

/// Per-feature and target location/scale fitted on a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct ZScoreParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

/// Population mean and standard deviation; a zero deviation is pinned to 1.
fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 0.0 { std } else { 1.0 })
}

impl ZScoreParams {
    pub fn fit(train: &Dataset) -> Self {
        let d = train.dim();
        let (means, stds) = (0..d)
            .map(|j| mean_std(train.inputs().iter().map(move |x| x[j])))
            .unzip();
        let (target_mean, target_std) = mean_std(train.targets().iter().copied());
        Self {
            means,
            stds,
            target_mean,
            target_std,
        }
    }

    pub fn apply(&self, d: &Dataset) -> Result<Dataset> {
        if d.dim() != self.means.len() {
            return Err(Error::LengthMismatch {
                expected: self.means.len(),
                found: d.dim(),
            });
        }
        let inputs = d
            .inputs()
            .iter()
            .map(|x| {
                x.iter()
                    .zip(self.means.iter().zip(&self.stds))
                    .map(|(v, (mu, s))| (v - mu) / s)
                    .collect()
            })
            .collect();
        let targets = d.targets().iter().map(|&y| self.forward_target(y)).collect();
        Dataset::new(inputs, targets, d.role())
    }

    pub fn forward_target(&self, y: f64) -> f64 {
        (y - self.target_mean) / self.target_std
    }

    /// Maps a standardized target (or prediction) back to original units.
    pub fn invert_target(&self, z: f64) -> f64 {
        z * self.target_std + self.target_mean
    }
}

/// Fits z-score parameters on `train` only and applies them to both sets.
pub fn zscore_fit_apply(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, ZScoreParams)> {
    let params = ZScoreParams::fit(train);
    Ok((params.apply(train)?, params.apply(test)?, params))
}

/// Random disjoint halves; the first `⌈m/2⌉` shuffled samples train.
pub fn split_half<R: Rng + ?Sized>(d: &Dataset, rng: &mut R) -> Result<(Dataset, Dataset)> {
    let m = d.len();
    if m < 2 {
        return Err(Error::InvalidParameter("need at least two samples to split".into()));
    }
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(rng);
    let cut = m.div_ceil(2);
    let take = |ids: &[usize], role| {
        Dataset::new(
            ids.iter().map(|&i| d.inputs()[i].clone()).collect(),
            ids.iter().map(|&i| d.targets()[i]).collect(),
            role,
        )
    };
    Ok((take(&idx[..cut], Role::Train)?, take(&idx[cut..], Role::Test)?))
}
