//! Data model, CSV ingestion, deterministic splits and seeded synthetic-data
//! generators.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::penalty::GroupStructure;

/// A regression problem: predictor matrix, response vector and an optional
/// group label per predictor. Immutable after construction; all entries are
/// finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Array2<f64>,
    y: Array1<f64>,
    group_labels: Option<Vec<i64>>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>, group_labels: Option<Vec<i64>>) -> Result<Self> {
        let (n, p) = (x.nrows(), x.ncols());
        if n == 0 || p == 0 {
            return Err(Error::InvalidParameter(format!(
                "dataset must have at least one observation and one predictor, got {n}x{p}"
            )));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "y has {} entries but x has {n} rows",
                y.len()
            )));
        }
        if let Some(labels) = &group_labels {
            if labels.len() != p {
                return Err(Error::GroupLength {
                    expected: p,
                    got: labels.len(),
                });
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("predictor matrix".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response vector".into()));
        }
        Ok(Dataset { x, y, group_labels })
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn n_obs(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_predictors(&self) -> usize {
        self.x.ncols()
    }

    /// Raw group labels as given (arbitrary integers).
    pub fn group_labels(&self) -> Option<&[i64]> {
        self.group_labels.as_deref()
    }

    /// Group structure with labels remapped to dense ids in first-appearance
    /// order.
    pub fn group_structure(&self) -> Option<GroupStructure> {
        self.group_labels
            .as_ref()
            .map(|l| GroupStructure::from_labels(l).expect("p >= 1 by construction"))
    }

    /// Rows `indices` of this dataset, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let n = self.n_obs();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidParameter(format!(
                "row index {bad} out of range for {n} observations"
            )));
        }
        if indices.is_empty() {
            return Err(Error::InvalidParameter(
                "cannot take an empty subset of a dataset".into(),
            ));
        }
        let x = self.x.select(Axis(0), indices);
        let y = self.y.select(Axis(0), indices);
        Ok(Dataset {
            x,
            y,
            group_labels: self.group_labels.clone(),
        })
    }
}

/// How to locate the response column in a CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseColumn {
    Name(String),
    Index(usize),
}

impl ResponseColumn {
    /// Header names win over numeric interpretation, so a column literally
    /// named "0" is addressable by name.
    pub fn parse(s: &str) -> Self {
        ResponseColumn::Name(s.to_string())
    }

    fn resolve(&self, headers: &[String]) -> Result<usize> {
        match self {
            ResponseColumn::Index(i) => {
                if *i < headers.len() {
                    Ok(*i)
                } else {
                    Err(Error::ResponseNotFound(format!("index {i}")))
                }
            }
            ResponseColumn::Name(name) => {
                if let Some(i) = headers.iter().position(|h| h == name) {
                    return Ok(i);
                }
                if let Ok(i) = name.parse::<usize>() {
                    if i < headers.len() {
                        return Ok(i);
                    }
                }
                Err(Error::ResponseNotFound(name.clone()))
            }
        }
    }
}

/// Load a dataset from an RFC-4180 CSV file with a header row. The response
/// column is extracted; the remaining columns become predictors in file
/// order. `group_path` points to a sidecar file holding one comma-separated
/// integer row with one label per predictor.
pub fn load_csv(
    path: impl AsRef<Path>,
    response: &ResponseColumn,
    group_path: Option<&Path>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let response_idx = response.resolve(&headers)?;
    let p = headers.len().saturating_sub(1);
    if p == 0 {
        return Err(Error::InvalidParameter(format!(
            "{}: need at least one predictor column besides the response",
            path.display()
        )));
    }
    let mut x_data: Vec<f64> = Vec::new();
    let mut y_data: Vec<f64> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        if record.len() != headers.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                i + 2,
                record.len(),
                headers.len()
            )));
        }
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: i + 2,
                column: headers[j].clone(),
                value: cell.to_string(),
            })?;
            if j == response_idx {
                y_data.push(value);
            } else {
                x_data.push(value);
            }
        }
    }
    let n = y_data.len();
    if n == 0 {
        return Err(Error::InvalidParameter(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    let x = Array2::from_shape_vec((n, p), x_data).expect("row-major fill");
    let y = Array1::from_vec(y_data);
    let group_labels = match group_path {
        Some(gpath) => Some(load_group_sidecar(gpath, p)?),
        None => None,
    };
    Dataset::new(x, y, group_labels)
}

fn load_group_sidecar(path: &Path, p: usize) -> Result<Vec<i64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let line = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| Error::InvalidParameter(format!("{}: empty group file", path.display())))?;
    let labels: Vec<i64> = line
        .split(',')
        .enumerate()
        .map(|(j, cell)| {
            cell.trim().parse::<i64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: 1,
                column: format!("field {}", j + 1),
                value: cell.trim().to_string(),
            })
        })
        .collect::<Result<_>>()?;
    if labels.len() != p {
        return Err(Error::GroupLength {
            expected: p,
            got: labels.len(),
        });
    }
    Ok(labels)
}

/// Write the dataset as CSV with headers `x1..xp,y` at 17 significant digits,
/// so that a reload reproduces every value bit for bit.
pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (n, p) = (data.n_obs(), data.n_predictors());
    let mut out = String::new();
    for j in 0..p {
        let _ = write!(out, "x{},", j + 1);
    }
    out.push_str("y\n");
    for i in 0..n {
        for j in 0..p {
            let _ = write!(out, "{:.16e},", data.x[[i, j]]);
        }
        let _ = writeln!(out, "{:.16e}", data.y[i]);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Write the group labels as a one-row comma-separated sidecar file.
pub fn save_groups(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let labels = data.group_labels().ok_or_else(|| {
        Error::InvalidParameter("dataset has no group labels to save".into())
    })?;
    let line: Vec<String> = labels.iter().map(i64::to_string).collect();
    std::fs::write(path, line.join(",") + "\n").map_err(|e| Error::io(path, e))
}

/// Row indices of a dataset partitioned into train, optional validate, and
/// test parts. Parts are disjoint; their union covers 0..n-1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validate: Option<Vec<usize>>,
    pub test: Vec<usize>,
}

/// Seeded pseudo-random permutation of 0..n-1 (ChaCha8 keyed by the seed).
/// Without a seed, a random one is drawn; results are then nondeterministic.
pub fn seeded_permutation(n: usize, seed: Option<u64>) -> Vec<usize> {
    let mut rng = rng_from_seed(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    // Fisher-Yates, fixed draw order for reproducibility across platforms.
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

fn rng_from_seed(seed: Option<u64>) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.unwrap_or_else(rand::random))
}

/// Split 0..nrows-1 into train and test parts of a seeded permutation. An
/// explicit `train_size` takes preference over `train_pct`.
pub fn train_test_split(
    nrows: usize,
    train_size: Option<usize>,
    train_pct: f64,
    seed: Option<u64>,
) -> Result<SplitIndices> {
    if nrows < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 rows to split, got {nrows}"
        )));
    }
    let train_len = resolve_part_size(nrows, train_size, train_pct, "train")?;
    if train_len >= nrows {
        return Err(Error::InvalidParameter(format!(
            "train size {train_len} must be smaller than the number of rows {nrows}"
        )));
    }
    let perm = seeded_permutation(nrows, seed);
    Ok(SplitIndices {
        train: perm[..train_len].to_vec(),
        validate: None,
        test: perm[train_len..].to_vec(),
    })
}

pub(crate) fn resolve_part_size(
    nrows: usize,
    size: Option<usize>,
    pct: f64,
    what: &str,
) -> Result<usize> {
    let len = match size {
        Some(s) => s,
        None => {
            if !(pct > 0.0 && pct < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{what}_pct must lie in (0, 1), got {pct}"
                )));
            }
            (pct * nrows as f64).round() as usize
        }
    };
    if len == 0 {
        return Err(Error::InvalidParameter(format!(
            "{what} part resolves to 0 rows"
        )));
    }
    Ok(len)
}

/// Ground truth behind a synthetic dataset, plus the resolved seed so the
/// generation is replayable.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    pub beta_true: Array1<f64>,
    pub bias: f64,
    pub noise: f64,
    pub seed: u64,
}

/// Parameters for [`generate_grouped`].
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedConfig {
    pub n_obs: usize,
    pub group_size: usize,
    pub num_groups: usize,
    /// Number of leading groups carrying signal.
    pub non_zero_groups: usize,
    /// Number of leading coefficients inside each signal group.
    pub non_zero_coef: usize,
    pub noise: f64,
    pub seed: Option<u64>,
}

/// Grouped regression data: p = group_size x num_groups standard-normal
/// predictors in contiguous blocks; the first `non_zero_groups` groups carry
/// `non_zero_coef` nonzero coefficients each, drawn uniform on [5, 10] with
/// random sign; y = X beta + noise * N(0, 1).
pub fn generate_grouped(config: &GroupedConfig) -> Result<(Dataset, SyntheticTruth)> {
    if config.non_zero_groups > config.num_groups {
        return Err(Error::InvalidParameter(format!(
            "non_zero_groups {} exceeds num_groups {}",
            config.non_zero_groups, config.num_groups
        )));
    }
    if config.non_zero_coef > config.group_size {
        return Err(Error::InvalidParameter(format!(
            "non_zero_coef {} exceeds group_size {}",
            config.non_zero_coef, config.group_size
        )));
    }
    if !(config.noise.is_finite() && config.noise >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise must be finite and nonnegative, got {}",
            config.noise
        )));
    }
    let p = config.group_size * config.num_groups;
    if config.n_obs == 0 || p == 0 {
        return Err(Error::InvalidParameter(
            "generator needs n_obs >= 1 and at least one predictor".into(),
        ));
    }
    let seed = config.seed.unwrap_or_else(rand::random);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = standard_normal_matrix(&mut rng, config.n_obs, p);
    let mut beta = Array1::zeros(p);
    for g in 0..config.non_zero_groups {
        for k in 0..config.non_zero_coef {
            beta[g * config.group_size + k] = signal_coef(&mut rng);
        }
    }
    let y = response_with_noise(&mut rng, &x, &beta, 0.0, config.noise);
    let labels: Vec<i64> = (0..p).map(|j| (j / config.group_size) as i64).collect();
    let data = Dataset::new(x, y, Some(labels))?;
    let truth = SyntheticTruth {
        beta_true: beta,
        bias: 0.0,
        noise: config.noise,
        seed,
    };
    Ok((data, truth))
}

/// Parameters for [`generate_sparse`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseConfig {
    pub n_samples: usize,
    pub n_features: usize,
    /// Number of nonzero true coefficients, at shuffled positions.
    pub n_informative: usize,
    pub bias: f64,
    pub noise: f64,
    pub seed: Option<u64>,
}

/// Ungrouped analog of [`generate_grouped`]: informative positions are drawn
/// without replacement across all features and y gains an intercept `bias`.
pub fn generate_sparse(config: &SparseConfig) -> Result<(Dataset, SyntheticTruth)> {
    if config.n_informative > config.n_features {
        return Err(Error::InvalidParameter(format!(
            "n_informative {} exceeds n_features {}",
            config.n_informative, config.n_features
        )));
    }
    if !(config.noise.is_finite() && config.noise >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise must be finite and nonnegative, got {}",
            config.noise
        )));
    }
    if !config.bias.is_finite() {
        return Err(Error::InvalidParameter("bias must be finite".into()));
    }
    if config.n_samples == 0 || config.n_features == 0 {
        return Err(Error::InvalidParameter(
            "generator needs n_samples >= 1 and n_features >= 1".into(),
        ));
    }
    let seed = config.seed.unwrap_or_else(rand::random);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = standard_normal_matrix(&mut rng, config.n_samples, config.n_features);
    let mut positions =
        rand::seq::index::sample(&mut rng, config.n_features, config.n_informative).into_vec();
    positions.sort_unstable();
    let mut beta = Array1::zeros(config.n_features);
    for &j in &positions {
        beta[j] = signal_coef(&mut rng);
    }
    let y = response_with_noise(&mut rng, &x, &beta, config.bias, config.noise);
    let data = Dataset::new(x, y, None)?;
    let truth = SyntheticTruth {
        beta_true: beta,
        bias: config.bias,
        noise: config.noise,
        seed,
    };
    Ok((data, truth))
}

fn standard_normal_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
    let data: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    Array2::from_shape_vec((n, p), data).expect("row-major fill")
}

fn signal_coef(rng: &mut ChaCha8Rng) -> f64 {
    let magnitude = rng.random_range(5.0..=10.0);
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

fn response_with_noise(
    rng: &mut ChaCha8Rng,
    x: &Array2<f64>,
    beta: &Array1<f64>,
    bias: f64,
    noise: f64,
) -> Array1<f64> {
    let mut y = x.dot(beta) + bias;
    if noise > 0.0 {
        for v in y.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *v += noise * e;
        }
    }
    y
}

/// Column centering and scaling fitted on one dataset and reusable on
/// another (population standard deviation; constant columns keep scale 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    means: Vec<f64>,
    scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Array2<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut means = Vec::with_capacity(x.ncols());
        let mut scales = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let sd = var.sqrt();
            means.push(mean);
            scales.push(if sd > 0.0 { sd } else { 1.0 });
        }
        Standardizer { means, scales }
    }

    pub fn from_parts(means: Vec<f64>, scales: Vec<f64>) -> Result<Self> {
        if means.len() != scales.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} means but {} scales",
                means.len(),
                scales.len()
            )));
        }
        if scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidParameter(
                "standardizer scales must be positive".into(),
            ));
        }
        Ok(Standardizer { means, scales })
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.means.len() {
            return Err(Error::DimensionMismatch(format!(
                "standardizer fitted on {} columns, got {}",
                self.means.len(),
                x.ncols()
            )));
        }
        let mut out = x.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| (v - self.means[j]) / self.scales[j]);
        }
        Ok(out)
    }
}
