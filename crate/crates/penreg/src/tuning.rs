//! Model selection over a parameter grid: k-fold cross-validation and
//! train/validate/test splitting, with adaptive weights recomputed from
//! training rows only.

use ndarray::{Array1, Array2, Axis};

use crate::dataset::{resolve_part_size, seeded_permutation, Dataset};
use crate::error::{Error, Result};
use crate::grid::{solve_grid_arrays, ParameterGrid, ParameterValues};
use crate::loss::{error_calculator, error_metric, ErrorKind, ModelKind};
use crate::penalty::{GroupStructure, PenaltyKind};
use crate::solver::{predict, predict_one, take_rows, SolveControls};
use crate::weights::{compute_weights, WeightSpec};

/// Cross-validation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CvSpec {
    pub nfolds: usize,
    pub error: ErrorKind,
    pub seed: Option<u64>,
}

impl Default for CvSpec {
    fn default() -> Self {
        CvSpec {
            nfolds: 5,
            error: ErrorKind::Mse,
            seed: None,
        }
    }
}

impl CvSpec {
    pub fn validate(&self, n_obs: usize) -> Result<()> {
        self.error.validate()?;
        if self.nfolds < 2 {
            return Err(Error::InvalidParameter(format!(
                "nfolds must be at least 2, got {}",
                self.nfolds
            )));
        }
        if self.nfolds > n_obs {
            return Err(Error::InvalidParameter(format!(
                "nfolds {} exceeds the number of observations {n_obs}",
                self.nfolds
            )));
        }
        Ok(())
    }
}

/// Validation errors from cross-validation: entry (i, j) is the error of
/// model i evaluated on fold j.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMatrix {
    pub values: Array2<f64>,
}

impl ErrorMatrix {
    pub fn num_models(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_folds(&self) -> usize {
        self.values.ncols()
    }

    /// Mean error of each model across folds.
    pub fn fold_means(&self) -> Array1<f64> {
        let nfolds = self.values.ncols().max(1) as f64;
        self.values.sum_axis(Axis(1)) / nfolds
    }
}

/// Train/validate/test settings. Explicit sizes take preference over the
/// percentages.
#[derive(Debug, Clone, PartialEq)]
pub struct TvtSpec {
    pub train_size: Option<usize>,
    pub validate_size: Option<usize>,
    pub train_pct: f64,
    pub validate_pct: f64,
    pub error: ErrorKind,
    pub seed: Option<u64>,
}

impl Default for TvtSpec {
    fn default() -> Self {
        TvtSpec {
            train_size: None,
            validate_size: None,
            train_pct: 0.05,
            validate_pct: 0.05,
            error: ErrorKind::Mse,
            seed: None,
        }
    }
}

/// Outcome of train/validate/test selection. The winner is the train-part
/// fit with the smallest validation error; it is evaluated on the test part
/// as-is, without refitting.
#[derive(Debug, Clone, PartialEq)]
pub struct TvtResult {
    /// Grid index of the winning model.
    pub selected_index: usize,
    /// Winning coefficients, intercept first when one was fitted.
    pub optimal_betas: Array1<f64>,
    /// Parameters of the winning model, including resolved weight vectors.
    pub optimal_parameters: ParameterValues,
    pub test_error: f64,
}

/// Disjoint validation index sets of a seeded permutation. Fold sizes differ
/// by at most one; the first n mod nfolds folds carry the extra row.
pub fn kfold_indices(n: usize, nfolds: usize, seed: Option<u64>) -> Result<Vec<Vec<usize>>> {
    if nfolds < 2 {
        return Err(Error::InvalidParameter(format!(
            "nfolds must be at least 2, got {nfolds}"
        )));
    }
    if nfolds > n {
        return Err(Error::InvalidParameter(format!(
            "nfolds {nfolds} exceeds the number of observations {n}"
        )));
    }
    let perm = seeded_permutation(n, seed);
    let base = n / nfolds;
    let extra = n % nfolds;
    let mut folds = Vec::with_capacity(nfolds);
    let mut offset = 0;
    for k in 0..nfolds {
        let len = base + usize::from(k < extra);
        folds.push(perm[offset..offset + len].to_vec());
        offset += len;
    }
    Ok(folds)
}

/// Fill in adaptive-weight axes the grid does not carry by computing them
/// from the given (training) data. Explicit weight axes on the grid win over
/// the weight spec; non-adaptive penalties pass through untouched.
pub fn materialize_grid(
    grid: &ParameterGrid,
    penalty: PenaltyKind,
    weight_spec: Option<&WeightSpec>,
    x: &Array2<f64>,
    y: &Array1<f64>,
    groups: Option<&GroupStructure>,
) -> Result<ParameterGrid> {
    let need_lasso = penalty.uses_lasso_weights() && grid.lasso_weights.is_none();
    let need_gl = penalty.uses_gl_weights() && grid.gl_weights.is_none();
    if !(need_lasso || need_gl) {
        return Ok(grid.clone());
    }
    let spec = weight_spec.ok_or_else(|| {
        Error::InvalidParameter(format!(
            "penalty {:?} needs adaptive weights: put them on the grid or provide a weight spec",
            penalty.name()
        ))
    })?;
    let set = compute_weights(spec, x, y, groups)?;
    let mut out = grid.clone();
    if need_lasso {
        out.lasso_weights = Some(set.lasso_weights);
    }
    if need_gl {
        if set.gl_weights.is_empty() {
            return Err(Error::InvalidParameter(
                "group weights are needed but the data has no group structure".into(),
            ));
        }
        out.gl_weights = Some(set.gl_weights);
    }
    Ok(out)
}

/// K-fold cross-validation over the grid. Per fold, adaptive weights and all
/// model fits come from the training rows only; errors are evaluated on the
/// held-out rows. A model that hits its iteration cap contributes its best
/// iterate and a logged warning.
#[allow(clippy::too_many_arguments)]
pub fn cross_validation(
    model: ModelKind,
    penalty: PenaltyKind,
    grid: &ParameterGrid,
    weight_spec: Option<&WeightSpec>,
    data: &Dataset,
    cv: &CvSpec,
    controls: &SolveControls,
    intercept: bool,
    parallel: bool,
    num_cores: Option<usize>,
) -> Result<ErrorMatrix> {
    let n = data.n_obs();
    cv.validate(n)?;
    let folds = kfold_indices(n, cv.nfolds, cv.seed)?;
    let groups = data.group_structure();
    let mut values: Option<Array2<f64>> = None;
    for (j, val_idx) in folds.iter().enumerate() {
        let mut in_val = vec![false; n];
        for &i in val_idx {
            in_val[i] = true;
        }
        let train_idx: Vec<usize> = (0..n).filter(|i| !in_val[*i]).collect();
        let (xt, yt) = take_rows(data.x(), data.y(), &train_idx);
        let grid_j = materialize_grid(grid, penalty, weight_spec, &xt, &yt, groups.as_ref())?;
        let result = solve_grid_arrays(
            model,
            penalty,
            &grid_j,
            &xt,
            &yt,
            groups.as_ref(),
            controls,
            intercept,
            parallel,
            num_cores,
        )?;
        let (xv, yv) = take_rows(data.x(), data.y(), val_idx);
        let errs = error_calculator(&yv, &predict(&result.coefficients, &xv)?, cv.error)?;
        let matrix =
            values.get_or_insert_with(|| Array2::zeros((errs.len(), folds.len())));
        if matrix.nrows() != errs.len() {
            return Err(Error::Numeric(format!(
                "fold {j} produced {} models but earlier folds produced {}",
                errs.len(),
                matrix.nrows()
            )));
        }
        for (i, e) in errs.iter().enumerate() {
            matrix[[i, j]] = *e;
        }
        for (i, c) in result.coefficients.iter().enumerate() {
            if !c.converged {
                log::warn!("model {i} in fold {j} did not converge; keeping its best iterate");
            }
        }
    }
    Ok(ErrorMatrix {
        values: values.expect("at least two folds"),
    })
}

/// First index reaching the minimum, treating NaN as worse than everything.
fn argmin_low_ties<I: IntoIterator<Item = f64>>(values: I) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        let v = if v.is_nan() { f64::INFINITY } else { v };
        match best {
            Some((_, b)) if v >= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Index of the model with the smallest mean error across folds; ties go to
/// the lowest index.
pub fn select_best(errors: &ErrorMatrix) -> Result<usize> {
    if errors.values.nrows() == 0 || errors.values.ncols() == 0 {
        return Err(Error::InvalidParameter("empty error matrix".into()));
    }
    Ok(argmin_low_ties(errors.fold_means().iter().copied()).expect("nonempty"))
}

/// Resolved (train, validate, test) row counts for a split of `n` rows.
/// Explicit sizes win over percentages; the test part is the remainder and
/// must be non-empty.
pub fn resolve_tvt_sizes(n: usize, tvt: &TvtSpec) -> Result<(usize, usize, usize)> {
    let train_len = resolve_part_size(n, tvt.train_size, tvt.train_pct, "train")?;
    let validate_len = resolve_part_size(n, tvt.validate_size, tvt.validate_pct, "validate")?;
    if train_len + validate_len >= n {
        return Err(Error::InvalidParameter(format!(
            "train ({train_len}) plus validate ({validate_len}) rows leave no test rows out of {n}"
        )));
    }
    Ok((train_len, validate_len, n - train_len - validate_len))
}

/// Train/validate/test selection: fit the grid on the training part, pick
/// the model with the smallest validation error, and report that same fit's
/// error on the test part. No refit happens between selection and testing.
#[allow(clippy::too_many_arguments)]
pub fn train_validate_test(
    model: ModelKind,
    penalty: PenaltyKind,
    grid: &ParameterGrid,
    weight_spec: Option<&WeightSpec>,
    data: &Dataset,
    tvt: &TvtSpec,
    controls: &SolveControls,
    intercept: bool,
    parallel: bool,
    num_cores: Option<usize>,
) -> Result<TvtResult> {
    let n = data.n_obs();
    tvt.error.validate()?;
    let (train_len, validate_len, _) = resolve_tvt_sizes(n, tvt)?;
    let perm = seeded_permutation(n, tvt.seed);
    let train_idx = &perm[..train_len];
    let val_idx = &perm[train_len..train_len + validate_len];
    let test_idx = &perm[train_len + validate_len..];

    let groups = data.group_structure();
    let (xt, yt) = take_rows(data.x(), data.y(), train_idx);
    let grid_m = materialize_grid(grid, penalty, weight_spec, &xt, &yt, groups.as_ref())?;
    let result = solve_grid_arrays(
        model,
        penalty,
        &grid_m,
        &xt,
        &yt,
        groups.as_ref(),
        controls,
        intercept,
        parallel,
        num_cores,
    )?;

    let (xv, yv) = take_rows(data.x(), data.y(), val_idx);
    let val_errors = error_calculator(&yv, &predict(&result.coefficients, &xv)?, tvt.error)?;
    let selected_index = argmin_low_ties(val_errors).expect("grid is nonempty");
    let winner = &result.coefficients[selected_index];
    if !winner.converged {
        log::warn!("selected model {selected_index} did not converge; keeping its best iterate");
    }

    let (xs, ys) = take_rows(data.x(), data.y(), test_idx);
    let test_error = error_metric(tvt.error, &ys, &predict_one(winner, &xs)?)?;

    let mut optimal_betas = Vec::with_capacity(winner.beta.len() + 1);
    if let Some(b0) = winner.intercept {
        optimal_betas.push(b0);
    }
    optimal_betas.extend(winner.beta.iter().copied());
    Ok(TvtResult {
        selected_index,
        optimal_betas: Array1::from_vec(optimal_betas),
        optimal_parameters: grid_m.values_at(selected_index)?,
        test_error,
    })
}
