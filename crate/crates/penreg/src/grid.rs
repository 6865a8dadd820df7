//! Cartesian parameter grids, their index ↔ combination mapping, and the
//! grid solver with optional parallel execution over warm-start chains.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::loss::ModelKind;
use crate::penalty::{GroupStructure, PenaltyKind, PenaltyLevels, PenaltySpec};
use crate::solver::{solve_penalized, Coefficients, Problem, SolveControls, WarmState};

/// Ordered cartesian product of penalty parameters. Axis nesting is fixed,
/// outermost to innermost: lambda1, alpha, lasso_weights, gl_weights; the
/// innermost axis varies fastest. Absent axes contribute a factor of one.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGrid {
    pub lambda1: Vec<f64>,
    pub alpha: Option<Vec<f64>>,
    pub lasso_weights: Option<Vec<Array1<f64>>>,
    pub gl_weights: Option<Vec<Array1<f64>>>,
}

/// One decoded grid combination. Axes the grid does not carry are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterValues {
    pub lambda1: f64,
    pub alpha: Option<f64>,
    pub lasso_weights: Option<Array1<f64>>,
    pub gl_weights: Option<Array1<f64>>,
}

impl ParameterGrid {
    pub fn new(lambda1: Vec<f64>) -> Self {
        ParameterGrid {
            lambda1,
            alpha: None,
            lasso_weights: None,
            gl_weights: None,
        }
    }

    pub fn with_alpha(mut self, alpha: Vec<f64>) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_lasso_weights(mut self, weights: Vec<Array1<f64>>) -> Self {
        self.lasso_weights = Some(weights);
        self
    }

    pub fn with_gl_weights(mut self, weights: Vec<Array1<f64>>) -> Self {
        self.gl_weights = Some(weights);
        self
    }

    /// Axis lengths in nesting order; absent axes count as one.
    fn axis_lens(&self) -> [usize; 4] {
        [
            self.lambda1.len(),
            self.alpha.as_ref().map_or(1, Vec::len),
            self.lasso_weights.as_ref().map_or(1, Vec::len),
            self.gl_weights.as_ref().map_or(1, Vec::len),
        ]
    }

    pub fn size(&self) -> usize {
        self.axis_lens().iter().product()
    }

    /// Per-axis positions (lambda1, alpha, lasso_weights, gl_weights) of the
    /// model at `index`; absent axes sit at position 0.
    pub fn axis_positions(&self, index: usize) -> Result<[usize; 4]> {
        let lens = self.axis_lens();
        let size: usize = lens.iter().product();
        if index >= size {
            return Err(Error::InvalidParameter(format!(
                "model index {index} out of range for a grid of {size} combinations"
            )));
        }
        let mut rem = index;
        let mut pos = [0usize; 4];
        for (k, len) in lens.iter().enumerate().rev() {
            pos[k] = rem % len;
            rem /= len;
        }
        Ok(pos)
    }

    /// Parameter values of the model at `index` in enumeration order.
    pub fn values_at(&self, index: usize) -> Result<ParameterValues> {
        let pos = self.axis_positions(index)?;
        Ok(ParameterValues {
            lambda1: self.lambda1[pos[0]],
            alpha: self.alpha.as_ref().map(|a| a[pos[1]]),
            lasso_weights: self.lasso_weights.as_ref().map(|w| w[pos[2]].clone()),
            gl_weights: self.gl_weights.as_ref().map(|w| w[pos[3]].clone()),
        })
    }

    /// Penalty specification for the model at `index`.
    pub fn spec_at(&self, kind: PenaltyKind, index: usize) -> Result<PenaltySpec> {
        let values = self.values_at(index)?;
        let mut spec = PenaltySpec::new(kind, values.lambda1);
        spec.alpha = values.alpha;
        spec.lasso_weights = values.lasso_weights;
        spec.gl_weights = values.gl_weights;
        Ok(spec)
    }

    /// Check that exactly the axes the penalty kind consumes are present and
    /// non-empty, and that the scalar axes hold valid values.
    pub fn validate_for(&self, kind: PenaltyKind) -> Result<()> {
        if self.lambda1.is_empty() {
            return Err(Error::InvalidParameter("lambda1 axis is empty".into()));
        }
        for l in &self.lambda1 {
            if !(l.is_finite() && *l >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "lambda1 values must be finite and nonnegative, got {l}"
                )));
            }
        }
        let axis = |present: bool, used: bool, name: &str, empty: bool| -> Result<()> {
            if used && !present {
                return Err(Error::InvalidParameter(format!(
                    "penalty {:?} needs a {name} axis",
                    kind.name()
                )));
            }
            if !used && present {
                return Err(Error::InvalidParameter(format!(
                    "penalty {:?} does not use {name}, but the grid supplies it",
                    kind.name()
                )));
            }
            if used && empty {
                return Err(Error::InvalidParameter(format!("{name} axis is empty")));
            }
            Ok(())
        };
        axis(
            self.alpha.is_some(),
            kind.uses_alpha(),
            "alpha",
            self.alpha.as_ref().is_some_and(Vec::is_empty),
        )?;
        axis(
            self.lasso_weights.is_some(),
            kind.uses_lasso_weights(),
            "lasso_weights",
            self.lasso_weights.as_ref().is_some_and(Vec::is_empty),
        )?;
        axis(
            self.gl_weights.is_some(),
            kind.uses_gl_weights(),
            "gl_weights",
            self.gl_weights.as_ref().is_some_and(Vec::is_empty),
        )?;
        if let Some(alphas) = &self.alpha {
            for a in alphas {
                if !(a.is_finite() && (0.0..=1.0).contains(a)) {
                    return Err(Error::InvalidParameter(format!(
                        "alpha values must lie in [0, 1], got {a}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// All grid combinations in enumeration order.
pub fn enumerate_grid(grid: &ParameterGrid) -> Result<Vec<ParameterValues>> {
    if grid.lambda1.is_empty() {
        return Err(Error::InvalidParameter("lambda1 axis is empty".into()));
    }
    (0..grid.size()).map(|i| grid.values_at(i)).collect()
}

/// Solutions for every combination of a parameter grid, in enumeration order.
#[derive(Debug, Clone)]
pub struct GridResult {
    pub model: ModelKind,
    pub penalty: PenaltyKind,
    pub intercept: bool,
    pub grid: ParameterGrid,
    pub coefficients: Vec<Coefficients>,
}

impl GridResult {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn parameters_at(&self, index: usize) -> Result<ParameterValues> {
        self.grid.values_at(index)
    }
}

/// Parameter values behind model `index` of a grid result.
pub fn retrieve_parameters_value(result: &GridResult, index: usize) -> Result<ParameterValues> {
    result.parameters_at(index)
}

/// Worker count when the caller does not pin one: machine cores minus one,
/// at least one.
pub(crate) fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get().saturating_sub(1))
        .unwrap_or(1)
        .max(1)
}

/// Solve every combination of the grid on one dataset.
pub fn solve_grid(
    model: ModelKind,
    penalty: PenaltyKind,
    grid: &ParameterGrid,
    data: &Dataset,
    controls: &SolveControls,
    intercept: bool,
    parallel: bool,
    num_cores: Option<usize>,
) -> Result<GridResult> {
    let groups = data.group_structure();
    solve_grid_arrays(
        model,
        penalty,
        grid,
        data.x(),
        data.y(),
        groups.as_ref(),
        controls,
        intercept,
        parallel,
        num_cores,
    )
}

/// Grid solver on raw arrays. Models sharing every non-lambda parameter form
/// one warm-start chain, swept from the largest lambda down; chains are the
/// unit of parallel work, so sequential and parallel runs produce identical
/// results. A fit that hits the iteration cap is reported with its converged
/// flag down rather than failing the grid.
pub fn solve_grid_arrays(
    model: ModelKind,
    penalty: PenaltyKind,
    grid: &ParameterGrid,
    x: &Array2<f64>,
    y: &Array1<f64>,
    groups: Option<&GroupStructure>,
    controls: &SolveControls,
    intercept: bool,
    parallel: bool,
    num_cores: Option<usize>,
) -> Result<GridResult> {
    controls.validate()?;
    grid.validate_for(penalty)?;
    let size = grid.size();
    let mut levels = Vec::with_capacity(size);
    for i in 0..size {
        let spec = grid.spec_at(penalty, i)?;
        spec.validate(x.ncols(), groups)?;
        levels.push(PenaltyLevels::from_spec(&spec, x.ncols(), groups)?);
    }
    let prob = Problem::new(model, x, y, intercept)?;

    let n_lambda = grid.lambda1.len();
    let inner = size / n_lambda;
    // Largest lambda first; ties keep their axis order.
    let mut lam_order: Vec<usize> = (0..n_lambda).collect();
    lam_order.sort_by(|&a, &b| {
        grid.lambda1[b]
            .partial_cmp(&grid.lambda1[a])
            .expect("validated finite")
            .then(a.cmp(&b))
    });

    let run_chain = |chain: usize| -> Vec<(usize, Coefficients)> {
        let mut out = Vec::with_capacity(n_lambda);
        let mut warm: Option<WarmState> = None;
        for &il in &lam_order {
            let index = il * inner + chain;
            let sol = solve_penalized(&prob, &levels[index], controls, warm.as_ref());
            warm = Some(sol.state);
            out.push((index, sol.coefs));
        }
        out
    };

    let chain_results: Vec<Vec<(usize, Coefficients)>> = if parallel && inner > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(num_cores.unwrap_or_else(default_workers).max(1))
            .build()
            .map_err(|e| Error::Numeric(format!("could not start worker pool: {e}")))?;
        pool.install(|| (0..inner).into_par_iter().map(run_chain).collect())
    } else {
        (0..inner).map(run_chain).collect()
    };

    let mut slots: Vec<Option<Coefficients>> = (0..size).map(|_| None).collect();
    for chain in chain_results {
        for (index, coefs) in chain {
            slots[index] = Some(coefs);
        }
    }
    Ok(GridResult {
        model,
        penalty,
        intercept,
        grid: grid.clone(),
        coefficients: slots
            .into_iter()
            .map(|s| s.expect("every index is solved exactly once"))
            .collect(),
    })
}
