//! Configuration resolution: TOML config file, command-line flags on top,
//! library defaults underneath.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;

use penreg::{
    CvSpec, Error, ModelKind, ParameterGrid, PenaltyKind, ResponseColumn, Result, SolveControls,
    TvtSpec, WeightSpec, WeightTechnique,
};

use crate::output::Json;

/// Flags shared by the fit, cv and tvt subcommands.
#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV data file with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Response column name, or a zero-based index when no header matches.
    #[arg(long)]
    pub response: Option<String>,
    /// CSV file with one row of integer group labels, one per predictor.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// Model family: lm (least squares) or qr (quantile regression).
    #[arg(long)]
    pub model: Option<String>,
    /// Penalty: none, lasso, gl, sgl, alasso, agl, asgl, asgl_lasso, asgl_gl.
    #[arg(long)]
    pub penalization: Option<String>,
    /// Penalty strengths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub lambda1: Option<Vec<f64>>,
    /// Mixing values between the lasso and group parts, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    /// Quantile level for qr models and the QRE metric.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Pilot estimator for adaptive weights: unpenalized, pca_pct, pca_1,
    /// pls_pct, pls_1, spca or lasso.
    #[arg(long)]
    pub weight_technique: Option<String>,
    /// Powers applied to pilot coefficients for lasso weights, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub lasso_power_weight: Option<Vec<f64>>,
    /// Powers applied to pilot group norms for group weights, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub gl_power_weight: Option<Vec<f64>>,
    /// Fraction of variability the pct pilot techniques must explain.
    #[arg(long)]
    pub variability_pct: Option<f64>,
    /// Penalty strength of the lasso pilot estimator.
    #[arg(long)]
    pub lambda1_weights: Option<f64>,
    /// Validation error metric: MSE, MAE, MDAE or QRE.
    #[arg(long)]
    pub error_type: Option<String>,
    /// Number of cross-validation folds.
    #[arg(long)]
    pub nfolds: Option<usize>,
    /// Training rows for train/validate/test selection.
    #[arg(long)]
    pub train_size: Option<usize>,
    /// Validation rows for train/validate/test selection.
    #[arg(long)]
    pub validate_size: Option<usize>,
    /// Seed for fold assignment and data splits.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Solve warm-start chains on a thread pool.
    #[arg(long)]
    pub parallel: bool,
    /// Worker threads when --parallel is set (default: cores minus one).
    #[arg(long)]
    pub num_cores: Option<usize>,
    /// Output path (default depends on the subcommand).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<String>,
    pub penalization: Option<String>,
    pub intercept: Option<bool>,
    pub tau: Option<f64>,
    pub lambda1: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    pub parallel: Option<bool>,
    pub num_cores: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub data: FileData,
    #[serde(default)]
    pub weights: FileWeights,
    #[serde(default)]
    pub cv: FileCv,
    #[serde(default)]
    pub tvt: FileTvt,
    #[serde(default)]
    pub solver: FileSolver,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct FileData {
    pub path: Option<PathBuf>,
    pub response: Option<String>,
    pub groups: Option<PathBuf>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct FileWeights {
    pub technique: Option<String>,
    pub model: Option<String>,
    pub lasso_power_weight: Option<Vec<f64>>,
    pub gl_power_weight: Option<Vec<f64>>,
    pub variability_pct: Option<f64>,
    pub lambda1_weights: Option<f64>,
    pub spca_alpha: Option<f64>,
    pub spca_ridge_alpha: Option<f64>,
    pub weight_tol: Option<f64>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct FileCv {
    pub nfolds: Option<usize>,
    pub error_type: Option<String>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct FileTvt {
    pub train_size: Option<usize>,
    pub validate_size: Option<usize>,
    pub train_pct: Option<f64>,
    pub validate_pct: Option<f64>,
    pub error_type: Option<String>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct FileSolver {
    pub max_iters: Option<usize>,
    pub objective_tol: Option<f64>,
    pub coef_tol: Option<f64>,
}

pub fn load_file_config(path: &PathBuf) -> Result<FileConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    toml::from_str(&text).map_err(|e| {
        Error::InvalidParameter(format!("config file {}: {e}", path.display()))
    })
}

/// Everything a run needs, with every default made explicit.
pub struct ResolvedConfig {
    pub model: ModelKind,
    pub penalty: PenaltyKind,
    pub intercept: bool,
    pub tau: f64,
    pub data_path: PathBuf,
    pub response_raw: String,
    pub response: ResponseColumn,
    pub groups_path: Option<PathBuf>,
    pub lambda1: Vec<f64>,
    pub alpha: Vec<f64>,
    pub weight_spec: Option<WeightSpec>,
    pub cv: CvSpec,
    pub tvt: TvtSpec,
    pub controls: SolveControls,
    pub parallel: bool,
    pub num_cores: Option<usize>,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl ResolvedConfig {
    /// Grid over the explicitly listed axes; weight axes come later from the
    /// weight spec when the penalty is adaptive.
    pub fn base_grid(&self) -> ParameterGrid {
        let mut grid = ParameterGrid::new(self.lambda1.clone());
        if self.penalty.uses_alpha() {
            grid = grid.with_alpha(self.alpha.clone());
        }
        grid
    }

    /// Resolved configuration echo for output documents. Scheduling settings
    /// (parallel, num_cores) are omitted: results do not depend on them.
    pub fn config_json(&self, command: &str) -> Json {
        let weights = match &self.weight_spec {
            Some(spec) => Json::Object(vec![
                ("technique", Json::Str(spec.technique.name().to_string())),
                ("model", Json::Str(spec.model.name().to_string())),
                (
                    "lasso_power_weight",
                    Json::floats(spec.lasso_power_weight.iter()),
                ),
                ("gl_power_weight", Json::floats(spec.gl_power_weight.iter())),
                ("variability_pct", Json::Float(spec.variability_pct)),
                ("lambda1_weights", Json::Float(spec.lambda1_weights)),
                ("spca_alpha", Json::Float(spec.spca_alpha)),
                ("spca_ridge_alpha", Json::Float(spec.spca_ridge_alpha)),
                ("weight_tol", Json::Float(spec.weight_tol)),
            ]),
            None => Json::Null,
        };
        let mut fields = vec![
            ("model", Json::Str(self.model.name().to_string())),
            ("penalization", Json::Str(self.penalty.name().to_string())),
            ("intercept", Json::Bool(self.intercept)),
            ("tau", Json::Float(self.tau)),
            ("lambda1", Json::floats(self.lambda1.iter())),
            (
                "alpha",
                if self.penalty.uses_alpha() {
                    Json::floats(self.alpha.iter())
                } else {
                    Json::Null
                },
            ),
            ("weights", weights),
        ];
        match command {
            "cv" => fields.push((
                "cv",
                Json::Object(vec![
                    ("nfolds", Json::Int(self.cv.nfolds as i64)),
                    ("error_type", Json::Str(self.cv.error.name().to_string())),
                ]),
            )),
            "tvt" => fields.push((
                "tvt",
                Json::Object(vec![
                    ("train_size", Json::opt_int(self.tvt.train_size)),
                    ("validate_size", Json::opt_int(self.tvt.validate_size)),
                    ("train_pct", Json::Float(self.tvt.train_pct)),
                    ("validate_pct", Json::Float(self.tvt.validate_pct)),
                    ("error_type", Json::Str(self.tvt.error.name().to_string())),
                ]),
            )),
            _ => {}
        }
        fields.push((
            "solver",
            Json::Object(vec![
                ("max_iters", Json::Int(self.controls.max_iters as i64)),
                ("objective_tol", Json::Float(self.controls.objective_tol)),
                ("coef_tol", Json::Float(self.controls.coef_tol)),
            ]),
        ));
        fields.push((
            "seed",
            match self.seed {
                Some(s) => Json::UInt(s),
                None => Json::Null,
            },
        ));
        Json::Object(fields)
    }
}

fn required<T>(value: Option<T>, what: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidParameter(format!("{what} is required")))
}

/// Merge flags over the config file over defaults into a ready-to-run
/// configuration.
pub fn resolve(args: &RunArgs, default_out: &str) -> Result<ResolvedConfig> {
    let file = match &args.config {
        Some(path) => load_file_config(path)?,
        None => FileConfig::default(),
    };

    let tau = args.tau.or(file.tau).unwrap_or(0.5);
    let model_name = required(
        args.model.clone().or(file.model),
        "model (--model or model in the config file)",
    )?;
    let model = ModelKind::from_name(&model_name, tau)?;
    let penalty_name = required(
        args.penalization.clone().or(file.penalization),
        "penalization (--penalization or penalization in the config file)",
    )?;
    let penalty = PenaltyKind::from_name(&penalty_name)?;
    let data_path = required(
        args.data.clone().or(file.data.path),
        "data file (--data or data.path in the config file)",
    )?;
    let response_raw = args
        .response
        .clone()
        .or(file.data.response)
        .unwrap_or_else(|| "y".to_string());
    let response = ResponseColumn::parse(&response_raw);
    let groups_path = args.groups.clone().or(file.data.groups);

    let lambda1 = args
        .lambda1
        .clone()
        .or(file.lambda1)
        .unwrap_or_else(|| vec![1.0]);
    let alpha = args
        .alpha
        .clone()
        .or(file.alpha)
        .unwrap_or_else(|| vec![0.5]);

    let weight_spec = if penalty.is_adaptive() {
        let mut spec = WeightSpec::default();
        let fw = file.weights;
        if let Some(name) = args.weight_technique.clone().or(fw.technique) {
            spec.technique = WeightTechnique::from_name(&name)?;
        }
        if let Some(name) = &fw.model {
            spec.model = ModelKind::from_name(name, tau)?;
        }
        if let Some(v) = args.lasso_power_weight.clone().or(fw.lasso_power_weight) {
            spec.lasso_power_weight = v;
        }
        if let Some(v) = args.gl_power_weight.clone().or(fw.gl_power_weight) {
            spec.gl_power_weight = v;
        }
        if let Some(v) = args.variability_pct.or(fw.variability_pct) {
            spec.variability_pct = v;
        }
        if let Some(v) = args.lambda1_weights.or(fw.lambda1_weights) {
            spec.lambda1_weights = v;
        }
        if let Some(v) = fw.spca_alpha {
            spec.spca_alpha = v;
        }
        if let Some(v) = fw.spca_ridge_alpha {
            spec.spca_ridge_alpha = v;
        }
        if let Some(v) = fw.weight_tol {
            spec.weight_tol = v;
        }
        spec.validate()?;
        Some(spec)
    } else {
        None
    };

    let seed = args.seed.or(file.seed);
    let cv_error_name = args
        .error_type
        .clone()
        .or(file.cv.error_type)
        .unwrap_or_else(|| "MSE".to_string());
    let cv = CvSpec {
        nfolds: args.nfolds.or(file.cv.nfolds).unwrap_or(5),
        error: penreg::ErrorKind::from_name(&cv_error_name, tau)?,
        seed,
    };
    let tvt_error_name = args
        .error_type
        .clone()
        .or(file.tvt.error_type)
        .unwrap_or_else(|| "MSE".to_string());
    let tvt = TvtSpec {
        train_size: args.train_size.or(file.tvt.train_size),
        validate_size: args.validate_size.or(file.tvt.validate_size),
        train_pct: file.tvt.train_pct.unwrap_or(0.05),
        validate_pct: file.tvt.validate_pct.unwrap_or(0.05),
        error: penreg::ErrorKind::from_name(&tvt_error_name, tau)?,
        seed,
    };

    let mut controls = SolveControls::default();
    if let Some(v) = file.solver.max_iters {
        controls.max_iters = v;
    }
    if let Some(v) = file.solver.objective_tol {
        controls.objective_tol = v;
    }
    if let Some(v) = file.solver.coef_tol {
        controls.coef_tol = v;
    }
    controls.validate()?;

    Ok(ResolvedConfig {
        model,
        penalty,
        intercept: file.intercept.unwrap_or(true),
        tau,
        data_path,
        response_raw,
        response,
        groups_path,
        lambda1,
        alpha,
        weight_spec,
        cv,
        tvt,
        controls,
        parallel: args.parallel || file.parallel.unwrap_or(false),
        num_cores: args.num_cores.or(file.num_cores),
        seed,
        out: args.out.clone().unwrap_or_else(|| PathBuf::from(default_out)),
    })
}
