//! penreg: penalized linear and quantile regression from the command line.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::Array1;

use penreg::dataset::{generate_grouped, generate_sparse, load_csv, save_csv, save_groups};
use penreg::grid::solve_grid;
use penreg::solver::predict_one;
use penreg::tuning::{
    cross_validation, materialize_grid, resolve_tvt_sizes, select_best, train_validate_test,
};
use penreg::{Coefficients, Dataset, Error, GroupedConfig, Result, SparseConfig};

use config::{resolve, ResolvedConfig, RunArgs};
use output::Json;

#[derive(Parser)]
#[command(
    name = "penreg",
    version,
    about = "Penalized linear and quantile regression: lasso, group lasso, \
             sparse group lasso and their adaptive variants"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit every model on the parameter grid using the full dataset.
    Fit(RunArgs),
    /// Cross-validate the grid and report the fold-error matrix and winner.
    Cv(RunArgs),
    /// Train/validate/test selection with a final held-out test error.
    Tvt(RunArgs),
    /// Apply saved coefficients to new data.
    Predict(PredictArgs),
    /// Generate synthetic regression datasets with known coefficients.
    Generate(GenerateArgs),
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Coefficient file produced by fit or tvt.
    #[arg(long)]
    coefs: PathBuf,
    /// CSV file to predict on; predictor columns are matched by name.
    #[arg(long)]
    data: PathBuf,
    /// Output CSV path, one column per coefficient set.
    #[arg(long, default_value = "predictions.csv")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(subcommand)]
    kind: GenerateKind,
}

#[derive(Subcommand, Debug)]
enum GenerateKind {
    /// Predictors in contiguous groups with block-sparse true coefficients.
    Grouped(GroupedArgs),
    /// Ungrouped predictors with a few informative coefficients and a bias.
    Sparse(SparseArgs),
}

#[derive(Args, Debug)]
struct GroupedArgs {
    #[arg(long, default_value_t = 100)]
    n_obs: usize,
    #[arg(long, default_value_t = 10)]
    group_size: usize,
    #[arg(long, default_value_t = 10)]
    num_groups: usize,
    /// Number of leading groups carrying signal.
    #[arg(long, default_value_t = 5)]
    non_zero_groups: usize,
    /// Number of leading nonzero coefficients inside each signal group.
    #[arg(long, default_value_t = 6)]
    non_zero_coef: usize,
    /// Standard deviation of the additive noise.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Output prefix: writes <prefix>.csv, <prefix>.groups.csv and
    /// <prefix>.truth.json.
    #[arg(long, default_value = "synthetic")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SparseArgs {
    #[arg(long, default_value_t = 100)]
    n_samples: usize,
    #[arg(long, default_value_t = 200)]
    n_features: usize,
    /// Number of nonzero true coefficients, at shuffled positions.
    #[arg(long, default_value_t = 10)]
    n_informative: usize,
    /// Intercept added to the response.
    #[arg(long, default_value_t = 0.0)]
    bias: f64,
    /// Standard deviation of the additive noise.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Output prefix: writes <prefix>.csv and <prefix>.truth.json.
    #[arg(long, default_value = "synthetic")]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(args) => run_fit(args),
        Command::Cv(args) => run_cv(args),
        Command::Tvt(args) => run_tvt(args),
        Command::Predict(args) => run_predict(args),
        Command::Generate(args) => run_generate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (prefix, code) = match &e {
                Error::InvalidParameter(_) => ("E_CONFIG", 2),
                Error::Numeric(_) => ("E_NUMERIC", 4),
                _ => ("E_DATA", 3),
            };
            let message = e.to_string().replace('\n', " ");
            eprintln!("{prefix}: {message}");
            ExitCode::from(code)
        }
    }
}

/// Predictor column names: the header row minus the resolved response column.
/// Mirrors the loader's resolution: exact header match first, then a numeric
/// index.
fn predictor_names(headers: &[String], response_raw: &str) -> Result<Vec<String>> {
    let pos = headers
        .iter()
        .position(|h| h == response_raw)
        .or_else(|| {
            response_raw
                .parse::<usize>()
                .ok()
                .filter(|i| *i < headers.len())
        })
        .ok_or_else(|| Error::ResponseNotFound(response_raw.to_string()))?;
    Ok(headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != pos)
        .map(|(_, h)| h.clone())
        .collect())
}

fn load_dataset(cfg: &ResolvedConfig) -> Result<(Dataset, Vec<String>)> {
    let data = load_csv(&cfg.data_path, &cfg.response, cfg.groups_path.as_deref())?;
    let headers = output::read_headers(&cfg.data_path)?;
    let predictors = predictor_names(&headers, &cfg.response_raw)?;
    Ok((data, predictors))
}

fn data_json(cfg: &ResolvedConfig, data: &Dataset) -> Json {
    Json::Object(vec![
        ("path", Json::Str(cfg.data_path.display().to_string())),
        ("response", Json::Str(cfg.response_raw.clone())),
        (
            "groups",
            match &cfg.groups_path {
                Some(p) => Json::Str(p.display().to_string()),
                None => Json::Null,
            },
        ),
        ("n_obs", Json::Int(data.n_obs() as i64)),
        ("n_predictors", Json::Int(data.n_predictors() as i64)),
    ])
}

fn run_fit(args: &RunArgs) -> Result<()> {
    let cfg = resolve(args, "fit.json")?;
    let (data, predictors) = load_dataset(&cfg)?;
    let groups = data.group_structure();
    let grid = materialize_grid(
        &cfg.base_grid(),
        cfg.penalty,
        cfg.weight_spec.as_ref(),
        data.x(),
        data.y(),
        groups.as_ref(),
    )?;
    let result = solve_grid(
        cfg.model,
        cfg.penalty,
        &grid,
        &data,
        &cfg.controls,
        cfg.intercept,
        cfg.parallel,
        cfg.num_cores,
    )?;
    let doc = Json::Object(vec![
        ("command", Json::Str("fit".to_string())),
        ("config", cfg.config_json("fit")),
        ("data", data_json(&cfg, &data)),
        ("predictors", Json::strs(&predictors)),
        ("grid", output::grid_json(&grid)),
        ("coefficients", output::coefficients_json(&result)?),
    ]);
    output::write_json(&cfg.out, &doc)
}

/// Parameters of the cross-validation winner. Per-fold weight vectors differ
/// across folds, so the weight axes are reported as the power values that
/// generated them.
fn cv_selected_json(cfg: &ResolvedConfig, best: usize) -> Result<Json> {
    let mut shape = cfg.base_grid();
    if let Some(spec) = &cfg.weight_spec {
        if cfg.penalty.uses_lasso_weights() {
            shape =
                shape.with_lasso_weights(vec![Array1::zeros(0); spec.lasso_power_weight.len()]);
        }
        if cfg.penalty.uses_gl_weights() {
            shape = shape.with_gl_weights(vec![Array1::zeros(0); spec.gl_power_weight.len()]);
        }
    }
    let pos = shape.axis_positions(best)?;
    let mut fields = vec![
        ("index", Json::Int(best as i64)),
        ("lambda1", Json::Float(cfg.lambda1[pos[0]])),
        (
            "alpha",
            if cfg.penalty.uses_alpha() {
                Json::Float(cfg.alpha[pos[1]])
            } else {
                Json::Null
            },
        ),
    ];
    let (lasso_power, gl_power) = match &cfg.weight_spec {
        Some(spec) => (
            cfg.penalty
                .uses_lasso_weights()
                .then(|| spec.lasso_power_weight[pos[2]]),
            cfg.penalty
                .uses_gl_weights()
                .then(|| spec.gl_power_weight[pos[3]]),
        ),
        None => (None, None),
    };
    fields.push(("lasso_power_weight", Json::opt_float(lasso_power)));
    fields.push(("gl_power_weight", Json::opt_float(gl_power)));
    Ok(Json::Object(fields))
}

fn run_cv(args: &RunArgs) -> Result<()> {
    let cfg = resolve(args, "cv.json")?;
    let (data, _) = load_dataset(&cfg)?;
    let errors = cross_validation(
        cfg.model,
        cfg.penalty,
        &cfg.base_grid(),
        cfg.weight_spec.as_ref(),
        &data,
        &cfg.cv,
        &cfg.controls,
        cfg.intercept,
        cfg.parallel,
        cfg.num_cores,
    )?;
    let best = select_best(&errors)?;
    let matrix_path = cfg.out.with_extension("errors.csv");
    output::write_error_matrix_csv(&matrix_path, &errors.values)?;
    let doc = Json::Object(vec![
        ("command", Json::Str("cv".to_string())),
        ("config", cfg.config_json("cv")),
        ("data", data_json(&cfg, &data)),
        (
            "error_matrix",
            Json::Object(vec![
                ("rows", Json::Int(errors.num_models() as i64)),
                ("cols", Json::Int(errors.num_folds() as i64)),
                ("path", Json::Str(matrix_path.display().to_string())),
            ]),
        ),
        ("fold_means", Json::floats(errors.fold_means().iter())),
        ("selected", cv_selected_json(&cfg, best)?),
    ]);
    output::write_json(&cfg.out, &doc)
}

fn run_tvt(args: &RunArgs) -> Result<()> {
    let cfg = resolve(args, "tvt.json")?;
    let (data, predictors) = load_dataset(&cfg)?;
    let (train_len, validate_len, test_len) = resolve_tvt_sizes(data.n_obs(), &cfg.tvt)?;
    let result = train_validate_test(
        cfg.model,
        cfg.penalty,
        &cfg.base_grid(),
        cfg.weight_spec.as_ref(),
        &data,
        &cfg.tvt,
        &cfg.controls,
        cfg.intercept,
        cfg.parallel,
        cfg.num_cores,
    )?;
    let doc = Json::Object(vec![
        ("command", Json::Str("tvt".to_string())),
        ("config", cfg.config_json("tvt")),
        ("data", data_json(&cfg, &data)),
        ("predictors", Json::strs(&predictors)),
        (
            "split",
            Json::Object(vec![
                ("train", Json::Int(train_len as i64)),
                ("validate", Json::Int(validate_len as i64)),
                ("test", Json::Int(test_len as i64)),
            ]),
        ),
        ("selected_index", Json::Int(result.selected_index as i64)),
        (
            "optimal_parameters",
            output::parameters_json(&result.optimal_parameters),
        ),
        ("optimal_betas", Json::floats(result.optimal_betas.iter())),
        ("test_error", Json::Float(result.test_error)),
    ]);
    output::write_json(&cfg.out, &doc)
}

fn run_predict(args: &PredictArgs) -> Result<()> {
    let saved = output::read_coefficients(&args.coefs)?;
    let x = output::read_matrix_by_columns(&args.data, &saved.predictors)?;
    let mut predictions = Vec::with_capacity(saved.sets.len());
    for (intercept, beta) in &saved.sets {
        let coefs = Coefficients {
            intercept: *intercept,
            beta: beta.clone(),
            objective: 0.0,
            iterations: 0,
            converged: true,
        };
        predictions.push(predict_one(&coefs, &x)?);
    }
    output::write_predictions_csv(&args.out, &predictions)
}

fn prefixed(prefix: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}.{suffix}", prefix.display()))
}

fn run_generate(args: &GenerateArgs) -> Result<()> {
    match &args.kind {
        GenerateKind::Grouped(g) => {
            let config = GroupedConfig {
                n_obs: g.n_obs,
                group_size: g.group_size,
                num_groups: g.num_groups,
                non_zero_groups: g.non_zero_groups,
                non_zero_coef: g.non_zero_coef,
                noise: g.noise,
                seed: g.seed,
            };
            let (data, truth) = generate_grouped(&config)?;
            let data_path = prefixed(&g.out, "csv");
            let groups_path = prefixed(&g.out, "groups.csv");
            save_csv(&data, &data_path)?;
            save_groups(&data, &groups_path)?;
            let doc = Json::Object(vec![
                ("command", Json::Str("generate".to_string())),
                ("kind", Json::Str("grouped".to_string())),
                (
                    "config",
                    Json::Object(vec![
                        ("n_obs", Json::Int(g.n_obs as i64)),
                        ("group_size", Json::Int(g.group_size as i64)),
                        ("num_groups", Json::Int(g.num_groups as i64)),
                        ("non_zero_groups", Json::Int(g.non_zero_groups as i64)),
                        ("non_zero_coef", Json::Int(g.non_zero_coef as i64)),
                        ("noise", Json::Float(g.noise)),
                    ]),
                ),
                ("seed", Json::UInt(truth.seed)),
                ("bias", Json::Float(truth.bias)),
                ("beta_true", Json::floats(truth.beta_true.iter())),
                (
                    "files",
                    Json::Object(vec![
                        ("data", Json::Str(data_path.display().to_string())),
                        ("groups", Json::Str(groups_path.display().to_string())),
                    ]),
                ),
            ]);
            output::write_json(&prefixed(&g.out, "truth.json"), &doc)
        }
        GenerateKind::Sparse(s) => {
            let config = SparseConfig {
                n_samples: s.n_samples,
                n_features: s.n_features,
                n_informative: s.n_informative,
                bias: s.bias,
                noise: s.noise,
                seed: s.seed,
            };
            let (data, truth) = generate_sparse(&config)?;
            let data_path = prefixed(&s.out, "csv");
            save_csv(&data, &data_path)?;
            let doc = Json::Object(vec![
                ("command", Json::Str("generate".to_string())),
                ("kind", Json::Str("sparse".to_string())),
                (
                    "config",
                    Json::Object(vec![
                        ("n_samples", Json::Int(s.n_samples as i64)),
                        ("n_features", Json::Int(s.n_features as i64)),
                        ("n_informative", Json::Int(s.n_informative as i64)),
                        ("bias", Json::Float(s.bias)),
                        ("noise", Json::Float(s.noise)),
                    ]),
                ),
                ("seed", Json::UInt(truth.seed)),
                ("bias", Json::Float(truth.bias)),
                ("beta_true", Json::floats(truth.beta_true.iter())),
                (
                    "files",
                    Json::Object(vec![
                        ("data", Json::Str(data_path.display().to_string())),
                        ("groups", Json::Null),
                    ]),
                ),
            ]);
            output::write_json(&prefixed(&s.out, "truth.json"), &doc)
        }
    }
}
