//! Acceptance gate for the toolkit: one test per shipping criterion, each
//! asserting its tolerance and time budget and printing a PASS line. The
//! oracles here (normal equations, exhaustive objective grids, subgradient
//! residuals) are written independently of the library internals.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use penreg::dataset::{generate_grouped, generate_sparse};
use penreg::grid::{retrieve_parameters_value, solve_grid, solve_grid_arrays};
use penreg::penalty::PenaltyLevels;
use penreg::solver::fit_arrays;
use penreg::tuning::{cross_validation, kfold_indices, materialize_grid, select_best, train_validate_test};
use penreg::{
    CvSpec, Dataset, ErrorKind, GroupedConfig, GroupStructure, ModelKind, ParameterGrid,
    PenaltyKind, PenaltySpec, SolveControls, SparseConfig, TvtSpec, WeightSpec, WeightTechnique,
};

fn pass(criterion: &str, start: Instant) {
    println!("ACCEPTANCE {criterion}: PASS ({:.2?})", start.elapsed());
}

fn tight_controls() -> SolveControls {
    SolveControls {
        max_iters: 20000,
        objective_tol: 1e-14,
        coef_tol: 1e-5,
    }
}

fn log_spaced(lo_exp: f64, hi_exp: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| 10f64.powf(lo_exp + k as f64 * (hi_exp - lo_exp) / (count - 1) as f64))
        .collect()
}

#[test]
fn criterion_1_grid_enumeration_and_parameter_retrieval() {
    let start = Instant::now();
    let (data, _) = generate_grouped(&GroupedConfig {
        n_obs: 20,
        group_size: 2,
        num_groups: 3,
        non_zero_groups: 2,
        non_zero_coef: 1,
        noise: 0.3,
        seed: Some(41),
    })
    .unwrap();
    let grid = ParameterGrid::new(vec![0.001, 0.01, 0.1]).with_alpha(vec![0.2, 0.5, 0.7]);
    assert_eq!(grid.size(), 9);
    let result = solve_grid(
        ModelKind::LeastSquares,
        PenaltyKind::SparseGroupLasso,
        &grid,
        &data,
        &SolveControls::default(),
        true,
        false,
        None,
    )
    .unwrap();
    assert_eq!(result.len(), 9);
    let values = retrieve_parameters_value(&result, 5).unwrap();
    assert_eq!(values.lambda1, 0.01);
    assert_eq!(values.alpha, Some(0.7));
    assert!(start.elapsed() < Duration::from_secs(1), "{:?}", start.elapsed());
    pass("1", start);
}

#[test]
fn criterion_2_weight_grid_of_120_models_sequential() {
    let start = Instant::now();
    let (raw, _) = generate_sparse(&SparseConfig {
        n_samples: 500,
        n_features: 13,
        n_informative: 6,
        bias: 0.0,
        noise: 1.0,
        seed: Some(42),
    })
    .unwrap();
    let labels: Vec<i64> = vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 3];
    let data = Dataset::new(raw.x().clone(), raw.y().clone(), Some(labels)).unwrap();
    let groups = data.group_structure();

    let spec = WeightSpec {
        technique: WeightTechnique::Unpenalized,
        lasso_power_weight: vec![1.0, 1.25],
        gl_power_weight: vec![0.8, 1.0, 1.2, 1.4, 1.6],
        ..WeightSpec::default()
    };
    let base = ParameterGrid::new(vec![0.01, 0.1, 1.0]).with_alpha(vec![0.1, 0.4, 0.7, 0.95]);
    let grid = materialize_grid(
        &base,
        PenaltyKind::AdaptiveSparseGroupLasso,
        Some(&spec),
        data.x(),
        data.y(),
        groups.as_ref(),
    )
    .unwrap();
    assert_eq!(grid.lasso_weights.as_ref().unwrap().len(), 2);
    assert_eq!(grid.gl_weights.as_ref().unwrap().len(), 5);
    assert_eq!(grid.size(), 120, "3 x 4 x 2 x 5");

    let result = solve_grid(
        ModelKind::LeastSquares,
        PenaltyKind::AdaptiveSparseGroupLasso,
        &grid,
        &data,
        &SolveControls::default(),
        true,
        false,
        None,
    )
    .unwrap();
    assert_eq!(result.len(), 120);
    assert!(result
        .coefficients
        .iter()
        .all(|c| c.beta.iter().all(|b| b.is_finite())));
    assert!(start.elapsed() < Duration::from_secs(30), "{:?}", start.elapsed());
    pass("2", start);
}

#[test]
fn criterion_3_cv_error_matrix_shapes() {
    let start = Instant::now();
    let (small, _) = generate_grouped(&GroupedConfig {
        n_obs: 60,
        group_size: 2,
        num_groups: 3,
        non_zero_groups: 2,
        non_zero_coef: 2,
        noise: 0.5,
        seed: Some(43),
    })
    .unwrap();
    let grid = ParameterGrid::new(log_spaced(-3.0, 0.0, 4)).with_alpha(vec![0.2, 0.5, 0.8]);
    let errors = cross_validation(
        ModelKind::LeastSquares,
        PenaltyKind::SparseGroupLasso,
        &grid,
        None,
        &small,
        &CvSpec {
            nfolds: 10,
            error: ErrorKind::Mse,
            seed: Some(7),
        },
        &SolveControls::default(),
        true,
        false,
        None,
    )
    .unwrap();
    assert_eq!((errors.num_models(), errors.num_folds()), (12, 10));

    let (large, _) = generate_grouped(&GroupedConfig {
        n_obs: 700,
        group_size: 10,
        num_groups: 10,
        non_zero_groups: 5,
        non_zero_coef: 6,
        noise: 1.0,
        seed: Some(44),
    })
    .unwrap();
    let alphas: Vec<f64> = (0..20).map(|k| k as f64 / 19.0).collect();
    let grid = ParameterGrid::new(log_spaced(-3.0, 2.0, 23)).with_alpha(alphas);
    let errors = cross_validation(
        ModelKind::LeastSquares,
        PenaltyKind::SparseGroupLasso,
        &grid,
        None,
        &large,
        &CvSpec {
            nfolds: 5,
            error: ErrorKind::Mse,
            seed: Some(8),
        },
        &SolveControls::default(),
        true,
        true,
        None,
    )
    .unwrap();
    assert_eq!((errors.num_models(), errors.num_folds()), (460, 5));
    assert!(start.elapsed() < Duration::from_secs(600), "{:?}", start.elapsed());
    pass("3", start);
}

/// Gaussian elimination with partial pivoting; the independent linear-system
/// oracle for the unpenalized fit.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let m = b.len();
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..m {
            let factor = a[row][col] / a[col][col];
            for k in col..m {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; m];
    for col in (0..m).rev() {
        let mut acc = b[col];
        for k in col + 1..m {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    x
}

#[test]
fn criterion_4a_unpenalized_fit_matches_normal_equations() {
    let start = Instant::now();
    let (data, _) = generate_sparse(&SparseConfig {
        n_samples: 50,
        n_features: 5,
        n_informative: 3,
        bias: 2.0,
        noise: 1.0,
        seed: Some(45),
    })
    .unwrap();
    let fit = fit_arrays(
        ModelKind::LeastSquares,
        &PenaltySpec::none(),
        data.x(),
        data.y(),
        None,
        &tight_controls(),
        true,
        )
    .unwrap();

    // Design with a leading all-ones column for the intercept.
    let n = data.n_obs();
    let m = data.n_predictors() + 1;
    let design: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![1.0];
            row.extend(data.x().row(i).iter());
            row
        })
        .collect();
    let mut ata = vec![vec![0.0; m]; m];
    let mut aty = vec![0.0; m];
    for (i, row) in design.iter().enumerate() {
        for j in 0..m {
            aty[j] += row[j] * data.y()[i];
            for k in 0..m {
                ata[j][k] += row[j] * row[k];
            }
        }
    }
    let exact = solve_dense(ata, aty);

    let mut worst = (fit.intercept.unwrap() - exact[0]).abs();
    for j in 0..data.n_predictors() {
        worst = worst.max((fit.beta[j] - exact[j + 1]).abs());
    }
    assert!(worst <= 1e-6, "deviation {worst}");
    pass("4a", start);
}

#[test]
fn criterion_4b_intercept_only_median_regression() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    let n = 51;
    let y = Array1::from_iter((0..n).map(|_| rng.random_range(-5.0..5.0)));
    let x = Array2::<f64>::zeros((n, 0));
    let fit = fit_arrays(
        ModelKind::Quantile { tau: 0.5 },
        &PenaltySpec::none(),
        &x,
        &y,
        None,
        &tight_controls(),
        true,
    )
    .unwrap();
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[n / 2];
    let dev = (fit.intercept.unwrap() - median).abs();
    assert!(dev <= 1e-6, "intercept {} vs median {median}", fit.intercept.unwrap());
    pass("4b", start);
}

/// Quadratic-form objective evaluator over a 2-predictor instance, used for
/// exhaustive 1e-3-resolution search over [-3, 3]^2.
struct TwoPredictorObjective {
    g11: f64,
    g22: f64,
    g12: f64,
    c1: f64,
    c2: f64,
    c0: f64,
    n: f64,
}

impl TwoPredictorObjective {
    fn new(x: &Array2<f64>, y: &Array1<f64>) -> Self {
        let x1 = x.column(0);
        let x2 = x.column(1);
        TwoPredictorObjective {
            g11: x1.dot(&x1),
            g22: x2.dot(&x2),
            g12: x1.dot(&x2),
            c1: x1.dot(y),
            c2: x2.dot(y),
            c0: y.dot(y),
            n: x.nrows() as f64,
        }
    }

    fn risk(&self, b1: f64, b2: f64) -> f64 {
        (self.c0 + b1 * b1 * self.g11 + b2 * b2 * self.g22 + 2.0 * b1 * b2 * self.g12
            - 2.0 * b1 * self.c1
            - 2.0 * b2 * self.c2)
            / self.n
    }
}

fn grid_minimum(objective: impl Fn(f64, f64) -> f64) -> f64 {
    let mut best = f64::INFINITY;
    for k1 in 0..=6000u32 {
        let b1 = -3.0 + f64::from(k1) * 1e-3;
        for k2 in 0..=6000u32 {
            let b2 = -3.0 + f64::from(k2) * 1e-3;
            let v = objective(b1, b2);
            if v < best {
                best = v;
            }
        }
    }
    best
}

#[test]
fn criterion_4c_solver_beats_exhaustive_objective_search() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let n = 8;
    let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.5..1.5));
    let beta_true = [1.2, -0.7];
    let y = Array1::from_iter((0..n).map(|i| {
        x[[i, 0]] * beta_true[0] + x[[i, 1]] * beta_true[1] + 0.1 * rng.random_range(-1.0..1.0)
    }));
    let obj = TwoPredictorObjective::new(&x, &y);

    let lambda = 0.5;
    let fit = fit_arrays(
        ModelKind::LeastSquares,
        &PenaltySpec::new(PenaltyKind::Lasso, lambda),
        &x,
        &y,
        None,
        &tight_controls(),
        false,
    )
    .unwrap();
    let lasso_obj = |b1: f64, b2: f64| obj.risk(b1, b2) + lambda * (b1.abs() + b2.abs());
    let solver_value = lasso_obj(fit.beta[0], fit.beta[1]);
    let oracle = grid_minimum(lasso_obj);
    assert!(
        solver_value <= oracle + 1e-4,
        "lasso: solver {solver_value} vs oracle {oracle}"
    );

    let groups = GroupStructure::from_labels(&[0, 0]).unwrap();
    let (lambda, alpha) = (0.4, 0.5);
    let fit = fit_arrays(
        ModelKind::LeastSquares,
        &PenaltySpec::new(PenaltyKind::SparseGroupLasso, lambda).with_alpha(alpha),
        &x,
        &y,
        Some(&groups),
        &tight_controls(),
        false,
    )
    .unwrap();
    let sqrt2 = 2f64.sqrt();
    let sgl_obj = |b1: f64, b2: f64| {
        obj.risk(b1, b2)
            + lambda * alpha * (b1.abs() + b2.abs())
            + lambda * (1.0 - alpha) * sqrt2 * (b1 * b1 + b2 * b2).sqrt()
    };
    let solver_value = sgl_obj(fit.beta[0], fit.beta[1]);
    let oracle = grid_minimum(sgl_obj);
    assert!(
        solver_value <= oracle + 1e-4,
        "sgl: solver {solver_value} vs oracle {oracle}"
    );
    pass("4c", start);
}

#[test]
fn criterion_4d_boundary_equivalences() {
    let start = Instant::now();
    let (data, _) = generate_grouped(&GroupedConfig {
        n_obs: 30,
        group_size: 2,
        num_groups: 3,
        non_zero_groups: 2,
        non_zero_coef: 2,
        noise: 0.4,
        seed: Some(48),
    })
    .unwrap();
    let groups = data.group_structure();
    let gs = groups.as_ref();
    let controls = tight_controls();
    let p = data.n_predictors();
    let num_groups = gs.unwrap().num_groups();
    let lambda = 0.3;

    let fit = |spec: &PenaltySpec| {
        fit_arrays(
            ModelKind::LeastSquares,
            spec,
            data.x(),
            data.y(),
            gs,
            &controls,
            true,
        )
        .unwrap()
    };
    let max_diff = |a: &penreg::Coefficients, b: &penreg::Coefficients| {
        let mut worst = (a.intercept.unwrap() - b.intercept.unwrap()).abs();
        for j in 0..p {
            worst = worst.max((a.beta[j] - b.beta[j]).abs());
        }
        worst
    };

    let sgl_all_l1 = fit(&PenaltySpec::new(PenaltyKind::SparseGroupLasso, lambda).with_alpha(1.0));
    let lasso = fit(&PenaltySpec::new(PenaltyKind::Lasso, lambda));
    let d = max_diff(&sgl_all_l1, &lasso);
    assert!(d <= 1e-6, "alpha=1 vs lasso: {d}");

    let sgl_all_group =
        fit(&PenaltySpec::new(PenaltyKind::SparseGroupLasso, lambda).with_alpha(0.0));
    let group_lasso = fit(&PenaltySpec::new(PenaltyKind::GroupLasso, lambda));
    let d = max_diff(&sgl_all_group, &group_lasso);
    assert!(d <= 1e-6, "alpha=0 vs group lasso: {d}");

    let unit_adaptive = fit(
        &PenaltySpec::new(PenaltyKind::AdaptiveSparseGroupLasso, lambda)
            .with_alpha(0.6)
            .with_lasso_weights(Array1::ones(p))
            .with_gl_weights(Array1::ones(num_groups)),
    );
    let plain = fit(&PenaltySpec::new(PenaltyKind::SparseGroupLasso, lambda).with_alpha(0.6));
    let d = max_diff(&unit_adaptive, &plain);
    assert!(d <= 1e-6, "unit adaptive weights vs plain: {d}");

    let unit_alasso = fit(
        &PenaltySpec::new(PenaltyKind::AdaptiveLasso, lambda)
            .with_lasso_weights(Array1::ones(p)),
    );
    let plain_lasso = fit(&PenaltySpec::new(PenaltyKind::Lasso, lambda));
    let d = max_diff(&unit_alasso, &plain_lasso);
    assert!(d <= 1e-6, "unit adaptive lasso vs lasso: {d}");
    pass("4d", start);
}

/// Distance from g to the subdifferential of the penalty at z, computed from
/// first principles: per-coordinate soft interval tests plus per-group
/// norm conditions.
fn subgradient_residual(
    z: &Array1<f64>,
    g: &Array1<f64>,
    l1: &[f64],
    grp: &[f64],
    groups: Option<&GroupStructure>,
) -> f64 {
    let mut worst = 0f64;
    let mut grouped = vec![false; z.len()];
    if let Some(gs) = groups {
        for l in 0..gs.num_groups() {
            let members = gs.members(l);
            for &j in members {
                grouped[j] = true;
            }
            let norm: f64 = members
                .iter()
                .map(|&j| z[j] * z[j])
                .sum::<f64>()
                .sqrt();
            if norm > 0.0 {
                for &j in members {
                    let direction = grp[l] * z[j] / norm;
                    if z[j] != 0.0 {
                        worst = worst.max((g[j] - l1[j] * z[j].signum() - direction).abs());
                    } else {
                        worst = worst.max(((g[j] - direction).abs() - l1[j]).max(0.0));
                    }
                }
            } else {
                // Whole group at zero: after shrinking g into the l1 box the
                // remainder must fit inside the group-level ball.
                let shrunk: f64 = members
                    .iter()
                    .map(|&j| {
                        let s = g[j].abs() - l1[j];
                        if s > 0.0 {
                            s * s
                        } else {
                            0.0
                        }
                    })
                    .sum::<f64>()
                    .sqrt();
                worst = worst.max((shrunk - grp[l]).max(0.0));
            }
        }
    }
    for j in 0..z.len() {
        if grouped[j] {
            continue;
        }
        if z[j] != 0.0 {
            worst = worst.max((g[j] - l1[j] * z[j].signum()).abs());
        } else {
            worst = worst.max((g[j].abs() - l1[j]).max(0.0));
        }
    }
    worst
}

#[test]
fn criterion_4e_prox_satisfies_subgradient_optimality() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(49);
    let kinds = [
        PenaltyKind::None,
        PenaltyKind::Lasso,
        PenaltyKind::GroupLasso,
        PenaltyKind::SparseGroupLasso,
        PenaltyKind::AdaptiveLasso,
        PenaltyKind::AdaptiveGroupLasso,
        PenaltyKind::AdaptiveSparseGroupLasso,
        PenaltyKind::AdaptiveSglLassoPart,
        PenaltyKind::AdaptiveSglGroupPart,
    ];
    for draw in 0..1000 {
        let kind = kinds[draw % kinds.len()];
        let p = rng.random_range(1..=12usize);
        let num_groups = rng.random_range(1..=p.min(4));
        let labels: Vec<i64> = (0..p)
            .map(|j| ((j * num_groups) / p).min(num_groups - 1) as i64)
            .collect();
        let gs = GroupStructure::from_labels(&labels).unwrap();
        let lambda = rng.random_range(0.0..2.0);
        let mut spec = PenaltySpec::new(kind, lambda);
        if kind.uses_alpha() {
            spec = spec.with_alpha(rng.random_range(0.0..=1.0));
        }
        if kind.uses_lasso_weights() {
            spec = spec
                .with_lasso_weights(Array1::from_iter((0..p).map(|_| rng.random_range(0.0..3.0))));
        }
        if kind.uses_gl_weights() {
            spec = spec.with_gl_weights(Array1::from_iter(
                (0..gs.num_groups()).map(|_| rng.random_range(0.0..3.0)),
            ));
        }
        let needs_groups = kind.has_group_part();
        let groups_arg = needs_groups.then_some(&gs);
        let levels = PenaltyLevels::from_spec(&spec, p, groups_arg).unwrap();

        // Effective levels recomputed here, independent of the library.
        let (l1_scale, grp_scale) = if kind.uses_alpha() {
            let a = spec.alpha.unwrap();
            (lambda * a, lambda * (1.0 - a))
        } else {
            (lambda, lambda)
        };
        let l1: Vec<f64> = if kind.has_l1_part() {
            match &spec.lasso_weights {
                Some(w) => w.iter().map(|wj| l1_scale * wj).collect(),
                None => vec![l1_scale; p],
            }
        } else {
            vec![0.0; p]
        };
        let grp: Vec<f64> = if needs_groups {
            (0..gs.num_groups())
                .map(|l| {
                    let w = spec.gl_weights.as_ref().map_or(1.0, |v| v[l]);
                    grp_scale * (gs.members(l).len() as f64).sqrt() * w
                })
                .collect()
        } else {
            Vec::new()
        };

        let v = Array1::from_iter((0..p).map(|_| rng.random_range(-3.0..3.0)));
        let step = rng.random_range(0.01..2.0);
        let z = levels.prox(&v, step);
        let gradient = (&v - &z) / step;
        let residual =
            subgradient_residual(&z, &gradient, &l1, &grp, needs_groups.then_some(&gs));
        assert!(
            residual <= 1e-8,
            "draw {draw} kind {:?}: residual {residual}",
            kind
        );
    }
    pass("4e", start);
}

fn true_positive_rate(beta_true: &Array1<f64>, beta_hat: &Array1<f64>) -> f64 {
    let threshold = 1e-4;
    let real: Vec<usize> = (0..beta_true.len())
        .filter(|&j| beta_true[j].abs() > threshold)
        .collect();
    let hits = real
        .iter()
        .filter(|&&j| beta_hat[j].abs() > threshold)
        .count();
    hits as f64 / real.len() as f64
}

#[test]
fn criterion_5_grouped_quantile_sgl_recovers_signals() {
    let start = Instant::now();
    let (data, truth) = generate_grouped(&GroupedConfig {
        n_obs: 1000,
        group_size: 10,
        num_groups: 10,
        non_zero_groups: 5,
        non_zero_coef: 6,
        noise: 1.0,
        seed: Some(50),
    })
    .unwrap();
    assert_eq!(
        truth.beta_true.iter().filter(|b| b.abs() > 1e-4).count(),
        30
    );
    let alphas: Vec<f64> = (0..10).map(|k| k as f64 / 9.0).collect();
    let grid = ParameterGrid::new(log_spaced(-4.0, 0.0, 12)).with_alpha(alphas);
    let model = ModelKind::Quantile { tau: 0.5 };
    let errors = cross_validation(
        model,
        PenaltyKind::SparseGroupLasso,
        &grid,
        None,
        &data,
        &CvSpec {
            nfolds: 5,
            error: ErrorKind::Qre { tau: 0.5 },
            seed: Some(51),
        },
        &SolveControls::default(),
        true,
        true,
        None,
    )
    .unwrap();
    assert_eq!((errors.num_models(), errors.num_folds()), (120, 5));
    let best = select_best(&errors).unwrap();
    let spec = grid.spec_at(PenaltyKind::SparseGroupLasso, best).unwrap();
    let groups = data.group_structure();
    let refit = fit_arrays(
        model,
        &spec,
        data.x(),
        data.y(),
        groups.as_ref(),
        &SolveControls::default(),
        true,
    )
    .unwrap();
    let tpr = true_positive_rate(&truth.beta_true, &refit.beta);
    assert!(tpr >= 0.95, "true positive rate {tpr}");
    assert!(start.elapsed() < Duration::from_secs(300), "{:?}", start.elapsed());
    pass("5", start);
}

fn correct_selection_rate(beta_true: &Array1<f64>, beta_hat: &Array1<f64>) -> f64 {
    let threshold = 1e-4;
    let agree = (0..beta_true.len())
        .filter(|&j| (beta_true[j].abs() > threshold) == (beta_hat[j].abs() > threshold))
        .count();
    agree as f64 / beta_true.len() as f64
}

#[test]
fn criterion_6_adaptive_lasso_beats_plain_lasso_on_sparse_data() {
    let start = Instant::now();
    let lambdas: Vec<f64> = (0..46).map(|k| 10f64.powf(-3.0 + 0.1 * k as f64)).collect();
    let grid = ParameterGrid::new(lambdas);
    let mut adaptive_wins = 0;
    for seed in 2001..2011u64 {
        let (data, truth) = generate_sparse(&SparseConfig {
            n_samples: 100,
            n_features: 200,
            n_informative: 10,
            bias: 10.0,
            noise: 1.0,
            seed: Some(seed),
        })
        .unwrap();
        let tvt = TvtSpec {
            train_size: Some(50),
            validate_size: Some(25),
            train_pct: 0.05,
            validate_pct: 0.05,
            error: ErrorKind::Mse,
            seed: Some(seed),
        };
        let plain = train_validate_test(
            ModelKind::LeastSquares,
            PenaltyKind::Lasso,
            &grid,
            None,
            &data,
            &tvt,
            &SolveControls::default(),
            true,
            false,
            None,
        )
        .unwrap();
        let weight_spec = WeightSpec {
            technique: WeightTechnique::Lasso,
            ..WeightSpec::default()
        };
        let adaptive = train_validate_test(
            ModelKind::LeastSquares,
            PenaltyKind::AdaptiveLasso,
            &grid,
            Some(&weight_spec),
            &data,
            &tvt,
            &SolveControls::default(),
            true,
            false,
            None,
        )
        .unwrap();

        let plain_beta = plain.optimal_betas.slice(ndarray::s![1..]).to_owned();
        let adaptive_beta = adaptive.optimal_betas.slice(ndarray::s![1..]).to_owned();
        let plain_csr = correct_selection_rate(&truth.beta_true, &plain_beta);
        let adaptive_csr = correct_selection_rate(&truth.beta_true, &adaptive_beta);
        if adaptive.test_error < plain.test_error
            && adaptive_csr >= 0.9
            && adaptive_csr >= plain_csr
        {
            adaptive_wins += 1;
        }
    }
    assert!(adaptive_wins >= 8, "adaptive wins on {adaptive_wins}/10 seeds");
    assert!(start.elapsed() < Duration::from_secs(300), "{:?}", start.elapsed());
    pass("6", start);
}

fn penreg_bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_penreg"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

#[test]
fn criterion_7_cli_runs_are_byte_deterministic() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out = penreg_bin(
        dir.path(),
        &[
            "generate", "grouped", "--n-obs", "50", "--group-size", "2", "--num-groups", "4",
            "--non-zero-groups", "2", "--non-zero-coef", "2", "--noise", "0.5", "--seed", "52",
            "--out", "g",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let fit_args = [
        "fit", "--data", "g.csv", "--groups", "g.groups.csv", "--model", "lm",
        "--penalization", "asgl", "--lambda1", "0.01,0.1", "--alpha", "0.3,0.7",
        "--weight-technique", "unpenalized", "--lasso-power-weight", "1,1.2",
        "--gl-power-weight", "1", "--seed", "53", "--out", "fit.json",
    ];
    assert!(penreg_bin(dir.path(), &fit_args).status.success());
    let fit_first = fs::read(dir.path().join("fit.json")).unwrap();
    assert!(penreg_bin(dir.path(), &fit_args).status.success());
    assert_eq!(fit_first, fs::read(dir.path().join("fit.json")).unwrap());

    let cv_args = [
        "cv", "--data", "g.csv", "--groups", "g.groups.csv", "--model", "lm",
        "--penalization", "sgl", "--lambda1", "0.01,0.1,1", "--alpha", "0.5",
        "--nfolds", "5", "--seed", "54", "--out", "cv.json",
    ];
    assert!(penreg_bin(dir.path(), &cv_args).status.success());
    let cv_first = fs::read(dir.path().join("cv.json")).unwrap();
    let matrix_first = fs::read(dir.path().join("cv.errors.csv")).unwrap();
    assert!(penreg_bin(dir.path(), &cv_args).status.success());
    assert_eq!(cv_first, fs::read(dir.path().join("cv.json")).unwrap());
    assert_eq!(matrix_first, fs::read(dir.path().join("cv.errors.csv")).unwrap());

    let mut parallel_args: Vec<&str> = cv_args.to_vec();
    parallel_args.push("--parallel");
    assert!(penreg_bin(dir.path(), &parallel_args).status.success());
    assert_eq!(cv_first, fs::read(dir.path().join("cv.json")).unwrap());
    assert_eq!(matrix_first, fs::read(dir.path().join("cv.errors.csv")).unwrap());
    pass("7", start);
}

#[test]
fn criterion_8_validation_rows_cannot_leak_into_training() {
    let start = Instant::now();
    let (data, _) = generate_grouped(&GroupedConfig {
        n_obs: 60,
        group_size: 2,
        num_groups: 3,
        non_zero_groups: 2,
        non_zero_coef: 2,
        noise: 0.5,
        seed: Some(55),
    })
    .unwrap();
    let groups = data.group_structure();
    let gs = groups.as_ref();
    let folds = kfold_indices(data.n_obs(), 5, Some(56)).unwrap();
    let held_out = &folds[0];
    let train_rows: Vec<usize> = (0..data.n_obs())
        .filter(|i| !held_out.contains(i))
        .collect();

    let weight_spec = WeightSpec {
        technique: WeightTechnique::Unpenalized,
        lasso_power_weight: vec![1.0, 1.3],
        ..WeightSpec::default()
    };
    let base = ParameterGrid::new(vec![0.01, 0.1]).with_alpha(vec![0.4]);

    let run = |x_full: &Array2<f64>, y_full: &Array1<f64>| {
        let x_train = x_full.select(Axis(0), &train_rows);
        let y_train = y_full.select(Axis(0), &train_rows);
        let grid = materialize_grid(
            &base,
            PenaltyKind::AdaptiveSparseGroupLasso,
            Some(&weight_spec),
            &x_train,
            &y_train,
            gs,
        )
        .unwrap();
        let result = solve_grid_arrays(
            ModelKind::LeastSquares,
            PenaltyKind::AdaptiveSparseGroupLasso,
            &grid,
            &x_train,
            &y_train,
            gs,
            &SolveControls::default(),
            true,
            false,
            None,
        )
        .unwrap();
        (grid, result)
    };

    let (clean_grid, clean_result) = run(data.x(), data.y());

    // Poison every held-out row after fold assignment.
    let mut x_poisoned = data.x().clone();
    let mut y_poisoned = data.y().clone();
    for &i in held_out {
        x_poisoned.row_mut(i).fill(1e100);
        y_poisoned[i] = -1e100;
    }
    let (poisoned_grid, poisoned_result) = run(&x_poisoned, &y_poisoned);

    assert_eq!(clean_grid.lasso_weights, poisoned_grid.lasso_weights);
    assert_eq!(clean_grid.gl_weights, poisoned_grid.gl_weights);
    assert_eq!(clean_result.len(), poisoned_result.len());
    for (a, b) in clean_result
        .coefficients
        .iter()
        .zip(&poisoned_result.coefficients)
    {
        assert_eq!(a.intercept.unwrap().to_bits(), b.intercept.unwrap().to_bits());
        for (ba, bb) in a.beta.iter().zip(&b.beta) {
            assert_eq!(ba.to_bits(), bb.to_bits());
        }
    }
    pass("8", start);
}
