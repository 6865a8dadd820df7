//! Adaptive-weight calculation: pilot coefficient estimates from several
//! dimension-reduction or penalized techniques, inverted and powered into
//! per-predictor and per-group weight vectors.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::linalg::{centered_svd, largest_symmetric_eigenvalue, thin_qr};
use crate::loss::ModelKind;
use crate::penalty::{soft_threshold, GroupStructure, PenaltySpec};
use crate::solver::{fit_arrays, SolveControls};

/// Pilot-estimate technique behind the adaptive weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightTechnique {
    /// Unpenalized fit on all predictors; needs n > p.
    Unpenalized,
    /// Principal components explaining `variability_pct`, back-projected.
    PcaPct,
    /// First principal-component loading as the pilot vector.
    Pca1,
    /// Partial-least-squares analog of `PcaPct`.
    PlsPct,
    /// First PLS X-loading as the pilot vector.
    Pls1,
    /// Sparse principal components explaining `variability_pct`.
    Spca,
    /// Lasso fit at `lambda1_weights`.
    Lasso,
}

impl WeightTechnique {
    pub const ALL_NAMES: [&'static str; 7] = [
        "unpenalized",
        "pca_pct",
        "pca_1",
        "pls_pct",
        "pls_1",
        "spca",
        "lasso",
    ];

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "unpenalized" => WeightTechnique::Unpenalized,
            "pca_pct" => WeightTechnique::PcaPct,
            "pca_1" => WeightTechnique::Pca1,
            "pls_pct" => WeightTechnique::PlsPct,
            "pls_1" => WeightTechnique::Pls1,
            "spca" => WeightTechnique::Spca,
            "lasso" => WeightTechnique::Lasso,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown weight technique {other:?}; valid values are {}",
                    Self::ALL_NAMES.join(", ")
                )))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            WeightTechnique::Unpenalized => "unpenalized",
            WeightTechnique::PcaPct => "pca_pct",
            WeightTechnique::Pca1 => "pca_1",
            WeightTechnique::PlsPct => "pls_pct",
            WeightTechnique::Pls1 => "pls_1",
            WeightTechnique::Spca => "spca",
            WeightTechnique::Lasso => "lasso",
        }
    }
}

/// Full recipe for computing adaptive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    pub technique: WeightTechnique,
    pub model: ModelKind,
    /// Power values for the per-predictor weights (gamma 1).
    pub lasso_power_weight: Vec<f64>,
    /// Power values for the per-group weights (gamma 2).
    pub gl_power_weight: Vec<f64>,
    pub variability_pct: f64,
    /// Lambda for the lasso pilot.
    pub lambda1_weights: f64,
    pub spca_alpha: f64,
    pub spca_ridge_alpha: f64,
    /// Pilot magnitudes below this are clamped to it before inversion.
    pub weight_tol: f64,
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec {
            technique: WeightTechnique::PcaPct,
            model: ModelKind::LeastSquares,
            lasso_power_weight: vec![1.0],
            gl_power_weight: vec![1.0],
            variability_pct: 0.9,
            lambda1_weights: 0.1,
            spca_alpha: 1e-5,
            spca_ridge_alpha: 1e-2,
            weight_tol: 1e-4,
        }
    }
}

impl WeightSpec {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.lasso_power_weight.is_empty() || self.gl_power_weight.is_empty() {
            return Err(Error::InvalidParameter(
                "power weight sequences must be non-empty".into(),
            ));
        }
        for g in self.lasso_power_weight.iter().chain(&self.gl_power_weight) {
            if !(g.is_finite() && *g >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "power weights must be finite and nonnegative, got {g}"
                )));
            }
        }
        if !(self.variability_pct > 0.0 && self.variability_pct <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "variability_pct must lie in (0, 1], got {}",
                self.variability_pct
            )));
        }
        for (name, v) in [
            ("lambda1_weights", self.lambda1_weights),
            ("spca_alpha", self.spca_alpha),
            ("spca_ridge_alpha", self.spca_ridge_alpha),
            ("weight_tol", self.weight_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Computed weight vectors: one per-predictor vector per gamma-1 value and
/// one per-group vector per gamma-2 value.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub lasso_weights: Vec<Array1<f64>>,
    pub gl_weights: Vec<Array1<f64>>,
}

fn pilot_controls() -> SolveControls {
    SolveControls {
        max_iters: 5000,
        objective_tol: 1e-12,
        coef_tol: 1e-5,
    }
}

/// Unpenalized fit of y on `design`, returning its slope coefficients.
/// Pilot fits always carry an intercept so a response offset cannot bleed
/// into the weights.
fn pilot_fit(model: ModelKind, design: &Array2<f64>, y: &Array1<f64>) -> Result<Array1<f64>> {
    let fit = fit_arrays(
        model,
        &PenaltySpec::none(),
        design,
        y,
        None,
        &pilot_controls(),
        true,
    )?;
    Ok(fit.beta)
}

/// Smallest leading count of squared singular values reaching `pct` of the
/// total variance.
fn components_for_pct(svals: &Array1<f64>, pct: f64) -> usize {
    let total: f64 = svals.iter().map(|s| s * s).sum();
    let mut acc = 0.0;
    for (k, s) in svals.iter().enumerate() {
        acc += s * s;
        if acc >= pct * total - 1e-12 * total {
            return k + 1;
        }
    }
    svals.len()
}

/// Pilot coefficient estimate of length p for the configured technique.
pub fn pilot_estimate(spec: &WeightSpec, x: &Array2<f64>, y: &Array1<f64>) -> Result<Array1<f64>> {
    spec.validate()?;
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "y has {} entries but x has {n} rows",
            y.len()
        )));
    }
    match spec.technique {
        WeightTechnique::Unpenalized => {
            if n <= p {
                return Err(Error::InvalidParameter(format!(
                    "unpenalized weights need more observations than predictors (n={n}, p={p})"
                )));
            }
            pilot_fit(spec.model, x, y)
        }
        WeightTechnique::PcaPct => {
            let (svals, loadings) = centered_svd(x)?;
            let d = components_for_pct(&svals, spec.variability_pct);
            let q_d = loadings.slice(ndarray::s![.., ..d]).to_owned();
            let scores = x.dot(&q_d);
            let beta_scores = pilot_fit(spec.model, &scores, y)?;
            Ok(q_d.dot(&beta_scores))
        }
        WeightTechnique::Pca1 => {
            let (_, loadings) = centered_svd(x)?;
            Ok(loadings.column(0).to_owned())
        }
        WeightTechnique::PlsPct => {
            let pls = pls_components(x, y, spec.variability_pct)?;
            let beta_scores = pilot_fit(spec.model, &pls.scores, y)?;
            Ok(pls.x_loadings.dot(&beta_scores))
        }
        WeightTechnique::Pls1 => {
            let pls = pls_components(x, y, 0.0)?;
            Ok(pls.x_loadings.column(0).to_owned())
        }
        WeightTechnique::Spca => {
            let b_d = sparse_pca_loadings(x, spec)?;
            let scores = x.dot(&b_d);
            let beta_scores = pilot_fit(spec.model, &scores, y)?;
            Ok(b_d.dot(&beta_scores))
        }
        WeightTechnique::Lasso => {
            let penalty = PenaltySpec::new(crate::penalty::PenaltyKind::Lasso, spec.lambda1_weights);
            let fit = fit_arrays(spec.model, &penalty, x, y, None, &pilot_controls(), true)?;
            Ok(fit.beta)
        }
    }
}

struct PlsFit {
    scores: Array2<f64>,
    x_loadings: Array2<f64>,
}

/// Univariate NIPALS with X deflation. Components accumulate until the
/// explained X-variance reaches `pct` of the total or deflation stalls;
/// `pct <= 0` yields exactly one component.
fn pls_components(x: &Array2<f64>, y: &Array1<f64>, pct: f64) -> Result<PlsFit> {
    let (n, p) = (x.nrows(), x.ncols());
    let x_means = x.mean_axis(Axis(0)).expect("nonempty");
    let mut xd = x.clone();
    for mut row in xd.rows_mut() {
        row -= &x_means;
    }
    let y_mean = y.sum() / n as f64;
    let yc = y.mapv(|v| v - y_mean);
    let total_var: f64 = xd.iter().map(|v| v * v).sum();
    if total_var <= 0.0 {
        return Err(Error::Numeric(
            "all predictor columns are constant; no PLS components exist".into(),
        ));
    }
    let cov0 = xd.t().dot(&yc);
    let cov_scale = cov0.dot(&cov0).sqrt().max(1.0);
    let max_components = n.min(p);
    let mut scores: Vec<Array1<f64>> = Vec::new();
    let mut loadings: Vec<Array1<f64>> = Vec::new();
    let mut explained = 0.0;
    for _ in 0..max_components {
        let mut w = xd.t().dot(&yc);
        let wn = w.dot(&w).sqrt();
        if wn <= 1e-12 * cov_scale {
            break;
        }
        w /= wn;
        let t = xd.dot(&w);
        let tt = t.dot(&t);
        if tt <= 1e-12 * total_var {
            break;
        }
        let p_vec = xd.t().dot(&t) / tt;
        // Pythagorean split: the rank-1 update removes exactly tt*|p|^2 of
        // the residual variance because the residual stays orthogonal to t.
        let gain = tt * p_vec.dot(&p_vec);
        for i in 0..n {
            for j in 0..p {
                xd[[i, j]] -= t[i] * p_vec[j];
            }
        }
        scores.push(t);
        loadings.push(p_vec);
        let before = explained;
        explained += gain;
        if explained >= pct * total_var || (explained - before) < 1e-12 * total_var {
            break;
        }
    }
    if scores.is_empty() {
        return Err(Error::Numeric(
            "PLS found no usable component (X and y are uncorrelated)".into(),
        ));
    }
    let d = scores.len();
    let mut score_mat = Array2::zeros((n, d));
    let mut loading_mat = Array2::zeros((p, d));
    for (k, (t, pv)) in scores.iter().zip(&loadings).enumerate() {
        score_mat.column_mut(k).assign(t);
        loading_mat.column_mut(k).assign(pv);
    }
    Ok(PlsFit {
        scores: score_mat,
        x_loadings: loading_mat,
    })
}

/// Elastic-net coefficients for one regression target; plain FISTA with the
/// ridge term folded into the smooth part.
fn elastic_net(
    gram: &Array2<f64>,
    xty: &Array1<f64>,
    l1: f64,
    ridge: f64,
    lip: f64,
) -> Array1<f64> {
    let p = xty.len();
    let step = 1.0 / (lip + ridge);
    let mut b = Array1::zeros(p);
    let mut v: Array1<f64> = b.clone();
    let mut momentum = 1.0f64;
    for _ in 0..500 {
        let grad = gram.dot(&v) + &(&v * ridge) - xty;
        let mut b_new = &v - &(grad * step);
        b_new.mapv_inplace(|w| soft_threshold(w, step * l1));
        let momentum_new = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
        let diff = &b_new - &b;
        let change = diff.dot(&diff).sqrt();
        v = &b_new + &(diff * ((momentum - 1.0) / momentum_new));
        momentum = momentum_new;
        b = b_new;
        if change <= 1e-10 {
            break;
        }
    }
    b
}

/// Sparse PCA loadings by alternating minimization: orthonormalized scores,
/// then one elastic-net regression per component of score on centered X.
/// Components are added until the adjusted explained variance (squared
/// diagonal of the score QR factor) reaches `variability_pct`.
fn sparse_pca_loadings(x: &Array2<f64>, spec: &WeightSpec) -> Result<Array2<f64>> {
    let p = x.ncols();
    let x_means = x.mean_axis(Axis(0)).expect("nonempty");
    let mut xc = x.clone();
    for mut row in xc.rows_mut() {
        row -= &x_means;
    }
    let total_var: f64 = xc.iter().map(|v| v * v).sum();
    let (svals, init_loadings) = centered_svd(x)?;
    let r = svals.len();
    let gram = xc.t().dot(&xc);
    let lip = largest_symmetric_eigenvalue(&gram);
    let mut d = components_for_pct(&svals, spec.variability_pct).min(r);
    let mut prev_adjusted = -1.0;
    let b_final = loop {
        let mut b = init_loadings.slice(ndarray::s![.., ..d]).to_owned();
        for _ in 0..50 {
            let t = xc.dot(&b);
            let (q, _) = thin_qr(&t);
            let mut b_new = Array2::zeros((p, d));
            let mut max_change = 0.0f64;
            for k in 0..d {
                let s_k = q.column(k).to_owned();
                let xty = xc.t().dot(&s_k);
                let col = elastic_net(&gram, &xty, spec.spca_alpha, spec.spca_ridge_alpha, lip);
                for j in 0..p {
                    max_change = max_change.max((col[j] - b[[j, k]]).abs());
                }
                b_new.column_mut(k).assign(&col);
            }
            b = b_new;
            if max_change <= 1e-8 || b.iter().all(|v| *v == 0.0) {
                break;
            }
        }
        // Unit-normalize each usable loading; drop all-zero ones.
        let mut kept: Vec<Array1<f64>> = Vec::new();
        for k in 0..d {
            let col = b.column(k).to_owned();
            let norm = col.dot(&col).sqrt();
            if norm > 1e-12 {
                kept.push(col / norm);
            }
        }
        if kept.is_empty() {
            return Err(Error::Numeric(
                "sparse PCA shrank every loading to zero; lower spca_alpha".into(),
            ));
        }
        let mut b_kept = Array2::zeros((p, kept.len()));
        for (k, col) in kept.iter().enumerate() {
            b_kept.column_mut(k).assign(col);
        }
        // Adjusted variance through QR handles non-orthogonal components.
        let t = xc.dot(&b_kept);
        let (_, rr) = thin_qr(&t);
        let adjusted: f64 = (0..b_kept.ncols()).map(|k| rr[[k, k]] * rr[[k, k]]).sum();
        let reached = adjusted >= spec.variability_pct * total_var - 1e-12 * total_var;
        let stalled = adjusted - prev_adjusted < 1e-12 * total_var;
        prev_adjusted = adjusted;
        if reached || stalled || d >= r {
            break b_kept;
        }
        d += 1;
    };
    Ok(b_final)
}

/// Invert a pilot estimate into weight vectors, one per power value. Pilot
/// magnitudes below `weight_tol` are clamped to it first, so the largest
/// possible weight is `weight_tol^-gamma`.
pub fn weights_from_estimate(
    beta_hat: &Array1<f64>,
    groups: Option<&GroupStructure>,
    gamma1_values: &[f64],
    gamma2_values: &[f64],
    weight_tol: f64,
) -> Result<WeightSet> {
    if !(weight_tol.is_finite() && weight_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "weight_tol must be finite and positive, got {weight_tol}"
        )));
    }
    if let Some(gs) = groups {
        if gs.num_predictors() != beta_hat.len() {
            return Err(Error::DimensionMismatch(format!(
                "group structure covers {} predictors but the pilot has {}",
                gs.num_predictors(),
                beta_hat.len()
            )));
        }
    }
    let lasso_weights = gamma1_values
        .iter()
        .map(|&g1| beta_hat.mapv(|b| b.abs().max(weight_tol).powf(-g1)))
        .collect();
    let gl_weights = match groups {
        Some(gs) => {
            let beta_slice = beta_hat.as_slice().expect("contiguous");
            let norms: Vec<f64> = (0..gs.num_groups())
                .map(|g| gs.block_norm(beta_slice, g))
                .collect();
            gamma2_values
                .iter()
                .map(|&g2| {
                    Array1::from_iter(norms.iter().map(|n| n.max(weight_tol).powf(-g2)))
                })
                .collect()
        }
        None => Vec::new(),
    };
    Ok(WeightSet {
        lasso_weights,
        gl_weights,
    })
}

/// Pilot estimate followed by weight inversion. Group weights are produced
/// only when a group structure is given.
pub fn compute_weights(
    spec: &WeightSpec,
    x: &Array2<f64>,
    y: &Array1<f64>,
    groups: Option<&GroupStructure>,
) -> Result<WeightSet> {
    let beta_hat = pilot_estimate(spec, x, y)?;
    weights_from_estimate(
        &beta_hat,
        groups,
        &spec.lasso_power_weight,
        &spec.gl_power_weight,
        spec.weight_tol,
    )
}
