//! In-house solvers for penalized regression: accelerated proximal gradient
//! (monotone FISTA) for least squares, ADMM with the closed-form check-loss
//! prox for quantile regression.

use ndarray::{Array1, Array2, Axis};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{largest_symmetric_eigenvalue, to_nalgebra, CholeskyFactor};
use crate::loss::{check_loss_unchecked, ModelKind};
use crate::penalty::{GroupStructure, PenaltyLevels, PenaltySpec};

/// Iteration limits and tolerances for a single model fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveControls {
    pub max_iters: usize,
    /// Relative objective-change threshold for declaring convergence.
    pub objective_tol: f64,
    /// Magnitude below which a reported coefficient counts as zero.
    pub coef_tol: f64,
}

impl Default for SolveControls {
    fn default() -> Self {
        SolveControls {
            max_iters: 500,
            objective_tol: 1e-8,
            coef_tol: 1e-5,
        }
    }
}

impl SolveControls {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        if !(self.objective_tol.is_finite() && self.objective_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "objective_tol must be finite and positive, got {}",
                self.objective_tol
            )));
        }
        if !(self.coef_tol.is_finite() && self.coef_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "coef_tol must be finite and positive, got {}",
                self.coef_tol
            )));
        }
        Ok(())
    }
}

/// One fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    /// Present iff the model was fitted with an intercept.
    pub intercept: Option<f64>,
    pub beta: Array1<f64>,
    /// Penalized objective (risk plus penalty) at the reported coefficients.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Opaque solver state carried between warm-started fits on the same data.
#[derive(Debug, Clone)]
pub enum WarmState {
    Ls {
        theta: Array1<f64>,
    },
    Admm {
        theta: Array1<f64>,
        r: Array1<f64>,
        z: Array1<f64>,
        u_r: Array1<f64>,
        u_z: Array1<f64>,
        rho: f64,
    },
}

pub(crate) struct SolveOutput {
    pub coefs: Coefficients,
    pub state: WarmState,
    /// Objective value recorded at every iteration (least-squares path only);
    /// consumed by the descent-monotonicity tests.
    #[cfg_attr(not(test), allow(dead_code))]
    pub trace: Vec<f64>,
}

/// One (x, y, model, intercept) instance with precomputed quantities, shared
/// read-only by every penalty configuration solved on it.
pub(crate) struct Problem {
    model: ModelKind,
    /// Design matrix with the intercept ones column first when present.
    a: Array2<f64>,
    y: Array1<f64>,
    intercept: bool,
    p: usize,
    ls: Option<LsCache>,
    admm: Option<AdmmCache>,
}

struct LsCache {
    gram: Array2<f64>,
    aty: Array1<f64>,
    yty: f64,
    /// Gradient Lipschitz constant of (1/n)|y - A theta|^2, with headroom.
    lipschitz: f64,
}

struct AdmmCache {
    /// A transposed, stored contiguous for fast products.
    at: Array2<f64>,
    /// Cholesky of AᵀA + diag(penalized mask); independent of rho.
    chol: CholeskyFactor,
    y_norm: f64,
}

impl Problem {
    pub fn new(
        model: ModelKind,
        x: &Array2<f64>,
        y: &Array1<f64>,
        intercept: bool,
    ) -> Result<Self> {
        model.validate()?;
        let n = x.nrows();
        let p = x.ncols();
        if n == 0 {
            return Err(Error::InvalidParameter("no observations".into()));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "y has {} entries but x has {n} rows",
                y.len()
            )));
        }
        if p == 0 && !intercept {
            return Err(Error::InvalidParameter(
                "nothing to fit: no predictors and no intercept".into(),
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("predictor matrix".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response vector".into()));
        }
        let d = p + usize::from(intercept);
        let mut a = Array2::zeros((n, d));
        if intercept {
            a.column_mut(0).fill(1.0);
        }
        if p > 0 {
            let off = usize::from(intercept);
            a.slice_mut(ndarray::s![.., off..]).assign(x);
        }
        let mut problem = Problem {
            model,
            a,
            y: y.clone(),
            intercept,
            p,
            ls: None,
            admm: None,
        };
        match model {
            ModelKind::LeastSquares => {
                let gram = problem.a.t().dot(&problem.a);
                let aty = problem.a.t().dot(&problem.y);
                let yty = problem.y.dot(&problem.y);
                let lipschitz = largest_symmetric_eigenvalue(&gram) * 2.0 / n as f64 * 1.01;
                problem.ls = Some(LsCache {
                    gram,
                    aty,
                    yty,
                    lipschitz,
                });
            }
            ModelKind::Quantile { .. } => {
                let mut m = problem.a.t().dot(&problem.a);
                let off = usize::from(intercept);
                for j in 0..p {
                    m[[off + j, off + j]] += 1.0;
                }
                let chol = CholeskyFactor::new(to_nalgebra(&m))?;
                let at = problem.a.t().to_owned();
                problem.admm = Some(AdmmCache {
                    at,
                    chol,
                    y_norm: problem.y.dot(&problem.y).sqrt(),
                });
            }
        }
        Ok(problem)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    fn offset(&self) -> usize {
        usize::from(self.intercept)
    }

    fn dim(&self) -> usize {
        self.p + self.offset()
    }

    /// Risk plus penalty at a full coefficient vector (intercept first).
    fn objective_at(&self, theta: &Array1<f64>, levels: &PenaltyLevels) -> f64 {
        let residual = &self.y - &self.a.dot(theta);
        let n = self.n() as f64;
        let risk = match self.model {
            ModelKind::LeastSquares => residual.dot(&residual) / n,
            ModelKind::Quantile { tau } => {
                residual.iter().map(|&u| check_loss_unchecked(u, tau)).sum::<f64>() / n
            }
        };
        risk + levels.value_slice(&theta.as_slice().expect("contiguous")[self.offset()..])
    }
}

/// Solve the penalized problem, optionally warm-started. Dispatches on the
/// model kind fixed in `prob`.
pub(crate) fn solve_penalized(
    prob: &Problem,
    levels: &PenaltyLevels,
    controls: &SolveControls,
    warm: Option<&WarmState>,
) -> SolveOutput {
    match prob.model {
        ModelKind::LeastSquares => solve_least_squares(prob, levels, controls, warm),
        ModelKind::Quantile { tau } => solve_quantile(prob, levels, controls, tau, warm),
    }
}

fn report(prob: &Problem, theta: &Array1<f64>, levels: &PenaltyLevels) -> (Option<f64>, Array1<f64>, f64) {
    let off = prob.offset();
    let intercept = if prob.intercept { Some(theta[0]) } else { None };
    let beta = theta.slice(ndarray::s![off..]).to_owned();
    let objective = prob.objective_at(theta, levels);
    (intercept, beta, objective)
}

fn solve_least_squares(
    prob: &Problem,
    levels: &PenaltyLevels,
    controls: &SolveControls,
    warm: Option<&WarmState>,
) -> SolveOutput {
    let cache = prob.ls.as_ref().expect("least-squares cache");
    let d = prob.dim();
    let off = prob.offset();
    let n = prob.n() as f64;
    let kkt_stop = controls.objective_tol.min(1e-6);

    let mut x = match warm {
        Some(WarmState::Ls { theta }) if theta.len() == d => theta.clone(),
        _ => Array1::zeros(d),
    };

    // f(theta) via the Gram identity; O(d^2) instead of O(n d).
    let objective = |v: &Array1<f64>| -> f64 {
        let gv = cache.gram.dot(v);
        let f = (cache.yty - 2.0 * v.dot(&cache.aty) + v.dot(&gv)) / n;
        f + levels.value_slice(&v.as_slice().expect("contiguous")[off..])
    };
    let gradient = |v: &Array1<f64>| -> Array1<f64> {
        (cache.gram.dot(v) - &cache.aty) * (2.0 / n)
    };
    let prox_step = |v: &Array1<f64>, g: &Array1<f64>, t: f64| -> Array1<f64> {
        let w = v - &(g * t);
        let mut out = w.clone();
        levels.prox_into(
            &w.as_slice().expect("contiguous")[off..],
            t,
            &mut out.as_slice_mut().expect("contiguous")[off..],
        );
        out
    };
    let kkt_gap = |v: &Array1<f64>| -> f64 {
        let g = gradient(v);
        let gs = g.as_slice().expect("contiguous");
        let vs = v.as_slice().expect("contiguous");
        let neg: Vec<f64> = gs[off..].iter().map(|x| -x).collect();
        let mut gap = levels.subgradient_gap(&vs[off..], &neg);
        if prob.intercept {
            gap = gap.max(gs[0].abs());
        }
        gap
    };

    if cache.lipschitz <= 0.0 {
        // Degenerate all-zero design: the smooth part is constant, so the
        // penalty minimizer 0 is optimal.
        let theta = Array1::zeros(d);
        let (intercept, beta, obj) = report(prob, &theta, levels);
        return SolveOutput {
            coefs: Coefficients {
                intercept,
                beta,
                objective: obj,
                iterations: 0,
                converged: true,
            },
            state: WarmState::Ls { theta },
            trace: vec![obj],
        };
    }

    let mut t = 1.0 / cache.lipschitz;
    let mut v = x.clone();
    let mut momentum = 1.0f64;
    let mut f_x = objective(&x);
    let mut trace = Vec::with_capacity(controls.max_iters + 1);
    trace.push(f_x);
    let mut iterations = 0;
    let mut plateau = 0;
    let mut converged = false;

    for k in 0..controls.max_iters {
        iterations = k + 1;
        let cand = prox_step(&v, &gradient(&v), t);
        let f_cand = objective(&cand);
        let (x_new, f_new) = if f_cand.is_finite() && f_cand <= f_x {
            (cand, f_cand)
        } else {
            // Restart momentum and take a plain descent step from x; back
            // off the step if the Lipschitz headroom ever proves too small.
            momentum = 1.0;
            let mut t_try = t;
            loop {
                let c = prox_step(&x, &gradient(&x), t_try);
                let f = objective(&c);
                if (f.is_finite() && f <= f_x) || t_try < 1e-30 {
                    t = t_try;
                    break (c, f.min(f_x));
                }
                t_try *= 0.5;
            }
        };
        let momentum_new = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
        let step_dir = &x_new - &x;
        v = &x_new + &(step_dir * ((momentum - 1.0) / momentum_new));
        momentum = momentum_new;

        let change = f_x - f_new;
        x = x_new;
        f_x = f_new;
        trace.push(f_x);

        if change.abs() <= controls.objective_tol * f_x.abs().max(1.0) {
            plateau += 1;
        } else {
            plateau = 0;
        }
        if plateau >= 3 {
            converged = true;
            break;
        }
        if (k + 1) % 10 == 0 && kkt_gap(&x) <= kkt_stop {
            converged = true;
            break;
        }
    }
    if !converged {
        converged = kkt_gap(&x) <= 1e-6;
    }

    let (intercept, beta, obj) = report(prob, &x, levels);
    SolveOutput {
        coefs: Coefficients {
            intercept,
            beta,
            objective: obj,
            iterations,
            converged,
        },
        state: WarmState::Ls { theta: x },
        trace,
    }
}

/// Closed-form prox of t times the check loss at u.
pub(crate) fn prox_check_loss(u: f64, t: f64, tau: f64) -> f64 {
    if u > t * tau {
        u - t * tau
    } else if u < -t * (1.0 - tau) {
        u + t * (1.0 - tau)
    } else {
        0.0
    }
}

const ADMM_EPS_ABS: f64 = 1e-9;
const ADMM_EPS_REL: f64 = 5e-8;
const ADMM_RHO_MIN: f64 = 1e-4;
const ADMM_RHO_MAX: f64 = 1e4;

fn solve_quantile(
    prob: &Problem,
    levels: &PenaltyLevels,
    controls: &SolveControls,
    tau: f64,
    warm: Option<&WarmState>,
) -> SolveOutput {
    let cache = prob.admm.as_ref().expect("quantile cache");
    let n = prob.n();
    let nf = n as f64;
    let p = prob.p();
    let d = prob.dim();
    let off = prob.offset();

    // Consensus splitting: A theta + r = y couples the fit residual, and
    // S theta - z = 0 mirrors the penalized coordinates, so both nonsmooth
    // terms reduce to their closed-form proxes.
    let (mut theta, mut r, mut z, mut u_r, mut u_z, mut rho) = match warm {
        Some(WarmState::Admm {
            theta,
            r,
            z,
            u_r,
            u_z,
            rho,
        }) if theta.len() == d => (
            theta.clone(),
            r.clone(),
            z.clone(),
            u_r.clone(),
            u_z.clone(),
            rho.clamp(ADMM_RHO_MIN, ADMM_RHO_MAX),
        ),
        _ => {
            let theta = Array1::zeros(d);
            let r = prob.y.clone();
            (theta, r, Array1::zeros(p), Array1::zeros(n), Array1::zeros(p), 1.0)
        }
    };

    let mut iterations = 0;
    let mut converged = false;
    let mut best_obj = f64::INFINITY;
    let mut best_theta = report_theta(&theta, &z, off, d);
    let mut a_theta;
    let debug = std::env::var_os("ADMM_DEBUG").is_some();

    for k in 0..controls.max_iters {
        iterations = k + 1;
        let r_old = r.clone();
        let z_old = z.clone();

        // theta-update: (AᵀA + SᵀS) theta = Aᵀ(y - r - u_r) + Sᵀ(z - u_z);
        // rho cancels, so the cached factorization serves every iteration.
        let rhs_a = cache.at.dot(&(&prob.y - &r - &u_r));
        let mut rhs = nalgebra::DVector::from_iterator(d, rhs_a.iter().copied());
        for j in 0..p {
            rhs[off + j] += z[j] - u_z[j];
        }
        cache.chol.solve_in_place(&mut rhs);
        for j in 0..d {
            theta[j] = rhs[j];
        }
        a_theta = prob.a.dot(&theta);

        // r-update: per-observation check-loss prox.
        let t = 1.0 / (nf * rho);
        for i in 0..n {
            r[i] = prox_check_loss(prob.y[i] - a_theta[i] - u_r[i], t, tau);
        }

        // z-update: penalty prox at step 1/rho.
        if p > 0 {
            let ts = theta.as_slice().expect("contiguous");
            let w: Vec<f64> = (0..p).map(|j| ts[off + j] + u_z[j]).collect();
            levels.prox_into(&w, 1.0 / rho, z.as_slice_mut().expect("contiguous"));
        }

        // Scaled dual updates on both constraint blocks.
        let mut pri_sq = 0.0;
        for i in 0..n {
            let res = a_theta[i] + r[i] - prob.y[i];
            u_r[i] += res;
            pri_sq += res * res;
        }
        for j in 0..p {
            let res = theta[off + j] - z[j];
            u_z[j] += res;
            pri_sq += res * res;
        }
        let pri_norm = pri_sq.sqrt();

        // Dual residual rho (Aᵀ dr - Sᵀ dz) from the second-block change.
        let dr = &r - &r_old;
        let mut dual_vec = cache.at.dot(&dr);
        for j in 0..p {
            dual_vec[off + j] -= z[j] - z_old[j];
        }
        let dual_norm = rho * dual_vec.dot(&dual_vec).sqrt();

        // Track the best (z, intercept) iterate by true objective.
        let theta_rep = report_theta(&theta, &z, off, d);
        let obj = prob.objective_at(&theta_rep, levels);
        if obj < best_obj {
            best_obj = obj;
            best_theta = theta_rep;
        }

        let axz = {
            let mut s = a_theta.dot(&a_theta);
            for j in 0..p {
                s += theta[off + j] * theta[off + j];
            }
            s.sqrt()
        };
        let bz = {
            let s = r.dot(&r) + z.dot(&z);
            s.sqrt()
        };
        let eps_pri = ((n + p) as f64).sqrt() * ADMM_EPS_ABS
            + ADMM_EPS_REL * axz.max(bz).max(cache.y_norm);
        let at_dual = {
            let mut v = cache.at.dot(&u_r);
            for j in 0..p {
                v[off + j] += u_z[j];
            }
            rho * v.dot(&v).sqrt()
        };
        let eps_dual = (d as f64).sqrt() * ADMM_EPS_ABS + ADMM_EPS_REL * at_dual;
        if pri_norm <= eps_pri && dual_norm <= eps_dual {
            converged = true;
            break;
        }

        if debug && (k % 50 == 0 || k < 10) {
            eprintln!(
                "k={k} rho={rho:.3e} pri={pri_norm:.3e} dual={dual_norm:.3e} eps_pri={eps_pri:.3e} eps_dual={eps_dual:.3e} obj={obj:.12}"
            );
        }
        // Residual balancing keeps the two convergence rates comparable.
        // Spacing the adaptations out and freezing rho after a burn-in are
        // both needed: adapting every step can lock the solver into a limit
        // cycle, and convergence is only guaranteed once rho stays fixed.
        if (k + 1) % 25 == 0 && k < 1000 {
            if pri_norm > 10.0 * dual_norm && rho < ADMM_RHO_MAX {
                rho *= 2.0;
                u_r.mapv_inplace(|v| v / 2.0);
                u_z.mapv_inplace(|v| v / 2.0);
            } else if dual_norm > 10.0 * pri_norm && rho > ADMM_RHO_MIN {
                rho /= 2.0;
                u_r.mapv_inplace(|v| v * 2.0);
                u_z.mapv_inplace(|v| v * 2.0);
            }
        }
    }

    let (intercept, beta, obj) = report(prob, &best_theta, levels);
    SolveOutput {
        coefs: Coefficients {
            intercept,
            beta,
            objective: obj,
            iterations,
            converged,
        },
        state: WarmState::Admm {
            theta,
            r,
            z,
            u_r,
            u_z,
            rho,
        },
        trace: Vec::new(),
    }
}

/// Full coefficient vector from theta's intercept and the sparse z copy.
fn report_theta(theta: &Array1<f64>, z: &Array1<f64>, off: usize, d: usize) -> Array1<f64> {
    let mut out = Array1::zeros(d);
    if off == 1 {
        out[0] = theta[0];
    }
    for j in 0..z.len() {
        out[off + j] = z[j];
    }
    out
}

/// Fit one penalized model on a dataset. Group structure, when the penalty
/// needs one, comes from the dataset's group labels.
pub fn fit_single(
    model: ModelKind,
    spec: &PenaltySpec,
    data: &Dataset,
    controls: &SolveControls,
    intercept: bool,
) -> Result<Coefficients> {
    let groups = data.group_structure();
    fit_arrays(
        model,
        spec,
        data.x(),
        data.y(),
        groups.as_ref(),
        controls,
        intercept,
    )
}

/// Fit one penalized model on raw arrays. Unlike [`fit_single`] this accepts
/// a zero-column predictor matrix for intercept-only fits.
pub fn fit_arrays(
    model: ModelKind,
    spec: &PenaltySpec,
    x: &Array2<f64>,
    y: &Array1<f64>,
    groups: Option<&GroupStructure>,
    controls: &SolveControls,
    intercept: bool,
) -> Result<Coefficients> {
    controls.validate()?;
    let levels = PenaltyLevels::from_spec(spec, x.ncols(), groups)?;
    let prob = Problem::new(model, x, y, intercept)?;
    Ok(solve_penalized(&prob, &levels, controls, None).coefs)
}

/// Predictions for one coefficient set: intercept + x_new beta.
pub fn predict_one(coefs: &Coefficients, x_new: &Array2<f64>) -> Result<Array1<f64>> {
    if x_new.ncols() != coefs.beta.len() {
        return Err(Error::DimensionMismatch(format!(
            "x_new has {} columns but the model has {} coefficients",
            x_new.ncols(),
            coefs.beta.len()
        )));
    }
    let mut out = x_new.dot(&coefs.beta);
    if let Some(b0) = coefs.intercept {
        out += b0;
    }
    Ok(out)
}

/// Predictions for a sequence of coefficient sets, in input order.
pub fn predict(coefs: &[Coefficients], x_new: &Array2<f64>) -> Result<Vec<Array1<f64>>> {
    coefs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            predict_one(c, x_new).map_err(|e| match e {
                Error::DimensionMismatch(msg) => {
                    Error::DimensionMismatch(format!("coefficient set {i}: {msg}"))
                }
                other => other,
            })
        })
        .collect()
}

/// Indices of coefficients whose magnitude exceeds `coef_tol`.
pub fn active_set(coefs: &Coefficients, coef_tol: f64) -> Vec<usize> {
    coefs
        .beta
        .iter()
        .enumerate()
        .filter(|(_, b)| b.abs() > coef_tol)
        .map(|(j, _)| j)
        .collect()
}

/// Select rows of a matrix and vector by index, in the given order.
pub(crate) fn take_rows(
    x: &Array2<f64>,
    y: &Array1<f64>,
    idx: &[usize],
) -> (Array2<f64>, Array1<f64>) {
    (x.select(Axis(0), idx), y.select(Axis(0), idx))
}
