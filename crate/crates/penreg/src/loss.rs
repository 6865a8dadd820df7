//! Model risk functions and the prediction-error metrics used by
//! cross-validation and train/validate/test selection.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Which regression risk is minimized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    /// Mean squared error risk (1/n)Σ(y_i − intercept − x_iᵀβ)².
    LeastSquares,
    /// Check-loss risk (1/n)Σρ_τ(y_i − intercept − x_iᵀβ). τ=0.5 solves
    /// median regression.
    Quantile { tau: f64 },
}

impl ModelKind {
    pub fn quantile(tau: f64) -> Result<Self> {
        let kind = ModelKind::Quantile { tau };
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<()> {
        if let ModelKind::Quantile { tau } = self {
            if !(tau.is_finite() && *tau > 0.0 && *tau < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "tau must lie strictly between 0 and 1, got {tau}"
                )));
            }
        }
        Ok(())
    }

    /// Parse the model vocabulary used by the command line: "lm" or "qr".
    pub fn from_name(name: &str, tau: f64) -> Result<Self> {
        match name {
            "lm" => Ok(ModelKind::LeastSquares),
            "qr" => ModelKind::quantile(tau),
            other => Err(Error::InvalidParameter(format!(
                "unknown model {other:?}; valid values are \"lm\", \"qr\""
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::LeastSquares => "lm",
            ModelKind::Quantile { .. } => "qr",
        }
    }
}

/// Prediction-error metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorKind {
    /// Mean squared residual.
    Mse,
    /// Mean absolute residual.
    Mae,
    /// Median absolute residual (midpoint of the two central order
    /// statistics for even n).
    Mdae,
    /// Mean check loss at quantile level tau.
    Qre { tau: f64 },
}

impl ErrorKind {
    pub fn validate(&self) -> Result<()> {
        if let ErrorKind::Qre { tau } = self {
            if !(tau.is_finite() && *tau > 0.0 && *tau < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "QRE tau must lie strictly between 0 and 1, got {tau}"
                )));
            }
        }
        Ok(())
    }

    /// Parse the metric vocabulary used by the command line. QRE takes its
    /// quantile level from `tau`.
    pub fn from_name(name: &str, tau: f64) -> Result<Self> {
        match name {
            "MSE" => Ok(ErrorKind::Mse),
            "MAE" => Ok(ErrorKind::Mae),
            "MDAE" => Ok(ErrorKind::Mdae),
            "QRE" => {
                let kind = ErrorKind::Qre { tau };
                kind.validate()?;
                Ok(kind)
            }
            other => Err(Error::InvalidParameter(format!(
                "unknown error type {other:?}; valid values are \"MSE\", \"MAE\", \"MDAE\", \"QRE\""
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ErrorKind::Mse => "MSE",
            ErrorKind::Mae => "MAE",
            ErrorKind::Mdae => "MDAE",
            ErrorKind::Qre { .. } => "QRE",
        }
    }
}

/// Check loss ρ_τ(u) = u·(τ − 1{u<0}); τ·u for u ≥ 0 and (τ−1)·u for u < 0.
pub fn check_loss(u: f64, tau: f64) -> Result<f64> {
    if !(tau.is_finite() && tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tau must lie strictly between 0 and 1, got {tau}"
        )));
    }
    Ok(check_loss_unchecked(u, tau))
}

#[inline]
pub(crate) fn check_loss_unchecked(u: f64, tau: f64) -> f64 {
    if u >= 0.0 {
        tau * u
    } else {
        (tau - 1.0) * u
    }
}

/// Risk of the model at (intercept, beta): mean squared error for
/// `LeastSquares`, mean check loss for `Quantile`.
pub fn risk(
    model: ModelKind,
    x: &Array2<f64>,
    y: &Array1<f64>,
    beta: &Array1<f64>,
    intercept: f64,
) -> Result<f64> {
    model.validate()?;
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "x has {n} rows but y has {} entries",
            y.len()
        )));
    }
    if beta.len() != x.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "x has {} columns but beta has {} entries",
            x.ncols(),
            beta.len()
        )));
    }
    if n == 0 {
        return Err(Error::DimensionMismatch("risk of an empty sample".into()));
    }
    let fitted = x.dot(beta);
    let mut total = 0.0;
    match model {
        ModelKind::LeastSquares => {
            for i in 0..n {
                let r = y[i] - intercept - fitted[i];
                total += r * r;
            }
        }
        ModelKind::Quantile { tau } => {
            for i in 0..n {
                total += check_loss_unchecked(y[i] - intercept - fitted[i], tau);
            }
        }
    }
    Ok(total / n as f64)
}

/// Single prediction error of `y_pred` against `y_true` under `kind`.
pub fn error_metric(kind: ErrorKind, y_true: &Array1<f64>, y_pred: &Array1<f64>) -> Result<f64> {
    kind.validate()?;
    let n = y_true.len();
    if y_pred.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "y_true has {n} entries but y_pred has {}",
            y_pred.len()
        )));
    }
    if n == 0 {
        return Err(Error::DimensionMismatch("error of an empty sample".into()));
    }
    let value = match kind {
        ErrorKind::Mse => {
            let mut s = 0.0;
            for i in 0..n {
                let r = y_true[i] - y_pred[i];
                s += r * r;
            }
            s / n as f64
        }
        ErrorKind::Mae => {
            let mut s = 0.0;
            for i in 0..n {
                s += (y_true[i] - y_pred[i]).abs();
            }
            s / n as f64
        }
        ErrorKind::Mdae => {
            let mut abs: Vec<f64> = (0..n).map(|i| (y_true[i] - y_pred[i]).abs()).collect();
            abs.sort_unstable_by(|a, b| a.total_cmp(b));
            if n % 2 == 1 {
                abs[n / 2]
            } else {
                0.5 * (abs[n / 2 - 1] + abs[n / 2])
            }
        }
        ErrorKind::Qre { tau } => {
            let mut s = 0.0;
            for i in 0..n {
                s += check_loss_unchecked(y_true[i] - y_pred[i], tau);
            }
            s / n as f64
        }
    };
    Ok(value)
}

/// One error value per prediction vector, in the order given.
pub fn error_calculator(
    y_true: &Array1<f64>,
    predictions: &[Array1<f64>],
    kind: ErrorKind,
) -> Result<Vec<f64>> {
    predictions
        .iter()
        .enumerate()
        .map(|(i, pred)| {
            error_metric(kind, y_true, pred).map_err(|e| match e {
                Error::DimensionMismatch(msg) => {
                    Error::DimensionMismatch(format!("prediction {i}: {msg}"))
                }
                other => other,
            })
        })
        .collect()
}
