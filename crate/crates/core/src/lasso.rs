//! Univariate LASSO regression by coordinate descent.
//!
//! The objective is
//!
//! ```text
//! (1/2n)·Σ (y − b0 − b·z)² + λ·|b|,   z = (x − mean(x)) / sd(x)
//! ```
//!
//! with an unpenalized intercept and population standard deviation. The
//! `1/(2n)` normalization keeps λ comparable across dataset sizes. Fitted
//! models are reported on the original `x` scale.

use std::io::{Read, Write};

use thiserror::Error;

const DEFAULT_TOLERANCE: f64 = 1e-10;
const DEFAULT_MAX_ITERATIONS: usize = 10_000;
const MODEL_MAGIC: &str = "# windward-lasso v1";

#[derive(Debug, Error)]
pub enum LassoError {
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("correlation undefined: {0} has zero variance")]
    UndefinedCorrelation(&'static str),
    #[error("R² undefined: targets have zero variance")]
    UndefinedScore,
    #[error("no convergence after {iterations} iterations (slope {slope}, intercept {intercept})")]
    NonConvergence { iterations: usize, slope: f64, intercept: f64 },
    #[error("model format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Paired samples, e.g. `(northR, xSpeed)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset1D {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Dataset1D {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, LassoError> {
        if xs.len() != ys.len() {
            return Err(LassoError::InvalidData(format!("{} xs vs {} ys", xs.len(), ys.len())));
        }
        if xs.len() < 2 {
            return Err(LassoError::InvalidData("need at least two samples".into()));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(LassoError::InvalidData("non-finite value".into()));
        }
        Ok(Dataset1D { xs, ys })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    fn subset(&self, keep: impl Fn(usize) -> bool) -> (Vec<f64>, Vec<f64>) {
        (0..self.len()).filter(|&i| keep(i)).map(|i| (self.xs[i], self.ys[i])).unzip()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean and population standard deviation.
fn moments(v: &[f64]) -> (f64, f64) {
    let m = mean(v);
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, LassoError> {
    let data = Dataset1D::new(xs.to_vec(), ys.to_vec())?;
    let (mx, my) = (mean(&data.xs), mean(&data.ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in data.xs.iter().zip(&data.ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(LassoError::UndefinedCorrelation("xs"));
    }
    if syy == 0.0 {
        return Err(LassoError::UndefinedCorrelation("ys"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn soft_threshold(value: f64, threshold: f64) -> f64 {
    if value > threshold {
        value - threshold
    } else if value < -threshold {
        value + threshold
    } else {
        0.0
    }
}

/// Affine model `ŷ = intercept + slope·x` on the original scale, with the
/// standardization it was fitted under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoModel {
    pub intercept: f64,
    pub slope: f64,
    pub lambda: f64,
    pub x_mean: f64,
    pub x_std: f64,
}

impl LassoModel {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    /// Slope on the standardized scale, the coefficient the penalty acts on.
    pub fn standardized_slope(&self) -> f64 {
        self.slope * self.x_std
    }

    pub fn save<W: Write>(&self, mut sink: W) -> Result<(), LassoError> {
        writeln!(sink, "{MODEL_MAGIC}")?;
        writeln!(sink, "intercept={}", self.intercept)?;
        writeln!(sink, "slope={}", self.slope)?;
        writeln!(sink, "lambda={}", self.lambda)?;
        writeln!(sink, "x_mean={}", self.x_mean)?;
        writeln!(sink, "x_std={}", self.x_std)?;
        Ok(())
    }

    pub fn load<R: Read>(mut source: R) -> Result<Self, LassoError> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        let mut lines = text.lines();
        match lines.next() {
            Some(MODEL_MAGIC) => {}
            other => return Err(LassoError::Format(format!("bad header {other:?}"))),
        }
        let mut field = |key: &str| -> Result<f64, LassoError> {
            let line = lines.next().ok_or_else(|| LassoError::Format(format!("missing {key}")))?;
            line.strip_prefix(key)
                .and_then(|l| l.strip_prefix('='))
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| LassoError::Format(format!("bad `{key}` line {line:?}")))
        };
        Ok(LassoModel {
            intercept: field("intercept")?,
            slope: field("slope")?,
            lambda: field("lambda")?,
            x_mean: field("x_mean")?,
            x_std: field("x_std")?,
        })
    }
}

pub fn predict(model: &LassoModel, x: f64) -> f64 {
    model.predict(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    /// Stop once the slope moves less than this between sweeps.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Drop the top 1% absolute residuals and refit once.
    pub robust_trim: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions { tolerance: DEFAULT_TOLERANCE, max_iterations: DEFAULT_MAX_ITERATIONS, robust_trim: false }
    }
}

pub fn fit_lasso(data: &Dataset1D, lambda: f64) -> Result<LassoModel, LassoError> {
    fit_lasso_with(data, lambda, &LassoOptions::default())
}

pub fn fit_lasso_with(data: &Dataset1D, lambda: f64, opts: &LassoOptions) -> Result<LassoModel, LassoError> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(LassoError::InvalidData(format!("lambda must be ≥ 0, got {lambda}")));
    }
    let model = coordinate_descent(&data.xs, &data.ys, lambda, opts)?;
    if !opts.robust_trim {
        return Ok(model);
    }
    let drop = (data.len() as f64 * 0.01).ceil() as usize;
    if data.len() - drop < 2 {
        return Ok(model);
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    let residual = |i: usize| (data.ys[i] - model.predict(data.xs[i])).abs();
    order.sort_by(|&a, &b| residual(b).total_cmp(&residual(a)).then(a.cmp(&b)));
    let dropped = &order[..drop];
    let (xs, ys) = data.subset(|i| !dropped.contains(&i));
    coordinate_descent(&xs, &ys, lambda, opts)
}

fn coordinate_descent(xs: &[f64], ys: &[f64], lambda: f64, opts: &LassoOptions) -> Result<LassoModel, LassoError> {
    let n = xs.len() as f64;
    let (x_mean, x_std) = moments(xs);
    if x_std == 0.0 {
        // A constant feature carries no signal; only the intercept is fitted.
        return Ok(LassoModel { intercept: mean(ys), slope: 0.0, lambda, x_mean, x_std });
    }
    let z: Vec<f64> = xs.iter().map(|x| (x - x_mean) / x_std).collect();
    let zz = z.iter().map(|v| v * v).sum::<f64>() / n;

    let (mut b0, mut b) = (0.0, 0.0);
    for _ in 0..opts.max_iterations {
        b0 = z.iter().zip(ys).map(|(zi, yi)| yi - b * zi).sum::<f64>() / n;
        let rho = z.iter().zip(ys).map(|(zi, yi)| zi * (yi - b0)).sum::<f64>() / n;
        let next = soft_threshold(rho, lambda) / zz;
        let moved = (next - b).abs();
        b = next;
        if moved < opts.tolerance {
            b0 = z.iter().zip(ys).map(|(zi, yi)| yi - b * zi).sum::<f64>() / n;
            let slope = b / x_std;
            return Ok(LassoModel { intercept: b0 - slope * x_mean, slope, lambda, x_mean, x_std });
        }
    }
    let slope = b / x_std;
    Err(LassoError::NonConvergence { iterations: opts.max_iterations, slope, intercept: b0 - slope * x_mean })
}

/// Smallest λ at which the standardized slope is exactly zero.
pub fn lambda_max(data: &Dataset1D) -> f64 {
    let (x_mean, x_std) = moments(&data.xs);
    if x_std == 0.0 {
        return 0.0;
    }
    let y_mean = mean(&data.ys);
    let n = data.len() as f64;
    (data.xs.iter().zip(&data.ys).map(|(x, y)| (x - x_mean) / x_std * (y - y_mean)).sum::<f64>() / n).abs()
}

/// `count` values log-spaced from `lambda_max` down to `lambda_max / 1000`.
pub fn lambda_grid(data: &Dataset1D, count: usize) -> Vec<f64> {
    let top = lambda_max(data);
    if top == 0.0 || count == 0 {
        return vec![0.0];
    }
    if count == 1 {
        return vec![top];
    }
    (0..count).map(|j| top * 10f64.powf(-3.0 * j as f64 / (count - 1) as f64)).collect()
}

/// Picks λ from `grid` by k-fold cross-validation (fold = index mod k),
/// minimizing mean held-out squared error. Ties go to the larger λ.
pub fn select_lambda_cv(data: &Dataset1D, folds: usize, grid: &[f64]) -> Result<f64, LassoError> {
    if folds < 2 || folds > data.len() {
        return Err(LassoError::InvalidData(format!("cannot split {} samples into {folds} folds", data.len())));
    }
    let mut best: Option<(f64, f64)> = None;
    for &lambda in grid {
        let mut total = 0.0;
        for fold in 0..folds {
            let (train_x, train_y) = data.subset(|i| i % folds != fold);
            let model = coordinate_descent(&train_x, &train_y, lambda, &LassoOptions::default())?;
            let (test_x, test_y) = data.subset(|i| i % folds == fold);
            let sse: f64 = test_x.iter().zip(&test_y).map(|(x, y)| (y - model.predict(*x)).powi(2)).sum();
            total += sse / test_x.len() as f64;
        }
        let score = total / folds as f64;
        match best {
            Some((s, _)) if s <= score => {}
            _ => best = Some((score, lambda)),
        }
    }
    best.map(|(_, l)| l).ok_or_else(|| LassoError::InvalidData("empty lambda grid".into()))
}

/// Fits with λ chosen by 5-fold cross-validation over a 20-point grid.
pub fn fit_lasso_cv(data: &Dataset1D) -> Result<LassoModel, LassoError> {
    let folds = 5.min(data.len());
    let lambda = if folds < 2 { 0.0 } else { select_lambda_cv(data, folds, &lambda_grid(data, 20))? };
    fit_lasso(data, lambda)
}

/// Coefficient of determination `1 − SS_res/SS_tot`.
pub fn r2_score(model: &LassoModel, data: &Dataset1D) -> Result<f64, LassoError> {
    let y_mean = mean(&data.ys);
    let ss_tot: f64 = data.ys.iter().map(|y| (y - y_mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(LassoError::UndefinedScore);
    }
    let ss_res: f64 = data.xs.iter().zip(&data.ys).map(|(x, y)| (y - model.predict(*x)).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}
