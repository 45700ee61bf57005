//! Stochastic discounting: AR(3) models of the log real discount rate,
//! model comparison, rate-path simulation and discount factors.
//!
//! All three structures are fitted to `x_t = ln(rate in percent)`:
//!
//! * random walk: `x_t = sum rho_i x_{t-i} + e`, with `sum rho_i = 1`;
//! * mean reverting: `x_t = eta + sum rho_i (x_{t-i} - eta) + e`;
//! * background trend: `x_t = m_t + sum rho_i (x_{t-i} - m_{t-i}) + e`,
//!   `m_t = eta + beta t`, with `t` counted in years from the first
//!   observation.
//!
//! Each is linear in its regressors after reparameterization, so the
//! conditional maximum-likelihood fit is ordinary least squares on the
//! observations after the first three.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountSeries {
    /// `(year, rate in percent per year)`.
    pub entries: Vec<(i32, f64)>,
    pub provenance: String,
}

impl DiscountSeries {
    pub fn new(entries: Vec<(i32, f64)>, provenance: impl Into<String>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Validation("empty discount series".into()));
        }
        for w in entries.windows(2) {
            if w[1].0 != w[0].0 + 1 {
                return Err(Error::Validation(format!(
                    "discount years not contiguous: {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some((y, r)) = entries.iter().find(|(_, r)| !(*r > 0.0)) {
            return Err(Error::Validation(format!(
                "discount rate must be positive for the log transform ({y}: {r})"
            )));
        }
        Ok(Self {
            entries,
            provenance: provenance.into(),
        })
    }

    /// Reads a `year,rate_percent` CSV.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut entries = Vec::new();
        for row in rdr.deserialize() {
            let (year, rate): (i32, f64) = row?;
            entries.push((year, rate));
        }
        Self::new(entries, path.display().to_string())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn first_year(&self) -> i32 {
        self.entries[0].0
    }

    fn log_rates(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, r)| r.ln()).collect()
    }
}

/// Converts annually compounded percentages to continuously compounded ones.
pub fn to_continuous_percent(rates_percent: &[f64]) -> Vec<f64> {
    rates_percent.iter().map(|r| 100.0 * (1.0 + r / 100.0).ln()).collect()
}

/// Trailing moving average; the first `window - 1` entries are dropped.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || xs.len() < window {
        return Vec::new();
    }
    xs.windows(window).map(|w| w.iter().sum::<f64>() / window as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ar3Kind {
    RandomWalk,
    MeanReverting,
    BackgroundTrend,
}

impl Ar3Kind {
    pub const ALL: [Ar3Kind; 3] = [Ar3Kind::RandomWalk, Ar3Kind::MeanReverting, Ar3Kind::BackgroundTrend];

    pub fn name(self) -> &'static str {
        match self {
            Ar3Kind::RandomWalk => "random_walk",
            Ar3Kind::MeanReverting => "mean_reverting",
            Ar3Kind::BackgroundTrend => "background_trend",
        }
    }
}

impl std::fmt::Display for Ar3Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar3StdErrors {
    pub rho: [f64; 3],
    pub eta: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ar3Model {
    pub kind: Ar3Kind,
    pub rho: [f64; 3],
    /// Mean level of the log rate (unused by the random walk).
    pub eta: f64,
    /// Trend of the log rate per year (background trend only).
    pub beta: f64,
    pub sigma2: f64,
    pub log_likelihood: f64,
    pub n_params: usize,
    pub n_obs: usize,
    pub aic: f64,
    pub bic: f64,
    pub stderrs: Ar3StdErrors,
    /// Calendar year at which the trend time index is zero.
    pub origin_year: i32,
    /// Last three observed log rates, oldest first.
    pub last_log_rates: [f64; 3],
    pub last_year: i32,
}

/// Least squares with the unscaled covariance `(X'X)^-1`.
struct Ols {
    coef: Vec<f64>,
    xtx_inv: Vec<Vec<f64>>,
    rss: f64,
}

fn invert(mut a: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                if f != 0.0 {
                    for j in 0..n {
                        a[i][j] -= f * a[col][j];
                        inv[i][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Some(inv)
}

fn ols(y: &[f64], x: &[Vec<f64>]) -> Option<Ols> {
    let p = x[0].len();
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..p {
            xty[i] += row[i] * yi;
            for j in 0..p {
                xtx[i][j] += row[i] * row[j];
            }
        }
    }
    let xtx_inv = invert(xtx)?;
    let coef: Vec<f64> = (0..p).map(|i| (0..p).map(|j| xtx_inv[i][j] * xty[j]).sum()).collect();
    let rss = x
        .iter()
        .zip(y)
        .map(|(row, &yi)| {
            let fit: f64 = row.iter().zip(&coef).map(|(a, b)| a * b).sum();
            (yi - fit).powi(2)
        })
        .sum();
    Some(Ols { coef, xtx_inv, rss })
}

/// Delta-method standard error of `g(theta)` given `cov(theta)`.
fn delta_se(grad: &[f64], cov: &[Vec<f64>]) -> f64 {
    let mut v = 0.0;
    for i in 0..grad.len() {
        for j in 0..grad.len() {
            v += grad[i] * cov[i][j] * grad[j];
        }
    }
    v.max(0.0).sqrt()
}

pub const MIN_FIT_LENGTH: usize = 30;

/// Conditional maximum-likelihood fit of one AR(3) structure.
pub fn fit_ar3(series: &DiscountSeries, kind: Ar3Kind) -> Result<Ar3Model> {
    if series.len() < MIN_FIT_LENGTH {
        return domain(format!(
            "discount series has {} years; at least {MIN_FIT_LENGTH} required",
            series.len()
        ));
    }
    let x = series.log_rates();
    let n = x.len();
    let m = n - 3;
    let fit_err = |message: String| Error::Fit {
        kind: kind.to_string(),
        message,
    };

    let (y, design): (Vec<f64>, Vec<Vec<f64>>) = (3..n)
        .map(|t| {
            let lags = [x[t - 1], x[t - 2], x[t - 3]];
            match kind {
                Ar3Kind::RandomWalk => (x[t] - lags[2], vec![lags[0] - lags[2], lags[1] - lags[2]]),
                Ar3Kind::MeanReverting => (x[t], vec![1.0, lags[0], lags[1], lags[2]]),
                Ar3Kind::BackgroundTrend => (x[t], vec![1.0, t as f64, lags[0], lags[1], lags[2]]),
            }
        })
        .unzip();
    let fit = ols(&y, &design).ok_or_else(|| fit_err("singular design matrix".into()))?;
    let sigma2 = fit.rss / m as f64;
    if !(sigma2 > 0.0) {
        return Err(fit_err("zero residual variance".into()));
    }
    let cov: Vec<Vec<f64>> = fit
        .xtx_inv
        .iter()
        .map(|row| row.iter().map(|v| v * sigma2).collect())
        .collect();
    let se = |i: usize| cov[i][i].max(0.0).sqrt();

    let (rho, eta, beta, stderrs, n_params) = match kind {
        Ar3Kind::RandomWalk => {
            let (r1, r2) = (fit.coef[0], fit.coef[1]);
            let se3 = delta_se(&[-1.0, -1.0], &cov);
            (
                [r1, r2, 1.0 - r1 - r2],
                0.0,
                0.0,
                Ar3StdErrors {
                    rho: [se(0), se(1), se3],
                    eta: None,
                    beta: None,
                },
                3,
            )
        }
        Ar3Kind::MeanReverting => {
            let c = fit.coef[0];
            let rho = [fit.coef[1], fit.coef[2], fit.coef[3]];
            let s: f64 = rho.iter().sum();
            if s >= 1.0 {
                return Err(fit_err(format!("sum of AR coefficients {s:.4} >= 1 (not mean reverting)")));
            }
            let eta = c / (1.0 - s);
            let g = c / (1.0 - s).powi(2);
            let eta_se = delta_se(&[1.0 / (1.0 - s), g, g, g], &cov);
            (
                rho,
                eta,
                0.0,
                Ar3StdErrors {
                    rho: [se(1), se(2), se(3)],
                    eta: Some(eta_se),
                    beta: None,
                },
                5,
            )
        }
        Ar3Kind::BackgroundTrend => {
            let coef = fit.coef.clone();
            let s: f64 = coef[2] + coef[3] + coef[4];
            if s >= 1.0 {
                return Err(fit_err(format!("sum of AR coefficients {s:.4} >= 1 (not mean reverting)")));
            }
            // x_t = a + b t + sum rho_i x_{t-i}, with b = beta (1 - S) and
            // a = eta (1 - S) + beta sum i rho_i
            let to_struct = |c: &[f64]| {
                let s = c[2] + c[3] + c[4];
                let beta = c[1] / (1.0 - s);
                let weighted = c[2] + 2.0 * c[3] + 3.0 * c[4];
                let eta = (c[0] - beta * weighted) / (1.0 - s);
                (eta, beta)
            };
            let (eta, beta) = to_struct(&coef);
            let mut g_eta = vec![0.0; 5];
            let mut g_beta = vec![0.0; 5];
            for i in 0..5 {
                let h = 1e-6 * coef[i].abs().max(1e-3);
                let mut up = coef.clone();
                let mut dn = coef.clone();
                up[i] += h;
                dn[i] -= h;
                let (eu, bu) = to_struct(&up);
                let (ed, bd) = to_struct(&dn);
                g_eta[i] = (eu - ed) / (2.0 * h);
                g_beta[i] = (bu - bd) / (2.0 * h);
            }
            (
                [coef[2], coef[3], coef[4]],
                eta,
                beta,
                Ar3StdErrors {
                    rho: [se(2), se(3), se(4)],
                    eta: Some(delta_se(&g_eta, &cov)),
                    beta: Some(delta_se(&g_beta, &cov)),
                },
                6,
            )
        }
    };

    let log_likelihood = -0.5 * m as f64 * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    let k = n_params as f64;
    Ok(Ar3Model {
        kind,
        rho,
        eta,
        beta,
        sigma2,
        log_likelihood,
        n_params,
        n_obs: m,
        aic: 2.0 * k - 2.0 * log_likelihood,
        bic: k * (m as f64).ln() - 2.0 * log_likelihood,
        stderrs,
        origin_year: series.first_year(),
        last_log_rates: [x[n - 3], x[n - 2], x[n - 1]],
        last_year: series.entries[n - 1].0,
    })
}

/// Simulated annual rates as fractions per year; index 0 is the first
/// year after the record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePath {
    pub rates: Vec<f64>,
}

impl RatePath {
    pub fn constant(rate: f64, horizon: usize) -> Self {
        Self {
            rates: vec![rate; horizon],
        }
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}

impl Ar3Model {
    fn mean_level(&self, t: f64) -> f64 {
        match self.kind {
            Ar3Kind::RandomWalk => 0.0,
            Ar3Kind::MeanReverting => self.eta,
            Ar3Kind::BackgroundTrend => self.eta + self.beta * t,
        }
    }

    /// Log-rate trajectory driven by the supplied standard-normal innovations.
    pub fn project_log_rates(&self, innovations: &[f64]) -> Vec<f64> {
        let sd = self.sigma2.sqrt();
        let t_last = (self.last_year - self.origin_year) as f64;
        let mut hist = self.last_log_rates;
        let mut out = Vec::with_capacity(innovations.len());
        for (k, z) in innovations.iter().enumerate() {
            let t = t_last + 1.0 + k as f64;
            let mut x = self.mean_level(t);
            for i in 0..3 {
                let lag_t = t - (i + 1) as f64;
                x += self.rho[i] * (hist[2 - i] - self.mean_level(lag_t));
            }
            x += sd * z;
            out.push(x);
            hist = [hist[1], hist[2], x];
        }
        out
    }

    /// One path of `horizon` annual rates drawn from `rng`.
    pub fn simulate_path<R: Rng + ?Sized>(&self, horizon: usize, rng: &mut R) -> RatePath {
        let z: Vec<f64> = (0..horizon).map(|_| rng.sample(StandardNormal)).collect();
        RatePath {
            rates: self.project_log_rates(&z).into_iter().map(|x| x.exp() / 100.0).collect(),
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// `n_paths` paths; path `i` uses its own stream so ensembles are
/// independent of how they are partitioned.
pub fn simulate_rates(model: &Ar3Model, horizon: usize, n_paths: usize, seed: u64) -> Result<Vec<RatePath>> {
    if horizon == 0 {
        return domain("horizon must be at least one year");
    }
    Ok((0..n_paths)
        .map(|i| {
            let mut r = rng::stream(seed, rng::domain::RATE_PATH, i as u64);
            model.simulate_path(horizon, &mut r)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscountConvention {
    /// `F_t = exp(-sum_{s=0}^{t} d_s)`: year 0 is discounted by one period.
    #[default]
    FromYearZero,
    /// `F_0 = 1`, `F_t = exp(-sum_{s=0}^{t-1} d_s)`.
    FirstYearUndiscounted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountFactors {
    pub f: Vec<f64>,
}

impl DiscountFactors {
    pub fn fixed(rate: f64, horizon: usize, convention: DiscountConvention) -> Result<Self> {
        if !(rate >= 0.0) {
            return domain(format!("fixed discount rate must be non-negative, got {rate}"));
        }
        Ok(Self::stochastic(&RatePath::constant(rate, horizon), convention))
    }

    pub fn stochastic(path: &RatePath, convention: DiscountConvention) -> Self {
        let mut cum = 0.0;
        let f = path
            .rates
            .iter()
            .map(|d| match convention {
                DiscountConvention::FromYearZero => {
                    cum += d;
                    (-cum).exp()
                }
                DiscountConvention::FirstYearUndiscounted => {
                    let v = (-cum).exp();
                    cum += d;
                    v
                }
            })
            .collect();
        Self { f }
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    /// `sum_{t=0}^{n} F_t`.
    pub fn sum_through(&self, n: usize) -> Result<f64> {
        if self.f.len() < n + 1 {
            return domain(format!(
                "need {} discount factors for lifetime {n}, have {}",
                n + 1,
                self.f.len()
            ));
        }
        Ok(self.f[..=n].iter().sum())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSelectionRow {
    pub kind: Ar3Kind,
    pub log_likelihood: f64,
    pub n_params: usize,
    pub aic: f64,
    pub bic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSelection {
    pub rows: Vec<ModelSelectionRow>,
    pub best_aic: Ar3Kind,
    pub best_bic: Ar3Kind,
    /// Pairs whose AIC differ by less than 2.
    pub equivalent: Vec<(Ar3Kind, Ar3Kind)>,
}

impl ModelSelection {
    pub fn from_models(models: &[Ar3Model]) -> Result<Self> {
        if models.is_empty() {
            return domain("model selection needs at least one model");
        }
        let rows: Vec<ModelSelectionRow> = models
            .iter()
            .map(|m| ModelSelectionRow {
                kind: m.kind,
                log_likelihood: m.log_likelihood,
                n_params: m.n_params,
                aic: m.aic,
                bic: m.bic,
            })
            .collect();
        let best = |f: fn(&ModelSelectionRow) -> f64| {
            rows.iter().min_by(|a, b| f(a).total_cmp(&f(b))).map(|r| r.kind).unwrap()
        };
        let mut equivalent = Vec::new();
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                if (rows[i].aic - rows[j].aic).abs() < 2.0 {
                    equivalent.push((rows[i].kind, rows[j].kind));
                }
            }
        }
        Ok(Self {
            best_aic: best(|r| r.aic),
            best_bic: best(|r| r.bic),
            rows,
            equivalent,
        })
    }

    pub fn row(&self, kind: Ar3Kind) -> Option<&ModelSelectionRow> {
        self.rows.iter().find(|r| r.kind == kind)
    }
}

/// Fits all three structures and compares them.
pub fn model_selection_table(series: &DiscountSeries) -> Result<(Vec<Ar3Model>, ModelSelection)> {
    let models = Ar3Kind::ALL
        .iter()
        .map(|&k| fit_ar3(series, k))
        .collect::<Result<Vec<_>>>()?;
    let table = ModelSelection::from_models(&models)?;
    Ok((models, table))
}
