//! Flood hazard: GEV annual-maximum model, Bayesian posterior sampling and
//! return-level summaries.
//!
//! The sampler is a single-chain adaptive random-walk Metropolis on
//! `(mu, ln sigma, xi)`. The proposal covariance is learned during burn-in
//! (Haario-style empirical covariance plus a Robbins-Monro global scale) and
//! frozen for the recorded draws, so the stored chain is a plain
//! Metropolis-Hastings chain.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng;
use crate::stats;

/// Below this |xi| the Gumbel limit is used.
pub const GUMBEL_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    pub mu: f64,
    pub sigma: f64,
    pub xi: f64,
}

impl GevParams {
    pub fn new(mu: f64, sigma: f64, xi: f64) -> Result<Self> {
        if !(sigma > 0.0) || !mu.is_finite() || !xi.is_finite() || !sigma.is_finite() {
            return domain(format!("invalid GEV parameters ({mu}, {sigma}, {xi})"));
        }
        Ok(Self { mu, sigma, xi })
    }

    /// `Pr(H <= h)`.
    pub fn cdf(&self, h: f64) -> f64 {
        let z = (h - self.mu) / self.sigma;
        if self.xi.abs() < GUMBEL_EPS {
            return (-(-z).exp()).exp();
        }
        let t = 1.0 + self.xi * z;
        if t <= 0.0 {
            // below the lower bound (xi > 0) or above the upper bound (xi < 0)
            return if self.xi > 0.0 { 0.0 } else { 1.0 };
        }
        (-t.powf(-1.0 / self.xi)).exp()
    }

    pub fn ln_pdf(&self, h: f64) -> f64 {
        let z = (h - self.mu) / self.sigma;
        if self.xi.abs() < GUMBEL_EPS {
            return -self.sigma.ln() - z - (-z).exp();
        }
        let t = 1.0 + self.xi * z;
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let lt = t.ln();
        -self.sigma.ln() - (1.0 + 1.0 / self.xi) * lt - (-lt / self.xi).exp()
    }

    pub fn pdf(&self, h: f64) -> f64 {
        self.ln_pdf(h).exp()
    }

    /// Level `h` with `cdf(h) = q`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return domain(format!("quantile probability must be in (0,1), got {q}"));
        }
        Ok(self.quantile_unchecked(q))
    }

    pub(crate) fn quantile_unchecked(&self, q: f64) -> f64 {
        let y = -q.ln();
        if self.xi.abs() < GUMBEL_EPS {
            self.mu - self.sigma * y.ln()
        } else {
            self.mu + self.sigma / self.xi * (y.powf(-self.xi) - 1.0)
        }
    }

    /// T-year return level, the quantile at `1 - 1/T`.
    pub fn return_level(&self, return_period: f64) -> Result<f64> {
        if !(return_period > 1.0) {
            return domain(format!("return period must exceed 1, got {return_period}"));
        }
        self.quantile(1.0 - 1.0 / return_period)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // open interval keeps the quantile finite
        let u: f64 = rng.random_range(f64::EPSILON..1.0);
        self.quantile_unchecked(u)
    }
}

/// Zero-mean Gaussian priors on `mu`, `sigma`, `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub mu_sd: f64,
    pub sigma_sd: f64,
    pub xi_sd: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            mu_sd: 31.62,
            sigma_sd: 10.0,
            xi_sd: 1.0,
        }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.mu_sd > 0.0 && self.sigma_sd > 0.0 && self.xi_sd > 0.0 {
            Ok(())
        } else {
            domain("prior standard deviations must be positive")
        }
    }

    fn ln_prior(&self, p: &GevParams) -> f64 {
        fn ln_normal(x: f64, sd: f64) -> f64 {
            -0.5 * (x / sd).powi(2) - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
        }
        ln_normal(p.mu, self.mu_sd) + ln_normal(p.sigma, self.sigma_sd) + ln_normal(p.xi, self.xi_sd)
    }
}

/// Unnormalized log posterior; `-inf` for infeasible parameters.
pub fn log_posterior(p: &GevParams, data: &[f64], priors: &PriorSpec) -> f64 {
    if !(p.sigma > 0.0) {
        return f64::NEG_INFINITY;
    }
    let mut ll = 0.0;
    for &h in data {
        let v = p.ln_pdf(h);
        if v == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        ll += v;
    }
    ll + priors.ln_prior(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSample {
    pub params: GevParams,
    pub log_posterior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMetadata {
    pub seed: u64,
    pub burn_in: usize,
    pub n_samples: usize,
    pub n_observations: usize,
    /// Acceptance rate over the recorded (post-burn-in) draws.
    pub acceptance_rate: f64,
    /// Geweke z-scores for (mu, sigma, xi).
    pub geweke_z: [f64; 3],
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GevPosterior {
    pub samples: Vec<PosteriorSample>,
    pub meta: ChainMetadata,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub n_samples: usize,
    pub burn_in: usize,
    pub init: GevParams,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_samples: 50_000,
            burn_in: 10_000,
            init: GevParams {
                mu: 5.0,
                sigma: 1.0,
                xi: 0.1,
            },
            seed: 1,
        }
    }
}

const TARGET_ACCEPT: f64 = 0.234;
const ADAPT_START: usize = 500;

fn to_theta(p: &GevParams) -> [f64; 3] {
    [p.mu, p.sigma.ln(), p.xi]
}

fn from_theta(t: &[f64; 3]) -> GevParams {
    GevParams {
        mu: t[0],
        sigma: t[1].exp(),
        xi: t[2],
    }
}

/// Lower-triangular Cholesky factor of a 3x3 SPD matrix.
fn cholesky3(a: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Running mean/covariance (Welford) of the transformed chain.
struct RunningCov {
    n: f64,
    mean: [f64; 3],
    m2: [[f64; 3]; 3],
}

impl RunningCov {
    fn new() -> Self {
        Self {
            n: 0.0,
            mean: [0.0; 3],
            m2: [[0.0; 3]; 3],
        }
    }

    fn push(&mut self, x: &[f64; 3]) {
        self.n += 1.0;
        let delta: [f64; 3] = std::array::from_fn(|i| x[i] - self.mean[i]);
        for i in 0..3 {
            self.mean[i] += delta[i] / self.n;
        }
        for i in 0..3 {
            for j in 0..3 {
                self.m2[i][j] += delta[i] * (x[j] - self.mean[j]);
            }
        }
    }

    fn cov(&self) -> [[f64; 3]; 3] {
        let d = (self.n - 1.0).max(1.0);
        std::array::from_fn(|i| std::array::from_fn(|j| self.m2[i][j] / d))
    }
}

/// Geweke z-score: first 10% vs last 50%, batch-means variances.
pub fn geweke_z(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 100 {
        return f64::NAN;
    }
    let a = &xs[..n / 10];
    let b = &xs[n / 2..];
    fn batch_var_of_mean(v: &[f64]) -> f64 {
        let batches = 20usize;
        let size = v.len() / batches;
        let means: Vec<f64> = (0..batches).map(|k| stats::mean(&v[k * size..(k + 1) * size])).collect();
        stats::variance(&means) / batches as f64
    }
    let denom = (batch_var_of_mean(a) + batch_var_of_mean(b)).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    (stats::mean(a) - stats::mean(b)) / denom
}

/// Draws `config.n_samples` post-burn-in states of the GEV posterior.
pub fn mcmc_sample(data: &[f64], priors: &PriorSpec, config: &McmcConfig) -> Result<GevPosterior> {
    if data.is_empty() {
        return domain("no annual maxima supplied");
    }
    priors.validate()?;
    if config.n_samples == 0 {
        return domain("n_samples must be positive");
    }
    let mut warnings = Vec::new();
    if data.len() < 20 {
        warnings.push(format!("only {} annual maxima (< 20)", data.len()));
    }

    let mut rng = rng::stream(config.seed, rng::domain::MCMC, 0);
    // target on (mu, ln sigma, xi) includes the Jacobian sigma
    let target = |theta: &[f64; 3]| {
        let p = from_theta(theta);
        let lp = log_posterior(&p, data, priors);
        (lp, lp + theta[1])
    };

    let mut theta = to_theta(&config.init);
    let (mut lp, mut lt) = target(&theta);
    if !lt.is_finite() {
        return Err(Error::Diagnostic(format!(
            "initial state {:?} has zero posterior density",
            config.init
        )));
    }

    let mut chol = [[0.1, 0.0, 0.0], [0.0, 0.05, 0.0], [0.0, 0.0, 0.02]];
    let mut log_scale = 0.0f64;
    let mut running = RunningCov::new();
    let mut samples = Vec::with_capacity(config.n_samples);
    let mut accepted_after = 0usize;
    let total = config.burn_in + config.n_samples;

    for iter in 0..total {
        let z: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let s = log_scale.exp();
        let mut prop = theta;
        for i in 0..3 {
            let mut step = 0.0;
            for k in 0..=i {
                step += chol[i][k] * z[k];
            }
            prop[i] += s * step;
        }
        let (plp, plt) = target(&prop);
        let log_alpha = plt - lt;
        let u: f64 = rng.random();
        let accept = plt.is_finite() && u.ln() < log_alpha;
        if accept {
            theta = prop;
            lp = plp;
            lt = plt;
        }

        if iter < config.burn_in {
            let alpha = if log_alpha.is_nan() { 0.0 } else { log_alpha.min(0.0).exp() };
            let gain = 1.0 / ((iter + 1) as f64).powf(0.6);
            log_scale += gain * (alpha - TARGET_ACCEPT);
            // the first fifth of burn-in is the transient from the initial state
            let adapt_from = config.burn_in / 5;
            if iter >= adapt_from {
                running.push(&theta);
            }
            let since = iter.saturating_sub(adapt_from);
            if iter >= adapt_from && since >= ADAPT_START && since % 100 == 0 {
                let mut c = running.cov();
                let f = 2.38 * 2.38 / 3.0;
                for (i, row) in c.iter_mut().enumerate() {
                    for v in row.iter_mut() {
                        *v *= f;
                    }
                    row[i] += 1e-8;
                }
                if let Some(l) = cholesky3(&c) {
                    chol = l;
                    if since == ADAPT_START {
                        // the empirical covariance already carries the 2.38^2/d scale
                        log_scale = 0.0;
                    }
                }
            }
        } else {
            if accept {
                accepted_after += 1;
            }
            samples.push(PosteriorSample {
                params: from_theta(&theta),
                log_posterior: lp,
            });
        }
    }

    let acceptance_rate = accepted_after as f64 / config.n_samples as f64;
    if !(0.05..=0.9).contains(&acceptance_rate) {
        return Err(Error::Diagnostic(format!(
            "acceptance rate {acceptance_rate:.3} outside [0.05, 0.9] after adaptation"
        )));
    }
    let geweke = [
        geweke_z(&samples.iter().map(|s| s.params.mu).collect::<Vec<_>>()),
        geweke_z(&samples.iter().map(|s| s.params.sigma).collect::<Vec<_>>()),
        geweke_z(&samples.iter().map(|s| s.params.xi).collect::<Vec<_>>()),
    ];
    for (name, z) in ["mu", "sigma", "xi"].iter().zip(geweke) {
        if z.abs() > 3.0 {
            warnings.push(format!("Geweke |z| = {:.2} for {name}", z.abs()));
        }
    }
    Ok(GevPosterior {
        samples,
        meta: ChainMetadata {
            seed: config.seed,
            burn_in: config.burn_in,
            n_samples: config.n_samples,
            n_observations: data.len(),
            acceptance_rate,
            geweke_z: geweke,
            warnings,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnLevelSummary {
    pub return_period: f64,
    pub map_level: f64,
    pub mean_level: f64,
    pub q05: f64,
    pub q95: f64,
}

impl GevPosterior {
    /// Posterior built from explicit samples, e.g. a degenerate ensemble.
    pub fn from_samples(samples: Vec<PosteriorSample>) -> Result<Self> {
        if samples.is_empty() {
            return domain("posterior must contain at least one sample");
        }
        if let Some(s) = samples.iter().find(|s| !(s.params.sigma > 0.0)) {
            return domain(format!("posterior sample with sigma {} <= 0", s.params.sigma));
        }
        let n = samples.len();
        Ok(Self {
            samples,
            meta: ChainMetadata {
                seed: 0,
                burn_in: 0,
                n_samples: n,
                n_observations: 0,
                acceptance_rate: f64::NAN,
                geweke_z: [f64::NAN; 3],
                warnings: Vec::new(),
            },
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Highest recorded log posterior; first occurrence wins ties.
    pub fn map_estimate(&self) -> GevParams {
        let mut best = &self.samples[0];
        for s in &self.samples[1..] {
            if s.log_posterior > best.log_posterior {
                best = s;
            }
        }
        best.params
    }

    pub fn return_level_summary(&self, return_period: f64) -> Result<ReturnLevelSummary> {
        if !(return_period > 1.0) {
            return domain(format!("return period must exceed 1, got {return_period}"));
        }
        let q = 1.0 - 1.0 / return_period;
        let mut levels: Vec<f64> = self.samples.iter().map(|s| s.params.quantile_unchecked(q)).collect();
        let mean_level = stats::mean(&levels);
        levels.sort_by(f64::total_cmp);
        Ok(ReturnLevelSummary {
            return_period,
            map_level: self.map_estimate().quantile_unchecked(q),
            mean_level,
            q05: stats::quantile_sorted(&levels, 0.05),
            q95: stats::quantile_sorted(&levels, 0.95),
        })
    }

    /// Base Flood Elevation: the 100-year level of the MAP parameters.
    pub fn base_flood_elevation(&self) -> f64 {
        base_flood_elevation(&self.map_estimate())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["mu", "sigma", "xi", "log_posterior"])?;
        for s in &self.samples {
            w.write_record([
                s.params.mu.to_string(),
                s.params.sigma.to_string(),
                s.params.xi.to_string(),
                s.log_posterior.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<stem>.csv` and the metadata sidecar `<stem>.json`.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        self.write_csv(csv_path)?;
        let meta = serde_json::to_string_pretty(&self.meta)?;
        std::fs::write(csv_path.with_extension("json"), meta)?;
        Ok(())
    }

    pub fn load(csv_path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(csv_path)?;
        let mut samples = Vec::new();
        for row in rdr.deserialize() {
            let (mu, sigma, xi, log_posterior): (f64, f64, f64, f64) = row?;
            samples.push(PosteriorSample {
                params: GevParams { mu, sigma, xi },
                log_posterior,
            });
        }
        let mut post = Self::from_samples(samples)?;
        let sidecar = csv_path.with_extension("json");
        if sidecar.exists() {
            post.meta = serde_json::from_str(&std::fs::read_to_string(sidecar)?)?;
        }
        Ok(post)
    }
}

pub fn base_flood_elevation(params: &GevParams) -> f64 {
    params.quantile_unchecked(0.99)
}
