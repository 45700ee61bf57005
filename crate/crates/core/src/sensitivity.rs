//! Variance-based global sensitivity analysis.
//!
//! Design rows are laid out in blocks of `n`: `A`, `B`, then `AB_1..AB_k`
//! (A with column j taken from B), then `BA_1..BA_k` (B with column j
//! taken from A), for `n(2k+2)` evaluations in total.
//!
//! Estimators, with `V` the variance of the pooled A and B outputs:
//! - first order `S_j = mean(f_B (f_ABj - f_A)) / V`
//! - total order (Jansen) `ST_j = mean((f_A - f_ABj)^2) / 2V`
//! - second order `S_jk = mean(f_BAj f_ABk - f_A f_B) / V - S_j - S_k`

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discount::{Ar3Kind, Ar3Model, DiscountConvention, DiscountFactors, RatePath};
use crate::error::{domain, Error, Result};
use crate::exposure::{DamageCurves, DamageModel, House, LifetimeDist, DEFAULT_ERROR_HALFWIDTH};
use crate::hazard::{GevParams, GevPosterior};
use crate::objectives::EadGrid;
use crate::rng;
use crate::sow::{lhs_sample, Scenario};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    #[default]
    LatinHypercube,
    PseudoRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaltelliDesign {
    pub k: usize,
    pub n: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl SaltelliDesign {
    pub fn new(k: usize, n: usize, sampler: Sampler, seed: u64) -> Result<Self> {
        if k < 2 || n < 1 {
            return domain(format!("Saltelli design needs k >= 2 and n >= 1, got k={k}, n={n}"));
        }
        let mut r = rng::stream(seed, rng::domain::SALTELLI, 0);
        let base: Vec<Vec<f64>> = match sampler {
            Sampler::LatinHypercube => lhs_sample(2 * k, n, &mut r),
            Sampler::PseudoRandom => (0..n).map(|_| (0..2 * k).map(|_| r.random()).collect()).collect(),
        };
        let (a, b) = base.into_iter().map(|row| (row[..k].to_vec(), row[k..].to_vec())).unzip();
        Ok(Self { k, n, a, b })
    }

    pub fn n_evaluations(&self) -> usize {
        self.n * (2 * self.k + 2)
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let (block, row) = (idx / self.n, idx % self.n);
        match block {
            0 => self.a[row].clone(),
            1 => self.b[row].clone(),
            blk if blk < 2 + self.k => {
                let j = blk - 2;
                let mut p = self.a[row].clone();
                p[j] = self.b[row][j];
                p
            }
            blk => {
                let j = blk - 2 - self.k;
                let mut p = self.b[row].clone();
                p[j] = self.a[row][j];
                p
            }
        }
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.n_evaluations()).map(|i| self.point(i)).collect()
    }

    /// Evaluates `f` at every design point, in design order.
    pub fn evaluate<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        (0..self.n_evaluations())
            .into_par_iter()
            .map(|i| f(&self.point(i)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexEstimate {
    /// Raw estimate, not clamped.
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub significant: bool,
}

impl IndexEstimate {
    fn point(estimate: f64) -> Self {
        Self {
            estimate,
            ci_lo: f64::NAN,
            ci_hi: f64::NAN,
            significant: false,
        }
    }

    /// Estimate clamped to `[0, 1]` for display.
    pub fn display(&self) -> f64 {
        self.estimate.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrder {
    pub j: usize,
    pub k: usize,
    pub index: IndexEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolIndices {
    pub factors: Vec<String>,
    /// Zero output variance: every index is undefined (NaN).
    pub degenerate: bool,
    pub variance: f64,
    pub first: Vec<IndexEstimate>,
    pub total: Vec<IndexEstimate>,
    pub second: Vec<SecondOrder>,
    pub bootstrap_resamples: usize,
    pub confidence: f64,
}

struct Blocks<'a> {
    n: usize,
    k: usize,
    y: &'a [f64],
}

impl Blocks<'_> {
    fn at(&self, block: usize, row: usize) -> f64 {
        self.y[block * self.n + row]
    }

    /// (first, total, second in pair order, variance) over the given base rows.
    fn estimate(&self, rows: &[usize]) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64) {
        let m = rows.len() as f64;
        let pooled: Vec<f64> = rows
            .iter()
            .map(|&r| self.at(0, r))
            .chain(rows.iter().map(|&r| self.at(1, r)))
            .collect();
        let mean = stats::mean(&pooled);
        let v = pooled.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / pooled.len() as f64;
        if !(v > 1e-24 * mean * mean) || v == 0.0 {
            let nan = vec![f64::NAN; self.k];
            return (nan.clone(), nan, vec![f64::NAN; self.k * (self.k - 1) / 2], 0.0);
        }
        let mut first = vec![0.0; self.k];
        let mut total = vec![0.0; self.k];
        for j in 0..self.k {
            let (mut s, mut t) = (0.0, 0.0);
            for &r in rows {
                let (fa, fb, fab) = (self.at(0, r), self.at(1, r), self.at(2 + j, r));
                s += fb * (fab - fa);
                t += (fa - fab) * (fa - fab);
            }
            first[j] = s / m / v;
            total[j] = 0.5 * t / m / v;
        }
        let ab: f64 = rows.iter().map(|&r| self.at(0, r) * self.at(1, r)).sum::<f64>();
        let mut second = Vec::with_capacity(self.k * (self.k - 1) / 2);
        for j in 0..self.k {
            for kk in j + 1..self.k {
                let c: f64 = rows
                    .iter()
                    .map(|&r| self.at(2 + self.k + j, r) * self.at(2 + kk, r))
                    .sum();
                second.push((c - ab) / m / v - first[j] - first[kk]);
            }
        }
        (first, total, second, v)
    }
}

fn check_outputs(design: &SaltelliDesign, outputs: &[f64]) -> Result<()> {
    if outputs.len() != design.n_evaluations() {
        return Err(Error::Validation(format!(
            "expected {} outputs, got {}",
            design.n_evaluations(),
            outputs.len()
        )));
    }
    if outputs.iter().any(|y| !y.is_finite()) {
        return domain("model outputs must be finite");
    }
    Ok(())
}

fn default_names(k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("x{j}")).collect()
}

/// Point estimates without confidence intervals.
pub fn sobol_indices(design: &SaltelliDesign, outputs: &[f64]) -> Result<SobolIndices> {
    check_outputs(design, outputs)?;
    let blocks = Blocks {
        n: design.n,
        k: design.k,
        y: outputs,
    };
    let rows: Vec<usize> = (0..design.n).collect();
    let (first, total, second, v) = blocks.estimate(&rows);
    let mut pairs = Vec::new();
    let mut it = second.into_iter();
    for j in 0..design.k {
        for k in j + 1..design.k {
            pairs.push(SecondOrder {
                j,
                k,
                index: IndexEstimate::point(it.next().expect("pair count")),
            });
        }
    }
    Ok(SobolIndices {
        factors: default_names(design.k),
        degenerate: v == 0.0,
        variance: v,
        first: first.into_iter().map(IndexEstimate::point).collect(),
        total: total.into_iter().map(IndexEstimate::point).collect(),
        second: pairs,
        bootstrap_resamples: 0,
        confidence: f64::NAN,
    })
}

/// Point estimates plus percentile bootstrap intervals from resampling
/// base rows; an index is significant when its interval excludes zero.
pub fn bootstrap_significance(
    design: &SaltelliDesign,
    outputs: &[f64],
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<SobolIndices> {
    if resamples < 100 {
        return domain(format!("need at least 100 bootstrap resamples, got {resamples}"));
    }
    if !(level > 0.0 && level < 1.0) {
        return domain("confidence level must lie in (0, 1)");
    }
    let mut out = sobol_indices(design, outputs)?;
    out.bootstrap_resamples = resamples;
    out.confidence = level;
    if out.degenerate {
        return Ok(out);
    }
    let blocks = Blocks {
        n: design.n,
        k: design.k,
        y: outputs,
    };
    let draws: Vec<Vec<f64>> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, rng::domain::BOOTSTRAP, b as u64);
            let rows: Vec<usize> = (0..design.n).map(|_| r.random_range(0..design.n)).collect();
            let (f, t, s, _) = blocks.estimate(&rows);
            f.into_iter().chain(t).chain(s).collect()
        })
        .collect();
    let alpha = 0.5 * (1.0 - level);
    let interval = |col: usize| -> (f64, f64) {
        let mut xs: Vec<f64> = draws.iter().map(|d| d[col]).filter(|x| x.is_finite()).collect();
        if xs.is_empty() {
            return (f64::NAN, f64::NAN);
        }
        xs.sort_by(f64::total_cmp);
        (stats::quantile_sorted(&xs, alpha), stats::quantile_sorted(&xs, 1.0 - alpha))
    };
    let fill = |e: &mut IndexEstimate, col: usize| {
        let (lo, hi) = interval(col);
        e.ci_lo = lo;
        e.ci_hi = hi;
        e.significant = lo > 0.0 || hi < 0.0;
    };
    let k = design.k;
    for j in 0..k {
        fill(&mut out.first[j], j);
        fill(&mut out.total[j], k + j);
    }
    for (p, pair) in out.second.iter_mut().enumerate() {
        fill(&mut pair.index, 2 * k + p);
    }
    Ok(out)
}

impl SobolIndices {
    pub fn with_names(mut self, names: &[&str]) -> Self {
        self.factors = names.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn first_of(&self, name: &str) -> Option<&IndexEstimate> {
        self.factors.iter().position(|f| f == name).map(|j| &self.first[j])
    }

    /// Factor with the largest first-order estimate.
    pub fn top_first_order(&self) -> Option<&str> {
        if self.degenerate {
            return None;
        }
        let j = (0..self.first.len()).max_by(|&a, &b| self.first[a].estimate.total_cmp(&self.first[b].estimate))?;
        Some(&self.factors[j])
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["factor_or_pair", "order", "estimate", "ci_lo", "ci_hi", "significant"])?;
        let mut row = |name: String, order: &str, e: &IndexEstimate| {
            w.write_record([
                name,
                order.to_string(),
                e.estimate.to_string(),
                e.ci_lo.to_string(),
                e.ci_hi.to_string(),
                e.significant.to_string(),
            ])
        };
        for (j, e) in self.first.iter().enumerate() {
            row(self.factors[j].clone(), "first", e)?;
        }
        for (j, e) in self.total.iter().enumerate() {
            row(self.factors[j].clone(), "total", e)?;
        }
        for p in &self.second {
            row(format!("{}:{}", self.factors[p.j], self.factors[p.k]), "second", &p.index)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Ishigami test function on `[-pi, pi]^3`, inputs given on the unit cube.
pub fn ishigami(u: &[f64], a: f64, b: f64) -> f64 {
    let x: Vec<f64> = u.iter().map(|v| std::f64::consts::PI * (2.0 * v - 1.0)).collect();
    x[0].sin() + a * x[1].sin().powi(2) + b * x[2].powi(4) * x[0].sin()
}

/// Analytic (S1, S2, S3, ST1, ST2, ST3) for the Ishigami function.
pub fn ishigami_analytic(a: f64, b: f64) -> [f64; 6] {
    let pi4 = std::f64::consts::PI.powi(4);
    let v1 = 0.5 * (1.0 + b * pi4 / 5.0).powi(2);
    let v2 = a * a / 8.0;
    let v13 = b * b * pi4 * pi4 * (1.0 / 18.0 - 1.0 / 50.0);
    let v = v1 + v2 + v13;
    [v1 / v, v2 / v, 0.0, (v1 + v13) / v, v2 / v, v13 / v]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IshigamiCheck {
    pub n: usize,
    pub estimated: [f64; 6],
    pub analytic: [f64; 6],
    pub max_abs_error: f64,
    pub indices: SobolIndices,
}

pub fn ishigami_self_test(n: usize, seed: u64, resamples: usize) -> Result<IshigamiCheck> {
    let design = SaltelliDesign::new(3, n, Sampler::LatinHypercube, seed)?;
    let y = design.evaluate(|u| ishigami(u, 7.0, 0.1));
    let idx = bootstrap_significance(&design, &y, resamples, 0.95, seed)?;
    let estimated = [
        idx.first[0].estimate,
        idx.first[1].estimate,
        idx.first[2].estimate,
        idx.total[0].estimate,
        idx.total[1].estimate,
        idx.total[2].estimate,
    ];
    let analytic = ishigami_analytic(7.0, 0.1);
    let max_abs_error = estimated
        .iter()
        .zip(&analytic)
        .map(|(e, a)| (e - a).abs())
        .fold(0.0, f64::max);
    Ok(IshigamiCheck {
        n,
        estimated,
        analytic,
        max_abs_error,
        indices: idx,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SensitivityVariant {
    /// One damage/discount model combination.
    Scenario { scenario: Scenario },
    /// Model choices enter as two extra discrete factors.
    DeepChoice,
    /// A constant rate drawn uniformly on `[lo, hi]` replaces the stochastic path.
    FixedRate { damage_model: DamageModel, lo: f64, hi: f64 },
}

impl SensitivityVariant {
    pub fn fixed_rate_default() -> Self {
        SensitivityVariant::FixedRate {
            damage_model: DamageModel::Hazus,
            lo: 0.01,
            hi: 0.10,
        }
    }

    pub fn factor_names(&self) -> Vec<&'static str> {
        let mut v = vec!["mu", "sigma", "xi", "lifetime", "discount_rate", "damage_error"];
        if matches!(self, SensitivityVariant::DeepChoice) {
            v.extend(["discount_model", "damage_model"]);
        }
        v
    }

    pub fn label(&self) -> String {
        match self {
            SensitivityVariant::Scenario { scenario } => scenario.label(),
            SensitivityVariant::DeepChoice => "deep_choice".into(),
            SensitivityVariant::FixedRate { .. } => "fixed_rate".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamageSensitivityConfig {
    pub variant: SensitivityVariant,
    pub n: usize,
    pub seed: u64,
    pub sampler: Sampler,
    pub resamples: usize,
    pub confidence: f64,
    /// Rate paths per discount model in the driver bank.
    pub path_bank: usize,
    /// Heightening at which lifetime damages are evaluated.
    pub h: f64,
    pub lifetime: LifetimeDist,
    pub error_halfwidth: f64,
    pub convention: DiscountConvention,
}

impl Default for DamageSensitivityConfig {
    fn default() -> Self {
        Self {
            variant: SensitivityVariant::Scenario {
                scenario: Scenario::most_likely(),
            },
            n: 4096,
            seed: 1,
            sampler: Sampler::LatinHypercube,
            resamples: 1000,
            confidence: 0.95,
            path_bank: 1000,
            h: 0.0,
            lifetime: LifetimeDist::default(),
            error_halfwidth: DEFAULT_ERROR_HALFWIDTH,
            convention: DiscountConvention::FromYearZero,
        }
    }
}

/// Cumulative discount-factor sums for a bank of paths ordered by mean rate.
struct PathBank {
    cum: Vec<Vec<f64>>,
}

impl PathBank {
    fn new(model: &Ar3Model, size: usize, horizon: usize, seed: u64, conv: DiscountConvention) -> Self {
        let mut paths: Vec<RatePath> = (0..size)
            .map(|i| {
                let mut r = rng::stream(seed ^ (model.kind as u64 + 1), rng::domain::RATE_PATH, i as u64);
                model.simulate_path(horizon, &mut r)
            })
            .collect();
        paths.sort_by(|a, b| stats::mean(&a.rates).total_cmp(&stats::mean(&b.rates)));
        let cum = paths
            .iter()
            .map(|p| {
                let mut acc = 0.0;
                DiscountFactors::stochastic(p, conv)
                    .f
                    .into_iter()
                    .map(|f| {
                        acc += f;
                        acc
                    })
                    .collect()
            })
            .collect();
        Self { cum }
    }

    fn factor_sum(&self, u: f64, lifetime: usize) -> f64 {
        let i = ((u * self.cum.len() as f64) as usize).min(self.cum.len() - 1);
        let c = &self.cum[i];
        c[lifetime.min(c.len() - 1)]
    }
}

fn fixed_rate_sum(rate: f64, lifetime: usize, conv: DiscountConvention) -> f64 {
    let q = (-rate).exp();
    let n = lifetime as i32 + 1;
    let geometric = if rate == 0.0 { n as f64 } else { (1.0 - q.powi(n)) / (1.0 - q) };
    match conv {
        DiscountConvention::FromYearZero => q * geometric,
        DiscountConvention::FirstYearUndiscounted => geometric,
    }
}

/// Marginal inverse CDFs of the posterior parameters.
struct Marginals {
    mu: Vec<f64>,
    sigma: Vec<f64>,
    xi: Vec<f64>,
}

impl Marginals {
    fn new(post: &GevPosterior) -> Self {
        let sorted = |f: fn(&GevParams) -> f64| {
            let mut v: Vec<f64> = post.samples.iter().map(|s| f(&s.params)).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        Self {
            mu: sorted(|p| p.mu),
            sigma: sorted(|p| p.sigma),
            xi: sorted(|p| p.xi),
        }
    }

    fn at(&self, u: &[f64]) -> GevParams {
        GevParams {
            mu: stats::quantile_sorted(&self.mu, u[0]),
            sigma: stats::quantile_sorted(&self.sigma, u[1]),
            xi: stats::quantile_sorted(&self.xi, u[2]),
        }
    }
}

/// Sobol indices of lifetime expected damages (USD) for `house` raised by
/// `config.h`, with BFE `bfe` fixing the datum.
pub fn damage_sensitivity(
    house: &House,
    posterior: &GevPosterior,
    bfe: f64,
    models: &[Ar3Model],
    curves: &DamageCurves,
    config: &DamageSensitivityConfig,
) -> Result<SobolIndices> {
    house.validate()?;
    if posterior.is_empty() {
        return domain("posterior is empty");
    }
    config.lifetime.validate()?;
    let names = config.variant.factor_names();
    let design = SaltelliDesign::new(names.len(), config.n, config.sampler, config.seed)?;
    let grid = EadGrid::default();
    let marginals = Marginals::new(posterior);
    let horizon = config.lifetime.from_unit(1.0 - 1e-9) as usize + 1;
    let kinds: Vec<Ar3Kind> = match config.variant {
        SensitivityVariant::Scenario { scenario } => vec![scenario.discount_model],
        SensitivityVariant::DeepChoice => Ar3Kind::ALL.to_vec(),
        SensitivityVariant::FixedRate { .. } => vec![],
    };
    let banks = kinds
        .iter()
        .map(|&kind| {
            let m = models
                .iter()
                .find(|m| m.kind == kind)
                .ok_or_else(|| Error::Validation(format!("no fitted {kind} discount model supplied")))?;
            Ok((kind, PathBank::new(m, config.path_bank.max(1), horizon, config.seed, config.convention)))
        })
        .collect::<Result<Vec<_>>>()?;
    let bank_for = |kind: Ar3Kind| &banks.iter().find(|(k, _)| *k == kind).expect("bank built").1;
    let floor = house.floor_rel_bfe + config.h;

    let model = |u: &[f64]| -> f64 {
        let gev = marginals.at(u);
        let lifetime = (config.lifetime.from_unit(u[3]) as usize).min(horizon - 1);
        let error = config.error_halfwidth * (2.0 * u[5] - 1.0);
        let (damage_model, factor_sum) = match config.variant {
            SensitivityVariant::Scenario { scenario } => (
                scenario.damage_model,
                bank_for(scenario.discount_model).factor_sum(u[4], lifetime),
            ),
            SensitivityVariant::DeepChoice => {
                let kind = Ar3Kind::ALL[((u[6] * 3.0) as usize).min(2)];
                let dm = DamageModel::ALL[((u[7] * 2.0) as usize).min(1)];
                (dm, bank_for(kind).factor_sum(u[4], lifetime))
            }
            SensitivityVariant::FixedRate { damage_model, lo, hi } => {
                (damage_model, fixed_rate_sum(lo + (hi - lo) * u[4], lifetime, config.convention))
            }
        };
        let curve = curves.get(damage_model);
        let mut frac = 0.0;
        for (q, w) in grid.non_exceedance.iter().zip(&grid.weights).rev() {
            let depth = gev.quantile_unchecked(*q) - bfe - floor;
            if depth < 0.0 {
                break;
            }
            frac += w * curve.damage_fraction(depth, error);
        }
        house.value * frac * factor_sum
    };
    let y = design.evaluate(model);
    Ok(bootstrap_significance(&design, &y, config.resamples, config.confidence, config.seed)?.with_names(&names))
}

/// Houses used for the exposure variant: the sample house plus shallower
/// and deeper floors and a cheaper and a dearer structure.
pub fn exposure_presets() -> Vec<House> {
    vec![
        House::sample_house(),
        House {
            floor_rel_bfe: -1.0,
            label: "shallow_floor".into(),
            ..House::sample_house()
        },
        House {
            floor_rel_bfe: -8.0,
            label: "deep_floor".into(),
            ..House::sample_house()
        },
        House {
            value: 100_000.0,
            size: 1_000.0,
            floor_rel_bfe: -4.0,
            label: "low_value".into(),
        },
        House {
            value: 800_000.0,
            size: 3_500.0,
            floor_rel_bfe: -4.0,
            label: "high_value".into(),
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation_counts() {
        assert_eq!(SaltelliDesign::new(2, 1, Sampler::PseudoRandom, 1).unwrap().points().len(), 6);
        assert_eq!(SaltelliDesign::new(7, 1000, Sampler::LatinHypercube, 1).unwrap().n_evaluations(), 16_000);
        assert!(SaltelliDesign::new(1, 10, Sampler::LatinHypercube, 1).is_err());
    }

    #[test]
    fn cross_blocks_swap_one_column() {
        let d = SaltelliDesign::new(3, 4, Sampler::PseudoRandom, 2).unwrap();
        let ab1 = d.point(2 * 4 + 4 + 1); // AB_2 row 1
        assert_eq!(ab1[0], d.a[1][0]);
        assert_eq!(ab1[1], d.b[1][1]);
        assert_eq!(ab1[2], d.a[1][2]);
        let ba0 = d.point((2 + 3) * 4 + 3); // BA_1 row 3
        assert_eq!(ba0[0], d.a[3][0]);
        assert_eq!(ba0[1], d.b[3][1]);
    }

    #[test]
    fn single_factor_function() {
        let d = SaltelliDesign::new(3, 4096, Sampler::LatinHypercube, 3).unwrap();
        let y = d.evaluate(|u| u[0]);
        let s = bootstrap_significance(&d, &y, 200, 0.95, 3).unwrap();
        assert!((s.first[0].estimate - 1.0).abs() < 0.05);
        assert!(s.first[1].estimate.abs() < 0.02 && s.first[2].estimate.abs() < 0.02);
        assert!(s.second.iter().all(|p| p.index.estimate.abs() < 0.05));
        assert!(s.first[0].significant);
        assert!(!s.first[1].significant);
    }

    #[test]
    fn additive_function_has_no_interactions() {
        let d = SaltelliDesign::new(4, 4096, Sampler::LatinHypercube, 4).unwrap();
        let y = d.evaluate(|u| u.iter().sum());
        let s = bootstrap_significance(&d, &y, 300, 0.95, 4).unwrap();
        for p in &s.second {
            assert!(p.index.estimate.abs() < 0.05, "{:?}", p);
        }
        for j in 0..4 {
            assert!((s.first[j].estimate - 0.25).abs() < 0.05);
        }
    }

    #[test]
    fn constant_output_is_degenerate() {
        let d = SaltelliDesign::new(2, 64, Sampler::LatinHypercube, 5).unwrap();
        let y = vec![3.0; d.n_evaluations()];
        let s = bootstrap_significance(&d, &y, 100, 0.95, 5).unwrap();
        assert!(s.degenerate);
        assert!(s.first.iter().all(|e| e.estimate.is_nan() && !e.significant));
        assert!(s.top_first_order().is_none());
    }

    #[test]
    fn output_length_is_checked() {
        let d = SaltelliDesign::new(2, 4, Sampler::LatinHypercube, 5).unwrap();
        assert!(sobol_indices(&d, &[1.0; 5]).is_err());
    }

    #[test]
    fn analytic_ishigami_values() {
        let a = ishigami_analytic(7.0, 0.1);
        assert!((a[0] - 0.3139).abs() < 1e-4);
        assert!((a[1] - 0.4424).abs() < 1e-4);
        assert!((a[3] - 0.5576).abs() < 1e-4);
    }

    #[test]
    fn fixed_rate_sum_matches_factors() {
        for conv in [DiscountConvention::FromYearZero, DiscountConvention::FirstYearUndiscounted] {
            let f = DiscountFactors::fixed(0.05, 61, conv).unwrap();
            assert!((fixed_rate_sum(0.05, 60, conv) - f.sum_through(60).unwrap()).abs() < 1e-10);
        }
    }
}
