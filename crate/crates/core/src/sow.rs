//! Latin hypercube sampling and state-of-the-world ensembles.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discount::{Ar3Kind, Ar3Model, RatePath};
use crate::error::{domain, Error, Result};
use crate::exposure::{DamageModel, LifetimeDist, DEFAULT_ERROR_HALFWIDTH};
use crate::hazard::{GevParams, GevPosterior};
use crate::rng;

/// `n` rows of `k` coordinates. Column `j` holds exactly one point in each
/// bin `[i/n, (i+1)/n)`, placed uniformly within the bin.
pub fn lhs_sample<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; k]; n];
    let mut bins: Vec<usize> = (0..n).collect();
    for j in 0..k {
        bins.shuffle(rng);
        for (row, &b) in out.iter_mut().zip(&bins) {
            let u: f64 = rng.random();
            // guard against rounding up to the next bin edge
            row[j] = ((b as f64 + u) / n as f64).min(next_down((b + 1) as f64 / n as f64));
        }
    }
    out
}

fn next_down(x: f64) -> f64 {
    f64::from_bits(x.to_bits() - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    pub damage_model: DamageModel,
    pub discount_model: Ar3Kind,
}

impl Scenario {
    pub fn most_likely() -> Self {
        Self {
            damage_model: DamageModel::Hazus,
            discount_model: Ar3Kind::BackgroundTrend,
        }
    }

    pub fn all() -> Vec<Scenario> {
        let mut v = Vec::with_capacity(6);
        for d in DamageModel::ALL {
            for k in Ar3Kind::ALL {
                v.push(Scenario {
                    damage_model: d,
                    discount_model: k,
                });
            }
        }
        v
    }

    pub fn label(&self) -> String {
        format!("{}+{}", self.damage_model, self.discount_model)
    }
}

impl Default for Scenario {
    fn default() -> Self {
        Self::most_likely()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SowMode {
    FixedScenario { scenario: Scenario },
    DeepSwitching {
        damage_weights: [f64; 2],
        discount_weights: [f64; 3],
    },
}

impl SowMode {
    pub fn fixed(scenario: Scenario) -> Self {
        SowMode::FixedScenario { scenario }
    }

    pub fn deep_uniform() -> Self {
        SowMode::DeepSwitching {
            damage_weights: [1.0; 2],
            discount_weights: [1.0; 3],
        }
    }

    fn validate(&self) -> Result<()> {
        if let SowMode::DeepSwitching {
            damage_weights,
            discount_weights,
        } = self
        {
            for w in [&damage_weights[..], &discount_weights[..]] {
                if w.iter().any(|x| !(*x >= 0.0 && x.is_finite())) || w.iter().sum::<f64>() <= 0.0 {
                    return domain("switching weights must be non-negative with a positive sum");
                }
            }
        }
        Ok(())
    }

    fn discount_kinds(&self) -> Vec<Ar3Kind> {
        match self {
            SowMode::FixedScenario { scenario } => vec![scenario.discount_model],
            SowMode::DeepSwitching { discount_weights, .. } => Ar3Kind::ALL
                .iter()
                .zip(discount_weights)
                .filter(|(_, &w)| w > 0.0)
                .map(|(k, _)| *k)
                .collect(),
        }
    }
}

impl Default for SowMode {
    fn default() -> Self {
        SowMode::deep_uniform()
    }
}

/// Index into `weights` selected by the unit coordinate `u`.
fn pick_weighted(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc && *w > 0.0 {
            return i;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateOfTheWorld {
    pub index: usize,
    pub gev: GevParams,
    pub lifetime: u32,
    pub damage_error: f64,
    pub scenario: Scenario,
    pub rate_path: RatePath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SowSpec {
    pub n: usize,
    pub seed: u64,
    pub mode: SowMode,
    pub lifetime: LifetimeDist,
    pub error_halfwidth: f64,
    /// Minimum rate-path length; paths are extended to `lifetime + 1` when longer.
    pub horizon: usize,
}

impl Default for SowSpec {
    fn default() -> Self {
        Self {
            n: 10_000,
            seed: 1,
            mode: SowMode::default(),
            lifetime: LifetimeDist::default(),
            error_halfwidth: DEFAULT_ERROR_HALFWIDTH,
            horizon: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SowEnsemble {
    pub spec: SowSpec,
    pub sows: Vec<StateOfTheWorld>,
}

// LHS columns
const COL_POSTERIOR: usize = 0;
const COL_LIFETIME: usize = 1;
const COL_ERROR: usize = 2;
const COL_DAMAGE_SWITCH: usize = 3;
const COL_DISCOUNT_SWITCH: usize = 4;
const LHS_DIMS: usize = 5;

pub fn generate_sows(posterior: &GevPosterior, models: &[Ar3Model], spec: &SowSpec) -> Result<SowEnsemble> {
    if spec.n == 0 {
        return domain("ensemble size must be positive");
    }
    if posterior.is_empty() {
        return domain("posterior is empty");
    }
    if !(0.0..1.0).contains(&spec.error_halfwidth) {
        return domain("damage error half-width must lie in [0, 1)");
    }
    spec.lifetime.validate()?;
    spec.mode.validate()?;
    for kind in spec.mode.discount_kinds() {
        if !models.iter().any(|m| m.kind == kind) {
            return Err(Error::Validation(format!("no fitted {kind} discount model supplied")));
        }
    }
    let model_for = |kind: Ar3Kind| models.iter().find(|m| m.kind == kind).expect("checked above");

    let mut lhs_rng = rng::stream(spec.seed, rng::domain::SOW_LHS, 0);
    let design = lhs_sample(LHS_DIMS, spec.n, &mut lhs_rng);
    let n_post = posterior.len();

    let sows = design
        .par_iter()
        .enumerate()
        .map(|(i, u)| {
            let row = ((u[COL_POSTERIOR] * n_post as f64) as usize).min(n_post - 1);
            let lifetime = spec.lifetime.from_unit(u[COL_LIFETIME]);
            let damage_error = spec.error_halfwidth * (2.0 * u[COL_ERROR] - 1.0);
            let scenario = match &spec.mode {
                SowMode::FixedScenario { scenario } => *scenario,
                SowMode::DeepSwitching {
                    damage_weights,
                    discount_weights,
                } => Scenario {
                    damage_model: DamageModel::ALL[pick_weighted(damage_weights, u[COL_DAMAGE_SWITCH])],
                    discount_model: Ar3Kind::ALL[pick_weighted(discount_weights, u[COL_DISCOUNT_SWITCH])],
                },
            };
            let horizon = spec.horizon.max(lifetime as usize + 1);
            let mut path_rng = rng::stream(spec.seed, rng::domain::SOW_PATH, i as u64);
            let rate_path = model_for(scenario.discount_model).simulate_path(horizon, &mut path_rng);
            StateOfTheWorld {
                index: i,
                gev: posterior.samples[row].params,
                lifetime,
                damage_error,
                scenario,
                rate_path,
            }
        })
        .collect();
    Ok(SowEnsemble {
        spec: spec.clone(),
        sows,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct SowRow {
    index: usize,
    mu: f64,
    sigma: f64,
    xi: f64,
    lifetime: u32,
    damage_error: f64,
    damage_model: DamageModel,
    discount_model: Ar3Kind,
}

impl SowEnsemble {
    pub fn len(&self) -> usize {
        self.sows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sows.is_empty()
    }

    /// Share of SOWs carrying each of the six scenarios, in `Scenario::all()` order.
    pub fn scenario_shares(&self) -> Vec<(Scenario, f64)> {
        let n = self.sows.len() as f64;
        Scenario::all()
            .into_iter()
            .map(|s| (s, self.sows.iter().filter(|w| w.scenario == s).count() as f64 / n))
            .collect()
    }

    /// Writes `sows.csv` (one row per SOW), `rate_paths.csv` (index then
    /// rates) and `manifest.json` (the spec) into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("sows.csv"))?;
        for s in &self.sows {
            w.serialize(SowRow {
                index: s.index,
                mu: s.gev.mu,
                sigma: s.gev.sigma,
                xi: s.gev.xi,
                lifetime: s.lifetime,
                damage_error: s.damage_error,
                damage_model: s.scenario.damage_model,
                discount_model: s.scenario.discount_model,
            })?;
        }
        w.flush()?;
        let mut w = csv::WriterBuilder::new()
            .flexible(true)
            .from_path(dir.join("rate_paths.csv"))?;
        for s in &self.sows {
            let mut rec = vec![s.index.to_string()];
            rec.extend(s.rate_path.rates.iter().map(|r| r.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&self.spec)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let spec: SowSpec = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        let mut rows: Vec<SowRow> = Vec::new();
        for r in csv::Reader::from_path(dir.join("sows.csv"))?.deserialize() {
            rows.push(r?);
        }
        let mut paths = Vec::with_capacity(rows.len());
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_path(dir.join("rate_paths.csv"))?;
        for rec in rdr.records() {
            let rec = rec?;
            let rates = rec
                .iter()
                .skip(1)
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Validation(format!("bad rate value: {e}")))?;
            paths.push(RatePath { rates });
        }
        if paths.len() != rows.len() {
            return Err(Error::Validation(format!(
                "{} SOW rows but {} rate paths",
                rows.len(),
                paths.len()
            )));
        }
        let sows = rows
            .into_iter()
            .zip(paths)
            .map(|(r, rate_path)| StateOfTheWorld {
                index: r.index,
                gev: GevParams {
                    mu: r.mu,
                    sigma: r.sigma,
                    xi: r.xi,
                },
                lifetime: r.lifetime,
                damage_error: r.damage_error,
                scenario: Scenario {
                    damage_model: r.damage_model,
                    discount_model: r.discount_model,
                },
                rate_path,
            })
            .collect();
        Ok(Self { spec, sows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discount::{fit_ar3, DiscountSeries};
    use crate::hazard::PosteriorSample;

    fn toy_posterior() -> GevPosterior {
        let samples = (0..500)
            .map(|i| PosteriorSample {
                params: GevParams {
                    mu: 19.0 + 0.001 * i as f64,
                    sigma: 3.5,
                    xi: 0.05,
                },
                log_posterior: -(i as f64),
            })
            .collect();
        GevPosterior::from_samples(samples).unwrap()
    }

    fn toy_models() -> Vec<Ar3Model> {
        let mut r = rng::stream(3, 0, 0);
        let mut x = vec![1.5_f64, 1.5, 1.5];
        for _ in 0..200 {
            let n = x.len();
            let z: f64 = r.sample(rand_distr::StandardNormal);
            x.push(1.5 + 0.6 * (x[n - 1] - 1.5) + 0.1 * (x[n - 2] - 1.5) + 0.05 * z);
        }
        let series = DiscountSeries::new(
            x.iter().enumerate().map(|(i, v)| (1800 + i as i32, v.exp())).collect(),
            "synthetic",
        )
        .unwrap();
        Ar3Kind::ALL.iter().map(|&k| fit_ar3(&series, k).unwrap()).collect()
    }

    #[test]
    fn lhs_single_point_in_unit_cube() {
        let mut r = rng::stream(1, 0, 0);
        let m = lhs_sample(3, 1, &mut r);
        assert_eq!(m.len(), 1);
        assert!(m[0].iter().all(|&u| (0.0..1.0).contains(&u)));
    }

    #[test]
    fn lhs_quartiles_each_hit_once() {
        let mut r = rng::stream(2, 0, 0);
        let m = lhs_sample(4, 4, &mut r);
        for j in 0..4 {
            let mut bins: Vec<usize> = m.iter().map(|row| (row[j] * 4.0) as usize).collect();
            bins.sort();
            assert_eq!(bins, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn lhs_column_means_near_half() {
        let mut r = rng::stream(3, 0, 0);
        let m = lhs_sample(5, 10_000, &mut r);
        for j in 0..5 {
            let mean = m.iter().map(|row| row[j]).sum::<f64>() / 10_000.0;
            assert!((mean - 0.5).abs() < 0.01);
        }
    }

    #[test]
    fn fixed_scenario_is_carried_by_every_sow() {
        let spec = SowSpec {
            n: 10,
            mode: SowMode::fixed(Scenario::most_likely()),
            ..SowSpec::default()
        };
        let e = generate_sows(&toy_posterior(), &toy_models(), &spec).unwrap();
        assert_eq!(e.len(), 10);
        assert!(e.sows.iter().all(|s| s.scenario == Scenario::most_likely()));
        assert!(e.sows.iter().all(|s| s.rate_path.len() > s.lifetime as usize));
    }

    #[test]
    fn zero_size_is_domain_error() {
        let spec = SowSpec {
            n: 0,
            ..SowSpec::default()
        };
        assert!(matches!(
            generate_sows(&toy_posterior(), &toy_models(), &spec),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn missing_model_is_rejected() {
        let models: Vec<Ar3Model> = toy_models().into_iter().filter(|m| m.kind != Ar3Kind::RandomWalk).collect();
        let spec = SowSpec {
            n: 10,
            ..SowSpec::default()
        };
        assert!(generate_sows(&toy_posterior(), &models, &spec).is_err());
    }

    #[test]
    fn weighted_pick_respects_zero_weights() {
        assert_eq!(pick_weighted(&[1.0, 0.0, 1.0], 0.49), 0);
        assert_eq!(pick_weighted(&[1.0, 0.0, 1.0], 0.5), 2);
        assert_eq!(pick_weighted(&[0.0, 1.0], 0.0), 1);
        assert_eq!(pick_weighted(&[1.0, 1.0], 0.999_999), 1);
    }

    #[test]
    fn deterministic_and_round_trips_through_disk() {
        let spec = SowSpec {
            n: 50,
            seed: 9,
            ..SowSpec::default()
        };
        let a = generate_sows(&toy_posterior(), &toy_models(), &spec).unwrap();
        let b = generate_sows(&toy_posterior(), &toy_models(), &spec).unwrap();
        assert_eq!(a, b);
        let dir = std::env::temp_dir().join(format!("sow-rt-{}", std::process::id()));
        a.save(&dir).unwrap();
        let c = SowEnsemble::load(&dir).unwrap();
        std::fs::remove_dir_all(&dir).ok();
        assert_eq!(a, c);
    }
}
