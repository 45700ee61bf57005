//! Decision objectives per heightening policy: upfront cost ratio, total
//! cost, benefit-to-cost ratio and lifetime reliability.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discount::{DiscountConvention, DiscountFactors};
use crate::error::{domain, Result};
use crate::exposure::{DamageCurves, DamageModel, DepthDamageCurve, ElevationCostModel, House};
use crate::hazard::GevParams;
use crate::sow::SowEnsemble;
use crate::stats;

/// Exceedance-probability nodes and trapezoid weights for the EAD integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EadGrid {
    /// Non-exceedance probabilities `1 - 1/T`, increasing.
    pub non_exceedance: Vec<f64>,
    pub weights: Vec<f64>,
}

impl EadGrid {
    pub fn new(t_min: f64, t_max: f64, nodes: usize) -> Result<Self> {
        if !(t_min > 1.0 && t_max > t_min) || nodes < 2 {
            return domain(format!("bad EAD grid: T in [{t_min}, {t_max}] with {nodes} nodes"));
        }
        let (a, b) = (t_min.ln(), t_max.ln());
        let p: Vec<f64> = (0..nodes)
            .map(|i| 1.0 / (a + (b - a) * i as f64 / (nodes - 1) as f64).exp())
            .collect();
        let mut weights = vec![0.0; nodes];
        for j in 0..nodes - 1 {
            let half = 0.5 * (p[j] - p[j + 1]);
            weights[j] += half;
            weights[j + 1] += half;
        }
        Ok(Self {
            non_exceedance: p.iter().map(|x| 1.0 - x).collect(),
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Width of the integrated exceedance-probability interval.
    pub fn span(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn levels(&self, gev: &GevParams) -> Vec<f64> {
        self.non_exceedance.iter().map(|&q| gev.quantile_unchecked(q)).collect()
    }
}

impl Default for EadGrid {
    fn default() -> Self {
        Self::new(1.001, 10_000.0, 256).expect("valid default grid")
    }
}

fn ead_fraction(levels_rel: &[f64], weights: &[f64], curve: &DepthDamageCurve, error: f64, floor: f64) -> f64 {
    let mut acc = 0.0;
    // levels rise along the grid; everything below the floor contributes nothing
    for (l, w) in levels_rel.iter().zip(weights).rev() {
        let depth = l - floor;
        if depth < 0.0 {
            break;
        }
        acc += w * curve.damage_fraction(depth, error);
    }
    acc
}

/// Expected annual damage in USD for a house raised by `h`, with water
/// levels on the gage datum and the floor referenced to `bfe`.
pub fn ead(
    gev: &GevParams,
    bfe: f64,
    curve: &DepthDamageCurve,
    error_draw: f64,
    house: &House,
    h: f64,
    grid: &EadGrid,
) -> f64 {
    let levels: Vec<f64> = grid.levels(gev).into_iter().map(|z| z - bfe).collect();
    house.value * ead_fraction(&levels, &grid.weights, curve, error_draw, house.floor_rel_bfe + h)
}

/// `sum_{t=0}^{n} EAD * F_t`.
pub fn led(ead: f64, lifetime: u32, factors: &DiscountFactors) -> Result<f64> {
    Ok(ead * factors.sum_through(lifetime as usize)?)
}

/// Probability that the raised lowest floor stays dry for `lifetime` years.
pub fn reliability(gev: &GevParams, bfe: f64, house: &House, h: f64, lifetime: u32) -> f64 {
    gev.cdf(bfe + house.floor_rel_bfe + h).powi(lifetime as i32)
}

/// Avoided lifetime damages per dollar of elevation cost.
pub fn bcr(led_0: f64, led_h: f64, cost_h: f64) -> Result<f64> {
    if !(cost_h > 0.0) {
        return domain("benefit-to-cost ratio needs a positive elevation cost (h > 0)");
    }
    Ok((led_0 - led_h) / cost_h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyMode {
    Ignoring,
    Considering,
}

/// Point assumptions used when uncertainty is ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IgnoringAssumptions {
    pub damage_model: DamageModel,
    pub lifetime: u32,
    pub discount_rate: f64,
}

impl Default for IgnoringAssumptions {
    fn default() -> Self {
        Self {
            damage_model: DamageModel::Hazus,
            lifetime: 30,
            discount_rate: 0.04,
        }
    }
}

/// One SOW reduced to what the objectives need.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSow {
    pub gev: GevParams,
    /// Grid water levels minus BFE.
    pub levels_rel: Vec<f64>,
    pub damage_model: DamageModel,
    pub damage_error: f64,
    pub lifetime: u32,
    /// `sum_{t=0}^{lifetime} F_t`.
    pub factor_sum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    pub mode: UncertaintyMode,
    pub bfe: f64,
    pub weights: Vec<f64>,
    pub sows: Vec<EvalSow>,
}

impl EvalSet {
    pub fn ignoring(map: &GevParams, bfe: f64, grid: &EadGrid, a: &IgnoringAssumptions, conv: DiscountConvention) -> Result<Self> {
        let factors = DiscountFactors::fixed(a.discount_rate, a.lifetime as usize + 1, conv)?;
        Ok(Self {
            mode: UncertaintyMode::Ignoring,
            bfe,
            weights: grid.weights.clone(),
            sows: vec![EvalSow {
                gev: *map,
                levels_rel: grid.levels(map).into_iter().map(|z| z - bfe).collect(),
                damage_model: a.damage_model,
                damage_error: 0.0,
                lifetime: a.lifetime,
                factor_sum: factors.sum_through(a.lifetime as usize)?,
            }],
        })
    }

    pub fn considering(ensemble: &SowEnsemble, bfe: f64, grid: &EadGrid, conv: DiscountConvention) -> Result<Self> {
        if ensemble.is_empty() {
            return domain("empty SOW ensemble");
        }
        let sows = ensemble
            .sows
            .par_iter()
            .map(|s| {
                let factors = DiscountFactors::stochastic(&s.rate_path, conv);
                Ok(EvalSow {
                    gev: s.gev,
                    levels_rel: grid.levels(&s.gev).into_iter().map(|z| z - bfe).collect(),
                    damage_model: s.scenario.damage_model,
                    damage_error: s.damage_error,
                    lifetime: s.lifetime,
                    factor_sum: factors.sum_through(s.lifetime as usize)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mode: UncertaintyMode::Considering,
            bfe,
            weights: grid.weights.clone(),
            sows,
        })
    }

    pub fn len(&self) -> usize {
        self.sows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sows.is_empty()
    }

    /// Per-SOW lifetime expected damages for the house raised by `h`.
    pub fn led(&self, curves: &DamageCurves, house: &House, h: f64) -> Vec<f64> {
        let floor = house.floor_rel_bfe + h;
        self.sows
            .par_iter()
            .map(|s| {
                let frac = ead_fraction(&s.levels_rel, &self.weights, curves.get(s.damage_model), s.damage_error, floor);
                house.value * frac * s.factor_sum
            })
            .collect()
    }

    pub fn reliability(&self, house: &House, h: f64) -> Vec<f64> {
        self.sows
            .iter()
            .map(|s| reliability(&s.gev, self.bfe, house, h, s.lifetime))
            .collect()
    }
}

/// All objectives for one heightening, with per-SOW vectors in ensemble order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutcome {
    pub h: f64,
    pub upfront: f64,
    pub upfront_ratio: f64,
    pub led: Vec<f64>,
    pub reliability: Vec<f64>,
    /// Absent at h = 0.
    pub bcr: Option<Vec<f64>>,
}

impl PolicyOutcome {
    pub fn total(&self) -> Vec<f64> {
        self.led.iter().map(|l| l + self.upfront).collect()
    }

    pub fn total_ratio(&self, house: &House) -> Vec<f64> {
        self.led.iter().map(|l| (l + self.upfront) / house.value).collect()
    }

    pub fn mean_led(&self) -> f64 {
        stats::mean(&self.led)
    }

    pub fn mean_total(&self) -> f64 {
        self.upfront + self.mean_led()
    }

    pub fn mean_reliability(&self) -> f64 {
        stats::mean(&self.reliability)
    }

    pub fn mean_bcr(&self) -> Option<f64> {
        self.bcr.as_deref().map(stats::mean)
    }
}

pub fn evaluate_policy(
    set: &EvalSet,
    curves: &DamageCurves,
    cost: &ElevationCostModel,
    house: &House,
    h: f64,
    led_0: Option<&[f64]>,
) -> Result<PolicyOutcome> {
    let upfront = cost.cost(house, h)?;
    let led = set.led(curves, house, h);
    let bcr = if h > 0.0 {
        let base = match led_0 {
            Some(b) => b.to_vec(),
            None => set.led(curves, house, 0.0),
        };
        Some(
            base.iter()
                .zip(&led)
                .map(|(l0, lh)| bcr(*l0, *lh, upfront))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    Ok(PolicyOutcome {
        h,
        upfront,
        upfront_ratio: upfront / house.value,
        reliability: set.reliability(house, h),
        led,
        bcr,
    })
}

/// `{0} ∪ [min, max]` at `step` feet.
pub fn policy_grid(cost: &ElevationCostModel, step: f64) -> Vec<f64> {
    let (lo, hi) = (cost.min_height(), cost.max_height());
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut v = vec![0.0];
    // integer multiples of the step avoid accumulated drift (8.8 stays 8.8)
    v.extend((0..=n).map(|i| ((lo + i as f64 * step) * 1e6).round() / 1e6));
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSurface {
    pub mode: UncertaintyMode,
    pub house: House,
    pub policies: Vec<PolicyOutcome>,
}

impl ObjectiveSurface {
    pub fn evaluate(set: &EvalSet, curves: &DamageCurves, cost: &ElevationCostModel, house: &House, grid: &[f64]) -> Result<Self> {
        house.validate()?;
        let led_0 = set.led(curves, house, 0.0);
        let policies = grid
            .iter()
            .map(|&h| evaluate_policy(set, curves, cost, house, h, Some(&led_0)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mode: set.mode,
            house: house.clone(),
            policies,
        })
    }

    pub fn n_sows(&self) -> usize {
        self.policies.first().map_or(0, |p| p.led.len())
    }

    pub fn at(&self, h: f64) -> Option<&PolicyOutcome> {
        self.policies.iter().find(|p| (p.h - h).abs() < 1e-9)
    }

    /// Lowest expected total cost; the smallest `h` wins ties.
    pub fn optimum(&self) -> &PolicyOutcome {
        let mut best = &self.policies[0];
        for p in &self.policies[1..] {
            if p.mean_total() < best.mean_total() {
                best = p;
            }
        }
        best
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "h", "o1", "o2_mean", "o2_q05", "o2_q95", "o2_ratio_mean", "o3_mean", "o3_q05", "o3_q95", "o4_mean", "o4_q05",
            "o4_q95", "led_mean", "upfront_usd",
        ])?;
        for p in &self.policies {
            let mut total = p.total();
            total.sort_by(f64::total_cmp);
            let mut rel = p.reliability.clone();
            rel.sort_by(f64::total_cmp);
            let (b_mean, b05, b95) = match &p.bcr {
                Some(b) => {
                    let mut s = b.clone();
                    s.sort_by(f64::total_cmp);
                    (
                        stats::mean(b).to_string(),
                        stats::quantile_sorted(&s, 0.05).to_string(),
                        stats::quantile_sorted(&s, 0.95).to_string(),
                    )
                }
                None => (String::new(), String::new(), String::new()),
            };
            w.write_record([
                p.h.to_string(),
                p.upfront_ratio.to_string(),
                p.mean_total().to_string(),
                stats::quantile_sorted(&total, 0.05).to_string(),
                stats::quantile_sorted(&total, 0.95).to_string(),
                (p.mean_total() / self.house.value).to_string(),
                b_mean,
                b05,
                b95,
                p.mean_reliability().to_string(),
                stats::quantile_sorted(&rel, 0.05).to_string(),
                stats::quantile_sorted(&rel, 0.95).to_string(),
                p.mean_led().to_string(),
                p.upfront.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FemaRecommendation {
    /// Heightening that puts the floor at BFE + freeboard.
    pub h: f64,
    /// Heightening actually evaluated: `h` clamped into the feasible band.
    pub h_evaluated: f64,
    pub feasible: bool,
}

pub fn fema_recommendation(house: &House, freeboard: f64, cost: &ElevationCostModel) -> FemaRecommendation {
    let h = -house.floor_rel_bfe + freeboard;
    let feasible = h >= cost.min_height() - 1e-9 && h <= cost.max_height() + 1e-9;
    FemaRecommendation {
        h,
        h_evaluated: h.clamp(cost.min_height(), cost.max_height()),
        feasible,
    }
}

/// Expected discounted damage per dollar of house value as a function of
/// the effective floor elevation `floor_rel_bfe + h`, tabulated once per
/// ensemble so that many houses can be screened cheaply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamageProfile {
    pub floors: Vec<f64>,
    pub values: Vec<f64>,
}

impl DamageProfile {
    pub fn build(set: &EvalSet, curves: &DamageCurves, lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(hi > lo && step > 0.0) {
            return domain("profile range must be non-empty with a positive step");
        }
        let n = ((hi - lo) / step).round() as usize + 1;
        let floors: Vec<f64> = (0..n).map(|i| lo + i as f64 * step).collect();
        let inv = 1.0 / set.len() as f64;
        let values = floors
            .par_iter()
            .map(|&e| {
                let per_sow: Vec<f64> = set
                    .sows
                    .iter()
                    .map(|s| {
                        ead_fraction(&s.levels_rel, &set.weights, curves.get(s.damage_model), s.damage_error, e) * s.factor_sum
                    })
                    .collect();
                stats::pairwise_sum(&per_sow) * inv
            })
            .collect();
        Ok(Self { floors, values })
    }

    /// Expected LED in USD for `house` raised by `h`.
    pub fn expected_led(&self, house: &House, h: f64) -> f64 {
        house.value * stats::interp_clamped(&self.floors, &self.values, house.floor_rel_bfe + h)
    }
}
