//! End-to-end house analysis and the exposure sweep over a pool of houses.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discount::DiscountConvention;
use crate::error::{domain, Result};
use crate::exposure::{DamageCurves, ElevationCostModel, House};
use crate::hazard::GevPosterior;
use crate::objectives::{
    evaluate_policy, fema_recommendation, policy_grid, DamageProfile, EadGrid, EvalSet, FemaRecommendation,
    IgnoringAssumptions, ObjectiveSurface, PolicyOutcome,
};
use crate::robustness::{domain_measure, robustness_curve, tradeoff_export, AcceptableRanges, RobustnessResult, TradeoffRow};
use crate::rng;
use crate::sow::{lhs_sample, SowEnsemble};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub grid_step: f64,
    pub freeboard: f64,
    pub ranges: AcceptableRanges,
    pub ignoring: IgnoringAssumptions,
    pub convention: DiscountConvention,
    pub ead_t_min: f64,
    pub ead_t_max: f64,
    pub ead_nodes: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            grid_step: 0.1,
            freeboard: 1.5,
            ranges: AcceptableRanges::default(),
            ignoring: IgnoringAssumptions::default(),
            convention: DiscountConvention::FromYearZero,
            ead_t_min: 1.001,
            ead_t_max: 10_000.0,
            ead_nodes: 256,
        }
    }
}

impl AnalysisOptions {
    pub fn ead_grid(&self) -> Result<EadGrid> {
        EadGrid::new(self.ead_t_min, self.ead_t_max, self.ead_nodes)
    }
}

/// Fitted inputs and prepared evaluation sets shared by every house.
#[derive(Debug, Clone)]
pub struct Engine {
    pub bfe: f64,
    pub curves: DamageCurves,
    pub cost: ElevationCostModel,
    pub options: AnalysisOptions,
    pub ignoring: EvalSet,
    pub considering: EvalSet,
    pub grid: Vec<f64>,
}

impl Engine {
    pub fn new(
        posterior: &GevPosterior,
        ensemble: &SowEnsemble,
        curves: DamageCurves,
        cost: ElevationCostModel,
        options: AnalysisOptions,
    ) -> Result<Self> {
        cost.validate()?;
        options.ranges.validate()?;
        if !(options.grid_step > 0.0) {
            return domain("grid step must be positive");
        }
        let map = posterior.map_estimate();
        let bfe = posterior.base_flood_elevation();
        let ead_grid = options.ead_grid()?;
        let ignoring = EvalSet::ignoring(&map, bfe, &ead_grid, &options.ignoring, options.convention)?;
        let considering = EvalSet::considering(ensemble, bfe, &ead_grid, options.convention)?;
        let grid = policy_grid(&cost, options.grid_step);
        Ok(Self {
            bfe,
            curves,
            cost,
            options,
            ignoring,
            considering,
            grid,
        })
    }

    pub fn surface(&self, set: &EvalSet, house: &House) -> Result<ObjectiveSurface> {
        ObjectiveSurface::evaluate(set, &self.curves, &self.cost, house, &self.grid)
    }

    pub fn analyze(&self, house: &House) -> Result<HouseAnalysis> {
        house.validate()?;
        let ignoring = self.surface(&self.ignoring, house)?;
        let considering = self.surface(&self.considering, house)?;
        let fema = fema_recommendation(house, self.options.freeboard, &self.cost);
        let led_0 = &considering.policies[0].led;
        let fema_outcome = evaluate_policy(&self.considering, &self.curves, &self.cost, house, fema.h_evaluated, Some(led_0))?;
        let h_ign = ignoring.optimum().h;
        let h_con = considering.optimum().h;
        let at = |h: f64| considering.at(h).expect("grid point").clone();

        let robustness = robustness_curve(&considering, &self.options.ranges)?;
        let tradeoffs = tradeoff_export(&considering, &robustness)?;
        let strategies = vec![
            self.strategy(StrategyKind::DoNothing, &at(0.0), house, true)?,
            self.strategy(StrategyKind::Fema, &fema_outcome, house, fema.feasible)?,
            self.strategy(StrategyKind::OptimalIgnoring, &at(h_ign), house, true)?,
            self.strategy(StrategyKind::OptimalConsidering, &at(h_con), house, true)?,
        ];
        Ok(HouseAnalysis {
            report: HouseReport {
                house: house.clone(),
                bfe: self.bfe,
                n_sows: considering.n_sows(),
                fema,
                h_opt_ignoring: h_ign,
                h_opt_considering: h_con,
                ignoring_expected_total_at_zero: ignoring.policies[0].mean_total(),
                strategies,
                robustness,
                tradeoffs,
            },
            ignoring,
            considering,
        })
    }

    fn strategy(&self, kind: StrategyKind, p: &PolicyOutcome, house: &House, feasible: bool) -> Result<Strategy> {
        let mut ratio = p.total_ratio(house);
        ratio.sort_by(f64::total_cmp);
        let r = domain_measure(p, house.value, &self.options.ranges)?;
        Ok(Strategy {
            kind,
            h: p.h,
            feasible,
            upfront_usd: p.upfront,
            upfront_ratio: p.upfront_ratio,
            expected_damages_usd: p.mean_led(),
            expected_total_usd: p.mean_total(),
            expected_total_ratio: p.mean_total() / house.value,
            total_ratio_q05: stats::quantile_sorted(&ratio, 0.05),
            total_ratio_q95: stats::quantile_sorted(&ratio, 0.95),
            bcr: p.mean_bcr(),
            reliability: p.mean_reliability(),
            joint_robustness: r.joint,
        })
    }

    /// Damage profile over effective floor elevations spanning every pool house.
    pub fn profile(&self, lo: f64, hi: f64, step: f64) -> Result<DamageProfile> {
        DamageProfile::build(&self.considering, &self.curves, lo, hi, step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    DoNothing,
    Fema,
    OptimalIgnoring,
    OptimalConsidering,
}

/// A strategy's consequences evaluated over the uncertainty ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub h: f64,
    pub feasible: bool,
    pub upfront_usd: f64,
    pub upfront_ratio: f64,
    pub expected_damages_usd: f64,
    pub expected_total_usd: f64,
    pub expected_total_ratio: f64,
    pub total_ratio_q05: f64,
    pub total_ratio_q95: f64,
    pub bcr: Option<f64>,
    pub reliability: f64,
    pub joint_robustness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseReport {
    pub house: House,
    pub bfe: f64,
    pub n_sows: usize,
    pub fema: FemaRecommendation,
    pub h_opt_ignoring: f64,
    pub h_opt_considering: f64,
    /// Total cost at h = 0 under the point assumptions.
    pub ignoring_expected_total_at_zero: f64,
    pub strategies: Vec<Strategy>,
    pub robustness: Vec<RobustnessResult>,
    pub tradeoffs: Vec<TradeoffRow>,
}

impl HouseReport {
    pub fn strategy(&self, kind: StrategyKind) -> &Strategy {
        self.strategies.iter().find(|s| s.kind == kind).expect("all four strategies present")
    }

    pub fn write_strategies_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for s in &self.strategies {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HouseAnalysis {
    pub report: HouseReport,
    pub ignoring: ObjectiveSurface,
    pub considering: ObjectiveSurface,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolBounds {
    pub value: (f64, f64),
    pub size: (f64, f64),
    pub floor_rel_bfe: (f64, f64),
}

impl Default for PoolBounds {
    fn default() -> Self {
        Self {
            value: (10_000.0, 1_000_000.0),
            size: (100.0, 5_000.0),
            floor_rel_bfe: (-10.0, 0.0),
        }
    }
}

/// `n` houses on a Latin hypercube over the bounds.
pub fn house_pool(n: usize, seed: u64, bounds: &PoolBounds) -> Result<Vec<House>> {
    if n == 0 {
        return domain("house pool must be non-empty");
    }
    let mut r = rng::stream(seed, rng::domain::HOUSE_POOL, 0);
    let scale = |(lo, hi): (f64, f64), u: f64| lo + (hi - lo) * u;
    lhs_sample(3, n, &mut r)
        .into_iter()
        .enumerate()
        .map(|(i, u)| {
            Ok(House::new(scale(bounds.value, u[0]), scale(bounds.size, u[1]), scale(bounds.floor_rel_bfe, u[2]))?
                .with_label(format!("house_{i:04}")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub value: f64,
    pub size: f64,
    pub floor_rel_bfe: f64,
    pub h_fema: f64,
    pub fema_feasible: bool,
    pub h_opt_ignoring: f64,
    pub h_opt_considering: f64,
    pub expected_total_ratio: f64,
    pub bcr_fema: f64,
    pub fema_passes_cb: bool,
    pub bcr_opt: Option<f64>,
    pub opt_passes_cb: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub n_houses: usize,
    pub share_opt_above_fema: f64,
    pub share_zero_optimal: f64,
    pub share_fema_passes_cb: f64,
    pub share_positive_opt_passing_cb: f64,
}

impl SweepSummary {
    pub fn from_rows(rows: &[SweepRow]) -> Self {
        let n = rows.len() as f64;
        let share = |f: &dyn Fn(&SweepRow) -> bool| rows.iter().filter(|r| f(r)).count() as f64 / n;
        let positive = rows.iter().filter(|r| r.h_opt_considering > 0.0).count();
        Self {
            n_houses: rows.len(),
            share_opt_above_fema: share(&|r| r.h_opt_considering > r.h_fema + 1e-9),
            share_zero_optimal: share(&|r| r.h_opt_considering == 0.0),
            share_fema_passes_cb: share(&|r| r.fema_passes_cb),
            share_positive_opt_passing_cb: if positive == 0 {
                1.0
            } else {
                rows.iter().filter(|r| r.opt_passes_cb == Some(true)).count() as f64 / positive as f64
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

impl SweepResult {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Screens every house: point-assumption optimum exactly, ensemble optimum
/// and FEMA benefit-to-cost ratio from the tabulated damage profile.
pub fn sweep(engine: &Engine, pool: &[House], profile_step: f64) -> Result<SweepResult> {
    if pool.is_empty() {
        return domain("house pool must be non-empty");
    }
    let lo = pool.iter().map(|h| h.floor_rel_bfe).fold(f64::INFINITY, f64::min) - 0.5;
    let hi = pool.iter().map(|h| h.floor_rel_bfe).fold(f64::NEG_INFINITY, f64::max) + engine.cost.max_height() + 0.5;
    let profile = engine.profile(lo, hi, profile_step)?;
    let rows = pool
        .par_iter()
        .map(|house| sweep_row(engine, &profile, house))
        .collect::<Result<Vec<_>>>()?;
    let summary = SweepSummary::from_rows(&rows);
    Ok(SweepResult { rows, summary })
}

fn sweep_row(engine: &Engine, profile: &DamageProfile, house: &House) -> Result<SweepRow> {
    let fema = fema_recommendation(house, engine.options.freeboard, &engine.cost);
    let ign = engine.surface(&engine.ignoring, house)?;
    let led_0 = profile.expected_led(house, 0.0);
    let mut best = (0.0, led_0);
    for &h in &engine.grid[1..] {
        let total = engine.cost.cost(house, h)? + profile.expected_led(house, h);
        if total < best.1 {
            best = (h, total);
        }
    }
    let bcr_at = |h: f64| -> Result<f64> {
        crate::objectives::bcr(led_0, profile.expected_led(house, h), engine.cost.cost(house, h)?)
    };
    let bcr_fema = bcr_at(fema.h_evaluated)?;
    let bcr_opt = if best.0 > 0.0 { Some(bcr_at(best.0)?) } else { None };
    Ok(SweepRow {
        label: house.label.clone(),
        value: house.value,
        size: house.size,
        floor_rel_bfe: house.floor_rel_bfe,
        h_fema: fema.h,
        fema_feasible: fema.feasible,
        h_opt_ignoring: ign.optimum().h,
        h_opt_considering: best.0,
        expected_total_ratio: best.1 / house.value,
        bcr_fema,
        fema_passes_cb: bcr_fema >= 1.0,
        bcr_opt,
        opt_passes_cb: bcr_opt.map(|b| b >= 1.0),
    })
}
