//! Pipeline stages. Each reads upstream artifacts (verifying their manifest
//! hashes), writes its own outputs and records them in the manifest.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use elevate_core::analysis::{house_pool, sweep, Engine, HouseAnalysis, SweepResult};
use elevate_core::discount::{
    model_selection_table, simulate_rates, Ar3Model, DiscountFactors, DiscountSeries, ModelSelection,
};
use elevate_core::exposure::{DamageCurves, DamageModel, ElevationCostModel, House};
use elevate_core::hazard::{mcmc_sample, GevParams, GevPosterior, McmcConfig, ReturnLevelSummary};
use elevate_core::hydro::{annual_maxima, read_usgs_rdb, to_water_levels, AnnualMaxima, RatingCurve};
use elevate_core::objectives::EvalSet;
use elevate_core::robustness::{pareto_front, write_robustness_csv, write_tradeoff_csv, RobustnessResult, Sense};
use elevate_core::sensitivity::{
    damage_sensitivity, exposure_presets, ishigami_self_test, DamageSensitivityConfig, IshigamiCheck,
    SensitivityVariant, SobolIndices,
};
use elevate_core::sow::{generate_sows, Scenario, SowEnsemble, SowMode, SowSpec};
use elevate_core::stats;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, VariantSet};
use crate::manifest::Manifest;

pub const ANNUAL_MAXIMA: &str = "annual_maxima.csv";
pub const INGEST_REPORT: &str = "ingest_report.json";
pub const POSTERIOR: &str = "posterior.csv";
pub const POSTERIOR_META: &str = "posterior.json";
pub const HAZARD_SUMMARY: &str = "hazard_summary.json";
pub const DISCOUNT_MODELS: &str = "discount_models.json";
pub const MODEL_SELECTION_CSV: &str = "model_selection.csv";
pub const MODEL_SELECTION_JSON: &str = "model_selection.json";
pub const DAMAGE_CURVES: &str = "damage_curves.json";
pub const COST_MODEL: &str = "cost_model.json";
pub const SOWS: &str = "sows";
pub const HOUSE_REPORT: &str = "house_report.json";
pub const STRATEGIES: &str = "strategies.csv";
pub const SURFACE_CONSIDERING: &str = "surface_considering.csv";
pub const SURFACE_IGNORING: &str = "surface_ignoring.csv";
pub const ROBUSTNESS: &str = "robustness.csv";
pub const TRADEOFFS: &str = "tradeoffs.csv";
pub const TRADEOFFS_IGNORING: &str = "tradeoffs_ignoring.csv";
pub const PARETO_FRONT: &str = "pareto_front.csv";
pub const HOUSE_POOL: &str = "house_pool.csv";
pub const SWEEP: &str = "sweep.csv";
pub const SWEEP_SUMMARY: &str = "sweep_summary.json";
pub const SENSITIVITY_DIR: &str = "sensitivity";
pub const PLOTS_DIR: &str = "plots";

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
    manifest: Manifest,
}

impl Ctx {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        let out = cfg.output_dir.clone();
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        let manifest = Manifest::load_or_default(&out)?;
        Ok(Self { cfg, out, manifest })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn path(&self, artifact: &str) -> PathBuf {
        self.out.join(artifact)
    }

    fn need(&self, artifact: &str, producer: &str) -> Result<PathBuf> {
        self.manifest.verify(&self.out, artifact, producer)?;
        Ok(self.path(artifact))
    }

    fn finish(&mut self, stage: &str, inputs: &[(&str, &Path)], outputs: &[&str]) -> Result<()> {
        let inputs: Vec<(String, PathBuf)> = inputs.iter().map(|(n, p)| (n.to_string(), p.to_path_buf())).collect();
        let json = self.cfg.canonical_json()?;
        self.manifest.record(stage, &json, &self.out, &inputs, outputs)?;
        self.manifest.save(&self.out)
    }

    fn write_json<T: Serialize>(&self, artifact: &str, value: &T) -> Result<()> {
        let p = self.path(artifact);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&p, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", p.display()))
    }

    pub fn curves(&self) -> Result<DamageCurves> {
        DamageCurves::from_manifest(&self.cfg.data.damage_manifest)
            .with_context(|| format!("loading damage curves from {}", self.cfg.data.damage_manifest.display()))
    }

    pub fn cost(&self) -> ElevationCostModel {
        self.cfg.analysis.cost.clone()
    }

    pub fn posterior(&self) -> Result<GevPosterior> {
        let p = self.need(POSTERIOR, "fit-hazard")?;
        self.need(POSTERIOR_META, "fit-hazard")?;
        Ok(GevPosterior::load(&p)?)
    }

    pub fn models(&self) -> Result<Vec<Ar3Model>> {
        let p = self.need(DISCOUNT_MODELS, "fit-discount")?;
        Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?)
    }

    fn sow_spec(&self, n: usize) -> SowSpec {
        let s = &self.cfg.sow;
        SowSpec {
            n,
            seed: s.seed,
            mode: s.mode.clone(),
            lifetime: s.lifetime,
            error_halfwidth: s.error_halfwidth,
            horizon: s.horizon,
        }
    }

    /// Engine over a freshly generated ensemble of `n` SOWs.
    pub fn engine(&self, n: usize) -> Result<(Engine, SowEnsemble)> {
        let post = self.posterior()?;
        let models = self.models()?;
        let ens = generate_sows(&post, &models, &self.sow_spec(n))?;
        let engine = Engine::new(&post, &ens, self.curves()?, self.cost(), self.cfg.analysis_options())?;
        Ok((engine, ens))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub gage_id: String,
    pub first_date: String,
    pub last_date: String,
    pub n_days: usize,
    pub gap_days: usize,
    pub extrapolated_days: usize,
    pub n_years: usize,
    pub first_year: i32,
    pub last_year: i32,
    pub excluded_years: Vec<(i32, f64)>,
}

pub fn cmd_ingest(ctx: &mut Ctx) -> Result<IngestReport> {
    let c = &ctx.cfg;
    let series = read_usgs_rdb(&c.data.gage).with_context(|| format!("parsing {}", c.data.gage.display()))?;
    let curve = RatingCurve::from_csv(&c.data.rating, c.ingest.rating_interpolation)
        .with_context(|| format!("loading rating curve {}", c.data.rating.display()))?;
    let levels = to_water_levels(&series, &curve);
    let am = annual_maxima(&levels, c.ingest.min_coverage, c.ingest.year_convention);
    anyhow::ensure!(!am.is_empty(), "no year reached the coverage threshold {}", c.ingest.min_coverage);
    am.write_csv(&ctx.path(ANNUAL_MAXIMA))?;
    let report = IngestReport {
        gage_id: series.gage_id.clone(),
        first_date: series.first_date().map(|d| d.to_string()).unwrap_or_default(),
        last_date: series.last_date().map(|d| d.to_string()).unwrap_or_default(),
        n_days: series.len(),
        gap_days: series.gap_count(),
        extrapolated_days: levels.extrapolated_days,
        n_years: am.len(),
        first_year: am.entries[0].year,
        last_year: am.entries[am.len() - 1].year,
        excluded_years: am.excluded.clone(),
    };
    ctx.write_json(INGEST_REPORT, &report)?;
    let (gage, rating) = (ctx.cfg.data.gage.clone(), ctx.cfg.data.rating.clone());
    ctx.finish("ingest", &[("gage", &gage), ("rating", &rating)], &[ANNUAL_MAXIMA, INGEST_REPORT])?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardSummary {
    pub n_observations: usize,
    pub map: GevParams,
    pub posterior_mean: GevParams,
    pub bfe: f64,
    pub return_levels: Vec<ReturnLevelSummary>,
    pub acceptance_rate: f64,
    pub geweke_z: [f64; 3],
    pub warnings: Vec<String>,
}

pub const SUMMARY_PERIODS: [f64; 8] = [2.0, 5.0, 10.0, 25.0, 50.0, 100.0, 200.0, 500.0];

pub fn hazard_summary(post: &GevPosterior) -> Result<HazardSummary> {
    let mean = |f: fn(&GevParams) -> f64| stats::mean(&post.samples.iter().map(|s| f(&s.params)).collect::<Vec<_>>());
    Ok(HazardSummary {
        n_observations: post.meta.n_observations,
        map: post.map_estimate(),
        posterior_mean: GevParams {
            mu: mean(|p| p.mu),
            sigma: mean(|p| p.sigma),
            xi: mean(|p| p.xi),
        },
        bfe: post.base_flood_elevation(),
        return_levels: SUMMARY_PERIODS
            .iter()
            .map(|&t| post.return_level_summary(t))
            .collect::<elevate_core::Result<Vec<_>>>()?,
        acceptance_rate: post.meta.acceptance_rate,
        geweke_z: post.meta.geweke_z,
        warnings: post.meta.warnings.clone(),
    })
}

pub fn cmd_fit_hazard(ctx: &mut Ctx) -> Result<HazardSummary> {
    let am_path = ctx.need(ANNUAL_MAXIMA, "ingest")?;
    let data = AnnualMaxima::read_csv(&am_path)?.levels();
    let h = &ctx.cfg.hazard;
    let config = McmcConfig {
        n_samples: h.n_samples,
        burn_in: h.burn_in,
        init: GevParams {
            mu: h.init[0],
            sigma: h.init[1],
            xi: h.init[2],
        },
        seed: h.seed,
    };
    let post = mcmc_sample(&data, &h.prior, &config)?;
    post.save(&ctx.path(POSTERIOR))?;
    let summary = hazard_summary(&post)?;
    ctx.write_json(HAZARD_SUMMARY, &summary)?;
    ctx.finish("fit-hazard", &[(ANNUAL_MAXIMA, &am_path)], &[POSTERIOR, POSTERIOR_META, HAZARD_SUMMARY])?;
    Ok(summary)
}

pub fn cmd_fit_discount(ctx: &mut Ctx) -> Result<ModelSelection> {
    let src = ctx.cfg.data.discount.clone();
    let series = DiscountSeries::from_csv(&src).with_context(|| format!("loading {}", src.display()))?;
    let (models, table) = model_selection_table(&series)?;
    ctx.write_json(DISCOUNT_MODELS, &models)?;
    ctx.write_json(MODEL_SELECTION_JSON, &table)?;
    let mut w = csv::Writer::from_path(ctx.path(MODEL_SELECTION_CSV))?;
    for r in &table.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    ctx.finish(
        "fit-discount",
        &[("discount", &src)],
        &[DISCOUNT_MODELS, MODEL_SELECTION_JSON, MODEL_SELECTION_CSV],
    )?;
    Ok(table)
}

pub fn cmd_analyze(ctx: &mut Ctx, house: Option<House>) -> Result<HouseAnalysis> {
    let house = house.unwrap_or_else(|| ctx.cfg.analysis.house.clone());
    house.validate()?;
    let (engine, ens) = ctx.engine(ctx.cfg.sow.n)?;
    let analysis = engine.analyze(&house)?;
    ctx.write_json(DAMAGE_CURVES, &engine.curves)?;
    ctx.write_json(COST_MODEL, &engine.cost)?;
    let sow_dir = ctx.path(SOWS);
    if sow_dir.exists() {
        std::fs::remove_dir_all(&sow_dir)?;
    }
    ens.save(&sow_dir)?;
    ctx.write_json(HOUSE_REPORT, &analysis.report)?;
    analysis.report.write_strategies_csv(&ctx.path(STRATEGIES))?;
    analysis.considering.write_csv(&ctx.path(SURFACE_CONSIDERING))?;
    analysis.ignoring.write_csv(&ctx.path(SURFACE_IGNORING))?;
    let (p, m) = (ctx.path(POSTERIOR), ctx.path(DISCOUNT_MODELS));
    let dm = ctx.cfg.data.damage_manifest.clone();
    ctx.finish(
        "analyze",
        &[(POSTERIOR, &p), (DISCOUNT_MODELS, &m), ("damage_manifest", &dm)],
        &[DAMAGE_CURVES, COST_MODEL, SOWS, HOUSE_REPORT, STRATEGIES, SURFACE_CONSIDERING, SURFACE_IGNORING],
    )?;
    Ok(analysis)
}

#[derive(Debug, Clone, Serialize)]
struct FrontRow {
    mode: &'static str,
    h: f64,
    upfront: f64,
    reliability: f64,
    passes_cb_test: bool,
}

pub fn cmd_robustness(ctx: &mut Ctx) -> Result<Vec<RobustnessResult>> {
    let (engine, _) = ctx.engine(ctx.cfg.sow.n)?;
    let house = ctx.cfg.analysis.house.clone();
    let a = engine.analyze(&house)?;
    write_robustness_csv(&a.report.robustness, &ctx.path(ROBUSTNESS))?;
    write_tradeoff_csv(&a.report.tradeoffs, &ctx.path(TRADEOFFS))?;
    let ign_rob = elevate_core::robustness::robustness_curve(&a.ignoring, &engine.options.ranges)?;
    let ign_trade = elevate_core::robustness::tradeoff_export(&a.ignoring, &ign_rob)?;
    write_tradeoff_csv(&ign_trade, &ctx.path(TRADEOFFS_IGNORING))?;
    let mut w = csv::Writer::from_path(ctx.path(PARETO_FRONT))?;
    for (mode, rows) in [("considering", &a.report.tradeoffs), ("ignoring", &ign_trade)] {
        let pts: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.upfront, r.reliability]).collect();
        for i in pareto_front(&pts, &[Sense::Minimize, Sense::Maximize])? {
            let r = &rows[i];
            w.serialize(FrontRow {
                mode,
                h: r.h,
                upfront: r.upfront,
                reliability: r.reliability,
                passes_cb_test: r.passes_cb_test,
            })?;
        }
    }
    w.flush()?;
    let (p, m) = (ctx.path(POSTERIOR), ctx.path(DISCOUNT_MODELS));
    ctx.finish(
        "robustness",
        &[(POSTERIOR, &p), (DISCOUNT_MODELS, &m)],
        &[ROBUSTNESS, TRADEOFFS, TRADEOFFS_IGNORING, PARETO_FRONT],
    )?;
    Ok(a.report.robustness)
}

pub fn cmd_sweep(ctx: &mut Ctx) -> Result<SweepResult> {
    let s = ctx.cfg.sweep.clone();
    let (engine, _) = ctx.engine(s.n_sows)?;
    let pool = house_pool(s.n_houses, s.seed, &s.bounds)?;
    let mut w = csv::Writer::from_path(ctx.path(HOUSE_POOL))?;
    for h in &pool {
        w.serialize(h)?;
    }
    w.flush()?;
    let result = sweep(&engine, &pool, s.profile_step)?;
    result.write_csv(&ctx.path(SWEEP))?;
    ctx.write_json(SWEEP_SUMMARY, &result.summary)?;
    let (p, m) = (ctx.path(POSTERIOR), ctx.path(DISCOUNT_MODELS));
    ctx.finish("sweep", &[(POSTERIOR, &p), (DISCOUNT_MODELS, &m)], &[HOUSE_POOL, SWEEP, SWEEP_SUMMARY])?;
    Ok(result)
}

/// (label, house, variant) runs implied by a variant set.
pub fn expand_variants(sets: &[VariantSet], house: &House) -> Vec<(String, House, SensitivityVariant)> {
    let most_likely = SensitivityVariant::Scenario {
        scenario: Scenario::most_likely(),
    };
    let mut runs = Vec::new();
    for set in sets {
        match set {
            VariantSet::MostLikely => runs.push(("most_likely".to_string(), house.clone(), most_likely)),
            VariantSet::AllScenarios => {
                for s in Scenario::all() {
                    runs.push((
                        format!("scenario_{}_{}", s.damage_model, s.discount_model),
                        house.clone(),
                        SensitivityVariant::Scenario { scenario: s },
                    ));
                }
            }
            VariantSet::DeepChoice => runs.push(("deep_choice".into(), house.clone(), SensitivityVariant::DeepChoice)),
            VariantSet::Exposure => {
                for h in exposure_presets() {
                    runs.push((format!("exposure_{}", h.label), h, most_likely));
                }
            }
            VariantSet::FixedRate => {
                runs.push(("fixed_rate".into(), house.clone(), SensitivityVariant::fixed_rate_default()))
            }
        }
    }
    runs
}

pub fn cmd_sensitivity(ctx: &mut Ctx, sets: Option<Vec<VariantSet>>) -> Result<Vec<(String, SobolIndices)>> {
    let post = ctx.posterior()?;
    let models = ctx.models()?;
    let curves = ctx.curves()?;
    let bfe = post.base_flood_elevation();
    let s = ctx.cfg.sensitivity.clone();
    let sets = sets.unwrap_or_else(|| s.variants.clone());
    std::fs::create_dir_all(ctx.path(SENSITIVITY_DIR))?;
    let mut outputs = Vec::new();
    let mut results = Vec::new();
    for (label, house, variant) in expand_variants(&sets, &ctx.cfg.analysis.house) {
        let config = DamageSensitivityConfig {
            variant,
            n: s.n,
            seed: s.seed,
            sampler: s.sampler,
            resamples: s.resamples,
            confidence: s.confidence,
            path_bank: s.path_bank,
            h: 0.0,
            lifetime: ctx.cfg.sow.lifetime,
            error_halfwidth: ctx.cfg.sow.error_halfwidth,
            convention: ctx.cfg.discount.convention,
        };
        let idx = damage_sensitivity(&house, &post, bfe, &models, &curves, &config)?;
        let csv_name = format!("{SENSITIVITY_DIR}/{label}.csv");
        let json_name = format!("{SENSITIVITY_DIR}/{label}.json");
        idx.write_csv(&ctx.path(&csv_name))?;
        ctx.write_json(&json_name, &idx)?;
        outputs.push(csv_name);
        outputs.push(json_name);
        results.push((label, idx));
    }
    let (p, m) = (ctx.path(POSTERIOR), ctx.path(DISCOUNT_MODELS));
    let outs: Vec<&str> = outputs.iter().map(String::as_str).collect();
    ctx.finish("sensitivity", &[(POSTERIOR, &p), (DISCOUNT_MODELS, &m)], &outs)?;
    Ok(results)
}

pub fn cmd_ishigami(ctx: &mut Ctx) -> Result<IshigamiCheck> {
    let s = &ctx.cfg.sensitivity;
    let check = ishigami_self_test(s.ishigami_n, s.seed, s.resamples)?;
    let name = format!("{SENSITIVITY_DIR}/ishigami.json");
    ctx.write_json(&name, &check)?;
    ctx.finish("sensitivity-ishigami", &[], &[&name])?;
    Ok(check)
}

#[derive(Debug, Serialize)]
struct ReturnLevelRow {
    return_period: f64,
    map: f64,
    mean: f64,
    q05: f64,
    q95: f64,
}

#[derive(Debug, Serialize)]
struct ProjectionRow {
    model: String,
    year: i32,
    q05: f64,
    q50: f64,
    q95: f64,
    mean: f64,
}

#[derive(Debug, Serialize)]
struct DamageLedRow {
    discount_model: String,
    mean: f64,
    q05: f64,
    q25: f64,
    q50: f64,
    q75: f64,
    q95: f64,
    min: f64,
    max: f64,
}

/// Plot-ready tables: return levels, discount projections, damage and
/// cost curves, and sample-house damages by discount model.
pub fn cmd_export_plots(ctx: &mut Ctx) -> Result<Vec<String>> {
    let post = ctx.posterior()?;
    let models = ctx.models()?;
    let curves = ctx.curves()?;
    let cost = ctx.cost();
    std::fs::create_dir_all(ctx.path(PLOTS_DIR))?;
    let mut outputs = Vec::new();

    let name = format!("{PLOTS_DIR}/return_levels.csv");
    let mut w = csv::Writer::from_path(ctx.path(&name))?;
    for i in 0..=60 {
        let t = 10f64.powf(0.01 + 2.99 * i as f64 / 60.0).max(1.01);
        let s = post.return_level_summary(t)?;
        w.serialize(ReturnLevelRow {
            return_period: t,
            map: s.map_level,
            mean: s.mean_level,
            q05: s.q05,
            q95: s.q95,
        })?;
    }
    w.flush()?;
    outputs.push(name);

    let d = &ctx.cfg.discount;
    let name = format!("{PLOTS_DIR}/discount_projections.csv");
    let mut w = csv::Writer::from_path(ctx.path(&name))?;
    for m in &models {
        let paths = simulate_rates(m, d.projection_horizon, d.projection_paths, d.seed)?;
        for t in 0..d.projection_horizon {
            let mut col: Vec<f64> = paths.iter().map(|p| p.rates[t] * 100.0).collect();
            let mean = stats::mean(&col);
            col.sort_by(f64::total_cmp);
            w.serialize(ProjectionRow {
                model: m.kind.to_string(),
                year: m.last_year + 1 + t as i32,
                q05: stats::quantile_sorted(&col, 0.05),
                q50: stats::quantile_sorted(&col, 0.5),
                q95: stats::quantile_sorted(&col, 0.95),
                mean,
            })?;
        }
    }
    w.flush()?;
    outputs.push(name);

    let name = format!("{PLOTS_DIR}/damage_curves.csv");
    let mut w = csv::Writer::from_path(ctx.path(&name))?;
    w.write_record(["depth_ft", "hazus", "hazus_lo", "hazus_hi", "jrc", "jrc_lo", "jrc_hi"])?;
    for i in 0..=104 {
        let depth = -2.0 + 0.25 * i as f64;
        let mut rec = vec![depth.to_string()];
        for m in DamageModel::ALL {
            let c = curves.get(m);
            for e in [0.0, -c.error_halfwidth, c.error_halfwidth] {
                rec.push(c.damage_fraction(depth, e).to_string());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    outputs.push(name);

    let name = format!("{PLOTS_DIR}/cost_curves.csv");
    let mut w = csv::Writer::from_path(ctx.path(&name))?;
    w.write_record(["h", "size_1000", "size_2000", "size_3000"])?;
    for h in elevate_core::objectives::policy_grid(&cost, 0.1) {
        let mut rec = vec![h.to_string()];
        for size in [1000.0, 2000.0, 3000.0] {
            rec.push(cost.cost(&House::new(1.0, size, 0.0)?, h)?.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    outputs.push(name);

    // sample-house damages without elevation, one fixed scenario per discount model
    let name = format!("{PLOTS_DIR}/led_by_discount_model.csv");
    let mut w = csv::Writer::from_path(ctx.path(&name))?;
    let opts = ctx.cfg.analysis_options();
    let grid = opts.ead_grid()?;
    let bfe = post.base_flood_elevation();
    for m in &models {
        let mut spec = ctx.sow_spec(ctx.cfg.sweep.n_sows);
        spec.mode = SowMode::fixed(Scenario {
            damage_model: DamageModel::Hazus,
            discount_model: m.kind,
        });
        let ens = generate_sows(&post, &models, &spec)?;
        let set = EvalSet::considering(&ens, bfe, &grid, opts.convention)?;
        let mut led = set.led(&curves, &ctx.cfg.analysis.house, 0.0);
        let mean = stats::mean(&led);
        led.sort_by(f64::total_cmp);
        let q = |p: f64| stats::quantile_sorted(&led, p);
        w.serialize(DamageLedRow {
            discount_model: m.kind.to_string(),
            mean,
            q05: q(0.05),
            q25: q(0.25),
            q50: q(0.5),
            q75: q(0.75),
            q95: q(0.95),
            min: led[0],
            max: led[led.len() - 1],
        })?;
    }
    w.flush()?;
    outputs.push(name);

    // a deterministic projection of the fixed-rate factors for reference
    let name = format!("{PLOTS_DIR}/fixed_rate_factors.csv");
    let mut w = csv::Writer::from_path(ctx.path(&name))?;
    w.write_record(["t", "r_0.01", "r_0.04", "r_0.10"])?;
    let fs: Vec<DiscountFactors> = [0.01, 0.04, 0.10]
        .iter()
        .map(|&r| DiscountFactors::fixed(r, 121, opts.convention))
        .collect::<elevate_core::Result<_>>()?;
    for t in 0..121 {
        let mut rec = vec![t.to_string()];
        rec.extend(fs.iter().map(|f| f.f[t].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    outputs.push(name);

    let (p, m) = (ctx.path(POSTERIOR), ctx.path(DISCOUNT_MODELS));
    let outs: Vec<&str> = outputs.iter().map(String::as_str).collect();
    ctx.finish("export-plots", &[(POSTERIOR, &p), (DISCOUNT_MODELS, &m)], &outs)?;
    Ok(outputs)
}
