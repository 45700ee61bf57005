//! Run configuration. Every scientific parameter has an explicit value in
//! the resolved config, which is echoed into the run manifest.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use elevate_core::analysis::{AnalysisOptions, PoolBounds};
use elevate_core::discount::DiscountConvention;
use elevate_core::exposure::{ElevationCostModel, House, LifetimeDist, DEFAULT_ERROR_HALFWIDTH};
use elevate_core::hazard::PriorSpec;
use elevate_core::hydro::{RatingInterpolation, YearConvention};
use elevate_core::objectives::IgnoringAssumptions;
use elevate_core::robustness::AcceptableRanges;
use elevate_core::sensitivity::Sampler;
use elevate_core::sow::SowMode;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub data: DataPaths,
    #[serde(default)]
    pub ingest: IngestConfig,
    #[serde(default)]
    pub hazard: HazardConfig,
    #[serde(default)]
    pub discount: DiscountConfig,
    #[serde(default)]
    pub sow: SowConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub sensitivity: SensitivityConfig,
    /// Directory relative paths were resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub gage: PathBuf,
    pub rating: PathBuf,
    pub discount: PathBuf,
    pub damage_manifest: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestConfig {
    pub rating_interpolation: RatingInterpolation,
    pub year_convention: YearConvention,
    pub min_coverage: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            rating_interpolation: RatingInterpolation::Linear,
            year_convention: YearConvention::Calendar,
            min_coverage: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HazardConfig {
    pub seed: u64,
    pub n_samples: usize,
    pub burn_in: usize,
    pub init: [f64; 3],
    pub prior: PriorSpec,
}

impl Default for HazardConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_samples: 50_000,
            burn_in: 10_000,
            init: [5.0, 1.0, 0.1],
            prior: PriorSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscountConfig {
    pub convention: DiscountConvention,
    /// Years of simulated rates exported for plotting.
    pub projection_horizon: usize,
    pub projection_paths: usize,
    pub seed: u64,
}

impl Default for DiscountConfig {
    fn default() -> Self {
        Self {
            convention: DiscountConvention::FromYearZero,
            projection_horizon: 120,
            projection_paths: 1000,
            seed: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SowConfig {
    pub seed: u64,
    pub n: usize,
    pub mode: SowMode,
    pub lifetime: LifetimeDist,
    pub error_halfwidth: f64,
    pub horizon: usize,
}

impl Default for SowConfig {
    fn default() -> Self {
        Self {
            seed: 2,
            n: 10_000,
            mode: SowMode::deep_uniform(),
            lifetime: LifetimeDist::default(),
            error_halfwidth: DEFAULT_ERROR_HALFWIDTH,
            horizon: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub house: House,
    pub grid_step: f64,
    pub freeboard: f64,
    pub cost: ElevationCostModel,
    pub ranges: AcceptableRanges,
    pub ignoring: IgnoringAssumptions,
    pub ead_t_min: f64,
    pub ead_t_max: f64,
    pub ead_nodes: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let o = AnalysisOptions::default();
        Self {
            house: House::sample_house(),
            grid_step: o.grid_step,
            freeboard: o.freeboard,
            cost: ElevationCostModel::default(),
            ranges: o.ranges,
            ignoring: o.ignoring,
            ead_t_min: o.ead_t_min,
            ead_t_max: o.ead_t_max,
            ead_nodes: o.ead_nodes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub seed: u64,
    pub n_houses: usize,
    /// Ensemble size for the sweep (a prefix-independent regeneration).
    pub n_sows: usize,
    pub profile_step: f64,
    pub bounds: PoolBounds,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            seed: 3,
            n_houses: 1000,
            n_sows: 2000,
            profile_step: 0.01,
            bounds: PoolBounds::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantSet {
    MostLikely,
    AllScenarios,
    DeepChoice,
    Exposure,
    FixedRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivityConfig {
    pub seed: u64,
    pub n: usize,
    pub resamples: usize,
    pub confidence: f64,
    pub path_bank: usize,
    pub sampler: Sampler,
    pub variants: Vec<VariantSet>,
    pub ishigami_n: usize,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            seed: 4,
            n: 4096,
            resamples: 1000,
            confidence: 0.95,
            path_bank: 1000,
            sampler: Sampler::LatinHypercube,
            variants: vec![VariantSet::MostLikely, VariantSet::FixedRate],
            ishigami_n: 1 << 14,
        }
    }
}

impl RunConfig {
    /// Parses TOML; relative paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).context("invalid config")?;
        cfg.base_dir = base.to_path_buf();
        let abs = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        abs(&mut cfg.output_dir);
        abs(&mut cfg.data.gage);
        abs(&mut cfg.data.rating);
        abs(&mut cfg.data.discount);
        abs(&mut cfg.data.damage_manifest);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn check_inputs(&self) -> Result<()> {
        for (name, p) in [
            ("gage", &self.data.gage),
            ("rating", &self.data.rating),
            ("discount", &self.data.discount),
            ("damage_manifest", &self.data.damage_manifest),
        ] {
            if !p.exists() {
                bail!("data.{name} file {} does not exist", p.display());
            }
        }
        Ok(())
    }

    /// Replaces every stage seed with `seed` (stages use distinct stream domains).
    pub fn override_seed(&mut self, seed: u64) {
        self.hazard.seed = seed;
        self.discount.seed = seed;
        self.sow.seed = seed;
        self.sweep.seed = seed;
        self.sensitivity.seed = seed;
    }

    pub fn analysis_options(&self) -> AnalysisOptions {
        let a = &self.analysis;
        AnalysisOptions {
            grid_step: a.grid_step,
            freeboard: a.freeboard,
            ranges: a.ranges,
            ignoring: a.ignoring,
            convention: self.discount.convention,
            ead_t_min: a.ead_t_min,
            ead_t_max: a.ead_t_max,
            ead_nodes: a.ead_nodes,
        }
    }

    /// Canonical JSON of the resolved config, with paths shown relative to
    /// the config directory so the hash does not depend on the checkout location.
    pub fn canonical_json(&self) -> Result<String> {
        let mut c = self.clone();
        let rel = |p: &mut PathBuf| {
            if let Ok(r) = p.strip_prefix(&self.base_dir) {
                *p = r.to_path_buf();
            }
        };
        rel(&mut c.output_dir);
        rel(&mut c.data.gage);
        rel(&mut c.data.rating);
        rel(&mut c.data.discount);
        rel(&mut c.data.damage_manifest);
        Ok(serde_json::to_string(&c)?)
    }
}
