//! Exposure and vulnerability: the house, depth-damage curves, elevation
//! costs and the house-lifetime distribution.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct House {
    /// Structure value in USD.
    pub value: f64,
    /// Footprint in square feet.
    pub size: f64,
    /// Lowest-floor elevation minus BFE, feet.
    pub floor_rel_bfe: f64,
    #[serde(default)]
    pub label: String,
}

impl House {
    pub fn new(value: f64, size: f64, floor_rel_bfe: f64) -> Result<Self> {
        let h = Self {
            value,
            size,
            floor_rel_bfe,
            label: String::new(),
        };
        h.validate()?;
        Ok(h)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.value > 0.0 && self.value.is_finite()) {
            return domain(format!("house value must be positive, got {}", self.value));
        }
        if !(self.size > 0.0 && self.size.is_finite()) {
            return domain(format!("house size must be positive, got {}", self.size));
        }
        if !self.floor_rel_bfe.is_finite() {
            return domain("floor elevation must be finite");
        }
        Ok(())
    }

    /// The 1,500 ft², $300K house with its lowest floor 4 ft below BFE.
    pub fn sample_house() -> Self {
        Self {
            value: 300_000.0,
            size: 1_500.0,
            floor_rel_bfe: -4.0,
            label: "sample".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DamageModel {
    Hazus,
    Jrc,
}

impl DamageModel {
    pub const ALL: [DamageModel; 2] = [DamageModel::Hazus, DamageModel::Jrc];

    pub fn name(self) -> &'static str {
        match self {
            DamageModel::Hazus => "hazus",
            DamageModel::Jrc => "jrc",
        }
    }
}

impl std::fmt::Display for DamageModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub const DEFAULT_ERROR_HALFWIDTH: f64 = 0.30;

/// 1-ft knots from -2 to 24 ft above the lowest floor.
const KNOT_DEPTHS: [f64; 27] = [
    -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 14.0, 15.0, 16.0, 17.0,
    18.0, 19.0, 20.0, 21.0, 22.0, 23.0, 24.0,
];

/// Generic one-story, no-basement structure curve (USACE/HAZUS), flat past 16 ft.
const HAZUS_FRACTIONS: [f64; 27] = [
    0.0, 0.0, 0.134, 0.233, 0.321, 0.401, 0.471, 0.532, 0.586, 0.632, 0.672, 0.705, 0.732, 0.754, 0.772, 0.785,
    0.795, 0.802, 0.807, 0.807, 0.807, 0.807, 0.807, 0.807, 0.807, 0.807, 0.807,
];

/// North-America residential curve (JRC global database) resampled from metres.
const JRC_FRACTIONS: [f64; 27] = [
    0.0, 0.0, 0.0, 0.1231, 0.2548, 0.4017, 0.5044, 0.5878, 0.6488, 0.6965, 0.7273, 0.7581, 0.7874, 0.8087, 0.8300,
    0.8514, 0.8727, 0.8940, 0.9154, 0.9309, 0.9425, 0.9541, 0.9620, 0.9620, 0.9620, 0.9620, 0.9620,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthDamageCurve {
    pub model: DamageModel,
    depths: Vec<f64>,
    fractions: Vec<f64>,
    pub error_halfwidth: f64,
}

impl DepthDamageCurve {
    pub fn new(model: DamageModel, table: &[(f64, f64)], error_halfwidth: f64) -> Result<Self> {
        if table.len() < 2 {
            return Err(Error::Validation("depth-damage table needs at least 2 knots".into()));
        }
        for w in table.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Validation(format!("depths not strictly increasing at {}", w[1].0)));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::Validation(format!("damage fraction decreases at depth {}", w[1].0)));
            }
        }
        if table.iter().any(|&(_, f)| !(0.0..=1.0).contains(&f)) {
            return Err(Error::Validation("damage fractions must lie in [0, 1]".into()));
        }
        if !(0.0..1.0).contains(&error_halfwidth) {
            return Err(Error::Validation("error half-width must lie in [0, 1)".into()));
        }
        Ok(Self {
            model,
            depths: table.iter().map(|t| t.0).collect(),
            fractions: table.iter().map(|t| t.1).collect(),
            error_halfwidth,
        })
    }

    pub fn builtin(model: DamageModel) -> Self {
        let fractions = match model {
            DamageModel::Hazus => &HAZUS_FRACTIONS,
            DamageModel::Jrc => &JRC_FRACTIONS,
        };
        Self {
            model,
            depths: KNOT_DEPTHS.to_vec(),
            fractions: fractions.to_vec(),
            error_halfwidth: DEFAULT_ERROR_HALFWIDTH,
        }
    }

    /// Reads a `depth_ft,fraction` CSV.
    pub fn from_csv(path: &Path, model: DamageModel, error_halfwidth: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut table = Vec::new();
        for row in rdr.deserialize() {
            let (d, f): (f64, f64) = row?;
            table.push((d, f));
        }
        Self::new(model, &table, error_halfwidth)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["depth_ft", "fraction"])?;
        for (d, f) in self.table() {
            w.write_record([d.to_string(), f.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn table(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.depths.iter().copied().zip(self.fractions.iter().copied())
    }

    /// Damage fraction at `depth` feet above the lowest floor, scaled by
    /// `(1 + error_draw)` and clamped to `[0, 1]`. No water above the floor
    /// means no damage.
    pub fn damage_fraction(&self, depth: f64, error_draw: f64) -> f64 {
        if depth < 0.0 || depth < self.depths[0] {
            return 0.0;
        }
        let base = stats::interp_clamped(&self.depths, &self.fractions, depth);
        (base * (1.0 + error_draw)).clamp(0.0, 1.0)
    }

    pub fn check_error_draw(&self, error_draw: f64) -> Result<()> {
        if error_draw.abs() > self.error_halfwidth + 1e-12 {
            return domain(format!(
                "error draw {error_draw} outside +-{}",
                self.error_halfwidth
            ));
        }
        Ok(())
    }

    /// Damage in USD for a water level (relative to BFE) after heightening by `h`.
    pub fn flood_damage(&self, house: &House, water_level_rel_bfe: f64, h: f64, error_draw: f64) -> f64 {
        let depth = water_level_rel_bfe - (house.floor_rel_bfe + h);
        self.damage_fraction(depth, error_draw) * house.value
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveManifestEntry {
    pub model_id: DamageModel,
    pub file: PathBuf,
    pub source: String,
    #[serde(default = "default_halfwidth")]
    pub error_halfwidth: f64,
}

fn default_halfwidth() -> f64 {
    DEFAULT_ERROR_HALFWIDTH
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveManifest {
    pub curves: Vec<CurveManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamageCurves {
    pub hazus: DepthDamageCurve,
    pub jrc: DepthDamageCurve,
}

impl Default for DamageCurves {
    fn default() -> Self {
        Self {
            hazus: DepthDamageCurve::builtin(DamageModel::Hazus),
            jrc: DepthDamageCurve::builtin(DamageModel::Jrc),
        }
    }
}

impl DamageCurves {
    pub fn get(&self, model: DamageModel) -> &DepthDamageCurve {
        match model {
            DamageModel::Hazus => &self.hazus,
            DamageModel::Jrc => &self.jrc,
        }
    }

    /// Loads both curves from a JSON manifest; files resolve relative to it.
    pub fn from_manifest(path: &Path) -> Result<Self> {
        let manifest: CurveManifest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let load = |model: DamageModel| -> Result<DepthDamageCurve> {
            let entry = manifest
                .curves
                .iter()
                .find(|c| c.model_id == model)
                .ok_or_else(|| Error::Validation(format!("manifest has no {model} curve")))?;
            DepthDamageCurve::from_csv(&base.join(&entry.file), model, entry.error_halfwidth)
        };
        Ok(Self {
            hazus: load(DamageModel::Hazus)?,
            jrc: load(DamageModel::Jrc)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostInterpolation {
    /// Rate of the band containing `h`.
    #[default]
    Step,
    /// Rate interpolated linearly between band midpoints.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBand {
    pub from_ft: f64,
    pub to_ft: f64,
    pub usd_per_sqft: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElevationCostModel {
    pub fixed_fee: f64,
    pub bands: Vec<CostBand>,
    pub mode: CostInterpolation,
}

impl Default for ElevationCostModel {
    fn default() -> Self {
        Self {
            fixed_fee: 20_745.0,
            bands: vec![
                CostBand { from_ft: 3.0, to_ft: 7.0, usd_per_sqft: 82.5 },
                CostBand { from_ft: 7.0, to_ft: 10.0, usd_per_sqft: 86.25 },
                CostBand { from_ft: 10.0, to_ft: 14.0, usd_per_sqft: 103.75 },
            ],
            mode: CostInterpolation::Step,
        }
    }
}

impl ElevationCostModel {
    pub fn with_mode(mut self, mode: CostInterpolation) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.bands.is_empty() {
            return domain("cost model needs at least one band");
        }
        for w in self.bands.windows(2) {
            if w[1].usd_per_sqft < w[0].usd_per_sqft || w[1].from_ft != w[0].to_ft {
                return domain("cost bands must be contiguous with non-decreasing rates");
            }
        }
        if self.bands.iter().any(|b| !(b.usd_per_sqft > 0.0)) {
            return domain("band rates must be positive");
        }
        Ok(())
    }

    pub fn min_height(&self) -> f64 {
        self.bands[0].from_ft
    }

    pub fn max_height(&self) -> f64 {
        self.bands[self.bands.len() - 1].to_ft
    }

    pub fn is_feasible(&self, h: f64) -> bool {
        h == 0.0 || (h >= self.min_height() - 1e-9 && h <= self.max_height() + 1e-9)
    }

    fn rate(&self, h: f64) -> f64 {
        match self.mode {
            CostInterpolation::Step => self
                .bands
                .iter()
                .find(|b| h < b.to_ft)
                .unwrap_or(&self.bands[self.bands.len() - 1])
                .usd_per_sqft,
            CostInterpolation::Linear => {
                let mids: Vec<f64> = self.bands.iter().map(|b| 0.5 * (b.from_ft + b.to_ft)).collect();
                let rates: Vec<f64> = self.bands.iter().map(|b| b.usd_per_sqft).collect();
                stats::interp_clamped(&mids, &rates, h)
            }
        }
    }

    /// Upfront cost of raising `house` by `h` feet.
    pub fn cost(&self, house: &House, h: f64) -> Result<f64> {
        if h == 0.0 {
            return Ok(0.0);
        }
        if !self.is_feasible(h) {
            return domain(format!(
                "heightening {h} ft outside {{0}} U [{}, {}]",
                self.min_height(),
                self.max_height()
            ));
        }
        Ok(self.fixed_fee + self.rate(h) * house.size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LifetimeDist {
    Weibull { shape: f64, scale: f64 },
    Fixed { years: u32 },
}

impl Default for LifetimeDist {
    fn default() -> Self {
        LifetimeDist::Weibull { shape: 2.8, scale: 73.5 }
    }
}

impl LifetimeDist {
    pub fn fixed_default() -> Self {
        LifetimeDist::Fixed { years: 30 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LifetimeDist::Weibull { shape, scale } if shape > 0.0 && scale > 0.0 => Ok(()),
            LifetimeDist::Fixed { years } if years >= 1 => Ok(()),
            _ => domain(format!("invalid lifetime distribution {self:?}")),
        }
    }

    /// Lifetime for a unit-interval coordinate via the inverse CDF, rounded, at least 1.
    pub fn from_unit(&self, u: f64) -> u32 {
        match *self {
            LifetimeDist::Fixed { years } => years,
            LifetimeDist::Weibull { shape, scale } => {
                let u = u.clamp(0.0, 1.0 - 1e-16);
                let years = scale * (-(1.0 - u).ln()).powf(1.0 / shape);
                (years.round() as u32).max(1)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.from_unit(rng.random())
    }

    /// Mean of the continuous (unrounded) distribution.
    pub fn mean(&self) -> f64 {
        match *self {
            LifetimeDist::Fixed { years } => years as f64,
            LifetimeDist::Weibull { shape, scale } => scale * statrs::function::gamma::gamma(1.0 + 1.0 / shape),
        }
    }
}
