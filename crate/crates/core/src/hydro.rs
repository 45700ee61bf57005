//! Gage data ingestion: USGS RDB daily-discharge files, stage-discharge
//! rating curves, and annual-maximum extraction.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// USGS parameter code for discharge (cfs) and statistic code for daily mean.
const DISCHARGE_SUFFIX: &str = "_00060_00003";

#[derive(Debug, Clone, PartialEq)]
pub struct DailyDischarge {
    pub date: NaiveDate,
    /// `None` marks a gap (empty field, ice, equipment failure, ...).
    pub discharge: Option<f64>,
    pub qualifier: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DischargeSeries {
    pub gage_id: String,
    pub records: Vec<DailyDischarge>,
}

impl DischargeSeries {
    pub fn new(gage_id: impl Into<String>, records: Vec<DailyDischarge>) -> Result<Self> {
        for pair in records.windows(2) {
            if pair[1].date <= pair[0].date {
                return Err(Error::Validation(format!(
                    "dates not strictly increasing: {} follows {}",
                    pair[1].date, pair[0].date
                )));
            }
        }
        if let Some(r) = records.iter().find(|r| r.discharge.is_some_and(|q| !(q >= 0.0))) {
            return Err(Error::Validation(format!(
                "negative or non-finite discharge on {}",
                r.date
            )));
        }
        Ok(Self {
            gage_id: gage_id.into(),
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn gap_count(&self) -> usize {
        self.records.iter().filter(|r| r.discharge.is_none()).count()
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.records.first().map(|r| r.date)
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.records.last().map(|r| r.date)
    }
}

fn is_format_token(tok: &str) -> bool {
    let tok = tok.trim();
    let Some(last) = tok.chars().last() else {
        return false;
    };
    matches!(last, 's' | 'd' | 'n') && tok[..tok.len() - 1].chars().all(|c| c.is_ascii_digit())
}

/// Parses a USGS RDB daily-values payload.
///
/// The first discharge column (`*_00060_00003`) is used; its `_cd` companion,
/// when present, is kept as the qualifier.
pub fn parse_usgs_rdb(text: &str) -> Result<DischargeSeries> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());

    let (header_line, header) = lines.next().ok_or(Error::Parse {
        line: 0,
        message: "no header row".into(),
    })?;
    let columns: Vec<&str> = header.split('\t').map(str::trim).collect();
    let date_col = columns
        .iter()
        .position(|c| *c == "datetime")
        .ok_or_else(|| Error::Parse {
            line: header_line,
            message: "header has no 'datetime' column".into(),
        })?;
    let value_col = columns
        .iter()
        .position(|c| c.ends_with(DISCHARGE_SUFFIX))
        .ok_or_else(|| Error::Parse {
            line: header_line,
            message: format!("header has no discharge column (*{DISCHARGE_SUFFIX})"),
        })?;
    let qual_name = format!("{}_cd", columns[value_col]);
    let qual_col = columns.iter().position(|c| *c == qual_name);
    let site_col = columns.iter().position(|c| *c == "site_no");

    let (format_line, format_row) = lines.next().ok_or(Error::Parse {
        line: header_line + 1,
        message: "missing format row".into(),
    })?;
    let tokens: Vec<&str> = format_row.split('\t').collect();
    if tokens.len() != columns.len() || !tokens.iter().all(|t| is_format_token(t)) {
        return Err(Error::Parse {
            line: format_line,
            message: format!("malformed format row '{format_row}'"),
        });
    }

    let mut gage_id = String::new();
    let mut records = Vec::new();
    for (line_no, row) in lines {
        let fields: Vec<&str> = row.split('\t').collect();
        if fields.len() <= date_col.max(value_col) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {} fields, found {}", columns.len(), fields.len()),
            });
        }
        let date = NaiveDate::parse_from_str(fields[date_col].trim(), "%Y-%m-%d").map_err(|e| {
            Error::Parse {
                line: line_no,
                message: format!("bad date '{}': {e}", fields[date_col]),
            }
        })?;
        if gage_id.is_empty() {
            if let Some(c) = site_col {
                gage_id = fields.get(c).map(|s| s.trim().to_string()).unwrap_or_default();
            }
        }
        // Non-numeric entries (Ice, Eqp, Ssn, ***) are qualified gaps.
        let raw = fields[value_col].trim();
        let discharge = raw.parse::<f64>().ok().filter(|v| v.is_finite());
        let qualifier = qual_col
            .and_then(|c| fields.get(c))
            .map(|s| s.trim().to_string())
            .unwrap_or_default();
        records.push(DailyDischarge {
            date,
            discharge,
            qualifier,
        });
    }
    DischargeSeries::new(gage_id, records)
}

pub fn read_usgs_rdb(path: &Path) -> Result<DischargeSeries> {
    parse_usgs_rdb(&std::fs::read_to_string(path)?)
}

/// Serializes a series back to RDB with the canonical daily-values layout.
pub fn write_usgs_rdb(series: &DischargeSeries) -> String {
    let mut out = String::new();
    out.push_str("# USGS daily discharge, cubic feet per second\n");
    let _ = writeln!(out, "# site {}", series.gage_id);
    let _ = writeln!(
        out,
        "agency_cd\tsite_no\tdatetime\t1{DISCHARGE_SUFFIX}\t1{DISCHARGE_SUFFIX}_cd"
    );
    out.push_str("5s\t15s\t20d\t14n\t10s\n");
    for r in &series.records {
        let value = r.discharge.map(|q| format!("{q}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "USGS\t{}\t{}\t{}\t{}",
            series.gage_id,
            r.date.format("%Y-%m-%d"),
            value,
            r.qualifier
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatingInterpolation {
    /// Linear in (discharge, stage).
    #[default]
    Linear,
    /// Linear in (ln discharge, stage).
    LogDischarge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatingCurve {
    discharge: Vec<f64>,
    stage: Vec<f64>,
    pub interpolation: RatingInterpolation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageEstimate {
    pub stage: f64,
    pub out_of_range: bool,
}

impl RatingCurve {
    pub fn new(points: &[(f64, f64)], interpolation: RatingInterpolation) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Validation("rating curve needs at least 2 points".into()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Validation(format!(
                    "rating discharge not strictly increasing at {}",
                    w[1].0
                )));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::Validation(format!(
                    "rating stage decreases at discharge {}",
                    w[1].0
                )));
            }
        }
        if interpolation == RatingInterpolation::LogDischarge && points[0].0 <= 0.0 {
            return Err(Error::Validation(
                "log-discharge interpolation needs positive discharge knots".into(),
            ));
        }
        Ok(Self {
            discharge: points.iter().map(|p| p.0).collect(),
            stage: points.iter().map(|p| p.1).collect(),
            interpolation,
        })
    }

    /// Reads a two-column `discharge,stage` CSV.
    pub fn from_csv(path: &Path, interpolation: RatingInterpolation) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut points = Vec::new();
        for row in rdr.deserialize() {
            let (q, s): (f64, f64) = row?;
            points.push((q, s));
        }
        Self::new(&points, interpolation)
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.discharge.iter().copied().zip(self.stage.iter().copied())
    }

    fn axis(&self, q: f64) -> f64 {
        match self.interpolation {
            RatingInterpolation::Linear => q,
            RatingInterpolation::LogDischarge => q.ln(),
        }
    }

    /// Stage for discharge `q`; beyond the table the nearest segment is extended.
    pub fn discharge_to_stage(&self, q: f64) -> Result<StageEstimate> {
        if !(q > 0.0) {
            return domain(format!("discharge must be positive, got {q}"));
        }
        let n = self.discharge.len();
        let out_of_range = q < self.discharge[0] || q > self.discharge[n - 1];
        let seg = if q <= self.discharge[0] {
            0
        } else if q >= self.discharge[n - 1] {
            n - 2
        } else {
            self.discharge.partition_point(|&k| k <= q) - 1
        };
        let (x0, x1) = (self.axis(self.discharge[seg]), self.axis(self.discharge[seg + 1]));
        let (s0, s1) = (self.stage[seg], self.stage[seg + 1]);
        let x = self.axis(q);
        let stage = if x == x0 {
            s0
        } else {
            s0 + (s1 - s0) * (x - x0) / (x1 - x0)
        };
        Ok(StageEstimate { stage, out_of_range })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterLevelSeries {
    pub gage_id: String,
    pub records: Vec<(NaiveDate, Option<f64>)>,
    /// Days whose discharge fell outside the rating table.
    pub extrapolated_days: usize,
}

/// Converts a discharge series to gage height. Zero-flow days become gaps.
pub fn to_water_levels(series: &DischargeSeries, curve: &RatingCurve) -> WaterLevelSeries {
    let mut extrapolated_days = 0;
    let records = series
        .records
        .iter()
        .map(|r| {
            let level = r.discharge.and_then(|q| curve.discharge_to_stage(q).ok()).map(|est| {
                if est.out_of_range {
                    extrapolated_days += 1;
                }
                est.stage
            });
            (r.date, level)
        })
        .collect();
    WaterLevelSeries {
        gage_id: series.gage_id.clone(),
        records,
        extrapolated_days,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YearConvention {
    #[default]
    Calendar,
    /// October through September, labelled by the ending calendar year.
    Water,
}

impl YearConvention {
    fn year_of(self, date: NaiveDate) -> i32 {
        match self {
            YearConvention::Calendar => date.year(),
            YearConvention::Water if date.month() >= 10 => date.year() + 1,
            YearConvention::Water => date.year(),
        }
    }

    fn days_in(self, year: i32) -> u32 {
        let leap_year = match self {
            YearConvention::Calendar => year,
            // Feb of the water year falls in the labelled calendar year.
            YearConvention::Water => year,
        };
        if NaiveDate::from_ymd_opt(leap_year, 2, 29).is_some() {
            366
        } else {
            365
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnualMax {
    pub year: i32,
    pub level: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnualMaxima {
    pub entries: Vec<AnnualMax>,
    /// Years dropped for insufficient coverage, with their coverage.
    pub excluded: Vec<(i32, f64)>,
}

impl AnnualMaxima {
    pub fn levels(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.level).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_levels(levels: &[f64]) -> Self {
        Self {
            entries: levels
                .iter()
                .enumerate()
                .map(|(i, &level)| AnnualMax {
                    year: i as i32,
                    level,
                    coverage: 1.0,
                })
                .collect(),
            excluded: Vec::new(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let entries = rdr.deserialize().collect::<std::result::Result<Vec<AnnualMax>, _>>()?;
        Ok(Self {
            entries,
            excluded: Vec::new(),
        })
    }
}

/// Per-year maximum over valid days; years below `min_coverage` are excluded.
pub fn annual_maxima(
    levels: &WaterLevelSeries,
    min_coverage: f64,
    convention: YearConvention,
) -> AnnualMaxima {
    let mut per_year: BTreeMap<i32, (f64, u32)> = BTreeMap::new();
    for &(date, level) in &levels.records {
        let year = convention.year_of(date);
        let slot = per_year.entry(year).or_insert((f64::NEG_INFINITY, 0));
        if let Some(v) = level {
            slot.0 = slot.0.max(v);
            slot.1 += 1;
        }
    }
    let mut out = AnnualMaxima::default();
    for (year, (max, valid)) in per_year {
        let coverage = (valid as f64 / convention.days_in(year) as f64).min(1.0);
        if valid == 0 || coverage < min_coverage {
            out.excluded.push((year, coverage));
        } else {
            out.entries.push(AnnualMax {
                year,
                level: max,
                coverage,
            });
        }
    }
    out
}
