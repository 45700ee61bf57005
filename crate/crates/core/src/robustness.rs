//! Satisficing robustness and Pareto trade-offs across heightening policies.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::objectives::{ObjectiveSurface, PolicyOutcome};

/// Closed interval; `max = None` means unbounded above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub min: f64,
    pub max: Option<f64>,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && self.max.is_none_or(|m| x <= m)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.min.is_nan() || self.max.is_some_and(|m| !(m >= self.min)) {
            return domain(format!("acceptable range for {name} is empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcceptableRanges {
    pub bcr: Interval,
    pub total_cost_ratio: Interval,
    pub reliability: Interval,
    /// Count BCR as failing when nothing is invested (h = 0).
    pub bcr_fails_without_investment: bool,
}

impl Default for AcceptableRanges {
    fn default() -> Self {
        Self {
            bcr: Interval { min: 1.0, max: None },
            total_cost_ratio: Interval { min: 0.0, max: Some(0.75) },
            reliability: Interval { min: 0.5, max: Some(1.0) },
            bcr_fails_without_investment: true,
        }
    }
}

impl AcceptableRanges {
    pub fn validate(&self) -> Result<()> {
        self.bcr.validate("bcr")?;
        self.total_cost_ratio.validate("total cost ratio")?;
        self.reliability.validate("reliability")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessResult {
    pub h: f64,
    pub bcr: f64,
    pub total_cost: f64,
    pub reliability: f64,
    pub joint: f64,
}

/// Fraction of SOWs meeting each acceptable range, and all of them at once.
pub fn domain_measure(policy: &PolicyOutcome, value: f64, ranges: &AcceptableRanges) -> Result<RobustnessResult> {
    let n = policy.led.len();
    if n == 0 {
        return domain("domain measure over an empty ensemble");
    }
    let (mut nb, mut nc, mut nr, mut nj) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..n {
        let b = match &policy.bcr {
            Some(v) => ranges.bcr.contains(v[i]),
            None => !ranges.bcr_fails_without_investment,
        };
        let c = ranges.total_cost_ratio.contains((policy.upfront + policy.led[i]) / value);
        let r = ranges.reliability.contains(policy.reliability[i]);
        nb += b as usize;
        nc += c as usize;
        nr += r as usize;
        nj += (b && c && r) as usize;
    }
    let f = |k: usize| k as f64 / n as f64;
    Ok(RobustnessResult {
        h: policy.h,
        bcr: f(nb),
        total_cost: f(nc),
        reliability: f(nr),
        joint: f(nj),
    })
}

pub fn robustness_curve(surface: &ObjectiveSurface, ranges: &AcceptableRanges) -> Result<Vec<RobustnessResult>> {
    ranges.validate()?;
    surface
        .policies
        .iter()
        .map(|p| domain_measure(p, surface.house.value, ranges))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimize,
    Maximize,
}

/// `a` is at least as good everywhere and strictly better somewhere.
fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        strict |= x < y;
    }
    strict
}

/// Indices of the nondominated points, ordered by the first objective
/// (ties by input position).
pub fn pareto_front(points: &[Vec<f64>], senses: &[Sense]) -> Result<Vec<usize>> {
    if points.is_empty() {
        return domain("pareto front of an empty set");
    }
    if points.iter().any(|p| p.len() != senses.len()) {
        return domain("points and senses disagree on dimensionality");
    }
    if points.iter().flatten().any(|x| x.is_nan()) {
        return domain("objective values must not be NaN");
    }
    let norm: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            p.iter()
                .zip(senses)
                .map(|(x, s)| if *s == Sense::Maximize { -x } else { *x })
                .collect()
        })
        .collect();
    let lex = |a: &Vec<f64>, b: &Vec<f64>| -> Ordering {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    };
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| lex(&norm[i], &norm[j]).then(i.cmp(&j)));
    // a dominator always sorts lexicographically earlier, and dominance is
    // transitive, so checking against the current front suffices
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        if !front.iter().any(|&f| dominates(&norm[f], &norm[i])) {
            front.push(i);
        }
    }
    front.sort_by(|&i, &j| points[i][0].total_cmp(&points[j][0]).then(i.cmp(&j)));
    Ok(front)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub h: f64,
    pub upfront: f64,
    pub upfront_ratio: f64,
    pub reliability: f64,
    pub expected_damages: f64,
    pub bcr: Option<f64>,
    pub passes_cb_test: bool,
    pub joint_robustness: f64,
    pub on_front: bool,
}

/// One row per heightening; the front is taken over (upfront cost min,
/// expected reliability max).
pub fn tradeoff_export(surface: &ObjectiveSurface, robustness: &[RobustnessResult]) -> Result<Vec<TradeoffRow>> {
    if robustness.len() != surface.policies.len() {
        return domain("robustness rows do not match the surface");
    }
    let pts: Vec<Vec<f64>> = surface
        .policies
        .iter()
        .map(|p| vec![p.upfront, p.mean_reliability()])
        .collect();
    let front = pareto_front(&pts, &[Sense::Minimize, Sense::Maximize])?;
    Ok(surface
        .policies
        .iter()
        .zip(robustness)
        .enumerate()
        .map(|(i, (p, r))| {
            let bcr = p.mean_bcr();
            TradeoffRow {
                h: p.h,
                upfront: p.upfront,
                upfront_ratio: p.upfront_ratio,
                reliability: p.mean_reliability(),
                expected_damages: p.mean_led(),
                bcr,
                passes_cb_test: bcr.is_some_and(|b| b >= 1.0),
                joint_robustness: r.joint,
                on_front: front.contains(&i),
            }
        })
        .collect())
}

pub fn write_robustness_csv(rows: &[RobustnessResult], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tradeoff_csv(rows: &[TradeoffRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
