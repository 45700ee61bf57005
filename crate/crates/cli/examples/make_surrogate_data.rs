//! Writes a synthetic input data set with the layout of the real one:
//! a USGS-style daily discharge file, a rating curve, an annual discount
//! rate series and the depth-damage tables.
//!
//! The discount series is drawn from a background-trend AR(3) process; the
//! seed search keeps the first draw whose refit ranks the models the way the
//! historical record does.

use std::path::PathBuf;

use anyhow::{bail, Result};
use chrono::{Datelike, NaiveDate};
use clap::Parser;
use elevate_core::discount::{model_selection_table, Ar3Kind, DiscountSeries};
use elevate_core::exposure::{CurveManifest, CurveManifestEntry, DamageModel, DepthDamageCurve};
use elevate_core::hazard::GevParams;
use elevate_core::hydro::{write_usgs_rdb, DailyDischarge, DischargeSeries};
use elevate_core::rng;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "data")]
    out: PathBuf,
    #[arg(long, default_value_t = 19.5)]
    mu: f64,
    #[arg(long, default_value_t = 3.3)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    xi: f64,
    #[arg(long, default_value_t = 1)]
    gage_seed: u64,
    #[arg(long, default_value_t = 1)]
    discount_seed: u64,
}

const GAGE: &str = "01554000";
const GAGE_DOMAIN: u64 = 0x4741_4745;
const RATE_DOMAIN: u64 = 0x4849_5354;

// stage = S0 + A (Q / Q_REF)^B
const S0: f64 = 3.0;
const A: f64 = 21.0;
const Q_REF: f64 = 250_000.0;
const B: f64 = 0.55;

fn stage(q: f64) -> f64 {
    S0 + A * (q / Q_REF).powf(B)
}

fn discharge(s: f64) -> f64 {
    Q_REF * ((s - S0).max(0.0) / A).powf(1.0 / B)
}

fn rating_csv() -> String {
    let mut out = String::from("discharge,stage\n");
    let mut q = 0.0;
    while q <= 1_500_000.0 {
        out.push_str(&format!("{q},{:.4}\n", stage(q)));
        q += if q < 50_000.0 { 2_500.0 } else if q < 400_000.0 { 10_000.0 } else { 50_000.0 };
    }
    out
}

fn gage_series(gev: &GevParams, seed: u64) -> Result<DischargeSeries> {
    let mut r = rng::stream(seed, GAGE_DOMAIN, 0);
    let base = LogNormal::new(8.6, 0.7)?;
    // record starts in autumn, so the first calendar year is incomplete
    let start = NaiveDate::from_ymd_opt(1936, 10, 1).unwrap();
    let end = NaiveDate::from_ymd_opt(2019, 12, 31).unwrap();
    let mut records = Vec::new();
    let mut year = start.year();
    let mut year_days: Vec<DailyDischarge> = Vec::new();
    let mut flush = |days: &mut Vec<DailyDischarge>, r: &mut rand_chacha::ChaCha8Rng| {
        let peak_level = gev.sample(r).max(S0 + 0.5);
        let q_peak = discharge(peak_level);
        let peak_day = r.random_range(0..days.len());
        for (i, d) in days.iter_mut().enumerate() {
            if i == peak_day {
                d.discharge = Some(q_peak.round());
            } else if let Some(q) = d.discharge {
                d.discharge = Some(q.min(0.8 * q_peak).round());
            }
        }
        records.append(days);
    };
    let mut date = start;
    while date <= end {
        if date.year() != year {
            flush(&mut year_days, &mut r);
            year = date.year();
        }
        // scattered ice days outside the peak season
        let gap = matches!(date.month(), 1 | 2) && r.random::<f64>() < 0.01;
        year_days.push(DailyDischarge {
            date,
            discharge: (!gap).then(|| base.sample(&mut r)),
            qualifier: if gap { "Ice".into() } else { "A".into() },
        });
        date = date.succ_opt().unwrap();
    }
    flush(&mut year_days, &mut r);
    Ok(DischargeSeries::new(GAGE, records)?)
}

fn discount_series(seed: u64) -> Result<DiscountSeries> {
    let (eta, beta, rho, sigma2) = (1.9289, -0.0058, [1.6965, -0.9755, 0.2388], 0.0033_f64);
    let mut r = rng::stream(seed, RATE_DOMAIN, 0);
    let mean = |t: f64| eta + beta * t;
    let burn = 200usize;
    let mut x: Vec<f64> = (0..3).map(|i| mean(i as f64 - burn as f64 - 3.0)).collect();
    let mut out = Vec::new();
    for k in 0..burn + 219 {
        let t = k as f64 - burn as f64;
        let mut v = mean(t);
        for i in 0..3 {
            v += rho[i] * (x[x.len() - 1 - i] - mean(t - (i + 1) as f64));
        }
        let z: f64 = r.sample(StandardNormal);
        x.push(v + sigma2.sqrt() * z);
        if k >= burn {
            out.push((1800 + (k - burn) as i32, (x[x.len() - 1].exp() * 1e4).round() / 1e4));
        }
    }
    Ok(DiscountSeries::new(out, "synthetic")?)
}

fn discount_ok(series: &DiscountSeries) -> Result<bool> {
    let (models, table) = model_selection_table(series)?;
    let aic = |k| table.row(k).unwrap().aic;
    let bt = models.iter().find(|m| m.kind == Ar3Kind::BackgroundTrend).unwrap();
    let (eta_se, beta_se) = (bt.stderrs.eta.unwrap(), bt.stderrs.beta.unwrap());
    // the last five years sit near the trend level
    let n = series.len();
    let tail: f64 = series.entries[n - 5..].iter().map(|(_, r)| r.ln()).sum::<f64>() / 5.0;
    let trend = 1.9289 - 0.0058 * (n - 3) as f64;
    Ok(table.best_aic == Ar3Kind::BackgroundTrend
        && (tail - trend).abs() < 0.1
        && (aic(Ar3Kind::RandomWalk) - aic(Ar3Kind::MeanReverting)).abs() < 2.0
        && (bt.eta - 1.9289).abs() < 2.0 * eta_se
        && (bt.beta + 0.0058).abs() < 2.0 * beta_se)
}

fn main() -> Result<()> {
    let a = Args::parse();
    std::fs::create_dir_all(a.out.join("damage"))?;
    let gev = GevParams::new(a.mu, a.sigma, a.xi)?;
    let gage = gage_series(&gev, a.gage_seed)?;
    std::fs::write(a.out.join(format!("usgs_{GAGE}_daily.rdb")), write_usgs_rdb(&gage))?;
    std::fs::write(a.out.join("rating_curve.csv"), rating_csv())?;

    let mut seed = a.discount_seed;
    let series = loop {
        let s = discount_series(seed)?;
        if discount_ok(&s)? {
            break s;
        }
        seed += 1;
        if seed > a.discount_seed + 10_000 {
            bail!("no discount seed satisfied the ranking constraints");
        }
    };
    let mut csv = String::from("year,rate_percent\n");
    for (y, r) in &series.entries {
        csv.push_str(&format!("{y},{r}\n"));
    }
    std::fs::write(a.out.join("discount_rates.csv"), csv)?;

    let mut curves = Vec::new();
    for m in DamageModel::ALL {
        let file = format!("{}.csv", m.name());
        DepthDamageCurve::builtin(m).write_csv(&a.out.join("damage").join(&file))?;
        curves.push(CurveManifestEntry {
            model_id: m,
            file: file.into(),
            source: format!("{m} depth-damage table, 1-ft knots"),
            error_halfwidth: 0.30,
        });
    }
    std::fs::write(
        a.out.join("damage/manifest.json"),
        serde_json::to_string_pretty(&CurveManifest { curves })? + "\n",
    )?;
    println!("discount seed {seed}");
    Ok(())
}
