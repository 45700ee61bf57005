//! Full-fidelity acceptance run over the shipped data set. Prints one
//! PASS/FAIL line per criterion and exits non-zero if any fail.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use elevate_cli::commands::{self, Ctx};
use elevate_cli::config::RunConfig;
use elevate_core::analysis::StrategyKind;
use elevate_core::discount::{simulate_rates, Ar3Kind, DiscountConvention, DiscountFactors, RatePath};
use elevate_core::exposure::{DamageModel, DepthDamageCurve, ElevationCostModel, House};
use elevate_core::hazard::GevParams;
use elevate_core::objectives::{ead, reliability, EadGrid};
use elevate_core::robustness::{pareto_front, Sense};
use elevate_core::rng;
use elevate_core::sensitivity::SobolIndices;
use elevate_core::sow::lhs_sample;
use rand::Rng;

struct Report {
    lines: Vec<(bool, String, String)>,
}

impl Report {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push((pass, name.into(), detail));
    }
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn cost(r: &mut Report) {
    let house = House::new(300_000.0, 1500.0, -4.0).unwrap();
    let (c, t) = timed(|| ElevationCostModel::default().cost(&house, 5.5).unwrap());
    r.check(
        "cost model exactness",
        c == 144_495.0 && (c - 145_000.0).abs() <= 1000.0 && t < Duration::from_secs(1),
        format!("cost(1500 sqft, 5.5 ft) = {c} in {t:?}"),
    );
}

fn discount(r: &mut Report, ctx: &mut Ctx) {
    let (table, t) = timed(|| commands::cmd_fit_discount(ctx).unwrap());
    let models = ctx.models().unwrap();
    let aic = |k: Ar3Kind| table.rows.iter().find(|x| x.kind == k).unwrap().aic;
    let (rw, mr, bt) = (aic(Ar3Kind::RandomWalk), aic(Ar3Kind::MeanReverting), aic(Ar3Kind::BackgroundTrend));
    let m = models.iter().find(|m| m.kind == Ar3Kind::BackgroundTrend).unwrap();
    let (se_eta, se_beta) = (m.stderrs.eta.unwrap(), m.stderrs.beta.unwrap());
    let eta_ok = (m.eta - 1.9289).abs() <= 2.0 * se_eta;
    let beta_ok = (m.beta + 0.0058).abs() <= 2.0 * se_beta;
    r.check(
        "discount-model selection",
        bt < rw && bt < mr && (rw - mr).abs() < 2.0 && eta_ok && beta_ok && t < Duration::from_secs(10),
        format!(
            "AIC RW {rw:.2} MR {mr:.2} BT {bt:.2}; eta {:.4} (se {se_eta:.4}), beta {:.5} (se {se_beta:.5}); {}",
            m.eta,
            m.beta,
            secs(t)
        ),
    );
}

fn hazard(r: &mut Report, ctx: &mut Ctx) {
    commands::cmd_ingest(ctx).unwrap();
    let (s, t) = timed(|| commands::cmd_fit_hazard(ctx).unwrap());
    let n = ctx.posterior().unwrap().len();
    let at = |p: f64| s.return_levels.iter().find(|x| x.return_period == p).unwrap();
    let (r100, r500) = (at(100.0), at(500.0));
    r.check(
        "hazard bias direction",
        r100.mean_level > r100.map_level && r500.mean_level > r500.map_level && n == 50_000 && t < Duration::from_secs(300),
        format!(
            "100-yr mean {:.2} vs MAP {:.2}; 500-yr mean {:.2} vs MAP {:.2}; {n} samples in {}",
            r100.mean_level,
            r100.map_level,
            r500.mean_level,
            r500.map_level,
            secs(t)
        ),
    );
}

fn sample_house(r: &mut Report, ctx: &mut Ctx) {
    let (a, t) = timed(|| commands::cmd_analyze(ctx, None).unwrap());
    let rep = &a.report;
    let zero = rep.strategy(StrategyKind::DoNothing);
    let fema = rep.strategy(StrategyKind::Fema);
    let opt = rep.strategy(StrategyKind::OptimalConsidering);
    let (bcr_opt, bcr_fema) = (opt.bcr.unwrap_or(f64::NAN), fema.bcr.unwrap_or(f64::NAN));
    let checks = [
        within(rep.h_opt_considering, 7.5, 10.0),
        within(opt.expected_total_ratio, 0.50, 0.70),
        within(zero.expected_total_ratio, 0.58, 0.78),
        zero.total_ratio_q05 <= 0.25 && zero.total_ratio_q95 >= 1.4,
        within(bcr_opt, 1.0, 1.35),
        within(bcr_fema, 0.9, 1.2),
        within(zero.reliability, 0.10, 0.22),
        within(fema.reliability, 0.50, 0.70),
        rep.h_opt_ignoring == 0.0,
        rep.n_sows == 10_000 && t < Duration::from_secs(600),
    ];
    r.check(
        "sample-house headline numbers",
        checks.iter().all(|&c| c),
        format!(
            "h_opt {:.2}; E[total]/V opt {:.3}, h=0 {:.3} [{:.2}, {:.2}]; BCR opt {bcr_opt:.3}, FEMA {bcr_fema:.3}; \
             reliability h=0 {:.3}, FEMA {:.3}; ignoring h_opt {}; {} SOWs in {}; checks {checks:?}",
            rep.h_opt_considering,
            opt.expected_total_ratio,
            zero.expected_total_ratio,
            zero.total_ratio_q05,
            zero.total_ratio_q95,
            zero.reliability,
            fema.reliability,
            rep.h_opt_ignoring,
            rep.n_sows,
            secs(t)
        ),
    );

    let (rob, _) = timed(|| commands::cmd_robustness(ctx).unwrap());
    let at_zero = rob.iter().find(|x| x.h == 0.0).unwrap().joint;
    let high: Vec<f64> = rob.iter().filter(|x| x.h >= 10.0 - 1e-9).map(|x| x.reliability).collect();
    let min_high = high.iter().copied().fold(f64::INFINITY, f64::min);
    r.check(
        "robustness",
        at_zero == 0.0
            && within(fema.joint_robustness, 0.07, 0.21)
            && within(opt.joint_robustness, 0.27, 0.47)
            && !high.is_empty()
            && min_high >= 0.8,
        format!(
            "joint h=0 {at_zero}, FEMA {:.3}, h_opt {:.3}; min reliability satisficing for h >= 10: {min_high:.3}",
            fema.joint_robustness, opt.joint_robustness
        ),
    );
}

fn sweep(r: &mut Report, ctx: &mut Ctx) {
    let (res, t) = timed(|| commands::cmd_sweep(ctx).unwrap());
    let s = res.summary;
    let recount_zero = res.rows.iter().filter(|x| x.h_opt_considering == 0.0).count() as f64 / res.rows.len() as f64;
    r.check(
        "exposure sweep",
        s.n_houses == 1000
            && within(s.share_opt_above_fema, 0.58, 0.78)
            && within(s.share_zero_optimal, 0.15, 0.31)
            && within(s.share_fema_passes_cb, 0.28, 0.48)
            && s.share_positive_opt_passing_cb == 1.0
            && recount_zero == s.share_zero_optimal
            && t < Duration::from_secs(3600),
        format!(
            "{} houses: optimum above FEMA {:.3}, zero optimum {:.3}, FEMA passes CB {:.3}, positive optima passing CB {:.3}; {}",
            s.n_houses,
            s.share_opt_above_fema,
            s.share_zero_optimal,
            s.share_fema_passes_cb,
            s.share_positive_opt_passing_cb,
            secs(t)
        ),
    );
}

fn top(idx: &SobolIndices) -> (&str, f64) {
    let (i, e) = idx
        .first
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.estimate.total_cmp(&b.1.estimate))
        .unwrap();
    (idx.factors[i].as_str(), e.estimate)
}

fn sensitivity(r: &mut Report, ctx: &mut Ctx) {
    let (check, _) = timed(|| commands::cmd_ishigami(ctx).unwrap());
    // S1, S2, S3 and ST1
    let err = (0..4).map(|i| (check.estimated[i] - check.analytic[i]).abs()).fold(0.0, f64::max);
    r.check(
        "sensitivity: Ishigami oracle",
        check.n == 1 << 14 && err <= 0.02,
        format!("n = {}, max |error| over S1, S2, S3, ST1 = {err:.4}", check.n),
    );

    let (runs, t) = timed(|| commands::cmd_sensitivity(ctx, None).unwrap());
    let runs: BTreeMap<String, SobolIndices> = runs.into_iter().collect();
    let ml = &runs["most_likely"];
    let (name, s1) = top(ml);
    r.check("sensitivity: xi leads first order", name == "xi", format!("top first-order factor {name} ({s1:.3})"));

    let hazard = |j: usize| j < 3;
    let (mut hz, mut other) = (0.0, 0.0);
    let mut largest = &ml.second[0];
    for s in &ml.second {
        let v = s.index.estimate.max(0.0);
        if hazard(s.j) && hazard(s.k) {
            hz += v;
        } else {
            other += v;
        }
        if s.index.estimate > largest.index.estimate {
            largest = s;
        }
    }
    let n_sig = ml.second.iter().filter(|s| s.index.significant).count();
    r.check(
        "sensitivity: hazard-parameter pairs dominate second order",
        hz > other && hazard(largest.j) && hazard(largest.k),
        format!(
            "S2 sum over (mu, sigma, xi) pairs {hz:.3} vs other pairs {other:.3}; largest pair ({}, {}) = {:.3}; {n_sig} of {} pairs significant",
            ml.factors[largest.j],
            ml.factors[largest.k],
            largest.index.estimate,
            ml.second.len()
        ),
    );

    let (name, s1) = top(&runs["fixed_rate"]);
    r.check(
        "sensitivity: fixed rate promotes the discount rate",
        name == "discount_rate",
        format!("top first-order factor {name} ({s1:.3}); both variants in {}", secs(t)),
    );
}

fn properties(r: &mut Report, ctx: &Ctx) {
    // EAD trapezoid against direct sampling over the same exceedance band
    let p = GevParams::new(19.5, 3.3, 0.0).unwrap();
    let bfe = p.return_level(100.0).unwrap();
    let curve = DepthDamageCurve::builtin(DamageModel::Hazus);
    let house = House::new(300_000.0, 1500.0, -4.0).unwrap();
    let trap = ead(&p, bfe, &curve, 0.0, &house, 0.0, &EadGrid::default());
    let mut g = rng::stream(101, 0, 0);
    let n = 1_000_000;
    let mut acc = 0.0;
    for _ in 0..n {
        let u: f64 = g.random();
        if (1.0 - 1.0 / 1.001..=1.0 - 1e-4).contains(&u) {
            acc += curve.damage_fraction(p.quantile(u).unwrap() - bfe + 4.0, 0.0);
        }
    }
    let mc = house.value * acc / n as f64;
    let ead_ok = (trap - mc).abs() / mc < 0.02;

    let rel = reliability(&p, bfe, &house, 5.5, 30);
    let trials = 40_000;
    let dry = (0..trials).filter(|_| (0..30).all(|_| p.sample(&mut g) <= bfe - 4.0 + 5.5)).count() as f64 / trials as f64;
    let se = (rel * (1.0 - rel) / trials as f64).sqrt();
    let rel_ok = (dry - rel).abs() < 3.0 * se;

    let lhs_ok = (1..=4).all(|k| {
        let n = 97;
        let s = lhs_sample(k, n, &mut g);
        (0..k).all(|j| {
            let mut bins: Vec<usize> = s.iter().map(|row| (row[j] * n as f64) as usize).collect();
            bins.sort();
            bins == (0..n).collect::<Vec<_>>()
        })
    });

    let pts: Vec<Vec<f64>> = (0..300).map(|_| (0..3).map(|_| g.random_range(0..15) as f64).collect()).collect();
    let senses = [Sense::Minimize, Sense::Maximize, Sense::Minimize];
    let sign = [1.0, -1.0, 1.0];
    let weakly = |a: &[f64], b: &[f64]| (0..3).all(|k| sign[k] * a[k] <= sign[k] * b[k]) && a != b;
    let oracle: Vec<usize> = (0..pts.len()).filter(|&i| !pts.iter().any(|q| weakly(q, &pts[i]))).collect();
    let mut front = pareto_front(&pts, &senses).unwrap();
    front.sort();
    let pareto_ok = front == oracle;

    let mut jensen_ok = true;
    for m in ctx.models().unwrap() {
        let paths = simulate_rates(&m, 100, 500, 3).unwrap();
        let mean = RatePath {
            rates: (0..100).map(|t| paths.iter().map(|x| x.rates[t]).sum::<f64>() / paths.len() as f64).collect(),
        };
        let f0 = DiscountFactors::stochastic(&mean, DiscountConvention::FromYearZero);
        let fs: Vec<_> = paths.iter().map(|x| DiscountFactors::stochastic(x, DiscountConvention::FromYearZero)).collect();
        for t in 0..f0.len() {
            let avg = fs.iter().map(|f| f.f[t]).sum::<f64>() / fs.len() as f64;
            jensen_ok &= avg >= f0.f[t] * (1.0 - 1e-12);
        }
    }

    let determinism_ok = determinism();
    r.check(
        "property suites",
        ead_ok && rel_ok && lhs_ok && pareto_ok && jensen_ok && determinism_ok,
        format!(
            "EAD trapezoid {trap:.1} vs sampled {mc:.1}; reliability {rel:.4} vs simulated {dry:.4} (se {se:.4}); \
             LHS {lhs_ok}; Pareto {pareto_ok}; Jensen {jensen_ok}; byte-identical reruns {determinism_ok}"
        ),
    );
}

/// Runs `elevate all` twice on a reduced config and compares every artifact.
fn determinism() -> bool {
    let runs: Vec<BTreeMap<PathBuf, Vec<u8>>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let cfg = dir.path().join("run.toml");
            let root = root();
            std::fs::write(
                &cfg,
                format!(
                    "output_dir = \"out\"\n[data]\ngage = \"{r}/data/usgs_01554000_daily.rdb\"\nrating = \"{r}/data/rating_curve.csv\"\n\
                     discount = \"{r}/data/discount_rates.csv\"\ndamage_manifest = \"{r}/data/damage/manifest.json\"\n\
                     [hazard]\nn_samples = 3000\nburn_in = 1000\n[sow]\nn = 200\n[sweep]\nn_houses = 30\nn_sows = 100\n\
                     [sensitivity]\nn = 128\nresamples = 100\npath_bank = 50\nishigami_n = 1024\n",
                    r = root.display()
                ),
            )
            .unwrap();
            let o = Command::new(env!("CARGO_BIN_EXE_elevate")).arg("-c").arg(&cfg).arg("all").output().unwrap();
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            let mut files = BTreeMap::new();
            let mut stack = vec![dir.path().join("out")];
            while let Some(d) = stack.pop() {
                for e in std::fs::read_dir(&d).unwrap() {
                    let p = e.unwrap().path();
                    if p.is_dir() {
                        stack.push(p);
                    } else if p.file_name().unwrap() != "manifest.json" {
                        files.insert(p.strip_prefix(dir.path()).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
                    }
                }
            }
            files
        })
        .collect();
    runs[0].len() > 30 && runs[0] == runs[1]
}

fn main() {
    // `cargo test -- --list` and filters from other targets should not trigger a full run
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }

    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::load(&root().join("config/run.toml")).unwrap();
    cfg.output_dir = dir.path().to_path_buf();
    let mut ctx = Ctx::new(cfg).unwrap();
    let mut r = Report { lines: Vec::new() };
    let (_, total) = timed(|| {
        cost(&mut r);
        discount(&mut r, &mut ctx);
        hazard(&mut r, &mut ctx);
        sample_house(&mut r, &mut ctx);
        sweep(&mut r, &mut ctx);
        sensitivity(&mut r, &mut ctx);
        properties(&mut r, &ctx);
    });

    let failed: Vec<&str> = r.lines.iter().filter(|l| !l.0).map(|l| l.1.as_str()).collect();
    println!(
        "acceptance: {} passed, {} failed ({} total)",
        r.lines.len() - failed.len(),
        failed.len(),
        secs(total)
    );
    if !failed.is_empty() {
        println!("failed: {}", failed.join("; "));
        std::process::exit(1);
    }
}
