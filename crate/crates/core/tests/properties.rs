use elevate_core::discount::{model_selection_table, simulate_rates, DiscountConvention, DiscountFactors, DiscountSeries, RatePath};
use elevate_core::exposure::{DamageModel, DepthDamageCurve, ElevationCostModel, House};
use elevate_core::hazard::GevParams;
use elevate_core::hydro::{RatingCurve, RatingInterpolation};
use elevate_core::objectives::{ead, reliability, EadGrid};
use elevate_core::robustness::{pareto_front, Sense};
use elevate_core::rng;
use elevate_core::sow::lhs_sample;
use proptest::prelude::*;
use rand::Rng;

fn gev() -> impl Strategy<Value = GevParams> {
    (0.0..40.0f64, 0.5..6.0f64, -0.3..0.4f64).prop_map(|(m, s, x)| GevParams::new(m, s, x).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rating_curve_is_monotone(steps in prop::collection::vec((1.0..5000.0f64, 0.01..3.0f64), 2..30),
                                qs in prop::collection::vec(0.0..200_000.0f64, 2..50),
                                log in any::<bool>()) {
        let mut pts = vec![(100.0, 1.0)];
        for (dq, ds) in steps {
            let (q, s) = *pts.last().unwrap();
            pts.push((q + dq, s + ds));
        }
        let mode = if log { RatingInterpolation::LogDischarge } else { RatingInterpolation::Linear };
        let curve = RatingCurve::new(&pts, mode).unwrap();
        let mut qs = qs;
        qs.sort_by(f64::total_cmp);
        let stages: Vec<f64> = qs.iter().map(|&q| curve.discharge_to_stage(q).unwrap().stage).collect();
        for w in stages.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9, "{stages:?}");
        }
    }

    #[test]
    fn gev_cdf_is_monotone_and_inverts_quantile(p in gev(), xs in prop::collection::vec(-20.0..120.0f64, 2..40), q in 0.001..0.999f64) {
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        let c: Vec<f64> = xs.iter().map(|&x| p.cdf(x)).collect();
        for w in c.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        prop_assert!(c.iter().all(|v| (0.0..=1.0).contains(v)));
        let z = p.quantile(q).unwrap();
        prop_assert!((p.cdf(z) - q).abs() < 1e-9);
    }

    #[test]
    fn damage_fraction_stays_in_unit_interval(depth in -30.0..60.0f64, u in -1.0..1.0f64, jrc in any::<bool>()) {
        let model = if jrc { DamageModel::Jrc } else { DamageModel::Hazus };
        let c = DepthDamageCurve::builtin(model);
        let err = u * c.error_halfwidth;
        let d = c.damage_fraction(depth, err);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!(c.damage_fraction(depth + 0.5, err) >= d);
        if depth < 0.0 {
            prop_assert_eq!(d, 0.0);
        }
    }

    #[test]
    fn elevation_cost_is_monotone(size in 100.0..5000.0f64, extra in 0.0..2000.0f64, i in 0usize..111, j in 0usize..111) {
        let m = ElevationCostModel::default();
        let grid: Vec<f64> = (0..=110).map(|k| 3.0 + 0.1 * k as f64).collect();
        let (a, b) = (grid[i.min(j)], grid[i.max(j)]);
        let house = House::new(1e5, size, 0.0).unwrap();
        let bigger = House::new(1e5, size + extra, 0.0).unwrap();
        prop_assert!(m.cost(&house, b).unwrap() >= m.cost(&house, a).unwrap());
        prop_assert!(m.cost(&bigger, a).unwrap() >= m.cost(&house, a).unwrap());
        prop_assert_eq!(m.cost(&house, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn pareto_front_matches_quadratic_oracle(pts in prop::collection::vec(prop::collection::vec(0u8..12, 3), 1..60),
                                             senses in prop::collection::vec(any::<bool>(), 3)) {
        let points: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|&x| x as f64).collect()).collect();
        let senses: Vec<Sense> = senses.iter().map(|&b| if b { Sense::Maximize } else { Sense::Minimize }).collect();
        let better = |a: f64, b: f64, s: Sense| if s == Sense::Minimize { a < b } else { a > b };
        let worse = |a: f64, b: f64, s: Sense| if s == Sense::Minimize { a > b } else { a < b };
        let dominated = |i: usize| {
            (0..points.len()).any(|j| {
                (0..3).all(|k| !worse(points[j][k], points[i][k], senses[k]))
                    && (0..3).any(|k| better(points[j][k], points[i][k], senses[k]))
            })
        };
        let mut oracle: Vec<usize> = (0..points.len()).filter(|&i| !dominated(i)).collect();
        let mut front = pareto_front(&points, &senses).unwrap();
        for w in front.windows(2) {
            prop_assert!(points[w[0]][0] <= points[w[1]][0]);
        }
        front.sort();
        oracle.sort();
        prop_assert_eq!(front, oracle);
    }

    #[test]
    fn lhs_is_exactly_stratified(k in 1usize..7, n in 1usize..300, seed in any::<u64>()) {
        let mut r = rng::stream(seed, 1, 0);
        let s = lhs_sample(k, n, &mut r);
        prop_assert_eq!(s.len(), n);
        for j in 0..k {
            let mut hits = vec![0usize; n];
            for row in &s {
                prop_assert!((0.0..1.0).contains(&row[j]));
                hits[(row[j] * n as f64).floor() as usize] += 1;
            }
            prop_assert!(hits.iter().all(|&h| h == 1));
        }
    }
}

fn shipped_models() -> Vec<elevate_core::discount::Ar3Model> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/discount_rates.csv");
    model_selection_table(&DiscountSeries::from_csv(&path).unwrap()).unwrap().0
}

#[test]
fn discount_factors_satisfy_jensen_on_every_ensemble() {
    for model in shipped_models() {
        for seed in 0..5u64 {
            let paths = simulate_rates(&model, 120, 400, seed).unwrap();
            let n = paths.len() as f64;
            let mean_rate = RatePath {
                rates: (0..120).map(|t| paths.iter().map(|p| p.rates[t]).sum::<f64>() / n).collect(),
            };
            for conv in [DiscountConvention::FromYearZero, DiscountConvention::FirstYearUndiscounted] {
                let at_mean = DiscountFactors::stochastic(&mean_rate, conv);
                let factors: Vec<DiscountFactors> = paths.iter().map(|p| DiscountFactors::stochastic(p, conv)).collect();
                for t in 0..at_mean.len() {
                    let mean_f = factors.iter().map(|f| f.f[t]).sum::<f64>() / n;
                    assert!(mean_f >= at_mean.f[t] * (1.0 - 1e-12), "{} seed {seed} t {t}", model.kind);
                }
            }
        }
    }
}

#[test]
fn ead_trapezoid_matches_monte_carlo() {
    let grid = EadGrid::default();
    let cases = [
        (GevParams::new(19.5, 3.3, 0.0).unwrap(), -4.0, 0.0, DamageModel::Hazus, 0.0),
        (GevParams::new(19.5, 3.3, 0.1).unwrap(), -8.0, 0.0, DamageModel::Jrc, 0.2),
        (GevParams::new(10.0, 2.0, -0.1).unwrap(), -2.0, 0.0, DamageModel::Hazus, -0.25),
        (GevParams::new(19.5, 3.3, 0.0).unwrap(), -4.0, 3.0, DamageModel::Jrc, 0.0),
    ];
    for (k, (p, floor, h, model, err)) in cases.into_iter().enumerate() {
        let curve = DepthDamageCurve::builtin(model);
        let bfe = p.return_level(100.0).unwrap();
        let house = House::new(250_000.0, 1500.0, floor).unwrap();
        let trap = ead(&p, bfe, &curve, err, &house, h, &grid);
        let mut r = rng::stream(42, 2, k as u64);
        let n = 1_000_000;
        let mut sum = 0.0;
        // same exceedance band as the grid: 1/10000 up to 1/1.001
        let (lo, hi) = (1.0 - 1.0 / 1.001, 1.0 - 1e-4);
        for _ in 0..n {
            let u: f64 = r.random();
            if u < lo || u > hi {
                continue;
            }
            sum += curve.damage_fraction(p.quantile(u).unwrap() - bfe - floor - h, err);
        }
        let mc = house.value * sum / n as f64;
        assert!((trap - mc).abs() / mc < 0.02, "case {k}: trapezoid {trap} vs Monte Carlo {mc}");
    }
}

#[test]
fn reliability_matches_simulation() {
    let p = GevParams::new(19.5, 3.3, 0.05).unwrap();
    let bfe = p.return_level(100.0).unwrap();
    for (k, (floor, h, n)) in [(-4.0, 0.0, 30u32), (-4.0, 5.5, 65), (-1.0, 3.0, 100), (-8.0, 0.0, 10)].into_iter().enumerate() {
        let house = House::new(1e5, 1000.0, floor).unwrap();
        let exact = reliability(&p, bfe, &house, h, n);
        let mut r = rng::stream(7, 3, k as u64);
        let trials = 40_000;
        let dry = (0..trials)
            .filter(|_| (0..n).all(|_| p.sample(&mut r) <= bfe + floor + h))
            .count();
        let est = dry as f64 / trials as f64;
        let se = (exact * (1.0 - exact) / trials as f64).sqrt().max(1e-6);
        assert!((est - exact).abs() < 3.0 * se, "case {k}: power formula {exact} vs simulated {est} (se {se})");
    }
}

#[test]
fn power_formula_is_cdf_to_the_lifetime() {
    let p = GevParams::new(5.0, 1.0, 0.1).unwrap();
    let house = House::new(1e5, 1000.0, -1.0).unwrap();
    let bfe = p.return_level(100.0).unwrap();
    let mut r = rng::stream(1, 9, 0);
    for _ in 0..50 {
        let n: u32 = r.random_range(1..150);
        let h: f64 = r.random_range(0.0..10.0);
        let expect = p.cdf(bfe - 1.0 + h).powi(n as i32);
        assert!((reliability(&p, bfe, &house, h, n) - expect).abs() < 1e-12);
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn same_seed_gives_identical_chains_ensembles_and_designs() {
    use elevate_core::hazard::{mcmc_sample, McmcConfig, PriorSpec};
    use elevate_core::sensitivity::{SaltelliDesign, Sampler};
    use elevate_core::sow::{generate_sows, SowSpec};

    let truth = GevParams::new(19.5, 3.3, 0.0).unwrap();
    let mut r = rng::stream(3, 4, 0);
    let data: Vec<f64> = (0..80).map(|_| truth.sample(&mut r)).collect();
    let cfg = McmcConfig { n_samples: 3000, burn_in: 1000, init: GevParams::new(18.0, 3.0, 0.05).unwrap(), seed: 11 };
    let chain = |t| in_pool(t, || mcmc_sample(&data, &PriorSpec::default(), &cfg).unwrap());
    let (a, b) = (chain(1), chain(4));
    assert_eq!(a, b);
    let other = mcmc_sample(&data, &PriorSpec::default(), &McmcConfig { seed: 12, ..cfg }).unwrap();
    assert_ne!(a.samples, other.samples);

    let models = shipped_models();
    let spec = SowSpec { n: 500, seed: 5, ..SowSpec::default() };
    let e1 = in_pool(1, || generate_sows(&a, &models, &spec).unwrap());
    let e2 = in_pool(4, || generate_sows(&a, &models, &spec).unwrap());
    assert_eq!(e1, e2);
    let e3 = generate_sows(&a, &models, &SowSpec { seed: 6, ..spec }).unwrap();
    assert_ne!(e1.sows, e3.sows);

    for sampler in [Sampler::LatinHypercube, Sampler::PseudoRandom] {
        let d1 = in_pool(1, || SaltelliDesign::new(5, 256, sampler, 8).unwrap().points());
        let d2 = in_pool(4, || SaltelliDesign::new(5, 256, sampler, 8).unwrap().points());
        assert_eq!(d1, d2);
        assert_ne!(d1, SaltelliDesign::new(5, 256, sampler, 9).unwrap().points());
    }
}
