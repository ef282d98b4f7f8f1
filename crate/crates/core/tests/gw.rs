use std::sync::Arc;

use randset::builtin;
use randset::gw::{
    growth_stats, mgf_bound, mgf_from_runs, normalized_means, offspring_from_rifs, simulate, simulate_many, tail_from_runs,
    tail_probability, ChernoffFit, OffspringDistribution, SimOptions,
};
use randset::regression::ols;
use randset::tree::Model;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn chi_square_p(observed: &[f64], expected: &[f64]) -> f64 {
    // Pool cells with small expectations into their neighbour.
    let (mut obs, mut exp) = (Vec::new(), Vec::new());
    let (mut o, mut e) = (0.0, 0.0);
    for (x, y) in observed.iter().zip(expected) {
        o += x;
        e += y;
        if e >= 5.0 {
            obs.push(o);
            exp.push(e);
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 {
        *obs.last_mut().unwrap() += o;
        *exp.last_mut().unwrap() += e;
    }
    let stat: f64 = obs.iter().zip(&exp).map(|(o, e)| (o - e).powi(2) / e).sum();
    1.0 - ChiSquared::new((obs.len() - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn percolation_offspring_is_binomial() {
    let trials = 4000;
    for p in [0.5, 0.8] {
        let rifs = Arc::new(builtin::mandelbrot(2, 2, p).unwrap());
        // Strictly between levels 1 and 2, so members are the kept children.
        let eps = 0.75 * rifs.diameter();
        for horizon in [0, 8] {
            let dist = offspring_from_rifs(&rifs, Model::Recursive, eps, trials, 11, horizon).unwrap();
            // A kept child also has to survive `horizon` further levels.
            let f = OffspringDistribution::binomial(4, p).unwrap();
            let q = (0..horizon).fold(0.0, |s, _| f.pgf(s));
            let want = OffspringDistribution::binomial(4, p * (1.0 - q)).unwrap();
            let n = trials as f64;
            let obs: Vec<f64> = (0..=4).map(|k| dist.probabilities().get(k).copied().unwrap_or(0.0) * n).collect();
            let exp: Vec<f64> = (0..=4).map(|k| want.probabilities().get(k).copied().unwrap_or(0.0) * n).collect();
            let pv = chi_square_p(&obs, &exp);
            assert!(pv > 0.01, "p = {p}, horizon {horizon}: p-value {pv}");
        }
    }
}

#[test]
fn example1_offspring_point_masses() {
    let rifs = Arc::new(builtin::example1(0.5).unwrap());
    // Above 1/2 both systems stop after one level.
    let d = offspring_from_rifs(&rifs, Model::Recursive, 0.6, 200, 1, 4).unwrap();
    assert_eq!(d.probabilities(), &[0.0, 0.0, 1.0]);
    // At exactly 1/3 the thirds tie and continue, like the halves.
    let d = offspring_from_rifs(&rifs, Model::Recursive, 1.0 / 3.0, 200, 1, 4).unwrap();
    assert_eq!(d.probabilities(), &[0.0, 0.0, 0.0, 0.0, 1.0]);
}

#[test]
fn cantor_offspring_point_mass() {
    let rifs = Arc::new(builtin::cantor());
    for k in 1..5 {
        let d = offspring_from_rifs(&rifs, Model::Recursive, 3f64.powi(-k) * 1.01, 10, 0, 2).unwrap();
        assert_eq!(d.max(), 1 << k);
        assert_eq!(d.probabilities()[1 << k], 1.0);
    }
}

#[test]
fn normalized_mean_is_one() {
    let dist = OffspringDistribution::binomial(4, 0.8).unwrap();
    let runs = simulate_many(&dist, 20, 10_000, 3, SimOptions::default()).unwrap();
    let means = normalized_means(&runs);
    let (m, se) = means[20];
    assert!((m - 1.0).abs() <= 3.0 * se, "{m} ± {se}");
    for (k, &(m, se)) in means.iter().enumerate().skip(1) {
        assert!((m - 1.0).abs() <= 4.0 * se, "k = {k}: {m} ± {se}");
    }
}

#[test]
fn tail_is_nonincreasing_after_three() {
    let dist = OffspringDistribution::binomial(4, 0.9).unwrap();
    let t = tail_probability(&dist, 12, 1.0, 0.2, 100_000, 5).unwrap();
    for w in t.windows(2).filter(|w| w[0].k >= 3) {
        assert!(w[1].ci_low <= w[0].ci_high, "{:?} then {:?}", w[0], w[1]);
    }
}

#[test]
fn point_mass_two_has_no_tail() {
    let t = tail_probability(&OffspringDistribution::point(2), 20, 1.0, 0.1, 100, 0).unwrap();
    assert!(t.iter().all(|e| e.probability == 0.0));
    let run = simulate(&OffspringDistribution::point(2), 20, 0, SimOptions::default()).unwrap();
    assert!(run.generations.iter().enumerate().all(|(k, &x)| x == 1 << k));
}

#[test]
fn chernoff_fit_dominates_and_sums() {
    let dist = OffspringDistribution::binomial(4, 0.8).unwrap();
    let runs = simulate_many(&dist, 15, 20_000, 9, SimOptions::default()).unwrap();
    let m = dist.mean();
    let (c, eps) = (1.0, 0.2);
    let fit = ChernoffFit::from_mgf(&mgf_from_runs(&runs, 0.5), c, m, eps);
    for t in tail_from_runs(&runs, c, eps) {
        assert!(t.probability <= fit.bound(t.k), "{t:?} above {}", fit.bound(t.k));
    }
    let first = fit.tail_sum_ratio(1);
    assert!(first.is_finite());
    for l in 1..=10 {
        assert!(fit.tail_sum_ratio(l) <= first * (1.0 + 1e-12));
    }
}

#[test]
fn small_theta_mgf_is_stable() {
    let dist = OffspringDistribution::binomial(4, 0.8).unwrap();
    let mgf = mgf_bound(&dist, 15, 0.05, 10_000, 2).unwrap();
    assert!(mgf.sup.is_finite());
    let k: Vec<f64> = (5..=15).map(|k| k as f64).collect();
    let y: Vec<f64> = (5..=15).map(|k| mgf.per_k[k]).collect();
    let f = ols(&k, &y).unwrap();
    assert!(f.slope <= 1.96 * f.stderr, "growth trend {} ± {}", f.slope, f.stderr);
}

#[test]
fn survival_matches_fixed_point() {
    for p in [0.5, 0.8] {
        let dist = OffspringDistribution::binomial(4, p).unwrap();
        let runs = simulate_many(&dist, 20, 10_000, 4, SimOptions::default()).unwrap();
        let freq = runs.iter().filter(|r| r.survived()).count() as f64 / runs.len() as f64;
        // Independent oracle: iterate the generating function from zero.
        let mut q = 0.0;
        for _ in 0..10_000 {
            q = (1.0 - p + p * q).powi(4);
        }
        assert!((freq - (1.0 - q)).abs() < 0.01, "p = {p}: {freq} vs {}", 1.0 - q);
        assert!((dist.extinction_probability() - q).abs() < 1e-10);
    }
}

#[test]
fn log_growth_approaches_log_mean() {
    let dist = OffspringDistribution::binomial(4, 0.8).unwrap();
    let runs = simulate_many(&dist, 20, 1000, 6, SimOptions::default()).unwrap();
    let g = growth_stats(&runs).unwrap();
    assert!(g.survivors > 900);
    assert!((g.mean_log_growth - dist.mean().ln()).abs() < 0.05, "{g:?}");
}
