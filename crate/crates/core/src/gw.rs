//! Galton-Watson processes with ε-coding offspring counts.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::Serialize;

use crate::coding::{count_epsilon_codings, required_depth};
use crate::error::{Error, Result};
use crate::hash::substream;
use crate::parallel::{map_indexed, try_map_indexed};
use crate::rifs::Rifs;
use crate::tree::{Model, Realisation};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Populations stay below this so that sums cannot overflow.
const POPULATION_LIMIT: u64 = 1 << 63;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic(String),
    Empirical { trials: usize },
}

/// Law of the offspring count on `0..=M`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OffspringDistribution {
    probabilities: Vec<f64>,
    provenance: Provenance,
}

impl OffspringDistribution {
    pub fn new(probabilities: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if probabilities.is_empty() || probabilities.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Argument("offspring probabilities must be in [0, 1]".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Argument(format!("offspring probabilities sum to {total}, not 1")));
        }
        let mut probabilities = probabilities;
        while probabilities.len() > 1 && probabilities.last() == Some(&0.0) {
            probabilities.pop();
        }
        Ok(Self {
            probabilities,
            provenance,
        })
    }

    pub fn binomial(n: u32, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Argument(format!("binomial p = {p} outside [0, 1]")));
        }
        let mut probs = Vec::with_capacity(n as usize + 1);
        let mut c = 1.0f64;
        for k in 0..=n {
            probs.push(c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32));
            c = c * (n - k) as f64 / (k + 1) as f64;
        }
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|q| *q /= total);
        Self::new(probs, Provenance::Analytic(format!("binomial({n},{p})")))
    }

    pub fn point(k: usize) -> Self {
        let mut probs = vec![0.0; k + 1];
        probs[k] = 1.0;
        Self {
            probabilities: probs,
            provenance: Provenance::Analytic(format!("point({k})")),
        }
    }

    /// Parses `binomial(n,p)`, `point(k)` or `table(p0,p1,...)`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let bad = || Error::config("offspring", format!("cannot parse offspring law {spec:?}"));
        let (name, rest) = spec.split_once('(').ok_or_else(bad)?;
        let args: Vec<&str> = rest.strip_suffix(')').ok_or_else(bad)?.split(',').map(str::trim).collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        match (name.trim(), args.as_slice()) {
            ("binomial", [n, p]) => Self::binomial(n.parse().map_err(|_| bad())?, num(p)?),
            ("point", [k]) => Ok(Self::point(k.parse().map_err(|_| bad())?)),
            ("table", probs) => {
                let probs = probs.iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
                Self::new(probs, Provenance::Analytic(spec.to_string()))
            }
            _ => Err(bad()),
        }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Largest value with positive mass.
    pub fn max(&self) -> usize {
        self.probabilities.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.probabilities.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.probabilities
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 - m).powi(2) * p)
            .sum()
    }

    /// Probability generating function.
    pub fn pgf(&self, s: f64) -> f64 {
        self.probabilities.iter().rev().fold(0.0, |acc, &p| acc * s + p)
    }

    /// Smallest fixed point of the generating function in `[0, 1]`, by iteration from 0.
    pub fn extinction_probability(&self) -> f64 {
        let mut q = 0.0;
        for _ in 0..1_000_000 {
            let next = self.pgf(q);
            if (next - q).abs() < 1e-15 {
                return next;
            }
            q = next;
        }
        q
    }

    /// `exp(E(log X | X > 0))`.
    pub fn geometric_mean_positive(&self) -> f64 {
        let mass: f64 = self.probabilities[1..].iter().sum();
        let s: f64 = self
            .probabilities
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, p)| p * (k as f64).ln())
            .sum();
        (s / mass).exp()
    }
}

/// Histogram of `#Ξ_ε` over independent realisations.
pub fn offspring_from_rifs(
    rifs: &Arc<Rifs>,
    model: Model,
    epsilon: f64,
    trials: usize,
    seed: u64,
    survival_horizon: usize,
) -> Result<OffspringDistribution> {
    if trials == 0 {
        return Err(Error::Argument("need at least one trial".into()));
    }
    let depth = required_depth(rifs, epsilon, survival_horizon);
    let counts = try_map_indexed(trials, |i| {
        let real = Realisation::sample(rifs.clone(), model, depth, substream(seed, "offspring", i as u64))?;
        count_epsilon_codings(&real, epsilon, survival_horizon)
    })?;
    let max = *counts.iter().max().expect("trials > 0") as usize;
    let mut hist = vec![0usize; max + 1];
    for c in counts {
        hist[c as usize] += 1;
    }
    let probs: Vec<f64> = hist.iter().map(|&h| h as f64 / trials as f64).collect();
    let total: f64 = probs.iter().sum();
    OffspringDistribution::new(probs.iter().map(|p| p / total).collect(), Provenance::Empirical { trials })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SimOptions {
    /// Above this population, draw each generation from a normal approximation.
    /// `None` keeps every generation exact.
    pub normal_above: Option<u64>,
}

pub const DEFAULT_NORMAL_THRESHOLD: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GwRun {
    /// `X_0 = 1, X_1, ..., X_K`.
    pub generations: Vec<u64>,
    pub mean: f64,
}

impl GwRun {
    /// `W_k = X_k / m^k`.
    pub fn normalized(&self) -> Vec<f64> {
        self.generations
            .iter()
            .enumerate()
            .map(|(k, &x)| x as f64 / self.mean.powi(k as i32))
            .collect()
    }

    pub fn survived(&self) -> bool {
        self.generations.last().is_some_and(|&x| x > 0)
    }
}

/// One trajectory. Each generation is a multinomial split of the population over
/// the support, drawn as a chain of binomials, so the cost per generation does not
/// depend on the population.
pub fn simulate(dist: &OffspringDistribution, generations: usize, seed: u64, opts: SimOptions) -> Result<GwRun> {
    if generations < 1 {
        return Err(Error::Argument("need at least one generation".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support: Vec<(u64, f64)> = dist
        .probabilities
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(k, &p)| (k as u64, p))
        .collect();
    let (mean, var) = (dist.mean(), dist.variance());
    let mut xs = Vec::with_capacity(generations + 1);
    xs.push(1u64);
    for g in 1..=generations {
        let x = *xs.last().unwrap();
        let next = if x == 0 {
            0
        } else if opts.normal_above.is_some_and(|t| x > t) {
            let n = x as f64;
            let draw = Normal::new(n * mean, (n * var).sqrt())
                .map_err(|e| Error::Argument(e.to_string()))?
                .sample(&mut rng)
                .round()
                .max(0.0);
            if draw >= POPULATION_LIMIT as f64 {
                return Err(Error::Overflow { generation: g });
            }
            draw as u64
        } else {
            let mut left = x;
            let mut mass = 1.0f64;
            let mut total = 0u64;
            for (i, &(value, p)) in support.iter().enumerate() {
                if left == 0 {
                    break;
                }
                let c = if i + 1 == support.len() || p >= mass {
                    left
                } else {
                    Binomial::new(left, (p / mass).clamp(0.0, 1.0))
                        .map_err(|e| Error::Argument(e.to_string()))?
                        .sample(&mut rng)
                };
                left -= c;
                mass -= p;
                total = value
                    .checked_mul(c)
                    .and_then(|v| total.checked_add(v))
                    .filter(|&t| t < POPULATION_LIMIT)
                    .ok_or(Error::Overflow { generation: g })?;
            }
            total
        };
        xs.push(next);
    }
    Ok(GwRun { generations: xs, mean })
}

/// `runs` independent trajectories, run `i` seeded from substream `i` of `seed`.
pub fn simulate_many(
    dist: &OffspringDistribution,
    generations: usize,
    runs: usize,
    seed: u64,
    opts: SimOptions,
) -> Result<Vec<GwRun>> {
    try_map_indexed(runs, |i| simulate(dist, generations, substream(seed, "gw", i as u64), opts))
}

/// Wilson score interval for `hits` successes in `n` trials.
pub fn wilson_interval(hits: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    let lo = if hits == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if hits as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailEstimate {
    pub k: usize,
    pub threshold: f64,
    pub hits: usize,
    pub runs: usize,
    pub probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Frequencies of `X_k >= C m^{(1+ε)k}` for `k = 1..=K` over given runs.
pub fn tail_from_runs(runs: &[GwRun], c: f64, eps_exponent: f64) -> Vec<TailEstimate> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    let m = first.mean;
    let kmax = first.generations.len() - 1;
    (1..=kmax)
        .map(|k| {
            let threshold = c * m.powf((1.0 + eps_exponent) * k as f64);
            let hits = runs.iter().filter(|r| r.generations[k] as f64 >= threshold).count();
            let (lo, hi) = wilson_interval(hits, runs.len(), Z95);
            TailEstimate {
                k,
                threshold,
                hits,
                runs: runs.len(),
                probability: hits as f64 / runs.len() as f64,
                ci_low: lo,
                ci_high: hi,
            }
        })
        .collect()
}

/// Monte Carlo estimates of `P{X_k >= C m^{(1+ε)k}}` with 95% Wilson intervals.
pub fn tail_probability(
    dist: &OffspringDistribution,
    generations: usize,
    c: f64,
    eps_exponent: f64,
    runs: usize,
    seed: u64,
) -> Result<Vec<TailEstimate>> {
    if !(dist.mean() > 1.0) {
        return Err(Error::Argument(format!("tail estimates need m > 1, got m = {}", dist.mean())));
    }
    if !(eps_exponent > 0.0) {
        return Err(Error::Argument("eps exponent must be positive".into()));
    }
    let runs = simulate_many(dist, generations, runs, seed, SimOptions::default())?;
    Ok(tail_from_runs(&runs, c, eps_exponent))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MgfBound {
    pub theta: f64,
    /// Sample mean of `exp(θ W_k)` for `k = 0..=K`.
    pub per_k: Vec<f64>,
    /// Natural logs of `per_k`, finite even where `per_k` overflows.
    pub log_per_k: Vec<f64>,
    pub sup: f64,
    pub log_sup: f64,
}

fn log_mean_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = v.iter().map(|x| (x - max).exp()).sum();
    max + (s / v.len() as f64).ln()
}

pub fn mgf_from_runs(runs: &[GwRun], theta: f64) -> MgfBound {
    let ws: Vec<Vec<f64>> = runs.iter().map(GwRun::normalized).collect();
    let kmax = ws.first().map_or(0, |w| w.len() - 1);
    let log_per_k: Vec<f64> = (0..=kmax).map(|k| log_mean_exp(ws.iter().map(|w| theta * w[k]))).collect();
    let log_sup = log_per_k.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    MgfBound {
        theta,
        per_k: log_per_k.iter().map(|l| l.exp()).collect(),
        log_per_k,
        sup: log_sup.exp(),
        log_sup,
    }
}

/// Running supremum of the empirical `E exp(θ W_k)`.
pub fn mgf_bound(dist: &OffspringDistribution, generations: usize, theta: f64, runs: usize, seed: u64) -> Result<MgfBound> {
    if !(theta > 0.0) {
        return Err(Error::Argument("theta must be positive".into()));
    }
    let runs = simulate_many(dist, generations, runs, seed, SimOptions::default())?;
    Ok(mgf_from_runs(&runs, theta))
}

/// Constants of the bound `P{X_k >= C m^{(1+ε)k}} <= D exp(-t m^{εk})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChernoffFit {
    pub d: f64,
    pub t: f64,
    pub m: f64,
    pub eps_exponent: f64,
}

impl ChernoffFit {
    /// `D` is the supremum of the empirical mgf over the simulated range and
    /// `t = C θ`; by Markov's inequality the bound then holds for the empirical
    /// tail of the same runs at every `k`.
    pub fn from_mgf(mgf: &MgfBound, c: f64, m: f64, eps_exponent: f64) -> Self {
        Self {
            d: mgf.sup,
            t: c * mgf.theta,
            m,
            eps_exponent,
        }
    }

    pub fn bound(&self, k: usize) -> f64 {
        self.d * (-self.t * self.m.powf(self.eps_exponent * k as f64)).exp()
    }

    /// `Σ_{k>=l} D exp(-t m^{εk}) / (D exp(-t m^{εl}))`, summed until the terms vanish.
    pub fn tail_sum_ratio(&self, l: usize) -> f64 {
        let base = self.m.powf(self.eps_exponent * l as f64);
        let mut total = 0.0;
        let mut k = l;
        loop {
            let term = (-self.t * (self.m.powf(self.eps_exponent * k as f64) - base)).exp();
            total += term;
            if term < 1e-17 * total || k > l + 100_000 {
                return total;
            }
            k += 1;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthStats {
    pub k: usize,
    pub survivors: usize,
    /// Mean of `log(X_k) / k` over surviving runs.
    pub mean_log_growth: f64,
    pub stderr: f64,
    pub log_m: f64,
}

pub fn growth_stats(runs: &[GwRun]) -> Option<GrowthStats> {
    let first = runs.first()?;
    let k = first.generations.len() - 1;
    let g: Vec<f64> = runs
        .iter()
        .filter(|r| r.survived())
        .map(|r| (*r.generations.last().unwrap() as f64).ln() / k as f64)
        .collect();
    if g.len() < 2 {
        return None;
    }
    let n = g.len() as f64;
    let mean = g.iter().sum::<f64>() / n;
    let var = g.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some(GrowthStats {
        k,
        survivors: g.len(),
        mean_log_growth: mean,
        stderr: (var / n).sqrt(),
        log_m: first.mean.ln(),
    })
}

/// Sample mean and standard error of `W_k` for each `k`.
pub fn normalized_means(runs: &[GwRun]) -> Vec<(f64, f64)> {
    let ws: Vec<Vec<f64>> = map_indexed(runs.len(), |i| runs[i].normalized());
    let kmax = ws.first().map_or(0, |w| w.len() - 1);
    let n = ws.len() as f64;
    (0..=kmax)
        .map(|k| {
            let mean = ws.iter().map(|w| w[k]).sum::<f64>() / n;
            let var = ws.iter().map(|w| (w[k] - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            (mean, (var / n).sqrt())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use approx::assert_relative_eq;

    #[test]
    fn binomial_table() {
        let d = OffspringDistribution::binomial(4, 0.8).unwrap();
        assert_relative_eq!(d.mean(), 3.2, epsilon = 1e-14);
        assert_relative_eq!(d.variance(), 0.64, epsilon = 1e-13);
        assert_relative_eq!(d.probabilities()[2], 6.0 * 0.64 * 0.04, epsilon = 1e-15);
        assert_eq!(d.max(), 4);
    }

    #[test]
    fn parse_forms() {
        assert_eq!(OffspringDistribution::parse("point(2)").unwrap().mean(), 2.0);
        assert_relative_eq!(OffspringDistribution::parse("binomial(4, 0.5)").unwrap().mean(), 2.0);
        assert_relative_eq!(OffspringDistribution::parse("table(0.25,0.25,0.5)").unwrap().mean(), 1.25);
        assert!(OffspringDistribution::parse("poisson(2)").unwrap_err().is_config());
        assert!(OffspringDistribution::parse("table(0.5,0.6)").is_err());
    }

    #[test]
    fn point_masses_are_deterministic() {
        let one = simulate(&OffspringDistribution::point(1), 30, 5, SimOptions::default()).unwrap();
        assert!(one.generations.iter().all(|&x| x == 1));
        let two = simulate(&OffspringDistribution::point(2), 30, 5, SimOptions::default()).unwrap();
        for (k, &x) in two.generations.iter().enumerate() {
            assert_eq!(x, 1u64 << k);
        }
    }

    #[test]
    fn overflow_reports_generation() {
        let err = simulate(&OffspringDistribution::point(2), 70, 5, SimOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Overflow { generation: 63 }));
        assert!(err.is_budget());
    }

    #[test]
    fn extinction_is_absorbing() {
        let d = OffspringDistribution::binomial(2, 0.55).unwrap();
        for run in simulate_many(&d, 25, 200, 3, SimOptions::default()).unwrap() {
            if let Some(k) = run.generations.iter().position(|&x| x == 0) {
                assert!(run.generations[k..].iter().all(|&x| x == 0));
            }
        }
    }

    #[test]
    fn extinction_probability_fixed_point() {
        // Binomial(2, p): q = ((1-p)/p)^2.
        let p: f64 = 0.7;
        let d = OffspringDistribution::binomial(2, p).unwrap();
        assert_relative_eq!(d.extinction_probability(), ((1.0 - p) / p).powi(2), epsilon = 1e-12);
        assert_eq!(OffspringDistribution::point(2).extinction_probability(), 0.0);
        // Subcritical and critical laws die out.
        assert!((OffspringDistribution::binomial(2, 0.5).unwrap().extinction_probability() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn wilson_interval_properties() {
        let (lo, hi) = wilson_interval(0, 100, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!(lo < 0.5 && hi > 0.5);
        assert_relative_eq!(0.5 - lo, hi - 0.5, epsilon = 1e-12);
    }

    #[test]
    fn point_mass_tail_is_zero() {
        let t = tail_probability(&OffspringDistribution::point(2), 20, 1.0, 0.1, 50, 1).unwrap();
        assert!(t.iter().all(|e| e.hits == 0));
    }

    #[test]
    fn mgf_of_point_mass_one() {
        let runs = simulate_many(&OffspringDistribution::point(1), 10, 5, 0, SimOptions::default()).unwrap();
        let m = mgf_from_runs(&runs, 1.0);
        for v in &m.per_k {
            assert_relative_eq!(*v, std::f64::consts::E, epsilon = 1e-12);
        }
    }

    #[test]
    fn mgf_is_overflow_safe() {
        let runs = simulate_many(&OffspringDistribution::point(2), 10, 5, 0, SimOptions::default()).unwrap();
        let m = mgf_from_runs(&runs, 1000.0);
        assert!(m.log_sup.is_finite());
        assert_relative_eq!(m.log_sup, 1000.0, epsilon = 1e-9);
    }

    #[test]
    fn chernoff_bound_dominates_tail_on_same_runs() {
        let d = OffspringDistribution::binomial(4, 0.8).unwrap();
        let runs = simulate_many(&d, 12, 2000, 9, SimOptions::default()).unwrap();
        let (c, eps) = (1.0, 0.2);
        let fit = ChernoffFit::from_mgf(&mgf_from_runs(&runs, 0.5), c, d.mean(), eps);
        for t in tail_from_runs(&runs, c, eps) {
            assert!(t.probability <= fit.bound(t.k) + 1e-12, "{t:?}");
        }
        let r1 = fit.tail_sum_ratio(1);
        for l in 1..=10 {
            assert!(fit.tail_sum_ratio(l) <= r1 + 1e-12);
        }
    }

    #[test]
    fn normal_path_is_opt_in() {
        let d = OffspringDistribution::binomial(4, 0.9).unwrap();
        let exact = simulate(&d, 15, 4, SimOptions::default()).unwrap();
        let approx = simulate(&d, 15, 4, SimOptions { normal_above: Some(1000) }).unwrap();
        let k = exact.generations.iter().position(|&x| x > 1000).unwrap();
        assert_eq!(exact.generations[..=k], approx.generations[..=k]);
        let w = approx.normalized();
        assert!((w[15] / w[k] - 1.0).abs() < 0.05);
    }

    #[test]
    fn offspring_of_cantor_is_a_point_mass() {
        let rifs = Arc::new(builtin::cantor());
        for k in 1..5 {
            let d = offspring_from_rifs(&rifs, Model::Recursive, 3f64.powi(-k) * 1.01, 20, 2, 3).unwrap();
            assert_eq!(d.probabilities()[1 << k], 1.0);
        }
    }

    #[test]
    fn geometric_mean_of_point_mass() {
        assert_relative_eq!(OffspringDistribution::point(3).geometric_mean_positive(), 3.0, epsilon = 1e-14);
    }
}
