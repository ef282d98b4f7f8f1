//! Randomized invariant checks shared by the `verify` command and the test suites.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::builtin;
use crate::coding::{coding_count_product_bounds, epsilon_codings, required_depth};
use crate::empirical::ball_overlap_count;
use crate::error::Result;
use crate::gw::{growth_stats, normalized_means, simulate_many, tail_from_runs, OffspringDistribution, SimOptions};
use crate::hash::substream;
use crate::parallel::try_map_indexed;
use crate::rifs::{Atom, Ifs, OpenSetSpec, Rifs};
use crate::similarity::{AxisBox, SimilarityMap};
use crate::tree::{Model, Realisation};

/// Outcome of one invariant over many trials. `worst` is the least favourable
/// value of the checked statistic and passes when it is at most `limit`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub trials: usize,
    pub failures: usize,
    pub worst: f64,
    pub limit: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn rotation(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    if d == 1 {
        return vec![if rng.random::<bool>() { -1.0 } else { 1.0 }];
    }
    let (c, s) = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][rng.random_range(0..4)];
    let flip = if rng.random::<bool>() { -1.0 } else { 1.0 };
    vec![c, -s * flip, s, c * flip]
}

/// A random RIFS on the unit cube with UOSC: each IFS maps the cube into distinct
/// cells of a `k^d` grid, with random ratios, quarter turns and reflections.
pub fn random_uosc_rifs(seed: u64) -> Result<Rifs> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..=2usize);
    let k = rng.random_range(2..=3usize);
    let cells = k.pow(d as u32);
    let side = 1.0 / k as f64;
    let n_atoms = rng.random_range(1..=3usize);
    let raw: Vec<f64> = (0..n_atoms).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let unit = AxisBox::unit_cube(d);
    let mut atoms = Vec::with_capacity(n_atoms);
    for (a, w) in raw.iter().enumerate() {
        let mut kept: Vec<usize> = (0..cells).filter(|_| rng.random_bool(0.7)).collect();
        while kept.len() < 2 {
            let c = rng.random_range(0..cells);
            if !kept.contains(&c) {
                kept.push(c);
                kept.sort_unstable();
            }
        }
        let mut maps = Vec::with_capacity(kept.len());
        for cell in kept {
            let ratio = side * rng.random_range(0.3..1.0);
            let o = rotation(&mut rng, d);
            let placed = SimilarityMap::new(ratio, &o, &vec![0.0; d])?.image_box(&unit);
            let t: Vec<f64> = (0..d)
                .map(|axis| {
                    let index = (cell / k.pow(axis as u32)) % k;
                    let lo = index as f64 * side + rng.random::<f64>() * (side - ratio);
                    lo - placed.lo[axis]
                })
                .collect();
            maps.push(SimilarityMap::new(ratio, &o, &t)?);
        }
        atoms.push(Atom {
            ifs: Ifs::new(a as u32 + 1, maps)?,
            weight: w / total,
        });
    }
    Rifs::new(d, atoms, vec![], OpenSetSpec::UnitCubeInterior)
}

/// Members of `Ξ_ε` whose cylinder box meets `B(z, ε)`, against `(4/c_min)^d`,
/// at anchors of members and at random points of the closure.
pub fn overlap_bound(trials: usize, seed: u64) -> Result<Check> {
    let per_trial = try_map_indexed(trials, |i| -> Result<(f64, bool)> {
        let s = substream(seed, "overlap", i as u64);
        let rifs = Arc::new(random_uosc_rifs(s)?);
        let mut rng = ChaCha8Rng::seed_from_u64(s ^ 1);
        let diameter = rifs.diameter();
        let eps = diameter * (0.02f64.ln() * rng.random::<f64>()).exp().min(0.999);
        let horizon = 2;
        let depth = required_depth(&rifs, eps, horizon);
        let real = Realisation::sample(rifs.clone(), Model::Recursive, depth, s)?;
        let set = epsilon_codings(&real, eps, horizon)?;
        let d = rifs.ambient_dim();
        let bound = (4.0 / rifs.c_min()).powi(d as i32);
        let c = rifs.closure().center();
        let mut points: Vec<Vec<f64>> = set.members.iter().take(16).map(|m| m.map.apply(&c).to_vec()).collect();
        for _ in 0..4 {
            points.push((0..d).map(|_| rng.random::<f64>()).collect());
        }
        let worst = points
            .iter()
            .map(|z| ball_overlap_count(&set, z, eps) as f64)
            .fold(0.0, f64::max);
        Ok((worst / bound, worst <= bound))
    })?;
    Ok(Check {
        name: "overlap_bound".into(),
        trials,
        failures: per_trial.iter().filter(|t| !t.1).count(),
        worst: per_trial.iter().map(|t| t.0).fold(0.0, f64::max),
        limit: 1.0,
    })
}

/// `lower <= actual <= upper` for random scales on Examples 1 and 2. `worst` is
/// the largest of `lower/actual` and `actual/upper`.
pub fn product_bounds(trials: usize, seed: u64) -> Result<Check> {
    let ex1 = Arc::new(builtin::example1(0.5)?);
    let ex2 = Arc::new(builtin::example2());
    let per_trial = try_map_indexed(trials, |i| -> Result<(f64, bool)> {
        let s = substream(seed, "product", i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let rifs = if i % 2 == 0 { &ex1 } else { &ex2 };
        let diameter = rifs.diameter();
        let eps1 = diameter * rng.random_range(0.05..0.9);
        let eps2 = diameter * rng.random_range(0.05..0.9);
        let horizon = 4;
        let depth = required_depth(rifs, eps1, 0) + required_depth(rifs, eps2, 0) + horizon;
        let real = Realisation::sample(rifs.clone(), Model::Recursive, depth, s)?;
        let b = coding_count_product_bounds(&real, eps1, eps2, horizon)?;
        let ratio = (b.lower as f64 / b.actual.max(1) as f64).max(b.actual as f64 / b.upper.max(1) as f64);
        Ok((ratio, b.holds()))
    })?;
    Ok(Check {
        name: "product_bounds".into(),
        trials,
        failures: per_trial.iter().filter(|t| !t.1).count(),
        worst: per_trial.iter().map(|t| t.0).fold(0.0, f64::max),
        limit: 1.0,
    })
}

/// Largest `|mean W_k - 1| / stderr` over `k = 1..=generations`.
pub fn martingale(dist: &OffspringDistribution, generations: usize, runs: usize, seed: u64, limit: f64) -> Result<Check> {
    let sims = simulate_many(dist, generations, runs, seed, SimOptions::default())?;
    let z: Vec<f64> = normalized_means(&sims)
        .into_iter()
        .skip(1)
        .map(|(mean, se)| match (mean - 1.0).abs() {
            0.0 => 0.0,
            gap => gap / se,
        })
        .collect();
    Ok(Check {
        name: "martingale".into(),
        trials: generations,
        failures: z.iter().filter(|&&v| !(v <= limit)).count(),
        worst: z.iter().cloned().fold(0.0, f64::max),
        limit,
    })
}

/// Generations `k > after` whose tail interval lies entirely above the interval
/// at `k - 1`, for `P{X_k >= C m^{(1+ε)k}}`.
pub fn tail_monotone(
    dist: &OffspringDistribution,
    generations: usize,
    c: f64,
    eps_exponent: f64,
    runs: usize,
    seed: u64,
    after: usize,
) -> Result<Check> {
    let sims = simulate_many(dist, generations, runs, seed, SimOptions::default())?;
    let tails = tail_from_runs(&sims, c, eps_exponent);
    let gaps: Vec<f64> = tails
        .windows(2)
        .filter(|w| w[0].k >= after)
        .map(|w| w[1].ci_low - w[0].ci_high)
        .collect();
    Ok(Check {
        name: "tail_monotone".into(),
        trials: gaps.len(),
        failures: gaps.iter().filter(|&&g| g > 0.0).count(),
        worst: gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        limit: 0.0,
    })
}

/// Survival frequency at the last generation against one minus the fixed point
/// of the generating function.
pub fn survival(dist: &OffspringDistribution, generations: usize, runs: usize, seed: u64, limit: f64) -> Result<Check> {
    let sims = simulate_many(dist, generations, runs, seed, SimOptions::default())?;
    let freq = sims.iter().filter(|r| r.survived()).count() as f64 / runs as f64;
    let gap = (freq - (1.0 - dist.extinction_probability())).abs();
    Ok(Check {
        name: "survival".into(),
        trials: runs,
        failures: usize::from(!(gap <= limit)),
        worst: gap,
        limit,
    })
}

/// `|mean log(X_k)/k - log m|` over surviving runs.
pub fn growth(dist: &OffspringDistribution, generations: usize, runs: usize, seed: u64, limit: f64) -> Result<Check> {
    let sims = simulate_many(dist, generations, runs, seed, SimOptions::default())?;
    let gap = growth_stats(&sims).map_or(f64::INFINITY, |g| (g.mean_log_growth - g.log_m).abs());
    Ok(Check {
        name: "growth".into(),
        trials: runs,
        failures: usize::from(!(gap <= limit)),
        worst: gap,
        limit,
    })
}

/// The checks run by the `verify` command.
pub fn suite(seed: u64) -> Result<Vec<Check>> {
    let b48 = OffspringDistribution::binomial(4, 0.8)?;
    Ok(vec![
        overlap_bound(1000, seed)?,
        product_bounds(100, seed)?,
        martingale(&b48, 20, 10_000, substream(seed, "verify", 0), 4.0)?,
        tail_monotone(&b48, 20, 1.0, 0.2, 100_000, substream(seed, "verify", 1), 3)?,
        survival(&b48, 20, 10_000, substream(seed, "verify", 2), 0.01)?,
        growth(&b48, 20, 1000, substream(seed, "verify", 3), 0.05)?,
    ])
}
