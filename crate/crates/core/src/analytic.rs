//! The Moran equation `E(Σ_j (c_j)^s) = 1` and related closed forms.

use std::sync::Arc;

use serde::Serialize;

use crate::coding::{count_epsilon_codings, required_depth};
use crate::error::{Error, Result};
use crate::hash::substream;
use crate::parallel::try_map_indexed;
use crate::rifs::{Coef, Rifs};
use crate::tree::{Model, Realisation};

pub const DEFAULT_TOL: f64 = 1e-10;

/// Mean of `a^s` for `a` uniform on `[lo, hi]`.
pub fn uniform_power_mean(lo: f64, hi: f64, s: f64) -> f64 {
    if hi - lo <= f64::EPSILON * hi.abs() {
        return lo.powf(s);
    }
    (hi.powf(s + 1.0) - lo.powf(s + 1.0)) / ((s + 1.0) * (hi - lo))
}

/// `E(Σ_j (c_j)^s)`: exact sums over atoms, closed-form integrals over families.
pub fn moran_eval(rifs: &Rifs, s: f64) -> f64 {
    let atoms: f64 = rifs
        .atoms()
        .iter()
        .map(|a| a.weight * a.ifs.maps().iter().map(|m| m.ratio().powf(s)).sum::<f64>())
        .sum();
    let families: f64 = rifs
        .families()
        .iter()
        .map(|f| {
            let per_map: f64 = f
                .template
                .maps()
                .iter()
                .map(|m| match m.ratio {
                    Coef::Const(c) => c.powf(s),
                    Coef::Param(i) => {
                        let (lo, hi) = f.param_box[i];
                        uniform_power_mean(lo, hi, s)
                    }
                })
                .sum();
            f.mass * per_map
        })
        .sum();
    atoms + families
}

/// Root of `moran_eval(s) = 1` by bisection.
pub fn solve_dimension(rifs: &Rifs, tol: f64) -> Result<f64> {
    let m0 = moran_eval(rifs, 0.0);
    if m0 <= 1.0 {
        return Err(Error::Extinguishing { expected_arity: m0 });
    }
    let d = rifs.ambient_dim() as f64;
    let mut lo = 0.0;
    let mut hi = d + 2.0;
    while moran_eval(rifs, hi) > 1.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Unsupported("Moran equation has no root below 1e6".into()));
        }
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let f = moran_eval(rifs, mid) - 1.0;
        if f.abs() <= tol && hi - lo <= tol {
            break;
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if mid > d {
        log::warn!("similarity dimension {mid} exceeds the ambient dimension {d}; the open set condition cannot hold");
    }
    Ok(mid)
}

/// `log(k^d p) / log k` for supercritical Mandelbrot percolation.
pub fn percolation_dimension(k: usize, d: usize, p: f64) -> Result<f64> {
    if k < 2 || d == 0 {
        return Err(Error::Argument(format!("percolation needs k >= 2 and d >= 1, got k = {k}, d = {d}")));
    }
    if p > 1.0 {
        return Err(Error::Argument(format!("percolation: p = {p} exceeds 1")));
    }
    let kd = (k as f64).powi(d as i32);
    let threshold = 1.0 / kd;
    if p <= threshold {
        return Err(Error::Subcritical { p, threshold });
    }
    Ok((kd * p).ln() / (k as f64).ln())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsilonDimension {
    pub epsilon: f64,
    pub s: f64,
    pub stderr: f64,
    pub mean_count: f64,
    pub mean_stderr: f64,
    pub trials: usize,
}

/// Monte Carlo `s_ε` from `E(#Ξ_ε) = (ε/|closure(O)|)^{-s_ε}`, with a delta-method
/// standard error.
pub fn epsilon_dimension(
    rifs: &Arc<Rifs>,
    model: Model,
    epsilon: f64,
    trials: usize,
    seed: u64,
    survival_horizon: usize,
) -> Result<EpsilonDimension> {
    let diameter = rifs.diameter();
    if !(epsilon > 0.0 && epsilon < diameter) {
        return Err(Error::Argument(format!("epsilon {epsilon} must lie in (0, {diameter})")));
    }
    if trials < 2 {
        return Err(Error::Argument("need at least two trials".into()));
    }
    let depth = required_depth(rifs, epsilon, survival_horizon);
    let counts = try_map_indexed(trials, |i| {
        let real = Realisation::sample(rifs.clone(), model, depth, substream(seed, "epsilon_dimension", i as u64))?;
        count_epsilon_codings(&real, epsilon, survival_horizon)
    })?;
    let n = trials as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    if mean == 0.0 {
        return Err(Error::NoSurvivors(format!(
            "no trial kept an ε-coding at ε = {epsilon}; try a larger ε or a shorter survival horizon"
        )));
    }
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let mean_stderr = (var / n).sqrt();
    let log_scale = (diameter / epsilon).ln();
    Ok(EpsilonDimension {
        epsilon,
        s: mean.ln() / log_scale,
        stderr: mean_stderr / (mean * log_scale),
        mean_count: mean,
        mean_stderr,
        trials,
    })
}
