use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Result};
use log::{info, warn};
use randset::analytic::{epsilon_dimension, percolation_dimension, solve_dimension, DEFAULT_TOL};
use randset::coding::{count_epsilon_codings, count_epsilon_codings_multi, epsilon_codings, stop_depth_bound, DEFAULT_SURVIVAL_HORIZON};
use randset::config::{percolation_params, ModelDef};
use randset::empirical::{
    assouad_spectrum, box_dimension, naive_assouad_probe, quasi_assouad, CenterSpec, CoverCount, ScaleRange,
    DEFAULT_CENTER_CAP,
};
use randset::geometry::{check_raster_budget, rasterize, DEFAULT_CELL_BUDGET};
use randset::gw::{
    growth_stats, mgf_from_runs, normalized_means, offspring_from_rifs, simulate_many, tail_from_runs, ChernoffFit,
    OffspringDistribution, SimOptions,
};
use randset::hash::substream;
use randset::parallel::try_map_indexed;
use randset::rifs::Rifs;
use randset::tree::{Model, Realisation};
use randset::verify;
use randset::Error;

use crate::output::{int, num, write_graymap, Header, Table};
use crate::settings::{model_id, AnalyticSection, EmpiricalSection, GwSection, SampleSection};

/// Members materialised for a graymap.
const DEFAULT_MEMBER_BUDGET: u64 = 1 << 22;

fn require_model(model: Option<&ModelDef>) -> Result<&ModelDef> {
    model.ok_or_else(|| Error::config("model", "no model given; pass --model or a [model] table").into())
}

fn build(model: &ModelDef) -> Result<(Arc<Rifs>, Model)> {
    Ok((Arc::new(model.build()?), model.randomness()?))
}

pub fn dim_analytic(model: Option<&ModelDef>, cfg: &AnalyticSection, seed: u64, header: &Header, out: &Path) -> Result<()> {
    let model = require_model(model)?;
    let (rifs, randomness) = build(model)?;
    let s = solve_dimension(&rifs, DEFAULT_TOL)?;
    let percolation = match model.builtin.as_deref().and_then(percolation_params) {
        Some((k, d, p)) => num(percolation_dimension(k, d, p)?),
        None => String::new(),
    };
    let mut columns = vec!["model".to_string(), "s_analytic".into(), "s_percolation".into()];
    let mut row = vec![model_id(model), num(s), percolation];
    let horizon = cfg.survival_horizon.unwrap_or(DEFAULT_SURVIVAL_HORIZON);
    for (i, &eps) in cfg.eps.iter().flatten().enumerate() {
        let e = epsilon_dimension(&rifs, randomness, eps, cfg.trials.unwrap_or(200), substream(seed, "dim-analytic", i as u64), horizon)?;
        columns.extend([format!("epsilon_{i}"), format!("s_epsilon_{i}"), format!("stderr_{i}")]);
        row.extend([num(eps), num(e.s), num(e.stderr)]);
    }
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = Table::new(&cols);
    println!("{}", columns.join(","));
    println!("{}", row.join(","));
    table.push(row);
    table.write(header, &out.join("analytic.csv"))
}

fn resolvable(rifs: &Rifs, eps: f64, horizon: usize, depth: usize) -> Result<()> {
    let required = stop_depth_bound(rifs, eps) + horizon;
    if required > depth {
        return Err(Error::InsufficientDepth { required, available: depth }.into());
    }
    Ok(())
}

pub fn sample(model: Option<&ModelDef>, cfg: &SampleSection, seed: u64, header: &Header, out: &Path) -> Result<()> {
    let model = require_model(model)?;
    let (rifs, randomness) = build(model)?;
    let depth = cfg.depth.unwrap_or(10);
    let horizon = cfg.survival_horizon.unwrap_or(DEFAULT_SURVIVAL_HORIZON);
    let (lo, hi) = (cfg.scale_min_exp.unwrap_or(1), cfg.scale_max_exp.unwrap_or(8));
    let range = ScaleRange::new(lo, hi)?;
    let d = rifs.ambient_dim();
    let render = cfg.render.unwrap_or(true);
    if render && d > 2 {
        return Err(Error::Unsupported(format!("graymap rendering needs d = 2, the model has d = {d}; pass --render false")).into());
    }
    let real = Realisation::sample(rifs.clone(), randomness, depth + horizon, substream(seed, "sample", 0))?;
    let diameter = rifs.diameter();
    let all: Vec<f64> = (range.min_exp..=range.max_exp).map(|j| diameter * 2f64.powi(-(j as i32))).collect();
    resolvable(&rifs, all[0], horizon, real.depth())?;
    let scales: Vec<f64> = all
        .iter()
        .copied()
        .take_while(|&eps| resolvable(&rifs, eps, horizon, real.depth()).is_ok())
        .collect();
    if scales.len() < all.len() {
        warn!("depth {depth} resolves scales up to 2^-{}", range.min_exp as usize + scales.len() - 1);
    }
    let counts = count_epsilon_codings_multi(&real, &scales, horizon)?;
    let mut table = Table::new(&["scale_exp", "epsilon", "count"]);
    for (j, (eps, count)) in (range.min_exp..).zip(scales.iter().zip(&counts)) {
        table.push(vec![int(j), num(*eps), int(count)]);
    }
    table.write(header, &out.join("sample.csv"))?;

    if render && d == 2 {
        let g = cfg.grid_exponent.unwrap_or(8);
        // Just above the cell diagonal, so cylinders of that size are members.
        let eps = 1.01 * diameter * 2f64.powi(-(g as i32));
        let budget = cfg.cell_budget.unwrap_or(DEFAULT_CELL_BUDGET);
        check_raster_budget(d, g, budget)?;
        resolvable(&rifs, eps, horizon, real.depth())?;
        let members = count_epsilon_codings(&real, eps, horizon)?;
        let member_budget = cfg.member_budget.unwrap_or(DEFAULT_MEMBER_BUDGET);
        if members > member_budget {
            return Err(Error::Budget { requested: members, budget: member_budget }.into());
        }
        let set = epsilon_codings(&real, eps, horizon)?;
        let grid = rasterize(&set, g, budget)?;
        let mut raster = Table::new(&["grid_exponent", "side", "epsilon", "members", "occupied", "occupied_fraction"]);
        raster.push(vec![
            int(g),
            int(grid.side()),
            num(eps),
            int(set.len()),
            int(grid.occupied()),
            num(grid.occupied_fraction()),
        ]);
        raster.write(header, &out.join("raster.csv"))?;
        write_graymap(&grid, header, &out.join("sample.pgm"))?;
    } else if d == 1 {
        info!("1-d model, no graymap written");
    }
    Ok(())
}

struct SeedResult {
    rows: Vec<Vec<String>>,
    summary: Vec<(String, String, f64, f64)>,
}

fn cover_rows(seed: usize, estimate: &str, param: &str, counts: &[CoverCount]) -> Vec<Vec<String>> {
    counts
        .iter()
        .map(|c| {
            vec![
                int(seed),
                estimate.to_string(),
                param.to_string(),
                num(c.r),
                num(c.big_r),
                int(c.count),
                int(c.center_count),
            ]
        })
        .collect()
}

pub fn dim_empirical(model: Option<&ModelDef>, cfg: &EmpiricalSection, seed: u64, header: &Header, out: &Path) -> Result<()> {
    let model = require_model(model)?;
    let (rifs, randomness) = build(model)?;
    let depth = cfg.depth.unwrap_or(12);
    let seeds = cfg.seeds.unwrap_or(4);
    let horizon = cfg.survival_horizon.unwrap_or(DEFAULT_SURVIVAL_HORIZON);
    let thetas = cfg.theta_grid.clone().unwrap_or_else(|| vec![0.5]);
    let deltas = cfg.delta_grid.clone().unwrap_or_else(|| vec![0.5, 0.25, 0.1]);
    let cap = cfg.center_cap.unwrap_or(DEFAULT_CENTER_CAP);
    let range = ScaleRange::new(cfg.scale_min_exp.unwrap_or(2), cfg.scale_max_exp.unwrap_or(depth as u32))?;
    let ratio_cap = cfg.ratio_cap.unwrap_or(8.0);
    if seeds == 0 {
        return Err(Error::config("empirical.seeds", "need at least one seed").into());
    }

    let results = try_map_indexed(seeds, |i| -> randset::Result<SeedResult> {
        let s = substream(seed, "dim-empirical", i as u64);
        let real = Realisation::sample(rifs.clone(), randomness, depth + horizon, s)?;
        let centers = CenterSpec { cap, seed: s };
        let mut rows = Vec::new();
        let mut summary = Vec::new();

        let b = box_dimension(&real, range, horizon)?;
        for &(r, count) in &b.scales {
            rows.push(vec![int(i), "box".into(), String::new(), num(r), String::new(), int(count), String::new()]);
        }
        summary.push(("box".into(), String::new(), b.slope, b.stderr));

        for &theta in &thetas {
            let e = assouad_spectrum(&real, theta, range, &centers, horizon)?;
            rows.extend(cover_rows(i, "spectrum", &num(theta), &e.scales));
            summary.push(("spectrum".into(), num(theta), e.slope, e.stderr));
        }

        let q = quasi_assouad(&real, &deltas, range, &centers, horizon)?;
        rows.extend(cover_rows(i, "quasi_assouad", "", &q.scales));
        for ((delta, h), se) in q.delta_grid.iter().zip(&q.h_values).zip(&q.h_stderr) {
            summary.push(("quasi_assouad".into(), num(*delta), *h, *se));
        }
        summary.push(("quasi_assouad_extrapolate".into(), String::new(), q.extrapolate, q.extrapolate_residual));

        let probe = naive_assouad_probe(&real, ratio_cap, range, &centers, horizon)?;
        summary.push(("naive_probe".into(), num(ratio_cap), probe, f64::NAN));
        Ok(SeedResult { rows, summary })
    })?;

    let mut scales = Table::new(&["seed", "estimate", "param", "r", "R", "count", "center_count"]);
    let mut summary = Table::new(&["seed", "estimate", "param", "value", "stderr"]);
    for (i, res) in results.iter().enumerate() {
        for row in &res.rows {
            scales.push(row.clone());
        }
        for (name, param, value, se) in &res.summary {
            summary.push(vec![int(i), name.clone(), param.clone(), num(*value), num(*se)]);
        }
    }
    // Mean over seeds with the standard error of that mean.
    for (k, (name, param, _, _)) in results[0].summary.iter().enumerate() {
        let values: Vec<f64> = results.iter().map(|r| r.summary[k].2).collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let se = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            f64::NAN
        };
        summary.push(vec!["mean".into(), name.clone(), param.clone(), num(mean), num(se)]);
        println!("{name}{}: {mean:.4} ± {se:.4}", if param.is_empty() { String::new() } else { format!("({param})") });
    }
    scales.write(header, &out.join("empirical_scales.csv"))?;
    summary.write(header, &out.join("empirical_summary.csv"))
}

pub fn gw(model: Option<&ModelDef>, cfg: &GwSection, seed: u64, header: &Header, out: &Path) -> Result<()> {
    let spec = cfg.offspring.clone().unwrap_or_else(|| "binomial(4,0.8)".into());
    let generations = cfg.generations.unwrap_or(20);
    let runs = cfg.runs.unwrap_or(10_000);
    let theta = cfg.theta.unwrap_or(0.5);
    let eps_exponent = cfg.eps_exponent.unwrap_or(0.2);
    let c = cfg.c.unwrap_or(1.0);
    let dist = if spec == "from-rifs" {
        let model = require_model(model)?;
        let (rifs, randomness) = build(model)?;
        let eps = cfg.eps.ok_or_else(|| Error::config("gw.eps", "an absolute ε is required with from-rifs"))?;
        let trials = cfg.trials.unwrap_or(1000);
        let horizon = cfg.survival_horizon.unwrap_or(DEFAULT_SURVIVAL_HORIZON);
        let dist = offspring_from_rifs(&rifs, randomness, eps, trials, substream(seed, "gw-offspring", 0), horizon)?;
        let mut table = Table::new(&["k", "probability"]);
        for (k, p) in dist.probabilities().iter().enumerate() {
            table.push(vec![int(k), num(*p)]);
        }
        table.write(header, &out.join("offspring.csv"))?;
        dist
    } else {
        OffspringDistribution::parse(&spec)?
    };
    if !(theta > 0.0) {
        return Err(Error::config("gw.theta", "must be positive").into());
    }
    let sims = simulate_many(&dist, generations, runs, substream(seed, "gw", 0), SimOptions::default())?;
    let means = normalized_means(&sims);
    let tails = tail_from_runs(&sims, c, eps_exponent);
    let mgf = mgf_from_runs(&sims, theta);
    let n = sims.len() as f64;

    let mut table = Table::new(&[
        "k", "mean_x", "mean_w", "stderr_w", "threshold", "tail_frequency", "ci_low", "ci_high", "mgf", "log_mgf",
    ]);
    for k in 0..=generations {
        let mean_x = sims.iter().map(|r| r.generations[k] as f64).sum::<f64>() / n;
        let (tail, threshold, lo, hi) = match k.checked_sub(1).and_then(|i| tails.get(i)) {
            Some(t) => (num(t.probability), num(t.threshold), num(t.ci_low), num(t.ci_high)),
            None => Default::default(),
        };
        table.push(vec![
            int(k),
            num(mean_x),
            num(means[k].0),
            num(means[k].1),
            threshold,
            tail,
            lo,
            hi,
            num(mgf.per_k[k]),
            num(mgf.log_per_k[k]),
        ]);
    }
    table.write(header, &out.join("gw.csv"))?;

    let m = dist.mean();
    let survived = sims.iter().filter(|r| r.survived()).count() as f64 / n;
    let growth = growth_stats(&sims);
    let fit = ChernoffFit::from_mgf(&mgf, c, m, eps_exponent);
    let mut summary = Table::new(&[
        "offspring",
        "mean",
        "extinction_probability",
        "survival_frequency",
        "mean_log_growth",
        "log_m",
        "chernoff_d",
        "chernoff_t",
    ]);
    summary.push(vec![
        spec,
        num(m),
        num(dist.extinction_probability()),
        num(survived),
        growth.map_or(String::new(), |g| num(g.mean_log_growth)),
        num(m.ln()),
        num(fit.d),
        num(fit.t),
    ]);
    println!("mean {m:.6}, survival {survived:.4} vs {:.4}", 1.0 - dist.extinction_probability());
    summary.write(header, &out.join("gw_summary.csv"))
}

pub fn verify(seed: u64, header: &Header, out: &Path) -> Result<()> {
    let checks = verify::suite(seed)?;
    let mut table = Table::new(&["check", "trials", "failures", "worst", "limit", "passed"]);
    for c in &checks {
        println!("{:<16} {} ({} failures in {}, worst {:.4}, limit {})", c.name, if c.passed() { "pass" } else { "FAIL" }, c.failures, c.trials, c.worst, c.limit);
        table.push(vec![
            c.name.clone(),
            int(c.trials),
            int(c.failures),
            num(c.worst),
            num(c.limit),
            int(c.passed()),
        ]);
    }
    table.write(header, &out.join("verify.csv"))?;
    let failed = checks.iter().filter(|c| !c.passed()).count();
    if failed > 0 {
        bail!("{failed} of {} checks failed", checks.len());
    }
    Ok(())
}
