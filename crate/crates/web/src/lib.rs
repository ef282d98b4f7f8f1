//! Browser bindings: render a realisation, trace the Moran function, draw Galton-Watson paths.

use std::sync::Arc;

use randset::analytic::{moran_eval, solve_dimension, DEFAULT_TOL};
use randset::coding::{epsilon_codings, required_depth};
use randset::config::parse_builtin;
use randset::geometry::{rasterize, DEFAULT_CELL_BUDGET};
use randset::gw::{simulate, OffspringDistribution, SimOptions};
use randset::hash::substream;
use randset::tree::{Model, Realisation};
use wasm_bindgen::prelude::*;

const HORIZON: usize = 6;
const MAX_GRID_EXPONENT: u32 = 10;

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// RGBA pixels of a planar builtin model at resolution `2^grid_exponent`, row 0 at the top.
#[wasm_bindgen]
pub fn render(model: &str, grid_exponent: u32, seed: u64) -> Result<Vec<u8>, JsError> {
    if grid_exponent > MAX_GRID_EXPONENT {
        return Err(js(format!("grid exponent above {MAX_GRID_EXPONENT}")));
    }
    let rifs = Arc::new(parse_builtin(model).map_err(js)?);
    if rifs.ambient_dim() != 2 {
        return Err(js("only planar models can be drawn"));
    }
    let eps = 1.01 * rifs.diameter() * 2f64.powi(-(grid_exponent as i32));
    let depth = required_depth(&rifs, eps, HORIZON);
    let real = Realisation::sample(rifs, Model::Recursive, depth, seed).map_err(js)?;
    let set = epsilon_codings(&real, eps, HORIZON).map_err(js)?;
    let grid = rasterize(&set, grid_exponent, DEFAULT_CELL_BUDGET).map_err(js)?;
    let side = grid.side();
    let mut rgba = Vec::with_capacity(side * side * 4);
    for row in (0..side).rev() {
        for col in 0..side {
            let v = if grid.get(&[col, row]) { 20 } else { 245 };
            rgba.extend_from_slice(&[v, v, v, 255]);
        }
    }
    Ok(rgba)
}

#[wasm_bindgen]
pub fn dimension(model: &str) -> Result<f64, JsError> {
    solve_dimension(&parse_builtin(model).map_err(js)?, DEFAULT_TOL).map_err(js)
}

/// `points` pairs `(s, E sum c_i^s)` for `s` evenly spaced in `[0, s_max]`, flattened.
#[wasm_bindgen]
pub fn moran_curve(model: &str, s_max: f64, points: usize) -> Result<Vec<f64>, JsError> {
    let rifs = parse_builtin(model).map_err(js)?;
    let n = points.max(2);
    Ok((0..n)
        .flat_map(|i| {
            let s = s_max * i as f64 / (n - 1) as f64;
            [s, moran_eval(&rifs, s)]
        })
        .collect())
}

/// `runs` normalised paths `W_0..W_generations` under Binomial(n, p) offspring, flattened run by run.
#[wasm_bindgen]
pub fn gw_paths(n: u32, p: f64, generations: usize, runs: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    let dist = OffspringDistribution::binomial(n, p).map_err(js)?;
    let mut out = Vec::with_capacity(runs * (generations + 1));
    for i in 0..runs {
        let run = simulate(&dist, generations, substream(seed, "web-gw", i as u64), SimOptions::default()).map_err(js)?;
        out.extend(run.normalized());
    }
    Ok(out)
}
