//! Covering-number estimators: box counting, local counts `N_{r,R}`, the Assouad
//! spectrum, quasi-Assouad slopes `h(δ)` and a naive Assouad probe.
//!
//! Covers are by half-open mesh cubes of side `r` anchored at the low corner of
//! `closure(O)`; a cube counts when it meets the enclosing box of a cylinder. For
//! `N_r(B(x, R) ∩ F)` a cube counts when, in addition, its centre lies in the open
//! ball. Dyadic scales are `R = |closure(O)| 2^{-j}`.

use std::collections::BinaryHeap;

use serde::Serialize;

use crate::coding::{count_epsilon_codings_multi, stop_depth_bound, EpsilonCoding, Walker};
use crate::error::{Error, Result};
use crate::geometry::cell_range;
use crate::hash::{combine, substream};
use crate::parallel::map_indexed;
use crate::regression::{ols, LinearFit};
use crate::similarity::{AxisBox, Point, SimilarityMap};
use smallvec::SmallVec;
use crate::tree::Realisation;

pub const DEFAULT_CENTER_CAP: usize = 512;

/// Relative slack when comparing a mesh side with the construction scale.
const SCALE_TOL: f64 = 1e-12;

/// How centres `x` for the maximum in `N_{r,R}` are chosen: anchors of codings,
/// ranked by a seed-keyed hash of their address, the first `cap` kept. Raising the
/// cap only adds centres.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CenterSpec {
    pub cap: usize,
    pub seed: u64,
}

impl Default for CenterSpec {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CENTER_CAP,
            seed: 0,
        }
    }
}

/// Inclusive range of dyadic exponents `j` for the large scale `R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ScaleRange {
    pub min_exp: u32,
    pub max_exp: u32,
}

impl ScaleRange {
    pub fn new(min_exp: u32, max_exp: u32) -> Result<Self> {
        if min_exp > max_exp {
            return Err(Error::Argument(format!("scale range {min_exp}..={max_exp} is empty")));
        }
        Ok(Self { min_exp, max_exp })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoverCount {
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub count: u64,
    pub center_count: usize,
}

impl CoverCount {
    pub fn log_ratio(&self) -> f64 {
        (self.big_r / self.r).ln()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumEstimate {
    pub theta: f64,
    pub scales: Vec<CoverCount>,
    pub slope: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuasiAssouadEstimate {
    pub delta_grid: Vec<f64>,
    pub h_values: Vec<f64>,
    pub h_stderr: Vec<f64>,
    /// `h` at `δ = 0` from a line through the three smallest `δ`.
    pub extrapolate: f64,
    /// Residual standard deviation of that line.
    pub extrapolate_residual: f64,
    /// Every `(r, R)` pair that was counted.
    pub scales: Vec<CoverCount>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxEstimate {
    /// `(r, #Ξ_r)` per scale.
    pub scales: Vec<(f64, u64)>,
    pub slope: f64,
    pub stderr: f64,
}

/// Mesh of cubes of side `h` over a box, with flat `u64` cell keys.
struct Mesh {
    origin: Point,
    h: f64,
    n: Vec<usize>,
    strides: Vec<u64>,
}

impl Mesh {
    fn new(closure: &AxisBox, h: f64) -> Result<Self> {
        let d = closure.dim();
        let n: Vec<usize> = (0..d)
            .map(|k| ((closure.side(k) / h) * (1.0 - 1e-12)).ceil().max(1.0) as usize)
            .collect();
        let mut strides = Vec::with_capacity(d);
        let mut acc = 1u64;
        for &nk in &n {
            strides.push(acc);
            acc = acc
                .checked_mul(nk as u64)
                .ok_or_else(|| Error::Unsupported(format!("mesh of side {h} has more than 2^64 cells")))?;
        }
        Ok(Self {
            origin: closure.lo.clone(),
            h,
            n,
            strides,
        })
    }

    fn range(&self, k: usize, lo: f64, hi: f64) -> (usize, usize) {
        cell_range(lo, hi, self.origin[k], self.h, self.n[k])
    }

    fn center(&self, k: usize, i: usize) -> f64 {
        self.origin[k] + (i as f64 + 0.5) * self.h
    }

    fn key(&self, idx: &[usize]) -> u64 {
        idx.iter().zip(&self.strides).map(|(&i, &s)| i as u64 * s).sum()
    }

    /// Centre of cell `idx` lies in the open ball `B(x, radius)`.
    fn inside(&self, idx: &[usize], x: &[f64], radius: f64) -> bool {
        let dist2: f64 = idx.iter().enumerate().map(|(k, &i)| (self.center(k, i) - x[k]).powi(2)).sum();
        dist2 < radius * radius
    }

    /// Appends the keys of the cells met by `b`.
    fn push_keys(&self, b: &AxisBox, out: &mut Vec<u64>) {
        let d = self.n.len();
        let ranges: SmallVec<[(usize, usize); 4]> = (0..d).map(|k| self.range(k, b.lo[k], b.hi[k])).collect();
        let mut idx: SmallVec<[usize; 4]> = ranges.iter().map(|r| r.0).collect();
        loop {
            out.push(self.key(&idx));
            let mut k = 0;
            loop {
                if k == d {
                    return;
                }
                if idx[k] < ranges[k].1 {
                    idx[k] += 1;
                    break;
                }
                idx[k] = ranges[k].0;
                k += 1;
            }
        }
    }
}

/// Sorted occupied cells of one mesh. Keys put the first axis innermost, so a
/// run of cells along it is a contiguous key range.
struct CellIndex {
    mesh: Mesh,
    keys: Vec<u64>,
}

impl CellIndex {
    fn new(mesh: Mesh, mut keys: Vec<u64>) -> Self {
        keys.sort_unstable();
        keys.dedup();
        Self { mesh, keys }
    }

    fn count_keys(&self, lo: u64, hi: u64) -> u64 {
        let a = self.keys.partition_point(|&k| k < lo);
        let b = self.keys.partition_point(|&k| k <= hi);
        (b - a) as u64
    }

    /// Occupied cells with centre in the open ball `B(x, radius)`; one if there
    /// are none but an occupied cell lies within `radius + h/2` of `x` on every axis.
    fn count_in_ball(&self, x: &[f64], radius: f64) -> u64 {
        let d = self.mesh.n.len();
        let mut idx: SmallVec<[usize; 4]> = SmallVec::from_elem(0, d);
        let n = self.scan_ball(d - 1, x, radius, &mut idx);
        if n == 0 && self.any_near(d - 1, x, radius + 0.5 * self.mesh.h, &mut idx) {
            1
        } else {
            n
        }
    }

    fn scan_ball(&self, k: usize, x: &[f64], radius: f64, idx: &mut [usize]) -> u64 {
        let m = &self.mesh;
        let (lo, hi) = m.range(k, x[k] - radius, x[k] + radius);
        if k > 0 {
            let mut total = 0;
            for i in lo..=hi {
                if (m.center(k, i) - x[k]).abs() < radius {
                    idx[k] = i;
                    total += self.scan_ball(k - 1, x, radius, idx);
                }
            }
            return total;
        }
        let (mut lo, mut hi) = (lo, hi);
        idx[0] = lo;
        while lo <= hi && !m.inside(idx, x, radius) {
            lo += 1;
            idx[0] = lo;
        }
        idx[0] = hi;
        while hi >= lo && !m.inside(idx, x, radius) {
            if hi == 0 {
                return 0;
            }
            hi -= 1;
            idx[0] = hi;
        }
        if lo > hi {
            return 0;
        }
        idx[0] = 0;
        let base = m.key(idx);
        self.count_keys(base + lo as u64, base + hi as u64)
    }

    fn any_near(&self, k: usize, x: &[f64], reach: f64, idx: &mut [usize]) -> bool {
        let (lo, hi) = self.mesh.range(k, x[k] - reach, x[k] + reach);
        if k > 0 {
            return (lo..=hi).any(|i| {
                idx[k] = i;
                self.any_near(k - 1, x, reach, idx)
            });
        }
        idx[0] = 0;
        let base = self.mesh.key(idx);
        self.count_keys(base + lo as u64, base + hi as u64) > 0
    }
}

fn distinct(mut keys: Vec<u64>) -> u64 {
    keys.sort_unstable();
    keys.dedup();
    keys.len() as u64
}

fn address_rank(seed: u64, address: &[u8]) -> u64 {
    address.iter().fold(substream(seed, "centers", 0), |h, &b| combine(h, b as u64))
}

fn check_resolution(set: &EpsilonCoding, r: f64) -> Result<()> {
    if r < set.epsilon * (1.0 - SCALE_TOL) {
        return Err(Error::Argument(format!(
            "mesh side {r} is below the construction scale {}",
            set.epsilon
        )));
    }
    Ok(())
}

/// Number of mesh cubes of side `r` meeting some cylinder box.
pub fn box_count(set: &EpsilonCoding, r: f64) -> Result<u64> {
    check_resolution(set, r)?;
    let mesh = Mesh::new(set.closure(), r)?;
    let closure = set.closure();
    let mut keys = Vec::with_capacity(set.len());
    for m in &set.members {
        mesh.push_keys(&m.map.image_box(closure), &mut keys);
    }
    Ok(distinct(keys))
}

/// Members whose enclosing cylinder box meets the open ball `B(z, radius)`.
/// For maps without rotation the enclosing box is the image itself.
pub fn ball_overlap_count(set: &EpsilonCoding, z: &[f64], radius: f64) -> usize {
    let closure = set.closure();
    set.members
        .iter()
        .filter(|m| m.map.image_box(closure).meets_ball(z, radius))
        .count()
}

fn max_over_centers(cells: &CellIndex, xs: &[Point], big_r: f64) -> u64 {
    map_indexed(xs.len(), |ci| cells.count_in_ball(&xs[ci], big_r))
        .into_iter()
        .max()
        .unwrap_or(0)
}

/// `N_{r,R}` on a materialised coding set: the maximum over sampled member anchors
/// `x` of the number of mesh cubes of side `r` meeting `B(x, R)` and a cylinder.
pub fn local_cover_count(set: &EpsilonCoding, r: f64, big_r: f64, centers: &CenterSpec) -> Result<CoverCount> {
    check_resolution(set, r)?;
    let diameter = set.diameter();
    if r > big_r * (1.0 + SCALE_TOL) || big_r > diameter * (1.0 + SCALE_TOL) {
        return Err(Error::Argument(format!("need r <= R <= {diameter}, got r = {r}, R = {big_r}")));
    }
    if set.is_empty() {
        return Err(Error::NoSurvivors("coding set has no members".into()));
    }
    let closure = set.closure();
    let mesh = Mesh::new(closure, r)?;
    let mut keys = Vec::with_capacity(set.len());
    for m in &set.members {
        mesh.push_keys(&m.map.image_box(closure), &mut keys);
    }
    let cells = CellIndex::new(mesh, keys);

    let mut ranked: Vec<(u64, usize)> = set
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| (address_rank(centers.seed, &m.address), i))
        .collect();
    ranked.sort_unstable();
    ranked.truncate(centers.cap.max(1));
    let c = closure.center();
    let xs: Vec<Point> = ranked.iter().map(|&(_, i)| set.members[i].map.apply(&c)).collect();
    Ok(CoverCount {
        r,
        big_r,
        count: max_over_centers(&cells, &xs, big_r),
        center_count: xs.len(),
    })
}

/// Finest dyadic exponent `i` whose ε-codings the realisation resolves.
fn finest_exponent(real: &Realisation, horizon: usize) -> Option<u32> {
    let d = real.rifs().diameter();
    (0..64u32)
        .take_while(|&i| stop_depth_bound(real.rifs(), d * 2f64.powi(-(i as i32))) + horizon <= real.depth())
        .last()
}

fn resolvable(real: &Realisation, r: f64, horizon: usize) -> bool {
    stop_depth_bound(real.rifs(), r) + horizon <= real.depth()
}

/// Occupied cells of `Ξ_s` at every requested scale `s`, and for the scales used
/// as `R` the anchors of up to `cap` members, lowest address rank first. Built
/// from one traversal of the realisation.
struct ScaleIndex {
    scales: Vec<f64>,
    cells: Vec<CellIndex>,
    centers: Vec<Vec<Point>>,
}

impl ScaleIndex {
    fn build(real: &Realisation, scales: &[f64], big: &[f64], spec: &CenterSpec, horizon: usize) -> Result<Self> {
        let same = |a: f64, b: f64| (a - b).abs() <= SCALE_TOL * a.max(b);
        let mut all: Vec<f64> = Vec::new();
        for &s in scales.iter().chain(big) {
            if !all.iter().any(|&t| same(s, t)) {
                all.push(s);
            }
        }
        let is_big: Vec<bool> = all.iter().map(|&s| big.iter().any(|&b| same(s, b))).collect();
        let rifs = real.rifs();
        let closure = rifs.closure();
        let meshes = all.iter().map(|&s| Mesh::new(closure, s)).collect::<Result<Vec<_>>>()?;
        let walker = Walker::new(real, real.root(), &all, horizon)?;
        let cap = spec.cap.max(1);
        let mut keys: Vec<Vec<u64>> = vec![Vec::new(); all.len()];
        let mut heaps: Vec<BinaryHeap<(u64, Vec<u8>)>> = vec![BinaryHeap::new(); all.len()];
        walker.run::<SimilarityMap>(real.root(), &mut |k, addr, _, map| {
            meshes[k].push_keys(&map.image_box(closure), &mut keys[k]);
            if is_big[k] {
                let heap = &mut heaps[k];
                let rank = address_rank(spec.seed, addr);
                if heap.len() < cap || rank < heap.peek().map_or(u64::MAX, |t| t.0) {
                    heap.push((rank, addr.to_vec()));
                    if heap.len() > cap {
                        heap.pop();
                    }
                }
            }
        });
        let c = closure.center();
        let centers = heaps
            .into_iter()
            .map(|h| {
                h.into_sorted_vec()
                    .into_iter()
                    .map(|(_, addr)| map_at(real, &addr).apply(&c))
                    .collect()
            })
            .collect();
        let cells = meshes.into_iter().zip(keys).map(|(m, k)| CellIndex::new(m, k)).collect();
        Ok(Self {
            scales: all,
            cells,
            centers,
        })
    }

    fn slot(&self, s: f64) -> usize {
        self.scales
            .iter()
            .position(|&t| (s - t).abs() <= SCALE_TOL * s.max(t))
            .expect("scale was indexed")
    }

    fn count(&self, r: f64, big_r: f64) -> CoverCount {
        let xs = &self.centers[self.slot(big_r)];
        CoverCount {
            r,
            big_r,
            count: max_over_centers(&self.cells[self.slot(r)], xs, big_r),
            center_count: xs.len(),
        }
    }
}

/// Composed map along an address.
fn map_at(real: &Realisation, address: &[u8]) -> SimilarityMap {
    let mut node = real.root();
    let mut map = SimilarityMap::identity(real.rifs().ambient_dim());
    for &b in address {
        let b = b as usize - 1;
        map = map.compose(&real.rifs().ifs_of(&real.label(node)).maps()[b]);
        node = real.child(node, b);
    }
    map
}

/// `N_{r,R}` for one `R` and several `r`, with centres at anchors of `Ξ_R`.
pub fn local_cover_counts(
    real: &Realisation,
    big_r: f64,
    rs: &[f64],
    centers: &CenterSpec,
    horizon: usize,
) -> Result<Vec<CoverCount>> {
    let index = ScaleIndex::build(real, rs, &[big_r], centers, horizon)?;
    Ok(rs.iter().map(|&r| index.count(r, big_r)).collect())
}

fn fit(points: &[CoverCount]) -> Option<LinearFit> {
    let x: Vec<f64> = points.iter().map(CoverCount::log_ratio).collect();
    let y: Vec<f64> = points.iter().map(|c| (c.count.max(1) as f64).ln()).collect();
    ols(&x, &y)
}

/// Slope of `log N_{r,R}` against `log(R/r)` along `r = |O| (R/|O|)^{1/θ}`.
pub fn assouad_spectrum(
    real: &Realisation,
    theta: f64,
    range: ScaleRange,
    centers: &CenterSpec,
    horizon: usize,
) -> Result<SpectrumEstimate> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Argument(format!("theta = {theta} must lie in (0, 1)")));
    }
    let d = real.rifs().diameter();
    let mut pairs = Vec::new();
    for j in range.min_exp..=range.max_exp {
        let big_r = d * 2f64.powi(-(j as i32));
        let r = d * (big_r / d).powf(1.0 / theta);
        if !resolvable(real, r, horizon) {
            break;
        }
        pairs.push((r, big_r));
    }
    let scales = if pairs.len() < 3 {
        Vec::new()
    } else {
        let rs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let bigs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let index = ScaleIndex::build(real, &rs, &bigs, centers, horizon)?;
        pairs.iter().map(|&(r, big_r)| index.count(r, big_r)).collect()
    };
    if scales.len() < 3 {
        return Err(Error::TooFewScales {
            usable: pairs.len(),
            limit: "depth",
        });
    }
    let f = fit(&scales).expect("distinct scales");
    Ok(SpectrumEstimate {
        theta,
        scales,
        slope: f.slope,
        stderr: f.stderr,
    })
}

/// All dyadic pairs `R = |O| 2^{-j}`, `r = |O| 2^{-i}` with `j` in `range`,
/// `i >= j` resolvable and `keep(j, i)`.
pub fn dyadic_cover_table(
    real: &Realisation,
    range: ScaleRange,
    centers: &CenterSpec,
    horizon: usize,
    keep: impl Fn(u32, u32) -> bool,
) -> Result<Vec<CoverCount>> {
    let d = real.rifs().diameter();
    let Some(i_max) = finest_exponent(real, horizon) else {
        return Ok(Vec::new());
    };
    let pairs: Vec<(u32, u32)> = (range.min_exp..=range.max_exp)
        .flat_map(|j| (j..=i_max).map(move |i| (j, i)))
        .filter(|&(j, i)| keep(j, i))
        .collect();
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let scale = |e: u32| d * 2f64.powi(-(e as i32));
    let rs: Vec<f64> = pairs.iter().map(|p| scale(p.1)).collect();
    let bigs: Vec<f64> = pairs.iter().map(|p| scale(p.0)).collect();
    let index = ScaleIndex::build(real, &rs, &bigs, centers, horizon)?;
    Ok(pairs.iter().map(|&(j, i)| index.count(scale(i), scale(j))).collect())
}

fn dyadic_exponent(d: f64, s: f64) -> f64 {
    (d / s).log2()
}

/// `h(δ)` for each δ from a table of dyadic pairs, using the pairs with
/// `r/|O| <= (R/|O|)^{1+δ}`.
pub fn quasi_assouad_from_table(table: &[CoverCount], delta_grid: &[f64], diameter: f64) -> Result<QuasiAssouadEstimate> {
    if delta_grid.is_empty() || delta_grid.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Argument("delta grid must be nonempty and positive".into()));
    }
    let mut h_values = Vec::with_capacity(delta_grid.len());
    let mut h_stderr = Vec::with_capacity(delta_grid.len());
    for &delta in delta_grid {
        let pairs: Vec<CoverCount> = table
            .iter()
            .filter(|c| {
                let (j, i) = (dyadic_exponent(diameter, c.big_r), dyadic_exponent(diameter, c.r));
                i + 1e-9 >= (1.0 + delta) * j
            })
            .copied()
            .collect();
        let usable = pairs.len();
        match fit(&pairs) {
            Some(f) if usable >= 3 => {
                h_values.push(f.slope);
                h_stderr.push(f.stderr);
            }
            _ => return Err(Error::TooFewScales { usable, limit: "depth" }),
        }
    }
    let mut order: Vec<usize> = (0..delta_grid.len()).collect();
    order.sort_by(|&a, &b| delta_grid[a].total_cmp(&delta_grid[b]));
    order.truncate(3);
    let (extrapolate, extrapolate_residual) = if order.len() == 1 {
        (h_values[order[0]], 0.0)
    } else {
        let x: Vec<f64> = order.iter().map(|&k| delta_grid[k]).collect();
        let y: Vec<f64> = order.iter().map(|&k| h_values[k]).collect();
        match ols(&x, &y) {
            Some(f) => (f.intercept, f.residual),
            None => (y[0], 0.0),
        }
    };
    Ok(QuasiAssouadEstimate {
        delta_grid: delta_grid.to_vec(),
        h_values,
        h_stderr,
        extrapolate,
        extrapolate_residual,
        scales: table.to_vec(),
    })
}

/// Quasi-Assouad slopes `h(δ)` and their extrapolation to `δ = 0`.
pub fn quasi_assouad(
    real: &Realisation,
    delta_grid: &[f64],
    range: ScaleRange,
    centers: &CenterSpec,
    horizon: usize,
) -> Result<QuasiAssouadEstimate> {
    let min_delta = delta_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_delta > 0.0) {
        return Err(Error::Argument("delta grid must be nonempty and positive".into()));
    }
    let table = dyadic_cover_table(real, range, centers, horizon, |j, i| i as f64 + 1e-9 >= (1.0 + min_delta) * j as f64)?;
    quasi_assouad_from_table(&table, delta_grid, real.rifs().diameter())
}

/// Largest `log(N_{r,R} / N_{R,R}) / log(R/r)` over table pairs with
/// `1 < R/r <= ratio_cap`. Dividing by `N_{R,R}` removes the ball-volume constant,
/// which would otherwise dominate at small ratios.
pub fn naive_assouad_from_table(table: &[CoverCount], ratio_cap: f64) -> Result<f64> {
    if !(ratio_cap > 1.0) {
        return Err(Error::Argument(format!("ratio cap {ratio_cap} must exceed 1")));
    }
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    table
        .iter()
        .filter(|c| c.big_r / c.r <= ratio_cap * (1.0 + 1e-9) && !same(c.big_r, c.r))
        .filter_map(|c| {
            let base = table.iter().find(|b| same(b.big_r, c.big_r) && same(b.r, b.big_r))?;
            Some((c.count.max(1) as f64 / base.count.max(1) as f64).ln() / c.log_ratio())
        })
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
        .ok_or(Error::TooFewScales { usable: 0, limit: "depth" })
}

/// Diagnostic: the largest local growth exponent at ratios `R/r <= ratio_cap`.
pub fn naive_assouad_probe(
    real: &Realisation,
    ratio_cap: f64,
    range: ScaleRange,
    centers: &CenterSpec,
    horizon: usize,
) -> Result<f64> {
    if !(ratio_cap > 1.0) {
        return Err(Error::Argument(format!("ratio cap {ratio_cap} must exceed 1")));
    }
    let max_gap = ratio_cap.log2().floor() as u32;
    let table = dyadic_cover_table(real, range, centers, horizon, |j, i| i - j <= max_gap.max(1))?;
    naive_assouad_from_table(&table, ratio_cap)
}

/// Slope of `log #Ξ_r` against `log(|O|/r)` over `r = |O| 2^{-j}`.
pub fn box_dimension(real: &Realisation, range: ScaleRange, horizon: usize) -> Result<BoxEstimate> {
    let d = real.rifs().diameter();
    let rs: Vec<f64> = (range.min_exp..=range.max_exp)
        .map(|j| d * 2f64.powi(-(j as i32)))
        .take_while(|&r| resolvable(real, r, horizon))
        .collect();
    if rs.len() < 3 {
        return Err(Error::TooFewScales {
            usable: rs.len(),
            limit: "depth",
        });
    }
    let counts = count_epsilon_codings_multi(real, &rs, horizon)?;
    let x: Vec<f64> = rs.iter().map(|r| (d / r).ln()).collect();
    let y: Vec<f64> = counts.iter().map(|&c| (c.max(1) as f64).ln()).collect();
    let f = ols(&x, &y).expect("distinct scales");
    Ok(BoxEstimate {
        scales: rs.into_iter().zip(counts).collect(),
        slope: f.slope,
        stderr: f.stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::coding::epsilon_codings;
    use crate::tree::Model;
    use std::sync::Arc;

    fn real(rifs: crate::rifs::Rifs, depth: usize, seed: u64) -> Realisation {
        Realisation::sample(Arc::new(rifs), Model::Recursive, depth, seed).unwrap()
    }

    fn full_square(depth: usize) -> Realisation {
        real(builtin::mandelbrot(2, 2, 1.0).unwrap(), depth, 0)
    }

    #[test]
    fn single_cylinder_meets_few_cells() {
        let r = full_square(6);
        let set = epsilon_codings(&r, 2f64.sqrt(), 1).unwrap();
        let n = box_count(&set, 2f64.sqrt()).unwrap();
        assert!((1..=4).contains(&n));
        assert!(box_count(&set, 0.5).is_err());
    }

    #[test]
    fn full_square_box_counts() {
        let r = full_square(10);
        let set = epsilon_codings(&r, 2f64.powi(-6), 1).unwrap();
        for m in 0..=6 {
            assert_eq!(box_count(&set, 2f64.powi(-m)).unwrap(), 4u64.pow(m as u32));
        }
        assert!(box_count(&set, 1e-4).is_err());
    }

    #[test]
    fn cantor_box_counts_match_interval_enumeration() {
        let r = real(builtin::cantor(), 16, 0);
        let set = epsilon_codings(&r, 3f64.powi(-9) * 1.01, 1).unwrap();
        for m in 1..=8 {
            let n = box_count(&set, 3f64.powi(-m)).unwrap();
            let want = 2u64.pow(m as u32);
            assert!(n >= want / 2 && n <= want * 2, "m = {m}: {n}");
        }
    }

    #[test]
    fn local_count_at_full_scale_is_small() {
        let r = full_square(6);
        let d = 2f64.sqrt();
        let set = epsilon_codings(&r, d, 1).unwrap();
        let c = local_cover_count(&set, d, d, &CenterSpec::default()).unwrap();
        assert!((1..=4).contains(&c.count));
    }

    #[test]
    fn full_square_local_counts_scale_quadratically() {
        let r = full_square(10);
        let set = epsilon_codings(&r, 2f64.powi(-6), 1).unwrap();
        for (j, i) in [(1, 3), (2, 5), (1, 6), (3, 6)] {
            let (big_r, rr) = (2f64.powi(-j), 2f64.powi(-i));
            let c = local_cover_count(&set, rr, big_r, &CenterSpec::default()).unwrap();
            let ideal = (big_r / rr).powi(2);
            let n = c.count as f64;
            assert!(n >= ideal / 16.0 && n <= ideal * 16.0, "{j},{i}: {n} vs {ideal}");
            assert!(n <= (2.0 * big_r / rr + 3.0).powi(2));
        }
    }

    #[test]
    fn cantor_local_slope() {
        let r = real(builtin::cantor(), 20, 0);
        let eps = 2f64.powi(-16);
        let set = epsilon_codings(&r, eps, 1).unwrap();
        let mut pts = Vec::new();
        for j in 1..=6 {
            for i in (j + 2)..=16 {
                let c = local_cover_count(&set, 2f64.powi(-i), 2f64.powi(-j), &CenterSpec::default()).unwrap();
                pts.push(c);
            }
        }
        let f = fit(&pts).unwrap();
        assert!((f.slope - 2f64.ln() / 3f64.ln()).abs() < 0.02, "{}", f.slope);
    }

    #[test]
    fn scale_consistency_between_box_and_local_counts() {
        let r = real(builtin::mandelbrot(2, 2, 0.8).unwrap(), 16, 3);
        let d = 2f64.sqrt();
        let set = epsilon_codings(&r, d / 64.0, 4).unwrap();
        let all = CenterSpec { cap: 64, seed: 0 };
        for m in 2..=6 {
            let rr = d * 2f64.powi(-m);
            let b = box_count(&set, rr).unwrap();
            let l = local_cover_count(&set, rr, d, &all).unwrap().count;
            assert!(l <= b && b <= 4 * l, "{b} vs {l}");
        }
    }

    #[test]
    fn doubling_the_cap_never_decreases() {
        let r = real(builtin::mandelbrot(2, 2, 0.7).unwrap(), 16, 8);
        let d = 2f64.sqrt();
        let set = epsilon_codings(&r, d / 512.0, 4).unwrap();
        let mut last = 0;
        for cap in [1, 2, 4, 8, 16, 32] {
            let c = local_cover_count(&set, d / 256.0, d / 8.0, &CenterSpec { cap, seed: 5 }).unwrap();
            assert!(c.count >= last);
            last = c.count;
        }
        let mut last = 0;
        for cap in [1, 2, 4, 8, 16] {
            let c = local_cover_counts(&r, d / 8.0, &[d / 256.0], &CenterSpec { cap, seed: 5 }, 4).unwrap()[0];
            assert!(c.count >= last && c.center_count <= cap);
            last = c.count;
        }
    }

    #[test]
    fn realisation_and_coding_set_local_counts_agree() {
        let r = real(builtin::example2(), 40, 2);
        let d = r.rifs().diameter();
        let spec = CenterSpec { cap: usize::MAX, seed: 0 };
        // Same centres: the anchors of Ξ_R.
        let set_r = epsilon_codings(&r, d / 8.0, 4).unwrap();
        let set_fine = epsilon_codings(&r, d / 1024.0, 4).unwrap();
        let fast = local_cover_counts(&r, d / 8.0, &[d / 1024.0], &spec, 4).unwrap()[0];
        let c = set_fine.closure().center();
        let h = d / 1024.0;
        let lo = set_fine.closure().lo[0];
        let mesh = Mesh::new(set_fine.closure(), h).unwrap();
        let mut keys = Vec::new();
        for f in &set_fine.members {
            mesh.push_keys(&f.map.image_box(set_fine.closure()), &mut keys);
        }
        keys.sort_unstable();
        keys.dedup();
        let big_r = d / 8.0;
        let slow = set_r
            .members
            .iter()
            .map(|m| {
                let x = m.map.apply(&c)[0];
                let centre = |k: u64| lo + (k as f64 + 0.5) * h;
                let n = keys.iter().filter(|&&k| (centre(k) - x).powi(2) < big_r * big_r).count() as u64;
                let near = keys.iter().any(|&k| {
                    let (a, b) = (lo + k as f64 * h, lo + (k + 1) as f64 * h);
                    b >= x - big_r - h / 2.0 && a <= x + big_r + h / 2.0
                });
                if n == 0 && near {
                    1
                } else {
                    n
                }
            })
            .max()
            .unwrap();
        assert_eq!(fast.count, slow);
        assert_eq!(fast.center_count, set_r.len());
    }

    #[test]
    fn full_square_spectrum_and_quasi_assouad() {
        let r = full_square(10);
        let spec = CenterSpec { cap: 16, seed: 1 };
        let s = assouad_spectrum(&r, 0.5, ScaleRange::new(2, 6).unwrap(), &spec, 1).unwrap();
        assert_eq!(s.scales.len(), 3);
        assert!((s.slope - 2.0).abs() < 0.05, "{}", s.slope);
        let q = quasi_assouad(&r, &[0.5, 0.25, 0.1], ScaleRange::new(2, 6).unwrap(), &spec, 1).unwrap();
        for h in &q.h_values {
            assert!((h - 2.0).abs() < 0.05, "{h}");
        }
        let p = naive_assouad_probe(&r, 8.0, ScaleRange::new(2, 6).unwrap(), &spec, 1).unwrap();
        assert!((p - 2.0).abs() < 0.25, "{p}");
    }

    #[test]
    fn cantor_quasi_assouad() {
        let r = real(builtin::cantor(), 12, 0);
        let q = quasi_assouad(&r, &[0.5, 0.25, 0.1], ScaleRange::new(1, 6).unwrap(), &CenterSpec::default(), 2).unwrap();
        for h in &q.h_values {
            assert!((h - 2f64.ln() / 3f64.ln()).abs() < 0.03, "{h}");
        }
    }

    #[test]
    fn too_few_scales_is_reported() {
        let r = full_square(4);
        let err = assouad_spectrum(&r, 0.5, ScaleRange::new(1, 5).unwrap(), &CenterSpec::default(), 1).unwrap_err();
        assert!(matches!(err, Error::TooFewScales { limit: "depth", .. }));
        assert!(assouad_spectrum(&r, 1.0, ScaleRange::new(1, 5).unwrap(), &CenterSpec::default(), 1).is_err());
    }

    #[test]
    fn box_dimension_of_full_square() {
        let r = full_square(9);
        let b = box_dimension(&r, ScaleRange::new(2, 9).unwrap(), 1).unwrap();
        assert_eq!(b.scales.len(), 6);
        assert!((b.slope - 2.0).abs() < 1e-9);
    }

    #[test]
    fn overlap_count_on_halves() {
        let r = real(builtin::example1(1.0).unwrap(), 12, 0);
        let set = epsilon_codings(&r, 0.2, 2).unwrap();
        // Members are the eight intervals of length 1/8.
        assert_eq!(ball_overlap_count(&set, &[0.5], 0.2), 4);
        assert!(ball_overlap_count(&set, &[0.5], 0.2) as f64 <= 4.0 / 0.5);
    }
}
