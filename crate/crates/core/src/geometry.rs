//! Cylinder boxes, anchor point clouds and occupancy rasters of coding sets.

use std::io::{self, Write};

use crate::coding::EpsilonCoding;
use crate::error::{Error, Result};
use crate::similarity::{AxisBox, Point};

/// Default raster budget in cells (a 8192 x 8192 grid).
pub const DEFAULT_CELL_BUDGET: u64 = 1 << 26;

/// Slack for deciding which mesh cells a box reaches, relative to the cell side.
const CELL_TOL: f64 = 1e-9;

/// Image of `closure(O)` under a composed map.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderBox {
    pub center: Point,
    /// Half the diameter of the image.
    pub radius: f64,
    /// Axis box enclosing the image.
    pub bbox: AxisBox,
}

/// One box per member, in member order.
pub fn cylinders(coding_set: &EpsilonCoding) -> Vec<CylinderBox> {
    let closure = coding_set.closure();
    let half = closure.diameter() / 2.0;
    let c = closure.center();
    coding_set
        .members
        .iter()
        .map(|m| CylinderBox {
            center: m.map.apply(&c),
            radius: m.ratio() * half,
            bbox: m.map.image_box(closure),
        })
        .collect()
}

/// Images of the centre of `closure(O)` under every member; each lies within ε of the set.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub scale: f64,
}

pub fn point_cloud(coding_set: &EpsilonCoding) -> PointCloud {
    let c = coding_set.closure().center();
    PointCloud {
        points: coding_set.members.iter().map(|m| m.map.apply(&c)).collect(),
        scale: coding_set.epsilon,
    }
}

/// Inclusive range of half-open mesh cells `[origin + i h, origin + (i+1) h)` met by
/// `[lo, hi]`, clamped to `0..n`. Contact within a tiny tolerance of a cell edge
/// does not count.
#[inline]
pub(crate) fn cell_range(lo: f64, hi: f64, origin: f64, h: f64, n: usize) -> (usize, usize) {
    let a = ((lo - origin) / h + CELL_TOL).floor();
    let b = ((hi - origin) / h - CELL_TOL).ceil() - 1.0;
    let max = (n - 1) as f64;
    let a = a.clamp(0.0, max);
    let b = b.clamp(a, max);
    (a as usize, b as usize)
}

/// Occupancy grid over the enclosing box of `closure(O)`, `2^exponent` cells per axis.
/// Cell `(i, j)` has `i` along the first axis; storage is row-major with the
/// second axis as the row index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grid {
    dim: usize,
    exponent: u32,
    cells: Vec<bool>,
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    /// Cells per axis.
    pub fn side(&self) -> usize {
        1 << self.exponent
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn get(&self, index: &[usize]) -> bool {
        let n = self.side();
        let flat = index.iter().rev().fold(0, |acc, &i| acc * n + i);
        self.cells[flat]
    }

    pub fn occupied(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn occupied_fraction(&self) -> f64 {
        self.occupied() as f64 / self.cells.len() as f64
    }

    /// True when every occupied cell of `self` is occupied in `other`.
    pub fn is_subset_of(&self, other: &Grid) -> bool {
        self.cells.len() == other.cells.len() && self.cells.iter().zip(&other.cells).all(|(&a, &b)| !a || b)
    }
}

/// Rejects grids of `2^(grid_exponent d)` cells above `cell_budget`.
pub fn check_raster_budget(d: usize, grid_exponent: u32, cell_budget: u64) -> Result<()> {
    let requested = 1u64
        .checked_shl(grid_exponent * d as u32)
        .filter(|_| grid_exponent < 32)
        .unwrap_or(u64::MAX);
    if requested > cell_budget {
        return Err(Error::Budget {
            requested,
            budget: cell_budget,
        });
    }
    Ok(())
}

/// Marks every cell that meets the enclosing box of some member.
pub fn rasterize(coding_set: &EpsilonCoding, grid_exponent: u32, cell_budget: u64) -> Result<Grid> {
    let d = coding_set.ambient_dim();
    if d > 2 {
        return Err(Error::Unsupported(format!("rasterization needs d <= 2, got d = {d}")));
    }
    check_raster_budget(d, grid_exponent, cell_budget)?;
    let requested = 1u64 << (grid_exponent * d as u32);
    let closure = coding_set.closure();
    let n = 1usize << grid_exponent;
    let h: Vec<f64> = (0..d).map(|k| closure.side(k) / n as f64).collect();
    let diagonal = h.iter().map(|x| x * x).sum::<f64>().sqrt();
    if diagonal < coding_set.c_min() * coding_set.epsilon && !coding_set.is_empty() {
        log::warn!(
            "raster cell diagonal {diagonal} is below the smallest member diameter; cells will show the cylinder boxes"
        );
    }
    let mut cells = vec![false; requested as usize];
    for cyl in cylinders(coding_set) {
        let ranges: Vec<(usize, usize)> = (0..d)
            .map(|k| cell_range(cyl.bbox.lo[k], cyl.bbox.hi[k], closure.lo[k], h[k], n))
            .collect();
        if d == 1 {
            cells[ranges[0].0..=ranges[0].1].fill(true);
        } else {
            for j in ranges[1].0..=ranges[1].1 {
                cells[j * n + ranges[0].0..=j * n + ranges[0].1].fill(true);
            }
        }
    }
    Ok(Grid {
        dim: d,
        exponent: grid_exponent,
        cells,
    })
}

/// Binary portable graymap of a 2-d grid: occupied cells black, the second axis
/// pointing up. Each comment line is written as a `#` line after the magic number.
pub fn write_pgm(grid: &Grid, comments: &[String], mut out: impl Write) -> io::Result<()> {
    if grid.dim != 2 {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "graymap output needs a 2-d grid"));
    }
    let n = grid.side();
    writeln!(out, "P5")?;
    for c in comments {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    write!(out, "{n} {n}\n255\n")?;
    let mut row = vec![0u8; n];
    for j in (0..n).rev() {
        for (i, px) in row.iter_mut().enumerate() {
            *px = if grid.cells[j * n + i] { 0 } else { 255 };
        }
        out.write_all(&row)?;
    }
    Ok(())
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV with a header `x1,..,xd` and one row per point.
pub fn write_points_csv(cloud: &PointCloud, dim: usize, mut out: impl Write) -> io::Result<()> {
    let header: Vec<String> = (1..=dim).map(|k| format!("x{k}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for p in &cloud.points {
        let row: Vec<String> = p.iter().map(|&x| fmt_f64(x)).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
