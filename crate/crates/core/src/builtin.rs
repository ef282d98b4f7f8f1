//! Built-in model generators.

use crate::error::{Error, Result};
use crate::rifs::{Atom, Ifs, OpenSetSpec, ParametricFamily, Rifs, Template};
use crate::similarity::{AxisBox, SimilarityMap};

/// Largest number of maps accepted by [`falconer_jin`]; it produces `2^n` atoms.
pub const MAX_PERCOLATION_MAPS: usize = 16;

fn line(r: f64, t: f64) -> SimilarityMap {
    SimilarityMap::line(r, t, false).expect("valid constant map")
}

/// `{x/2, x/2 + 1/2}` with probability `p`, `{x/3, x/3 + 2/3}` otherwise.
pub fn example1(p: f64) -> Result<Rifs> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Argument(format!("example1: p = {p} outside [0, 1]")));
    }
    let halves = Ifs::new(1, vec![line(0.5, 0.0), line(0.5, 0.5)])?;
    let thirds = Ifs::new(2, vec![line(1.0 / 3.0, 0.0), line(1.0 / 3.0, 2.0 / 3.0)])?;
    Rifs::new(
        1,
        vec![Atom { ifs: halves, weight: p }, Atom { ifs: thirds, weight: 1.0 - p }],
        vec![],
        OpenSetSpec::UnitCubeInterior,
    )
}

/// `{a x, b x + c}` with `(a, b, c)` uniform on `[1/4,1/3] x [1/4,1/3] x [1/2,1]`.
///
/// The open set is `(0, 3/2)`: for `c + b > 1` the second map leaves the unit
/// interval, while `(0, 3/2)` is mapped into itself with disjoint images for
/// every parameter in the box.
pub fn example2() -> Rifs {
    let template = Template::from_registry("example2_cantor").expect("registered template");
    let family = ParametricFamily {
        label: 1,
        param_box: vec![(0.25, 1.0 / 3.0), (0.25, 1.0 / 3.0), (0.5, 1.0)],
        template,
        mass: 1.0,
    };
    let open = OpenSetSpec::AxisBox(AxisBox::new(&[0.0], &[1.5]).expect("valid box"));
    Rifs::new(1, vec![], vec![family], open).expect("example2 is valid")
}

/// Deterministic middle-third Cantor system `{x/3, x/3 + 2/3}`.
pub fn cantor() -> Rifs {
    Rifs::deterministic(vec![line(1.0 / 3.0, 0.0), line(1.0 / 3.0, 2.0 / 3.0)], OpenSetSpec::UnitCubeInterior)
        .expect("cantor is valid")
}

/// The `k^d` homotheties of ratio `1/k` onto the grid subcubes of the unit cube.
///
/// For `k = d = 2` the order is bottom-left, top-left, top-right, bottom-right.
pub fn grid_maps(k: usize, d: usize) -> Result<Vec<SimilarityMap>> {
    if k < 2 || d == 0 {
        return Err(Error::Argument(format!("grid needs k >= 2 and d >= 1, got k = {k}, d = {d}")));
    }
    let n = k.checked_pow(d as u32).filter(|&n| n <= MAX_PERCOLATION_MAPS).ok_or_else(|| {
        Error::Unsupported(format!("k^d = {k}^{d} exceeds {MAX_PERCOLATION_MAPS} subcubes"))
    })?;
    let r = 1.0 / k as f64;
    let corners: Vec<Vec<usize>> = if k == 2 && d == 2 {
        vec![vec![0, 0], vec![0, 1], vec![1, 1], vec![1, 0]]
    } else {
        (0..n)
            .map(|mut idx| {
                (0..d)
                    .map(|_| {
                        let c = idx % k;
                        idx /= k;
                        c
                    })
                    .collect()
            })
            .collect()
    };
    corners
        .iter()
        .map(|c| {
            let t: Vec<f64> = c.iter().map(|&i| i as f64 * r).collect();
            SimilarityMap::homothety(r, &t)
        })
        .collect()
}

/// Fractal percolation of a deterministic IFS: every map is kept independently
/// with probability `p`. One atom per subset of maps, ordered by subset size and
/// then lexicographically, labelled `0..2^n`.
pub fn falconer_jin(maps: Vec<SimilarityMap>, p: f64, open_set: OpenSetSpec) -> Result<Rifs> {
    let n = maps.len();
    if n == 0 || n > MAX_PERCOLATION_MAPS {
        return Err(Error::Unsupported(format!(
            "percolation over {n} maps (1..={MAX_PERCOLATION_MAPS} supported)"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Argument(format!("percolation: p = {p} outside [0, 1]")));
    }
    let threshold = 1.0 / n as f64;
    if p <= threshold {
        return Err(Error::Subcritical { p, threshold });
    }
    let d = maps[0].dim();
    let mut subsets: Vec<u32> = (0u32..(1 << n)).collect();
    subsets.sort_by_key(|&s| (s.count_ones(), lex_key(s, n)));
    let mut atoms = Vec::with_capacity(subsets.len());
    for (label, s) in subsets.into_iter().enumerate() {
        let chosen: Vec<SimilarityMap> = (0..n).filter(|i| s & (1 << i) != 0).map(|i| maps[i].clone()).collect();
        let kept = chosen.len() as i32;
        let weight = p.powi(kept) * (1.0 - p).powi(n as i32 - kept);
        atoms.push(Atom { ifs: Ifs::new(label as u32, chosen)?, weight });
    }
    Rifs::new(d, atoms, vec![], open_set)
}

/// Sort key putting subsets of equal size in lexicographic order of their members.
fn lex_key(s: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|i| s & (1 << i) != 0).collect()
}

/// `k`-fold Mandelbrot percolation of the `d`-dimensional unit cube.
pub fn mandelbrot(k: usize, d: usize, p: f64) -> Result<Rifs> {
    let maps = grid_maps(k, d)?;
    let threshold = 1.0 / maps.len() as f64;
    if p <= threshold {
        return Err(Error::Subcritical { p, threshold });
    }
    falconer_jin(maps, p, OpenSetSpec::UnitCubeInterior)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mandelbrot_table_matches_subset_enumeration() {
        let p = 0.7;
        let r = mandelbrot(2, 2, p).unwrap();
        assert_eq!(r.atoms().len(), 16);
        let q = 1.0 - p;
        let expected_weights = [
            q.powi(4),
            p * q.powi(3),
            p * q.powi(3),
            p * q.powi(3),
            p * q.powi(3),
            p * p * q * q,
            p * p * q * q,
            p * p * q * q,
            p * p * q * q,
            p * p * q * q,
            p * p * q * q,
            p.powi(3) * q,
            p.powi(3) * q,
            p.powi(3) * q,
            p.powi(3) * q,
            p.powi(4),
        ];
        for (i, a) in r.atoms().iter().enumerate() {
            assert_eq!(a.ifs.label(), i as u32);
            assert_relative_eq!(a.weight, expected_weights[i], max_relative = 1e-14);
        }
        // I_6 = {f1, f3}: bottom-left and top-right quadrants.
        let six = &r.atoms()[6].ifs;
        assert_eq!(six.maps()[0].translation(), &[0.0, 0.0]);
        assert_eq!(six.maps()[1].translation(), &[0.5, 0.5]);
        // I_14 = {f2, f3, f4}.
        let ts: Vec<&[f64]> = r.atoms()[14].ifs.maps().iter().map(|m| m.translation()).collect();
        assert_eq!(ts, vec![&[0.0, 0.5][..], &[0.5, 0.5][..], &[0.5, 0.0][..]]);
        assert!(r.atoms()[0].ifs.is_empty());
    }

    #[test]
    fn subcritical_percolation_is_rejected() {
        assert!(matches!(mandelbrot(2, 2, 0.25), Err(Error::Subcritical { .. })));
        assert!(mandelbrot(2, 2, 0.26).is_ok());
    }

    #[test]
    fn example1_extremes_are_deterministic() {
        let r = example1(0.0).unwrap();
        assert_eq!(r.c_min(), 1.0 / 3.0);
        assert_eq!(r.c_max(), 1.0 / 3.0);
        let r = example1(1.0).unwrap();
        assert_eq!(r.c_max(), 0.5);
        assert!(example1(1.5).is_err());
    }

    #[test]
    fn grid_in_one_dimension() {
        let maps = grid_maps(3, 1).unwrap();
        let t: Vec<f64> = maps.iter().map(|m| m.translation()[0]).collect();
        assert_relative_eq!(t[1], 1.0 / 3.0);
        assert_relative_eq!(t[2], 2.0 / 3.0);
        assert!(grid_maps(5, 2).is_err());
    }
}
