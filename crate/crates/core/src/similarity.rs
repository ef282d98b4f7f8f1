//! Similarities of Euclidean space and the axis-aligned boxes they act on.

use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Coordinates of a point; inline for d <= 2.
pub type Point = SmallVec<[f64; 2]>;

const ORTHO_TOL: f64 = 1e-12;

/// `x -> ratio * orthogonal * x + translation`, with `orthogonal` stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMap {
    ratio: f64,
    orthogonal: SmallVec<[f64; 4]>,
    translation: Point,
}

impl SimilarityMap {
    pub fn new(ratio: f64, orthogonal: &[f64], translation: &[f64]) -> Result<Self> {
        let d = translation.len();
        if d == 0 {
            return Err(Error::InvalidMap("ambient dimension must be positive".into()));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidMap(format!("ratio {ratio} is not in (0, 1)")));
        }
        if orthogonal.len() != d * d {
            return Err(Error::InvalidMap(format!(
                "orthogonal part has {} entries, expected {}",
                orthogonal.len(),
                d * d
            )));
        }
        if translation.iter().chain(orthogonal).any(|v| !v.is_finite()) {
            return Err(Error::InvalidMap("non-finite coefficient".into()));
        }
        for i in 0..d {
            for j in 0..d {
                let dot: f64 = (0..d).map(|k| orthogonal[i * d + k] * orthogonal[j * d + k]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > ORTHO_TOL {
                    return Err(Error::InvalidMap(format!(
                        "orthogonal part is not orthonormal (row {i} . row {j} = {dot})"
                    )));
                }
            }
        }
        Ok(Self {
            ratio,
            orthogonal: orthogonal.into(),
            translation: translation.into(),
        })
    }

    /// Homothety `x -> ratio * x + translation`.
    pub fn homothety(ratio: f64, translation: &[f64]) -> Result<Self> {
        let d = translation.len();
        Self::new(ratio, &identity_matrix(d), translation)
    }

    /// One-dimensional map `x -> ±ratio * x + offset`.
    pub fn line(ratio: f64, offset: f64, flip: bool) -> Result<Self> {
        Self::new(ratio, &[if flip { -1.0 } else { 1.0 }], &[offset])
    }

    /// The identity. Not a contraction, so it is only produced internally as the
    /// map of the empty word.
    pub fn identity(d: usize) -> Self {
        Self {
            ratio: 1.0,
            orthogonal: identity_matrix(d).into(),
            translation: smallvec::smallvec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn orthogonal(&self) -> &[f64] {
        &self.orthogonal
    }

    pub fn translation(&self) -> &[f64] {
        &self.translation
    }

    pub fn apply(&self, x: &[f64]) -> Point {
        let d = self.dim();
        debug_assert_eq!(x.len(), d);
        (0..d)
            .map(|i| {
                let row = &self.orthogonal[i * d..(i + 1) * d];
                self.ratio * row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.translation[i]
            })
            .collect()
    }

    /// `self ∘ inner`, i.e. apply `inner` first.
    pub fn compose(&self, inner: &SimilarityMap) -> SimilarityMap {
        let d = self.dim();
        debug_assert_eq!(inner.dim(), d);
        let mut orthogonal: SmallVec<[f64; 4]> = smallvec::smallvec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                orthogonal[i * d + j] = (0..d)
                    .map(|k| self.orthogonal[i * d + k] * inner.orthogonal[k * d + j])
                    .sum();
            }
        }
        let moved = self.apply(&inner.translation);
        SimilarityMap {
            ratio: self.ratio * inner.ratio,
            orthogonal,
            translation: moved,
        }
    }

    /// Tight axis-aligned box around the image of `b`.
    pub fn image_box(&self, b: &AxisBox) -> AxisBox {
        let d = self.dim();
        let c = self.apply(&b.center());
        let half: Point = (0..d).map(|k| 0.5 * (b.hi[k] - b.lo[k])).collect();
        let mut lo = Point::with_capacity(d);
        let mut hi = Point::with_capacity(d);
        for i in 0..d {
            let ext: f64 = (0..d)
                .map(|j| self.orthogonal[i * d + j].abs() * half[j])
                .sum::<f64>()
                * self.ratio;
            lo.push(c[i] - ext);
            hi.push(c[i] + ext);
        }
        AxisBox { lo, hi }
    }
}

fn identity_matrix(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

/// Closed axis-aligned box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisBox {
    pub lo: Point,
    pub hi: Point,
}

impl AxisBox {
    pub fn new(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Argument("box corners must have equal positive dimension".into()));
        }
        if lo.iter().zip(hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::Argument(format!("degenerate box {lo:?}..{hi:?}")));
        }
        Ok(Self {
            lo: lo.into(),
            hi: hi.into(),
        })
    }

    pub fn unit_cube(d: usize) -> Self {
        Self {
            lo: smallvec::smallvec![0.0; d],
            hi: smallvec::smallvec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Point {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    /// Euclidean diameter (length of the diagonal).
    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains_box(&self, other: &AxisBox, tol: f64) -> bool {
        (0..self.dim()).all(|i| other.lo[i] >= self.lo[i] - tol && other.hi[i] <= self.hi[i] + tol)
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }

    /// Interiors are disjoint (touching faces allowed).
    pub fn interiors_disjoint(&self, other: &AxisBox, tol: f64) -> bool {
        (0..self.dim()).any(|i| self.hi[i] <= other.lo[i] + tol || other.hi[i] <= self.lo[i] + tol)
    }

    /// Euclidean distance from `x` to the closed box (0 inside).
    pub fn distance_to(&self, x: &[f64]) -> f64 {
        (0..self.dim())
            .map(|i| {
                let d = if x[i] < self.lo[i] {
                    self.lo[i] - x[i]
                } else if x[i] > self.hi[i] {
                    x[i] - self.hi[i]
                } else {
                    0.0
                };
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Does the closed box meet the open ball `B(x, radius)`?
    pub fn meets_ball(&self, x: &[f64], radius: f64) -> bool {
        self.distance_to(x) < radius
    }
}

/// Closed real interval, used for sound image bounds over parameter boxes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn add(self, o: Interval) -> Interval {
        Interval::new(self.lo + o.lo, self.hi + o.hi)
    }

    pub fn mul(self, o: Interval) -> Interval {
        let c = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        Interval::new(
            c.iter().copied().fold(f64::INFINITY, f64::min),
            c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    }

    pub fn hull(self, o: Interval) -> Interval {
        Interval::new(self.lo.min(o.lo), self.hi.max(o.hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rotation(theta: f64, ratio: f64, t: [f64; 2]) -> SimilarityMap {
        let (s, c) = theta.sin_cos();
        SimilarityMap::new(ratio, &[c, -s, s, c], &t).unwrap()
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    #[test]
    fn rejects_bad_ratio_and_non_orthogonal() {
        assert!(SimilarityMap::line(1.0, 0.0, false).is_err());
        assert!(SimilarityMap::line(0.0, 0.0, false).is_err());
        assert!(SimilarityMap::new(0.5, &[1.0, 0.1, 0.0, 1.0], &[0.0, 0.0]).is_err());
        assert!(SimilarityMap::new(0.5, &[1.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn compose_applies_inner_first() {
        let f = SimilarityMap::line(0.5, 0.5, false).unwrap();
        let g = SimilarityMap::line(1.0 / 3.0, 2.0 / 3.0, false).unwrap();
        let fg = f.compose(&g);
        let x = [0.3];
        assert_relative_eq!(fg.apply(&x)[0], f.apply(&g.apply(&x))[0], epsilon = 1e-15);
        assert_relative_eq!(fg.ratio(), 0.5 / 3.0);
    }

    #[test]
    fn image_box_of_rotation_is_tight() {
        let f = rotation(std::f64::consts::FRAC_PI_4, 0.5, [0.0, 0.0]);
        let b = f.image_box(&AxisBox::unit_cube(2));
        // Rotated square of side 1/2 has axis extent sqrt(2)/2.
        assert_relative_eq!(b.side(0), 0.5 * 2f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(b.side(1), 0.5 * 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn fifty_compositions_stay_similar() {
        let maps = [
            rotation(0.7, 0.9, [0.1, -0.2]),
            rotation(-1.3, 0.8, [0.3, 0.05]),
            rotation(2.1, 0.95, [-0.4, 0.2]),
        ];
        let mut acc = SimilarityMap::identity(2);
        let mut ratio = 1.0;
        for i in 0..50 {
            acc = acc.compose(&maps[i % 3]);
            ratio *= maps[i % 3].ratio();
        }
        let (x, y) = ([0.2, 0.9], [-0.7, 0.4]);
        let got = dist(&acc.apply(&x), &acc.apply(&y));
        assert_relative_eq!(got, ratio * dist(&x, &y), max_relative = 1e-10);
        assert_relative_eq!(acc.ratio(), ratio, max_relative = 1e-12);
    }

    #[test]
    fn interval_product_handles_signs() {
        let a = Interval::new(-1.0, 2.0);
        let b = Interval::new(-3.0, 0.5);
        assert_eq!(a.mul(b), Interval::new(-6.0, 3.0));
    }

    proptest! {
        #[test]
        fn distances_scale_by_ratio(theta in -3.2f64..3.2, ratio in 0.01f64..0.99,
                                    tx in -2.0f64..2.0, ty in -2.0f64..2.0,
                                    x in proptest::array::uniform2(-5.0f64..5.0),
                                    y in proptest::array::uniform2(-5.0f64..5.0)) {
            let f = rotation(theta, ratio, [tx, ty]);
            let got = dist(&f.apply(&x), &f.apply(&y));
            let want = ratio * dist(&x, &y);
            prop_assert!((got - want).abs() <= 1e-12 * want.max(1e-300) + 1e-15);
        }

        #[test]
        fn image_box_contains_image_of_corners(theta in -3.2f64..3.2, ratio in 0.01f64..0.99,
                                               tx in -2.0f64..2.0, ty in -2.0f64..2.0) {
            let f = rotation(theta, ratio, [tx, ty]);
            let unit = AxisBox::unit_cube(2);
            let b = f.image_box(&unit);
            for corner in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
                let p = f.apply(&corner);
                prop_assert!(p[0] >= b.lo[0] - 1e-12 && p[0] <= b.hi[0] + 1e-12);
                prop_assert!(p[1] >= b.lo[1] - 1e-12 && p[1] <= b.hi[1] + 1e-12);
            }
            prop_assert!(b.side(0) >= ratio - 1e-12 && b.side(1) >= ratio - 1e-12);
        }
    }
}
