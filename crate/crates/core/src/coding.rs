//! Coding trees and ε-coding stopping sets.
//!
//! A coding is a node of the code tree together with the composition of the
//! maps along its path. The ε-codings are the codings whose cylinder
//! `f_e(closure(O))` first drops strictly below diameter ε, kept only if the
//! branch does not die out within `survival_horizon` further levels.

use crate::error::{Error, Result};
use crate::rifs::Rifs;
use crate::similarity::{AxisBox, SimilarityMap};
use crate::tree::{Address, NodeRef, Realisation};

pub const DEFAULT_SURVIVAL_HORIZON: usize = 8;

/// Relative slack under which a diameter counts as equal to ε (and so does not stop).
const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Coding {
    pub address: Address,
    pub map: SimilarityMap,
    /// False once the path has passed through a branch beyond the arity of the IFS drawn.
    pub alive: bool,
}

impl Coding {
    pub fn depth(&self) -> usize {
        self.address.len()
    }

    pub fn ratio(&self) -> f64 {
        self.map.ratio()
    }
}

/// The stopping set `Ξ_ε` of a realisation, with the geometry needed downstream.
#[derive(Clone, Debug)]
pub struct EpsilonCoding {
    pub epsilon: f64,
    pub survival_horizon: usize,
    pub members: Vec<Coding>,
    closure: AxisBox,
    c_min: f64,
}

impl EpsilonCoding {
    /// Assembles a coding set from parts; `epsilon_codings` is the usual constructor.
    pub fn from_parts(epsilon: f64, survival_horizon: usize, members: Vec<Coding>, closure: AxisBox, c_min: f64) -> Self {
        Self {
            epsilon,
            survival_horizon,
            members,
            closure,
            c_min,
        }
    }

    pub fn closure(&self) -> &AxisBox {
        &self.closure
    }

    pub fn diameter(&self) -> f64 {
        self.closure.diameter()
    }

    pub fn ambient_dim(&self) -> usize {
        self.closure.dim()
    }

    pub fn c_min(&self) -> f64 {
        self.c_min
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[inline]
pub(crate) fn below(diameter: f64, epsilon: f64) -> bool {
    diameter < epsilon * (1.0 - TIE_TOL)
}

/// Deepest level at which a branch can stop at scale `epsilon`: the first `k` with
/// `c_max^k |O| < ε`.
pub fn stop_depth_bound(rifs: &Rifs, epsilon: f64) -> usize {
    let rel = epsilon / rifs.diameter();
    if rel > 1.0 {
        return 1;
    }
    let k = rel.ln() / rifs.c_max().ln();
    (k + 1e-9).floor() as usize + 1
}

/// Realisation depth needed to enumerate `Ξ_ε` with the given survival horizon.
pub fn required_depth(rifs: &Rifs, epsilon: f64, survival_horizon: usize) -> usize {
    stop_depth_bound(rifs, epsilon) + survival_horizon
}

pub(crate) fn check_epsilon(rifs: &Rifs, epsilon: f64) -> Result<()> {
    let d = rifs.diameter();
    if !(epsilon > 0.0 && epsilon <= d * (1.0 + TIE_TOL)) {
        return Err(Error::Argument(format!("epsilon {epsilon} must lie in (0, |closure(O)| = {d}]")));
    }
    Ok(())
}

/// State carried down the tree: just the ratio, or the full composed map.
pub(crate) trait Track: Sized {
    fn root(d: usize) -> Self;
    fn ratio(&self) -> f64;
    fn child(&self, m: &SimilarityMap) -> Self;
}

impl Track for f64 {
    fn root(_d: usize) -> Self {
        1.0
    }
    #[inline]
    fn ratio(&self) -> f64 {
        *self
    }
    #[inline]
    fn child(&self, m: &SimilarityMap) -> Self {
        self * m.ratio()
    }
}

impl Track for SimilarityMap {
    fn root(d: usize) -> Self {
        SimilarityMap::identity(d)
    }
    #[inline]
    fn ratio(&self) -> f64 {
        SimilarityMap::ratio(self)
    }
    #[inline]
    fn child(&self, m: &SimilarityMap) -> Self {
        self.compose(m)
    }
}

/// Depth-first enumeration of `Ξ_ε(σ^start τ)` for several scales in one pass.
pub(crate) struct Walker<'r> {
    real: &'r Realisation,
    /// Scales in decreasing order, with their position in the caller's list.
    scales: Vec<(f64, usize)>,
    horizon: usize,
    diameter: f64,
}

impl<'r> Walker<'r> {
    pub(crate) fn new(real: &'r Realisation, start: NodeRef, epsilons: &[f64], horizon: usize) -> Result<Self> {
        let rifs = real.rifs();
        for &e in epsilons {
            check_epsilon(rifs, e)?;
        }
        let mut scales: Vec<(f64, usize)> = epsilons.iter().copied().zip(0..).collect();
        scales.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        if let Some(&(smallest, _)) = scales.last() {
            let required = start.depth + required_depth(rifs, smallest, horizon);
            if required > real.depth() {
                return Err(Error::InsufficientDepth {
                    required,
                    available: real.depth(),
                });
            }
        }
        Ok(Self {
            real,
            scales,
            horizon,
            diameter: rifs.diameter(),
        })
    }

    /// Calls `visit(scale_index, address, node, track)` for every member below
    /// `start`. For each scale the members arrive in address order.
    pub(crate) fn run<T: Track>(&self, start: NodeRef, visit: &mut impl FnMut(usize, &Address, NodeRef, &T)) {
        if self.scales.is_empty() {
            return;
        }
        let mut addr = Address::new();
        let root = T::root(self.real.rifs().ambient_dim());
        self.descend(start, &root, 0, &mut addr, visit);
    }

    /// Returns true only if `node` is known to have an alive chain of `horizon`
    /// further levels (a false return means unknown).
    fn descend<T: Track>(
        &self,
        node: NodeRef,
        track: &T,
        next: usize,
        addr: &mut Address,
        visit: &mut impl FnMut(usize, &Address, NodeRef, &T),
    ) -> bool {
        let mut stop = next;
        if !addr.is_empty() {
            let diam = track.ratio() * self.diameter;
            stop += self.scales[next..].iter().take_while(|(e, _)| below(diam, *e)).count();
            if stop == self.scales.len() {
                let alive = survives(self.real, node, self.horizon);
                if alive {
                    for &(_, idx) in &self.scales[next..stop] {
                        visit(idx, addr, node, track);
                    }
                }
                return alive;
            }
        }
        // Members at coarser scales are reported after their subtree; a surviving
        // descendant at a finer scale settles their own survival.
        let label = self.real.label(node);
        let ifs = self.real.rifs().ifs_of(&label);
        let mut known = false;
        for (b, m) in ifs.maps().iter().enumerate() {
            let t = track.child(m);
            addr.push(b as u8 + 1);
            known |= self.descend(self.real.child(node, b), &t, stop, addr, visit);
            addr.pop();
        }
        if stop > next {
            let alive = known || survives(self.real, node, self.horizon);
            if alive {
                for &(_, idx) in &self.scales[next..stop] {
                    visit(idx, addr, node, track);
                }
            }
            return alive;
        }
        known
    }
}

/// Does `node` have an alive descendant `horizon` levels further down?
pub(crate) fn survives(real: &Realisation, node: NodeRef, horizon: usize) -> bool {
    if horizon == 0 {
        return true;
    }
    let arity = real.rifs().ifs_of(&real.label(node)).len();
    (0..arity).any(|b| survives(real, real.child(node, b), horizon - 1))
}

/// `T_τ^depth`: every node of the full N-ary tree at `depth` with its coding.
/// Branches beyond the arity of the drawn IFS are annihilated, and stay so below.
pub fn coding_tree(real: &Realisation, depth: usize) -> Result<Vec<Coding>> {
    if depth > real.depth() {
        return Err(Error::Argument(format!(
            "coding tree depth {depth} exceeds realisation depth {}",
            real.depth()
        )));
    }
    let rifs = real.rifs();
    let n = rifs.max_arity();
    let mut level = vec![(
        Coding {
            address: Address::new(),
            map: SimilarityMap::identity(rifs.ambient_dim()),
            alive: true,
        },
        Some(real.root()),
    )];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(level.len() * n);
        for (coding, node) in level {
            let ifs = node.map(|nd| rifs.ifs_of(&real.label(nd)).into_owned());
            for b in 0..n {
                let mut address = coding.address.clone();
                address.push(b as u8 + 1);
                let step = match (&ifs, node) {
                    (Some(ifs), Some(nd)) if b < ifs.len() => Some((coding.map.compose(&ifs.maps()[b]), real.child(nd, b))),
                    _ => None,
                };
                next.push(match step {
                    Some((map, child)) => (Coding { address, map, alive: true }, Some(child)),
                    None => (
                        Coding {
                            address,
                            map: coding.map.clone(),
                            alive: false,
                        },
                        None,
                    ),
                });
            }
        }
        level = next;
    }
    Ok(level.into_iter().map(|(c, _)| c).collect())
}

/// Materialises `Ξ_ε(τ)` in address order.
pub fn epsilon_codings(real: &Realisation, epsilon: f64, survival_horizon: usize) -> Result<EpsilonCoding> {
    let start = real.root();
    let walker = Walker::new(real, start, &[epsilon], survival_horizon)?;
    let mut members = Vec::new();
    walker.run::<SimilarityMap>(start, &mut |_, addr, _, map| {
        members.push(Coding {
            address: addr.clone(),
            map: map.clone(),
            alive: true,
        })
    });
    Ok(EpsilonCoding::from_parts(
        epsilon,
        survival_horizon,
        members,
        real.rifs().closure().clone(),
        real.rifs().c_min(),
    ))
}

/// `#Ξ_ε(σ^start τ)` without building any geometry.
pub fn count_epsilon_codings_from(real: &Realisation, start: NodeRef, epsilon: f64, survival_horizon: usize) -> Result<u64> {
    Ok(count_epsilon_codings_multi_from(real, start, &[epsilon], survival_horizon)?[0])
}

/// `#Ξ_ε(σ^start τ)` for every ε in `epsilons`, in one traversal.
pub fn count_epsilon_codings_multi_from(
    real: &Realisation,
    start: NodeRef,
    epsilons: &[f64],
    survival_horizon: usize,
) -> Result<Vec<u64>> {
    let walker = Walker::new(real, start, epsilons, survival_horizon)?;
    let mut counts = vec![0u64; epsilons.len()];
    walker.run::<f64>(start, &mut |i, _, _, _| counts[i] += 1);
    Ok(counts)
}

/// `#Ξ_ε(τ)` for every ε in `epsilons`, in one traversal.
pub fn count_epsilon_codings_multi(real: &Realisation, epsilons: &[f64], survival_horizon: usize) -> Result<Vec<u64>> {
    count_epsilon_codings_multi_from(real, real.root(), epsilons, survival_horizon)
}

/// `#Ξ_ε(τ)`.
pub fn count_epsilon_codings(real: &Realisation, epsilon: f64, survival_horizon: usize) -> Result<u64> {
    count_epsilon_codings_from(real, real.root(), epsilon, survival_horizon)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProductBounds {
    pub lower: u64,
    pub upper: u64,
    pub actual: u64,
}

impl ProductBounds {
    pub fn holds(&self) -> bool {
        self.lower <= self.actual && self.actual <= self.upper
    }
}

/// Compares `#Ξ_{ε1 ε2}` with `Σ_{e ∈ Ξ_{ε1}} #Ξ_{ε2}(σ^e τ)` scaled by `N^{∓1}`.
///
/// Scales are absolute diameters, so the joint scale is `ε1 ε2 / |closure(O)|`.
/// `lower` is rounded up, which is equivalent for an integer `actual`.
pub fn coding_count_product_bounds(real: &Realisation, eps1: f64, eps2: f64, survival_horizon: usize) -> Result<ProductBounds> {
    let rifs = real.rifs();
    check_epsilon(rifs, eps1)?;
    check_epsilon(rifs, eps2)?;
    let required = stop_depth_bound(rifs, eps1) + required_depth(rifs, eps2, survival_horizon);
    if required > real.depth() {
        return Err(Error::InsufficientDepth {
            required,
            available: real.depth(),
        });
    }
    let start = real.root();
    let walker = Walker::new(real, start, &[eps1], survival_horizon)?;
    let mut firsts = Vec::new();
    walker.run::<f64>(start, &mut |_, _, node, _| firsts.push(node));
    let mut sum = 0u64;
    for node in firsts {
        sum += count_epsilon_codings_from(real, node, eps2, survival_horizon)?;
    }
    let n = rifs.max_arity() as u64;
    let actual = count_epsilon_codings(real, eps1 * eps2 / rifs.diameter(), survival_horizon)?;
    Ok(ProductBounds {
        lower: sum.div_ceil(n),
        upper: sum * n,
        actual,
    })
}
