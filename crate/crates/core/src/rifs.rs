//! Random iterated function systems: a probability distribution over IFSs of
//! similarities, with discrete atoms and uniformly distributed parametric families.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::similarity::{AxisBox, Interval, SimilarityMap};

const WEIGHT_TOL: f64 = 1e-12;
const GEOM_TOL: f64 = 1e-12;

/// Upper bound on the branching number; node addresses store branch indices as `u8`.
pub const MAX_ARITY: usize = 255;

/// A finite list of similarities tagged with its label in the label space.
#[derive(Clone, Debug, PartialEq)]
pub struct Ifs {
    label: u32,
    maps: Vec<SimilarityMap>,
}

impl Ifs {
    pub fn new(label: u32, maps: Vec<SimilarityMap>) -> Result<Self> {
        if maps.is_empty() && label != 0 {
            return Err(Error::InvalidRifs(format!(
                "empty IFS must carry the distinguished label 0, found {label}"
            )));
        }
        if !maps.is_empty() && label == 0 {
            return Err(Error::InvalidRifs("label 0 is reserved for the empty IFS".into()));
        }
        if maps.len() > MAX_ARITY {
            return Err(Error::InvalidRifs(format!("IFS with {} maps exceeds {MAX_ARITY}", maps.len())));
        }
        if let Some(d) = maps.first().map(SimilarityMap::dim) {
            if maps.iter().any(|m| m.dim() != d) {
                return Err(Error::InvalidRifs("maps of mixed dimension".into()));
            }
        }
        Ok(Self { label, maps })
    }

    pub fn empty() -> Self {
        Self { label: 0, maps: Vec::new() }
    }

    pub fn label(&self) -> u32 {
        self.label
    }

    pub fn maps(&self) -> &[SimilarityMap] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }
}

/// A coefficient of a map template: fixed, or one coordinate of the parameter point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Coef {
    Const(f64),
    Param(usize),
}

impl Coef {
    fn eval(self, params: &[f64]) -> f64 {
        match self {
            Coef::Const(v) => v,
            Coef::Param(i) => params[i],
        }
    }

    fn interval(self, pbox: &[(f64, f64)]) -> Interval {
        match self {
            Coef::Const(v) => Interval::point(v),
            Coef::Param(i) => Interval::new(pbox[i].0, pbox[i].1),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapTemplate {
    pub ratio: Coef,
    pub orthogonal: Vec<f64>,
    pub translation: Vec<Coef>,
}

/// Builds an IFS from a parameter point. Ratios are single coefficients so that
/// expectations of `ratio^s` have closed forms.
#[derive(Clone, Debug, PartialEq)]
pub struct Template {
    name: String,
    dim: usize,
    n_params: usize,
    maps: Vec<MapTemplate>,
}

impl Template {
    pub fn new(name: impl Into<String>, dim: usize, n_params: usize, maps: Vec<MapTemplate>) -> Result<Self> {
        let name = name.into();
        for m in &maps {
            if m.translation.len() != dim || m.orthogonal.len() != dim * dim {
                return Err(Error::InvalidRifs(format!("template `{name}` has a map of wrong dimension")));
            }
            for c in std::iter::once(&m.ratio).chain(&m.translation) {
                if let Coef::Param(i) = c {
                    if *i >= n_params {
                        return Err(Error::InvalidRifs(format!(
                            "template `{name}` refers to parameter {i} of {n_params}"
                        )));
                    }
                }
            }
            // Validates orthogonality once, independent of parameters.
            SimilarityMap::new(0.5, &m.orthogonal, &vec![0.0; dim])?;
        }
        Ok(Self {
            name,
            dim,
            n_params,
            maps,
        })
    }

    /// Named templates available to configuration files.
    pub fn from_registry(name: &str) -> Option<Template> {
        match name {
            // (a, b, c) -> {a x, b x + c}
            "example2_cantor" => Template::new(
                name,
                1,
                3,
                vec![
                    MapTemplate {
                        ratio: Coef::Param(0),
                        orthogonal: vec![1.0],
                        translation: vec![Coef::Const(0.0)],
                    },
                    MapTemplate {
                        ratio: Coef::Param(1),
                        orthogonal: vec![1.0],
                        translation: vec![Coef::Param(2)],
                    },
                ],
            )
            .ok(),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn maps(&self) -> &[MapTemplate] {
        &self.maps
    }

    pub fn build(&self, params: &[f64]) -> Result<Vec<SimilarityMap>> {
        self.maps
            .iter()
            .map(|m| {
                let t: Vec<f64> = m.translation.iter().map(|c| c.eval(params)).collect();
                SimilarityMap::new(m.ratio.eval(params), &m.orthogonal, &t)
            })
            .collect()
    }

    /// Interval hull of the images of `set` under map `i`, over all parameters in `pbox`.
    fn image_hull(&self, i: usize, set: &AxisBox, pbox: &[(f64, f64)]) -> AxisBox {
        let m = &self.maps[i];
        let d = self.dim;
        let rotated = SimilarityMap::new(0.5, &m.orthogonal, &vec![0.0; d])
            .expect("validated in Template::new")
            .image_box(set);
        let ratio = m.ratio.interval(pbox);
        let mut lo = SmallVec::new();
        let mut hi = SmallVec::new();
        for k in 0..d {
            // `rotated` was scaled by 0.5; undo that before scaling by the ratio interval.
            let axis = Interval::new(2.0 * rotated.lo[k], 2.0 * rotated.hi[k]);
            let img = axis.mul(ratio).add(m.translation[k].interval(pbox));
            lo.push(img.lo);
            hi.push(img.hi);
        }
        AxisBox { lo, hi }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub ifs: Ifs,
    pub weight: f64,
}

/// Uniform distribution on an axis-aligned parameter box, pushed through a template.
#[derive(Clone, Debug, PartialEq)]
pub struct ParametricFamily {
    pub label: u32,
    pub param_box: Vec<(f64, f64)>,
    pub template: Template,
    pub mass: f64,
}

/// The open set of the uniform open set condition; its closure doubles as the
/// compact set the construction starts from.
#[derive(Clone, Debug, PartialEq)]
pub enum OpenSetSpec {
    UnitCubeInterior,
    AxisBox(AxisBox),
    /// The user declares UOSC holds for the interior of this box; not machine checked.
    Asserted(AxisBox),
}

impl OpenSetSpec {
    pub fn closure(&self, d: usize) -> AxisBox {
        match self {
            OpenSetSpec::UnitCubeInterior => AxisBox::unit_cube(d),
            OpenSetSpec::AxisBox(b) | OpenSetSpec::Asserted(b) => b.clone(),
        }
    }

    pub fn is_asserted(&self) -> bool {
        matches!(self, OpenSetSpec::Asserted(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            OpenSetSpec::UnitCubeInterior => "unit_cube_interior",
            OpenSetSpec::AxisBox(_) => "axis_box",
            OpenSetSpec::Asserted(_) => "asserted",
        }
    }
}

/// What a tree node was labelled with.
#[derive(Clone, Debug, PartialEq)]
pub enum Label {
    Atom(u32),
    Family { index: u32, params: SmallVec<[f64; 4]> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rifs {
    ambient_dim: usize,
    atoms: Vec<Atom>,
    families: Vec<ParametricFamily>,
    open_set: OpenSetSpec,
    closure: AxisBox,
    max_arity: usize,
    c_min: f64,
    c_max: f64,
    /// Cumulative masses: atoms first, then families.
    cumulative: Vec<f64>,
}

impl Rifs {
    pub fn new(
        ambient_dim: usize,
        atoms: Vec<Atom>,
        families: Vec<ParametricFamily>,
        open_set: OpenSetSpec,
    ) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(Error::InvalidRifs("ambient dimension must be positive".into()));
        }
        if atoms.is_empty() && families.is_empty() {
            return Err(Error::InvalidRifs("no atoms and no parametric families".into()));
        }
        let closure = open_set.closure(ambient_dim);
        if closure.dim() != ambient_dim {
            return Err(Error::InvalidRifs("open set dimension differs from ambient dimension".into()));
        }

        let mut masses = Vec::with_capacity(atoms.len() + families.len());
        for a in &atoms {
            if !(0.0..=1.0).contains(&a.weight) {
                return Err(Error::InvalidRifs(format!("atom weight {} outside [0, 1]", a.weight)));
            }
            if a.ifs.maps().iter().any(|m| m.dim() != ambient_dim) {
                return Err(Error::InvalidRifs(format!(
                    "IFS {} has maps not acting on R^{ambient_dim}",
                    a.ifs.label()
                )));
            }
            masses.push(a.weight);
        }
        for f in &families {
            if !(0.0..=1.0).contains(&f.mass) {
                return Err(Error::InvalidRifs(format!("family mass {} outside [0, 1]", f.mass)));
            }
            if f.template.dim() != ambient_dim {
                return Err(Error::InvalidRifs(format!(
                    "template `{}` does not act on R^{ambient_dim}",
                    f.template.name()
                )));
            }
            if f.param_box.len() != f.template.n_params() {
                return Err(Error::InvalidRifs(format!(
                    "template `{}` takes {} parameters, box has {}",
                    f.template.name(),
                    f.template.n_params(),
                    f.param_box.len()
                )));
            }
            if f.param_box.iter().any(|&(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
                return Err(Error::InvalidRifs("parameter box with empty interval".into()));
            }
            if f.template.maps().is_empty() {
                return Err(Error::InvalidRifs("parametric family with empty template".into()));
            }
            masses.push(f.mass);
        }
        let total = neumaier_sum(masses.iter().copied());
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidRifs(format!("weights sum to {total}, not 1")));
        }
        let mut labels: Vec<u32> = atoms.iter().map(|a| a.ifs.label()).chain(families.iter().map(|f| f.label)).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidRifs("duplicate labels".into()));
        }
        if families.iter().any(|f| f.label == 0) {
            return Err(Error::InvalidRifs("label 0 is reserved for the empty IFS".into()));
        }

        let mut c_min = f64::INFINITY;
        let mut c_max = f64::NEG_INFINITY;
        let mut max_arity = 0;
        for a in atoms.iter().filter(|a| a.weight > 0.0) {
            max_arity = max_arity.max(a.ifs.len());
            for m in a.ifs.maps() {
                c_min = c_min.min(m.ratio());
                c_max = c_max.max(m.ratio());
            }
        }
        for f in families.iter().filter(|f| f.mass > 0.0) {
            max_arity = max_arity.max(f.template.maps().len());
            for m in f.template.maps() {
                let r = m.ratio.interval(&f.param_box);
                if !(r.lo > 0.0 && r.hi < 1.0) {
                    return Err(Error::InvalidRifs(format!(
                        "template `{}` ratio range [{}, {}] not inside (0, 1)",
                        f.template.name(),
                        r.lo,
                        r.hi
                    )));
                }
                c_min = c_min.min(r.lo);
                c_max = c_max.max(r.hi);
            }
        }
        if max_arity == 0 {
            return Err(Error::Extinguishing { expected_arity: 0.0 });
        }
        if max_arity > MAX_ARITY {
            return Err(Error::InvalidRifs(format!("arity {max_arity} exceeds {MAX_ARITY}")));
        }

        let mut cumulative = Vec::with_capacity(masses.len());
        let mut acc = 0.0;
        for m in &masses {
            acc += m / total;
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }

        let rifs = Self {
            ambient_dim,
            atoms,
            families,
            open_set,
            closure,
            max_arity,
            c_min,
            c_max,
            cumulative,
        };
        let arity = rifs.expected_arity();
        if arity <= 1.0 {
            return Err(Error::Extinguishing { expected_arity: arity });
        }
        if !rifs.open_set.is_asserted() {
            rifs.check_uosc()?;
        }
        Ok(rifs)
    }

    /// A single deterministic IFS (weight-one atom).
    pub fn deterministic(maps: Vec<SimilarityMap>, open_set: OpenSetSpec) -> Result<Self> {
        let d = maps
            .first()
            .map(SimilarityMap::dim)
            .ok_or_else(|| Error::InvalidRifs("empty deterministic IFS".into()))?;
        Rifs::new(d, vec![Atom { ifs: Ifs::new(1, maps)?, weight: 1.0 }], vec![], open_set)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn families(&self) -> &[ParametricFamily] {
        &self.families
    }

    pub fn open_set(&self) -> &OpenSetSpec {
        &self.open_set
    }

    /// Closure of the open set, also used as the initial compact set.
    pub fn closure(&self) -> &AxisBox {
        &self.closure
    }

    /// `|closure(O)|`.
    pub fn diameter(&self) -> f64 {
        self.closure.diameter()
    }

    pub fn max_arity(&self) -> usize {
        self.max_arity
    }

    pub fn c_min(&self) -> f64 {
        self.c_min
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    pub fn expected_arity(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.ifs.len() as f64).sum::<f64>()
            + self
                .families
                .iter()
                .map(|f| f.mass * f.template.maps().len() as f64)
                .sum::<f64>()
    }

    /// Draws a label. `uniform` must return independent uniforms in `[0, 1)`.
    pub fn sample_label(&self, mut uniform: impl FnMut() -> f64) -> Label {
        let u = uniform();
        let idx = self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1);
        if idx < self.atoms.len() {
            Label::Atom(idx as u32)
        } else {
            let fi = idx - self.atoms.len();
            let params = self.families[fi]
                .param_box
                .iter()
                .map(|&(a, b)| a + (b - a) * uniform())
                .collect();
            Label::Family {
                index: fi as u32,
                params,
            }
        }
    }

    pub fn ifs_of(&self, label: &Label) -> Cow<'_, Ifs> {
        match label {
            Label::Atom(i) => Cow::Borrowed(&self.atoms[*i as usize].ifs),
            Label::Family { index, params } => {
                let f = &self.families[*index as usize];
                let maps = f.template.build(params).expect("parameters inside validated box");
                Cow::Owned(Ifs { label: f.label, maps })
            }
        }
    }

    /// The label identifier of a sampled label.
    pub fn label_id(&self, label: &Label) -> u32 {
        match label {
            Label::Atom(i) => self.atoms[*i as usize].ifs.label(),
            Label::Family { index, .. } => self.families[*index as usize].label,
        }
    }

    /// Interval-arithmetic check of the uniform open set condition on `closure`.
    fn check_uosc(&self) -> Result<()> {
        let set = &self.closure;
        let check = |label: u32, images: &[AxisBox]| -> Result<()> {
            for (i, b) in images.iter().enumerate() {
                if !set.contains_box(b, GEOM_TOL) {
                    return Err(Error::InvalidRifs(format!(
                        "UOSC: map {} of IFS {label} does not send the open set into itself",
                        i + 1
                    )));
                }
                for (j, c) in images.iter().enumerate().skip(i + 1) {
                    if !b.interiors_disjoint(c, GEOM_TOL) {
                        return Err(Error::InvalidRifs(format!(
                            "UOSC: images of maps {} and {} of IFS {label} overlap",
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
            Ok(())
        };
        for a in self.atoms.iter().filter(|a| a.weight > 0.0) {
            let images: Vec<AxisBox> = a.ifs.maps().iter().map(|m| m.image_box(set)).collect();
            check(a.ifs.label(), &images)?;
        }
        for f in self.families.iter().filter(|f| f.mass > 0.0) {
            let images: Vec<AxisBox> = (0..f.template.maps().len())
                .map(|i| f.template.image_hull(i, set, &f.param_box))
                .collect();
            check(f.label, &images)?;
        }
        Ok(())
    }
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
