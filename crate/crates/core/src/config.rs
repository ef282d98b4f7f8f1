//! TOML model descriptions and built-in model strings.
//!
//! A model is either a built-in such as `mandelbrot(2,2,0.8)` or a table:
//!
//! ```toml
//! ambient_dim = 1
//! model = "recursive"
//!
//! [open_set]
//! kind = "axis_box"
//! lo = [0.0]
//! hi = [1.0]
//!
//! [[atoms]]
//! weight = 0.5
//! maps = [{ ratio = 0.5, offset = 0.0 }, { ratio = 0.5, offset = 0.5 }]
//!
//! [[atoms]]
//! weight = 0.5
//! maps = [{ ratio = 0.3333333333333333, offset = 0.0 }, { ratio = 0.3333333333333333, offset = 0.6666666666666666 }]
//! ```

use serde::{Deserialize, Serialize};

use crate::builtin;
use crate::error::{Error, Result};
use crate::rifs::{Atom, Ifs, OpenSetSpec, ParametricFamily, Rifs, Template};
use crate::similarity::{AxisBox, SimilarityMap};
use crate::tree::Model;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDef {
    pub ratio: f64,
    /// Row-major `d x d`; identity when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orthogonal: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation: Option<Vec<f64>>,
    /// Shorthand for one-dimensional maps `x -> ratio x + offset` (or `-x` with `flip`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub flip: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomDef {
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u32>,
    #[serde(default)]
    pub maps: Vec<MapDef>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDef {
    pub mass: f64,
    pub template: String,
    #[serde(rename = "box")]
    pub param_box: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenSetDef {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
}

/// Model section of a configuration file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open_set: Option<OpenSetDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<AtomDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty", alias = "families")]
    pub parametric_families: Vec<FamilyDef>,
    /// `recursive`, `homogeneous` or `v_variable`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<u32>,
    /// Declared bound on the number of maps per IFS.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_arity: Option<usize>,
}

impl ModelDef {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("model", e.message().trim().to_string()))
    }

    pub fn builtin(spec: impl Into<String>) -> Self {
        Self {
            builtin: Some(spec.into()),
            ..Self::default()
        }
    }

    pub fn randomness(&self) -> Result<Model> {
        parse_model(self.model.as_deref().unwrap_or("recursive"), self.v)
    }

    pub fn build(&self) -> Result<Rifs> {
        if let Some(spec) = &self.builtin {
            if self.ambient_dim.is_some() || !self.atoms.is_empty() || !self.parametric_families.is_empty() {
                return Err(Error::config("builtin", "a builtin model cannot also list atoms or families"));
            }
            let rifs = parse_builtin(spec)?;
            self.check_arity(&rifs)?;
            return Ok(rifs);
        }
        let d = self
            .ambient_dim
            .ok_or_else(|| Error::config("ambient_dim", "required unless `builtin` is given"))?;
        if d == 0 {
            return Err(Error::config("ambient_dim", "must be positive"));
        }
        let open_set = match &self.open_set {
            None => OpenSetSpec::UnitCubeInterior,
            Some(o) => open_set(o, d)?,
        };
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for (i, a) in self.atoms.iter().enumerate() {
            let key = format!("atoms[{i}]");
            let maps = a
                .maps
                .iter()
                .enumerate()
                .map(|(j, m)| map(m, d).map_err(|e| rekey(e, format!("{key}.maps[{j}]"))))
                .collect::<Result<Vec<_>>>()?;
            let label = a.label.unwrap_or(if maps.is_empty() { 0 } else { i as u32 + 1 });
            let ifs = Ifs::new(label, maps).map_err(|e| rekey(e, format!("{key}.label")))?;
            atoms.push(Atom { ifs, weight: a.weight });
        }
        let mut families = Vec::with_capacity(self.parametric_families.len());
        for (i, f) in self.parametric_families.iter().enumerate() {
            let key = format!("parametric_families[{i}]");
            let template = Template::from_registry(&f.template)
                .ok_or_else(|| Error::config(format!("{key}.template"), format!("unknown template `{}`", f.template)))?;
            if f.param_box.len() != template.n_params() {
                return Err(Error::config(
                    format!("{key}.box"),
                    format!("template `{}` takes {} parameters, box has {}", f.template, template.n_params(), f.param_box.len()),
                ));
            }
            if let Some(k) = f.param_box.iter().position(|b| !(b[0] <= b[1])) {
                return Err(Error::config(format!("{key}.box[{k}]"), "interval must have lo <= hi"));
            }
            families.push(ParametricFamily {
                label: f.label.unwrap_or((self.atoms.len() + i + 1) as u32),
                param_box: f.param_box.iter().map(|b| (b[0], b[1])).collect(),
                template,
                mass: f.mass,
            });
        }
        let rifs = Rifs::new(d, atoms, families, open_set).map_err(|e| rekey(e, "model"))?;
        self.check_arity(&rifs)?;
        Ok(rifs)
    }

    fn check_arity(&self, rifs: &Rifs) -> Result<()> {
        match self.max_arity {
            Some(n) if rifs.max_arity() > n => Err(Error::config(
                "max_arity",
                format!("an IFS has {} maps, more than the declared {n}", rifs.max_arity()),
            )),
            _ => Ok(()),
        }
    }
}

/// Moves rifs and map validation errors under a configuration key.
fn rekey(e: Error, key: impl Into<String>) -> Error {
    match e {
        Error::InvalidMap(msg) | Error::InvalidRifs(msg) | Error::Argument(msg) => Error::config(key, msg),
        other => other,
    }
}

fn map(m: &MapDef, d: usize) -> Result<SimilarityMap> {
    if let Some(offset) = m.offset {
        if d != 1 || m.translation.is_some() || m.orthogonal.is_some() {
            return Err(Error::config("offset", "`offset` is for one-dimensional maps without `translation`"));
        }
        return SimilarityMap::line(m.ratio, offset, m.flip);
    }
    if m.flip {
        return Err(Error::config("flip", "`flip` needs `offset`"));
    }
    let t = m.translation.clone().unwrap_or_else(|| vec![0.0; d]);
    if t.len() != d {
        return Err(Error::config("translation", format!("expected {d} entries, got {}", t.len())));
    }
    let o = match &m.orthogonal {
        Some(o) => o.clone(),
        None => (0..d * d).map(|k| if k / d == k % d { 1.0 } else { 0.0 }).collect(),
    };
    if o.len() != d * d {
        return Err(Error::config("orthogonal", format!("expected {} entries, got {}", d * d, o.len())));
    }
    SimilarityMap::new(m.ratio, &o, &t)
}

fn open_set(o: &OpenSetDef, d: usize) -> Result<OpenSetSpec> {
    let boxed = || -> Result<AxisBox> {
        let lo = o.lo.as_ref().ok_or_else(|| Error::config("open_set.lo", "required for this kind"))?;
        let hi = o.hi.as_ref().ok_or_else(|| Error::config("open_set.hi", "required for this kind"))?;
        if lo.len() != d || hi.len() != d {
            return Err(Error::config("open_set", format!("lo and hi need {d} entries")));
        }
        AxisBox::new(lo, hi).map_err(|e| rekey(e, "open_set"))
    };
    match o.kind.as_str() {
        "unit_cube_interior" => Ok(OpenSetSpec::UnitCubeInterior),
        "axis_box" => Ok(OpenSetSpec::AxisBox(boxed()?)),
        "asserted" => Ok(OpenSetSpec::Asserted(boxed()?)),
        other => Err(Error::config(
            "open_set.kind",
            format!("unknown kind `{other}` (unit_cube_interior, axis_box, asserted)"),
        )),
    }
}

pub fn parse_model(kind: &str, v: Option<u32>) -> Result<Model> {
    match kind {
        "recursive" => Ok(Model::Recursive),
        "homogeneous" => Ok(Model::Homogeneous),
        "v_variable" => {
            let v = v.ok_or_else(|| Error::config("v", "required for the v_variable model"))?;
            if v < 1 {
                return Err(Error::config("v", format!("V must be at least 1, got {v}")));
            }
            Ok(Model::VVariable(v))
        }
        other => Err(Error::config(
            "model",
            format!("unknown model `{other}` (recursive, homogeneous, v_variable)"),
        )),
    }
}

/// Splits `name(a, b, ...)` into the name and its arguments.
fn call(spec: &str) -> Result<(&str, Vec<&str>)> {
    let spec = spec.trim();
    let Some(open) = spec.find('(') else {
        return Ok((spec, Vec::new()));
    };
    let inner = spec[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| Error::config("builtin", format!("missing `)` in `{spec}`")))?;
    let args = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(str::trim).collect()
    };
    Ok((spec[..open].trim(), args))
}

fn arg<T: std::str::FromStr>(args: &[&str], i: usize, name: &str, spec: &str) -> Result<T> {
    args.get(i)
        .ok_or_else(|| Error::config("builtin", format!("`{spec}` is missing argument `{name}`")))?
        .parse()
        .map_err(|_| Error::config("builtin", format!("`{spec}`: cannot parse `{name}` = `{}`", args[i])))
}

/// `example1(p)`, `example2`, `cantor`, `mandelbrot(k, d, p)` or `falconer_jin(k, d, p)`.
pub fn parse_builtin(spec: &str) -> Result<Rifs> {
    let (name, args) = call(spec)?;
    let expect = |n: usize| -> Result<()> {
        if args.len() == n {
            Ok(())
        } else {
            Err(Error::config("builtin", format!("`{name}` takes {n} arguments, got {}", args.len())))
        }
    };
    let rifs = match name {
        "example1" => {
            expect(1)?;
            builtin::example1(arg(&args, 0, "p", spec)?)
        }
        "example2" => {
            expect(0)?;
            Ok(builtin::example2())
        }
        "cantor" => {
            expect(0)?;
            Ok(builtin::cantor())
        }
        "mandelbrot" | "falconer_jin" => {
            expect(3)?;
            let k: usize = arg(&args, 0, "k", spec)?;
            let d: usize = arg(&args, 1, "d", spec)?;
            let p: f64 = arg(&args, 2, "p", spec)?;
            if name == "mandelbrot" {
                builtin::mandelbrot(k, d, p)
            } else {
                builtin::grid_maps(k, d).and_then(|maps| builtin::falconer_jin(maps, p, OpenSetSpec::UnitCubeInterior))
            }
        }
        other => {
            return Err(Error::config(
                "builtin",
                format!("unknown builtin `{other}` (example1, example2, cantor, mandelbrot, falconer_jin)"),
            ))
        }
    };
    rifs.map_err(|e| match e {
        Error::Argument(msg) | Error::InvalidRifs(msg) | Error::Unsupported(msg) => Error::config("builtin", msg),
        other => other,
    })
}

/// The percolation parameters `(k, d, p)` of a `mandelbrot` builtin, if it is one.
pub fn percolation_params(spec: &str) -> Option<(usize, usize, f64)> {
    let (name, args) = call(spec).ok()?;
    if name != "mandelbrot" || args.len() != 3 {
        return None;
    }
    Some((args[0].parse().ok()?, args[1].parse().ok()?, args[2].parse().ok()?))
}
