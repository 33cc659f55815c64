//! Text formats for domain and map specifications.
//!
//! A specification is a JSON or TOML document whose `variant` field selects the kind:
//!
//! ```text
//! { "variant": "half_space", "dim": 2, "normal": [0, 1], "offset": 0 }
//! { "variant": "inversion", "center": [0, 0], "radius": 1 }
//! ```
//!
//! Unknown variants and unknown fields are rejected with the offending field named.

use std::collections::BTreeSet;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{Domain, DomainKind, Orientation, SampledBoundary, SampledGrid};
use crate::maps::MapSpec;

/// Document syntax.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Syntax {
    Json,
    Toml,
    /// JSON when the text starts with `{`, TOML otherwise.
    Auto,
}

impl Syntax {
    pub fn from_path(path: &std::path::Path) -> Syntax {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Syntax::Json,
            Some("toml") => Syntax::Toml,
            _ => Syntax::Auto,
        }
    }
}

pub fn parse_document(text: &str, syntax: Syntax) -> Result<Value> {
    let syntax = match syntax {
        Syntax::Auto if text.trim_start().starts_with('{') => Syntax::Json,
        Syntax::Auto => Syntax::Toml,
        s => s,
    };
    match syntax {
        Syntax::Json => serde_json::from_str(text).map_err(|e| {
            Error::parse("<document>", format!("invalid JSON at line {}, column {}: {e}", e.line(), e.column()))
        }),
        _ => toml::from_str::<Value>(text).map_err(|e| {
            let at = match e.span() {
                Some(span) => {
                    let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                    format!(" at line {line}")
                }
                None => String::new(),
            };
            Error::parse("<document>", format!("invalid TOML{at}: {}", e.message()))
        }),
    }
}

/// Field reader over one JSON object that records which keys were consumed.
struct Fields<'a> {
    obj: &'a Map<String, Value>,
    path: String,
    used: BTreeSet<&'a str>,
}

impl<'a> Fields<'a> {
    fn new(value: &'a Value, path: &str) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::parse(path_or_root(path), "expected a table/object"))?;
        Ok(Fields { obj, path: path.to_string(), used: BTreeSet::new() })
    }

    fn name(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn get(&mut self, key: &'a str) -> Option<&'a Value> {
        let v = self.obj.get(key)?;
        self.used.insert(key);
        Some(v)
    }

    fn required(&mut self, key: &'a str) -> Result<&'a Value> {
        self.get(key).ok_or_else(|| Error::parse(self.name(key), "missing required field"))
    }

    fn number(&mut self, key: &'a str) -> Result<f64> {
        let v = self.required(key)?;
        as_number(v).ok_or_else(|| Error::parse(self.name(key), "expected a number"))
    }

    fn number_or(&mut self, key: &'a str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => as_number(v).ok_or_else(|| Error::parse(self.name(key), "expected a number")),
        }
    }

    fn opt_number(&mut self, key: &'a str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => as_number(v).map(Some).ok_or_else(|| Error::parse(self.name(key), "expected a number")),
        }
    }

    fn string(&mut self, key: &'a str) -> Result<&'a str> {
        let v = self.required(key)?;
        v.as_str().ok_or_else(|| Error::parse(self.name(key), "expected a string"))
    }

    fn vector(&mut self, key: &'a str) -> Result<Vec<f64>> {
        let name = self.name(key);
        as_vector(self.required(key)?, &name)
    }

    fn opt_vector(&mut self, key: &'a str) -> Result<Option<Vec<f64>>> {
        let name = self.name(key);
        self.get(key).map(|v| as_vector(v, &name)).transpose()
    }

    fn vectors(&mut self, key: &'a str) -> Result<Vec<Vec<f64>>> {
        let name = self.name(key);
        let arr = self
            .required(key)?
            .as_array()
            .ok_or_else(|| Error::parse(&name, "expected a list of vectors"))?;
        arr.iter().enumerate().map(|(i, v)| as_vector(v, &format!("{name}[{i}]"))).collect()
    }

    fn index(&mut self, key: &'a str) -> Result<Option<usize>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(|n| Some(n as usize))
                .ok_or_else(|| Error::parse(self.name(key), "expected a nonnegative integer")),
        }
    }

    fn finish(self) -> Result<()> {
        for key in self.obj.keys() {
            if !self.used.contains(key.as_str()) {
                return Err(Error::parse(self.name(key), "unknown field"));
            }
        }
        Ok(())
    }
}

fn path_or_root(path: &str) -> String {
    if path.is_empty() {
        "<document>".to_string()
    } else {
        path.to_string()
    }
}

fn as_number(v: &Value) -> Option<f64> {
    v.as_f64()
}

fn as_vector(v: &Value, name: &str) -> Result<Vec<f64>> {
    let arr = v.as_array().ok_or_else(|| Error::parse(name, "expected a list of numbers"))?;
    arr.iter()
        .enumerate()
        .map(|(i, c)| as_number(c).ok_or_else(|| Error::parse(format!("{name}[{i}]"), "expected a number")))
        .collect()
}

/// Attaches a field name to a validation failure of a constructor.
fn field_error(field: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Rejected(msg) => Error::parse(field, msg),
        other => other,
    }
}

pub fn parse_domain(text: &str, syntax: Syntax) -> Result<Domain> {
    domain_from_value(&parse_document(text, syntax)?, "")
}

pub fn domain_from_value(value: &Value, path: &str) -> Result<Domain> {
    let mut f = Fields::new(value, path)?;
    let variant = f.string("variant")?;
    let variant_field = f.name("variant");
    let dim = f.index("dim")?;
    let domain = match variant {
        "half_space" => {
            let normal = f.vector("normal")?;
            let offset = f.number_or("offset", 0.0)?;
            Domain::half_space(&normal, offset).map_err(field_error(&f.name("normal")))?
        }
        "ball" => {
            let center = f.vector("center")?;
            let radius = f.number("radius")?;
            Domain::ball(&center, radius).map_err(field_error(&f.name("radius")))?
        }
        "punctured" => {
            let point = f.vector("point")?;
            Domain::punctured(&point).map_err(field_error(&f.name("point")))?
        }
        "slab" => {
            let low = f.number("low")?;
            let high = f.number("high")?;
            let axis = f.index("axis")?;
            let normal = f.opt_vector("normal")?;
            match (axis, normal) {
                (Some(axis), None) => {
                    let n = dim.ok_or_else(|| Error::parse(f.name("dim"), "required with `axis`"))?;
                    Domain::slab_axis(n, axis, low, high).map_err(field_error(&f.name("axis")))?
                }
                (None, Some(normal)) => {
                    Domain::slab(&normal, low, high).map_err(field_error(&f.name("normal")))?
                }
                _ => return Err(Error::parse(f.name("axis"), "give exactly one of `axis` and `normal`")),
            }
        }
        "polygon2d" => {
            let vertices = f.vectors("vertices")?;
            let vfield = f.name("vertices");
            let verts = vertices
                .iter()
                .enumerate()
                .map(|(i, v)| match v.as_slice() {
                    [a, b] => Ok([*a, *b]),
                    _ => Err(Error::parse(format!("{vfield}[{i}]"), "expected two coordinates")),
                })
                .collect::<Result<Vec<_>>>()?;
            let orientation = match f.string("orientation")? {
                "ccw" => Orientation::Ccw,
                "cw" => Orientation::Cw,
                other => {
                    return Err(Error::parse(
                        f.name("orientation"),
                        format!("unknown orientation `{other}` (expected ccw or cw)"),
                    ))
                }
            };
            Domain::polygon(verts, orientation).map_err(field_error(&vfield))?
        }
        "lattice_complement" => {
            let spacing = f.number("spacing")?;
            let direction = f.vector("direction")?;
            let origin = f.opt_vector("origin")?;
            let field = f.name("direction");
            let base = Domain::lattice_complement(spacing, &direction).map_err(field_error(&field))?;
            match origin {
                None => base,
                Some(o) => {
                    let DomainKind::Lattice { step, .. } = base.kind() else { unreachable!() };
                    Domain::lattice(&o, step).map_err(field_error(&f.name("origin")))?
                }
            }
        }
        "sampled" => {
            let points = f.vectors("points")?;
            let grid_value = f.required("grid")?;
            let grid = grid_from_value(grid_value, &f.name("grid"))?;
            let covering = match f.get("covering_radius") {
                None => None,
                Some(v) => Some(
                    as_number(v).ok_or_else(|| Error::parse(f.name("covering_radius"), "expected a number"))?,
                ),
            };
            let field = f.name("points");
            match covering {
                None => Domain::sampled_with_default_spacing(points, grid),
                Some(covering_radius) => {
                    Domain::sampled(SampledBoundary { points, grid, covering_radius, frame: None })
                }
            }
            .map_err(field_error(&field))?
        }
        other => {
            return Err(Error::parse(
                variant_field,
                format!(
                    "unknown variant `{other}` (expected half_space, ball, punctured, slab, polygon2d, \
                     lattice_complement or sampled)"
                ),
            ))
        }
    };
    if let Some(n) = dim {
        if n != domain.dim() {
            return Err(Error::parse(
                f.name("dim"),
                format!("declared dimension {n} but the parameters have dimension {}", domain.dim()),
            ));
        }
    }
    f.finish()?;
    Ok(domain)
}

fn grid_from_value(value: &Value, path: &str) -> Result<SampledGrid> {
    let mut f = Fields::new(value, path)?;
    let origin = f.vector("origin")?;
    let cell = f.number("cell")?;
    let shape_v = f.vector("shape")?;
    let shape: Vec<usize> = shape_v
        .iter()
        .map(|&s| if s >= 1.0 && s.fract() == 0.0 { Ok(s as usize) } else { Err(()) })
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(f.name("shape"), "expected positive integers"))?;
    let inside_name = f.name("inside");
    let inside: Vec<bool> = match f.required("inside")? {
        Value::String(s) => s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '1' | '#' => Ok(true),
                '0' | '.' => Ok(false),
                _ => Err(Error::parse(&inside_name, format!("unexpected character `{c}`"))),
            })
            .collect::<Result<_>>()?,
        Value::Array(a) => a
            .iter()
            .enumerate()
            .map(|(i, v)| match v {
                Value::Bool(b) => Ok(*b),
                Value::Number(n) if n.as_u64() == Some(0) => Ok(false),
                Value::Number(n) if n.as_u64() == Some(1) => Ok(true),
                _ => Err(Error::parse(format!("{inside_name}[{i}]"), "expected 0, 1, true or false")),
            })
            .collect::<Result<_>>()?,
        _ => return Err(Error::parse(&inside_name, "expected a 0/1 string or a list")),
    };
    f.finish()?;
    Ok(SampledGrid { origin, cell, shape, inside })
}

pub fn parse_map(text: &str, syntax: Syntax) -> Result<MapSpec> {
    map_from_value(&parse_document(text, syntax)?, "")
}

pub fn map_from_value(value: &Value, path: &str) -> Result<MapSpec> {
    let mut f = Fields::new(value, path)?;
    let variant = f.string("variant")?;
    let map = match variant {
        "inversion" => {
            let center = f.vector("center")?;
            let radius = f.number_or("radius", 1.0)?;
            MapSpec::inversion(&center, radius).map_err(field_error(&f.name("radius")))?
        }
        "affine" => {
            let matrix = f.vectors("matrix")?;
            let offset = match f.opt_vector("offset")? {
                Some(o) => o,
                None => vec![0.0; matrix.len()],
            };
            MapSpec::affine(matrix, offset).map_err(field_error(&f.name("matrix")))?
        }
        "radial_power" => {
            let k = f.number("exponent")?;
            MapSpec::radial_power(k).map_err(field_error(&f.name("exponent")))?
        }
        "composition" => {
            let name = f.name("maps");
            let list = f
                .required("maps")?
                .as_array()
                .ok_or_else(|| Error::parse(&name, "expected a list of maps"))?;
            let maps = list
                .iter()
                .enumerate()
                .map(|(i, v)| map_from_value(v, &format!("{name}[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            let dims: BTreeSet<usize> = maps.iter().filter_map(|m| m.dim()).collect();
            if dims.len() > 1 {
                return Err(Error::parse(name, "maps act on different dimensions"));
            }
            MapSpec::composition(maps)
        }
        other => {
            return Err(Error::parse(
                f.name("variant"),
                format!("unknown variant `{other}` (expected inversion, affine, radial_power or composition)"),
            ))
        }
    };
    f.finish()?;
    Ok(map)
}

/// One line of a batch metric query file.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricQuery {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub metric: String,
    pub level: Option<u32>,
    pub c: Option<f64>,
    pub resolution: Option<f64>,
    pub relative_resolution: Option<f64>,
}

/// Parses `queries = [{x, y, metric, level?, c?, resolution?, relative_resolution?}, ...]`.
pub fn parse_queries(text: &str, syntax: Syntax) -> Result<Vec<MetricQuery>> {
    let doc = parse_document(text, syntax)?;
    let mut top = Fields::new(&doc, "")?;
    let list = top
        .required("queries")?
        .as_array()
        .ok_or_else(|| Error::parse("queries", "expected a list of queries"))?;
    top.finish()?;
    let mut out = Vec::with_capacity(list.len());
    for (i, v) in list.iter().enumerate() {
        let mut f = Fields::new(v, &format!("queries[{i}]"))?;
        let q = MetricQuery {
            x: f.vector("x")?,
            y: f.vector("y")?,
            metric: f.string("metric")?.to_string(),
            level: f.index("level")?.map(|l| l as u32),
            c: f.opt_number("c")?,
            resolution: f.opt_number("resolution")?,
            relative_resolution: f.opt_number("relative_resolution")?,
        };
        f.finish()?;
        out.push(q);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_of(e: Error) -> String {
        match e {
            Error::Parse { field, .. } => field,
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn domains_in_both_syntaxes() {
        let json = r#"{"variant": "half_space", "dim": 2, "normal": [0, 1], "offset": 0}"#;
        assert_eq!(parse_domain(json, Syntax::Auto).unwrap(), Domain::upper_half_plane());
        let toml = "variant = \"ball\"\ncenter = [0.0, 0.0]\nradius = 1.0\n";
        assert_eq!(parse_domain(toml, Syntax::Auto).unwrap(), Domain::unit_disk());
        let slab = r#"{"variant": "slab", "dim": 3, "axis": 2, "low": 0, "high": 1}"#;
        assert_eq!(parse_domain(slab, Syntax::Json).unwrap(), Domain::slab_axis(3, 2, 0.0, 1.0).unwrap());
        let poly = r#"{"variant": "polygon2d", "vertices": [[0,0],[1,0],[1,1],[0,1]], "orientation": "ccw"}"#;
        assert!(parse_domain(poly, Syntax::Json).is_ok());
        let lat = r#"{"variant": "lattice_complement", "spacing": 1, "direction": [1, 0]}"#;
        assert_eq!(parse_domain(lat, Syntax::Json).unwrap(), Domain::fixture("lattice_plane").unwrap());
    }

    #[test]
    fn query_file() {
        let text = "[[queries]]\nx = [0.0, 1.0]\ny = [0.0, 2.0]\nmetric = \"k\"\nresolution = 0.05\n";
        let q = parse_queries(text, Syntax::Toml).unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!(q[0].resolution, Some(0.05));
        assert_eq!(q[0].level, None);
        let bad = "[[queries]]\nx = [0.0, 1.0]\ny = [0.0, 2.0]\nmetric = \"k\"\nlevle = 3\n";
        assert_eq!(field_of(parse_queries(bad, Syntax::Toml).unwrap_err()), "queries[0].levle");
    }

    #[test]
    fn sampled_domain() {
        let text = r#"{
            "variant": "sampled",
            "points": [[0,0],[1,0],[1,1],[0,1]],
            "grid": {"origin": [0,0], "cell": 0.5, "shape": [2,2], "inside": "1111"},
            "covering_radius": 0.5
        }"#;
        let g = parse_domain(text, Syntax::Json).unwrap();
        assert!(g.contains(&[0.5, 0.5]));
    }

    #[test]
    fn diagnostics_name_fields() {
        let e = parse_domain(r#"{"variant": "disk", "center": [0,0]}"#, Syntax::Json).unwrap_err();
        assert_eq!(field_of(e.clone()), "variant");
        assert!(e.to_string().contains("unknown variant"));
        let e = parse_domain(r#"{"variant": "ball", "center": [0,0], "radius": -1}"#, Syntax::Json).unwrap_err();
        assert_eq!(field_of(e), "radius");
        let e = parse_domain(r#"{"variant": "ball", "center": [0,0], "radius": 1, "colour": 2}"#, Syntax::Json)
            .unwrap_err();
        assert_eq!(field_of(e), "colour");
        let e = parse_domain(r#"{"variant": "ball", "center": [0,"a"], "radius": 1}"#, Syntax::Json).unwrap_err();
        assert_eq!(field_of(e), "center[1]");
        let e = parse_domain(r#"{"variant": "ball", "dim": 3, "center": [0,0], "radius": 1}"#, Syntax::Json)
            .unwrap_err();
        assert_eq!(field_of(e), "dim");
        let e = parse_domain("{\"variant\": \"ball\",\n \"center\": [0,0] \"radius\": 1}", Syntax::Json).unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = parse_domain("variant = \"ball\"\ncenter = [0, 0\n", Syntax::Toml).unwrap_err();
        assert!(e.to_string().contains("line"), "{e}");
    }

    #[test]
    fn maps_parse_and_nest() {
        let text = r#"{"variant": "composition", "maps": [
            {"variant": "inversion", "center": [0, 0], "radius": 1},
            {"variant": "affine", "matrix": [[2, 0], [0, 2]], "offset": [1, 0]},
            {"variant": "radial_power", "exponent": 2}
        ]}"#;
        let m = parse_map(text, Syntax::Json).unwrap();
        let MapSpec::Composition { maps } = &m else { panic!() };
        assert_eq!(maps.len(), 3);
        let e = parse_map(r#"{"variant": "composition", "maps": [{"variant": "twist"}]}"#, Syntax::Json)
            .unwrap_err();
        assert_eq!(field_of(e), "maps[0].variant");
        let e = parse_map(r#"{"variant": "affine", "matrix": [[1, 1], [1, 1]]}"#, Syntax::Json).unwrap_err();
        assert_eq!(field_of(e), "matrix");
    }
}
