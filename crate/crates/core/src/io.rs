//! JSON problem files.
//!
//! Layout: `{version, p, xPartition, yPartition, A, B, b, fOracle, gOracle,
//! xProx, yProx, x0?}`. `A`/`B` hold one row-major array per block. Reals are
//! written in shortest round-trip form so loading reproduces every bit.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};
use crate::linalg::{BlockLinearMap, BlockPartition, DenseMatrix};
use crate::problem::ConstrainedProblem;
use crate::prox::ProxOracle;
use crate::smooth::{SmoothKind, SmoothOracle};

pub const FORMAT_VERSION: u64 = 1;

/// Exact decimal form of a finite real; non-finite values become null.
pub fn real_to_json(v: f64) -> Value {
    Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn reals(vs: &[f64]) -> Value {
    Value::Array(vs.iter().map(|v| real_to_json(*v)).collect())
}

fn smooth_to_json(s: &SmoothOracle, what: &str) -> Result<Value> {
    let mut m = Map::new();
    match &s.kind {
        SmoothKind::Zero => {
            m.insert("kind".into(), "zero".into());
        }
        SmoothKind::Quadratic { q, c, offset } => {
            m.insert("kind".into(), "quadratic".into());
            m.insert("Q".into(), reals(q.data()));
            m.insert("c".into(), reals(c));
            m.insert("offset".into(), real_to_json(*offset));
        }
        SmoothKind::Custom(_) => {
            return Err(Error::Unsupported(format!("{what}: custom oracles not serializable")));
        }
    }
    m.insert("lipschitz".into(), real_to_json(s.lipschitz));
    Ok(Value::Object(m))
}

fn prox_to_json(p: &ProxOracle, what: &str) -> Result<Value> {
    let mut params = Map::new();
    match p {
        ProxOracle::L1 { tau } | ProxOracle::L1Nonneg { tau } => {
            params.insert("tau".into(), real_to_json(*tau));
        }
        ProxOracle::Box { lo, hi } => {
            params.insert("lo".into(), real_to_json(*lo));
            params.insert("hi".into(), real_to_json(*hi));
        }
        ProxOracle::Custom(_) => {
            return Err(Error::Unsupported(format!("{what}: custom oracles not serializable")));
        }
        ProxOracle::Zero | ProxOracle::Nonneg => {}
    }
    let mut m = Map::new();
    m.insert("kind".into(), p.kind_name().into());
    m.insert("params".into(), Value::Object(params));
    Ok(Value::Object(m))
}

fn map_blocks(map: &BlockLinearMap) -> Value {
    Value::Array(map.blocks().iter().map(|b| reals(b.data())).collect())
}

pub fn problem_to_json(p: &ConstrainedProblem) -> Result<Value> {
    let mut m = Map::new();
    m.insert("version".into(), FORMAT_VERSION.into());
    m.insert("p".into(), p.row_dim().into());
    m.insert("xPartition".into(), p.x_partition().dims().to_vec().into());
    m.insert("yPartition".into(), p.y_partition().dims().to_vec().into());
    m.insert("A".into(), map_blocks(p.x_map()));
    m.insert("B".into(), p.y_map().map_or(Value::Array(vec![]), map_blocks));
    m.insert("b".into(), reals(p.b()));
    m.insert("fOracle".into(), smooth_to_json(p.f(), "fOracle")?);
    m.insert("gOracle".into(), smooth_to_json(p.g(), "gOracle")?);
    let xp = p
        .x_prox()
        .iter()
        .enumerate()
        .map(|(i, o)| prox_to_json(o, &format!("xProx[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    m.insert("xProx".into(), Value::Array(xp));
    let yp = p
        .y_prox()
        .iter()
        .enumerate()
        .map(|(j, o)| prox_to_json(o, &format!("yProx[{j}]")))
        .collect::<Result<Vec<_>>>()?;
    m.insert("yProx".into(), Value::Array(yp));
    if let Some(x0) = p.initial_x() {
        m.insert("x0".into(), reals(x0));
    }
    Ok(Value::Object(m))
}

pub fn save_problem(p: &ConstrainedProblem, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&problem_to_json(p)?).expect("value tree serializes");
    fs::write(path, text + "\n").map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_problem(path: &Path) -> Result<ConstrainedProblem> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_problem(&text)
}

pub fn parse_problem(text: &str) -> Result<ConstrainedProblem> {
    let v: Value = serde_json::from_str(text)
        .map_err(|e| Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    problem_from_json(&v)
}

/// Field lookups that report the dotted path of what is missing or malformed.
pub(crate) struct Obj<'a> {
    path: String,
    map: &'a Map<String, Value>,
}

impl<'a> Obj<'a> {
    pub(crate) fn new(path: impl Into<String>, v: &'a Value) -> Result<Self> {
        let path = path.into();
        match v.as_object() {
            Some(map) => Ok(Self { path, map }),
            None => Err(Error::parse(path, "expected an object")),
        }
    }

    fn sub(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    pub(crate) fn get(&self, key: &str) -> Result<&'a Value> {
        self.map
            .get(key)
            .ok_or_else(|| Error::parse(self.sub(key), format!("missing field `{key}`")))
    }

    pub(crate) fn opt(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key).filter(|v| !v.is_null())
    }

    pub(crate) fn obj(&self, key: &str) -> Result<Obj<'a>> {
        Obj::new(self.sub(key), self.get(key)?)
    }

    pub(crate) fn str(&self, key: &str) -> Result<&'a str> {
        self.get(key)?
            .as_str()
            .ok_or_else(|| Error::parse(self.sub(key), "expected a string"))
    }

    pub(crate) fn usize(&self, key: &str) -> Result<usize> {
        as_usize(&self.sub(key), self.get(key)?)
    }

    pub(crate) fn real(&self, key: &str) -> Result<f64> {
        as_real(&self.sub(key), self.get(key)?)
    }

    pub(crate) fn array(&self, key: &str) -> Result<&'a Vec<Value>> {
        self.get(key)?
            .as_array()
            .ok_or_else(|| Error::parse(self.sub(key), "expected an array"))
    }

    pub(crate) fn reals(&self, key: &str) -> Result<Vec<f64>> {
        as_reals(&self.sub(key), self.get(key)?)
    }

    pub(crate) fn usizes(&self, key: &str) -> Result<Vec<usize>> {
        let path = self.sub(key);
        self.array(key)?
            .iter()
            .enumerate()
            .map(|(i, v)| as_usize(&format!("{path}[{i}]"), v))
            .collect()
    }
}

pub(crate) fn as_real(path: &str, v: &Value) -> Result<f64> {
    v.as_f64().ok_or_else(|| Error::parse(path, "expected a number"))
}

pub(crate) fn as_usize(path: &str, v: &Value) -> Result<usize> {
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| Error::parse(path, "expected a nonnegative integer"))
}

pub(crate) fn as_reals(path: &str, v: &Value) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| Error::parse(path, "expected an array"))?
        .iter()
        .enumerate()
        .map(|(i, x)| as_real(&format!("{path}[{i}]"), x))
        .collect()
}

fn bound(path: &str, v: Option<&Value>, inf: f64) -> Result<f64> {
    match v {
        None | Some(Value::Null) => Ok(inf),
        Some(x) => as_real(path, x),
    }
}

fn smooth_from_json(o: &Obj, key: &str) -> Result<SmoothOracle> {
    let s = o.obj(key)?;
    let lipschitz = s.real("lipschitz")?;
    match s.str("kind")? {
        "zero" => Ok(SmoothOracle::zero()),
        "quadratic" => {
            let c = s.reals("c")?;
            let q = DenseMatrix::from_row_major(c.len(), c.len(), s.reals("Q")?)
                .map_err(|e| Error::parse(s.sub("Q"), e.to_string()))?;
            let offset = match s.opt("offset") {
                Some(v) => as_real(&s.sub("offset"), v)?,
                None => 0.0,
            };
            SmoothOracle::quadratic_with_lipschitz(q, c, offset, lipschitz)
        }
        "custom" => Err(Error::parse(s.sub("kind"), "custom oracles not serializable")),
        other => Err(Error::parse(s.sub("kind"), format!("unknown smooth kind `{other}`"))),
    }
}

fn prox_from_json(path: &str, v: &Value) -> Result<ProxOracle> {
    let o = Obj::new(path, v)?;
    let kind = o.str("kind")?;
    let params = match o.opt("params") {
        Some(p) => Some(Obj::new(o.sub("params"), p)?),
        None => None,
    };
    let need = |k: &str| -> Result<f64> {
        match &params {
            Some(p) => p.real(k),
            None => Err(Error::parse(o.sub("params"), format!("missing field `{k}`"))),
        }
    };
    let wrap = |r: Result<ProxOracle>| r.map_err(|e| Error::parse(path, e.to_string()));
    match kind {
        "zero" => Ok(ProxOracle::Zero),
        "nonneg" => Ok(ProxOracle::Nonneg),
        "l1" => wrap(ProxOracle::l1(need("tau")?)),
        "l1nonneg" => wrap(ProxOracle::l1_nonneg(need("tau")?)),
        "box" => {
            let (lo, hi) = match &params {
                Some(p) => (
                    bound(&p.sub("lo"), p.map.get("lo"), f64::NEG_INFINITY)?,
                    bound(&p.sub("hi"), p.map.get("hi"), f64::INFINITY)?,
                ),
                None => (f64::NEG_INFINITY, f64::INFINITY),
            };
            wrap(ProxOracle::boxed(lo, hi))
        }
        "custom" => Err(Error::parse(o.sub("kind"), "custom oracles not serializable")),
        other => Err(Error::parse(o.sub("kind"), format!("unknown prox kind `{other}`"))),
    }
}

fn map_from_json(o: &Obj, key: &str, part: Arc<BlockPartition>, p: usize) -> Result<BlockLinearMap> {
    let arr = o.array(key)?;
    if arr.len() != part.num_blocks() {
        return Err(Error::parse(
            key,
            format!("expected {} blocks, found {}", part.num_blocks(), arr.len()),
        ));
    }
    let blocks = arr
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let path = format!("{key}[{i}]");
            let data = as_reals(&path, v)?;
            DenseMatrix::from_row_major(p, part.dim(i), data).map_err(|e| Error::parse(path, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    BlockLinearMap::new(part, p, blocks)
}

pub fn problem_from_json(v: &Value) -> Result<ConstrainedProblem> {
    let o = Obj::new("", v)?;
    let version = o.usize("version")?;
    if version as u64 != FORMAT_VERSION {
        return Err(Error::parse("version", format!("unsupported version {version}")));
    }
    let p = o.usize("p")?;
    let x_part = Arc::new(
        BlockPartition::new(o.usizes("xPartition")?).map_err(|e| Error::parse("xPartition", e.to_string()))?,
    );
    let y_dims = o.usizes("yPartition")?;
    let x_map = map_from_json(&o, "A", x_part, p)?;
    let y_map = if y_dims.is_empty() {
        if !o.array("B")?.is_empty() {
            return Err(Error::parse("B", "blocks given with an empty yPartition"));
        }
        None
    } else {
        let y_part =
            Arc::new(BlockPartition::new(y_dims).map_err(|e| Error::parse("yPartition", e.to_string()))?);
        Some(map_from_json(&o, "B", y_part, p)?)
    };
    let b = o.reals("b")?;
    let f = smooth_from_json(&o, "fOracle")?;
    let g = smooth_from_json(&o, "gOracle")?;
    let x_prox = o
        .array("xProx")?
        .iter()
        .enumerate()
        .map(|(i, v)| prox_from_json(&format!("xProx[{i}]"), v))
        .collect::<Result<Vec<_>>>()?;
    let y_prox = o
        .array("yProx")?
        .iter()
        .enumerate()
        .map(|(j, v)| prox_from_json(&format!("yProx[{j}]"), v))
        .collect::<Result<Vec<_>>>()?;
    let problem = ConstrainedProblem::new(x_map, y_map, b, f, g, x_prox, y_prox)?;
    match o.opt("x0") {
        Some(x0) => problem.with_initial_x(as_reals("x0", x0)?),
        None => Ok(problem),
    }
}
