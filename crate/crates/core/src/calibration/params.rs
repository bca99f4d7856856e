use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::affine::AffineModelSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Field(String),
    Index(usize),
}

/// Location of one scalar inside an [`AffineModelSpec`], written like
/// `x.a[0][0]`, `y.cov[0][0]`, `x.jumps[1].intensity` or `rate.l`.
///
/// Entries of the symmetric matrices `x.a`, `x.alpha[k]` and `y.cov` are
/// written together with their mirror image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ParamPath {
    text: String,
    segments: Vec<Segment>,
}

impl FromStr for ParamPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidInput(format!("parameter path `{s}`: {why}"));
        let mut segments = Vec::new();
        for part in s.split('.') {
            let (name, mut rest) = part.split_at(part.find('[').unwrap_or(part.len()));
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(bad("expected a field name"));
            }
            segments.push(Segment::Field(name.to_string()));
            while !rest.is_empty() {
                let close = rest.find(']').ok_or_else(|| bad("unclosed index"))?;
                let idx = rest[1..close].parse().map_err(|_| bad("index is not a nonnegative integer"))?;
                segments.push(Segment::Index(idx));
                rest = &rest[close + 1..];
                if !rest.is_empty() && !rest.starts_with('[') {
                    return Err(bad("unexpected text after index"));
                }
            }
        }
        Ok(Self { text: s.to_string(), segments })
    }
}

impl TryFrom<String> for ParamPath {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ParamPath> for String {
    fn from(p: ParamPath) -> String {
        p.text
    }
}

impl fmt::Display for ParamPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

fn lookup<'a>(root: &'a mut Value, segments: &[Segment], path: &ParamPath) -> Result<&'a mut Value> {
    let missing = || Error::InvalidInput(format!("parameter path `{path}` does not exist in the model"));
    let mut node = root;
    for seg in segments {
        node = match seg {
            Segment::Field(name) => node.get_mut(name.as_str()),
            Segment::Index(i) => node.get_mut(*i),
        }
        .ok_or_else(missing)?;
    }
    Ok(node)
}

impl ParamPath {
    /// The mirrored path for entries of symmetric matrices.
    fn mirror(&self) -> Option<Vec<Segment>> {
        use Segment::*;
        let s = &self.segments;
        let field = |k: usize, name: &str| matches!(s.get(k), Some(Field(f)) if f == name);
        let symmetric = match s.len() {
            4 => (field(0, "x") && field(1, "a")) || (field(0, "y") && field(1, "cov")),
            5 => field(0, "x") && field(1, "alpha"),
            _ => false,
        };
        match (symmetric, &s[s.len().saturating_sub(2)..]) {
            (true, [Index(i), Index(j)]) if i != j => {
                let mut m = s[..s.len() - 2].to_vec();
                m.extend([Index(*j), Index(*i)]);
                Some(m)
            }
            _ => None,
        }
    }

    fn number<'a>(&self, root: &'a mut Value, segments: &[Segment]) -> Result<&'a mut Value> {
        let node = lookup(root, segments, self)?;
        if node.is_number() {
            Ok(node)
        } else {
            Err(Error::InvalidInput(format!("parameter path `{self}` does not name a scalar")))
        }
    }

    pub fn get(&self, spec: &AffineModelSpec) -> Result<f64> {
        let mut v = to_value(spec)?;
        Ok(self.number(&mut v, &self.segments)?.as_f64().unwrap_or(f64::NAN))
    }

    pub fn set(&self, spec: &AffineModelSpec, value: f64) -> Result<AffineModelSpec> {
        set_all(spec, &[(self, value)])
    }
}

fn to_value(spec: &AffineModelSpec) -> Result<Value> {
    serde_json::to_value(spec).map_err(|e| Error::InvalidInput(format!("cannot serialise model: {e}")))
}

/// Writes several parameters at once.
pub fn set_all(spec: &AffineModelSpec, values: &[(&ParamPath, f64)]) -> Result<AffineModelSpec> {
    let mut root = to_value(spec)?;
    for &(path, value) in values {
        let number = serde_json::Number::from_f64(value)
            .ok_or_else(|| Error::InvalidInput(format!("parameter `{path}` set to non-finite {value}")))?;
        *path.number(&mut root, &path.segments)? = Value::Number(number.clone());
        if let Some(m) = path.mirror() {
            *path.number(&mut root, &m)? = Value::Number(number);
        }
    }
    serde_json::from_value(root).map_err(|e| Error::InvalidInput(format!("parameter update broke the model: {e}")))
}

/// Map between a constrained parameter and the optimiser's real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Transform {
    #[default]
    Free,
    /// `p = exp(z)`.
    Positive,
    /// `p = lower + (upper - lower) / (1 + exp(-z))`.
    Interval { lower: f64, upper: f64 },
}

impl Transform {
    pub fn to_model(&self, z: f64) -> f64 {
        match *self {
            Self::Free => z,
            Self::Positive => z.exp(),
            Self::Interval { lower, upper } => lower + (upper - lower) / (1.0 + (-z).exp()),
        }
    }

    pub fn to_unconstrained(&self, p: f64) -> Result<f64> {
        let outside = || Error::InvalidInput(format!("value {p} lies outside the domain of {self:?}"));
        match *self {
            Self::Free => Ok(p),
            Self::Positive if p > 0.0 => Ok(p.ln()),
            Self::Interval { lower, upper } if lower < upper && p > lower && p < upper => {
                let t = (p - lower) / (upper - lower);
                Ok((t / (1.0 - t)).ln())
            }
            _ => Err(outside()),
        }
    }
}

/// A model parameter left free during calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeParameter {
    pub path: ParamPath,
    #[serde(default)]
    pub transform: Transform,
    /// Starting value; defaults to the template's current value.
    #[serde(default)]
    pub initial: Option<f64>,
}
