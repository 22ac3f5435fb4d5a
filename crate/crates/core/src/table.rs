//! The estimator table type and its JSON file format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub const SCHEMA: &str = "estimator-table/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    PluginLog,
    TaylorBt,
    UStatistic,
    Euclid,
    Quadratic,
    Minimax,
    Aqp,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::PluginLog => "plugin_log",
            Method::TaylorBt => "taylor_bt",
            Method::UStatistic => "u_statistic",
            Method::Euclid => "euclid",
            Method::Quadratic => "quadratic",
            Method::Minimax => "minimax",
            Method::Aqp => "aqp",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        Ok(match s {
            "plugin_log" => Method::PluginLog,
            "taylor_bt" => Method::TaylorBt,
            "u_statistic" => Method::UStatistic,
            "euclid" => Method::Euclid,
            "quadratic" => Method::Quadratic,
            "minimax" => Method::Minimax,
            "aqp" => Method::Aqp,
            other => return Err(Error::Parse(format!("field `method`: unknown method `{other}`"))),
        })
    }
}

/// Reward values `c_0..c_K` indexed by the count `X`, with annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorTable {
    pub k: usize,
    pub beta: f64,
    pub method: Method,
    pub meta: BTreeMap<String, Value>,
    pub coeffs: Vec<f64>,
}

impl EstimatorTable {
    pub fn new(k: usize, beta: f64, method: Method, coeffs: Vec<f64>) -> Result<Self> {
        let t = EstimatorTable { k, beta, method, meta: BTreeMap::new(), coeffs };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Validation("K must be positive".into()));
        }
        if self.coeffs.len() != self.k + 1 {
            return Err(Error::Validation(format!(
                "coeffs has length {} but K = {} requires {}",
                self.coeffs.len(),
                self.k,
                self.k + 1
            )));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::Validation(format!("beta must be positive, got {}", self.beta)));
        }
        if let Some(i) = self.coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::Validation(format!("coeffs[{i}] is not finite")));
        }
        Ok(())
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.meta.insert(key.to_string(), value.into());
        self
    }

    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.meta.get(key).and_then(Value::as_f64)
    }

    /// Serialized form. Coefficients are written with 17 significant digits.
    pub fn to_json_string(&self) -> String {
        let mut s = String::new();
        s.push_str("{\n");
        let _ = writeln!(s, "  \"schema\": \"{SCHEMA}\",");
        let _ = writeln!(s, "  \"K\": {},", self.k);
        let _ = writeln!(s, "  \"beta\": {},", fmt17(self.beta));
        let _ = writeln!(s, "  \"method\": \"{}\",", self.method.as_str());
        let meta = Value::Object(self.meta.clone().into_iter().collect::<Map<_, _>>());
        let _ = writeln!(s, "  \"meta\": {},", serde_json::to_string(&meta).expect("meta serializes"));
        s.push_str("  \"coeffs\": [\n");
        for (i, c) in self.coeffs.iter().enumerate() {
            let sep = if i + 1 == self.coeffs.len() { "" } else { "," };
            let _ = writeln!(s, "    {}{sep}", fmt17(*c));
        }
        s.push_str("  ]\n}\n");
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| {
            Error::Parse(format!("line {} column {}: {e}", e.line(), e.column()))
        })?;
        let obj = v.as_object().ok_or_else(|| Error::Parse("top level must be an object".into()))?;
        let field = |name: &str| {
            obj.get(name).ok_or_else(|| Error::Parse(format!("missing field `{name}`")))
        };
        match field("schema")?.as_str() {
            Some(SCHEMA) => {}
            Some(other) => return Err(Error::Parse(format!("field `schema`: unsupported `{other}`"))),
            None => return Err(Error::Parse("field `schema`: expected a string".into())),
        }
        let k = field("K")?
            .as_u64()
            .ok_or_else(|| Error::Parse("field `K`: expected a positive integer".into()))?
            as usize;
        let beta = field("beta")?
            .as_f64()
            .ok_or_else(|| Error::Parse("field `beta`: expected a number".into()))?;
        let method = Method::parse(
            field("method")?
                .as_str()
                .ok_or_else(|| Error::Parse("field `method`: expected a string".into()))?,
        )?;
        let meta = match obj.get("meta") {
            None | Some(Value::Null) => BTreeMap::new(),
            Some(Value::Object(m)) => m.clone().into_iter().collect(),
            Some(_) => return Err(Error::Parse("field `meta`: expected an object".into())),
        };
        let coeffs = field("coeffs")?
            .as_array()
            .ok_or_else(|| Error::Parse("field `coeffs`: expected an array".into()))?
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.as_f64().ok_or_else(|| Error::Parse(format!("field `coeffs[{i}]`: expected a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let t = EstimatorTable { k, beta, method, meta, coeffs };
        t.validate()?;
        Ok(t)
    }
}

pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn save_table(table: &EstimatorTable, path: impl AsRef<Path>) -> Result<()> {
    table.validate()?;
    std::fs::write(path, table.to_json_string())?;
    Ok(())
}

pub fn load_table(path: impl AsRef<Path>) -> Result<EstimatorTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    EstimatorTable::from_json_str(&text)
}
