//! Model file: `{"config": {...}, "params": {name: {"cols", "data", "rows"}}, "threshold": x}`
//! with keys sorted and every double written with 17 significant digits.

use std::fmt::Write as _;

use ndarray::Array2;
use serde_json::Value;

use super::{layout, Init, Model, ModelConfig, ModelError};
use crate::autodiff::ParamStore;

fn number(out: &mut String, x: f64) {
    if x.is_finite() {
        write!(out, "{x:.16e}").expect("write to string");
    } else {
        out.push_str("null");
    }
}

pub(super) fn to_json(model: &Model) -> String {
    let config = serde_json::to_value(&model.config).expect("config serializes");
    let mut out = String::from("{\"config\":");
    out.push_str(&config.to_string());
    out.push_str(",\"params\":{");
    let mut names: Vec<&str> = model.params.names().collect();
    names.sort_unstable();
    for (i, name) in names.iter().enumerate() {
        let p = model.params.get(name).expect("listed name");
        if i > 0 {
            out.push(',');
        }
        out.push_str(&Value::from(*name).to_string());
        write!(out, ":{{\"cols\":{},\"data\":[", p.value.ncols()).expect("write to string");
        for (j, &x) in p.value.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            number(&mut out, x);
        }
        write!(out, "],\"rows\":{}}}", p.value.nrows()).expect("write to string");
    }
    out.push_str("},\"threshold\":");
    number(&mut out, model.threshold);
    out.push_str("}\n");
    out
}

pub(super) fn from_json(text: &str) -> Result<Model, ModelError> {
    let fail = |path: &str, message: String| ModelError::Format {
        path: path.to_string(),
        message,
    };
    let root: Value = serde_json::from_str(text).map_err(|e| fail("$", e.to_string()))?;
    let root = root.as_object().ok_or_else(|| fail("$", "expected an object".into()))?;
    for key in root.keys() {
        if !matches!(key.as_str(), "config" | "params" | "threshold") {
            return Err(fail(&format!("$.{key}"), "unknown key".into()));
        }
    }
    let get = |key: &str| root.get(key).ok_or_else(|| fail(&format!("$.{key}"), "missing key".into()));

    let config: ModelConfig =
        serde_json::from_value(get("config")?.clone()).map_err(|e| fail("$.config", e.to_string()))?;
    config.validate()?;
    let threshold = get("threshold")?
        .as_f64()
        .filter(|t| (0.0..=1.0).contains(t))
        .ok_or_else(|| fail("$.threshold", "expected a number in [0, 1]".into()))?;
    let raw = get("params")?
        .as_object()
        .ok_or_else(|| fail("$.params", "expected an object".into()))?;

    let expected = layout(&config);
    let mut params = ParamStore::new();
    for (name, (rows, cols), init) in &expected {
        let path = format!("$.params.{name}");
        let entry = raw.get(name).ok_or_else(|| fail(&path, "missing parameter".into()))?;
        let dim = |key: &str| entry.get(key).and_then(Value::as_u64).map(|v| v as usize);
        if dim("rows") != Some(*rows) || dim("cols") != Some(*cols) {
            return Err(fail(&path, format!("expected shape {rows}x{cols}")));
        }
        let data = entry
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| fail(&format!("{path}.data"), "expected an array".into()))?;
        if data.len() != rows * cols {
            return Err(fail(&format!("{path}.data"), format!("expected {} values", rows * cols)));
        }
        let values = data
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_f64()
                    .ok_or_else(|| fail(&format!("{path}.data[{i}]"), "expected a finite number".into()))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let value = Array2::from_shape_vec((*rows, *cols), values).expect("length checked");
        params.insert(name.clone(), value, *init != Init::Cell)?;
    }
    if let Some(extra) = raw.keys().find(|k| params.index_of(k).is_none()) {
        return Err(fail(&format!("$.params.{extra}"), "unexpected parameter".into()));
    }
    Ok(Model {
        config,
        params,
        threshold,
    })
}
