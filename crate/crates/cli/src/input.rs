use std::path::Path;

use serde_json::Value;

use batchcode::simplex::{vector_from_bits, vector_to_bits};
use batchcode::{Error, GroupElement, GroupSpec, Result};

/// Inline JSON, or the contents of a file when the argument starts with `@`.
pub fn load_json(arg: &str) -> Result<Value> {
    let text = match arg.strip_prefix('@') {
        Some(path) => read_file(Path::new(path))?,
        None => arg.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("malformed JSON: {e}")))
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

fn as_array<'a>(v: &'a Value, what: &str) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| Error::InvalidInput(format!("{what} must be a JSON array")))
}

fn as_u64(v: &Value, what: &str) -> Result<u64> {
    v.as_u64()
        .ok_or_else(|| Error::InvalidInput(format!("{what} must be a non-negative integer")))
}

pub fn bit_vector(k: usize, v: &Value) -> Result<GroupElement> {
    let bits = as_array(v, "a vector")?
        .iter()
        .map(|b| {
            let b = as_u64(b, "a bit")?;
            u8::try_from(b).map_err(|_| Error::InvalidInput(format!("bit {b} is not 0 or 1")))
        })
        .collect::<Result<Vec<u8>>>()?;
    vector_from_bits(k, &bits)
}

pub fn bit_vectors(k: usize, v: &Value) -> Result<Vec<GroupElement>> {
    as_array(v, "requests")?.iter().map(|r| bit_vector(k, r)).collect()
}

pub fn bits_json(k: usize, v: GroupElement) -> Value {
    Value::from(vector_to_bits(k, v))
}

/// A residue vector, or a bare integer for a group with one factor.
pub fn group_element(g: &GroupSpec, v: &Value) -> Result<GroupElement> {
    if let Some(n) = v.as_u64() {
        if g.dim() != 1 {
            return Err(Error::InvalidInput(format!(
                "bare integers are only accepted for cyclic groups; {g} needs vectors of length {}",
                g.dim()
            )));
        }
        return g.element(&[n]);
    }
    let coords = as_array(v, "a group element")?
        .iter()
        .map(|c| as_u64(c, "a residue"))
        .collect::<Result<Vec<u64>>>()?;
    g.element(&coords)
}

pub fn group_elements(g: &GroupSpec, v: &Value) -> Result<Vec<GroupElement>> {
    as_array(v, "requests")?.iter().map(|r| group_element(g, r)).collect()
}

pub fn element_json(g: &GroupSpec, a: GroupElement) -> Value {
    Value::from(g.coords(a))
}

pub fn elements_json(g: &GroupSpec, items: &[GroupElement]) -> Value {
    Value::Array(items.iter().map(|&a| element_json(g, a)).collect())
}
