//! On-disk formats: field files, deep-draw manifests, generic JSON configs,
//! and CSV export of nodal values.
//!
//! A field file is a single JSON document carrying the grid, the node
//! ordering tag, the provenance string, and the nodal values as a base64
//! block of little-endian f64 bytes. Round trips are bit-exact.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dgp::DeepDraw;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::structure::Structure;

/// Node ordering tag written into every field file.
pub const ORDERING: &str = "axis0-fastest";

const FIELD_FORMAT: &str = "field-v1";
const MANIFEST_FORMAT: &str = "deep-draw-v1";

#[derive(Serialize, Deserialize)]
struct FieldDoc {
    format: String,
    grid: Grid,
    ordering: String,
    provenance: String,
    values_b64: String,
}

/// Bit-exact JSON representation of a field.
pub fn field_to_json(field: &Field) -> serde_json::Value {
    let mut bytes = Vec::with_capacity(field.values().len() * 8);
    for v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    serde_json::json!({
        "format": FIELD_FORMAT,
        "grid": field.grid(),
        "ordering": ORDERING,
        "provenance": field.provenance(),
        "values_b64": B64.encode(bytes),
    })
}

/// Inverse of [`field_to_json`].
pub fn field_from_json(doc: &serde_json::Value) -> Result<Field> {
    let doc: FieldDoc = serde_json::from_value(doc.clone())?;
    if doc.format != FIELD_FORMAT {
        return Err(Error::config(format!(
            "expected a {FIELD_FORMAT} document, got format {:?}",
            doc.format
        )));
    }
    if doc.ordering != ORDERING {
        return Err(Error::config(format!(
            "unsupported node ordering {:?}",
            doc.ordering
        )));
    }
    let bytes = B64
        .decode(doc.values_b64.as_bytes())
        .map_err(|e| Error::config(format!("bad value block: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::config("value block is not a whole number of f64s"));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Field::new(doc.grid, values, doc.provenance)
}

pub fn save_field(field: &Field, path: &Path) -> Result<()> {
    write_atomic(path, serde_json::to_string(&field_to_json(field))?.as_bytes())
}

pub fn load_field(path: &Path) -> Result<Field> {
    let text = fs::read_to_string(path)?;
    field_from_json(&serde_json::from_str(&text)?)
}

/// CSV rows `(x_0, ..., x_{d-1}, value)`, one per node, axis 0 fastest.
/// Floats are printed shortest-round-trip, so identical fields give
/// byte-identical files.
pub fn field_to_csv(field: &Field) -> String {
    let grid = field.grid();
    let mut out = String::new();
    for k in 0..grid.dim() {
        out.push_str(&format!("x{k},"));
    }
    out.push_str("value\n");
    let mut multi = vec![0usize; grid.dim()];
    for (idx, v) in field.values().iter().enumerate() {
        grid.multi_index(idx, &mut multi);
        for (k, &i) in multi.iter().enumerate() {
            out.push_str(&format!("{},", grid.coord(k, i)));
        }
        out.push_str(&format!("{v}\n"));
    }
    out
}

pub fn save_field_csv(field: &Field, path: &Path) -> Result<()> {
    write_atomic(path, field_to_csv(field).as_bytes())
}

/// Loads any JSON-encoded config document.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes a JSON document (pretty-printed; stable key order via serde).
pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    structure: Structure,
    /// Per layer, the component field file names relative to the manifest.
    layers: Vec<Vec<String>>,
    composed: String,
}

/// Writes one deep draw as a directory: `manifest.json`, one field file per
/// layer component, and the composed field.
pub fn save_deep_draw(draw: &DeepDraw, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let structure = draw.structure().clone();
    let mut layers = Vec::new();
    for (i, layer) in draw.components().iter().enumerate() {
        let mut names = Vec::new();
        for (j, component) in layer.iter().enumerate() {
            let name = format!("layer{i}-component{j}.json");
            save_field(&component.field, &dir.join(&name))?;
            names.push(name);
        }
        layers.push(names);
    }
    let composed = "composed.json".to_string();
    save_field(draw.composed(), &dir.join(&composed))?;
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        structure,
        layers,
        composed,
    };
    save_json(&manifest, &dir.join("manifest.json"))
}

/// Reads a deep-draw directory back: structure, per-layer component fields,
/// composed field.
pub fn load_deep_draw(dir: &Path) -> Result<(Structure, Vec<Vec<Field>>, Field)> {
    let manifest: Manifest = load_json(&dir.join("manifest.json"))?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(Error::config(format!(
            "expected a {MANIFEST_FORMAT} manifest, got {:?}",
            manifest.format
        )));
    }
    let mut layers = Vec::new();
    for names in &manifest.layers {
        let mut fields = Vec::new();
        for name in names {
            fields.push(load_field(&dir.join(name))?);
        }
        layers.push(fields);
    }
    let composed = load_field(&dir.join(&manifest.composed))?;
    Ok((manifest.structure, layers, composed))
}

/// Writes through a temp file in the same directory, then renames, so
/// readers never observe a half-written document.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(dir)?;
    }
    let tmp: PathBuf = path.with_extension("tmp-write");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
