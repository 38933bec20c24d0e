//! Canonical, hash-verified JSON artifacts.
//!
//! Every artifact is a single JSON document: the artifact's own fields at
//! the top level plus a `"manifest"` key carrying kind, schema version,
//! creation time and a content hash. Writing is byte-deterministic (sorted
//! keys, floats at 17 significant digits), so re-saving an unchanged
//! artifact reproduces the file bit for bit and reproducibility checks can
//! compare raw bytes. Loading re-hashes the body and refuses mismatched
//! kinds, versions or hashes rather than returning a partial artifact.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::hash::fnv1a64;

/// Bumped on any change to an artifact's field layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactKind {
    Dataset,
    Graph,
    Model,
    Report,
}

impl ArtifactKind {
    fn name(self) -> &'static str {
        match self {
            ArtifactKind::Dataset => "dataset",
            ArtifactKind::Graph => "graph",
            ArtifactKind::Model => "model",
            ArtifactKind::Report => "report",
        }
    }
}

/// Provenance header embedded in every artifact file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifact_kind: ArtifactKind,
    pub schema_version: u32,
    /// Unix seconds. Honors SOURCE_DATE_EPOCH, else 0, so identical
    /// artifacts produce identical bytes across runs.
    pub created: u64,
    /// FNV-1a over the canonical body (document minus this manifest),
    /// stored as 16 hex digits.
    pub config_hash: String,
}

/// A type that persists as a standalone artifact file. The value must
/// serialize to a JSON object so the manifest can sit beside its fields.
pub trait Artifact: Serialize + DeserializeOwned {
    const KIND: ArtifactKind;
}

impl Artifact for crate::graph::Sstkg {
    const KIND: ArtifactKind = ArtifactKind::Graph;
}

impl Artifact for crate::embedding::EmbeddingModel {
    const KIND: ArtifactKind = ArtifactKind::Model;
}

impl Artifact for crate::data::GroundTruth {
    const KIND: ArtifactKind = ArtifactKind::Dataset;
}

fn created_stamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()).unwrap_or(0)
}

/// Writes `artifact` to `path` and returns the manifest it was stamped with.
pub fn save<T: Artifact>(artifact: &T, path: &Path) -> Result<Manifest> {
    let body = match serde_json::to_value(artifact)? {
        Value::Object(map) => map,
        other => {
            return Err(Error::InvalidConfig(format!(
                "artifact must serialize to a JSON object, got {other}"
            )))
        }
    };
    if body.contains_key("manifest") {
        return Err(Error::InvalidConfig(
            "artifact may not define its own `manifest` field".into(),
        ));
    }
    let manifest = Manifest {
        artifact_kind: T::KIND,
        schema_version: SCHEMA_VERSION,
        created: created_stamp(),
        config_hash: format!("{:016x}", hash_body(&body)),
    };
    let mut doc = body;
    doc.insert("manifest".into(), serde_json::to_value(&manifest)?);
    let mut text = canonical_json(&Value::Object(doc));
    text.push('\n');
    fs::write(path, text)?;
    Ok(manifest)
}

/// Reads an artifact of kind `T::KIND` back, verifying manifest and hash.
pub fn load<T: Artifact>(path: &Path) -> Result<T> {
    Ok(load_with_manifest(path)?.0)
}

/// Like [`load`] but also returns the verified manifest.
pub fn load_with_manifest<T: Artifact>(path: &Path) -> Result<(T, Manifest)> {
    let bytes = fs::read(path)?;
    let doc: Value = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Corrupt(format!("{}: {e}", path.display())))?;
    let Value::Object(mut doc) = doc else {
        return Err(Error::Corrupt(format!("{}: not a JSON object", path.display())));
    };
    let manifest_value = doc
        .remove("manifest")
        .ok_or_else(|| Error::Corrupt(format!("{}: missing manifest", path.display())))?;
    let manifest: Manifest = serde_json::from_value(manifest_value)
        .map_err(|e| Error::Corrupt(format!("{}: bad manifest: {e}", path.display())))?;
    if manifest.artifact_kind != T::KIND {
        return Err(Error::ArtifactKind {
            expected: T::KIND.name().into(),
            found: manifest.artifact_kind.name().into(),
        });
    }
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found: manifest.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    let computed = format!("{:016x}", hash_body(&doc));
    if computed != manifest.config_hash {
        return Err(Error::HashMismatch {
            stored: manifest.config_hash,
            computed,
        });
    }
    let artifact = serde_json::from_value(Value::Object(doc))
        .map_err(|e| Error::Corrupt(format!("{}: {e}", path.display())))?;
    Ok((artifact, manifest))
}

fn hash_body(body: &Map<String, Value>) -> u64 {
    // The hash covers the canonical text, so it is as stable as the bytes.
    fnv1a64(canonical_json_map(body).as_bytes())
}

/// Canonical compact rendering: object keys sorted, no whitespace, floats
/// at 17 significant digits with -0 folded into 0, integers plain.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value);
    out
}

fn canonical_json_map(map: &Map<String, Value>) -> String {
    let mut out = String::new();
    write_object(&mut out, map);
    out
}

fn write_value(out: &mut String, value: &Value) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(out, n),
        // serde_json's escaping of a bare string is already canonical.
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string")),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, item);
            }
            out.push(']');
        }
        Value::Object(map) => write_object(out, map),
    }
}

fn write_object(out: &mut String, map: &Map<String, Value>) {
    let mut keys: Vec<&String> = map.keys().collect();
    keys.sort_unstable();
    out.push('{');
    for (i, key) in keys.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&serde_json::to_string(key).expect("string"));
        out.push(':');
        write_value(out, &map[key.as_str()]);
    }
    out.push('}');
}

fn write_number(out: &mut String, n: &serde_json::Number) {
    if n.is_f64() {
        // 16 digits after the point = 17 significant, enough to round-trip
        // any f64 exactly. Non-finite values never reach here: serde_json
        // rejects them during to_value.
        let mut v = n.as_f64().expect("f64");
        if v == 0.0 {
            v = 0.0; // folds -0.0
        }
        out.push_str(&format!("{v:.16e}"));
    } else {
        out.push_str(&n.to_string());
    }
}
