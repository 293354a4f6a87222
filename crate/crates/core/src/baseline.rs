//! Frozen regression values.
//!
//! Empirical constants (calibrated brackets, measured `C*`) are recorded on
//! first use in a JSON file and compared against on every later run. Setting
//! `WOLFF_REFREEZE=1` discards the stored entries and records them again.

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Variable that forces recalibration.
pub const REFREEZE_VAR: &str = "WOLFF_REFREEZE";

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct File {
    schema: u32,
    entries: BTreeMap<String, Entry>,
}

/// Outcome of a lookup.
#[derive(Debug, Clone, PartialEq)]
pub enum Frozen {
    /// Read from the store.
    Stored(Vec<f64>),
    /// Computed now and recorded.
    Fresh(Vec<f64>),
}

impl Frozen {
    pub fn values(&self) -> &[f64] {
        match self {
            Frozen::Stored(v) | Frozen::Fresh(v) => v,
        }
    }

    pub fn is_fresh(&self) -> bool {
        matches!(self, Frozen::Fresh(_))
    }
}

#[derive(Debug, Clone)]
pub struct Baselines {
    path: Option<PathBuf>,
    entries: BTreeMap<String, Entry>,
    refreeze: bool,
    dirty: bool,
}

impl Baselines {
    /// Reads `path`; a missing file is an empty store.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let refreeze = std::env::var(REFREEZE_VAR).map_or(false, |v| v == "1");
        let entries = match std::fs::read_to_string(&path) {
            Ok(text) if !refreeze => {
                let f: File = serde_json::from_str(&text).map_err(|e| invalid("baseline", e.to_string()))?;
                if f.schema != SCHEMA_VERSION {
                    return Err(invalid("baseline", format!("schema {} is not {SCHEMA_VERSION}", f.schema)));
                }
                f.entries
            }
            Ok(_) => BTreeMap::new(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(invalid("baseline", e.to_string())),
        };
        Ok(Baselines { path: Some(path), entries, refreeze, dirty: false })
    }

    /// A store that is never written.
    pub fn in_memory() -> Self {
        Baselines { path: None, entries: BTreeMap::new(), refreeze: false, dirty: false }
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.entries.get(key).map(|e| e.values.as_slice())
    }

    /// Stored values for `key`, or `compute()` recorded under it.
    /// Non-finite values are never frozen.
    pub fn freeze_with(&mut self, key: &str, note: &str, compute: impl FnOnce() -> Vec<f64>) -> Result<Frozen> {
        if let Some(e) = self.entries.get(key) {
            return Ok(Frozen::Stored(e.values.clone()));
        }
        let values = compute();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("baseline", format!("refusing to freeze non-finite values under `{key}`")));
        }
        self.entries.insert(key.to_string(), Entry { values: values.clone(), note: note.to_string() });
        self.dirty = true;
        Ok(Frozen::Fresh(values))
    }

    pub fn refreezing(&self) -> bool {
        self.refreeze
    }

    /// Writes the store back when something was added.
    pub fn save(&mut self) -> Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        if !self.dirty {
            return Ok(());
        }
        let f = File { schema: SCHEMA_VERSION, entries: self.entries.clone() };
        let text = serde_json::to_string_pretty(&f).map_err(|e| invalid("baseline", e.to_string()))?;
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| invalid("baseline", e.to_string()))?;
        }
        std::fs::write(path, text + "\n").map_err(|e| invalid("baseline", e.to_string()))?;
        self.dirty = false;
        Ok(())
    }
}

/// Relative drift `|b - a| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_drift(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (b - a).abs() / s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn freeze_then_read() {
        let dir = std::env::temp_dir().join(format!("wolff-baseline-{}", std::process::id()));
        let path = dir.join("b.json");
        let _ = std::fs::remove_file(&path);
        let mut b = Baselines::open(&path).unwrap();
        let first = b.freeze_with("c_star", "", || vec![1.5]).unwrap();
        assert!(first.is_fresh() || b.refreezing());
        b.save().unwrap();
        let mut again = Baselines::open(&path).unwrap();
        if !again.refreezing() {
            let v = again.freeze_with("c_star", "", || vec![9.0]).unwrap();
            assert_eq!(v, Frozen::Stored(vec![1.5]));
        }
        assert!(again.freeze_with("bad", "", || vec![f64::NAN]).is_err());
        let _ = std::fs::remove_dir_all(dir);
    }

    #[test]
    fn drift() {
        assert_eq!(relative_drift(0.0, 0.0), 0.0);
        assert!((relative_drift(1.0, 1.05) - 0.05 / 1.05).abs() < 1e-15);
    }
}
