//! Measure files and CSV tables.

use crate::error::{Error, Result};
use crate::measure::{Atom, DiscreteMeasure};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct MeasureFile {
    atoms: Vec<Atom>,
    #[serde(default)]
    meta: Value,
}

/// {"atoms":[{"x":[..],"w":..,"rho":..}],"meta":{"description":..}}
pub fn measure_to_json(mu: &DiscreteMeasure) -> String {
    let file = MeasureFile { atoms: mu.atoms.clone(), meta: json!({ "description": mu.meta }) };
    serde_json::to_string(&file).expect("finite measure serializes")
}

pub fn measure_from_json(text: &str) -> Result<DiscreteMeasure> {
    let file: MeasureFile = serde_json::from_str(text)?;
    let meta = match &file.meta {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Object(m) => match m.get("description") {
            Some(Value::String(s)) => s.clone(),
            _ => file.meta.to_string(),
        },
        other => other.to_string(),
    };
    DiscreteMeasure::new(file.atoms, meta)
}

pub fn save_measure(mu: &DiscreteMeasure, path: &Path) -> Result<()> {
    std::fs::write(path, measure_to_json(mu))?;
    Ok(())
}

pub fn load_measure(path: &Path) -> Result<DiscreteMeasure> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    measure_from_json(&text)
}

/// Header row plus string cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable { header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn push_values(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|v| fmt_f64(*v)).collect());
    }

    pub fn push(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string())?;
        Ok(())
    }
}

impl std::fmt::Display for CsvTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{}", self.header.join(","))?;
        for r in &self.rows {
            writeln!(f, "{}", r.join(","))?;
        }
        Ok(())
    }
}

/// Shortest round-trip representation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::make_shell_measure;

    #[test]
    fn round_trip() {
        let m = make_shell_measure(1.0, -2.0, 30).unwrap();
        let back = measure_from_json(&measure_to_json(&m)).unwrap();
        assert_eq!(m, back);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        save_measure(&m, &p).unwrap();
        assert_eq!(load_measure(&p).unwrap(), m);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(measure_from_json(r#"{"atoms":[{"x":[0,0,NaN],"w":1,"rho":1}]}"#).is_err());
        assert!(measure_from_json(r#"{"atoms":[{"x":[0,0,1e999],"w":1,"rho":1}]}"#).is_err());
        assert!(measure_from_json(r#"{"atoms":[{"x":[0,0,0],"w":1,"rho":0}]}"#).is_err());
        assert!(measure_from_json(r#"{"atoms":[]}"#).is_err());
        let m = measure_from_json(r#"{"atoms":[{"x":[0,0,0],"w":1,"rho":1}],"meta":{"source":"hand"}}"#).unwrap();
        assert!(m.meta.contains("hand"));
        assert!(load_measure(Path::new("/nonexistent/m.json")).is_err());
    }

    #[test]
    fn csv_table() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.push_values(&[1.0, 0.25]);
        assert_eq!(t.to_string(), "a,b\n1e0,2.5e-1\n");
    }
}
