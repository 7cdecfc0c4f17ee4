//! Long-format CSV tables `t,id,quantity,value`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

pub const HEADER: &str = "t,id,quantity,value";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub t: f64,
    pub id: String,
    pub quantity: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub rows: Vec<Row>,
}

impl Table {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: f64, id: impl ToString, quantity: &str, value: f64) {
        self.rows.push(Row { t, id: id.to_string(), quantity: quantity.to_string(), value });
    }

    pub fn extend(&mut self, other: Table) {
        self.rows.extend(other.rows);
    }

    /// Rows with this quantity, in insertion order.
    pub fn values(&self, quantity: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.quantity == quantity).map(|r| r.value).collect()
    }

    pub fn get(&self, id: &str, quantity: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.id == id && r.quantity == quantity).map(|r| r.value)
    }

    /// Shortest round-trip formatting (exponent form for very small or large
    /// magnitudes), so identical values give identical bytes.
    pub fn render(&self) -> String {
        let mut out = String::with_capacity(32 * (self.rows.len() + 1));
        out.push_str(HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{:?},{},{},{:?}", r.t, r.id, r.quantity, r.value);
        }
        out
    }
}

/// Writes through a temporary file in the same directory and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("table");
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_long_format() {
        let mut t = Table::new();
        t.push(0.0, "run", "seed", 7.0);
        t.push(0.125, 3, "q", 0.1);
        t.push(0.5, "c0", "r", 1e-20);
        assert_eq!(t.render(), "t,id,quantity,value\n0.0,run,seed,7.0\n0.125,3,q,0.1\n0.5,c0,r,1e-20\n");
    }
}
