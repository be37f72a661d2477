//! Minimal CSV tables: fixed headers, floats as `{:.16e}` (17 significant
//! digits, round-trip exact), written atomically.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use tempfile::NamedTempFile;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(&'static str),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<&'static str> for Cell {
    fn from(v: &'static str) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &'static [&'static str]) -> Self {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Values of one float column, for tests and checks.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| *h == name)?;
        self.rows
            .iter()
            .map(|r| match r[i] {
                Cell::Float(v) => Some(v),
                Cell::Int(v) => Some(v as f64),
                Cell::Text(_) => None,
            })
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match cell {
                    Cell::Float(v) => write!(out, "{v:.16e}"),
                    Cell::Int(v) => write!(out, "{v}"),
                    Cell::Text(s) => write!(out, "{s}"),
                }
                .expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
        out
    }

    /// Writes through a temporary file in the target directory and renames
    /// it into place, so a failed run never leaves a partial file.
    pub fn write_atomic(&self, path: &Path) -> std::io::Result<()> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = NamedTempFile::new_in(dir)?;
        tmp.write_all(self.render().as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| e.error)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        let mut t = Table::new(&["x", "k", "tag"]);
        let x = 0.1 + 0.2;
        t.push(vec![x.into(), 7u64.into(), "step".into()]);
        let text = t.render();
        assert_eq!(text, "x,k,tag\n3.0000000000000004e-1,7,step\n");
        let back: f64 = text
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .next()
            .unwrap()
            .parse()
            .unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn atomic_write_replaces_target() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        std::fs::write(&path, "old").unwrap();
        let mut t = Table::new(&["a"]);
        t.push(vec![1.0.into()]);
        t.write_atomic(&path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "a\n1.0000000000000000e0\n"
        );
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn failed_write_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("out.csv");
        assert!(Table::new(&["a"]).write_atomic(&path).is_err());
        assert!(!path.exists());
    }
}
