//! CSV and JSON writers with the reproducibility header.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::{RunConfig, TOOL_VERSION};

/// Which artifact formats to write.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
}

impl Formats {
    pub fn parse(spec: &str) -> Result<Formats, String> {
        let mut f = Formats {
            csv: false,
            json: false,
            svg: false,
        };
        for part in spec.split(',') {
            match part.trim() {
                "csv" => f.csv = true,
                "json" => f.json = true,
                "svg" => f.svg = true,
                "" => {}
                other => return Err(format!("unknown format '{other}' (csv, json, svg)")),
            }
        }
        if !(f.csv || f.json || f.svg) {
            return Err("no output format selected".into());
        }
        Ok(f)
    }

    pub fn list(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.csv {
            v.push("csv".into());
        }
        if self.json {
            v.push("json".into());
        }
        if self.svg {
            v.push("svg".into());
        }
        v
    }
}

/// Full 17-significant-digit float text, '.' decimal point.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct Emitter<'a> {
    pub out_dir: PathBuf,
    pub config: &'a RunConfig,
    pub written: Vec<PathBuf>,
}

impl<'a> Emitter<'a> {
    pub fn new(out_dir: &Path, config: &'a RunConfig) -> std::io::Result<Emitter<'a>> {
        fs::create_dir_all(out_dir)?;
        Ok(Emitter {
            out_dir: out_dir.to_path_buf(),
            config,
            written: Vec::new(),
        })
    }

    fn header_lines(&self) -> String {
        format!(
            "# {TOOL_VERSION}\n# config: {}\n# config-hash: {}\n",
            self.config.to_json(),
            self.config.hash_hex()
        )
    }

    /// Writes a CSV with header comments, column line, and rows.
    pub fn csv(&mut self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
        let path = self.out_dir.join(name);
        let mut f = fs::File::create(&path)?;
        f.write_all(self.header_lines().as_bytes())?;
        writeln!(f, "{}", columns.join(","))?;
        for row in rows {
            writeln!(f, "{}", row.join(","))?;
        }
        self.written.push(path);
        Ok(())
    }

    /// Writes a JSON document wrapping `data` with the standard envelope.
    pub fn json(&mut self, name: &str, data: Value) -> std::io::Result<()> {
        let doc = json!({
            "schema_version": 1,
            "tool": TOOL_VERSION,
            "config": serde_json::to_value(self.config).expect("config"),
            "config_hash": self.config.hash_hex(),
            "data": data,
        });
        let path = self.out_dir.join(name);
        let mut f = fs::File::create(&path)?;
        f.write_all(serde_json::to_string_pretty(&doc).expect("json").as_bytes())?;
        f.write_all(b"\n")?;
        self.written.push(path);
        Ok(())
    }

    pub fn svg(&mut self, name: &str, body: String) -> std::io::Result<()> {
        let path = self.out_dir.join(name);
        fs::write(&path, body)?;
        self.written.push(path);
        Ok(())
    }

    /// Description string embedded in SVG `<desc>`.
    pub fn svg_desc(&self) -> String {
        format!(
            "{TOOL_VERSION} config-hash {} config {}",
            self.config.hash_hex(),
            self.config.to_json()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_is_lossless() {
        for v in [0.1, -0.24916998656238954, 1.4201218360277328e-7, 3.0] {
            let s = fmt_float(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, v, "{s}");
        }
    }

    #[test]
    fn formats_parse() {
        let f = Formats::parse("csv,svg").unwrap();
        assert!(f.csv && f.svg && !f.json);
        assert!(Formats::parse("bogus").is_err());
        assert!(Formats::parse("").is_err());
    }
}
