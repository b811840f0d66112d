//! CSV tables with a `#` header block.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Lines written above every table: toolkit version, seed and conventions.
pub fn header_block(command: &str, seed: Option<u64>, extra: &[(&str, String)]) -> String {
    let mut out = format!("# rmab {VERSION}\n# command: {command}\n");
    if let Some(s) = seed {
        out.push_str(&format!("# seed: {s}\n"));
    }
    out.push_str("# log: natural\n");
    out.push_str("# per_arm: total discounted reward divided by the number of arms\n");
    for (k, v) in extra {
        out.push_str(&format!("# {k}: {v}\n"));
    }
    out
}

pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&'static str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, header: &str) -> anyhow::Result<Vec<u8>> {
        let mut buf = header.as_bytes().to_vec();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.columns)?;
            for r in &self.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        Ok(buf)
    }
}

/// Where results go. Without an output directory every table is printed to
/// stdout; with one, files are written there and only the first is echoed.
pub struct Sink {
    pub dir: Option<PathBuf>,
    pub header: String,
    echoed: bool,
}

impl Sink {
    pub fn new(dir: Option<&Path>, header: String) -> anyhow::Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d)?;
        }
        Ok(Sink {
            dir: dir.map(Path::to_path_buf),
            header,
            echoed: false,
        })
    }

    pub fn table(&mut self, t: &Table) -> anyhow::Result<()> {
        let bytes = t.render(&self.header)?;
        self.emit(&format!("{}.csv", t.name), &bytes)
    }

    /// Raw file contents; `body` is written after the header block.
    pub fn file(&mut self, name: &str, body: &[u8]) -> anyhow::Result<()> {
        let mut bytes = self.header.as_bytes().to_vec();
        bytes.extend_from_slice(body);
        self.emit(name, &bytes)
    }

    fn emit(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        if self.dir.is_none() || !self.echoed {
            let mut out = std::io::stdout().lock();
            if self.echoed {
                out.write_all(b"\n")?;
            }
            out.write_all(bytes)?;
            self.echoed = true;
        }
        if let Some(d) = &self.dir {
            fs::write(d.join(name), bytes)?;
            log::info!("wrote {}", d.join(name).display());
        }
        Ok(())
    }
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
