//! Atomic file output (temp file in the target directory, then rename) and
//! the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use spfa::report::Table;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

pub struct OutputDir {
    root: PathBuf,
    formats: Vec<Format>,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path, formats: &[Format]) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), formats: formats.to_vec(), written: Vec::new() })
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.root.join(rel);
        let dir = path.parent().unwrap_or(&self.root).to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
        tmp.write_all(bytes).map_err(|e| CliError::io(&path, e))?;
        tmp.as_file().sync_all().map_err(|e| CliError::io(&path, e))?;
        tmp.persist(&path).map_err(|e| CliError::io(&path, e.error))?;
        self.written.push(rel.to_string());
        Ok(())
    }

    /// Writes `<stem>.csv` and its `<stem>.json` mirror, as requested.
    pub fn write_table(&mut self, stem: &str, table: &Table) -> CliResult<()> {
        if self.wants(Format::Csv) {
            let csv = table.to_csv()?;
            self.write_bytes(&format!("{stem}.csv"), csv.as_bytes())?;
        }
        if self.wants(Format::Json) {
            self.write_bytes(&format!("{stem}.json"), table.to_json().as_bytes())?;
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
        s.push('\n');
        self.write_bytes(rel, s.as_bytes())
    }

    pub fn write_svg(&mut self, rel: &str, svg: &str) -> CliResult<()> {
        if self.wants(Format::Svg) {
            self.write_bytes(rel, svg.as_bytes())?;
        }
        Ok(())
    }

    /// Records the fully resolved configuration next to the outputs.
    pub fn write_manifest<C: Serialize>(&mut self, command: &str, config: &C) -> CliResult<()> {
        #[derive(Serialize)]
        struct Manifest<'a, C> {
            tool: &'static str,
            version: &'static str,
            command: &'a str,
            config: &'a C,
            outputs: &'a [String],
        }
        let outputs = self.written.clone();
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            outputs: &outputs,
        };
        self.write_json("run-manifest.json", &manifest)
    }
}
