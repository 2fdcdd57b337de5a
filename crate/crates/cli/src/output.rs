use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;
use stackmeta_core::io::csv::{write_csv, CsvTable};
use stackmeta_core::io::write_model;
use stackmeta_core::lqg::ResponseParam;

/// Output directory. Summaries list files relative to it so that they do
/// not depend on where the run was written.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&root).with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(Self { root, written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn record(&mut self, name: &str) {
        self.written.push(name.to_string());
    }

    pub fn csv(&mut self, name: &str, table: &CsvTable) -> Result<()> {
        write_csv(table, &self.path(name))?;
        self.record(name);
        Ok(())
    }

    pub fn model(&mut self, name: &str, m: &ResponseParam) -> Result<()> {
        write_model(m, &self.path(name))?;
        self.record(name);
        Ok(())
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.record(name);
        Ok(())
    }

    /// Writes `<command>_summary.json` with the command's fields plus the
    /// list of files written so far.
    pub fn summary<T: Serialize>(&mut self, command: &str, body: &T) -> Result<()> {
        let mut value = serde_json::to_value(body)?;
        if let Some(map) = value.as_object_mut() {
            map.insert("command".into(), command.into());
            map.insert("files".into(), serde_json::to_value(&self.written)?);
        }
        let name = format!("{}_summary.json", command.replace('-', "_"));
        let text = serde_json::to_string_pretty(&value)? + "\n";
        self.text(&name, &text)
    }
}
