//! Output files. Every file embeds the resolved configuration: CSV and PGM
//! files as a `# config: <json>` comment line, JSON documents as a `config`
//! member. Line endings are LF.

use std::path::PathBuf;

use serde_json::Value;

use crate::Failure;

pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn new(dir: PathBuf) -> Self {
        Self { dir }
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<(), Failure> {
        std::fs::create_dir_all(&self.dir)
            .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", self.dir.display())))?;
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
    }

    /// CSV body behind a config comment line.
    pub fn csv(&self, name: &str, config: &Value, body: &str) -> Result<(), Failure> {
        self.write(name, &format!("# config: {config}\n{body}"))
    }

    /// Plain PGM with the config comment after the magic number.
    pub fn pgm(&self, name: &str, config: &Value, image: &str) -> Result<(), Failure> {
        let (magic, rest) = image.split_once('\n').unwrap_or((image, ""));
        self.write(name, &format!("{magic}\n# config: {config}\n{rest}"))
    }

    pub fn json(&self, name: &str, doc: &Value) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(doc).map_err(|e| Failure::Runtime(e.to_string()))?;
        self.write(name, &format!("{text}\n"))
    }
}
