//! Artifact writing. Tables get a header row and a `.meta.json` sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

#[derive(Serialize)]
struct Meta<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a ExperimentConfig,
}

pub struct OutputDir {
    root: PathBuf,
    command: &'static str,
}

impl OutputDir {
    pub fn new(root: &Path, command: &'static str) -> Self {
        OutputDir {
            root: root.to_path_buf(),
            command,
        }
    }

    fn path(&self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.root)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", self.root.display())))?;
        Ok(self.root.join(name))
    }

    fn write(&self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(path, bytes)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
    }

    /// Pretty JSON document with the command, version and effective config.
    pub fn json<T: Serialize>(
        &self,
        name: &str,
        config: &ExperimentConfig,
        result: &T,
    ) -> Result<String, CliError> {
        #[derive(Serialize)]
        struct Report<'a, T> {
            #[serde(flatten)]
            meta: Meta<'a>,
            result: &'a T,
        }
        let doc = Report {
            meta: Meta {
                command: self.command,
                version: pusmi_core::VERSION,
                config,
            },
            result,
        };
        let text = serde_json::to_string_pretty(&doc).map_err(CliError::config)? + "\n";
        self.write(&self.path(name)?, text.as_bytes())?;
        Ok(text)
    }

    /// CSV body produced by `fill`, plus the metadata sidecar.
    pub fn table<F>(&self, name: &str, config: &ExperimentConfig, fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<(), CliError>,
    {
        let mut body = Vec::new();
        fill(&mut body)?;
        let path = self.path(name)?;
        self.write(&path, &body)?;
        let meta = Meta {
            command: self.command,
            version: pusmi_core::VERSION,
            config,
        };
        let text = serde_json::to_string_pretty(&meta).map_err(CliError::config)? + "\n";
        self.write(
            &self.root.join(format!("{name}.meta.json")),
            text.as_bytes(),
        )
    }
}
