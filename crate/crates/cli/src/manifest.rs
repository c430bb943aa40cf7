//! Output registry and the manifest that lists every file written.

use std::path::{Path, PathBuf};
use std::time::SystemTime;

use serde::Serialize;

use crate::CliError;

pub const MANIFEST: &str = "manifest.toml";

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub description: String,
}

/// Collects output paths so the manifest can reference each one.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::runtime(chemduff::Error::Io(e)))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    /// Registers `name` and returns its full path.
    pub fn file(&mut self, name: &str, description: &str) -> PathBuf {
        assert!(
            !self.files.iter().any(|f| f.file == name) && name != MANIFEST,
            "output {name} registered twice"
        );
        self.files.push(OutputFile { file: name.into(), description: description.into() });
        self.dir.join(name)
    }

    pub fn write_text(&mut self, name: &str, description: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.file(name, description);
        std::fs::write(&path, text).map_err(|e| CliError::runtime(chemduff::Error::Io(e)))?;
        Ok(path)
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.files
    }

    /// Writes the manifest and returns all paths, manifest last.
    pub fn finish(self, command: &str, parameters: toml::Table, derived: toml::Table, results: toml::Table) -> Result<Vec<PathBuf>, CliError> {
        #[derive(Serialize)]
        struct Versions {
            chemduff_cli: &'static str,
            chemduff_core: &'static str,
            rng: &'static str,
            gaussian: &'static str,
        }
        #[derive(Serialize)]
        struct Manifest<'a> {
            command: &'a str,
            timestamp: String,
            versions: Versions,
            parameters: toml::Table,
            derived: toml::Table,
            results: toml::Table,
            outputs: &'a [OutputFile],
        }
        let m = Manifest {
            command,
            timestamp: humantime::format_rfc3339_seconds(SystemTime::now()).to_string(),
            versions: Versions {
                chemduff_cli: env!("CARGO_PKG_VERSION"),
                chemduff_core: chemduff::VERSION,
                rng: chemduff::sde::RNG_NAME,
                gaussian: chemduff::sde::GAUSSIAN_NAME,
            },
            parameters,
            derived,
            results,
            outputs: &self.files,
        };
        let text = toml::to_string(&m).map_err(|e| CliError::runtime(chemduff::Error::Format(e.to_string())))?;
        let path = self.dir.join(MANIFEST);
        std::fs::write(&path, text).map_err(|e| CliError::runtime(chemduff::Error::Io(e)))?;
        let mut all: Vec<PathBuf> = self.files.iter().map(|f| self.dir.join(&f.file)).collect();
        all.push(path);
        Ok(all)
    }
}
