//! Error classes, the run manifest, and the single writer for output files.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Environment variable that overrides the enumeration size guard.
pub const MAX_SPINS_ENV: &str = "ISINGPF_MAX_SPINS";

#[derive(Debug)]
pub enum CliError {
    /// Bad input: malformed files, invalid parameters. Exit code 2.
    Usage(String),
    /// Everything else. Exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<isingpf::Error> for CliError {
    fn from(e: isingpf::Error) -> Self {
        use isingpf::Error as E;
        match e {
            E::Parse(_) | E::InvalidModel(_) | E::Domain(_) | E::Dimension { .. } => CliError::Usage(e.to_string()),
            E::TooLarge { .. } => CliError::Runtime(format!("{e}; set {MAX_SPINS_ENV} to raise the limit")),
            E::Io(_) => CliError::Runtime(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Everything needed to reproduce a run. Contains no timestamps, so
/// replaying it yields byte-identical outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub model_path: Option<PathBuf>,
    pub root_seed: Option<u64>,
    /// Every parameter after defaults are filled in.
    pub parameters: serde_json::Value,
    pub tool_version: String,
    pub outputs: Vec<PathBuf>,
    /// Arguments after the program name, as given.
    pub args: Vec<String>,
}

/// `dir/stem.csv` with suffix "summary.json" becomes `dir/stem.summary.json`.
pub fn companion(primary: &Path, suffix: &str) -> PathBuf {
    let stem = primary.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    primary.with_file_name(format!("{stem}.{suffix}"))
}

/// Collects a run's files in memory, then writes them together with the
/// manifest that lists them.
pub struct RunOutput {
    primary: PathBuf,
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl RunOutput {
    pub fn new(primary: &Path) -> Self {
        RunOutput { primary: primary.to_path_buf(), files: Vec::new() }
    }

    pub fn add(&mut self, path: PathBuf, contents: Vec<u8>) {
        self.files.push((path, contents));
    }

    pub fn add_json<T: Serialize>(&mut self, path: PathBuf, value: &T) {
        let mut text = serde_json::to_vec_pretty(value).expect("output values serialize");
        text.push(b'\n');
        self.add(path, text);
    }

    pub fn finish<P: Serialize>(
        self,
        command: &str,
        model_path: Option<&Path>,
        root_seed: Option<u64>,
        parameters: &P,
        args: &[String],
    ) -> CliResult<()> {
        let manifest = RunManifest {
            command: command.to_string(),
            model_path: model_path.map(Path::to_path_buf),
            root_seed,
            parameters: serde_json::to_value(parameters).expect("arguments serialize"),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: self.files.iter().map(|(p, _)| p.clone()).collect(),
            args: args.to_vec(),
        };
        let manifest_path = companion(&self.primary, "manifest.json");
        for (path, bytes) in &self.files {
            write_file(path, bytes)?;
        }
        let mut text = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        text.push(b'\n');
        write_file(&manifest_path, &text)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| io_error(path, e))
}

pub fn read_manifest(path: &Path) -> CliResult<RunManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn companion_names() {
        assert_eq!(companion(Path::new("out/trace.csv"), "manifest.json"), PathBuf::from("out/trace.manifest.json"));
        assert_eq!(companion(Path::new("packing.json"), "manifest.json"), PathBuf::from("packing.manifest.json"));
    }

    #[test]
    fn error_classes() {
        let parse: CliError = isingpf::Error::Parse("x".into()).into();
        assert_eq!(parse.exit_code(), 2);
        let big: CliError = isingpf::Error::TooLarge { num_spins: 40, limit: 30 }.into();
        assert_eq!(big.exit_code(), 1);
        assert!(big.to_string().contains(MAX_SPINS_ENV));
    }
}
