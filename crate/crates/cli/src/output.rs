use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::args::Command;

#[derive(Debug)]
pub enum CliError {
    Core(coopeq::Error),
    Validation(String),
    Io { path: PathBuf, source: io::Error },
    Encode(String),
}

impl CliError {
    /// 2 for bad input, 3 for numerical failure, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        use coopeq::Error as E;
        match self {
            CliError::Validation(_) => 2,
            CliError::Core(E::InvalidParams(_) | E::Domain(_) | E::Regime(_) | E::CornerSolution(_)) => 2,
            CliError::Core(E::NonConvergence { .. } | E::InvariantViolation(_)) => 3,
            CliError::Io { .. } => 4,
            CliError::Encode(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Validation(msg) => write!(f, "invalid arguments: {msg}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Encode(msg) => write!(f, "encoding failed: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<coopeq::Error> for CliError {
    fn from(e: coopeq::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// One output file, held in memory until the run succeeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Everything a command produced plus the settings worth recording.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    pub seed: Option<u64>,
    pub grid_sizes: BTreeMap<String, usize>,
    pub tolerances: BTreeMap<String, f64>,
}

impl RunOutput {
    pub fn grid(mut self, name: &str, n: usize) -> Self {
        self.grid_sizes.insert(name.into(), n);
        self
    }

    pub fn tol(mut self, name: &str, t: f64) -> Self {
        self.tolerances.insert(name.into(), t);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Full parameter set; replaying runs exactly this.
    pub parameters: Command,
    pub seed: Option<u64>,
    pub grid_sizes: BTreeMap<String, usize>,
    pub tolerances: BTreeMap<String, f64>,
    pub version: String,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
}

pub fn manifest_name(command: &Command) -> String {
    format!("{}.manifest.json", command.name())
}

/// Appends the manifest describing `output` to its own artifact list.
pub fn seal(command: &Command, mut output: RunOutput) -> CliResult<RunOutput> {
    let manifest = RunManifest {
        command: command.name().into(),
        parameters: command.clone(),
        seed: output.seed,
        grid_sizes: output.grid_sizes.clone(),
        tolerances: output.tolerances.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        outputs: output.artifacts.iter().map(|a| a.name.clone()).collect(),
    };
    output.artifacts.push(Artifact {
        name: manifest_name(command),
        bytes: json_bytes(&manifest)?,
    });
    Ok(output)
}

pub fn read_manifest(path: &Path) -> CliResult<RunManifest> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: not a run manifest: {e}", path.display())))
}

pub fn write_all(dir: &Path, artifacts: &[Artifact]) -> CliResult<Vec<PathBuf>> {
    let mut written = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let path = dir.join(&a.name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| CliError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        fs::write(&path, &a.bytes).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

pub fn json_bytes<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Encode(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Shortest representation that parses back to the same double.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> CliResult<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).map_err(|e| CliError::Encode(e.to_string()))?;
        Ok(Self { writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| CliError::Encode(e.to_string()))
    }

    pub fn finish(self, name: impl Into<String>) -> CliResult<Artifact> {
        let bytes = self.writer.into_inner().map_err(|e| CliError::Encode(e.to_string()))?;
        Ok(Artifact { name: name.into(), bytes })
    }
}
