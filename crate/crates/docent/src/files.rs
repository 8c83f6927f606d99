//! On-disk formats: TOML for registries, forests and stages, plain text for
//! exhibits and scenarios, JSON lines for traces.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use docent_core::gen::ExhibitDescription;
use docent_core::profile::Stage;
use docent_core::registry::RegistryError;
use docent_core::{ActionDefinition, ForestConfig, Registry, TraceRecord};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Toml { path: PathBuf, source: toml::de::Error },
    #[error("{}:{line}: {source}", path.display())]
    Json { path: PathBuf, line: usize, source: serde_json::Error },
    #[error("{}: {source}", path.display())]
    Registry { path: PathBuf, source: RegistryError },
    #[error("{}: exhibit description is empty", path.display())]
    EmptyExhibit { path: PathBuf },
    #[error("{}: stage has non-finite coordinates", path.display())]
    InvalidStage { path: PathBuf },
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> FileError + '_ {
    move |source| FileError::Io { path: path.into(), source }
}

pub fn read_text(path: &Path) -> Result<String, FileError> {
    fs::read_to_string(path).map_err(io_error(path))
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FileError> {
    let text = read_text(path)?;
    toml::from_str(&text).map_err(|source| FileError::Toml { path: path.into(), source })
}

/// Writes through a temporary file in the same directory, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), FileError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_error(path))?;
    tmp.write_all(contents).map_err(io_error(path))?;
    tmp.as_file().sync_all().map_err(io_error(path))?;
    tmp.persist(path).map_err(|e| FileError::Io { path: path.into(), source: e.error })?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct RegistryFile {
    #[serde(rename = "action", default)]
    actions: Vec<ActionDefinition>,
}

pub fn load_registry(path: &Path) -> Result<Registry, FileError> {
    let file: RegistryFile = read_toml(path)?;
    Registry::from_definitions(file.actions).map_err(|source| FileError::Registry { path: path.into(), source })
}

pub fn registry_to_toml(registry: &Registry) -> String {
    let file = RegistryFile {
        actions: registry.iter().cloned().collect(),
    };
    toml::to_string(&file).expect("registry serializes")
}

pub fn load_forest(path: &Path) -> Result<ForestConfig, FileError> {
    read_toml(path)
}

pub fn forest_to_toml(config: &ForestConfig) -> String {
    toml::to_string(config).expect("forest serializes")
}

pub fn load_stage(path: &Path) -> Result<Stage, FileError> {
    let stage: Stage = read_toml(path)?;
    if !stage.is_valid() {
        return Err(FileError::InvalidStage { path: path.into() });
    }
    Ok(stage)
}

pub fn stage_to_toml(stage: &Stage) -> String {
    toml::to_string(stage).expect("stage serializes")
}

/// Reads an exhibit description. The file stem is the exhibit id, the first
/// non-empty line its title and the rest its body. A single-paragraph file
/// uses the id as title.
pub fn load_exhibit(path: &Path) -> Result<ExhibitDescription, FileError> {
    let text = read_text(path)?;
    let id = exhibit_id(path);
    let mut lines = text.lines().skip_while(|l| l.trim().is_empty());
    let first = lines.next().unwrap_or("").trim();
    let rest: Vec<&str> = lines.collect();
    let rest = rest.join("\n");
    let (title, body) = if rest.trim().is_empty() { (id.as_str(), first) } else { (first, rest.as_str()) };
    ExhibitDescription::new(&id, title, body).map_err(|_| FileError::EmptyExhibit { path: path.into() })
}

pub fn exhibit_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "exhibit".into())
}

/// One JSON object per line, fields in declaration order.
pub fn write_trace<W: Write>(mut out: W, trace: &[TraceRecord]) -> io::Result<()> {
    for record in trace {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn trace_to_string(trace: &[TraceRecord]) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, trace).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn save_trace(path: &Path, trace: &[TraceRecord]) -> Result<(), FileError> {
    write_atomic(path, trace_to_string(trace).as_bytes())
}

pub fn load_trace(path: &Path) -> Result<Vec<TraceRecord>, FileError> {
    let file = fs::File::open(path).map_err(io_error(path))?;
    let mut out = Vec::new();
    for (i, line) in io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_error(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| FileError::Json {
            path: path.into(),
            line: i + 1,
            source,
        })?;
        out.push(record);
    }
    Ok(out)
}
