//! Scenario cache on disk: one text file per scenario and an `index.json`
//! mapping exhibits and generation parameters to file names.
//!
//! Every write goes through a temporary file and a rename, so concurrent
//! readers always see either the old or the new index.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use docent_core::gen::{GenerationParams, ScenarioCache};
use docent_core::ScenarioDocument;
use serde::{Deserialize, Serialize};

use crate::files::{read_text, write_atomic, FileError};

pub const INDEX_FILE: &str = "index.json";
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub params: GenerationParams,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExhibitIndex {
    #[serde(default)]
    pub basic: Option<String>,
    /// Oldest first.
    #[serde(default)]
    pub generated: Vec<IndexEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Index {
    pub version: u32,
    #[serde(default)]
    pub exhibits: BTreeMap<String, ExhibitIndex>,
}

impl Default for Index {
    fn default() -> Self {
        Index {
            version: INDEX_VERSION,
            exhibits: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiskCache {
    dir: PathBuf,
}

impl DiskCache {
    /// Creates the directory if needed.
    pub fn open(dir: &Path) -> Result<Self, FileError> {
        fs::create_dir_all(dir).map_err(|source| FileError::Io { path: dir.into(), source })?;
        Ok(DiskCache { dir: dir.into() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn index_path(&self) -> PathBuf {
        self.dir.join(INDEX_FILE)
    }

    pub fn read_index(&self) -> Result<Index, FileError> {
        let path = self.index_path();
        if !path.exists() {
            return Ok(Index::default());
        }
        let text = read_text(&path)?;
        serde_json::from_str(&text).map_err(|source| FileError::Json { path, line: 0, source })
    }

    fn write_index(&self, index: &Index) -> Result<(), FileError> {
        let text = serde_json::to_string_pretty(index).expect("index serializes");
        write_atomic(&self.index_path(), text.as_bytes())
    }

    /// Loads every indexed scenario. Entries whose file has gone missing are
    /// skipped.
    pub fn load(&self) -> Result<ScenarioCache, FileError> {
        let index = self.read_index()?;
        let mut cache = ScenarioCache::new();
        for (exhibit, entry) in &index.exhibits {
            if let Some(file) = &entry.basic {
                if let Ok(text) = read_text(&self.dir.join(file)) {
                    cache.set_basic(exhibit, ScenarioDocument::new(text));
                }
            }
            for e in &entry.generated {
                if let Ok(text) = read_text(&self.dir.join(&e.file)) {
                    let mut doc = ScenarioDocument::new(text);
                    doc.metadata = Some(e.params.clone());
                    cache.insert(exhibit, e.params.clone(), doc);
                }
            }
        }
        Ok(cache)
    }

    pub fn has_basic(&self, exhibit: &str) -> Result<bool, FileError> {
        Ok(self.read_index()?.exhibits.get(exhibit).is_some_and(|e| e.basic.is_some()))
    }

    pub fn set_basic(&self, exhibit: &str, text: &str) -> Result<(), FileError> {
        let file = format!("{exhibit}.basic.txt");
        write_atomic(&self.dir.join(&file), text.as_bytes())?;
        let mut index = self.read_index()?;
        index.exhibits.entry(exhibit.into()).or_default().basic = Some(file);
        self.write_index(&index)
    }

    /// Stores a generated scenario as the newest entry for its parameters.
    pub fn store(&self, exhibit: &str, params: &GenerationParams, text: &str) -> Result<PathBuf, FileError> {
        let file = format!(
            "{exhibit}.{}.{}.{}.txt",
            params.style, params.audience, params.target_length
        );
        let path = self.dir.join(&file);
        write_atomic(&path, text.as_bytes())?;
        let mut index = self.read_index()?;
        let entry = index.exhibits.entry(exhibit.into()).or_default();
        entry.generated.retain(|e| e.params != *params);
        entry.generated.push(IndexEntry {
            params: params.clone(),
            file,
        });
        self.write_index(&index)?;
        Ok(path)
    }
}
