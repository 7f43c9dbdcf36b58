//! One JSON document per session in a directory.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::session::{Session, SessionDocument, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("invalid session id `{0}`")]
    InvalidId(String),
    #[error("unsupported schema version {0}")]
    SchemaVersion(u32),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed session document {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// Serializes a document the same way the store writes it.
pub fn document_json(session: &Session) -> String {
    serde_json::to_string_pretty(&SessionDocument::new(session.clone())).expect("session serializes")
}

/// Parses a document, checking the schema version.
pub fn parse_document(text: &str, path: &Path) -> Result<Session, StoreError> {
    let doc: SessionDocument = serde_json::from_str(text).map_err(|source| StoreError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(StoreError::SchemaVersion(doc.schema_version));
    }
    Ok(doc.session)
}

pub fn read_document(path: &Path) -> Result<Session, StoreError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_document(&text, path)
}

impl SessionStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, id: &str) -> Result<PathBuf, StoreError> {
        if !valid_id(id) {
            return Err(StoreError::InvalidId(id.to_string()));
        }
        Ok(self.dir.join(format!("{id}.json")))
    }

    /// Writes to a temporary file and renames it over the old document, so a
    /// crash leaves either the old or the new version.
    pub fn save(&self, session: &Session) -> Result<PathBuf, StoreError> {
        let path = self.path_for(session.id())?;
        let tmp = self.dir.join(format!(".{}.json.tmp", session.id()));
        let mut file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        file.write_all(document_json(session).as_bytes())
            .map_err(io_err(&tmp))?;
        file.sync_all().map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        Ok(path)
    }

    pub fn load(&self, id: &str) -> Result<Session, StoreError> {
        let path = self.path_for(id)?;
        if !path.exists() {
            return Err(StoreError::UnknownSession(id.to_string()));
        }
        read_document(&path)
    }

    /// Ids of all stored sessions, sorted.
    pub fn list(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(io_err(&self.dir))? {
            let entry = entry.map_err(io_err(&self.dir))?;
            let name = entry.file_name();
            let name = name.to_string_lossy();
            if let Some(id) = name.strip_suffix(".json") {
                if valid_id(id) {
                    ids.push(id.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }
}
