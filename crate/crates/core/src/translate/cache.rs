//! Script cache keyed by `(source, target, backend)`.
//!
//! Each entry may be persisted as one UTF-8 file whose first line is
//! `ftg-script v1 <source> <target> <digest>` followed by the script body.
//! The backend name is hex-encoded into the file name. Entries are removed
//! only through [`ScriptCache::evict`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use thiserror::Error;

use super::script::{digest, ConversionScript};
use crate::formalism::FormalismId;

const HEADER: &str = "ftg-script v1";
const EXTENSION: &str = "ftgscript";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CacheKey {
    pub source: FormalismId,
    pub target: FormalismId,
    pub backend: String,
}

impl CacheKey {
    pub fn new(source: &FormalismId, target: &FormalismId, backend: &str) -> Self {
        Self {
            source: source.clone(),
            target: target.clone(),
            backend: backend.to_string(),
        }
    }

    fn file_name(&self) -> String {
        format!("{}.{}.{}.{EXTENSION}", self.source, self.target, hex::encode(&self.backend))
    }
}

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

#[derive(Debug, Default)]
pub struct ScriptCache {
    entries: RwLock<BTreeMap<CacheKey, ConversionScript>>,
    writers: Mutex<BTreeMap<CacheKey, Arc<Mutex<()>>>>,
    dir: Option<PathBuf>,
}

impl ScriptCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a persistent cache directory and loads
    /// every entry in it.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, CacheError> {
        let dir = dir.into();
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CacheError::Io { path, source }
        };
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        let mut entries = BTreeMap::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(io(&dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == EXTENSION))
            .collect();
        paths.sort();
        for path in paths {
            let text = fs::read_to_string(&path).map_err(io(&path))?;
            let (key, script) = decode(&path, &text)?;
            entries.insert(key, script);
        }
        Ok(Self {
            entries: RwLock::new(entries),
            writers: Mutex::default(),
            dir: Some(dir),
        })
    }

    pub fn get(&self, key: &CacheKey) -> Option<ConversionScript> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lock serializing synthesis for one key; readers are not blocked.
    pub fn writer(&self, key: &CacheKey) -> Arc<Mutex<()>> {
        self.writers
            .lock()
            .expect("cache lock")
            .entry(key.clone())
            .or_default()
            .clone()
    }

    pub fn insert(&self, script: ConversionScript) -> Result<(), CacheError> {
        let key = CacheKey::new(&script.source, &script.target, &script.synthesized_by);
        if let Some(dir) = &self.dir {
            let path = dir.join(key.file_name());
            let text = format!(
                "{HEADER} {} {} {}\n{}",
                script.source, script.target, script.content_digest, script.body
            );
            fs::write(&path, text).map_err(|source| CacheError::Io { path, source })?;
        }
        self.entries.write().expect("cache lock").insert(key, script);
        Ok(())
    }

    pub fn evict(&self, key: &CacheKey) -> Result<bool, CacheError> {
        if let Some(dir) = &self.dir {
            let path = dir.join(key.file_name());
            if path.exists() {
                fs::remove_file(&path).map_err(|source| CacheError::Io { path, source })?;
            }
        }
        Ok(self.entries.write().expect("cache lock").remove(key).is_some())
    }
}

fn decode(path: &Path, text: &str) -> Result<(CacheKey, ConversionScript), CacheError> {
    let corrupt = |message: String| CacheError::Corrupt {
        path: path.to_path_buf(),
        message,
    };
    let (header, body) = text.split_once('\n').unwrap_or((text, ""));
    let fields: Vec<&str> = header.split(' ').collect();
    let [magic, version, source, target, recorded] = fields[..] else {
        return Err(corrupt("malformed header line".into()));
    };
    if format!("{magic} {version}") != HEADER {
        return Err(corrupt(format!("unsupported header {magic} {version}")));
    }
    let backend = path
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.strip_suffix(&format!(".{EXTENSION}")))
        .and_then(|n| n.rsplit('.').next())
        .and_then(|h| hex::decode(h).ok())
        .and_then(|b| String::from_utf8(b).ok())
        .ok_or_else(|| corrupt("file name does not encode a backend".into()))?;
    if digest(body) != recorded {
        return Err(corrupt("body does not match recorded digest".into()));
    }
    let id = |s: &str| FormalismId::new(s).map_err(|e| corrupt(e.to_string()));
    let script =
        ConversionScript::parse(id(source)?, id(target)?, body, &backend).map_err(|e| corrupt(e.to_string()))?;
    Ok((CacheKey::new(&script.source, &script.target, &backend), script))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn script(backend: &str) -> ConversionScript {
        ConversionScript::parse(
            FormalismId::new("tab-json").unwrap(),
            FormalismId::new("tab-csv").unwrap(),
            "map-field * *\n",
            backend,
        )
        .unwrap()
    }

    #[test]
    fn persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ScriptCache::open(dir.path()).unwrap();
        cache.insert(script("remote:http://x/y")).unwrap();
        let key = CacheKey::new(&script("").source, &script("").target, "remote:http://x/y");
        let reopened = ScriptCache::open(dir.path()).unwrap();
        assert_eq!(reopened.get(&key), Some(script("remote:http://x/y")));
        let file = fs::read_dir(dir.path()).unwrap().next().unwrap().unwrap().path();
        let text = fs::read_to_string(&file).unwrap();
        assert!(text.starts_with(&format!("ftg-script v1 tab-json tab-csv {}\n", script("").content_digest)));
        assert!(reopened.evict(&key).unwrap());
        assert!(ScriptCache::open(dir.path()).unwrap().is_empty());
    }

    #[test]
    fn tampered_body_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ScriptCache::open(dir.path()).unwrap();
        cache.insert(script("mock")).unwrap();
        let file = fs::read_dir(dir.path()).unwrap().next().unwrap().unwrap().path();
        let text = fs::read_to_string(&file).unwrap();
        fs::write(&file, text.replace("map-field * *", "drop id")).unwrap();
        assert!(matches!(ScriptCache::open(dir.path()), Err(CacheError::Corrupt { .. })));
    }
}
