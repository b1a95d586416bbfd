//! Flat `key = value` configuration and its merge with flags and environment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use ftg_core::planner::Ftg;
use ftg_core::repair::RepairPolicy;
use ftg_core::router::{AdapterRegistry, Lexicon, Router, DEFAULT_THRESHOLD};
use ftg_core::taxonomy::Bindings;
use ftg_core::translate::backend::{CompletionBackend, MockBackend, RemoteBackend};
use ftg_core::translate::cache::ScriptCache;
use ftg_core::translate::oracle::OracleBackend;
use ftg_core::translate::Translators;
use ftg_core::Registry;

use crate::CliError;

pub const BACKEND_ENV: &str = "FTG_BACKEND";

const KEYS: &[&str] = &[
    "graph",
    "lexicon",
    "adapters",
    "bindings",
    "backend",
    "replay_file",
    "remote_url",
    "remote_timeout_ms",
    "cache_dir",
    "seed",
    "max_attempts",
    "threshold",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendChoice {
    Mock,
    Replay,
    Remote,
}

impl FromStr for BackendChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock" => Ok(BackendChoice::Mock),
            "replay" => Ok(BackendChoice::Replay),
            "remote" => Ok(BackendChoice::Remote),
            other => Err(format!("unknown backend {other:?}, expected mock, replay or remote")),
        }
    }
}

/// Parsed config file, relative paths resolved against its directory.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
    base: PathBuf,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| CliError::Usage(format!("{}:{}: {m}", path.display(), i + 1));
            let (k, v) = line.split_once('=').ok_or_else(|| err("expected `key = value`".into()))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(err(format!("unknown key {k:?}")));
            }
            if values.insert(k.to_string(), v.to_string()).is_some() {
                return Err(err(format!("{k} set twice")));
            }
        }
        Ok(Self {
            values,
            base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(|v| self.base.join(v))
    }
}

/// Flag values before merging; `None` means not given.
#[derive(Debug, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub adapters: Option<PathBuf>,
    pub backend: Option<BackendChoice>,
    pub replay_file: Option<PathBuf>,
    pub remote_url: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub max_attempts: Option<usize>,
}

/// Everything a subcommand needs, loaded and checked up front.
pub struct Settings {
    pub graph: Ftg,
    pub router: Router,
    pub bindings: Bindings,
    pub translators: Translators,
    pub backend: Arc<dyn CompletionBackend>,
    pub seed: u64,
    pub repair: RepairPolicy,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| CliError::Usage(format!("{key}: {v:?} is not a valid number")))
}

/// Backend precedence: flag, then `FTG_BACKEND`, then config, then mock.
/// The environment may not select the remote backend.
pub fn choose_backend(
    flag: Option<BackendChoice>,
    env: Option<&str>,
    config: Option<&str>,
) -> Result<BackendChoice, CliError> {
    if let Some(b) = flag {
        return Ok(b);
    }
    if let Some(v) = env.filter(|v| !v.is_empty()) {
        let b: BackendChoice = v.parse().map_err(|e| CliError::Usage(format!("{BACKEND_ENV}: {e}")))?;
        if b == BackendChoice::Remote {
            return Err(CliError::Usage(format!(
                "{BACKEND_ENV} cannot enable the remote backend; pass --backend remote or set it in the config file"
            )));
        }
        return Ok(b);
    }
    match config {
        Some(v) => v.parse().map_err(CliError::Usage),
        None => Ok(BackendChoice::Mock),
    }
}

impl Settings {
    pub fn load(o: Overrides) -> Result<Self, CliError> {
        let file = match &o.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let pick = |flag: &Option<PathBuf>, key: &str| flag.clone().or_else(|| file.path(key));

        let graph = match pick(&o.graph, "graph") {
            Some(p) => Ftg::parse_config(&read(&p)?).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
            None => Ftg::default_graph(),
        };
        let lexicon = match pick(&o.lexicon, "lexicon") {
            Some(p) => Lexicon::parse(&read(&p)?).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
            None => Lexicon::shipped(),
        };
        let adapters = match pick(&o.adapters, "adapters") {
            Some(p) => AdapterRegistry::parse(&read(&p)?).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
            None => AdapterRegistry::shipped(),
        };
        let bindings = match file.path("bindings") {
            Some(p) => Bindings::parse(&read(&p)?).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
            None => Bindings::shipped(),
        };
        let threshold = match file.get("threshold") {
            Some(v) => parse_num("threshold", v)?,
            None => DEFAULT_THRESHOLD,
        };
        let router = Router::new(lexicon, adapters, threshold).map_err(|e| CliError::Usage(e.to_string()))?;

        let seed = match (o.seed, file.get("seed")) {
            (Some(s), _) => s,
            (None, Some(v)) => parse_num("seed", v)?,
            (None, None) => 0,
        };
        let max_attempts = match (o.max_attempts, file.get("max_attempts")) {
            (Some(m), _) => m,
            (None, Some(v)) => parse_num("max_attempts", v)?,
            (None, None) => RepairPolicy::default().max_attempts,
        };
        let repair = RepairPolicy::with_max_attempts(max_attempts).map_err(|e| CliError::Usage(e.to_string()))?;

        let registry: Arc<Registry> = Arc::new(ftg_core::mini::standard_registry());
        let cache = match o.cache_dir.clone().or_else(|| file.path("cache_dir")) {
            Some(dir) => ScriptCache::open(&dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?,
            None => ScriptCache::in_memory(),
        };
        let translators = Translators::new(registry.clone()).with_cache(Arc::new(cache));

        let env = std::env::var(BACKEND_ENV).ok();
        let backend: Arc<dyn CompletionBackend> = match choose_backend(o.backend, env.as_deref(), file.get("backend"))? {
            BackendChoice::Mock => Arc::new(OracleBackend::new(registry)),
            BackendChoice::Replay => {
                let p = pick(&o.replay_file, "replay_file")
                    .ok_or_else(|| CliError::Usage("the replay backend needs --replay-file".into()))?;
                Arc::new(MockBackend::from_replay_file("replay", &p).map_err(CliError::Usage)?)
            }
            BackendChoice::Remote => {
                let url = o
                    .remote_url
                    .clone()
                    .or_else(|| file.get("remote_url").map(str::to_string))
                    .ok_or_else(|| CliError::Usage("the remote backend needs --remote-url".into()))?;
                let timeout = match file.get("remote_timeout_ms") {
                    Some(v) => parse_num("remote_timeout_ms", v)?,
                    None => 30_000,
                };
                Arc::new(RemoteBackend::new(url, Duration::from_millis(timeout)))
            }
        };

        Ok(Self {
            graph,
            router,
            bindings,
            translators,
            backend,
            seed,
            repair,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backend_precedence() {
        use BackendChoice::*;
        assert_eq!(choose_backend(Some(Remote), Some("replay"), Some("mock")).unwrap(), Remote);
        assert_eq!(choose_backend(None, Some("replay"), Some("remote")).unwrap(), Replay);
        assert_eq!(choose_backend(None, None, Some("remote")).unwrap(), Remote);
        assert_eq!(choose_backend(None, Some(""), None).unwrap(), Mock);
        assert!(choose_backend(None, Some("remote"), None).is_err());
        assert!(choose_backend(None, Some("gpt"), None).is_err());
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ftg.conf");
        std::fs::write(&p, "seed = 4\ncolour = blue\n").unwrap();
        assert!(matches!(ConfigFile::load(&p), Err(CliError::Usage(m)) if m.contains("colour")));
        std::fs::write(&p, "# comment\nseed = 4\ngraph = g.ftg\n").unwrap();
        let c = ConfigFile::load(&p).unwrap();
        assert_eq!(c.get("seed"), Some("4"));
        assert_eq!(c.path("graph"), Some(dir.path().join("g.ftg")));
    }
}
