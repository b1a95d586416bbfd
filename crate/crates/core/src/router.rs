//! Task routing: classify a request into a [`TaskKind`] by weighted keyword
//! scoring and pick the adapter profile registered for that kind.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.txt");
pub const DEFAULT_ADAPTERS: &str = include_str!("../data/adapters.txt");
pub const DEFAULT_CORPUS: &str = include_str!("../data/corpus.txt");
pub const DEFAULT_THRESHOLD: f64 = 0.5;

macro_rules! task_kinds {
    ($($kind:ident),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum TaskKind {
            $($kind),*
        }

        impl TaskKind {
            pub const ALL: &'static [TaskKind] = &[$(TaskKind::$kind),*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(TaskKind::$kind => stringify!($kind)),*
                }
            }
        }
    };
}

task_kinds! {
    DraftModelStructure,
    AlignOntologies,
    ReconcileSchema,
    VerifyModelLogic,
    SpecifyProcessModel,
    FormalizeRules,
    DocumentModel,
    OrchestrateWorkflow,
    GenerateSimulationCode,
    TranslateCode,
    GenerateTests,
    GenerateDocumentation,
    AnalyzeRequirements,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown task kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RouteError {
    #[error("empty request")]
    EmptyRequest,
    #[error("ambiguous request: {}", describe_scores(.best, .runner_up))]
    AmbiguousTask {
        best: Option<(TaskKind, f64)>,
        runner_up: Option<(TaskKind, f64)>,
    },
    #[error("no adapter registered for {0}")]
    NoAdapterForKind(TaskKind),
    #[error("threshold {0} is outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("{what} line {line}: {message}")]
    Config {
        what: &'static str,
        line: usize,
        message: String,
    },
}

fn describe_scores(best: &Option<(TaskKind, f64)>, runner_up: &Option<(TaskKind, f64)>) -> String {
    match (best, runner_up) {
        (None, _) => "no keyword matched".into(),
        (Some((k, c)), None) => format!("{k} at {c:.3} is below the threshold"),
        (Some((k, c)), Some((r, rc))) => format!("{k} {c:.3} vs {r} {rc:.3}"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: Vec<(TaskKind, Vec<(String, f64)>)>,
}

impl Lexicon {
    pub fn shipped() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("shipped lexicon parses")
    }

    pub fn parse(text: &str) -> Result<Self, RouteError> {
        let mut entries: Vec<(TaskKind, Vec<(String, f64)>)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| RouteError::Config {
                what: "lexicon",
                line: i + 1,
                message,
            };
            let words: Vec<&str> = line.split_whitespace().collect();
            match words[..] {
                ["kind", kind] => {
                    let kind: TaskKind = kind.parse().map_err(err)?;
                    if entries.iter().any(|(k, _)| *k == kind) {
                        return Err(err(format!("{kind} declared twice")));
                    }
                    entries.push((kind, Vec::new()));
                }
                ["kw", keyword, weight] => {
                    let weight: f64 = weight
                        .parse()
                        .ok()
                        .filter(|w: &f64| w.is_finite() && *w > 0.0)
                        .ok_or_else(|| err(format!("weight {weight:?} must be a positive number")))?;
                    let (_, kws) = entries
                        .last_mut()
                        .ok_or_else(|| err("keyword before any `kind` line".into()))?;
                    kws.push((keyword.to_lowercase(), weight));
                }
                _ => return Err(err(format!("unrecognized line {line:?}"))),
            }
        }
        if entries.iter().all(|(_, kws)| kws.is_empty()) {
            return Err(RouteError::Config {
                what: "lexicon",
                line: 1,
                message: "lexicon has no keywords".into(),
            });
        }
        Ok(Self { entries })
    }

    /// Raw score per kind, in enumeration order, for every declared kind.
    pub fn scores(&self, request: &str) -> Vec<(TaskKind, f64)> {
        let words: Vec<String> = request
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .collect();
        let mut out: Vec<(TaskKind, f64)> = self
            .entries
            .iter()
            .map(|(kind, kws)| {
                let score = kws
                    .iter()
                    .filter(|(kw, _)| words.iter().any(|w| w.starts_with(kw.as_str())))
                    .map(|(_, w)| w)
                    .sum();
                (*kind, score)
            })
            .collect();
        out.sort_by_key(|(k, _)| *k);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterSpec {
    pub task: TaskKind,
    pub name: String,
    pub prompt_preamble: String,
    pub load_cost_ms: f64,
    pub mem_mb: f64,
}

impl AdapterSpec {
    pub fn new(task: TaskKind, name: impl Into<String>, load_cost_ms: f64, mem_mb: f64) -> Self {
        Self {
            task,
            name: name.into(),
            prompt_preamble: String::new(),
            load_cost_ms,
            mem_mb,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdapterRegistry {
    adapters: Vec<AdapterSpec>,
}

impl AdapterRegistry {
    pub fn shipped() -> Self {
        Self::parse(DEFAULT_ADAPTERS).expect("shipped adapters parse")
    }

    pub fn new(adapters: Vec<AdapterSpec>) -> Result<Self, RouteError> {
        let mut seen = BTreeSet::new();
        for (i, a) in adapters.iter().enumerate() {
            let bad = |message: String| RouteError::Config {
                what: "adapters",
                line: i + 1,
                message,
            };
            if !seen.insert((a.task, a.name.clone())) {
                return Err(bad(format!("adapter {} {} registered twice", a.task, a.name)));
            }
            for (what, v) in [("load_ms", a.load_cost_ms), ("mem_mb", a.mem_mb)] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(bad(format!("{what} {v} must be a finite non-negative number")));
                }
            }
        }
        Ok(Self { adapters })
    }

    /// `adapter <kind> <name> load_ms=<n> mem_mb=<n> [preamble=<rest of line>]`.
    /// Missing costs default to 50 ms and 100 MB.
    pub fn parse(text: &str) -> Result<Self, RouteError> {
        let mut adapters = Vec::new();
        let mut line_of = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim_start().starts_with('#') {
                continue;
            }
            let (body, preamble) = match raw.split_once("preamble=") {
                Some((b, p)) => (b, p.trim().to_string()),
                None => (raw.split('#').next().unwrap_or(""), String::new()),
            };
            let words: Vec<&str> = body.split_whitespace().collect();
            if words.is_empty() {
                continue;
            }
            let err = |message: String| RouteError::Config {
                what: "adapters",
                line: i + 1,
                message,
            };
            let ["adapter", kind, name, attrs @ ..] = &words[..] else {
                return Err(err(format!("unrecognized line {:?}", raw.trim())));
            };
            let mut spec = AdapterSpec::new(kind.parse().map_err(err)?, *name, 50.0, 100.0);
            spec.prompt_preamble = preamble;
            for attr in attrs {
                let (k, v) = attr
                    .split_once('=')
                    .ok_or_else(|| err(format!("expected key=value, found {attr:?}")))?;
                let v: f64 = v.parse().map_err(|_| err(format!("{k}: {v:?} is not a number")))?;
                match k {
                    "load_ms" => spec.load_cost_ms = v,
                    "mem_mb" => spec.mem_mb = v,
                    other => return Err(err(format!("unknown adapter attribute {other:?}"))),
                }
            }
            adapters.push(spec);
            line_of.push(i + 1);
        }
        Self::new(adapters).map_err(|e| match e {
            RouteError::Config { what, line, message } => RouteError::Config {
                what,
                line: line_of.get(line - 1).copied().unwrap_or(line),
                message,
            },
            other => other,
        })
    }

    pub fn all(&self) -> &[AdapterSpec] {
        &self.adapters
    }

    /// The first registered adapter for `kind`.
    pub fn for_kind(&self, kind: TaskKind) -> Option<&AdapterSpec> {
        self.adapters.iter().find(|a| a.task == kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingDecision {
    pub task: TaskKind,
    pub adapter: AdapterSpec,
    /// Winning score over the sum of all scores.
    pub confidence: f64,
    pub runner_up: Option<(TaskKind, f64)>,
}

#[derive(Debug, Clone)]
pub struct Router {
    pub lexicon: Lexicon,
    pub adapters: AdapterRegistry,
    threshold: f64,
}

impl Router {
    pub fn new(lexicon: Lexicon, adapters: AdapterRegistry, threshold: f64) -> Result<Self, RouteError> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(RouteError::InvalidThreshold(threshold));
        }
        Ok(Self {
            lexicon,
            adapters,
            threshold,
        })
    }

    pub fn shipped() -> Self {
        Self::new(Lexicon::shipped(), AdapterRegistry::shipped(), DEFAULT_THRESHOLD).expect("valid threshold")
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn classify(&self, request: &str) -> Result<RoutingDecision, RouteError> {
        if request.trim().is_empty() {
            return Err(RouteError::EmptyRequest);
        }
        let scores = self.lexicon.scores(request);
        let total: f64 = scores.iter().map(|(_, s)| s).sum();
        let mut ranked: Vec<(TaskKind, f64)> = scores
            .into_iter()
            .filter(|(_, s)| *s > 0.0)
            .map(|(k, s)| (k, s / total))
            .collect();
        // stable sort keeps enumeration order among equal scores
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        let best = ranked.first().copied();
        let runner_up = ranked.get(1).copied();
        let Some((task, confidence)) = best.filter(|(_, c)| *c >= self.threshold) else {
            return Err(RouteError::AmbiguousTask { best, runner_up });
        };
        let adapter = self.adapters.for_kind(task).ok_or(RouteError::NoAdapterForKind(task))?.clone();
        Ok(RoutingDecision {
            task,
            adapter,
            confidence,
            runner_up,
        })
    }
}

/// The shipped `(kind, utterance)` corpus.
pub fn corpus(text: &str) -> Result<Vec<(TaskKind, String)>, RouteError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| RouteError::Config {
            what: "corpus",
            line: i + 1,
            message,
        };
        let (kind, utterance) = line.split_once('|').ok_or_else(|| err("expected `Kind | utterance`".into()))?;
        out.push((kind.trim().parse().map_err(err)?, utterance.trim().to_string()));
    }
    Ok(out)
}

pub fn shipped_corpus() -> Vec<(TaskKind, String)> {
    corpus(DEFAULT_CORPUS).expect("shipped corpus parses")
}
