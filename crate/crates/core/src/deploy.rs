//! Serving-cost simulation: full-model swapping against one shared backbone
//! with per-task adapters, over a trace of task requests.

use std::fmt;

use thiserror::Error;

use crate::router::{AdapterRegistry, TaskKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeployError {
    #[error("request {index} asks for {kind}, which has no adapter")]
    UnknownTaskInTrace { index: usize, kind: TaskKind },
    #[error("trace is empty")]
    EmptyTrace,
    #[error("compare needs at least two policies, got {0}")]
    TooFewPolicies(usize),
    #[error("cache capacity must be at least 1")]
    ZeroCapacity,
    #[error("model {what} must be a positive finite number, got {value}")]
    InvalidModel { what: &'static str, value: f64 },
    #[error("trace line {line}: {message}")]
    TraceSyntax { line: usize, message: String },
    #[error("unknown serving policy {0:?}, expected full-swap|E or shared|F")]
    UnknownPolicy(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackendModelSpec {
    pub load_ms: f64,
    pub mem_mb: f64,
}

impl BackendModelSpec {
    pub fn new(load_ms: f64, mem_mb: f64) -> Result<Self, DeployError> {
        for (what, value) in [("load_ms", load_ms), ("mem_mb", mem_mb)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(DeployError::InvalidModel { what, value });
            }
        }
        Ok(Self { load_ms, mem_mb })
    }
}

impl Default for BackendModelSpec {
    fn default() -> Self {
        Self {
            load_ms: 10000.0,
            mem_mb: 16000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServingPolicy {
    /// One full model per task, at most `capacity` resident.
    FullSwap(usize),
    /// One backbone plus at most `capacity` resident adapters.
    SharedBackbone(usize),
}

impl ServingPolicy {
    pub fn capacity(self) -> usize {
        match self {
            ServingPolicy::FullSwap(c) | ServingPolicy::SharedBackbone(c) => c,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ServingPolicy::FullSwap(_) => "full-swap",
            ServingPolicy::SharedBackbone(_) => "shared-backbone",
        }
    }

    /// `full-swap`/`E` or `shared`/`shared-backbone`/`F`.
    pub fn parse_with_capacity(token: &str, capacity: usize) -> Result<Self, DeployError> {
        match token {
            "full-swap" | "E" | "e" => Ok(ServingPolicy::FullSwap(capacity)),
            "shared" | "shared-backbone" | "F" | "f" => Ok(ServingPolicy::SharedBackbone(capacity)),
            other => Err(DeployError::UnknownPolicy(other.to_string())),
        }
    }
}

impl fmt::Display for ServingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name(), self.capacity())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskTrace {
    pub requests: Vec<TaskKind>,
}

impl TaskTrace {
    pub fn new(requests: Vec<TaskKind>) -> Self {
        Self { requests }
    }

    /// One task kind token per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, DeployError> {
        let mut requests = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let kind = line.parse().map_err(|message| DeployError::TraceSyntax { line: i + 1, message })?;
            requests.push(kind);
        }
        Ok(Self { requests })
    }

    pub fn distinct(&self) -> usize {
        let mut kinds = self.requests.clone();
        kinds.sort();
        kinds.dedup();
        kinds.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Resident {
    Model(TaskKind),
    Backbone,
    Adapter(TaskKind),
}

impl fmt::Display for Resident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resident::Model(k) => write!(f, "model:{k}"),
            Resident::Backbone => f.write_str("backbone"),
            Resident::Adapter(k) => write!(f, "adapter:{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    Load { request: usize, item: Resident, load_ms: f64, mem_mb: f64 },
    Evict { request: usize, item: Resident, mem_mb: f64 },
    Hit { request: usize, item: Resident },
}

impl Event {
    pub fn request(&self) -> usize {
        match *self {
            Event::Load { request, .. } | Event::Evict { request, .. } | Event::Hit { request, .. } => request,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub policy: ServingPolicy,
    pub total_load_ms: f64,
    pub peak_mem_mb: f64,
    /// Full-model loads under full-swap, adapter loads under shared backbone.
    pub swap_count: usize,
    pub per_request_wait_ms: Vec<f64>,
    pub events: Vec<Event>,
}

impl CostReport {
    pub fn mean_wait_ms(&self) -> f64 {
        if self.per_request_wait_ms.is_empty() {
            0.0
        } else {
            self.per_request_wait_ms.iter().sum::<f64>() / self.per_request_wait_ms.len() as f64
        }
    }

    /// One `key=value` line per metric.
    pub fn to_records(&self) -> String {
        format!(
            "policy={}\ntotal_load_ms={}\npeak_mem_mb={}\nswap_count={}\nrequests={}\nmean_wait_ms={}\n",
            self.policy,
            num(self.total_load_ms),
            num(self.peak_mem_mb),
            self.swap_count,
            self.per_request_wait_ms.len(),
            num(self.mean_wait_ms()),
        )
    }
}

fn num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.3}")
    }
}

/// Aligned text table, one row per report.
pub fn render_table(reports: &[CostReport]) -> String {
    let header = ["policy", "total_load_ms", "peak_mem_mb", "swap_count", "mean_wait_ms"];
    let rows: Vec<[String; 5]> = reports
        .iter()
        .map(|r| {
            [
                r.policy.to_string(),
                num(r.total_load_ms),
                num(r.peak_mem_mb),
                r.swap_count.to_string(),
                num(r.mean_wait_ms()),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: [&str; 5]| {
        let mut s = format!("{:<w$}", cells[0], w = widths[0]);
        for (cell, w) in cells[1..].iter().zip(&widths[1..]) {
            s.push_str(&format!("  {cell:>w$}"));
        }
        s.push('\n');
        s
    };
    let mut out = line(header);
    for row in &rows {
        out.push_str(&line([&row[0], &row[1], &row[2], &row[3], &row[4]]));
    }
    out
}

/// Least-recently-used set; the front is the next victim.
struct Lru {
    capacity: usize,
    order: Vec<Resident>,
}

impl Lru {
    fn touch(&mut self, item: Resident) -> bool {
        match self.order.iter().position(|r| *r == item) {
            Some(i) => {
                self.order.remove(i);
                self.order.push(item);
                true
            }
            None => false,
        }
    }

    fn victim_if_full(&mut self) -> Option<Resident> {
        (self.order.len() >= self.capacity).then(|| self.order.remove(0))
    }
}

pub fn simulate(
    trace: &TaskTrace,
    policy: ServingPolicy,
    model: &BackendModelSpec,
    adapters: &AdapterRegistry,
) -> Result<CostReport, DeployError> {
    if trace.requests.is_empty() {
        return Err(DeployError::EmptyTrace);
    }
    if policy.capacity() == 0 {
        return Err(DeployError::ZeroCapacity);
    }
    let mut specs = Vec::with_capacity(trace.requests.len());
    for (index, kind) in trace.requests.iter().enumerate() {
        let a = adapters
            .for_kind(*kind)
            .ok_or(DeployError::UnknownTaskInTrace { index, kind: *kind })?;
        specs.push((a.load_cost_ms, a.mem_mb));
    }
    let cost = |item: Resident, request: usize| match item {
        Resident::Model(_) | Resident::Backbone => (model.load_ms, model.mem_mb),
        Resident::Adapter(_) => specs[request],
    };
    let mut cache = Lru {
        capacity: policy.capacity(),
        order: Vec::new(),
    };
    let mut mem_of: Vec<(Resident, f64)> = Vec::new();
    let mut events = Vec::new();
    for (request, kind) in trace.requests.iter().enumerate() {
        let item = match policy {
            ServingPolicy::FullSwap(_) => Resident::Model(*kind),
            ServingPolicy::SharedBackbone(_) => {
                if request == 0 {
                    events.push(Event::Load {
                        request,
                        item: Resident::Backbone,
                        load_ms: model.load_ms,
                        mem_mb: model.mem_mb,
                    });
                }
                Resident::Adapter(*kind)
            }
        };
        if cache.touch(item) {
            events.push(Event::Hit { request, item });
            continue;
        }
        if let Some(victim) = cache.victim_if_full() {
            let i = mem_of.iter().position(|(r, _)| *r == victim).expect("victim is resident");
            let (_, mem_mb) = mem_of.remove(i);
            events.push(Event::Evict {
                request,
                item: victim,
                mem_mb,
            });
        }
        let (load_ms, mem_mb) = cost(item, request);
        cache.order.push(item);
        mem_of.push((item, mem_mb));
        events.push(Event::Load {
            request,
            item,
            load_ms,
            mem_mb,
        });
    }
    Ok(replay(policy, trace.requests.len(), &events))
}

/// Rebuilds a report from its event log alone.
pub fn replay(policy: ServingPolicy, requests: usize, events: &[Event]) -> CostReport {
    let mut total_load_ms = 0.0;
    let mut swap_count = 0;
    let mut resident_mb = 0.0;
    let mut peak_mem_mb: f64 = 0.0;
    let mut per_request_wait_ms = vec![0.0; requests];
    for e in events {
        match *e {
            Event::Load {
                request,
                item,
                load_ms,
                mem_mb,
            } => {
                total_load_ms += load_ms;
                per_request_wait_ms[request] += load_ms;
                if item != Resident::Backbone {
                    swap_count += 1;
                }
                resident_mb += mem_mb;
                peak_mem_mb = peak_mem_mb.max(resident_mb);
            }
            Event::Evict { mem_mb, .. } => resident_mb -= mem_mb,
            Event::Hit { .. } => {}
        }
    }
    CostReport {
        policy,
        total_load_ms,
        peak_mem_mb,
        swap_count,
        per_request_wait_ms,
        events: events.to_vec(),
    }
}

pub fn compare(
    trace: &TaskTrace,
    policies: &[ServingPolicy],
    model: &BackendModelSpec,
    adapters: &AdapterRegistry,
) -> Result<Vec<CostReport>, DeployError> {
    if policies.len() < 2 {
        return Err(DeployError::TooFewPolicies(policies.len()));
    }
    policies.iter().map(|p| simulate(trace, *p, model, adapters)).collect()
}
