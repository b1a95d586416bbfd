//! The formalism-transformation graph and plan selection.
//!
//! Plans are simple paths. Selection is exact: a best-first search over
//! partial paths, ordered by the policy key and then by the sequence of edge
//! ids. Every policy key is monotone under path extension (fidelity never
//! rises, latency and non-deterministic hop counts never fall), so the first
//! complete path popped is optimal, tie-breaks included.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::diagnostic::{has_errors, Diagnostic};
use crate::formalism::{Artifact, FormalismId};
use crate::repair::{repair_with_spec, RepairAttempt, RepairError, RepairPolicy, RepairStatus, RepairTrace};
use crate::translate::backend::CompletionBackend;
use crate::translate::{TranslateError, TranslationMode, TranslatorKind, TranslatorSpec, Translators};

pub const DEFAULT_GRAPH: &str = include_str!("../data/graph.ftg");

#[derive(Debug, Clone, PartialEq)]
pub struct TransformationEdge {
    /// Insertion index; breaks ties between equally good plans.
    pub id: usize,
    pub spec: TranslatorSpec,
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("formalism {0} is not a node of the graph")]
    UnknownNode(FormalismId),
    #[error("no path from {from} to {to}")]
    NoPath { from: FormalismId, to: FormalismId },
    #[error("self-loop edges are not allowed ({0})")]
    SelfLoop(FormalismId),
    #[error(transparent)]
    InvalidEdge(TranslateError),
    #[error("graph config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("artifact is in {found}, plan starts at {expected}")]
    SourceMismatch { expected: FormalismId, found: FormalismId },
    #[error("hop {index} failed: {reason}")]
    HopFailed {
        /// 0-based index of the failing hop.
        index: usize,
        reason: String,
        /// Traces of every hop run so far, the failing one last.
        traces: Vec<RepairTrace>,
    },
    #[error(transparent)]
    Translate(#[from] TranslateError),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ftg {
    nodes: BTreeSet<FormalismId>,
    edges: Vec<TransformationEdge>,
}

impl Ftg {
    pub fn new() -> Self {
        Self::default()
    }

    /// The shipped graph over the six built-ins and `nl`.
    pub fn default_graph() -> Self {
        Self::parse_config(DEFAULT_GRAPH).expect("shipped graph parses")
    }

    pub fn add_node(&mut self, id: FormalismId) {
        self.nodes.insert(id);
    }

    /// Adds an edge, registering its endpoints as nodes. Returns the edge id.
    pub fn add_edge(&mut self, spec: TranslatorSpec) -> Result<usize, PlanError> {
        if spec.source == spec.target {
            return Err(PlanError::SelfLoop(spec.source));
        }
        spec.check().map_err(PlanError::InvalidEdge)?;
        self.nodes.insert(spec.source.clone());
        self.nodes.insert(spec.target.clone());
        let id = self.edges.len();
        self.edges.push(TransformationEdge { id, spec });
        Ok(id)
    }

    pub fn nodes(&self) -> &BTreeSet<FormalismId> {
        &self.nodes
    }

    pub fn edges(&self) -> &[TransformationEdge] {
        &self.edges
    }

    pub fn edge_mut(&mut self, id: usize) -> Option<&mut TransformationEdge> {
        self.edges.get_mut(id)
    }

    pub fn contains(&self, id: &FormalismId) -> bool {
        self.nodes.contains(id)
    }

    fn outgoing(&self, from: &FormalismId) -> impl Iterator<Item = &TransformationEdge> {
        let from = from.clone();
        self.edges.iter().filter(move |e| e.spec.source == from)
    }

    fn require(&self, id: &FormalismId) -> Result<(), PlanError> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(PlanError::UnknownNode(id.clone()))
        }
    }

    /// Parses `edge <source> <target> <kind> fid=<f> lat=<f> [mode=<m>]` and
    /// `node <id>` lines; `#` starts a comment.
    pub fn parse_config(text: &str) -> Result<Self, PlanError> {
        let mut g = Ftg::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| PlanError::Config { line: i + 1, message };
            let words: Vec<&str> = line.split_whitespace().collect();
            let id = |s: &str| FormalismId::new(s).map_err(|e| err(e.to_string()));
            match words[0] {
                "node" if words.len() == 2 => g.add_node(id(words[1])?),
                "edge" if words.len() >= 4 => {
                    let kind: TranslatorKind = words[3].parse().map_err(err)?;
                    let mut spec = TranslatorSpec::new(id(words[1])?, id(words[2])?, kind);
                    let (mut fid, mut lat) = (None, None);
                    for attr in &words[4..] {
                        let (k, v) = attr
                            .split_once('=')
                            .ok_or_else(|| err(format!("expected key=value, found {attr:?}")))?;
                        let number = || v.parse::<f64>().map_err(|_| err(format!("{k}: {v:?} is not a number")));
                        match k {
                            "fid" => fid = Some(number()?),
                            "lat" => lat = Some(number()?),
                            "mode" => spec.mode = v.parse::<TranslationMode>().map_err(err)?,
                            other => return Err(err(format!("unknown edge attribute {other:?}"))),
                        }
                    }
                    let (Some(fid), Some(lat)) = (fid, lat) else {
                        return Err(err("edge needs fid= and lat=".into()));
                    };
                    let spec = spec.with_estimates(fid, lat).map_err(|e| err(e.to_string()))?;
                    g.add_edge(spec).map_err(|e| err(e.to_string()))?;
                }
                _ => return Err(err(format!("unrecognized record {line:?}"))),
            }
        }
        Ok(g)
    }

    pub fn to_config(&self) -> String {
        let mut out = String::new();
        for node in &self.nodes {
            if !self.edges.iter().any(|e| e.spec.source == *node || e.spec.target == *node) {
                out.push_str(&format!("node {node}\n"));
            }
        }
        for e in &self.edges {
            let s = &e.spec;
            out.push_str(&format!(
                "edge {} {} {} fid={} lat={}",
                s.source, s.target, s.kind, s.fidelity_est, s.latency_est
            ));
            if s.mode != TranslationMode::Strict {
                out.push_str(&format!(" mode={}", s.mode));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CostPolicy {
    MaxFidelity,
    MinLatency,
    Lexicographic,
    PreferDeterministic,
}

impl CostPolicy {
    pub const ALL: [CostPolicy; 4] = [
        CostPolicy::MaxFidelity,
        CostPolicy::MinLatency,
        CostPolicy::Lexicographic,
        CostPolicy::PreferDeterministic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CostPolicy::MaxFidelity => "max-fidelity",
            CostPolicy::MinLatency => "min-latency",
            CostPolicy::Lexicographic => "lexicographic",
            CostPolicy::PreferDeterministic => "prefer-deterministic",
        }
    }
}

impl fmt::Display for CostPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CostPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CostPolicy::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown policy {s:?}, expected one of max-fidelity, min-latency, lexicographic, prefer-deterministic"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub source: FormalismId,
    pub target: FormalismId,
    pub hops: Vec<TransformationEdge>,
    pub predicted_fidelity: f64,
    pub predicted_latency: f64,
}

impl Plan {
    pub fn empty(at: FormalismId) -> Self {
        Self {
            source: at.clone(),
            target: at,
            hops: Vec::new(),
            predicted_fidelity: 1.0,
            predicted_latency: 0.0,
        }
    }

    fn extended(&self, edge: &TransformationEdge) -> Self {
        let mut hops = self.hops.clone();
        hops.push(edge.clone());
        Self {
            source: self.source.clone(),
            target: edge.spec.target.clone(),
            hops,
            predicted_fidelity: self.predicted_fidelity * edge.spec.fidelity_est,
            predicted_latency: self.predicted_latency + edge.spec.latency_est,
        }
    }

    pub fn edge_ids(&self) -> Vec<usize> {
        self.hops.iter().map(|h| h.id).collect()
    }

    pub fn nondeterministic_hops(&self) -> usize {
        self.hops.iter().filter(|h| !h.spec.deterministic).count()
    }

    /// Formalisms visited, source first.
    pub fn route(&self) -> Vec<&FormalismId> {
        std::iter::once(&self.source).chain(self.hops.iter().map(|h| &h.spec.target)).collect()
    }

    /// `a->b->c`, used as provenance.
    pub fn label(&self) -> String {
        self.route().iter().map(|f| f.as_str()).collect::<Vec<_>>().join("->")
    }

    /// One `key=value` line per hop and a summary line.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        for (i, h) in self.hops.iter().enumerate() {
            out.push_str(&format!(
                "hop={} edge={} source={} target={} kind={} fid={} lat={}\n",
                i + 1,
                h.id,
                h.spec.source,
                h.spec.target,
                h.spec.kind,
                h.spec.fidelity_est,
                h.spec.latency_est
            ));
        }
        out.push_str(&format!(
            "plan={} hops={} fidelity={:.6} latency={}\n",
            self.label(),
            self.hops.len(),
            self.predicted_fidelity,
            self.predicted_latency
        ));
        out
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.source)?;
        for h in &self.hops {
            write!(f, " -[{}]-> {}", h.spec.kind, h.spec.target)?;
        }
        Ok(())
    }
}

fn cost_order(policy: CostPolicy, a: &Plan, b: &Plan) -> Ordering {
    let fid = || b.predicted_fidelity.total_cmp(&a.predicted_fidelity);
    let lat = || a.predicted_latency.total_cmp(&b.predicted_latency);
    match policy {
        CostPolicy::MaxFidelity => fid(),
        CostPolicy::MinLatency => lat(),
        CostPolicy::Lexicographic => fid().then_with(lat),
        CostPolicy::PreferDeterministic => a
            .nondeterministic_hops()
            .cmp(&b.nondeterministic_hops())
            .then_with(fid)
            .then_with(lat),
    }
}

/// Total order on plans: `Less` means better. Equal costs fall back to the
/// lexicographic order of edge-id sequences.
pub fn compare_plans(policy: CostPolicy, a: &Plan, b: &Plan) -> Ordering {
    cost_order(policy, a, b).then_with(|| a.edge_ids().cmp(&b.edge_ids()))
}

struct Frontier {
    policy: CostPolicy,
    plan: Plan,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    // max-heap: the better plan must compare greater
    fn cmp(&self, other: &Self) -> Ordering {
        compare_plans(self.policy, &other.plan, &self.plan)
    }
}

/// The best simple path from `source` to `target` under `policy`.
pub fn plan(g: &Ftg, source: &FormalismId, target: &FormalismId, policy: CostPolicy) -> Result<Plan, PlanError> {
    g.require(source)?;
    g.require(target)?;
    let mut heap = BinaryHeap::new();
    heap.push(Frontier {
        policy,
        plan: Plan::empty(source.clone()),
    });
    while let Some(Frontier { plan, .. }) = heap.pop() {
        if plan.target == *target {
            return Ok(plan);
        }
        let visited: BTreeSet<&FormalismId> = plan.route().into_iter().collect();
        for edge in g.outgoing(&plan.target) {
            if !visited.contains(&edge.spec.target) {
                heap.push(Frontier {
                    policy,
                    plan: plan.extended(edge),
                });
            }
        }
    }
    Err(PlanError::NoPath {
        from: source.clone(),
        to: target.clone(),
    })
}

/// Every simple path of at most `max_hops` edges, in depth-first edge-id order.
pub fn enumerate_plans(g: &Ftg, source: &FormalismId, target: &FormalismId, max_hops: usize) -> Vec<Plan> {
    fn walk(g: &Ftg, current: Plan, target: &FormalismId, max_hops: usize, out: &mut Vec<Plan>) {
        if current.target == *target {
            out.push(current);
            return;
        }
        if current.hops.len() == max_hops {
            return;
        }
        let visited: BTreeSet<FormalismId> = current.route().into_iter().cloned().collect();
        for edge in g.outgoing(&current.target) {
            if !visited.contains(&edge.spec.target) {
                walk(g, current.extended(edge), target, max_hops, out);
            }
        }
    }
    let mut out = Vec::new();
    if g.contains(source) && g.contains(target) {
        walk(g, Plan::empty(source.clone()), target, max_hops, &mut out);
    }
    out
}

/// Best achievable fidelity by Dijkstra over edge weights `-ln(fidelity)`.
pub fn max_fidelity_by_log_weights(g: &Ftg, source: &FormalismId, target: &FormalismId) -> Option<f64> {
    let mut dist: HashMap<&FormalismId, f64> = HashMap::new();
    let mut done: BTreeSet<&FormalismId> = BTreeSet::new();
    dist.insert(source, 0.0);
    loop {
        let next = dist
            .iter()
            .filter(|(n, _)| !done.contains(*n))
            .min_by(|a, b| a.1.total_cmp(b.1).then_with(|| a.0.cmp(b.0)))
            .map(|(n, d)| (*n, *d));
        let (node, d) = next?;
        if node == target {
            return Some((-d).exp());
        }
        done.insert(node);
        for edge in g.outgoing(node) {
            let nd = d - edge.spec.fidelity_est.ln();
            let slot = dist.entry(&edge.spec.target).or_insert(f64::INFINITY);
            if nd < *slot {
                *slot = nd;
            }
        }
    }
}

/// Result of running a plan to completion.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRun {
    pub artifact: Artifact,
    /// Diagnostics of the last hop (warnings only, since failures halt).
    pub diagnostics: Vec<Diagnostic>,
    /// Backend or rule invocations across all hops.
    pub attempts: usize,
    pub traces: Vec<RepairTrace>,
}

fn single_attempt_trace(candidate: &str, diagnostics: &[Diagnostic]) -> RepairTrace {
    RepairTrace {
        attempts: vec![RepairAttempt {
            prompt: String::new(),
            candidate: candidate.to_string(),
            diagnostics: diagnostics.to_vec(),
            error: None,
        }],
        outcome: if has_errors(diagnostics) {
            RepairStatus::BudgetExhausted
        } else {
            RepairStatus::Valid
        },
    }
}

/// Runs each hop in order, validating after every hop. Model-backed direct
/// hops go through the repair loop; rule-based and scripted hops run once.
/// Hop `i` draws seeds starting at `seed + i * max_attempts`.
pub fn execute_plan(
    translators: &Translators,
    a: &Artifact,
    plan: &Plan,
    backend: &dyn CompletionBackend,
    policy: &RepairPolicy,
    seed: u64,
) -> Result<PlanRun, PlanError> {
    if a.formalism != plan.source {
        return Err(PlanError::SourceMismatch {
            expected: plan.source.clone(),
            found: a.formalism.clone(),
        });
    }
    policy
        .check()
        .map_err(|e| PlanError::Translate(TranslateError::InvalidSpec(e.to_string())))?;
    let mut current = a.clone();
    let mut traces = Vec::new();
    let mut diagnostics = Vec::new();
    let mut attempts = 0;
    for (index, hop) in plan.hops.iter().enumerate() {
        let hop_seed = seed.wrapping_add((index * policy.max_attempts) as u64);
        let (outcome, trace) = match hop.spec.kind {
            TranslatorKind::LlmDirect => {
                match repair_with_spec(translators, &current, &hop.spec, backend, policy, hop_seed) {
                    Ok(pair) => pair,
                    Err(RepairError::Backend { error, trace }) => {
                        traces.push(trace);
                        return Err(PlanError::HopFailed {
                            index,
                            reason: error.to_string(),
                            traces,
                        });
                    }
                    Err(RepairError::Translate(e)) => return Err(e.into()),
                    Err(e @ RepairError::InvalidPolicy(_)) => {
                        return Err(PlanError::Translate(TranslateError::InvalidSpec(e.to_string())))
                    }
                }
            }
            _ => match translators.translate(&current, &hop.spec, backend, hop_seed) {
                Ok(outcome) => {
                    let trace = single_attempt_trace(&outcome.artifact.content, &outcome.diagnostics);
                    (outcome, trace)
                }
                Err(e @ (TranslateError::Backend(_) | TranslateError::ScriptSynthesisFailed { .. } | TranslateError::ScriptRuntime(_))) => {
                    traces.push(single_attempt_trace("", &[]));
                    return Err(PlanError::HopFailed {
                        index,
                        reason: e.to_string(),
                        traces,
                    });
                }
                Err(e) => return Err(e.into()),
            },
        };
        attempts += outcome.attempts;
        let failed = trace.outcome != RepairStatus::Valid;
        traces.push(trace);
        if failed {
            let codes: Vec<&str> = outcome.diagnostics.iter().map(|d| d.code).collect();
            return Err(PlanError::HopFailed {
                index,
                reason: format!("{} output invalid: {}", hop.spec.target, codes.join(", ")),
                traces,
            });
        }
        diagnostics = outcome.diagnostics;
        current = outcome.artifact;
    }
    if !plan.hops.is_empty() {
        current.provenance = crate::formalism::Provenance::Translated {
            plan: plan.label(),
            attempts,
        };
    }
    Ok(PlanRun {
        artifact: current,
        diagnostics,
        attempts,
        traces,
    })
}
