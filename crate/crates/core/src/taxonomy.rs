//! Shipped task-kind to pipeline bindings and the dispatch step that turns a
//! routing decision into a concrete pipeline invocation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::diagnostic::{codes, Diagnostic};
use crate::element::{Element, ElementKey, ElementSet};
use crate::formalism::{Artifact, FormalismError, FormalismId, Registry};
use crate::planner::{execute_plan, plan, CostPolicy, Ftg, Plan, PlanError, PlanRun};
use crate::repair::RepairPolicy;
use crate::router::{RoutingDecision, TaskKind};
use crate::translate::backend::CompletionBackend;
use crate::translate::{TranslatorKind, Translators};

pub const DEFAULT_BINDINGS: &str = include_str!("../data/bindings.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PipelineKind {
    Repair,
    Plan,
    Scripted,
    Merge,
    Direct,
}

impl PipelineKind {
    pub const ALL: [PipelineKind; 5] = [
        PipelineKind::Repair,
        PipelineKind::Plan,
        PipelineKind::Scripted,
        PipelineKind::Merge,
        PipelineKind::Direct,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PipelineKind::Repair => "repair",
            PipelineKind::Plan => "plan",
            PipelineKind::Scripted => "scripted",
            PipelineKind::Merge => "merge",
            PipelineKind::Direct => "direct",
        }
    }

    /// Translator kind a single-hop pipeline runs on.
    fn hop_kind(self) -> Option<TranslatorKind> {
        match self {
            PipelineKind::Repair | PipelineKind::Direct => Some(TranslatorKind::LlmDirect),
            PipelineKind::Scripted => Some(TranslatorKind::LlmScripted),
            PipelineKind::Plan | PipelineKind::Merge => None,
        }
    }
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PipelineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PipelineKind::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown pipeline {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineTemplate {
    pub kind: PipelineKind,
    pub source: FormalismId,
    pub target: FormalismId,
    /// Only used by `plan` pipelines.
    pub policy: CostPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineBinding {
    pub task: TaskKind,
    pub pipeline: PipelineTemplate,
    pub rationale_note: String,
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("bindings line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("no pipeline configured for {0}")]
    NoPipelineForKind(TaskKind),
    #[error("{kind} pipeline for {task} needs a {translator} edge {source_id} -> {target}")]
    MissingEdge {
        task: TaskKind,
        kind: PipelineKind,
        translator: TranslatorKind,
        source_id: FormalismId,
        target: FormalismId,
    },
    #[error("the {0} pipeline cannot be run from a single artifact")]
    NotRunnable(PipelineKind),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Formalism(#[from] FormalismError),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings {
    by_task: BTreeMap<TaskKind, PipelineBinding>,
}

impl Bindings {
    pub fn shipped() -> Self {
        Self::parse(DEFAULT_BINDINGS).expect("shipped bindings parse")
    }

    pub fn parse(text: &str) -> Result<Self, TaxonomyError> {
        let mut by_task = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let err = |message: String| TaxonomyError::Config { line: i + 1, message };
            let (body, note) = trimmed
                .split_once("note=")
                .ok_or_else(|| err("binding needs a note=".into()))?;
            let words: Vec<&str> = body.split_whitespace().collect();
            let ["bind", task, kind, source, target, rest @ ..] = &words[..] else {
                return Err(err(format!("unrecognized line {trimmed:?}")));
            };
            let task: TaskKind = task.parse().map_err(err)?;
            let id = |t: &str| FormalismId::new(t).map_err(|e| err(e.to_string()));
            let mut pipeline = PipelineTemplate {
                kind: kind.parse().map_err(err)?,
                source: id(source)?,
                target: id(target)?,
                policy: CostPolicy::MaxFidelity,
            };
            for attr in rest {
                match attr.split_once('=') {
                    Some(("policy", p)) => pipeline.policy = p.parse().map_err(err)?,
                    _ => return Err(err(format!("unknown binding attribute {attr:?}"))),
                }
            }
            let binding = PipelineBinding {
                task,
                pipeline,
                rationale_note: note.trim().to_string(),
            };
            if by_task.insert(task, binding).is_some() {
                return Err(err(format!("{task} bound twice")));
            }
        }
        Ok(Self { by_task })
    }

    pub fn get(&self, task: TaskKind) -> Option<&PipelineBinding> {
        self.by_task.get(&task)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PipelineBinding> {
        self.by_task.values()
    }

    pub fn len(&self) -> usize {
        self.by_task.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_task.is_empty()
    }

    pub fn without(mut self, task: TaskKind) -> Self {
        self.by_task.remove(&task);
        self
    }

    /// Every formalism named by a binding that is not a node of `graph`.
    pub fn unknown_formalisms(&self, graph: &Ftg) -> Vec<FormalismId> {
        let mut out: Vec<FormalismId> = self
            .iter()
            .flat_map(|b| [&b.pipeline.source, &b.pipeline.target])
            .filter(|f| !graph.contains(f))
            .cloned()
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

pub fn shipped_bindings() -> Vec<PipelineBinding> {
    Bindings::shipped().iter().cloned().collect()
}

/// What `dispatch` hands to the executor.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineDescriptor {
    pub task: TaskKind,
    pub adapter: String,
    pub preamble: String,
    pub kind: PipelineKind,
    pub source: FormalismId,
    pub target: FormalismId,
    /// Concrete route; `None` only for merge pipelines.
    pub plan: Option<Plan>,
    pub repair: RepairPolicy,
    pub request: String,
    pub note: String,
}

impl PipelineDescriptor {
    pub fn to_records(&self) -> String {
        let route = self.plan.as_ref().map(Plan::label).unwrap_or_else(|| "-".into());
        format!(
            "task={} adapter={} pipeline={} source={} target={} route={} max_attempts={}\n",
            self.task, self.adapter, self.kind, self.source, self.target, route, self.repair.max_attempts
        )
    }
}

pub struct DispatchContext<'a> {
    pub bindings: &'a Bindings,
    pub graph: &'a Ftg,
    pub repair: RepairPolicy,
}

pub fn dispatch(
    decision: &RoutingDecision,
    request: &str,
    ctx: &DispatchContext<'_>,
) -> Result<PipelineDescriptor, TaxonomyError> {
    let binding = ctx
        .bindings
        .get(decision.task)
        .ok_or(TaxonomyError::NoPipelineForKind(decision.task))?;
    let t = &binding.pipeline;
    for f in [&t.source, &t.target] {
        if !ctx.graph.contains(f) {
            return Err(PlanError::UnknownNode(f.clone()).into());
        }
    }
    let plan = match (t.kind, t.kind.hop_kind()) {
        (PipelineKind::Merge, _) => None,
        (PipelineKind::Plan, _) => Some(plan(ctx.graph, &t.source, &t.target, t.policy)?),
        (kind, Some(translator)) => {
            let edge = ctx
                .graph
                .edges()
                .iter()
                .find(|e| e.spec.source == t.source && e.spec.target == t.target && e.spec.kind == translator)
                .ok_or_else(|| TaxonomyError::MissingEdge {
                    task: decision.task,
                    kind,
                    translator,
                    source_id: t.source.clone(),
                    target: t.target.clone(),
                })?;
            Some(Plan {
                source: t.source.clone(),
                target: t.target.clone(),
                hops: vec![edge.clone()],
                predicted_fidelity: edge.spec.fidelity_est,
                predicted_latency: edge.spec.latency_est,
            })
        }
        (kind, None) => unreachable!("{kind} has no hop kind"),
    };
    let mut repair = ctx.repair.clone();
    if t.kind == PipelineKind::Direct {
        repair.max_attempts = 1;
    }
    Ok(PipelineDescriptor {
        task: decision.task,
        adapter: decision.adapter.name.clone(),
        preamble: decision.adapter.prompt_preamble.clone(),
        kind: t.kind,
        source: t.source.clone(),
        target: t.target.clone(),
        plan,
        repair,
        request: request.to_string(),
        note: binding.rationale_note.clone(),
    })
}

/// Runs a non-merge descriptor on `input`, which must be in its source
/// formalism.
pub fn invoke(
    descriptor: &PipelineDescriptor,
    translators: &Translators,
    input: &Artifact,
    backend: &dyn CompletionBackend,
    seed: u64,
) -> Result<PlanRun, TaxonomyError> {
    let plan = descriptor
        .plan
        .as_ref()
        .ok_or(TaxonomyError::NotRunnable(descriptor.kind))?;
    Ok(execute_plan(translators, input, plan, backend, &descriptor.repair, seed)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutcome {
    pub artifact: Artifact,
    pub elements: ElementSet,
    /// One `merge.conflict` warning per disagreeing key, then validator output.
    pub diagnostics: Vec<Diagnostic>,
}

/// Union of two artifacts in the same formalism. When both sides define the
/// same key differently the left definition is kept and a conflict is
/// reported.
pub fn merge(registry: &Registry, left: &Artifact, right: &Artifact) -> Result<MergeOutcome, TaxonomyError> {
    let parse = |a: &Artifact| -> Result<Result<ElementSet, Vec<Diagnostic>>, TaxonomyError> { Ok(registry.parse(a)?) };
    let (l, r) = match (parse(left)?, parse(right)?) {
        (Ok(l), Ok(r)) => (l, r),
        (l, r) => {
            let diagnostics = [l.err(), r.err()].into_iter().flatten().flatten().collect();
            return Ok(MergeOutcome {
                artifact: Artifact::authored(left.formalism.clone(), ""),
                elements: ElementSet::new(),
                diagnostics,
            });
        }
    };
    if left.formalism != right.formalism {
        return Err(PlanError::SourceMismatch {
            expected: left.formalism.clone(),
            found: right.formalism.clone(),
        }
        .into());
    }
    let left_keys: BTreeMap<ElementKey, &Element> = l.iter().map(|e| (e.key(), e)).collect();
    let mut merged = l.clone();
    let mut diagnostics = Vec::new();
    for e in r.iter() {
        match left_keys.get(&e.key()) {
            Some(kept) if *kept != e => diagnostics.push(Diagnostic::warning(
                codes::MERGE_CONFLICT,
                format!("{} defined differently on each side, keeping {:?}", describe(e), kept),
            )),
            Some(_) => {}
            None => {
                merged.insert(e.clone());
            }
        }
    }
    let content = registry.render(&merged, &left.formalism)?;
    let artifact = Artifact::translated(left.formalism.clone(), content, "merge", 0);
    diagnostics.extend(registry.validate(&artifact)?);
    Ok(MergeOutcome {
        artifact,
        elements: merged,
        diagnostics,
    })
}

fn describe(e: &Element) -> String {
    let key = e.key();
    if key.owner.is_empty() {
        format!("{:?} {}", key.kind, key.name)
    } else {
        format!("{:?} {}.{}", key.kind, key.owner, key.name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::router::Router;

    fn ctx<'a>(bindings: &'a Bindings, graph: &'a Ftg) -> DispatchContext<'a> {
        DispatchContext {
            bindings,
            graph,
            repair: RepairPolicy::default(),
        }
    }

    #[test]
    fn every_kind_bound_once() {
        let b = shipped_bindings();
        assert_eq!(b.len(), 13);
        for k in TaskKind::ALL {
            assert_eq!(b.iter().filter(|x| x.task == *k).count(), 1, "{k}");
        }
        assert!(b.iter().all(|x| !x.rationale_note.is_empty()));
    }

    #[test]
    fn binding_closure_over_default_graph() {
        let g = Ftg::default_graph();
        assert!(Bindings::shipped().unknown_formalisms(&g).is_empty());
        let router = Router::shipped();
        let bindings = Bindings::shipped();
        for k in TaskKind::ALL {
            let decision = RoutingDecision {
                task: *k,
                adapter: router.adapters.for_kind(*k).unwrap().clone(),
                confidence: 1.0,
                runner_up: None,
            };
            dispatch(&decision, "", &ctx(&bindings, &g)).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
    }

    #[test]
    fn verify_logic_goes_through_prover_syntax() {
        let g = Ftg::default_graph();
        let bindings = Bindings::shipped();
        let r = Router::shipped();
        let d = r.classify("verify the model is consistent").unwrap();
        assert_eq!(d.task, TaskKind::VerifyModelLogic);
        let desc = dispatch(&d, "verify the model is consistent", &ctx(&bindings, &g)).unwrap();
        assert_eq!(desc.plan.unwrap().label(), "nl->fol-p9->fol-pk");
    }

    #[test]
    fn align_is_merge_stub_and_missing_binding_errors() {
        let g = Ftg::default_graph();
        let r = Router::shipped();
        let d = r.classify("merge these two ontologies and flag conflicts").unwrap();
        let bindings = Bindings::shipped();
        let desc = dispatch(&d, "", &ctx(&bindings, &g)).unwrap();
        assert_eq!((desc.kind, desc.plan.is_none()), (PipelineKind::Merge, true));
        assert!(desc.to_records().contains("pipeline=merge source=er-mini target=er-mini route=-"));
        let partial = Bindings::shipped().without(TaskKind::AlignOntologies);
        assert!(matches!(
            dispatch(&d, "", &ctx(&partial, &g)),
            Err(TaxonomyError::NoPipelineForKind(TaskKind::AlignOntologies))
        ));
    }

    #[test]
    fn document_model_is_single_direct_call() {
        let g = Ftg::default_graph();
        let bindings = Bindings::shipped();
        let r = Router::shipped();
        let d = r.classify("verbalize the class model in plain english").unwrap();
        let desc = dispatch(&d, "", &ctx(&bindings, &g)).unwrap();
        let plan = desc.plan.unwrap();
        assert_eq!(plan.label(), "uml-mini->nl");
        assert_eq!(plan.hops[0].spec.kind, TranslatorKind::LlmDirect);
        assert_eq!(desc.repair.max_attempts, 1);
    }

    #[test]
    fn merge_reports_conflicts() {
        let reg = crate::mini::builtin_registry();
        let er = FormalismId::new("er-mini").unwrap();
        let a = Artifact::authored(er.clone(), "entity A { key id: int; name: text; }\n");
        let b = Artifact::authored(er.clone(), "entity A { key id: int; name: int; }\nentity B { key id: int; }\n");
        let out = merge(&reg, &a, &b).unwrap();
        assert_eq!(out.elements.entities().count(), 2);
        let conflicts: Vec<_> = out.diagnostics.iter().filter(|d| d.code == codes::MERGE_CONFLICT).collect();
        assert_eq!(conflicts.len(), 1, "{:?}", out.diagnostics);
        assert!(!crate::diagnostic::has_errors(&out.diagnostics));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(Bindings::parse("bind X repair nl er-mini note=x"), Err(TaxonomyError::Config { line: 1, .. })));
        assert!(matches!(Bindings::parse("bind DocumentModel repair nl er-mini"), Err(TaxonomyError::Config { .. })));
        let twice = "bind DocumentModel direct uml-mini nl note=a\nbind DocumentModel direct uml-mini nl note=b";
        assert!(matches!(Bindings::parse(twice), Err(TaxonomyError::Config { line: 2, .. })));
    }
}
