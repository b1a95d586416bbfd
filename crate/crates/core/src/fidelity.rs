//! Translation trust measures: semantic diffs over canonical elements,
//! round-trip distortion, error classes and translator benchmarks.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::element::{Element, ElementKey, ElementSet};
use crate::formalism::{Artifact, FormalismId, Registry};
use crate::planner::{execute_plan, Ftg, Plan, PlanError, TransformationEdge};
use crate::repair::{RepairPolicy, RepairStatus};
use crate::translate::backend::{seeded_rng, seeded_unit, BackendError, CompletionBackend, CompletionParams};
use crate::translate::prompt::PromptView;
use crate::translate::{TranslatorSpec, Translators};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ErrorClass {
    Missing,
    Fabricated,
    Mutated,
    SyntaxInvalid,
}

impl ErrorClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Missing => "missing",
            ErrorClass::Fabricated => "fabricated",
            ErrorClass::Mutated => "mutated",
            ErrorClass::SyntaxInvalid => "syntax_invalid",
        }
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityReport {
    /// Jaccard distance between the compared sets.
    pub distortion: f64,
    /// In the reference but not the result, with no same-key counterpart.
    pub missing: Vec<Element>,
    /// In the result but not the reference, with no same-key counterpart.
    pub fabricated: Vec<Element>,
    /// Same key on both sides, different payload: (reference, result).
    pub mutated: Vec<(Element, Element)>,
    pub syntactic_valid: bool,
}

impl FidelityReport {
    /// Report for a result that could not be parsed at all.
    pub fn syntax_invalid(reference: &ElementSet) -> Self {
        Self {
            distortion: 1.0,
            missing: reference.iter().cloned().collect(),
            fabricated: Vec::new(),
            mutated: Vec::new(),
            syntactic_valid: false,
        }
    }

    /// Every discrepancy with exactly one class.
    pub fn classes(&self) -> Vec<ErrorClass> {
        let mut out = Vec::new();
        if !self.syntactic_valid {
            out.push(ErrorClass::SyntaxInvalid);
            return out;
        }
        out.extend(self.missing.iter().map(|_| ErrorClass::Missing));
        out.extend(self.fabricated.iter().map(|_| ErrorClass::Fabricated));
        out.extend(self.mutated.iter().map(|_| ErrorClass::Mutated));
        out
    }

    pub fn to_records(&self) -> String {
        format!(
            "distortion={:.6} missing={} fabricated={} mutated={} syntactic_valid={}\n",
            self.distortion,
            self.missing.len(),
            self.fabricated.len(),
            self.mutated.len(),
            self.syntactic_valid
        )
    }
}

pub fn distortion(a: &ElementSet, b: &ElementSet) -> f64 {
    let union = a.union_len(b);
    if union == 0 {
        0.0
    } else {
        1.0 - a.intersection_len(b) as f64 / union as f64
    }
}

pub fn semantic_diff(reference: &ElementSet, result: &ElementSet) -> FidelityReport {
    let mut extra: BTreeMap<ElementKey, Vec<&Element>> = BTreeMap::new();
    for e in result.difference(reference) {
        extra.entry(e.key()).or_default().push(e);
    }
    let mut missing = Vec::new();
    let mut mutated = Vec::new();
    for e in reference.difference(result) {
        match extra.get_mut(&e.key()).filter(|v| !v.is_empty()) {
            Some(candidates) => mutated.push((e.clone(), candidates.remove(0).clone())),
            None => missing.push(e.clone()),
        }
    }
    let fabricated = extra.into_values().flatten().cloned().collect();
    FidelityReport {
        distortion: distortion(reference, result),
        missing,
        fabricated,
        mutated,
        syntactic_valid: true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Forward,
    Backward,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Forward => "forward",
            Stage::Backward => "backward",
        })
    }
}

#[derive(Debug, Error)]
pub enum FidelityError {
    #[error("plans do not chain: {0}")]
    Mismatch(String),
    #[error("source artifact does not parse: {0}")]
    SourceInvalid(String),
    #[error("{stage} plan failed: {error}")]
    HopFailed {
        stage: Stage,
        error: PlanError,
        partial: Box<FidelityReport>,
    },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("variant {0} does not share the benchmark's source/target pair")]
    VariantMismatch(String),
    #[error("no seeds given")]
    NoSeeds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrip {
    pub report: FidelityReport,
    pub final_artifact: Option<Artifact>,
    pub attempts: usize,
}

/// Runs `forward` then `backward` and compares the final elements with the
/// original's. A hop whose output stays invalid after repair yields a
/// syntax-invalid report; any other hop failure is an error carrying that
/// same report as the partial result.
pub fn roundtrip(
    translators: &Translators,
    a: &Artifact,
    forward: &Plan,
    backward: &Plan,
    backend: &dyn CompletionBackend,
    policy: &RepairPolicy,
    seed: u64,
) -> Result<RoundTrip, FidelityError> {
    if forward.source != a.formalism || backward.target != a.formalism || forward.target != backward.source {
        return Err(FidelityError::Mismatch(format!(
            "{} then {} from {}",
            forward.label(),
            backward.label(),
            a.formalism
        )));
    }
    let registry = translators.registry();
    let original = registry
        .parse(a)
        .map_err(|e| FidelityError::SourceInvalid(e.to_string()))?
        .map_err(|d| FidelityError::SourceInvalid(d.iter().map(|x| x.feedback_line()).collect::<Vec<_>>().join("; ")))?;
    let mut attempts = 0;
    let mut current = a.clone();
    let backward_seed = seed.wrapping_add((forward.hops.len() * policy.max_attempts) as u64);
    for (stage, plan, s) in [(Stage::Forward, forward, seed), (Stage::Backward, backward, backward_seed)] {
        match execute_plan(translators, &current, plan, backend, policy, s) {
            Ok(run) => {
                attempts += run.attempts;
                current = run.artifact;
            }
            Err(PlanError::HopFailed { traces, .. })
                if traces.last().is_some_and(|t| t.outcome == RepairStatus::BudgetExhausted) =>
            {
                attempts += traces.iter().map(|t| t.len()).sum::<usize>();
                return Ok(RoundTrip {
                    report: FidelityReport::syntax_invalid(&original),
                    final_artifact: None,
                    attempts,
                });
            }
            Err(error) => {
                return Err(FidelityError::HopFailed {
                    stage,
                    error,
                    partial: Box::new(FidelityReport::syntax_invalid(&original)),
                })
            }
        }
    }
    let report = match registry.parse(&current) {
        Ok(Ok(final_set)) => semantic_diff(&original, &final_set),
        _ => FidelityReport::syntax_invalid(&original),
    };
    Ok(RoundTrip {
        report,
        final_artifact: Some(current),
        attempts,
    })
}

/// One translator under test, run as the single forward hop.
#[derive(Clone)]
pub struct BenchVariant {
    pub name: String,
    pub spec: TranslatorSpec,
    pub backend: Arc<dyn CompletionBackend>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub variant: String,
    pub runs: usize,
    pub mean_distortion: f64,
    pub missing: usize,
    pub fabricated: usize,
    pub mutated: usize,
    pub syntax_invalid: usize,
    pub mean_attempts: f64,
    /// Per run distortion, fixture-major then seed.
    pub distortions: Vec<f64>,
}

impl BenchRow {
    pub fn to_record(&self) -> String {
        format!(
            "variant={} mean_distortion={:.6} missing={} fabricated={} mutated={} syntax_invalid={} mean_attempts={:.3}\n",
            self.variant, self.mean_distortion, self.missing, self.fabricated, self.mutated, self.syntax_invalid, self.mean_attempts
        )
    }
}

pub fn render_bench_table(rows: &[BenchRow]) -> String {
    let header = ["variant", "runs", "mean_distortion", "missing", "fabricated", "mutated", "syntax_invalid", "mean_attempts"];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.variant.clone(),
                r.runs.to_string(),
                format!("{:.6}", r.mean_distortion),
                r.missing.to_string(),
                r.fabricated.to_string(),
                r.mutated.to_string(),
                r.syntax_invalid.to_string(),
                format!("{:.3}", r.mean_attempts),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let render = |cells: Vec<&str>| {
        let mut s = format!("{:<w$}", cells[0], w = widths[0]);
        for (cell, w) in cells[1..].iter().zip(&widths[1..]) {
            s.push_str(&format!("  {cell:>w$}"));
        }
        s.push('\n');
        s
    };
    let mut out = render(header.to_vec());
    for row in &body {
        out.push_str(&render(row.iter().map(String::as_str).collect()));
    }
    out
}

/// Round trips every fixture under every seed for each variant. Run `i` of
/// fixture `f` uses seed `seeds[i]` offset by nothing that depends on
/// scheduling, so results are reproducible.
pub fn benchmark(
    translators: &Translators,
    corpus: &[Artifact],
    variants: &[BenchVariant],
    backward: &Plan,
    policy: &RepairPolicy,
    seeds: &[u64],
) -> Result<Vec<BenchRow>, FidelityError> {
    if corpus.is_empty() {
        return Err(FidelityError::EmptyCorpus);
    }
    if seeds.is_empty() {
        return Err(FidelityError::NoSeeds);
    }
    let (source, target) = (&variants[0].spec.source, &variants[0].spec.target);
    if let Some(v) = variants.iter().find(|v| (&v.spec.source, &v.spec.target) != (source, target)) {
        return Err(FidelityError::VariantMismatch(v.name.clone()));
    }
    let mut rows = Vec::new();
    for v in variants {
        let forward = single_hop(&v.spec);
        let mut row = BenchRow {
            variant: v.name.clone(),
            runs: 0,
            mean_distortion: 0.0,
            missing: 0,
            fabricated: 0,
            mutated: 0,
            syntax_invalid: 0,
            mean_attempts: 0.0,
            distortions: Vec::new(),
        };
        let mut attempts = 0;
        for fixture in corpus {
            for seed in seeds {
                let rt = roundtrip(translators, fixture, &forward, backward, &v.backend, policy, *seed)?;
                row.runs += 1;
                attempts += rt.attempts;
                row.distortions.push(rt.report.distortion);
                if rt.report.syntactic_valid {
                    row.missing += rt.report.missing.len();
                    row.fabricated += rt.report.fabricated.len();
                    row.mutated += rt.report.mutated.len();
                } else {
                    row.syntax_invalid += 1;
                }
            }
        }
        row.mean_distortion = row.distortions.iter().sum::<f64>() / row.runs as f64;
        row.mean_attempts = attempts as f64 / row.runs as f64;
        rows.push(row);
    }
    Ok(rows)
}

pub fn single_hop(spec: &TranslatorSpec) -> Plan {
    Plan {
        source: spec.source.clone(),
        target: spec.target.clone(),
        hops: vec![TransformationEdge {
            id: 0,
            spec: spec.clone(),
        }],
        predicted_fidelity: spec.fidelity_est,
        predicted_latency: spec.latency_est,
    }
}

/// Sets an edge's fidelity estimate from a measured mean distortion.
pub fn recalibrate(graph: &mut Ftg, edge_id: usize, row: &BenchRow) -> Option<f64> {
    let edge = graph.edge_mut(edge_id)?;
    let fidelity = (1.0 - row.mean_distortion).clamp(MIN_FIDELITY, 1.0);
    edge.spec.fidelity_est = fidelity;
    Some(fidelity)
}

const MIN_FIDELITY: f64 = 1e-3;

/// Wraps a backend and, with probability `p` per call, removes one element
/// from its answer: a column of a table, else a non-key attribute, a
/// relation or a rule. The draw depends only on the prompt and seed.
pub struct CorruptingBackend<B> {
    inner: B,
    registry: Arc<Registry>,
    probability: f64,
    name: String,
}

impl<B: CompletionBackend> CorruptingBackend<B> {
    pub fn new(inner: B, registry: Arc<Registry>, probability: f64) -> Self {
        assert!((0.0..=1.0).contains(&probability), "probability out of range");
        let name = format!("{}+corrupt({probability})", inner.name());
        Self {
            inner,
            registry,
            probability,
            name,
        }
    }
}

impl<B: CompletionBackend> CompletionBackend for CorruptingBackend<B> {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, prompt: &str, params: &CompletionParams, seed: u64) -> Result<String, BackendError> {
        let answer = self.inner.complete(prompt, params, seed)?;
        if seeded_unit(prompt, seed) >= self.probability {
            return Ok(answer);
        }
        let Some(view) = PromptView::parse(prompt).filter(|v| !v.script) else {
            return Ok(answer);
        };
        let Ok(target) = FormalismId::new(&view.target_formalism) else {
            return Ok(answer);
        };
        let Ok(codec) = self.registry.get(&target).map(|f| f.codec.clone()) else {
            return Ok(answer);
        };
        let Ok(set) = codec.parse(&answer) else {
            return Ok(answer);
        };
        let mut rng = seeded_rng(prompt, seed.wrapping_add(1));
        let corrupted = drop_one(&set, rng.random::<u64>());
        match codec.render(&corrupted) {
            Ok(text) if !crate::diagnostic::has_errors(&codec.validate(&text)) => Ok(text),
            _ => Ok(answer),
        }
    }
}

/// Removes one droppable element group chosen by `pick`.
pub fn drop_one(set: &ElementSet, pick: u64) -> ElementSet {
    let mut columns: Vec<&str> = set
        .iter()
        .filter_map(|e| match e {
            Element::RecordField { field, .. } => Some(field.as_str()),
            _ => None,
        })
        .collect();
    columns.sort();
    columns.dedup();
    let mut out = set.clone();
    if columns.len() >= 2 {
        let col = columns[(pick % columns.len() as u64) as usize].to_string();
        out.retain(|e| !matches!(e, Element::RecordField { field, .. } if *field == col));
        return out;
    }
    let groups: [fn(&Element) -> bool; 3] = [
        |e| matches!(e, Element::AttributeDef { is_key: false, .. }),
        |e| matches!(e, Element::RelationDef { .. }),
        |e| matches!(e, Element::RuleDef { .. }),
    ];
    for group in groups {
        let candidates: Vec<Element> = set.iter().filter(|e| group(e)).cloned().collect();
        let least = if matches!(candidates.first(), Some(Element::RuleDef { .. })) { 2 } else { 1 };
        if candidates.len() >= least {
            out.remove(&candidates[(pick % candidates.len() as u64) as usize]);
            return out;
        }
    }
    out
}
