//! End-to-end flows across modules.

mod common;

use std::sync::Arc;

use common::{fixture, id, tab_corpus};
use ftg_core::fidelity::{benchmark, single_hop, BenchVariant, CorruptingBackend};
use ftg_core::mini::{builtin_registry, standard_registry};
use ftg_core::planner::{execute_plan, plan, CostPolicy, Ftg};
use ftg_core::repair::RepairPolicy;
use ftg_core::router::Router;
use ftg_core::taxonomy::{dispatch, invoke, merge, Bindings, DispatchContext, PipelineKind};
use ftg_core::translate::backend::{CompletionBackend, MockBackend};
use ftg_core::translate::cache::ScriptCache;
use ftg_core::translate::oracle::OracleBackend;
use ftg_core::translate::{TranslatorKind, TranslatorSpec, Translators};
use ftg_core::{Artifact, Provenance, Registry};

#[test]
fn routed_request_runs_its_pipeline() {
    let registry: Arc<Registry> = Arc::new(standard_registry());
    let translators = Translators::new(registry.clone());
    let oracle = OracleBackend::new(registry);
    let graph = Ftg::default_graph();
    let bindings = Bindings::shipped();
    let ctx = DispatchContext {
        bindings: &bindings,
        graph: &graph,
        repair: RepairPolicy::default(),
    };
    let request = "formalize these business rules:\n```\nall x (order(x) & paid(x) -> shippable(x)).\n```\n";
    let decision = Router::shipped().classify(request).unwrap();
    let descriptor = dispatch(&decision, request, &ctx).unwrap();
    assert_eq!((descriptor.kind, descriptor.target.as_str()), (PipelineKind::Repair, "fol-p9"));
    let run = invoke(&descriptor, &translators, &Artifact::authored(id("nl"), request), &oracle, 0).unwrap();
    assert_eq!(run.artifact.formalism, id("fol-p9"));
    assert_eq!(run.traces.len(), 1);
    assert!(matches!(run.artifact.provenance, Provenance::Translated { .. }));
}

#[test]
fn two_hop_plan_executes_through_prover_syntax() {
    let registry: Arc<Registry> = Arc::new(standard_registry());
    let translators = Translators::new(registry.clone());
    let oracle = OracleBackend::new(registry);
    let p = plan(&Ftg::default_graph(), &id("nl"), &id("fol-pk"), CostPolicy::MaxFidelity).unwrap();
    let text = std::fs::read_to_string(common::fixtures().join("rules.p9")).unwrap();
    let input = Artifact::authored(id("nl"), format!("state this:\n```\n{text}```\n"));
    let run = execute_plan(&translators, &input, &p, &oracle, &RepairPolicy::default(), 3).unwrap();
    assert_eq!(run.artifact.content, "rule shipping: if order($x) & paid($x) then shippable($x)\n");
    assert_eq!(oracle.calls(), 1);
}

#[test]
fn er_merge_stub_unions_fixtures() {
    let registry = builtin_registry();
    let a = fixture("a.er", "er-mini");
    let b = Artifact::authored(id("er-mini"), "entity Customer { key id: int; email: text; }\nentity Shop { key id: int; }\n");
    let out = merge(&registry, &a, &b).unwrap();
    assert!(out.diagnostics.is_empty(), "{:?}", out.diagnostics);
    assert_eq!(out.elements.entities().collect::<Vec<_>>(), vec!["Customer", "Order", "Shop"]);
}

fn variant(name: &str, kind: TranslatorKind, backend: Arc<dyn CompletionBackend>) -> BenchVariant {
    BenchVariant {
        name: name.into(),
        spec: TranslatorSpec::new(id("tab-json"), id("tab-csv"), kind),
        backend,
    }
}

#[test]
fn corruption_rate_orders_benchmark_distortion() {
    let registry: Arc<Registry> = Arc::new(builtin_registry());
    let translators = Translators::new(registry.clone());
    let corrupt = |p: f64| -> Arc<dyn CompletionBackend> {
        Arc::new(CorruptingBackend::new(OracleBackend::new(registry.clone()), registry.clone(), p))
    };
    let variants = [
        variant("rule-based", TranslatorKind::RuleBased, corrupt(0.0)),
        variant("mock-p0.1", TranslatorKind::LlmDirect, corrupt(0.1)),
        variant("mock-p0.5", TranslatorKind::LlmDirect, corrupt(0.5)),
    ];
    let back = single_hop(&TranslatorSpec::new(id("tab-csv"), id("tab-json"), TranslatorKind::RuleBased));
    let seeds: Vec<u64> = (0..10).collect();
    let corpus = tab_corpus();
    let rows = benchmark(&translators, &corpus, &variants, &back, &RepairPolicy::default(), &seeds).unwrap();
    assert_eq!(rows[0].mean_distortion, 0.0);
    assert!(rows[0].mean_distortion < rows[1].mean_distortion, "{rows:?}");
    assert!(rows[1].mean_distortion < rows[2].mean_distortion, "{rows:?}");
    assert!(rows.iter().all(|r| r.runs == 200 && r.fabricated == 0 && r.syntax_invalid == 0));

    let again = benchmark(&translators, &corpus, &variants[..1], &back, &RepairPolicy::default(), &seeds).unwrap();
    assert_eq!(again[0], rows[0]);
    assert!(rows[0].distortions.iter().all(|d| *d == 0.0));
}

#[test]
fn invalid_forward_output_counts_as_syntax_invalid() {
    let registry: Arc<Registry> = Arc::new(builtin_registry());
    let translators = Translators::new(registry);
    let garbage: Arc<dyn CompletionBackend> = Arc::new(MockBackend::constant("garbage", "a,b\n1\n"));
    let back = single_hop(&TranslatorSpec::new(id("tab-csv"), id("tab-json"), TranslatorKind::RuleBased));
    let corpus = &tab_corpus()[..1];
    let rows = benchmark(
        &translators,
        corpus,
        &[variant("garbage", TranslatorKind::LlmDirect, garbage)],
        &back,
        &RepairPolicy::default(),
        &[0],
    )
    .unwrap();
    assert_eq!((rows[0].syntax_invalid, rows[0].mean_distortion, rows[0].mean_attempts), (1, 1.0, 3.0));
}

#[test]
fn scripts_persist_across_processes() {
    let dir = tempfile::tempdir().unwrap();
    let registry: Arc<Registry> = Arc::new(builtin_registry());
    let spec = TranslatorSpec::new(id("tab-json"), id("tab-csv"), TranslatorKind::LlmScripted);
    let input = &tab_corpus()[0];
    let first = {
        let translators = Translators::new(registry.clone()).with_cache(Arc::new(ScriptCache::open(dir.path()).unwrap()));
        let oracle = OracleBackend::new(registry.clone());
        let out = translators.translate(input, &spec, &oracle, 0).unwrap();
        assert_eq!(oracle.calls(), 1);
        out.artifact.content
    };
    let translators = Translators::new(registry.clone()).with_cache(Arc::new(ScriptCache::open(dir.path()).unwrap()));
    let oracle = OracleBackend::new(registry);
    let second = translators.translate(input, &spec, &oracle, 0).unwrap().artifact.content;
    assert_eq!((first, oracle.calls()), (second, 0));
}
