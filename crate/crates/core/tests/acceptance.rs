//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL ...` line
//! before asserting, so `cargo test --test acceptance -- --nocapture` gives a
//! one-line-per-criterion summary. Tolerances are pinned below.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{fixture, id, tab_corpus};
use ftg_core::deploy::{simulate, BackendModelSpec, ServingPolicy, TaskTrace};
use ftg_core::element::ElementSet;
use ftg_core::fidelity::{roundtrip, single_hop};
use ftg_core::mini::{builtin_registry, standard_registry};
use ftg_core::planner::{compare_plans, enumerate_plans, plan, CostPolicy, Ftg, PlanError};
use ftg_core::repair::{repair_translate, RepairPolicy, RepairStatus};
use ftg_core::router::{shipped_corpus, AdapterRegistry, AdapterSpec, Router, TaskKind};
use ftg_core::translate::backend::{MockBackend, Step};
use ftg_core::translate::oracle::OracleBackend;
use ftg_core::translate::{TranslationMode, TranslatorKind, TranslatorSpec, Translators};
use ftg_core::{Artifact, FormalismId, Registry};
use proptest::strategy::Strategy;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PLANNER_GRAPHS: usize = 50;
const PLANNER_BUDGET: Duration = Duration::from_secs(5);
const EXPECTED_MULTI_HOP_FIDELITY: f64 = 0.792;
const EXPECTED_DIRECT_FIDELITY: f64 = 0.6;
const FIDELITY_EPS: f64 = 1e-12;
const SCRIPT_FIXTURES: usize = 10;
const SCRIPT_REPEATS: usize = 100;
const DOMINANCE_TRACES: usize = 1000;
const DOMINANCE_BUDGET: Duration = Duration::from_secs(10);
const BERNOULLI_P: f64 = 0.473;
const BERNOULLI_TRIALS: u64 = 10_000;
const BERNOULLI_TOLERANCE: f64 = 0.03;
const BERNOULLI_BUDGET: Duration = Duration::from_secs(10);
const CODEC_CASES: u32 = 500;
const CODEC_BUDGET: Duration = Duration::from_secs(30);

fn report(n: u32, ok: bool, detail: &str) {
    println!("criterion {n}: {} {detail}", if ok { "PASS" } else { "FAIL" });
}

fn random_graph(rng: &mut ChaCha8Rng) -> Ftg {
    let n = rng.random_range(2..=7usize);
    let nodes: Vec<FormalismId> = (0..n).map(|i| id(&format!("n{i}"))).collect();
    let mut g = Ftg::new();
    for node in &nodes {
        g.add_node(node.clone());
    }
    let kinds = [TranslatorKind::RuleBased, TranslatorKind::LlmDirect, TranslatorKind::LlmScripted];
    for _ in 0..rng.random_range(0..=14usize) {
        let s = rng.random_range(0..n);
        let mut t = rng.random_range(0..n - 1);
        if t >= s {
            t += 1;
        }
        // coarse values so that equal-key ties actually occur
        let fidelity = rng.random_range(1..=10u32) as f64 / 10.0;
        let latency = rng.random_range(1..=5u32) as f64;
        let spec = TranslatorSpec::new(nodes[s].clone(), nodes[t].clone(), kinds[rng.random_range(0..3)])
            .with_estimates(fidelity, latency)
            .unwrap();
        g.add_edge(spec).unwrap();
    }
    g
}

#[test]
fn criterion_1_planner_matches_exhaustive_optimum() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut checked, mut mismatches) = (0usize, Vec::new());
    for gi in 0..PLANNER_GRAPHS {
        let g = random_graph(&mut rng);
        let nodes: Vec<FormalismId> = g.nodes().iter().cloned().collect();
        for s in &nodes {
            for t in nodes.iter().filter(|t| *t != s) {
                let all = enumerate_plans(&g, s, t, nodes.len());
                for policy in CostPolicy::ALL {
                    checked += 1;
                    let best = all.iter().min_by(|a, b| compare_plans(policy, a, b));
                    let got = plan(&g, s, t, policy);
                    let same = match (&got, best) {
                        (Ok(p), Some(b)) => p.edge_ids() == b.edge_ids(),
                        (Err(PlanError::NoPath { .. }), None) => true,
                        _ => false,
                    };
                    if !same {
                        mismatches.push(format!("graph {gi} {s}->{t} {policy}"));
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = mismatches.is_empty() && elapsed < PLANNER_BUDGET;
    report(1, ok, &format!("{checked} queries, {} mismatches, {elapsed:.2?}", mismatches.len()));
    assert!(mismatches.is_empty(), "{mismatches:?}");
    assert!(elapsed < PLANNER_BUDGET);
}

#[test]
fn criterion_2_multi_hop_beats_direct() {
    let g = Ftg::default_graph();
    let p = plan(&g, &id("nl"), &id("fol-pk"), CostPolicy::MaxFidelity).unwrap();
    let direct = g
        .edges()
        .iter()
        .find(|e| e.spec.source == id("nl") && e.spec.target == id("fol-pk"))
        .unwrap();
    let ok = p.label() == "nl->fol-p9->fol-pk"
        && (p.predicted_fidelity - EXPECTED_MULTI_HOP_FIDELITY).abs() < FIDELITY_EPS
        && (direct.spec.fidelity_est - EXPECTED_DIRECT_FIDELITY).abs() < FIDELITY_EPS;
    report(
        2,
        ok,
        &format!("{} fidelity {:.6} vs direct {:.6}", p.label(), p.predicted_fidelity, direct.spec.fidelity_est),
    );
    assert!(ok);
}

#[test]
fn criterion_3_scripted_conversion_is_deterministic_and_offline() {
    let registry: Arc<Registry> = Arc::new(builtin_registry());
    let translators = Translators::new(registry.clone());
    let oracle = OracleBackend::new(registry);
    let spec = TranslatorSpec::new(id("tab-json"), id("tab-csv"), TranslatorKind::LlmScripted);
    let corpus = tab_corpus();
    let fixtures = &corpus[..SCRIPT_FIXTURES];
    let first: Vec<String> = fixtures
        .iter()
        .map(|a| translators.translate(a, &spec, &oracle, 0).unwrap().artifact.content)
        .collect();
    let after_synthesis = oracle.calls();
    let mut divergent = 0;
    for (a, expected) in fixtures.iter().zip(&first) {
        for rep in 0..SCRIPT_REPEATS {
            let out = translators.translate(a, &spec, &oracle, rep as u64 + 1).unwrap();
            if out.artifact.content != *expected || !out.is_valid() {
                divergent += 1;
            }
        }
    }
    let extra_calls = oracle.calls() - after_synthesis;
    let ok = divergent == 0 && extra_calls == 0 && after_synthesis >= 1;
    report(
        3,
        ok,
        &format!(
            "{} conversions, {divergent} divergent, {extra_calls} backend calls after synthesis ({after_synthesis} during)",
            SCRIPT_FIXTURES * SCRIPT_REPEATS
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_4_repair_loop_converges_or_exhausts() {
    let translators = Translators::new(Arc::new(standard_registry()));
    let input = Artifact::authored(id("nl"), "Customers place orders.");
    let valid = std::fs::read_to_string(common::fixtures().join("a.er")).unwrap();
    let invalid = "entity Customer { name: text; }\n";
    let policy = RepairPolicy::with_max_attempts(3).unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    for k in 0..=3usize {
        let mut steps: Vec<Step> = (0..k).map(|_| Step::Reply(invalid.into())).collect();
        steps.push(Step::Reply(valid.clone()));
        let backend = MockBackend::schedule("scripted", steps);
        let (_, trace) = repair_translate(&translators, &input, &id("er-mini"), &backend, &policy, 0).unwrap();
        let (expected_status, expected_len) = if k < 3 {
            (RepairStatus::Valid, k + 1)
        } else {
            (RepairStatus::BudgetExhausted, 3)
        };
        let this = trace.outcome == expected_status && trace.len() == expected_len && backend.calls() == trace.len();
        ok &= this;
        lines.push(format!("k={k}:{}/{}/{}", trace.outcome.as_str(), trace.len(), backend.calls()));
    }
    report(4, ok, &lines.join(" "));
    assert!(ok);
}

#[test]
fn criterion_5_round_trip_fidelity_baseline() {
    let registry: Arc<Registry> = Arc::new(builtin_registry());
    let translators = Translators::new(registry.clone());
    let oracle = OracleBackend::new(registry);
    let policy = RepairPolicy::default();
    let rule = |s: &str, t: &str| single_hop(&TranslatorSpec::new(id(s), id(t), TranslatorKind::RuleBased));
    let corpus = tab_corpus();
    let lossy: Vec<f64> = corpus
        .iter()
        .map(|a| {
            roundtrip(&translators, a, &rule("tab-json", "tab-csv"), &rule("tab-csv", "tab-json"), &oracle, &policy, 0)
                .unwrap()
                .report
                .distortion
        })
        .filter(|d| *d != 0.0)
        .collect();
    let uml = fixture("two-entity.uml", "uml-mini");
    let strict = single_hop(
        &TranslatorSpec::new(id("uml-mini"), id("er-mini"), TranslatorKind::RuleBased).with_mode(TranslationMode::Strict),
    );
    let rt = roundtrip(&translators, &uml, &strict, &rule("er-mini", "uml-mini"), &oracle, &policy, 0).unwrap();
    let fabricated = rt.report.fabricated.len();
    let ok = corpus.len() == 20 && lossy.is_empty() && fabricated == 2;
    report(
        5,
        ok,
        &format!("{} tab fixtures, {} lossy; uml->er->uml fabricated {fabricated}", corpus.len(), lossy.len()),
    );
    assert!(ok);
}

#[test]
fn criterion_6_shared_backbone_dominates_full_swap() {
    let start = Instant::now();
    let model = BackendModelSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = Vec::new();
    for i in 0..DOMINANCE_TRACES {
        let k = rng.random_range(2..=8usize);
        let len = rng.random_range(k..=50usize);
        let mut kinds: Vec<TaskKind> = TaskKind::ALL.to_vec();
        kinds.shuffle(&mut rng);
        kinds.truncate(k);
        let mut requests: Vec<TaskKind> = kinds.clone();
        requests.extend((k..len).map(|_| kinds[rng.random_range(0..k)]));
        requests.shuffle(&mut rng);
        // every adapter loads strictly faster than the model
        let adapters = AdapterRegistry::new(
            TaskKind::ALL
                .iter()
                .map(|t| AdapterSpec::new(*t, "a", rng.random_range(1.0..model.load_ms), 100.0))
                .collect(),
        )
        .unwrap();
        let trace = TaskTrace::new(requests);
        let e = simulate(&trace, ServingPolicy::FullSwap(1), &model, &adapters).unwrap();
        let f = simulate(&trace, ServingPolicy::SharedBackbone(k), &model, &adapters).unwrap();
        if f.total_load_ms >= e.total_load_ms {
            failures.push(format!("trace {i} (k={k}, len={len}): shared {} >= swap {}", f.total_load_ms, e.total_load_ms));
        }
    }
    let elapsed = start.elapsed();

    let hand = TaskTrace::parse(&std::fs::read_to_string(common::fixtures().join("t1t2.trace")).unwrap()).unwrap();
    let shipped = AdapterRegistry::shipped();
    let e = simulate(&hand, ServingPolicy::FullSwap(1), &model, &shipped).unwrap();
    let f = simulate(&hand, ServingPolicy::SharedBackbone(2), &model, &shipped).unwrap();
    let hand_ok = e.total_load_ms == 40000.0 && f.total_load_ms == 10100.0;

    let ok = failures.is_empty() && hand_ok && elapsed < DOMINANCE_BUDGET;
    report(
        6,
        ok,
        &format!(
            "{}/{DOMINANCE_TRACES} random traces dominated, hand trace {} vs {} ms, {elapsed:.2?}",
            DOMINANCE_TRACES - failures.len(),
            e.total_load_ms,
            f.total_load_ms
        ),
    );
    for f in failures.iter().take(5) {
        println!("  counterexample: {f}");
    }
    assert!(hand_ok);
    assert!(elapsed < DOMINANCE_BUDGET);
    assert!(failures.is_empty(), "{} counterexamples, first: {}", failures.len(), failures[0]);
}

#[test]
fn criterion_7_router_corpus_accuracy() {
    let router = Router::shipped();
    let corpus = shipped_corpus();
    let per_kind_ok = TaskKind::ALL.iter().all(|k| corpus.iter().filter(|(c, _)| c == k).count() >= 3);
    let mut wrong = Vec::new();
    for (kind, text) in &corpus {
        let first = router.classify(text);
        let again = router.classify(text);
        match (&first, &again) {
            (Ok(a), Ok(b)) if a == b && a.task == *kind => {}
            _ => wrong.push(text.clone()),
        }
    }
    let ok = corpus.len() >= 39 && per_kind_ok && wrong.is_empty();
    report(7, ok, &format!("{}/{} correct", corpus.len() - wrong.len(), corpus.len()));
    assert!(ok, "{wrong:?}");
}

#[test]
fn criterion_8_mock_success_rate_is_calibrated() {
    let start = Instant::now();
    let translators = Translators::new(Arc::new(builtin_registry()));
    let valid = std::fs::read_to_string(common::fixtures().join("a.er")).unwrap();
    let backend = MockBackend::bernoulli("calibrated", BERNOULLI_P, valid, "entity {");
    let input = fixture("two-entity.uml", "uml-mini");
    let spec = TranslatorSpec::new(id("uml-mini"), id("er-mini"), TranslatorKind::LlmDirect);
    let successes = (0..BERNOULLI_TRIALS)
        .filter(|seed| translators.translate(&input, &spec, &backend, *seed).unwrap().is_valid())
        .count();
    let rate = successes as f64 / BERNOULLI_TRIALS as f64;
    let elapsed = start.elapsed();
    let ok = (rate - BERNOULLI_P).abs() <= BERNOULLI_TOLERANCE && elapsed < BERNOULLI_BUDGET;
    report(8, ok, &format!("success rate {rate:.4} over {BERNOULLI_TRIALS} trials (target {BERNOULLI_P}), {elapsed:.2?}"));
    assert!(ok);
}

fn codec_law(registry: &Registry, formalism: &str, strategy: impl Strategy<Value = ElementSet>, seed: u8) -> Result<(), String> {
    let config = Config {
        cases: CODEC_CASES,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]));
    let target = id(formalism);
    let codec = registry.get(&target).unwrap().codec.clone();
    runner
        .run(&strategy, |set| {
            let text = codec.render(&set).map_err(|e| TestCaseError::fail(format!("render: {e:?}")))?;
            let back = codec
                .parse(&text)
                .map_err(|d| TestCaseError::fail(format!("parse {text:?}: {d:?}")))?;
            if back != set {
                return Err(TestCaseError::fail(format!("{text:?} reparsed differently")));
            }
            Ok(())
        })
        .map_err(|e| format!("{formalism}: {e}"))
}

#[test]
fn criterion_9_codec_round_trip_law() {
    let start = Instant::now();
    let registry = builtin_registry();
    let results = [
        codec_law(&registry, "uml-mini", common::uml_set(), 1),
        codec_law(&registry, "er-mini", common::er_set(), 2),
        codec_law(&registry, "fol-p9", common::p9_set(), 3),
        codec_law(&registry, "fol-pk", common::pk_set(), 4),
        codec_law(&registry, "tab-json", common::tab_set(), 5),
        codec_law(&registry, "tab-csv", common::tab_set(), 6),
    ];
    let failures: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    let elapsed = start.elapsed();
    let ok = failures.is_empty() && elapsed < CODEC_BUDGET;
    report(9, ok, &format!("6 formalisms x {CODEC_CASES} cases, {} failing, {elapsed:.2?}", failures.len()));
    assert!(failures.is_empty(), "{failures:?}");
    assert!(elapsed < CODEC_BUDGET);
}
