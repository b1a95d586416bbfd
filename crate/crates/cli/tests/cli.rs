//! Exit codes and stable output of the `ftg` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures"))
}

fn ftg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ftg"))
        .args(args)
        .current_dir(fixtures())
        .env_remove("FTG_BACKEND")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn exit_code_matrix() {
    let cases: &[(&[&str], i32)] = &[
        (&["validate", "a.er"], 0),
        (&["validate", "bad.er"], 1),
        (&["validate", "a.er", "--as", "fol-p9"], 1),
        (&["validate", "a.er", "--as", "no-such"], 2),
        (&["validate", "missing.er"], 2),
        (&["--bogus"], 2),
        (&["plan", "--from", "nl"], 2),
        (&["plan", "--from", "nl", "--to", "fol-pk", "--policy", "cheapest"], 2),
        (&["route", "draft a schema merge"], 1),
        (&["route", ""], 1),
        (&["simulate", "--trace", "t1t2.trace", "--capacity", "0"], 2),
        (&["--help"], 0),
        (&["--version"], 0),
    ];
    for (args, code) in cases {
        let o = ftg(args);
        assert_eq!(o.status.code(), Some(*code), "ftg {args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn valid_file_validates_silently() {
    let o = ftg(&["validate", "a.er"]);
    assert!(o.stdout.is_empty() && o.stderr.is_empty());
    let o = ftg(&["validate", "bad.er"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("er.missing-key"));
}

#[test]
fn plan_records_show_hops_and_totals() {
    let o = ftg(&["plan", "--from", "nl", "--to", "fol-pk"]);
    let out = stdout(&o);
    assert!(out.ends_with("plan=nl->fol-p9->fol-pk hops=2 fidelity=0.792000 latency=6\n"), "{out}");
}

#[test]
fn unreachable_target_is_a_failure() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.ftg");
    std::fs::write(&graph, "edge fol-p9 fol-pk rule-based fid=0.99 lat=1\n").unwrap();
    let g = graph.to_str().unwrap();
    assert_eq!(ftg(&["--graph", g, "plan", "--from", "fol-pk", "--to", "fol-p9"]).status.code(), Some(1));
    assert_eq!(ftg(&["--graph", g, "plan", "--from", "fol-p9", "--to", "fol-pk"]).status.code(), Some(0));
    std::fs::write(&graph, "edge fol-p9 fol-pk teleport\n").unwrap();
    assert_eq!(ftg(&["--graph", g, "plan", "--from", "fol-p9", "--to", "fol-pk"]).status.code(), Some(2));
}

#[test]
fn shared_backbone_beats_full_swap_on_alternating_trace() {
    let out = stdout(&ftg(&["simulate", "--trace", "t1t2.trace"]));
    assert!(out.contains("policy=full-swap(1)\ntotal_load_ms=40000\n"), "{out}");
    assert!(out.contains("policy=shared-backbone(2)\ntotal_load_ms=10100\n"), "{out}");
    let only = stdout(&ftg(&["simulate", "--trace", "t1t2.trace", "--policy", "F"]));
    assert!(only.starts_with("policy=shared-backbone(2)\n") && !only.contains("full-swap"), "{only}");
}

#[test]
fn translate_and_repair_print_valid_targets() {
    let o = ftg(&["translate", "two-entity.uml", "--to", "er-mini"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("entity Order {"));
    let o = ftg(&["repair", "rules.p9", "--to", "fol-pk"]);
    assert_eq!(stdout(&o), "rule shipping: if order($x) & paid($x) then shippable($x)\n");
    assert!(String::from_utf8_lossy(&o.stderr).contains("outcome=valid attempts=1"));
}

#[test]
fn remote_backend_cannot_come_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_ftg"))
        .args(["plan", "--from", "nl", "--to", "fol-pk"])
        .env("FTG_BACKEND", "remote")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_ftg"))
        .args(["plan", "--from", "nl", "--to", "fol-pk", "--backend", "remote"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "remote without a url");
}

#[test]
fn config_file_supplies_seed_and_cache() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("ftg.conf");
    std::fs::write(&conf, "seed = 9\ncache_dir = scripts\n").unwrap();
    let json = fixtures().join("tab/t00.json");
    let args = ["--config", conf.to_str().unwrap(), "translate", json.to_str().unwrap(), "--to", "tab-csv"];
    let o = ftg(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::write(&conf, "seed = 9\nflavour = x\n").unwrap();
    assert_eq!(ftg(&args).status.code(), Some(2));
}

#[test]
fn outputs_are_deterministic() {
    let runs: &[&[&str]] = &[
        &["route", "formalize these business rules"],
        &["roundtrip", "a.er", "--via", "uml-mini"],
        &["bench", "--corpus", "tab", "--from", "tab-json", "--to", "tab-csv", "--variants", "rule-based,corrupt:0.5", "--seeds", "2"],
    ];
    for args in runs {
        let (a, b) = (ftg(args), ftg(args));
        assert_eq!(a.status.code(), Some(0), "ftg {args:?}: {}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "ftg {args:?}");
    }
}
