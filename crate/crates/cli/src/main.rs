//! `ftg`: validate, translate, plan, route, repair, simulate, round-trip and
//! benchmark from the command line.
//!
//! Exit codes: 0 success, 1 validation or translation failure, 2 usage or
//! configuration error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ftg_core::deploy::{compare, render_table, simulate, BackendModelSpec, ServingPolicy, TaskTrace};
use ftg_core::diagnostic::has_errors;
use ftg_core::fidelity::{benchmark, render_bench_table, roundtrip, BenchVariant, CorruptingBackend, FidelityError};
use ftg_core::planner::{execute_plan, plan, CostPolicy, Plan, PlanError};
use ftg_core::repair::{repair_translate, RepairError, RepairStatus};
use ftg_core::router::RouteError;
use ftg_core::taxonomy::{dispatch, DispatchContext, TaxonomyError};
use ftg_core::translate::backend::CompletionBackend;
use ftg_core::translate::{TranslatorKind, TranslatorSpec};
use ftg_core::{Artifact, FormalismId};

use config::{BackendChoice, Overrides, Settings};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, unreadable or malformed configuration: exit 2.
    Usage(String),
    /// Input failed validation, translation or classification: exit 1.
    Failure(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::UnknownNode(_) | PlanError::Config { .. } | PlanError::SelfLoop(_) | PlanError::InvalidEdge(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Failure(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "ftg", version, about = "Plan, run and check translations between modeling formalisms")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Flat `key = value` config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Transformation graph file.
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    /// Router lexicon file.
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    /// Adapter registry file.
    #[arg(long, global = true)]
    adapters: Option<PathBuf>,
    /// Completion backend; defaults to $FTG_BACKEND, then the config, then mock.
    #[arg(long, global = true)]
    backend: Option<Backend>,
    /// JSONL prompt/completion table for the replay backend.
    #[arg(long, global = true)]
    replay_file: Option<PathBuf>,
    /// Endpoint for the remote backend.
    #[arg(long, global = true)]
    remote_url: Option<String>,
    /// Persist synthesized conversion scripts here.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Repair budget per model-backed hop.
    #[arg(long, global = true)]
    max_attempts: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Records)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Mock,
    Replay,
    Remote,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Records,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Check a file against a formalism; prints diagnostics, silent when clean.
    Validate {
        file: PathBuf,
        #[arg(long = "as")]
        formalism: Option<String>,
    },
    /// Translate a file along the best plan and print the result.
    Translate {
        file: PathBuf,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: String,
        #[arg(long, default_value = "max-fidelity")]
        policy: String,
    },
    /// Print the plan the planner picks.
    Plan {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long, default_value = "max-fidelity")]
        policy: String,
    },
    /// Classify a request and show the pipeline it dispatches to.
    Route { request: String },
    /// One model-backed translation with validator feedback.
    Repair {
        file: PathBuf,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: String,
    },
    /// Serving-cost simulation over a task trace.
    Simulate {
        #[arg(long)]
        trace: PathBuf,
        /// E|full-swap, F|shared, or both.
        #[arg(long, default_value = "both")]
        policy: String,
        /// Cache capacity; defaults to 1 for full-swap and the number of
        /// distinct kinds for shared.
        #[arg(long)]
        capacity: Option<usize>,
        #[arg(long, default_value_t = 10000.0)]
        model_load_ms: f64,
        #[arg(long, default_value_t = 16000.0)]
        model_mem_mb: f64,
    },
    /// Translate there and back and report distortion.
    Roundtrip {
        file: PathBuf,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        via: String,
        #[arg(long, default_value = "max-fidelity")]
        policy: String,
    },
    /// Compare translators by round-trip distortion over a corpus.
    Bench {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        /// Comma-separated: rule-based, llm-direct, llm-scripted, corrupt:<p>.
        #[arg(long, value_delimiter = ',', required = true)]
        variants: Vec<String>,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value = "max-fidelity")]
        policy: String,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let (CliError::Usage(m) | CliError::Failure(m)) = &e;
            eprintln!("error: {m}");
            ExitCode::from(e.code())
        }
    }
}

fn load(g: &Global) -> Result<Settings, CliError> {
    Settings::load(Overrides {
        config: g.config.clone(),
        graph: g.graph.clone(),
        lexicon: g.lexicon.clone(),
        adapters: g.adapters.clone(),
        backend: g.backend.map(|b| match b {
            Backend::Mock => BackendChoice::Mock,
            Backend::Replay => BackendChoice::Replay,
            Backend::Remote => BackendChoice::Remote,
        }),
        replay_file: g.replay_file.clone(),
        remote_url: g.remote_url.clone(),
        cache_dir: g.cache_dir.clone(),
        seed: g.seed,
        max_attempts: g.max_attempts,
    })
}

fn formalism(token: &str) -> Result<FormalismId, CliError> {
    FormalismId::new(token).map_err(|e| CliError::Usage(e.to_string()))
}

fn policy(token: &str) -> Result<CostPolicy, CliError> {
    token.parse().map_err(CliError::Usage)
}

/// Formalism named by `--from`/`--as`, else guessed from the extension.
fn source_formalism(explicit: Option<&str>, file: &Path) -> Result<FormalismId, CliError> {
    if let Some(t) = explicit {
        return formalism(t);
    }
    let guess = match file.extension().and_then(|e| e.to_str()) {
        Some("uml") => "uml-mini",
        Some("er") => "er-mini",
        Some("p9") => "fol-p9",
        Some("pk") => "fol-pk",
        Some("json") => "tab-json",
        Some("csv") => "tab-csv",
        Some("txt") => "nl",
        _ => {
            return Err(CliError::Usage(format!(
                "cannot tell the formalism of {}; pass --from or --as",
                file.display()
            )))
        }
    };
    formalism(guess)
}

fn read_artifact(file: &Path, explicit: Option<&str>) -> Result<Artifact, CliError> {
    let id = source_formalism(explicit, file)?;
    let content = std::fs::read_to_string(file).map_err(|e| CliError::Usage(format!("{}: {e}", file.display())))?;
    Ok(Artifact::authored(id, content))
}

fn run(cli: Cli) -> Result<String, CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Validate { file, formalism } => cmd_validate(g, file, formalism.as_deref()),
        Command::Translate { file, from, to, policy } => cmd_translate(g, file, from.as_deref(), to, policy),
        Command::Plan { from, to, policy } => cmd_plan(g, from, to, policy),
        Command::Route { request } => cmd_route(g, request),
        Command::Repair { file, from, to } => cmd_repair(g, file, from.as_deref(), to),
        Command::Simulate {
            trace,
            policy,
            capacity,
            model_load_ms,
            model_mem_mb,
        } => cmd_simulate(g, trace, policy, *capacity, *model_load_ms, *model_mem_mb),
        Command::Roundtrip { file, from, via, policy } => cmd_roundtrip(g, file, from.as_deref(), via, policy),
        Command::Bench {
            corpus,
            from,
            to,
            variants,
            seeds,
            policy,
        } => cmd_bench(g, corpus, from, to, variants, *seeds, policy),
    }
}

fn cmd_validate(g: &Global, file: &Path, as_: Option<&str>) -> Result<String, CliError> {
    let s = load(g)?;
    let a = read_artifact(file, as_)?;
    let diagnostics = s
        .translators
        .registry()
        .validate(&a)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let out: String = diagnostics.iter().map(|d| format!("{}\n", d.feedback_line())).collect();
    if has_errors(&diagnostics) {
        eprint!("{out}");
        Err(CliError::Failure(format!("{} is not valid {}", file.display(), a.formalism)))
    } else {
        Ok(out)
    }
}

fn plan_between(s: &Settings, from: &FormalismId, to: &FormalismId, p: &str) -> Result<Plan, CliError> {
    let p = policy(p)?;
    if from == to {
        return Ok(Plan::empty(from.clone()));
    }
    Ok(plan(&s.graph, from, to, p)?)
}

fn cmd_translate(g: &Global, file: &Path, from: Option<&str>, to: &str, p: &str) -> Result<String, CliError> {
    let s = load(g)?;
    let a = read_artifact(file, from)?;
    let plan = plan_between(&s, &a.formalism, &formalism(to)?, p)?;
    let run = execute_plan(&s.translators, &a, &plan, &s.backend, &s.repair, s.seed)?;
    Ok(run.artifact.content)
}

fn cmd_plan(g: &Global, from: &str, to: &str, p: &str) -> Result<String, CliError> {
    let s = load(g)?;
    let plan = plan_between(&s, &formalism(from)?, &formalism(to)?, p)?;
    Ok(match g.format {
        Format::Records => plan.to_records(),
        Format::Table => format!(
            "{plan}\nhops      {}\nfidelity  {:.6}\nlatency   {}\n",
            plan.hops.len(),
            plan.predicted_fidelity,
            plan.predicted_latency
        ),
    })
}

fn cmd_route(g: &Global, request: &str) -> Result<String, CliError> {
    let s = load(g)?;
    let decision = s.router.classify(request).map_err(|e| match e {
        RouteError::Config { .. } | RouteError::InvalidThreshold(_) => CliError::Usage(e.to_string()),
        other => CliError::Failure(other.to_string()),
    })?;
    let ctx = DispatchContext {
        bindings: &s.bindings,
        graph: &s.graph,
        repair: s.repair.clone(),
    };
    let d = dispatch(&decision, request, &ctx).map_err(|e| match e {
        TaxonomyError::NoPipelineForKind(_) => CliError::Failure(e.to_string()),
        other => CliError::Usage(other.to_string()),
    })?;
    let runner_up = decision
        .runner_up
        .map(|(k, c)| format!("{k}:{c:.3}"))
        .unwrap_or_else(|| "-".into());
    let route = d.plan.as_ref().map(Plan::label).unwrap_or_else(|| "-".into());
    Ok(match g.format {
        Format::Records => format!(
            "task={} confidence={:.3} runner_up={runner_up}\n{}",
            decision.task,
            decision.confidence,
            d.to_records()
        ),
        Format::Table => {
            let rows = [
                ("task", decision.task.to_string()),
                ("confidence", format!("{:.3}", decision.confidence)),
                ("runner_up", runner_up),
                ("adapter", d.adapter.clone()),
                ("pipeline", d.kind.to_string()),
                ("route", route),
                ("note", d.note.clone()),
            ];
            rows.iter().map(|(k, v)| format!("{k:<11} {v}\n")).collect()
        }
    })
}

fn cmd_repair(g: &Global, file: &Path, from: Option<&str>, to: &str) -> Result<String, CliError> {
    let s = load(g)?;
    let a = read_artifact(file, from)?;
    let (outcome, trace) = match repair_translate(&s.translators, &a, &formalism(to)?, &s.backend, &s.repair, s.seed) {
        Ok(pair) => pair,
        Err(RepairError::Backend { error, trace }) => {
            eprint!("{}", trace.to_records());
            return Err(CliError::Failure(format!("backend failed: {error}")));
        }
        Err(RepairError::InvalidPolicy(m)) => return Err(CliError::Usage(m)),
        Err(RepairError::Translate(e)) => return Err(CliError::Usage(e.to_string())),
    };
    eprint!("{}", trace.to_records());
    if trace.outcome == RepairStatus::Valid {
        Ok(outcome.artifact.content)
    } else {
        let last: Vec<String> = outcome.diagnostics.iter().map(|d| d.feedback_line()).collect();
        Err(CliError::Failure(format!("no valid {to} after {} attempts: {}", trace.len(), last.join("; "))))
    }
}

fn cmd_simulate(
    g: &Global,
    trace: &Path,
    p: &str,
    capacity: Option<usize>,
    load_ms: f64,
    mem_mb: f64,
) -> Result<String, CliError> {
    let s = load(g)?;
    let text = std::fs::read_to_string(trace).map_err(|e| CliError::Usage(format!("{}: {e}", trace.display())))?;
    let trace = TaskTrace::parse(&text).map_err(|e| CliError::Usage(e.to_string()))?;
    let model = BackendModelSpec::new(load_ms, mem_mb).map_err(|e| CliError::Usage(e.to_string()))?;
    let swap = ServingPolicy::FullSwap(capacity.unwrap_or(1));
    let shared = ServingPolicy::SharedBackbone(capacity.unwrap_or(trace.distinct().max(1)));
    let policies = match p {
        "both" => vec![swap, shared],
        other => vec![ServingPolicy::parse_with_capacity(other, 0).map_err(|e| CliError::Usage(e.to_string()))?],
    };
    let policies: Vec<ServingPolicy> = policies
        .into_iter()
        .map(|p| match p {
            ServingPolicy::FullSwap(_) => swap,
            ServingPolicy::SharedBackbone(_) => shared,
        })
        .collect();
    let adapters = &s.router.adapters;
    let reports = if policies.len() >= 2 {
        compare(&trace, &policies, &model, adapters)
    } else {
        simulate(&trace, policies[0], &model, adapters).map(|r| vec![r])
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(match g.format {
        Format::Records => reports.iter().map(|r| r.to_records()).collect::<Vec<_>>().join("\n"),
        Format::Table => render_table(&reports),
    })
}

fn fidelity_error(e: FidelityError) -> CliError {
    match e {
        FidelityError::HopFailed { .. } => CliError::Failure(e.to_string()),
        FidelityError::SourceInvalid(_) => CliError::Failure(e.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

fn cmd_roundtrip(g: &Global, file: &Path, from: Option<&str>, via: &str, p: &str) -> Result<String, CliError> {
    let s = load(g)?;
    let a = read_artifact(file, from)?;
    let via = formalism(via)?;
    let forward = plan_between(&s, &a.formalism, &via, p)?;
    let backward = plan_between(&s, &via, &a.formalism, p)?;
    let rt = roundtrip(&s.translators, &a, &forward, &backward, &s.backend, &s.repair, s.seed).map_err(fidelity_error)?;
    let r = &rt.report;
    let out = match g.format {
        Format::Records => format!("forward={} backward={} {}", forward.label(), backward.label(), r.to_records()),
        Format::Table => format!(
            "forward     {}\nbackward    {}\ndistortion  {:.6}\nmissing     {}\nfabricated  {}\nmutated     {}\nvalid       {}\n",
            forward.label(),
            backward.label(),
            r.distortion,
            r.missing.len(),
            r.fabricated.len(),
            r.mutated.len(),
            r.syntactic_valid
        ),
    };
    if r.syntactic_valid {
        Ok(out)
    } else {
        print!("{out}");
        Err(CliError::Failure("round trip produced an unparsable artifact".into()))
    }
}

fn variant(s: &Settings, token: &str, from: &FormalismId, to: &FormalismId) -> Result<BenchVariant, CliError> {
    let (kind, backend): (TranslatorKind, Arc<dyn CompletionBackend>) = match token.split_once(':') {
        Some(("corrupt", p)) => {
            let p: f64 = p
                .parse()
                .ok()
                .filter(|p| (0.0..=1.0).contains(p))
                .ok_or_else(|| CliError::Usage(format!("corrupt:{p}: probability must be in [0, 1]")))?;
            let registry = s.translators.registry().clone();
            (TranslatorKind::LlmDirect, Arc::new(CorruptingBackend::new(s.backend.clone(), registry, p)))
        }
        _ => (token.parse().map_err(CliError::Usage)?, s.backend.clone()),
    };
    Ok(BenchVariant {
        name: token.to_string(),
        spec: TranslatorSpec::new(from.clone(), to.clone(), kind),
        backend,
    })
}

fn cmd_bench(
    g: &Global,
    corpus: &Path,
    from: &str,
    to: &str,
    variants: &[String],
    seeds: u64,
    p: &str,
) -> Result<String, CliError> {
    let s = load(g)?;
    let (from, to) = (formalism(from)?, formalism(to)?);
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus)
        .map_err(|e| CliError::Usage(format!("{}: {e}", corpus.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let artifacts = files
        .iter()
        .map(|f| read_artifact(f, Some(from.as_str())))
        .collect::<Result<Vec<_>, _>>()?;
    let variants = variants
        .iter()
        .map(|v| variant(&s, v, &from, &to))
        .collect::<Result<Vec<_>, _>>()?;
    if seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..seeds).map(|i| s.seed.wrapping_add(i)).collect();
    let backward = plan_between(&s, &to, &from, p)?;
    let rows = benchmark(&s.translators, &artifacts, &variants, &backward, &s.repair, &seeds).map_err(fidelity_error)?;
    Ok(match g.format {
        Format::Records => rows.iter().map(|r| r.to_record()).collect(),
        Format::Table => render_bench_table(&rows),
    })
}
