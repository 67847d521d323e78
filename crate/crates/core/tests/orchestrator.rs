mod common;

use std::fs;

use akm::adr::{parse_adr, AdrStatus, SourceConfig};
use akm::llm::{FailKind, ScriptStep};
use akm::model::{RunStatus, StageName};
use akm::orchestrator::{
    read_events, read_run, replay, run_agentic, run_baseline, OrchestratorError, ADR_DIR, EVENTS_FILE,
    WARN_ADRS_UNVALIDATED, WARN_SUMMARY_UNVALIDATED,
};
use akm::retrieval::{HashingEmbedder, VectorStore};
use common::*;

#[test]
fn happy_path_uses_four_calls() {
    let repo = tempfile::tempdir().unwrap();
    fixture_repo(repo.path());
    let out = tempfile::tempdir().unwrap();
    let adrs = adrs_reply(&["Layered HTTP service", "Repository pattern"]);
    let (backend, gw) = gateway(replies(&[SUMMARY, ACCEPT, &adrs, ACCEPT]));

    let run = run_agentic(repo.path(), &config(out.path(), SourceConfig::Agentic), &gw).unwrap();

    assert_eq!(backend.calls().len(), 4);
    assert_eq!(run.status, RunStatus::Completed);
    assert!(run.warnings.is_empty());
    let stages: Vec<_> = run.stages.iter().map(|s| (s.stage_name, s.iteration)).collect();
    assert_eq!(
        stages,
        [
            (StageName::Summarize, 1),
            (StageName::ValidateSummary, 1),
            (StageName::GenerateAdrs, 1),
            (StageName::ValidateAdrs, 1)
        ]
    );
    assert_eq!(run.final_adrs.len(), 2);
    assert!(run.final_adrs.iter().all(|a| a.status == AdrStatus::Accepted));
    assert_eq!(
        run.final_adrs[0].provenance,
        ["summarize#1", "validate-summary#1", "generate-adrs#1", "validate-adrs#1"]
    );

    let files = adr_files(&out.path().join(ADR_DIR));
    assert_eq!(
        files.iter().map(|f| f.0.as_str()).collect::<Vec<_>>(),
        ["0001-layered-http-service.md", "0002-repository-pattern.md"]
    );
    assert_eq!(parse_adr(&files[1].1).unwrap(), run.final_adrs[1]);
    assert_eq!(read_events(out.path()).unwrap().len(), 4);
    assert_eq!(read_run(out.path()).unwrap().final_adrs, run.final_adrs);
}

#[test]
fn prompts_exclude_ignored_and_binary_files() {
    let repo = tempfile::tempdir().unwrap();
    fixture_repo(repo.path());
    let out = tempfile::tempdir().unwrap();
    let adrs = adrs_reply(&["A"]);
    let (backend, gw) = gateway(replies(&[SUMMARY, ACCEPT, &adrs, ACCEPT]));
    run_agentic(repo.path(), &config(out.path(), SourceConfig::Agentic), &gw).unwrap();
    let prompt = &backend.calls()[0].user_prompt;
    assert!(prompt.contains("FILE: pyproject.toml"));
    assert!(prompt.contains("FILE: src/orders/store.py"));
    assert!(!prompt.contains("left-pad"));
    assert!(!prompt.contains("refs/heads"));
    assert!(!prompt.contains("logo.png"));
}

#[test]
fn summary_rejections_are_threaded_verbatim() {
    let repo = tempfile::tempdir().unwrap();
    fixture_repo(repo.path());
    let out = tempfile::tempdir().unwrap();
    let first = reject(&["misses the caching layer", "overview too vague"]);
    let second = reject(&["still no mention of PostgreSQL"]);
    let adrs = adrs_reply(&["Use PostgreSQL"]);
    let (backend, gw) = gateway(replies(&[SUMMARY, &first, SUMMARY, &second, SUMMARY, ACCEPT, &adrs, ACCEPT]));

    let run = run_agentic(repo.path(), &config(out.path(), SourceConfig::Agentic), &gw).unwrap();

    let calls = backend.calls();
    assert_eq!(calls.len(), 8);
    assert!(calls[2].user_prompt.contains("misses the caching layer"));
    assert!(calls[2].user_prompt.contains("overview too vague"));
    assert!(calls[4].user_prompt.contains("still no mention of PostgreSQL"));
    assert!(!calls[4].user_prompt.contains("misses the caching layer"));
    assert!(!calls[0].user_prompt.contains("ISSUE"));
    assert_eq!(run.status, RunStatus::Completed);
    assert_eq!(run.final_adrs[0].provenance[..2], ["summarize#3".to_string(), "validate-summary#3".to_string()]);
}

#[test]
fn exhausted_loops_emit_unvalidated_records() {
    let repo = tempfile::tempdir().unwrap();
    fixture_repo(repo.path());
    let out = tempfile::tempdir().unwrap();
    let no = reject(&["not good enough"]);
    let adrs = adrs_reply(&["Monolith"]);
    let mut script = Vec::new();
    for _ in 0..3 {
        script.extend(replies(&[SUMMARY, &no]));
    }
    for _ in 0..3 {
        script.extend(replies(&[&adrs, &no]));
    }
    let (backend, gw) = gateway(script);

    let run = run_agentic(repo.path(), &config(out.path(), SourceConfig::Agentic), &gw).unwrap();

    assert_eq!(backend.calls().len(), 12);
    assert_eq!(run.status, RunStatus::CompletedWithWarnings);
    assert_eq!(run.warnings, [WARN_SUMMARY_UNVALIDATED, WARN_ADRS_UNVALIDATED]);
    let first_adr_stage = run.stages.iter().position(|s| s.stage_name == StageName::GenerateAdrs).unwrap();
    assert!(run.stages[..first_adr_stage]
        .iter()
        .all(|s| matches!(s.stage_name, StageName::Summarize | StageName::ValidateSummary)));
    assert!(run.stages[first_adr_stage..]
        .iter()
        .all(|s| matches!(s.stage_name, StageName::GenerateAdrs | StageName::ValidateAdrs)));
    assert_eq!(run.final_adrs.len(), 1);
    assert_eq!(run.final_adrs[0].status, AdrStatus::Unvalidated);
    let files = adr_files(&out.path().join(ADR_DIR));
    assert!(files[0].1.contains("Status: unvalidated"));
}

#[test]
fn unparseable_summary_consumes_an_iteration() {
    let repo = tempfile::tempdir().unwrap();
    fixture_repo(repo.path());
    let out = tempfile::tempdir().unwrap();
    let adrs = adrs_reply(&["A"]);
    let (backend, gw) = gateway(replies(&["I could not do it.", SUMMARY, ACCEPT, &adrs, ACCEPT]));

    let run = run_agentic(repo.path(), &config(out.path(), SourceConfig::Agentic), &gw).unwrap();

    assert_eq!(backend.calls().len(), 5);
    assert!(run.stages[0].parse_error.is_some());
    assert!(backend.calls()[1].user_prompt.contains("could not be parsed"));
    assert_eq!(run.status, RunStatus::Completed);
    assert_eq!(run.final_adrs[0].provenance[0], "summarize#2");
}

#[test]
fn max_iterations_is_respected() {
    let repo = tempfile::tempdir().unwrap();
    fixture_repo(repo.path());
    let out = tempfile::tempdir().unwrap();
    let no = reject(&["x"]);
    let adrs = adrs_reply(&["A"]);
    let (backend, gw) = gateway(replies(&[SUMMARY, &no, &adrs, &no]));
    let mut cfg = config(out.path(), SourceConfig::Agentic);
    cfg.max_iterations = 1;

    let run = run_agentic(repo.path(), &cfg, &gw).unwrap();
    assert_eq!(backend.calls().len(), 4);
    assert_eq!(run.status, RunStatus::CompletedWithWarnings);
}

#[test]
fn gateway_failure_fails_the_run_with_partial_log() {
    let repo = tempfile::tempdir().unwrap();
    fixture_repo(repo.path());
    let out = tempfile::tempdir().unwrap();
    let mut script = replies(&[SUMMARY, ACCEPT]);
    script.push(ScriptStep::Fail(FailKind::Fatal));
    let (_, gw) = gateway(script);

    let run = run_agentic(repo.path(), &config(out.path(), SourceConfig::Agentic), &gw).unwrap();

    assert_eq!(run.status, RunStatus::Failed);
    let failure = run.failure.as_ref().unwrap();
    assert_eq!((failure.stage, failure.iteration), (StageName::GenerateAdrs, 1));
    assert!(run.final_adrs.is_empty());
    assert_eq!(read_events(out.path()).unwrap().len(), 2);
    assert!(adr_files(&out.path().join(ADR_DIR)).is_empty());
}

#[test]
fn transient_errors_are_retried_inside_a_stage() {
    let repo = tempfile::tempdir().unwrap();
    fixture_repo(repo.path());
    let out = tempfile::tempdir().unwrap();
    let adrs = adrs_reply(&["A"]);
    let mut script = vec![ScriptStep::Fail(FailKind::Transient), ScriptStep::Fail(FailKind::Transient)];
    script.extend(replies(&[SUMMARY, ACCEPT, &adrs, ACCEPT]));
    let (backend, gw) = gateway(script);

    let run = run_agentic(repo.path(), &config(out.path(), SourceConfig::Agentic), &gw).unwrap();
    assert_eq!(backend.calls().len(), 6);
    assert_eq!(run.status, RunStatus::Completed);
    assert_eq!(run.stages.len(), 4);
}

#[test]
fn baseline_makes_one_call() {
    let repo = tempfile::tempdir().unwrap();
    fixture_repo(repo.path());
    let out = tempfile::tempdir().unwrap();
    let adrs = adrs_reply(&["Flask for HTTP", "PostgreSQL for storage"]);
    let (backend, gw) = gateway(replies(&[&adrs]));

    let run = run_baseline(repo.path(), &config(out.path(), SourceConfig::Baseline), &gw).unwrap();

    assert_eq!(backend.calls().len(), 1);
    assert_eq!(run.status, RunStatus::Completed);
    assert_eq!(run.stages.len(), 1);
    assert_eq!(run.stages[0].stage_name, StageName::Baseline);
    let files = adr_files(&out.path().join(ADR_DIR));
    assert_eq!(files.len(), 2);
    for adr in &run.final_adrs {
        assert_eq!(adr.status, AdrStatus::Proposed);
        assert_eq!(adr.source_config, SourceConfig::Baseline);
        assert_eq!(adr.provenance, ["baseline#1"]);
    }
}

#[test]
fn unparseable_baseline_fails() {
    let repo = tempfile::tempdir().unwrap();
    fixture_repo(repo.path());
    let out = tempfile::tempdir().unwrap();
    let (_, gw) = gateway(replies(&["Sorry, here are some thoughts without delimiters."]));

    let run = run_baseline(repo.path(), &config(out.path(), SourceConfig::Baseline), &gw).unwrap();

    assert_eq!(run.status, RunStatus::Failed);
    assert!(adr_files(&out.path().join(ADR_DIR)).is_empty());
    let events = read_events(out.path()).unwrap();
    assert_eq!(events.len(), 1);
    assert!(events[0].parse_error.is_some());
}

#[test]
fn identical_scripts_give_identical_bytes() {
    let repo = tempfile::tempdir().unwrap();
    fixture_repo(repo.path());
    let no = reject(&["tighten the consequences"]);
    let adrs = adrs_reply(&["Layered service", "Repository pattern"]);
    let script = replies(&[SUMMARY, ACCEPT, &adrs, &no, &adrs, ACCEPT]);
    let outputs: Vec<_> = (0..2)
        .map(|_| {
            let out = tempfile::tempdir().unwrap();
            let (_, gw) = gateway(script.clone());
            run_agentic(repo.path(), &config(out.path(), SourceConfig::Agentic), &gw).unwrap();
            adr_files(&out.path().join(ADR_DIR))
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0].len(), 2);
}

#[test]
fn replay_reproduces_records() {
    let repo = tempfile::tempdir().unwrap();
    fixture_repo(repo.path());
    let out = tempfile::tempdir().unwrap();
    let no = reject(&["add consequences"]);
    let adrs = adrs_reply(&["Layered service"]);
    let (_, gw) = gateway(replies(&[SUMMARY, &no, SUMMARY, ACCEPT, &adrs, ACCEPT]));
    run_agentic(repo.path(), &config(out.path(), SourceConfig::Agentic), &gw).unwrap();

    let again = tempfile::tempdir().unwrap();
    let outcome = replay(out.path(), again.path()).unwrap();
    assert!(outcome.identical(), "{:?}", outcome.mismatched_files);
    assert_eq!(outcome.replayed.stages.len(), 6);
    assert_eq!(outcome.replayed.final_adrs, outcome.original.final_adrs);
}

#[test]
fn replay_of_baseline_and_failed_runs() {
    let repo = tempfile::tempdir().unwrap();
    fixture_repo(repo.path());

    let out = tempfile::tempdir().unwrap();
    let adrs = adrs_reply(&["One", "Two"]);
    let (_, gw) = gateway(replies(&[&adrs]));
    run_baseline(repo.path(), &config(out.path(), SourceConfig::Baseline), &gw).unwrap();
    assert!(replay(out.path(), tempfile::tempdir().unwrap().path()).unwrap().identical());

    let failed = tempfile::tempdir().unwrap();
    let mut script = replies(&[SUMMARY]);
    script.push(ScriptStep::Fail(FailKind::Fatal));
    let (_, gw) = gateway(script);
    let run = run_agentic(repo.path(), &config(failed.path(), SourceConfig::Agentic), &gw).unwrap();
    assert_eq!(run.status, RunStatus::Failed);
    let outcome = replay(failed.path(), tempfile::tempdir().unwrap().path()).unwrap();
    assert!(outcome.identical());
    assert_eq!(outcome.replayed.status, RunStatus::Failed);
}

#[test]
fn replay_detects_a_missing_exchange() {
    let repo = tempfile::tempdir().unwrap();
    fixture_repo(repo.path());
    let out = tempfile::tempdir().unwrap();
    let adrs = adrs_reply(&["A"]);
    let (_, gw) = gateway(replies(&[SUMMARY, ACCEPT, &adrs, ACCEPT]));
    run_agentic(repo.path(), &config(out.path(), SourceConfig::Agentic), &gw).unwrap();

    let events = out.path().join(EVENTS_FILE);
    let text = fs::read_to_string(&events).unwrap();
    let kept: Vec<&str> = text.lines().enumerate().filter(|(i, _)| *i != 1).map(|(_, l)| l).collect();
    fs::write(&events, kept.join("\n") + "\n").unwrap();

    match replay(out.path(), tempfile::tempdir().unwrap().path()) {
        Err(OrchestratorError::ReplayDivergence { stage, iteration, .. }) => {
            assert_eq!((stage, iteration), (StageName::ValidateSummary, 1));
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn replay_detects_a_changed_repository() {
    let repo = tempfile::tempdir().unwrap();
    fixture_repo(repo.path());
    let out = tempfile::tempdir().unwrap();
    let (_, gw) = gateway(replies(&[&adrs_reply(&["A"])]));
    run_baseline(repo.path(), &config(out.path(), SourceConfig::Baseline), &gw).unwrap();
    fs::write(repo.path().join("src/orders/api.py"), "changed\n").unwrap();
    assert!(matches!(
        replay(out.path(), tempfile::tempdir().unwrap().path()),
        Err(OrchestratorError::ReplayDivergence { stage: StageName::Baseline, .. })
    ));
}

#[test]
fn existing_decisions_reach_the_prompts_and_outputs_are_indexed() {
    let repo = tempfile::tempdir().unwrap();
    fixture_repo(repo.path());
    let out = tempfile::tempdir().unwrap();
    let store_path = out.path().join("store.jsonl");

    let mut cfg = config(&out.path().join("first"), SourceConfig::Agentic);
    cfg.retrieval.store_path = Some(store_path.clone());
    cfg.retrieval.index_outputs = true;
    let adrs = adrs_reply(&["Repository pattern"]);
    let (_, gw) = gateway(replies(&[SUMMARY, ACCEPT, &adrs, ACCEPT]));
    run_agentic(repo.path(), &cfg, &gw).unwrap();
    let store = VectorStore::load(&store_path).unwrap();
    assert_eq!(store.len(), 1);
    assert!(store.get("0001-repository-pattern.md").is_some());

    cfg.output_dir = out.path().join("second");
    let (backend, gw) = gateway(replies(&[SUMMARY, ACCEPT, &adrs, ACCEPT]));
    run_agentic(repo.path(), &cfg, &gw).unwrap();
    let calls = backend.calls();
    assert!(calls[2].user_prompt.contains("[0001-repository-pattern.md]"));
    assert!(calls[3].user_prompt.contains("closest to existing decision [0001-repository-pattern.md]"));
    let _ = HashingEmbedder::default();
}

#[test]
fn stale_records_are_removed() {
    let repo = tempfile::tempdir().unwrap();
    fixture_repo(repo.path());
    let out = tempfile::tempdir().unwrap();
    let cfg = config(out.path(), SourceConfig::Baseline);
    let (_, gw) = gateway(replies(&[&adrs_reply(&["One", "Two", "Three"])]));
    run_baseline(repo.path(), &cfg, &gw).unwrap();
    let (_, gw) = gateway(replies(&[&adrs_reply(&["Only"])]));
    run_baseline(repo.path(), &cfg, &gw).unwrap();
    assert_eq!(adr_files(&out.path().join(ADR_DIR)).len(), 1);
}

#[test]
fn validator_sees_the_nearest_existing_decision() {
    use akm::orchestrator::embed_adr;
    use akm::retrieval::Embedder;

    let repo = tempfile::tempdir().unwrap();
    fixture_repo(repo.path());
    let out = tempfile::tempdir().unwrap();
    let store_path = out.path().join("store.jsonl");
    let embedder = HashingEmbedder::default();
    let mut store = VectorStore::new();
    let existing = [
        ("0001-kafka.md", "Adopt Kafka for events", "Services exchange events.", "We use Kafka topics."),
        (
            "0002-postgres.md",
            "Store orders in PostgreSQL",
            "The service needs Store orders in PostgreSQL.",
            "We adopt Store orders in PostgreSQL.",
        ),
        ("0003-monorepo.md", "Monorepo layout", "All code in one repository.", "One repo."),
    ];
    for (id, title, context, decision) in existing {
        let adr = akm::adr::Adr {
            id: 1,
            title: title.into(),
            status: AdrStatus::Accepted,
            context: context.into(),
            decision: decision.into(),
            consequences: "c".into(),
            source_config: SourceConfig::Agentic,
            provenance: vec![],
        };
        store.add(embed_adr(&embedder, &adr, id).unwrap()).unwrap();
    }
    store.save(&store_path).unwrap();

    let mut cfg = config(out.path(), SourceConfig::Agentic);
    cfg.retrieval.store_path = Some(store_path);
    let draft = adrs_reply(&["Store orders in Postgres"]);
    let (backend, gw) = gateway(replies(&[SUMMARY, ACCEPT, &draft, ACCEPT]));
    let run = run_agentic(repo.path(), &cfg, &gw).unwrap();

    // brute-force nearest neighbour of the draft record
    let a = &run.final_adrs[0];
    let q = embedder.embed(&akm::agents::adr_embedding_text(&a.title, &a.context, &a.decision)).unwrap();
    let nearest = store
        .docs()
        .max_by(|x, y| akm::retrieval::cosine(&q, &x.vector).total_cmp(&akm::retrieval::cosine(&q, &y.vector)))
        .unwrap();
    assert_eq!(nearest.doc_id, "0002-postgres.md");
    let prompt = &backend.calls()[3].user_prompt;
    assert!(prompt.contains(&nearest.text), "validator prompt lacks the nearest decision text");
}
