use synsel_core::agent::{train_agent, Agent, AgentConfig, AgentMode};
use synsel_core::corpus::{build_pool, Member, SentencePool};
use synsel_core::instances::{build_context_instances, build_entailment_instances, BuildOptions, ExampleSet, InstanceBatch, MixRatio};
use synsel_core::quiz::make_quiz;
use synsel_core::synthetic::{SyntheticPair, SyntheticSpec};

fn pool() -> SentencePool {
    let syn = SyntheticPair::new(SyntheticSpec::default());
    build_pool(syn.pair(), &syn.generate(200, 4), 200, 120, 5).unwrap()
}

fn batch(pool: &SentencePool, mode: AgentMode) -> InstanceBatch {
    let opts = BuildOptions::new(Some(MixRatio::default()), 6).with_total(600);
    match mode {
        AgentMode::Entailment => InstanceBatch::Entailment(build_entailment_instances(pool, &opts).unwrap()),
        AgentMode::Context => InstanceBatch::Context(build_context_instances(pool, &opts).unwrap()),
    }
}

fn set(pool: &SentencePool) -> ExampleSet {
    ExampleSet::from_slots(pool.pair().id(), &pool.test(Member::First)[..3], &pool.test(Member::Second)[..3]).unwrap()
}

#[test]
fn light_training_reduces_loss() {
    let p = pool();
    for mode in [AgentMode::Entailment, AgentMode::Context] {
        let (_, report) = train_agent(&batch(&p, mode), &AgentConfig::light_desk(mode)).unwrap();
        assert!(report.final_loss < report.initial_loss, "{mode:?}: {report:?}");
        assert_eq!(report.epochs.len(), 8);
        assert!(report.final_held_out_accuracy().unwrap() > 0.5);
    }
}

#[test]
fn light_training_is_bit_reproducible() {
    let p = pool();
    let dir = tempfile::tempdir().unwrap();
    let b = batch(&p, AgentMode::Entailment);
    let cfg = AgentConfig::light_desk(AgentMode::Entailment);
    for name in ["a", "b"] {
        let (agent, report) = train_agent(&b, &cfg).unwrap();
        agent.save(&dir.path().join(name), Some(&report)).unwrap();
    }
    let files: Vec<_> = std::fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(!files.is_empty());
    for f in files {
        let a = std::fs::read(dir.path().join("a").join(&f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(&f)).unwrap();
        assert_eq!(a, b, "{f:?} differs");
    }
}

#[test]
fn saved_agent_answers_identically() {
    let p = pool();
    let (agent, _) = train_agent(&batch(&p, AgentMode::Context), &AgentConfig::light_desk(AgentMode::Context)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    agent.save(dir.path(), None).unwrap();
    let loaded = Agent::load(dir.path()).unwrap();
    let quiz = make_quiz(&p, 10, 1).unwrap();
    let qs: Vec<_> = quiz.sentences();
    let s = set(&p);
    assert_eq!(agent.answer_fitb_batch(&s, &qs, p.pair()).unwrap(), loaded.answer_fitb_batch(&s, &qs, p.pair()).unwrap());
}

#[test]
fn batched_answers_match_single_answers() {
    let p = pool();
    let (agent, _) = train_agent(&batch(&p, AgentMode::Entailment), &AgentConfig::light_desk(AgentMode::Entailment)).unwrap();
    let quiz = make_quiz(&p, 16, 2).unwrap();
    let qs = quiz.sentences();
    let s = set(&p);
    let batched = agent.answer_fitb_entailment_batch(&s, &qs, p.pair()).unwrap();
    for (q, b) in qs.iter().zip(&batched) {
        let single = agent.answer_fitb_entailment(&s, q, p.pair()).unwrap();
        assert_eq!(single.chosen, b.chosen);
        for (x, y) in single.scores.iter().zip(&b.scores) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn mode_mismatch_is_rejected() {
    let p = pool();
    let Err(err) = train_agent(&batch(&p, AgentMode::Context), &AgentConfig::light_desk(AgentMode::Entailment)) else {
        panic!("context instances trained an entailment agent");
    };
    assert!(err.to_string().contains("context"), "{err}");
}
