use std::collections::{BTreeMap, HashSet};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use synsel_core::agent::{train_agent, Agent, AgentConfig, AgentMode, BackendKind};
use synsel_core::behavior::{
    delta_summary, run_behavior_check, sample_example_sets, write_reports, BehaviorOptions, TTestKind,
};
use synsel_core::corpus::{build_pool, ingest_corpus, read_corpus_dir, read_pairs, Member, RuleTagger, SentencePool};
use synsel_core::instances::{build_context_instances, build_entailment_instances, BuildOptions, InstanceBatch, MixRatio};
use synsel_core::jsonl;
use synsel_core::quiz::{calibrate_quiz_size, make_quiz, make_quiz_excluding, run_quiz, ResultRow};
use synsel_core::selector::gmm::{gmm_baseline_select, HashedContextEmbedder, DEFAULT_COMPONENTS};
use synsel_core::selector::{read_selections, select_best_sets, write_selections, CandidatePool, STANDARD_CANDIDATES};
use synsel_core::synthetic::{SyntheticPair, SyntheticSpec};
use synsel_study::catalog::{BankEntry, Catalog, ExampleBank, ExampleSource, StudyExample};
use synsel_study::{SessionStore, StudyService};

#[derive(Parser)]
#[command(name = "synsel", version, about = "Learner-like agents for near-synonym example selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Entail,
    Context,
}

impl From<ModeArg> for AgentMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Entail => AgentMode::Entailment,
            ModeArg::Context => AgentMode::Context,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Transformer,
    Light,
    Oracle,
}

impl From<BackendArg> for BackendKind {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Transformer => BackendKind::Transformer,
            BackendArg::Light => BackendKind::Light,
            BackendArg::Oracle => BackendKind::Oracle,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TestArg {
    Paired,
    Welch,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BaselineArg {
    Gmm,
    None,
}

#[derive(Subcommand)]
enum Command {
    /// Write a sentence pool for the built-in synthetic pair.
    Synth {
        #[arg(long, default_value_t = 1400)]
        per_word: usize,
        #[arg(long, default_value_t = 1000)]
        train: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract target sentences from a text corpus and build balanced pools.
    Ingest {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 5000)]
        per_word: usize,
        #[arg(long, default_value_t = 4000)]
        train: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build training instances for one pair.
    BuildInstances {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        pair: Option<String>,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// normal:perturbed mix, e.g. 2:1.
        #[arg(long)]
        ratio: Option<MixRatio>,
        #[arg(long)]
        no_perturb: bool,
        #[arg(long)]
        total: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an agent on an instance file.
    Train {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
        /// JSON agent configuration; command-line mode and backend take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score sampled authentic example sets on one quiz.
    EvalFitb {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long, default_value_t = 10)]
        sets: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pairwise quiz-to-quiz correlations for each candidate quiz size.
    CalibrateK {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "10,50,100,200")]
        k: Vec<usize>,
        #[arg(long, default_value_t = 30)]
        sets: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Authentic versus swapped example sets.
    BehaviorCheck {
        #[arg(long, required = true, num_args = 1..)]
        model: Vec<PathBuf>,
        #[arg(long)]
        pool: PathBuf,
        #[arg(long, default_value_t = 375)]
        sets: usize,
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = TestArg::Paired)]
        test: TestArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive example-set search over a candidate pool.
    Select {
        #[arg(long)]
        model: PathBuf,
        /// Sentence pool directory.
        #[arg(long)]
        pool: PathBuf,
        /// Candidate file; sampled from the test split when absent.
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long, default_value_t = STANDARD_CANDIDATES)]
        per_word: usize,
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = BaselineArg::None)]
        baseline: BaselineArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assemble the study example bank from selection outputs.
    Bank {
        #[arg(long)]
        pool: PathBuf,
        /// `select` output directory of the entailment agent.
        #[arg(long)]
        entailment: PathBuf,
        /// `select` output directory of the context agent.
        #[arg(long)]
        context: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the study service.
    Serve {
        #[arg(long)]
        catalog: PathBuf,
        /// Directory holding the example bank.
        #[arg(long)]
        selections: PathBuf,
        #[arg(long)]
        sessions: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
    /// Proficiency-group report over stored sessions.
    Report {
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
    },
}

fn load_pool(dir: &Path, pair: Option<&str>) -> Result<SentencePool> {
    let pools = SentencePool::load_all(dir).with_context(|| format!("loading pools from {}", dir.display()))?;
    match pair {
        Some(id) => pools.into_iter().find(|p| p.pair().id() == id).with_context(|| format!("no pool for pair {id}")),
        None if pools.len() == 1 => Ok(pools.into_iter().next().expect("one pool")),
        None => bail!("{} holds {} pools; pick one with --pair", dir.display(), pools.len()),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn candidates_file(dir: &Path, pair_id: &str) -> PathBuf {
    dir.join(format!("{pair_id}.candidates.jsonl"))
}

fn synth(per_word: usize, train: usize, seed: u64, out: &Path) -> Result<()> {
    let syn = SyntheticPair::new(SyntheticSpec::default());
    let pool = build_pool(syn.pair(), &syn.generate(per_word, seed), per_word, train, seed.wrapping_add(1))?;
    SentencePool::save_all(out, &[pool])?;
    println!("wrote synthetic pool '{}' to {}", syn.pair().id(), out.display());
    Ok(())
}

fn ingest(pairs: &Path, corpus: &Path, per_word: usize, train: usize, seed: u64, out: &Path) -> Result<()> {
    let pairs = read_pairs(pairs)?;
    let docs = read_corpus_dir(corpus)?;
    let mut pools = Vec::new();
    for pair in pairs {
        let pair = pair.with_regular_inflections();
        let found = ingest_corpus(&docs, &pair, &RuleTagger);
        log::info!("{}: {} sentences, skipped {:?}", pair.id(), found.sentences.len(), found.skipped);
        pools.push(build_pool(&pair, &found.sentences, per_word, train, seed)?);
    }
    SentencePool::save_all(out, &pools)?;
    println!("wrote {} pools to {}", pools.len(), out.display());
    Ok(())
}

fn train(instances: &Path, mode: AgentMode, backend: Option<BackendKind>, config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut cfg = match config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None if backend == Some(BackendKind::Light) => AgentConfig::light_desk(mode),
        None => AgentConfig::default(),
    };
    cfg.mode = mode;
    if let Some(b) = backend {
        cfg.backend = b;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let batch = InstanceBatch::load(instances)?;
    let (agent, report) = train_agent(&batch, &cfg)?;
    agent.save(out, Some(&report))?;
    println!(
        "trained {} agent on {} instances: loss {:.4} -> {:.4}, held-out accuracy {:?}",
        mode.name(),
        batch.len(),
        report.initial_loss,
        report.final_loss,
        report.final_held_out_accuracy()
    );
    Ok(())
}

fn eval_fitb(model: &Path, pool: &Path, k: usize, sets: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let agent = Agent::load(model)?;
    let pool = load_pool(pool, Some(agent.pair_id()))?;
    let quiz = make_quiz(&pool, k, seed)?;
    let ids = quiz.ids();
    let available = Member::BOTH.map(|m| pool.test(m).iter().filter(|s| !ids.contains(s.sentence_id.as_str())).cloned().collect::<Vec<_>>());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sets = sample_example_sets(pool.pair().id(), [&available[0], &available[1]], sets, &mut rng)?;
    let rows: Vec<ResultRow> = sets
        .iter()
        .map(|s| run_quiz(&agent, s, &quiz, pool.pair()).map(|r| ResultRow::from(&r)))
        .collect::<synsel_core::Result<_>>()?;
    let mean = rows.iter().map(|r| r.accuracy).sum::<f64>() / rows.len() as f64;
    match out {
        Some(p) => jsonl::write_records(p, rows.iter())?,
        None => rows.iter().try_for_each(print_json)?,
    }
    println!("quiz {}: mean accuracy {mean:.4} over {} sets", quiz.quiz_id, rows.len());
    Ok(())
}

fn calibrate(model: &Path, pool: &Path, ks: &[usize], n_sets: usize, seed: u64) -> Result<()> {
    let agent = Agent::load(model)?;
    let pool = load_pool(pool, Some(agent.pair_id()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let test = Member::BOTH.map(|m| pool.test(m));
    let sets = sample_example_sets(pool.pair().id(), test, n_sets, &mut rng)?;
    let report = calibrate_quiz_size(&agent, &sets, &pool, ks, seed)?;
    print_json(&report)
}

fn behavior(models: &[PathBuf], pool: &Path, sets: usize, k: usize, seed: u64, test: TestArg, out: Option<&Path>) -> Result<()> {
    let mut reports = Vec::new();
    for model in models {
        let agent = Agent::load(model)?;
        let pool = load_pool(pool, Some(agent.pair_id()))?;
        let mut opts = BehaviorOptions::new(sets, k, seed);
        opts.test = match test {
            TestArg::Paired => TTestKind::Paired,
            TestArg::Welch => TTestKind::Welch,
        };
        let r = run_behavior_check(&agent, &pool, &opts)?;
        println!(
            "{} {}: acc {:.4} good {:.4} bad {:.4} delta {:.4} t {} p {}",
            r.pair_id,
            agent.mode().name(),
            r.lexical_acc,
            r.acc_good.iter().sum::<f64>() / r.n_sets as f64,
            r.acc_bad.iter().sum::<f64>() / r.n_sets as f64,
            r.delta,
            r.t_score.map_or("-".into(), |t| format!("{t:.3}")),
            r.p_value.map_or_else(|| r.t_error.clone().unwrap_or_default(), |p| format!("{p:.3e}")),
        );
        reports.push(r);
    }
    if let Some(p) = out {
        write_reports(p, &reports)?;
    }
    if reports.len() >= 2 {
        match delta_summary(&reports) {
            Ok(summary) => print!("{}", summary.to_csv()),
            Err(e) => log::warn!("no accuracy/delta correlation: {e}"),
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn select(
    model: &Path,
    pool_dir: &Path,
    candidates: Option<&Path>,
    per_word: usize,
    k: usize,
    seed: u64,
    baseline: BaselineArg,
    out: &Path,
) -> Result<()> {
    let agent = Agent::load(model)?;
    let pool = load_pool(pool_dir, Some(agent.pair_id()))?;
    let pair = pool.pair();
    let cands = match candidates {
        Some(p) => CandidatePool::load(p, pair)?,
        None => {
            let probe = make_quiz(&pool, k, seed)?;
            let exclude: HashSet<String> = probe.ids().into_iter().map(String::from).collect();
            CandidatePool::sample(&pool, per_word, &exclude, seed, |_| Vec::new())?
        }
    };
    let quiz = make_quiz_excluding(&pool, k, seed, &cands.ids())?;
    let result = select_best_sets(&agent, &cands, &quiz, pair)?;
    std::fs::create_dir_all(out)?;
    cands.save(&candidates_file(out, pair.id()), pair)?;
    quiz.save(&out.join(format!("{}.quiz.jsonl", pair.id())))?;
    write_selections(&out.join("selections.jsonl"), std::slice::from_ref(&result))?;
    println!(
        "{}: best accuracy {:.4}, {} argmax sets, union {:?}, most common three {:?}",
        result.pair_id,
        result.best_accuracy,
        result.argmax_sets.len(),
        result.selected_union,
        result.most_common_three
    );
    if let Some(m) = result.metrics {
        println!("precision {:.4} recall {:.4} f1 {:.4}", m.precision, m.recall, m.f1);
    }
    if baseline == BaselineArg::Gmm {
        let train = Member::BOTH.map(|m| pool.train(m));
        let picks = gmm_baseline_select(&cands, train, &HashedContextEmbedder::default(), DEFAULT_COMPONENTS, seed)?;
        std::fs::write(out.join("gmm_baseline.json"), serde_json::to_string_pretty(&picks)?)?;
        println!("gmm baseline picks {:?}", picks.picks);
    }
    Ok(())
}

fn bank(pool_dir: &Path, entailment: &Path, context: &Path, out: &Path) -> Result<()> {
    let pools: BTreeMap<String, SentencePool> =
        SentencePool::load_all(pool_dir)?.into_iter().map(|p| (p.pair().id().to_string(), p)).collect();
    let mut entries = Vec::new();
    let mut candidate_pairs = HashSet::new();
    for (dir, source) in [(entailment, ExampleSource::Entailment), (context, ExampleSource::Context)] {
        for record in read_selections(&dir.join("selections.jsonl"))? {
            let pool = pools.get(&record.pair_id).with_context(|| format!("no pool for pair {}", record.pair_id))?;
            let text: BTreeMap<&str, String> = pool.sentences().map(|s| (s.sentence_id.as_str(), s.text())).collect();
            for m in Member::BOTH {
                let examples = record.most_common_three[m.slot()]
                    .iter()
                    .map(|id| {
                        let t = text.get(id.as_str()).with_context(|| format!("sentence {id} missing from pool"))?;
                        Ok(StudyExample { sentence_id: id.clone(), text: t.clone() })
                    })
                    .collect::<Result<Vec<_>>>()?;
                entries.push(BankEntry { pair_id: record.pair_id.clone(), source, word: pool.pair().word(m).to_string(), examples });
            }
            if candidate_pairs.insert(record.pair_id.clone()) {
                let cands = CandidatePool::load(&candidates_file(dir, &record.pair_id), pool.pair())?;
                for m in Member::BOTH {
                    let examples = cands
                        .candidates(m)
                        .iter()
                        .map(|s| StudyExample { sentence_id: s.sentence_id.clone(), text: s.text() })
                        .collect();
                    entries.push(BankEntry {
                        pair_id: record.pair_id.clone(),
                        source: ExampleSource::Candidates,
                        word: pool.pair().word(m).to_string(),
                        examples,
                    });
                }
            }
        }
    }
    let n = entries.len();
    ExampleBank::new(entries)?.save(out)?;
    println!("wrote {n} bank entries to {}", out.display());
    Ok(())
}

async fn serve(catalog: &Path, selections: &Path, sessions: Option<&Path>, port: u16) -> Result<()> {
    let cat = Catalog::load(catalog)?;
    let bank = ExampleBank::load(selections)?;
    let sessions = sessions.map(Path::to_path_buf).unwrap_or_else(|| catalog.join("sessions"));
    let service = StudyService::new(cat, bank, SessionStore::on_disk(&sessions)?)?;
    let app = synsel_study::http::router(Arc::new(service));
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {addr}, sessions in {}", sessions.display());
    axum::serve(listener, app).await?;
    Ok(())
}

fn report(sessions: &Path, catalog: &Path) -> Result<()> {
    let cat = Catalog::load(catalog)?;
    let loaded: Vec<_> = synsel_study::store::load_dir(sessions)?.into_iter().map(|(s, _)| s).collect();
    print_json(&synsel_study::analytics::group_report(&loaded, &cat)?)
}

fn build_instances(
    pool: &Path,
    pair: Option<&str>,
    mode: AgentMode,
    ratio: Option<MixRatio>,
    total: Option<usize>,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let pool = load_pool(pool, pair)?;
    let mut opts = BuildOptions::new(ratio, seed);
    if let Some(t) = total {
        opts = opts.with_total(t);
    }
    let batch = match mode {
        AgentMode::Entailment => InstanceBatch::Entailment(build_entailment_instances(&pool, &opts)?),
        AgentMode::Context => InstanceBatch::Context(build_context_instances(&pool, &opts)?),
    };
    batch.save(out)?;
    println!("wrote {} {} instances to {}", batch.len(), mode.name(), out.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Synth { per_word, train, seed, out } => synth(per_word, train, seed, &out),
        Command::Ingest { pairs, corpus, per_word, train: t, seed, out } => ingest(&pairs, &corpus, per_word, t, seed, &out),
        Command::BuildInstances { pool, pair, mode, ratio, no_perturb, total, seed, out } => {
            let ratio = if no_perturb { None } else { Some(ratio.unwrap_or_default()) };
            build_instances(&pool, pair.as_deref(), mode.into(), ratio, total, seed, &out)
        }
        Command::Train { instances, mode, backend, config, seed, out } => {
            train(&instances, mode.into(), backend.map(Into::into), config.as_deref(), seed, &out)
        }
        Command::EvalFitb { model, pool, k, sets, seed, out } => eval_fitb(&model, &pool, k, sets, seed, out.as_deref()),
        Command::CalibrateK { model, pool, k, sets, seed } => calibrate(&model, &pool, &k, sets, seed),
        Command::BehaviorCheck { model, pool, sets, k, seed, test, out } => {
            behavior(&model, &pool, sets, k, seed, test, out.as_deref())
        }
        Command::Select { model, pool, candidates, per_word, k, seed, baseline, out } => {
            select(&model, &pool, candidates.as_deref(), per_word, k, seed, baseline, &out)
        }
        Command::Bank { pool, entailment, context, out } => bank(&pool, &entailment, &context, &out),
        Command::Serve { catalog, selections, sessions, port } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(&catalog, &selections, sessions.as_deref(), port))
        }
        Command::Report { sessions, catalog } => report(&sessions, &catalog),
    }
}
