//! Offline subcommands. Each returns the text to print.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parley_core::dialogue_acts::{parse_da_corpus, tag_ngram, train_ngram, TrainConfig};
use parley_core::entity_linking::{
    bio_decode, bio_features, bio_train, load_gazetteer, parse_bio_corpus, parse_el_corpus, GazetteerIndex,
};
use parley_core::replay::{replay, ReplayReport, Script};
use parley_core::state::{FileStore, MemoryStore, StateStore, SystemClock};
use parley_core::{BioModel, DaModel, Engine, Error, Pack, Result};

use crate::remote::RemoteRg;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn label(path: &Path) -> String {
    path.display().to_string()
}

/// Loads a pack into an engine and adds its remote RGs. With no state
/// directory the engine keeps state in memory.
pub fn build_engine(pack_dir: &Path, state_dir: Option<&Path>) -> Result<Engine> {
    let pack = Pack::load(pack_dir)?;
    let remotes = pack.config.rgs.remote.clone();
    let store: Arc<dyn StateStore> = match state_dir {
        Some(d) => Arc::new(FileStore::open(d)?),
        None => Arc::new(MemoryStore::new()),
    };
    let mut engine = Engine::from_pack(pack, store, Arc::new(SystemClock))?;
    for r in &remotes {
        engine.register_rg(Arc::new(RemoteRg::from_config(r)))?;
    }
    Ok(engine)
}

pub fn validate_pack(pack_dir: &Path) -> Result<String> {
    let engine = build_engine(pack_dir, None)?;
    let cfg = engine.config();
    let mut out = String::new();
    let _ = writeln!(out, "pack {} {} ok", cfg.name, cfg.version);
    let _ = writeln!(out, "{} response generators registered", engine.registry().entries().len());
    let scripts = pack_dir.join("scripts");
    if scripts.is_dir() {
        let mut names: Vec<PathBuf> = std::fs::read_dir(&scripts)
            .map_err(|e| Error::Config(format!("{}: {e}", scripts.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        names.sort();
        for p in &names {
            let s = Script::parse(&read(p)?, &label(p))?;
            let _ = writeln!(out, "script {}: {} turns", label(p), s.turns.len());
        }
    }
    Ok(out)
}

pub fn run_replay(engine: &Engine, script_path: &Path) -> Result<ReplayReport> {
    let script = Script::parse(&read(script_path)?, &label(script_path))?;
    let id = script_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "replay".into());
    replay(engine, &script, &id)
}

pub struct TrainReport {
    pub text: String,
    pub accuracy: f64,
}

pub fn train_da(pack_dir: &Path, epochs: usize, out: &Path) -> Result<TrainReport> {
    let path = pack_dir.join("da/train.tsv");
    let corpus = parse_da_corpus(&read(&path)?, &label(&path))?;
    let model: DaModel = train_ngram(&corpus, TrainConfig { epochs, ..TrainConfig::default() })?;
    let correct = corpus.iter().filter(|(seg, l)| tag_ngram(seg, &model).0 == *l).count();
    let accuracy = correct as f64 / corpus.len() as f64;
    model.save(out)?;
    Ok(TrainReport {
        text: format!(
            "trained on {} segments, training accuracy {:.3}, wrote {}\n",
            corpus.len(),
            accuracy,
            out.display()
        ),
        accuracy,
    })
}

pub fn train_el(pack_dir: &Path, epochs: usize, seed: u64, out: &Path) -> Result<TrainReport> {
    let path = pack_dir.join("el/bio_train.tsv");
    let examples = parse_bio_corpus(&read(&path)?, &label(&path))?;
    let gaz = GazetteerIndex::build(load_gazetteer(&pack_dir.join("el/gazetteer.tsv"))?);
    let w: BioModel = bio_train(&examples, Some(&gaz), epochs, seed)?;
    let (mut correct, mut total) = (0, 0);
    for ex in &examples {
        let feats = bio_features(&ex.tokens, Some(&gaz), ex.topic.as_ref(), ex.da);
        let tags = bio_decode(&feats, &w);
        correct += tags.iter().zip(&ex.tags).filter(|(a, b)| a == b).count();
        total += ex.tags.len();
    }
    let accuracy = correct as f64 / total.max(1) as f64;
    w.save(out)?;
    Ok(TrainReport {
        text: format!(
            "trained on {} utterances, token accuracy {:.3}, wrote {}\n",
            examples.len(),
            accuracy,
            out.display()
        ),
        accuracy,
    })
}

pub fn eval_el(pack_dir: &Path, corpus: &Path) -> Result<String> {
    let engine = build_engine(pack_dir, None)?;
    let items = parse_el_corpus(&read(corpus)?, &label(corpus))?;
    let (scores, _) = engine.nlu().evaluate_linking(&items);
    let mut out = String::new();
    for (name, s) in [("entity", scores.entity), ("entity+type", scores.entity_type)] {
        let _ = writeln!(
            out,
            "{name:<12} precision {:.3} recall {:.3} f1 {:.3} (tp {} fp {} fn {})",
            s.precision, s.recall, s.f1, s.tp, s.fp, s.fn_
        );
    }
    Ok(out)
}
