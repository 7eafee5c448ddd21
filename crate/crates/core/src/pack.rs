//! Engine configuration and content-pack loading.
//!
//! A pack is a directory holding `engine.toml` plus the data files every
//! component reads. Paths below are relative to the pack root.
//!
//! ```text
//! engine.toml            EngineConfig
//! topics.toml            topic registry
//! nlu/segmenter/*.txt    segmenter cue lists
//! nlu/red.tsv            red-question table
//! nlu/sentiment.tsv      valence lexicon
//! nlu/stopwords.txt      function words (chunker, repetition filter)
//! nlu/masked.txt         terms exempt from the profanity filter
//! da/patterns.tsv        regex tagger
//! da/train.tsv           n-gram classifier corpus
//! da/model.txt           trained n-gram model (optional)
//! el/gazetteer.tsv       typed surface forms
//! el/common_freq.tsv     common-phrase frequencies
//! el/common_exceptions.txt
//! el/lookup.tsv          trained-path lookup table (optional)
//! el/tagger.txt          BIO tagger weights (optional)
//! el/reranker.txt        reranker weights (optional)
//! el/bio_train.tsv       tagger training corpus (train-el only)
//! el/desk.tsv            annotated linking corpus (eval-el only)
//! dm/actions.toml        action cues and scripted lines
//! dm/grounding.toml      grounding templates
//! dm/fallback.toml       fallback templates
//! dm/red_responses.toml  red-question answers
//! dm/topic_intros.toml   topic opening lines
//! flows/*.json           flow graphs
//! kg/relations.tsv, kg/triples.tsv, kg/templates.json, kg/favorites.tsv
//! retrieval/bank.tsv, retrieval/funfacts.tsv
//! retrieval/backstory.tsv, retrieval/backstory_deny.txt
//! news/feed.xml, news/templates.toml
//! scripts/*.txt          replay scripts
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::dialogue_acts::{parse_da_corpus, train_ngram, DaTagger, NgramModel, RegexTagger, TrainConfig};
use crate::dm::{FallbackTemplates, GroundingTemplates, PoolBudget, SsmlConfig};
use crate::entity_linking::{
    load_gazetteer, BioWeights, CommonPhraseList, EntityLinker, GazetteerIndex, LinkPath, LookupIndex, Reranker,
};
use crate::error::{Error, Result};
use crate::flow::{CallbackRegistry, FlowGraph};
use crate::kg::{KgPack, KgTemplates, RelationRegistry, TripleStore};
use crate::nlu::{RedTable, SegmenterModel, SentimentLexicon};
use crate::retrieval::{BackstoryTable, FunFactIndex, NewsFeed, NewsFilter, NewsTemplates, ResponseBank};
use crate::system_rgs::{ActionConfig, RedResponses, TopicIntros};
use crate::text;
use crate::topic::TopicRegistry;
use crate::types::TopicId;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DmConfig {
    pub initiative_limit: u32,
    /// Topics the system may initiate, in preference order.
    pub initiative_topics: Vec<TopicId>,
    pub ranker_preference: Vec<String>,
    pub repetition_threshold: f64,
    pub repetition_window: usize,
    pub rg_timeout_ms: u64,
    pub pool_deadline_ms: u64,
    pub turn_budget_ms: u64,
}

impl Default for DmConfig {
    fn default() -> Self {
        DmConfig {
            initiative_limit: crate::dm::initiative::DEFAULT_INITIATIVE_LIMIT,
            initiative_topics: Vec::new(),
            ranker_preference: [
                "backstory", "flow:*", "kg", "centering", "news", "funfact", "topic_intro", "system", "red",
            ]
            .map(String::from)
            .to_vec(),
            repetition_threshold: 0.8,
            repetition_window: 20,
            rg_timeout_ms: 300,
            pool_deadline_ms: 800,
            turn_budget_ms: 1000,
        }
    }
}

impl DmConfig {
    pub fn budget(&self) -> PoolBudget {
        PoolBudget {
            per_rg: Duration::from_millis(self.rg_timeout_ms),
            deadline: Duration::from_millis(self.pool_deadline_ms),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NluConfig {
    pub el_path: LinkPath,
    pub common_cutoff: u64,
    pub el_min_score: f64,
}

impl Default for NluConfig {
    fn default() -> Self {
        NluConfig {
            el_path: LinkPath::Ensemble,
            common_cutoff: crate::entity_linking::DEFAULT_CUTOFF,
            el_min_score: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    pub state_dir: PathBuf,
    /// Zero disables polling.
    pub news_poll_secs: u64,
    pub news_url: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1".into(),
            port: 8080,
            state_dir: PathBuf::from("state"),
            news_poll_secs: 0,
            news_url: None,
        }
    }
}

/// A remote response generator reached over HTTP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteRgConfig {
    pub id: String,
    pub endpoint: String,
    pub actions: Vec<crate::types::SystemAction>,
    pub topics: Vec<TopicId>,
    #[serde(default)]
    pub timeout_ms: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RgConfig {
    pub kg_topics: Vec<TopicId>,
    pub news_topics: Vec<TopicId>,
    pub news_blocked: BTreeSet<String>,
    pub remote: Vec<RemoteRgConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EngineConfig {
    pub name: String,
    pub version: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dm: DmConfig,
    #[serde(default)]
    pub nlu: NluConfig,
    #[serde(default)]
    pub ssml: SsmlConfig,
    #[serde(default)]
    pub service: ServiceConfig,
    #[serde(default)]
    pub rgs: RgConfig,
    /// Pack root; filled in by the loader.
    #[serde(skip)]
    pub pack_dir: PathBuf,
}

impl EngineConfig {
    pub fn parse(data: &str) -> Result<Self> {
        toml::from_str(data).map_err(|e| Error::Config(format!("engine.toml: {e}")))
    }

    pub fn load(pack_dir: &Path) -> Result<Self> {
        let path = pack_dir.join("engine.toml");
        let data = std::fs::read_to_string(&path).map_err(|e| pack_error("engine", &path, e))?;
        let mut cfg = Self::parse(&data)?;
        cfg.pack_dir = pack_dir.to_path_buf();
        Ok(cfg)
    }

    /// The state directory, resolved against the pack root when relative.
    pub fn state_dir(&self) -> PathBuf {
        if self.service.state_dir.is_absolute() {
            self.service.state_dir.clone()
        } else {
            self.pack_dir.join(&self.service.state_dir)
        }
    }
}

fn pack_error(pack: &str, path: &Path, reason: impl ToString) -> Error {
    Error::Pack {
        pack: pack.to_string(),
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

/// Runs a component loader, turning a missing file into an error naming
/// the component and the path.
fn component<T>(pack: &str, path: &Path, load: impl FnOnce(&Path) -> Result<T>) -> Result<T> {
    if !path.exists() {
        return Err(pack_error(pack, path, "file not found"));
    }
    load(path).map_err(|e| match e {
        e @ Error::Pack { .. } => e,
        other => pack_error(pack, path, other),
    })
}

/// Every loaded pack component.
pub struct Pack {
    pub config: EngineConfig,
    pub topics: Arc<TopicRegistry>,
    pub segmenter: SegmenterModel,
    pub red: RedTable,
    pub sentiment: SentimentLexicon,
    pub stopwords: Vec<String>,
    pub masked: Vec<String>,
    pub da: DaTagger,
    pub linker: EntityLinker,
    pub actions: ActionConfig,
    pub grounding: GroundingTemplates,
    pub fallback: FallbackTemplates,
    pub red_responses: RedResponses,
    pub topic_intros: TopicIntros,
    pub flows: Vec<Arc<FlowGraph>>,
    pub callbacks: CallbackRegistry,
    pub kg: Arc<KgPack>,
    pub bank: Arc<ResponseBank>,
    pub funfacts: Arc<FunFactIndex>,
    pub backstory: Arc<BackstoryTable>,
    pub news: Arc<NewsFeed>,
    pub news_templates: NewsTemplates,
}

impl Pack {
    pub fn load(dir: &Path) -> Result<Pack> {
        let config = EngineConfig::load(dir)?;
        let p = |rel: &str| dir.join(rel);

        let topics = Arc::new(component("topics", &p("topics.toml"), TopicRegistry::load)?);
        let segmenter = component("segmenter", &p("nlu/segmenter"), SegmenterModel::load)?;
        let red = component("red", &p("nlu/red.tsv"), RedTable::load)?;
        let sentiment = component("sentiment", &p("nlu/sentiment.tsv"), SentimentLexicon::load)?;
        let stopwords = component("stopwords", &p("nlu/stopwords.txt"), text::read_word_list)?;
        let masked = component("masked", &p("nlu/masked.txt"), text::read_word_list)?;

        let regex = component("da", &p("da/patterns.tsv"), RegexTagger::load)?;
        let model = load_da_model(dir)?;
        let da = DaTagger::new(regex, Some(model));

        let linker = load_linker(dir, &config)?;

        let actions = component("actions", &p("dm/actions.toml"), ActionConfig::load)?;
        let grounding = component("grounding", &p("dm/grounding.toml"), GroundingTemplates::load)?;
        let fallback = component("fallback", &p("dm/fallback.toml"), FallbackTemplates::load)?;
        let red_responses = component("red_responses", &p("dm/red_responses.toml"), RedResponses::load)?;
        let topic_intros = component("topic_intros", &p("dm/topic_intros.toml"), TopicIntros::load)?;

        let callbacks = CallbackRegistry::with_builtins();
        let flows = load_flows(&p("flows"), &callbacks, &topics)?;

        let relations = component("kg", &p("kg/relations.tsv"), RelationRegistry::load)?;
        let store = component("kg", &p("kg/triples.tsv"), |path| TripleStore::load(path, &relations))?;
        let templates = component("kg", &p("kg/templates.json"), |path| KgTemplates::load(path, &relations))?;
        let favorites = component("kg", &p("kg/favorites.tsv"), |path| {
            let data = std::fs::read_to_string(path)?;
            KgPack::parse_favorites(&data, &text::file_label(path))
        })?;
        let kg = Arc::new(KgPack {
            store,
            relations,
            templates,
            favorites,
        });

        let bank = Arc::new(component("bank", &p("retrieval/bank.tsv"), ResponseBank::load)?);
        let funfacts = Arc::new(component("funfacts", &p("retrieval/funfacts.tsv"), FunFactIndex::load)?);
        let deny = p("retrieval/backstory_deny.txt");
        let backstory = Arc::new(component("backstory", &p("retrieval/backstory.tsv"), |path| {
            if !deny.exists() {
                return Err(pack_error("backstory", &deny, "file not found"));
            }
            BackstoryTable::load(path, &deny)
        })?);
        let filter = NewsFilter {
            blocked: config.rgs.news_blocked.clone(),
        };
        let news = Arc::new(component("news", &p("news/feed.xml"), |path| NewsFeed::load(path, &filter))?);
        let news_templates = component("news", &p("news/templates.toml"), |path| {
            let data = std::fs::read_to_string(path)?;
            toml::from_str(&data).map_err(|e| Error::Config(e.to_string()))
        })?;

        for t in config.dm.initiative_topics.iter().chain(&config.rgs.kg_topics).chain(&config.rgs.news_topics) {
            if !topics.contains(t) {
                return Err(pack_error("engine", &p("engine.toml"), format!("unknown topic `{t}`")));
            }
        }

        Ok(Pack {
            config,
            topics,
            segmenter,
            red,
            sentiment,
            stopwords,
            masked,
            da,
            linker,
            actions,
            grounding,
            fallback,
            red_responses,
            topic_intros,
            flows,
            callbacks,
            kg,
            bank,
            funfacts,
            backstory,
            news,
            news_templates,
        })
    }
}

/// `da/model.txt` when present, otherwise trained from `da/train.tsv`.
pub fn load_da_model(dir: &Path) -> Result<NgramModel<f64>> {
    let model_path = dir.join("da/model.txt");
    if model_path.exists() {
        return component("da", &model_path, NgramModel::load);
    }
    let corpus = component("da", &dir.join("da/train.tsv"), |path| {
        let data = std::fs::read_to_string(path)?;
        parse_da_corpus(&data, &text::file_label(path))
    })?;
    train_ngram(&corpus, TrainConfig::default())
}

fn load_linker(dir: &Path, config: &EngineConfig) -> Result<EntityLinker> {
    let gaz = component("gazetteer", &dir.join("el/gazetteer.tsv"), load_gazetteer)?;
    let freq = dir.join("el/common_freq.tsv");
    let exc = dir.join("el/common_exceptions.txt");
    if !exc.exists() {
        return Err(pack_error("common_phrases", &exc, "file not found"));
    }
    let common = component("common_phrases", &freq, |f| {
        CommonPhraseList::load(f, &exc, config.nlu.common_cutoff)
    })?;
    let mut linker = EntityLinker::new(GazetteerIndex::build(gaz), common);
    linker.config.path = config.nlu.el_path;
    linker.config.min_score = config.nlu.el_min_score;
    let lookup = dir.join("el/lookup.tsv");
    if lookup.exists() {
        linker.lookup = component("lookup", &lookup, LookupIndex::load)?;
    }
    let tagger = dir.join("el/tagger.txt");
    if tagger.exists() {
        linker.tagger = Some(component("tagger", &tagger, BioWeights::load)?);
    }
    let reranker = dir.join("el/reranker.txt");
    if reranker.exists() {
        linker.reranker = component("reranker", &reranker, Reranker::load)?;
    }
    Ok(linker)
}

fn load_flows(dir: &Path, callbacks: &CallbackRegistry, topics: &TopicRegistry) -> Result<Vec<Arc<FlowGraph>>> {
    if !dir.is_dir() {
        return Err(pack_error("flows", dir, "directory not found"));
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| pack_error("flows", dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut flows = Vec::new();
    let mut ids = BTreeSet::new();
    for path in paths {
        let g = component("flows", &path, |p| FlowGraph::load(p, callbacks))?;
        if !topics.contains(&g.topic) {
            return Err(pack_error("flows", &path, format!("unknown topic `{}`", g.topic)));
        }
        if !ids.insert(g.id.clone()) {
            return Err(pack_error("flows", &path, format!("duplicate flow id `{}`", g.id)));
        }
        flows.push(Arc::new(g));
    }
    Ok(flows)
}
