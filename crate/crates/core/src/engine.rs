//! The assembled dialogue engine: NLU, the DM pipeline and the registered
//! response generators, plus per-conversation serialization and a trace log.

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use crate::dm::trace::{NluSummary, RemovedEntry};
use crate::dm::{
    assemble, choose_initiative, collect_outputs, decide_action, fallback, filter_pool, generate_constraints, ground,
    ActionCues, FallbackTemplates, GroundingTemplates, InitiativeChoice, ProfanityFilter, Ranker, RepetitionFilter,
    ResponseConstraints, RgRegistry, SsmlConfig, TurnTrace,
};
use crate::error::{Error, Result};
use crate::flow::FlowRg;
use crate::kg::KgRg;
use crate::nlu::{NluBundle, NluPipeline, PhraseChunker, RuleSegmenter};
use crate::pack::{EngineConfig, Pack};
use crate::retrieval::{BackstoryRg, CenteringRg, FunFactRg, NewsFeed, NewsRg};
use crate::rg::{Initiative, ResponseGenerator, RgContext, TurnOutcome};
use crate::state::{seeded_rng, turn_seed, Clock, DialogueState, Exchange, MemoryStore, StateStore, SystemClock};
use crate::system_rgs::{RedRg, SystemRg, TopicIntroRg};
use crate::types::{ResponseCandidate, SystemAction, SystemResponse, TopicId, Turn};

pub const FALLBACK_RG: &str = "fallback";

/// What one call to [`Engine::take_turn`] produces.
#[derive(Debug, Clone)]
pub struct TurnResult {
    pub response: SystemResponse,
    pub state: DialogueState,
    pub trace: TurnTrace,
}

pub struct Engine {
    config: EngineConfig,
    nlu: NluPipeline,
    cues: ActionCues,
    registry: RgRegistry,
    rgs: BTreeMap<String, Arc<dyn ResponseGenerator>>,
    ranker: Ranker,
    profanity: ProfanityFilter,
    repetition: RepetitionFilter,
    grounding: GroundingTemplates,
    fallback: FallbackTemplates,
    ssml: SsmlConfig,
    news: Arc<NewsFeed>,
    store: Arc<dyn StateStore>,
    clock: Arc<dyn Clock>,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    traces: Mutex<HashMap<String, Vec<TurnTrace>>>,
}

impl Engine {
    /// Loads the pack at `dir` with an in-memory store and the system clock.
    pub fn load(dir: &Path) -> Result<Engine> {
        Self::from_pack(Pack::load(dir)?, Arc::new(MemoryStore::new()), Arc::new(SystemClock))
    }

    pub fn from_pack(pack: Pack, store: Arc<dyn StateStore>, clock: Arc<dyn Clock>) -> Result<Engine> {
        let cfg = pack.config;
        let profanity = ProfanityFilter::new(pack.red.profanity_words().map(String::from), pack.masked.clone());
        let repetition = RepetitionFilter::new(
            cfg.dm.repetition_threshold,
            cfg.dm.repetition_window,
            pack.stopwords.iter().cloned(),
        );
        let nlu = NluPipeline {
            segmenter: Box::new(RuleSegmenter { model: pack.segmenter }),
            red: pack.red,
            sentiment: pack.sentiment,
            chunker: PhraseChunker::new(pack.stopwords),
            da: pack.da,
            linker: pack.linker,
            topics: pack.topics.clone(),
        };
        let mut engine = Engine {
            ranker: Ranker::new(cfg.dm.ranker_preference.clone()),
            cues: pack.actions.cues.clone(),
            registry: RgRegistry::new(),
            rgs: BTreeMap::new(),
            profanity,
            repetition,
            grounding: pack.grounding,
            fallback: pack.fallback,
            ssml: cfg.ssml.clone(),
            news: pack.news.clone(),
            store,
            clock,
            locks: Mutex::new(HashMap::new()),
            traces: Mutex::new(HashMap::new()),
            nlu,
            config: cfg,
        };
        let c = &engine.config;
        let mut rgs: Vec<Arc<dyn ResponseGenerator>> = Vec::new();
        for g in &pack.flows {
            rgs.push(Arc::new(FlowRg::new(g.clone(), pack.callbacks.clone())));
        }
        rgs.push(Arc::new(KgRg::new(pack.kg.clone(), c.rgs.kg_topics.clone())));
        rgs.push(Arc::new(CenteringRg::new(pack.bank.clone())));
        rgs.push(Arc::new(FunFactRg::new(pack.funfacts.clone())));
        rgs.push(Arc::new(BackstoryRg::new(pack.backstory.clone())));
        rgs.push(Arc::new(NewsRg::new(
            pack.news.clone(),
            pack.news_templates.clone(),
            c.rgs.news_topics.clone(),
        )));
        rgs.push(Arc::new(SystemRg::new(&pack.actions, c.dm.initiative_topics.clone())));
        rgs.push(Arc::new(RedRg::new(pack.red_responses)));
        rgs.push(Arc::new(TopicIntroRg::new(pack.topic_intros)));
        for rg in rgs {
            engine.register_rg(rg)?;
        }
        Ok(engine)
    }

    /// Adds a response generator. Its id must be unique.
    pub fn register_rg(&mut self, rg: Arc<dyn ResponseGenerator>) -> Result<()> {
        let id = rg.id().to_string();
        if id == FALLBACK_RG {
            return Err(Error::Config(format!("`{FALLBACK_RG}` is a reserved response generator id")));
        }
        self.registry.register(&id, rg.registration())?;
        self.rgs.insert(id, rg);
        Ok(())
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn registry(&self) -> &RgRegistry {
        &self.registry
    }

    pub fn news(&self) -> &Arc<NewsFeed> {
        &self.news
    }

    pub fn nlu(&self) -> &NluPipeline {
        &self.nlu
    }

    pub fn new_conversation(&self, conversation_id: &str) -> DialogueState {
        DialogueState::new(conversation_id, self.config.seed)
    }

    /// Runs one turn. Never fails: any internal failure degrades to a
    /// fallback reply.
    pub fn take_turn(&self, turn: &Turn, state: &DialogueState) -> TurnResult {
        self.take_turn_streaming(turn, state, &mut |_| {})
    }

    /// Like [`Engine::take_turn`], handing the ground to `on_ground` as soon
    /// as it is known, before any response generator runs.
    pub fn take_turn_streaming(&self, turn: &Turn, state: &DialogueState, on_ground: &mut dyn FnMut(&str)) -> TurnResult {
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(|| self.run_turn(turn, state, on_ground)));
        let mut result = match out {
            Ok(r) => r,
            Err(_) => {
                log::error!("turn {} of `{}` panicked; answering with a fallback", turn.turn_index, turn.conversation_id);
                self.emergency(turn, state)
            }
        };
        result.trace.latency_ms = start.elapsed().as_millis() as u64;
        if let Err(e) = result.state.topic_state.check(result.state.history.len()) {
            log::error!("topic state invariant broken after turn {}: {e}", turn.turn_index);
            debug_assert!(false, "topic state invariant: {e}");
        }
        result
    }

    fn run_turn(&self, turn: &Turn, state: &DialogueState, on_ground: &mut dyn FnMut(&str)) -> TurnResult {
        let seed = turn_seed(state.seed, &turn.conversation_id, turn.turn_index);
        let nlu = self.nlu.run(&turn.user_text, state);
        let prev_topic = state.topic_state.current_topic.clone();
        let mut action = decide_action(&nlu, turn.turn_index, &self.cues);

        let ground_text = if matches!(action, SystemAction::Converse | SystemAction::TopicChange) {
            ground(nlu.primary_da(), &nlu.entities, nlu.sentiment, &self.grounding, turn.turn_index)
        } else {
            None
        };
        if let Some(g) = &ground_text {
            on_ground(g);
        }

        // topic and initiative
        let signal = nlu
            .topic_signal
            .as_ref()
            .map(|s| self.nlu.topics.top_level(&s.topic))
            .filter(|t| *t != TopicId::introduction());
        let mut initiative = Initiative::System;
        let mut choice: Option<InitiativeChoice> = None;
        let mut topic = prev_topic.clone();
        match action {
            SystemAction::Converse => {
                if let Some(t) = signal.clone() {
                    initiative = Initiative::User;
                    if t != prev_topic {
                        action = SystemAction::TopicChange;
                    }
                    topic = t;
                } else if !self.registry.has_topical(SystemAction::Converse, &prev_topic) {
                    // lost track of the topic
                    action = SystemAction::TopicChange;
                }
            }
            SystemAction::TopicChange => {
                if let Some(t) = signal.clone().filter(|t| *t != prev_topic) {
                    initiative = Initiative::User;
                    topic = t;
                }
            }
            _ => {}
        }
        if action == SystemAction::TopicChange && initiative == Initiative::System {
            let c = choose_initiative(state, &self.config.dm.initiative_topics, self.config.dm.initiative_limit);
            if let InitiativeChoice::SystemTopic(t) = &c {
                topic = t.clone();
            }
            choice = Some(c);
        }
        let user_prompt = choice == Some(InitiativeChoice::UserPrompt);

        let constraints = match action {
            SystemAction::Converse | SystemAction::TopicChange => generate_constraints(
                action,
                topic.clone(),
                &prev_topic,
                &nlu.entity_uris(),
                state.dm.converse_count,
            ),
            _ => ResponseConstraints::topic_only(topic.clone()),
        };

        // dispatch and pool
        let dispatched = if user_prompt {
            Vec::new()
        } else {
            self.registry.dispatch(action, &topic)
        };
        let selected: Vec<Arc<dyn ResponseGenerator>> =
            dispatched.iter().filter_map(|id| self.rgs.get(id).cloned()).collect();
        let ctx = Arc::new(RgContext {
            turn: turn.clone(),
            action,
            constraints: constraints.clone(),
            nlu: nlu.clone(),
            state: state.clone(),
            topics: self.nlu.topics.clone(),
            initiative,
            turn_seed: seed,
        });
        let collected = collect_outputs(&selected, ctx, self.config.dm.budget());

        let mut raw: Vec<ResponseCandidate> = Vec::new();
        let mut handover: Option<(String, String)> = None;
        for (id, out) in &collected.outputs {
            for c in &out.candidates {
                if c.rg != *id || !self.registry.permits(id, action, &topic) {
                    log::warn!("dropping candidate attributed to `{}` from `{id}`: outside its registration", c.rg);
                    continue;
                }
                raw.push(c.clone());
            }
            if let Some(h) = out.handover_opener.as_ref().filter(|h| !h.trim().is_empty()) {
                let prefer = state.last_response().is_some_and(|r| r.source_rg == *id);
                if handover.is_none() || prefer {
                    handover = Some((id.clone(), h.clone()));
                }
            }
        }
        let pool_raw = raw.len();
        let previous = if action == SystemAction::PerformRepeat {
            Vec::new()
        } else {
            state.recent_bodies(self.config.dm.repetition_window)
        };
        let pool = filter_pool(raw, &self.profanity, &self.repetition, &previous);

        let mut rank_rng = seeded_rng(seed, "ranker");
        let ranked = if user_prompt {
            Err(Error::EmptyPool)
        } else {
            self.ranker.rank(&pool.candidates, &constraints, &mut rank_rng)
        };

        let mut new_state = state.clone();
        let mut fallback_id = None;
        let mut fallback_reason = None;
        let mut topic_after = topic.clone();
        let mut system_initiated = choice.as_ref().is_some_and(|c| matches!(c, InitiativeChoice::SystemTopic(_)));
        let (response, chosen, tier) = match ranked {
            Ok((idx, tier)) => {
                let cand = &pool.candidates[idx];
                let opener = handover.as_ref().filter(|(id, _)| *id != cand.rg).map(|(_, h)| h.as_str());
                let response = assemble(ground_text.as_deref(), cand, opener, &self.ssml);
                (response, Some(cand.clone()), Some(tier))
            }
            Err(_) => {
                let c = match &choice {
                    Some(c) => c.clone(),
                    None => {
                        let c = choose_initiative(state, &self.config.dm.initiative_topics, self.config.dm.initiative_limit);
                        choice = Some(c.clone());
                        c
                    }
                };
                let mut rng = seeded_rng(seed, FALLBACK_RG);
                let fb = fallback(&c, &self.fallback, state.dm.last_fallback_template.as_deref(), &mut rng);
                fallback_reason = Some(
                    if user_prompt {
                        "user_prompt"
                    } else if dispatched.is_empty() {
                        "no_rg"
                    } else if pool_raw == 0 {
                        "no_candidates"
                    } else {
                        "all_filtered"
                    }
                    .to_string(),
                );
                system_initiated = fb.topic.is_some();
                if let Some(t) = &fb.topic {
                    topic_after = t.clone();
                }
                fallback_id = Some(fb.template_id.clone());
                new_state.dm.last_fallback_template = Some(fb.template_id);
                new_state.dm.fallback_count += 1;
                let cand = ResponseCandidate::new(FALLBACK_RG, topic_after.clone(), fb.body);
                let opener = handover.as_ref().map(|(_, h)| h.as_str());
                (assemble(ground_text.as_deref(), &cand, opener, &self.ssml), None, None)
            }
        };

        // rg state
        let chosen_rg = chosen.as_ref().map(|c| c.rg.clone());
        if let Some(c) = &chosen {
            if let Some(bytes) = &c.rg_state {
                new_state.set_rg_blob(&c.rg, bytes.clone());
            }
        }
        for (id, out) in &collected.outputs {
            if chosen_rg.as_deref() != Some(id) {
                if let Some(bytes) = &out.state_if_unchosen {
                    new_state.set_rg_blob(id, bytes.clone());
                }
            }
        }
        let outcome = TurnOutcome {
            turn_index: turn.turn_index,
            action,
            topic: topic_after.clone(),
            chosen_rg: chosen_rg.clone().or_else(|| Some(FALLBACK_RG.to_string())),
        };
        for (id, rg) in &self.rgs {
            let Some(blob) = new_state.rg_blob(id).map(<[u8]>::to_vec) else {
                continue;
            };
            if let Some(next) = rg.observe(&blob, &outcome) {
                new_state.set_rg_blob(id, next);
            }
        }

        // dialogue memory
        if action == SystemAction::Converse {
            new_state.dm.converse_count += 1;
        }
        if system_initiated {
            new_state.dm.consecutive_system_initiatives += 1;
        } else if choice == Some(InitiativeChoice::UserPrompt) || (initiative == Initiative::User && topic != prev_topic) {
            new_state.dm.consecutive_system_initiatives = 0;
        }
        new_state.topic_state.record_turn(&topic_after);
        new_state.topic_state.user_entities.extend(nlu.entities.iter().cloned());
        if let Some(c) = &chosen {
            new_state.topic_state.system_entities.extend(c.entities.iter().cloned());
        }
        new_state.action_history.push(action);
        new_state.constraint_history.push(constraints.clone());
        new_state.history.push(Exchange {
            turn: turn.clone(),
            response: response.clone(),
            entities: nlu.entity_uris(),
        });

        let trace = TurnTrace {
            conversation_id: turn.conversation_id.clone(),
            turn_index: turn.turn_index,
            user_text: turn.user_text.clone(),
            nlu: summarize(&nlu),
            action,
            constraints,
            initiative: choice,
            topic_before: prev_topic,
            topic_after,
            dispatched,
            rg_status: collected.status,
            rg_latency_ms: collected.latency_ms,
            pool_raw,
            pool_size: pool.candidates.len(),
            removed: pool
                .removed
                .iter()
                .map(|r| RemovedEntry {
                    rg: r.candidate.rg.clone(),
                    reason: r.reason,
                    text: r.candidate.text(),
                })
                .collect(),
            masked_bypass: pool.masked_bypass,
            chosen_rg,
            tier,
            fallback: fallback_id,
            fallback_reason,
            handover_opener: handover.map(|(_, h)| h),
            ground: ground_text,
            response: response.text(),
            latency_ms: 0,
        };
        TurnResult {
            response,
            state: new_state,
            trace,
        }
    }

    fn emergency(&self, turn: &Turn, state: &DialogueState) -> TurnResult {
        let body = self.fallback.prompt.first().cloned().unwrap_or_else(|| "What would you like to talk about?".into());
        let response = SystemResponse {
            ground: None,
            opener: None,
            body,
            handoff: None,
            source_rg: FALLBACK_RG.into(),
            ssml: None,
        };
        let mut s = state.clone();
        let topic = s.topic_state.current_topic.clone();
        s.topic_state.record_turn(&topic);
        s.action_history.push(SystemAction::Converse);
        s.constraint_history.push(ResponseConstraints::topic_only(topic.clone()));
        s.history.push(Exchange {
            turn: turn.clone(),
            response: response.clone(),
            entities: Vec::new(),
        });
        let trace = TurnTrace {
            conversation_id: turn.conversation_id.clone(),
            turn_index: turn.turn_index,
            user_text: turn.user_text.clone(),
            nlu: summarize(&NluBundle::empty()),
            action: SystemAction::Converse,
            constraints: ResponseConstraints::topic_only(topic.clone()),
            initiative: None,
            topic_before: topic.clone(),
            topic_after: topic,
            dispatched: Vec::new(),
            rg_status: BTreeMap::new(),
            rg_latency_ms: BTreeMap::new(),
            pool_raw: 0,
            pool_size: 0,
            removed: Vec::new(),
            masked_bypass: Vec::new(),
            chosen_rg: None,
            tier: None,
            fallback: Some("prompt/0".into()),
            fallback_reason: Some("internal_error".into()),
            handover_opener: None,
            ground: None,
            response: response.text(),
            latency_ms: 0,
        };
        TurnResult {
            response,
            state: s,
            trace,
        }
    }

    fn lock_for(&self, conversation_id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(conversation_id.to_string()).or_default().clone()
    }

    /// Loads the conversation, runs one turn, saves it and records the
    /// trace. Turns of one conversation run one at a time; different
    /// conversations run in parallel.
    pub fn converse(&self, conversation_id: &str, user_text: &str, on_ground: &mut dyn FnMut(&str)) -> Result<TurnResult> {
        let lock = self.lock_for(conversation_id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let state = self
            .store
            .load(conversation_id)?
            .unwrap_or_else(|| self.new_conversation(conversation_id));
        let turn = Turn {
            conversation_id: conversation_id.to_string(),
            turn_index: state.turn_index(),
            user_text: user_text.to_lowercase(),
            timestamp: self.clock.now_ms(),
        };
        let result = self.take_turn_streaming(&turn, &state, on_ground);
        self.store.save(&result.state)?;
        self.traces
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .entry(conversation_id.to_string())
            .or_default()
            .push(result.trace.clone());
        Ok(result)
    }

    /// Traces recorded for a conversation since the engine started.
    pub fn traces(&self, conversation_id: &str) -> Option<Vec<TurnTrace>> {
        self.traces
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(conversation_id)
            .cloned()
    }

    pub fn reset(&self, conversation_id: &str) -> Result<()> {
        self.reset_with_seed(conversation_id, self.config.seed)
    }

    /// Starts the conversation over with its own seed.
    pub fn reset_with_seed(&self, conversation_id: &str, seed: u64) -> Result<()> {
        self.store.save(&DialogueState::new(conversation_id, seed))?;
        self.traces.lock().unwrap_or_else(|e| e.into_inner()).remove(conversation_id);
        Ok(())
    }

    pub fn store(&self) -> &Arc<dyn StateStore> {
        &self.store
    }
}

fn summarize(nlu: &NluBundle) -> NluSummary {
    NluSummary {
        das: nlu.das(),
        entities: nlu.entity_uris(),
        sentiment: nlu.sentiment,
        red_flag: nlu.red_flag.clone(),
        topic_signal: nlu.topic_signal.clone(),
        degraded: nlu.degraded.clone(),
    }
}

/// Contract check over a trace: the chosen RG was allowed to answer.
pub fn contract_holds(registry: &RgRegistry, trace: &TurnTrace) -> bool {
    match &trace.chosen_rg {
        Some(rg) => registry.permits(rg, trace.action, &trace.constraints.topic),
        None => trace.fallback.is_some(),
    }
}
