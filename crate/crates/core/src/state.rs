//! Cross-turn conversation state and its persistence.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use base64::Engine as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dm::constraints::ResponseConstraints;
use crate::error::{Error, Result};
use crate::text;
use crate::types::{LinkedEntity, SystemAction, SystemResponse, TopicId, Turn};

pub const STATE_SCHEMA: &str = "parley.dialogue-state";
pub const STATE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicState {
    pub current_topic: TopicId,
    pub topic_history: Vec<TopicId>,
    pub turn_distribution: BTreeMap<TopicId, u64>,
    #[serde(default)]
    pub user_entities: Vec<LinkedEntity>,
    #[serde(default)]
    pub system_entities: Vec<String>,
}

impl Default for TopicState {
    fn default() -> Self {
        TopicState {
            current_topic: TopicId::introduction(),
            topic_history: vec![TopicId::introduction()],
            turn_distribution: BTreeMap::new(),
            user_entities: Vec::new(),
            system_entities: Vec::new(),
        }
    }
}

impl TopicState {
    /// Assigns one turn to `topic`, switching to it if needed.
    pub fn record_turn(&mut self, topic: &TopicId) {
        if &self.current_topic != topic {
            self.current_topic = topic.clone();
        }
        if self.topic_history.last() != Some(topic) {
            self.topic_history.push(topic.clone());
        }
        *self.turn_distribution.entry(topic.clone()).or_insert(0) += 1;
    }

    pub fn turns(&self) -> u64 {
        self.turn_distribution.values().sum()
    }

    pub fn visited(&self, topic: &TopicId) -> bool {
        self.turn_distribution.contains_key(topic)
    }

    pub fn check(&self, turn_count: usize) -> std::result::Result<(), String> {
        if self.turns() != turn_count as u64 {
            return Err(format!(
                "turn distribution sums to {} but {turn_count} turns were taken",
                self.turns()
            ));
        }
        if self.topic_history.last() != Some(&self.current_topic) {
            return Err("current topic is not the last history entry".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub turn: Turn,
    pub response: SystemResponse,
    /// Uris linked in the user turn.
    #[serde(default)]
    pub entities: Vec<String>,
}

/// Dialogue-manager bookkeeping that is not part of the topic state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DmMemory {
    pub consecutive_system_initiatives: u32,
    pub converse_count: u64,
    #[serde(default)]
    pub last_fallback_template: Option<String>,
    #[serde(default)]
    pub fallback_count: u64,
}

/// Opaque RG-private bytes, stored base64-encoded.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Blob(pub Vec<u8>);

impl Serialize for Blob {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&base64::engine::general_purpose::STANDARD.encode(&self.0))
    }
}

impl<'de> Deserialize<'de> for Blob {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        base64::engine::general_purpose::STANDARD
            .decode(s)
            .map(Blob)
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueState {
    pub schema: String,
    pub version: u32,
    pub conversation_id: String,
    pub seed: u64,
    pub history: Vec<Exchange>,
    pub topic_state: TopicState,
    pub rg_state: BTreeMap<String, Blob>,
    pub action_history: Vec<SystemAction>,
    pub constraint_history: Vec<ResponseConstraints>,
    #[serde(default)]
    pub dm: DmMemory,
}

impl DialogueState {
    pub fn new(conversation_id: impl Into<String>, seed: u64) -> Self {
        DialogueState {
            schema: STATE_SCHEMA.to_string(),
            version: STATE_VERSION,
            conversation_id: conversation_id.into(),
            seed,
            history: Vec::new(),
            topic_state: TopicState::default(),
            rg_state: BTreeMap::new(),
            action_history: Vec::new(),
            constraint_history: Vec::new(),
            dm: DmMemory::default(),
        }
    }

    pub fn turn_index(&self) -> u64 {
        self.history.len() as u64
    }

    pub fn last_response(&self) -> Option<&SystemResponse> {
        self.history.last().map(|e| &e.response)
    }

    pub fn rg_blob(&self, rg: &str) -> Option<&[u8]> {
        self.rg_state.get(rg).map(|b| b.0.as_slice())
    }

    pub fn set_rg_blob(&mut self, rg: &str, bytes: Vec<u8>) {
        self.rg_state.insert(rg.to_string(), Blob(bytes));
    }

    /// Bodies of the most recent system turns, newest last.
    pub fn recent_bodies(&self, n: usize) -> Vec<&str> {
        let skip = self.history.len().saturating_sub(n);
        self.history[skip..].iter().map(|e| e.response.body.as_str()).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("state serializes")
    }

    pub fn from_bytes(id: &str, bytes: &[u8]) -> Result<Self> {
        let decode = |reason: String| Error::Decode {
            id: id.to_string(),
            reason,
        };
        let state: DialogueState = serde_json::from_slice(bytes).map_err(|e| decode(e.to_string()))?;
        if state.schema != STATE_SCHEMA {
            return Err(decode(format!("unexpected schema `{}`", state.schema)));
        }
        if state.version != STATE_VERSION {
            return Err(decode(format!("unsupported version {}", state.version)));
        }
        Ok(state)
    }
}

/// Per-turn RNG derived from (seed, conversation, turn).
pub fn turn_seed(seed: u64, conversation_id: &str, turn_index: u64) -> u64 {
    text::stable_hash(&[&seed.to_le_bytes(), conversation_id.as_bytes(), &turn_index.to_le_bytes()])
}

pub fn seeded_rng(seed: u64, stream: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(text::stable_hash(&[&seed.to_le_bytes(), stream.as_bytes()]))
}

pub trait StateStore: Send + Sync {
    fn save(&self, state: &DialogueState) -> Result<()>;
    fn load(&self, conversation_id: &str) -> Result<Option<DialogueState>>;
}

/// Keeps serialized documents, so it exercises the same codec as the file store.
#[derive(Debug, Default)]
pub struct MemoryStore {
    docs: Mutex<HashMap<String, Vec<u8>>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put_raw(&self, id: &str, bytes: Vec<u8>) {
        self.docs.lock().expect("store lock").insert(id.to_string(), bytes);
    }
}

impl StateStore for MemoryStore {
    fn save(&self, state: &DialogueState) -> Result<()> {
        self.docs
            .lock()
            .map_err(|_| Error::Storage("memory store lock poisoned".into()))?
            .insert(state.conversation_id.clone(), state.to_bytes());
        Ok(())
    }

    fn load(&self, id: &str) -> Result<Option<DialogueState>> {
        let docs = self
            .docs
            .lock()
            .map_err(|_| Error::Storage("memory store lock poisoned".into()))?;
        docs.get(id).map(|b| DialogueState::from_bytes(id, b)).transpose()
    }
}

/// One JSON document per conversation under a directory. Ids are
/// percent-encoded into file names; writes go through a temp file and rename.
#[derive(Debug, Clone)]
pub struct FileStore {
    dir: PathBuf,
}

impl FileStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| Error::Storage(format!("{}: {e}", dir.display())))?;
        Ok(FileStore { dir })
    }

    pub fn path_for(&self, id: &str) -> PathBuf {
        let mut name = String::with_capacity(id.len());
        for b in id.bytes() {
            if b.is_ascii_alphanumeric() || b == b'-' || b == b'_' {
                name.push(b as char);
            } else {
                name.push_str(&format!("%{b:02X}"));
            }
        }
        self.dir.join(format!("{name}.json"))
    }
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl StateStore for FileStore {
    fn save(&self, state: &DialogueState) -> Result<()> {
        let path = self.path_for(&state.conversation_id);
        let tmp = path.with_extension(format!(
            "tmp{}.{}",
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let storage = |e: std::io::Error| Error::Storage(format!("{}: {e}", path.display()));
        fs::write(&tmp, state.to_bytes()).map_err(storage)?;
        fs::rename(&tmp, &path).map_err(storage)
    }

    fn load(&self, id: &str) -> Result<Option<DialogueState>> {
        let path = self.path_for(id);
        match fs::read(&path) {
            Ok(bytes) => DialogueState::from_bytes(id, &bytes).map(Some),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::Storage(format!("{}: {e}", path.display()))),
        }
    }
}

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        chrono::Utc::now().timestamp_millis().max(0) as u64
    }
}

/// Deterministic clock that advances by a fixed step on every read.
#[derive(Debug)]
pub struct FixedClock {
    now: AtomicU64,
    step: u64,
}

impl FixedClock {
    pub fn new(start: u64, step: u64) -> Self {
        FixedClock {
            now: AtomicU64::new(start),
            step,
        }
    }
}

impl Clock for FixedClock {
    fn now_ms(&self) -> u64 {
        self.now.fetch_add(self.step, Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue_acts::DaLabel;
    use crate::types::{EntitySource, EntityType, Span};
    use proptest::prelude::*;

    fn arb_state() -> impl Strategy<Value = DialogueState> {
        (
            "[a-z0-9/ .-]{1,12}",
            any::<u64>(),
            proptest::collection::vec(("[a-z ]{0,20}", "[a-z ]{1,20}", proptest::option::of("[a-z]{1,8}")), 0..5),
            proptest::collection::btree_map("[a-z_:]{1,10}", proptest::collection::vec(any::<u8>(), 0..16), 0..4),
            proptest::collection::vec(0usize..10, 0..5),
            -1.0e6f64..1.0e6,
        )
            .prop_map(|(id, seed, turns, blobs, actions, score)| {
                let mut s = DialogueState::new(id.clone(), seed);
                for (i, (user, body, ground)) in turns.into_iter().enumerate() {
                    let topic = TopicId::new(if i % 2 == 0 { "movies" } else { "music" });
                    s.topic_state.record_turn(&topic);
                    s.history.push(Exchange {
                        turn: Turn {
                            conversation_id: id.clone(),
                            turn_index: i as u64,
                            user_text: user,
                            timestamp: 1000 + i as u64,
                        },
                        response: SystemResponse {
                            ground,
                            opener: None,
                            body,
                            handoff: None,
                            source_rg: "kg".into(),
                            ssml: None,
                        },
                        entities: vec![format!("E{i}")],
                    });
                }
                s.topic_state.user_entities.push(LinkedEntity {
                    span: Span::new(0, 1),
                    surface: "x".into(),
                    uri: "X".into(),
                    entity_type: EntityType::Song,
                    score,
                    source: EntitySource::Trained,
                    gender: None,
                    summary: None,
                    popularity: 3,
                });
                for (k, v) in blobs {
                    s.set_rg_blob(&k, v);
                }
                s.action_history = actions.into_iter().map(|i| SystemAction::ALL[i]).collect();
                let mut c = ResponseConstraints::topic_only(TopicId::new("movies"));
                c.dialogue_act = Some(DaLabel::OpinionQuestion);
                s.constraint_history.push(c);
                s
            })
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(state in arb_state()) {
            let back = DialogueState::from_bytes(&state.conversation_id, &state.to_bytes()).unwrap();
            prop_assert_eq!(&back, &state);
            let dir = tempfile::tempdir().unwrap();
            let store = FileStore::open(dir.path()).unwrap();
            store.save(&state).unwrap();
            prop_assert_eq!(store.load(&state.conversation_id).unwrap(), Some(state));
        }
    }

    #[test]
    fn new_state_starts_in_introduction() {
        let s = DialogueState::new("a", 42);
        assert_eq!(s.topic_state.current_topic, TopicId::introduction());
        assert_eq!(s.topic_state.topic_history, vec![TopicId::introduction()]);
        assert_eq!(s.turn_index(), 0);
        assert_eq!(s, DialogueState::new("a", 42));
    }

    #[test]
    fn unknown_id_absent() {
        assert!(MemoryStore::new().load("nope").unwrap().is_none());
        let dir = tempfile::tempdir().unwrap();
        assert!(FileStore::open(dir.path()).unwrap().load("nope").unwrap().is_none());
    }

    #[test]
    fn truncated_record_is_decode_error() {
        let store = MemoryStore::new();
        let bytes = DialogueState::new("c1", 1).to_bytes();
        store.put_raw("c1", bytes[..bytes.len() / 2].to_vec());
        match store.load("c1") {
            Err(Error::Decode { id, .. }) => assert_eq!(id, "c1"),
            other => panic!("expected decode error, got {other:?}"),
        }
    }

    #[test]
    fn two_ids_both_retrievable() {
        let dir = tempfile::tempdir().unwrap();
        let store = std::sync::Arc::new(FileStore::open(dir.path()).unwrap());
        let handles: Vec<_> = ["alpha", "beta"]
            .into_iter()
            .map(|id| {
                let store = store.clone();
                std::thread::spawn(move || store.save(&DialogueState::new(id, 9)).unwrap())
            })
            .collect();
        handles.into_iter().for_each(|h| h.join().unwrap());
        assert!(store.load("alpha").unwrap().is_some());
        assert!(store.load("beta").unwrap().is_some());
    }

    #[test]
    fn file_names_are_escaped() {
        let store = FileStore::open(tempfile::tempdir().unwrap().path()).unwrap();
        let p = store.path_for("../x y");
        assert_eq!(p.file_name().unwrap(), "%2E%2E%2Fx%20y.json");
    }

    #[test]
    fn topic_state_invariants() {
        let mut t = TopicState::default();
        t.record_turn(&TopicId::new("sports"));
        t.record_turn(&TopicId::new("sports"));
        t.record_turn(&TopicId::new("movies"));
        assert_eq!(t.topic_history.len(), 3);
        assert!(t.check(3).is_ok());
        assert!(t.check(2).is_err());
    }
}
