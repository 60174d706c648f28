use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::io;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde_json::{json, Value};

use super::atomic::ATOMIC_HEADER;
use super::prompt::{ChatMessage, ChatRole, HIGHLIGHT_CLOSE, HIGHLIGHT_OPEN, KEYWORD_PREFIX};
use super::GenerationConfig;
use crate::transport::{post_json, ProviderError};

pub const API_KEY_ENV: &str = "SCENE_FORGE_API_KEY";
pub const DEFAULT_CHAT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";

/// Anything that turns a message list into one completion. Implementations
/// are shared across worker threads.
pub trait ChatProvider: Send + Sync {
    fn send(&self, messages: &[ChatMessage], config: &GenerationConfig) -> Result<String, ProviderError>;
}

/// Remote chat-completions endpoint.
#[derive(Debug, Clone)]
pub struct HttpChatProvider {
    pub endpoint: String,
    api_key: String,
    pub timeout: Duration,
}

impl HttpChatProvider {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            timeout: Duration::from_secs(60),
        }
    }

    /// Reads the key from `SCENE_FORGE_API_KEY`.
    pub fn from_env(endpoint: impl Into<String>) -> Result<Self, ProviderError> {
        match std::env::var(API_KEY_ENV) {
            Ok(key) if !key.trim().is_empty() => Ok(Self::new(endpoint, key.trim())),
            _ => Err(ProviderError::Config(format!("{API_KEY_ENV} is not set"))),
        }
    }
}

impl ChatProvider for HttpChatProvider {
    fn send(&self, messages: &[ChatMessage], config: &GenerationConfig) -> Result<String, ProviderError> {
        let body = json!({
            "model": config.model_id,
            "messages": messages,
            "temperature": config.temperature,
            "max_tokens": config.max_tokens,
            "top_p": config.top_p,
            "frequency_penalty": config.frequency_penalty,
            "presence_penalty": config.presence_penalty,
        });
        let response = post_json(&self.endpoint, Some(&self.api_key), &body, self.timeout)?;
        response
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ProviderError::BadResponse("missing choices[0].message.content".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PromptKind {
    Scene,
    Atomic,
}

impl PromptKind {
    pub fn of(messages: &[ChatMessage]) -> Self {
        match messages.first() {
            Some(m) if m.role == ChatRole::System && m.content.starts_with(ATOMIC_HEADER) => {
                PromptKind::Atomic
            }
            _ => PromptKind::Scene,
        }
    }
}

/// Offline provider. Answers from fixtures keyed by prompt kind and either
/// the exact sentence or the keyword lemma; anything else gets a valid
/// completion synthesized from the sentence itself, so output depends only
/// on the messages.
#[derive(Debug, Default)]
pub struct FixtureChatProvider {
    fixtures: BTreeMap<(PromptKind, String), String>,
    calls: AtomicUsize,
}

impl FixtureChatProvider {
    pub fn new() -> Self {
        Self::default()
    }

    /// The fixtures bundled with the crate, keyed on the whiskey and crow
    /// example sentences. Other sentences with those keywords fall through
    /// to synthesis.
    pub fn bundled() -> Self {
        Self::new()
            .with_fixture(
                PromptKind::Scene,
                WHISKEY_SENTENCE,
                include_str!("../../assets/fixtures/scene/whiskey.txt"),
            )
            .with_fixture(
                PromptKind::Scene,
                CROW_SENTENCE,
                include_str!("../../assets/fixtures/scene/crow.txt"),
            )
            .with_fixture(
                PromptKind::Atomic,
                WHISKEY_SENTENCE,
                include_str!("../../assets/fixtures/atomic/whiskey.txt"),
            )
    }

    /// Loads `<dir>/scene/<key>.txt` and `<dir>/atomic/<key>.txt`, where
    /// the file stem is a keyword lemma.
    pub fn from_dir(dir: &Path) -> io::Result<Self> {
        Self::new().extend_from_dir(dir)
    }

    /// Adds the fixtures found under `dir`, replacing entries with the same key.
    pub fn extend_from_dir(self, dir: &Path) -> io::Result<Self> {
        let mut provider = self;
        for (kind, sub) in [(PromptKind::Scene, "scene"), (PromptKind::Atomic, "atomic")] {
            let path = dir.join(sub);
            if !path.is_dir() {
                continue;
            }
            for entry in fs::read_dir(&path)? {
                let path = entry?.path();
                if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                    continue;
                }
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    let text = fs::read_to_string(&path)?;
                    provider.fixtures.insert((kind, stem.to_string()), text);
                }
            }
        }
        Ok(provider)
    }

    /// `key` is either a plain sentence (highlight markers removed) or a
    /// lemma; a sentence match wins over a lemma match.
    pub fn with_fixture(mut self, kind: PromptKind, key: &str, completion: &str) -> Self {
        self.fixtures
            .insert((kind, key.trim().to_string()), completion.to_string());
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatProvider for FixtureChatProvider {
    fn send(&self, messages: &[ChatMessage], _config: &GenerationConfig) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let kind = PromptKind::of(messages);
        let (sentence, lemma) = target_usage(messages).ok_or_else(|| {
            ProviderError::BadResponse("no user message carrying a keyword line".into())
        })?;
        let plain = sentence.replace(HIGHLIGHT_OPEN, "").replace(HIGHLIGHT_CLOSE, "");
        for key in [plain, lemma.clone()] {
            if let Some(text) = self.fixtures.get(&(kind, key)) {
                return Ok(text.clone());
            }
        }
        Ok(match kind {
            PromptKind::Scene => synthesize_scene(&sentence, &lemma),
            PromptKind::Atomic => synthesize_atomic(&sentence),
        })
    }
}

const WHISKEY_SENTENCE: &str =
    "The man sat alone at the kitchen table, drinking whiskey late at night.";
const CROW_SENTENCE: &str = "Sometimes she would just stay by the window, feeding the crows while he was doing some paperwork, just like old times.";

/// Last user message of the form `<sentence>\n\nKeyword: <lemma>`.
fn target_usage(messages: &[ChatMessage]) -> Option<(String, String)> {
    messages
        .iter()
        .rev()
        .filter(|m| m.role == ChatRole::User)
        .find_map(|m| {
            let idx = m.content.rfind(KEYWORD_PREFIX)?;
            let lemma = m.content[idx + KEYWORD_PREFIX.len()..].trim().to_string();
            Some((m.content[..idx].trim().to_string(), lemma))
        })
}

/// Non-target words of the sentence, lowercased and stripped of punctuation.
fn context_tokens(sentence: &str) -> (Vec<String>, String) {
    let mut target = String::new();
    if let Some(start) = sentence.find(HIGHLIGHT_OPEN) {
        let rest = &sentence[start + HIGHLIGHT_OPEN.len()..];
        if let Some(end) = rest.find(HIGHLIGHT_CLOSE) {
            target = rest[..end].to_string();
        }
    }
    let without_target = if target.is_empty() {
        sentence.to_string()
    } else {
        sentence.replacen(&format!("{HIGHLIGHT_OPEN}{target}{HIGHLIGHT_CLOSE}"), " ", 1)
    };
    let tokens = without_target
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect();
    (tokens, target)
}

fn three_way(tokens: &[String], fallback: &str) -> [String; 3] {
    let mut parts: [Vec<&str>; 3] = Default::default();
    for (i, t) in tokens.iter().enumerate() {
        parts[i % 3].push(t);
    }
    parts.map(|p| {
        if p.is_empty() {
            fallback.to_string()
        } else {
            p.join(" ")
        }
    })
}

fn synthesize_scene(sentence: &str, lemma: &str) -> String {
    let (tokens, target) = context_tokens(sentence);
    let mention = if target.is_empty() { lemma } else { target.as_str() };
    let [events, properties, emotions] = three_way(&tokens, lemma);
    format!(
        "Contextual Scene\n\
* Events:\n\
ObjectX is present\n\n\
* Entities:\n\
· ObjectX ({mention}): Property: present\n\n\
* Setting:\n\
· Place: unspecified; Time: unspecified; Atmosphere: unspecified\n\n\
Expression Profile ({lemma} = ObjectX)\n\
· Engaged events: {events}\n\
· Generalizable properties: {properties}\n\
· Evoked emotions: {emotions}\n"
    )
}

fn synthesize_atomic(sentence: &str) -> String {
    let (tokens, _) = context_tokens(sentence);
    let [events, properties, emotions] = three_way(&tokens, "N/A");
    format!(
        "Engaged Events:\n- Causes: {events}\n\n\
Generalizable Properties:\n- HasProperty: {properties}\n- Desires: N/A\n- NotDesires: N/A\n\n\
Evoked Emotions:\n- xReact: {emotions}\n"
    )
}

/// Replays a fixed queue of responses and records every request.
#[derive(Debug, Default)]
pub struct ScriptedChatProvider {
    script: Mutex<VecDeque<Result<String, ProviderError>>>,
    requests: Mutex<Vec<Vec<ChatMessage>>>,
}

impl ScriptedChatProvider {
    pub fn new<I>(responses: I) -> Self
    where
        I: IntoIterator<Item = Result<String, ProviderError>>,
    {
        Self {
            script: Mutex::new(responses.into_iter().collect()),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn texts<I, S>(texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(texts.into_iter().map(|t| Ok(t.into())))
    }

    pub fn requests(&self) -> Vec<Vec<ChatMessage>> {
        self.requests.lock().expect("requests lock").clone()
    }

    pub fn calls(&self) -> usize {
        self.requests.lock().expect("requests lock").len()
    }
}

impl ChatProvider for ScriptedChatProvider {
    fn send(&self, messages: &[ChatMessage], _config: &GenerationConfig) -> Result<String, ProviderError> {
        self.requests
            .lock()
            .expect("requests lock")
            .push(messages.to_vec());
        self.script
            .lock()
            .expect("script lock")
            .pop_front()
            .unwrap_or_else(|| Err(ProviderError::BadResponse("script exhausted".into())))
    }
}
