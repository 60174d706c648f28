//! Prompting, provider calls, repair and caching for scene and ATOMIC
//! profiles.

mod atomic;
mod cache;
mod prompt;
mod provider;

use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use atomic::{parse_atomic, AtomicProfile, AtomicRelation};
pub use cache::ResponseCache;
pub use prompt::{
    atomic_instruction, build_atomic_prompt, build_scene_prompt, default_examples, user_message,
    ChatMessage, ChatRole, FewShotExample, PromptBundle, HIGHLIGHT_CLOSE, HIGHLIGHT_OPEN,
    KEYWORD_PREFIX, SCENE_INSTRUCTION,
};
pub use provider::{
    ChatProvider, FixtureChatProvider, HttpChatProvider, PromptKind, ScriptedChatProvider,
    API_KEY_ENV, DEFAULT_CHAT_ENDPOINT,
};

use crate::scene::{parse_scene_with_warnings, validate_scene, Provenance, SceneRepresentation, UsageInstance};
use crate::transport::ProviderError;

/// Transport failures are retried this many times before giving up.
pub const MAX_TRANSPORT_RETRIES: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub top_p: f64,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
    pub max_repair_attempts: u32,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            model_id: "gpt-4o-mini".into(),
            temperature: 0.2,
            max_tokens: 512,
            top_p: 1.0,
            frequency_penalty: 0.0,
            presence_penalty: 0.0,
            max_repair_attempts: 2,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), GenerationError> {
        // NaN fails too.
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GenerationError::InvalidConfig(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GenerationError::InvalidConfig("max_tokens must be > 0".into()));
        }
        if self.model_id.trim().is_empty() {
            return Err(GenerationError::InvalidConfig("model_id is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GenerationError {
    #[error("requested {requested} few-shot examples but only {available} are available")]
    NotEnoughExamples { requested: usize, available: usize },
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("generation failed after {attempts} attempts: {last_error}")]
    GenerationFailed { attempts: u32, last_error: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("response cache: {0}")]
    Cache(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated<T> {
    pub value: T,
    /// Completions consumed, counting the first one.
    pub attempts: u32,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    System,
    Fixed(DateTime<Utc>),
}

impl Clock {
    pub fn now(self) -> DateTime<Utc> {
        match self {
            Clock::System => Utc::now(),
            Clock::Fixed(t) => t,
        }
    }
}

/// Appended as a user turn after a rejected completion. The error text is
/// quoted as produced by the parser or validator.
pub fn repair_message(kind: PromptKind, error: &str) -> String {
    let what = match kind {
        PromptKind::Scene => "the complete scene with every section",
        PromptKind::Atomic => "every relation under its three headings",
    };
    format!(
        "Your previous answer could not be used. Error: \"{error}\". \
Reply again with {what}, in the required format and without extra explanation."
    )
}

pub struct Generator {
    provider: Arc<dyn ChatProvider>,
    config: GenerationConfig,
    cache: Option<ResponseCache>,
    clock: Clock,
    retry_base: Duration,
    max_in_flight: usize,
}

impl Generator {
    pub fn new(provider: Arc<dyn ChatProvider>, config: GenerationConfig) -> Result<Self, GenerationError> {
        config.validate()?;
        Ok(Self {
            provider,
            config,
            cache: None,
            clock: Clock::System,
            retry_base: Duration::from_millis(500),
            max_in_flight: 4,
        })
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    /// Base delay of the exponential transport backoff.
    pub fn with_retry_base(mut self, base: Duration) -> Self {
        self.retry_base = base;
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    pub fn config(&self) -> &GenerationConfig {
        &self.config
    }

    /// One completion: cache first, then the provider with backoff.
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, GenerationError> {
        let key = ResponseCache::key(&self.config.model_id, messages);
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.lookup(&key)? {
                return Ok(hit);
            }
        }
        let mut retries = 0;
        let completion = loop {
            match self.provider.send(messages, &self.config) {
                Ok(text) => break text,
                Err(e) if e.is_retryable() && retries < MAX_TRANSPORT_RETRIES => {
                    std::thread::sleep(self.retry_base * 2u32.pow(retries));
                    retries += 1;
                }
                Err(e) => return Err(e.into()),
            }
        };
        if let Some(cache) = &self.cache {
            cache.store(&key, &completion)?;
        }
        Ok(completion)
    }

    fn run<T>(
        &self,
        bundle: &PromptBundle,
        kind: PromptKind,
        accept: impl Fn(&str) -> Result<(T, Vec<String>), String>,
    ) -> Result<Generated<T>, GenerationError> {
        let mut messages = bundle.messages();
        let total = self.config.max_repair_attempts + 1;
        let mut last_error = String::new();
        for attempt in 1..=total {
            let completion = self.complete(&messages)?;
            match accept(&completion) {
                Ok((value, warnings)) => {
                    return Ok(Generated {
                        value,
                        attempts: attempt,
                        warnings,
                    })
                }
                Err(e) => last_error = e,
            }
            messages.push(ChatMessage::assistant(completion));
            messages.push(ChatMessage::user(repair_message(kind, &last_error)));
        }
        Err(GenerationError::GenerationFailed {
            attempts: total,
            last_error,
        })
    }

    pub fn generate_scene(
        &self,
        instance: &UsageInstance,
        examples: &[FewShotExample],
    ) -> Result<Generated<SceneRepresentation>, GenerationError> {
        let bundle = build_scene_prompt(instance, examples, examples.len())?;
        let provenance = Provenance {
            model_id: self.config.model_id.clone(),
            prompt_hash: bundle.prompt_hash(),
            created_at: self.clock.now(),
        };
        self.run(&bundle, PromptKind::Scene, |completion| {
            let (mut scene, mut warnings) =
                parse_scene_with_warnings(completion, instance).map_err(|e| e.to_string())?;
            let report = validate_scene(&scene);
            if !report.is_valid() {
                return Err(report.error_summary());
            }
            warnings.extend(report.warnings.iter().map(ToString::to_string));
            scene.provenance = provenance.clone();
            Ok((scene, warnings))
        })
    }

    pub fn generate_atomic_profile(
        &self,
        instance: &UsageInstance,
    ) -> Result<Generated<AtomicProfile>, GenerationError> {
        let bundle = build_atomic_prompt(instance);
        self.run(&bundle, PromptKind::Atomic, |completion| {
            parse_atomic(completion).map_err(|e| e.to_string())
        })
    }

    fn pool(&self) -> rayon::ThreadPool {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.max_in_flight)
            .build()
            .expect("thread pool")
    }

    /// Generates scenes concurrently with at most `max_in_flight` calls
    /// outstanding. Results keep input order.
    pub fn generate_scenes(
        &self,
        instances: &[UsageInstance],
        examples: &[FewShotExample],
    ) -> Vec<Result<Generated<SceneRepresentation>, GenerationError>> {
        self.pool().install(|| {
            instances
                .par_iter()
                .map(|i| self.generate_scene(i, examples))
                .collect()
        })
    }

    pub fn generate_atomic_profiles(
        &self,
        instances: &[UsageInstance],
    ) -> Vec<Result<Generated<AtomicProfile>, GenerationError>> {
        self.pool().install(|| {
            instances
                .par_iter()
                .map(|i| self.generate_atomic_profile(i))
                .collect()
        })
    }
}
