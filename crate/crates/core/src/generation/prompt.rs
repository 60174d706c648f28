use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::atomic::{AtomicRelation, ATOMIC_HEADER};
use super::GenerationError;
use crate::dimension::Dimension;
use crate::scene::UsageInstance;

/// Scene abstraction instruction, sent verbatim as the system message.
pub const SCENE_INSTRUCTION: &str = include_str!("../../assets/scene_instruction.txt");

/// Delimiters placed around the target expression in the user message.
pub const HIGHLIGHT_OPEN: &str = "**";
pub const HIGHLIGHT_CLOSE: &str = "**";

/// Marker line carrying the keyword lemma; providers and fixtures key on it.
pub const KEYWORD_PREFIX: &str = "Keyword: ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub input_text: String,
    pub output_text: String,
}

/// The three bundled demonstrations: the crow example plus two analogues
/// built with the same field structure.
pub fn default_examples() -> Vec<FewShotExample> {
    let pair = |input: &str, output: &str| FewShotExample {
        input_text: input.trim_end().to_string(),
        output_text: output.trim_end().to_string(),
    };
    vec![
        pair(
            include_str!("../../assets/few_shot/crow.input.txt"),
            include_str!("../../assets/few_shot/crow.output.txt"),
        ),
        pair(
            include_str!("../../assets/few_shot/rain.input.txt"),
            include_str!("../../assets/few_shot/rain.output.txt"),
        ),
        pair(
            include_str!("../../assets/few_shot/rose.input.txt"),
            include_str!("../../assets/few_shot/rose.output.txt"),
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_instruction: String,
    pub few_shot_examples: Vec<FewShotExample>,
    pub user_message: String,
}

impl PromptBundle {
    /// System message, then one user/assistant pair per example, then the
    /// target usage.
    pub fn messages(&self) -> Vec<ChatMessage> {
        let mut messages = Vec::with_capacity(2 + 2 * self.few_shot_examples.len());
        messages.push(ChatMessage::system(&self.system_instruction));
        for ex in &self.few_shot_examples {
            messages.push(ChatMessage::user(&ex.input_text));
            messages.push(ChatMessage::assistant(&ex.output_text));
        }
        messages.push(ChatMessage::user(&self.user_message));
        messages
    }

    /// SHA-256 over the full message sequence.
    pub fn prompt_hash(&self) -> String {
        hash_messages(&self.messages())
    }
}

pub(crate) fn hash_messages(messages: &[ChatMessage]) -> String {
    let mut hasher = Sha256::new();
    for m in messages {
        hasher.update(format!("{:?}", m.role).as_bytes());
        hasher.update([0u8]);
        hasher.update(m.content.as_bytes());
        hasher.update([0u8]);
    }
    hex(&hasher.finalize())
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Highlighted context followed by the keyword line.
pub fn user_message(instance: &UsageInstance) -> String {
    format!(
        "{}\n\n{KEYWORD_PREFIX}{}",
        instance.highlighted(HIGHLIGHT_OPEN, HIGHLIGHT_CLOSE),
        instance.keyword_lemma
    )
}

pub fn build_scene_prompt(
    instance: &UsageInstance,
    examples: &[FewShotExample],
    k: usize,
) -> Result<PromptBundle, GenerationError> {
    if k > examples.len() {
        return Err(GenerationError::NotEnoughExamples {
            requested: k,
            available: examples.len(),
        });
    }
    Ok(PromptBundle {
        system_instruction: SCENE_INSTRUCTION.to_string(),
        few_shot_examples: examples[..k].to_vec(),
        user_message: user_message(instance),
    })
}

/// Instruction for the ATOMIC baseline: every relation with its description,
/// grouped under the three evaluation dimensions.
pub fn atomic_instruction() -> String {
    let mut out = String::from(ATOMIC_HEADER);
    out.push_str(
        "\n\nTreat the situation in the sentence as the event, PersonX as its main participant \
and \"others\" as the remaining participants. Answer every relation on its own line as \
\"Relation: answer\", under the three headings below. Write \"N/A\" for a relation that does \
not apply, such as Desires and NotDesires when the keyword is inanimate.\n",
    );
    for dim in Dimension::ALL {
        out.push('\n');
        out.push_str(dim.title());
        out.push_str(":\n");
        for rel in AtomicRelation::ALL.iter().filter(|r| r.category() == dim) {
            out.push_str(&format!("- {}: {}\n", rel.name(), rel.description()));
        }
    }
    out.push_str("\nFormat must be a plain list without extra explanation.\n");
    out
}

pub fn build_atomic_prompt(instance: &UsageInstance) -> PromptBundle {
    PromptBundle {
        system_instruction: atomic_instruction(),
        few_shot_examples: Vec::new(),
        user_message: user_message(instance),
    }
}
