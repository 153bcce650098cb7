//! Plugging an external chat model into the environment.
//!
//! The scripted simulators in [`crate::environment`] are deterministic stand-ins.
//! This module defines the seam for replacing either of them with a language
//! model: a [`ChatBackend`] turns one rendered prompt into one completion,
//! and [`AdapterSimulators`] renders the built-in prompt templates and
//! routes the environment's simulator calls through the backend.
//!
//! The crate ships no HTTP client on purpose — transport, authentication,
//! and retry policy belong to the caller. A backend is typically a thin
//! wrapper around whatever chat-completion API is at hand; the request type
//! serializes to the common `{"messages": [{"role", "content"}]}` shape.
//! Backend errors propagate out of the episode step that triggered them;
//! nothing falls back silently to the scripted behavior.

use serde::{Deserialize, Serialize};

use crate::environment::{
    QuestionRequest, Simulators, Speaker, UserReply, UserReplyRequest,
};
use crate::error::{Error, Result};

/// Prompt templates with `{placeholder}` slots.
///
/// `question` receives `{history}` and `{top_docs}`; `user` receives
/// `{intent}`, `{history}`, and `{question}`. The defaults ship with the
/// crate; both can be replaced wholesale at construction.
#[derive(Debug, Clone)]
pub struct PromptTemplates {
    pub question: String,
    pub user: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            question: include_str!("../templates/question_gen.txt").to_string(),
            user: include_str!("../templates/user_sim.txt").to_string(),
        }
    }
}

/// One chat message in the usual role/content shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// A complete request for one chat completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    /// A single-user-message request, the only shape the adapter emits.
    pub fn user(content: impl Into<String>) -> ChatRequest {
        ChatRequest {
            messages: vec![ChatMessage {
                role: "user".to_string(),
                content: content.into(),
            }],
        }
    }
}

/// Anything that can answer a chat request with a completion string.
pub trait ChatBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String>;
}

/// Simulators that render prompts and delegate to a chat backend.
///
/// Facet bookkeeping is a property of the scripted user, not of a free-text
/// one, so user replies keep the revealed count unchanged here; the reply
/// text alone drives retrieval.
pub struct AdapterSimulators<B: ChatBackend> {
    backend: B,
    templates: PromptTemplates,
}

impl<B: ChatBackend> AdapterSimulators<B> {
    pub fn new(backend: B, templates: PromptTemplates) -> AdapterSimulators<B> {
        AdapterSimulators { backend, templates }
    }

    pub fn with_default_templates(backend: B) -> AdapterSimulators<B> {
        AdapterSimulators::new(backend, PromptTemplates::default())
    }
}

/// Render a conversation as `speaker: text` lines.
fn render_history(request_history: &[crate::environment::Turn]) -> String {
    request_history
        .iter()
        .map(|t| {
            let who = match t.speaker {
                Speaker::User => "user",
                Speaker::System => "assistant",
            };
            format!("{who}: {}", t.text)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Render ranked documents as `id: text` lines.
fn render_docs(docs: &[(&str, &str)]) -> String {
    docs.iter()
        .map(|&(id, text)| format!("{id}: {text}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Fill `{name}` slots. Unknown slots in the template are left untouched;
/// a missing required slot is a template bug surfaced as an error by the
/// caller's tests, not silently ignored — so this checks each replacement
/// actually happened.
fn fill(template: &str, slots: &[(&str, &str)]) -> Result<String> {
    let mut out = template.to_string();
    for (name, value) in slots {
        let needle = format!("{{{name}}}");
        if !out.contains(&needle) {
            return Err(Error::Adapter(format!(
                "prompt template is missing the {{{name}}} slot"
            )));
        }
        out = out.replace(&needle, value);
    }
    Ok(out)
}

impl<B: ChatBackend> Simulators for AdapterSimulators<B> {
    fn question(&self, request: &QuestionRequest<'_>) -> Result<String> {
        let prompt = fill(
            &self.templates.question,
            &[
                ("history", &render_history(request.history.turns())),
                ("top_docs", &render_docs(request.top_docs)),
            ],
        )?;
        let completion = self.backend.complete(&ChatRequest::user(prompt))?;
        let question = completion.trim();
        if question.is_empty() {
            return Err(Error::Adapter("backend returned an empty question".into()));
        }
        Ok(question.to_string())
    }

    fn user_reply(&self, request: &UserReplyRequest<'_>) -> Result<UserReply> {
        let prompt = fill(
            &self.templates.user,
            &[
                ("intent", &request.case.intent_text),
                ("history", &render_history(request.history.turns())),
                ("question", request.question),
            ],
        )?;
        let completion = self.backend.complete(&ChatRequest::user(prompt))?;
        let text = completion.trim();
        if text.is_empty() {
            return Err(Error::Adapter("backend returned an empty reply".into()));
        }
        Ok(UserReply {
            text: text.to_string(),
            revealed_count: request.revealed_count,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SearchCase;
    use crate::environment::ConversationHistory;
    use std::cell::RefCell;

    /// Records prompts and plays back canned completions.
    struct CannedBackend {
        replies: RefCell<Vec<String>>,
        seen: RefCell<Vec<ChatRequest>>,
    }

    impl CannedBackend {
        fn new(replies: &[&str]) -> CannedBackend {
            CannedBackend {
                replies: RefCell::new(replies.iter().rev().map(|s| s.to_string()).collect()),
                seen: RefCell::new(Vec::new()),
            }
        }
    }

    impl ChatBackend for CannedBackend {
        fn complete(&self, request: &ChatRequest) -> Result<String> {
            self.seen.borrow_mut().push(request.clone());
            self.replies
                .borrow_mut()
                .pop()
                .ok_or_else(|| Error::Adapter("no canned reply left".into()))
        }
    }

    struct FailingBackend;

    impl ChatBackend for FailingBackend {
        fn complete(&self, _request: &ChatRequest) -> Result<String> {
            Err(Error::Adapter("backend unavailable".into()))
        }
    }

    fn sample_case() -> SearchCase {
        SearchCase {
            user_id: "u1".into(),
            target_doc_id: "d1".into(),
            intent_text: "a blue ceramic vase".into(),
            initial_query: "vase".into(),
            facets: vec![vec!["blue".into()]],
            ambiguous: true,
        }
    }

    fn sample_history() -> ConversationHistory {
        let mut h = ConversationHistory::new();
        h.push(Speaker::User, "vase");
        h
    }

    #[test]
    fn question_prompt_carries_history_and_docs() {
        let backend = CannedBackend::new(&["  What color? \n"]);
        let sims = AdapterSimulators::with_default_templates(backend);
        let history = sample_history();
        let docs = [("d1", "blue vase"), ("d2", "red vase")];
        let q = sims
            .question(&QuestionRequest {
                history: &history,
                top_docs: &docs,
            })
            .unwrap();
        assert_eq!(q, "What color?");
        let seen = sims.backend.seen.borrow();
        assert_eq!(seen.len(), 1);
        let content = &seen[0].messages[0].content;
        assert!(content.contains("user: vase"));
        assert!(content.contains("d1: blue vase"));
        assert!(content.contains("d2: red vase"));
        assert!(!content.contains("{history}"));
        assert!(!content.contains("{top_docs}"));
    }

    #[test]
    fn user_prompt_carries_intent_and_keeps_facet_cursor() {
        let backend = CannedBackend::new(&["it should be blue"]);
        let sims = AdapterSimulators::with_default_templates(backend);
        let case = sample_case();
        let mut history = sample_history();
        history.push(Speaker::System, "What color?");
        let reply = sims
            .user_reply(&UserReplyRequest {
                case: &case,
                question: "What color?",
                revealed_count: 0,
                history: &history,
            })
            .unwrap();
        assert_eq!(reply.text, "it should be blue");
        assert_eq!(reply.revealed_count, 0);
        let seen = sims.backend.seen.borrow();
        let content = &seen[0].messages[0].content;
        assert!(content.contains("a blue ceramic vase"));
        assert!(content.contains("What color?"));
    }

    #[test]
    fn backend_failures_and_empty_completions_surface_as_errors() {
        let sims = AdapterSimulators::with_default_templates(FailingBackend);
        let history = sample_history();
        let err = sims
            .question(&QuestionRequest {
                history: &history,
                top_docs: &[],
            })
            .unwrap_err();
        assert!(matches!(err, Error::Adapter(_)));

        let sims = AdapterSimulators::with_default_templates(CannedBackend::new(&["   "]));
        let err = sims
            .question(&QuestionRequest {
                history: &history,
                top_docs: &[],
            })
            .unwrap_err();
        assert!(matches!(err, Error::Adapter(_)));
    }

    #[test]
    fn broken_templates_are_reported_by_slot_name() {
        let backend = CannedBackend::new(&["unused"]);
        let templates = PromptTemplates {
            question: "no slots here".to_string(),
            user: PromptTemplates::default().user,
        };
        let sims = AdapterSimulators::new(backend, templates);
        let history = sample_history();
        let err = sims
            .question(&QuestionRequest {
                history: &history,
                top_docs: &[],
            })
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("{history}"), "got: {msg}");
    }

    #[test]
    fn chat_request_serializes_to_the_common_shape() {
        let req = ChatRequest::user("hello");
        let json = serde_json::to_string(&req).unwrap();
        assert_eq!(
            json,
            r#"{"messages":[{"role":"user","content":"hello"}]}"#
        );
    }
}
