//! Model-service clients: chat completions for parsing and generation,
//! embeddings for semantic similarity, and the response repair that sits
//! between raw model text and a validated [`ResumeRecord`].

pub mod embedding;
pub mod http;
pub mod mock;
pub mod repair;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use embedding::{cosine, offline_embed, EmbeddingProvider, EmbeddingVector, OfflineEmbedder};
pub use http::{ApiKey, EndpointConfig, HttpCompletionClient, RemoteEmbedder, RetryPolicy};
pub use repair::{repair_json, Repair};

use crate::error::GatewayError;
use crate::instruction::PARSING_INSTRUCTION;
use crate::normalize::{normalize_record, NormalizationReport, SkillAliasMap};
use crate::schema::{validate_value, ResumeRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

/// Chat-completions request body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, system: impl Into<String>, user: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            messages: vec![
                ChatMessage {
                    role: Role::System,
                    content: system.into(),
                },
                ChatMessage {
                    role: Role::User,
                    content: user.into(),
                },
            ],
            temperature: 0.0,
        }
    }

    /// Content of the last user turn.
    pub fn user_content(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }
}

/// Anything that turns a chat request into the assistant's reply text.
pub trait CompletionClient: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError>;
}

impl<C: CompletionClient + ?Sized> CompletionClient for Arc<C> {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }
}

/// Repair, parse and validate a model reply. Failures keep the raw text.
pub fn extract_record(raw_response: &str) -> Result<(ResumeRecord, Vec<Repair>), GatewayError> {
    let fail = |reason: String, violations| GatewayError::Extraction {
        reason,
        violations,
        raw_response: raw_response.to_owned(),
    };
    let (body, repairs) =
        repair_json(raw_response).ok_or_else(|| fail("no JSON object in response".into(), vec![]))?;
    let value: Value =
        serde_json::from_str(body).map_err(|e| fail(format!("invalid JSON: {e}"), vec![]))?;
    let violations = validate_value(&value);
    if !violations.is_empty() {
        return Err(fail("schema violation".into(), violations));
    }
    let record = serde_json::from_value(value).map_err(|e| fail(e.to_string(), vec![]))?;
    Ok((record, repairs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseResult {
    pub record: ResumeRecord,
    pub repairs_applied: Vec<Repair>,
    pub raw_response: String,
    pub normalization: NormalizationReport,
}

/// Prompts a completion endpoint with the versioned parsing instruction and
/// turns the reply into a normalized record.
#[derive(Clone)]
pub struct ResumeParser {
    client: Arc<dyn CompletionClient>,
    model_id: String,
    aliases: SkillAliasMap,
}

impl ResumeParser {
    pub fn new(client: Arc<dyn CompletionClient>, model_id: impl Into<String>, aliases: SkillAliasMap) -> Self {
        Self {
            client,
            model_id: model_id.into(),
            aliases,
        }
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn request_for(&self, raw_text: &str) -> ChatRequest {
        ChatRequest::new(&self.model_id, PARSING_INSTRUCTION, raw_text)
    }

    pub fn parse_resume(&self, raw_text: &str) -> Result<ParseResult, GatewayError> {
        if raw_text.trim().is_empty() {
            return Err(GatewayError::Config("resume text is empty".into()));
        }
        let raw_response = self.client.complete(&self.request_for(raw_text))?;
        let (record, repairs_applied) = extract_record(&raw_response)?;
        let (record, normalization) = normalize_record(&record, &self.aliases);
        Ok(ParseResult {
            record,
            repairs_applied,
            raw_response,
            normalization,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::mock::ScriptedClient;
    use super::*;
    use crate::schema::canonical_string;

    fn golden() -> ResumeRecord {
        ResumeRecord {
            name: "Dana Cruz".into(),
            email: "dana@example.com".into(),
            phone: "555-0101".into(),
            skills: vec!["Recruiting".into()],
            department: "Human Resources".into(),
            ..Default::default()
        }
    }

    fn parser(client: ScriptedClient) -> ResumeParser {
        ResumeParser::new(Arc::new(client), "test-model", SkillAliasMap::new())
    }

    #[test]
    fn pass_through() {
        let json = canonical_string(&golden());
        let p = parser(ScriptedClient::always(json.clone()));
        let res = p.parse_resume("resume text").unwrap();
        assert_eq!(res.record, golden());
        assert!(res.repairs_applied.is_empty());
        assert_eq!(res.raw_response, json);
    }

    #[test]
    fn code_fence_is_repaired() {
        let reply = format!("```json\n{}\n```", canonical_string(&golden()));
        let res = parser(ScriptedClient::always(reply)).parse_resume("resume text").unwrap();
        assert_eq!(res.record, golden());
        assert_eq!(res.repairs_applied, vec![Repair::CodeFence]);
        let tags: Vec<_> = res.repairs_applied.iter().map(|r| r.as_str()).collect();
        assert_eq!(tags, ["code_fence"]);
    }

    #[test]
    fn prose_is_an_extraction_failure() {
        let err = parser(ScriptedClient::always("I cannot parse this"))
            .parse_resume("resume text")
            .unwrap_err();
        assert!(matches!(err, GatewayError::Extraction { .. }));
        assert_eq!(err.raw_response(), Some("I cannot parse this"));
    }

    #[test]
    fn missing_keys_are_schema_violations() {
        let err = parser(ScriptedClient::always(r#"{"name":"x"}"#))
            .parse_resume("resume text")
            .unwrap_err();
        match err {
            GatewayError::Extraction { violations, .. } => assert_eq!(violations.len(), 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parsed_records_are_normalized() {
        let mut r = golden();
        r.name.clear();
        r.skills = vec!["js".into()];
        let aliases = SkillAliasMap::from_pairs([("js", "JavaScript")]).unwrap();
        let p = ResumeParser::new(
            Arc::new(ScriptedClient::always(canonical_string(&r))),
            "m",
            aliases,
        );
        let res = p.parse_resume("text").unwrap();
        assert_eq!(res.record.name, "John Doe");
        assert_eq!(res.record.skills, vec!["JavaScript".to_owned()]);
        assert_eq!(res.normalization.placeholders_inserted, 1);
    }

    #[test]
    fn request_shape() {
        let p = parser(ScriptedClient::always("{}"));
        let req = p.request_for("body");
        let v = serde_json::to_value(&req).unwrap();
        assert_eq!(v["model"], "test-model");
        assert_eq!(v["temperature"], 0.0);
        assert_eq!(v["messages"][0]["role"], "system");
        assert_eq!(v["messages"][0]["content"], PARSING_INSTRUCTION);
        assert_eq!(v["messages"][1]["role"], "user");
        assert_eq!(req.user_content(), "body");
        assert!(p.parse_resume("   ").is_err());
    }
}
