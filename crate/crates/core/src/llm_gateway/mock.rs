//! In-process completion clients for tests, examples and offline runs.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{ChatRequest, CompletionClient};
use crate::error::GatewayError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reply {
    Text(String),
    /// Fails the request with a transport error carrying this message.
    Fail(String),
}

type Responder = dyn Fn(&ChatRequest) -> Reply + Send + Sync;

/// Answers from a script keyed by the user turn, or from a closure.
pub struct ScriptedClient {
    responder: Box<Responder>,
    calls: AtomicUsize,
}

impl ScriptedClient {
    pub fn from_fn(f: impl Fn(&ChatRequest) -> Reply + Send + Sync + 'static) -> Self {
        Self {
            responder: Box::new(f),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn always(text: impl Into<String>) -> Self {
        let text = text.into();
        Self::from_fn(move |_| Reply::Text(text.clone()))
    }

    /// Look the user turn up in `script`; unknown inputs get `fallback`.
    pub fn keyed(script: HashMap<String, Reply>, fallback: Reply) -> Self {
        Self::from_fn(move |req| script.get(req.user_content()).cloned().unwrap_or_else(|| fallback.clone()))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl CompletionClient for ScriptedClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        match (self.responder)(request) {
            Reply::Text(t) => Ok(t),
            Reply::Fail(message) => Err(GatewayError::Transport { attempts: 1, message }),
        }
    }
}
