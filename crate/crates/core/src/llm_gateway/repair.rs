//! Recovery of a JSON object from chatty model output.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Repair {
    CodeFence,
    LeadingProse,
    TrailingProse,
}

impl Repair {
    pub fn as_str(self) -> &'static str {
        match self {
            Repair::CodeFence => "code_fence",
            Repair::LeadingProse => "leading_prose",
            Repair::TrailingProse => "trailing_prose",
        }
    }
}

/// Body of the first fenced block, if the text has one.
fn fenced_body(text: &str) -> Option<&str> {
    let open = text.find("```")?;
    let after = &text[open + 3..];
    // Skip the info string (e.g. `json`) up to the end of the line.
    let body_start = after.find('\n').map(|i| i + 1)?;
    let body = &after[body_start..];
    let close = body.find("```").unwrap_or(body.len());
    Some(&body[..close])
}

/// Slice out the outermost `{ ... }` span. Content between the braces is
/// returned untouched. `None` when there is no object-shaped span at all.
pub fn repair_json(raw: &str) -> Option<(&str, Vec<Repair>)> {
    let mut repairs = Vec::new();
    let mut text = raw.trim();
    if let Some(body) = fenced_body(text) {
        if body.contains('{') {
            text = body.trim();
            repairs.push(Repair::CodeFence);
        }
    }
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    if end < start {
        return None;
    }
    if !text[..start].trim().is_empty() {
        repairs.push(Repair::LeadingProse);
    }
    if !text[end + 1..].trim().is_empty() {
        repairs.push(Repair::TrailingProse);
    }
    Some((&text[start..=end], repairs))
}
