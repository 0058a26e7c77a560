//! Turns an interleaved sequence into the user message of a request.

use trajlens_core::multiview::{InterleavedSequence, IMAGE_PLACEHOLDER};
use trajlens_gateway::{ChatRequest, Gateway, Part};

use crate::template::{PromptError, TaskPrompt};

pub const CLOSING: &str = "Answer following the output format.";

/// Preface, then for every pair its anchor text, the image and the segment
/// description, then a closing instruction.
pub fn user_content(seq: &InterleavedSequence, preface: &str) -> Vec<Part> {
    let mut parts = Vec::with_capacity(3 * seq.items.len() + 2);
    if !preface.is_empty() {
        parts.push(Part::text(preface));
    }
    for item in &seq.items {
        let lead = item.anchor.replace(IMAGE_PLACEHOLDER, "");
        parts.push(Part::text(lead.trim_end()));
        parts.push(Part::png(item.image.encoded.clone()));
        parts.push(Part::text(item.text.rendered.clone()));
    }
    parts.push(Part::text(CLOSING));
    parts
}

/// The text-only view of a sequence: anchors and segment descriptions.
pub fn text_only(seq: &InterleavedSequence) -> String {
    seq.items
        .iter()
        .map(|i| {
            format!(
                "{}\n{}",
                i.anchor.replace(IMAGE_PLACEHOLDER, "[image omitted]"),
                i.text.rendered
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn build_request(gateway: &Gateway, prompt: &TaskPrompt, content: Vec<Part>) -> Result<ChatRequest, PromptError> {
    Ok(gateway.request(prompt.system_text()?, content))
}
