use serde::{Deserialize, Serialize};

/// One element of an interleaved user message.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Part {
    Text {
        text: String,
    },
    /// Base64-encoded image bytes.
    Image {
        media_type: String,
        data: String,
    },
}

impl Part {
    pub fn text(s: impl Into<String>) -> Self {
        Part::Text { text: s.into() }
    }

    pub fn png(base64: impl Into<String>) -> Self {
        Part::Image {
            media_type: "image/png".into(),
            data: base64.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system: String,
    pub content: Vec<Part>,
    pub model: String,
    pub max_output_tokens: u32,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, system: impl Into<String>, content: Vec<Part>) -> Self {
        Self {
            system: system.into(),
            content,
            model: model.into(),
            max_output_tokens: 1024,
            temperature: 0.0,
        }
    }

    /// Checks the payload before it leaves the process.
    pub fn validate(&self) -> Result<(), String> {
        if self.model.trim().is_empty() {
            return Err("request has no model".into());
        }
        for (i, p) in self.content.iter().enumerate() {
            if let Part::Image { data, media_type } = p {
                if data.is_empty() {
                    return Err(format!("part {i}: image has empty data"));
                }
                if media_type.is_empty() {
                    return Err(format!("part {i}: image has no media type"));
                }
            }
        }
        Ok(())
    }

    /// Rough prompt size used for rate limiting: 4 characters per token for
    /// text and a flat charge per image.
    pub fn estimated_input_tokens(&self) -> u64 {
        const IMAGE_TOKENS: u64 = 765;
        let text: usize = self.system.len()
            + self
                .content
                .iter()
                .map(|p| match p {
                    Part::Text { text } => text.len(),
                    Part::Image { .. } => 0,
                })
                .sum::<usize>();
        let images = self.content.iter().filter(|p| matches!(p, Part::Image { .. })).count() as u64;
        (text as u64).div_ceil(4) + images * IMAGE_TOKENS
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Remote,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub usage: Usage,
    pub latency_s: f64,
    pub backend: Backend,
    pub model: String,
    pub attempts: u32,
}
