use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Backend, BackendKind, BackendRequest, GatewayError};
use crate::canonical;

/// Standard base64 with padding.
pub fn encode_base64(bytes: &[u8]) -> String {
    STANDARD.encode(bytes)
}

pub fn decode_base64(text: &str) -> Result<Vec<u8>, GatewayError> {
    STANDARD
        .decode(text.trim())
        .map_err(|e| GatewayError::MalformedResponse(format!("invalid base64 image: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaType {
    Png,
    Jpeg,
}

impl MediaType {
    /// Sniff the media type from magic bytes.
    pub fn detect(bytes: &[u8]) -> Option<MediaType> {
        if bytes.starts_with(&[0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A]) {
            Some(MediaType::Png)
        } else if bytes.starts_with(&[0xFF, 0xD8, 0xFF]) {
            Some(MediaType::Jpeg)
        } else {
            None
        }
    }

    pub fn mime(self) -> &'static str {
        match self {
            MediaType::Png => "image/png",
            MediaType::Jpeg => "image/jpeg",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            MediaType::Png => "png",
            MediaType::Jpeg => "jpg",
        }
    }
}

/// Generated image with its payload. `image_id` is the SHA-256 of `bytes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedImage {
    pub image_id: String,
    pub bytes: Vec<u8>,
    pub media_type: MediaType,
    pub prompt_text: String,
    pub created_at: DateTime<Utc>,
    pub backend_label: String,
}

/// Everything about a generated image except the pixels; this is what
/// reports carry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub image_id: String,
    pub media_type: MediaType,
    pub prompt_text: String,
    pub created_at: DateTime<Utc>,
    pub backend_label: String,
}

impl GeneratedImage {
    pub fn from_bytes(
        bytes: Vec<u8>,
        prompt_text: &str,
        created_at: DateTime<Utc>,
        backend_label: String,
    ) -> Result<GeneratedImage, GatewayError> {
        if bytes.is_empty() {
            return Err(GatewayError::MalformedResponse("image payload is empty".into()));
        }
        let media_type = MediaType::detect(&bytes)
            .ok_or_else(|| GatewayError::MalformedResponse("image is neither PNG nor JPEG".into()))?;
        Ok(GeneratedImage {
            image_id: canonical::sha256_hex(&bytes),
            bytes,
            media_type,
            prompt_text: prompt_text.to_string(),
            created_at,
            backend_label,
        })
    }

    pub fn reference(&self) -> ImageRef {
        ImageRef {
            image_id: self.image_id.clone(),
            media_type: self.media_type,
            prompt_text: self.prompt_text.clone(),
            created_at: self.created_at,
            backend_label: self.backend_label.clone(),
        }
    }

    pub fn to_base64(&self) -> String {
        encode_base64(&self.bytes)
    }
}

/// Generation parameters passed through to the backend. Resolution and
/// model are left to backend defaults unless configured.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageOptions {
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub size: Option<String>,
    #[serde(default = "default_max_prompt_chars")]
    pub max_prompt_chars: usize,
}

fn default_max_prompt_chars() -> usize {
    4000
}

impl Default for ImageOptions {
    fn default() -> Self {
        ImageOptions { model: None, size: None, max_prompt_chars: default_max_prompt_chars() }
    }
}

impl ImageOptions {
    pub fn request(&self, prompt: &str) -> BackendRequest {
        let mut payload = json!({ "prompt": prompt });
        if let Some(model) = &self.model {
            payload["model"] = model.clone().into();
        }
        if let Some(size) = &self.size {
            payload["size"] = size.clone().into();
        }
        BackendRequest::new(BackendKind::T2i, payload)
    }
}

/// Turn a prompt into an image through a text-to-image backend.
pub fn generate_image(
    prompt: &str,
    backend: &dyn Backend,
    options: &ImageOptions,
) -> Result<GeneratedImage, GatewayError> {
    if prompt.trim().is_empty() {
        return Err(GatewayError::EmptyPrompt);
    }
    let len = prompt.chars().count();
    if len > options.max_prompt_chars {
        return Err(GatewayError::PromptTooLong { len, max: options.max_prompt_chars });
    }
    let response = backend.call(&options.request(prompt))?;
    let b64 = response
        .payload
        .get("b64_json")
        .and_then(Value::as_str)
        .ok_or_else(|| GatewayError::MalformedResponse("image response has no b64_json".into()))?;
    let created_at = parse_created(response.payload.get("created"));
    GeneratedImage::from_bytes(decode_base64(b64)?, prompt, created_at, backend.label())
}

/// `created` may be RFC 3339 text or unix seconds; absent means epoch so
/// mock and replay output stays deterministic.
fn parse_created(value: Option<&Value>) -> DateTime<Utc> {
    let epoch = Utc.timestamp_opt(0, 0).unwrap();
    match value {
        Some(Value::String(s)) => DateTime::parse_from_rfc3339(s).map(|d| d.with_timezone(&Utc)).unwrap_or(epoch),
        Some(Value::Number(n)) => n.as_i64().and_then(|s| Utc.timestamp_opt(s, 0).single()).unwrap_or(epoch),
        _ => epoch,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{MockImageBackend, ScriptedBackend};
    use proptest::prelude::*;

    #[test]
    fn base64_vectors() {
        assert_eq!(encode_base64(b"Man"), "TWFu");
        assert_eq!(encode_base64(b""), "");
        assert_eq!(encode_base64(&[0x89, 0x50, 0x4E, 0x47]), "iVBORw==");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn base64_round_trip(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
            prop_assert_eq!(decode_base64(&encode_base64(&bytes)).unwrap(), bytes);
        }
    }

    #[test]
    fn empty_and_oversized_prompts() {
        let backend = MockImageBackend;
        let opts = ImageOptions::default();
        assert_eq!(generate_image("", &backend, &opts).unwrap_err(), GatewayError::EmptyPrompt);
        assert_eq!(generate_image("   ", &backend, &opts).unwrap_err(), GatewayError::EmptyPrompt);
        let long = "a".repeat(4001);
        assert!(matches!(
            generate_image(&long, &backend, &opts),
            Err(GatewayError::PromptTooLong { len: 4001, max: 4000 })
        ));
    }

    #[test]
    fn mock_image_id_is_content_hash() {
        let backend = MockImageBackend;
        let opts = ImageOptions::default();
        let a = generate_image("minimalist reading room, oak floor", &backend, &opts).unwrap();
        let b = generate_image("minimalist reading room, oak floor", &backend, &opts).unwrap();
        assert_eq!(a.image_id, canonical::sha256_hex(&a.bytes));
        assert_eq!(a, b);
        assert_eq!(a.media_type, MediaType::Png);
    }

    #[test]
    fn rejects_non_image_payload() {
        let backend = ScriptedBackend::new("scripted");
        backend.push(BackendKind::T2i, Ok(json!({"b64_json": encode_base64(b"not an image")})));
        assert!(matches!(
            generate_image("x", &backend, &ImageOptions::default()),
            Err(GatewayError::MalformedResponse(_))
        ));
    }
}
