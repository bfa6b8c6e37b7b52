use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;
use std::time::Duration;

use serde_json::{json, Value};

use super::{encode_base64, Backend, BackendKind, BackendRequest, BackendResponse, GatewayError, GatewayMode};
use crate::canonical;

/// Descriptions the mock vision backend draws from. Each one is worded so
/// the bundled sample dataset has an obvious lexical counterpart.
pub const MOCK_MATERIAL_POOL: &[&str] = &[
    "Wide hardwood decking boards with an oiled finish on the terrace",
    "Honed limestone cladding panels on the feature wall",
    "Wood fiber board flooring with a warm matte surface",
    "Smooth gypsum plasterboard ceiling painted white",
    "Polished concrete floor slab with visible aggregate",
    "Double glazed window units with slim aluminium frames",
    "Terracotta clay floor tiles laid in a herringbone pattern",
    "Glazed ceramic wall tiles behind the kitchen counter",
    "Exposed clay brick wall with light mortar joints",
    "Birch plywood joinery panels on the built-in storage",
    "Brushed stainless steel worktop along the galley",
    "Cross laminated timber ceiling panels left exposed",
    "Rammed earth feature wall with horizontal strata",
    "Natural cork flooring tiles in a honey tone",
    "Quartz composite countertop with a pale veined pattern",
    "Engineered oak flooring in wide planks",
];

/// Deterministic text-to-image stand-in: a small PNG whose pixels are
/// derived from the prompt hash.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockImageBackend;

pub(crate) fn mock_png(seed: &str) -> Vec<u8> {
    const SIDE: u32 = 16;
    let digest = canonical::sha256_hex(seed.as_bytes());
    let palette: Vec<u8> = hex::decode(digest).expect("hex digest");
    let mut pixels = Vec::with_capacity((SIDE * SIDE * 3) as usize);
    for y in 0..SIDE {
        for x in 0..SIDE {
            let cell = ((x / 4) + (y / 4) * 4) as usize;
            let base = (cell * 2) % (palette.len() - 2);
            pixels.extend_from_slice(&palette[base..base + 3]);
        }
    }
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, SIDE, SIDE);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().expect("in-memory png header");
        writer.write_image_data(&pixels).expect("in-memory png data");
    }
    out
}

impl Backend for MockImageBackend {
    fn call(&self, request: &BackendRequest) -> Result<BackendResponse, GatewayError> {
        if request.kind != BackendKind::T2i {
            return Err(GatewayError::MalformedResponse(format!(
                "mock t2i backend cannot serve {}",
                request.kind.as_str()
            )));
        }
        let prompt = request.payload.get("prompt").and_then(Value::as_str).unwrap_or_default();
        Ok(BackendResponse {
            payload: json!({
                "b64_json": encode_base64(&mock_png(prompt)),
                "media_type": "png",
                "created": "1970-01-01T00:00:00Z",
            }),
            latency_ms: 0,
            mode: GatewayMode::Mock,
        })
    }

    fn label(&self) -> String {
        "mock:t2i".into()
    }

    fn mode(&self) -> GatewayMode {
        GatewayMode::Mock
    }
}

/// Deterministic vision-language stand-in.
///
/// Extraction returns ten pool descriptions chosen by hashing the image;
/// matching answers with the first shortlist entry.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockVisionBackend;

impl Backend for MockVisionBackend {
    fn call(&self, request: &BackendRequest) -> Result<BackendResponse, GatewayError> {
        let text = match request.kind {
            BackendKind::VlmExtract => {
                let image = request.payload.get("image_b64").and_then(Value::as_str).unwrap_or_default();
                let mut pool: Vec<(String, &str)> = MOCK_MATERIAL_POOL
                    .iter()
                    .enumerate()
                    .map(|(i, d)| (canonical::sha256_hex(format!("{image}#{i}").as_bytes()), *d))
                    .collect();
                pool.sort();
                pool.iter()
                    .take(10)
                    .enumerate()
                    .map(|(i, (_, d))| format!("{}. {d}", i + 1))
                    .collect::<Vec<_>>()
                    .join("\n")
            }
            BackendKind::VlmMatch => request
                .payload
                .get("shortlist")
                .and_then(|s| s.get(0))
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string(),
            BackendKind::T2i => {
                return Err(GatewayError::MalformedResponse("mock vlm backend cannot generate images".into()))
            }
        };
        Ok(BackendResponse { payload: json!({ "text": text }), latency_ms: 0, mode: GatewayMode::Mock })
    }

    fn label(&self) -> String {
        "mock:vlm".into()
    }

    fn mode(&self) -> GatewayMode {
        GatewayMode::Mock
    }
}

type Responder = Box<dyn Fn(&BackendRequest) -> Result<Value, GatewayError> + Send + Sync>;

/// Backend that replies from per-kind queues of canned payloads, for tests
/// and demos. When a queue runs dry it falls back to an optional responder.
pub struct ScriptedBackend {
    label: String,
    queues: Mutex<HashMap<BackendKind, VecDeque<Result<Value, GatewayError>>>>,
    requests: Mutex<Vec<BackendRequest>>,
    fallback: Option<Responder>,
    delay: Duration,
}

impl ScriptedBackend {
    pub fn new(label: impl Into<String>) -> Self {
        ScriptedBackend {
            label: label.into(),
            queues: Mutex::new(HashMap::new()),
            requests: Mutex::new(Vec::new()),
            fallback: None,
            delay: Duration::ZERO,
        }
    }

    pub fn with_fallback(
        mut self,
        responder: impl Fn(&BackendRequest) -> Result<Value, GatewayError> + Send + Sync + 'static,
    ) -> Self {
        self.fallback = Some(Box::new(responder));
        self
    }

    /// Sleep this long inside every call.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    pub fn push(&self, kind: BackendKind, response: Result<Value, GatewayError>) {
        self.queues.lock().unwrap().entry(kind).or_default().push_back(response);
    }

    pub fn requests(&self) -> Vec<BackendRequest> {
        self.requests.lock().unwrap().clone()
    }

    pub fn calls(&self, kind: BackendKind) -> usize {
        self.requests.lock().unwrap().iter().filter(|r| r.kind == kind).count()
    }
}

impl Backend for ScriptedBackend {
    fn call(&self, request: &BackendRequest) -> Result<BackendResponse, GatewayError> {
        self.requests.lock().unwrap().push(request.clone());
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        let queued = self.queues.lock().unwrap().get_mut(&request.kind).and_then(VecDeque::pop_front);
        let payload = match (queued, &self.fallback) {
            (Some(response), _) => response?,
            (None, Some(fallback)) => fallback(request)?,
            (None, None) => {
                return Err(GatewayError::unavailable(format!(
                    "script exhausted for {}",
                    request.kind.as_str()
                )))
            }
        };
        Ok(BackendResponse { payload, latency_ms: 0, mode: GatewayMode::Mock })
    }

    fn label(&self) -> String {
        self.label.clone()
    }

    fn mode(&self) -> GatewayMode {
        GatewayMode::Mock
    }
}
