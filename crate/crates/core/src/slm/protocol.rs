use std::collections::HashMap;
use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::prompts::{PromptCatalog, Task};
use super::window::SlidingWindow;
use crate::attribution::Tag;
use crate::error::{Error, Result};
use crate::ndjson;

pub const DEFAULT_SLM_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioPayload {
    pub rate: u32,
    pub samples: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlmRequest {
    pub id: u64,
    pub task: Task,
    pub src: String,
    pub tgt: String,
    pub prompt: String,
    pub history: String,
    pub audio: AudioPayload,
    /// Absolute time span of the audio window, seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<[f64; 2]>,
    /// Start of the audio added since the previous request pair, seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fresh_from: Option<f64>,
    /// Scene id, for services that hold reference data per scene.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlmResponse {
    pub id: u64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<f64>,
}

/// The transcribe and translate requests for one chunk. Both carry the same
/// audio and history. The transcribe request uses the tagged speaker's
/// language; the translate request targets the other participant's.
pub fn build_requests(
    window: &SlidingWindow,
    tag: Tag,
    catalog: &PromptCatalog,
    langs: (&str, &str),
    next_id: &mut u64,
) -> Result<[SlmRequest; 2]> {
    let speaker = tag.speaker().ok_or_else(|| Error::arg("no requests for a silent chunk"))?;
    let (start, end) = window.span().ok_or_else(|| Error::arg("no requests for an empty window"))?;
    let (own, other) = match speaker {
        crate::Speaker::Wearer => langs,
        crate::Speaker::Partner => (langs.1, langs.0),
    };
    let audio = AudioPayload { rate: window.sample_rate(), samples: window.audio() };
    let history = window.history_text();
    let mut make = |task: Task, tgt: &str| -> Result<SlmRequest> {
        let id = *next_id;
        *next_id += 1;
        Ok(SlmRequest {
            id,
            task,
            src: own.to_string(),
            tgt: tgt.to_string(),
            prompt: catalog.render(task, speaker, own, tgt)?,
            history: history.clone(),
            audio: audio.clone(),
            span: Some([start, end]),
            fresh_from: None,
            scene: None,
        })
    };
    Ok([make(Task::Transcribe, own)?, make(Task::Translate, other)?])
}

/// Anything that answers SLM requests. Responses come back in request order.
pub trait SlmBackend {
    fn complete(&mut self, requests: &[SlmRequest]) -> Result<Vec<SlmResponse>>;
}

/// Client for an SLM service speaking JSON lines over TCP. All requests of
/// a batch are written before any reply is read; replies are matched back
/// by id.
pub struct SlmClient {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl SlmClient {
    pub fn connect(addr: impl ToSocketAddrs, timeout: Duration) -> Result<Self> {
        let addrs: Vec<SocketAddr> = addr
            .to_socket_addrs()
            .map_err(|e| Error::backend(format!("resolve SLM address: {e}")))?
            .collect();
        let mut last = None;
        for a in addrs {
            match TcpStream::connect_timeout(&a, timeout) {
                Ok(stream) => {
                    stream.set_read_timeout(Some(timeout)).map_err(ndjson::transport_error)?;
                    stream.set_write_timeout(Some(timeout)).map_err(ndjson::transport_error)?;
                    stream.set_nodelay(true).ok();
                    let writer = BufWriter::new(stream.try_clone().map_err(ndjson::transport_error)?);
                    return Ok(Self { reader: BufReader::new(stream), writer });
                }
                Err(e) => last = Some(e),
            }
        }
        Err(Error::backend(format!(
            "cannot reach SLM service: {}",
            last.map_or_else(|| "no address".to_string(), |e| e.to_string())
        )))
    }
}

impl SlmBackend for SlmClient {
    fn complete(&mut self, requests: &[SlmRequest]) -> Result<Vec<SlmResponse>> {
        let sent = Instant::now();
        for r in requests {
            ndjson::write_line(&mut self.writer, r)?;
        }
        let mut got: HashMap<u64, SlmResponse> = HashMap::new();
        while got.len() < requests.len() {
            let mut resp: SlmResponse = ndjson::read_line(&mut self.reader)?
                .ok_or_else(|| Error::backend("SLM service closed the connection"))?;
            if !requests.iter().any(|r| r.id == resp.id) {
                return Err(Error::backend(format!("SLM reply for unknown request id {}", resp.id)));
            }
            resp.latency_ms.get_or_insert(sent.elapsed().as_secs_f64() * 1e3);
            got.insert(resp.id, resp);
        }
        Ok(requests.iter().map(|r| got.remove(&r.id).expect("all ids answered")).collect())
    }
}
