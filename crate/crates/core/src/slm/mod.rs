//! Streaming interaction with a speech language model.
//!
//! Speech chunks accumulate in a [`SlidingWindow`] (at most 30 s of audio
//! and a 50-word text history). Every speech chunk triggers a transcribe
//! request in the tagged speaker's language and a translate request into
//! the other participant's language. [`MockSlm`] answers from scene
//! references so the whole loop can run offline.

mod mock;
mod pipeline;
mod prompts;
mod protocol;
mod window;

pub use mock::{mock_slm, MockMode, MockSlm};
pub use pipeline::{events_to_hypothesis, run_stream, ReferenceChannel, StreamConfig, StreamEvent, StreamInput, StreamReport, StreamStats};
pub use prompts::{PromptCatalog, Task};
pub use protocol::{build_requests, AudioPayload, SlmBackend, SlmClient, SlmRequest, SlmResponse, DEFAULT_SLM_TIMEOUT};
pub use window::{SlidingWindow, WindowChunk, MAX_HISTORY_WORDS, MAX_WINDOW_SECONDS};
