//! Newline-delimited JSON framing shared by the separator and SLM clients.

use std::io::{self, BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn write_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> Result<()> {
    let mut line = serde_json::to_vec(value).map_err(|e| Error::backend(format!("encode: {e}")))?;
    line.push(b'\n');
    w.write_all(&line).map_err(transport_error)?;
    w.flush().map_err(transport_error)
}

/// Reads one JSON line; `Ok(None)` on a clean end of stream.
pub fn read_line<R: BufRead, T: DeserializeOwned>(r: &mut R) -> Result<Option<T>> {
    let mut buf = String::new();
    loop {
        buf.clear();
        let n = r.read_line(&mut buf).map_err(transport_error)?;
        if n == 0 {
            return Ok(None);
        }
        if !buf.trim().is_empty() {
            break;
        }
    }
    serde_json::from_str(buf.trim_end())
        .map(Some)
        .map_err(|e| Error::backend(format!("protocol violation: {e}")))
}

pub(crate) fn transport_error(e: io::Error) -> Error {
    match e.kind() {
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => Error::backend("timed out waiting for service"),
        _ => Error::backend(format!("transport: {e}")),
    }
}

/// A line-protocol server running on background threads; one thread per
/// connection, requests on a connection answered in arrival order.
pub struct ServerHandle {
    addr: std::net::SocketAddr,
    stop: std::sync::Arc<std::sync::atomic::AtomicBool>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> std::net::SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        use std::sync::atomic::Ordering;
        self.stop.store(true, Ordering::SeqCst);
        let _ = std::net::TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.thread.is_some() {
            self.stop_now();
        }
    }
}

/// Serves `handler` on `listener`. A handler returning `None` sends no
/// reply for that request.
pub fn spawn_server<Req, Resp, F>(listener: std::net::TcpListener, handler: F) -> Result<ServerHandle>
where
    Req: DeserializeOwned + 'static,
    Resp: Serialize + 'static,
    F: Fn(Req) -> Option<Resp> + Send + Sync + 'static,
{
    use std::sync::atomic::{AtomicBool, Ordering};
    use std::sync::Arc;

    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let handler = Arc::new(handler);
    let flag = stop.clone();
    let thread = std::thread::spawn(move || {
        for conn in listener.incoming() {
            if flag.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = conn else { continue };
            let handler = handler.clone();
            std::thread::spawn(move || {
                let Ok(write_half) = stream.try_clone() else { return };
                let mut reader = io::BufReader::new(stream);
                let mut writer = io::BufWriter::new(write_half);
                loop {
                    match read_line::<_, Req>(&mut reader) {
                        Ok(Some(req)) => {
                            if let Some(resp) = handler(req) {
                                if write_line(&mut writer, &resp).is_err() {
                                    break;
                                }
                            }
                        }
                        Ok(None) => break,
                        Err(e) => {
                            log::warn!("dropping connection: {e}");
                            break;
                        }
                    }
                }
            });
        }
    });
    Ok(ServerHandle { addr, stop, thread: Some(thread) })
}
