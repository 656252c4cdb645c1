//! A throwaway HTTP/1.1 server for exercising the API client offline.
//! Every connection gets one response and is closed.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Instant;

#[derive(Clone, Debug)]
pub struct Hit {
    pub path: String,
    pub user_agent: Option<String>,
    pub at: Instant,
}

#[derive(Clone, Debug)]
pub struct Reply {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Reply {
    pub fn ok(body: impl Into<String>) -> Self {
        Reply {
            status: 200,
            headers: vec![("Content-Type".into(), "application/json".into())],
            body: body.into(),
        }
    }

    pub fn status(status: u16) -> Self {
        Reply {
            status,
            headers: vec![],
            body: String::new(),
        }
    }

    pub fn header(mut self, k: &str, v: &str) -> Self {
        self.headers.push((k.into(), v.into()));
        self
    }
}

type Handler = dyn Fn(&str, usize) -> Reply + Send + Sync;

pub struct FixtureServer {
    port: u16,
    hits: Arc<Mutex<Vec<Hit>>>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl FixtureServer {
    /// `handler(path_and_query, hit_index)` builds each response.
    pub fn start(handler: impl Fn(&str, usize) -> Reply + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind fixture server");
        let port = listener.local_addr().unwrap().port();
        let hits = Arc::new(Mutex::new(Vec::new()));
        let stop = Arc::new(AtomicBool::new(false));
        let handler: Arc<Handler> = Arc::new(handler);
        let thread = {
            let (hits, stop) = (hits.clone(), stop.clone());
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    if let Ok(stream) = stream {
                        serve(stream, &hits, handler.as_ref());
                    }
                }
            })
        };
        FixtureServer {
            port,
            hits,
            stop,
            thread: Some(thread),
        }
    }

    /// Serves `routes[(item id)]` for `/timeseries?...&id=N`, 404 otherwise.
    pub fn timeseries(routes: Vec<(u32, String)>) -> Self {
        Self::start(move |path, _| match item_of(path) {
            Some(id) => routes
                .iter()
                .find(|(i, _)| *i == id)
                .map(|(_, body)| Reply::ok(body.clone()))
                .unwrap_or_else(|| Reply::status(404).header("Content-Type", "application/json")),
            None => Reply::status(404),
        })
    }

    pub fn base_url(&self) -> String {
        format!("http://127.0.0.1:{}", self.port)
    }

    pub fn hits(&self) -> Vec<Hit> {
        self.hits.lock().unwrap().clone()
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(("127.0.0.1", self.port));
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub fn item_of(path: &str) -> Option<u32> {
    let query = path.split_once('?')?.1;
    query
        .split('&')
        .find_map(|kv| kv.strip_prefix("id="))
        .and_then(|v| v.parse().ok())
}

fn serve(stream: TcpStream, hits: &Mutex<Vec<Hit>>, handler: &Handler) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
        return;
    }
    let at = Instant::now();
    let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
    let mut user_agent = None;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.trim().eq_ignore_ascii_case("user-agent") {
                user_agent = Some(v.trim().to_string());
            }
        }
    }
    let index = {
        let mut h = hits.lock().unwrap();
        h.push(Hit {
            path: path.clone(),
            user_agent,
            at,
        });
        h.len() - 1
    };
    let reply = handler(&path, index);
    let mut out = stream;
    let mut head = format!("HTTP/1.1 {} Fixture\r\nContent-Length: {}\r\nConnection: close\r\n", reply.status, reply.body.len());
    for (k, v) in &reply.headers {
        head.push_str(&format!("{k}: {v}\r\n"));
    }
    head.push_str("\r\n");
    let _ = out.write_all(head.as_bytes());
    let _ = out.write_all(reply.body.as_bytes());
    let _ = out.flush();
}

/// Raw numbers behind one fixture record.
#[derive(Clone, Copy, Debug)]
pub struct RawDay {
    pub timestamp: i64,
    pub avg_low: u64,
    pub avg_high: u64,
    pub low_volume: u64,
    pub high_volume: u64,
}

/// 30 daily records starting 2021-12-01 00:00 UTC with item-specific
/// deterministic prices and volumes.
pub fn thirty_days(item: u32) -> Vec<RawDay> {
    (0..30)
        .map(|d| {
            let k = item as u64 * 37 + d as u64;
            RawDay {
                timestamp: 1_638_316_800 + d * 86_400,
                avg_low: 1_000 * item as u64 + (k * 7919) % 113,
                avg_high: 1_000 * item as u64 + (k * 7919) % 113 + 5 + k % 4,
                low_volume: (k * 104_729) % 500,
                high_volume: (k * 1_299_709) % 300 + 1,
            }
        })
        .collect()
}

pub fn payload(item: u32, days: &[RawDay]) -> String {
    let records: Vec<String> = days
        .iter()
        .map(|r| {
            format!(
                r#"{{"timestamp":{},"avgHighPrice":{},"avgLowPrice":{},"highPriceVolume":{},"lowPriceVolume":{}}}"#,
                r.timestamp, r.avg_high, r.avg_low, r.high_volume, r.low_volume
            )
        })
        .collect();
    format!(r#"{{"data":[{}],"itemId":{}}}"#, records.join(","), item)
}
