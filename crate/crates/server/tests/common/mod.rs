#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use futures::StreamExt;
use prefgait::query::SessionConfig;
use prefgait::session_log::LogEvent;
use prefgait_server::commands;
use prefgait_server::config::ServiceConfig;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

#[derive(Clone)]
pub struct ManualClock(Arc<Mutex<DateTime<Utc>>>);

impl ManualClock {
    pub fn new() -> Self {
        let start = DateTime::parse_from_rfc3339("2024-03-01T09:00:00Z").unwrap().with_timezone(&Utc);
        Self(Arc::new(Mutex::new(start)))
    }

    pub fn advance(&self, seconds: f64) {
        let mut t = self.0.lock().unwrap();
        *t = prefgait::session::seconds_after(*t, seconds);
    }

    pub fn now(&self) -> DateTime<Utc> {
        *self.0.lock().unwrap()
    }
}

pub struct TestServer {
    pub base: String,
    pub clock: ManualClock,
    pub http: reqwest::Client,
    stop: Option<oneshot::Sender<()>>,
    task: Option<JoinHandle<Result<(), commands::CommandError>>>,
}

impl TestServer {
    pub async fn start(data_dir: &Path) -> Self {
        Self::start_with(data_dir, SessionConfig::default()).await
    }

    pub async fn start_with(data_dir: &Path, defaults: SessionConfig) -> Self {
        let clock = ManualClock::new();
        let config = ServiceConfig {
            port: 0,
            data_dir: data_dir.to_path_buf(),
            durable: false,
            session_defaults: defaults,
            ..ServiceConfig::default()
        };
        let (ready_tx, ready_rx) = oneshot::channel::<SocketAddr>();
        let (stop_tx, stop_rx) = oneshot::channel::<()>();
        let c = clock.clone();
        let task = tokio::spawn(commands::serve(
            config,
            Arc::new(move || c.now()),
            move |addr| {
                let _ = ready_tx.send(addr);
            },
            async move {
                let _ = stop_rx.await;
            },
        ));
        let addr = ready_rx.await.expect("server did not start");
        Self {
            base: format!("http://{addr}"),
            clock,
            http: reqwest::Client::new(),
            stop: Some(stop_tx),
            task: Some(task),
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    pub async fn get(&self, path: &str) -> (u16, serde_json::Value) {
        let r = self.http.get(self.url(path)).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap_or(serde_json::Value::Null))
    }

    pub async fn post_json(&self, path: &str, body: serde_json::Value) -> (u16, serde_json::Value) {
        let r = self.http.post(self.url(path)).json(&body).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap_or(serde_json::Value::Null))
    }

    pub async fn post_text(&self, path: &str, body: String) -> (u16, serde_json::Value) {
        let r = self.http.post(self.url(path)).body(body).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap_or(serde_json::Value::Null))
    }

    /// Creates a live session and returns its id.
    pub async fn create_live(&self, config: serde_json::Value) -> String {
        let (status, body) = self
            .post_json("/sessions", serde_json::json!({ "mode": "live", "config": config }))
            .await;
        assert_eq!(status, 201, "{body}");
        body["session_id"].as_str().unwrap().to_owned()
    }

    /// Waits out the answer lockout and submits `selected`.
    pub async fn answer(&self, id: &str, selected: &str) -> serde_json::Value {
        self.clock.advance(45.0);
        let (status, body) = self
            .post_json(&format!("/sessions/{id}/choice"), serde_json::json!({ "selected": selected }))
            .await;
        assert_eq!(status, 200, "{body}");
        body
    }

    pub async fn shutdown(mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(task) = self.task.take() {
            tokio::time::timeout(Duration::from_secs(10), task)
                .await
                .expect("server did not stop")
                .unwrap()
                .unwrap();
        }
    }
}

/// One parsed server-sent event.
#[derive(Debug, Clone, PartialEq)]
pub struct Sse {
    pub id: usize,
    pub kind: String,
    pub event: LogEvent,
}

/// Reads `count` events from an SSE response, failing after `wait`.
pub async fn read_sse(resp: reqwest::Response, count: usize, wait: Duration) -> Vec<Sse> {
    let mut stream = resp.bytes_stream();
    let mut buf = String::new();
    let mut out = Vec::new();
    let deadline = tokio::time::Instant::now() + wait;
    while out.len() < count {
        let chunk = tokio::time::timeout_at(deadline, stream.next())
            .await
            .unwrap_or_else(|_| panic!("timed out after {} of {count} events", out.len()));
        let Some(chunk) = chunk else { break };
        buf.push_str(std::str::from_utf8(&chunk.unwrap()).unwrap());
        while let Some(end) = buf.find("\n\n") {
            let block: String = buf.drain(..end + 2).collect();
            let (mut id, mut kind, mut data) = (None, String::new(), String::new());
            for line in block.lines() {
                if let Some(v) = line.strip_prefix("id:") {
                    id = Some(v.trim().parse().unwrap());
                } else if let Some(v) = line.strip_prefix("event:") {
                    kind = v.trim().to_owned();
                } else if let Some(v) = line.strip_prefix("data:") {
                    data.push_str(v.trim_start());
                }
            }
            if let Some(id) = id {
                out.push(Sse {
                    id,
                    kind,
                    event: serde_json::from_str(&data).unwrap(),
                });
            }
        }
    }
    out
}

/// Reads whatever arrives within `wait`.
pub async fn drain_sse(resp: reqwest::Response, wait: Duration) -> Vec<Sse> {
    let mut stream = resp.bytes_stream();
    let mut text = String::new();
    let deadline = tokio::time::Instant::now() + wait;
    while let Ok(Some(Ok(chunk))) = tokio::time::timeout_at(deadline, stream.next()).await {
        text.push_str(std::str::from_utf8(&chunk).unwrap());
    }
    text.split("\n\n")
        .filter_map(|block| {
            let id = block.lines().find_map(|l| l.strip_prefix("id:"))?.trim().parse().ok()?;
            let kind = block.lines().find_map(|l| l.strip_prefix("event:"))?.trim().to_owned();
            let data = block.lines().find_map(|l| l.strip_prefix("data:"))?.trim_start();
            Some(Sse {
                id,
                kind,
                event: serde_json::from_str(data).ok()?,
            })
        })
        .collect()
}
