//! Starts the service in-process and walks through a short live session
//! over HTTP, answering each query after the walking lockout. Exposure and
//! washout are shortened to fractions of a second so the demo finishes
//! quickly; the default protocol waits 45 s per answer.

use std::sync::Arc;
use std::time::Duration;

use futures::StreamExt;
use prefgait_server::commands;
use prefgait_server::config::ServiceConfig;
use serde_json::{json, Value};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = tempfile::tempdir()?;
    let config = ServiceConfig {
        port: 0,
        data_dir: data.path().to_path_buf(),
        ..ServiceConfig::default()
    };
    let (ready_tx, ready_rx) = tokio::sync::oneshot::channel();
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(commands::serve(
        config,
        Arc::new(chrono::Utc::now),
        move |addr| {
            let _ = ready_tx.send(addr);
        },
        async move {
            let _ = stop_rx.await;
        },
    ));
    let base = format!("http://{}", ready_rx.await?);
    let http = reqwest::Client::new();

    let created: Value = http
        .post(format!("{base}/sessions"))
        .json(&json!({
            "mode": "live",
            "config": { "comparisons": 4, "exposure_s": 0.2, "washout_s": 0.1, "seed": 5 }
        }))
        .send()
        .await?
        .json()
        .await?;
    let id = created["session_id"].as_str().unwrap().to_owned();
    println!("created {id}");

    // Follow the event stream in the background.
    let events = http.get(format!("{base}/sessions/{id}/events")).send().await?;
    let tail = tokio::spawn(async move {
        let mut stream = events.bytes_stream();
        while let Some(Ok(chunk)) = stream.next().await {
            for line in String::from_utf8_lossy(&chunk).lines() {
                if let Some(kind) = line.strip_prefix("event: ") {
                    println!("    [sse] {kind}");
                }
            }
        }
    });

    loop {
        let resp = http.get(format!("{base}/sessions/{id}/query")).send().await?;
        if !resp.status().is_success() {
            break;
        }
        let q: Value = resp.json().await?;
        let (fa, fb) = (&q["a"]["features"], &q["b"]["features"]);
        println!(
            "comparison {}: A #{} vs B #{}, answer allowed in {} s",
            q["iteration"], q["a"]["index"], q["b"]["index"], q["timing"]["remaining_s"]
        );

        let early = http
            .post(format!("{base}/sessions/{id}/choice"))
            .json(&json!({ "selected": "A" }))
            .send()
            .await?;
        if early.status().as_u16() == 425 {
            println!("  early answer rejected (425)");
        }
        tokio::time::sleep(Duration::from_millis(600)).await;

        // Prefer the profile with more flexion torque.
        let pick = if fa["f4"].as_f64() >= fb["f4"].as_f64() { "A" } else { "B" };
        let answer: Value = http
            .post(format!("{base}/sessions/{id}/choice"))
            .json(&json!({ "selected": pick }))
            .send()
            .await?
            .json()
            .await?;
        println!("  chose {pick}; phase now {}", answer["phase"]);
    }

    let status: Value = http.get(format!("{base}/sessions/{id}")).send().await?.json().await?;
    println!("finished: {}, final profile #{}", status["finished"], status["final_index"]);
    println!("final features {}", status["final_profile"]);

    let _ = stop_tx.send(());
    server.await??;
    tail.await?;
    Ok(())
}
