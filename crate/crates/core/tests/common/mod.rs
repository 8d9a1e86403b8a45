//! Scripted WebSocket client speaking the raw tour protocol.
#![allow(dead_code)]

use std::net::SocketAddr;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

use sagetour::dataset::sample_ball;
use sagetour::server::Server;
use sagetour::tour::PathConfig;
use sagetour::TourRun;

const RECV_TIMEOUT: Duration = Duration::from_secs(10);

/// Starts a server for a uniform-ball dataset on an ephemeral port.
pub async fn start_ball_server(n: usize, p: usize, seed: u64, fps: f64) -> (SocketAddr, TourRun) {
    let data = sample_ball(n, p, 1.0, 1);
    let run = TourRun::new(data, PathConfig { seed, ..PathConfig::default() }).unwrap();
    let server = Server::bind("127.0.0.1:0", run.clone(), fps).await.unwrap();
    let addr = server.local_addr().unwrap();
    tokio::spawn(server.run());
    (addr, run)
}

pub struct Client {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
}

impl Client {
    pub async fn connect(addr: SocketAddr) -> Client {
        let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}")).await.unwrap();
        Client { ws }
    }

    pub async fn send_raw(&mut self, text: &str) {
        self.ws.send(Message::text(text)).await.unwrap();
    }

    pub async fn send(&mut self, kind: &str, payload: Value) {
        self.send_raw(&json!({ "type": kind, "payload": payload }).to_string()).await;
    }

    /// Next text message, unparsed.
    pub async fn recv_text(&mut self) -> String {
        loop {
            let msg = tokio::time::timeout(RECV_TIMEOUT, self.ws.next())
                .await
                .expect("timed out waiting for the server")
                .expect("connection closed")
                .expect("websocket error");
            if let Message::Text(t) = msg {
                return t.as_str().to_string();
            }
        }
    }

    pub async fn recv(&mut self) -> Value {
        serde_json::from_str(&self.recv_text().await).unwrap()
    }

    /// Next message of type `kind`, skipping others.
    pub async fn recv_kind(&mut self, kind: &str) -> Value {
        loop {
            let m = self.recv().await;
            if m["type"] == kind {
                return m;
            }
        }
    }

    /// Waits for a message that is not a frame; frames seen on the way are
    /// returned too.
    pub async fn recv_until_non_frame(&mut self) -> (Vec<Value>, Value) {
        let mut frames = Vec::new();
        loop {
            let m = self.recv().await;
            if m["type"] == "frame" {
                frames.push(m);
            } else {
                return (frames, m);
            }
        }
    }

    /// Pauses playback and returns once the server has acted on it. The
    /// invalid rate request acts as a barrier: its error reply is sent after
    /// the pause took effect, so no frame follows it until `play`.
    pub async fn pause_and_sync(&mut self) -> Vec<Value> {
        self.send("playback", json!({ "action": "pause" })).await;
        self.send("playback", json!({ "action": "rate", "fps": -1 })).await;
        let (frames, reply) = self.recv_until_non_frame().await;
        assert_eq!(reply["type"], "error", "barrier reply: {reply}");
        frames
    }

    pub async fn close(mut self) {
        let _ = self.ws.close(None).await;
    }
}

pub fn frame_points(frame: &Value) -> Vec<[f64; 2]> {
    frame["payload"]["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| [p[0].as_f64().unwrap(), p[1].as_f64().unwrap()])
        .collect()
}

pub fn frame_basis(frame: &Value) -> nalgebra::DMatrix<f64> {
    let rows = frame["payload"]["basis"].as_array().unwrap();
    nalgebra::DMatrix::from_fn(rows.len(), 2, |i, j| rows[i][j].as_f64().unwrap())
}

pub fn frame_index(frame: &Value) -> u64 {
    frame["payload"]["frame_index"].as_u64().unwrap()
}
