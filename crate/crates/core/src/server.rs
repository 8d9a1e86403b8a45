//! Live tour sessions over WebSocket.
//!
//! Each connection gets its own tour: a `hello`, then a `frame` message per
//! tick. Client requests land in a per-session mailbox and are applied
//! between frames, so a parameter change shows up in the next frame sent.

use std::net::SocketAddr;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use tokio::net::{TcpListener, TcpStream, ToSocketAddrs};
use tokio::sync::mpsc;
use tokio::time::{interval, Interval, MissedTickBehavior};
use tokio_tungstenite::tungstenite::Message;

use crate::pipeline::{TourFrames, TourRun};
use crate::protocol::{
    parse_client_message, ClientCommand, ErrorMessage, FrameMessage, Hello, Playback, TourMessage, WireParams,
};
use crate::sage::{apply_params_live, SageError};

pub const DEFAULT_FPS: f64 = 25.0;

/// Accepting side of the tour service.
pub struct Server {
    listener: TcpListener,
    run: TourRun,
    fps: f64,
}

impl Server {
    pub async fn bind<A: ToSocketAddrs>(addr: A, run: TourRun, fps: f64) -> std::io::Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(std::io::Error::new(std::io::ErrorKind::InvalidInput, "fps must be positive"));
        }
        let listener = TcpListener::bind(addr).await?;
        Ok(Server { listener, run, fps })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until the listener fails.
    pub async fn run(self) -> std::io::Result<()> {
        loop {
            let (stream, peer) = self.listener.accept().await?;
            let run = self.run.clone();
            let fps = self.fps;
            tokio::spawn(async move {
                log::info!("client {peer} connected");
                if let Err(e) = session(stream, run, fps).await {
                    log::warn!("session with {peer} ended: {e}");
                } else {
                    log::info!("client {peer} disconnected");
                }
            });
        }
    }
}

/// Binds and serves forever.
pub async fn serve<A: ToSocketAddrs>(run: TourRun, bind: A, fps: f64) -> std::io::Result<()> {
    let server = Server::bind(bind, run, fps).await?;
    log::info!("serving tour on ws://{}", server.local_addr()?);
    server.run().await
}

enum Inbox {
    Command(ClientCommand),
    Invalid(String),
}

fn ticker(fps: f64) -> Interval {
    let mut t = interval(Duration::from_secs_f64(1.0 / fps));
    t.set_missed_tick_behavior(MissedTickBehavior::Delay);
    t
}

fn field_error(e: &SageError) -> TourMessage {
    let field = match e {
        SageError::NonPositive { field, .. } => Some(field.to_string()),
        _ => None,
    };
    TourMessage::Error(ErrorMessage { reason: e.to_string(), field })
}

type WsError = tokio_tungstenite::tungstenite::Error;

async fn session(stream: TcpStream, run: TourRun, fps: f64) -> Result<(), WsError> {
    let ws = tokio_tungstenite::accept_async(stream).await?;
    let (mut tx, mut rx) = ws.split();

    let (mail_tx, mut mailbox) = mpsc::unbounded_channel();
    let reader = tokio::spawn(async move {
        while let Some(msg) = rx.next().await {
            let item = match msg {
                Ok(Message::Text(t)) => match parse_client_message(t.as_str()) {
                    Ok(cmd) => Inbox::Command(cmd),
                    Err(reason) => Inbox::Invalid(reason),
                },
                Ok(Message::Binary(_)) => Inbox::Invalid("binary messages are not supported".into()),
                Ok(Message::Close(_)) | Err(_) => break,
                Ok(_) => continue,
            };
            if mail_tx.send(item).is_err() {
                break;
            }
        }
    });

    let dataset = run.dataset.clone();
    let mut path_cfg = run.path;
    path_cfg.max_targets = None;
    let mut frames = Some(TourFrames::unbounded(&TourRun { path: path_cfg, ..run.clone() }));
    let mut params = run.params;
    let mut fps = fps;
    let mut playing = true;

    let hello = TourMessage::Hello(Hello {
        n: dataset.n(),
        p: dataset.p(),
        column_names: dataset.column_names().to_vec(),
        has_labels: dataset.labels().is_some(),
        labels: dataset.labels().map(<[String]>::to_vec),
        colors: run.colors.clone(),
        params: WireParams::from(&params),
        seed: path_cfg.seed,
        fps,
        step_angle: path_cfg.step_angle,
    });
    tx.send(Message::text(hello.to_json())).await?;

    let mut clock = ticker(fps);
    let result = loop {
        let inbox = if playing {
            tokio::select! {
                _ = clock.tick() => None,
                m = mailbox.recv() => Some(m),
            }
        } else {
            Some(mailbox.recv().await)
        };

        match inbox {
            // client went away
            Some(None) => break Ok(()),
            Some(Some(Inbox::Invalid(reason))) => {
                if let Err(e) = tx.send(Message::text(TourMessage::error(reason).to_json())).await {
                    break Err(e);
                }
            }
            Some(Some(Inbox::Command(cmd))) => {
                let reply = match cmd {
                    ClientCommand::SetParams(patch) => match apply_params_live(&params, &patch) {
                        Ok(p) => {
                            params = p;
                            None
                        }
                        Err(e) => Some(field_error(&e)),
                    },
                    ClientCommand::Playback(Playback::Pause) => {
                        playing = false;
                        None
                    }
                    ClientCommand::Playback(Playback::Play) => {
                        if !playing {
                            playing = true;
                            clock = ticker(fps);
                        }
                        None
                    }
                    ClientCommand::Playback(Playback::Rate { fps: new }) => {
                        if new > 0.0 && new.is_finite() {
                            fps = new;
                            clock = ticker(fps);
                            None
                        } else {
                            Some(TourMessage::Error(ErrorMessage {
                                reason: format!("fps must be positive, got {new}"),
                                field: Some("fps".into()),
                            }))
                        }
                    }
                    ClientCommand::Reseed(seed) => {
                        path_cfg.seed = seed;
                        if let Some(f) = frames.as_mut() {
                            f.reseed(path_cfg);
                        }
                        None
                    }
                };
                if let Some(reply) = reply {
                    if let Err(e) = tx.send(Message::text(reply.to_json())).await {
                        break Err(e);
                    }
                }
            }
            None => {
                let mut producer = frames.take().expect("producer is returned after every frame");
                producer.set_params(params);
                let (producer, frame) = tokio::task::spawn_blocking(move || {
                    let frame = producer.next();
                    (producer, frame)
                })
                .await
                .expect("frame computation panicked");
                frames = Some(producer);
                let Some(frame) = frame else { break Ok(()) };
                let msg = TourMessage::Frame(FrameMessage::from(&frame));
                if let Err(e) = tx.send(Message::text(msg.to_json())).await {
                    break Err(e);
                }
            }
        }
    };
    reader.abort();
    match result {
        Err(WsError::ConnectionClosed) | Err(WsError::AlreadyClosed) => Ok(()),
        other => other,
    }
}
