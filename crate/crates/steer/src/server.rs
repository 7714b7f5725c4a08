//! axum server: `/ws` for frames and commands, optional static UI at `/`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc};
use tokio::time::Instant;
use tower_http::services::ServeDir;

use crate::protocol::{encode_error, encode_frame, parse_command, ClientCommand};
use crate::session::Session;

/// Frames buffered per client before a slow client starts skipping.
const FRAME_BUFFER: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind port {port}: {source}")]
    Bind {
        port: u16,
        #[source]
        source: std::io::Error,
    },
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("simulation failed: {0}")]
    Simulation(#[from] pcmorl_core::Error),
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    /// `0` picks a free port.
    pub port: u16,
    /// Directory served at `/` when it exists.
    pub static_dir: Option<PathBuf>,
}

#[derive(Clone)]
struct AppState {
    commands: mpsc::UnboundedSender<ClientCommand>,
    frames: broadcast::Sender<String>,
}

/// A bound but not yet running service.
pub struct SteerServer {
    listener: TcpListener,
    session: Session,
    static_dir: Option<PathBuf>,
}

impl SteerServer {
    pub async fn bind(session: Session, options: ServeOptions) -> Result<Self, ServeError> {
        let listener = TcpListener::bind(("0.0.0.0", options.port))
            .await
            .map_err(|source| ServeError::Bind {
                port: options.port,
                source,
            })?;
        Ok(Self {
            listener,
            session,
            static_dir: options.static_dir,
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves until the simulation fails or the listener errors.
    pub async fn run(self) -> Result<(), ServeError> {
        let (cmd_tx, cmd_rx) = mpsc::unbounded_channel();
        let (frame_tx, _) = broadcast::channel(FRAME_BUFFER);
        let state = AppState {
            commands: cmd_tx,
            frames: frame_tx.clone(),
        };
        let mut app = Router::new().route("/ws", get(upgrade)).with_state(state);
        if let Some(dir) = self.static_dir.filter(|d| d.is_dir()) {
            app = app.fallback_service(ServeDir::new(dir));
        }
        let sim = tokio::spawn(simulate(self.session, cmd_rx, frame_tx));
        tokio::select! {
            r = axum::serve(self.listener, app) => r.map_err(ServeError::from),
            r = sim => r.expect("simulation task panicked"),
        }
    }
}

/// Paces the session against the wall clock. While paused it sleeps until a
/// command arrives; frames go to whoever is subscribed (none is fine).
async fn simulate(
    mut session: Session,
    mut commands: mpsc::UnboundedReceiver<ClientCommand>,
    frames: broadcast::Sender<String>,
) -> Result<(), ServeError> {
    let mut next = Instant::now();
    loop {
        let mut batch = Vec::new();
        while let Ok(c) = commands.try_recv() {
            batch.push(c);
        }
        session.apply_all(batch);
        if session.paused() {
            match commands.recv().await {
                Some(c) => session.apply(c),
                None => return Ok(()),
            }
            next = Instant::now();
            continue;
        }
        let frame = session.advance()?;
        let _ = frames.send(encode_frame(&frame));
        next += Duration::from_secs_f64(session.step_interval());
        let now = Instant::now();
        if next < now {
            next = now;
        }
        tokio::time::sleep_until(next).await;
    }
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client(socket, state))
}

/// Forwards frames out and commands in. Lagging clients skip frames; a bad
/// command gets an error reply and the connection stays open.
async fn client(socket: WebSocket, state: AppState) {
    let (mut sink, mut stream) = socket.split();
    let mut frames = state.frames.subscribe();
    let (reply_tx, mut reply_rx) = mpsc::unbounded_channel::<String>();
    let writer = tokio::spawn(async move {
        loop {
            let text = tokio::select! {
                reply = reply_rx.recv() => match reply {
                    Some(t) => t,
                    None => break,
                },
                frame = frames.recv() => match frame {
                    Ok(t) => t,
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => break,
                },
            };
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });
    while let Some(Ok(msg)) = stream.next().await {
        match msg {
            Message::Text(text) => match parse_command(&text) {
                Ok(c) => {
                    if state.commands.send(c).is_err() {
                        break;
                    }
                }
                Err(e) => {
                    let _ = reply_tx.send(encode_error(&e.to_string()));
                }
            },
            Message::Close(_) => break,
            _ => {}
        }
    }
    drop(reply_tx);
    writer.abort();
}
