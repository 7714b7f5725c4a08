use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use pcmorl_core::envs::{EnvName, EnvParams};
use pcmorl_core::eval::Controller;
use pcmorl_core::nn::{NetworkConfig, PolicyParams, RoutingMode};
use pcmorl_core::preference::PreferenceVector;
use pcmorl_core::rng::RngStream;
use pcmorl_steer::{decode_frame, ServeError, ServeOptions, Session, StateFrame, SteerServer};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Client = WebSocketStream<MaybeTlsStream<TcpStream>>;

fn session(env: EnvName) -> Session {
    let params = EnvParams::default();
    let spec = params.spec(env);
    let policy = PolicyParams::new(NetworkConfig::default(), RoutingMode::Beta, &spec, &mut RngStream::new(3)).unwrap();
    let ctl = Controller::new(policy, env, &params, RngStream::new(9), PreferenceVector::balanced()).unwrap();
    Session::new(ctl, spec.dt, 1.0)
}

async fn start(static_dir: Option<std::path::PathBuf>) -> u16 {
    let server = SteerServer::bind(session(EnvName::Upright), ServeOptions { port: 0, static_dir })
        .await
        .unwrap();
    let port = server.local_addr().unwrap().port();
    tokio::spawn(server.run());
    port
}

async fn connect(port: u16) -> Client {
    connect_async(format!("ws://127.0.0.1:{port}/ws")).await.unwrap().0
}

/// Next text message, or `None` after `wait` of silence.
async fn next_text(ws: &mut Client, wait: Duration) -> Option<String> {
    loop {
        match tokio::time::timeout(wait, ws.next()).await {
            Ok(Some(Ok(Message::Text(t)))) => return Some(t.to_string()),
            Ok(Some(Ok(_))) => continue,
            _ => return None,
        }
    }
}

async fn next_frame(ws: &mut Client) -> StateFrame {
    loop {
        let text = next_text(ws, Duration::from_secs(5)).await.expect("frame within 5 s");
        if let Ok(f) = decode_frame(&text) {
            return f;
        }
    }
}

async fn send(ws: &mut Client, text: &str) {
    ws.send(Message::Text(text.into())).await.unwrap();
}

/// Pauses and returns the last frame emitted before the pause took hold.
async fn pause(ws: &mut Client, mut last: StateFrame) -> StateFrame {
    send(ws, r#"{"type":"pause"}"#).await;
    while let Some(text) = next_text(ws, Duration::from_millis(300)).await {
        last = decode_frame(&text).unwrap();
    }
    last
}

#[tokio::test]
async fn set_pref_shows_in_the_next_frame_and_pause_loses_nothing() {
    let port = start(None).await;
    let mut ws = connect(port).await;
    let first = next_frame(&mut ws).await;
    let before = pause(&mut ws, first).await;

    send(&mut ws, r#"{"type":"set_pref","lambda":[0.3,0.7]}"#).await;
    send(&mut ws, r#"{"type":"resume"}"#).await;
    let after = next_frame(&mut ws).await;
    assert_eq!(after.lambda_applied, [0.3, 0.7]);
    if !before.episode_flags.done {
        assert_eq!(after.t, before.t + 1, "step counter continues across pause");
    }
}

#[tokio::test]
async fn only_the_newest_pending_preference_applies() {
    let port = start(None).await;
    let mut ws = connect(port).await;
    let first = next_frame(&mut ws).await;
    pause(&mut ws, first).await;
    for l in [[1.0, 0.0], [0.9, 0.1], [0.2, 0.8]] {
        send(&mut ws, &format!(r#"{{"type":"set_pref","lambda":[{},{}]}}"#, l[0], l[1])).await;
    }
    send(&mut ws, r#"{"type":"resume"}"#).await;
    assert_eq!(next_frame(&mut ws).await.lambda_applied, [0.2, 0.8]);
}

#[tokio::test]
async fn bad_messages_get_an_error_reply_and_the_connection_stays() {
    let port = start(None).await;
    let mut ws = connect(port).await;
    send(&mut ws, r#"{"type":"teleport"}"#).await;
    send(&mut ws, "{not json").await;
    let mut errors = Vec::new();
    let deadline = Instant::now() + Duration::from_secs(5);
    while errors.len() < 2 && Instant::now() < deadline {
        let text = next_text(&mut ws, Duration::from_secs(5)).await.unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        if v["type"] == "error" {
            errors.push(v["msg"].as_str().unwrap().to_string());
        }
    }
    assert_eq!(errors.len(), 2);
    assert!(errors[0].contains("teleport"), "{}", errors[0]);
    let a = next_frame(&mut ws).await;
    let b = next_frame(&mut ws).await;
    assert!(b.t == a.t + 1 || a.episode_flags.done);
}

#[tokio::test]
async fn simulation_runs_without_clients() {
    let port = start(None).await;
    tokio::time::sleep(Duration::from_millis(400)).await;
    let mut ws = connect(port).await;
    let f = next_frame(&mut ws).await;
    assert!(f.t >= 10, "first frame seen at t = {}", f.t);
}

#[tokio::test]
async fn frames_increase_within_an_episode() {
    let port = start(None).await;
    let mut ws = connect(port).await;
    send(&mut ws, r#"{"type":"set_speed","speed":8}"#).await;
    let mut prev = next_frame(&mut ws).await;
    for _ in 0..200 {
        let f = next_frame(&mut ws).await;
        if prev.episode_flags.done {
            assert_eq!(f.t, 1);
        } else {
            assert_eq!(f.t, prev.t + 1);
        }
        assert!((f.sim_time - f.t as f64 * 0.02).abs() < 1e-12);
        prev = f;
    }
}

async fn mean_spacing(ws: &mut Client, frames: usize) -> f64 {
    next_frame(ws).await;
    let start = Instant::now();
    for _ in 0..frames {
        next_frame(ws).await;
    }
    start.elapsed().as_secs_f64() / frames as f64
}

#[tokio::test]
async fn half_speed_doubles_frame_spacing() {
    let port = start(None).await;
    let mut ws = connect(port).await;
    let normal = mean_spacing(&mut ws, 100).await;
    send(&mut ws, r#"{"type":"set_speed","speed":0.5}"#).await;
    next_frame(&mut ws).await;
    let slow = mean_spacing(&mut ws, 100).await;
    assert!((normal - 0.02).abs() < 0.004, "normal spacing {normal}");
    let ratio = slow / normal;
    assert!((ratio - 2.0).abs() < 0.4, "spacing ratio {ratio}");
}

#[tokio::test]
async fn port_in_use_is_a_bind_error() {
    let first = SteerServer::bind(session(EnvName::Upright), ServeOptions { port: 0, static_dir: None })
        .await
        .unwrap();
    let port = first.local_addr().unwrap().port();
    let second = SteerServer::bind(session(EnvName::Upright), ServeOptions { port, static_dir: None }).await;
    assert!(matches!(second, Err(ServeError::Bind { .. })));
}

#[tokio::test]
async fn serves_static_ui_when_present() {
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<html>steer</html>").unwrap();
    let port = start(Some(dir.path().to_path_buf())).await;
    let mut tcp = TcpStream::connect(("127.0.0.1", port)).await.unwrap();
    tcp.write_all(b"GET / HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").await.unwrap();
    let mut body = String::new();
    tcp.read_to_string(&mut body).await.unwrap();
    assert!(body.starts_with("HTTP/1.1 200"), "{body}");
    assert!(body.contains("<html>steer</html>"));
}

#[tokio::test]
async fn glide_frames_carry_the_glide_render_vector() {
    let server = SteerServer::bind(session(EnvName::Glide), ServeOptions { port: 0, static_dir: None })
        .await
        .unwrap();
    let port = server.local_addr().unwrap().port();
    tokio::spawn(server.run());
    let mut ws = connect(port).await;
    let f = next_frame(&mut ws).await;
    assert_eq!(f.env_state.len(), 7);
    assert_eq!(f.lambda_applied, [0.5, 0.5]);
}
