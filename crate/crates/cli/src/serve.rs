//! Live session: the simulation runs on its own thread at wall-clock pace
//! with a human-driven target; WebSocket clients receive state snapshots and
//! send target controls, perturbations and resets.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::{broadcast, mpsc, oneshot, watch};

use pursuit_core::metrics::{control_difference, match_trajectories, mte, route_completion, TrajPoint, R_COMPLETE};
use pursuit_core::mpc::safe_distance;
use pursuit_core::sim::{Episode, Frame, PerturbationConfig, TargetDriver, Track, WorldConfig};
use pursuit_core::vehicle::{ControlCommand, VehicleState};

use crate::args::{parse_track, ServeArgs};
use crate::commands::build_controller;

/// Ticks between live metric refreshes.
const METRICS_EVERY: usize = 20;
/// Points per trajectory used by the live metrics.
const METRICS_POINTS: usize = 200;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClientMessage {
    Control { throttle: f64, steer: f64 },
    Perturb { level: u32 },
    Reset { track: String },
}

/// Parse one client text frame. Unknown types and malformed messages are
/// logged and dropped.
pub fn parse_client_message(text: &str) -> Option<ClientMessage> {
    let value: serde_json::Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => {
            log::warn!("dropping malformed message: {e}");
            return None;
        }
    };
    let kind = value.get("type").and_then(|t| t.as_str()).unwrap_or("").to_string();
    if !matches!(kind.as_str(), "control" | "perturb" | "reset") {
        log::warn!("ignoring message of unknown type {kind:?}");
        return None;
    }
    match serde_json::from_value(value) {
        Ok(m) => Some(m),
        Err(e) => {
            log::warn!("dropping invalid {kind} message: {e}");
            None
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LiveMetrics {
    pub rc: f64,
    pub mte: f64,
    pub cd: f64,
}

fn thin<T: Copy>(items: &[T], max: usize) -> Vec<T> {
    pursuit_core::metrics::downsample_indices(items.len(), max)
        .into_iter()
        .map(|i| items[i])
        .collect()
}

/// Running RC, MTE and CD of the ego against the target's driven path, on a
/// thinned copy of the frames so the cost stays bounded.
pub fn live_metrics(frames: &[Frame]) -> LiveMetrics {
    if frames.is_empty() {
        return LiveMetrics::default();
    }
    let f = thin(frames, METRICS_POINTS);
    let ego: Vec<(f64, f64)> = frames.iter().map(|f| (f.ego.pose.x, f.ego.pose.y)).collect();
    let path: Vec<(f64, f64)> = f.iter().map(|f| (f.target.pose.x, f.target.pose.y)).collect();
    let track = |pick: fn(&Frame) -> (VehicleState, ControlCommand)| -> Vec<TrajPoint> {
        f.iter()
            .map(|fr| {
                let (s, u) = pick(fr);
                TrajPoint {
                    x: s.pose.x,
                    y: s.pose.y,
                    throttle: u.throttle,
                    steer: u.steer,
                }
            })
            .collect()
    };
    let ego_t = track(|f| (f.ego, f.command));
    let tgt_t = track(|f| (f.target, f.target_command));
    let rc = if path.len() >= 2 {
        route_completion(&thin(&ego, 4 * METRICS_POINTS), &path, R_COMPLETE)
    } else {
        0.0
    };
    let (mte_v, cd_v) = match match_trajectories(&ego_t, &tgt_t, METRICS_POINTS) {
        Ok(m) => (mte(&m).unwrap_or(0.0), control_difference(&m).unwrap_or(0.0)),
        Err(_) => (0.0, 0.0),
    };
    LiveMetrics { rc, mte: mte_v, cd: cd_v }
}

pub fn state_message(t: f64, ego: &VehicleState, target: &VehicleState, metrics: &LiveMetrics, perturb_active: bool) -> String {
    let car = |s: &VehicleState| json!({"x": s.pose.x, "y": s.pose.y, "theta": s.pose.theta, "v": s.v});
    json!({
        "type": "state",
        "t": t,
        "ego": car(ego),
        "target": car(target),
        "gap": ego.distance_to(target),
        "metrics": {"rc": metrics.rc, "mte": metrics.mte, "cd": metrics.cd},
        "perturb_active": perturb_active,
    })
    .to_string()
}

fn serve_world(args: &ServeArgs) -> Result<WorldConfig> {
    let mut world = args.world.world();
    if args.world.max_frames.is_none() {
        world.max_frames = usize::MAX;
    }
    // Spawn at the standstill ideal gap, so an idle target keeps the ego put.
    world.initial_gap = 2.0 * world.mpc.w2 * safe_distance(0.0, &world.mpc)?;
    Ok(world)
}

struct SimLink {
    states: broadcast::Sender<String>,
    controls: mpsc::UnboundedReceiver<ClientMessage>,
    stop: Arc<AtomicBool>,
}

fn sim_thread(args: ServeArgs, link: SimLink, ready: oneshot::Sender<Result<()>>) {
    let SimLink { states, mut controls, stop } = link;
    let setup = (|| -> Result<_> {
        let world = serve_world(&args)?;
        let ctl = build_controller(&args.controller, &world)?;
        Ok((world, ctl, parse_track(&args.track)?))
    })();
    let (world, mut ctl, mut track) = match setup {
        Ok(v) => {
            let _ = ready.send(Ok(()));
            v
        }
        Err(e) => {
            let _ = ready.send(Err(e));
            return;
        }
    };
    let noise = args.perception.preset().model(args.perception.seed);
    let dt = Duration::from_secs_f64(world.params.dt);
    'session: while !stop.load(Ordering::Relaxed) {
        let start = track.script().start_pose();
        let ep = Episode::new(
            world.clone(),
            TargetDriver::External(ControlCommand::IDLE),
            start,
            ctl.as_mut(),
            noise.clone(),
            None,
        );
        let mut ep = match ep {
            Ok(ep) => ep,
            Err(e) => {
                log::error!("cannot start session: {e}");
                return;
            }
        };
        log::info!("session on {track}");
        let mut metrics = LiveMetrics::default();
        let mut next = Instant::now();
        let mut ticks = 0usize;
        while !stop.load(Ordering::Relaxed) {
            while let Ok(msg) = controls.try_recv() {
                match msg {
                    ClientMessage::Control { throttle, steer } => {
                        if let Ok(u) = ControlCommand::clamp(throttle, steer) {
                            ep.driver = TargetDriver::External(u);
                        }
                    }
                    ClientMessage::Perturb { level } => {
                        let cfg = (level > 0).then(|| PerturbationConfig::new(f64::from(level), args.perception.seed));
                        ep.set_perturbation(cfg);
                    }
                    ClientMessage::Reset { track: name } => match name.parse::<Track>() {
                        Ok(t) => {
                            track = t;
                            continue 'session;
                        }
                        Err(e) => log::warn!("ignoring reset: {e}"),
                    },
                }
            }
            // Catch up on every due physics tick, then publish once.
            let mut ended = None;
            while next <= Instant::now() {
                next += dt;
                ticks += 1;
                if let Some(reason) = ep.step() {
                    ended = Some(reason);
                    break;
                }
            }
            if Instant::now().duration_since(next) > Duration::from_secs(1) {
                log::warn!("simulation fell behind the wall clock; resynchronizing");
                next = Instant::now();
            }
            if ticks >= METRICS_EVERY || ended.is_some() {
                ticks = 0;
                metrics = live_metrics(&ep.frames);
            }
            let perturb_active = ep.frames.last().is_some_and(|f| f.perturbed);
            let t = ep.frame_index() as f64 * world.params.dt;
            // No receivers is fine: nobody is watching yet.
            let _ = states.send(state_message(t, &ep.ego, &ep.target, &metrics, perturb_active));
            if let Some(reason) = ended {
                log::info!("session ended ({reason}); restarting");
                continue 'session;
            }
            std::thread::sleep(next.saturating_duration_since(Instant::now()));
        }
    }
}

#[derive(Clone)]
struct AppState {
    states: broadcast::Sender<String>,
    controls: mpsc::UnboundedSender<ClientMessage>,
    shutdown: watch::Receiver<bool>,
}

async fn index(ws: Option<WebSocketUpgrade>, State(s): State<AppState>) -> Response {
    match ws {
        Some(ws) => ws.on_upgrade(move |socket| client(socket, s)).into_response(),
        None => "pursuit live session: open a WebSocket on this URL\n".into_response(),
    }
}

async fn client(socket: WebSocket, s: AppState) {
    let (mut sink, mut stream) = socket.split();
    let mut states = s.states.subscribe();
    let mut shutdown = s.shutdown.clone();
    loop {
        tokio::select! {
            state = states.recv() => match state {
                Ok(text) => {
                    if sink.send(Message::Text(text)).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => log::warn!("client lagged by {n} states"),
                Err(broadcast::error::RecvError::Closed) => break,
            },
            msg = stream.next() => match msg {
                Some(Ok(Message::Text(text))) => {
                    if let Some(m) = parse_client_message(&text) {
                        let _ = s.controls.send(m);
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
            _ = shutdown.changed() => {
                let _ = sink.send(Message::Close(None)).await;
                break;
            }
        }
    }
}

pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: Arc<AtomicBool>,
    shutdown: watch::Sender<bool>,
    server: tokio::task::JoinHandle<std::io::Result<()>>,
    sim: std::thread::JoinHandle<()>,
}

impl ServerHandle {
    pub async fn shutdown(self) -> Result<()> {
        self.stop.store(true, Ordering::Relaxed);
        let _ = self.shutdown.send(true);
        self.server.await.context("server task")??;
        tokio::task::spawn_blocking(move || self.sim.join())
            .await?
            .map_err(|_| anyhow::anyhow!("simulation thread panicked"))?;
        Ok(())
    }
}

/// Bind, start the simulation and begin accepting clients.
pub async fn start(args: &ServeArgs) -> Result<ServerHandle> {
    let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port))
        .await
        .with_context(|| format!("binding {}:{}", args.host, args.port))?;
    let addr = listener.local_addr()?;
    let (states, _) = broadcast::channel(64);
    let (controls_tx, controls_rx) = mpsc::unbounded_channel();
    let stop = Arc::new(AtomicBool::new(false));
    let (ready_tx, ready_rx) = oneshot::channel();
    let link = SimLink {
        states: states.clone(),
        controls: controls_rx,
        stop: stop.clone(),
    };
    let sim_args = args.clone();
    let sim = std::thread::Builder::new()
        .name("pursuit-sim".into())
        .spawn(move || sim_thread(sim_args, link, ready_tx))?;
    ready_rx.await.context("simulation thread exited during startup")??;

    let (shutdown_tx, shutdown_rx) = watch::channel(false);
    let state = AppState {
        states,
        controls: controls_tx,
        shutdown: shutdown_rx.clone(),
    };
    let app = Router::new()
        .route("/", get(index))
        .route("/ws", get(index))
        .with_state(state);
    let mut rx = shutdown_rx;
    let server = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async move {
                let _ = rx.changed().await;
            })
            .await
    });
    log::info!("serving on ws://{addr}/");
    Ok(ServerHandle {
        addr,
        stop,
        shutdown: shutdown_tx,
        server,
        sim,
    })
}

pub fn run_blocking(args: &ServeArgs) -> Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let handle = start(args).await?;
        println!("serving on ws://{}/", handle.addr);
        tokio::signal::ctrl_c().await?;
        log::info!("shutting down");
        handle.shutdown().await
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn client_messages_parse() {
        assert_eq!(
            parse_client_message(r#"{"type":"control","throttle":1,"steer":-0.5}"#),
            Some(ClientMessage::Control { throttle: 1.0, steer: -0.5 })
        );
        assert_eq!(
            parse_client_message(r#"{"type":"perturb","level":3}"#),
            Some(ClientMessage::Perturb { level: 3 })
        );
        assert_eq!(
            parse_client_message(r#"{"type":"reset","track":"figure8"}"#),
            Some(ClientMessage::Reset { track: "figure8".into() })
        );
        assert_eq!(parse_client_message(r#"{"type":"honk"}"#), None);
        assert_eq!(parse_client_message(r#"{"type":"control","throttle":"x"}"#), None);
        assert_eq!(parse_client_message("not json"), None);
    }

    #[test]
    fn state_message_fields() {
        let ego = VehicleState::new(1.0, 2.0, 0.5, 3.0);
        let target = VehicleState::new(1.0, 8.0, 0.5, 4.0);
        let text = state_message(1.25, &ego, &target, &LiveMetrics { rc: 50.0, mte: 1.0, cd: 0.2 }, true);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["type"], "state");
        assert_eq!(v["t"], 1.25);
        assert_eq!(v["ego"]["theta"], 0.5);
        assert_eq!(v["target"]["v"], 4.0);
        assert_eq!(v["gap"], 6.0);
        assert_eq!(v["metrics"]["rc"], 50.0);
        assert_eq!(v["perturb_active"], true);
    }
}
