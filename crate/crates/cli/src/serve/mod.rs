//! Live session server: seat workers, the session actor and the network
//! front ends.

pub mod config;
pub mod core;
pub mod net;
pub mod sources;

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use pulseplay_core::session::{schedule_conditions, ConditionSchedule, Seat};
use pulseplay_core::{Error, Result, SessionState};
use tokio::net::TcpListener;
use tokio::sync::{mpsc, watch};
use tokio::task::JoinHandle;

pub use self::config::{SeatConfig, SessionConfig, SourceConfig};
use self::core::{run_core, CoreChannels};
use self::net::{router, serve_tcp, NetCtx};
pub use self::sources::LatencyStats;
use self::sources::SeatWorker;

pub struct ServerHandle {
    pub ws_addr: SocketAddr,
    pub tcp_addr: Option<SocketAddr>,
    state: watch::Receiver<Arc<SessionState>>,
    stop_flag: Arc<AtomicBool>,
    stop: watch::Sender<bool>,
    workers: Vec<SeatWorker>,
    core: JoinHandle<SessionState>,
    tasks: Vec<JoinHandle<()>>,
}

async fn bind(addr: &str) -> Result<TcpListener> {
    TcpListener::bind(addr).await.map_err(|e| Error::Io(format!("cannot listen on {addr}: {e}")))
}

/// Binds the listeners, opens every seat source and starts the session.
/// Must be called inside a tokio runtime.
pub async fn start(config: SessionConfig) -> Result<ServerHandle> {
    config.validate()?;
    let schedule: ConditionSchedule = schedule_conditions(config.n_groups)?;
    let seats = config
        .seats
        .iter()
        .enumerate()
        .map(|(i, s)| Seat { seat_id: i, player_name: s.name.clone(), stream_id: s.source.describe() })
        .collect();
    let state = SessionState::new(seats, schedule, config.group)?;

    let ws_listener = bind(&config.listen).await?;
    let tcp_listener = match &config.tcp_listen {
        Some(addr) => Some(bind(addr).await?),
        None => None,
    };
    let ws_addr = ws_listener.local_addr()?;
    let tcp_addr = tcp_listener.as_ref().map(|l| l.local_addr()).transpose()?;

    let (est_tx, est_rx) = mpsc::channel(1024);
    let (op_tx, op_rx) = mpsc::channel(64);
    let (pub_tx, pub_rx) = watch::channel(Arc::new(state.clone()));
    let (stop_tx, stop_rx) = watch::channel(false);
    let stop_flag = Arc::new(AtomicBool::new(false));

    let mut workers = Vec::new();
    for (i, seat) in config.seats.iter().enumerate() {
        let worker = SeatWorker::spawn(
            i,
            &seat.source,
            config.estimator.clone(),
            config.speed,
            est_tx.clone(),
            Arc::clone(&stop_flag),
        );
        match worker {
            Ok(w) => workers.push(w),
            Err(e) => {
                stop_flag.store(true, Ordering::Relaxed);
                return Err(Error::Config(format!("seat {i}: {e}")));
            }
        }
        tracing::info!(seat = i, name = %seat.name, source = %seat.source.describe(), "seat ready");
    }
    drop(est_tx);

    let channels = CoreChannels { estimates: est_rx, operator: op_rx, published: pub_tx, stop: stop_rx.clone() };
    let core = tokio::spawn(run_core(state, channels, config.cadence_hz, config.speed));

    let ctx = NetCtx { state: pub_rx.clone(), operator: op_tx, token: config.operator_token.as_str().into() };
    let mut tasks = Vec::new();
    let mut ws_stop = stop_rx.clone();
    let app = router(ctx.clone());
    tasks.push(tokio::spawn(async move {
        let shutdown = async move {
            let _ = ws_stop.changed().await;
        };
        if let Err(e) = axum::serve(ws_listener, app).with_graceful_shutdown(shutdown).await {
            tracing::error!(error = %e, "websocket server failed");
        }
    }));
    if let Some(listener) = tcp_listener {
        tasks.push(tokio::spawn(serve_tcp(listener, ctx, stop_rx)));
    }
    tracing::info!(%ws_addr, tcp_addr = ?tcp_addr, "session server listening");

    Ok(ServerHandle { ws_addr, tcp_addr, state: pub_rx, stop_flag, stop: stop_tx, workers, core, tasks })
}

impl ServerHandle {
    /// Latest published snapshot.
    pub fn snapshot(&self) -> Arc<SessionState> {
        Arc::clone(&self.state.borrow())
    }

    /// Estimator timing per seat so far.
    pub fn latency(&self) -> Vec<LatencyStats> {
        self.workers.iter().map(|w| *w.stats.lock().expect("stats lock")).collect()
    }

    /// Stops sources, listeners and the session; returns the final state.
    pub async fn shutdown(self) -> Result<SessionState> {
        self.stop_flag.store(true, Ordering::Relaxed);
        let _ = self.stop.send(true);
        let state = self.core.await.map_err(|e| Error::Io(format!("session task: {e}")))?;
        for task in self.tasks {
            let _ = task.await;
        }
        let workers = self.workers;
        tokio::task::spawn_blocking(move || workers.into_iter().for_each(SeatWorker::join))
            .await
            .map_err(|e| Error::Io(format!("seat threads: {e}")))?;
        Ok(state)
    }
}
