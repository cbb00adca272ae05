//! Display and operator connections over WebSocket and raw TCP. Both carry
//! the same newline-delimited JSON messages.

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use pulseplay_core::session::{ClientMessage, CommandOutcome, ServerMessage, Viewer, N_SEATS};
use pulseplay_core::SessionState;
use tokio::io::{AsyncBufReadExt, AsyncReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot, watch};

use super::core::OperatorRequest;

/// Outgoing frames queued per connection. State frames are dropped for a
/// client that falls this far behind; the next one supersedes them anyway.
const OUTBOX: usize = 64;

/// Longest accepted line on the raw TCP transport.
const MAX_LINE: usize = 64 * 1024;

#[derive(Clone)]
pub struct NetCtx {
    pub state: watch::Receiver<Arc<SessionState>>,
    pub operator: mpsc::Sender<OperatorRequest>,
    pub token: Arc<str>,
}

fn render(viewer: Viewer, state: &SessionState) -> Option<String> {
    let msg = match viewer {
        Viewer::Seat(n) => state.render_state(n).ok()?,
        Viewer::Operator => state.render_operator(),
    };
    Some(ServerMessage::from(msg).to_line())
}

fn error_line(message: impl Into<String>) -> String {
    ServerMessage::Error { message: message.into() }.to_line()
}

/// Serves one authenticated connection until either side goes away.
pub async fn run_connection(
    viewer: Viewer,
    ctx: NetCtx,
    mut incoming: mpsc::Receiver<String>,
    out: mpsc::Sender<String>,
) {
    let mut state = ctx.state.clone();
    state.mark_changed();
    loop {
        tokio::select! {
            changed = state.changed() => {
                if changed.is_err() {
                    break;
                }
                let line = render(viewer, &state.borrow_and_update());
                if let Some(line) = line {
                    if let Err(mpsc::error::TrySendError::Closed(_)) = out.try_send(line) {
                        break;
                    }
                }
            }
            line = incoming.recv() => {
                let Some(line) = line else { break };
                if line.trim().is_empty() {
                    continue;
                }
                let reply = handle_line(viewer, &ctx, &line).await;
                if let Some(reply) = reply {
                    if out.send(reply).await.is_err() {
                        break;
                    }
                }
            }
        }
    }
    tracing::debug!(viewer = ?viewer, "connection closed");
}

async fn handle_line(viewer: Viewer, ctx: &NetCtx, line: &str) -> Option<String> {
    let cmd = match ClientMessage::parse(line) {
        Ok(ClientMessage::Cmd(cmd)) => cmd,
        Ok(ClientMessage::Hello { .. }) => return Some(error_line("already identified")),
        Err(e) => return Some(error_line(e.to_string())),
    };
    if viewer != Viewer::Operator {
        return Some(error_line("only the operator may send commands"));
    }
    let (reply, rx) = oneshot::channel();
    if ctx.operator.send(OperatorRequest { cmd, reply }).await.is_err() {
        return Some(error_line("session is shutting down"));
    }
    match rx.await {
        Ok(Ok(CommandOutcome::Applied)) => None,
        Ok(Ok(CommandOutcome::ScheduleComplete)) => {
            Some(ServerMessage::Notice { message: "schedule complete".into() }.to_line())
        }
        Ok(Err(e)) => Some(error_line(e.to_string())),
        Err(_) => Some(error_line("session is shutting down")),
    }
}

pub fn router(ctx: NetCtx) -> Router {
    Router::new()
        .route("/ws/seat/{n}", get(seat_ws))
        .route("/ws/operator", get(operator_ws))
        .with_state(ctx)
}

async fn seat_ws(ws: WebSocketUpgrade, Path(n): Path<usize>, State(ctx): State<NetCtx>) -> Response {
    if n >= N_SEATS {
        return (StatusCode::NOT_FOUND, format!("no seat {n}")).into_response();
    }
    ws.on_upgrade(move |socket| serve_ws(socket, Viewer::Seat(n), ctx))
}

async fn operator_ws(
    ws: WebSocketUpgrade,
    Query(query): Query<HashMap<String, String>>,
    State(ctx): State<NetCtx>,
) -> Response {
    if query.get("token").map(String::as_str) != Some(&*ctx.token) {
        return (StatusCode::UNAUTHORIZED, "bad operator token").into_response();
    }
    ws.on_upgrade(move |socket| serve_ws(socket, Viewer::Operator, ctx))
}

async fn serve_ws(socket: WebSocket, viewer: Viewer, ctx: NetCtx) {
    tracing::info!(viewer = ?viewer, "websocket client connected");
    let (mut sink, mut stream) = socket.split();
    let (in_tx, in_rx) = mpsc::channel(OUTBOX);
    let (out_tx, mut out_rx) = mpsc::channel::<String>(OUTBOX);
    let writer = tokio::spawn(async move {
        while let Some(line) = out_rx.recv().await {
            if sink.send(Message::Text(line.into())).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });
    let reader = tokio::spawn(async move {
        while let Some(Ok(msg)) = stream.next().await {
            let text = match msg {
                Message::Text(t) => t.to_string(),
                Message::Close(_) => break,
                _ => continue,
            };
            for line in text.lines() {
                if in_tx.send(line.to_string()).await.is_err() {
                    return;
                }
            }
        }
    });
    run_connection(viewer, ctx, in_rx, out_tx).await;
    reader.abort();
    let _ = writer.await;
}

/// Accepts raw TCP clients until `stop` turns true.
pub async fn serve_tcp(listener: TcpListener, ctx: NetCtx, mut stop: watch::Receiver<bool>) {
    loop {
        tokio::select! {
            accepted = listener.accept() => match accepted {
                Ok((socket, peer)) => {
                    let ctx = ctx.clone();
                    let stop = stop.clone();
                    tokio::spawn(async move {
                        tracing::info!(%peer, "tcp client connected");
                        serve_tcp_client(socket, ctx, stop).await;
                    });
                }
                Err(e) => tracing::warn!(error = %e, "tcp accept failed"),
            },
            _ = stop.changed() => break,
        }
    }
}

async fn read_line(reader: &mut BufReader<tokio::net::tcp::OwnedReadHalf>) -> Option<String> {
    let mut line = String::new();
    match (&mut *reader).take(MAX_LINE as u64).read_line(&mut line).await {
        Ok(0) | Err(_) => None,
        Ok(_) => Some(line),
    }
}

async fn serve_tcp_client(socket: TcpStream, ctx: NetCtx, mut stop: watch::Receiver<bool>) {
    let (read, mut write) = socket.into_split();
    let mut reader = BufReader::new(read);

    // The first line must identify the client.
    let Some(first) = read_line(&mut reader).await else { return };
    let viewer = match ClientMessage::parse(&first) {
        Ok(ClientMessage::Hello { viewer: Viewer::Operator, token }) => {
            if token.as_deref() != Some(&*ctx.token) {
                let _ = write.write_all(error_line("bad operator token").as_bytes()).await;
                return;
            }
            Viewer::Operator
        }
        Ok(ClientMessage::Hello { viewer: Viewer::Seat(n), .. }) if n < N_SEATS => Viewer::Seat(n),
        Ok(ClientMessage::Hello { viewer, .. }) => {
            let _ = write.write_all(error_line(format!("unknown viewer {viewer:?}")).as_bytes()).await;
            return;
        }
        Ok(ClientMessage::Cmd(_)) => {
            let _ = write.write_all(error_line("send hello first").as_bytes()).await;
            return;
        }
        Err(e) => {
            let _ = write.write_all(error_line(e.to_string()).as_bytes()).await;
            return;
        }
    };

    let (in_tx, in_rx) = mpsc::channel(OUTBOX);
    let (out_tx, mut out_rx) = mpsc::channel::<String>(OUTBOX);
    let writer = tokio::spawn(async move {
        while let Some(line) = out_rx.recv().await {
            if write.write_all(line.as_bytes()).await.is_err() {
                break;
            }
        }
        let _ = write.shutdown().await;
    });
    let reader = tokio::spawn(async move {
        while let Some(line) = read_line(&mut reader).await {
            if in_tx.send(line).await.is_err() {
                break;
            }
        }
    });
    tokio::select! {
        _ = run_connection(viewer, ctx, in_rx, out_tx) => {}
        _ = stop.changed() => {}
    }
    reader.abort();
    let _ = writer.await;
}
