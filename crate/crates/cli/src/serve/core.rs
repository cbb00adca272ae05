//! The session actor: sole owner of `SessionState`.

use std::sync::Arc;
use std::time::Duration;

use pulseplay_core::session::{CommandOutcome, OperatorCommand, SeatId};
use pulseplay_core::{HrSample, Result, SessionState};
use tokio::sync::{mpsc, oneshot, watch};
use tokio::time::{Instant, MissedTickBehavior};

pub struct OperatorRequest {
    pub cmd: OperatorCommand,
    pub reply: oneshot::Sender<Result<CommandOutcome>>,
}

pub struct CoreChannels {
    pub estimates: mpsc::Receiver<(SeatId, HrSample)>,
    pub operator: mpsc::Receiver<OperatorRequest>,
    pub published: watch::Sender<Arc<SessionState>>,
    pub stop: watch::Receiver<bool>,
}

/// Runs until `stop` turns true; returns the final state. The clock
/// follows wall time scaled by `speed` and a snapshot is published every
/// `1 / cadence_hz` seconds and after each operator command.
pub async fn run_core(mut state: SessionState, mut ch: CoreChannels, cadence_hz: f64, speed: f64) -> SessionState {
    let start = Instant::now();
    let mut ticker = tokio::time::interval(Duration::from_secs_f64(1.0 / cadence_hz));
    ticker.set_missed_tick_behavior(MissedTickBehavior::Skip);
    loop {
        tokio::select! {
            _ = ticker.tick() => {
                state.advance_clock(start.elapsed().as_secs_f64() * speed);
                ch.published.send_replace(Arc::new(state.clone()));
            }
            Some((seat, sample)) = ch.estimates.recv() => {
                if let Err(e) = state.ingest_estimate(seat, sample) {
                    tracing::warn!(seat, error = %e, "estimate dropped");
                }
            }
            Some(req) = ch.operator.recv() => {
                let outcome = state.apply_operator_command(&req.cmd);
                match &outcome {
                    Ok(o) => tracing::info!(cmd = ?req.cmd, outcome = ?o, "operator command"),
                    Err(e) => tracing::info!(cmd = ?req.cmd, error = %e, "operator command refused"),
                }
                let _ = req.reply.send(outcome);
                ch.published.send_replace(Arc::new(state.clone()));
            }
            res = ch.stop.changed() => {
                if res.is_err() || *ch.stop.borrow() {
                    break;
                }
            }
        }
    }
    state.advance_clock(start.elapsed().as_secs_f64() * speed);
    state
}
