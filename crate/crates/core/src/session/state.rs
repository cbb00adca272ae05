use serde::{Deserialize, Serialize};

use super::histogram::HistogramState;
use super::wire::{SeatView, StateMessage, Viewer};
use super::{schedule_conditions, visible, Condition, ConditionSchedule, SeatId, N_SEATS};
use crate::error::{Error, Result};
use crate::hr::{advance_phase_constant, BeatPhase, HrSample, MAX_BPM, MIN_BPM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seat {
    pub seat_id: SeatId,
    pub player_name: String,
    /// Identifier of the heart-rate source feeding this seat.
    pub stream_id: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeatState {
    pub latest: Option<HrSample>,
    pub phase: Option<BeatPhase>,
    pub hist: HistogramState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum OperatorCommand {
    SetCondition { condition: Condition },
    AdvanceSchedule,
    StartGame,
    EndGame,
    SetName { seat: SeatId, name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandOutcome {
    Applied,
    /// The group's ordering has no further entries; state is unchanged.
    ScheduleComplete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    seats: [Seat; N_SEATS],
    seat_state: [SeatState; N_SEATS],
    condition: Condition,
    game_running: bool,
    schedule: ConditionSchedule,
    group: usize,
    schedule_position: usize,
    /// Session clock, seconds. Never runs backwards.
    now: f64,
}

impl SessionState {
    /// Fresh session at the first entry of `group`'s ordering.
    pub fn new(seats: Vec<Seat>, schedule: ConditionSchedule, group: usize) -> Result<Self> {
        let seats: [Seat; N_SEATS] = seats.try_into().map_err(|v: Vec<Seat>| {
            Error::Config(format!("a session needs exactly {N_SEATS} seats, got {}", v.len()))
        })?;
        for (i, seat) in seats.iter().enumerate() {
            if seat.seat_id != i {
                return Err(Error::Config(format!(
                    "seat ids must be 0..{N_SEATS} in order, found {} at position {i}",
                    seat.seat_id
                )));
            }
        }
        let condition = schedule.ordering(group)?[0];
        Ok(SessionState {
            seats,
            seat_state: Default::default(),
            condition,
            game_running: false,
            schedule,
            group,
            schedule_position: 0,
            now: 0.0,
        })
    }

    /// Three seats named `names` using the six-group schedule.
    pub fn with_names(names: [&str; N_SEATS], group: usize) -> Result<Self> {
        let seats = names
            .iter()
            .enumerate()
            .map(|(i, n)| Seat { seat_id: i, player_name: n.to_string(), stream_id: format!("seat{i}") })
            .collect();
        Self::new(seats, schedule_conditions(6)?, group)
    }

    pub fn seats(&self) -> &[Seat; N_SEATS] {
        &self.seats
    }

    pub fn seat_state(&self, seat: SeatId) -> Result<&SeatState> {
        self.seat_state.get(seat).ok_or_else(|| unknown_seat(seat))
    }

    pub fn condition(&self) -> Condition {
        self.condition
    }

    pub fn game_running(&self) -> bool {
        self.game_running
    }

    pub fn schedule(&self) -> &ConditionSchedule {
        &self.schedule
    }

    pub fn group(&self) -> usize {
        self.group
    }

    pub fn schedule_position(&self) -> usize {
        self.schedule_position
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Moves the session clock forward; earlier times are ignored.
    pub fn advance_clock(&mut self, t: f64) {
        if t > self.now {
            self.now = t;
        }
    }

    pub fn ingest_estimate(&mut self, seat: SeatId, sample: HrSample) -> Result<()> {
        let state = self.seat_state.get_mut(seat).ok_or_else(|| unknown_seat(seat))?;
        if !(MIN_BPM..=MAX_BPM).contains(&sample.bpm) || !(0.0..=1.0).contains(&sample.confidence) {
            return Err(Error::Precondition(format!(
                "sample out of range: {} BPM, confidence {}",
                sample.bpm, sample.confidence
            )));
        }
        let phase = match (state.phase, state.latest) {
            (Some(phase), Some(prev)) => advance_phase_constant(phase, prev.bpm, sample.t)?,
            _ => BeatPhase::new(0.0, sample.t),
        };
        state.hist.push_bpm(sample.t, sample.bpm)?;
        state.phase = Some(phase);
        state.latest = Some(sample);
        self.advance_clock(sample.t);
        Ok(())
    }

    pub fn apply_operator_command(&mut self, cmd: &OperatorCommand) -> Result<CommandOutcome> {
        match cmd {
            OperatorCommand::SetCondition { condition } => {
                self.require_between_games("change condition")?;
                self.condition = *condition;
            }
            OperatorCommand::AdvanceSchedule => {
                self.require_between_games("advance the schedule")?;
                let ordering = self.schedule.ordering(self.group)?;
                if self.schedule_position + 1 >= ordering.len() {
                    return Ok(CommandOutcome::ScheduleComplete);
                }
                self.schedule_position += 1;
                self.condition = ordering[self.schedule_position];
            }
            OperatorCommand::StartGame => {
                if self.game_running {
                    return Err(Error::Sequencing("a game is already running".into()));
                }
                self.game_running = true;
            }
            OperatorCommand::EndGame => {
                if !self.game_running {
                    return Err(Error::Sequencing("no game is running".into()));
                }
                self.game_running = false;
            }
            OperatorCommand::SetName { seat, name } => {
                let seat = self.seats.get_mut(*seat).ok_or_else(|| unknown_seat(*seat))?;
                let name = name.trim();
                if name.is_empty() {
                    return Err(Error::Precondition("player name must not be empty".into()));
                }
                seat.player_name = name.to_string();
            }
        }
        Ok(CommandOutcome::Applied)
    }

    fn require_between_games(&self, action: &str) -> Result<()> {
        if self.game_running {
            Err(Error::Sequencing(format!("cannot {action} during a game")))
        } else {
            Ok(())
        }
    }

    /// Per-seat view for one player. Seats hidden from `viewer` carry only
    /// the idle marker.
    pub fn render_state(&self, viewer: SeatId) -> Result<StateMessage> {
        if viewer >= N_SEATS {
            return Err(unknown_seat(viewer));
        }
        let seats = (0..N_SEATS)
            .map(|s| {
                let label = if s == viewer { "me".to_string() } else { self.seats[s].player_name.clone() };
                self.seat_view(s, label, visible(self.condition, viewer, s))
            })
            .collect();
        Ok(StateMessage {
            viewer: Viewer::Seat(viewer),
            t_ms: self.t_ms(),
            condition: self.condition,
            seats,
            schedule_position: None,
            group: None,
            game_running: None,
        })
    }

    /// Omniscient view for the experimenter.
    pub fn render_operator(&self) -> StateMessage {
        let seats = (0..N_SEATS)
            .map(|s| self.seat_view(s, self.seats[s].player_name.clone(), true))
            .collect();
        StateMessage {
            viewer: Viewer::Operator,
            t_ms: self.t_ms(),
            condition: self.condition,
            seats,
            schedule_position: Some(self.schedule_position),
            group: Some(self.group),
            game_running: Some(self.game_running),
        }
    }

    fn t_ms(&self) -> i64 {
        (self.now * 1000.0).round() as i64
    }

    fn seat_view(&self, seat: SeatId, label: String, shown: bool) -> SeatView {
        let state = &self.seat_state[seat];
        match (shown, state.latest, state.phase) {
            (true, Some(latest), Some(phase)) => {
                let phase = advance_phase_constant(phase, latest.bpm, self.now.max(phase.as_of))
                    .expect("clock is not behind the phase reference");
                SeatView {
                    seat,
                    label,
                    idle: false,
                    bpm: Some(latest.bpm),
                    confidence: Some(latest.confidence),
                    phase: Some(phase.phase),
                    hist: Some(state.hist.bins_at(self.now)),
                }
            }
            _ => SeatView::idle(seat, label),
        }
    }
}

fn unknown_seat(seat: SeatId) -> Error {
    Error::Routing(format!("unknown seat {seat} (seats are 0..{N_SEATS})"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session() -> SessionState {
        SessionState::with_names(["Ana", "Ben", "Cy"], 0).unwrap()
    }

    fn sample(t: f64, bpm: f64) -> HrSample {
        HrSample { t, bpm, confidence: 0.9 }
    }

    #[test]
    fn first_sample_initialises_seat() {
        let mut s = session();
        s.ingest_estimate(1, sample(4.0, 75.0)).unwrap();
        let st = s.seat_state(1).unwrap();
        assert_eq!(st.hist.len(), 1);
        assert_eq!(st.phase, Some(BeatPhase { phase: 0.0, as_of: 4.0 }));
    }

    #[test]
    fn sixty_bpm_phase_returns_each_tick() {
        let mut s = session();
        for i in 0..10 {
            s.ingest_estimate(0, sample(i as f64, 60.0)).unwrap();
            let p = s.seat_state(0).unwrap().phase.unwrap().phase;
            assert!(p.abs() < 1e-12 || (1.0 - p) < 1e-12, "{p}");
        }
    }

    #[test]
    fn phase_uses_rate_in_force() {
        let mut s = session();
        s.ingest_estimate(2, sample(0.0, 90.0)).unwrap();
        s.ingest_estimate(2, sample(1.0, 120.0)).unwrap();
        // 1 s at 90 BPM = 1.5 beats
        assert!((s.seat_state(2).unwrap().phase.unwrap().phase - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unknown_seat_is_routing_error() {
        let mut s = session();
        assert!(matches!(s.ingest_estimate(5, sample(0.0, 70.0)), Err(Error::Routing(_))));
        assert!(matches!(s.render_state(3), Err(Error::Routing(_))));
        let cmd = OperatorCommand::SetName { seat: 4, name: "X".into() };
        assert!(matches!(s.apply_operator_command(&cmd), Err(Error::Routing(_))));
    }

    #[test]
    fn schedule_walk() {
        let schedule = schedule_conditions(6).unwrap();
        for group in 0..6 {
            let mut s = SessionState::new(
                (0..3).map(|i| Seat { seat_id: i, player_name: format!("p{i}"), stream_id: String::new() }).collect(),
                schedule.clone(),
                group,
            )
            .unwrap();
            let ordering = schedule.orderings()[group];
            let mut seen = vec![s.condition()];
            for _ in 0..2 {
                assert_eq!(s.apply_operator_command(&OperatorCommand::AdvanceSchedule).unwrap(), CommandOutcome::Applied);
                seen.push(s.condition());
            }
            assert_eq!(seen, ordering.to_vec());
            let before = s.clone();
            assert_eq!(
                s.apply_operator_command(&OperatorCommand::AdvanceSchedule).unwrap(),
                CommandOutcome::ScheduleComplete
            );
            assert_eq!(s, before);
            assert!(s.schedule_position() < 3);
        }
    }

    #[test]
    fn condition_locked_during_game() {
        let mut s = session();
        s.apply_operator_command(&OperatorCommand::StartGame).unwrap();
        let set = OperatorCommand::SetCondition { condition: Condition::HrNone };
        assert!(matches!(s.apply_operator_command(&set), Err(Error::Sequencing(_))));
        assert!(matches!(s.apply_operator_command(&OperatorCommand::AdvanceSchedule), Err(Error::Sequencing(_))));
        assert!(matches!(s.apply_operator_command(&OperatorCommand::StartGame), Err(Error::Sequencing(_))));
        s.apply_operator_command(&OperatorCommand::EndGame).unwrap();
        assert!(matches!(s.apply_operator_command(&OperatorCommand::EndGame), Err(Error::Sequencing(_))));
        s.apply_operator_command(&set).unwrap();
        assert_eq!(s.condition(), Condition::HrNone);
    }

    #[test]
    fn set_name_shows_for_others() {
        let mut s = session();
        s.apply_operator_command(&OperatorCommand::SetName { seat: 1, name: "Alice".into() }).unwrap();
        assert_eq!(s.render_state(0).unwrap().seats[1].label, "Alice");
        assert_eq!(s.render_state(1).unwrap().seats[1].label, "me");
    }

    #[test]
    fn needs_three_ordered_seats() {
        let two = (0..2).map(|i| Seat { seat_id: i, player_name: "p".into(), stream_id: String::new() }).collect();
        assert!(matches!(SessionState::new(two, schedule_conditions(3).unwrap(), 0), Err(Error::Config(_))));
        let shuffled = [1, 0, 2]
            .iter()
            .map(|&i| Seat { seat_id: i, player_name: "p".into(), stream_id: String::new() })
            .collect();
        assert!(SessionState::new(shuffled, schedule_conditions(3).unwrap(), 0).is_err());
        assert!(SessionState::with_names(["a", "b", "c"], 6).is_err());
    }

    #[test]
    fn render_hr_others_hides_self() {
        let mut s = session();
        s.apply_operator_command(&OperatorCommand::SetCondition { condition: Condition::HrOthers }).unwrap();
        for seat in 0..3 {
            s.ingest_estimate(seat, sample(1.0, 70.0 + seat as f64)).unwrap();
        }
        let view = s.render_state(0).unwrap();
        assert!(view.seats[0].idle && view.seats[0].bpm.is_none() && view.seats[0].hist.is_none());
        assert_eq!(view.seats[0].label, "me");
        assert_eq!(view.seats[1].bpm, Some(71.0));
        assert_eq!(view.seats[2].bpm, Some(72.0));
    }

    #[test]
    fn render_extrapolates_phase_to_clock() {
        let mut s = session();
        s.ingest_estimate(0, sample(2.0, 90.0)).unwrap();
        s.advance_clock(2.5);
        s.advance_clock(1.0);
        let view = s.render_operator();
        assert_eq!(view.t_ms, 2500);
        assert!((view.seats[0].phase.unwrap() - 0.75).abs() < 1e-12);
        assert!(view.seats[1].idle);
    }
}
