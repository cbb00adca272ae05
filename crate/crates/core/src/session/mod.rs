//! Three-seat biofeedback session: visibility conditions, per-seat render
//! state, counterbalanced scheduling and the wire protocol.

mod histogram;
mod state;
pub mod wire;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use histogram::{HistogramState, HIST_BINS, HIST_HORIZON_S};
pub use state::{CommandOutcome, OperatorCommand, Seat, SeatState, SessionState};
pub use wire::{ClientMessage, SeatView, ServerMessage, StateMessage, Viewer};

pub const N_SEATS: usize = 3;

pub type SeatId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Every player sees every heart rate.
    HrAll,
    /// Each player sees the others' heart rates but not their own.
    HrOthers,
    /// Nobody sees any heart rate.
    HrNone,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::HrAll, Condition::HrOthers, Condition::HrNone];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::HrAll => "hr_all",
            Condition::HrOthers => "hr_others",
            Condition::HrNone => "hr_none",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hr_all" => Ok(Condition::HrAll),
            "hr_others" => Ok(Condition::HrOthers),
            "hr_none" => Ok(Condition::HrNone),
            other => Err(Error::Config(format!(
                "unknown condition {other:?} (expected hr_all, hr_others or hr_none)"
            ))),
        }
    }
}

/// Whether `viewer` is shown the heart rate of `subject`.
pub fn visible(condition: Condition, viewer: SeatId, subject: SeatId) -> bool {
    match condition {
        Condition::HrAll => true,
        Condition::HrOthers => viewer != subject,
        Condition::HrNone => false,
    }
}

/// One ordering of the three conditions per group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionSchedule {
    orderings: Vec<[Condition; 3]>,
}

use Condition::{HrAll as A, HrNone as N, HrOthers as O};

/// Cyclic Latin square.
const SQUARE_A: [[Condition; 3]; 3] = [[A, O, N], [O, N, A], [N, A, O]];
/// Its row-reversed complement; together the two cover all six orderings.
const SQUARE_B: [[Condition; 3]; 3] = [[A, N, O], [N, O, A], [O, A, N]];

impl ConditionSchedule {
    pub fn new(orderings: Vec<[Condition; 3]>) -> Result<Self> {
        if orderings.is_empty() {
            return Err(Error::Config("schedule needs at least one group".into()));
        }
        for (g, ord) in orderings.iter().enumerate() {
            if Condition::ALL.iter().any(|c| !ord.contains(c)) {
                return Err(Error::Config(format!("ordering for group {g} is not a permutation")));
            }
        }
        Ok(ConditionSchedule { orderings })
    }

    pub fn orderings(&self) -> &[[Condition; 3]] {
        &self.orderings
    }

    pub fn n_groups(&self) -> usize {
        self.orderings.len()
    }

    pub fn ordering(&self, group: usize) -> Result<&[Condition; 3]> {
        self.orderings.get(group).ok_or_else(|| {
            Error::Config(format!("group {group} outside schedule of {} groups", self.orderings.len()))
        })
    }
}

/// Counterbalanced condition orders. Groups cycle through square A then
/// square B, so six groups receive every permutation once.
pub fn schedule_conditions(n_groups: usize) -> Result<ConditionSchedule> {
    if n_groups == 0 || n_groups % 3 != 0 {
        return Err(Error::Config(format!("number of groups must be a positive multiple of 3, got {n_groups}")));
    }
    let orderings = (0..n_groups)
        .map(|g| {
            let square = if (g / 3) % 2 == 0 { &SQUARE_A } else { &SQUARE_B };
            square[g % 3]
        })
        .collect();
    ConditionSchedule::new(orderings)
}
