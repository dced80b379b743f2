//! Alarm state machine: location fixes in, at most one arrival out.
//!
//! An arrival is an Outside to Inside transition observed while the alarm is
//! armed and the activity is running. Arming while already inside the fence
//! therefore never counts as arriving; the participant has to leave (past
//! the hysteresis margin) and come back.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::{Activity, ActivityPhase, ParticipantId, Timestamp};
use crate::geo::{classify_zone, GeoPoint, Zone};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AlarmState {
    Disarmed,
    Armed { zone: Zone },
    Arrived { at: Timestamp },
}

impl Default for AlarmState {
    fn default() -> Self {
        AlarmState::Disarmed
    }
}

impl AlarmState {
    pub fn has_arrived(&self) -> bool {
        matches!(self, AlarmState::Arrived { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocationFix {
    pub who: ParticipantId,
    pub point: GeoPoint,
    pub at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PresenceEvent {
    Arrival { who: ParticipantId, at: Timestamp },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PresenceError {
    #[error("alarm is already armed")]
    AlreadyArmed,
    #[error("{0} has not accepted the activity")]
    NotAccepted(ParticipantId),
}

/// `zone_now` is the classification of the latest known fix, `Outside` when
/// there is none.
pub fn arm(state: AlarmState, zone_now: Zone) -> Result<AlarmState, PresenceError> {
    match state {
        AlarmState::Disarmed => Ok(AlarmState::Armed { zone: zone_now }),
        AlarmState::Armed { .. } | AlarmState::Arrived { .. } => Err(PresenceError::AlreadyArmed),
    }
}

/// Arrivals are facts; disarming after one changes nothing.
pub fn disarm(state: AlarmState) -> AlarmState {
    match state {
        AlarmState::Armed { .. } | AlarmState::Disarmed => AlarmState::Disarmed,
        arrived @ AlarmState::Arrived { .. } => arrived,
    }
}

pub fn ingest_fix(
    activity: &Activity,
    state: AlarmState,
    fix: &LocationFix,
) -> Result<(AlarmState, Vec<PresenceEvent>), PresenceError> {
    if !activity.is_accepted(&fix.who) {
        return Err(PresenceError::NotAccepted(fix.who.clone()));
    }
    if activity.phase_at(fix.at) != ActivityPhase::Active {
        return Ok((state, Vec::new()));
    }
    match state {
        AlarmState::Armed { zone } => {
            let next = classify_zone(activity.fence(), zone, fix.point);
            if zone == Zone::Outside && next == Zone::Inside {
                Ok((
                    AlarmState::Arrived { at: fix.at },
                    vec![PresenceEvent::Arrival {
                        who: fix.who.clone(),
                        at: fix.at,
                    }],
                ))
            } else {
                Ok((AlarmState::Armed { zone: next }, Vec::new()))
            }
        }
        AlarmState::Disarmed | AlarmState::Arrived { .. } => Ok((state, Vec::new())),
    }
}
