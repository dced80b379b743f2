//! Synchronised activities: validation, invitations and lifecycle phase.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{GeoError, Geofence};

/// Batch size for gathering count updates when none is given.
pub const DEFAULT_GATHERING_BATCH: u32 = 5;

/// Unix seconds, UTC.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub fn secs(self) -> u64 {
        self.0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                $name(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }
    };
}

string_id!(ParticipantId);
string_id!(ActivityId);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ActivityError {
    #[error("time window must end after it starts")]
    WindowInvalid,
    #[error("invalid geofence: {0}")]
    FenceInvalid(#[from] GeoError),
    #[error("an activity needs at least two participants, got {0}")]
    TooFewParticipants(usize),
    #[error("participant {0} listed more than once")]
    DuplicateParticipant(ParticipantId),
    #[error("participant identifiers must be non-empty")]
    EmptyParticipantId,
    #[error("batch threshold must be at least 1")]
    BatchThresholdInvalid,
    #[error("{0} is not a participant of this activity")]
    UnknownParticipant(ParticipantId),
    #[error("{0} already responded to the invitation")]
    AlreadyResponded(ParticipantId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawWindow")]
pub struct TimeWindow {
    start: Timestamp,
    end: Timestamp,
}

#[derive(Deserialize)]
struct RawWindow {
    start: Timestamp,
    end: Timestamp,
}

impl TryFrom<RawWindow> for TimeWindow {
    type Error = ActivityError;

    fn try_from(raw: RawWindow) -> Result<Self, ActivityError> {
        TimeWindow::new(raw.start, raw.end)
    }
}

impl TimeWindow {
    pub fn new(start: Timestamp, end: Timestamp) -> Result<Self, ActivityError> {
        if start < end {
            Ok(TimeWindow { start, end })
        } else {
            Err(ActivityError::WindowInvalid)
        }
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn end(&self) -> Timestamp {
        self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActivityKind {
    /// A group splits up and meets again at an agreed spot.
    MeetUp,
    /// Many people converge on a place; arrivals are reported in batches.
    Gathering,
    /// Someone is being picked up and wants to know when the ride is close.
    Pickup,
    /// One person does something on behalf of the others.
    Task,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PrivacyPolicy {
    DiscloseIdentity,
    AnonymousCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ParticipantStatus {
    Invited,
    Accepted,
    Declined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Answer {
    Accept,
    Decline,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub id: ParticipantId,
    pub status: ParticipantStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActivityPhase {
    Scheduled,
    Active,
    Ended,
}

/// Everything needed to create an activity except its identifier.
///
/// The organizer is added to `participants` when missing and starts out as
/// accepted; every other participant starts out invited.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivitySpec {
    pub title: String,
    pub kind: ActivityKind,
    pub window: TimeWindow,
    pub fence: Geofence,
    pub organizer: ParticipantId,
    pub participants: Vec<ParticipantId>,
    pub policy: PrivacyPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_threshold: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activity {
    id: ActivityId,
    title: String,
    kind: ActivityKind,
    window: TimeWindow,
    fence: Geofence,
    organizer: ParticipantId,
    participants: Vec<ParticipantRecord>,
    policy: PrivacyPolicy,
    batch_threshold: u32,
}

/// Validate `spec` and build an activity under the given identifier.
pub fn new_activity(id: ActivityId, spec: ActivitySpec) -> Result<Activity, ActivityError> {
    let ActivitySpec {
        title,
        kind,
        window,
        fence,
        organizer,
        participants,
        policy,
        batch_threshold,
    } = spec;

    // TimeWindow and Geofence are validated on construction; deserialized
    // copies go through the same constructors.
    TimeWindow::new(window.start, window.end)?;
    Geofence::new(fence.center(), fence.radius_m(), fence.hysteresis_m())?;

    if organizer.is_empty() {
        return Err(ActivityError::EmptyParticipantId);
    }
    let mut seen = BTreeSet::new();
    let mut records = Vec::with_capacity(participants.len() + 1);
    if !participants.contains(&organizer) {
        seen.insert(organizer.clone());
        records.push(ParticipantRecord {
            id: organizer.clone(),
            status: ParticipantStatus::Accepted,
        });
    }
    for p in participants {
        if p.is_empty() {
            return Err(ActivityError::EmptyParticipantId);
        }
        if !seen.insert(p.clone()) {
            return Err(ActivityError::DuplicateParticipant(p));
        }
        let status = if p == organizer {
            ParticipantStatus::Accepted
        } else {
            ParticipantStatus::Invited
        };
        records.push(ParticipantRecord { id: p, status });
    }
    if records.len() < 2 {
        return Err(ActivityError::TooFewParticipants(records.len()));
    }

    let batch_threshold = match (batch_threshold, kind) {
        (Some(0), _) => return Err(ActivityError::BatchThresholdInvalid),
        (Some(x), _) => x,
        (None, ActivityKind::Gathering) => DEFAULT_GATHERING_BATCH,
        (None, _) => 1,
    };

    Ok(Activity {
        id,
        title,
        kind,
        window,
        fence,
        organizer,
        participants: records,
        policy,
        batch_threshold,
    })
}

/// Record a participant's answer, returning the updated activity.
pub fn respond_invitation(
    activity: &Activity,
    participant: &ParticipantId,
    answer: Answer,
) -> Result<Activity, ActivityError> {
    let mut next = activity.clone();
    let record = next
        .participants
        .iter_mut()
        .find(|r| &r.id == participant)
        .ok_or_else(|| ActivityError::UnknownParticipant(participant.clone()))?;
    if record.status != ParticipantStatus::Invited {
        return Err(ActivityError::AlreadyResponded(participant.clone()));
    }
    record.status = match answer {
        Answer::Accept => ParticipantStatus::Accepted,
        Answer::Decline => ParticipantStatus::Declined,
    };
    Ok(next)
}

/// Start inclusive, end exclusive.
pub fn phase_at(activity: &Activity, now: Timestamp) -> ActivityPhase {
    let w = activity.window;
    if now < w.start {
        ActivityPhase::Scheduled
    } else if now < w.end {
        ActivityPhase::Active
    } else {
        ActivityPhase::Ended
    }
}

impl Activity {
    pub fn id(&self) -> &ActivityId {
        &self.id
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn kind(&self) -> ActivityKind {
        self.kind
    }

    pub fn window(&self) -> TimeWindow {
        self.window
    }

    pub fn fence(&self) -> &Geofence {
        &self.fence
    }

    pub fn organizer(&self) -> &ParticipantId {
        &self.organizer
    }

    pub fn participants(&self) -> &[ParticipantRecord] {
        &self.participants
    }

    pub fn policy(&self) -> PrivacyPolicy {
        self.policy
    }

    pub fn batch_threshold(&self) -> u32 {
        self.batch_threshold
    }

    pub fn phase_at(&self, now: Timestamp) -> ActivityPhase {
        phase_at(self, now)
    }

    pub fn status_of(&self, who: &ParticipantId) -> Option<ParticipantStatus> {
        self.participants
            .iter()
            .find(|r| &r.id == who)
            .map(|r| r.status)
    }

    pub fn is_accepted(&self, who: &ParticipantId) -> bool {
        self.status_of(who) == Some(ParticipantStatus::Accepted)
    }

    /// Accepted participants in listing order.
    pub fn accepted(&self) -> impl Iterator<Item = &ParticipantId> {
        self.participants
            .iter()
            .filter(|r| r.status == ParticipantStatus::Accepted)
            .map(|r| &r.id)
    }

    pub fn accepted_count(&self) -> usize {
        self.accepted().count()
    }

    /// Re-check every invariant; used when an activity comes from outside
    /// the constructor, e.g. a persisted log.
    pub fn check_invariants(&self) -> Result<(), ActivityError> {
        TimeWindow::new(self.window.start, self.window.end)?;
        Geofence::new(
            self.fence.center(),
            self.fence.radius_m(),
            self.fence.hysteresis_m(),
        )?;
        if self.batch_threshold == 0 {
            return Err(ActivityError::BatchThresholdInvalid);
        }
        let mut seen = BTreeSet::new();
        for r in &self.participants {
            if r.id.is_empty() {
                return Err(ActivityError::EmptyParticipantId);
            }
            if !seen.insert(&r.id) {
                return Err(ActivityError::DuplicateParticipant(r.id.clone()));
            }
        }
        if self.participants.len() < 2 {
            return Err(ActivityError::TooFewParticipants(self.participants.len()));
        }
        if !seen.contains(&self.organizer) {
            return Err(ActivityError::UnknownParticipant(self.organizer.clone()));
        }
        Ok(())
    }
}
