//! Authoritative synchronisation server.
//!
//! Every command is handled in two steps. *Deciding* inspects the current
//! state and either rejects the command (nothing changes, nothing is logged)
//! or produces event records. *Applying* folds each record into the state
//! and yields the notifications it implies. Replay runs only the second
//! step, which is why a replayed log reproduces the live state exactly.
//!
//! Time is always passed in; nothing here reads a clock.

pub mod log;
pub mod net;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::activity::{
    new_activity, respond_invitation, Activity, ActivityError, ActivityId, ActivityKind,
    ActivityPhase, ActivitySpec, ParticipantId, ParticipantStatus, PrivacyPolicy,
    Timestamp,
};
use crate::geo::{classify_zone, GeoPoint, Zone};
use crate::notify::{on_arrival, on_invite, on_task_done, ActivitySummary, Fanout, Notification};
use crate::presence::{arm, disarm, ingest_fix, AlarmState, LocationFix, PresenceEvent};
use crate::wire::{ClientMessage, ErrorCode, ParticipantView, ServerMessage, StatusView};

pub use self::log::{replay, replay_text, CorruptRecord, EventRecord, RecordPayload};

/// Everything the server tracks for one activity.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityEntry {
    pub activity: Activity,
    pub calendar_uid: Option<String>,
    pub alarms: BTreeMap<ParticipantId, AlarmState>,
    /// Only the most recent fix is kept per participant.
    pub last_fix: BTreeMap<ParticipantId, (GeoPoint, Timestamp)>,
    pub arrived: BTreeSet<ParticipantId>,
    pub task_done: Option<(ParticipantId, Timestamp)>,
}

impl ActivityEntry {
    fn new(activity: Activity, calendar_uid: Option<String>) -> Self {
        ActivityEntry {
            activity,
            calendar_uid,
            alarms: BTreeMap::new(),
            last_fix: BTreeMap::new(),
            arrived: BTreeSet::new(),
            task_done: None,
        }
    }

    pub fn activity(&self) -> &Activity {
        &self.activity
    }

    pub fn alarm(&self, who: &ParticipantId) -> AlarmState {
        self.alarms.get(who).copied().unwrap_or_default()
    }

    pub fn arrivals(&self) -> u32 {
        self.arrived.len() as u32
    }
}

/// A participant's notification stream. Sequence numbers start at 1 and are
/// dense; `delivered` is the highest sequence the client has confirmed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Queue {
    pub items: Vec<Notification>,
    pub delivered: u64,
}

impl Queue {
    pub fn last_seq(&self) -> u64 {
        self.items.len() as u64
    }

    fn push(&mut self, n: Notification) -> u64 {
        self.items.push(n);
        self.last_seq()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ServerState {
    activities: BTreeMap<ActivityId, ActivityEntry>,
    queues: BTreeMap<ParticipantId, Queue>,
    next_index: u64,
    created: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApplyError {
    #[error("expected record index {expected}, found {found}")]
    IndexGap { expected: u64, found: u64 },
    #[error("record refers to unknown activity {0}")]
    UnknownActivity(ActivityId),
    #[error("activity {0} already exists")]
    DuplicateActivity(ActivityId),
    #[error("record inconsistent with state: {0}")]
    Inconsistent(String),
}

/// A command was refused; the state is untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub code: ErrorCode,
    pub detail: String,
}

impl Rejection {
    fn new(code: ErrorCode, detail: impl Into<String>) -> Self {
        Rejection {
            code,
            detail: detail.into(),
        }
    }
}

/// Result of one command: messages to send and records appended.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub outbound: Vec<(ParticipantId, ServerMessage)>,
    pub records: Vec<EventRecord>,
}

impl ServerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entry(&self, id: &ActivityId) -> Option<&ActivityEntry> {
        self.activities.get(id)
    }

    pub fn activity(&self, id: &ActivityId) -> Option<&Activity> {
        self.activities.get(id).map(ActivityEntry::activity)
    }

    pub fn activities(&self) -> impl Iterator<Item = &Activity> {
        self.activities.values().map(ActivityEntry::activity)
    }

    pub fn queue(&self, who: &ParticipantId) -> Option<&Queue> {
        self.queues.get(who)
    }

    /// Index the next appended record will carry.
    pub fn next_index(&self) -> u64 {
        self.next_index
    }

    fn next_activity_id(&self) -> ActivityId {
        (self.created + 1..)
            .map(|n| ActivityId::new(format!("a{n}")))
            .find(|id| !self.activities.contains_key(id))
            .expect("unbounded range")
    }

    // -- apply ------------------------------------------------------------

    /// Fold one record into the state, returning the notifications it
    /// produces as `Notify` messages.
    pub fn apply(&mut self, record: &EventRecord) -> Result<Delivery, ApplyError> {
        if record.index != self.next_index {
            return Err(ApplyError::IndexGap {
                expected: self.next_index,
                found: record.index,
            });
        }
        let fanout = self.apply_payload(&record.payload)?;
        self.next_index += 1;
        Ok(self.enqueue(fanout))
    }

    fn enqueue(&mut self, fanout: Fanout) -> Delivery {
        fanout
            .into_iter()
            .map(|(to, notification)| {
                let seq = self.queues.entry(to.clone()).or_default().push(notification.clone());
                (to, ServerMessage::Notify { seq, notification })
            })
            .collect()
    }

    fn entry_mut(&mut self, id: &ActivityId) -> Result<&mut ActivityEntry, ApplyError> {
        self.activities
            .get_mut(id)
            .ok_or_else(|| ApplyError::UnknownActivity(id.clone()))
    }

    // All checks happen before the first mutation so a failed apply leaves
    // the state as it was.
    fn apply_payload(&mut self, payload: &RecordPayload) -> Result<Fanout, ApplyError> {
        let inconsistent = |e: &dyn std::fmt::Display| ApplyError::Inconsistent(e.to_string());
        match payload {
            RecordPayload::ActivityCreated {
                activity,
                calendar_uid,
            } => {
                activity.check_invariants().map_err(|e| inconsistent(&e))?;
                if self.activities.contains_key(activity.id()) {
                    return Err(ApplyError::DuplicateActivity(activity.id().clone()));
                }
                self.created += 1;
                self.activities.insert(
                    activity.id().clone(),
                    ActivityEntry::new(activity.clone(), calendar_uid.clone()),
                );
                Ok(on_invite(activity))
            }
            RecordPayload::InviteResponded {
                activity,
                who,
                answer,
            } => {
                let entry = self.entry_mut(activity)?;
                let updated =
                    respond_invitation(entry.activity(), who, *answer).map_err(|e| inconsistent(&e))?;
                entry.activity = updated;
                Ok(Vec::new())
            }
            RecordPayload::Armed {
                activity,
                who,
                zone,
            } => {
                let entry = self.entry_mut(activity)?;
                if !entry.activity().is_accepted(who) {
                    return Err(inconsistent(&format!("{who} armed without accepting")));
                }
                let next = arm(entry.alarm(who), *zone).map_err(|e| inconsistent(&e))?;
                entry.alarms.insert(who.clone(), next);
                Ok(Vec::new())
            }
            RecordPayload::Disarmed { activity, who } => {
                let entry = self.entry_mut(activity)?;
                let next = disarm(entry.alarm(who));
                entry.alarms.insert(who.clone(), next);
                Ok(Vec::new())
            }
            RecordPayload::FixAccepted {
                activity,
                who,
                point,
                at,
            } => {
                let entry = self.entry_mut(activity)?;
                if let Some((_, last)) = entry.last_fix.get(who) {
                    if at <= last {
                        return Err(inconsistent(&format!("fix at {at} not after {last}")));
                    }
                }
                let fix = LocationFix {
                    who: who.clone(),
                    point: *point,
                    at: *at,
                };
                let (next, _) =
                    ingest_fix(entry.activity(), entry.alarm(who), &fix).map_err(|e| inconsistent(&e))?;
                entry.alarms.insert(who.clone(), next);
                entry.last_fix.insert(who.clone(), (*point, *at));
                Ok(Vec::new())
            }
            RecordPayload::ArrivalRecorded { activity, who, at } => {
                let entry = self.entry_mut(activity)?;
                if entry.alarm(who) != (AlarmState::Arrived { at: *at }) {
                    return Err(inconsistent(&format!("{who} has no arrival at {at}")));
                }
                if !entry.arrived.insert(who.clone()) {
                    return Err(inconsistent(&format!("{who} already arrived")));
                }
                Ok(on_arrival(entry.activity(), who, entry.arrivals(), *at))
            }
            RecordPayload::TaskCompleted { activity, who, at } => {
                let entry = self.entry_mut(activity)?;
                if entry.task_done.is_some() {
                    return Err(inconsistent(&"task already completed"));
                }
                if !entry.activity().is_accepted(who) {
                    return Err(inconsistent(&format!("{who} has not accepted")));
                }
                let fanout = on_task_done(entry.activity(), who, *at).map_err(|e| inconsistent(&e))?;
                entry.task_done = Some((who.clone(), *at));
                Ok(fanout)
            }
            RecordPayload::CursorAdvanced { who, cursor } => {
                let queue = self.queues.entry(who.clone()).or_default();
                if *cursor < queue.delivered || *cursor > queue.last_seq() {
                    return Err(inconsistent(&format!("cursor {cursor} out of range for {who}")));
                }
                queue.delivered = *cursor;
                Ok(Vec::new())
            }
        }
    }

    // -- commands ----------------------------------------------------------

    fn commit(&mut self, now: Timestamp, payloads: Vec<RecordPayload>, outcome: &mut Outcome) {
        for payload in payloads {
            let record = EventRecord {
                index: self.next_index,
                at: now,
                payload,
            };
            let notes = self
                .apply(&record)
                .expect("decided records always apply to the state they were decided on");
            outcome.outbound.extend(notes);
            outcome.records.push(record);
        }
    }

    /// Validate and store a new activity, queueing its invitations.
    pub fn create_activity(
        &mut self,
        spec: ActivitySpec,
        now: Timestamp,
        calendar_uid: Option<String>,
    ) -> Result<(ActivityId, Outcome), ActivityError> {
        let activity = new_activity(self.next_activity_id(), spec)?;
        let id = activity.id().clone();
        let mut outcome = Outcome::default();
        self.commit(
            now,
            vec![RecordPayload::ActivityCreated {
                activity,
                calendar_uid,
            }],
            &mut outcome,
        );
        Ok((id, outcome))
    }

    /// Handle one client message from `from` at time `now`.
    pub fn handle(&mut self, msg: &ClientMessage, from: &ParticipantId, now: Timestamp) -> Outcome {
        let mut outcome = Outcome::default();
        match self.decide(msg, from, now) {
            Err(rejection) => outcome.outbound.push((
                from.clone(),
                ServerMessage::Err {
                    code: rejection.code,
                    detail: rejection.detail,
                },
            )),
            Ok(Decision::Reply(replies)) => {
                outcome
                    .outbound
                    .extend(replies.into_iter().map(|m| (from.clone(), m)));
            }
            Ok(Decision::Commit(payloads)) => {
                outcome.outbound.push((
                    from.clone(),
                    ServerMessage::Ack {
                        of: msg.kind().to_owned(),
                    },
                ));
                let poll_cursor = match msg {
                    ClientMessage::Poll { cursor } => Some(*cursor),
                    _ => None,
                };
                self.commit(now, payloads, &mut outcome);
                if let Some(cursor) = poll_cursor {
                    let (pending, _) = self.pending(from, cursor);
                    outcome
                        .outbound
                        .extend(pending.into_iter().map(|m| (from.clone(), m)));
                }
            }
        }
        outcome
    }

    fn lookup(&self, id: &ActivityId, who: &ParticipantId) -> Result<&ActivityEntry, Rejection> {
        let entry = self
            .activities
            .get(id)
            .ok_or_else(|| Rejection::new(ErrorCode::UnknownActivity, format!("no activity {id}")))?;
        if entry.activity().status_of(who).is_none() {
            return Err(Rejection::new(
                ErrorCode::NotAParticipant,
                format!("{who} is not part of {id}"),
            ));
        }
        Ok(entry)
    }

    fn lookup_accepted(&self, id: &ActivityId, who: &ParticipantId) -> Result<&ActivityEntry, Rejection> {
        let entry = self.lookup(id, who)?;
        if !entry.activity().is_accepted(who) {
            return Err(Rejection::new(
                ErrorCode::NotAccepted,
                format!("{who} has not accepted {id}"),
            ));
        }
        Ok(entry)
    }

    fn decide(&self, msg: &ClientMessage, from: &ParticipantId, now: Timestamp) -> Result<Decision, Rejection> {
        match msg {
            ClientMessage::Hello { participant } => {
                let mut replies = vec![ServerMessage::Welcome { time: now }];
                replies.extend(
                    self.activities()
                        .filter(|a| a.status_of(participant) == Some(ParticipantStatus::Invited))
                        .map(|a| ServerMessage::Invite(ActivitySummary::of(a))),
                );
                Ok(Decision::Reply(replies))
            }
            ClientMessage::RespondInvite { activity, answer } => {
                let entry = self.lookup(activity, from)?;
                let a = entry.activity();
                if a.phase_at(now) == ActivityPhase::Ended {
                    return Err(Rejection::new(
                        ErrorCode::PhaseViolation,
                        format!("{activity} has ended"),
                    ));
                }
                if a.status_of(from) != Some(ParticipantStatus::Invited) {
                    return Err(Rejection::new(
                        ErrorCode::AlreadyResponded,
                        format!("{from} already responded to {activity}"),
                    ));
                }
                Ok(Decision::Commit(vec![RecordPayload::InviteResponded {
                    activity: activity.clone(),
                    who: from.clone(),
                    answer: *answer,
                }]))
            }
            ClientMessage::Arm { activity } => {
                let entry = self.lookup_accepted(activity, from)?;
                let zone = entry
                    .last_fix
                    .get(from)
                    .map(|(p, _)| classify_zone(entry.activity().fence(), Zone::Outside, *p))
                    .unwrap_or(Zone::Outside);
                if arm(entry.alarm(from), zone).is_err() {
                    return Err(Rejection::new(
                        ErrorCode::AlreadyArmed,
                        format!("{from} already armed for {activity}"),
                    ));
                }
                Ok(Decision::Commit(vec![RecordPayload::Armed {
                    activity: activity.clone(),
                    who: from.clone(),
                    zone,
                }]))
            }
            ClientMessage::Disarm { activity } => {
                let entry = self.lookup_accepted(activity, from)?;
                let current = entry.alarm(from);
                let payloads = if disarm(current) == current {
                    Vec::new()
                } else {
                    vec![RecordPayload::Disarmed {
                        activity: activity.clone(),
                        who: from.clone(),
                    }]
                };
                Ok(Decision::Commit(payloads))
            }
            ClientMessage::Fix {
                activity,
                point,
                at,
            } => {
                let entry = self.lookup_accepted(activity, from)?;
                if let Some((_, last)) = entry.last_fix.get(from) {
                    if at <= last {
                        return Err(Rejection::new(
                            ErrorCode::StaleFix,
                            format!("fix at {at} is not after {last}"),
                        ));
                    }
                }
                let fix = LocationFix {
                    who: from.clone(),
                    point: *point,
                    at: *at,
                };
                let (_, events) = ingest_fix(entry.activity(), entry.alarm(from), &fix)
                    .map_err(|e| Rejection::new(ErrorCode::NotAccepted, e.to_string()))?;
                let mut payloads = vec![RecordPayload::FixAccepted {
                    activity: activity.clone(),
                    who: from.clone(),
                    point: *point,
                    at: *at,
                }];
                payloads.extend(events.into_iter().map(|e| match e {
                    PresenceEvent::Arrival { who, at } => RecordPayload::ArrivalRecorded {
                        activity: activity.clone(),
                        who,
                        at,
                    },
                }));
                Ok(Decision::Commit(payloads))
            }
            ClientMessage::TaskDone { activity, at } => {
                let entry = self.lookup(activity, from)?;
                let a = entry.activity();
                if a.kind() != ActivityKind::Task {
                    return Err(Rejection::new(
                        ErrorCode::KindMismatch,
                        format!("{activity} is not a task"),
                    ));
                }
                if !a.is_accepted(from) {
                    return Err(Rejection::new(
                        ErrorCode::NotAccepted,
                        format!("{from} has not accepted {activity}"),
                    ));
                }
                if a.phase_at(now) == ActivityPhase::Ended {
                    return Err(Rejection::new(
                        ErrorCode::PhaseViolation,
                        format!("{activity} has ended"),
                    ));
                }
                if let Some((who, _)) = &entry.task_done {
                    return Err(Rejection::new(
                        ErrorCode::AlreadyDone,
                        format!("{activity} was already completed by {who}"),
                    ));
                }
                Ok(Decision::Commit(vec![RecordPayload::TaskCompleted {
                    activity: activity.clone(),
                    who: from.clone(),
                    at: *at,
                }]))
            }
            ClientMessage::Poll { cursor } => {
                let (last, delivered) = self
                    .queues
                    .get(from)
                    .map(|q| (q.last_seq(), q.delivered))
                    .unwrap_or((0, 0));
                if *cursor > last {
                    return Err(Rejection::new(
                        ErrorCode::BadCursor,
                        format!("cursor {cursor} beyond last sequence {last}"),
                    ));
                }
                let payloads = if *cursor > delivered {
                    vec![RecordPayload::CursorAdvanced {
                        who: from.clone(),
                        cursor: *cursor,
                    }]
                } else {
                    Vec::new()
                };
                Ok(Decision::Commit(payloads))
            }
            ClientMessage::Status { activity } => {
                let entry = self.lookup(activity, from)?;
                let mut view = self.status(activity, now).expect("looked up above");
                if entry.activity().policy() == PrivacyPolicy::AnonymousCount {
                    view.participants.retain(|p| &p.id == from);
                }
                Ok(Decision::Reply(vec![ServerMessage::StatusView(view)]))
            }
        }
    }

    // -- reads -------------------------------------------------------------

    /// Queued notifications with sequence above `cursor`, and the cursor a
    /// client holding them would report next.
    pub fn pending(&self, who: &ParticipantId, cursor: u64) -> (Vec<ServerMessage>, u64) {
        let Some(queue) = self.queues.get(who) else {
            return (Vec::new(), cursor);
        };
        let messages: Vec<ServerMessage> = queue
            .items
            .iter()
            .enumerate()
            .skip(cursor.min(queue.last_seq()) as usize)
            .map(|(i, n)| ServerMessage::Notify {
                seq: i as u64 + 1,
                notification: n.clone(),
            })
            .collect();
        (messages, cursor.max(queue.last_seq()))
    }

    /// Unredacted view of an activity, for operators.
    pub fn status(&self, id: &ActivityId, now: Timestamp) -> Result<StatusView, Rejection> {
        let entry = self
            .activities
            .get(id)
            .ok_or_else(|| Rejection::new(ErrorCode::UnknownActivity, format!("no activity {id}")))?;
        let a = entry.activity();
        Ok(StatusView {
            activity: id.clone(),
            phase: a.phase_at(now),
            arrivals: entry.arrivals(),
            accepted: a.accepted_count() as u32,
            participants: a
                .participants()
                .iter()
                .map(|r| ParticipantView {
                    id: r.id.clone(),
                    status: r.status,
                    arrived: entry.arrived.contains(&r.id),
                })
                .collect(),
        })
    }
}

#[derive(Debug, Error)]
pub enum CreateError {
    #[error(transparent)]
    Activity(#[from] ActivityError),
    #[error("event log: {0}")]
    Io(#[from] io::Error),
}

/// Messages paired with their recipient.
pub type Delivery = Vec<(ParticipantId, ServerMessage)>;

enum Decision {
    /// Read-only answer for the sender.
    Reply(Vec<ServerMessage>),
    /// Records to append; the sender gets an `Ack`.
    Commit(Vec<RecordPayload>),
}

/// Server state plus its log, optionally mirrored to a file.
pub struct Server {
    state: ServerState,
    records: Vec<EventRecord>,
    sink: Option<BufWriter<File>>,
}

impl Default for Server {
    fn default() -> Self {
        Self::new()
    }
}

impl Server {
    pub fn new() -> Self {
        Server {
            state: ServerState::default(),
            records: Vec::new(),
            sink: None,
        }
    }

    /// Open (or create) a log file, replaying whatever it already holds.
    pub fn open(path: &Path) -> anyhow::Result<Self> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(e.into()),
        };
        let state = replay_text(&text)?;
        let records = text
            .lines()
            .map(EventRecord::from_line)
            .collect::<Result<Vec<_>, _>>()?;
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Server {
            state,
            records,
            sink: Some(BufWriter::new(file)),
        })
    }

    pub fn state(&self) -> &ServerState {
        &self.state
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    fn persist(&mut self, outcome: &Outcome) -> io::Result<()> {
        if let Some(sink) = &mut self.sink {
            for r in &outcome.records {
                log::append(sink, r)?;
            }
            sink.flush()?;
        }
        self.records.extend(outcome.records.iter().cloned());
        Ok(())
    }

    pub fn handle(
        &mut self,
        msg: &ClientMessage,
        from: &ParticipantId,
        now: Timestamp,
    ) -> io::Result<Outcome> {
        let outcome = self.state.handle(msg, from, now);
        self.persist(&outcome)?;
        Ok(outcome)
    }

    pub fn create_activity(
        &mut self,
        spec: ActivitySpec,
        now: Timestamp,
        calendar_uid: Option<String>,
    ) -> Result<(ActivityId, Outcome), CreateError> {
        let (id, outcome) = self.state.create_activity(spec, now, calendar_uid)?;
        self.persist(&outcome)?;
        Ok((id, outcome))
    }

    /// Log as it would appear on disk.
    pub fn log_text(&self) -> String {
        self.records
            .iter()
            .map(|r| {
                let mut l = r.to_line();
                l.push('\n');
                l
            })
            .collect()
    }
}
