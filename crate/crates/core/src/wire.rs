//! Client/server protocol: one canonical JSON object per line.
//!
//! Every object carries a `"type"` discriminator in SCREAMING_SNAKE case.
//! Canonical form puts `"type"` first and every other key in byte order, at
//! every nesting level, so equal messages always encode to identical bytes.
//! Optional fields are omitted when absent.

use std::fmt::Write as _;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::activity::{
    ActivityId, ActivityKind, ActivityPhase, Answer, ParticipantId, ParticipantStatus,
    PrivacyPolicy, Timestamp,
};
use crate::geo::GeoPoint;
use crate::notify::{ActivitySummary, Notification};

/// Frames longer than this are refused by [`LineFramer`].
pub const MAX_FRAME_LEN: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq)]
pub enum ClientMessage {
    Hello { participant: ParticipantId },
    RespondInvite { activity: ActivityId, answer: Answer },
    Arm { activity: ActivityId },
    Disarm { activity: ActivityId },
    Fix { activity: ActivityId, point: GeoPoint, at: Timestamp },
    TaskDone { activity: ActivityId, at: Timestamp },
    Poll { cursor: u64 },
    Status { activity: ActivityId },
}

impl ClientMessage {
    /// The `"type"` tag of this message.
    pub fn kind(&self) -> &'static str {
        match self {
            ClientMessage::Hello { .. } => "HELLO",
            ClientMessage::RespondInvite { .. } => "RESPOND_INVITE",
            ClientMessage::Arm { .. } => "ARM",
            ClientMessage::Disarm { .. } => "DISARM",
            ClientMessage::Fix { .. } => "FIX",
            ClientMessage::TaskDone { .. } => "TASK_DONE",
            ClientMessage::Poll { .. } => "POLL",
            ClientMessage::Status { .. } => "STATUS",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParticipantView {
    pub id: ParticipantId,
    pub status: ParticipantStatus,
    pub arrived: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatusView {
    pub activity: ActivityId,
    pub phase: ActivityPhase,
    pub arrivals: u32,
    pub accepted: u32,
    pub participants: Vec<ParticipantView>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    UnknownActivity,
    NotAParticipant,
    NotAccepted,
    AlreadyArmed,
    AlreadyResponded,
    StaleFix,
    KindMismatch,
    PhaseViolation,
    AlreadyDone,
    BadCursor,
    BadFrame,
    NotIdentified,
}

const ERROR_CODES: [(ErrorCode, &str); 12] = [
    (ErrorCode::UnknownActivity, "UNKNOWN_ACTIVITY"),
    (ErrorCode::NotAParticipant, "NOT_A_PARTICIPANT"),
    (ErrorCode::NotAccepted, "NOT_ACCEPTED"),
    (ErrorCode::AlreadyArmed, "ALREADY_ARMED"),
    (ErrorCode::AlreadyResponded, "ALREADY_RESPONDED"),
    (ErrorCode::StaleFix, "STALE_FIX"),
    (ErrorCode::KindMismatch, "KIND_MISMATCH"),
    (ErrorCode::PhaseViolation, "PHASE_VIOLATION"),
    (ErrorCode::AlreadyDone, "ALREADY_DONE"),
    (ErrorCode::BadCursor, "BAD_CURSOR"),
    (ErrorCode::BadFrame, "BAD_FRAME"),
    (ErrorCode::NotIdentified, "NOT_IDENTIFIED"),
];

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        ERROR_CODES.iter().find(|(c, _)| *c == self).map(|(_, s)| *s).unwrap()
    }

    pub fn parse(s: &str) -> Option<Self> {
        ERROR_CODES.iter().find(|(_, n)| *n == s).map(|(c, _)| *c)
    }

    pub fn all() -> impl Iterator<Item = ErrorCode> {
        ERROR_CODES.iter().map(|(c, _)| *c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ServerMessage {
    Welcome { time: Timestamp },
    Invite(ActivitySummary),
    Notify { seq: u64, notification: Notification },
    StatusView(StatusView),
    Ack { of: String },
    Err { code: ErrorCode, detail: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("unknown message type {0:?}")]
    UnknownType(String),
    #[error("missing field {0}")]
    FieldMissing(String),
    #[error("invalid field {0}")]
    FieldInvalid(String),
    #[error("frame exceeds {MAX_FRAME_LEN} bytes")]
    FrameTooLong,
}

/// A decoded message together with the unknown fields that were skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded<M> {
    pub message: M,
    pub ignored_fields: Vec<String>,
}

// ---------------------------------------------------------------------------
// canonical JSON

/// Serialize `value` with `"type"` first and remaining keys in byte order.
pub fn to_canonical(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort_by(|a, b| (a.as_str() != "type", a.as_str()).cmp(&(b.as_str() != "type", b.as_str())));
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(v, out);
            }
            out.push(']');
        }
        // scalars: serde_json never emits raw newlines inside strings
        scalar => {
            let _ = write!(out, "{scalar}");
        }
    }
}

// ---------------------------------------------------------------------------
// encoding

fn tagged(tag: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("type".into(), Value::String(tag.into()));
    m
}

fn s(v: &str) -> Value {
    Value::String(v.to_owned())
}

fn point_value(p: GeoPoint) -> Value {
    let mut m = Map::new();
    m.insert("lat".into(), p.lat().into());
    m.insert("lon".into(), p.lon().into());
    Value::Object(m)
}

fn enum_str<T: serde::Serialize>(v: T) -> Value {
    serde_json::to_value(v).expect("unit enum serializes")
}

fn summary_value(sum: &ActivitySummary) -> Value {
    let mut m = Map::new();
    m.insert("center".into(), point_value(sum.center));
    m.insert("end".into(), sum.end.0.into());
    m.insert("id".into(), s(sum.id.as_str()));
    m.insert("kind".into(), enum_str(sum.kind));
    if let Some(o) = &sum.organizer {
        m.insert("organizer".into(), s(o.as_str()));
    }
    m.insert("policy".into(), enum_str(sum.policy));
    m.insert("radius_m".into(), sum.radius_m.into());
    m.insert("start".into(), sum.start.0.into());
    m.insert("title".into(), s(&sum.title));
    Value::Object(m)
}

pub fn notification_value(n: &Notification) -> Value {
    let mut m;
    match n {
        Notification::Invitation(sum) => {
            m = tagged("INVITATION");
            m.insert("summary".into(), summary_value(sum));
        }
        Notification::SelfArrivalAck { activity, at } => {
            m = tagged("SELF_ARRIVAL_ACK");
            m.insert("activity".into(), s(activity.as_str()));
            m.insert("at".into(), at.0.into());
        }
        Notification::ArrivalNotice {
            activity,
            at,
            identity,
        } => {
            m = tagged("ARRIVAL_NOTICE");
            m.insert("activity".into(), s(activity.as_str()));
            m.insert("at".into(), at.0.into());
            if let Some(id) = identity {
                m.insert("identity".into(), s(id.as_str()));
            }
        }
        Notification::GatheringUpdate { activity, count } => {
            m = tagged("GATHERING_UPDATE");
            m.insert("activity".into(), s(activity.as_str()));
            m.insert("count".into(), (*count).into());
        }
        Notification::AllArrived { activity, at } => {
            m = tagged("ALL_ARRIVED");
            m.insert("activity".into(), s(activity.as_str()));
            m.insert("at".into(), at.0.into());
        }
        Notification::TaskDone {
            activity,
            at,
            identity,
        } => {
            m = tagged("TASK_DONE");
            m.insert("activity".into(), s(activity.as_str()));
            m.insert("at".into(), at.0.into());
            if let Some(id) = identity {
                m.insert("identity".into(), s(id.as_str()));
            }
        }
    }
    Value::Object(m)
}

pub fn client_value(msg: &ClientMessage) -> Value {
    let mut m = tagged(msg.kind());
    match msg {
        ClientMessage::Hello { participant } => {
            m.insert("participant".into(), s(participant.as_str()));
        }
        ClientMessage::RespondInvite { activity, answer } => {
            m.insert("activity".into(), s(activity.as_str()));
            m.insert("answer".into(), enum_str(answer));
        }
        ClientMessage::Arm { activity }
        | ClientMessage::Disarm { activity }
        | ClientMessage::Status { activity } => {
            m.insert("activity".into(), s(activity.as_str()));
        }
        ClientMessage::Fix {
            activity,
            point,
            at,
        } => {
            m.insert("activity".into(), s(activity.as_str()));
            m.insert("at".into(), at.0.into());
            m.insert("point".into(), point_value(*point));
        }
        ClientMessage::TaskDone { activity, at } => {
            m.insert("activity".into(), s(activity.as_str()));
            m.insert("at".into(), at.0.into());
        }
        ClientMessage::Poll { cursor } => {
            m.insert("cursor".into(), (*cursor).into());
        }
    }
    Value::Object(m)
}

pub fn status_value(view: &StatusView) -> Value {
    let mut m = tagged("STATUS_VIEW");
    m.insert("accepted".into(), view.accepted.into());
    m.insert("activity".into(), s(view.activity.as_str()));
    m.insert("arrivals".into(), view.arrivals.into());
    m.insert(
        "participants".into(),
        Value::Array(
            view.participants
                .iter()
                .map(|p| {
                    let mut pm = Map::new();
                    pm.insert("arrived".into(), p.arrived.into());
                    pm.insert("id".into(), s(p.id.as_str()));
                    pm.insert("status".into(), enum_str(p.status));
                    Value::Object(pm)
                })
                .collect(),
        ),
    );
    m.insert("phase".into(), enum_str(view.phase));
    Value::Object(m)
}

pub fn server_value(msg: &ServerMessage) -> Value {
    match msg {
        ServerMessage::Welcome { time } => {
            let mut m = tagged("WELCOME");
            m.insert("time".into(), time.0.into());
            Value::Object(m)
        }
        ServerMessage::Invite(sum) => {
            let mut m = tagged("INVITE");
            m.insert("summary".into(), summary_value(sum));
            Value::Object(m)
        }
        ServerMessage::Notify { seq, notification } => {
            let mut m = tagged("NOTIFY");
            m.insert("notification".into(), notification_value(notification));
            m.insert("seq".into(), (*seq).into());
            Value::Object(m)
        }
        ServerMessage::StatusView(view) => status_value(view),
        ServerMessage::Ack { of } => {
            let mut m = tagged("ACK");
            m.insert("of".into(), s(of));
            Value::Object(m)
        }
        ServerMessage::Err { code, detail } => {
            let mut m = tagged("ERR");
            m.insert("code".into(), s(code.as_str()));
            m.insert("detail".into(), s(detail));
            Value::Object(m)
        }
    }
}

/// Encode a client message as one newline-terminated frame.
pub fn encode_client(msg: &ClientMessage) -> String {
    let mut line = to_canonical(&client_value(msg));
    line.push('\n');
    line
}

/// Encode a server message as one newline-terminated frame.
pub fn encode_server(msg: &ServerMessage) -> String {
    let mut line = to_canonical(&server_value(msg));
    line.push('\n');
    line
}

// ---------------------------------------------------------------------------
// decoding

struct Fields<'a> {
    map: &'a Map<String, Value>,
    path: String,
}

impl<'a> Fields<'a> {
    fn of(value: &'a Value, path: &str) -> Result<Self, WireError> {
        match value {
            Value::Object(map) => Ok(Fields {
                map,
                path: path.to_owned(),
            }),
            _ if path.is_empty() => Err(WireError::Malformed("not a JSON object".into())),
            _ => Err(WireError::FieldInvalid(path.to_owned())),
        }
    }

    fn name(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_owned()
        } else {
            format!("{}.{}", self.path, key)
        }
    }

    fn get(&self, key: &str) -> Result<&'a Value, WireError> {
        match self.map.get(key) {
            None | Some(Value::Null) => Err(WireError::FieldMissing(self.name(key))),
            Some(v) => Ok(v),
        }
    }

    fn opt(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn invalid(&self, key: &str) -> WireError {
        WireError::FieldInvalid(self.name(key))
    }

    fn string(&self, key: &str) -> Result<&'a str, WireError> {
        self.get(key)?.as_str().ok_or_else(|| self.invalid(key))
    }

    fn id(&self, key: &str) -> Result<&'a str, WireError> {
        match self.string(key)? {
            "" => Err(self.invalid(key)),
            id => Ok(id),
        }
    }

    fn opt_id(&self, key: &str) -> Result<Option<&'a str>, WireError> {
        match self.opt(key) {
            None => Ok(None),
            Some(Value::String(v)) if !v.is_empty() => Ok(Some(v)),
            Some(_) => Err(self.invalid(key)),
        }
    }

    fn u64(&self, key: &str) -> Result<u64, WireError> {
        self.get(key)?.as_u64().ok_or_else(|| self.invalid(key))
    }

    fn u32(&self, key: &str) -> Result<u32, WireError> {
        u32::try_from(self.u64(key)?).map_err(|_| self.invalid(key))
    }

    fn f64(&self, key: &str) -> Result<f64, WireError> {
        self.get(key)?.as_f64().ok_or_else(|| self.invalid(key))
    }

    fn bool(&self, key: &str) -> Result<bool, WireError> {
        self.get(key)?.as_bool().ok_or_else(|| self.invalid(key))
    }

    fn enumeration<T: serde::de::DeserializeOwned>(&self, key: &str) -> Result<T, WireError> {
        serde_json::from_value(self.get(key)?.clone()).map_err(|_| self.invalid(key))
    }

    fn nested(&self, key: &str) -> Result<Fields<'a>, WireError> {
        Fields::of(self.get(key)?, &self.name(key))
    }

    fn point(&self, key: &str) -> Result<GeoPoint, WireError> {
        let p = self.nested(key)?;
        let point = GeoPoint::new(p.f64("lat")?, p.f64("lon")?).map_err(|_| self.invalid(key));
        point
    }

    /// Record keys this decoder does not know about.
    fn unknown(&self, known: &[&str], sink: &mut Vec<String>) {
        for k in self.map.keys() {
            if k != "type" && !known.contains(&k.as_str()) {
                sink.push(self.name(k));
            }
        }
    }
}

fn parse_frame(frame: &str) -> Result<Value, WireError> {
    let value: Value =
        serde_json::from_str(frame).map_err(|e| WireError::Malformed(e.to_string()))?;
    if !value.is_object() {
        return Err(WireError::Malformed("not a JSON object".into()));
    }
    Ok(value)
}

fn type_tag<'a>(f: &Fields<'a>) -> Result<&'a str, WireError> {
    f.string("type")
}

fn decode_summary(f: &Fields<'_>, ignored: &mut Vec<String>) -> Result<ActivitySummary, WireError> {
    f.unknown(
        &["center", "end", "id", "kind", "organizer", "policy", "radius_m", "start", "title"],
        ignored,
    );
    Ok(ActivitySummary {
        id: f.id("id")?.into(),
        title: f.string("title")?.to_owned(),
        kind: f.enumeration::<ActivityKind>("kind")?,
        start: Timestamp(f.u64("start")?),
        end: Timestamp(f.u64("end")?),
        center: f.point("center")?,
        radius_m: f.f64("radius_m")?,
        policy: f.enumeration::<PrivacyPolicy>("policy")?,
        organizer: f.opt_id("organizer")?.map(Into::into),
    })
}

fn decode_notification(
    f: &Fields<'_>,
    ignored: &mut Vec<String>,
) -> Result<Notification, WireError> {
    let tag = type_tag(f)?;
    let n = match tag {
        "INVITATION" => {
            f.unknown(&["summary"], ignored);
            Notification::Invitation(decode_summary(&f.nested("summary")?, ignored)?)
        }
        "SELF_ARRIVAL_ACK" => {
            f.unknown(&["activity", "at"], ignored);
            Notification::SelfArrivalAck {
                activity: f.id("activity")?.into(),
                at: Timestamp(f.u64("at")?),
            }
        }
        "ARRIVAL_NOTICE" => {
            f.unknown(&["activity", "at", "identity"], ignored);
            Notification::ArrivalNotice {
                activity: f.id("activity")?.into(),
                at: Timestamp(f.u64("at")?),
                identity: f.opt_id("identity")?.map(Into::into),
            }
        }
        "GATHERING_UPDATE" => {
            f.unknown(&["activity", "count"], ignored);
            Notification::GatheringUpdate {
                activity: f.id("activity")?.into(),
                count: f.u32("count")?,
            }
        }
        "ALL_ARRIVED" => {
            f.unknown(&["activity", "at"], ignored);
            Notification::AllArrived {
                activity: f.id("activity")?.into(),
                at: Timestamp(f.u64("at")?),
            }
        }
        "TASK_DONE" => {
            f.unknown(&["activity", "at", "identity"], ignored);
            Notification::TaskDone {
                activity: f.id("activity")?.into(),
                at: Timestamp(f.u64("at")?),
                identity: f.opt_id("identity")?.map(Into::into),
            }
        }
        other => return Err(WireError::UnknownType(other.to_owned())),
    };
    Ok(n)
}

/// Decode one client frame (without its trailing newline), reporting
/// ignored unknown fields.
pub fn decode_client_verbose(frame: &str) -> Result<Decoded<ClientMessage>, WireError> {
    let value = parse_frame(frame)?;
    let f = Fields::of(&value, "")?;
    let mut ignored = Vec::new();
    let message = match type_tag(&f)? {
        "HELLO" => {
            f.unknown(&["participant"], &mut ignored);
            ClientMessage::Hello {
                participant: f.id("participant")?.into(),
            }
        }
        "RESPOND_INVITE" => {
            f.unknown(&["activity", "answer"], &mut ignored);
            ClientMessage::RespondInvite {
                activity: f.id("activity")?.into(),
                answer: f.enumeration::<Answer>("answer")?,
            }
        }
        "ARM" => {
            f.unknown(&["activity"], &mut ignored);
            ClientMessage::Arm {
                activity: f.id("activity")?.into(),
            }
        }
        "DISARM" => {
            f.unknown(&["activity"], &mut ignored);
            ClientMessage::Disarm {
                activity: f.id("activity")?.into(),
            }
        }
        "FIX" => {
            f.unknown(&["activity", "at", "point"], &mut ignored);
            f.nested("point")?.unknown(&["lat", "lon"], &mut ignored);
            ClientMessage::Fix {
                activity: f.id("activity")?.into(),
                point: f.point("point")?,
                at: Timestamp(f.u64("at")?),
            }
        }
        "TASK_DONE" => {
            f.unknown(&["activity", "at"], &mut ignored);
            ClientMessage::TaskDone {
                activity: f.id("activity")?.into(),
                at: Timestamp(f.u64("at")?),
            }
        }
        "POLL" => {
            f.unknown(&["cursor"], &mut ignored);
            ClientMessage::Poll {
                cursor: f.u64("cursor")?,
            }
        }
        "STATUS" => {
            f.unknown(&["activity"], &mut ignored);
            ClientMessage::Status {
                activity: f.id("activity")?.into(),
            }
        }
        other => return Err(WireError::UnknownType(other.to_owned())),
    };
    Ok(Decoded {
        message,
        ignored_fields: ignored,
    })
}

/// Decode one server frame (without its trailing newline), reporting
/// ignored unknown fields.
pub fn decode_server_verbose(frame: &str) -> Result<Decoded<ServerMessage>, WireError> {
    let value = parse_frame(frame)?;
    let f = Fields::of(&value, "")?;
    let mut ignored = Vec::new();
    let message = match type_tag(&f)? {
        "WELCOME" => {
            f.unknown(&["time"], &mut ignored);
            ServerMessage::Welcome {
                time: Timestamp(f.u64("time")?),
            }
        }
        "INVITE" => {
            f.unknown(&["summary"], &mut ignored);
            ServerMessage::Invite(decode_summary(&f.nested("summary")?, &mut ignored)?)
        }
        "NOTIFY" => {
            f.unknown(&["notification", "seq"], &mut ignored);
            ServerMessage::Notify {
                seq: f.u64("seq")?,
                notification: decode_notification(&f.nested("notification")?, &mut ignored)?,
            }
        }
        "STATUS_VIEW" => {
            f.unknown(&["accepted", "activity", "arrivals", "participants", "phase"], &mut ignored);
            let list = f
                .get("participants")?
                .as_array()
                .ok_or_else(|| f.invalid("participants"))?;
            let mut participants = Vec::with_capacity(list.len());
            for (i, item) in list.iter().enumerate() {
                let p = Fields::of(item, &format!("participants[{i}]"))?;
                p.unknown(&["arrived", "id", "status"], &mut ignored);
                participants.push(ParticipantView {
                    id: p.id("id")?.into(),
                    status: p.enumeration::<ParticipantStatus>("status")?,
                    arrived: p.bool("arrived")?,
                });
            }
            ServerMessage::StatusView(StatusView {
                activity: f.id("activity")?.into(),
                phase: f.enumeration::<ActivityPhase>("phase")?,
                arrivals: f.u32("arrivals")?,
                accepted: f.u32("accepted")?,
                participants,
            })
        }
        "ACK" => {
            f.unknown(&["of"], &mut ignored);
            ServerMessage::Ack {
                of: f.id("of")?.to_owned(),
            }
        }
        "ERR" => {
            f.unknown(&["code", "detail"], &mut ignored);
            ServerMessage::Err {
                code: ErrorCode::parse(f.string("code")?).ok_or_else(|| f.invalid("code"))?,
                detail: f.string("detail")?.to_owned(),
            }
        }
        other => return Err(WireError::UnknownType(other.to_owned())),
    };
    Ok(Decoded {
        message,
        ignored_fields: ignored,
    })
}

pub fn decode_client(frame: &str) -> Result<ClientMessage, WireError> {
    let decoded = decode_client_verbose(frame)?;
    for field in &decoded.ignored_fields {
        log::warn!("ignoring unknown field {field} in {} frame", decoded.message.kind());
    }
    Ok(decoded.message)
}

pub fn decode_server(frame: &str) -> Result<ServerMessage, WireError> {
    let decoded = decode_server_verbose(frame)?;
    for field in &decoded.ignored_fields {
        log::warn!("ignoring unknown field {field} in server frame");
    }
    Ok(decoded.message)
}

// ---------------------------------------------------------------------------
// framing

/// Reassembles newline-delimited frames from arbitrarily split reads.
#[derive(Debug, Default)]
pub struct LineFramer {
    buf: Vec<u8>,
    overflow: bool,
}

impl LineFramer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feed bytes; returns every frame completed by them, without the `\n`.
    /// A frame that grew past [`MAX_FRAME_LEN`] yields `FrameTooLong` in its
    /// place and is otherwise discarded.
    pub fn push(&mut self, bytes: &[u8]) -> Vec<Result<Vec<u8>, WireError>> {
        let mut frames = Vec::new();
        for &b in bytes {
            if b == b'\n' {
                if self.overflow {
                    frames.push(Err(WireError::FrameTooLong));
                } else {
                    frames.push(Ok(std::mem::take(&mut self.buf)));
                }
                self.buf.clear();
                self.overflow = false;
            } else if !self.overflow {
                if self.buf.len() == MAX_FRAME_LEN {
                    self.overflow = true;
                    self.buf.clear();
                } else {
                    self.buf.push(b);
                }
            }
        }
        frames
    }

    /// Bytes received after the last newline.
    pub fn pending(&self) -> &[u8] {
        &self.buf
    }
}
