#![allow(dead_code)]

use std::path::PathBuf;

pub mod oracle;
pub mod vectors;

use geosync::activity::{ActivityKind, Answer, ParticipantStatus, PrivacyPolicy};
use geosync::notify::ActivitySummary;
use geosync::wire::{ErrorCode, ParticipantView, StatusView};
use geosync::{ActivityId, ActivityPhase, ClientMessage, GeoPoint, Notification, ParticipantId, ServerMessage, Timestamp};
use proptest::prelude::*;

pub const SCENARIOS: [&str; 4] = ["meetup", "gathering", "pickup", "task"];

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("data")
}

pub fn pt(lat: f64, lon: f64) -> GeoPoint {
    GeoPoint::new(lat, lon).unwrap()
}

// Identifiers include quotes, backslashes, control and non-ASCII characters
// so escaping is exercised.
pub fn id_string() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z][a-z0-9]{0,7}",
        "[a-z]{1,6}@[a-z]{1,6}\\.example",
        any::<String>().prop_filter("non-empty", |s| !s.is_empty()),
    ]
}

pub fn participant() -> impl Strategy<Value = ParticipantId> {
    id_string().prop_map(ParticipantId::new)
}

pub fn activity_id() -> impl Strategy<Value = ActivityId> {
    id_string().prop_map(ActivityId::new)
}

pub fn timestamp() -> impl Strategy<Value = Timestamp> {
    prop_oneof![Just(0u64), Just(u64::MAX), any::<u64>(), 0u64..10_000].prop_map(Timestamp)
}

pub fn point() -> impl Strategy<Value = GeoPoint> {
    let lat = prop_oneof![
        Just(90.0),
        Just(-90.0),
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE),
        -90.0f64..=90.0,
    ];
    let lon = prop_oneof![
        Just(180.0),
        Just((-180.0f64).next_up()),
        Just(1e-300),
        (-180.0f64..=180.0).prop_filter("open at -180", |l| *l > -180.0),
    ];
    (lat, lon).prop_map(|(a, o)| pt(a, o))
}

pub fn answer() -> impl Strategy<Value = Answer> {
    prop_oneof![Just(Answer::Accept), Just(Answer::Decline)]
}

pub fn client_message() -> impl Strategy<Value = ClientMessage> {
    prop_oneof![
        participant().prop_map(|participant| ClientMessage::Hello { participant }),
        (activity_id(), answer()).prop_map(|(activity, answer)| ClientMessage::RespondInvite { activity, answer }),
        activity_id().prop_map(|activity| ClientMessage::Arm { activity }),
        activity_id().prop_map(|activity| ClientMessage::Disarm { activity }),
        (activity_id(), point(), timestamp()).prop_map(|(activity, point, at)| ClientMessage::Fix { activity, point, at }),
        (activity_id(), timestamp()).prop_map(|(activity, at)| ClientMessage::TaskDone { activity, at }),
        any::<u64>().prop_map(|cursor| ClientMessage::Poll { cursor }),
        activity_id().prop_map(|activity| ClientMessage::Status { activity }),
    ]
}

fn kind() -> impl Strategy<Value = ActivityKind> {
    prop_oneof![
        Just(ActivityKind::MeetUp),
        Just(ActivityKind::Gathering),
        Just(ActivityKind::Pickup),
        Just(ActivityKind::Task),
    ]
}

fn policy() -> impl Strategy<Value = PrivacyPolicy> {
    prop_oneof![Just(PrivacyPolicy::DiscloseIdentity), Just(PrivacyPolicy::AnonymousCount)]
}

pub fn summary() -> impl Strategy<Value = ActivitySummary> {
    (
        activity_id(),
        any::<String>(),
        kind(),
        (0u64..u64::MAX, 1u64..1_000_000),
        point(),
        prop_oneof![Just(100.0), Just(f64::MIN_POSITIVE), 0.001f64..1e7],
        policy(),
        proptest::option::of(participant()),
    )
        .prop_map(|(id, title, kind, (start, len), center, radius_m, policy, organizer)| ActivitySummary {
            id,
            title,
            kind,
            start: Timestamp(start),
            end: Timestamp(start.saturating_add(len).max(start + 1)),
            center,
            radius_m,
            policy,
            organizer,
        })
}

pub fn notification() -> impl Strategy<Value = Notification> {
    prop_oneof![
        summary().prop_map(Notification::Invitation),
        (activity_id(), timestamp()).prop_map(|(activity, at)| Notification::SelfArrivalAck { activity, at }),
        (activity_id(), timestamp(), proptest::option::of(participant()))
            .prop_map(|(activity, at, identity)| Notification::ArrivalNotice { activity, at, identity }),
        (activity_id(), any::<u32>()).prop_map(|(activity, count)| Notification::GatheringUpdate { activity, count }),
        (activity_id(), timestamp()).prop_map(|(activity, at)| Notification::AllArrived { activity, at }),
        (activity_id(), timestamp(), proptest::option::of(participant()))
            .prop_map(|(activity, at, identity)| Notification::TaskDone { activity, at, identity }),
    ]
}

fn status_view() -> impl Strategy<Value = StatusView> {
    let status = prop_oneof![
        Just(ParticipantStatus::Invited),
        Just(ParticipantStatus::Accepted),
        Just(ParticipantStatus::Declined),
    ];
    let phase = prop_oneof![
        Just(ActivityPhase::Scheduled),
        Just(ActivityPhase::Active),
        Just(ActivityPhase::Ended),
    ];
    (
        activity_id(),
        phase,
        any::<u32>(),
        any::<u32>(),
        proptest::collection::vec(
            (participant(), status, any::<bool>()).prop_map(|(id, status, arrived)| ParticipantView {
                id,
                status,
                arrived,
            }),
            0..5,
        ),
    )
        .prop_map(|(activity, phase, arrivals, accepted, participants)| StatusView {
            activity,
            phase,
            arrivals,
            accepted,
            participants,
        })
}

pub fn server_message() -> impl Strategy<Value = ServerMessage> {
    let code = proptest::sample::select(ErrorCode::all().collect::<Vec<_>>());
    let kinds = proptest::sample::select(vec![
        "HELLO", "RESPOND_INVITE", "ARM", "DISARM", "FIX", "TASK_DONE", "POLL", "STATUS",
    ]);
    prop_oneof![
        timestamp().prop_map(|time| ServerMessage::Welcome { time }),
        summary().prop_map(ServerMessage::Invite),
        (1u64.., notification()).prop_map(|(seq, notification)| ServerMessage::Notify { seq, notification }),
        status_view().prop_map(ServerMessage::StatusView),
        kinds.prop_map(|k| ServerMessage::Ack { of: k.to_owned() }),
        (code, any::<String>()).prop_map(|(code, detail)| ServerMessage::Err { code, detail }),
    ]
}
