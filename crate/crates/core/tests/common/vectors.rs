use geosync::activity::{ActivityKind, Answer, ParticipantStatus, PrivacyPolicy};
use geosync::notify::ActivitySummary;
use geosync::wire::{ErrorCode, ParticipantView};
use geosync::{ActivityPhase, ClientMessage, Notification, ServerMessage, Timestamp};

use super::pt;

/// Messages expected from `tests/data/wire/client.jsonl`, line by line.
pub fn expected_client() -> Vec<ClientMessage> {
    use ClientMessage::*;
    vec![
        Hello { participant: "ana".into() },
        Hello { participant: "joão \"o rápido\"".into() },
        RespondInvite { activity: "a1".into(), answer: Answer::Accept },
        RespondInvite { activity: "a2".into(), answer: Answer::Decline },
        Arm { activity: "a1".into() },
        Disarm { activity: "a1".into() },
        Fix { activity: "a1".into(), point: pt(41.56, -8.397), at: Timestamp(1_717_236_000) },
        Fix { activity: "a1".into(), point: pt(-90.0, 180.0), at: Timestamp(0) },
        TaskDone { activity: "a3".into(), at: Timestamp(2100) },
        Poll { cursor: 0 },
        Poll { cursor: u64::MAX },
        Status { activity: "a1".into() },
    ]
}

/// Messages expected from `tests/data/wire/server.jsonl`, line by line.
pub fn expected_server() -> Vec<ServerMessage> {
    use Notification as N;
    use ServerMessage::*;
    let meet = ActivitySummary {
        id: "a1".into(),
        title: "Meet at the fountain".into(),
        kind: ActivityKind::MeetUp,
        start: Timestamp(0),
        end: Timestamp(7200),
        center: pt(41.56, -8.397),
        radius_m: 100.0,
        policy: PrivacyPolicy::DiscloseIdentity,
        organizer: Some("ana".into()),
    };
    let match_day = ActivitySummary {
        id: "a2".into(),
        title: "Match day".into(),
        kind: ActivityKind::Gathering,
        start: Timestamp(600),
        end: Timestamp(7200),
        center: pt(41.5617, -8.4291),
        radius_m: 100.0,
        policy: PrivacyPolicy::AnonymousCount,
        organizer: None,
    };
    let view = |id: &str, status, arrived| ParticipantView { id: id.into(), status, arrived };
    vec![
        Welcome { time: Timestamp(1_717_236_000) },
        Invite(meet),
        Notify { seq: 1, notification: N::Invitation(match_day) },
        Notify { seq: 1, notification: N::SelfArrivalAck { activity: "a1".into(), at: Timestamp(3300) } },
        Notify {
            seq: 2,
            notification: N::ArrivalNotice { activity: "a1".into(), at: Timestamp(3300), identity: Some("ana".into()) },
        },
        Notify {
            seq: 7,
            notification: N::ArrivalNotice { activity: "a2".into(), at: Timestamp(990), identity: None },
        },
        Notify { seq: 4, notification: N::GatheringUpdate { activity: "a2".into(), count: 10 } },
        Notify { seq: 5, notification: N::AllArrived { activity: "a1".into(), at: Timestamp(3780) } },
        Notify {
            seq: 2,
            notification: N::TaskDone { activity: "a3".into(), at: Timestamp(2100), identity: Some("pedro".into()) },
        },
        StatusView(geosync::wire::StatusView {
            activity: "a1".into(),
            phase: ActivityPhase::Active,
            arrivals: 1,
            accepted: 2,
            participants: vec![
                view("ana", ParticipantStatus::Accepted, true),
                view("mario", ParticipantStatus::Accepted, false),
                view("rita", ParticipantStatus::Declined, false),
                view("zé", ParticipantStatus::Invited, false),
            ],
        }),
        Ack { of: "FIX".into() },
        Err { code: ErrorCode::StaleFix, detail: "fix at 5 is not after 9".into() },
        Err { code: ErrorCode::BadFrame, detail: "tab\there\nnewline".into() },
    ]
}
