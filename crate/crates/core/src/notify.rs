//! Notification fanout.
//!
//! Recipients are always drawn from accepted participants, so people who
//! declined or never answered hear nothing beyond their invitation.
//! Notifications carry facts (who arrived, how many, when), never positions.

use thiserror::Error;

use crate::activity::{
    Activity, ActivityId, ActivityKind, ParticipantId, PrivacyPolicy, Timestamp,
};
use crate::geo::GeoPoint;

/// What an invitee gets to see of an activity.
///
/// The center and radius belong to the activity definition, not to any
/// participant. The organizer is withheld under [`PrivacyPolicy::AnonymousCount`].
#[derive(Debug, Clone, PartialEq)]
pub struct ActivitySummary {
    pub id: ActivityId,
    pub title: String,
    pub kind: ActivityKind,
    pub start: Timestamp,
    pub end: Timestamp,
    pub center: GeoPoint,
    pub radius_m: f64,
    pub policy: PrivacyPolicy,
    pub organizer: Option<ParticipantId>,
}

impl ActivitySummary {
    pub fn of(activity: &Activity) -> Self {
        ActivitySummary {
            id: activity.id().clone(),
            title: activity.title().to_owned(),
            kind: activity.kind(),
            start: activity.window().start(),
            end: activity.window().end(),
            center: activity.fence().center(),
            radius_m: activity.fence().radius_m(),
            policy: activity.policy(),
            organizer: render_identity(activity.policy(), activity.organizer()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Notification {
    Invitation(ActivitySummary),
    SelfArrivalAck {
        activity: ActivityId,
        at: Timestamp,
    },
    ArrivalNotice {
        activity: ActivityId,
        at: Timestamp,
        identity: Option<ParticipantId>,
    },
    GatheringUpdate {
        activity: ActivityId,
        count: u32,
    },
    AllArrived {
        activity: ActivityId,
        at: Timestamp,
    },
    TaskDone {
        activity: ActivityId,
        at: Timestamp,
        identity: Option<ParticipantId>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NotifyError {
    #[error("activity {0} is not a task")]
    KindMismatch(ActivityId),
}

pub type Fanout = Vec<(ParticipantId, Notification)>;

pub fn on_invite(activity: &Activity) -> Fanout {
    let summary = ActivitySummary::of(activity);
    activity
        .participants()
        .iter()
        .filter(|r| &r.id != activity.organizer())
        .map(|r| (r.id.clone(), Notification::Invitation(summary.clone())))
        .collect()
}

pub fn render_identity(policy: PrivacyPolicy, who: &ParticipantId) -> Option<ParticipantId> {
    match policy {
        PrivacyPolicy::DiscloseIdentity => Some(who.clone()),
        PrivacyPolicy::AnonymousCount => None,
    }
}

/// `arrivals_total` includes this arrival.
pub fn on_arrival(
    activity: &Activity,
    arriver: &ParticipantId,
    arrivals_total: u32,
    at: Timestamp,
) -> Fanout {
    let id = activity.id().clone();
    let mut out = vec![(
        arriver.clone(),
        Notification::SelfArrivalAck {
            activity: id.clone(),
            at,
        },
    )];

    if activity.kind() == ActivityKind::Gathering {
        if arrivals_total % activity.batch_threshold() == 0 {
            out.extend(activity.accepted().map(|p| {
                (
                    p.clone(),
                    Notification::GatheringUpdate {
                        activity: id.clone(),
                        count: arrivals_total,
                    },
                )
            }));
        }
    } else {
        let identity = render_identity(activity.policy(), arriver);
        out.extend(activity.accepted().filter(|p| *p != arriver).map(|p| {
            (
                p.clone(),
                Notification::ArrivalNotice {
                    activity: id.clone(),
                    at,
                    identity: identity.clone(),
                },
            )
        }));
    }

    if arrivals_total as usize == activity.accepted_count() {
        out.extend(activity.accepted().map(|p| {
            (
                p.clone(),
                Notification::AllArrived {
                    activity: id.clone(),
                    at,
                },
            )
        }));
    }
    out
}

pub fn on_task_done(
    activity: &Activity,
    doer: &ParticipantId,
    at: Timestamp,
) -> Result<Fanout, NotifyError> {
    if activity.kind() != ActivityKind::Task {
        return Err(NotifyError::KindMismatch(activity.id().clone()));
    }
    let identity = render_identity(activity.policy(), doer);
    Ok(activity
        .accepted()
        .filter(|p| *p != doer)
        .map(|p| {
            (
                p.clone(),
                Notification::TaskDone {
                    activity: activity.id().clone(),
                    at,
                    identity: identity.clone(),
                },
            )
        })
        .collect())
}
