//! Coarse-grained location-based synchronisation.
//!
//! An *activity* couples a time window, a circular geofence and a list of
//! participants. Participants arm an alarm for the activity; when an armed
//! participant's location fixes cross from outside the fence to inside while
//! the activity is running, the server records an arrival and fans out
//! notifications to the other participants according to the activity kind and
//! its privacy policy. Locations are never relayed, only arrival facts.
//!
//! The crate is organised bottom-up:
//!
//! * [`geo`] great-circle distance and hysteresis zone classification
//! * [`activity`] activity types, validation and lifecycle phase
//! * [`presence`] the per-participant alarm state machine
//! * [`notify`] notification fanout and batching
//! * [`calendar`] iCalendar ingestion
//! * [`wire`] newline-delimited canonical JSON protocol
//! * [`server`] event-sourced server state, replay and the TCP front end
//! * [`sim`] deterministic scenario simulation

pub mod activity;
pub mod calendar;
pub mod geo;
pub mod notify;
pub mod presence;
pub mod server;
pub mod sim;
pub mod wire;

pub use activity::{
    Activity, ActivityError, ActivityId, ActivityKind, ActivityPhase, ActivitySpec, Answer,
    ParticipantId, ParticipantRecord, ParticipantStatus, PrivacyPolicy, TimeWindow, Timestamp,
};
pub use geo::{GeoError, GeoPoint, Geofence, Zone};
pub use notify::Notification;
pub use presence::{AlarmState, LocationFix, PresenceEvent};
pub use server::{EventRecord, ServerState};
pub use wire::{ClientMessage, ServerMessage};
