use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use super::{interpolate, perturb, Trace};
use crate::activity::{ActivityError, ActivityId, ActivitySpec, Answer, ParticipantId, Timestamp};
use crate::calendar::{parse_ics, CalendarError};
use crate::geo::GeoPoint;
use crate::notify::Notification;
use crate::server::{CreateError, Server};
use crate::wire::{server_value, to_canonical, ClientMessage, ServerMessage};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Calendar(#[from] CalendarError),
    #[error("activity rejected: {0}")]
    Activity(#[from] ActivityError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActivitySource {
    Calendar {
        ics: PathBuf,
        system_address: String,
    },
    Inline(ActivitySpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionKind {
    Accept,
    Decline,
    Arm,
    Disarm,
    TaskDone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub at: Timestamp,
    #[serde(rename = "do")]
    pub kind: ActionKind,
    pub activity: ActivityId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Actor {
    pub id: ParticipantId,
    pub trace: Trace,
    #[serde(default)]
    pub actions: Vec<Action>,
}

/// A scripted run. Activities are created at `start` and receive the ids
/// `a1`, `a2`, ... in listing order; actions refer to them by those ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub seed: u64,
    pub noise_sigma_m: f64,
    pub fix_period_s: u64,
    #[serde(default)]
    pub start: Timestamp,
    pub horizon: Timestamp,
    #[serde(default)]
    pub activities: Vec<ActivitySource>,
    #[serde(default)]
    pub actors: Vec<Actor>,
}

impl Scenario {
    /// Load a scenario file; calendar paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        let mut scenario: Scenario = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for source in &mut scenario.activities {
            if let ActivitySource::Calendar { ics, .. } = source {
                if ics.is_relative() {
                    *ics = base.join(&*ics);
                }
            }
        }
        Ok(scenario)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |m: String| Err(ScenarioError::Invalid(m));
        if self.fix_period_s == 0 {
            return invalid("fix_period_s must be positive".into());
        }
        if !(self.noise_sigma_m >= 0.0 && self.noise_sigma_m.is_finite()) {
            return invalid("noise_sigma_m must be a non-negative number".into());
        }
        if self.horizon < self.start {
            return invalid("horizon precedes start".into());
        }
        let mut ids = BTreeSet::new();
        for actor in &self.actors {
            if !ids.insert(&actor.id) {
                return invalid(format!("actor {} listed twice", actor.id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptEntry {
    pub at: Timestamp,
    pub to: ParticipantId,
    pub message: ServerMessage,
}

impl TranscriptEntry {
    pub fn to_line(&self) -> String {
        let mut m = Map::new();
        m.insert("at".into(), self.at.0.into());
        m.insert("msg".into(), server_value(&self.message));
        m.insert("to".into(), Value::String(self.to.as_str().to_owned()));
        to_canonical(&Value::Object(m))
    }
}

/// Every server-to-participant message of a run, in emission order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn lines(&self) -> impl Iterator<Item = String> + '_ {
        self.entries.iter().map(TranscriptEntry::to_line)
    }

    /// JSON Lines, newline-terminated.
    pub fn to_jsonl(&self) -> String {
        self.lines().map(|l| l + "\n").collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub struct SimRun {
    pub transcript: Transcript,
    pub server: Server,
}

pub fn run_scenario(scenario: &Scenario) -> Result<Transcript, ScenarioError> {
    run_scenario_full(scenario).map(|run| run.transcript)
}

struct Client<'a> {
    actor: &'a Actor,
    armed: BTreeSet<ActivityId>,
    last_fix: BTreeMap<ActivityId, Timestamp>,
    done: Vec<bool>,
}

struct Runner {
    server: Server,
    transcript: Transcript,
}

impl Runner {
    fn send(&mut self, msg: ClientMessage, from: &ParticipantId, now: Timestamp) -> Vec<(ParticipantId, ServerMessage)> {
        let outcome = self
            .server
            .handle(&msg, from, now)
            .expect("in-memory log cannot fail");
        self.record(now, &outcome.outbound);
        outcome.outbound
    }

    fn record(&mut self, at: Timestamp, outbound: &[(ParticipantId, ServerMessage)]) {
        self.transcript
            .entries
            .extend(outbound.iter().map(|(to, message)| TranscriptEntry {
                at,
                to: to.clone(),
                message: message.clone(),
            }));
    }
}

/// Run the scenario and keep the server for inspection.
pub fn run_scenario_full(scenario: &Scenario) -> Result<SimRun, ScenarioError> {
    scenario.validate()?;
    let mut runner = Runner {
        server: Server::new(),
        transcript: Transcript::default(),
    };
    let t0 = scenario.start;

    for source in &scenario.activities {
        let specs: Vec<(ActivitySpec, Option<String>)> = match source {
            ActivitySource::Inline(spec) => vec![(spec.clone(), None)],
            ActivitySource::Calendar {
                ics,
                system_address,
            } => {
                let text = std::fs::read_to_string(ics)?;
                parse_ics(&text, system_address)?
                    .drafts
                    .iter()
                    .map(|d| Ok((d.to_spec()?, Some(d.uid.clone()))))
                    .collect::<Result<_, ActivityError>>()?
            }
        };
        for (spec, uid) in specs {
            let (_, outcome) = runner.server.create_activity(spec, t0, uid).map_err(|e| match e {
                CreateError::Activity(e) => ScenarioError::Activity(e),
                CreateError::Io(e) => ScenarioError::Io(e),
            })?;
            runner.record(t0, &outcome.outbound);
        }
    }

    // dangling references
    let state = runner.server.state();
    for actor in &scenario.actors {
        if !state
            .activities()
            .any(|a| a.status_of(&actor.id).is_some())
        {
            return Err(ScenarioError::Invalid(format!(
                "actor {} is not part of any activity",
                actor.id
            )));
        }
        for action in &actor.actions {
            match state.activity(&action.activity) {
                None => {
                    return Err(ScenarioError::Invalid(format!(
                        "actor {} refers to unknown activity {}",
                        actor.id, action.activity
                    )))
                }
                Some(a) if a.status_of(&actor.id).is_none() => {
                    return Err(ScenarioError::Invalid(format!(
                        "actor {} is not a participant of {}",
                        actor.id, action.activity
                    )))
                }
                Some(_) => {}
            }
        }
    }

    let mut clients: Vec<Client<'_>> = scenario
        .actors
        .iter()
        .map(|actor| Client {
            actor,
            armed: BTreeSet::new(),
            last_fix: BTreeMap::new(),
            done: vec![false; actor.actions.len()],
        })
        .collect();
    // ties between actors resolve by participant id
    clients.sort_by(|a, b| a.actor.id.cmp(&b.actor.id));

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut now = t0;
    while now <= scenario.horizon {
        // one physical position per actor per step, drawn lazily in a fixed order
        let mut positions: BTreeMap<ParticipantId, GeoPoint> = BTreeMap::new();
        let mut position = |actor: &Actor, rng: &mut ChaCha8Rng| -> GeoPoint {
            *positions.entry(actor.id.clone()).or_insert_with(|| {
                perturb(
                    interpolate(&actor.trace, now.0 as i64),
                    scenario.noise_sigma_m,
                    rng,
                )
            })
        };

        for client in clients.iter_mut() {
            let mut due: Vec<usize> = (0..client.actor.actions.len())
                .filter(|&i| !client.done[i] && client.actor.actions[i].at <= now)
                .collect();
            due.sort_by_key(|&i| (client.actor.actions[i].at, i));
            for i in due {
                client.done[i] = true;
                let action = &client.actor.actions[i];
                let who = &client.actor.id;
                let activity = action.activity.clone();
                let msg = match action.kind {
                    ActionKind::Accept | ActionKind::Decline => ClientMessage::RespondInvite {
                        activity,
                        answer: if action.kind == ActionKind::Accept {
                            Answer::Accept
                        } else {
                            Answer::Decline
                        },
                    },
                    ActionKind::Arm => {
                        // the client reports where it is as it arms
                        let point = position(client.actor, &mut rng);
                        if client.last_fix.get(&activity).is_none_or(|t| *t < now) {
                            client.last_fix.insert(activity.clone(), now);
                            let out = runner.send(
                                ClientMessage::Fix {
                                    activity: activity.clone(),
                                    point,
                                    at: now,
                                },
                                who,
                                now,
                            );
                            observe(client, &out);
                        }
                        ClientMessage::Arm { activity }
                    }
                    ActionKind::Disarm => ClientMessage::Disarm { activity },
                    ActionKind::TaskDone => ClientMessage::TaskDone { activity, at: now },
                };
                let kind = action.kind;
                let target = action.activity.clone();
                let out = runner.send(msg, who, now);
                let acked = out
                    .iter()
                    .any(|(to, m)| to == who && matches!(m, ServerMessage::Ack { .. }));
                match kind {
                    ActionKind::Arm if acked => {
                        client.armed.insert(target);
                    }
                    ActionKind::Disarm => {
                        client.armed.remove(&target);
                    }
                    _ => {}
                }
                observe(client, &out);
            }
        }

        for client in clients.iter_mut() {
            let targets: Vec<ActivityId> = client
                .armed
                .iter()
                .filter(|a| client.last_fix.get(*a).is_none_or(|t| *t < now))
                .cloned()
                .collect();
            for activity in targets {
                let point = position(client.actor, &mut rng);
                client.last_fix.insert(activity.clone(), now);
                let out = runner.send(
                    ClientMessage::Fix {
                        activity,
                        point,
                        at: now,
                    },
                    &client.actor.id,
                    now,
                );
                observe(client, &out);
            }
        }

        now = Timestamp(now.0 + scenario.fix_period_s);
    }

    Ok(SimRun {
        transcript: runner.transcript,
        server: runner.server,
    })
}

/// A client stops reporting fixes for an activity once told it has arrived.
fn observe(client: &mut Client<'_>, outbound: &[(ParticipantId, ServerMessage)]) {
    for (to, msg) in outbound {
        if to != &client.actor.id {
            continue;
        }
        if let ServerMessage::Notify {
            notification: Notification::SelfArrivalAck { activity, .. },
            ..
        } = msg
        {
            client.armed.remove(activity);
        }
    }
}
