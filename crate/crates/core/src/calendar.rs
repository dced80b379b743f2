//! iCalendar ingestion.
//!
//! A calendar event becomes an activity when the service's own address is
//! among its attendees. Coordinates come from `GEO`; the remaining activity
//! settings ride in extension properties:
//!
//! | property          | values                                  |
//! |-------------------|-----------------------------------------|
//! | `X-SYNC-TYPE`     | `MEETUP`, `GATHERING`, `PICKUP`, `TASK` |
//! | `X-SYNC-PRIVACY`  | `IDENTITY`, `ANONYMOUS`                 |
//! | `X-SYNC-RADIUS`   | fence radius in meters                  |
//! | `X-SYNC-BATCH`    | gathering batch size                    |
//! | `X-SYNC-START`/`X-SYNC-END` | epoch seconds, in place of `DTSTART`/`DTEND` |
//!
//! `DTSTART`/`DTEND` must be UTC date-times (`19970714T170000Z`). Time zone
//! definitions, recurrence and all-day events are not supported.

use chrono::NaiveDateTime;
use thiserror::Error;

use crate::activity::{
    ActivityError, ActivityKind, ActivitySpec, ParticipantId, PrivacyPolicy, TimeWindow, Timestamp,
};
use crate::geo::{GeoPoint, Geofence, DEFAULT_HYSTERESIS_M, DEFAULT_RADIUS_M};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoParseError {
    #[error("GEO value must be two ';'-separated decimals")]
    Malformed,
    #[error("latitude {0} out of range")]
    LatOutOfRange(f64),
    #[error("longitude {0} out of range")]
    LonOutOfRange(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalendarError {
    #[error("input is not valid UTF-8")]
    NotUtf8,
    #[error("no VCALENDAR component found")]
    NotACalendar,
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("event {}: {reason}", uid.as_deref().unwrap_or("<no UID>"))]
    EventInvalid { uid: Option<String>, reason: String },
}

/// An enrolled calendar event, before defaults are applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityDraft {
    pub uid: String,
    pub title: String,
    pub window: TimeWindow,
    pub center: GeoPoint,
    pub radius_m: Option<f64>,
    pub kind: Option<ActivityKind>,
    pub policy: Option<PrivacyPolicy>,
    pub batch_threshold: Option<u32>,
    /// Attendee addresses without the `mailto:` scheme, service address removed.
    pub attendees: Vec<String>,
    pub organizer: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IcsImport {
    pub drafts: Vec<ActivityDraft>,
    /// Events that did not invite the service.
    pub skipped: usize,
    pub warnings: Vec<String>,
}

/// Undo RFC 5545 line folding. Accepts CRLF or bare LF.
pub fn unfold_lines(text: &str) -> Vec<String> {
    let mut lines: Vec<String> = Vec::new();
    for raw in text.split('\n') {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        match line.strip_prefix([' ', '\t']) {
            Some(rest) if !lines.is_empty() => lines.last_mut().unwrap().push_str(rest),
            Some(rest) => lines.push(rest.to_owned()),
            None => lines.push(line.to_owned()),
        }
    }
    if lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines
}

pub fn parse_geo(value: &str) -> Result<GeoPoint, GeoParseError> {
    let (lat, lon) = value.split_once(';').ok_or(GeoParseError::Malformed)?;
    let parse = |s: &str| -> Result<f64, GeoParseError> {
        let s = s.trim();
        // plain decimals only: no exponents, no inf/nan
        if s.is_empty() || !s.chars().all(|c| c.is_ascii_digit() || "+-.".contains(c)) {
            return Err(GeoParseError::Malformed);
        }
        s.parse::<f64>().map_err(|_| GeoParseError::Malformed)
    };
    let (lat, lon) = (parse(lat)?, parse(lon)?);
    if !(-90.0..=90.0).contains(&lat) {
        return Err(GeoParseError::LatOutOfRange(lat));
    }
    if !(lon > -180.0 && lon <= 180.0) {
        return Err(GeoParseError::LonOutOfRange(lon));
    }
    GeoPoint::new(lat, lon).map_err(|_| GeoParseError::Malformed)
}

struct ContentLine<'a> {
    name: String,
    params: Vec<(String, &'a str)>,
    value: &'a str,
}

fn split_content_line(line: &str) -> Option<ContentLine<'_>> {
    let mut in_quotes = false;
    let mut colon = None;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            ':' if !in_quotes => {
                colon = Some(i);
                break;
            }
            _ => {}
        }
    }
    let colon = colon?;
    let (head, value) = (&line[..colon], &line[colon + 1..]);
    let mut parts = head.split(';');
    let name = parts.next()?.trim();
    if name.is_empty() {
        return None;
    }
    let params = parts
        .map(|p| match p.split_once('=') {
            Some((k, v)) => (k.trim().to_ascii_uppercase(), v),
            None => (p.trim().to_ascii_uppercase(), ""),
        })
        .collect();
    Some(ContentLine {
        name: name.to_ascii_uppercase(),
        params,
        value,
    })
}

fn strip_mailto(addr: &str) -> &str {
    let addr = addr.trim();
    match addr.get(..7) {
        Some(scheme) if scheme.eq_ignore_ascii_case("mailto:") => &addr[7..],
        _ => addr,
    }
}

fn unescape_text(v: &str) -> String {
    let mut out = String::with_capacity(v.len());
    let mut chars = v.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') | Some('N') => out.push('\n'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

#[derive(Default)]
struct EventProps {
    uid: Option<String>,
    summary: Option<String>,
    dtstart: Option<Result<Timestamp, String>>,
    dtend: Option<Result<Timestamp, String>>,
    epoch_start: Option<String>,
    epoch_end: Option<String>,
    geo: Option<String>,
    attendees: Vec<String>,
    organizer: Option<String>,
    kind: Option<String>,
    policy: Option<String>,
    radius: Option<String>,
    batch: Option<String>,
    unknown: Vec<String>,
}

fn parse_utc(line: &ContentLine<'_>) -> Result<Timestamp, String> {
    if line.params.iter().any(|(k, _)| k == "TZID") {
        return Err(format!("{} with TZID is not supported", line.name));
    }
    if line
        .params
        .iter()
        .any(|(k, v)| k == "VALUE" && v.eq_ignore_ascii_case("DATE"))
    {
        return Err(format!("all-day {} is not supported", line.name));
    }
    let v = line.value.trim();
    if !v.ends_with('Z') {
        return Err(format!("{} must be a UTC time ending in Z", line.name));
    }
    let dt = NaiveDateTime::parse_from_str(v, "%Y%m%dT%H%M%SZ")
        .map_err(|_| format!("{} value {v:?} is not a date-time", line.name))?;
    u64::try_from(dt.and_utc().timestamp())
        .map(Timestamp)
        .map_err(|_| format!("{} before 1970", line.name))
}

impl EventProps {
    fn take(&mut self, line: ContentLine<'_>) {
        fn once(slot: &mut Option<String>, v: &str) {
            if slot.is_none() {
                *slot = Some(v.to_owned());
            }
        }
        match line.name.as_str() {
            "UID" => once(&mut self.uid, line.value.trim()),
            "SUMMARY" => once(&mut self.summary, &unescape_text(line.value)),
            "DTSTART" => {
                if self.dtstart.is_none() {
                    self.dtstart = Some(parse_utc(&line));
                }
            }
            "DTEND" => {
                if self.dtend.is_none() {
                    self.dtend = Some(parse_utc(&line));
                }
            }
            "X-SYNC-START" => once(&mut self.epoch_start, line.value.trim()),
            "X-SYNC-END" => once(&mut self.epoch_end, line.value.trim()),
            "GEO" => once(&mut self.geo, line.value.trim()),
            "ATTENDEE" => self.attendees.push(strip_mailto(line.value).to_owned()),
            "ORGANIZER" => once(&mut self.organizer, strip_mailto(line.value)),
            "X-SYNC-TYPE" => once(&mut self.kind, line.value.trim()),
            "X-SYNC-PRIVACY" => once(&mut self.policy, line.value.trim()),
            "X-SYNC-RADIUS" => once(&mut self.radius, line.value.trim()),
            "X-SYNC-BATCH" => once(&mut self.batch, line.value.trim()),
            _ => self.unknown.push(line.name),
        }
    }

    fn enrolls(&self, system: &str) -> bool {
        self.attendees.iter().any(|a| a.eq_ignore_ascii_case(system))
    }

    fn into_draft(self, system: &str, warnings: &mut Vec<String>) -> Result<ActivityDraft, CalendarError> {
        let uid = self.uid.clone();
        let invalid = |reason: String| CalendarError::EventInvalid {
            uid: uid.clone(),
            reason,
        };
        let Some(uid_value) = self.uid.clone().filter(|u| !u.is_empty()) else {
            return Err(invalid("missing UID".into()));
        };
        let epoch = |v: &Option<String>, name: &str| -> Result<Option<Timestamp>, CalendarError> {
            v.as_ref()
                .map(|s| {
                    s.parse::<u64>()
                        .map(Timestamp)
                        .map_err(|_| invalid(format!("{name} must be epoch seconds")))
                })
                .transpose()
        };
        let start = match (epoch(&self.epoch_start, "X-SYNC-START")?, self.dtstart) {
            (Some(t), _) => t,
            (None, Some(r)) => r.map_err(invalid)?,
            (None, None) => return Err(invalid("missing DTSTART".into())),
        };
        let end = match (epoch(&self.epoch_end, "X-SYNC-END")?, self.dtend) {
            (Some(t), _) => t,
            (None, Some(r)) => r.map_err(invalid)?,
            (None, None) => return Err(invalid("missing DTEND".into())),
        };
        let window = TimeWindow::new(start, end)
            .map_err(|_| invalid("DTEND must be after DTSTART".into()))?;
        let center = match &self.geo {
            None => return Err(invalid("missing GEO".into())),
            Some(g) => parse_geo(g).map_err(|e| invalid(format!("GEO: {e}")))?,
        };
        let kind = self
            .kind
            .as_deref()
            .map(|k| match k.to_ascii_uppercase().as_str() {
                "MEETUP" => Ok(ActivityKind::MeetUp),
                "GATHERING" => Ok(ActivityKind::Gathering),
                "PICKUP" => Ok(ActivityKind::Pickup),
                "TASK" => Ok(ActivityKind::Task),
                other => Err(invalid(format!("unknown X-SYNC-TYPE {other}"))),
            })
            .transpose()?;
        let policy = self
            .policy
            .as_deref()
            .map(|p| match p.to_ascii_uppercase().as_str() {
                "IDENTITY" => Ok(PrivacyPolicy::DiscloseIdentity),
                "ANONYMOUS" => Ok(PrivacyPolicy::AnonymousCount),
                other => Err(invalid(format!("unknown X-SYNC-PRIVACY {other}"))),
            })
            .transpose()?;
        let radius_m = self
            .radius
            .as_deref()
            .map(|r| match r.parse::<f64>() {
                Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
                _ => Err(invalid(format!("X-SYNC-RADIUS {r:?} is not a positive number"))),
            })
            .transpose()?;
        let batch_threshold = self
            .batch
            .as_deref()
            .map(|b| match b.parse::<u32>() {
                Ok(v) if v >= 1 => Ok(v),
                _ => Err(invalid(format!("X-SYNC-BATCH {b:?} is not a positive integer"))),
            })
            .transpose()?;
        for name in &self.unknown {
            warnings.push(format!("event {uid_value}: ignoring property {name}"));
        }
        let title = match self.summary {
            Some(s) => s,
            None => {
                warnings.push(format!("event {uid_value}: no SUMMARY"));
                String::new()
            }
        };
        let mut attendees: Vec<String> = Vec::new();
        for a in self.attendees {
            if !a.eq_ignore_ascii_case(system) && !a.is_empty() && !attendees.contains(&a) {
                attendees.push(a);
            }
        }
        Ok(ActivityDraft {
            uid: uid_value,
            title,
            window,
            center,
            radius_m,
            kind,
            policy,
            batch_threshold,
            attendees,
            organizer: self.organizer.filter(|o| !o.is_empty()),
        })
    }
}

/// Extract every event that invites `system_address`. Events that do not are
/// counted in `skipped`; an enrolled event that cannot become an activity
/// fails the whole import.
pub fn parse_ics(text: &str, system_address: &str) -> Result<IcsImport, CalendarError> {
    let system = strip_mailto(system_address);
    let mut import = IcsImport::default();
    let mut stack: Vec<String> = Vec::new();
    let mut saw_calendar = false;
    let mut event: Option<EventProps> = None;

    for (n, line) in unfold_lines(text).iter().enumerate() {
        let lineno = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let Some(cl) = split_content_line(line) else {
            if stack.is_empty() && !saw_calendar {
                return Err(CalendarError::NotACalendar);
            }
            import.warnings.push(format!("line {lineno}: not a content line"));
            continue;
        };
        match cl.name.as_str() {
            "BEGIN" => {
                let comp = cl.value.trim().to_ascii_uppercase();
                if stack.is_empty() {
                    if comp != "VCALENDAR" {
                        return Err(CalendarError::NotACalendar);
                    }
                    saw_calendar = true;
                } else if comp == "VEVENT" && stack.len() == 1 {
                    event = Some(EventProps::default());
                }
                stack.push(comp);
            }
            "END" => {
                let comp = cl.value.trim().to_ascii_uppercase();
                match stack.pop() {
                    Some(open) if open == comp => {}
                    Some(open) => {
                        return Err(CalendarError::Malformed {
                            line: lineno,
                            reason: format!("END:{comp} closes {open}"),
                        })
                    }
                    None => {
                        return Err(CalendarError::Malformed {
                            line: lineno,
                            reason: format!("END:{comp} without BEGIN"),
                        })
                    }
                }
                if comp == "VEVENT" && stack.len() == 1 {
                    let props = event.take().expect("VEVENT opened at depth 1");
                    if props.enrolls(system) {
                        let draft = props.into_draft(system, &mut import.warnings)?;
                        import.drafts.push(draft);
                    } else {
                        import.skipped += 1;
                    }
                }
            }
            _ => {
                if stack.is_empty() {
                    if !saw_calendar {
                        return Err(CalendarError::NotACalendar);
                    }
                    import
                        .warnings
                        .push(format!("line {lineno}: {} outside VCALENDAR", cl.name));
                } else if stack.len() == 2 {
                    if let Some(props) = event.as_mut() {
                        props.take(cl);
                    }
                }
            }
        }
    }
    if !saw_calendar {
        return Err(CalendarError::NotACalendar);
    }
    if let Some(open) = stack.last() {
        return Err(CalendarError::Malformed {
            line: 0,
            reason: format!("unterminated {open}"),
        });
    }
    Ok(import)
}

pub fn parse_ics_bytes(bytes: &[u8], system_address: &str) -> Result<IcsImport, CalendarError> {
    let text = std::str::from_utf8(bytes).map_err(|_| CalendarError::NotUtf8)?;
    parse_ics(text, system_address)
}

impl ActivityDraft {
    /// Apply defaults: MeetUp, identity disclosed, default radius and
    /// hysteresis. Without an ORGANIZER the first attendee organizes.
    pub fn to_spec(&self) -> Result<ActivitySpec, ActivityError> {
        let organizer = self
            .organizer
            .clone()
            .or_else(|| self.attendees.first().cloned())
            .ok_or(ActivityError::TooFewParticipants(0))?;
        let fence = Geofence::new(
            self.center,
            self.radius_m.unwrap_or(DEFAULT_RADIUS_M),
            DEFAULT_HYSTERESIS_M,
        )?;
        Ok(ActivitySpec {
            title: self.title.clone(),
            kind: self.kind.unwrap_or(ActivityKind::MeetUp),
            window: self.window,
            fence,
            organizer: ParticipantId::new(organizer),
            participants: self.attendees.iter().map(|a| ParticipantId::new(a.as_str())).collect(),
            policy: self.policy.unwrap_or(PrivacyPolicy::DiscloseIdentity),
            batch_threshold: self.batch_threshold,
        })
    }
}
