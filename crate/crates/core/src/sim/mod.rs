//! Deterministic simulation: movement traces, GPS noise, poll scheduling
//! and the scenario runner.

mod scenario;

pub use scenario::{
    run_scenario, run_scenario_full, Action, ActionKind, Actor, ActivitySource, Scenario,
    ScenarioError, SimRun, Transcript, TranscriptEntry,
};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::activity::{Activity, ActivityPhase, Timestamp};
use crate::geo::GeoPoint;

/// Meters per degree used to convert noise offsets into degrees.
pub const METERS_PER_DEGREE: f64 = 111_320.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub at: Timestamp,
    pub lat: f64,
    pub lon: f64,
}

/// Piecewise-linear path. Waypoint times strictly increase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Waypoint>", into = "Vec<Waypoint>")]
pub struct Trace {
    points: Vec<(Timestamp, GeoPoint)>,
}

impl TryFrom<Vec<Waypoint>> for Trace {
    type Error = String;

    fn try_from(raw: Vec<Waypoint>) -> Result<Self, String> {
        let points = raw
            .into_iter()
            .map(|w| {
                GeoPoint::new(w.lat, w.lon)
                    .map(|p| (w.at, p))
                    .map_err(|e| e.to_string())
            })
            .collect::<Result<Vec<_>, _>>()?;
        Trace::new(points)
    }
}

impl From<Trace> for Vec<Waypoint> {
    fn from(t: Trace) -> Self {
        t.points
            .into_iter()
            .map(|(at, p)| Waypoint {
                at,
                lat: p.lat(),
                lon: p.lon(),
            })
            .collect()
    }
}

impl Trace {
    pub fn new(points: Vec<(Timestamp, GeoPoint)>) -> Result<Self, String> {
        if points.is_empty() {
            return Err("a trace needs at least one waypoint".into());
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err("waypoint times must strictly increase".into());
        }
        Ok(Trace { points })
    }

    pub fn waypoints(&self) -> &[(Timestamp, GeoPoint)] {
        &self.points
    }

    /// Position at `t`, clamped to the first and last waypoints.
    pub fn interpolate(&self, t: i64) -> GeoPoint {
        interpolate(self, t)
    }
}

/// Linear in latitude and longitude independently between the bracketing
/// waypoints.
pub fn interpolate(trace: &Trace, t: i64) -> GeoPoint {
    let pts = &trace.points;
    let (first, last) = (pts[0], pts[pts.len() - 1]);
    if t <= first.0 .0 as i64 {
        return first.1;
    }
    if t >= last.0 .0 as i64 {
        return last.1;
    }
    // first waypoint strictly after t; exists because t < last
    let hi = pts.partition_point(|(at, _)| at.0 as i64 <= t);
    let (t0, a) = pts[hi - 1];
    let (t1, b) = pts[hi];
    let f = (t - t0.0 as i64) as f64 / (t1.0 - t0.0) as f64;
    let lerp = |x: f64, y: f64| x + (y - x) * f;
    GeoPoint::new(lerp(a.lat(), b.lat()), lerp(a.lon(), b.lon()))
        .expect("convex combination of valid points")
}

/// Add independent zero-mean Gaussian offsets of `sigma_m` meters north and
/// east.
pub fn perturb<R: Rng + ?Sized>(point: GeoPoint, sigma_m: f64, rng: &mut R) -> GeoPoint {
    if sigma_m <= 0.0 {
        return point;
    }
    let normal = Normal::new(0.0, sigma_m).expect("finite positive sigma");
    let north = normal.sample(rng);
    let east = normal.sample(rng);
    let lat = point.lat() + north / METERS_PER_DEGREE;
    let cos = point.lat().to_radians().cos().max(1e-9);
    let lon = point.lon() + east / (METERS_PER_DEGREE * cos);
    GeoPoint::new(lat.clamp(-90.0, 90.0), lon.clamp((-180.0f64).next_up(), 180.0))
        .expect("clamped into range")
}

/// Poll intervals in seconds.
pub const POLL_FAR: u64 = 21_600;
pub const POLL_DAY: u64 = 1_800;
pub const POLL_NEAR: u64 = 30;

/// Seconds until the next poll for `activity`; 0 means stop polling.
pub fn next_poll_interval(now: Timestamp, activity: &Activity) -> u64 {
    match activity.phase_at(now) {
        ActivityPhase::Ended => 0,
        ActivityPhase::Active => POLL_NEAR,
        ActivityPhase::Scheduled => {
            let delta = activity.window().start().0 - now.0;
            if delta > 24 * 3600 {
                POLL_FAR
            } else if delta > 3600 {
                POLL_DAY
            } else {
                POLL_NEAR
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activity::{new_activity, ActivityKind, ActivitySpec, PrivacyPolicy, TimeWindow};
    use crate::geo::Geofence;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn line() -> Trace {
        Trace::new(vec![(Timestamp(0), pt(0.0, 0.0)), (Timestamp(100), pt(0.0, 2.0))]).unwrap()
    }

    #[test]
    fn interpolation_examples() {
        assert_eq!(interpolate(&line(), 50), pt(0.0, 1.0));
        assert_eq!(interpolate(&line(), -5), pt(0.0, 0.0));
        assert_eq!(interpolate(&line(), 200), pt(0.0, 2.0));
        assert_eq!(interpolate(&line(), 100), pt(0.0, 2.0));
    }

    #[test]
    fn interpolation_multi_segment() {
        let t = Trace::new(vec![
            (Timestamp(0), pt(0.0, 0.0)),
            (Timestamp(10), pt(1.0, 0.0)),
            (Timestamp(30), pt(1.0, 4.0)),
        ])
        .unwrap();
        assert_eq!(t.interpolate(10), pt(1.0, 0.0));
        assert_eq!(t.interpolate(20), pt(1.0, 2.0));
        assert_eq!(t.interpolate(5), pt(0.5, 0.0));
    }

    #[test]
    fn trace_validation() {
        assert!(Trace::new(vec![]).is_err());
        assert!(Trace::new(vec![(Timestamp(5), pt(0.0, 0.0)), (Timestamp(5), pt(1.0, 0.0))]).is_err());
    }

    #[test]
    fn zero_sigma_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(perturb(pt(41.0, -8.0), 0.0, &mut rng), pt(41.0, -8.0));
    }

    #[test]
    fn seeded_noise_repeats() {
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            (0..5).map(|_| perturb(pt(41.0, -8.0), 10.0, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn noise_spread_matches_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let origin = pt(41.56, -8.397);
        let n = 10_000;
        let northings: Vec<f64> = (0..n)
            .map(|_| (perturb(origin, 10.0, &mut rng).lat() - origin.lat()) * METERS_PER_DEGREE)
            .collect();
        let mean = northings.iter().sum::<f64>() / n as f64;
        let var = northings.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        assert!((sd - 10.0).abs() <= 0.5, "sample std {sd}");
    }

    #[test]
    fn noise_clamps_at_poles() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let p = perturb(pt(90.0, 180.0), 5000.0, &mut rng);
            assert!(p.lat() <= 90.0 && p.lon() <= 180.0 && p.lon() > -180.0);
        }
    }

    fn activity(start: u64) -> Activity {
        new_activity(
            "a1".into(),
            ActivitySpec {
                title: "t".into(),
                kind: ActivityKind::MeetUp,
                window: TimeWindow::new(Timestamp(start), Timestamp(start + 3600)).unwrap(),
                fence: Geofence::new(pt(0.0, 0.0), 100.0, 25.0).unwrap(),
                organizer: "o".into(),
                participants: vec!["o".into(), "p".into()],
                policy: PrivacyPolicy::DiscloseIdentity,
                batch_threshold: None,
            },
        )
        .unwrap()
    }

    #[test]
    fn poll_table() {
        let start = 1_000_000;
        let a = activity(start);
        assert_eq!(next_poll_interval(Timestamp(start - 48 * 3600), &a), 21_600);
        assert_eq!(next_poll_interval(Timestamp(start - 2 * 3600), &a), 1_800);
        assert_eq!(next_poll_interval(Timestamp(start - 24 * 3600), &a), 1_800);
        assert_eq!(next_poll_interval(Timestamp(start - 3600), &a), 30);
        assert_eq!(next_poll_interval(Timestamp(start + 10), &a), 30);
        assert_eq!(next_poll_interval(Timestamp(start + 3600), &a), 0);
    }
}
