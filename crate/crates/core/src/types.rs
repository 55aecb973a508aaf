//! Domain types shared by every module: the event taxonomy, event tuples,
//! the canonical sorted event log and per-user / per-repo summaries.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seconds in one day.
pub const DAY: i64 = 86_400;

/// UTC seconds since the Unix epoch.
pub type Timestamp = i64;

/// The ten GitHub event types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventType {
    Create,
    Delete,
    PullRequest,
    PullRequestReviewComment,
    Issues,
    IssueComment,
    Push,
    CommitComment,
    Watch,
    Fork,
}

impl EventType {
    pub const ALL: [EventType; 10] = [
        EventType::Create,
        EventType::Delete,
        EventType::PullRequest,
        EventType::PullRequestReviewComment,
        EventType::Issues,
        EventType::IssueComment,
        EventType::Push,
        EventType::CommitComment,
        EventType::Watch,
        EventType::Fork,
    ];

    /// Types that have a bipartite user-repo network (everything except
    /// Create and Delete).
    pub const NETWORKED: [EventType; 8] = [
        EventType::PullRequest,
        EventType::PullRequestReviewComment,
        EventType::Issues,
        EventType::IssueComment,
        EventType::Push,
        EventType::CommitComment,
        EventType::Watch,
        EventType::Fork,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventType::Create => "Create",
            EventType::Delete => "Delete",
            EventType::PullRequest => "PullRequest",
            EventType::PullRequestReviewComment => "PullRequestReviewComment",
            EventType::Issues => "Issues",
            EventType::IssueComment => "IssueComment",
            EventType::Push => "Push",
            EventType::CommitComment => "CommitComment",
            EventType::Watch => "Watch",
            EventType::Fork => "Fork",
        }
    }

    /// Dense index in `ALL` order.
    pub fn index(self) -> usize {
        self as usize
    }

    /// Create, Watch and Fork happen at most once per (user, repo).
    pub fn is_one_time(self) -> bool {
        matches!(self, EventType::Create | EventType::Watch | EventType::Fork)
    }

    /// Push and PullRequest count as contributions.
    pub fn is_contribution(self) -> bool {
        matches!(self, EventType::Push | EventType::PullRequest)
    }

    pub fn has_network(self) -> bool {
        !matches!(self, EventType::Create | EventType::Delete)
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_event_type(s)
    }
}

/// Parses an event type name. Matching is case-sensitive; a trailing
/// `Event` suffix (`"WatchEvent"`) is stripped first.
pub fn parse_event_type(s: &str) -> Result<EventType> {
    let name = s.strip_suffix("Event").unwrap_or(s);
    EventType::ALL
        .into_iter()
        .find(|e| e.as_str() == name)
        .ok_or_else(|| Error::UnknownEventType(s.to_string()))
}

pub fn is_one_time(e: EventType) -> bool {
    e.is_one_time()
}

/// Half-open time interval `[start, end)` in epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl TimeWindow {
    pub fn new(start: Timestamp, end: Timestamp) -> Self {
        TimeWindow { start, end }
    }

    /// Window of `days` days ending at `end`.
    pub fn ending_at(end: Timestamp, days: i64) -> Self {
        TimeWindow { start: end - days * DAY, end }
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        t >= self.start && t < self.end
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn seconds(&self) -> i64 {
        (self.end - self.start).max(0)
    }

    pub fn days(&self) -> f64 {
        self.seconds() as f64 / DAY as f64
    }
}

impl fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", format_timestamp(self.start), format_timestamp(self.end))
    }
}

impl FromStr for TimeWindow {
    type Err = Error;

    /// `START..END`, each side ISO-8601 or epoch seconds.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| Error::Config(format!("window {s:?} is not START..END")))?;
        let w = TimeWindow::new(parse_timestamp(a.trim())?, parse_timestamp(b.trim())?);
        if w.end < w.start {
            return Err(Error::Config(format!("window {s:?} ends before it starts")));
        }
        Ok(w)
    }
}

/// Parses epoch seconds or an ISO-8601 / RFC 3339 timestamp (date-only
/// values mean midnight UTC).
pub fn parse_timestamp(s: &str) -> Result<Timestamp> {
    let bad = || Error::MalformedRecord {
        line: 0,
        reason: format!("bad timestamp {s:?}"),
    };
    if let Ok(n) = s.parse::<i64>() {
        return Ok(n);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s.trim_end_matches('Z'), fmt) {
            return Ok(Utc.from_utc_datetime(&dt).timestamp());
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0).ok_or_else(bad)?).timestamp());
    }
    Err(bad())
}

/// ISO-8601 UTC with a `Z` suffix and whole seconds.
pub fn format_timestamp(t: Timestamp) -> String {
    match Utc.timestamp_opt(t, 0).single() {
        Some(dt) => dt.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        None => t.to_string(),
    }
}

/// One ground-truth or simulated action.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub timestamp: Timestamp,
    pub event_type: EventType,
    pub user_id: String,
    pub repo_id: String,
}

impl Event {
    pub fn new(
        timestamp: Timestamp,
        event_type: EventType,
        user_id: impl Into<String>,
        repo_id: impl Into<String>,
    ) -> Self {
        Event {
            timestamp,
            event_type,
            user_id: user_id.into(),
            repo_id: repo_id.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.timestamp < 0 {
            return Err(Error::InvalidArgument(format!("negative timestamp {}", self.timestamp)));
        }
        if self.user_id.is_empty() || self.repo_id.is_empty() {
            return Err(Error::InvalidArgument("empty user or repo id".into()));
        }
        Ok(())
    }

    /// Canonical log order: time, then user, repo and type name.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.timestamp
            .cmp(&other.timestamp)
            .then_with(|| self.user_id.cmp(&other.user_id))
            .then_with(|| self.repo_id.cmp(&other.repo_id))
            .then_with(|| self.event_type.as_str().cmp(other.event_type.as_str()))
    }
}

/// Events in canonical order. Construction always sorts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_events(mut events: Vec<Event>) -> Self {
        events.sort_by(Event::canonical_cmp);
        EventLog { events }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Event> {
        self.events.iter()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Events with timestamps inside `window`, still sorted.
    pub fn restrict(&self, window: TimeWindow) -> EventLog {
        let lo = self.events.partition_point(|e| e.timestamp < window.start);
        let hi = self.events.partition_point(|e| e.timestamp < window.end);
        EventLog {
            events: self.events[lo..hi.max(lo)].to_vec(),
        }
    }

    /// `[first timestamp, last timestamp + 1)`, if any events exist.
    pub fn span(&self) -> Option<TimeWindow> {
        Some(TimeWindow::new(
            self.events.first()?.timestamp,
            self.events.last()?.timestamp + 1,
        ))
    }

    pub fn is_sorted(&self) -> bool {
        self.events
            .windows(2)
            .all(|w| w[0].canonical_cmp(&w[1]) != Ordering::Greater)
    }
}

impl FromIterator<Event> for EventLog {
    fn from_iter<I: IntoIterator<Item = Event>>(iter: I) -> Self {
        EventLog::from_events(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a EventLog {
    type Item = &'a Event;
    type IntoIter = std::slice::Iter<'a, Event>;

    fn into_iter(self) -> Self::IntoIter {
        self.events.iter()
    }
}

/// Per-user summary of a training window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserHistory {
    pub user_id: String,
    /// Event counts keyed by (type, repo).
    pub counts: BTreeMap<(EventType, String), u64>,
    /// Events per day over `window`.
    pub rate: f64,
    pub window: TimeWindow,
    pub created_at: Option<Timestamp>,
    pub first_seen: Timestamp,
    pub last_seen: Timestamp,
}

impl UserHistory {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Counts per event type.
    pub fn type_counts(&self) -> BTreeMap<EventType, u64> {
        let mut out = BTreeMap::new();
        for ((t, _), c) in &self.counts {
            *out.entry(*t).or_insert(0) += c;
        }
        out
    }

    /// Counts per repository.
    pub fn repo_counts(&self) -> BTreeMap<&str, u64> {
        let mut out = BTreeMap::new();
        for ((_, r), c) in &self.counts {
            *out.entry(r.as_str()).or_insert(0) += c;
        }
        out
    }
}

/// Mutable state of one repository as held by the hub.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoState {
    pub repo_id: String,
    pub owner_id: String,
    pub created_at: Timestamp,
    pub language: Option<String>,
    pub watch_count: u64,
    pub fork_count: u64,
    pub contributors: BTreeSet<String>,
    /// Distinct watchers; `watch_count == watchers.len()`.
    pub watchers: BTreeSet<String>,
    /// Distinct forkers; `fork_count == forkers.len()`.
    pub forkers: BTreeSet<String>,
}

impl RepoState {
    pub fn new(repo_id: impl Into<String>, owner_id: impl Into<String>, created_at: Timestamp) -> Self {
        RepoState {
            repo_id: repo_id.into(),
            owner_id: owner_id.into(),
            created_at,
            language: None,
            watch_count: 0,
            fork_count: 0,
            contributors: BTreeSet::new(),
            watchers: BTreeSet::new(),
            forkers: BTreeSet::new(),
        }
    }

    pub fn popularity(&self) -> u64 {
        self.watch_count + self.fork_count
    }

    /// Records the effect of one event on the counters.
    pub fn apply(&mut self, event_type: EventType, user: &str) {
        match event_type {
            EventType::Watch => {
                if self.watchers.insert(user.to_string()) {
                    self.watch_count += 1;
                }
            }
            EventType::Fork => {
                if self.forkers.insert(user.to_string()) {
                    self.fork_count += 1;
                }
            }
            t if t.is_contribution() => {
                self.contributors.insert(user.to_string());
            }
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_direct_and_suffixed_names() {
        assert_eq!(parse_event_type("Push").unwrap(), EventType::Push);
        assert_eq!(parse_event_type("WatchEvent").unwrap(), EventType::Watch);
        assert_eq!(parse_event_type("IssuesEvent").unwrap(), EventType::Issues);
        assert!(matches!(parse_event_type("Star"), Err(Error::UnknownEventType(s)) if s == "Star"));
        assert!(parse_event_type("push").is_err());
    }

    #[test]
    fn one_time_split() {
        assert!(is_one_time(EventType::Watch));
        assert!(is_one_time(EventType::Create));
        assert!(is_one_time(EventType::Fork));
        assert!(!is_one_time(EventType::Push));
        assert_eq!(EventType::ALL.iter().filter(|e| e.is_one_time()).count(), 3);
    }

    #[test]
    fn event_type_round_trips() {
        for e in EventType::ALL {
            assert_eq!(parse_event_type(e.as_str()).unwrap(), e);
            assert_eq!(parse_event_type(&format!("{e}Event")).unwrap(), e);
            assert_eq!(EventType::ALL[e.index()], e);
        }
    }

    #[test]
    fn timestamps_accept_iso_and_epoch() {
        assert_eq!(parse_timestamp("0").unwrap(), 0);
        assert_eq!(parse_timestamp("1970-01-02T00:00:00Z").unwrap(), DAY);
        assert_eq!(parse_timestamp("1970-01-02").unwrap(), DAY);
        assert_eq!(parse_timestamp("1970-01-01 01:00:00").unwrap(), 3600);
        assert_eq!(format_timestamp(DAY + 61), "1970-01-02T00:01:01Z");
        assert!(parse_timestamp("yesterday").is_err());
    }

    #[test]
    fn window_parsing() {
        let w: TimeWindow = "1970-01-01..1970-01-31".parse().unwrap();
        assert_eq!(w.days(), 30.0);
        assert!("10..5".parse::<TimeWindow>().is_err());
    }

    #[test]
    fn repo_counters_are_distinct() {
        let mut r = RepoState::new("r", "o", 0);
        r.apply(EventType::Watch, "a");
        r.apply(EventType::Watch, "a");
        r.apply(EventType::Watch, "b");
        r.apply(EventType::Push, "a");
        assert_eq!(r.watch_count, 2);
        assert_eq!(r.contributors.len(), 1);
    }

    fn arb_event() -> impl Strategy<Value = Event> {
        (0i64..50, 0usize..10, 0u8..4, 0u8..4).prop_map(|(t, e, u, r)| {
            Event::new(t, EventType::ALL[e], format!("u{u}"), format!("r{r}"))
        })
    }

    proptest! {
        #[test]
        fn log_sorting_is_order_independent(mut events in proptest::collection::vec(arb_event(), 0..60)) {
            let a = EventLog::from_events(events.clone());
            events.reverse();
            let b = EventLog::from_events(events);
            prop_assert_eq!(&a, &b);
            prop_assert!(a.is_sorted());
            let again = EventLog::from_events(a.events().to_vec());
            prop_assert_eq!(a, again);
        }
    }
}
