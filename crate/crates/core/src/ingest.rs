//! Event-log I/O, training slices and per-event-type bipartite graphs.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::types::{
    format_timestamp, parse_event_type, parse_timestamp, Event, EventLog, EventType, RepoState,
    TimeWindow, Timestamp, UserHistory,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogFormat {
    Jsonl,
    Csv,
}

impl LogFormat {
    /// `.csv` means CSV, everything else JSON-Lines.
    pub fn from_path(path: &Path) -> LogFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => LogFormat::Csv,
            _ => LogFormat::Jsonl,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadReport {
    pub log: EventLog,
    /// 1-based line numbers of skipped records.
    pub malformed: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonRecord {
    time: Value,
    #[serde(rename = "eventType")]
    event_type: String,
    #[serde(rename = "userID")]
    user_id: String,
    #[serde(rename = "repoID")]
    repo_id: String,
}

fn time_value(v: &Value) -> Result<Timestamp> {
    match v {
        Value::Number(n) => n.as_i64().ok_or_else(|| Error::MalformedRecord {
            line: 0,
            reason: format!("non-integer time {n}"),
        }),
        Value::String(s) => parse_timestamp(s),
        other => Err(Error::MalformedRecord {
            line: 0,
            reason: format!("bad time {other}"),
        }),
    }
}

fn record_to_event(time: Timestamp, event_type: &str, user: &str, repo: &str) -> Result<Event> {
    let ev = Event::new(time, parse_event_type(event_type)?, user, repo);
    ev.validate()?;
    Ok(ev)
}

fn with_line(e: Error, line: usize) -> Error {
    let reason = match e {
        Error::MalformedRecord { reason, .. } => reason,
        other => other.to_string(),
    };
    Error::MalformedRecord { line, reason }
}

/// Reads an event log. With `strict`, the first bad record is an error;
/// otherwise bad records are skipped and listed in the report.
pub fn load_events(path: &Path, format: LogFormat, strict: bool) -> Result<LoadReport> {
    let file = File::open(path)?;
    read_events(BufReader::new(file), format, strict)
}

pub fn read_events<R: Read>(reader: R, format: LogFormat, strict: bool) -> Result<LoadReport> {
    let mut events = Vec::new();
    let mut malformed = Vec::new();
    let reject = |line: usize, e: Error, malformed: &mut Vec<usize>| -> Result<()> {
        if strict {
            Err(with_line(e, line))
        } else {
            malformed.push(line);
            Ok(())
        }
    };
    match format {
        LogFormat::Jsonl => {
            for (i, line) in BufReader::new(reader).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let parsed = serde_json::from_str::<JsonRecord>(&line)
                    .map_err(|e| Error::MalformedRecord { line: i + 1, reason: e.to_string() })
                    .and_then(|r| {
                        record_to_event(time_value(&r.time)?, &r.event_type, &r.user_id, &r.repo_id)
                    });
                match parsed {
                    Ok(ev) => events.push(ev),
                    Err(e) => reject(i + 1, e, &mut malformed)?,
                }
            }
        }
        LogFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(false)
                .flexible(true)
                .trim(csv::Trim::All)
                .from_reader(reader);
            for (i, rec) in rdr.records().enumerate() {
                let line = i + 1;
                let rec = match rec {
                    Ok(r) => r,
                    Err(e) => {
                        reject(line, e.into(), &mut malformed)?;
                        continue;
                    }
                };
                if line == 1 && rec.get(0) == Some("time") {
                    continue;
                }
                let parsed = if rec.len() != 4 {
                    Err(Error::MalformedRecord {
                        line,
                        reason: format!("expected 4 fields, found {}", rec.len()),
                    })
                } else {
                    parse_timestamp(&rec[0]).and_then(|t| record_to_event(t, &rec[1], &rec[2], &rec[3]))
                };
                match parsed {
                    Ok(ev) => events.push(ev),
                    Err(e) => reject(line, e, &mut malformed)?,
                }
            }
        }
    }
    Ok(LoadReport {
        log: EventLog::from_events(events),
        malformed,
    })
}

/// Writes a log with ISO-8601 UTC times. JSON keys are `time`,
/// `eventType`, `userID`, `repoID`; CSV columns follow the same order
/// under a header row.
pub fn write_events<W: Write>(writer: W, log: &EventLog, format: LogFormat) -> Result<()> {
    let mut w = BufWriter::new(writer);
    match format {
        LogFormat::Jsonl => {
            for e in log {
                let rec = JsonRecord {
                    time: Value::String(format_timestamp(e.timestamp)),
                    event_type: e.event_type.as_str().to_string(),
                    user_id: e.user_id.clone(),
                    repo_id: e.repo_id.clone(),
                };
                serde_json::to_writer(&mut w, &rec)?;
                w.write_all(b"\n")?;
            }
        }
        LogFormat::Csv => {
            let mut cw = csv::Writer::from_writer(&mut w);
            cw.write_record(["time", "eventType", "userID", "repoID"])?;
            for e in log {
                cw.write_record([
                    format_timestamp(e.timestamp).as_str(),
                    e.event_type.as_str(),
                    &e.user_id,
                    &e.repo_id,
                ])?;
            }
            cw.flush()?;
        }
    }
    w.flush()?;
    Ok(())
}

/// SHA-256 of the canonical JSON-Lines encoding of a log.
pub fn log_digest(log: &EventLog) -> String {
    let mut h = crate::sampling::HashWriter::new();
    write_events(&mut h, log, LogFormat::Jsonl).expect("hashing cannot fail");
    h.hex()
}

pub fn save_events(path: &Path, log: &EventLog, format: LogFormat) -> Result<()> {
    write_events(File::create(path)?, log, format)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoMeta {
    pub owner_id: String,
    pub created_at: Option<Timestamp>,
    pub language: Option<String>,
}

/// Optional side tables: repository ownership/creation/language and user
/// creation times.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub repos: BTreeMap<String, RepoMeta>,
    pub users: BTreeMap<String, Timestamp>,
}

fn opt_field(s: Option<&str>) -> Option<&str> {
    s.map(str::trim).filter(|s| !s.is_empty())
}

impl Metadata {
    /// Repo CSV columns: `repo_id, owner_id, created_at, language`.
    pub fn read_repos<R: Read>(&mut self, reader: R) -> Result<()> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if i == 0 && rec.get(0) == Some("repo_id") {
                continue;
            }
            let (Some(repo), Some(owner)) = (opt_field(rec.get(0)), opt_field(rec.get(1))) else {
                return Err(Error::MalformedRecord {
                    line: i + 1,
                    reason: "repo metadata needs repo_id and owner_id".into(),
                });
            };
            let created_at = opt_field(rec.get(2)).map(parse_timestamp).transpose()?;
            self.repos.insert(
                repo.to_string(),
                RepoMeta {
                    owner_id: owner.to_string(),
                    created_at,
                    language: opt_field(rec.get(3)).map(str::to_string),
                },
            );
        }
        Ok(())
    }

    /// User CSV columns: `user_id, created_at`.
    pub fn read_users<R: Read>(&mut self, reader: R) -> Result<()> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if i == 0 && rec.get(0) == Some("user_id") {
                continue;
            }
            match (opt_field(rec.get(0)), opt_field(rec.get(1))) {
                (Some(u), Some(t)) => {
                    self.users.insert(u.to_string(), parse_timestamp(t)?);
                }
                (Some(_), None) => {}
                _ => {
                    return Err(Error::MalformedRecord {
                        line: i + 1,
                        reason: "user metadata needs user_id".into(),
                    })
                }
            }
        }
        Ok(())
    }

    pub fn write_repos<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["repo_id", "owner_id", "created_at", "language"])?;
        for (id, m) in &self.repos {
            w.write_record([
                id.as_str(),
                &m.owner_id,
                &m.created_at.map(format_timestamp).unwrap_or_default(),
                m.language.as_deref().unwrap_or(""),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_users<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["user_id", "created_at"])?;
        for (id, t) in &self.users {
            w.write_record([id.as_str(), &format_timestamp(*t)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A window of the event log with the per-user and per-repo tables built
/// from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSlice {
    pub window: TimeWindow,
    pub events: EventLog,
    pub histories: BTreeMap<String, UserHistory>,
    pub repo_states: BTreeMap<String, RepoState>,
}

impl TrainingSlice {
    pub fn owner_of(&self, repo: &str) -> Option<&str> {
        self.repo_states.get(repo).map(|r| r.owner_id.as_str())
    }

    /// Repos owned by each user.
    pub fn owned_repos(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for r in self.repo_states.values() {
            out.entry(r.owner_id.as_str()).or_default().push(r.repo_id.as_str());
        }
        out
    }
}

/// Builds user histories and repository states for the events inside
/// `window`.
///
/// Ownership comes from `meta` when present, else from the earliest Create
/// event on the repo, else from the earliest event of any type.
pub fn build_slice(log: &EventLog, window: TimeWindow, meta: Option<&Metadata>) -> Result<TrainingSlice> {
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let events = log.restrict(window);
    if events.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let days = window.days();

    let mut histories: BTreeMap<String, UserHistory> = BTreeMap::new();
    // repo -> (first create, first event)
    let mut first_touch: HashMap<&str, (Option<&Event>, &Event)> = HashMap::new();
    for e in &events {
        let h = histories.entry(e.user_id.clone()).or_insert_with(|| UserHistory {
            user_id: e.user_id.clone(),
            counts: BTreeMap::new(),
            rate: 0.0,
            window,
            created_at: meta.and_then(|m| m.users.get(&e.user_id).copied()),
            first_seen: e.timestamp,
            last_seen: e.timestamp,
        });
        *h.counts.entry((e.event_type, e.repo_id.clone())).or_insert(0) += 1;
        h.last_seen = e.timestamp;
        let ft = first_touch.entry(e.repo_id.as_str()).or_insert((None, e));
        if e.event_type == EventType::Create && ft.0.is_none() {
            ft.0 = Some(e);
        }
    }
    for h in histories.values_mut() {
        h.rate = h.total() as f64 / days;
    }

    let mut repo_states = BTreeMap::new();
    for (repo, (create, first)) in &first_touch {
        let m = meta.and_then(|m| m.repos.get(*repo));
        let owner = match (m, create) {
            (Some(m), _) => m.owner_id.clone(),
            (None, Some(c)) => c.user_id.clone(),
            (None, None) => first.user_id.clone(),
        };
        let created_at = m
            .and_then(|m| m.created_at)
            .or(create.map(|c| c.timestamp))
            .unwrap_or(first.timestamp);
        let mut st = RepoState::new(*repo, owner, created_at);
        st.language = m.and_then(|m| m.language.clone());
        repo_states.insert(repo.to_string(), st);
    }
    for e in &events {
        if let Some(st) = repo_states.get_mut(&e.repo_id) {
            st.apply(e.event_type, &e.user_id);
        }
    }

    Ok(TrainingSlice {
        window,
        events,
        histories,
        repo_states,
    })
}

/// Weighted user x repository adjacency for one event type. Entries are
/// stored row-major (by user index, then repo index); absent entries are
/// zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteGraph {
    pub event_type: EventType,
    pub users: Vec<String>,
    pub repos: Vec<String>,
    /// `(user index, repo index, weight)` with weight >= 1.
    pub entries: Vec<(u32, u32, f64)>,
    #[serde(skip)]
    user_index: HashMap<String, u32>,
    #[serde(skip)]
    repo_index: HashMap<String, u32>,
}

impl BipartiteGraph {
    /// Builds a graph from `(user, repo, weight)` triples. Duplicate pairs
    /// are summed; zero weights are dropped.
    pub fn from_triples<I, U, R>(event_type: EventType, triples: I) -> Self
    where
        I: IntoIterator<Item = (U, R, f64)>,
        U: AsRef<str>,
        R: AsRef<str>,
    {
        let mut acc: BTreeMap<(String, String), f64> = BTreeMap::new();
        for (u, r, w) in triples {
            *acc.entry((u.as_ref().to_string(), r.as_ref().to_string())).or_insert(0.0) += w;
        }
        acc.retain(|_, w| *w > 0.0);
        let mut users: Vec<String> = acc.keys().map(|(u, _)| u.clone()).collect();
        users.dedup();
        let mut repos: Vec<String> = acc.keys().map(|(_, r)| r.clone()).collect();
        repos.sort();
        repos.dedup();
        let mut g = BipartiteGraph {
            event_type,
            users,
            repos,
            entries: Vec::with_capacity(acc.len()),
            user_index: HashMap::new(),
            repo_index: HashMap::new(),
        };
        g.reindex();
        for ((u, r), w) in acc {
            let ui = g.user_index[&u];
            let ri = g.repo_index[&r];
            g.entries.push((ui, ri, w));
        }
        g
    }

    /// Graph over a fixed id universe (ids must be sorted and unique).
    pub fn with_universe(
        event_type: EventType,
        users: Vec<String>,
        repos: Vec<String>,
        mut entries: Vec<(u32, u32, f64)>,
    ) -> Self {
        entries.sort_by_key(|&(u, r, _)| (u, r));
        let mut g = BipartiteGraph {
            event_type,
            users,
            repos,
            entries,
            user_index: HashMap::new(),
            repo_index: HashMap::new(),
        };
        g.reindex();
        g
    }

    /// Rebuilds the id lookup tables (after deserialization).
    pub fn reindex(&mut self) {
        self.user_index = self.users.iter().enumerate().map(|(i, u)| (u.clone(), i as u32)).collect();
        self.repo_index = self.repos.iter().enumerate().map(|(i, r)| (r.clone(), i as u32)).collect();
    }

    pub fn user_index(&self, id: &str) -> Option<u32> {
        self.user_index.get(id).copied()
    }

    pub fn repo_index(&self, id: &str) -> Option<u32> {
        self.repo_index.get(id).copied()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_repos(&self) -> usize {
        self.repos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn weight(&self, user: &str, repo: &str) -> f64 {
        let (Some(u), Some(r)) = (self.user_index(user), self.repo_index(repo)) else {
            return 0.0;
        };
        self.entries
            .binary_search_by_key(&(u, r), |&(a, b, _)| (a, b))
            .map(|i| self.entries[i].2)
            .unwrap_or(0.0)
    }

    pub fn total_weight(&self) -> f64 {
        self.entries.iter().map(|e| e.2).sum()
    }

    /// Dense `|U| x |R|` matrix, row-major.
    pub fn dense(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_users() * self.n_repos()];
        for &(u, r, w) in &self.entries {
            m[u as usize * self.n_repos() + r as usize] = w;
        }
        m
    }

    /// Per-user adjacency lists `(repo index, weight)`.
    pub fn user_adjacency(&self) -> Vec<Vec<(u32, f64)>> {
        let mut adj = vec![Vec::new(); self.n_users()];
        for &(u, r, w) in &self.entries {
            adj[u as usize].push((r, w));
        }
        adj
    }

    /// Per-repo adjacency lists `(user index, weight)`.
    pub fn repo_adjacency(&self) -> Vec<Vec<(u32, f64)>> {
        let mut adj = vec![Vec::new(); self.n_repos()];
        for &(u, r, w) in &self.entries {
            adj[r as usize].push((u, w));
        }
        adj
    }
}

/// The `e`-type user-repo network of a slice.
pub fn build_bipartite(slice: &TrainingSlice, e: EventType) -> Result<BipartiteGraph> {
    if !e.has_network() {
        return Err(Error::UnsupportedEventType(e));
    }
    Ok(BipartiteGraph::from_triples(
        e,
        slice
            .events
            .iter()
            .filter(|ev| ev.event_type == e)
            .map(|ev| (ev.user_id.as_str(), ev.repo_id.as_str(), 1.0)),
    ))
}
