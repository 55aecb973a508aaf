//! Fidelity metrics comparing a simulated log with ground truth:
//! rank-biased overlap of popularity ranks, issue-count R², daily
//! contributor RMSE and the contributing fraction of user communities.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{log_digest, Metadata};
use crate::sampling::sha256_hex;
use crate::types::{EventLog, EventType, TimeWindow, DAY};

pub const DEFAULT_RBO_P: f64 = 0.98;
pub const DEFAULT_RBO_DEPTH: usize = 500;
/// Length of the popularity lists.
pub const TOP_N: usize = 500;

/// Truncated (minimum) rank-biased overlap:
/// `(1 - p) sum_{d=1..depth} p^(d-1) |s[..d] ∩ t[..d]| / d`.
pub fn rbo<T: Eq + Hash>(s: &[T], t: &[T], p: f64, depth: usize) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::BadPersistence(p));
    }
    let mut seen_s: HashSet<&T> = HashSet::new();
    let mut seen_t: HashSet<&T> = HashSet::new();
    let mut overlap = 0usize;
    let mut weight = 1.0;
    let mut sum = 0.0;
    for d in 1..=depth {
        let a = s.get(d - 1);
        let b = t.get(d - 1);
        if a.is_none() && b.is_none() && overlap == 0 {
            break;
        }
        match (a, b) {
            (Some(x), Some(y)) if x == y => overlap += 1,
            _ => {
                if let Some(x) = a {
                    overlap += seen_t.contains(x) as usize;
                }
                if let Some(y) = b {
                    overlap += seen_s.contains(y) as usize;
                }
            }
        }
        if let Some(x) = a {
            seen_s.insert(x);
        }
        if let Some(y) = b {
            seen_t.insert(y);
        }
        sum += weight * overlap as f64 / d as f64;
        weight *= p;
    }
    Ok((1.0 - p) * sum)
}

fn top_by_score(scores: HashMap<&str, u64>, n: usize) -> Vec<String> {
    let mut v: Vec<(&str, u64)> = scores.into_iter().filter(|e| e.1 > 0).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    v.truncate(n);
    v.into_iter().map(|(id, _)| id.to_string()).collect()
}

/// Repositories by watches plus forks received, ties by id, top 500.
pub fn repo_popularity_rank(log: &EventLog, exclude: &BTreeSet<String>) -> Vec<String> {
    let mut scores: HashMap<&str, u64> = HashMap::new();
    for e in log {
        if matches!(e.event_type, EventType::Watch | EventType::Fork) && !exclude.contains(&e.repo_id) {
            *scores.entry(e.repo_id.as_str()).or_insert(0) += 1;
        }
    }
    top_by_score(scores, TOP_N)
}

/// Users by watches plus forks on the repositories they own, ties by id,
/// top 500. Repositories without a known owner are skipped.
pub fn user_popularity_rank(
    log: &EventLog,
    ownership: &BTreeMap<String, String>,
    exclude_users: &BTreeSet<String>,
    exclude_repos: &BTreeSet<String>,
) -> Vec<String> {
    let mut scores: HashMap<&str, u64> = HashMap::new();
    for e in log {
        if !matches!(e.event_type, EventType::Watch | EventType::Fork) || exclude_repos.contains(&e.repo_id) {
            continue;
        }
        if let Some(owner) = ownership.get(&e.repo_id) {
            if !exclude_users.contains(owner) {
                *scores.entry(owner.as_str()).or_insert(0) += 1;
            }
        }
    }
    top_by_score(scores, TOP_N)
}

fn issue_counts(log: &EventLog) -> HashMap<&str, f64> {
    let mut c = HashMap::new();
    for e in log {
        if e.event_type == EventType::Issues {
            *c.entry(e.repo_id.as_str()).or_insert(0.0) += 1.0;
        }
    }
    c
}

/// `1 - SS_res / SS_tot` of per-repository Issues counts over the repos
/// appearing in either log (absent counts are zero).
pub fn issue_count_r2(sim: &EventLog, truth: &EventLog) -> Result<f64> {
    let universe: BTreeSet<&str> = sim.iter().chain(truth.iter()).map(|e| e.repo_id.as_str()).collect();
    let (s, t) = (issue_counts(sim), issue_counts(truth));
    let pairs: Vec<(f64, f64)> = universe
        .iter()
        .map(|r| (s.get(r).copied().unwrap_or(0.0), t.get(r).copied().unwrap_or(0.0)))
        .collect();
    r2(&pairs)
}

/// R² of `(prediction, truth)` pairs against the truth mean.
pub fn r2(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::DegenerateTruth);
    }
    let mean = pairs.iter().map(|p| p.1).sum::<f64>() / pairs.len() as f64;
    let ss_tot: f64 = pairs.iter().map(|p| (p.1 - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::DegenerateTruth);
    }
    let ss_res: f64 = pairs.iter().map(|p| (p.1 - p.0).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

fn n_days(window: TimeWindow) -> usize {
    ((window.seconds() + DAY - 1) / DAY).max(0) as usize
}

/// Distinct Push/PullRequest users per day of `window` for every repo.
fn daily_contributors(log: &EventLog, window: TimeWindow) -> HashMap<&str, Vec<BTreeSet<&str>>> {
    let days = n_days(window);
    let mut out: HashMap<&str, Vec<BTreeSet<&str>>> = HashMap::new();
    for e in log {
        if !e.event_type.is_contribution() || !window.contains(e.timestamp) {
            continue;
        }
        let d = ((e.timestamp - window.start) / DAY) as usize;
        out.entry(e.repo_id.as_str()).or_insert_with(|| vec![BTreeSet::new(); days])[d].insert(e.user_id.as_str());
    }
    out
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Daily distinct-contributor series of a repository.
pub fn contributor_series(log: &EventLog, repo: &str, window: TimeWindow) -> Vec<f64> {
    let days = n_days(window);
    let mut sets: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); days];
    for e in log {
        if e.repo_id == repo && e.event_type.is_contribution() && window.contains(e.timestamp) {
            sets[((e.timestamp - window.start) / DAY) as usize].insert(e.user_id.as_str());
        }
    }
    sets.iter().map(|s| s.len() as f64).collect()
}

/// RMSE between the simulated and true daily unique-contributor series of
/// one repository over the days of `window`.
pub fn contributors_rmse(sim: &EventLog, truth: &EventLog, repo: &str, window: TimeWindow) -> f64 {
    rmse(&contributor_series(sim, repo, window), &contributor_series(truth, repo, window))
}

/// [`contributors_rmse`] averaged over every repository with a
/// contribution in either log. `None` when there is none.
pub fn mean_contributors_rmse(sim: &EventLog, truth: &EventLog, window: TimeWindow) -> Option<f64> {
    let (s, t) = (daily_contributors(sim, window), daily_contributors(truth, window));
    let repos: BTreeSet<&str> = s.keys().chain(t.keys()).copied().collect();
    if repos.is_empty() {
        return None;
    }
    let zeros = vec![0.0; n_days(window)];
    let series = |m: &HashMap<&str, Vec<BTreeSet<&str>>>, r: &str| -> Vec<f64> {
        m.get(r).map_or_else(|| zeros.clone(), |v| v.iter().map(|d| d.len() as f64).collect())
    };
    let total: f64 = repos.iter().map(|r| rmse(&series(&s, r), &series(&t, r))).sum();
    Some(total / repos.len() as f64)
}

/// Fraction of the community with at least one Push or PullRequest.
pub fn community_contributing_users(log: &EventLog, community: &BTreeSet<String>) -> Result<f64> {
    if community.is_empty() {
        return Err(Error::EmptyCommunity);
    }
    let active: HashSet<&str> = log
        .iter()
        .filter(|e| e.event_type.is_contribution() && community.contains(&e.user_id))
        .map(|e| e.user_id.as_str())
        .collect();
    Ok(active.len() as f64 / community.len() as f64)
}

/// Reads a community file: one user id per line, blank lines ignored.
pub fn read_community(text: &str) -> BTreeSet<String> {
    text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect()
}

// ---------------------------------------------------------------------------
// Report

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Node,
    Community,
    Population,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Node => "node",
            Level::Community => "community",
            Level::Population => "population",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub level: Level,
    /// `None` when the metric could not be computed.
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub window: TimeWindow,
    pub rbo_p: f64,
    pub rbo_depth: usize,
    pub inputs_hash: String,
    pub metrics: BTreeMap<String, MetricValue>,
}

impl MetricReport {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).and_then(|m| m.value)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let width = self.metrics.keys().map(String::len).max().unwrap_or(6).max(6);
        let mut out = format!("window {}  rbo p={} depth={}\n", self.window, self.rbo_p, self.rbo_depth);
        out.push_str(&format!("{:<width$}  {:<10}  {}\n", "metric", "level", "value"));
        for (name, m) in &self.metrics {
            let v = match (m.value, &m.note) {
                (Some(v), _) => format!("{v:.6}"),
                (None, Some(n)) => format!("unavailable ({n})"),
                (None, None) => "unavailable".to_string(),
            };
            out.push_str(&format!("{name:<width$}  {:<10}  {v}\n", m.level.to_string()));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub window: TimeWindow,
    pub rbo_p: f64,
    pub rbo_depth: usize,
    /// Known repository owners. Create events in either log fill the gaps,
    /// then the `owner/` prefix of the repository id.
    pub ownership: BTreeMap<String, String>,
    /// Users and repositories known to be created inside the window.
    pub created_users: BTreeSet<String>,
    pub created_repos: BTreeSet<String>,
    pub communities: BTreeMap<String, BTreeSet<String>>,
}

impl EvalConfig {
    pub fn new(window: TimeWindow) -> Self {
        EvalConfig {
            window,
            rbo_p: DEFAULT_RBO_P,
            rbo_depth: DEFAULT_RBO_DEPTH,
            ownership: BTreeMap::new(),
            created_users: BTreeSet::new(),
            created_repos: BTreeSet::new(),
            communities: BTreeMap::new(),
        }
    }

    /// Ownership and in-window creations from side tables.
    pub fn with_metadata(mut self, meta: &Metadata) -> Self {
        for (repo, m) in &meta.repos {
            self.ownership.insert(repo.clone(), m.owner_id.clone());
            if m.created_at.is_some_and(|t| self.window.contains(t)) {
                self.created_repos.insert(repo.clone());
            }
        }
        for (user, &t) in &meta.users {
            if self.window.contains(t) {
                self.created_users.insert(user.clone());
            }
        }
        self
    }
}

fn metric(level: Level, r: Result<f64>) -> MetricValue {
    match r {
        Ok(v) if v.is_finite() => MetricValue { level, value: Some(v), note: None },
        Ok(v) => MetricValue { level, value: None, note: Some(format!("non-finite value {v}")) },
        Err(e) => MetricValue { level, value: None, note: Some(e.to_string()) },
    }
}

/// Computes the full metric set. A metric that cannot be computed is
/// reported as unavailable.
pub fn evaluate(sim: &EventLog, truth: &EventLog, cfg: &EvalConfig) -> MetricReport {
    let sim = sim.restrict(cfg.window);
    let truth = truth.restrict(cfg.window);
    let mut m = BTreeMap::new();

    // entities created during the window are left out of popularity ranks
    let mut excl_repos = cfg.created_repos.clone();
    let mut ownership = cfg.ownership.clone();
    for e in sim.iter().chain(truth.iter()) {
        if e.event_type == EventType::Create {
            excl_repos.insert(e.repo_id.clone());
            ownership.entry(e.repo_id.clone()).or_insert_with(|| e.user_id.clone());
        }
    }
    // without a side table, `owner/name` ids name their owner
    for e in sim.iter().chain(truth.iter()) {
        if let Some((owner, _)) = e.repo_id.split_once('/') {
            ownership.entry(e.repo_id.clone()).or_insert_with(|| owner.to_string());
        }
    }
    let excl_users = &cfg.created_users;

    let rank_rbo = |a: Vec<String>, b: Vec<String>| {
        if a.is_empty() && b.is_empty() {
            return Err(Error::InsufficientData("both rankings are empty".into()));
        }
        rbo(&a, &b, cfg.rbo_p, cfg.rbo_depth)
    };
    m.insert(
        "repo_popularity_rbo".to_string(),
        metric(
            Level::Population,
            rank_rbo(repo_popularity_rank(&sim, &excl_repos), repo_popularity_rank(&truth, &excl_repos)),
        ),
    );
    m.insert(
        "user_popularity_rbo".to_string(),
        metric(
            Level::Population,
            rank_rbo(
                user_popularity_rank(&sim, &ownership, excl_users, &excl_repos),
                user_popularity_rank(&truth, &ownership, excl_users, &excl_repos),
            ),
        ),
    );
    m.insert("issue_count_r2".to_string(), metric(Level::Node, issue_count_r2(&sim, &truth)));
    m.insert(
        "contributors_rmse".to_string(),
        metric(
            Level::Node,
            mean_contributors_rmse(&sim, &truth, cfg.window)
                .ok_or_else(|| Error::InsufficientData("no contributions in either log".into())),
        ),
    );
    let community = if cfg.communities.is_empty() {
        Err(Error::InsufficientData("no communities supplied".into()))
    } else {
        cfg.communities
            .values()
            .map(|c| Ok((community_contributing_users(&sim, c)? - community_contributing_users(&truth, c)?).abs()))
            .sum::<Result<f64>>()
            .map(|s| s / cfg.communities.len() as f64)
    };
    m.insert("community_contributing_abs_error".to_string(), metric(Level::Community, community));

    let inputs_hash = sha256_hex(format!("{}\n{}", log_digest(&sim), log_digest(&truth)).as_bytes());
    MetricReport { window: cfg.window, rbo_p: cfg.rbo_p, rbo_depth: cfg.rbo_depth, inputs_hash, metrics: m }
}
