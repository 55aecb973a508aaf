//! Population-level generative model. Each iteration produces one
//! `(user, repo, event type)` tuple:
//!
//! 1. the actor is a new user with probability `p_new_user` (a freshly
//!    minted id, or a user minted earlier in the run), otherwise an
//!    existing user drawn from a recency-decayed activity rank;
//! 2. the event is one-time or multiple-time per the fitted split (users
//!    with no repositories are forced to one-time);
//! 3. one-time events are Watch, Fork or Create per the discovery split;
//!    Watch and Fork targets come from rank-form power laws over current
//!    popularity and Create mints a repository;
//! 4. multiple-time events act on one of the user's own repositories with
//!    probability `p_own` (weighted by past activity) or on the landing
//!    repository of a short random walk over the training user-repo graph,
//!    with the event type drawn from the matching ownership table.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hub::{HubView, PopularityKind};
use crate::ingest::{BipartiteGraph, TrainingSlice};
use crate::models::powerlaw::{fit_discrete, PowerLawFit, PowerLawRank, RankPurpose};
use crate::sampling::{geometric_length, Categorical};
use crate::types::{EventType, TimeWindow, DAY};

pub const DEFAULT_HALF_LIFE_DAYS: f64 = 30.0;
pub const DEFAULT_NEW_USER_SHARE: f64 = 0.2;
pub const MIN_EVENTS: usize = 100;
const RECENT_DAYS: i64 = 30;
const MIN_POWER_LAW_TAIL: usize = 50;
const REDRAWS: usize = 3;

/// Weight of an event `age_days` old under exponential half-life decay.
pub fn decay_weight(age_days: f64, half_life_days: f64) -> f64 {
    0.5f64.powf(age_days / half_life_days)
}

/// Items ordered by decayed activity score (descending, ties by item).
/// Sampling is proportional to score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankModel<T> {
    pub half_life_days: f64,
    dist: Categorical<T>,
}

impl<T: Ord + Clone> RankModel<T> {
    /// Builds a rank from `(item, event age in days)` observations.
    pub fn from_ages(half_life_days: f64, observations: impl IntoIterator<Item = (T, f64)>) -> Self {
        let mut scores: BTreeMap<T, f64> = BTreeMap::new();
        for (item, age) in observations {
            *scores.entry(item).or_insert(0.0) += decay_weight(age.max(0.0), half_life_days);
        }
        Self::from_scores(half_life_days, scores)
    }

    pub fn from_scores(half_life_days: f64, scores: impl IntoIterator<Item = (T, f64)>) -> Self {
        let mut v: Vec<(T, f64)> = scores.into_iter().filter(|(_, s)| *s > 0.0).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        RankModel {
            half_life_days,
            dist: Categorical::new(v),
        }
    }
}

impl<T> RankModel<T> {
    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }

    pub fn items(&self) -> &[T] {
        self.dist.items()
    }

    pub fn scores(&self) -> Vec<f64> {
        (0..self.dist.len()).map(|i| self.dist.probability(i) * self.dist.total()).collect()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.dist.len()).map(|i| self.dist.probability(i)).collect()
    }

    pub fn total_score(&self) -> f64 {
        self.dist.total()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<&T> {
        self.dist.sample(rng).ok_or(Error::EmptyRank)
    }

    /// Appends an item with the given score at the bottom of the rank.
    pub fn push(&mut self, item: T, score: f64) {
        self.dist.push(item, score);
    }
}

/// Fitted global parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesianConfig {
    /// Probability that a tuple's actor is a user created during the run.
    pub p_new_user: f64,
    /// Given a new-user tuple, probability of minting a fresh id.
    pub p_mint: f64,
    pub new_users_per_day: f64,
    /// Events per day across the population.
    pub aggregate_rate: f64,
    pub p_one_time: f64,
    /// (watch, fork, create), normalized.
    pub discovery: [f64; 3],
    /// Share of first user-repo touches that were one-time events.
    pub first_touch_one_time: f64,
    pub p_own: f64,
    pub own_event_types: Vec<(EventType, f64)>,
    pub other_event_types: Vec<(EventType, f64)>,
    pub walk_mean: f64,
    pub half_life_days: f64,
    pub watch_rank: PowerLawRank,
    pub fork_rank: PowerLawRank,
    pub pull_request_rank: PowerLawRank,
    /// Raw fits behind the ranks, when enough data existed.
    pub watch_fit: Option<PowerLawFit>,
    pub fork_fit: Option<PowerLawFit>,
    pub pull_request_fit: Option<PowerLawFit>,
}

/// Per-user repository knowledge: owned repositories weighted by past
/// activity and every repository touched so far.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UserRepos {
    pub own: BTreeMap<String, f64>,
    pub touched: BTreeMap<String, f64>,
    pub one_time: std::collections::BTreeSet<(EventType, String)>,
}

impl UserRepos {
    /// Records an event by this user.
    pub fn record(&mut self, e: EventType, repo: &str, owned: bool) {
        *self.touched.entry(repo.to_string()).or_insert(0.0) += 1.0;
        if owned {
            *self.own.entry(repo.to_string()).or_insert(0.0) += 1.0;
        }
        if e.is_one_time() {
            self.one_time.insert((e, repo.to_string()));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct WalkGraph {
    user_adj: Vec<Categorical<u32>>,
    repo_adj: Vec<Categorical<u32>>,
}

/// The fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesianModel {
    pub window: TimeWindow,
    pub config: BayesianConfig,
    /// Existing users by decayed activity.
    pub users: RankModel<String>,
    pub user_repos: BTreeMap<String, UserRepos>,
    /// All-type training graph the random walk runs on.
    pub graph: BipartiteGraph,
    #[serde(skip)]
    walk: OnceLock<WalkGraph>,
}

/// Who acts in a generated tuple.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum UserChoice {
    Existing(String),
    /// A user minted earlier in the run.
    Recent(String),
    Mint,
}

/// Which repository a generated tuple targets.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RepoChoice {
    Existing(String),
    Mint,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Tuple {
    pub user: UserChoice,
    pub repo: RepoChoice,
    pub event_type: EventType,
}

fn normalized(mut counts: BTreeMap<EventType, f64>, fallback: EventType) -> Vec<(EventType, f64)> {
    let total: f64 = counts.values().sum();
    if total <= 0.0 {
        return vec![(fallback, 1.0)];
    }
    counts.values_mut().for_each(|c| *c /= total);
    counts.into_iter().filter(|(_, p)| *p > 0.0).collect()
}

fn fit_rank(
    degrees: &[u64],
    purpose: RankPurpose,
    fallback: PowerLawRank,
) -> (PowerLawRank, Option<PowerLawFit>) {
    match fit_discrete(degrees, MIN_POWER_LAW_TAIL) {
        Ok(fit) if fit.gamma > 1.0 => (
            PowerLawRank { gamma: fit.gamma, xmin: fit.xmin, purpose },
            Some(fit),
        ),
        _ => (PowerLawRank { purpose, ..fallback }, None),
    }
}

/// Estimates every model parameter from a training slice.
pub fn fit_bayesian(slice: &TrainingSlice) -> Result<BayesianModel> {
    let n_events = slice.events.len();
    if n_events < MIN_EVENTS {
        return Err(Error::InsufficientData(format!(
            "{n_events} events, need at least {MIN_EVENTS}"
        )));
    }
    let window = slice.window;

    // one-time split, discovery split, first-touch share, ownership tables
    let mut one_time = 0usize;
    let mut discovery = [0.0f64; 3];
    let mut first_touch = 0usize;
    let mut first_touch_one_time = 0usize;
    let mut multi_own = 0usize;
    let mut multi_total = 0usize;
    let mut own_types: BTreeMap<EventType, f64> = BTreeMap::new();
    let mut other_types: BTreeMap<EventType, f64> = BTreeMap::new();
    let mut seen: std::collections::HashSet<(&str, &str)> = std::collections::HashSet::new();
    let mut user_repos: BTreeMap<String, UserRepos> = BTreeMap::new();
    for e in &slice.events {
        let owned = slice.owner_of(&e.repo_id) == Some(e.user_id.as_str());
        if seen.insert((e.user_id.as_str(), e.repo_id.as_str())) {
            first_touch += 1;
            if e.event_type.is_one_time() {
                first_touch_one_time += 1;
            }
        }
        match e.event_type {
            EventType::Watch => discovery[0] += 1.0,
            EventType::Fork => discovery[1] += 1.0,
            EventType::Create => discovery[2] += 1.0,
            _ => {}
        }
        if e.event_type.is_one_time() {
            one_time += 1;
        } else {
            multi_total += 1;
            if owned {
                multi_own += 1;
                *own_types.entry(e.event_type).or_insert(0.0) += 1.0;
            } else {
                *other_types.entry(e.event_type).or_insert(0.0) += 1.0;
            }
        }
        user_repos
            .entry(e.user_id.clone())
            .or_default()
            .record(e.event_type, &e.repo_id, owned);
    }
    let d_total: f64 = discovery.iter().sum();
    let discovery = if d_total > 0.0 {
        discovery.map(|d| d / d_total)
    } else {
        [0.64 / 0.88, 0.20 / 0.88, 0.04 / 0.88]
    };

    // new users: created during the most recent month of the window
    let recent = TimeWindow::new(window.start.max(window.end - RECENT_DAYS * DAY), window.end);
    let recent_events = slice.events.restrict(recent);
    let any_created = slice.histories.values().any(|h| h.created_at.is_some());
    let is_new = |user: &str| -> Option<bool> {
        let h = slice.histories.get(user)?;
        if any_created {
            Some(h.created_at.is_some_and(|c| recent.contains(c)))
        } else if recent.start > window.start {
            Some(recent.contains(h.first_seen))
        } else {
            None
        }
    };
    let (p_new_user, p_mint, new_users_per_day) = if recent_events.is_empty()
        || (!any_created && recent.start == window.start)
    {
        let users_per_event = slice.histories.len() as f64 / n_events as f64;
        (
            DEFAULT_NEW_USER_SHARE,
            users_per_event.min(1.0),
            DEFAULT_NEW_USER_SHARE * users_per_event * n_events as f64 / window.days(),
        )
    } else {
        let mut new_users = std::collections::BTreeSet::new();
        let mut new_events = 0usize;
        for e in &recent_events {
            if is_new(&e.user_id) == Some(true) {
                new_events += 1;
                new_users.insert(e.user_id.as_str());
            }
        }
        let share = new_events as f64 / recent_events.len() as f64;
        let mint = if new_events > 0 { new_users.len() as f64 / new_events as f64 } else { 1.0 };
        (share, mint, new_users.len() as f64 / recent.days())
    };

    // activity rank with half-life decay, measured from the window end
    let users = RankModel::from_ages(
        DEFAULT_HALF_LIFE_DAYS,
        slice
            .events
            .iter()
            .map(|e| (e.user_id.clone(), (window.end - e.timestamp) as f64 / DAY as f64)),
    );

    // popularity power laws over repository in-degrees
    let watch_deg: Vec<u64> = slice.repo_states.values().map(|r| r.watch_count).filter(|&d| d > 0).collect();
    let fork_deg: Vec<u64> = slice.repo_states.values().map(|r| r.fork_count).filter(|&d| d > 0).collect();
    let mut pr_deg: HashMap<&str, u64> = HashMap::new();
    for e in slice.events.iter().filter(|e| e.event_type == EventType::PullRequest) {
        *pr_deg.entry(e.repo_id.as_str()).or_insert(0) += 1;
    }
    let pr_deg: Vec<u64> = pr_deg.into_values().collect();
    let default_watch = PowerLawRank { gamma: 1.81, xmin: 3, purpose: RankPurpose::Watch };
    let (watch_rank, watch_fit) = fit_rank(&watch_deg, RankPurpose::Watch, default_watch);
    let (fork_rank, fork_fit) = fit_rank(&fork_deg, RankPurpose::Fork, watch_rank);
    let default_pr = PowerLawRank { gamma: 2.54, xmin: 291, purpose: RankPurpose::PullRequest };
    let (pull_request_rank, pull_request_fit) = fit_rank(&pr_deg, RankPurpose::PullRequest, default_pr);

    let graph = BipartiteGraph::from_triples(
        EventType::Push,
        slice.events.iter().map(|e| (e.user_id.as_str(), e.repo_id.as_str(), 1.0)),
    );

    let config = BayesianConfig {
        p_new_user,
        p_mint,
        new_users_per_day,
        aggregate_rate: n_events as f64 / window.days(),
        p_one_time: one_time as f64 / n_events as f64,
        discovery,
        first_touch_one_time: if first_touch > 0 {
            first_touch_one_time as f64 / first_touch as f64
        } else {
            0.0
        },
        p_own: if multi_total > 0 { multi_own as f64 / multi_total as f64 } else { 0.5 },
        own_event_types: normalized(own_types, EventType::Push),
        other_event_types: normalized(other_types, EventType::Push),
        walk_mean: 2.0,
        half_life_days: DEFAULT_HALF_LIFE_DAYS,
        watch_rank,
        fork_rank,
        pull_request_rank,
        watch_fit,
        fork_fit,
        pull_request_fit,
    };
    Ok(BayesianModel {
        window,
        config,
        users,
        user_repos,
        graph,
        walk: OnceLock::new(),
    })
}

impl BayesianModel {
    fn walk_graph(&self) -> &WalkGraph {
        self.walk.get_or_init(|| {
            let mut g = self.graph.clone();
            g.reindex();
            WalkGraph {
                user_adj: g
                    .user_adjacency()
                    .into_iter()
                    .map(|a| Categorical::new(a))
                    .collect(),
                repo_adj: g
                    .repo_adjacency()
                    .into_iter()
                    .map(|a| Categorical::new(a))
                    .collect(),
            }
        })
    }

    fn graph_user(&self, user: &str) -> Option<u32> {
        self.graph.users.binary_search_by(|u| u.as_str().cmp(user)).ok().map(|i| i as u32)
    }

    fn graph_repo(&self, repo: &str) -> Option<u32> {
        self.graph.repos.binary_search_by(|r| r.as_str().cmp(repo)).ok().map(|i| i as u32)
    }

    /// Step 1: who acts.
    pub fn choose_user<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        existing: &RankModel<String>,
        recent: &RankModel<String>,
    ) -> Result<UserChoice> {
        if rng.random::<f64>() < self.config.p_new_user || existing.is_empty() {
            if recent.is_empty() || rng.random::<f64>() < self.config.p_mint {
                return Ok(UserChoice::Mint);
            }
            return Ok(UserChoice::Recent(recent.sample(rng)?.clone()));
        }
        Ok(UserChoice::Existing(existing.sample(rng)?.clone()))
    }

    fn draw_discovery<R: Rng + ?Sized>(&self, rng: &mut R) -> EventType {
        let x = rng.random::<f64>();
        let [w, f, _] = self.config.discovery;
        if x < w {
            EventType::Watch
        } else if x < w + f {
            EventType::Fork
        } else {
            EventType::Create
        }
    }

    fn popular_repo<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        hub: &dyn HubView,
        rank: &PowerLawRank,
        kind: PopularityKind,
    ) -> Result<String> {
        let k = rank.sample_rank(rng, hub.ranked_len())?;
        hub.ranked(kind, k).map(str::to_string).ok_or(Error::EmptyRank)
    }

    /// Lands on a repository after a geometric-length walk starting from
    /// `user`. The first hop uses the user's live touched set.
    fn walk<R: Rng + ?Sized>(&self, rng: &mut R, user: &UserRepos) -> Option<String> {
        let g = self.walk_graph();
        let first = Categorical::new(user.touched.iter().map(|(r, w)| (r.as_str(), *w)));
        let mut repo = first.sample(rng)?.to_string();
        let len = geometric_length(rng, self.config.walk_mean);
        for _ in 1..len {
            let Some(ri) = self.graph_repo(&repo) else { break };
            let Some(&u) = g.repo_adj[ri as usize].sample(rng) else { break };
            let Some(&r) = g.user_adj[u as usize].sample(rng) else { break };
            repo = self.graph.repos[r as usize].clone();
        }
        Some(repo)
    }

    /// Steps 2-4 for a known actor.
    pub fn choose_action<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        hub: &dyn HubView,
        user: &str,
        repos: &UserRepos,
    ) -> Result<(EventType, RepoChoice)> {
        let forced_one_time = repos.touched.is_empty();
        if forced_one_time || rng.random::<f64>() < self.config.p_one_time {
            let t = self.draw_discovery(rng);
            let (rank, kind) = match t {
                EventType::Watch => (&self.config.watch_rank, PopularityKind::Watch),
                EventType::Fork => (&self.config.fork_rank, PopularityKind::Fork),
                _ => return Ok((EventType::Create, RepoChoice::Mint)),
            };
            if hub.ranked_len() == 0 {
                return Ok((EventType::Create, RepoChoice::Mint));
            }
            let mut repo = self.popular_repo(rng, hub, rank, kind)?;
            for _ in 0..REDRAWS {
                if !repos.one_time.contains(&(t, repo.clone())) {
                    break;
                }
                repo = self.popular_repo(rng, hub, rank, kind)?;
            }
            return Ok((t, RepoChoice::Existing(repo)));
        }

        let own = Categorical::new(repos.own.iter().map(|(r, w)| (r.as_str(), *w)));
        if !own.is_empty() && rng.random::<f64>() < self.config.p_own {
            let repo = own.sample(rng).expect("non-empty").to_string();
            let t = sample_type(rng, &self.config.own_event_types);
            return Ok((t, RepoChoice::Existing(repo)));
        }
        let t = sample_type(rng, &self.config.other_event_types);
        let mut landed = None;
        for _ in 0..REDRAWS {
            landed = self.walk(rng, repos);
            match &landed {
                Some(r) if hub.repo_owner(r) == Some(user) => continue,
                _ => break,
            }
        }
        let repo = match landed {
            Some(r) => r,
            None if hub.ranked_len() > 0 => {
                self.popular_repo(rng, hub, &self.config.watch_rank, PopularityKind::Total)?
            }
            None => return Ok((EventType::Create, RepoChoice::Mint)),
        };
        Ok((t, RepoChoice::Existing(repo)))
    }

    /// One full iteration against a frozen state. `recent` ranks users
    /// minted earlier; `lookup` returns the live repository knowledge of an
    /// existing user.
    pub fn generate_tuple<'a, R: Rng + ?Sized>(
        &'a self,
        rng: &mut R,
        hub: &dyn HubView,
        recent: &RankModel<String>,
        lookup: impl Fn(&str) -> Option<&'a UserRepos>,
    ) -> Result<Tuple> {
        self.generate_tuple_among(rng, hub, &self.users, recent, lookup)
    }

    /// As [`BayesianModel::generate_tuple`], drawing existing users from
    /// `existing` (a partition's share of the population).
    pub fn generate_tuple_among<'a, 'b, R: Rng + ?Sized>(
        &'a self,
        rng: &mut R,
        hub: &dyn HubView,
        existing: &RankModel<String>,
        recent: &RankModel<String>,
        lookup: impl Fn(&str) -> Option<&'b UserRepos>,
    ) -> Result<Tuple> {
        static EMPTY: OnceLock<UserRepos> = OnceLock::new();
        let user = self.choose_user(rng, existing, recent)?;
        let repos = match &user {
            UserChoice::Existing(u) | UserChoice::Recent(u) => {
                lookup(u).unwrap_or_else(|| EMPTY.get_or_init(UserRepos::default))
            }
            UserChoice::Mint => EMPTY.get_or_init(UserRepos::default),
        };
        let name = match &user {
            UserChoice::Existing(u) | UserChoice::Recent(u) => u.as_str(),
            UserChoice::Mint => "",
        };
        let (event_type, repo) = self.choose_action(rng, hub, name, repos)?;
        Ok(Tuple { user, repo, event_type })
    }

    /// Live repository knowledge of an existing user at fit time.
    pub fn repos_of(&self, user: &str) -> Option<&UserRepos> {
        self.user_repos.get(user)
    }

    /// True if the user appears in the frozen walk graph.
    pub fn in_graph(&self, user: &str) -> bool {
        self.graph_user(user).is_some()
    }
}

fn sample_type<R: Rng + ?Sized>(rng: &mut R, table: &[(EventType, f64)]) -> EventType {
    let x = rng.random::<f64>();
    let mut acc = 0.0;
    for &(t, p) in table {
        acc += p;
        if x < acc {
            return t;
        }
    }
    table.last().map(|p| p.0).unwrap_or(EventType::Push)
}

/// Mints fresh user and repository ids under a fixed prefix.
#[derive(Debug, Clone)]
pub struct IdMinter {
    prefix: String,
    next_user: u64,
    next_repo: u64,
}

impl IdMinter {
    pub fn new(prefix: impl Into<String>) -> Self {
        IdMinter { prefix: prefix.into(), next_user: 0, next_repo: 0 }
    }

    pub fn user(&mut self) -> String {
        self.next_user += 1;
        format!("{}u{}", self.prefix, self.next_user)
    }

    pub fn repo(&mut self) -> String {
        self.next_repo += 1;
        format!("{}r{}", self.prefix, self.next_repo)
    }
}

/// Seconds (continuous) until the next aggregate arrival at `rate` events
/// per day.
pub fn next_arrival<R: Rng + ?Sized>(rng: &mut R, rate_per_day: f64) -> Option<f64> {
    if rate_per_day <= 0.0 || !rate_per_day.is_finite() {
        return None;
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    Some(-u.ln() / rate_per_day * DAY as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hub::PopularityView;
    use crate::sampling::rng_for;

    #[test]
    fn half_life_weights() {
        assert!((decay_weight(30.0, 30.0) - 0.5).abs() < 1e-15);
        assert!((decay_weight(60.0, 30.0) - 0.25).abs() < 1e-15);
        assert_eq!(decay_weight(0.0, 30.0), 1.0);
        assert!(decay_weight(10.0, 30.0) > decay_weight(11.0, 30.0));
    }

    #[test]
    fn rank_model_orders_and_samples_by_score() {
        let r = RankModel::from_scores(30.0, [("b", 1.0), ("a", 3.0)]);
        assert_eq!(r.items(), ["a", "b"]);
        let p = r.probabilities();
        assert!((p[0] - 0.75).abs() < 1e-12 && (p[1] - 0.25).abs() < 1e-12);
        // equal age and score tie, ordered by id
        let t = RankModel::from_ages(30.0, [("y", 5.0), ("x", 5.0)]);
        assert_eq!(t.items(), ["x", "y"]);
        assert_eq!(t.scores()[0], t.scores()[1]);
        let empty: RankModel<&str> = RankModel::from_scores(30.0, []);
        let mut rng = rng_for(0, &[]);
        assert!(matches!(empty.sample(&mut rng), Err(Error::EmptyRank)));
    }

    #[test]
    fn new_users_start_with_discovery() {
        let model = tiny_model();
        let mut hub = PopularityView::new();
        hub.add_repo("r1", "o");
        hub.refresh();
        let mut rng = rng_for(4, &[]);
        let empty = UserRepos::default();
        for _ in 0..500 {
            let (t, _) = model.choose_action(&mut rng, &hub, "fresh", &empty).unwrap();
            assert!(t.is_one_time(), "{t}");
        }
    }

    #[test]
    fn arrivals_have_poisson_mean() {
        let mut rng = rng_for(8, &[]);
        let n = 50_000;
        let total: f64 = (0..n).map(|_| next_arrival(&mut rng, 24.0).unwrap()).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 3600.0).abs() < 40.0, "{mean}");
        assert!(next_arrival(&mut rng, 0.0).is_none());
    }

    #[test]
    fn minted_ids_are_fresh() {
        let mut m = IdMinter::new("sim-p0-");
        assert_eq!(m.user(), "sim-p0-u1");
        assert_eq!(m.user(), "sim-p0-u2");
        assert_eq!(m.repo(), "sim-p0-r1");
    }

    fn tiny_model() -> BayesianModel {
        use crate::ingest::build_slice;
        use crate::types::{Event, EventLog};
        let mut events = Vec::new();
        for i in 0..200 {
            let u = format!("u{}", i % 10);
            let t = EventType::ALL[i % 10];
            events.push(Event::new(i as i64 * 600, t, u, format!("r{}", i % 7)));
        }
        let log = EventLog::from_events(events);
        let slice = build_slice(&log, TimeWindow::new(0, 2 * DAY), None).unwrap();
        fit_bayesian(&slice).unwrap()
    }

    #[test]
    fn fit_requires_enough_events() {
        use crate::ingest::build_slice;
        use crate::types::{Event, EventLog};
        let log = EventLog::from_events(vec![Event::new(0, EventType::Push, "u", "r")]);
        let slice = build_slice(&log, TimeWindow::new(0, DAY), None).unwrap();
        assert!(matches!(fit_bayesian(&slice), Err(Error::InsufficientData(_))));
        let m = tiny_model();
        let s: f64 = m.config.discovery.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!((m.config.p_one_time - 0.3).abs() < 1e-12);
    }
}
