//! The null replay model and the three stationary per-user policies:
//! baseline (independent type and repo marginals), ground-event (joint
//! type/repo pairs) and preferential attachment (Watch/Fork targets chosen
//! by neighbour and repository popularity).

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hub::{HubView, PopularityKind};
use crate::ingest::TrainingSlice;
use crate::models::{Action, AgentModel, AgentPolicy, ModelKind, Population};
use crate::sampling::{Categorical, SimRng};
use crate::types::{Event, EventLog, EventType, TimeWindow, Timestamp, UserHistory, DAY};

/// Length of the replayed pre-window.
pub const NULL_SHIFT: i64 = 14 * DAY;

/// Pre-timestamped replay of the two weeks preceding the test window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullModel {
    pub window: TimeWindow,
    pub events: EventLog,
}

/// Tiles the 14 days before `test_window` across it, shifting timestamps
/// by whole multiples of 14 days. Ids are kept.
pub fn fit_null(log: &EventLog, test_window: TimeWindow) -> Result<NullModel> {
    let pre = TimeWindow::new(test_window.start - NULL_SHIFT, test_window.start);
    let source = log.restrict(pre);
    if source.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let tiles = (test_window.seconds() + NULL_SHIFT - 1) / NULL_SHIFT;
    let mut events = Vec::with_capacity(source.len() * tiles.max(0) as usize);
    for k in 1..=tiles {
        let shift = k * NULL_SHIFT;
        events.extend(
            source
                .iter()
                .filter(|e| test_window.contains(e.timestamp + shift))
                .map(|e| Event { timestamp: e.timestamp + shift, ..e.clone() }),
        );
    }
    Ok(NullModel {
        window: test_window,
        events: EventLog::from_events(events),
    })
}

/// Independent draws of an event type and a repository from the user's
/// training frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselinePolicy {
    pub action_dist: Categorical<EventType>,
    pub repo_dist: Categorical<String>,
}

impl BaselinePolicy {
    pub fn from_history(h: &UserHistory) -> Self {
        BaselinePolicy {
            action_dist: Categorical::new(h.type_counts().into_iter().map(|(t, c)| (t, c as f64))),
            repo_dist: Categorical::new(
                h.repo_counts().into_iter().map(|(r, c)| (r.to_string(), c as f64)),
            ),
        }
    }

    pub fn action_probability(&self, e: EventType) -> f64 {
        self.action_dist
            .probabilities()
            .find(|(t, _)| **t == e)
            .map(|(_, p)| p)
            .unwrap_or(0.0)
    }

    pub fn draw_type(&self, rng: &mut SimRng) -> EventType {
        *self.action_dist.sample(rng).expect("fitted policy has at least one event")
    }

    pub fn draw_repo(&self, rng: &mut SimRng) -> &str {
        self.repo_dist.sample(rng).expect("fitted policy has at least one repo")
    }
}

fn history<'a>(slice: &'a TrainingSlice, user: &str) -> Result<&'a UserHistory> {
    slice
        .histories
        .get(user)
        .filter(|h| h.total() > 0)
        .ok_or_else(|| Error::UnknownUser(user.to_string()))
}

pub fn fit_baseline(slice: &TrainingSlice, user: &str) -> Result<BaselinePolicy> {
    Ok(BaselinePolicy::from_history(history(slice, user)?))
}

impl AgentModel for BaselinePolicy {
    fn step(&self, rng: &mut SimRng, _hub: &dyn HubView, _now: Timestamp) -> Result<Action> {
        let t = self.draw_type(rng);
        Ok(Action::new(t, self.draw_repo(rng)))
    }
}

/// Joint draw of an observed (type, repo) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundEventPolicy {
    pub pair_dist: Categorical<(EventType, String)>,
}

pub fn fit_ground_event(slice: &TrainingSlice, user: &str) -> Result<GroundEventPolicy> {
    let h = history(slice, user)?;
    Ok(GroundEventPolicy {
        pair_dist: Categorical::new(h.counts.iter().map(|(k, &c)| (k.clone(), c as f64))),
    })
}

impl GroundEventPolicy {
    pub fn probability(&self, e: EventType, repo: &str) -> f64 {
        self.pair_dist
            .probabilities()
            .find(|((t, r), _)| *t == e && r == repo)
            .map(|(_, p)| p)
            .unwrap_or(0.0)
    }
}

impl AgentModel for GroundEventPolicy {
    fn step(&self, rng: &mut SimRng, _hub: &dyn HubView, _now: Timestamp) -> Result<Action> {
        let (t, r) = self.pair_dist.sample(rng).expect("fitted policy has at least one pair");
        Ok(Action::new(*t, r.clone()))
    }
}

/// Baseline behaviour, except that Watch and Fork targets come from a
/// popular neighbour's popular repositories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferentialPolicy {
    pub baseline: BaselinePolicy,
    /// Users who acted on the same repositories, sorted by id.
    pub neighbors: Vec<String>,
}

impl PreferentialPolicy {
    /// Picks a neighbour with probability proportional to their live
    /// popularity, then one of their repos proportional to its popularity.
    /// `None` when no neighbour has any popularity.
    pub fn pick_neighbor_repo(&self, rng: &mut SimRng, hub: &dyn HubView) -> Option<String> {
        let neighbors = Categorical::new(
            self.neighbors
                .iter()
                .map(|n| (n.as_str(), hub.user_popularity(n) as f64)),
        );
        let n = *neighbors.sample(rng)?;
        let repos = Categorical::new(
            hub.owned_repos(n)
                .iter()
                .map(|r| (r.as_str(), hub.repo_popularity(r, PopularityKind::Total) as f64)),
        );
        repos.sample(rng).map(|r| r.to_string())
    }
}

impl AgentModel for PreferentialPolicy {
    fn step(&self, rng: &mut SimRng, hub: &dyn HubView, _now: Timestamp) -> Result<Action> {
        let t = self.baseline.draw_type(rng);
        if matches!(t, EventType::Watch | EventType::Fork) {
            if let Some(repo) = self.pick_neighbor_repo(rng, hub) {
                return Ok(Action::new(t, repo));
            }
        }
        Ok(Action::new(t, self.baseline.draw_repo(rng)))
    }
}

/// Co-activity neighbourhoods: for each user, the users who acted on the
/// same repositories. Each repo contributes at most `per_repo` of its most
/// active users and each user keeps at most `per_user` neighbours by
/// shared activity.
pub fn neighbor_table(slice: &TrainingSlice, per_repo: usize, per_user: usize) -> BTreeMap<String, Vec<String>> {
    let mut actors: HashMap<&str, BTreeMap<&str, u64>> = HashMap::new();
    for e in &slice.events {
        *actors
            .entry(e.repo_id.as_str())
            .or_default()
            .entry(e.user_id.as_str())
            .or_insert(0) += 1;
    }
    let mut top_actors: HashMap<&str, Vec<(&str, u64)>> = HashMap::with_capacity(actors.len());
    for (repo, users) in actors {
        let mut v: Vec<(&str, u64)> = users.into_iter().collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        v.truncate(per_repo);
        top_actors.insert(repo, v);
    }
    slice
        .histories
        .par_iter()
        .map(|(user, h)| {
            let mut shared: BTreeMap<&str, u64> = BTreeMap::new();
            for (repo, c) in h.repo_counts() {
                for &(other, oc) in top_actors.get(repo).map(Vec::as_slice).unwrap_or(&[]) {
                    if other != user {
                        *shared.entry(other).or_insert(0) += c.min(oc);
                    }
                }
            }
            let mut v: Vec<(&str, u64)> = shared.into_iter().collect();
            v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
            v.truncate(per_user);
            let mut ids: Vec<String> = v.into_iter().map(|(u, _)| u.to_string()).collect();
            ids.sort();
            (user.clone(), ids)
        })
        .collect()
}

pub fn fit_preferential(
    slice: &TrainingSlice,
    user: &str,
    neighbors: &BTreeMap<String, Vec<String>>,
) -> Result<PreferentialPolicy> {
    Ok(PreferentialPolicy {
        baseline: fit_baseline(slice, user)?,
        neighbors: neighbors.get(user).cloned().unwrap_or_default(),
    })
}

/// Fits a stationary policy for every user with history in the slice.
pub fn fit_population(slice: &TrainingSlice, kind: ModelKind) -> Result<Population> {
    let neighbors = match kind {
        ModelKind::Pref => neighbor_table(slice, 64, 32),
        ModelKind::Baseline | ModelKind::Ground => BTreeMap::new(),
        other => {
            return Err(Error::Config(format!("{other} is not a stationary per-user model")));
        }
    };
    let policies = slice
        .histories
        .par_iter()
        .map(|(user, _)| {
            let p = match kind {
                ModelKind::Baseline => AgentPolicy::Baseline(fit_baseline(slice, user)?),
                ModelKind::Ground => AgentPolicy::Ground(fit_ground_event(slice, user)?),
                _ => AgentPolicy::Preferential(fit_preferential(slice, user, &neighbors)?),
            };
            Ok((user.clone(), p))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(Population { kind, policies })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hub::PopularityView;
    use crate::ingest::build_slice;
    use crate::sampling::rng_for;

    fn slice_of(events: Vec<Event>) -> TrainingSlice {
        build_slice(&EventLog::from_events(events), TimeWindow::new(0, 30 * DAY), None).unwrap()
    }

    fn ev(t: i64, e: EventType, u: &str, r: &str) -> Event {
        Event::new(t, e, u, r)
    }

    #[test]
    fn null_tiles_two_weeks() {
        let start = 100 * DAY;
        let mut events: Vec<Event> = (0..10)
            .map(|i| ev(start - NULL_SHIFT + i * DAY, EventType::Push, "u", "r"))
            .collect();
        events.push(ev(start - NULL_SHIFT - 1, EventType::Push, "old", "r"));
        events.push(ev(start + 1, EventType::Push, "future", "r"));
        let log = EventLog::from_events(events);
        let m = fit_null(&log, TimeWindow::new(start, start + 28 * DAY)).unwrap();
        assert_eq!(m.events.len(), 20);
        assert!(m.events.iter().all(|e| e.user_id == "u"));

        let log = EventLog::from_events(vec![ev(start - NULL_SHIFT + 3 * 3600, EventType::Watch, "a", "b")]);
        let m = fit_null(&log, TimeWindow::new(start, start + 28 * DAY)).unwrap();
        assert_eq!(m.events.events()[0].timestamp, start + 3 * 3600);
        assert_eq!(m.events.events()[1].timestamp, start + 3 * 3600 + NULL_SHIFT);

        let empty = EventLog::from_events(vec![ev(0, EventType::Push, "u", "r")]);
        assert!(matches!(fit_null(&empty, TimeWindow::new(start, start + DAY)), Err(Error::EmptyWindow)));
    }

    #[test]
    fn baseline_frequencies() {
        let s = slice_of(vec![
            ev(1, EventType::Push, "u", "r1"),
            ev(2, EventType::Push, "u", "r1"),
            ev(3, EventType::Push, "u", "r2"),
            ev(4, EventType::Watch, "u", "r2"),
            ev(5, EventType::Watch, "solo", "r9"),
        ]);
        let p = fit_baseline(&s, "u").unwrap();
        assert!((p.action_probability(EventType::Push) - 0.75).abs() < 1e-12);
        assert!((p.action_probability(EventType::Watch) - 0.25).abs() < 1e-12);
        let repo: Vec<f64> = p.repo_dist.probabilities().map(|(_, q)| q).collect();
        assert_eq!(repo, vec![0.5, 0.5]);

        let solo = fit_baseline(&s, "solo").unwrap();
        let hub = PopularityView::new();
        let mut rng = rng_for(0, &[]);
        for _ in 0..20 {
            assert_eq!(solo.step(&mut rng, &hub, 0).unwrap(), Action::new(EventType::Watch, "r9"));
        }
        assert!(matches!(fit_baseline(&s, "nobody"), Err(Error::UnknownUser(_))));
    }

    #[test]
    fn baseline_draws_are_independent() {
        let s = slice_of(vec![
            ev(1, EventType::Push, "u", "r1"),
            ev(2, EventType::Push, "u", "r1"),
            ev(3, EventType::Push, "u", "r2"),
            ev(4, EventType::Watch, "u", "r2"),
        ]);
        let p = fit_baseline(&s, "u").unwrap();
        let hub = PopularityView::new();
        let mut rng = rng_for(11, &[]);
        let n = 10_000;
        let mut hits = 0;
        let mut repeated_watch = 0;
        for _ in 0..n {
            let a = p.step(&mut rng, &hub, 0).unwrap();
            if a == Action::new(EventType::Watch, "r2") {
                hits += 1;
                repeated_watch += 1;
            }
        }
        // product of marginals 0.25 * 0.5
        assert!((hits as f64 / n as f64 - 0.125).abs() < 0.02);
        // no one-time memory in the policy itself
        assert!(repeated_watch > 1);
    }

    #[test]
    fn ground_event_is_joint() {
        let s = slice_of(vec![
            ev(1, EventType::Push, "u", "r1"),
            ev(2, EventType::Push, "u", "r1"),
            ev(3, EventType::Push, "u", "r1"),
            ev(4, EventType::Watch, "u", "r2"),
            ev(5, EventType::Push, "v", "r1"),
            ev(6, EventType::Watch, "v", "r2"),
            ev(7, EventType::Fork, "w", "r3"),
        ]);
        let g = fit_ground_event(&s, "u").unwrap();
        assert!((g.probability(EventType::Push, "r1") - 0.75).abs() < 1e-12);

        let gv = fit_ground_event(&s, "v").unwrap();
        let bv = fit_baseline(&s, "v").unwrap();
        assert_eq!(gv.probability(EventType::Push, "r2"), 0.0);
        let base_p = bv.action_probability(EventType::Push)
            * bv.repo_dist.probabilities().find(|(r, _)| *r == "r2").unwrap().1;
        assert!((base_p - 0.25).abs() < 1e-12);

        // type marginals agree with baseline exactly
        let mut marg: BTreeMap<EventType, f64> = BTreeMap::new();
        for ((t, _), p) in g.pair_dist.probabilities() {
            *marg.entry(*t).or_insert(0.0) += p;
        }
        let b = fit_baseline(&s, "u").unwrap();
        for (t, p) in b.action_dist.probabilities() {
            assert!((marg[t] - p).abs() < 1e-12);
        }

        let gw = fit_ground_event(&s, "w").unwrap();
        let hub = PopularityView::new();
        let mut rng = rng_for(2, &[]);
        assert!((0..10).all(|_| gw.step(&mut rng, &hub, 0).unwrap() == Action::new(EventType::Fork, "r3")));
    }

    fn watch_only_policy(neighbors: &[&str]) -> PreferentialPolicy {
        PreferentialPolicy {
            baseline: BaselinePolicy {
                action_dist: Categorical::new([(EventType::Watch, 1.0)]),
                repo_dist: Categorical::new([("own".to_string(), 1.0)]),
            },
            neighbors: neighbors.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn preferential_without_neighbors_falls_back() {
        let p = watch_only_policy(&[]);
        let hub = PopularityView::new();
        let mut rng = rng_for(5, &[]);
        assert_eq!(p.step(&mut rng, &hub, 0).unwrap().repo_id, "own");
    }

    #[test]
    fn preferential_selection_is_proportional() {
        let mut hub = PopularityView::new();
        hub.add_repo("a1", "a");
        hub.add_repo("a2", "a");
        hub.add_repo("b1", "b");
        hub.bump("a1", PopularityKind::Watch, 20);
        hub.bump("a2", PopularityKind::Fork, 10);
        hub.bump("b1", PopularityKind::Watch, 10);
        hub.refresh();
        let p = watch_only_policy(&["a", "b"]);
        let mut rng = rng_for(9, &[]);
        let n = 100_000;
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for _ in 0..n {
            *counts.entry(p.step(&mut rng, &hub, 0).unwrap().repo_id).or_insert(0) += 1;
        }
        // P(a) = 30/40; P(a1 | a) = 2/3
        let expect = [("a1", 0.5), ("a2", 0.25), ("b1", 0.25)];
        for (r, q) in expect {
            let f = counts[r] as f64 / n as f64;
            assert!((f - q).abs() < 0.02, "{r}: {f} vs {q}");
        }
    }

    #[test]
    fn neighbor_table_links_co_actors() {
        let s = slice_of(vec![
            ev(1, EventType::Push, "u", "r1"),
            ev(2, EventType::Watch, "v", "r1"),
            ev(3, EventType::Watch, "w", "r2"),
        ]);
        let t = neighbor_table(&s, 64, 32);
        assert_eq!(t["u"], vec!["v".to_string()]);
        assert!(t["w"].is_empty());
    }

    #[test]
    fn population_fit_covers_every_user() {
        let s = slice_of(vec![
            ev(1, EventType::Push, "u", "r1"),
            ev(2, EventType::Watch, "v", "r1"),
        ]);
        for kind in [ModelKind::Baseline, ModelKind::Ground, ModelKind::Pref] {
            let p = fit_population(&s, kind).unwrap();
            assert_eq!(p.policies.len(), 2);
        }
        assert!(fit_population(&s, ModelKind::Bayes).is_err());
    }
}
