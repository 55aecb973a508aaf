//! The partitioned simulation loop. Agents are split across partitions;
//! every partition drains its due agents for one tick in parallel against
//! a frozen popularity snapshot, then a barrier applies the produced
//! events to repository state in partition order.

use std::cmp::Reverse;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::hash::{Hash, Hasher};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::partition::{partition_graph, InteractionGraph};
use crate::engine::schedule::WakeClock;
use crate::error::{Error, Result};
use crate::hub::{HubView, PopularityKind, PopularityView};
use crate::ingest::TrainingSlice;
use crate::models::bayesian::{next_arrival, BayesianModel, IdMinter, RankModel, RepoChoice, UserChoice, UserRepos};
use crate::models::{AgentModel, AgentPolicy, FittedModel, Population};
use crate::sampling::{derive_seed, rng_for, SimRng};
use crate::types::{Event, EventLog, EventType, RepoState, TimeWindow, Timestamp};

/// Draws an agent gets to avoid repeating a one-time action.
const ONE_TIME_REDRAWS: usize = 8;

/// How agents and repositories are spread over partitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// Multilevel partition of the training interaction graph.
    #[default]
    Graph,
    /// Hash of the user id; repositories follow their owner.
    Hash,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub window: TimeWindow,
    pub seed: u64,
    pub partitions: usize,
    /// Barrier interval in seconds.
    pub tick_seconds: i64,
    pub placement: Placement,
}

impl SimulationConfig {
    pub fn new(window: TimeWindow, seed: u64, partitions: usize) -> Self {
        SimulationConfig { window, seed, partitions, tick_seconds: 3600, placement: Placement::Graph }
    }

    pub fn validate(&self) -> Result<()> {
        if self.partitions == 0 {
            return Err(Error::Config("partitions must be >= 1".into()));
        }
        if self.tick_seconds <= 0 {
            return Err(Error::Config("tick_seconds must be positive".into()));
        }
        if self.window.end < self.window.start {
            return Err(Error::Config(format!("window {} ends before it starts", self.window)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub events: usize,
    pub agents: usize,
    pub ticks: usize,
    /// Migrations plus forwarded actions.
    pub messages: u64,
    pub migrations: u64,
    pub forwarded: u64,
    /// Edge cut of the initial placement, when one was computed.
    pub placement_cut: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: EventLog,
    pub stats: RunStats,
    /// Popularity counters at the end of the run.
    pub hub: PopularityView,
    /// Final repository states across all partitions.
    pub repo_states: BTreeMap<String, RepoState>,
}

/// Partition of every user and repository of the slice.
#[derive(Debug, Clone, Default)]
pub struct Placements {
    pub users: HashMap<String, u32>,
    pub repos: HashMap<String, u32>,
    pub cut: Option<f64>,
}

fn hash_part(seed: u64, id: &str, k: usize) -> u32 {
    (derive_seed(seed, &["placement", id]) % k as u64) as u32
}

pub fn place(slice: &TrainingSlice, cfg: &SimulationConfig) -> Result<Placements> {
    let k = cfg.partitions;
    let mut out = Placements::default();
    if k == 1 {
        out.users = slice.histories.keys().map(|u| (u.clone(), 0)).collect();
        out.repos = slice.repo_states.keys().map(|r| (r.clone(), 0)).collect();
        return Ok(out);
    }
    match cfg.placement {
        Placement::Hash => {
            out.users = slice.histories.keys().map(|u| (u.clone(), hash_part(cfg.seed, u, k))).collect();
            out.repos = slice
                .repo_states
                .values()
                .map(|r| {
                    let p = out.users.get(&r.owner_id).copied().unwrap_or_else(|| hash_part(cfg.seed, &r.owner_id, k));
                    (r.repo_id.clone(), p)
                })
                .collect();
        }
        Placement::Graph => {
            let g = InteractionGraph::from_slice(slice);
            let parts = partition_graph(&g, k.min(g.len()), cfg.seed)?;
            for (label, &p) in g.labels.iter().zip(&parts.parts) {
                if let Some(u) = label.strip_prefix("u:") {
                    out.users.insert(u.to_string(), p);
                } else if let Some(r) = label.strip_prefix("r:") {
                    out.repos.insert(r.to_string(), p);
                }
            }
            out.cut = Some(parts.cut);
        }
    }
    Ok(out)
}

fn one_time_key(e: EventType, repo: &str) -> u64 {
    let mut h = DefaultHasher::new();
    e.hash(&mut h);
    repo.hash(&mut h);
    h.finish()
}

struct Agent<'m> {
    user: &'m str,
    policy: &'m AgentPolicy,
    wake: WakeClock,
    rng: SimRng,
    one_time: HashSet<u64>,
}

struct BayesShard<'m> {
    model: &'m BayesianModel,
    rng: SimRng,
    clock: f64,
    rate: f64,
    existing: RankModel<String>,
    recent: RankModel<String>,
    minter: IdMinter,
    overlay: HashMap<String, UserRepos>,
}

struct Shard<'m> {
    agents: Vec<Agent<'m>>,
    queue: BinaryHeap<Reverse<(Timestamp, u32)>>,
    bayes: Option<BayesShard<'m>>,
    owned: HashMap<String, RepoState>,
    touched: HashSet<String>,
    out: Vec<Event>,
}

impl<'m> Shard<'m> {
    fn new() -> Self {
        Shard {
            agents: Vec::new(),
            queue: BinaryHeap::new(),
            bayes: None,
            owned: HashMap::new(),
            touched: HashSet::new(),
            out: Vec::new(),
        }
    }

    fn tick(&mut self, tick_end: Timestamp, window_end: Timestamp, hub: &PopularityView) -> Result<()> {
        let end = tick_end.min(window_end);
        while let Some(&Reverse((t, i))) = self.queue.peek() {
            if t >= end {
                break;
            }
            self.queue.pop();
            let a = &mut self.agents[i as usize];
            a.wake.pop();
            let tag = |e: Error| Error::Step { user: a.user.to_string(), source: Box::new(e) };
            // a repeated one-time action is redrawn; if it keeps repeating the
            // agent idles this wake-up
            let mut chosen = None;
            for _ in 0..ONE_TIME_REDRAWS {
                let action = a.policy.step(&mut a.rng, hub, t).map_err(tag)?;
                if !action.event_type.is_one_time() || a.one_time.insert(one_time_key(action.event_type, &action.repo_id)) {
                    chosen = Some(action);
                    break;
                }
            }
            if let Some(action) = chosen {
                self.out.push(Event::new(t, action.event_type, a.user, action.repo_id));
            }
            if let Some(next) = a.wake.peek() {
                self.queue.push(Reverse((next, i)));
            }
        }
        if let Some(b) = &mut self.bayes {
            while b.clock < end as f64 {
                let t = b.clock.floor() as Timestamp;
                let overlay = &b.overlay;
                let model = b.model;
                let tuple = model.generate_tuple_among(&mut b.rng, hub, &b.existing, &b.recent, |u| {
                    overlay.get(u).or_else(|| model.user_repos.get(u))
                })?;
                let user = match tuple.user {
                    UserChoice::Existing(u) | UserChoice::Recent(u) => u,
                    UserChoice::Mint => {
                        let u = b.minter.user();
                        b.recent.push(u.clone(), 1.0);
                        u
                    }
                };
                let (repo, owned) = match tuple.repo {
                    RepoChoice::Existing(r) => {
                        let owned = hub.repo_owner(&r) == Some(user.as_str());
                        (r, owned)
                    }
                    RepoChoice::Mint => (b.minter.repo(), true),
                };
                b.overlay
                    .entry(user.clone())
                    .or_insert_with(|| model.user_repos.get(&user).cloned().unwrap_or_default())
                    .record(tuple.event_type, &repo, owned);
                self.out.push(Event::new(t, tuple.event_type, user, repo));
                match next_arrival(&mut b.rng, b.rate) {
                    Some(dt) => b.clock += dt,
                    None => b.clock = f64::INFINITY,
                }
            }
        }
        Ok(())
    }
}

struct Barrier {
    directory: HashMap<String, u32>,
    stats: RunStats,
}

impl Barrier {
    /// Applies one event produced by partition `p`, migrating or forwarding
    /// as needed.
    fn apply(&mut self, shards: &mut [Shard], p: usize, e: &Event, hub: &mut PopularityView) {
        let repo = e.repo_id.as_str();
        let owner = match self.directory.get(repo) {
            Some(&q) => q as usize,
            None => {
                let mut st = RepoState::new(repo, e.user_id.as_str(), e.timestamp);
                st.apply(e.event_type, &e.user_id);
                hub.add_repo(repo, &e.user_id);
                hub.bump(repo, PopularityKind::Watch, st.watch_count);
                hub.bump(repo, PopularityKind::Fork, st.fork_count);
                shards[p].owned.insert(repo.to_string(), st);
                shards[p].touched.insert(repo.to_string());
                self.directory.insert(repo.to_string(), p as u32);
                return;
            }
        };
        let target = if owner == p {
            p
        } else if !shards[p].touched.contains(repo) {
            let st = shards[owner].owned.remove(repo).expect("directory and owner agree");
            shards[p].owned.insert(repo.to_string(), st);
            shards[p].touched.insert(repo.to_string());
            self.directory.insert(repo.to_string(), p as u32);
            self.stats.migrations += 1;
            self.stats.messages += 1;
            p
        } else {
            self.stats.forwarded += 1;
            self.stats.messages += 1;
            owner
        };
        let st = shards[target].owned.get_mut(repo).expect("owned repo state");
        let (w, f) = (st.watch_count, st.fork_count);
        st.apply(e.event_type, &e.user_id);
        hub.bump(repo, PopularityKind::Watch, st.watch_count - w);
        hub.bump(repo, PopularityKind::Fork, st.fork_count - f);
    }

    #[cfg(debug_assertions)]
    fn check_ownership(&self, shards: &[Shard]) {
        let held: usize = shards.iter().map(|s| s.owned.len()).sum();
        assert_eq!(held, self.directory.len(), "every repo has exactly one owner");
        for (r, &p) in &self.directory {
            assert!(shards[p as usize].owned.contains_key(r), "{r} missing from its owner");
        }
    }
}

/// Runs the fitted model over `cfg.window`. The output is sorted and lies
/// inside the window.
pub fn run(cfg: &SimulationConfig, slice: &TrainingSlice, model: &FittedModel) -> Result<RunOutput> {
    cfg.validate()?;
    let window = cfg.window;
    if let FittedModel::Null(null) = model {
        let log = null.events.restrict(window);
        let stats = RunStats { events: log.len(), ..RunStats::default() };
        return Ok(RunOutput {
            log,
            stats,
            hub: PopularityView::from_slice(slice),
            repo_states: slice.repo_states.clone(),
        });
    }

    let k = cfg.partitions;
    let placement = place(slice, cfg)?;
    let mut shards: Vec<Shard> = (0..k).map(|_| Shard::new()).collect();
    let mut barrier = Barrier { directory: HashMap::new(), stats: RunStats::default() };
    barrier.stats.placement_cut = placement.cut;
    for st in slice.repo_states.values() {
        let p = placement.repos.get(&st.repo_id).copied().unwrap_or(0) as usize;
        shards[p].owned.insert(st.repo_id.clone(), st.clone());
        shards[p].touched.insert(st.repo_id.clone());
        barrier.directory.insert(st.repo_id.clone(), p as u32);
    }
    let user_part = |u: &str| placement.users.get(u).copied().unwrap_or_else(|| hash_part(cfg.seed, u, k)) as usize;

    match model {
        FittedModel::Null(_) => unreachable!("handled above"),
        FittedModel::Population(pop) => attach_agents(&mut shards, pop, slice, cfg, &user_part)?,
        FittedModel::Bayesian(m) => attach_bayes(&mut shards, m, cfg, &user_part),
    }
    barrier.stats.agents = shards.iter().map(|s| s.agents.len()).sum();

    let mut hub = PopularityView::from_slice(slice);
    let mut events: Vec<Event> = Vec::new();
    let mut tick_start = window.start;
    while tick_start < window.end {
        let tick_end = tick_start.saturating_add(cfg.tick_seconds);
        let results: Vec<Result<()>> = shards
            .par_iter_mut()
            .map(|s| s.tick(tick_end, window.end, &hub))
            .collect();
        if let Some(err) = results.into_iter().find_map(|r| r.err()) {
            return Err(err);
        }
        for p in 0..k {
            let out = std::mem::take(&mut shards[p].out);
            for e in &out {
                barrier.apply(&mut shards, p, e, &mut hub);
            }
            events.extend(out);
        }
        #[cfg(debug_assertions)]
        barrier.check_ownership(&shards);
        hub.refresh();
        barrier.stats.ticks += 1;
        tick_start = tick_end;
    }

    let log = EventLog::from_events(events);
    let mut stats = barrier.stats;
    stats.events = log.len();
    let repo_states = shards.into_iter().flat_map(|s| s.owned).collect();
    Ok(RunOutput { log, stats, hub, repo_states })
}

fn attach_agents<'m>(
    shards: &mut [Shard<'m>],
    pop: &'m Population,
    slice: &'m TrainingSlice,
    cfg: &SimulationConfig,
    user_part: &dyn Fn(&str) -> usize,
) -> Result<()> {
    for h in slice.histories.values() {
        let Some(policy) = pop.policies.get(&h.user_id) else {
            return Err(Error::InvalidArgument(format!("user {} has no fitted model", h.user_id)));
        };
        let shard = &mut shards[user_part(&h.user_id)];
        let one_time = h
            .counts
            .keys()
            .filter(|(t, _)| t.is_one_time())
            .map(|(t, r)| one_time_key(*t, r))
            .collect();
        let wake = WakeClock::new(cfg.seed, &h.user_id, h.rate, cfg.window);
        let i = shard.agents.len() as u32;
        if let Some(t) = wake.peek() {
            shard.queue.push(Reverse((t, i)));
        }
        shard.agents.push(Agent {
            user: &h.user_id,
            policy,
            wake,
            rng: rng_for(cfg.seed, &["step", &h.user_id]),
            one_time,
        });
    }
    Ok(())
}

fn attach_bayes<'m>(
    shards: &mut [Shard<'m>],
    model: &'m BayesianModel,
    cfg: &SimulationConfig,
    user_part: &dyn Fn(&str) -> usize,
) {
    let k = shards.len();
    let mut members: Vec<Vec<(String, f64)>> = vec![Vec::new(); k];
    for (u, s) in model.users.items().iter().zip(model.users.scores()) {
        members[user_part(u)].push((u.clone(), s));
    }
    let total = model.users.total_score();
    for (p, shard) in shards.iter_mut().enumerate() {
        let mass: f64 = members[p].iter().map(|m| m.1).sum();
        let share = if total > 0.0 { mass / total } else if p == 0 { 1.0 } else { 0.0 };
        let rate = model.config.aggregate_rate * share;
        let mut rng = rng_for(cfg.seed, &["bayes", &p.to_string()]);
        let clock = cfg.window.start as f64 + next_arrival(&mut rng, rate).unwrap_or(f64::INFINITY);
        shard.bayes = Some(BayesShard {
            model,
            rng,
            clock,
            rate,
            existing: RankModel::from_scores(model.config.half_life_days, std::mem::take(&mut members[p])),
            recent: RankModel::from_scores(model.config.half_life_days, Vec::<(String, f64)>::new()),
            minter: IdMinter::new(format!("sim-p{p}-")),
            overlay: HashMap::new(),
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::build_slice;
    use crate::models::stationary::{fit_null, fit_population};
    use crate::models::ModelKind;
    use crate::types::DAY;

    fn single_pair_slice() -> TrainingSlice {
        let events: Vec<Event> = (0..28)
            .map(|d| Event::new(d * DAY + 100, EventType::Push, "solo", "solo/repo"))
            .collect();
        build_slice(&EventLog::from_events(events), TimeWindow::new(0, 28 * DAY), None).unwrap()
    }

    #[test]
    fn degenerate_baseline_repeats_its_pair() {
        let slice = single_pair_slice();
        let pop = fit_population(&slice, ModelKind::Baseline).unwrap();
        let cfg = SimulationConfig::new(TimeWindow::new(28 * DAY, 56 * DAY), 11, 1);
        let out = run(&cfg, &slice, &FittedModel::Population(pop)).unwrap();
        assert!(!out.log.is_empty());
        assert!(out
            .log
            .iter()
            .all(|e| e.event_type == EventType::Push && e.repo_id == "solo/repo" && cfg.window.contains(e.timestamp)));
    }

    #[test]
    fn null_run_is_pass_through() {
        let slice = single_pair_slice();
        let test = TimeWindow::new(28 * DAY, 42 * DAY);
        let null = fit_null(&slice.events, test).unwrap();
        let out = run(&SimulationConfig::new(test, 0, 3), &slice, &FittedModel::Null(null.clone())).unwrap();
        assert_eq!(out.log, null.events);
    }

    #[test]
    fn zero_length_window_is_empty() {
        let slice = single_pair_slice();
        let pop = fit_population(&slice, ModelKind::Baseline).unwrap();
        let cfg = SimulationConfig::new(TimeWindow::new(5 * DAY, 5 * DAY), 1, 2);
        assert!(run(&cfg, &slice, &FittedModel::Population(pop)).unwrap().log.is_empty());
    }

    #[test]
    fn one_time_actions_are_never_repeated() {
        let mut events: Vec<Event> = (0..28).map(|d| Event::new(d * DAY + 7, EventType::Push, "w", "w/own")).collect();
        events.extend((0..3).map(|i| Event::new(i * DAY + 9, EventType::Watch, "w", &format!("o/r{i}"))));
        let slice = build_slice(&EventLog::from_events(events), TimeWindow::new(0, 28 * DAY), None).unwrap();
        let pop = fit_population(&slice, ModelKind::Baseline).unwrap();
        let cfg = SimulationConfig::new(TimeWindow::new(28 * DAY, 56 * DAY), 4, 1);
        let out = run(&cfg, &slice, &FittedModel::Population(pop)).unwrap();
        let watches: Vec<&Event> = out.log.iter().filter(|e| e.event_type == EventType::Watch).collect();
        // every training Watch target is already taken; the only new one is w/own
        assert!(watches.len() <= 1);
        assert!(watches.iter().all(|e| e.repo_id == "w/own"));
        assert!(out.log.len() > 20);
    }
}
