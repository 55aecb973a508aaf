//! Read-side view of repository popularity that agent models consult when
//! stepping. The engine owns the mutable repository state and publishes
//! counter changes into a [`PopularityView`] at every tick barrier.

use std::cmp::Reverse;
use std::collections::HashMap;

use crate::ingest::TrainingSlice;
use crate::types::EventType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PopularityKind {
    Watch,
    Fork,
    /// Watches plus forks.
    Total,
}

impl PopularityKind {
    pub fn for_event(e: EventType) -> Option<PopularityKind> {
        match e {
            EventType::Watch => Some(PopularityKind::Watch),
            EventType::Fork => Some(PopularityKind::Fork),
            _ => None,
        }
    }
}

/// What a model may read about the world while stepping.
pub trait HubView {
    fn contains_repo(&self, repo: &str) -> bool;
    fn repo_owner(&self, repo: &str) -> Option<&str>;
    fn repo_popularity(&self, repo: &str, kind: PopularityKind) -> u64;
    /// Watches plus forks over all repos owned by `user`.
    fn user_popularity(&self, user: &str) -> u64;
    fn owned_repos(&self, user: &str) -> &[String];
    /// Number of repos in the popularity rank.
    fn ranked_len(&self) -> usize;
    /// The repo at 0-based rank `k` (most popular first, ties in
    /// registration order).
    fn ranked(&self, kind: PopularityKind, k: usize) -> Option<&str>;
}

#[derive(Debug, Clone, Default)]
pub struct PopularityView {
    ids: Vec<String>,
    index: HashMap<String, u32>,
    owner: Vec<String>,
    watch: Vec<u64>,
    fork: Vec<u64>,
    user_pop: HashMap<String, u64>,
    owned: HashMap<String, Vec<String>>,
    rank_watch: Vec<u32>,
    rank_fork: Vec<u32>,
    rank_total: Vec<u32>,
    dirty: bool,
}

impl PopularityView {
    pub fn new() -> Self {
        Self::default()
    }

    /// View over the repositories of a training slice, in id order.
    pub fn from_slice(slice: &TrainingSlice) -> Self {
        let mut v = PopularityView::new();
        for st in slice.repo_states.values() {
            v.add_repo(&st.repo_id, &st.owner_id);
            v.bump(&st.repo_id, PopularityKind::Watch, st.watch_count);
            v.bump(&st.repo_id, PopularityKind::Fork, st.fork_count);
        }
        v.refresh();
        v
    }

    /// Registers a repo; no-op if already present.
    pub fn add_repo(&mut self, repo: &str, owner: &str) {
        if self.index.contains_key(repo) {
            return;
        }
        let i = self.ids.len() as u32;
        self.ids.push(repo.to_string());
        self.index.insert(repo.to_string(), i);
        self.owner.push(owner.to_string());
        self.watch.push(0);
        self.fork.push(0);
        let owned = self.owned.entry(owner.to_string()).or_default();
        let pos = owned.partition_point(|r| r.as_str() < repo);
        owned.insert(pos, repo.to_string());
        self.dirty = true;
    }

    /// Adds `by` to a repo's watch or fork counter.
    pub fn bump(&mut self, repo: &str, kind: PopularityKind, by: u64) {
        if by == 0 {
            return;
        }
        let Some(&i) = self.index.get(repo) else { return };
        let i = i as usize;
        match kind {
            PopularityKind::Watch => self.watch[i] += by,
            PopularityKind::Fork => self.fork[i] += by,
            PopularityKind::Total => return,
        }
        *self.user_pop.entry(self.owner[i].clone()).or_insert(0) += by;
        self.dirty = true;
    }

    /// Recomputes the popularity orderings if anything changed.
    pub fn refresh(&mut self) {
        if !self.dirty && self.rank_watch.len() == self.ids.len() {
            return;
        }
        let n = self.ids.len() as u32;
        for (rank, key) in [
            (&mut self.rank_watch, &self.watch),
            (&mut self.rank_fork, &self.fork),
        ] {
            if rank.len() != n as usize {
                rank.extend(rank.len() as u32..n);
            }
            rank.sort_by_key(|&i| (Reverse(key[i as usize]), i));
        }
        if self.rank_total.len() != n as usize {
            let len = self.rank_total.len() as u32;
            self.rank_total.extend(len..n);
        }
        let (w, f) = (&self.watch, &self.fork);
        self.rank_total
            .sort_by_key(|&i| (Reverse(w[i as usize] + f[i as usize]), i));
        self.dirty = false;
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn repo_ids(&self) -> &[String] {
        &self.ids
    }

    fn counter(&self, i: usize, kind: PopularityKind) -> u64 {
        match kind {
            PopularityKind::Watch => self.watch[i],
            PopularityKind::Fork => self.fork[i],
            PopularityKind::Total => self.watch[i] + self.fork[i],
        }
    }
}

impl HubView for PopularityView {
    fn contains_repo(&self, repo: &str) -> bool {
        self.index.contains_key(repo)
    }

    fn repo_owner(&self, repo: &str) -> Option<&str> {
        self.index.get(repo).map(|&i| self.owner[i as usize].as_str())
    }

    fn repo_popularity(&self, repo: &str, kind: PopularityKind) -> u64 {
        self.index
            .get(repo)
            .map(|&i| self.counter(i as usize, kind))
            .unwrap_or(0)
    }

    fn user_popularity(&self, user: &str) -> u64 {
        self.user_pop.get(user).copied().unwrap_or(0)
    }

    fn owned_repos(&self, user: &str) -> &[String] {
        self.owned.get(user).map(Vec::as_slice).unwrap_or(&[])
    }

    fn ranked_len(&self) -> usize {
        self.rank_watch.len()
    }

    fn ranked(&self, kind: PopularityKind, k: usize) -> Option<&str> {
        let rank = match kind {
            PopularityKind::Watch => &self.rank_watch,
            PopularityKind::Fork => &self.rank_fork,
            PopularityKind::Total => &self.rank_total,
        };
        rank.get(k).map(|&i| self.ids[i as usize].as_str())
    }
}
