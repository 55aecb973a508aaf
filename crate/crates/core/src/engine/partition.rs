//! Multilevel k-way graph partitioning: heavy-edge coarsening, greedy
//! graph growing on the coarsest graph, and boundary FM refinement with a
//! vertex-count balance bound on the way back up.

use std::collections::{BTreeMap, BinaryHeap, HashMap};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TrainingSlice;
use crate::sampling::{rng_for, SimRng};

/// Allowed imbalance: no part holds more than `ceil(1.05 n / k)` vertices.
pub const BALANCE: f64 = 1.05;

/// Undirected weighted graph in adjacency-list form.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionGraph {
    pub labels: Vec<String>,
    /// Vertex weights (number of original vertices represented).
    pub vwgt: Vec<u64>,
    pub adj: Vec<Vec<(u32, f64)>>,
}

impl InteractionGraph {
    /// Builds from undirected edges; parallel edges are merged, self loops
    /// dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (u32, u32, f64)>) -> Self {
        let mut maps: Vec<HashMap<u32, f64>> = vec![HashMap::new(); n];
        for (a, b, w) in edges {
            if a == b || w <= 0.0 {
                continue;
            }
            *maps[a as usize].entry(b).or_insert(0.0) += w;
            *maps[b as usize].entry(a).or_insert(0.0) += w;
        }
        let adj = maps
            .into_iter()
            .map(|m| {
                let mut v: Vec<(u32, f64)> = m.into_iter().collect();
                v.sort_by_key(|e| e.0);
                v
            })
            .collect();
        InteractionGraph {
            labels: (0..n).map(|i| i.to_string()).collect(),
            vwgt: vec![1; n],
            adj,
        }
    }

    /// User and repository vertices (users first, each in id order), with
    /// edge weight equal to the number of events between them.
    pub fn from_slice(slice: &TrainingSlice) -> Self {
        let users: Vec<&String> = slice.histories.keys().collect();
        let repos: Vec<&String> = slice.repo_states.keys().collect();
        let rindex: HashMap<&str, u32> = repos
            .iter()
            .enumerate()
            .map(|(i, r)| (r.as_str(), (users.len() + i) as u32))
            .collect();
        let mut edges = Vec::new();
        for (ui, h) in slice.histories.values().enumerate() {
            for (r, c) in h.repo_counts() {
                if let Some(&ri) = rindex.get(r) {
                    edges.push((ui as u32, ri, c as f64));
                }
            }
        }
        let mut g = InteractionGraph::from_edges(users.len() + repos.len(), edges);
        g.labels = users
            .iter()
            .map(|u| format!("u:{u}"))
            .chain(repos.iter().map(|r| format!("r:{r}")))
            .collect();
        g
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn total_vertex_weight(&self) -> u64 {
        self.vwgt.iter().sum()
    }

    pub fn total_edge_weight(&self) -> f64 {
        self.adj.iter().flatten().map(|e| e.1).sum::<f64>() / 2.0
    }

    /// Total weight of edges whose endpoints lie in different parts.
    pub fn cut(&self, parts: &[u32]) -> f64 {
        let mut c = 0.0;
        for (v, nbrs) in self.adj.iter().enumerate() {
            for &(u, w) in nbrs {
                if (u as usize) > v && parts[u as usize] != parts[v] {
                    c += w;
                }
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionAssignment {
    pub k: usize,
    /// Part of every vertex.
    pub parts: Vec<u32>,
    /// Vertices per part.
    pub sizes: Vec<u64>,
    /// Weight of cross-partition edges.
    pub cut: f64,
}

impl PartitionAssignment {
    /// `label -> part` for the vertices of `g`.
    pub fn by_label<'a>(&self, g: &'a InteractionGraph) -> BTreeMap<&'a str, u32> {
        g.labels.iter().map(String::as_str).zip(self.parts.iter().copied()).collect()
    }
}

pub fn max_part_size(n: u64, k: usize) -> u64 {
    (BALANCE * n as f64 / k as f64 - 1e-9).ceil() as u64
}

/// Splits `g` into `k` parts of at most `ceil(1.05 n / k)` vertices each
/// while keeping the cut small.
pub fn partition_graph(g: &InteractionGraph, k: usize, seed: u64) -> Result<PartitionAssignment> {
    let n = g.total_vertex_weight();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if g.is_empty() {
        return Err(Error::InvalidArgument("graph has no vertices".into()));
    }
    if k as u64 > n {
        return Err(Error::InfeasibleBalance { vertices: n as usize, parts: k });
    }
    let mut rng = rng_for(seed, &["partition"]);
    if k == 1 {
        return Ok(finish(g, vec![0; g.len()], 1));
    }
    let maxw = max_part_size(n, k);

    // coarsen
    let mut levels: Vec<(InteractionGraph, Vec<u32>)> = Vec::new();
    let mut cur = g.clone();
    let stop = (20 * k).max(64);
    while cur.len() > stop {
        let cap = (maxw / 3).max(1);
        let (coarse, map) = coarsen(&cur, cap, &mut rng);
        if coarse.len() as f64 > 0.92 * cur.len() as f64 {
            break;
        }
        levels.push((cur, map));
        cur = coarse;
    }

    // initial partition: best of several grown partitions
    let mut best: Option<(f64, u64, Vec<u32>)> = None;
    for _ in 0..8 {
        let mut parts = grow(&cur, k, &mut rng);
        refine(&cur, &mut parts, k, maxw, &mut rng);
        let over = overweight(&cur, &parts, k, maxw);
        let cut = cur.cut(&parts);
        if best.as_ref().is_none_or(|b| (over, cut) < (b.1, b.0)) {
            best = Some((cut, over, parts));
        }
    }
    let mut parts = best.expect("at least one trial").2;

    // uncoarsen
    while let Some((fine, map)) = levels.pop() {
        parts = map.iter().map(|&c| parts[c as usize]).collect();
        cur = fine;
        refine(&cur, &mut parts, k, maxw, &mut rng);
    }
    rebalance(&cur, &mut parts, k, maxw);
    refine(&cur, &mut parts, k, maxw, &mut rng);
    Ok(finish(g, parts, k))
}

fn finish(g: &InteractionGraph, parts: Vec<u32>, k: usize) -> PartitionAssignment {
    let mut sizes = vec![0u64; k];
    for (v, &p) in parts.iter().enumerate() {
        sizes[p as usize] += g.vwgt[v];
    }
    PartitionAssignment { k, cut: g.cut(&parts), sizes, parts }
}

fn part_weights(g: &InteractionGraph, parts: &[u32], k: usize) -> Vec<u64> {
    let mut w = vec![0u64; k];
    for (v, &p) in parts.iter().enumerate() {
        w[p as usize] += g.vwgt[v];
    }
    w
}

fn overweight(g: &InteractionGraph, parts: &[u32], k: usize, maxw: u64) -> u64 {
    part_weights(g, parts, k).iter().map(|&w| w.saturating_sub(maxw)).sum()
}

/// Heavy-edge matching: each unmatched vertex (random order) pairs with its
/// heaviest unmatched neighbour whose combined weight stays under `cap`.
fn coarsen(g: &InteractionGraph, cap: u64, rng: &mut SimRng) -> (InteractionGraph, Vec<u32>) {
    let n = g.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut mate = vec![u32::MAX; n];
    for &v in &order {
        if mate[v] != u32::MAX {
            continue;
        }
        let mut pick = v as u32;
        let mut best = f64::NEG_INFINITY;
        for &(u, w) in &g.adj[v] {
            if mate[u as usize] == u32::MAX && g.vwgt[v] + g.vwgt[u as usize] <= cap && w > best {
                best = w;
                pick = u;
            }
        }
        mate[v] = pick;
        mate[pick as usize] = v as u32;
    }
    // leaves of the same hub cannot match directly; pair them through it
    let mut by_hub: HashMap<u32, u32> = HashMap::new();
    for &v in &order {
        if mate[v] != v as u32 {
            continue;
        }
        let Some(&(hub, _)) = g.adj[v].iter().max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0))) else {
            continue;
        };
        match by_hub.remove(&hub) {
            Some(u) if g.vwgt[v] + g.vwgt[u as usize] <= cap => {
                mate[v] = u;
                mate[u as usize] = v as u32;
            }
            _ => {
                by_hub.insert(hub, v as u32);
            }
        }
    }
    let matched = (0..n).filter(|&v| mate[v] != v as u32).count();
    if (n - matched / 2) as f64 > 0.92 * n as f64 {
        // still stalled: pair what is left regardless of adjacency
        let mut pending: Option<usize> = None;
        for &v in &order {
            if mate[v] != v as u32 {
                continue;
            }
            match pending {
                Some(u) if g.vwgt[v] + g.vwgt[u] <= cap => {
                    mate[v] = u as u32;
                    mate[u] = v as u32;
                    pending = None;
                }
                _ => pending = Some(v),
            }
        }
    }
    let mut map = vec![u32::MAX; n];
    let mut nc = 0u32;
    for v in 0..n {
        if map[v] == u32::MAX {
            map[v] = nc;
            map[mate[v] as usize] = nc;
            nc += 1;
        }
    }
    let mut vwgt = vec![0u64; nc as usize];
    for v in 0..n {
        vwgt[map[v] as usize] += g.vwgt[v];
    }
    let edges = (0..n).flat_map(|v| {
        let map = &map;
        g.adj[v]
            .iter()
            .filter(move |&&(u, _)| (u as usize) > v)
            .map(move |&(u, w)| (map[v], map[u as usize], w))
    });
    let mut coarse = InteractionGraph::from_edges(nc as usize, edges.collect::<Vec<_>>());
    coarse.vwgt = vwgt;
    (coarse, map)
}

/// Greedy graph growing: parts are grown one at a time from a random seed
/// by absorbing the unassigned vertex most connected to the part.
fn grow(g: &InteractionGraph, k: usize, rng: &mut SimRng) -> Vec<u32> {
    let n = g.len();
    let total = g.total_vertex_weight();
    let mut parts = vec![u32::MAX; n];
    let mut assigned_w = 0u64;
    let mut free_order: Vec<u32> = (0..n as u32).collect();
    free_order.shuffle(rng);
    let mut cursor = 0usize;
    for p in 0..k - 1 {
        let target = (total - assigned_w) / (k - p) as u64;
        let mut weight = 0u64;
        let mut conn: HashMap<u32, f64> = HashMap::new();
        let mut heap: BinaryHeap<(OrdF64, u32)> = BinaryHeap::new();
        while weight < target {
            let next = loop {
                match heap.pop() {
                    Some((OrdF64(c), v)) if parts[v as usize] == u32::MAX && conn.get(&v) == Some(&c) => break Some(v),
                    Some(_) => continue,
                    None => break None,
                }
            };
            let v = match next {
                Some(v) => v,
                None => {
                    while cursor < n && parts[free_order[cursor] as usize] != u32::MAX {
                        cursor += 1;
                    }
                    match free_order.get(cursor) {
                        Some(&v) => v,
                        None => break,
                    }
                }
            };
            parts[v as usize] = p as u32;
            weight += g.vwgt[v as usize];
            for &(u, w) in &g.adj[v as usize] {
                if parts[u as usize] == u32::MAX {
                    let c = conn.entry(u).or_insert(0.0);
                    *c += w;
                    heap.push((OrdF64(*c), u));
                }
            }
        }
        assigned_w += weight;
    }
    for p in parts.iter_mut() {
        if *p == u32::MAX {
            *p = (k - 1) as u32;
        }
    }
    parts
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Connectivity of `v` to every part (zero where it has no edges).
fn connectivity(g: &InteractionGraph, parts: &[u32], v: usize, k: usize) -> Vec<f64> {
    let mut c = vec![0.0; k];
    for &(u, w) in &g.adj[v] {
        c[parts[u as usize] as usize] += w;
    }
    c
}

/// Best feasible move of `v` to a part it has edges into: (gain, target).
fn best_move(g: &InteractionGraph, parts: &[u32], weights: &[u64], maxw: u64, v: usize) -> Option<(f64, u32)> {
    let from = parts[v];
    let conn = connectivity(g, parts, v, weights.len());
    let internal = conn[from as usize];
    let mut best: Option<(f64, u32)> = None;
    for (p, &c) in conn.iter().enumerate() {
        let p = p as u32;
        if p == from || c <= 0.0 || weights[p as usize] + g.vwgt[v] > maxw {
            continue;
        }
        let gain = c - internal;
        if best.is_none_or(|b| gain > b.0) {
            best = Some((gain, p));
        }
    }
    best
}

/// k-way Fiduccia-Mattheyses passes over boundary vertices. Each pass moves
/// vertices greedily by gain (locking each once) and keeps the best prefix
/// of moves.
fn refine(g: &InteractionGraph, parts: &mut [u32], k: usize, maxw: u64, rng: &mut SimRng) {
    for _ in 0..8 {
        let mut weights = part_weights(g, parts, k);
        let mut heap: BinaryHeap<(OrdF64, u64, u32)> = BinaryHeap::new();
        // random tie-break key keeps passes from cycling on equal gains
        let mut tie: Vec<u64> = (0..g.len() as u64).collect();
        tie.shuffle(rng);
        for v in 0..g.len() {
            if g.adj[v].iter().any(|&(u, _)| parts[u as usize] != parts[v]) {
                if let Some((gain, _)) = best_move(g, parts, &weights, maxw, v) {
                    heap.push((OrdF64(gain), tie[v], v as u32));
                }
            }
        }
        let mut locked = vec![false; g.len()];
        let mut moves: Vec<(u32, u32)> = Vec::new();
        let mut total = 0.0;
        let (mut best_total, mut best_len) = (0.0, 0usize);
        let limit = 50 + g.len() / 100;
        while let Some((OrdF64(gain), _, v)) = heap.pop() {
            let v = v as usize;
            if locked[v] {
                continue;
            }
            let Some((g_now, to)) = best_move(g, parts, &weights, maxw, v) else { continue };
            if (g_now - gain).abs() > 1e-9 {
                heap.push((OrdF64(g_now), tie[v], v as u32));
                continue;
            }
            let from = parts[v];
            weights[from as usize] -= g.vwgt[v];
            weights[to as usize] += g.vwgt[v];
            parts[v] = to;
            locked[v] = true;
            moves.push((v as u32, from));
            total += g_now;
            if total > best_total + 1e-9 {
                best_total = total;
                best_len = moves.len();
            } else if moves.len() - best_len > limit {
                break;
            }
            for &(u, _) in &g.adj[v] {
                let u = u as usize;
                if !locked[u] {
                    if let Some((gu, _)) = best_move(g, parts, &weights, maxw, u) {
                        heap.push((OrdF64(gu), tie[u], u as u32));
                    }
                }
            }
        }
        for &(v, from) in moves[best_len..].iter().rev() {
            parts[v as usize] = from;
        }
        if best_len == 0 {
            break;
        }
    }
}

/// Moves vertices out of overweight parts, cheapest first, until every
/// part satisfies the bound.
fn rebalance(g: &InteractionGraph, parts: &mut [u32], k: usize, maxw: u64) {
    let mut weights = part_weights(g, parts, k);
    for _ in 0..2 * k {
        let Some(heavy) = (0..k).find(|&p| weights[p] > maxw) else { return };
        let mut cands: Vec<(f64, usize)> = (0..g.len())
            .filter(|&v| parts[v] as usize == heavy)
            .map(|v| {
                let conn = connectivity(g, parts, v, k);
                let internal = conn[heavy];
                let external = conn.iter().enumerate().filter(|e| e.0 != heavy).map(|e| *e.1).fold(0.0, f64::max);
                (external - internal, v)
            })
            .collect();
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for (_, v) in cands {
            if weights[heavy] <= maxw {
                break;
            }
            let conn = connectivity(g, parts, v, k);
            let target = (0..k as u32)
                .filter(|&p| p as usize != heavy && weights[p as usize] + g.vwgt[v] <= maxw)
                .max_by(|&a, &b| {
                    let (ca, cb) = (conn[a as usize], conn[b as usize]);
                    ca.total_cmp(&cb).then(weights[b as usize].cmp(&weights[a as usize]))
                });
            if let Some(p) = target {
                weights[heavy] -= g.vwgt[v];
                weights[p as usize] += g.vwgt[v];
                parts[v] = p;
            }
        }
    }
}

/// Mean cut of `trials` uniformly random balanced bisections.
pub fn random_bisection_cut(g: &InteractionGraph, trials: usize, seed: u64) -> f64 {
    let mut rng = rng_for(seed, &["random-bisection"]);
    let n = g.len();
    let mut total = 0.0;
    for _ in 0..trials {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut parts = vec![0u32; n];
        for &v in &order[n / 2..] {
            parts[v] = 1;
        }
        total += g.cut(&parts);
    }
    total / trials as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn communities(n_each: usize, links: bool) -> InteractionGraph {
        let mut edges = Vec::new();
        for c in 0..2u32 {
            let base = c * n_each as u32;
            for i in 0..n_each as u32 {
                edges.push((base + i, base + (i + 1) % n_each as u32, 1.0));
                edges.push((base + i, base + (i + 7) % n_each as u32, 1.0));
            }
        }
        if links {
            edges.push((0, n_each as u32, 1.0));
        }
        InteractionGraph::from_edges(2 * n_each, edges)
    }

    #[test]
    fn single_part() {
        let g = communities(10, true);
        let a = partition_graph(&g, 1, 0).unwrap();
        assert_eq!(a.cut, 0.0);
        assert!(a.parts.iter().all(|&p| p == 0));
    }

    #[test]
    fn disconnected_communities_split_cleanly() {
        let g = communities(100, false);
        let a = partition_graph(&g, 2, 3).unwrap();
        assert_eq!(a.cut, 0.0);
        assert_eq!(a.sizes, vec![100, 100]);
    }

    #[test]
    fn too_many_parts() {
        let g = communities(3, false);
        assert!(matches!(partition_graph(&g, 7, 0), Err(Error::InfeasibleBalance { vertices: 6, parts: 7 })));
    }

    #[test]
    fn balance_bound_holds() {
        let mut rng = rng_for(5, &[]);
        let n = 500;
        let edges: Vec<(u32, u32, f64)> = (0..3000)
            .map(|_| (rng.random_range(0..n), rng.random_range(0..n), 1.0 + rng.random::<f64>()))
            .collect();
        let g = InteractionGraph::from_edges(n as usize, edges);
        for k in [2, 3, 7, 16] {
            let a = partition_graph(&g, k, 1).unwrap();
            let bound = max_part_size(n as u64, k);
            assert!(a.sizes.iter().all(|&s| s <= bound), "k={k} {:?} > {bound}", a.sizes);
            assert_eq!(a.sizes.iter().sum::<u64>(), n as u64);
            assert!((a.cut - g.cut(&a.parts)).abs() < 1e-9);
        }
    }
}
