//! Link prediction on per-event-type user-repository networks: graph
//! factorization, Laplacian eigenmaps and HOPE embeddings, mean average
//! precision over nodes, and the LPE agent that samples repositories by
//! reconstructed link scores.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hub::HubView;
use crate::ingest::{build_bipartite, BipartiteGraph, TrainingSlice};
use crate::models::stationary::BaselinePolicy;
use crate::models::{Action, AgentModel, AgentPolicy, ModelKind, Population};
use crate::sampling::{rng_for, SimRng};
use crate::types::{EventType, Timestamp};

/// Largest joint node count the dense spectral trainers accept.
pub const DENSE_LIMIT: usize = 4_000;
/// Repositories kept per user and event type by the LPE agent.
pub const LPE_TOP_K: usize = 100;

/// User and repository vectors for one event type. Scores are inner
/// products `<x_u, y_r>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub event_type: EventType,
    pub dim: usize,
    pub users: Vec<String>,
    pub repos: Vec<String>,
    /// `users.len() x dim`, row-major.
    pub user_vectors: Vec<f64>,
    /// `repos.len() x dim`, row-major.
    pub repo_vectors: Vec<f64>,
}

impl Embedding {
    pub fn user(&self, i: usize) -> &[f64] {
        &self.user_vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn repo(&self, j: usize) -> &[f64] {
        &self.repo_vectors[j * self.dim..(j + 1) * self.dim]
    }

    pub fn score(&self, i: usize, j: usize) -> f64 {
        dot(self.user(i), self.repo(j))
    }

    /// Random vectors over the graph's universe; the MAP baseline.
    pub fn random(g: &BipartiteGraph, dim: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, &["random-embedding"]);
        let mut draw = |n: usize| (0..n * dim).map(|_| rng.random::<f64>() - 0.5).collect();
        Embedding {
            event_type: g.event_type,
            dim,
            users: g.users.clone(),
            repos: g.repos.clone(),
            user_vectors: draw(g.n_users()),
            repo_vectors: draw(g.n_repos()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.user_vectors.iter().chain(&self.repo_vectors).all(|v| v.is_finite())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Serialize)]
struct EmbeddingSidecar<'a> {
    event_type: EventType,
    dim: usize,
    users: &'a [String],
    repos: &'a [String],
    encoding: &'static str,
}

#[derive(Debug, Clone, Deserialize)]
struct OwnedSidecar {
    event_type: EventType,
    dim: usize,
    users: Vec<String>,
    repos: Vec<String>,
}

/// Writes `<stem>.bin` (little-endian f32, user rows then repo rows) and
/// `<stem>.json` (ids, dimension, event type).
pub fn save_embedding(emb: &Embedding, stem: &Path) -> Result<()> {
    let mut bin = std::io::BufWriter::new(std::fs::File::create(stem.with_extension("bin"))?);
    for v in emb.user_vectors.iter().chain(&emb.repo_vectors) {
        bin.write_all(&(*v as f32).to_le_bytes())?;
    }
    bin.flush()?;
    let sidecar = EmbeddingSidecar {
        event_type: emb.event_type,
        dim: emb.dim,
        users: &emb.users,
        repos: &emb.repos,
        encoding: "f32-le, users then repos, row-major",
    };
    std::fs::write(stem.with_extension("json"), serde_json::to_vec_pretty(&sidecar)?)?;
    Ok(())
}

pub fn load_embedding(stem: &Path) -> Result<Embedding> {
    let side: OwnedSidecar = serde_json::from_slice(&std::fs::read(stem.with_extension("json"))?)?;
    let mut raw = Vec::new();
    std::fs::File::open(stem.with_extension("bin"))?.read_to_end(&mut raw)?;
    let n = (side.users.len() + side.repos.len()) * side.dim;
    if raw.len() != n * 4 {
        return Err(Error::Snapshot(format!("embedding has {} bytes, expected {}", raw.len(), n * 4)));
    }
    let vals: Vec<f64> = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let split = side.users.len() * side.dim;
    Ok(Embedding {
        event_type: side.event_type,
        dim: side.dim,
        user_vectors: vals[..split].to_vec(),
        repo_vectors: vals[split..].to_vec(),
        users: side.users,
        repos: side.repos,
    })
}

// ---------------------------------------------------------------------------
// Graph factorization

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GfParams {
    pub dim: usize,
    pub reg: f64,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for GfParams {
    fn default() -> Self {
        GfParams { dim: 64, reg: 1e-3, lr: 0.01, epochs: 50, seed: 0 }
    }
}

/// `sum_(u,r) (A[u,r] - <x_u, y_r>)^2 + reg (|X|^2 + |Y|^2)` over observed
/// entries.
pub fn gf_loss(g: &BipartiteGraph, x: &[f64], y: &[f64], dim: usize, reg: f64) -> f64 {
    let fit: f64 = g
        .entries
        .iter()
        .map(|&(u, r, w)| {
            let (u, r) = (u as usize, r as usize);
            let e = w - dot(&x[u * dim..(u + 1) * dim], &y[r * dim..(r + 1) * dim]);
            e * e
        })
        .sum();
    let norm: f64 = x.iter().chain(y).map(|v| v * v).sum();
    fit + reg * norm
}

/// Analytic gradient of [`gf_loss`] with respect to `(X, Y)`.
pub fn gf_gradient(g: &BipartiteGraph, x: &[f64], y: &[f64], dim: usize, reg: f64) -> (Vec<f64>, Vec<f64>) {
    let mut gx: Vec<f64> = x.iter().map(|v| 2.0 * reg * v).collect();
    let mut gy: Vec<f64> = y.iter().map(|v| 2.0 * reg * v).collect();
    for &(u, r, w) in &g.entries {
        let (u, r) = (u as usize, r as usize);
        let e = w - dot(&x[u * dim..(u + 1) * dim], &y[r * dim..(r + 1) * dim]);
        for k in 0..dim {
            gx[u * dim + k] -= 2.0 * e * y[r * dim + k];
            gy[r * dim + k] -= 2.0 * e * x[u * dim + k];
        }
    }
    (gx, gy)
}

/// Result of GF training, with the per-epoch loss trace.
#[derive(Debug, Clone, PartialEq)]
pub struct GfTrained {
    pub embedding: Embedding,
    pub losses: Vec<f64>,
}

/// Stochastic gradient descent over observed entries. An epoch that raises
/// the loss is rolled back and the step size halved, so the recorded loss
/// never increases.
pub fn train_gf(g: &BipartiteGraph, p: &GfParams) -> Result<GfTrained> {
    if p.dim == 0 {
        return Err(Error::InvalidArgument("embedding dimension must be >= 1".into()));
    }
    if g.is_empty() {
        return Err(Error::InvalidArgument("graph has no entries".into()));
    }
    let d = p.dim;
    let mut rng = rng_for(p.seed, &["gf", g.event_type.as_str()]);
    let mean_w = g.total_weight() / g.entries.len() as f64;
    let scale = (mean_w / d as f64).sqrt();
    let mut x: Vec<f64> = (0..g.n_users() * d).map(|_| scale * (rng.random::<f64>() - 0.5)).collect();
    let mut y: Vec<f64> = (0..g.n_repos() * d).map(|_| scale * (rng.random::<f64>() - 0.5)).collect();

    let mut deg_u = vec![0.0f64; g.n_users()];
    let mut deg_r = vec![0.0f64; g.n_repos()];
    for &(u, r, _) in &g.entries {
        deg_u[u as usize] += 1.0;
        deg_r[r as usize] += 1.0;
    }

    let mut losses = vec![gf_loss(g, &x, &y, d, p.reg)];
    let mut order: Vec<usize> = (0..g.entries.len()).collect();
    let mut lr = p.lr;
    let mut halvings = 0;
    let mut epoch = 0;
    while epoch < p.epochs {
        let (x0, y0) = (x.clone(), y.clone());
        order.shuffle(&mut rng);
        let step = lr / (1.0 + 0.01 * epoch as f64);
        for &i in &order {
            let (u, r, w) = g.entries[i];
            let (u, r) = (u as usize, r as usize);
            let xu = &mut x[u * d..(u + 1) * d];
            let yr = &mut y[r * d..(r + 1) * d];
            let e = w - dot(xu, yr);
            let (ru, rr) = (p.reg / deg_u[u], p.reg / deg_r[r]);
            for k in 0..d {
                let (a, b) = (xu[k], yr[k]);
                xu[k] -= step * 2.0 * (ru * a - e * b);
                yr[k] -= step * 2.0 * (rr * b - e * a);
            }
        }
        let loss = gf_loss(g, &x, &y, d, p.reg);
        let prev = *losses.last().expect("initial loss");
        if !loss.is_finite() || loss > prev {
            x = x0;
            y = y0;
            lr *= 0.5;
            halvings += 1;
            if halvings > 20 {
                return Err(Error::NonFinite(format!(
                    "loss did not decrease after {halvings} step-size halvings (lr {})",
                    p.lr
                )));
            }
            continue;
        }
        losses.push(loss);
        epoch += 1;
    }
    Ok(GfTrained {
        embedding: Embedding {
            event_type: g.event_type,
            dim: d,
            users: g.users.clone(),
            repos: g.repos.clone(),
            user_vectors: x,
            repo_vectors: y,
        },
        losses,
    })
}

// ---------------------------------------------------------------------------
// Spectral trainers

fn joint_adjacency(g: &BipartiteGraph) -> Result<DMatrix<f64>> {
    let (nu, nr) = (g.n_users(), g.n_repos());
    if nu + nr > DENSE_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "{} nodes exceed the dense solver limit of {DENSE_LIMIT}",
            nu + nr
        )));
    }
    let mut m = DMatrix::zeros(nu + nr, nu + nr);
    for &(u, r, w) in &g.entries {
        m[(u as usize, nu + r as usize)] = w;
        m[(nu + r as usize, u as usize)] = w;
    }
    Ok(m)
}

/// Symmetric normalized Laplacian `I - D^-1/2 W D^-1/2` of the joint
/// user+repo graph (users first).
pub fn normalized_laplacian(g: &BipartiteGraph) -> Result<DMatrix<f64>> {
    let w = joint_adjacency(g)?;
    let n = w.nrows();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = w.row(i).sum();
            if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }
        })
        .collect();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j && inv_sqrt[i] > 0.0 { 1.0 } else { 0.0 };
        id - inv_sqrt[i] * w[(i, j)] * inv_sqrt[j]
    }))
}

/// Eigenvalues below this count as trivial (one per connected component).
pub const TRIVIAL_EIGENVALUE: f64 = 1e-9;

/// Laplacian eigenmaps: the `d` smallest non-trivial eigenvectors of the
/// normalized Laplacian, split into user and repository rows.
pub fn train_le(g: &BipartiteGraph, d: usize) -> Result<Embedding> {
    if d == 0 {
        return Err(Error::InvalidArgument("embedding dimension must be >= 1".into()));
    }
    if g.is_empty() {
        return Err(Error::InvalidArgument("graph has no entries".into()));
    }
    let l = normalized_laplacian(g)?;
    let n = l.nrows();
    let eig = SymmetricEigen::try_new(l, 1e-13, 10_000)
        .ok_or_else(|| Error::ConvergenceFailure("symmetric eigensolver".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let chosen: Vec<usize> = order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] > TRIVIAL_EIGENVALUE)
        .take(d)
        .collect();
    if chosen.len() < d {
        return Err(Error::InvalidArgument(format!(
            "only {} non-trivial eigenvectors available for d = {d}",
            chosen.len()
        )));
    }
    let nu = g.n_users();
    let mut uv = Vec::with_capacity(nu * d);
    let mut rv = Vec::with_capacity((n - nu) * d);
    for row in 0..n {
        let target = if row < nu { &mut uv } else { &mut rv };
        target.extend(chosen.iter().map(|&c| eig.eigenvectors[(row, c)]));
    }
    Ok(Embedding {
        event_type: g.event_type,
        dim: d,
        users: g.users.clone(),
        repos: g.repos.clone(),
        user_vectors: uv,
        repo_vectors: rv,
    })
}

fn dense_a(g: &BipartiteGraph) -> Result<DMatrix<f64>> {
    if g.n_users() + g.n_repos() > DENSE_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "{} nodes exceed the dense solver limit of {DENSE_LIMIT}",
            g.n_users() + g.n_repos()
        )));
    }
    Ok(DMatrix::from_row_slice(g.n_users(), g.n_repos(), &g.dense()))
}

/// Spectral radius of the joint adjacency (the largest singular value of
/// the biadjacency matrix).
pub fn spectral_radius(g: &BipartiteGraph) -> Result<f64> {
    let a = dense_a(g)?;
    Ok(a.singular_values().max())
}

/// User-repository block of the Katz similarity `(I - bM)^-1 bM` over the
/// joint adjacency `M`, computed as `b A (I - b^2 A^T A)^-1`.
pub fn katz_block(g: &BipartiteGraph, beta: f64) -> Result<DMatrix<f64>> {
    let a = dense_a(g)?;
    let rho = a.singular_values().max();
    if beta <= 0.0 || beta * rho >= 1.0 {
        return Err(Error::BetaTooLarge { beta, limit: 1.0 / rho });
    }
    let nr = g.n_repos();
    let inner = DMatrix::identity(nr, nr) - (a.transpose() * &a) * (beta * beta);
    let inv = inner
        .try_inverse()
        .ok_or_else(|| Error::ConvergenceFailure("Katz system is singular".into()))?;
    Ok(a * inv * beta)
}

/// HOPE: rank-`d` truncated SVD of the Katz block, with vectors scaled by
/// the square roots of the singular values.
pub fn train_hope(g: &BipartiteGraph, d: usize, beta: f64) -> Result<Embedding> {
    if d == 0 {
        return Err(Error::InvalidArgument("embedding dimension must be >= 1".into()));
    }
    if g.is_empty() {
        return Err(Error::InvalidArgument("graph has no entries".into()));
    }
    let s = katz_block(g, beta)?;
    let svd = s.svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    order.truncate(d);
    let dim = d;
    let mut uv = vec![0.0; g.n_users() * dim];
    let mut rv = vec![0.0; g.n_repos() * dim];
    for (k, &c) in order.iter().enumerate() {
        let root = svd.singular_values[c].sqrt();
        for i in 0..g.n_users() {
            uv[i * dim + k] = u[(i, c)] * root;
        }
        for j in 0..g.n_repos() {
            rv[j * dim + k] = vt[(c, j)] * root;
        }
    }
    Ok(Embedding {
        event_type: g.event_type,
        dim,
        users: g.users.clone(),
        repos: g.repos.clone(),
        user_vectors: uv,
        repo_vectors: rv,
    })
}

/// Default HOPE decay: half the admissible maximum.
pub fn default_beta(g: &BipartiteGraph) -> Result<f64> {
    Ok(0.5 / spectral_radius(g)?)
}

// ---------------------------------------------------------------------------
// Mean average precision

/// Candidate count above which each node ranks a sample instead of every
/// candidate.
pub const FULL_RANKING_LIMIT: usize = 10_000;
const SAMPLED_CANDIDATES: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    pub map: f64,
    pub nodes: usize,
    /// True when some nodes ranked a candidate sample.
    pub sampled: bool,
}

/// Average precision of a ranked list given relevance flags, truncated at
/// `k_max`. Zero when no relevant item appears in the top `k_max`.
pub fn average_precision(relevant: &[bool], k_max: usize) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &rel) in relevant.iter().take(k_max).enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    if hits == 0 { 0.0 } else { sum / hits as f64 }
}

fn node_ap(
    scores: impl Fn(usize) -> f64,
    n_candidates: usize,
    excluded: &HashSet<usize>,
    observed: &HashSet<usize>,
    k_max: usize,
    node_seed: u64,
) -> (f64, bool) {
    if observed.is_empty() {
        return (0.0, false);
    }
    let mut cands: Vec<usize> = (0..n_candidates).filter(|c| !excluded.contains(c)).collect();
    let mut sampled = false;
    if cands.len() > FULL_RANKING_LIMIT {
        let mut rng = rng_for(node_seed, &["map-sample"]);
        let mut neg: Vec<usize> = cands.iter().copied().filter(|c| !observed.contains(c)).collect();
        neg.shuffle(&mut rng);
        neg.truncate(SAMPLED_CANDIDATES);
        cands = observed.iter().copied().filter(|c| !excluded.contains(c)).chain(neg).collect();
        cands.sort_unstable();
        sampled = true;
    }
    // -0.0 ties with 0.0; NaN ranks last
    let key = |s: f64| if s.is_nan() { f64::NEG_INFINITY } else { s + 0.0 };
    let mut scored: Vec<(f64, usize)> = cands.into_iter().map(|c| (key(scores(c)), c)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let rel: Vec<bool> = scored.iter().map(|(_, c)| observed.contains(c)).collect();
    (average_precision(&rel, k_max), sampled)
}

/// Mean average precision over every user and repository node of the
/// embedding. Each node ranks the opposite side by inner product, skipping
/// pairs linked in `exclude` (normally the training graph); nodes without
/// held-out edges contribute zero.
pub fn map_score(
    emb: &Embedding,
    held_out: &BipartiteGraph,
    exclude: Option<&BipartiteGraph>,
    k_max: usize,
) -> MapReport {
    let (nu, nr) = (emb.users.len(), emb.repos.len());
    let uidx: std::collections::HashMap<&str, usize> =
        emb.users.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
    let ridx: std::collections::HashMap<&str, usize> =
        emb.repos.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
    let edges_of = |g: &BipartiteGraph| -> (Vec<HashSet<usize>>, Vec<HashSet<usize>>) {
        let mut by_u = vec![HashSet::new(); nu];
        let mut by_r = vec![HashSet::new(); nr];
        for &(u, r, _) in &g.entries {
            let (Some(&i), Some(&j)) = (uidx.get(g.users[u as usize].as_str()), ridx.get(g.repos[r as usize].as_str()))
            else {
                continue;
            };
            by_u[i].insert(j);
            by_r[j].insert(i);
        }
        (by_u, by_r)
    };
    let (obs_u, obs_r) = edges_of(held_out);
    let (exc_u, exc_r) = match exclude {
        Some(g) => edges_of(g),
        None => (vec![HashSet::new(); nu], vec![HashSet::new(); nr]),
    };
    let users: Vec<(f64, bool)> = (0..nu)
        .into_par_iter()
        .map(|i| node_ap(|j| emb.score(i, j), nr, &exc_u[i], &obs_u[i], k_max, i as u64))
        .collect();
    let repos: Vec<(f64, bool)> = (0..nr)
        .into_par_iter()
        .map(|j| node_ap(|i| emb.score(i, j), nu, &exc_r[j], &obs_r[j], k_max, (nu + j) as u64))
        .collect();
    let nodes = nu + nr;
    let total: f64 = users.iter().chain(&repos).map(|a| a.0).sum();
    MapReport {
        map: if nodes == 0 { 0.0 } else { total / nodes as f64 },
        nodes,
        sampled: users.iter().chain(&repos).any(|a| a.1),
    }
}

// ---------------------------------------------------------------------------
// LPE agent

/// Baseline event-type choice; repositories drawn proportional to clipped
/// link scores from the user's top-K list for that type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpePolicy {
    pub baseline: BaselinePolicy,
    /// Per event type, `(repo, score)` sorted by score descending.
    pub lists: BTreeMap<EventType, Vec<(String, f64)>>,
}

impl LpePolicy {
    fn pick(&self, rng: &mut SimRng, t: EventType) -> Option<String> {
        let list = self.lists.get(&t)?;
        let total: f64 = list.iter().map(|(_, s)| s.max(0.0)).sum();
        if !(total > 0.0) {
            return None;
        }
        let mut x = rng.random::<f64>() * total;
        for (r, s) in list {
            let w = s.max(0.0);
            if x < w {
                return Some(r.clone());
            }
            x -= w;
        }
        list.iter().rev().find(|(_, s)| *s > 0.0).map(|(r, _)| r.clone())
    }
}

impl AgentModel for LpePolicy {
    fn step(&self, rng: &mut SimRng, _hub: &dyn HubView, _now: Timestamp) -> Result<Action> {
        let t = self.baseline.draw_type(rng);
        match self.pick(rng, t) {
            Some(repo) => Ok(Action::new(t, repo)),
            None => Ok(Action::new(t, self.baseline.draw_repo(rng))),
        }
    }
}

/// Keeps the `k` highest-scoring entries, sorted descending (ties by repo).
pub fn truncate_scores(mut scored: Vec<(String, f64)>, k: usize) -> Vec<(String, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

/// Scores every user of `emb` against candidate repos and keeps the top
/// `k`. Candidates are every repo when the score matrix is small enough,
/// otherwise the user's two-hop neighbourhood in `train` plus the most
/// linked repos.
pub fn score_lists(emb: &Embedding, train: &BipartiteGraph, k: usize) -> BTreeMap<String, Vec<(String, f64)>> {
    const FULL: usize = 100_000_000;
    let (nu, nr) = (emb.users.len(), emb.repos.len());
    let full = nu.saturating_mul(nr) <= FULL;
    let (uadj, radj) = (train.user_adjacency(), train.repo_adjacency());
    let mut by_degree: Vec<usize> = (0..nr).collect();
    by_degree.sort_by_key(|&j| (std::cmp::Reverse(radj.get(j).map_or(0, Vec::len)), j));
    by_degree.truncate(200);
    (0..nu)
        .into_par_iter()
        .map(|i| {
            let cands: Vec<usize> = if full {
                (0..nr).collect()
            } else {
                let mut set: BTreeSet<usize> = by_degree.iter().copied().collect();
                for &(r, _) in uadj.get(i).map_or(&[][..], Vec::as_slice) {
                    set.insert(r as usize);
                    for &(u2, _) in radj[r as usize].iter().take(32) {
                        for &(r2, _) in uadj[u2 as usize].iter().take(32) {
                            set.insert(r2 as usize);
                        }
                    }
                }
                set.into_iter().collect()
            };
            let scored = cands.into_iter().map(|j| (emb.repos[j].clone(), emb.score(i, j))).collect();
            (emb.users[i].clone(), truncate_scores(scored, k))
        })
        .collect()
}

/// Trains one GF embedding per networked event type present in the slice.
pub fn train_slice_embeddings(slice: &TrainingSlice, params: &GfParams) -> Result<BTreeMap<EventType, Embedding>> {
    EventType::NETWORKED
        .par_iter()
        .filter_map(|&e| {
            let g = match build_bipartite(slice, e) {
                Ok(g) if !g.is_empty() => g,
                Ok(_) => return None,
                Err(err) => return Some(Err(err)),
            };
            Some(train_gf(&g, params).map(|t| (e, t.embedding)))
        })
        .collect()
}

/// Builds LPE policies for every user from per-type embeddings.
pub fn fit_lpe(
    slice: &TrainingSlice,
    embeddings: &BTreeMap<EventType, Embedding>,
    k: usize,
) -> Result<BTreeMap<String, LpePolicy>> {
    let mut lists: BTreeMap<String, BTreeMap<EventType, Vec<(String, f64)>>> = BTreeMap::new();
    for (&e, emb) in embeddings {
        let train = build_bipartite(slice, e)?;
        for (user, list) in score_lists(emb, &train, k) {
            lists.entry(user).or_default().insert(e, list);
        }
    }
    slice
        .histories
        .values()
        .map(|h| {
            Ok((
                h.user_id.clone(),
                LpePolicy {
                    baseline: BaselinePolicy::from_history(h),
                    lists: lists.remove(&h.user_id).unwrap_or_default(),
                },
            ))
        })
        .collect()
}

/// Embeddings plus LPE policies for the whole population.
pub fn fit_lpe_population(slice: &TrainingSlice, params: &GfParams) -> Result<Population> {
    let embeddings = train_slice_embeddings(slice, params)?;
    let policies = fit_lpe(slice, &embeddings, LPE_TOP_K)?
        .into_iter()
        .map(|(u, p)| (u, AgentPolicy::Lpe(p)))
        .collect();
    Ok(Population { kind: ModelKind::Lpe, policies })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hub::PopularityView;
    use crate::sampling::Categorical;

    fn graph(entries: &[(&str, &str, f64)]) -> BipartiteGraph {
        BipartiteGraph::from_triples(EventType::Push, entries.iter().map(|&(u, r, w)| (u, r, w)))
    }

    #[test]
    fn zero_dimension_is_rejected() {
        let g = graph(&[("u", "r", 1.0)]);
        let p = GfParams { dim: 0, ..GfParams::default() };
        assert!(matches!(train_gf(&g, &p), Err(Error::InvalidArgument(_))));
        assert!(train_le(&g, 0).is_err());
        assert!(train_hope(&g, 0, 0.1).is_err());
    }

    #[test]
    fn gf_diverging_step_size_is_reported() {
        let g = graph(&[("u1", "r1", 50.0), ("u1", "r2", 3.0), ("u2", "r1", 7.0)]);
        let p = GfParams { dim: 2, lr: 1e12, epochs: 5, ..GfParams::default() };
        assert!(matches!(train_gf(&g, &p), Err(Error::NonFinite(_))));
    }

    #[test]
    fn hope_rejects_large_beta() {
        let g = graph(&[("u1", "r1", 1.0), ("u2", "r1", 1.0)]);
        let rho = spectral_radius(&g).unwrap();
        assert!((rho - 2f64.sqrt()).abs() < 1e-12);
        assert!(matches!(train_hope(&g, 1, 1.0 / rho), Err(Error::BetaTooLarge { .. })));
        assert!(train_hope(&g, 1, 0.9 / rho).is_ok());
    }

    #[test]
    fn ap_definition() {
        assert_eq!(average_precision(&[true, true, false], 10), 1.0);
        assert_eq!(average_precision(&[false, true], 10), 0.5);
        assert!((average_precision(&[true, false, true], 10) - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(average_precision(&[false, true], 1), 0.0);
        assert_eq!(average_precision(&[], 5), 0.0);
    }

    #[test]
    fn lpe_sampling_rules() {
        let base = BaselinePolicy {
            action_dist: Categorical::new([(EventType::Push, 1.0)]),
            repo_dist: Categorical::new([("fallback".to_string(), 1.0)]),
        };
        let hub = PopularityView::new();
        let mut rng = rng_for(3, &[]);

        let single = LpePolicy {
            baseline: base.clone(),
            lists: [(EventType::Push, vec![("only".to_string(), 2.0)])].into(),
        };
        assert!((0..20).all(|_| single.step(&mut rng, &hub, 0).unwrap().repo_id == "only"));

        let two = LpePolicy {
            baseline: base.clone(),
            lists: [(EventType::Push, vec![("a".to_string(), 3.0), ("b".to_string(), 1.0)])].into(),
        };
        let n = 40_000;
        let a = (0..n).filter(|_| two.step(&mut rng, &hub, 0).unwrap().repo_id == "a").count();
        assert!((a as f64 / n as f64 - 0.75).abs() < 0.01);

        let negative = LpePolicy {
            baseline: base.clone(),
            lists: [(EventType::Push, vec![("neg".to_string(), -1.0)])].into(),
        };
        assert_eq!(negative.step(&mut rng, &hub, 0).unwrap().repo_id, "fallback");
        let empty = LpePolicy { baseline: base, lists: BTreeMap::new() };
        assert_eq!(empty.step(&mut rng, &hub, 0).unwrap().repo_id, "fallback");
    }

    #[test]
    fn truncation_keeps_top_k() {
        let scored: Vec<(String, f64)> = (0..150).map(|i| (format!("r{i:03}"), i as f64)).collect();
        let kept = truncate_scores(scored, LPE_TOP_K);
        assert_eq!(kept.len(), 100);
        assert_eq!(kept[0].0, "r149");
        assert!(kept.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn embedding_files_round_trip() {
        let g = graph(&[("u1", "r1", 1.0), ("u2", "r2", 2.0)]);
        let emb = Embedding::random(&g, 3, 1);
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("push");
        save_embedding(&emb, &stem).unwrap();
        let back = load_embedding(&stem).unwrap();
        assert_eq!(back.users, emb.users);
        for (a, b) in back.user_vectors.iter().zip(&emb.user_vectors) {
            assert!((a - b).abs() < 1e-6);
        }
        let bytes = std::fs::metadata(stem.with_extension("bin")).unwrap().len();
        assert_eq!(bytes, 4 * 4 * 3);
    }
}
