//! Event counts for user-repository pairs with no shared history: a pair
//! feature table, S3D (structured sum-of-squares decomposition) regressors
//! per event type, and a wrapper that lets a stationary agent occasionally
//! act on a repository it has never touched.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hub::{HubView, PopularityKind, PopularityView};
use crate::ingest::TrainingSlice;
use crate::models::{Action, AgentModel, AgentPolicy, Population};
use crate::sampling::{rng_for, Categorical, SimRng};
use crate::types::{EventType, Timestamp, DAY};

// ---------------------------------------------------------------------------
// Features

const BASE_FEATURES: [(&str, &str); 17] = [
    ("user_is_owner", "1 if the user owns the repository"),
    ("same_language", "1 if the user's main language equals the repository language"),
    ("language_present", "1 if both languages are known"),
    ("user_age_days", "days from user creation to window end (0 when unknown)"),
    ("user_age_present", "1 if the user creation time is known"),
    ("repo_age_days", "days from repository creation to window end"),
    ("n_followers", "distinct other users acting on the user's repositories"),
    ("n_watchers_of_repo", "distinct watchers of the repository"),
    ("n_forks_of_repo", "distinct forkers of the repository"),
    ("n_contributors_of_repo", "distinct push/pull-request users of the repository"),
    ("n_repos_owned_by_user", "repositories owned by the user"),
    ("user_events", "events by the user"),
    ("user_distinct_repos", "distinct repositories the user acted on"),
    ("user_rate", "user events per day"),
    ("repo_events", "events on the repository"),
    ("repo_distinct_users", "distinct users acting on the repository"),
    ("repo_owner_events", "events by the repository owner"),
];

/// Names of every feature column, in table order: the base features, then
/// `user_<type>` and `repo_<type>` counts for each event type.
pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = BASE_FEATURES.iter().map(|(n, _)| n.to_string()).collect();
    for side in ["user", "repo"] {
        for e in EventType::ALL {
            names.push(format!("{side}_{}", e.as_str().to_ascii_lowercase()));
        }
    }
    names
}

/// `(name, description)` for every column.
pub fn feature_dictionary() -> Vec<(String, String)> {
    let mut d: Vec<(String, String)> = BASE_FEATURES
        .iter()
        .map(|(n, s)| (n.to_string(), s.to_string()))
        .collect();
    for side in ["user", "repo"] {
        for e in EventType::ALL {
            d.push((
                format!("{side}_{}", e.as_str().to_ascii_lowercase()),
                format!("{e} events by the {side} in the window"),
            ));
        }
    }
    d
}

pub fn feature_index(name: &str) -> Option<usize> {
    feature_names().iter().position(|n| n == name)
}

/// Feature rows for a list of user-repository pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFeatures {
    pub names: Vec<String>,
    pub pairs: Vec<(String, String)>,
    pub rows: Vec<Vec<f64>>,
}

impl PairFeatures {
    /// Table from raw rows with generic `f0, f1, ...` names.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let width = rows.first().map_or(0, Vec::len);
        PairFeatures {
            names: (0..width).map(|i| format!("f{i}")).collect(),
            pairs: Vec::new(),
            rows,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    fn subset(&self, idx: &[usize]) -> PairFeatures {
        PairFeatures {
            names: self.names.clone(),
            pairs: if self.pairs.is_empty() { Vec::new() } else { idx.iter().map(|&i| self.pairs[i].clone()).collect() },
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// CSV with a commented dictionary header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (n, d) in feature_dictionary() {
            if self.names.contains(&n) {
                writeln!(w, "# {n}: {d}")?;
            }
        }
        let mut cw = csv::Writer::from_writer(w);
        let mut header = vec!["user_id".to_string(), "repo_id".to_string()];
        header.extend(self.names.iter().cloned());
        cw.write_record(&header)?;
        for (i, row) in self.rows.iter().enumerate() {
            let (u, r) = self.pairs.get(i).cloned().unwrap_or_default();
            let mut rec = vec![u, r];
            rec.extend(row.iter().map(|v| v.to_string()));
            cw.write_record(&rec)?;
        }
        cw.flush()?;
        Ok(())
    }
}

#[derive(Default)]
struct UserStats {
    counts: [f64; 10],
    events: f64,
    distinct: f64,
    rate: f64,
    age: Option<f64>,
    language: Option<String>,
    owned: f64,
    followers: f64,
}

#[derive(Default)]
struct RepoStats {
    counts: [f64; 10],
    events: f64,
    distinct: f64,
}

/// Precomputed per-user and per-repository statistics of a slice.
pub struct FeatureContext<'a> {
    slice: &'a TrainingSlice,
    users: HashMap<&'a str, UserStats>,
    repos: HashMap<&'a str, RepoStats>,
    end: Timestamp,
}

impl<'a> FeatureContext<'a> {
    pub fn new(slice: &'a TrainingSlice) -> Self {
        let end = slice.window.end;
        let mut repos: HashMap<&str, RepoStats> = HashMap::new();
        let mut repo_users: HashMap<&str, BTreeSet<&str>> = HashMap::new();
        for e in &slice.events {
            let r = repos.entry(e.repo_id.as_str()).or_default();
            r.counts[e.event_type.index()] += 1.0;
            r.events += 1.0;
            repo_users.entry(e.repo_id.as_str()).or_default().insert(e.user_id.as_str());
        }
        for (id, us) in &repo_users {
            repos.get_mut(id).expect("repo seen").distinct = us.len() as f64;
        }

        let owned = slice.owned_repos();
        let mut users: HashMap<&str, UserStats> = HashMap::new();
        for (id, h) in &slice.histories {
            let mut s = UserStats {
                rate: h.rate,
                age: h.created_at.map(|c| (end - c) as f64 / DAY as f64),
                ..UserStats::default()
            };
            let mut langs: BTreeMap<&str, u64> = BTreeMap::new();
            let mut distinct = BTreeSet::new();
            for ((t, repo), &c) in &h.counts {
                s.counts[t.index()] += c as f64;
                s.events += c as f64;
                distinct.insert(repo.as_str());
                if let Some(l) = slice.repo_states.get(repo).and_then(|r| r.language.as_deref()) {
                    *langs.entry(l).or_insert(0) += c;
                }
            }
            s.distinct = distinct.len() as f64;
            s.language = langs
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
                .map(|(l, _)| l.to_string());
            users.insert(id.as_str(), s);
        }
        for (owner, list) in &owned {
            let mut followers: BTreeSet<&str> = BTreeSet::new();
            for r in list {
                for u in repo_users.get(r).into_iter().flatten() {
                    if u != owner {
                        followers.insert(u);
                    }
                }
            }
            let s = users.entry(owner).or_default();
            s.owned = list.len() as f64;
            s.followers = followers.len() as f64;
        }
        FeatureContext { slice, users, repos, end }
    }

    /// Feature row for one pair; unknown ids give zero statistics.
    pub fn row(&self, user: &str, repo: &str) -> Vec<f64> {
        let empty_u = UserStats::default();
        let empty_r = RepoStats::default();
        let u = self.users.get(user).unwrap_or(&empty_u);
        let r = self.repos.get(repo).unwrap_or(&empty_r);
        let st = self.slice.repo_states.get(repo);
        let owner = st.map(|s| s.owner_id.as_str());
        let repo_lang = st.and_then(|s| s.language.as_deref());
        let both = u.language.is_some() && repo_lang.is_some();
        let owner_events = owner.and_then(|o| self.users.get(o)).map_or(0.0, |o| o.events);
        let b = |x: bool| if x { 1.0 } else { 0.0 };
        let mut row = vec![
            b(owner == Some(user)),
            b(both && u.language.as_deref() == repo_lang),
            b(both),
            u.age.unwrap_or(0.0),
            b(u.age.is_some()),
            st.map_or(0.0, |s| (self.end - s.created_at) as f64 / DAY as f64),
            u.followers,
            st.map_or(0.0, |s| s.watch_count as f64),
            st.map_or(0.0, |s| s.fork_count as f64),
            st.map_or(0.0, |s| s.contributors.len() as f64),
            u.owned,
            u.events,
            u.distinct,
            u.rate,
            r.events,
            r.distinct,
            owner_events,
        ];
        row.extend_from_slice(&u.counts);
        row.extend_from_slice(&r.counts);
        row
    }
}

/// Feature table for `pairs`, a pure function of its inputs.
pub fn extract_features(slice: &TrainingSlice, pairs: &[(String, String)]) -> PairFeatures {
    let ctx = FeatureContext::new(slice);
    PairFeatures {
        names: feature_names(),
        pairs: pairs.to_vec(),
        rows: pairs.par_iter().map(|(u, r)| ctx.row(u, r)).collect(),
    }
}

/// Every pair with a positive count of `e` plus as many uniformly drawn
/// zero-count pairs, with their counts as targets.
pub fn training_pairs(slice: &TrainingSlice, e: EventType, seed: u64) -> (Vec<(String, String)>, Vec<f64>) {
    let mut positive: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for (u, h) in &slice.histories {
        for ((t, r), &c) in &h.counts {
            if *t == e {
                *positive.entry((u.as_str(), r.as_str())).or_insert(0.0) += c as f64;
            }
        }
    }
    let users: Vec<&str> = slice.histories.keys().map(String::as_str).collect();
    let repos: Vec<&str> = slice.repo_states.keys().map(String::as_str).collect();
    let mut pairs: Vec<(String, String)> = Vec::with_capacity(2 * positive.len());
    let mut targets = Vec::with_capacity(2 * positive.len());
    for ((u, r), c) in &positive {
        pairs.push((u.to_string(), r.to_string()));
        targets.push(*c);
    }
    let possible = users.len() * repos.len();
    let want = positive.len().min(possible.saturating_sub(positive.len()));
    let mut rng = rng_for(seed, &["s3d-negatives", e.as_str()]);
    let mut seen: BTreeSet<(&str, &str)> = BTreeSet::new();
    let mut tries = 0;
    while seen.len() < want && tries < 20 * want + 100 {
        tries += 1;
        let u = users[rng.random_range(0..users.len())];
        let r = repos[rng.random_range(0..repos.len())];
        if !positive.contains_key(&(u, r)) && seen.insert((u, r)) {
            pairs.push((u.to_string(), r.to_string()));
            targets.push(0.0);
        }
    }
    (pairs, targets)
}

// ---------------------------------------------------------------------------
// S3D

/// Most split thresholds considered per feature.
pub const MAX_SPLIT_CANDIDATES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStat {
    pub mean: f64,
    pub count: usize,
}

/// One selected feature: bin thresholds (a value `x` lands in bin
/// `#{t : t <= x}`) and the mean target of every non-empty cell of the
/// partition induced by this and all earlier levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S3DLevel {
    pub feature: usize,
    pub name: String,
    pub edges: Vec<f64>,
    /// Cell key is the dot-joined bin indices of levels `0..=this`.
    pub cells: BTreeMap<String, CellStat>,
}

impl S3DLevel {
    pub fn bin(&self, x: f64) -> usize {
        self.edges.partition_point(|&t| t <= x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S3DModel {
    pub event_type: Option<EventType>,
    pub lambda: f64,
    pub mean: f64,
    pub levels: Vec<S3DLevel>,
    /// Cumulative R² after each selected feature.
    pub r2_per_step: Vec<f64>,
}

impl S3DModel {
    pub fn selected(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.feature).collect()
    }

    pub fn r2(&self) -> f64 {
        self.r2_per_step.last().copied().unwrap_or(0.0)
    }

    /// R² contributed by each step; sums to [`S3DModel::r2`].
    pub fn step_gains(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.r2_per_step
            .iter()
            .map(|&r| {
                let g = r - prev;
                prev = r;
                g
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Clone, Copy, Default)]
struct Moments {
    n: f64,
    s: f64,
    ss: f64,
}

impl Moments {
    fn add(&mut self, y: f64) {
        self.n += 1.0;
        self.s += y;
        self.ss += y * y;
    }

    fn sse(&self) -> f64 {
        if self.n == 0.0 { 0.0 } else { (self.ss - self.s * self.s / self.n).max(0.0) }
    }

    fn minus(&self, o: &Moments) -> Moments {
        Moments { n: self.n - o.n, s: self.s - o.s, ss: self.ss - o.ss }
    }
}

fn split_candidates(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return Vec::new();
    }
    let min = v[0];
    let mut cands: Vec<f64> = (1..=MAX_SPLIT_CANDIDATES)
        .map(|i| v[(i * n / (MAX_SPLIT_CANDIDATES + 1)).min(n - 1)])
        .filter(|&t| t > min)
        .collect();
    cands.dedup();
    cands
}

/// Greedy threshold search for one feature given the current cells.
/// Returns the chosen thresholds and the reduction in within-cell sum of
/// squares. A threshold is kept only if its reduction exceeds
/// `lambda * ss_tot`.
fn search_feature(
    cell_of: &[usize],
    n_cells: usize,
    x: &[f64],
    y: &[f64],
    lambda: f64,
    ss_tot: f64,
) -> (Vec<f64>, f64) {
    let cands = split_candidates(x);
    let m = cands.len();
    if m == 0 {
        return (Vec::new(), 0.0);
    }
    // prefix[c][q]: moments of rows in cell c with quantized value < q
    let width = m + 2;
    let mut prefix = vec![Moments::default(); n_cells * width];
    for i in 0..x.len() {
        let q = cands.partition_point(|&t| t <= x[i]);
        prefix[cell_of[i] * width + q + 1].add(y[i]);
    }
    for c in 0..n_cells {
        for q in 1..width {
            let prev = prefix[c * width + q - 1];
            let cur = &mut prefix[c * width + q];
            cur.n += prev.n;
            cur.s += prev.s;
            cur.ss += prev.ss;
        }
    }
    let range_sse = |a: usize, b: usize| -> f64 {
        (0..n_cells)
            .map(|c| prefix[c * width + b].minus(&prefix[c * width + a]).sse())
            .sum()
    };
    // bins are [q_lo, q_hi) in quantized units, q in 0..=m
    let mut chosen: BTreeSet<usize> = BTreeSet::new();
    let mut gain_total = 0.0;
    loop {
        let mut best: Option<(f64, usize)> = None;
        for k in 1..=m {
            if chosen.contains(&k) {
                continue;
            }
            let lo = chosen.range(..k).next_back().copied().unwrap_or(0);
            let hi = chosen.range(k..).next().copied().unwrap_or(m + 1);
            let gain = range_sse(lo, hi) - range_sse(lo, k) - range_sse(k, hi);
            if best.is_none_or(|b| gain > b.0) {
                best = Some((gain, k));
            }
        }
        match best {
            Some((g, k)) if g > lambda * ss_tot && g > 1e-12 * ss_tot => {
                chosen.insert(k);
                gain_total += g;
            }
            _ => break,
        }
    }
    (chosen.into_iter().map(|k| cands[k - 1]).collect(), gain_total)
}

fn cell_key(bins: &[usize]) -> String {
    bins.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(".")
}

/// Forward selection: each step adds the feature whose thresholds explain
/// the most remaining variance, until `max_features` or no gain.
pub fn fit_s3d(table: &PairFeatures, targets: &[f64], lambda: f64, max_features: usize) -> Result<S3DModel> {
    if table.len() != targets.len() {
        return Err(Error::InvalidArgument(format!(
            "{} rows but {} targets",
            table.len(),
            targets.len()
        )));
    }
    let first = targets.first().copied();
    if first.is_none() || targets.iter().all(|&t| Some(t) == first) {
        return Err(Error::DegenerateTarget);
    }
    if targets.iter().any(|t| !t.is_finite()) || table.rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("S3D inputs".into()));
    }
    let n = targets.len();
    let mean = targets.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = targets.iter().map(|t| (t - mean).powi(2)).sum();
    let columns: Vec<Vec<f64>> = (0..table.width()).map(|j| table.column(j)).collect();

    let mut cell_of = vec![0usize; n];
    let mut n_cells = 1;
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut model = S3DModel { event_type: None, lambda, mean, levels: Vec::new(), r2_per_step: Vec::new() };
    let mut remaining: Vec<usize> = (0..table.width()).collect();

    while model.levels.len() < max_features && !remaining.is_empty() {
        let results: Vec<(usize, Vec<f64>, f64)> = remaining
            .par_iter()
            .map(|&j| {
                let (edges, gain) = search_feature(&cell_of, n_cells, &columns[j], targets, lambda, ss_tot);
                (j, edges, gain)
            })
            .collect();
        let Some((j, edges, _)) = results
            .into_iter()
            .filter(|r| r.2 > 0.0)
            .max_by(|a, b| a.2.total_cmp(&b.2).then(b.0.cmp(&a.0)))
        else {
            break;
        };
        let mut level = S3DLevel { feature: j, name: table.names[j].clone(), edges, cells: BTreeMap::new() };
        let mut acc: BTreeMap<String, Moments> = BTreeMap::new();
        for i in 0..n {
            bins[i].push(level.bin(columns[j][i]));
            acc.entry(cell_key(&bins[i])).or_default().add(targets[i]);
        }
        let ids: HashMap<&String, usize> = acc.keys().enumerate().map(|(k, key)| (key, k)).collect();
        for i in 0..n {
            cell_of[i] = ids[&cell_key(&bins[i])];
        }
        n_cells = acc.len();
        let sse: f64 = acc.values().map(Moments::sse).sum();
        level.cells = acc
            .iter()
            .map(|(k, m)| (k.clone(), CellStat { mean: m.s / m.n, count: m.n as usize }))
            .collect();
        model.r2_per_step.push((1.0 - sse / ss_tot).clamp(model.r2(), 1.0));
        model.levels.push(level);
        remaining.retain(|&k| k != j);
    }
    Ok(model)
}

/// Expected count for one feature row: the mean of the deepest non-empty
/// cell it falls in, clipped at zero. Values outside the training range
/// land in the outermost bin.
pub fn predict_pair(model: &S3DModel, row: &[f64]) -> f64 {
    let mut value = model.mean;
    let mut bins = Vec::with_capacity(model.levels.len());
    for level in &model.levels {
        bins.push(level.bin(row[level.feature]));
        match level.cells.get(&cell_key(&bins)) {
            Some(c) => value = c.mean,
            None => break,
        }
    }
    value.max(0.0)
}

/// Out-of-fold R² pooled over all folds.
pub fn cv_r2(table: &PairFeatures, targets: &[f64], lambda: f64, folds: usize, max_features: usize) -> f64 {
    let n = targets.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(0, &["s3d-folds"]));
    let fold_of: Vec<usize> = {
        let mut f = vec![0; n];
        for (pos, &i) in idx.iter().enumerate() {
            f[i] = pos % folds;
        }
        f
    };
    let mean = targets.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = targets.iter().map(|t| (t - mean).powi(2)).sum();
    let mut sse = 0.0;
    for k in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != k).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == k).collect();
        let ty: Vec<f64> = train.iter().map(|&i| targets[i]).collect();
        let predict: Box<dyn Fn(usize) -> f64> = match fit_s3d(&table.subset(&train), &ty, lambda, max_features) {
            Ok(m) => Box::new(move |i| predict_pair(&m, &table.rows[i])),
            Err(_) => {
                let m = ty.iter().sum::<f64>() / ty.len().max(1) as f64;
                Box::new(move |_| m)
            }
        };
        sse += test.iter().map(|&i| (targets[i] - predict(i)).powi(2)).sum::<f64>();
    }
    if ss_tot > 0.0 { 1.0 - sse / ss_tot } else { 0.0 }
}

/// Cross-validated choice of `lambda`. Ties go to the larger value; when no
/// value gives positive out-of-fold R² the largest is returned.
pub fn select_lambda(table: &PairFeatures, targets: &[f64], grid: &[f64], folds: usize) -> Result<f64> {
    if folds < 2 {
        return Err(Error::InvalidArgument("need at least 2 folds".into()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    let largest = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let scored: Vec<(f64, f64)> = grid
        .iter()
        .map(|&l| (l, cv_r2(table, targets, l, folds, DEFAULT_MAX_FEATURES)))
        .collect();
    let mut best: Option<(f64, f64)> = None;
    for (l, r2) in scored {
        if r2 <= 0.0 {
            continue;
        }
        best = match best {
            Some((bl, br)) if r2 < br - 1e-12 || ((r2 - br).abs() <= 1e-12 && l < bl) => Some((bl, br)),
            _ => Some((l, r2)),
        };
    }
    Ok(best.map_or(largest, |b| b.0))
}

pub const DEFAULT_MAX_FEATURES: usize = 6;
pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2];

/// Fits one S3D model per event type present in the slice, choosing
/// lambda by 3-fold cross-validation. Types with constant targets are
/// skipped.
pub fn fit_new_entity_models(slice: &TrainingSlice, seed: u64) -> Result<BTreeMap<EventType, S3DModel>> {
    let ctx = FeatureContext::new(slice);
    let out: Vec<Result<Option<(EventType, S3DModel)>>> = EventType::ALL
        .par_iter()
        .map(|&e| {
            let (pairs, targets) = training_pairs(slice, e, seed);
            if targets.len() < 10 {
                return Ok(None);
            }
            let table = PairFeatures {
                names: feature_names(),
                rows: pairs.iter().map(|(u, r)| ctx.row(u, r)).collect(),
                pairs,
            };
            let lambda = select_lambda(&table, &targets, &DEFAULT_LAMBDA_GRID, 3)?;
            match fit_s3d(&table, &targets, lambda, DEFAULT_MAX_FEATURES) {
                Ok(mut m) => {
                    m.event_type = Some(e);
                    Ok(Some((e, m)))
                }
                Err(Error::DegenerateTarget) => Ok(None),
                Err(err) => Err(err),
            }
        })
        .collect();
    let mut models = BTreeMap::new();
    for r in out {
        if let Some((e, m)) = r? {
            models.insert(e, m);
        }
    }
    Ok(models)
}

// ---------------------------------------------------------------------------
// Exploration wrapper

pub const DEFAULT_P_EXPLORE: f64 = 0.12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplorerConfig {
    pub p_explore: f64,
    /// Most popular repositories offered to every user.
    pub top_n: usize,
    /// Repositories reachable through co-activity offered per user.
    pub walk_cap: usize,
}

impl Default for ExplorerConfig {
    fn default() -> Self {
        ExplorerConfig { p_explore: DEFAULT_P_EXPLORE, top_n: 20, walk_cap: 30 }
    }
}

/// Delegates to `base`, except that with probability `p_explore` it acts on
/// a precomputed unseen `(type, repo)` candidate drawn proportional to its
/// predicted count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorerPolicy {
    pub base: AgentPolicy,
    pub p_explore: f64,
    pub candidates: Categorical<(EventType, String)>,
}

impl AgentModel for ExplorerPolicy {
    fn step(&self, rng: &mut SimRng, hub: &dyn HubView, now: Timestamp) -> Result<Action> {
        if self.p_explore > 0.0 && !self.candidates.is_empty() && rng.random::<f64>() < self.p_explore {
            if let Some((e, r)) = self.candidates.sample(rng) {
                return Ok(Action::new(*e, r.clone()));
            }
        }
        self.base.step(rng, hub, now)
    }
}

/// Candidate repositories per user: the most popular repositories and
/// those touched by users who share a repository with them, minus the
/// user's own history.
pub fn candidate_repos(slice: &TrainingSlice, cfg: &ExplorerConfig) -> BTreeMap<String, Vec<String>> {
    let mut hub = PopularityView::from_slice(slice);
    hub.refresh();
    let top: Vec<String> = (0..cfg.top_n.min(hub.ranked_len()))
        .filter_map(|k| hub.ranked(PopularityKind::Total, k).map(str::to_string))
        .collect();
    let mut actors: HashMap<&str, Vec<&str>> = HashMap::new();
    for (u, h) in &slice.histories {
        for r in h.repo_counts().keys() {
            actors.entry(r).or_default().push(u);
        }
    }
    slice
        .histories
        .par_iter()
        .map(|(u, h)| {
            let seen: BTreeSet<&str> = h.repo_counts().keys().copied().collect();
            let mut out: BTreeSet<String> = top.iter().filter(|r| !seen.contains(r.as_str())).cloned().collect();
            let mut walked = 0;
            'walk: for r in &seen {
                for other in actors.get(r).map_or(&[][..], Vec::as_slice).iter().take(16) {
                    if other == u {
                        continue;
                    }
                    for r2 in slice.histories[*other].repo_counts().keys() {
                        if !seen.contains(r2) && out.insert(r2.to_string()) {
                            walked += 1;
                            if walked >= cfg.walk_cap {
                                break 'walk;
                            }
                        }
                    }
                }
            }
            (u.clone(), out.into_iter().collect())
        })
        .collect()
}

/// Wraps every policy of `pop` in an [`ExplorerPolicy`], scoring its
/// candidates with the per-type S3D models.
pub fn attach_new_entity_behavior(
    pop: Population,
    models: &BTreeMap<EventType, S3DModel>,
    slice: &TrainingSlice,
    cfg: &ExplorerConfig,
) -> Population {
    let cands = candidate_repos(slice, cfg);
    let ctx = FeatureContext::new(slice);
    let policies = pop
        .policies
        .into_par_iter()
        .map(|(user, base)| {
            let mut dist = Categorical::default();
            for r in cands.get(&user).into_iter().flatten() {
                let row = ctx.row(&user, r);
                for (&e, m) in models {
                    if e == EventType::Create {
                        continue;
                    }
                    dist.push((e, r.clone()), predict_pair(m, &row));
                }
            }
            let wrapped = ExplorerPolicy { base, p_explore: cfg.p_explore, candidates: dist };
            (user, AgentPolicy::Explorer(Box::new(wrapped)))
        })
        .collect();
    Population { kind: pop.kind, policies }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_slice, Metadata, RepoMeta};
    use crate::models::stationary::BaselinePolicy;
    use crate::types::{Event, EventLog, TimeWindow};

    fn slice() -> TrainingSlice {
        let end = 100 * DAY;
        let log = EventLog::from_events(vec![
            Event::new(end - 20 * DAY, EventType::Create, "alice", "alice/a"),
            Event::new(end - 5 * DAY, EventType::Push, "alice", "alice/a"),
            Event::new(end - 4 * DAY, EventType::Watch, "bob", "alice/a"),
            Event::new(end - 3 * DAY, EventType::Fork, "bob", "carol/c"),
        ]);
        let mut meta = Metadata::default();
        meta.repos.insert(
            "alice/a".into(),
            RepoMeta { owner_id: "alice".into(), created_at: Some(end - 10 * DAY), language: Some("Rust".into()) },
        );
        meta.repos.insert(
            "carol/c".into(),
            RepoMeta { owner_id: "carol".into(), created_at: None, language: Some("Rust".into()) },
        );
        meta.users.insert("bob".into(), end - 40 * DAY);
        build_slice(&log, TimeWindow::new(0, end), Some(&meta)).unwrap()
    }

    fn get(t: &PairFeatures, row: usize, name: &str) -> f64 {
        t.rows[row][feature_index(name).unwrap()]
    }

    #[test]
    fn named_features() {
        let s = slice();
        let pairs = vec![
            ("alice".to_string(), "alice/a".to_string()),
            ("bob".to_string(), "alice/a".to_string()),
            ("bob".to_string(), "carol/c".to_string()),
            ("nobody".to_string(), "nowhere".to_string()),
        ];
        let t = extract_features(&s, &pairs);
        assert_eq!(t.names.len(), 37);
        assert_eq!(get(&t, 0, "user_is_owner"), 1.0);
        assert_eq!(get(&t, 1, "user_is_owner"), 0.0);
        assert_eq!(get(&t, 0, "repo_age_days"), 10.0);
        assert_eq!(get(&t, 2, "same_language"), 1.0);
        assert_eq!(get(&t, 1, "user_age_days"), 40.0);
        assert_eq!(get(&t, 0, "user_age_present"), 0.0);
        assert_eq!(get(&t, 0, "n_followers"), 1.0);
        assert_eq!(get(&t, 1, "n_watchers_of_repo"), 1.0);
        assert_eq!(get(&t, 1, "user_watch"), 1.0);
        assert!(t.rows[3].iter().all(|v| v.is_finite()));
        assert_eq!(t, extract_features(&s, &pairs));
    }

    #[test]
    fn constant_target_is_degenerate() {
        let t = PairFeatures::from_rows(vec![vec![1.0], vec![2.0]]);
        assert!(matches!(fit_s3d(&t, &[3.0, 3.0], 0.0, 3), Err(Error::DegenerateTarget)));
    }

    #[test]
    fn huge_lambda_selects_nothing() {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64, (i % 7) as f64]).collect();
        let y: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let m = fit_s3d(&PairFeatures::from_rows(rows), &y, 1e9, 5).unwrap();
        assert!(m.levels.is_empty());
        assert_eq!(m.r2(), 0.0);
        assert_eq!(predict_pair(&m, &[5.0, 1.0]), 99.5);
    }

    #[test]
    fn prediction_is_bin_mean_and_clamps() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![if i < 50 { 0.0 } else { 1.0 }]).collect();
        let y: Vec<f64> = (0..100).map(|i| if i < 50 { 2.0 } else { 6.0 }).collect();
        let m = fit_s3d(&PairFeatures::from_rows(rows), &y, 0.01, 3).unwrap();
        assert_eq!(m.selected(), vec![0]);
        assert!((m.r2() - 1.0).abs() < 1e-12);
        assert_eq!(predict_pair(&m, &[0.0]), 2.0);
        assert_eq!(predict_pair(&m, &[1.0]), 6.0);
        assert_eq!(predict_pair(&m, &[-50.0]), 2.0);
        assert_eq!(predict_pair(&m, &[1e9]), 6.0);
        let back = S3DModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn single_value_grid() {
        let t = PairFeatures::from_rows(vec![vec![0.0], vec![1.0], vec![2.0]]);
        assert_eq!(select_lambda(&t, &[0.0, 1.0, 2.0], &[0.3], 2).unwrap(), 0.3);
        assert!(select_lambda(&t, &[0.0, 1.0, 2.0], &[0.3], 1).is_err());
    }

    fn base() -> AgentPolicy {
        AgentPolicy::Baseline(BaselinePolicy {
            action_dist: Categorical::new([(EventType::Push, 1.0)]),
            repo_dist: Categorical::new([("home".to_string(), 1.0)]),
        })
    }

    #[test]
    fn explorer_rules() {
        let hub = PopularityView::new();
        let single = Categorical::new([((EventType::Watch, "new".to_string()), 1.0)]);
        let always = ExplorerPolicy { base: base(), p_explore: 1.0, candidates: single.clone() };
        let mut rng = rng_for(1, &[]);
        assert!((0..50).all(|_| always.step(&mut rng, &hub, 0).unwrap() == Action::new(EventType::Watch, "new")));

        let empty = ExplorerPolicy { base: base(), p_explore: 1.0, candidates: Categorical::default() };
        assert_eq!(empty.step(&mut rng, &hub, 0).unwrap().repo_id, "home");

        let never = ExplorerPolicy { base: base(), p_explore: 0.0, candidates: single };
        let (mut a, mut b) = (rng_for(9, &[]), rng_for(9, &[]));
        for _ in 0..100 {
            assert_eq!(never.step(&mut a, &hub, 0).unwrap(), base().step(&mut b, &hub, 0).unwrap());
        }
        assert_eq!(a.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn candidates_exclude_seen_repos() {
        let s = slice();
        let c = candidate_repos(&s, &ExplorerConfig::default());
        assert!(!c["bob"].contains(&"alice/a".to_string()));
        assert!(c["alice"].contains(&"carol/c".to_string()));
    }
}
