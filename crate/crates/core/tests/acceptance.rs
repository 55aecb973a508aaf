//! Acceptance criteria 1-9, run in sequence inside one test. Each prints a
//! PASS or FAIL line and the test fails if any criterion does.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use ghsim::engine::{partition_graph, InteractionGraph};
use ghsim::ingest::{build_slice, log_digest, write_events, BipartiteGraph, LogFormat};
use ghsim::manifest::peak_memory_bytes;
use ghsim::metrics::{
    community_contributing_users, contributors_rmse, issue_count_r2, rbo, repo_popularity_rank, user_popularity_rank,
};
use ghsim::models::bayesian::fit_bayesian;
use ghsim::models::embedding::{
    default_beta, gf_gradient, gf_loss, map_score, train_gf, train_hope, train_le, Embedding, GfParams,
};
use ghsim::models::newentity::{fit_s3d, predict_pair, PairFeatures};
use ghsim::models::{AgentPolicy, FittedModel};
use ghsim::sampling::{rng_for, SimRng};
use ghsim::snapshot::write_snapshot;
use ghsim::types::DAY;
use ghsim::{
    evaluate, fit_model, generate, run, EvalConfig, Event, EventLog, EventType, FitConfig, ModelKind,
    SimulationConfig, SynthConfig, TimeWindow, Variant,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn jsonl(log: &EventLog) -> Vec<u8> {
    let mut buf = Vec::new();
    write_events(&mut buf, log, LogFormat::Jsonl).unwrap();
    buf
}

// 1 -------------------------------------------------------------------------

fn null_identity() -> Outcome {
    let cfg = SynthConfig { n_users: 2000, n_repos: 3000, days: 42, rate_median: 4.0, rate_sigma: 0.3, seed: 11, ..SynthConfig::default() };
    let synth = generate(&cfg).unwrap();
    let w = synth.params.window;
    let pre = TimeWindow::new(w.start, w.start + 14 * DAY);
    let test = TimeWindow::new(pre.end, w.end);
    let n_pre = synth.log.restrict(pre).len();

    let t = Instant::now();
    let fitted = fit_model(ModelKind::Null, &synth.log, test, None, &FitConfig::default()).unwrap();
    let out = run(&SimulationConfig::new(test, 1, 4), &fitted.slice, &fitted.model).unwrap();
    let secs = t.elapsed().as_secs_f64();

    // oracle: every pre-window event copied forward by whole fortnights
    let mut expect = Vec::new();
    for e in synth.log.restrict(pre).iter() {
        let mut ts = e.timestamp + 14 * DAY;
        while ts < test.end {
            if test.contains(ts) {
                expect.push(Event { timestamp: ts, ..e.clone() });
            }
            ts += 14 * DAY;
        }
    }
    let expect = EventLog::from_events(expect);
    let same = jsonl(&out.log) == jsonl(&expect);
    check(
        same && n_pre >= 100_000 && secs < 10.0,
        format!("{n_pre} source events, {} output, byte-identical={same}, {secs:.2}s", out.log.len()),
    )
}

// 2 -------------------------------------------------------------------------

fn stationary_consistency() -> Outcome {
    let cfg = SynthConfig { n_users: 10_000, n_repos: 10_000, days: 30, rate_median: 8.0, rate_sigma: 0.3, seed: 21, ..SynthConfig::default() };
    let synth = generate(&cfg).unwrap();
    let train = synth.params.window;
    let fitted = fit_model(ModelKind::Baseline, &synth.log, train, None, &FitConfig::default()).unwrap();
    let FittedModel::Population(pop) = &fitted.model else { unreachable!() };

    let mut tv_sum = 0.0;
    let mut n = 0usize;
    for (user, planted) in &synth.params.users {
        let Some(AgentPolicy::Baseline(policy)) = pop.policies.get(user) else { continue };
        let fitted: BTreeMap<EventType, f64> = policy.action_dist.probabilities().map(|(&e, p)| (e, p)).collect();
        let keys: BTreeSet<EventType> = fitted.keys().chain(planted.action_dist.keys()).copied().collect();
        let tv: f64 = keys
            .iter()
            .map(|k| (fitted.get(k).unwrap_or(&0.0) - planted.action_dist.get(k).unwrap_or(&0.0)).abs())
            .sum::<f64>()
            / 2.0;
        tv_sum += tv;
        n += 1;
    }
    let mean_tv = tv_sum / n as f64;

    let test = TimeWindow::new(train.end, train.end + 30 * DAY);
    let out = run(&SimulationConfig::new(test, 2, rayon::current_num_threads().max(1)), &fitted.slice, &fitted.model).unwrap();
    let mut counts: BTreeMap<&str, f64> = BTreeMap::new();
    for e in out.log.iter() {
        *counts.entry(e.user_id.as_str()).or_insert(0.0) += 1.0;
    }
    let within = fitted
        .slice
        .histories
        .values()
        .filter(|h| {
            let lambda = h.rate * 30.0;
            (counts.get(h.user_id.as_str()).copied().unwrap_or(0.0) - lambda).abs() <= 3.0 * lambda.sqrt()
        })
        .count();
    let share = within as f64 / fitted.slice.histories.len() as f64;
    check(
        mean_tv < 0.05 && share >= 0.99,
        format!("mean TV {mean_tv:.4} over {n} users; {:.2}% of users within 3 sigma", 100.0 * share),
    )
}

// 3 -------------------------------------------------------------------------

fn bayesian_round_trip() -> Outcome {
    let cfg = SynthConfig {
        variant: Variant::Attachment,
        n_users: 20_000,
        n_repos: 10_000,
        days: 60,
        rate_median: 0.4,
        seed: 31,
        ..SynthConfig::default()
    };
    let synth = generate(&cfg).unwrap();
    let slice = build_slice(&synth.log, synth.params.window, Some(&synth.metadata)).unwrap();
    let m = fit_bayesian(&slice).unwrap();
    // planted: watch, fork, create shares of one-time discovery 64:20:4
    let planted = [0.64 / 0.88, 0.20 / 0.88, 0.04 / 0.88];
    let split_err = (0..3).map(|i| (m.config.discovery[i] - planted[i]).abs()).fold(0.0, f64::max);
    let gamma = m.config.watch_fit.as_ref().map(|f| f.gamma).unwrap_or(f64::NAN);
    let share = m.config.p_new_user;
    check(
        split_err <= 0.03 && (gamma - 1.81).abs() <= 0.1 && (share - 0.2).abs() <= 0.03,
        format!(
            "split {:.3?} (max err {split_err:.4}), gamma {gamma:.3}, new-user share {share:.4}",
            m.config.discovery
        ),
    )
}

// 4 -------------------------------------------------------------------------

fn random_graph(rng: &mut SimRng, nu: usize, nr: usize, p: f64, weighted: bool) -> BipartiteGraph {
    let mut t = Vec::new();
    for u in 0..nu {
        for r in 0..nr {
            if rng.random::<f64>() < p {
                let w = if weighted { rng.random_range(1..5) as f64 } else { 1.0 };
                t.push((format!("u{u:03}"), format!("r{r:03}"), w));
            }
        }
    }
    BipartiteGraph::from_triples(EventType::Watch, t)
}

fn planted_blocks(seed: u64, label: &str) -> BipartiteGraph {
    let mut rng = rng_for(seed, &["blocks", label]);
    let mut t = Vec::new();
    for u in 0..200 {
        for r in 0..200 {
            let p = if (u < 100) == (r < 100) { 0.3 } else { 0.02 };
            if rng.random::<f64>() < p {
                t.push((format!("u{u:03}"), format!("r{r:03}"), 1.0));
            }
        }
    }
    BipartiteGraph::from_triples(EventType::Watch, t)
}

/// Independent MAP: each candidate's rank is counted directly (higher
/// score, or equal score and lower index, ranks first).
fn brute_force_map(emb: &Embedding, held: &BipartiteGraph, train: &BipartiteGraph, k_max: usize) -> f64 {
    let pairs = |g: &BipartiteGraph| -> HashSet<(String, String)> {
        g.entries
            .iter()
            .map(|&(u, r, _)| (g.users[u as usize].clone(), g.repos[r as usize].clone()))
            .collect()
    };
    let (obs, exc) = (pairs(held), pairs(train));
    let (nu, nr) = (emb.users.len(), emb.repos.len());
    let node_ap = |cands: Vec<(usize, f64, bool)>| -> f64 {
        let rank = |i: usize| {
            1 + cands
                .iter()
                .enumerate()
                .filter(|(j, c)| c.1 > cands[i].1 || (c.1 == cands[i].1 && c.0 < cands[i].0 && *j != i))
                .count()
        };
        let mut by_rank: Vec<(usize, bool)> = (0..cands.len()).map(|i| (rank(i), cands[i].2)).collect();
        by_rank.sort();
        let (mut hits, mut sum) = (0usize, 0.0);
        for &(k, rel) in by_rank.iter().filter(|e| e.0 <= k_max) {
            if rel {
                hits += 1;
                sum += hits as f64 / k as f64;
            }
        }
        if hits == 0 {
            0.0
        } else {
            sum / hits as f64
        }
    };
    let mut total = 0.0;
    for i in 0..nu {
        let c = (0..nr)
            .filter(|&j| !exc.contains(&(emb.users[i].clone(), emb.repos[j].clone())))
            .map(|j| (j, emb.score(i, j), obs.contains(&(emb.users[i].clone(), emb.repos[j].clone()))))
            .collect();
        total += node_ap(c);
    }
    for j in 0..nr {
        let c = (0..nu)
            .filter(|&i| !exc.contains(&(emb.users[i].clone(), emb.repos[j].clone())))
            .map(|i| (i, emb.score(i, j), obs.contains(&(emb.users[i].clone(), emb.repos[j].clone()))))
            .collect();
        total += node_ap(c);
    }
    total / (nu + nr) as f64
}

fn embedding_suite() -> Outcome {
    let mut rng = rng_for(41, &["embedding"]);
    let mut notes = Vec::new();
    let mut ok = true;

    // gradient against central differences
    let g = random_graph(&mut rng, 8, 6, 0.5, true);
    let d = 3;
    let x: Vec<f64> = (0..g.n_users() * d).map(|_| rng.random::<f64>() - 0.5).collect();
    let y: Vec<f64> = (0..g.n_repos() * d).map(|_| rng.random::<f64>() - 0.5).collect();
    let (gx, gy) = gf_gradient(&g, &x, &y, d, 0.1);
    let h = 1e-6;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &an) in gx.iter().enumerate() {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[i] += h;
        xm[i] -= h;
        let fd = (gf_loss(&g, &xp, &y, d, 0.1) - gf_loss(&g, &xm, &y, d, 0.1)) / (2.0 * h);
        num += (fd - an).powi(2);
        den += an * an;
    }
    for (i, &an) in gy.iter().enumerate() {
        let (mut yp, mut ym) = (y.clone(), y.clone());
        yp[i] += h;
        ym[i] -= h;
        let fd = (gf_loss(&g, &x, &yp, d, 0.1) - gf_loss(&g, &x, &ym, d, 0.1)) / (2.0 * h);
        num += (fd - an).powi(2);
        den += an * an;
    }
    let rel = (num / den).sqrt();
    ok &= rel < 1e-5;
    notes.push(format!("grad rel err {rel:.1e}"));

    // rank-1 recovery
    let a: Vec<f64> = (0..20).map(|_| 1.0 + rng.random::<f64>()).collect();
    let b: Vec<f64> = (0..15).map(|_| 1.0 + rng.random::<f64>()).collect();
    let triples = a
        .iter()
        .enumerate()
        .flat_map(|(i, ai)| b.iter().enumerate().map(move |(j, bj)| (format!("u{i:02}"), format!("r{j:02}"), ai * bj)));
    let g1 = BipartiteGraph::from_triples(EventType::Push, triples);
    let p = GfParams { dim: 1, reg: 0.0, lr: 0.01, epochs: 400, seed: 1 };
    let emb = train_gf(&g1, &p).unwrap().embedding;
    let mse: f64 = g1
        .entries
        .iter()
        .map(|&(u, r, w)| (w - emb.score(u as usize, r as usize)).powi(2))
        .sum::<f64>()
        / g1.entries.len() as f64;
    ok &= mse.sqrt() < 1e-3;
    notes.push(format!("rank-1 rmse {:.1e}", mse.sqrt()));

    // planted blocks: each trainer beats random scores by more than 0.1
    let mut worst = [f64::INFINITY; 3];
    for seed in 0..10 {
        let train = planted_blocks(seed, "train");
        let held = planted_blocks(seed, "held");
        let random = map_score(&Embedding::random(&train, 8, seed), &held, Some(&train), 100).map;
        let gf = train_gf(&train, &GfParams { seed, ..GfParams::default() }).unwrap().embedding;
        let le = train_le(&train, 4).unwrap();
        let hope = train_hope(&train, 4, default_beta(&train).unwrap()).unwrap();
        for (k, e) in [gf, le, hope].iter().enumerate() {
            worst[k] = worst[k].min(map_score(e, &held, Some(&train), 100).map - random);
        }
    }
    ok &= worst.iter().all(|&w| w > 0.1);
    notes.push(format!("min MAP gain over random gf {:.3} le {:.3} hope {:.3}", worst[0], worst[1], worst[2]));

    // exact agreement with the brute-force oracle on small graphs
    let mut max_diff: f64 = 0.0;
    for trial in 0..200 {
        let nu = rng.random_range(1..10);
        let nr = rng.random_range(1..(21 - nu).min(10));
        let train = random_graph(&mut rng, nu, nr, 0.3, false);
        let held = random_graph(&mut rng, nu, nr, 0.4, false);
        if train.is_empty() || held.is_empty() {
            continue;
        }
        let mut emb = Embedding::random(&train, 2, trial);
        // coarse values force ties
        for v in emb.user_vectors.iter_mut().chain(emb.repo_vectors.iter_mut()) {
            *v = (*v * 4.0).round() / 4.0;
        }
        let held = BipartiteGraph::with_universe(
            EventType::Watch,
            train.users.clone(),
            train.repos.clone(),
            held.entries
                .iter()
                .filter_map(|&(u, r, w)| {
                    let ui = train.users.iter().position(|x| *x == held.users[u as usize])?;
                    let ri = train.repos.iter().position(|x| *x == held.repos[r as usize])?;
                    Some((ui as u32, ri as u32, w))
                })
                .collect(),
        );
        let k_max = rng.random_range(1..12);
        let got = map_score(&emb, &held, Some(&train), k_max).map;
        max_diff = max_diff.max((got - brute_force_map(&emb, &held, &train, k_max)).abs());
    }
    ok &= max_diff == 0.0;
    notes.push(format!("oracle max diff {max_diff:e}"));
    check(ok, notes.join("; "))
}

// 5 -------------------------------------------------------------------------

fn planted_table(rng: &mut SimRng, n: usize, col: usize) -> (PairFeatures, Vec<f64>) {
    let noise = Normal::new(0.0, 0.1).unwrap();
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
        y.push(5.0 * row[col] + noise.sample(rng));
        rows.push(row);
    }
    (PairFeatures::from_rows(rows), y)
}

fn s3d_recovery() -> Outcome {
    let mut hits = 0;
    let mut worst_rmse: f64 = 0.0;
    for seed in 0..100u64 {
        let mut rng = rng_for(seed, &["s3d-planted"]);
        let col = rng.random_range(0..10);
        let (table, y) = planted_table(&mut rng, 5000, col);
        let model = fit_s3d(&table, &y, 1e-3, 6).unwrap();
        hits += (model.selected().first() == Some(&col)) as usize;
        let (test, ty) = planted_table(&mut rng, 2000, col);
        let mse: f64 = (0..test.len()).map(|i| (predict_pair(&model, &test.rows[i]) - ty[i]).powi(2)).sum::<f64>()
            / test.len() as f64;
        worst_rmse = worst_rmse.max(mse.sqrt());
    }

    // monotone R² trace on arbitrary data
    let mut rng = rng_for(52, &["s3d-fuzz"]);
    let mut monotone = true;
    let mut fitted = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..400);
        let w = rng.random_range(1..8);
        let levels = rng.random_range(1..6);
        let rows: Vec<Vec<f64>> =
            (0..n).map(|_| (0..w).map(|_| rng.random_range(0..levels * 3) as f64).collect()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 * rng.random::<f64>()).collect();
        let lambda = [0.0, 1e-4, 1e-2, 0.1][rng.random_range(0..4)];
        if let Ok(m) = fit_s3d(&PairFeatures::from_rows(rows), &y, lambda, 6) {
            fitted += 1;
            monotone &= m.r2_per_step.windows(2).all(|p| p[1] >= p[0]) && m.r2_per_step.iter().all(|&r| r <= 1.0);
        }
    }
    check(
        hits >= 95 && worst_rmse <= 0.2 && monotone,
        format!("planted first {hits}/100, worst rmse {worst_rmse:.4}, monotone on {fitted} fuzzed fits: {monotone}"),
    )
}

// 6 -------------------------------------------------------------------------

fn ev(t: i64, e: EventType, u: &str, r: &str) -> Event {
    Event::new(t, e, u, r)
}

fn metric_correctness() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let mut fails = Vec::new();
    let mut expect = |name: &str, ok: bool| {
        if !ok {
            fails.push(name.to_string());
        }
    };

    // rbo table
    let l: Vec<u32> = (0..37).collect();
    for p in [0.5, 0.9, 0.98] {
        expect("rbo identical", close(rbo(&l, &l, p, l.len()).unwrap(), 1.0 - p.powi(l.len() as i32)));
    }
    expect("rbo disjoint", rbo(&[1, 2, 3], &[4, 5, 6], 0.9, 3).unwrap() == 0.0);
    expect("rbo swap", close(rbo(&["a", "b"], &["b", "a"], 0.5, 2).unwrap(), 0.25));
    expect("rbo persistence", rbo(&[1], &[1], 1.0, 1).is_err());

    // popularity ranks
    let owner: BTreeMap<String, String> =
        [("r1", "u1"), ("r2", "u1"), ("r3", "u2")].iter().map(|(r, u)| (r.to_string(), u.to_string())).collect();
    let none = BTreeSet::new();
    expect("user rank empty", user_popularity_rank(&EventLog::new(), &owner, &none, &none).is_empty());
    let one = EventLog::from_events(vec![ev(0, EventType::Watch, "x", "r3")]);
    expect("user rank single", user_popularity_rank(&one, &owner, &none, &none) == ["u2"]);
    let mut evs: Vec<Event> = (0..3).map(|i| ev(i, EventType::Watch, &format!("w{i}"), "r1")).collect();
    evs.push(ev(5, EventType::Fork, "f", "r2"));
    evs.extend((0..2).map(|i| ev(6 + i, EventType::Fork, &format!("g{i}"), "r3")));
    let log = EventLog::from_events(evs);
    expect("user rank order", user_popularity_rank(&log, &owner, &none, &none) == ["u1", "u2"]);
    expect("repo rank empty", repo_popularity_rank(&EventLog::new(), &none).is_empty());
    expect("repo rank single", repo_popularity_rank(&one, &none) == ["r3"]);
    expect("repo rank order", repo_popularity_rank(&log, &none) == ["r1", "r3", "r2"]);

    // R²
    let issues = |counts: &[usize]| {
        EventLog::from_events(
            counts
                .iter()
                .enumerate()
                .flat_map(|(i, &c)| (0..c).map(move |k| ev(k as i64, EventType::Issues, "u", &format!("r{i}"))))
                .collect(),
        )
    };
    expect("r2 identity", close(issue_count_r2(&issues(&[1, 2, 3]), &issues(&[1, 2, 3])).unwrap(), 1.0));
    expect("r2 mean", close(issue_count_r2(&issues(&[2, 2, 2]), &issues(&[1, 2, 3])).unwrap(), 0.0));
    expect("r2 reversed", close(issue_count_r2(&issues(&[3, 2, 1]), &issues(&[1, 2, 3])).unwrap(), -3.0));
    expect("r2 degenerate", issue_count_r2(&issues(&[1, 2]), &issues(&[2, 2])).is_err());

    // contributor RMSE over three days
    let w = TimeWindow::new(0, 3 * DAY);
    let daily = |per_day: &[usize]| {
        EventLog::from_events(
            per_day
                .iter()
                .enumerate()
                .flat_map(|(d, &c)| (0..c).map(move |k| ev(d as i64 * DAY, EventType::Push, &format!("c{k}"), "r")))
                .collect(),
        )
    };
    expect("rmse identical", contributors_rmse(&daily(&[2, 0, 1]), &daily(&[2, 0, 1]), "r", w) == 0.0);
    expect("rmse off by one", close(contributors_rmse(&daily(&[3, 1, 2]), &daily(&[2, 0, 1]), "r", w), 1.0));
    expect("rmse hand", close(contributors_rmse(&daily(&[0, 0, 0]), &daily(&[2, 0, 1]), "r", w), (5.0f64 / 3.0).sqrt()));

    // community percentage
    let community: BTreeSet<String> = (0..5).map(|i| format!("m{i}")).collect();
    let pushes = |k: usize| EventLog::from_events((0..k).map(|i| ev(0, EventType::Push, &format!("m{i}"), "r")).collect());
    expect("community all", close(community_contributing_users(&pushes(5), &community).unwrap(), 1.0));
    expect("community none", close(community_contributing_users(&pushes(0), &community).unwrap(), 0.0));
    expect("community two", close(community_contributing_users(&pushes(2), &community).unwrap(), 0.4));
    expect("community empty", community_contributing_users(&pushes(2), &BTreeSet::new()).is_err());

    // rbo symmetry and monotonicity under fuzzing
    let mut rng = rng_for(61, &["rbo-fuzz"]);
    let mut props = true;
    for _ in 0..10_000 {
        let universe: Vec<u32> = (0..rng.random_range(1..40)).collect();
        let mut s = universe.clone();
        s.shuffle(&mut rng);
        s.truncate(rng.random_range(0..=universe.len()));
        let mut t = universe.clone();
        t.shuffle(&mut rng);
        t.truncate(rng.random_range(0..=universe.len()));
        let p = rng.random_range(0.01..0.99);
        let depth = rng.random_range(1..50);
        let a = rbo(&s, &t, p, depth).unwrap();
        props &= a == rbo(&t, &s, p, depth).unwrap() && (0.0..=1.0).contains(&a);
        let (mut s2, mut t2) = (vec![1000], vec![1000]);
        s2.extend(&s);
        t2.extend(&t);
        props &= rbo(&s2, &t2, p, depth).unwrap() >= a - 1e-15;
    }
    expect("rbo properties", props);
    check(fails.is_empty(), if fails.is_empty() { "all example tables and 10^4 fuzzed pairs".into() } else { format!("failed: {fails:?}") })
}

// 7 -------------------------------------------------------------------------

fn partition_quality() -> Outcome {
    let mut ratios = Vec::new();
    for seed in 0..10u64 {
        let mut rng = rng_for(seed, &["planted-communities"]);
        let n = 400;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let p = if (i < n / 2) == (j < n / 2) { 0.1 } else { 0.005 };
                if rng.random::<f64>() < p {
                    edges.push((i as u32, j as u32, 1.0));
                }
            }
        }
        let g = InteractionGraph::from_edges(n, edges.clone());
        let cut = partition_graph(&g, 2, seed).unwrap().cut;
        // mean cut of 100 uniform random balanced bisections
        let mut total = 0.0;
        for _ in 0..100 {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut side = vec![false; n];
            for &v in &order[..n / 2] {
                side[v] = true;
            }
            total += edges.iter().filter(|e| side[e.0 as usize] != side[e.1 as usize]).count() as f64;
        }
        ratios.push(cut / (total / 100.0));
    }
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    check(ratios.iter().all(|&r| r <= 0.5), format!("worst cut / random cut {worst:.3} over 10 seeds"))
}

// 8 -------------------------------------------------------------------------

fn scale_proxy() -> Outcome {
    // reset the resident-set high-water mark so earlier criteria do not count
    let _ = std::fs::write("/proc/self/clear_refs", "5");
    let cfg = SynthConfig { n_users: 100_000, n_repos: 100_000, days: 60, rate_median: 0.3, seed: 81, ..SynthConfig::default() };
    let synth = generate(&cfg).unwrap();
    let w = synth.params.window;
    let train = TimeWindow::new(w.start, w.start + 30 * DAY);
    let test = TimeWindow::new(train.end, w.end);
    let t = Instant::now();
    let fitted = fit_model(ModelKind::Baseline, &synth.log, train, Some(&synth.metadata), &FitConfig::default()).unwrap();
    let out = run(&SimulationConfig::new(test, 1, rayon::current_num_threads().max(1)), &fitted.slice, &fitted.model).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let peak = peak_memory_bytes().unwrap_or(u64::MAX) as f64 / (1u64 << 30) as f64;
    let agents = fitted.slice.histories.len();
    check(
        secs < 240.0 && peak < 4.0 && out.log.len() > 900_000,
        format!(
            "{agents} agents, {} events, fit+simulate {secs:.1}s, peak {peak:.2} GiB, {} threads",
            out.log.len(),
            rayon::current_num_threads()
        ),
    )
}

// 9 -------------------------------------------------------------------------

fn pipeline_digests() -> Vec<String> {
    let mut d = Vec::new();
    let frozen = generate(&SynthConfig { n_users: 300, n_repos: 400, days: 44, seed: 91, ..SynthConfig::default() }).unwrap();
    let attach = generate(&SynthConfig {
        variant: Variant::Attachment,
        n_users: 300,
        n_repos: 400,
        days: 44,
        seed: 92,
        ..SynthConfig::default()
    })
    .unwrap();
    d.push(log_digest(&frozen.log));
    d.push(serde_json::to_string(&frozen.params).unwrap());
    d.push(log_digest(&attach.log));

    let w = frozen.params.window;
    let train = TimeWindow::new(w.start, w.start + 30 * DAY);
    let test = TimeWindow::new(train.end, w.end);
    let fit_cfg = FitConfig { new_entity: true, gf: GfParams { dim: 8, epochs: 10, ..GfParams::default() }, ..FitConfig::default() };
    for (log, meta, kind) in [
        (&frozen.log, &frozen.metadata, ModelKind::Null),
        (&frozen.log, &frozen.metadata, ModelKind::Baseline),
        (&frozen.log, &frozen.metadata, ModelKind::Pref),
        (&frozen.log, &frozen.metadata, ModelKind::Lpe),
        (&attach.log, &attach.metadata, ModelKind::Bayes),
    ] {
        let window = if kind == ModelKind::Null { test } else { train };
        let fitted = fit_model(kind, log, window, Some(meta), &fit_cfg).unwrap();
        let mut snap = Vec::new();
        write_snapshot(&mut snap, &fitted, window, "").unwrap();
        d.push(ghsim::sampling::sha256_hex(&snap));
        for k in [1, 4] {
            let out = run(&SimulationConfig::new(test, 7, k), &fitted.slice, &fitted.model).unwrap();
            d.push(log_digest(&out.log));
            let report = evaluate(&out.log, &log.restrict(test), &EvalConfig::new(test).with_metadata(meta));
            d.push(report.to_json().unwrap());
        }
    }
    let slice = build_slice(&frozen.log, train, None).unwrap();
    d.push(format!("{:?}", partition_graph(&InteractionGraph::from_slice(&slice), 4, 3).unwrap()));
    d
}

fn determinism() -> Outcome {
    let runs: Vec<Vec<String>> = (0..3).map(|_| pipeline_digests()).collect();
    let same = runs.windows(2).all(|p| p[0] == p[1]);
    check(same, format!("{} stage outputs identical across 3 runs: {same}", runs[0].len()))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("null-model identity", null_identity),
        ("stationary-fit consistency", stationary_consistency),
        ("bayesian round-trip", bayesian_round_trip),
        ("embedding suite", embedding_suite),
        ("s3d planted recovery", s3d_recovery),
        ("metric correctness", metric_correctness),
        ("partitioner quality", partition_quality),
        ("scale proxy", scale_proxy),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        let line = match &outcome {
            Ok(detail) => format!("PASS {} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed.push(i + 1);
                format!("FAIL {} {name}: {detail} [{secs:.1}s]", i + 1)
            }
        };
        // straight to the stream so the lines show without --nocapture
        writeln!(std::io::stderr(), "{line}").unwrap();
    }
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
