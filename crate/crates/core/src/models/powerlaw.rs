//! Discrete power laws: Hurwitz zeta, maximum-likelihood exponent fits with
//! the lower cutoff chosen by Kolmogorov-Smirnov distance, an exact
//! inverse-CDF sampler and the rank-form sampler used for popularity.

use rand::Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BERNOULLI_OVER_FACTORIAL: [f64; 6] = [
    1.0 / 6.0 / 2.0,
    -1.0 / 30.0 / 24.0,
    1.0 / 42.0 / 720.0,
    -1.0 / 30.0 / 40_320.0,
    5.0 / 66.0 / 3_628_800.0,
    -691.0 / 2730.0 / 479_001_600.0,
];

/// Hurwitz zeta `sum_{k>=0} (q + k)^-s` for `s > 1`, `q > 0`, by
/// Euler-Maclaurin summation.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    debug_assert!(s > 1.0 && q > 0.0);
    const N: usize = 12;
    let mut sum = 0.0;
    for k in 0..N {
        sum += (q + k as f64).powf(-s);
    }
    let a = q + N as f64;
    sum += a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s);
    // rising factorial s (s+1) ... (s + 2j - 2) times a^(-s-2j+1)
    let mut fact = s;
    let mut pow = a.powf(-s - 1.0);
    for (j, c) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        sum += c * fact * pow;
        let m = 2.0 * j as f64;
        fact *= (s + m + 1.0) * (s + m + 2.0);
        pow /= a * a;
    }
    sum
}

/// Exponent and cutoff of a fitted discrete power law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub gamma: f64,
    pub xmin: u64,
    /// KS distance of the tail fit.
    pub ks: f64,
    /// Observations at or above `xmin`.
    pub n_tail: usize,
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// MLE exponent for discrete data known to follow a power law from `xmin`.
/// `sum_ln` is the sum of `ln x` over the `n` tail observations.
pub fn mle_exponent(n: usize, sum_ln: f64, xmin: u64) -> f64 {
    let q = xmin as f64;
    let ll = |a: f64| -(n as f64) * hurwitz_zeta(a, q).ln() - a * sum_ln;
    golden_max(ll, 1.000_5, 8.0, 1e-9)
}

/// Fits a discrete power law to positive integer data. Every distinct value
/// with at least `min_tail` observations at or above it is tried as the
/// cutoff; the one with the smallest KS distance wins.
pub fn fit_discrete(data: &[u64], min_tail: usize) -> Result<PowerLawFit> {
    let mut xs: Vec<u64> = data.iter().copied().filter(|&x| x >= 1).collect();
    if xs.len() < min_tail.max(2) {
        return Err(Error::InsufficientData(format!(
            "{} positive observations, need {}",
            xs.len(),
            min_tail.max(2)
        )));
    }
    xs.sort_unstable();
    // distinct values, first index of each, and suffix sums of ln x
    let mut uniq: Vec<(u64, usize)> = Vec::new();
    for (i, &x) in xs.iter().enumerate() {
        if uniq.last().map(|u| u.0) != Some(x) {
            uniq.push((x, i));
        }
    }
    let mut suffix_ln = vec![0.0; xs.len() + 1];
    for i in (0..xs.len()).rev() {
        suffix_ln[i] = suffix_ln[i + 1] + (xs[i] as f64).ln();
    }

    let mut best: Option<PowerLawFit> = None;
    for (ui, &(xmin, start)) in uniq.iter().enumerate() {
        let n = xs.len() - start;
        if n < min_tail.max(2) {
            break;
        }
        if uniq.len() - ui < 2 {
            break;
        }
        let gamma = mle_exponent(n, suffix_ln[start], xmin);
        let z0 = hurwitz_zeta(gamma, xmin as f64);
        let mut ks: f64 = 0.0;
        for (k, &(x, _)) in uniq[ui..].iter().enumerate() {
            let below = uniq.get(ui + k + 1).map(|u| u.1).unwrap_or(xs.len()) - start;
            let emp = below as f64 / n as f64;
            let model = 1.0 - hurwitz_zeta(gamma, x as f64 + 1.0) / z0;
            ks = ks.max((emp - model).abs());
        }
        if best.is_none_or(|b| ks < b.ks) {
            best = Some(PowerLawFit { gamma, xmin, ks, n_tail: n });
        }
    }
    best.ok_or_else(|| Error::InsufficientData("no admissible cutoff".into()))
}

/// Exact sample from the discrete power law `P(x) ~ x^-gamma`, `x >= xmin`.
pub fn sample_discrete<R: Rng + ?Sized>(rng: &mut R, gamma: f64, xmin: u64) -> u64 {
    const CAP: f64 = 1e15;
    let q = xmin as f64;
    let z0 = hurwitz_zeta(gamma, q);
    let u: f64 = 1.0 - rng.random::<f64>();
    let tail = |x: f64| hurwitz_zeta(gamma, x) / z0;
    // smallest x with P(X > x) < u
    let mut lo = q;
    if tail(lo + 1.0) < u {
        return xmin;
    }
    let mut hi = q + 1.0;
    while tail(hi + 1.0) >= u {
        lo = hi;
        hi = (hi * 2.0).min(CAP);
        if hi >= CAP {
            return CAP as u64;
        }
    }
    // invariant: tail(lo + 1) >= u > tail(hi + 1)
    while hi - lo > 1.0 {
        let mid = ((lo + hi) / 2.0).floor();
        if tail(mid + 1.0) >= u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RankPurpose {
    Watch,
    Fork,
    PullRequest,
}

/// Rank-form power law: the item at 1-based rank `k` is chosen with
/// probability proportional to `k^(-1/(gamma-1))`, which yields a degree
/// distribution with exponent `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawRank {
    pub gamma: f64,
    pub xmin: u64,
    pub purpose: RankPurpose,
}

impl PowerLawRank {
    pub fn new(gamma: f64, xmin: u64, purpose: RankPurpose) -> Result<Self> {
        if !(gamma > 1.0) || xmin < 1 {
            return Err(Error::InvalidArgument(format!(
                "power law needs gamma > 1 and xmin >= 1, got {gamma}, {xmin}"
            )));
        }
        Ok(PowerLawRank { gamma, xmin, purpose })
    }

    pub fn rank_exponent(&self) -> f64 {
        1.0 / (self.gamma - 1.0)
    }

    /// A 0-based rank in `0..n`.
    pub fn sample_rank<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(Error::EmptyRank);
        }
        let z = Zipf::new(n as f64, self.rank_exponent()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let k = z.sample(rng) as usize;
        Ok(k.clamp(1, n) - 1)
    }
}
