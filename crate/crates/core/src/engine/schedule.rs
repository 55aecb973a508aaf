//! Per-agent wake clocks: homogeneous Poisson arrivals at the user's
//! training rate, seeded from `(seed, user_id)`.

use std::collections::BTreeMap;

use rand_distr::{Distribution, Exp};

use crate::ingest::TrainingSlice;
use crate::sampling::{rng_for, SimRng};
use crate::types::{Timestamp, TimeWindow, DAY};

/// Streams the wake times of one agent inside a window.
#[derive(Debug, Clone)]
pub struct WakeClock {
    rng: SimRng,
    exp: Option<Exp<f64>>,
    /// Continuous time of the next arrival, seconds.
    at: f64,
    end: Timestamp,
}

impl WakeClock {
    /// `rate_per_day` events per day over `window`.
    pub fn new(seed: u64, user_id: &str, rate_per_day: f64, window: TimeWindow) -> Self {
        let rng = rng_for(seed, &["wake", user_id]);
        let exp = (rate_per_day > 0.0 && rate_per_day.is_finite())
            .then(|| Exp::new(rate_per_day / DAY as f64).expect("positive rate"));
        let mut c = WakeClock { rng, exp, at: window.start as f64, end: window.end };
        c.advance();
        c
    }

    fn advance(&mut self) {
        match &self.exp {
            Some(e) => self.at += e.sample(&mut self.rng),
            None => self.at = f64::INFINITY,
        }
    }

    /// Next wake time, or `None` once past the window end.
    pub fn peek(&self) -> Option<Timestamp> {
        (self.at < self.end as f64).then(|| self.at.floor() as Timestamp)
    }

    pub fn pop(&mut self) -> Option<Timestamp> {
        let t = self.peek()?;
        self.advance();
        Some(t)
    }
}

impl Iterator for WakeClock {
    type Item = Timestamp;

    fn next(&mut self) -> Option<Timestamp> {
        self.pop()
    }
}

/// Every wake time of every user with a history in `slice`, keyed by user.
pub fn schedule_agents(slice: &TrainingSlice, window: TimeWindow, seed: u64) -> BTreeMap<String, Vec<Timestamp>> {
    slice
        .histories
        .values()
        .map(|h| (h.user_id.clone(), WakeClock::new(seed, &h.user_id, h.rate, window).collect()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_never_wakes() {
        let w = TimeWindow::new(0, 28 * DAY);
        assert_eq!(WakeClock::new(1, "u", 0.0, w).count(), 0);
    }

    #[test]
    fn times_are_in_window_and_sorted() {
        let w = TimeWindow::new(1000, 1000 + 5 * DAY);
        let t: Vec<Timestamp> = WakeClock::new(3, "u", 40.0, w).collect();
        assert!(t.iter().all(|&x| w.contains(x)));
        assert!(t.windows(2).all(|p| p[0] <= p[1]));
        assert_eq!(t, WakeClock::new(3, "u", 40.0, w).collect::<Vec<_>>());
        assert_ne!(t, WakeClock::new(3, "v", 40.0, w).collect::<Vec<_>>());
    }
}
