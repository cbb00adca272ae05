use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Histogram horizon, seconds.
pub const HIST_HORIZON_S: f64 = 20.0;
/// One bin per second over the horizon.
pub const HIST_BINS: usize = 20;

/// Rolling BPM history in 1 s buckets. Bucket `k` covers `[k, k + 1)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HistogramState {
    buckets: VecDeque<(i64, f64)>,
}

impl HistogramState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    /// Occupied buckets as (bucket start seconds, bpm), oldest first.
    pub fn buckets(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.buckets.iter().map(|&(k, bpm)| (k as f64, bpm))
    }

    pub fn newest_bucket(&self) -> Option<f64> {
        self.buckets.back().map(|&(k, _)| k as f64)
    }

    /// Places `bpm` in the bucket containing `t`, overwriting an earlier
    /// value there, and evicts buckets more than 19 s older than it.
    pub fn push_bpm(&mut self, t: f64, bpm: f64) -> Result<()> {
        if !t.is_finite() || !bpm.is_finite() {
            return Err(Error::Precondition(format!("non-finite histogram sample ({t}, {bpm})")));
        }
        let k = t.floor() as i64;
        match self.buckets.back_mut() {
            Some((newest, _)) if k < *newest => {
                return Err(Error::TimeRegression(format!(
                    "sample at {t} s precedes newest bucket at {newest} s"
                )));
            }
            Some((newest, value)) if k == *newest => *value = bpm,
            _ => self.buckets.push_back((k, bpm)),
        }
        let oldest_kept = k - (HIST_BINS as i64 - 1);
        while self.buckets.front().is_some_and(|&(b, _)| b < oldest_kept) {
            self.buckets.pop_front();
        }
        Ok(())
    }

    /// The 20 bins ending at the bucket containing `now`, oldest first,
    /// `None` where no sample landed.
    pub fn bins_at(&self, now: f64) -> Vec<Option<f64>> {
        let last = now.floor() as i64;
        let first = last - (HIST_BINS as i64 - 1);
        let mut bins = vec![None; HIST_BINS];
        for &(k, bpm) in &self.buckets {
            if (first..=last).contains(&k) {
                bins[(k - first) as usize] = Some(bpm);
            }
        }
        bins
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_insert() {
        let mut h = HistogramState::new();
        h.push_bpm(5.0, 70.0).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h.newest_bucket(), Some(5.0));
    }

    #[test]
    fn eviction_after_25_pushes() {
        let mut h = HistogramState::new();
        for i in 0..25 {
            h.push_bpm(i as f64, 60.0 + i as f64).unwrap();
        }
        assert_eq!(h.len(), 20);
        let (oldest, bpm) = h.buckets().next().unwrap();
        assert_eq!(oldest, 24.0 - 19.0);
        assert_eq!(bpm, 65.0);
        let bins = h.bins_at(24.0);
        assert!(bins.iter().all(Option::is_some));
        assert_eq!(bins[19], Some(84.0));
    }

    #[test]
    fn same_second_overwrites() {
        let mut h = HistogramState::new();
        h.push_bpm(3.2, 70.0).unwrap();
        h.push_bpm(3.7, 75.0).unwrap();
        assert_eq!(h.buckets().collect::<Vec<_>>(), vec![(3.0, 75.0)]);
    }

    #[test]
    fn regression_is_an_error() {
        let mut h = HistogramState::new();
        h.push_bpm(10.0, 70.0).unwrap();
        assert!(matches!(h.push_bpm(9.5, 70.0), Err(Error::TimeRegression(_))));
        // same bucket, earlier instant: allowed
        h.push_bpm(10.9, 71.0).unwrap();
        h.push_bpm(10.1, 72.0).unwrap();
    }

    #[test]
    fn bins_window_follows_clock() {
        let mut h = HistogramState::new();
        h.push_bpm(0.5, 70.0).unwrap();
        h.push_bpm(1.5, 71.0).unwrap();
        let bins = h.bins_at(1.9);
        assert_eq!(bins[18], Some(70.0));
        assert_eq!(bins[19], Some(71.0));
        assert!(bins[..18].iter().all(Option::is_none));
        // once the clock runs past the horizon the stale data drops out
        assert!(h.bins_at(21.0).iter().all(Option::is_none));
        assert_eq!(h.bins_at(20.0)[0], Some(71.0));
    }

    proptest! {
        #[test]
        fn never_older_than_horizon(
            steps in prop::collection::vec((0.0f64..6.0, 40.0f64..200.0), 1..120),
        ) {
            let mut h = HistogramState::new();
            let mut t = 0.0;
            for (dt, bpm) in steps {
                t += dt;
                h.push_bpm(t, bpm).unwrap();
                let newest = h.newest_bucket().unwrap();
                prop_assert!(newest <= t);
                prop_assert!(h.len() <= HIST_BINS);
                let mut prev = f64::MIN;
                for (k, _) in h.buckets() {
                    prop_assert!(k > prev);
                    prop_assert!(t - k <= HIST_HORIZON_S);
                    prop_assert!(newest - k < HIST_HORIZON_S);
                    prev = k;
                }
            }
        }
    }
}
