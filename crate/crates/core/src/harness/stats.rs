use std::collections::BTreeMap;

use statrs::distribution::{Beta, ContinuousCDF};

/// Counts of discrete observations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram<K: Ord> {
    counts: BTreeMap<K, u64>,
    total: u64,
}

impl<K: Ord> Default for Histogram<K> {
    fn default() -> Self {
        Histogram {
            counts: BTreeMap::new(),
            total: 0,
        }
    }
}

impl<K: Ord + Clone> Histogram<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, key: K) {
        *self.counts.entry(key).or_default() += 1;
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, key: &K) -> u64 {
        self.counts.get(key).copied().unwrap_or_default()
    }

    pub fn probability(&self, key: &K) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(key) as f64 / self.total as f64
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> {
        self.counts.keys()
    }

    pub fn distribution(&self) -> BTreeMap<K, f64> {
        self.counts.keys().map(|k| (k.clone(), self.probability(k))).collect()
    }
}

impl<K: Ord + Clone> FromIterator<K> for Histogram<K> {
    fn from_iter<I: IntoIterator<Item = K>>(iter: I) -> Self {
        let mut h = Histogram::new();
        for k in iter {
            h.add(k);
        }
        h
    }
}

/// Total variation distance between two empirical distributions.
pub fn tv_distance<K: Ord + Clone>(a: &Histogram<K>, b: &Histogram<K>) -> f64 {
    let mut keys: Vec<&K> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    0.5 * keys
        .into_iter()
        .map(|k| (a.probability(k) - b.probability(k)).abs())
        .sum::<f64>()
}

/// Total variation distance from an empirical distribution to an exact one.
pub fn tv_to_reference<K: Ord + Clone>(a: &Histogram<K>, reference: &BTreeMap<K, f64>) -> f64 {
    let mut keys: Vec<&K> = a.keys().chain(reference.keys()).collect();
    keys.sort();
    keys.dedup();
    0.5 * keys
        .into_iter()
        .map(|k| (a.probability(k) - reference.get(k).copied().unwrap_or_default()).abs())
        .sum::<f64>()
}

/// Exact two-sided Clopper–Pearson interval for a binomial proportion.
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(
        trials > 0 && successes <= trials,
        "need 0 <= successes <= trials, trials > 0"
    );
    let alpha = 1.0 - confidence;
    let (k, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0)
            .expect("positive shape")
            .inverse_cdf(alpha / 2.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(k + 1.0, n - k)
            .expect("positive shape")
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}

/// Largest distance from the point estimate to either interval end.
pub fn clopper_pearson_radius(successes: u64, trials: u64, confidence: f64) -> f64 {
    let p = successes as f64 / trials as f64;
    let (lo, hi) = clopper_pearson(successes, trials, confidence);
    (p - lo).max(hi - p)
}

/// A named low-cardinality projection of a sample.
pub struct Marginal<S> {
    pub name: String,
    pub project: Box<dyn Fn(&S) -> u64 + Send + Sync>,
}

impl<S> Marginal<S> {
    pub fn new(name: impl Into<String>, project: impl Fn(&S) -> u64 + Send + Sync + 'static) -> Self {
        Marginal {
            name: name.into(),
            project: Box::new(project),
        }
    }

    pub fn histogram<'a>(&self, samples: impl IntoIterator<Item = &'a S>) -> Histogram<u64>
    where
        S: 'a,
    {
        samples.into_iter().map(|s| (self.project)(s)).collect()
    }
}

/// TV distance of every marginal between two sample sets.
pub fn marginal_distances<S>(marginals: &[Marginal<S>], a: &[S], b: &[S]) -> Vec<(String, f64)> {
    marginals
        .iter()
        .map(|m| (m.name.clone(), tv_distance(&m.histogram(a), &m.histogram(b))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn tv_of_known_distributions() {
        let a: Histogram<u8> = [0, 0, 1, 1].into_iter().collect();
        let b: Histogram<u8> = [0, 0, 0, 2].into_iter().collect();
        // |1/2 − 3/4| + |1/2 − 0| + |0 − 1/4| = 1, halved.
        assert!((tv_distance(&a, &b) - 0.5).abs() < 1e-12);
        assert_eq!(tv_distance(&a, &a), 0.0);
        let uniform: BTreeMap<u8, f64> = [(0, 0.5), (1, 0.5)].into();
        assert_eq!(tv_to_reference(&a, &uniform), 0.0);
        assert!((tv_to_reference(&b, &uniform) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn clopper_pearson_matches_closed_forms() {
        // With k = 0 the upper end solves (1 − p)^n = α/2.
        let (lo, hi) = clopper_pearson(0, 100, 0.99);
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.005f64.powf(0.01))).abs() < 1e-9, "{hi}");
        let (lo, hi) = clopper_pearson(100, 100, 0.99);
        assert!((lo - 0.005f64.powf(0.01)).abs() < 1e-9);
        assert_eq!(hi, 1.0);
        let (lo, hi) = clopper_pearson(50, 100, 0.95);
        assert!(lo < 0.5 && hi > 0.5 && (0.5 - lo - (hi - 0.5)).abs() < 1e-9);
        assert!((lo - 0.3983).abs() < 1e-3 && (hi - 0.6017).abs() < 1e-3);
    }

    #[test]
    fn coverage_is_at_least_nominal() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let p = 0.3;
        let runs = 2_000;
        let mut covered = 0;
        for _ in 0..runs {
            let k = (0..200).filter(|_| rng.random_bool(p)).count() as u64;
            let (lo, hi) = clopper_pearson(k, 200, 0.9);
            covered += usize::from(lo <= p && p <= hi);
        }
        assert!(covered as f64 / runs as f64 >= 0.88, "{covered}");
    }

    #[test]
    fn marginals_project_samples() {
        let a = vec![(0u8, 1u8); 10];
        let b = vec![(0u8, 0u8); 10];
        let m = [
            Marginal::new("first", |s: &(u8, u8)| s.0 as u64),
            Marginal::new("second", |s: &(u8, u8)| s.1 as u64),
        ];
        let d = marginal_distances(&m, &a, &b);
        assert_eq!(d, vec![("first".to_string(), 0.0), ("second".to_string(), 1.0)]);
    }
}
