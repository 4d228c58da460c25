use rand::Rng;
use serde::Serialize;

use super::stats::{clopper_pearson_radius, tv_distance, Marginal};
use super::HarnessError;

/// Fewest samples per world a Monte Carlo game accepts.
pub const MIN_TRIALS: usize = 100;

/// Confidence of the reported radius.
pub const CONFIDENCE: f64 = 0.99;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactEnumeration,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistinguisherReport {
    /// The rule that separated the worlds best.
    pub rule: String,
    pub advantage_estimate: f64,
    /// Samples per world; 0 for exact reports.
    pub trials: usize,
    pub method: Method,
    pub confidence_radius: f64,
    pub note: String,
}

/// A yes/no guess computed from one sample.
pub struct Rule<S> {
    pub name: String,
    decide: Box<dyn Fn(&S) -> bool + Send + Sync>,
}

impl<S> Rule<S> {
    pub fn new(name: impl Into<String>, decide: impl Fn(&S) -> bool + Send + Sync + 'static) -> Self {
        Rule {
            name: name.into(),
            decide: Box::new(decide),
        }
    }

    pub fn decide(&self, sample: &S) -> bool {
        (self.decide)(sample)
    }
}

/// Best advantage `|Pr_A[1] − Pr_B[1]|` of `rules` on existing samples.
/// The radius is a Bonferroni-corrected Clopper–Pearson bound on both
/// proportions, so the estimate minus the radius lower-bounds the true
/// advantage of the chosen rule.
pub fn play_on_samples<S>(a: &[S], b: &[S], rules: &[Rule<S>]) -> Result<DistinguisherReport, HarnessError> {
    let trials = a.len().min(b.len());
    if trials < MIN_TRIALS {
        return Err(HarnessError::TooFewTrials {
            got: trials,
            need: MIN_TRIALS,
        });
    }
    if rules.is_empty() {
        return Err(HarnessError::InvalidInput("no distinguishing rules given".into()));
    }
    let confidence = 1.0 - (1.0 - CONFIDENCE) / rules.len() as f64;
    let (a, b) = (&a[..trials], &b[..trials]);
    let mut best: Option<DistinguisherReport> = None;
    for rule in rules {
        let ka = a.iter().filter(|s| rule.decide(s)).count() as u64;
        let kb = b.iter().filter(|s| rule.decide(s)).count() as u64;
        let n = trials as u64;
        let advantage = (ka as f64 - kb as f64).abs() / trials as f64;
        let radius = clopper_pearson_radius(ka, n, confidence) + clopper_pearson_radius(kb, n, confidence);
        if best.as_ref().is_none_or(|r| advantage > r.advantage_estimate) {
            best = Some(DistinguisherReport {
                rule: rule.name.clone(),
                advantage_estimate: advantage,
                trials,
                method: Method::MonteCarlo,
                confidence_radius: radius,
                note: format!(
                    "best of {} scripted rules; a lower bound on the distinguishing advantage, not a certificate of indistinguishability",
                    rules.len()
                ),
            });
        }
    }
    Ok(best.expect("rules is not empty"))
}

/// Samples `trials` runs of each world and plays every rule on them.
pub fn distinguisher_game<S, R, A, B>(
    mut world_a: A,
    mut world_b: B,
    rules: &[Rule<S>],
    trials: usize,
    rng: &mut R,
) -> Result<DistinguisherReport, HarnessError>
where
    R: Rng + ?Sized,
    A: FnMut(&mut R) -> Result<S, HarnessError>,
    B: FnMut(&mut R) -> Result<S, HarnessError>,
{
    if trials < MIN_TRIALS {
        return Err(HarnessError::TooFewTrials {
            got: trials,
            need: MIN_TRIALS,
        });
    }
    let a = (0..trials).map(|_| world_a(rng)).collect::<Result<Vec<_>, _>>()?;
    let b = (0..trials).map(|_| world_b(rng)).collect::<Result<Vec<_>, _>>()?;
    play_on_samples(&a, &b, rules)
}

/// Largest number of values a compared marginal may take.
pub const MAX_MARGINAL_VALUES: usize = 8;

/// TV distance of one marginal between two samples, with the radius of
/// the subset-rule family whose best advantage equals it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarginalComparison {
    pub marginal: String,
    pub tv: f64,
    pub confidence_radius: f64,
}

impl MarginalComparison {
    /// TV minus radius; a value above `ε` shows the true distance exceeds `ε`
    /// at the reported confidence.
    pub fn excess(&self) -> f64 {
        self.tv - self.confidence_radius
    }
}

/// Compares every marginal of two samples. A marginal with `K` observed
/// values is played as the `2^K − 2` rules "value in S"; the best of
/// them has advantage exactly the TV distance, and the radius covers the
/// whole family.
pub fn compare_marginals<S>(
    marginals: &[Marginal<S>],
    a: &[S],
    b: &[S],
) -> Result<Vec<MarginalComparison>, HarnessError> {
    marginals
        .iter()
        .map(|m| {
            let pa: Vec<u64> = a.iter().map(|s| (m.project)(s)).collect();
            let pb: Vec<u64> = b.iter().map(|s| (m.project)(s)).collect();
            let mut keys: Vec<u64> = pa.iter().chain(&pb).copied().collect();
            keys.sort_unstable();
            keys.dedup();
            if keys.len() > MAX_MARGINAL_VALUES {
                return Err(HarnessError::InvalidInput(format!(
                    "marginal {} takes {} values, at most {MAX_MARGINAL_VALUES} are compared",
                    m.name,
                    keys.len()
                )));
            }
            let mut rules: Vec<Rule<u64>> = (1..(1u32 << keys.len()).saturating_sub(1))
                .map(|mask| {
                    let set: Vec<u64> = keys
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask >> i & 1 == 1)
                        .map(|(_, &k)| k)
                        .collect();
                    Rule::new(format!("{} in {set:?}", m.name), move |x: &u64| set.contains(x))
                })
                .collect();
            if rules.is_empty() {
                rules.push(Rule::new("constant", |_: &u64| false));
            }
            let report = play_on_samples(&pa, &pb, &rules)?;
            Ok(MarginalComparison {
                marginal: m.name.clone(),
                tv: tv_distance(&m.histogram(a), &m.histogram(b)),
                confidence_radius: report.confidence_radius,
            })
        })
        .collect()
}

/// Report for an exactly computed trace distance, which is the best
/// advantage of any measurement on one copy of the view.
pub fn exact_report(distance: f64) -> DistinguisherReport {
    DistinguisherReport {
        rule: "optimal measurement".into(),
        advantage_estimate: distance,
        trials: 0,
        method: Method::ExactEnumeration,
        confidence_radius: 0.0,
        note: "exact trace distance of the averaged views".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn coin(p: f64) -> impl FnMut(&mut ChaCha20Rng) -> Result<bool, HarnessError> {
        move |rng| Ok(rng.random_bool(p))
    }

    #[test]
    fn identical_worlds_have_small_advantage() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let rules = [Rule::new("heads", |s: &bool| *s)];
        let r = distinguisher_game(coin(0.5), coin(0.5), &rules, 5_000, &mut rng).unwrap();
        assert!(r.advantage_estimate <= r.confidence_radius, "{r:?}");
        assert_eq!(r.method, Method::MonteCarlo);
    }

    #[test]
    fn biased_world_is_detected() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let rules = [Rule::new("never", |_: &bool| false), Rule::new("heads", |s: &bool| *s)];
        let r = distinguisher_game(coin(0.8), coin(0.2), &rules, 2_000, &mut rng).unwrap();
        assert_eq!(r.rule, "heads");
        assert!((r.advantage_estimate - 0.6).abs() < r.confidence_radius, "{r:?}");
        assert!(r.advantage_estimate - r.confidence_radius > 0.5);
    }

    #[test]
    fn marginal_tv_matches_its_best_subset_rule() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let a: Vec<u64> = (0..4_000).map(|_| rng.random_range(0..4)).collect();
        let b: Vec<u64> = (0..4_000).map(|_| rng.random_range(0..4).min(2)).collect();
        let marginals = [Marginal::new("x", |x: &u64| *x)];
        let [c] = compare_marginals(&marginals, &a, &b).unwrap().try_into().unwrap();
        let rules: Vec<Rule<u64>> = vec![Rule::new("x = 3", |x: &u64| *x == 3)];
        let best = play_on_samples(&a, &b, &rules).unwrap();
        // The set {3} is one rule of the family, so it cannot beat the TV.
        assert!(c.tv >= best.advantage_estimate - 1e-12);
        assert!((c.tv - 0.25).abs() < 0.03, "{c:?}");
        assert!(c.excess() > 0.15, "{c:?}");
        let wide = [Marginal::new("x", |x: &u64| *x % 9)];
        let many: Vec<u64> = (0..200).collect();
        assert!(matches!(
            compare_marginals(&wide, &many, &many),
            Err(HarnessError::InvalidInput(_))
        ));
    }

    #[test]
    fn too_few_trials_are_refused() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let rules = [Rule::new("heads", |s: &bool| *s)];
        assert!(matches!(
            distinguisher_game(coin(0.5), coin(0.5), &rules, 99, &mut rng),
            Err(HarnessError::TooFewTrials { got: 99, need: 100 })
        ));
        assert_eq!(exact_report(0.25).advantage_estimate, 0.25);
    }
}
