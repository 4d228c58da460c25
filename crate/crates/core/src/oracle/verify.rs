use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{reconstruct, OracleError, SecretShare};
use crate::quantum::{Octant, Outcome};

/// Default number of copies per contribution.
pub const DEFAULT_COPIES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestedCopy {
    pub copy: usize,
    /// Reconstructed angle, or `None` if the shares were inconsistent.
    pub basis: Option<Octant>,
    pub outcome: Outcome,
}

impl TestedCopy {
    pub fn passed(&self) -> bool {
        self.basis.is_some() && !self.outcome.is_one()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verification {
    pub survivor: usize,
    pub tested: Vec<TestedCopy>,
}

impl Verification {
    pub fn accepted(&self) -> bool {
        self.tested.iter().all(TestedCopy::passed)
    }

    pub fn rejections(&self) -> usize {
        self.tested.iter().filter(|c| !c.passed()).count()
    }
}

/// Tests a client's `m` copies: one, chosen uniformly, survives untested;
/// each other copy's angle is reconstructed from its shares and the copy is
/// measured in that basis by `measure(copy, angle)`. The client passes iff
/// every tested copy yields outcome 0. Copies whose shares do not
/// reconstruct count as failures and are not measured.
pub fn verify_client<R, M>(
    copy_shares: &[Vec<SecretShare>],
    mut measure: M,
    rng: &mut R,
) -> Result<Verification, OracleError>
where
    R: Rng + ?Sized,
    M: FnMut(usize, Octant) -> Result<Outcome, OracleError>,
{
    let m = copy_shares.len();
    if m < 2 {
        return Err(OracleError::TooFewCopies(m));
    }
    let survivor = rng.random_range(0..m);
    let mut tested = Vec::with_capacity(m - 1);
    for (copy, shares) in copy_shares.iter().enumerate() {
        if copy == survivor {
            continue;
        }
        let basis = reconstruct(shares).ok().and_then(|v| v.angle());
        let outcome = match basis {
            Some(angle) => measure(copy, angle)?,
            None => Outcome::ONE,
        };
        tested.push(TestedCopy { copy, basis, outcome });
    }
    Ok(Verification { survivor, tested })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{share_secret, SecretTag};
    use crate::quantum::{Basis, PureState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn copies(angles: &[Octant], rng: &mut ChaCha20Rng) -> Vec<Vec<SecretShare>> {
        angles
            .iter()
            .enumerate()
            .map(|(copy, &a)| {
                share_secret(
                    SecretTag::CopyAngle {
                        node: 1,
                        contributor: 1,
                        copy,
                    },
                    a.into(),
                    3,
                    rng,
                )
                .unwrap()
            })
            .collect()
    }

    fn run(offset: Octant, m: usize, rng: &mut ChaCha20Rng) -> Verification {
        let angles: Vec<Octant> = (0..m).map(|_| Octant::random(rng)).collect();
        let shares = copies(&angles, rng);
        let sent: Vec<PureState> = angles.iter().map(|&a| PureState::plus(a + offset)).collect();
        let mut sampler = ChaCha20Rng::seed_from_u64(rng.random());
        verify_client(
            &shares,
            |copy, basis| Ok(sent[copy].measure(0, Basis::Rotated(basis), &mut sampler)?.0),
            rng,
        )
        .unwrap()
    }

    #[test]
    fn honest_client_always_passes() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..200 {
            let v = run(Octant::ZERO, 4, &mut rng);
            assert!(v.accepted());
            assert_eq!(v.tested.len(), 3);
            assert!(v.tested.iter().all(|c| c.copy != v.survivor));
        }
    }

    #[test]
    fn pi_deviation_always_fails() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for _ in 0..200 {
            let v = run(Octant::PI, 3, &mut rng);
            assert_eq!(v.rejections(), 2);
        }
    }

    #[test]
    fn eighth_turn_deviation_rejects_at_sin_squared_pi_over_8() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (mut rejected, mut tested) = (0usize, 0usize);
        for _ in 0..2_000 {
            let v = run(Octant::new(1), 6, &mut rng);
            rejected += v.rejections();
            tested += v.tested.len();
        }
        let rate = rejected as f64 / tested as f64;
        let target = (std::f64::consts::PI / 8.0).sin().powi(2);
        assert!((rate - target).abs() < 0.02, "rate {rate}");
    }

    #[test]
    fn survivor_is_uniform_and_bad_shares_fail() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let mut counts = [0usize; 4];
        for _ in 0..4_000 {
            counts[run(Octant::ZERO, 4, &mut rng).survivor] += 1;
        }
        assert!(counts.iter().all(|&c| (900..1100).contains(&c)), "{counts:?}");

        let mut shares = copies(&[Octant::ZERO, Octant::ZERO], &mut rng);
        shares[0][1].value = crate::oracle::SecretValue::Bit(Outcome::ZERO);
        shares[1][1].value = crate::oracle::SecretValue::Bit(Outcome::ZERO);
        let v = verify_client(&shares, |_, _| panic!("inconsistent copies are not measured"), &mut rng).unwrap();
        assert!(!v.accepted());
        assert!(matches!(
            verify_client(&shares[..1], |_, _| Ok(Outcome::ZERO), &mut rng),
            Err(OracleError::TooFewCopies(1))
        ));
    }
}
