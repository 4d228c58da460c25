use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::ops::{Add, AddAssign, BitXor, BitXorAssign, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

/// An angle `value · π/4`, stored as an integer modulo 8.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct Octant(u8);

impl Octant {
    pub const ZERO: Octant = Octant(0);
    /// π.
    pub const PI: Octant = Octant(4);

    pub fn new(value: i64) -> Self {
        Octant(value.rem_euclid(8) as u8)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn radians(self) -> f64 {
        f64::from(self.0) * FRAC_PI_4
    }

    /// `(-1)^bit · self`.
    pub fn flip_if(self, bit: Outcome) -> Self {
        if bit.is_one() {
            -self
        } else {
            self
        }
    }

    /// `bit · π`.
    pub fn pi_times(bit: Outcome) -> Self {
        if bit.is_one() {
            Octant::PI
        } else {
            Octant::ZERO
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Octant(rng.random_range(0..8))
    }

    pub fn all() -> impl Iterator<Item = Octant> {
        (0..8).map(Octant)
    }
}

impl TryFrom<i64> for Octant {
    type Error = String;

    fn try_from(value: i64) -> Result<Self, Self::Error> {
        if (0..8).contains(&value) {
            Ok(Octant(value as u8))
        } else {
            Err(format!("octant must be in 0..8, got {value}"))
        }
    }
}

impl From<Octant> for u8 {
    fn from(o: Octant) -> u8 {
        o.0
    }
}

impl fmt::Display for Octant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}π/4", self.0)
    }
}

impl Add for Octant {
    type Output = Octant;
    fn add(self, rhs: Octant) -> Octant {
        Octant((self.0 + rhs.0) % 8)
    }
}

impl AddAssign for Octant {
    fn add_assign(&mut self, rhs: Octant) {
        *self = *self + rhs;
    }
}

impl Sub for Octant {
    type Output = Octant;
    fn sub(self, rhs: Octant) -> Octant {
        Octant((self.0 + 8 - rhs.0) % 8)
    }
}

impl Neg for Octant {
    type Output = Octant;
    fn neg(self) -> Octant {
        Octant((8 - self.0) % 8)
    }
}

impl std::iter::Sum for Octant {
    fn sum<I: Iterator<Item = Octant>>(iter: I) -> Octant {
        iter.fold(Octant::ZERO, Add::add)
    }
}

/// A classical bit: a measurement outcome, a pad bit, or a share of one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Outcome(bool);

impl Outcome {
    pub const ZERO: Outcome = Outcome(false);
    pub const ONE: Outcome = Outcome(true);

    pub fn is_one(self) -> bool {
        self.0
    }

    pub fn value(self) -> u8 {
        u8::from(self.0)
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Outcome(rng.random())
    }

    pub fn both() -> [Outcome; 2] {
        [Outcome::ZERO, Outcome::ONE]
    }
}

impl From<bool> for Outcome {
    fn from(b: bool) -> Self {
        Outcome(b)
    }
}

impl TryFrom<u8> for Outcome {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Outcome::ZERO),
            1 => Ok(Outcome::ONE),
            _ => Err(format!("bit must be 0 or 1, got {v}")),
        }
    }
}

impl From<Outcome> for u8 {
    fn from(o: Outcome) -> u8 {
        o.value()
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl BitXor for Outcome {
    type Output = Outcome;
    fn bitxor(self, rhs: Outcome) -> Outcome {
        Outcome(self.0 ^ rhs.0)
    }
}

impl BitXorAssign for Outcome {
    fn bitxor_assign(&mut self, rhs: Outcome) {
        self.0 ^= rhs.0;
    }
}

/// XOR of all bits; empty input yields 0.
pub fn parity<I: IntoIterator<Item = Outcome>>(bits: I) -> Outcome {
    bits.into_iter().fold(Outcome::ZERO, BitXor::bitxor)
}
