//! Exact rational values in `[0, 1]` and friends.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

/// Exact rational number, always printed as `P/Q` in lowest terms.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Frac(Ratio<i64>);

impl Frac {
    pub const ZERO: Frac = Frac(Ratio::new_raw(0, 1));
    pub const ONE: Frac = Frac(Ratio::new_raw(1, 1));

    /// Panics on a zero denominator.
    pub fn new(numer: i64, denom: i64) -> Self {
        Frac(Ratio::new(numer, denom))
    }

    pub fn from_int(v: i64) -> Self {
        Frac(Ratio::from_integer(v))
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn abs_diff(self, other: Frac) -> Frac {
        if self >= other {
            self - other
        } else {
            other - self
        }
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    /// Integer value if the fraction is whole.
    pub fn to_integer(&self) -> Option<i64> {
        self.is_integer().then(|| self.numer())
    }

    pub fn ratio(&self) -> Ratio<i64> {
        self.0
    }
}

impl std::ops::Add for Frac {
    type Output = Frac;
    fn add(self, rhs: Frac) -> Frac {
        Frac(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Frac {
    type Output = Frac;
    fn sub(self, rhs: Frac) -> Frac {
        Frac(self.0 - rhs.0)
    }
}

impl std::ops::Mul for Frac {
    type Output = Frac;
    fn mul(self, rhs: Frac) -> Frac {
        Frac(self.0 * rhs.0)
    }
}

impl fmt::Display for Frac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl fmt::Debug for Frac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("not a rational of the form P/Q: {0:?}")]
pub struct ParseFracError(pub String);

impl FromStr for Frac {
    type Err = ParseFracError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseFracError(s.to_string());
        let s = s.trim();
        let (p, q) = match s.split_once('/') {
            Some((p, q)) => (p.trim(), q.trim()),
            None => (s, "1"),
        };
        let p: i64 = p.parse().map_err(|_| err())?;
        let q: i64 = q.parse().map_err(|_| err())?;
        if q == 0 {
            return Err(err());
        }
        Ok(Frac::new(p, q))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prints_lowest_terms() {
        assert_eq!(Frac::new(3, 9).to_string(), "1/3");
        assert_eq!(Frac::ZERO.to_string(), "0/1");
        assert_eq!(Frac::new(4, 4).to_string(), "1/1");
    }

    #[test]
    fn parses() {
        assert_eq!("2/6".parse::<Frac>().unwrap(), Frac::new(1, 3));
        assert_eq!("1".parse::<Frac>().unwrap(), Frac::ONE);
        assert!("1/0".parse::<Frac>().is_err());
        assert!("x".parse::<Frac>().is_err());
    }
}
