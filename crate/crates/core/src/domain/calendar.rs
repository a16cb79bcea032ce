use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Calendar quarter, e.g. `1979Q2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Quarter {
    year: i32,
    q: u8,
}

impl Quarter {
    pub fn new(year: i32, q: u8) -> Result<Self> {
        if !(1..=4).contains(&q) {
            return Err(Error::invariant(format!("quarter {q} not in 1..=4")));
        }
        Ok(Self { year, q })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn quarter(self) -> u8 {
        self.q
    }

    /// Quarters since year 0 Q1.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 4 + (self.q as i64 - 1)
    }

    pub fn from_ordinal(ord: i64) -> Self {
        Self {
            year: ord.div_euclid(4) as i32,
            q: (ord.rem_euclid(4) + 1) as u8,
        }
    }

    pub fn offset(self, n: i64) -> Self {
        Self::from_ordinal(self.ordinal() + n)
    }

    /// Number of quarters from `self` to `other`, inclusive of both ends.
    pub fn span_to(self, other: Quarter) -> usize {
        (other.ordinal() - self.ordinal() + 1).max(0) as usize
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year, self.q)
    }
}

impl FromStr for Quarter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::invariant(format!("malformed quarter {s:?}, expected e.g. 1979Q2"));
        let pos = s.find(['Q', 'q']).ok_or_else(bad)?;
        let year: i32 = s[..pos].parse().map_err(|_| bad())?;
        let q: u8 = s[pos + 1..].parse().map_err(|_| bad())?;
        Quarter::new(year, q).map_err(|_| bad())
    }
}

impl TryFrom<String> for Quarter {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Quarter> for String {
    fn from(q: Quarter) -> String {
        q.to_string()
    }
}

/// Inclusive range of quarters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarterRange {
    pub first: Quarter,
    pub last: Quarter,
}

impl QuarterRange {
    pub fn new(first: Quarter, last: Quarter) -> Result<Self> {
        if last < first {
            return Err(Error::invariant(format!("empty quarter range {first}..{last}")));
        }
        Ok(Self { first, last })
    }

    pub fn len(&self) -> usize {
        self.first.span_to(self.last)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, q: Quarter) -> bool {
        self.first <= q && q <= self.last
    }

    pub fn index_of(&self, q: Quarter) -> Option<usize> {
        self.contains(q)
            .then(|| (q.ordinal() - self.first.ordinal()) as usize)
    }

    pub fn at(&self, idx: usize) -> Quarter {
        self.first.offset(idx as i64)
    }

    pub fn iter(&self) -> impl Iterator<Item = Quarter> + '_ {
        (0..self.len()).map(move |i| self.at(i))
    }
}

impl fmt::Display for QuarterRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.first, self.last)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let q: Quarter = "1979Q2".parse().unwrap();
        assert_eq!(q.year(), 1979);
        assert_eq!(q.quarter(), 2);
        assert_eq!(q.to_string(), "1979Q2");
        assert!("1979Q5".parse::<Quarter>().is_err());
        assert!("1979-2".parse::<Quarter>().is_err());
        assert!("".parse::<Quarter>().is_err());
    }

    #[test]
    fn training_window_length() {
        let a: Quarter = "1979Q2".parse().unwrap();
        let b: Quarter = "1989Q2".parse().unwrap();
        assert_eq!(a.span_to(b), 41);
        let full = QuarterRange::new(a, "2019Q4".parse().unwrap()).unwrap();
        assert_eq!(full.len(), 163);
    }

    #[test]
    fn ordinal_round_trip() {
        for ord in -9..40 {
            assert_eq!(Quarter::from_ordinal(ord).ordinal(), ord);
        }
        let q: Quarter = "2000Q4".parse().unwrap();
        assert_eq!(q.offset(1).to_string(), "2001Q1");
        assert_eq!(q.offset(-4).to_string(), "1999Q4");
    }
}
