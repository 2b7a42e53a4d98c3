//! Quarterly calendar dates.

use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A calendar quarter, ordered by `(year, quarter)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct QuarterDate {
    year: i32,
    quarter: u8,
}

impl QuarterDate {
    pub fn new(year: i32, quarter: u8) -> Result<Self> {
        if !(1..=4).contains(&quarter) {
            return Err(Error::ParseQuarter {
                token: format!("{year}Q{quarter}"),
            });
        }
        Ok(Self { year, quarter })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn quarter(self) -> u8 {
        self.quarter
    }

    /// Quarter containing a calendar month (1-12).
    pub fn from_month(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::ParseQuarter {
                token: format!("{year}-{month:02}"),
            });
        }
        Ok(Self {
            year,
            quarter: ((month - 1) / 3 + 1) as u8,
        })
    }

    /// Absolute quarter count, `year * 4 + (quarter - 1)`.
    pub fn ordinal(self) -> i64 {
        i64::from(self.year) * 4 + i64::from(self.quarter) - 1
    }

    pub fn from_ordinal(ordinal: i64) -> Self {
        let year = ordinal.div_euclid(4);
        let quarter = ordinal.rem_euclid(4) + 1;
        Self {
            year: year as i32,
            quarter: quarter as u8,
        }
    }

    pub fn add_quarters(self, n: i64) -> Self {
        Self::from_ordinal(self.ordinal() + n)
    }

    /// Signed number of quarters from `other` to `self`.
    pub fn quarters_since(self, other: QuarterDate) -> i64 {
        self.ordinal() - other.ordinal()
    }
}

impl Add<i64> for QuarterDate {
    type Output = QuarterDate;

    fn add(self, rhs: i64) -> QuarterDate {
        self.add_quarters(rhs)
    }
}

impl Sub for QuarterDate {
    type Output = i64;

    fn sub(self, rhs: QuarterDate) -> i64 {
        self.quarters_since(rhs)
    }
}

impl fmt::Display for QuarterDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year, self.quarter)
    }
}

/// Parses `<year>Q<digit>`, e.g. `1953Q2`.
pub fn parse_quarter(text: &str) -> Result<QuarterDate> {
    let err = || Error::ParseQuarter {
        token: text.to_string(),
    };
    let trimmed = text.trim();
    let (year, quarter) = trimmed
        .split_once(['Q', 'q'])
        .ok_or_else(err)?;
    if year.is_empty() || !year.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err());
    }
    if quarter.len() != 1 {
        return Err(err());
    }
    let year: i32 = year.parse().map_err(|_| err())?;
    let quarter: u8 = quarter.parse().map_err(|_| err())?;
    QuarterDate::new(year, quarter).map_err(|_| err())
}

impl FromStr for QuarterDate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_quarter(s)
    }
}

impl TryFrom<String> for QuarterDate {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        parse_quarter(&s)
    }
}

impl From<QuarterDate> for String {
    fn from(d: QuarterDate) -> String {
        d.to_string()
    }
}

/// Consecutive quarters starting at `start`.
pub fn calendar(start: QuarterDate, len: usize) -> Vec<QuarterDate> {
    (0..len as i64).map(|i| start + i).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_sample_dates() {
        assert_eq!(parse_quarter("1953Q2").unwrap(), QuarterDate::new(1953, 2).unwrap());
        assert_eq!(parse_quarter("2022Q4").unwrap(), QuarterDate::new(2022, 4).unwrap());
    }

    #[test]
    fn rejects_bad_quarters() {
        for bad in ["1953Q5", "1953Q0", "1953", "Q2", "19a3Q1", "1953Q12", ""] {
            match parse_quarter(bad) {
                Err(Error::ParseQuarter { token }) => assert_eq!(token, bad),
                other => panic!("{bad:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn quarter_arithmetic() {
        let d = parse_quarter("1953Q2").unwrap();
        assert_eq!((d + 11).to_string(), "1956Q1");
        assert_eq!((d + -2).to_string(), "1952Q4");
        let end = parse_quarter("2022Q4").unwrap();
        assert_eq!(end - d + 1, 279);
    }

    #[test]
    fn month_to_quarter() {
        assert_eq!(QuarterDate::from_month(1990, 3).unwrap().to_string(), "1990Q1");
        assert_eq!(QuarterDate::from_month(1990, 4).unwrap().to_string(), "1990Q2");
        assert!(QuarterDate::from_month(1990, 13).is_err());
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(year in 0i32..5000, q in 1u8..=4) {
            let d = QuarterDate::new(year, q).unwrap();
            prop_assert_eq!(parse_quarter(&d.to_string()).unwrap(), d);
        }

        #[test]
        fn addition_is_associative(ord in 0i64..20000, a in -500i64..500, b in -500i64..500) {
            let d = QuarterDate::from_ordinal(ord);
            prop_assert_eq!((d + a) + b, d + (a + b));
            prop_assert_eq!((d + a) - d, a);
        }

        #[test]
        fn ordering_matches_ordinal(x in 0i64..20000, y in 0i64..20000) {
            let (a, b) = (QuarterDate::from_ordinal(x), QuarterDate::from_ordinal(y));
            prop_assert_eq!(a.cmp(&b), x.cmp(&y));
        }
    }
}
