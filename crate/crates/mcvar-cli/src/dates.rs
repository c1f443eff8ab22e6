//! Minimal ISO-8601 calendar date handling: validation for input files and
//! sequence generation for simulated fixtures.

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Date {
    pub year: i32,
    pub month: u32,
    pub day: u32,
}

fn is_leap(year: i32) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

fn days_in_month(year: i32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            if is_leap(year) {
                29
            } else {
                28
            }
        }
        _ => 0,
    }
}

pub fn parse_date(s: &str) -> CliResult<Date> {
    let bad = || CliError::Data(format!("unparseable date: {s:?} (expected YYYY-MM-DD)"));
    let bytes = s.as_bytes();
    if bytes.len() != 10 || bytes[4] != b'-' || bytes[7] != b'-' {
        return Err(bad());
    }
    let year: i32 = s[0..4].parse().map_err(|_| bad())?;
    let month: u32 = s[5..7].parse().map_err(|_| bad())?;
    let day: u32 = s[8..10].parse().map_err(|_| bad())?;
    if !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month) {
        return Err(bad());
    }
    Ok(Date { year, month, day })
}

impl Date {
    pub fn next_day(self) -> Date {
        let mut d = self;
        d.day += 1;
        if d.day > days_in_month(d.year, d.month) {
            d.day = 1;
            d.month += 1;
            if d.month > 12 {
                d.month = 1;
                d.year += 1;
            }
        }
        d
    }

    pub fn to_string_iso(self) -> String {
        format!("{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

/// `count` consecutive calendar dates starting at `start`.
pub fn date_sequence(start: Date, count: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    for _ in 0..count {
        out.push(d.to_string_iso());
        d = d.next_day();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_validates() {
        assert!(parse_date("2020-02-29").is_ok());
        assert!(parse_date("2021-02-29").is_err());
        assert!(parse_date("2021-13-01").is_err());
        assert!(parse_date("2021-00-01").is_err());
        assert!(parse_date("21-01-01").is_err());
        assert!(parse_date("2021-04-31").is_err());
    }

    #[test]
    fn rolls_over_months_and_years() {
        let d = parse_date("2019-12-31").unwrap();
        assert_eq!(d.next_day().to_string_iso(), "2020-01-01");
        let feb = parse_date("2020-02-28").unwrap();
        assert_eq!(feb.next_day().to_string_iso(), "2020-02-29");
    }

    #[test]
    fn sequences_are_sorted_iso_strings() {
        let seq = date_sequence(parse_date("2015-12-28").unwrap(), 8);
        let mut sorted = seq.clone();
        sorted.sort();
        assert_eq!(seq, sorted);
        assert_eq!(seq.last().unwrap(), "2016-01-04");
    }
}
