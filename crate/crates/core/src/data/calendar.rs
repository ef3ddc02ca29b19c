//! Local prevailing time: the wall clock skips one hour in spring and repeats one in autumn.

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calendar {
    /// US Eastern rules since 2007: clocks go forward at 02:00 on the second Sunday of
    /// March and back at 02:00 on the first Sunday of November.
    #[default]
    UsEastern,
    /// Timestamps without daylight saving (UTC or standard time all year).
    Fixed,
}

fn nth_sunday(year: i32, month: u32, n: u32) -> NaiveDate {
    let first = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    let offset = (7 - first.weekday().num_days_from_sunday()) % 7;
    first + Duration::days((offset + 7 * (n - 1)) as i64)
}

impl Calendar {
    /// First and last local dates of daylight saving time in `year`.
    pub fn dst_dates(self, year: i32) -> Option<(NaiveDate, NaiveDate)> {
        match self {
            Calendar::UsEastern => Some((nth_sunday(year, 3, 2), nth_sunday(year, 11, 1))),
            Calendar::Fixed => None,
        }
    }

    /// The wall-clock hour that does not exist on the spring-forward day.
    pub fn is_skipped(self, t: NaiveDateTime) -> bool {
        self.dst_dates(t.year()).is_some_and(|(start, _)| t.date() == start && t.hour() == 2)
    }

    /// The wall-clock hour that occurs twice on the fall-back day.
    pub fn is_repeated(self, t: NaiveDateTime) -> bool {
        self.dst_dates(t.year()).is_some_and(|(_, end)| t.date() == end && t.hour() == 1)
    }

    pub fn next_hour(self, t: NaiveDateTime) -> NaiveDateTime {
        let n = t + Duration::hours(1);
        if self.is_skipped(n) {
            n + Duration::hours(1)
        } else {
            n
        }
    }

    /// Wall-clock reading for an absolute hour given in standard time (no DST applied).
    pub fn from_standard(self, std: NaiveDateTime) -> NaiveDateTime {
        let Some((start, end)) = self.dst_dates(std.year()) else {
            return std;
        };
        // DST covers [start 02:00 standard, end 01:00 standard)
        let on = start.and_hms_opt(2, 0, 0).expect("valid time");
        let off = end.and_hms_opt(1, 0, 0).expect("valid time");
        if std >= on && std < off {
            std + Duration::hours(1)
        } else {
            std
        }
    }

    /// Distinct wall-clock hours from `first` 00:00 to `last` 23:00, both dates included.
    pub fn hours(self, first: NaiveDate, last: NaiveDate) -> Vec<NaiveDateTime> {
        let mut out = Vec::new();
        let mut t = first.and_hms_opt(0, 0, 0).expect("midnight");
        let end = last.and_hms_opt(23, 0, 0).expect("valid time");
        while t <= end {
            out.push(t);
            t = self.next_hour(t);
        }
        out
    }
}

/// `[mo, wd, hr]`: month 1..12, 1 on weekdays and 2 on weekends, wall-clock hour 0..23.
pub fn time_features(t: NaiveDateTime) -> [f64; 3] {
    let wd = match t.weekday() {
        Weekday::Sat | Weekday::Sun => 2.0,
        _ => 1.0,
    };
    [t.month() as f64, wd, t.hour() as f64]
}

pub fn is_weekend(t: NaiveDateTime) -> bool {
    matches!(t.weekday(), Weekday::Sat | Weekday::Sun)
}
