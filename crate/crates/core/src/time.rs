//! Simulation clock units.
//!
//! Event timestamps are integer seconds since the scenario start. Day and
//! accounting-month boundaries are derived from them; an accounting month is
//! `hours_per_month` hours long (730 by default), not a calendar month.

/// Integer seconds since scenario start.
pub type SimTime = u64;

pub const SECOND: SimTime = 1;
pub const HOUR: SimTime = 3600;
pub const DAY: SimTime = 24 * HOUR;

pub fn from_hours(h: f64) -> SimTime {
    (h * HOUR as f64).round().max(0.0) as SimTime
}

pub fn from_days(d: f64) -> SimTime {
    (d * DAY as f64).round().max(0.0) as SimTime
}

pub fn to_hours(t: SimTime) -> f64 {
    t as f64 / HOUR as f64
}

pub fn to_days(t: SimTime) -> f64 {
    t as f64 / DAY as f64
}

pub fn day_of(t: SimTime) -> u32 {
    (t / DAY) as u32
}

/// Accounting month index of a timestamp.
pub fn month_of(t: SimTime, hours_per_month: f64) -> u32 {
    (to_hours(t) / hours_per_month).floor() as u32
}

/// Accounting month a simulation day belongs to, taken at the day's start.
pub fn month_of_day(day: u32, hours_per_month: f64) -> u32 {
    month_of(day as SimTime * DAY, hours_per_month)
}

/// Label for a simulation day, e.g. `D+0012`.
pub fn day_label(day: u32) -> String {
    format!("D+{day:04}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn month_boundaries_follow_accounting_month() {
        assert_eq!(month_of(0, 730.0), 0);
        assert_eq!(month_of(730 * HOUR - 1, 730.0), 0);
        assert_eq!(month_of(730 * HOUR, 730.0), 1);
        // day 30 starts at hour 720, still month 0; day 31 starts at 744
        assert_eq!(month_of_day(30, 730.0), 0);
        assert_eq!(month_of_day(31, 730.0), 1);
    }

    #[test]
    fn conversions() {
        assert_eq!(from_hours(1.5), 5400);
        assert_eq!(to_days(DAY * 3), 3.0);
        assert_eq!(day_label(7), "D+0007");
    }
}
