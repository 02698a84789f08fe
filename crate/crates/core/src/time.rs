//! Time refinement: maps a time phrase onto a [`TimeSpec`].
//!
//! Recognised phrase classes:
//!
//! | phrase                                   | result       |
//! |------------------------------------------|--------------|
//! | `always`, `at all times`, `every day`    | `Always`     |
//! | `[in] [any] N <unit> [period]`           | `Window`     |
//! | `[during] [<days>] from X to Y [on <days>]`, `between X to/and Y` | `Recurrence` |
//! | `[for] [the] next N <unit>`              | `Horizon`    |
//! | anything else                            | `Unknown`    |

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::text::normalize;

pub const SECONDS_PER_DAY: u32 = 86_400;

/// Set of weekdays, bit 0 = Monday.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct DaySet(u8);

pub const DAY_NAMES: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];
const DAY_FULL_NAMES: [&str; 7] = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"];

impl DaySet {
    pub const EMPTY: DaySet = DaySet(0);
    pub const ALL: DaySet = DaySet(0b111_1111);
    pub const WEEKDAYS: DaySet = DaySet(0b001_1111);
    pub const WEEKEND: DaySet = DaySet(0b110_0000);

    pub fn from_bits(bits: u8) -> Option<Self> {
        (bits <= Self::ALL.0).then_some(DaySet(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn single(day: usize) -> Self {
        DaySet(1 << day)
    }

    /// Inclusive range in Monday..Sunday order; wraps past Sunday.
    pub fn range(from: usize, to: usize) -> Self {
        let mut set = DaySet::EMPTY;
        let mut d = from;
        loop {
            set = set.union(DaySet::single(d));
            if d == to {
                return set;
            }
            d = (d + 1) % 7;
        }
    }

    pub fn union(self, other: DaySet) -> DaySet {
        DaySet(self.0 | other.0)
    }

    pub fn contains(self, day: usize) -> bool {
        self.0 & (1 << day) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn days(self) -> impl Iterator<Item = usize> {
        (0..7).filter(move |d| self.contains(*d))
    }

    /// Maximal runs of consecutive days, Monday first, no wrap-around.
    pub fn runs(self) -> Vec<(usize, usize)> {
        let mut runs = Vec::new();
        let mut d = 0;
        while d < 7 {
            if self.contains(d) {
                let start = d;
                while d + 1 < 7 && self.contains(d + 1) {
                    d += 1;
                }
                runs.push((start, d));
            }
            d += 1;
        }
        runs
    }

    /// English rendering for user-facing text.
    pub fn describe(self) -> String {
        match self {
            DaySet::ALL => "every day".into(),
            DaySet::WEEKDAYS => "weekdays".into(),
            DaySet::WEEKEND => "weekends".into(),
            _ => {
                let names: Vec<&str> = self.days().map(|d| DAY_FULL_NAMES[d]).collect();
                match names.as_slice() {
                    [] => String::new(),
                    [one] => format!("{one}s"),
                    [init @ .., last] => format!("{} and {last}", init.join(", ")),
                }
            }
        }
    }
}

/// Canonical compact form: `Mon-Fri`, `Mon+Wed`, `Mon-Tue+Sat`.
impl fmt::Display for DaySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .runs()
            .into_iter()
            .map(|(a, b)| {
                if a == b {
                    DAY_NAMES[a].to_string()
                } else {
                    format!("{}-{}", DAY_NAMES[a], DAY_NAMES[b])
                }
            })
            .collect();
        f.write_str(&parts.join("+"))
    }
}

impl fmt::Debug for DaySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DaySet({self})")
    }
}

impl Serialize for DaySet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.days().map(|d| DAY_NAMES[d]))
    }
}

impl<'de> Deserialize<'de> for DaySet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(d)?;
        let mut set = DaySet::EMPTY;
        for n in names {
            let idx = DAY_NAMES
                .iter()
                .position(|d| d.eq_ignore_ascii_case(&n))
                .ok_or_else(|| serde::de::Error::custom(format!("unknown day `{n}`")))?;
            set = set.union(DaySet::single(idx));
        }
        Ok(set)
    }
}

/// A daily time-of-day window active on a set of weekdays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Recurrence {
    pub days: DaySet,
    /// Seconds of day, inclusive.
    pub start: u32,
    /// Seconds of day, exclusive; always below 86400.
    pub end: u32,
}

impl Recurrence {
    pub fn new(days: DaySet, start: u32, end: u32) -> Option<Self> {
        (!days.is_empty() && start < end && end < SECONDS_PER_DAY).then_some(Self { days, start, end })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeSpec {
    Always,
    Window { duration: u64 },
    Recurrence(Recurrence),
    Horizon { duration: u64 },
    Unknown { raw: String },
}

impl TimeSpec {
    pub fn is_known(&self) -> bool {
        !matches!(self, TimeSpec::Unknown { .. })
    }
}

fn unit_seconds(word: &str) -> Option<u64> {
    let w = word.strip_suffix('s').filter(|w| w.len() > 1).unwrap_or(word);
    Some(match w {
        "second" | "sec" => 1,
        "minute" | "min" => 60,
        "hour" | "hr" | "h" => 3_600,
        "day" => 86_400,
        "week" | "wk" => 604_800,
        _ => return None,
    })
}

fn count_word(word: &str) -> Option<u64> {
    match word {
        "a" | "an" | "one" => Some(1),
        "two" => Some(2),
        "three" => Some(3),
        "four" => Some(4),
        "six" => Some(6),
        "eight" => Some(8),
        "twelve" => Some(12),
        "twenty-four" => Some(24),
        _ => word.parse().ok(),
    }
}

/// Parses `N unit` possibly written as `N-unit` or `Nunit` (`24h`).
fn parse_quantity(words: &[&str]) -> Option<(u64, usize)> {
    let first = *words.first()?;
    if let Some((n, u)) = first.split_once('-') {
        if let (Some(n), Some(u)) = (count_word(n), unit_seconds(u)) {
            return Some((n * u, 1));
        }
    }
    let digits = first.find(|c: char| !c.is_ascii_digit()).unwrap_or(first.len());
    if digits > 0 && digits < first.len() {
        if let (Ok(n), Some(u)) = (first[..digits].parse::<u64>(), unit_seconds(&first[digits..])) {
            return Some((n * u, 1));
        }
    }
    let n = count_word(first)?;
    let u = unit_seconds(words.get(1)?)?;
    Some((n * u, 2))
}

fn day_index(word: &str) -> Option<usize> {
    let w = word.trim_end_matches('s');
    let w = w.strip_suffix('\'').unwrap_or(w);
    DAY_FULL_NAMES
        .iter()
        .position(|d| d.eq_ignore_ascii_case(w) || d[..3].eq_ignore_ascii_case(w))
}

/// Parses a day expression occupying all of `words`.
fn parse_days(words: &[&str]) -> Option<DaySet> {
    match words {
        [] => None,
        ["weekdays" | "weekday" | "workdays" | "working", ..] if words.len() <= 2 => {
            (words.len() == 1 || words[1] == "days").then_some(DaySet::WEEKDAYS)
        }
        ["weekends" | "weekend"] => Some(DaySet::WEEKEND),
        ["daily" | "everyday"] | ["every", "day"] | ["each", "day"] => Some(DaySet::ALL),
        [a, "to" | "through" | "thru" | "-", b] => Some(DaySet::range(day_index(a)?, day_index(b)?)),
        [single] if single.contains('-') => {
            let (a, b) = single.split_once('-')?;
            Some(DaySet::range(day_index(a)?, day_index(b)?))
        }
        _ => {
            let mut set = DaySet::EMPTY;
            for w in words {
                let w = w.trim_end_matches(',');
                if matches!(w, "and" | "or" | "") {
                    continue;
                }
                set = set.union(DaySet::single(day_index(w)?));
            }
            (!set.is_empty()).then_some(set)
        }
    }
}

/// Parses a clock time occupying all of `words` into seconds of day.
fn parse_clock(words: &[&str]) -> Option<u32> {
    let joined = words.concat();
    let s = joined.replace('.', "");
    match s.as_str() {
        "noon" | "midday" => return Some(12 * 3_600),
        "midnight" => return Some(0),
        _ => {}
    }
    let (body, meridiem) = if let Some(b) = s.strip_suffix("am") {
        (b, Some(false))
    } else if let Some(b) = s.strip_suffix("pm") {
        (b, Some(true))
    } else {
        (s.as_str(), None)
    };
    let (h, m) = match body.split_once(':') {
        Some((h, m)) => (h.parse::<u32>().ok()?, m.parse::<u32>().ok()?),
        None => (body.parse::<u32>().ok()?, 0),
    };
    if m >= 60 {
        return None;
    }
    let h = match meridiem {
        Some(pm) => {
            if h == 0 || h > 12 {
                return None;
            }
            (h % 12) + if pm { 12 } else { 0 }
        }
        None if h < 24 => h,
        None => return None,
    };
    Some(h * 3_600 + m * 60)
}

/// Finds `X <sep> Y` where both sides are clock times.
fn parse_clock_range(words: &[&str]) -> Option<(u32, u32)> {
    (1..words.len()).find_map(|i| {
        if !matches!(words[i], "to" | "and" | "until" | "till" | "-" | "through") {
            return None;
        }
        Some((parse_clock(&words[..i])?, parse_clock(&words[i + 1..])?))
    })
}

fn refine_recurrence(words: &[&str]) -> Option<Recurrence> {
    let words = match words {
        ["during" | "on" | "every" | "in" | "at", rest @ ..] => rest,
        _ => words,
    };
    let kw = words.iter().position(|w| matches!(*w, "from" | "between"))?;
    let days_before = &words[..kw];
    let rest = &words[kw + 1..];
    // Optional trailing "on <days>" / "every <days>" / "<days>".
    let (clock_words, days_after) = match rest.iter().position(|w| matches!(*w, "on" | "every" | "during")) {
        Some(p) => (&rest[..p], Some(&rest[p + 1..])),
        None => (rest, None),
    };
    let (start, end) = parse_clock_range(clock_words)?;
    let days = match (days_before.is_empty(), days_after) {
        (true, None) => DaySet::ALL,
        (false, None) => parse_days(days_before)?,
        (true, Some(after)) => parse_days(after)?,
        (false, Some(_)) => return None,
    };
    Recurrence::new(days, start, end)
}

/// Maps a raw time phrase onto a [`TimeSpec`]. Never fails; phrases outside
/// the known classes come back as [`TimeSpec::Unknown`].
pub fn refine_time(raw: &str) -> TimeSpec {
    let norm = normalize(raw).replace(',', " ");
    let words: Vec<&str> = norm.split_whitespace().collect();
    let unknown = || TimeSpec::Unknown { raw: raw.to_string() };

    match words.as_slice() {
        []
        | ["always"]
        | ["at", "all", "times"]
        | ["all", "the", "time"]
        | ["anytime"]
        | ["at", "any", "time"]
        | ["daily"]
        | ["everyday"]
        | ["for" | "on", "every", "day"]
        | ["every", "day"]
        | ["each", "day"]
        | ["all", "day"] => return TimeSpec::Always,
        _ => {}
    }

    // Horizon: "[for|within|in|during] [the] next N unit"
    if let Some(p) = words.iter().position(|w| *w == "next") {
        let prefix_ok = words[..p]
            .iter()
            .all(|w| matches!(*w, "for" | "within" | "in" | "during" | "over" | "the"));
        if prefix_ok {
            return match parse_quantity(&words[p + 1..]) {
                Some((secs, used)) if secs > 0 && p + 1 + used == words.len() => TimeSpec::Horizon { duration: secs },
                _ => unknown(),
            };
        }
    }

    // Window: "[in|within|over|during] [any|every|each] N unit [period|window|interval]"
    {
        let mut i = 0;
        if matches!(words.get(i), Some(&("in" | "within" | "over" | "during" | "for"))) {
            i += 1;
        }
        if matches!(words.get(i), Some(&("any" | "every" | "each" | "a"))) {
            i += 1;
        }
        if let Some((secs, used)) = parse_quantity(&words[i..]) {
            let j = i + used;
            let tail_ok = matches!(&words[j..], [] | ["period" | "window" | "interval" | "periods"]);
            if tail_ok && secs > 0 {
                return TimeSpec::Window { duration: secs };
            }
        }
    }

    if let Some(r) = refine_recurrence(&words) {
        return TimeSpec::Recurrence(r);
    }
    unknown()
}
