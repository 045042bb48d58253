use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::SchemaError;

/// A multi-city trip with required stays and direct flights.
///
/// A flight day counts toward both cities, so consecutive stays share a day
/// and `total_days = Σ required_days − (cities − 1)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripInstance {
    pub id: String,
    pub cities: Vec<String>,
    pub required_days: BTreeMap<String, u32>,
    pub direct_flights: Vec<(String, String)>,
    pub total_days: u32,
}

impl TripInstance {
    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.cities.is_empty() {
            return Err(SchemaError::new("no cities"));
        }
        let names: BTreeSet<&String> = self.cities.iter().collect();
        if names.len() != self.cities.len() {
            return Err(SchemaError::new("duplicate city"));
        }
        let keys: BTreeSet<&String> = self.required_days.keys().collect();
        if keys != names {
            return Err(SchemaError::new("required_days keys differ from cities"));
        }
        if let Some((c, _)) = self.required_days.iter().find(|(_, &d)| d == 0) {
            return Err(SchemaError::new(format!("required_days for {c} must be positive")));
        }
        for (a, b) in &self.direct_flights {
            if !names.contains(a) || !names.contains(b) {
                return Err(SchemaError::new(format!("flight {a}-{b} names an unknown city")));
            }
        }
        let expected = self.required_days.values().sum::<u32>() + 1 - self.cities.len() as u32;
        if self.total_days != expected {
            return Err(SchemaError::new(format!(
                "total_days {} but stays imply {expected}",
                self.total_days
            )));
        }
        Ok(())
    }

    pub fn has_flight(&self, a: &str, b: &str) -> bool {
        self.direct_flights
            .iter()
            .any(|(x, y)| (x == a && y == b) || (x == b && y == a))
    }

    /// Every itinerary the verifier accepts, in city-permutation order.
    pub fn solutions(&self) -> Vec<Itinerary> {
        let mut out = Vec::new();
        let mut order: Vec<usize> = (0..self.cities.len()).collect();
        permute(&mut order, 0, &mut |perm| {
            let it = self.itinerary_for(perm);
            if trip_verify(self, &it).is_empty() {
                out.push(it);
            }
        });
        out
    }

    fn itinerary_for(&self, perm: &[usize]) -> Itinerary {
        let mut day = 1;
        let segments = perm
            .iter()
            .map(|&k| {
                let city = self.cities[k].clone();
                let len = self.required_days[&city];
                let seg = Segment {
                    city,
                    day_start: day,
                    day_end: day + len - 1,
                };
                day = seg.day_end;
                seg
            })
            .collect();
        Itinerary { segments }
    }
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub city: String,
    pub day_start: u32,
    pub day_end: u32,
}

/// Stays in visiting order, with 1-based inclusive day ranges.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Itinerary {
    pub segments: Vec<Segment>,
}

impl fmt::Display for Itinerary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, s) in self.segments.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "Day {}-{}: {}", s.day_start, s.day_end, s.city)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {reason}")]
pub struct TripParseError {
    pub line: usize,
    pub reason: String,
}

fn day_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^\s*day\s+(\d+)\s*[-–]\s*(\d+)\s*:\s*(.*?)\s*$").expect("regex")
    })
}

/// Parse `Day A-B: City` lines. Other lines are ignored unless they start
/// with "day", in which case they must be well formed.
pub fn trip_parse(text: &str) -> Result<Itinerary, TripParseError> {
    let mut segments = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let n = k + 1;
        let trimmed = line.trim_start();
        let looks_like_day = trimmed
            .get(..3)
            .is_some_and(|p| p.eq_ignore_ascii_case("day"));
        if !looks_like_day {
            continue;
        }
        let err = |reason: &str| TripParseError {
            line: n,
            reason: reason.to_string(),
        };
        let c = day_re()
            .captures(line)
            .ok_or_else(|| err("expected `Day A-B: City`"))?;
        let start: u32 = c[1].parse().map_err(|_| err("day out of range"))?;
        let end: u32 = c[2].parse().map_err(|_| err("day out of range"))?;
        if start == 0 {
            return Err(err("days are 1-based"));
        }
        if start > end {
            return Err(err("start day after end day"));
        }
        if c[3].is_empty() {
            return Err(err("missing city"));
        }
        segments.push(Segment {
            city: c[3].to_string(),
            day_start: start,
            day_end: end,
        });
    }
    if segments.is_empty() {
        return Err(TripParseError {
            line: 0,
            reason: "no `Day A-B: City` lines".into(),
        });
    }
    Ok(Itinerary { segments })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TripViolation {
    UnknownCity { city: String },
    CityMissing { city: String },
    CityRepeated { city: String },
    FlightMissing { from: String, to: String },
    DayGap { end: u32, next_start: u32 },
    DurationMismatch { city: String, required: u32, actual: u32 },
    SpanMismatch { first_day: u32, last_day: u32, total_days: u32 },
}

impl TripViolation {
    pub fn class(&self) -> &'static str {
        match self {
            TripViolation::UnknownCity { .. } => "unknown_city",
            TripViolation::CityMissing { .. } => "city_missing",
            TripViolation::CityRepeated { .. } => "city_repeated",
            TripViolation::FlightMissing { .. } => "flight_missing",
            TripViolation::DayGap { .. } => "day_gap",
            TripViolation::DurationMismatch { .. } => "duration_mismatch",
            TripViolation::SpanMismatch { .. } => "span_mismatch",
        }
    }
}

/// Every constraint the itinerary breaks; empty means accepted.
pub fn trip_verify(instance: &TripInstance, itinerary: &Itinerary) -> Vec<TripViolation> {
    let mut out = Vec::new();
    let segs = &itinerary.segments;

    let mut visits: HashMap<&str, usize> = HashMap::new();
    for s in segs {
        *visits.entry(s.city.as_str()).or_default() += 1;
    }
    for s in segs {
        if !instance.required_days.contains_key(&s.city) {
            out.push(TripViolation::UnknownCity { city: s.city.clone() });
        }
    }
    for c in &instance.cities {
        match visits.get(c.as_str()) {
            None => out.push(TripViolation::CityMissing { city: c.clone() }),
            Some(&n) if n > 1 => out.push(TripViolation::CityRepeated { city: c.clone() }),
            _ => {}
        }
    }

    for w in segs.windows(2) {
        if w[0].day_end != w[1].day_start {
            out.push(TripViolation::DayGap {
                end: w[0].day_end,
                next_start: w[1].day_start,
            });
        }
        if !instance.has_flight(&w[0].city, &w[1].city) {
            out.push(TripViolation::FlightMissing {
                from: w[0].city.clone(),
                to: w[1].city.clone(),
            });
        }
    }

    for s in segs {
        if let Some(&required) = instance.required_days.get(&s.city) {
            let actual = (s.day_end + 1).saturating_sub(s.day_start);
            if actual != required {
                out.push(TripViolation::DurationMismatch {
                    city: s.city.clone(),
                    required,
                    actual,
                });
            }
        }
    }

    if let (Some(first), Some(last)) = (segs.first(), segs.last()) {
        if first.day_start != 1 || last.day_end != instance.total_days {
            out.push(TripViolation::SpanMismatch {
                first_day: first.day_start,
                last_day: last.day_end,
                total_days: instance.total_days,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_city(flights: bool) -> TripInstance {
        TripInstance {
            id: "t".into(),
            cities: vec!["A".into(), "B".into()],
            required_days: [("A".to_string(), 3), ("B".to_string(), 3)].into(),
            direct_flights: if flights {
                vec![("A".into(), "B".into())]
            } else {
                vec![]
            },
            total_days: 5,
        }
    }

    #[test]
    fn parse_examples() {
        let it = trip_parse("Day 1-3: Paris\nDay 3-5: Rome").unwrap();
        assert_eq!(it.segments.len(), 2);
        assert_eq!(it.segments[1].city, "Rome");
        assert!(trip_parse("").is_err());
        assert_eq!(trip_parse("Day 2-1: Paris").unwrap_err().line, 1);
        let it = trip_parse("Plan:\n  day 1 - 3 :  Paris  \nDAY 3-5:Rome\nEnjoy").unwrap();
        assert_eq!(it.to_string(), "Day 1-3: Paris\nDay 3-5: Rome");
    }

    #[test]
    fn shared_day_convention() {
        let inst = two_city(true);
        inst.validate().unwrap();
        let ok = trip_parse("Day 1-3: A\nDay 3-5: B").unwrap();
        assert!(trip_verify(&inst, &ok).is_empty());

        let v = trip_verify(&two_city(false), &ok);
        assert_eq!(v, vec![TripViolation::FlightMissing { from: "A".into(), to: "B".into() }]);

        let gap = trip_parse("Day 1-3: A\nDay 4-6: B").unwrap();
        let classes: Vec<_> = trip_verify(&inst, &gap).iter().map(|v| v.class()).collect();
        assert!(classes.contains(&"day_gap"));
    }

    #[test]
    fn solutions_found() {
        let inst = two_city(true);
        assert_eq!(inst.solutions().len(), 2);
        assert!(two_city(false).solutions().is_empty());
    }

    #[test]
    fn validation() {
        let mut inst = two_city(true);
        inst.total_days = 6;
        assert!(inst.validate().is_err());
    }
}
