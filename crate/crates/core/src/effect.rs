//! Effect index sets.
//!
//! An effect is a subset of covariate indices. Internally indices are
//! zero-based; the textual form is one-based to match the usual `{1,2}`
//! notation, so `Effect::from_str("1,2")` selects the first two covariates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A sorted, duplicate-free set of zero-based covariate indices.
///
/// The empty set is the intercept.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Effect(Vec<usize>);

impl Effect {
    pub fn intercept() -> Self {
        Effect(Vec::new())
    }

    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        let before = indices.len();
        indices.dedup();
        if indices.len() != before {
            return Err(Error::Spec(format!(
                "effect lists a covariate more than once: {:?}",
                indices.iter().map(|i| i + 1).collect::<Vec<_>>()
            )));
        }
        Ok(Effect(indices))
    }

    /// Builds an effect from one-based covariate numbers.
    pub fn from_one_based(numbers: &[usize]) -> Result<Self> {
        if numbers.contains(&0) {
            return Err(Error::Spec("covariate numbers are one-based".into()));
        }
        Effect::new(numbers.iter().map(|j| j - 1).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn is_intercept(&self) -> bool {
        self.0.is_empty()
    }

    /// Every subset of `{0..d}` with at most `max_order` elements, intercept included.
    pub fn all_up_to(d: usize, max_order: usize) -> Vec<Effect> {
        let mut out = vec![Effect::intercept()];
        for mask in 1u64..(1u64 << d) {
            if (mask.count_ones() as usize) <= max_order {
                let idx = (0..d).filter(|j| mask & (1 << j) != 0).collect();
                out.push(Effect(idx));
            }
        }
        out.sort_by(Effect::canonical_cmp);
        out
    }

    /// Ordering by size, then lexicographically.
    pub fn canonical_cmp(a: &Effect, b: &Effect) -> std::cmp::Ordering {
        a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0))
    }

    /// Picks this effect's coordinates out of a full covariate row.
    pub fn project(&self, row: &[f64]) -> Vec<f64> {
        self.0.iter().map(|&j| row[j]).collect()
    }
}

impl PartialOrd for Effect {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Effect {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        Effect::canonical_cmp(self, other)
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, j) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", j + 1)?;
        }
        write!(f, "}}")
    }
}

impl FromStr for Effect {
    type Err = Error;

    /// Accepts `1,2`, `{1,2}`, and `{}` / empty for the intercept.
    fn from_str(s: &str) -> Result<Self> {
        let body = s.trim().trim_start_matches('{').trim_end_matches('}').trim();
        if body.is_empty() {
            return Ok(Effect::intercept());
        }
        let numbers = body
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Spec(format!("bad covariate number `{}` in effect `{s}`", tok.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        Effect::from_one_based(&numbers)
    }
}

/// Parses `1;2;3;1,2` style effect lists. The intercept is always included.
pub fn parse_effect_list(s: &str) -> Result<Vec<Effect>> {
    let mut effects = vec![Effect::intercept()];
    for part in s.split(';') {
        if part.trim().is_empty() {
            continue;
        }
        let e: Effect = part.parse()?;
        if !effects.contains(&e) {
            effects.push(e);
        }
    }
    effects.sort();
    Ok(effects)
}

/// Inverse of [`parse_effect_list`], omitting the intercept.
pub fn format_effect_list(effects: &[Effect]) -> String {
    effects
        .iter()
        .filter(|e| !e.is_intercept())
        .map(|e| e.0.iter().map(|j| (j + 1).to_string()).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join(";")
}

impl Serialize for Effect {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Effect {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_is_one_based() {
        let e = Effect::new(vec![2, 0]).unwrap();
        assert_eq!(e.to_string(), "{1,3}");
        assert_eq!(Effect::intercept().to_string(), "{}");
    }

    #[test]
    fn parse_round_trip() {
        for s in ["{}", "{1}", "{2,3}", "{1,2,4}"] {
            let e: Effect = s.parse().unwrap();
            assert_eq!(e.to_string(), s);
        }
        assert_eq!("1,2".parse::<Effect>().unwrap(), Effect::new(vec![0, 1]).unwrap());
    }

    #[test]
    fn rejects_zero_and_duplicates() {
        assert!("0".parse::<Effect>().is_err());
        assert!("1,1".parse::<Effect>().is_err());
        assert!("x".parse::<Effect>().is_err());
    }

    #[test]
    fn effect_list_adds_intercept_and_sorts() {
        let list = parse_effect_list("1,2;3;1").unwrap();
        let shown: Vec<String> = list.iter().map(|e| e.to_string()).collect();
        assert_eq!(shown, ["{}", "{1}", "{3}", "{1,2}"]);
        assert_eq!(format_effect_list(&list), "1;3;1,2");
    }

    #[test]
    fn all_up_to_two_in_three_dimensions() {
        let all = Effect::all_up_to(3, 2);
        let shown: Vec<String> = all.iter().map(|e| e.to_string()).collect();
        assert_eq!(shown, ["{}", "{1}", "{2}", "{3}", "{1,2}", "{1,3}", "{2,3}"]);
    }
}
