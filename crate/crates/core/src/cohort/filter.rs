use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristics::{Heuristic, SegmentQCRecord};
use crate::volume::Laterality;

/// Tri-state constraint on one heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Requirement {
    Pass,
    Fail,
    Any,
}

impl FromStr for Requirement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pass" => Ok(Requirement::Pass),
            "fail" => Ok(Requirement::Fail),
            "any" => Ok(Requirement::Any),
            other => Err(Error::Config(format!("expected pass|fail|any, got {other:?}"))),
        }
    }
}

/// Record selection by identity and heuristic outcomes.
///
/// A laterality check that did not apply counts as a pass when
/// `na_laterality_as_pass` is set (the default): it satisfies
/// `require_pass` and never satisfies `require_fail`. When unset it behaves
/// as a failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FilterSpec {
    pub structure: Option<String>,
    pub laterality: Option<Laterality>,
    pub require_pass: BTreeSet<Heuristic>,
    pub require_fail: BTreeSet<Heuristic>,
    pub na_laterality_as_pass: bool,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            structure: None,
            laterality: None,
            require_pass: BTreeSet::new(),
            require_fail: BTreeSet::new(),
            na_laterality_as_pass: true,
        }
    }
}

impl FilterSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pass(h: Heuristic) -> Self {
        Self::new().with(h, Requirement::Pass).expect("single constraint")
    }

    pub fn structure(mut self, s: impl Into<String>) -> Self {
        self.structure = Some(s.into());
        self
    }

    pub fn laterality(mut self, l: Laterality) -> Self {
        self.laterality = Some(l);
        self
    }

    /// Adds a heuristic constraint; a contradicting constraint is an error.
    pub fn with(mut self, h: Heuristic, req: Requirement) -> Result<Self> {
        let (mine, other) = match req {
            Requirement::Any => return Ok(self),
            Requirement::Pass => (&mut self.require_pass, &self.require_fail),
            Requirement::Fail => (&mut self.require_fail, &self.require_pass),
        };
        if other.contains(&h) {
            return Err(Error::Config(format!("{h} required to both pass and fail")));
        }
        mine.insert(h);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        match self.require_pass.intersection(&self.require_fail).next() {
            Some(h) => Err(Error::Config(format!("{h} required to both pass and fail"))),
            None => Ok(()),
        }
    }

    /// Conjunction of two filters. Conflicting identity fields or heuristic
    /// requirements yield an error.
    pub fn and(&self, other: &FilterSpec) -> Result<FilterSpec> {
        let merge = |a: &Option<String>, b: &Option<String>| match (a, b) {
            (Some(x), Some(y)) if x != y => Err(Error::Config(format!("structures {x:?} and {y:?} conflict"))),
            (Some(x), _) | (None, Some(x)) => Ok(Some(x.clone())),
            (None, None) => Ok(None),
        };
        let structure = merge(&self.structure, &other.structure)?;
        let laterality = match (self.laterality, other.laterality) {
            (Some(x), Some(y)) if x != y => {
                return Err(Error::Config(format!("lateralities {x} and {y} conflict")))
            }
            (a, b) => a.or(b),
        };
        let out = FilterSpec {
            structure,
            laterality,
            require_pass: self.require_pass.union(&other.require_pass).copied().collect(),
            require_fail: self.require_fail.union(&other.require_fail).copied().collect(),
            na_laterality_as_pass: self.merged_na_policy(other),
        };
        out.validate()?;
        Ok(out)
    }

    /// The NA policy only matters for a side that constrains laterality. When
    /// both do, an NA record must satisfy both requirements: a pass needs both
    /// policies to count it as a pass, a fail needs either to count it as a
    /// failure. Mixed pass/fail is rejected by `validate`.
    fn merged_na_policy(&self, other: &FilterSpec) -> bool {
        let constraint = |f: &FilterSpec| {
            if f.require_pass.contains(&Heuristic::Laterality) {
                Some(true)
            } else if f.require_fail.contains(&Heuristic::Laterality) {
                Some(false)
            } else {
                None
            }
        };
        match (constraint(self), constraint(other)) {
            (None, None) => self.na_laterality_as_pass && other.na_laterality_as_pass,
            (Some(_), None) => self.na_laterality_as_pass,
            (None, Some(_)) => other.na_laterality_as_pass,
            (Some(false), Some(false)) => self.na_laterality_as_pass || other.na_laterality_as_pass,
            _ => self.na_laterality_as_pass && other.na_laterality_as_pass,
        }
    }

    pub fn has_heuristic_constraints(&self) -> bool {
        !(self.require_pass.is_empty() && self.require_fail.is_empty())
    }

    /// The same filter without its heuristic constraints.
    pub fn identity_only(&self) -> FilterSpec {
        FilterSpec {
            structure: self.structure.clone(),
            laterality: self.laterality,
            ..FilterSpec::default()
        }
    }

    fn effective_pass(&self, r: &SegmentQCRecord, h: Heuristic) -> bool {
        r.outcome(h).unwrap_or(self.na_laterality_as_pass)
    }

    pub fn matches(&self, r: &SegmentQCRecord) -> bool {
        if self.structure.as_deref().is_some_and(|s| s != r.structure) {
            return false;
        }
        if self.laterality.is_some_and(|l| l != r.laterality) {
            return false;
        }
        self.require_pass.iter().all(|&h| self.effective_pass(r, h))
            && self.require_fail.iter().all(|&h| !self.effective_pass(r, h))
    }
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = Heuristic::ALL
            .iter()
            .filter_map(|h| {
                if self.require_pass.contains(h) {
                    Some(format!("{h}=pass"))
                } else if self.require_fail.contains(h) {
                    Some(format!("{h}=fail"))
                } else {
                    None
                }
            })
            .collect();
        f.write_str(&parts.join(","))
    }
}

/// Parses a comma list such as `completeness=pass,connected=fail`.
pub fn parse_heuristic_filters(s: &str) -> Result<FilterSpec> {
    let mut spec = FilterSpec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("filter {item:?} is not key=value")))?;
        let h: Heuristic = key.trim().parse()?;
        let req: Requirement = value.trim().parse()?;
        spec = spec.with(h, req)?;
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_filters() {
        let f = parse_heuristic_filters("completeness=pass, connected=fail,minVolume=any").unwrap();
        assert!(f.require_pass.contains(&Heuristic::Completeness));
        assert!(f.require_fail.contains(&Heuristic::Connected));
        assert!(!f.require_pass.contains(&Heuristic::MinVolume));
        assert_eq!(f.to_string(), "completeness=pass,connected=fail");
        assert!(parse_heuristic_filters("").unwrap() == FilterSpec::new());
    }

    #[test]
    fn contradictions_rejected() {
        assert!(parse_heuristic_filters("completeness=pass,completeness=fail").is_err());
        assert!(parse_heuristic_filters("completeness=maybe").is_err());
        assert!(parse_heuristic_filters("volume=pass").is_err());
        assert!(parse_heuristic_filters("completeness").is_err());
        let a = FilterSpec::pass(Heuristic::Connected);
        let b = FilterSpec::new().with(Heuristic::Connected, Requirement::Fail).unwrap();
        assert!(a.and(&b).is_err());
        assert!(FilterSpec::new().structure("a").and(&FilterSpec::new().structure("b")).is_err());
    }
}
