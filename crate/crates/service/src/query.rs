//! Query-string parsing for the `/api/v1` endpoints.
//!
//! Accepted parameters: `structure`, `laterality` (left|right|none),
//! `feature` (volumeMl), the tri-state heuristic filters `completeness`,
//! `connected`, `lateralityCheck`, `minVolume` (pass|fail|any), and
//! `filters`, a comma list in the CLI syntax. A parameter repeated with a
//! different value, an unknown parameter, or contradicting heuristic
//! requirements are rejected with the offending field named.

use std::collections::BTreeMap;

use segqc_core::cohort::{parse_heuristic_filters, FilterSpec, Requirement};
use segqc_core::{Heuristic, Laterality};

pub const FEATURES: [&str; 1] = ["volumeMl"];

const HEURISTIC_PARAMS: [(&str, Heuristic); 4] = [
    ("completeness", Heuristic::Completeness),
    ("connected", Heuristic::Connected),
    ("lateralityCheck", Heuristic::Laterality),
    ("minVolume", Heuristic::MinVolume),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryError {
    pub field: String,
    pub message: String,
}

impl QueryError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        QueryError {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiQuery {
    pub structure: Option<String>,
    pub laterality: Option<Laterality>,
    pub feature: String,
    /// Heuristic constraints only; identity lives in the fields above.
    pub heuristics: FilterSpec,
}

impl ApiQuery {
    /// Identity and heuristic constraints combined.
    pub fn filter(&self) -> FilterSpec {
        let mut f = self.heuristics.clone();
        f.structure = self.structure.clone();
        f.laterality = self.laterality;
        f
    }

    pub fn parse(raw: Option<&str>) -> Result<Self, QueryError> {
        let mut params: BTreeMap<String, String> = BTreeMap::new();
        for (k, v) in form_urlencoded::parse(raw.unwrap_or("").as_bytes()) {
            match params.get(k.as_ref()) {
                Some(prev) if *prev != v => {
                    return Err(QueryError::new(&k, format!("given twice with values {prev:?} and {v:?}")));
                }
                _ => {
                    params.insert(k.into_owned(), v.into_owned());
                }
            }
        }

        let mut q = ApiQuery {
            structure: None,
            laterality: None,
            feature: FEATURES[0].to_string(),
            heuristics: FilterSpec::new(),
        };
        for (key, value) in &params {
            match key.as_str() {
                "structure" => {
                    if value.is_empty() {
                        return Err(QueryError::new(key, "must not be empty"));
                    }
                    q.structure = Some(value.clone());
                }
                "laterality" => {
                    q.laterality = Some(
                        value
                            .parse()
                            .map_err(|_| QueryError::new(key, format!("expected left|right|none, got {value:?}")))?,
                    );
                }
                "feature" => {
                    if !FEATURES.contains(&value.as_str()) {
                        return Err(QueryError::new(key, format!("unsupported feature {value:?}")));
                    }
                    q.feature = value.clone();
                }
                "filters" => {
                    let f = parse_heuristic_filters(value).map_err(|e| QueryError::new(key, e.to_string()))?;
                    q.heuristics = q.heuristics.and(&f).map_err(|e| QueryError::new(key, e.to_string()))?;
                }
                _ => {
                    let Some((_, h)) = HEURISTIC_PARAMS.iter().find(|(name, _)| name == key) else {
                        return Err(QueryError::new(key, "unknown parameter"));
                    };
                    let req: Requirement = value
                        .parse()
                        .map_err(|_| QueryError::new(key, format!("expected pass|fail|any, got {value:?}")))?;
                    q.heuristics = q
                        .heuristics
                        .clone()
                        .with(*h, req)
                        .map_err(|e| QueryError::new(key, e.to_string()))?;
                }
            }
        }
        Ok(q)
    }
}
