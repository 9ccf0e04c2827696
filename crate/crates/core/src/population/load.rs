use std::path::Path;

use tracing::warn;

use super::catalog;
use super::{CensusProfile, LoadWarning, PopulationError, SocialGraph, UserId};

const FIELDS: [&str; 10] = [
    "age",
    "workclass",
    "education",
    "marital_status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "hours_per_week",
    "native_country",
];

/// Column positions of the ten profile fields in the raw Adult layout
/// (which also carries fnlwgt, education-num, capital gain/loss, income).
const ADULT_FULL: [usize; 10] = [0, 1, 3, 5, 6, 7, 8, 9, 12, 13];
const ADULT_REDUCED: [usize; 10] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];

fn read(path: &Path) -> Result<String, PopulationError> {
    std::fs::read_to_string(path).map_err(|source| PopulationError::Io { path: path.display().to_string(), source })
}

pub fn load_census_profiles(path: &Path) -> Result<(Vec<CensusProfile>, Vec<LoadWarning>), PopulationError> {
    parse_census(&read(path)?)
}

fn normalize_header(h: &str) -> String {
    h.trim().to_ascii_lowercase().replace(['-', ' ', '.'], "_")
}

/// Parses Adult-format census rows. A header row is detected when the first
/// field of the first record is not an integer; headerless files are read by
/// column count (15/14 raw Adult columns, or the 10 profile columns).
pub fn parse_census(text: &str) -> Result<(Vec<CensusProfile>, Vec<LoadWarning>), PopulationError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'|'))
        .from_reader(text.as_bytes());

    let mut profiles = Vec::new();
    let mut warnings = Vec::new();
    let mut columns: Option<[usize; 10]> = None;
    let mut first = true;

    for record in reader.records() {
        let record = record.map_err(|e| PopulationError::MalformedRow {
            row: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if first {
            first = false;
            if record.get(0).is_some_and(|f| f.parse::<u32>().is_err()) {
                let names: Vec<String> = record.iter().map(normalize_header).collect();
                let mut idx = [0usize; 10];
                for (slot, field) in idx.iter_mut().zip(FIELDS) {
                    *slot = names.iter().position(|n| n == field).ok_or_else(|| PopulationError::MalformedRow {
                        row,
                        reason: format!("header lacks column {field}"),
                    })?;
                }
                columns = Some(idx);
                continue;
            }
        }
        let idx = match columns {
            Some(idx) => idx,
            None => match record.len() {
                14 | 15 => ADULT_FULL,
                10 => ADULT_REDUCED,
                n => {
                    return Err(PopulationError::MalformedRow {
                        row,
                        reason: format!("expected 10, 14 or 15 columns, found {n}"),
                    })
                }
            },
        };
        let field = |i: usize| -> Result<&str, PopulationError> {
            match record.get(idx[i]) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(PopulationError::MalformedRow { row, reason: format!("missing {}", FIELDS[i]) }),
            }
        };
        let number = |i: usize| -> Result<u32, PopulationError> {
            let v = field(i)?;
            v.parse().map_err(|_| PopulationError::MalformedRow {
                row,
                reason: format!("{} is not a non-negative integer: {v:?}", FIELDS[i]),
            })
        };

        let profile = CensusProfile {
            user_id: profiles.len() as UserId,
            age: number(0)?,
            workclass: field(1)?.to_string(),
            education: field(2)?.to_string(),
            marital_status: field(3)?.to_string(),
            occupation: field(4)?.to_string(),
            relationship: field(5)?.to_string(),
            race: field(6)?.to_string(),
            sex: field(7)?.to_string(),
            hours_per_week: number(8)?,
            native_country: field(9)?.to_string(),
        };
        for (name, value, vocab) in [
            ("workclass", &profile.workclass, catalog::WORKCLASSES),
            ("education", &profile.education, catalog::EDUCATIONS),
            ("marital_status", &profile.marital_status, catalog::MARITAL_STATUSES),
            ("occupation", &profile.occupation, catalog::OCCUPATIONS),
            ("relationship", &profile.relationship, catalog::RELATIONSHIPS),
            ("race", &profile.race, catalog::RACES),
            ("sex", &profile.sex, catalog::SEXES),
            ("native_country", &profile.native_country, catalog::COUNTRIES),
        ] {
            if !vocab.contains(&value.as_str()) {
                let message = format!("unknown {name} category {value:?}; kept as-is");
                warn!(row, "{message}");
                warnings.push(LoadWarning { line: row, message });
            }
        }
        profiles.push(profile);
    }
    Ok((profiles, warnings))
}

pub fn load_follow_graph(path: &Path) -> Result<(SocialGraph, Vec<LoadWarning>), PopulationError> {
    parse_follow_graph(&read(path)?)
}

/// Parses a whitespace-separated `follower followee` edge list. Lines whose
/// first non-blank character is `#` are comments. Duplicate edges collapse;
/// self-edges are dropped with a warning.
pub fn parse_follow_graph(text: &str) -> Result<(SocialGraph, Vec<LoadWarning>), PopulationError> {
    let mut graph = SocialGraph::default();
    let mut warnings = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        let parse = |t: &str| {
            t.parse::<u64>().map_err(|_| PopulationError::BadEdgeToken { line, token: t.to_string() })
        };
        if tokens.len() != 2 {
            let token = tokens.get(2).copied().unwrap_or(trimmed).to_string();
            return Err(PopulationError::BadEdgeToken { line, token });
        }
        let (a, b) = (parse(tokens[0])?, parse(tokens[1])?);
        if a == b {
            let message = format!("self-edge {a} -> {a} dropped");
            warn!(line, "{message}");
            warnings.push(LoadWarning { line, message });
            continue;
        }
        graph.follow(a, b);
    }
    Ok((graph, warnings))
}
