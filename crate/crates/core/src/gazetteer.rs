//! Name resources for entity replacement: census last names, gendered
//! first names, and GeoNames places, with deterministic without-replacement
//! sampling.
//!
//! The sampler is backed by ChaCha8, a portable seedable generator, so a
//! given seed reproduces the same draw sequence on every platform.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GazetteerError {
    #[error("line {line}: malformed resource line: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("resource {0} is empty")]
    EmptyResource(String),
    #[error("name pool {0} is exhausted")]
    PoolExhausted(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NameListKind {
    LastNames,
    MaleFirst,
    FemaleFirst,
}

impl NameListKind {
    pub fn label(&self) -> &'static str {
        match self {
            NameListKind::LastNames => "last-names",
            NameListKind::MaleFirst => "male-first-names",
            NameListKind::FemaleFirst => "female-first-names",
        }
    }
}

#[derive(Debug, Clone)]
pub struct NameList {
    pub kind: NameListKind,
    pub names: Vec<String>,
}

impl NameList {
    pub fn new(kind: NameListKind, names: Vec<String>) -> NameList {
        let mut seen = HashSet::new();
        let names = names
            .into_iter()
            .filter(|n| seen.insert(n.to_lowercase()))
            .collect();
        NameList { kind, names }
    }

    pub fn contains(&self, name: &str) -> bool {
        let lower = name.to_lowercase();
        self.names.iter().any(|n| n.to_lowercase() == lower)
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Drops every name present in the (lowercased) training set,
    /// preserving order otherwise.
    pub fn filter_training_names(&self, train_names: &HashSet<String>) -> NameList {
        NameList {
            kind: self.kind,
            names: self
                .names
                .iter()
                .filter(|n| !train_names.contains(&n.to_lowercase()))
                .cloned()
                .collect(),
        }
    }
}

/// Place names keyed by GeoNames feature code (PPL, ADM1, ...).
/// Country-level codes (the PCL family) are never admitted.
#[derive(Debug, Clone, Default)]
pub struct GeoNameIndex {
    pub entries: BTreeMap<String, Vec<String>>,
}

impl GeoNameIndex {
    /// The feature code of the first category (in code order) containing
    /// the name, compared case-insensitively.
    pub fn category_of(&self, name: &str) -> Option<&str> {
        let lower = name.to_lowercase();
        self.entries
            .iter()
            .find(|(_, names)| names.iter().any(|n| n.to_lowercase() == lower))
            .map(|(code, _)| code.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.category_of(name).is_some()
    }

    pub fn filter_training_names(&self, train_names: &HashSet<String>) -> GeoNameIndex {
        let entries = self
            .entries
            .iter()
            .map(|(code, names)| {
                (
                    code.clone(),
                    names
                        .iter()
                        .filter(|n| !train_names.contains(&n.to_lowercase()))
                        .cloned()
                        .collect(),
                )
            })
            .collect();
        GeoNameIndex { entries }
    }
}

/// All resources needed for one perturbation run.
#[derive(Debug, Clone)]
pub struct GazetteerSet {
    pub last: NameList,
    pub male: NameList,
    pub female: NameList,
    pub geo: GeoNameIndex,
}

impl GazetteerSet {
    pub fn filter_training_names(&self, train_names: &HashSet<String>) -> GazetteerSet {
        GazetteerSet {
            last: self.last.filter_training_names(train_names),
            male: self.male.filter_training_names(train_names),
            female: self.female.filter_training_names(train_names),
            geo: self.geo.filter_training_names(train_names),
        }
    }
}

/// Census last-name file: `NAME freq cumfreq rank` per line, names in
/// ALL CAPS. Names are title-cased on load.
pub fn load_census_last_names(stream: &str) -> Result<NameList, GazetteerError> {
    let mut names = Vec::new();
    for (i, line) in stream.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let name = line
            .split_whitespace()
            .next()
            .ok_or_else(|| GazetteerError::MalformedLine {
                line: i + 1,
                reason: "empty line".into(),
            })?;
        names.push(title_case(name));
    }
    if names.is_empty() {
        return Err(GazetteerError::EmptyResource("census last names".into()));
    }
    Ok(NameList::new(NameListKind::LastNames, names))
}

/// First-name gazetteer: `name<TAB>male_proportion`. A proportion of
/// exactly 0.5 puts the name in both lists.
pub fn load_first_names(stream: &str) -> Result<(NameList, NameList), GazetteerError> {
    let mut male = Vec::new();
    let mut female = Vec::new();
    for (i, line) in stream.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let name = parts.next().unwrap_or("").trim();
        let prop_text = parts.next().ok_or_else(|| GazetteerError::MalformedLine {
            line: i + 1,
            reason: "expected name<TAB>proportion".into(),
        })?;
        let prop: f64 = prop_text
            .trim()
            .parse()
            .map_err(|_| GazetteerError::MalformedLine {
                line: i + 1,
                reason: format!("non-numeric proportion {prop_text:?}"),
            })?;
        if name.is_empty() || !(0.0..=1.0).contains(&prop) {
            return Err(GazetteerError::MalformedLine {
                line: i + 1,
                reason: format!("bad name or proportion out of [0,1]: {line:?}"),
            });
        }
        if prop >= 0.5 {
            male.push(name.to_string());
        }
        if prop <= 0.5 {
            female.push(name.to_string());
        }
    }
    if male.is_empty() && female.is_empty() {
        return Err(GazetteerError::EmptyResource("first names".into()));
    }
    Ok((
        NameList::new(NameListKind::MaleFirst, male),
        NameList::new(NameListKind::FemaleFirst, female),
    ))
}

/// GeoNames dump rows, tab-separated. Field 2 is the name, field 7 the
/// feature class, field 8 the feature code. Country codes (PCL*) are
/// skipped.
pub fn load_geonames(stream: &str) -> Result<GeoNameIndex, GazetteerError> {
    let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (i, line) in stream.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 8 {
            return Err(GazetteerError::MalformedLine {
                line: i + 1,
                reason: format!("expected at least 8 tab-separated fields, found {}", fields.len()),
            });
        }
        let name = fields[1].trim();
        let code = fields[7].trim();
        if name.is_empty() || code.is_empty() {
            continue;
        }
        if code.starts_with("PCL") {
            continue;
        }
        let bucket = entries.entry(code.to_string()).or_default();
        if !bucket.iter().any(|n| n.eq_ignore_ascii_case(name)) {
            bucket.push(name.to_string());
        }
    }
    if entries.is_empty() {
        return Err(GazetteerError::EmptyResource("geonames".into()));
    }
    Ok(GeoNameIndex { entries })
}

fn title_case(name: &str) -> String {
    let mut chars = name.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + &chars.as_str().to_lowercase(),
        None => String::new(),
    }
}

/// Identifies which without-replacement pool a draw comes from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum PoolKey {
    Last,
    MaleFirst,
    FemaleFirst,
    Geo(String),
}

impl PoolKey {
    fn label(&self) -> String {
        match self {
            PoolKey::Last => "last-names".into(),
            PoolKey::MaleFirst => "male-first-names".into(),
            PoolKey::FemaleFirst => "female-first-names".into(),
            PoolKey::Geo(code) => format!("geonames/{code}"),
        }
    }
}

/// Seeded sampler with a per-pool record of consumed names.
#[derive(Debug, Clone)]
pub struct SamplerState {
    rng: ChaCha8Rng,
    consumed: BTreeMap<PoolKey, HashSet<String>>,
}

impl SamplerState {
    pub fn new(seed: u64) -> SamplerState {
        SamplerState {
            rng: ChaCha8Rng::seed_from_u64(seed),
            consumed: BTreeMap::new(),
        }
    }

    /// Uniform draw among the pool names not yet consumed under `key`.
    pub fn draw_replacement(
        &mut self,
        key: PoolKey,
        pool: &[String],
    ) -> Result<String, GazetteerError> {
        let consumed = self.consumed.entry(key.clone()).or_default();
        let available: Vec<&String> = pool
            .iter()
            .filter(|n| !consumed.contains(&n.to_lowercase()))
            .collect();
        if available.is_empty() {
            return Err(GazetteerError::PoolExhausted(key.label()));
        }
        let pick = available[self.rng.gen_range(0..available.len())].clone();
        consumed.insert(pick.to_lowercase());
        Ok(pick)
    }
}

/// Reads a training-name exclusion file: one name per line, lowercased on
/// load. Multi-token names are kept as a single entry and each token is
/// also added on its own, so that first/last-name lists can be filtered
/// against full-name occurrences.
pub fn load_training_names(stream: &str) -> HashSet<String> {
    let mut set = HashSet::new();
    for line in stream.lines() {
        let name = line.trim();
        if name.is_empty() {
            continue;
        }
        set.insert(name.to_lowercase());
        for token in name.split_whitespace() {
            set.insert(token.to_lowercase());
        }
    }
    set
}
