//! Fixed vocabularies: the interest catalog and the Adult census categories.

use super::CensusProfile;

/// Version tag of the shipped interest catalog; bump when topics change.
pub const INTEREST_CATALOG_VERSION: &str = "interests-v1";

/// Political lean a topic signals when it appears as a post topic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopicLean {
    Left,
    Neutral,
    Right,
}

/// The interest catalog, in canonical order.
pub const INTEREST_CATALOG: &[(&str, TopicLean)] = &[
    ("Racial Equality", TopicLean::Left),
    ("Gender Equality", TopicLean::Left),
    ("Wellness", TopicLean::Neutral),
    ("History", TopicLean::Neutral),
    ("Climate Action", TopicLean::Left),
    ("Travel", TopicLean::Neutral),
    ("Technology", TopicLean::Neutral),
    ("Science", TopicLean::Neutral),
    ("Sports", TopicLean::Neutral),
    ("Music", TopicLean::Neutral),
    ("Movies", TopicLean::Neutral),
    ("Food", TopicLean::Neutral),
    ("Cooking", TopicLean::Neutral),
    ("Fitness", TopicLean::Neutral),
    ("Parenting", TopicLean::Neutral),
    ("Education", TopicLean::Neutral),
    ("Healthcare", TopicLean::Left),
    ("Small Business", TopicLean::Right),
    ("Personal Finance", TopicLean::Neutral),
    ("Investing", TopicLean::Neutral),
    ("Faith", TopicLean::Right),
    ("Gardening", TopicLean::Neutral),
    ("Outdoors", TopicLean::Neutral),
    ("Hunting", TopicLean::Right),
    ("Fishing", TopicLean::Neutral),
    ("Cars", TopicLean::Neutral),
    ("Veterans Affairs", TopicLean::Right),
    ("Public Safety", TopicLean::Right),
    ("Immigration", TopicLean::Left),
    ("Economy", TopicLean::Neutral),
    ("Jobs", TopicLean::Neutral),
    ("Labor Rights", TopicLean::Left),
    ("Agriculture", TopicLean::Neutral),
    ("Art", TopicLean::Neutral),
    ("Books", TopicLean::Neutral),
    ("Gaming", TopicLean::Neutral),
    ("Fashion", TopicLean::Neutral),
    ("Pets", TopicLean::Neutral),
    ("Local News", TopicLean::Neutral),
    ("Second Amendment", TopicLean::Right),
];

/// Topics every profile has some affinity for.
pub const UNIVERSAL_TOPICS: &[&str] = &["Music", "Movies", "Food", "Sports", "Travel", "Local News", "Pets"];

pub fn interest_names() -> impl Iterator<Item = &'static str> {
    INTEREST_CATALOG.iter().map(|(name, _)| *name)
}

pub fn is_catalog_topic(topic: &str) -> bool {
    INTEREST_CATALOG.iter().any(|(name, _)| *name == topic)
}

/// Strips the `general-` prefix used for topics outside the catalog.
pub fn base_topic(topic: &str) -> &str {
    topic.strip_prefix("general-").unwrap_or(topic)
}

pub fn topic_lean(topic: &str) -> TopicLean {
    let base = base_topic(topic);
    INTEREST_CATALOG
        .iter()
        .find(|(name, _)| *name == base)
        .map(|(_, lean)| *lean)
        .unwrap_or(TopicLean::Neutral)
}

/// Demographic affinity rules: the catalog topics a profile plausibly cares
/// about beyond the universal ones. Returned in catalog order, deduplicated.
pub fn affinity_topics(p: &CensusProfile) -> Vec<&'static str> {
    let mut picks: Vec<&'static str> = Vec::new();
    let mut add = |topics: &[&'static str]| picks.extend_from_slice(topics);

    match p.race.as_str() {
        "Black" | "Amer-Indian-Eskimo" => add(&["Racial Equality", "History"]),
        "Asian-Pac-Islander" | "Other" => add(&["Racial Equality", "Immigration"]),
        _ => {}
    }
    if p.sex == "Female" {
        add(&["Gender Equality", "Wellness"]);
    } else {
        add(&["Cars"]);
    }
    match p.age {
        0..=29 => add(&["Gaming", "Fashion", "Fitness", "Climate Action"]),
        30..=49 => add(&["Fitness", "Personal Finance"]),
        _ => add(&["Gardening", "Healthcare", "History", "Personal Finance"]),
    }
    if p.age >= 65 {
        add(&["Faith"]);
    }
    match p.education.as_str() {
        "Doctorate" | "Masters" | "Prof-school" => add(&["Science", "Books", "Investing", "History"]),
        "Bachelors" => add(&["Technology", "Books", "Travel"]),
        "Some-college" | "Assoc-acdm" | "Assoc-voc" => add(&["Education", "Jobs"]),
        _ => add(&["Jobs", "Economy"]),
    }
    match p.occupation.as_str() {
        "Tech-support" | "Prof-specialty" => add(&["Technology", "Science"]),
        "Farming-fishing" => add(&["Agriculture", "Fishing", "Outdoors", "Hunting"]),
        "Protective-serv" => add(&["Public Safety", "Veterans Affairs"]),
        "Armed-Forces" => add(&["Veterans Affairs", "Second Amendment"]),
        "Exec-managerial" => add(&["Investing", "Economy", "Small Business"]),
        "Sales" => add(&["Small Business", "Personal Finance"]),
        "Craft-repair" => add(&["Cars", "Jobs", "Labor Rights"]),
        "Machine-op-inspct" | "Handlers-cleaners" | "Transport-moving" => add(&["Labor Rights", "Jobs", "Cars"]),
        "Adm-clerical" => add(&["Books", "Personal Finance"]),
        "Other-service" | "Priv-house-serv" => add(&["Cooking", "Wellness", "Labor Rights"]),
        _ => {}
    }
    match p.workclass.as_str() {
        "Self-emp-not-inc" | "Self-emp-inc" => add(&["Small Business", "Personal Finance"]),
        "Federal-gov" | "State-gov" | "Local-gov" => add(&["Public Safety", "Education"]),
        _ => {}
    }
    if p.marital_status.starts_with("Married") {
        add(&["Parenting", "Personal Finance"]);
    }
    if p.relationship == "Own-child" {
        add(&["Gaming", "Education"]);
    }
    if p.native_country != "United-States" && p.native_country != "?" {
        add(&["Immigration", "Travel"]);
    }
    if p.hours_per_week >= 50 {
        add(&["Economy"]);
    }

    interest_names()
        .filter(|name| picks.contains(name) && !UNIVERSAL_TOPICS.contains(name))
        .collect()
}

pub const WORKCLASSES: &[&str] = &[
    "Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov", "Local-gov", "State-gov", "Without-pay",
    "Never-worked", "?",
];

pub const EDUCATIONS: &[&str] = &[
    "Bachelors", "Some-college", "11th", "HS-grad", "Prof-school", "Assoc-acdm", "Assoc-voc", "9th", "7th-8th",
    "12th", "Masters", "1st-4th", "10th", "Doctorate", "5th-6th", "Preschool",
];

pub const MARITAL_STATUSES: &[&str] = &[
    "Married-civ-spouse", "Divorced", "Never-married", "Separated", "Widowed", "Married-spouse-absent",
    "Married-AF-spouse",
];

pub const OCCUPATIONS: &[&str] = &[
    "Tech-support", "Craft-repair", "Other-service", "Sales", "Exec-managerial", "Prof-specialty",
    "Handlers-cleaners", "Machine-op-inspct", "Adm-clerical", "Farming-fishing", "Transport-moving",
    "Priv-house-serv", "Protective-serv", "Armed-Forces", "?",
];

pub const RELATIONSHIPS: &[&str] = &["Wife", "Own-child", "Husband", "Not-in-family", "Other-relative", "Unmarried"];

pub const RACES: &[&str] = &["White", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other", "Black"];

pub const SEXES: &[&str] = &["Female", "Male"];

pub const COUNTRIES: &[&str] = &[
    "United-States", "Cambodia", "England", "Puerto-Rico", "Canada", "Germany", "Outlying-US(Guam-USVI-etc)",
    "India", "Japan", "Greece", "South", "China", "Cuba", "Iran", "Honduras", "Philippines", "Italy", "Poland",
    "Jamaica", "Vietnam", "Mexico", "Portugal", "Ireland", "France", "Dominican-Republic", "Laos", "Ecuador",
    "Taiwan", "Haiti", "Columbia", "Hungary", "Guatemala", "Nicaragua", "Scotland", "Thailand", "Yugoslavia",
    "El-Salvador", "Trinadad&Tobago", "Peru", "Hong", "Holand-Netherlands", "?",
];
