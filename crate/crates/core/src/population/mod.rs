//! Population construction: census profiles, the follow graph, and the fixed
//! per-user attributes derived from them.

pub mod bootstrap;
pub mod catalog;
mod graph;
mod load;
mod stance;
pub mod synthetic;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, tag};

pub use bootstrap::{bootstrap_social_attributes, parse_bootstrap_response, BootstrapOutcome, BootstrapRequest};
pub use graph::SocialGraph;
pub use load::{load_census_profiles, load_follow_graph, parse_census, parse_follow_graph};
pub use stance::{assign_political_stance, Ideology, PoliticalStance, TurnoutPropensity};

pub type UserId = u64;

#[derive(Debug, Error)]
pub enum PopulationError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("line {line}: non-integer token {token:?}")]
    BadEdgeToken { line: usize, token: String },
    #[error("need at least {needed} profiles to cover the graph, found {found}")]
    NotEnoughProfiles { needed: usize, found: usize },
    #[error("requested {requested} users but the graph has only {available} nodes")]
    NotEnoughNodes { requested: usize, available: usize },
    #[error("population must contain at least 2 users")]
    TooSmall,
    #[error("unknown {field} value {value:?}")]
    UnknownValue { field: &'static str, value: String },
}

/// Non-fatal conditions reported by loaders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadWarning {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusProfile {
    pub user_id: UserId,
    pub age: u32,
    pub workclass: String,
    pub education: String,
    pub marital_status: String,
    pub occupation: String,
    pub relationship: String,
    pub race: String,
    pub sex: String,
    pub hours_per_week: u32,
    pub native_country: String,
}

impl CensusProfile {
    pub fn is_adult(&self) -> bool {
        self.age >= 18
    }
}

/// The part of a profile other users are allowed to see.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicProfile {
    pub user_id: UserId,
    pub education: String,
    pub occupation: String,
    pub workclass: String,
}

impl PublicProfile {
    /// Number of public attributes two users share.
    pub fn shared_attributes(&self, other: &PublicProfile) -> usize {
        [
            self.education == other.education,
            self.occupation == other.occupation,
            self.workclass == other.workclass,
        ]
        .iter()
        .filter(|&&b| b)
        .count()
    }
}

impl fmt::Display for PublicProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "user_id: {}, education: {}, occupation: {}, workclass: {}",
            self.user_id, self.education, self.occupation, self.workclass
        )
    }
}

pub fn derive_public_profile(profile: &CensusProfile) -> PublicProfile {
    PublicProfile {
        user_id: profile.user_id,
        education: profile.education.clone(),
        occupation: profile.occupation.clone(),
        workclass: profile.workclass.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelTier {
    Full,
    Mini,
    Nano,
}

impl ModelTier {
    pub const ALL: [ModelTier; 3] = [ModelTier::Full, ModelTier::Mini, ModelTier::Nano];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelTier::Full => "full",
            ModelTier::Mini => "mini",
            ModelTier::Nano => "nano",
        }
    }

    pub fn default_model_name(self) -> &'static str {
        match self {
            ModelTier::Full => "gpt-4.1",
            ModelTier::Mini => "gpt-4.1-mini",
            ModelTier::Nano => "gpt-4.1-nano",
        }
    }
}

impl FromStr for ModelTier {
    type Err = PopulationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(ModelTier::Full),
            "mini" => Ok(ModelTier::Mini),
            "nano" => Ok(ModelTier::Nano),
            _ => Err(PopulationError::UnknownValue { field: "model tier", value: s.to_string() }),
        }
    }
}

pub fn assign_model_tier(profile: &CensusProfile) -> ModelTier {
    let edu = profile.education.as_str();
    let occ = profile.occupation.as_str();
    if matches!(edu, "Doctorate" | "Prof-school" | "Masters") || matches!(occ, "Exec-managerial" | "Prof-specialty") {
        ModelTier::Full
    } else if matches!(edu, "Bachelors" | "Assoc-acdm" | "Assoc-voc" | "Some-college") {
        ModelTier::Mini
    } else {
        ModelTier::Nano
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub profile: CensusProfile,
    pub public: PublicProfile,
    pub stance: PoliticalStance,
    pub tier: ModelTier,
    pub interests: Vec<String>,
    pub eligible_voter: bool,
    /// Row of the census file this profile came from.
    pub census_row: usize,
    /// Node id in the source follow graph.
    pub source_node: u64,
}

impl UserRecord {
    pub fn id(&self) -> UserId {
        self.profile.user_id
    }
}

/// Result of randomly pairing census profiles with graph nodes. Users are
/// relabelled `0..n` in ascending source-node order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchedPopulation {
    pub profiles: Vec<CensusProfile>,
    pub census_rows: Vec<usize>,
    pub source_nodes: Vec<u64>,
    pub graph: SocialGraph,
}

/// Pairs profiles with graph nodes. When `size` is smaller than the graph,
/// the `size` best-connected nodes (total degree, ties by id) are kept and
/// the induced subgraph is used.
pub fn match_profiles_to_nodes(
    profiles: &[CensusProfile],
    graph: &SocialGraph,
    size: Option<usize>,
    seed: u64,
) -> Result<MatchedPopulation, PopulationError> {
    let nodes = graph.nodes();
    let n = size.unwrap_or(nodes.len());
    if n > nodes.len() {
        return Err(PopulationError::NotEnoughNodes { requested: n, available: nodes.len() });
    }
    if profiles.len() < n {
        return Err(PopulationError::NotEnoughProfiles { needed: n, found: profiles.len() });
    }

    let mut selected: Vec<u64> = if n == nodes.len() {
        nodes.iter().copied().collect()
    } else {
        let degrees = graph.total_degrees();
        let mut ranked: Vec<u64> = nodes.iter().copied().collect();
        ranked.sort_by(|a, b| degrees[b].cmp(&degrees[a]).then(a.cmp(b)));
        ranked.truncate(n);
        ranked
    };
    selected.sort_unstable();
    let index_of: std::collections::BTreeMap<u64, UserId> =
        selected.iter().enumerate().map(|(i, &node)| (node, i as UserId)).collect();

    let mut relabelled = SocialGraph::default();
    for (a, b) in graph.edges() {
        if let (Some(&ua), Some(&ub)) = (index_of.get(&a), index_of.get(&b)) {
            relabelled.follow(ua, ub);
        }
    }
    for &u in index_of.values() {
        relabelled.ensure_node(u);
    }

    let mut order: Vec<usize> = (0..profiles.len()).collect();
    order.shuffle(&mut rng::keyed(seed, &[tag::MATCH]));
    order.truncate(n);

    let matched = order
        .iter()
        .enumerate()
        .map(|(u, &row)| CensusProfile { user_id: u as UserId, ..profiles[row].clone() })
        .collect();

    Ok(MatchedPopulation { profiles: matched, census_rows: order, source_nodes: selected, graph: relabelled })
}

/// The assembled population: per-user records plus the (mutable during the
/// run) social graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Population {
    pub users: Vec<UserRecord>,
    pub graph: SocialGraph,
}

impl Population {
    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn user(&self, id: UserId) -> &UserRecord {
        &self.users[id as usize]
    }

    pub fn eligible_ids(&self) -> Vec<UserId> {
        self.users.iter().filter(|u| u.eligible_voter).map(UserRecord::id).collect()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Checks the cross-field invariants every built population satisfies.
    pub fn validate(&self) -> Result<(), String> {
        for (i, u) in self.users.iter().enumerate() {
            if u.id() != i as UserId {
                return Err(format!("user at index {i} has id {}", u.id()));
            }
            if u.eligible_voter != (u.profile.age >= 18) {
                return Err(format!("user {i}: eligibility does not match age"));
            }
            if !(2..=4).contains(&u.interests.len()) {
                return Err(format!("user {i}: {} interests", u.interests.len()));
            }
            let friends = self.graph.close_friends(u.id());
            if !(1..=7).contains(&friends.len()) {
                return Err(format!("user {i}: {} close friends", friends.len()));
            }
            let follows = self.graph.followees(u.id());
            if !friends.is_subset(follows) {
                return Err(format!("user {i}: close friend not followed"));
            }
        }
        Ok(())
    }
}

/// Everything needed to turn matched profiles into a full population.
pub struct PopulationBuilder<'a> {
    pub backend: &'a dyn crate::agent::Backend,
    pub stance_seed: u64,
    pub bootstrap_seed: u64,
    pub candidate_sample: usize,
    pub stance_via_backend: bool,
}

impl PopulationBuilder<'_> {
    /// Derives fixed attributes and runs the bootstrap step for every user.
    /// Per-user work is independent; the merge is in ascending user id.
    pub fn build(&self, matched: MatchedPopulation) -> Result<Population, PopulationError> {
        use rayon::prelude::*;

        let n = matched.profiles.len();
        if n < 2 {
            return Err(PopulationError::TooSmall);
        }
        let publics: Vec<PublicProfile> = matched.profiles.iter().map(derive_public_profile).collect();
        let initial = &matched.graph;

        let outcomes: Vec<(PoliticalStance, BootstrapOutcome)> = matched
            .profiles
            .par_iter()
            .map(|profile| {
                let stance = if self.stance_via_backend {
                    stance::stance_from_backend(self.backend, profile, self.stance_seed)
                } else {
                    assign_political_stance(profile, self.stance_seed)
                };
                let candidates = bootstrap::sample_candidates(profile.user_id, initial, n, self.candidate_sample, self.bootstrap_seed);
                let request = BootstrapRequest {
                    profile,
                    tier: assign_model_tier(profile),
                    current_follows: initial.followees(profile.user_id).iter().map(|id| &publics[*id as usize]).collect(),
                    candidates: candidates.iter().map(|id| &publics[*id as usize]).collect(),
                    seed: self.bootstrap_seed,
                };
                (stance, bootstrap_social_attributes(self.backend, &request))
            })
            .collect();

        let mut graph = SocialGraph::default();
        let mut users = Vec::with_capacity(n);
        for (i, (profile, (stance, outcome))) in matched.profiles.into_iter().zip(outcomes).enumerate() {
            let id = profile.user_id;
            graph.ensure_node(id);
            for &f in &outcome.follows {
                graph.follow(id, f);
            }
            graph.set_close_friends(id, outcome.close_friends.iter().copied().collect::<BTreeSet<_>>());
            users.push(UserRecord {
                tier: assign_model_tier(&profile),
                public: publics[i].clone(),
                eligible_voter: profile.is_adult(),
                stance,
                interests: outcome.interests,
                census_row: matched.census_rows[i],
                source_node: matched.source_nodes[i],
                profile,
            });
        }
        Ok(Population { users, graph })
    }
}
