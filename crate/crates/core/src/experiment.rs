//! Treatment arms, scenario schedules and banner construction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feed::Round;
use crate::population::UserId;
use crate::rng::{self, tag};

pub const INFO_BANNER: &str = "VOTE OR BE SILENCED! One ballot = one voice. Use yours.";
pub const MAX_LISTED_FOLLOWS: usize = 6;
pub const LIKELY_THRESHOLD: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExperimentError {
    #[error("period {period} outside 0..{periods}")]
    PeriodOutOfRange { period: u32, periods: u32 },
    #[error("unknown scenario {0:?} (expected control, info_all, social_all, info_staggered or social_staggered)")]
    UnknownScenario(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Control,
    InfoAll,
    SocialAll,
    InfoStaggered,
    SocialStaggered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BannerKind {
    Info,
    Social,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::Control,
        ScenarioKind::InfoAll,
        ScenarioKind::SocialAll,
        ScenarioKind::InfoStaggered,
        ScenarioKind::SocialStaggered,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Control => "control",
            ScenarioKind::InfoAll => "info_all",
            ScenarioKind::SocialAll => "social_all",
            ScenarioKind::InfoStaggered => "info_staggered",
            ScenarioKind::SocialStaggered => "social_staggered",
        }
    }

    pub fn banner_kind(self) -> Option<BannerKind> {
        match self {
            ScenarioKind::Control => None,
            ScenarioKind::InfoAll | ScenarioKind::InfoStaggered => Some(BannerKind::Info),
            ScenarioKind::SocialAll | ScenarioKind::SocialStaggered => Some(BannerKind::Social),
        }
    }

    pub fn is_staggered(self) -> bool {
        matches!(self, ScenarioKind::InfoStaggered | ScenarioKind::SocialStaggered)
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ExperimentError::UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub phase_fractions: [f64; 3],
    pub block_length: u32,
    pub periods: u32,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario { kind: ScenarioKind::Control, phase_fractions: [0.2, 0.4, 0.8], block_length: 10, periods: 31 }
    }
}

impl Scenario {
    pub fn new(kind: ScenarioKind) -> Self {
        Scenario { kind, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let f = self.phase_fractions;
        if !(0.0..=1.0).contains(&f[0]) || !(f[0] < f[1] && f[1] < f[2] && f[2] <= 1.0) {
            return Err(ExperimentError::Invalid(format!("phase fractions {f:?} must be strictly increasing in [0,1]")));
        }
        if self.block_length == 0 || self.periods == 0 {
            return Err(ExperimentError::Invalid("block_length and periods must be positive".into()));
        }
        Ok(())
    }

    /// Staggered phase in force at `period`; the last phase absorbs any
    /// periods beyond three full blocks.
    pub fn phase_at(&self, period: u32) -> u8 {
        (period / self.block_length).min(2) as u8
    }

    /// First period of phases 1 and 2.
    pub fn phase_transitions(&self) -> [u32; 2] {
        [self.block_length, 2 * self.block_length]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Control => "control",
            Arm::Treated => "treated",
        }
    }
}

/// Arm and phase of entry for every eligible user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreatmentAssignment {
    pub kind: ScenarioKind,
    /// `Some(phase)` for treated users, `None` for control.
    pub entries: BTreeMap<UserId, Option<u8>>,
}

impl TreatmentAssignment {
    pub fn arm(&self, user: UserId) -> Option<Arm> {
        self.entries.get(&user).map(|e| if e.is_some() { Arm::Treated } else { Arm::Control })
    }

    pub fn phase_of_entry(&self, user: UserId) -> Option<u8> {
        self.entries.get(&user).copied().flatten()
    }

    pub fn treated_count(&self) -> usize {
        self.entries.values().filter(|e| e.is_some()).count()
    }

    /// Whether `user` sees a banner during treatment period `period`.
    pub fn is_treated_at(&self, scenario: &Scenario, user: UserId, period: u32) -> bool {
        match self.phase_of_entry(user) {
            None => false,
            Some(entry) => !scenario.kind.is_staggered() || entry <= scenario.phase_at(period),
        }
    }

    pub fn active_treated_at(&self, scenario: &Scenario, period: u32) -> Result<BTreeSet<UserId>, ExperimentError> {
        if period >= scenario.periods {
            return Err(ExperimentError::PeriodOutOfRange { period, periods: scenario.periods });
        }
        Ok(self.entries.keys().copied().filter(|&u| self.is_treated_at(scenario, u, period)).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("user_id,arm,phase_of_entry\n");
        for (user, entry) in &self.entries {
            let arm = if entry.is_some() { Arm::Treated } else { Arm::Control };
            let phase = entry.map(|p| p.to_string()).unwrap_or_default();
            out.push_str(&format!("{user},{},{phase}\n", arm.as_str()));
        }
        out
    }
}

/// Full scenarios treat every eligible user (none for control). Staggered
/// scenarios permute the eligible users and let phase `p` cover the first
/// `floor(f_p * n)` of them, so cohorts are nested.
pub fn assign_arms(scenario: &Scenario, eligible: &[UserId], seed: u64) -> TreatmentAssignment {
    let mut entries: BTreeMap<UserId, Option<u8>> = eligible.iter().map(|&u| (u, None)).collect();
    match scenario.kind {
        ScenarioKind::Control => {}
        ScenarioKind::InfoAll | ScenarioKind::SocialAll => entries.values_mut().for_each(|e| *e = Some(0)),
        ScenarioKind::InfoStaggered | ScenarioKind::SocialStaggered => {
            let mut order: Vec<UserId> = entries.keys().copied().collect();
            order.shuffle(&mut rng::keyed(seed, &[tag::ASSIGN]));
            let n = order.len();
            let mut start = 0;
            for (phase, f) in scenario.phase_fractions.iter().enumerate() {
                let end = ((f * n as f64).floor() as usize).min(n);
                for u in &order[start.min(end)..end] {
                    entries.insert(*u, Some(phase as u8));
                }
                start = start.max(end);
            }
        }
    }
    TreatmentAssignment { kind: scenario.kind, entries }
}

/// Start-of-round view of reported likelihoods used for banner text.
pub struct BannerSnapshot<'a> {
    /// Latest reported likelihood per user id, if any.
    pub latest: &'a [Option<u8>],
    /// Round of each user's most recent completed session.
    pub last_session: &'a [Option<Round>],
    pub likely_count: usize,
}

impl<'a> BannerSnapshot<'a> {
    pub fn new(latest: &'a [Option<u8>], last_session: &'a [Option<Round>]) -> Self {
        let likely_count = latest.iter().filter(|l| l.is_some_and(|v| v >= LIKELY_THRESHOLD)).count();
        BannerSnapshot { latest, last_session, likely_count }
    }

    fn is_likely(&self, user: UserId) -> bool {
        self.latest.get(user as usize).copied().flatten().is_some_and(|v| v >= LIKELY_THRESHOLD)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Banner {
    pub kind: BannerKind,
    pub text: String,
    pub likely_count: usize,
    pub listed: Vec<UserId>,
    pub close_friends_listed: usize,
}

/// Up to six followed users planning to vote: close friends first, then the
/// most recently active, then ascending id.
pub fn listed_follows(
    follows: &BTreeSet<UserId>,
    close_friends: &BTreeSet<UserId>,
    snapshot: &BannerSnapshot<'_>,
) -> Vec<UserId> {
    let mut ids: Vec<UserId> = follows.iter().copied().filter(|&u| snapshot.is_likely(u)).collect();
    ids.sort_by_key(|&u| {
        let last = snapshot.last_session.get(u as usize).copied().flatten();
        (!close_friends.contains(&u), std::cmp::Reverse(last.map(|r| r as i64).unwrap_or(-1)), u)
    });
    ids.truncate(MAX_LISTED_FOLLOWS);
    ids
}

pub fn social_banner_text(likely_count: usize, listed: &[UserId]) -> String {
    let mut text = format!("{INFO_BANNER} {likely_count} users have indicated they're likely to vote.");
    if !listed.is_empty() {
        let ids: Vec<String> = listed.iter().map(u64::to_string).collect();
        text.push_str(&format!(" From users you follow, users {} are planning to vote.", ids.join(", ")));
    }
    text.push_str(" Will you?");
    text
}

pub fn build_banner(
    kind: BannerKind,
    follows: &BTreeSet<UserId>,
    close_friends: &BTreeSet<UserId>,
    snapshot: &BannerSnapshot<'_>,
) -> Banner {
    match kind {
        BannerKind::Info => Banner {
            kind,
            text: INFO_BANNER.to_string(),
            likely_count: snapshot.likely_count,
            listed: Vec::new(),
            close_friends_listed: 0,
        },
        BannerKind::Social => {
            let listed = listed_follows(follows, close_friends, snapshot);
            Banner {
                kind,
                text: social_banner_text(snapshot.likely_count, &listed),
                likely_count: snapshot.likely_count,
                close_friends_listed: listed.iter().filter(|u| close_friends.contains(u)).count(),
                listed,
            }
        }
    }
}
