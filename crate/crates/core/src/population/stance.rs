//! Political stance: ideology plus baseline turnout propensity, from a
//! demographic scoring table with a small seeded tie-break.

use std::fmt;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{assign_model_tier, CensusProfile};
use crate::agent::{Backend, BackendRequest, Task};
use crate::rng::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ideology {
    Progressive,
    CenterLeft,
    Moderate,
    CenterRight,
    Conservative,
}

impl Ideology {
    pub const ALL: [Ideology; 5] =
        [Ideology::Progressive, Ideology::CenterLeft, Ideology::Moderate, Ideology::CenterRight, Ideology::Conservative];

    /// Negative is left of center, positive right.
    pub fn side(self) -> i8 {
        match self {
            Ideology::Progressive | Ideology::CenterLeft => -1,
            Ideology::Moderate => 0,
            Ideology::CenterRight | Ideology::Conservative => 1,
        }
    }

    fn phrase(self) -> &'static str {
        match self {
            Ideology::Progressive => "Progressive",
            Ideology::CenterLeft => "Slight center-left",
            Ideology::Moderate => "Moderate",
            Ideology::CenterRight => "Slight center-right",
            Ideology::Conservative => "Conservative",
        }
    }

    fn from_score(score: i32) -> Self {
        match score {
            i32::MIN..=-3 => Ideology::Progressive,
            -2..=-1 => Ideology::CenterLeft,
            0 => Ideology::Moderate,
            1..=2 => Ideology::CenterRight,
            _ => Ideology::Conservative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnoutPropensity {
    Consistent,
    Occasional,
    Rare,
}

impl TurnoutPropensity {
    pub const ALL: [TurnoutPropensity; 3] =
        [TurnoutPropensity::Consistent, TurnoutPropensity::Occasional, TurnoutPropensity::Rare];

    fn phrase(self) -> &'static str {
        match self {
            TurnoutPropensity::Consistent => "consistently votes",
            TurnoutPropensity::Occasional => "occasionally votes",
            TurnoutPropensity::Rare => "rarely votes",
        }
    }

    /// Starting voting likelihood on the 0-4 scale.
    pub fn base_likelihood(self) -> u8 {
        match self {
            TurnoutPropensity::Consistent => 3,
            TurnoutPropensity::Occasional => 2,
            TurnoutPropensity::Rare => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PoliticalStance {
    pub ideology: Ideology,
    pub turnout: TurnoutPropensity,
}

impl PoliticalStance {
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for PoliticalStance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}, {}", self.ideology.phrase(), self.turnout.phrase())
    }
}

fn ideology_score(p: &CensusProfile) -> i32 {
    let age = match p.age {
        0..=29 => -1,
        30..=44 => 0,
        _ => 1,
    };
    let education = match p.education.as_str() {
        "Doctorate" | "Masters" | "Prof-school" => -1,
        "HS-grad" => 1,
        _ => 0,
    };
    let occupation = match p.occupation.as_str() {
        "Prof-specialty" | "Other-service" | "Priv-house-serv" => -1,
        "Farming-fishing" | "Craft-repair" | "Protective-serv" | "Armed-Forces" | "Exec-managerial"
        | "Transport-moving" => 1,
        _ => 0,
    };
    let marital = match p.marital_status.as_str() {
        "Never-married" => -1,
        "Married-civ-spouse" | "Married-AF-spouse" => 1,
        _ => 0,
    };
    age + education + occupation + marital
}

fn turnout_score(p: &CensusProfile, ideology_score: i32) -> i32 {
    let age = match p.age {
        0..=24 => -2,
        25..=34 => -1,
        35..=49 => 0,
        50..=64 => 1,
        _ => 2,
    };
    let education = match p.education.as_str() {
        "Doctorate" | "Masters" | "Prof-school" => 2,
        "Bachelors" => 1,
        "Some-college" | "Assoc-acdm" | "Assoc-voc" | "HS-grad" => 0,
        _ => -1,
    };
    let commitment = i32::from(ideology_score.abs() >= 3);
    age + education + commitment
}

fn jitter(u: f64) -> i32 {
    if u < 0.1 {
        -1
    } else if u >= 0.9 {
        1
    } else {
        0
    }
}

/// Rule-table stance. Deterministic in `(profile, seed)`.
pub fn assign_political_stance(profile: &CensusProfile, seed: u64) -> PoliticalStance {
    let base = ideology_score(profile);
    let ideology_draw = rng::unit_draw(seed, &[tag::STANCE, profile.user_id, 0]);
    let turnout_draw = rng::unit_draw(seed, &[tag::STANCE, profile.user_id, 1]);
    let score = base + jitter(ideology_draw);
    let t = turnout_score(profile, score) + jitter(turnout_draw);
    let turnout = match t {
        i32::MIN..=0 => TurnoutPropensity::Rare,
        1..=2 => TurnoutPropensity::Occasional,
        _ => TurnoutPropensity::Consistent,
    };
    PoliticalStance { ideology: Ideology::from_score(score), turnout }
}

pub fn stance_prompt(profile: &CensusProfile) -> String {
    format!(
        "Classify the likely political stance of this U.S. resident: {age}y {race} {sex} from {country}, \
         workclass {wc}, {marital}, education {edu}, occupation {occ}, {hours} hours per week.\n\
         Reply ONLY with JSON: {{\"ideology\": \"progressive\"|\"center-left\"|\"moderate\"|\"center-right\"|\"conservative\", \
         \"turnout\": \"consistent\"|\"occasional\"|\"rare\"}}",
        age = profile.age,
        race = profile.race,
        sex = profile.sex,
        country = profile.native_country,
        wc = profile.workclass,
        marital = profile.marital_status,
        edu = profile.education,
        occ = profile.occupation,
        hours = profile.hours_per_week,
    )
}

pub fn parse_stance_response(raw: &str) -> Option<PoliticalStance> {
    let start = raw.find('{')?;
    let end = raw.rfind('}')?;
    serde_json::from_str(raw.get(start..=end)?).ok()
}

/// Stance via the agent backend, falling back to the rule table on failure.
pub(crate) fn stance_from_backend(backend: &dyn Backend, profile: &CensusProfile, seed: u64) -> PoliticalStance {
    let prompt = stance_prompt(profile);
    let request = BackendRequest { tier: assign_model_tier(profile), prompt: &prompt, task: Task::Stance { profile, seed } };
    for _ in 0..2 {
        match backend.complete(&request) {
            Ok(raw) => {
                if let Some(stance) = parse_stance_response(&raw) {
                    return stance;
                }
            }
            Err(e) => warn!(user = profile.user_id, "stance backend error: {e}"),
        }
    }
    warn!(user = profile.user_id, "falling back to rule-table stance");
    assign_political_stance(profile, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::tests::profile;

    fn fig_persona() -> CensusProfile {
        CensusProfile {
            user_id: 16,
            age: 28,
            workclass: "Private".into(),
            education: "Bachelors".into(),
            marital_status: "Never-married".into(),
            occupation: "Craft-repair".into(),
            relationship: "Not-in-family".into(),
            race: "Black".into(),
            sex: "Male".into(),
            hours_per_week: 60,
            native_country: "United-States".into(),
        }
    }

    #[test]
    fn label_shape() {
        let s = PoliticalStance { ideology: Ideology::CenterLeft, turnout: TurnoutPropensity::Rare };
        assert_eq!(s.label(), "Slight center-left, rarely votes");
        let fig = assign_political_stance(&fig_persona(), 0);
        let label = fig.label();
        let (ideo, prop) = label.split_once(", ").unwrap();
        assert!(Ideology::ALL.iter().any(|i| i.phrase() == ideo));
        assert!(prop.ends_with("votes"));
    }

    #[test]
    fn unjittered_scores_for_reference_persona() {
        // 28y (-1), Bachelors (0), Craft-repair (+1), Never-married (-1).
        assert_eq!(ideology_score(&fig_persona()), -1);
        assert_eq!(turnout_score(&fig_persona(), -1), 0);
    }

    #[test]
    fn deterministic_under_seed() {
        let p = profile(3, 52, "Masters", "Sales");
        assert_eq!(assign_political_stance(&p, 9), assign_political_stance(&p, 9));
    }

    #[test]
    fn parse_backend_reply() {
        let s = parse_stance_response("sure: {\"ideology\": \"center-left\", \"turnout\": \"rare\"}").unwrap();
        assert_eq!(s.label(), "Slight center-left, rarely votes");
        assert!(parse_stance_response("{\"ideology\": \"left\"}").is_none());
    }
}
