//! Backend round trips with retry and fallback handling.

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::backend::{Backend, BackendRequest, Task};
use super::mock::{PostFeatures, SessionFeatures};
use super::protocol::parse_decision;
use super::{AgentDecision, Engage, Engagement, FollowAction, MAX_LIKELIHOOD};
use crate::population::catalog::is_catalog_topic;
use crate::population::{ModelTier, UserId};

pub const MAX_POST_CHARS: usize = 280;

/// Probability that the mock votes, indexed by final likelihood.
pub const TURNOUT_TABLE: [f64; 5] = [0.02, 0.20, 0.50, 0.80, 0.97];

pub(crate) fn vote_from_draw(likelihood: u8, draw: f64) -> u8 {
    let p = TURNOUT_TABLE[likelihood.min(MAX_LIKELIHOOD) as usize];
    u8::from(draw < p)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub decision: AgentDecision,
    pub warnings: Vec<String>,
    pub attempts: u32,
    pub used_fallback: bool,
}

/// All posts ignored, likelihood carried over (2 without history), and a
/// mid-range return time.
pub fn fallback_decision(num_posts: usize, previous_likelihood: Option<u8>) -> AgentDecision {
    AgentDecision {
        engagements: (1..=num_posts)
            .map(|post_number| Engagement {
                post_number,
                engage: Engage::Nothing,
                reply_text: String::new(),
                follow_action: FollowAction::NoChange,
            })
            .collect(),
        voting_likelihood: previous_likelihood.unwrap_or(2),
        next_activity_time: 3,
    }
}

/// One session: request, parse, one retry on failure, then fallback.
pub fn decide_session(
    backend: &dyn Backend,
    tier: ModelTier,
    prompt: &str,
    features: &SessionFeatures,
) -> SessionOutcome {
    let num_posts = features.posts.len();
    let request = BackendRequest { tier, prompt, task: Task::Session(features) };
    let mut warnings = Vec::new();
    for attempt in 1..=2 {
        match backend.complete(&request) {
            Ok(raw) => match parse_decision(&raw, num_posts) {
                Ok(parsed) => {
                    warnings.extend(parsed.warnings);
                    return SessionOutcome { decision: parsed.decision, warnings, attempts: attempt, used_fallback: false };
                }
                Err(e) => warnings.push(format!("attempt {attempt}: {e}")),
            },
            Err(e) => warnings.push(format!("attempt {attempt}: {e}")),
        }
    }
    warn!(user = features.user_id, round = features.round, "session fell back: {}", warnings.join("; "));
    SessionOutcome {
        decision: fallback_decision(num_posts, features.last_likelihood),
        warnings,
        attempts: 2,
        used_fallback: true,
    }
}

/// Accepts a reply whose first non-space character is `0` or `1`.
pub fn parse_vote(raw: &str) -> Option<u8> {
    let t = raw.trim().trim_start_matches(['"', '\'', '`']);
    match t.chars().next()? {
        '0' => Some(0),
        '1' => Some(1),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteOutcome {
    pub vote: u8,
    pub used_fallback: bool,
}

/// Election-day question. Unusable replies are retried once; after that
/// the agent is counted as voting iff its likelihood is at least 3.
pub fn election_inquiry(
    backend: &dyn Backend,
    tier: ModelTier,
    prompt: &str,
    user_id: UserId,
    likelihood: u8,
) -> VoteOutcome {
    let request = BackendRequest { tier, prompt, task: Task::Vote { user_id, likelihood } };
    for attempt in 1..=2 {
        match backend.complete(&request) {
            Ok(raw) => match parse_vote(&raw) {
                Some(vote) => return VoteOutcome { vote, used_fallback: false },
                None => warn!(user = user_id, attempt, "unusable vote reply {raw:?}"),
            },
            Err(e) => warn!(user = user_id, attempt, "vote request failed: {e}"),
        }
    }
    VoteOutcome { vote: u8::from(likelihood >= 3), used_fallback: true }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedPost {
    pub topic: String,
    pub text: String,
}

fn parse_post(raw: &str) -> Option<GeneratedPost> {
    let start = raw.find('{')?;
    let end = raw.rfind('}')?;
    if end < start {
        return None;
    }
    let v: serde_json::Value = serde_json::from_str(&raw[start..=end]).ok()?;
    let topic = v.get("topic")?.as_str()?.trim().to_string();
    let text = v.get("text")?.as_str()?.trim().to_string();
    if topic.is_empty() || text.is_empty() {
        return None;
    }
    let topic = if is_catalog_topic(&topic) { topic } else { format!("general-{topic}") };
    let text = if text.chars().count() > MAX_POST_CHARS { text.chars().take(MAX_POST_CHARS).collect() } else { text };
    Some(GeneratedPost { topic, text })
}

/// Asks a content creator for a post; `None` if both attempts fail.
pub fn generate_post(
    backend: &dyn Backend,
    tier: ModelTier,
    prompt: &str,
    features: &PostFeatures,
) -> Option<GeneratedPost> {
    let request = BackendRequest { tier, prompt, task: Task::Post(features) };
    for attempt in 1..=2 {
        match backend.complete(&request) {
            Ok(raw) => match parse_post(&raw) {
                Some(post) => return Some(post),
                None => warn!(user = features.user_id, attempt, "unusable post reply"),
            },
            Err(e) => warn!(user = features.user_id, attempt, "post request failed: {e}"),
        }
    }
    None
}
