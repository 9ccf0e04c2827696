//! Agent sessions: prompt rendering, the decision protocol, and the
//! pluggable backends that produce decisions.

mod backend;
pub mod mock;
pub mod prompt;
mod protocol;
mod session;

use serde::{Deserialize, Serialize};

use crate::feed::Round;

pub use backend::{Backend, BackendConfig, BackendError, BackendKind, BackendRequest, HttpBackend, Task, API_KEY_ENV};
pub use mock::{BannerSignal, MockBackend, MockConfig, PostFeatures, PostSignal, SessionFeatures, VOTE_MARKER};
pub use prompt::{build_session_prompt, render_intention_survey, SessionHistory, SessionPrompt};
pub use protocol::{parse_decision, ParsedDecision, ProtocolError};
pub use session::{
    decide_session, election_inquiry, fallback_decision, generate_post, parse_vote, GeneratedPost, SessionOutcome,
    VoteOutcome, MAX_POST_CHARS, TURNOUT_TABLE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engage {
    Nothing,
    Like,
    Reply,
}

impl Engage {
    pub fn as_str(self) -> &'static str {
        match self {
            Engage::Nothing => "nothing",
            Engage::Like => "like",
            Engage::Reply => "reply",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FollowAction {
    Follow,
    Unfollow,
    NoChange,
}

impl FollowAction {
    pub fn as_str(self) -> &'static str {
        match self {
            FollowAction::Follow => "follow",
            FollowAction::Unfollow => "unfollow",
            FollowAction::NoChange => "no_change",
        }
    }
}

/// One per shown post; `post_number` is the 1-based feed position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Engagement {
    pub post_number: usize,
    pub engage: Engage,
    pub reply_text: String,
    pub follow_action: FollowAction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentDecision {
    #[serde(rename = "engagement")]
    pub engagements: Vec<Engagement>,
    pub voting_likelihood: u8,
    pub next_activity_time: u8,
}

pub const MAX_LIKELIHOOD: u8 = 4;
pub const MAX_NEXT_ACTIVITY: u8 = 6;

impl AgentDecision {
    /// The wire form (same schema the agent is asked to produce).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("decisions serialize")
    }

    pub fn likes(&self) -> usize {
        self.engagements.iter().filter(|e| e.engage == Engage::Like).count()
    }

    pub fn replied(&self) -> bool {
        self.engagements.iter().any(|e| e.engage == Engage::Reply)
    }
}

/// Round at which a decision was made, with its position in history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikelihoodReport {
    pub round: Round,
    pub value: u8,
}
