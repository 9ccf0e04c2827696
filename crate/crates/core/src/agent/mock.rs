//! Deterministic stand-in for the language-model agents.
//!
//! Engagement: like a post iff its topic matches an interest, its author is
//! followed, or it is ranked first and a 0.3 coin lands. A like becomes a
//! reply with probability 0.05. After a like on an unfollowed author the
//! agent follows with probability 0.2; a followed author posting on a topic
//! leaning against the agent's ideology is unfollowed with probability 0.1.
//!
//! Likelihood: starts from the turnout propensity (3/2/1) and moves at most
//! one step per session. Step up with probability
//! `1 - (1 - p_banner)(1 - p_contagion)` where `p_banner` is 0.05 for the
//! informational banner and `min(0.03 + 0.02 k + 0.04 c, 0.25)` for the
//! social banner listing `k` followed voters (`c` of them close friends).
//! Otherwise, with probability 0.3, step one point back toward the baseline.
//!
//! Contagion: feed posts carrying the voting marker raise `p_contagion` by
//! `rate` (followed author) or `rate / 2` (anyone else), capped at 0.3.
//! Authors with likelihood >= 3 add the marker to half of their posts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::backend::{Backend, BackendError, BackendRequest, Task};
use super::{AgentDecision, Engage, Engagement, FollowAction, MAX_LIKELIHOOD};
use crate::feed::{FeedItem, Round};
use crate::population::bootstrap::mock_bootstrap_reply;
use crate::population::catalog::{base_topic, topic_lean, TopicLean};
use crate::population::{assign_political_stance, Ideology, TurnoutPropensity, UserId, UserRecord};
use crate::rng::{self, tag};

/// Hashtag the mock appends to posts by authors planning to vote.
pub const VOTE_MARKER: &str = "#PlanToVote";

pub const LIKE_TOP_POST: f64 = 0.3;
pub const REPLY_GIVEN_LIKE: f64 = 0.05;
pub const FOLLOW_AFTER_LIKE: f64 = 0.2;
pub const UNFOLLOW_ON_MISMATCH: f64 = 0.1;
pub const INFO_STEP_UP: f64 = 0.05;
pub const REVERSION: f64 = 0.3;
pub const CONTAGION_CAP: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockConfig {
    pub contagion: bool,
    pub contagion_rate: f64,
}

impl Default for MockConfig {
    fn default() -> Self {
        MockConfig { contagion: true, contagion_rate: 0.06 }
    }
}

/// Banner as the mock perceives it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BannerSignal {
    None,
    Info,
    Social { listed: usize, close_friends_listed: usize },
}

impl BannerSignal {
    pub fn step_up_probability(self) -> f64 {
        match self {
            BannerSignal::None => 0.0,
            BannerSignal::Info => INFO_STEP_UP,
            BannerSignal::Social { listed, close_friends_listed } => {
                (0.03 + 0.02 * listed as f64 + 0.04 * close_friends_listed as f64).min(0.25)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostSignal {
    pub topic_match: bool,
    pub author_followed: bool,
    pub lean: i8,
    pub voting_marker: bool,
}

/// The parts of a session prompt the mock reacts to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionFeatures {
    pub user_id: UserId,
    pub round: Round,
    pub ideology: Ideology,
    pub propensity: TurnoutPropensity,
    pub last_likelihood: Option<u8>,
    pub banner: BannerSignal,
    pub posts: Vec<PostSignal>,
}

fn lean_of(topic: &str) -> i8 {
    match topic_lean(topic) {
        TopicLean::Left => -1,
        TopicLean::Neutral => 0,
        TopicLean::Right => 1,
    }
}

impl SessionFeatures {
    pub fn new(
        user: &UserRecord,
        round: Round,
        last_likelihood: Option<u8>,
        banner: BannerSignal,
        ranked_feed: &[FeedItem],
    ) -> Self {
        let base = |t: &str| base_topic(t).to_string();
        SessionFeatures {
            user_id: user.id(),
            round,
            ideology: user.stance.ideology,
            propensity: user.stance.turnout,
            last_likelihood,
            banner,
            posts: ranked_feed
                .iter()
                .map(|item| PostSignal {
                    topic_match: user.interests.contains(&base(&item.topic)),
                    author_followed: item.context.followed,
                    lean: lean_of(&item.topic),
                    voting_marker: item.text.contains(VOTE_MARKER),
                })
                .collect(),
        }
    }
}

/// Features for a content-creation request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostFeatures {
    pub user_id: UserId,
    pub round: Round,
    pub interests: Vec<String>,
    pub ideology: Ideology,
    pub likelihood: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MockBackend {
    pub seed: u64,
    pub config: MockConfig,
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        MockBackend { seed, config: MockConfig::default() }
    }

    pub fn with_config(seed: u64, config: MockConfig) -> Self {
        MockBackend { seed, config }
    }

    pub fn contagion_probability(&self, f: &SessionFeatures) -> f64 {
        if !self.config.contagion {
            return 0.0;
        }
        let weight: f64 = f
            .posts
            .iter()
            .filter(|p| p.voting_marker)
            .map(|p| if p.author_followed { self.config.contagion_rate } else { self.config.contagion_rate / 2.0 })
            .sum();
        weight.min(CONTAGION_CAP)
    }

    pub fn decide(&self, f: &SessionFeatures) -> AgentDecision {
        let mut rng = rng::keyed(self.seed, &[tag::SESSION, f.user_id, f.round as u64]);
        let side = f.ideology.side();
        let mut engagements = Vec::with_capacity(f.posts.len());
        for (i, p) in f.posts.iter().enumerate() {
            let (d_like, d_reply, d_follow): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
            let like = p.topic_match || p.author_followed || (i == 0 && d_like < LIKE_TOP_POST);
            let engage = match (like, d_reply < REPLY_GIVEN_LIKE) {
                (false, _) => Engage::Nothing,
                (true, false) => Engage::Like,
                (true, true) => Engage::Reply,
            };
            let mismatch = side != 0 && p.lean == -side;
            let follow_action = if like && !p.author_followed && d_follow < FOLLOW_AFTER_LIKE {
                FollowAction::Follow
            } else if p.author_followed && mismatch && d_follow < UNFOLLOW_ON_MISMATCH {
                FollowAction::Unfollow
            } else {
                FollowAction::NoChange
            };
            let reply_text = if engage == Engage::Reply { "Well said, I feel the same way.".to_string() } else { String::new() };
            engagements.push(Engagement { post_number: i + 1, engage, reply_text, follow_action });
        }

        let (u_up, u_down): (f64, f64) = (rng.gen(), rng.gen());
        let base = f.propensity.base_likelihood();
        let previous = f.last_likelihood.unwrap_or(base);
        let p_banner = f.banner.step_up_probability();
        let p_up = 1.0 - (1.0 - p_banner) * (1.0 - self.contagion_probability(f));
        let voting_likelihood = if u_up < p_up {
            (previous + 1).min(MAX_LIKELIHOOD)
        } else if u_down < REVERSION {
            match previous.cmp(&base) {
                std::cmp::Ordering::Greater => previous - 1,
                std::cmp::Ordering::Less => previous + 1,
                std::cmp::Ordering::Equal => previous,
            }
        } else {
            previous
        };

        let likes = engagements.iter().filter(|e| e.engage == Engage::Like).count() as i64;
        let replied = i64::from(engagements.iter().any(|e| e.engage == Engage::Reply));
        let next_activity_time = (6 - likes - replied).clamp(1, 6) as u8;
        AgentDecision { engagements, voting_likelihood, next_activity_time }
    }

    pub fn vote(&self, user_id: UserId, likelihood: u8) -> u8 {
        let draw = rng::unit_draw(self.seed, &[tag::VOTE, user_id]);
        super::session::vote_from_draw(likelihood, draw)
    }

    pub fn compose(&self, f: &PostFeatures) -> (String, String) {
        let mut rng = rng::keyed(self.seed, &[tag::POST, f.user_id, f.round as u64]);
        let topic = if f.interests.is_empty() {
            "Local News".to_string()
        } else {
            f.interests[rng.gen_range(0..f.interests.len())].clone()
        };
        let opener = [
            "Been thinking a lot about {} lately.",
            "Anyone else following {} news this week?",
            "{} matters more than people admit.",
            "Spent the evening reading about {}.",
        ][rng.gen_range(0..4)]
        .replace("{}", &topic);
        let closer = match f.ideology.side() {
            -1 => "We need real change and everyone deserves a fair shot.",
            1 => "Hard work, family and community keep us strong.",
            _ => "Let's keep the conversation respectful.",
        };
        let mut text = format!("{opener} {closer}");
        if f.likelihood.unwrap_or(0) >= 3 && rng.gen_bool(0.5) {
            text.push_str(" I'm voting this election. ");
            text.push_str(VOTE_MARKER);
        }
        (topic, text)
    }
}

impl Backend for MockBackend {
    fn complete(&self, request: &BackendRequest<'_>) -> Result<String, BackendError> {
        let text = match &request.task {
            Task::Session(f) => self.decide(f).to_json(),
            Task::Bootstrap(req) => serde_json::to_string(&mock_bootstrap_reply(req)).expect("reply serializes"),
            Task::Vote { user_id, likelihood } => self.vote(*user_id, *likelihood).to_string(),
            Task::Post(f) => {
                let (topic, text) = self.compose(f);
                serde_json::json!({ "topic": topic, "text": text }).to_string()
            }
            Task::Stance { profile, seed } => {
                serde_json::to_string(&assign_political_stance(profile, *seed)).expect("stance serializes")
            }
        };
        Ok(text)
    }
}
