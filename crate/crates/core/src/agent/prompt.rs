//! Session prompt rendering. Stages, in order: persona, context restoration
//! (returning users only), content feed, voting-intention survey, guidelines.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::Engage;
use crate::feed::{FeedItem, Round};
use crate::population::{CensusProfile, PoliticalStance, UserId, UserRecord};

pub const SCALE_ANCHORS: [&str; 5] = [
    "0 - Definitely will not vote",
    "1 - Probably will not vote",
    "2 - Might or might not vote",
    "3 - Probably will vote",
    "4 - Definitely will vote",
];

/// Summary of the previous session restored into the next prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionHistory {
    pub last_round: Round,
    /// At most three (post text, action, reply text) entries.
    pub last_engagements: Vec<(String, Engage, String)>,
    pub last_likelihood: u8,
}

pub const MAX_RESTORED_ENGAGEMENTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPrompt {
    pub persona: String,
    pub context_restoration: Option<String>,
    pub feed_block: String,
    pub intention_survey: String,
    pub guidelines: String,
}

impl SessionPrompt {
    pub fn render(&self) -> String {
        let mut parts = vec![self.persona.as_str()];
        if let Some(ctx) = &self.context_restoration {
            parts.push(ctx);
        }
        parts.extend([self.feed_block.as_str(), self.intention_survey.as_str(), self.guidelines.as_str()]);
        parts.join("\n\n")
    }
}

fn employment_phrase(p: &CensusProfile) -> String {
    let sector = match p.workclass.as_str() {
        "Self-emp-not-inc" | "Self-emp-inc" => "self-employed ",
        "Federal-gov" => "federal-government ",
        "State-gov" => "state-government ",
        "Local-gov" => "local-government ",
        "Without-pay" => "unpaid ",
        _ => "",
    };
    if p.workclass == "Never-worked" {
        return "never employed".to_string();
    }
    match p.hours_per_week {
        0..=19 => format!("part-time {sector}worker with short hours"),
        20..=34 => format!("part-time {sector}worker"),
        35..=44 => format!("full-time {sector}worker"),
        45..=54 => format!("full-time {sector}worker with long hours"),
        _ => format!("full-time {sector}worker with very long hours"),
    }
}

fn marital_phrase(status: &str) -> String {
    match status {
        "Married-civ-spouse" => "married".to_string(),
        "Married-AF-spouse" => "married to an armed-forces spouse".to_string(),
        "Married-spouse-absent" => "married with spouse absent".to_string(),
        other => other.to_ascii_lowercase(),
    }
}

fn join_ids(ids: &BTreeSet<UserId>) -> String {
    ids.iter().map(|id| id.to_string()).collect::<Vec<_>>().join(",")
}

/// The identity sentence shared by session prompts and the election inquiry.
pub fn persona_sentence(user: &UserRecord, close_friends: &BTreeSet<UserId>) -> String {
    let p = &user.profile;
    let mut s = format!(
        "You are, as a social-network user, a {}y {} {} from {}, {}, {}, {}, {}, interests:{}.",
        p.age,
        p.race,
        p.sex,
        p.native_country,
        employment_phrase(p),
        marital_phrase(&p.marital_status),
        p.education,
        p.occupation,
        user.interests.join(","),
    );
    if !close_friends.is_empty() {
        let _ = write!(s, " You are close-friend with Users:{}.", join_ids(close_friends));
    }
    s
}

fn render_context(history: &SessionHistory) -> String {
    let mut s = format!("Last Round:{}\nLast Engagement:", history.last_round);
    if history.last_engagements.is_empty() {
        s.push_str(" none");
    }
    for (text, action, reply) in history.last_engagements.iter().take(MAX_RESTORED_ENGAGEMENTS) {
        let _ = write!(s, "\nPost: {text}\nAction: {}", action.as_str());
        if *action == Engage::Reply {
            let _ = write!(s, "\nReply: {reply}");
        }
    }
    let _ = write!(s, "\nYour previous voting likelihood: {}/4", history.last_likelihood);
    s
}

pub fn render_feed_block(feed: &[FeedItem]) -> String {
    let mut s = String::from("Feed:");
    if feed.is_empty() {
        s.push_str("\n(no new posts)");
    }
    for (i, item) in feed.iter().enumerate() {
        let c = &item.context;
        let _ = write!(
            s,
            "\nPost:{}\nAuthor:{}\nFollowed: {}\nTopic: {}\nFollowing Likes: {}\nFollowing Replies: {}\nTotal Replies: {}",
            i + 1,
            c.author_public,
            if c.followed { "Yes" } else { "No" },
            item.topic,
            c.following_likes,
            c.following_replies,
            c.total_replies,
        );
        if let Some(reply) = &c.representative_reply {
            let _ = write!(s, "\nRepresentative Reply: {reply}");
        }
        let _ = write!(s, "\nText: {}", item.text);
    }
    s
}

/// The voting-intention survey. A banner, when present, directly follows
/// the countdown sentence; the reminder line needs a previous response.
pub fn render_intention_survey(days_to_election: u32, last: Option<(Round, u8)>, banner: Option<&str>) -> String {
    let mut s = format!("The election is in {days_to_election} days.");
    if let Some(b) = banner {
        s.push(' ');
        s.push_str(b);
    }
    s.push_str(
        "\nAs someone with your background and values, consider realistically how likely you are to vote in the upcoming election:\nOn a scale from 0 to 4, where:",
    );
    for anchor in SCALE_ANCHORS {
        s.push('\n');
        s.push_str(anchor);
    }
    if let Some((round, value)) = last {
        let _ = write!(s, "\nIn your last response (round {round}), your voting likelihood was: {value}/4.");
    }
    s
}

pub fn render_guidelines(stance: &PoliticalStance) -> String {
    format!(
        r#"Given above posts, decide which posts to engage with. Reply ONLY in valid JSON format, NO additional text or comments.
Output must precisely match this schema:
{{
  "engagement": [
    {{
      "post_number": <int>,
      "engage": "nothing"|"like"|"reply",
      "reply_text": <string>,
      "follow_action": "follow"|"unfollow"|"no_change"
    }}, ...
  ],
  "voting_likelihood": <int>, // Must be 0-4 integer **based on your POLITICAL STANCE: {label}**
  "next_activity_time": <int> // Must be between 0 and 6 based on your persona and engagement
}}
CRITICAL RULES:
1.Use DOUBLE QUOTES for ALL keys and string values
2.Do NOT use any escape characters like \ , \" or \'
3.Include "reply_text" field ONLY when "engage" is "reply"
4.Include "follow_action" for each post to decide whether to follow/unfollow the author, if you like to see more/less from them
5.Ensure ALL JSON is properly terminated with closing brackets
6.STRONGLY prefer "like" over "reply", Very RARELY use "reply"
7.Posts higher in the feed, higher post-sentiment, with engagement from users you follow, or from authors you follow → MORE LIKELY TO ENGAGE
8.Your response MUST be ONLY the JSON object, nothing else
**React as a real social media user would with your persona, political stance, social ties, and values.**"#,
        label = stance.label()
    )
}

pub fn build_session_prompt(
    user: &UserRecord,
    close_friends: &BTreeSet<UserId>,
    current_round: Round,
    history: Option<&SessionHistory>,
    ranked_feed: &[FeedItem],
    days_to_election: u32,
    banner: Option<&str>,
) -> SessionPrompt {
    SessionPrompt {
        persona: format!("{}\nRound:{current_round}", persona_sentence(user, close_friends)),
        context_restoration: history.map(render_context),
        feed_block: render_feed_block(ranked_feed),
        intention_survey: render_intention_survey(
            days_to_election,
            history.map(|h| (h.last_round, h.last_likelihood)),
            banner,
        ),
        guidelines: render_guidelines(&user.stance),
    }
}

/// Election-day inquiry: persona, stance, latest likelihood, scale anchors
/// and the binary reply instruction.
pub fn render_election_inquiry(user: &UserRecord, close_friends: &BTreeSet<UserId>, likelihood: u8) -> String {
    let mut s = persona_sentence(user, close_friends);
    let _ = write!(
        s,
        "\n\nThis is the election day. Your political stance is ({}) and your most recent voting likelihood was {likelihood}/4, where:",
        user.stance.label()
    );
    for anchor in SCALE_ANCHORS {
        s.push('\n');
        s.push_str(anchor);
    }
    let _ = write!(
        s,
        "\n\nConsidering your **voting likelihood of {likelihood}/4**, reply with ONLY '1' if you voted or '0' if you did not vote."
    );
    s
}

pub fn render_post_request(
    user: &UserRecord,
    close_friends: &BTreeSet<UserId>,
    current_round: Round,
    recent_feed: &[FeedItem],
) -> String {
    let mut s = format!("{}\nRound:{current_round}\n\nRecent posts you saw:", persona_sentence(user, close_friends));
    if recent_feed.is_empty() {
        s.push_str(" none");
    }
    for item in recent_feed {
        let _ = write!(s, "\n- [{}] {}", item.topic, item.text);
    }
    let _ = write!(
        s,
        "\n\nWrite one new social media post (at most 280 characters) that reflects your persona, your interests, and, \
         when relevant, current political or social topics. Your political stance: {}.\n\
         Reply ONLY with JSON: {{\"topic\": <one of your interests>, \"text\": <string>}}",
        user.stance.label()
    );
    s
}
