//! Parsing and validation of the per-session JSON decision.

use serde_json::{Map, Value};
use thiserror::Error;
use tracing::warn;

use super::{AgentDecision, Engage, Engagement, FollowAction, MAX_LIKELIHOOD, MAX_NEXT_ACTIVITY};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("unparseable response: {0}")]
    Parse(String),
    #[error("schema violation: {0}")]
    Schema(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedDecision {
    pub decision: AgentDecision,
    pub warnings: Vec<String>,
}

fn schema(msg: impl Into<String>) -> ProtocolError {
    ProtocolError::Schema(msg.into())
}

/// Slices from the first `{` to the last `}`, dropping any chatter around
/// the JSON object.
fn json_span(raw: &str) -> Result<&str, ProtocolError> {
    let start = raw.find('{').ok_or_else(|| ProtocolError::Parse("no JSON object found".into()))?;
    let end = raw.rfind('}').filter(|&e| e > start).ok_or_else(|| ProtocolError::Parse("unterminated JSON object".into()))?;
    Ok(&raw[start..=end])
}

fn bounded_int(obj: &Map<String, Value>, key: &str, max: u8, warnings: &mut Vec<String>) -> Result<u8, ProtocolError> {
    let v = obj.get(key).ok_or_else(|| schema(format!("missing {key}")))?;
    let n = v.as_i64().ok_or_else(|| schema(format!("{key} must be an integer, got {v}")))?;
    let clamped = n.clamp(0, max as i64);
    if clamped != n {
        warnings.push(format!("{key} {n} clamped to {clamped}"));
    }
    Ok(clamped as u8)
}

fn parse_engagement(entry: &Value, warnings: &mut Vec<String>) -> Result<Engagement, ProtocolError> {
    let obj = entry.as_object().ok_or_else(|| schema("engagement entry must be an object"))?;
    let post_number = obj
        .get("post_number")
        .ok_or_else(|| schema("engagement entry missing post_number"))?
        .as_u64()
        .ok_or_else(|| schema("post_number must be a positive integer"))? as usize;
    let engage = match obj.get("engage").and_then(Value::as_str) {
        Some("nothing") => Engage::Nothing,
        Some("like") => Engage::Like,
        Some("reply") => Engage::Reply,
        Some(other) => return Err(schema(format!("post {post_number}: unknown engage value {other:?}"))),
        None => return Err(schema(format!("post {post_number}: missing engage"))),
    };
    let follow_action = match obj.get("follow_action") {
        None => {
            warnings.push(format!("post {post_number}: follow_action missing, treated as no_change"));
            FollowAction::NoChange
        }
        Some(v) => match v.as_str() {
            Some("follow") => FollowAction::Follow,
            Some("unfollow") => FollowAction::Unfollow,
            Some("no_change") => FollowAction::NoChange,
            _ => return Err(schema(format!("post {post_number}: unknown follow_action {v}"))),
        },
    };
    let reply_text = match obj.get("reply_text") {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.trim().to_string(),
        Some(other) => return Err(schema(format!("post {post_number}: reply_text must be a string, got {other}"))),
    };
    let reply_text = match engage {
        Engage::Reply if reply_text.is_empty() => {
            return Err(schema(format!("post {post_number}: reply without reply_text")))
        }
        Engage::Reply => reply_text,
        _ if !reply_text.is_empty() => {
            warnings.push(format!("post {post_number}: reply_text ignored for engage {}", engage.as_str()));
            String::new()
        }
        _ => reply_text,
    };
    Ok(Engagement { post_number, engage, reply_text, follow_action })
}

/// Strict parse of a raw backend reply for a feed of `num_posts` posts.
/// Out-of-range likelihood and next-activity values are clamped with a
/// warning; everything else that deviates from the schema is an error.
pub fn parse_decision(raw: &str, num_posts: usize) -> Result<ParsedDecision, ProtocolError> {
    let value: Value = serde_json::from_str(json_span(raw)?).map_err(|e| ProtocolError::Parse(e.to_string()))?;
    let obj = value.as_object().ok_or_else(|| schema("top level must be an object"))?;
    let mut warnings = Vec::new();

    let entries = obj
        .get("engagement")
        .ok_or_else(|| schema("missing engagement"))?
        .as_array()
        .ok_or_else(|| schema("engagement must be an array"))?;
    let mut engagements: Vec<Engagement> = Vec::with_capacity(entries.len());
    let mut seen = vec![false; num_posts];
    for entry in entries {
        let e = parse_engagement(entry, &mut warnings)?;
        if e.post_number == 0 || e.post_number > num_posts {
            return Err(schema(format!("post_number {} outside 1..={num_posts}", e.post_number)));
        }
        if std::mem::replace(&mut seen[e.post_number - 1], true) {
            return Err(schema(format!("duplicate post_number {}", e.post_number)));
        }
        engagements.push(e);
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(schema(format!("missing engagement for post_number {}", missing + 1)));
    }
    engagements.sort_by_key(|e| e.post_number);

    let voting_likelihood = bounded_int(obj, "voting_likelihood", MAX_LIKELIHOOD, &mut warnings)?;
    let next_activity_time = bounded_int(obj, "next_activity_time", MAX_NEXT_ACTIVITY, &mut warnings)?;
    for w in &warnings {
        warn!("decision: {w}");
    }
    Ok(ParsedDecision { decision: AgentDecision { engagements, voting_likelihood, next_activity_time }, warnings })
}
