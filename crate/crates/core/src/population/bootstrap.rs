//! Initial social bootstrap: each user revises its follows from a candidate
//! sample, picks two to four interests and designates one to seven close
//! friends among the users it follows.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::catalog::{self, UNIVERSAL_TOPICS};
use super::{CensusProfile, ModelTier, PublicProfile, SocialGraph, UserId};
use crate::agent::{Backend, BackendRequest, Task};
use crate::rng::{self, tag};

pub const MAX_CLOSE_FRIENDS: usize = 7;
pub const MIN_INTERESTS: usize = 2;
pub const MAX_INTERESTS: usize = 4;

pub struct BootstrapRequest<'a> {
    pub profile: &'a CensusProfile,
    pub tier: ModelTier,
    pub current_follows: Vec<&'a PublicProfile>,
    pub candidates: Vec<&'a PublicProfile>,
    pub seed: u64,
}

impl BootstrapRequest<'_> {
    fn user(&self) -> UserId {
        self.profile.user_id
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BootstrapOutcome {
    /// Post-update follows, ascending.
    pub follows: Vec<UserId>,
    pub interests: Vec<String>,
    pub close_friends: Vec<UserId>,
    pub warnings: Vec<String>,
    pub used_fallback: bool,
}

/// Wire format of a bootstrap reply.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapReply {
    #[serde(default)]
    pub follow: Vec<UserId>,
    #[serde(default)]
    pub unfollow: Vec<UserId>,
    #[serde(default)]
    pub interests: Vec<String>,
    #[serde(default)]
    pub close_friends: Vec<UserId>,
}

/// Up to `k` users the given user does not follow, drawn uniformly from
/// `0..n` and returned ascending.
pub fn sample_candidates(user: UserId, graph: &SocialGraph, n: usize, k: usize, seed: u64) -> Vec<UserId> {
    let follows = graph.followees(user);
    let allowed = |c: UserId| c != user && !follows.contains(&c);
    let available = n.saturating_sub(1 + follows.len());
    if available <= k {
        return (0..n as UserId).filter(|&c| allowed(c)).collect();
    }
    let mut rng = rng::keyed(seed, &[tag::CANDIDATES, user]);
    let mut picked = BTreeSet::new();
    while picked.len() < k {
        let c = rng.gen_range(0..n as UserId);
        if allowed(c) {
            picked.insert(c);
        }
    }
    picked.into_iter().collect()
}

pub fn bootstrap_prompt(req: &BootstrapRequest<'_>) -> String {
    let p = req.profile;
    let mut s = format!(
        "You are, as a social-network user, a {}y {} {} from {}, {}, {}, {}, {}, working {} hours per week.\n",
        p.age, p.race, p.sex, p.native_country, p.workclass, p.marital_status, p.education, p.occupation, p.hours_per_week
    );
    s.push_str("Users you currently follow:\n");
    for f in &req.current_follows {
        let _ = writeln!(s, "{f}");
    }
    s.push_str("Other users on the network you do not follow:\n");
    for c in &req.candidates {
        let _ = writeln!(s, "{c}");
    }
    s.push_str("Possible interests: ");
    s.push_str(&catalog::interest_names().collect::<Vec<_>>().join(", "));
    s.push_str(
        "\n(i) Optionally follow or unfollow users based on your own personality and their public profiles.\n\
         (ii) Select two to four topics of interest from the list.\n\
         (iii) Name one to seven close friends among the users you follow after your changes.\n\
         Reply ONLY with JSON: {\"follow\": [<user_id>...], \"unfollow\": [<user_id>...], \
         \"interests\": [<topic>...], \"close_friends\": [<user_id>...]}",
    );
    s
}

/// Interests by demographic affinity: specific matches first, then
/// universal topics, 2-4 in total.
pub fn mock_interests(profile: &CensusProfile, seed: u64) -> Vec<String> {
    let mut rng = rng::keyed(seed, &[tag::BOOTSTRAP, profile.user_id, 0]);
    let k = rng.gen_range(MIN_INTERESTS..=MAX_INTERESTS);
    let mut specific = catalog::affinity_topics(profile);
    specific.shuffle(&mut rng);
    let mut universal = UNIVERSAL_TOPICS.to_vec();
    universal.shuffle(&mut rng);
    specific.into_iter().chain(universal).take(k).map(str::to_string).collect()
}

/// The affinity set `mock_interests` draws from.
pub fn interest_affinity_set(profile: &CensusProfile) -> BTreeSet<&'static str> {
    catalog::affinity_topics(profile).into_iter().chain(UNIVERSAL_TOPICS.iter().copied()).collect()
}

fn self_public(req: &BootstrapRequest<'_>) -> PublicProfile {
    super::derive_public_profile(req.profile)
}

fn mock_follow_changes(req: &BootstrapRequest<'_>) -> (Vec<UserId>, Vec<UserId>) {
    let me = self_public(req);
    let user = req.user();
    let follow = req
        .candidates
        .iter()
        .filter(|c| {
            let p = if me.shared_attributes(c) > 0 { 0.3 } else { 0.05 };
            rng::unit_draw(req.seed, &[tag::BOOTSTRAP, user, 1, c.user_id]) < p
        })
        .map(|c| c.user_id)
        .collect();
    let unfollow = req
        .current_follows
        .iter()
        .filter(|f| {
            me.shared_attributes(f) == 0 && rng::unit_draw(req.seed, &[tag::BOOTSTRAP, user, 2, f.user_id]) < 0.05
        })
        .map(|f| f.user_id)
        .collect();
    (follow, unfollow)
}

/// Close friends among `follows`: most shared public attributes first.
fn mock_close_friends(req: &BootstrapRequest<'_>, follows: &[UserId]) -> Vec<UserId> {
    let me = self_public(req);
    let user = req.user();
    let lookup = |id: UserId| {
        req.current_follows.iter().chain(&req.candidates).find(|p| p.user_id == id).map(|p| me.shared_attributes(p))
    };
    let mut scored: Vec<(usize, u64, UserId)> = follows
        .iter()
        .map(|&id| (lookup(id).unwrap_or(0), rng::mix(req.seed, &[tag::BOOTSTRAP, user, 3, id]), id))
        .collect();
    scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let count = 1 + rng::keyed(req.seed, &[tag::BOOTSTRAP, user, 4]).gen_range(0..5usize);
    scored.into_iter().take(count.min(MAX_CLOSE_FRIENDS)).map(|(_, _, id)| id).collect()
}

/// The deterministic reply the mock backend gives for a bootstrap request.
pub fn mock_bootstrap_reply(req: &BootstrapRequest<'_>) -> BootstrapReply {
    let (follow, unfollow) = mock_follow_changes(req);
    let after = apply_follow_changes(req, &follow, &unfollow);
    let after = ensure_nonempty_follows(req, after);
    BootstrapReply {
        follow,
        unfollow,
        interests: mock_interests(req.profile, req.seed),
        close_friends: mock_close_friends(req, &after),
    }
}

fn apply_follow_changes(req: &BootstrapRequest<'_>, follow: &[UserId], unfollow: &[UserId]) -> Vec<UserId> {
    let mut set: BTreeSet<UserId> = req.current_follows.iter().map(|p| p.user_id).collect();
    for id in unfollow {
        set.remove(id);
    }
    set.extend(follow.iter().copied().filter(|id| req.candidates.iter().any(|c| c.user_id == *id)));
    set.into_iter().collect()
}

/// Close friends must be followed, so a user left following nobody follows
/// the candidate it shares most with.
fn ensure_nonempty_follows(req: &BootstrapRequest<'_>, follows: Vec<UserId>) -> Vec<UserId> {
    if !follows.is_empty() {
        return follows;
    }
    let me = self_public(req);
    req.candidates
        .iter()
        .chain(&req.current_follows)
        .max_by(|a, b| me.shared_attributes(a).cmp(&me.shared_attributes(b)).then(b.user_id.cmp(&a.user_id)))
        .map(|p| vec![p.user_id])
        .unwrap_or_default()
}

/// Validates a raw bootstrap reply against the request, repairing what can
/// be repaired (clamps, unknown ids) and reporting each repair as a warning.
pub fn parse_bootstrap_response(raw: &str, req: &BootstrapRequest<'_>) -> Result<BootstrapOutcome, String> {
    let start = raw.find('{').ok_or("no JSON object in reply")?;
    let end = raw.rfind('}').ok_or("no JSON object in reply")?;
    if end < start {
        return Err("no JSON object in reply".into());
    }
    let reply: BootstrapReply = serde_json::from_str(&raw[start..=end]).map_err(|e| e.to_string())?;
    let mut warnings = Vec::new();

    let bad_follow: Vec<_> =
        reply.follow.iter().filter(|id| !req.candidates.iter().any(|c| c.user_id == **id)).collect();
    if !bad_follow.is_empty() {
        warnings.push(format!("ignored follow of non-candidates {bad_follow:?}"));
    }
    let follows = ensure_nonempty_follows(req, apply_follow_changes(req, &reply.follow, &reply.unfollow));

    let mut interests: Vec<String> = Vec::new();
    for topic in &reply.interests {
        if !catalog::is_catalog_topic(topic) {
            warnings.push(format!("ignored unknown interest {topic:?}"));
        } else if !interests.contains(topic) {
            interests.push(topic.clone());
        }
    }
    if interests.len() > MAX_INTERESTS {
        warnings.push(format!("{} interests truncated to {MAX_INTERESTS}", interests.len()));
        interests.truncate(MAX_INTERESTS);
    }
    if interests.len() < MIN_INTERESTS {
        warnings.push(format!("only {} valid interests; padded by affinity rule", interests.len()));
        for topic in mock_interests(req.profile, req.seed).into_iter().chain(UNIVERSAL_TOPICS.iter().map(|t| t.to_string())) {
            if interests.len() >= MIN_INTERESTS {
                break;
            }
            if !interests.contains(&topic) {
                interests.push(topic);
            }
        }
    }

    let mut close_friends: Vec<UserId> = Vec::new();
    for id in &reply.close_friends {
        if !follows.contains(id) {
            warnings.push(format!("close friend {id} is not followed; ignored"));
        } else if !close_friends.contains(id) {
            close_friends.push(*id);
        }
    }
    if close_friends.len() > MAX_CLOSE_FRIENDS {
        warnings.push(format!("{} close friends truncated to {MAX_CLOSE_FRIENDS}", close_friends.len()));
        close_friends.truncate(MAX_CLOSE_FRIENDS);
    }
    if close_friends.is_empty() {
        warnings.push("no valid close friends; chosen by affinity rule".into());
        close_friends = mock_close_friends(req, &follows);
    }
    close_friends.sort_unstable();
    for w in &warnings {
        warn!(user = req.user(), "bootstrap: {w}");
    }
    Ok(BootstrapOutcome { follows, interests, close_friends, warnings, used_fallback: false })
}

fn fallback_outcome(req: &BootstrapRequest<'_>) -> BootstrapOutcome {
    let follows = ensure_nonempty_follows(req, req.current_follows.iter().map(|p| p.user_id).collect());
    let mut close_friends = mock_close_friends(req, &follows);
    close_friends.sort_unstable();
    BootstrapOutcome {
        interests: mock_interests(req.profile, req.seed),
        close_friends,
        follows,
        warnings: vec!["backend failed twice; kept initial follows".into()],
        used_fallback: true,
    }
}

/// Runs the bootstrap exchange for one user: one retry on backend or parse
/// failure, then the rule-based fallback.
pub fn bootstrap_social_attributes(backend: &dyn Backend, req: &BootstrapRequest<'_>) -> BootstrapOutcome {
    let prompt = bootstrap_prompt(req);
    let request = BackendRequest { tier: req.tier, prompt: &prompt, task: Task::Bootstrap(req) };
    for attempt in 0..2 {
        match backend.complete(&request).map_err(|e| e.to_string()).and_then(|raw| parse_bootstrap_response(&raw, req)) {
            Ok(outcome) => return outcome,
            Err(e) => warn!(user = req.user(), attempt, "bootstrap failed: {e}"),
        }
    }
    fallback_outcome(req)
}
