//! Content pool, view ledger and the three-stage feed pipeline: freshness
//! filter, bucketed sampling, tiered ranking.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::population::catalog::base_topic;
use crate::population::{PublicProfile, SocialGraph, UserId};
use crate::rng;

pub type PostId = u64;
pub type Round = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub user_id: UserId,
    pub text: String,
    pub round: Round,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub post_id: PostId,
    pub author_id: UserId,
    pub text: String,
    pub topic: String,
    pub created_round: Round,
    pub likes: BTreeSet<UserId>,
    pub replies: Vec<Reply>,
    #[serde(default)]
    pub sentiment: f64,
}

impl Post {
    pub fn engagement(&self) -> usize {
        self.likes.len() + self.replies.len()
    }
}

/// All posts, indexed by id (`post_id == index`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContentPool {
    posts: Vec<Post>,
}

impl ContentPool {
    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn posts(&self) -> &[Post] {
        &self.posts
    }

    pub fn get(&self, id: PostId) -> Option<&Post> {
        self.posts.get(id as usize)
    }

    pub fn get_mut(&mut self, id: PostId) -> Option<&mut Post> {
        self.posts.get_mut(id as usize)
    }

    pub fn next_id(&self) -> PostId {
        self.posts.len() as PostId
    }

    /// Appends a post, assigning the next id.
    pub fn add(&mut self, author_id: UserId, topic: String, text: String, created_round: Round) -> PostId {
        let post_id = self.next_id();
        self.posts.push(Post {
            post_id,
            author_id,
            text,
            topic,
            created_round,
            likes: BTreeSet::new(),
            replies: Vec::new(),
            sentiment: 0.0,
        });
        post_id
    }

    /// Inserts a fully formed post; its id must be the next free id.
    pub fn push(&mut self, post: Post) -> Result<(), String> {
        if post.post_id != self.next_id() {
            return Err(format!("post id {} out of sequence (expected {})", post.post_id, self.next_id()));
        }
        self.posts.push(post);
        Ok(())
    }

    /// Likes received per author across the pool.
    pub fn likes_by_author(&self) -> BTreeMap<UserId, usize> {
        let mut out = BTreeMap::new();
        for p in &self.posts {
            *out.entry(p.author_id).or_default() += p.likes.len();
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for p in &self.posts {
            out.push_str(&serde_json::to_string(p).expect("posts serialize"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewRecord {
    pub last_viewed_round: Round,
    pub reply_count_at_view: usize,
}

/// Per (viewer, post) record of the last view.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ViewLedger {
    views: BTreeMap<(UserId, PostId), ViewRecord>,
}

impl ViewLedger {
    pub fn get(&self, viewer: UserId, post: PostId) -> Option<&ViewRecord> {
        self.views.get(&(viewer, post))
    }

    /// Records a view. Views older than the stored one are ignored so
    /// `last_viewed_round` never decreases. Returns whether it was applied.
    pub fn record(&mut self, viewer: UserId, post: PostId, round: Round, reply_count: usize) -> bool {
        let entry = self.views.entry((viewer, post));
        match entry {
            std::collections::btree_map::Entry::Occupied(mut e) => {
                if round < e.get().last_viewed_round {
                    return false;
                }
                e.insert(ViewRecord { last_viewed_round: round, reply_count_at_view: reply_count });
            }
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(ViewRecord { last_viewed_round: round, reply_count_at_view: reply_count });
            }
        }
        true
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(UserId, PostId), &ViewRecord)> {
        self.views.iter()
    }
}

impl Serialize for ViewLedger {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<(UserId, PostId, Round, usize)> = self
            .views
            .iter()
            .map(|(&(v, p), r)| (v, p, r.last_viewed_round, r.reply_count_at_view))
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ViewLedger {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<(UserId, PostId, Round, usize)>::deserialize(d)?;
        let views = rows
            .into_iter()
            .map(|(v, p, r, c)| ((v, p), ViewRecord { last_viewed_round: r, reply_count_at_view: c }))
            .collect();
        Ok(ViewLedger { views })
    }
}

/// What the feed pipeline needs to know about the viewer.
#[derive(Debug, Clone, Copy)]
pub struct Viewer<'a> {
    pub user_id: UserId,
    pub interests: &'a [String],
    pub follows: &'a BTreeSet<UserId>,
}

impl Viewer<'_> {
    pub fn is_interested(&self, topic: &str) -> bool {
        let base = base_topic(topic);
        self.interests.iter().any(|i| i == base)
    }
}

/// Stage one: posts the viewer has never seen, or that gained replies since
/// the last view. The viewer's own posts are never eligible.
pub fn eligible_posts<'p>(viewer: UserId, pool: &'p ContentPool, ledger: &ViewLedger, _round: Round) -> Vec<&'p Post> {
    pool.posts()
        .iter()
        .filter(|p| p.author_id != viewer)
        .filter(|p| match ledger.get(viewer, p.post_id) {
            None => true,
            Some(v) => p.replies.len() > v.reply_count_at_view,
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Buckets {
    pub interest: Vec<PostId>,
    pub followed: Vec<PostId>,
    pub trending: Vec<PostId>,
    pub exploration: Vec<PostId>,
}

impl Buckets {
    pub fn in_order(&self) -> [&Vec<PostId>; 4] {
        [&self.interest, &self.followed, &self.trending, &self.exploration]
    }
}

/// Top decile by engagement (at least one post when non-empty), restricted
/// to posts with engagement >= 1. Ties broken newer-first, then lower id.
pub fn trending_ids(candidates: &[&Post]) -> BTreeSet<PostId> {
    if candidates.is_empty() {
        return BTreeSet::new();
    }
    let k = candidates.len().div_ceil(10);
    let mut sorted: Vec<&Post> = candidates.to_vec();
    sorted.sort_by(|a, b| {
        b.engagement()
            .cmp(&a.engagement())
            .then(b.created_round.cmp(&a.created_round))
            .then(a.post_id.cmp(&b.post_id))
    });
    sorted.into_iter().take(k).filter(|p| p.engagement() >= 1).map(|p| p.post_id).collect()
}

/// Stage two (a): bucket membership. A post may sit in several buckets;
/// exploration holds the posts in none of the first three.
pub fn bucket_candidates(candidates: &[&Post], viewer: &Viewer<'_>) -> Buckets {
    let trending = trending_ids(candidates);
    let mut b = Buckets::default();
    for p in candidates {
        let interest = viewer.is_interested(&p.topic);
        let followed = viewer.follows.contains(&p.author_id);
        let trend = trending.contains(&p.post_id);
        if interest {
            b.interest.push(p.post_id);
        }
        if followed {
            b.followed.push(p.post_id);
        }
        if trend {
            b.trending.push(p.post_id);
        }
        if !(interest || followed || trend) {
            b.exploration.push(p.post_id);
        }
    }
    b
}

/// Target share of the feed for each bucket, in bucket order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixRatios {
    pub interest: f64,
    pub followed: f64,
    pub trending: f64,
    pub exploration: f64,
}

impl Default for MixRatios {
    fn default() -> Self {
        MixRatios { interest: 0.4, followed: 0.3, trending: 0.2, exploration: 0.1 }
    }
}

impl MixRatios {
    pub fn as_array(&self) -> [f64; 4] {
        [self.interest, self.followed, self.trending, self.exploration]
    }

    pub fn validate(&self) -> Result<(), String> {
        let a = self.as_array();
        if a.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err("mix ratios must lie in [0, 1]".into());
        }
        if (a.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(format!("mix ratios must sum to 1, got {}", a.iter().sum::<f64>()));
        }
        Ok(())
    }

    /// Per-bucket slot quotas: `round(ratio * feed_size)`.
    pub fn quotas(&self, feed_size: usize) -> [usize; 4] {
        self.as_array().map(|r| (r * feed_size as f64).round() as usize)
    }
}

/// Stage two (b): fills up to `feed_size` slots. Each bucket contributes up
/// to its quota, sampled without replacement in a seeded order; shortfalls
/// are backfilled from the buckets in order, then from `all_candidates`.
pub fn assemble_feed(
    buckets: &Buckets,
    all_candidates: &[PostId],
    ratios: &MixRatios,
    feed_size: usize,
    seed: u64,
) -> Vec<PostId> {
    let mut rng = rng::keyed(seed, &[rng::tag::FEED]);
    let shuffled: Vec<Vec<PostId>> = buckets
        .in_order()
        .iter()
        .map(|b| {
            let mut v = (*b).clone();
            v.shuffle(&mut rng);
            v
        })
        .collect();
    let mut feed: Vec<PostId> = Vec::with_capacity(feed_size);
    let mut cursor = [0usize; 4];

    for (i, quota) in ratios.quotas(feed_size).into_iter().enumerate() {
        let mut taken = 0;
        while taken < quota && feed.len() < feed_size && cursor[i] < shuffled[i].len() {
            let id = shuffled[i][cursor[i]];
            cursor[i] += 1;
            if !feed.contains(&id) {
                feed.push(id);
                taken += 1;
            }
        }
    }
    for (i, bucket) in shuffled.iter().enumerate() {
        while feed.len() < feed_size && cursor[i] < bucket.len() {
            let id = bucket[cursor[i]];
            cursor[i] += 1;
            if !feed.contains(&id) {
                feed.push(id);
            }
        }
    }
    for &id in all_candidates {
        if feed.len() >= feed_size {
            break;
        }
        if !feed.contains(&id) {
            feed.push(id);
        }
    }
    feed
}

/// Viewer-relative context rendered with each post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostContext {
    pub author_public: PublicProfile,
    pub followed: bool,
    pub following_likes: usize,
    pub following_replies: usize,
    pub total_replies: usize,
    pub representative_reply: Option<String>,
}

/// The reply whose author has received the most likes in the pool; ties go
/// to the most recent reply.
pub fn representative_reply<'a>(post: &'a Post, likes_by_author: &BTreeMap<UserId, usize>) -> Option<&'a Reply> {
    post.replies
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            let la = likes_by_author.get(&a.user_id).copied().unwrap_or(0);
            let lb = likes_by_author.get(&b.user_id).copied().unwrap_or(0);
            la.cmp(&lb).then(a.round.cmp(&b.round)).then(ia.cmp(ib))
        })
        .map(|(_, r)| r)
}

pub fn build_post_context(
    post: &Post,
    viewer_follows: &BTreeSet<UserId>,
    author_public: &PublicProfile,
    likes_by_author: &BTreeMap<UserId, usize>,
) -> PostContext {
    PostContext {
        author_public: author_public.clone(),
        followed: viewer_follows.contains(&post.author_id),
        following_likes: post.likes.iter().filter(|u| viewer_follows.contains(u)).count(),
        following_replies: post.replies.iter().filter(|r| viewer_follows.contains(&r.user_id)).count(),
        total_replies: post.replies.len(),
        representative_reply: representative_reply(post, likes_by_author).map(|r| r.text.clone()),
    }
}

/// A post as shown in one viewer's feed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedItem {
    pub post_id: PostId,
    pub author_id: UserId,
    pub topic: String,
    pub text: String,
    pub created_round: Round,
    pub likes: usize,
    pub context: PostContext,
}

impl FeedItem {
    pub fn engagement(&self) -> usize {
        self.likes + self.context.total_replies
    }

    /// 1: author followed; 2: engaged with by followed users; 3: the rest.
    pub fn tier(&self) -> u8 {
        if self.context.followed {
            1
        } else if self.context.following_likes + self.context.following_replies > 0 {
            2
        } else {
            3
        }
    }
}

/// Stage three: stable sort by tier, then engagement (desc), newer first,
/// then lower post id.
pub fn rank_feed(mut feed: Vec<FeedItem>) -> Vec<FeedItem> {
    feed.sort_by(|a, b| {
        a.tier()
            .cmp(&b.tier())
            .then(b.engagement().cmp(&a.engagement()))
            .then(b.created_round.cmp(&a.created_round))
            .then(a.post_id.cmp(&b.post_id))
    });
    feed
}

/// Feed pipeline parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedConfig {
    pub feed_size: usize,
    pub ratios: MixRatios,
}

impl Default for FeedConfig {
    fn default() -> Self {
        FeedConfig { feed_size: 5, ratios: MixRatios::default() }
    }
}

/// Runs all three stages for one viewer against a frozen snapshot.
#[allow(clippy::too_many_arguments)]
pub fn build_feed(
    viewer: &Viewer<'_>,
    pool: &ContentPool,
    ledger: &ViewLedger,
    publics: &[PublicProfile],
    likes_by_author: &BTreeMap<UserId, usize>,
    round: Round,
    config: &FeedConfig,
    seed: u64,
) -> Vec<FeedItem> {
    let candidates = eligible_posts(viewer.user_id, pool, ledger, round);
    let buckets = bucket_candidates(&candidates, viewer);
    let all: Vec<PostId> = candidates.iter().map(|p| p.post_id).collect();
    let chosen = assemble_feed(&buckets, &all, &config.ratios, config.feed_size, seed);
    let items = chosen
        .into_iter()
        .map(|id| {
            let post = pool.get(id).expect("assembled ids come from the pool");
            FeedItem {
                post_id: id,
                author_id: post.author_id,
                topic: post.topic.clone(),
                text: post.text.clone(),
                created_round: post.created_round,
                likes: post.likes.len(),
                context: build_post_context(post, viewer.follows, &publics[post.author_id as usize], likes_by_author),
            }
        })
        .collect();
    rank_feed(items)
}

/// Convenience for graph-backed viewers.
pub fn follows_of(graph: &SocialGraph, user: UserId) -> &BTreeSet<UserId> {
    graph.followees(user)
}
