use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::UserId;

/// Directed follow edges (follower -> followee) plus close-friend sets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SocialGraph {
    follows: BTreeMap<UserId, BTreeSet<UserId>>,
    close_friends: BTreeMap<UserId, BTreeSet<UserId>>,
}

static EMPTY: BTreeSet<UserId> = BTreeSet::new();

impl SocialGraph {
    pub fn ensure_node(&mut self, u: UserId) {
        self.follows.entry(u).or_default();
    }

    /// Adds `follower -> followee`. Self-edges are ignored. Returns whether
    /// the edge was newly inserted.
    pub fn follow(&mut self, follower: UserId, followee: UserId) -> bool {
        if follower == followee {
            return false;
        }
        self.ensure_node(followee);
        self.follows.entry(follower).or_default().insert(followee)
    }

    pub fn unfollow(&mut self, follower: UserId, followee: UserId) -> bool {
        self.follows.get_mut(&follower).is_some_and(|s| s.remove(&followee))
    }

    pub fn is_following(&self, follower: UserId, followee: UserId) -> bool {
        self.follows.get(&follower).is_some_and(|s| s.contains(&followee))
    }

    pub fn followees(&self, u: UserId) -> &BTreeSet<UserId> {
        self.follows.get(&u).unwrap_or(&EMPTY)
    }

    pub fn close_friends(&self, u: UserId) -> &BTreeSet<UserId> {
        self.close_friends.get(&u).unwrap_or(&EMPTY)
    }

    pub fn is_close_friend(&self, u: UserId, other: UserId) -> bool {
        self.close_friends(u).contains(&other)
    }

    pub fn set_close_friends(&mut self, u: UserId, friends: BTreeSet<UserId>) {
        self.close_friends.insert(u, friends);
    }

    pub fn nodes(&self) -> BTreeSet<UserId> {
        self.follows.keys().copied().collect()
    }

    pub fn node_count(&self) -> usize {
        self.follows.len()
    }

    pub fn edge_count(&self) -> usize {
        self.follows.values().map(BTreeSet::len).sum()
    }

    /// All edges in (follower, followee) order.
    pub fn edges(&self) -> impl Iterator<Item = (UserId, UserId)> + '_ {
        self.follows.iter().flat_map(|(&a, set)| set.iter().map(move |&b| (a, b)))
    }

    pub fn total_degrees(&self) -> BTreeMap<UserId, usize> {
        let mut deg: BTreeMap<UserId, usize> = self.follows.iter().map(|(&u, s)| (u, s.len())).collect();
        for (_, b) in self.edges() {
            *deg.entry(b).or_default() += 1;
        }
        deg
    }
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    nodes: Vec<UserId>,
    edges: Vec<(UserId, UserId)>,
    close_friends: BTreeMap<UserId, Vec<UserId>>,
}

impl Serialize for SocialGraph {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        GraphRepr {
            nodes: self.follows.keys().copied().collect(),
            edges: self.edges().collect(),
            close_friends: self
                .close_friends
                .iter()
                .map(|(&u, s)| (u, s.iter().copied().collect()))
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SocialGraph {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = GraphRepr::deserialize(deserializer)?;
        let mut g = SocialGraph::default();
        for u in repr.nodes {
            g.ensure_node(u);
        }
        for (a, b) in repr.edges {
            g.follow(a, b);
        }
        for (u, friends) in repr.close_friends {
            g.set_close_friends(u, friends.into_iter().collect());
        }
        Ok(g)
    }
}
