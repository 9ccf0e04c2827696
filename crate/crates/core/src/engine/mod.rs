//! Event loop: scheduling, per-round sessions, the sequential apply phase,
//! content creation and election day.
//!
//! A round is computed against a frozen start-of-round snapshot (feeds,
//! banners, backend calls, possibly concurrent) into a [`RoundLog`], and the
//! log is then applied in ascending user id. Replaying logs through
//! [`apply_round_log`] reproduces the live state exactly.

mod artifacts;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::{debug, info};

use crate::agent::prompt::{render_election_inquiry, render_post_request};
use crate::agent::{
    build_session_prompt, decide_session, election_inquiry, generate_post, AgentDecision, Backend, BannerSignal,
    Engage, FollowAction, LikelihoodReport, PostFeatures, SessionFeatures, SessionHistory, MAX_NEXT_ACTIVITY,
};
use crate::config::{RunConfig, SeedSet};
use crate::experiment::{build_banner, Arm, Banner, BannerKind, BannerSnapshot, Scenario, TreatmentAssignment};
use crate::feed::{build_feed, ContentPool, FeedConfig, FeedItem, Post, PostId, Reply, Round, ViewLedger, Viewer};
use crate::population::{Population, SocialGraph, UserId};
use crate::rng::{self, tag};

pub use artifacts::{
    intention_rows, prepare_population, run_simulation, simulate, turnout_csv, write_intentions_csv, IntentionRow, RunOutput,
    RunSummary,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("I/O error on {path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error("round log does not apply: {0}")]
    Replay(String),
    #[error("{0}")]
    Setup(String),
}

/// Parameters the loop needs, taken from the run config.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineParams {
    pub warmup_rounds: u32,
    pub treatment_periods: u32,
    pub feed: FeedConfig,
    pub creation_fraction: f64,
    pub perturbation_max: u32,
    pub initial_login_max: u32,
    pub seeds: SeedSet,
    pub max_in_flight: usize,
}

impl EngineParams {
    pub fn from_config(cfg: &RunConfig) -> Self {
        EngineParams {
            warmup_rounds: cfg.warmup_rounds,
            treatment_periods: cfg.treatment_periods,
            feed: cfg.feed_config(),
            creation_fraction: cfg.content_creation_fraction,
            perturbation_max: cfg.perturbation_max,
            initial_login_max: cfg.initial_login_max,
            seeds: cfg.seeds,
            max_in_flight: cfg.backend.max_in_flight,
        }
    }

    pub fn total_rounds(&self) -> u32 {
        self.warmup_rounds + self.treatment_periods
    }

    /// Treatment period of `round`, or `None` during warmup.
    pub fn period_of(&self, round: Round) -> Option<u32> {
        round.checked_sub(self.warmup_rounds).filter(|p| *p < self.treatment_periods)
    }

    /// Days left before the election as shown in the intention survey.
    pub fn days_to_election(&self, round: Round) -> u32 {
        self.total_rounds().saturating_sub(round)
    }
}

/// First logins, uniform on `0..=max`.
pub fn init_schedule(n: usize, max: u32, seed: u64) -> Vec<Round> {
    (0..n as u64).map(|u| rng::keyed(seed, &[tag::SCHEDULE_INIT, u]).gen_range(0..=max)).collect()
}

pub fn perturbation(seed: u64, user: UserId, round: Round, max: u32) -> u32 {
    rng::keyed(seed, &[tag::PERTURB, user, round as u64]).gen_range(0..=max)
}

/// Next session round: the reported delay (clamped to 0..=6) plus the
/// perturbation, never less than one round ahead.
pub fn next_real_time(round: Round, next_activity_time: u8, perturbation: u32) -> Round {
    round + (u32::from(next_activity_time.min(MAX_NEXT_ACTIVITY)) + perturbation).max(1)
}

/// `floor(fraction * |active|)` users drawn without replacement, returned
/// in ascending id order.
pub fn select_content_creators(active: &[UserId], fraction: f64, seed: u64, round: Round) -> Vec<UserId> {
    let k = ((fraction * active.len() as f64).floor() as usize).min(active.len());
    let mut pick: Vec<UserId> =
        active.choose_multiple(&mut rng::keyed(seed, &[tag::CREATORS, round as u64]), k).copied().collect();
    pick.sort_unstable();
    pick
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationState {
    /// The next round to execute.
    pub round: Round,
    pub population: Population,
    /// Live follow graph (the population keeps the initial one).
    pub graph: SocialGraph,
    pub pool: ContentPool,
    pub ledger: ViewLedger,
    /// Append-only likelihood reports per user.
    pub likelihoods: Vec<Vec<LikelihoodReport>>,
    pub last_session: Vec<Option<Round>>,
    pub history: Vec<Option<SessionHistory>>,
    /// Pending next session round per user.
    pub schedule: Vec<Round>,
}

impl SimulationState {
    pub fn new(population: Population, params: &EngineParams) -> Self {
        let n = population.len();
        SimulationState {
            round: 0,
            graph: population.graph.clone(),
            population,
            pool: ContentPool::default(),
            ledger: ViewLedger::default(),
            likelihoods: vec![Vec::new(); n],
            last_session: vec![None; n],
            history: vec![None; n],
            schedule: init_schedule(n, params.initial_login_max, params.seeds.schedule),
        }
    }

    pub fn latest_likelihoods(&self) -> Vec<Option<u8>> {
        self.likelihoods.iter().map(|h| h.last().map(|r| r.value)).collect()
    }

    pub fn due_users(&self) -> Vec<UserId> {
        (0..self.schedule.len() as u64).filter(|&u| self.schedule[u as usize] == self.round).collect()
    }

    /// SHA-256 over the canonical JSON encoding of the state.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("state serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub user_id: UserId,
    /// Post ids in ranked feed order.
    pub feed: Vec<PostId>,
    pub banner: Option<Banner>,
    pub decision: AgentDecision,
    pub used_fallback: bool,
    pub perturbation: u32,
    pub next_real_time: Round,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeChange {
    Follow,
    Unfollow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDelta {
    pub follower: UserId,
    pub followee: UserId,
    pub change: EdgeChange,
}

/// Everything that happened in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: Round,
    pub period: Option<u32>,
    pub sessions: Vec<SessionRecord>,
    pub creators: Vec<UserId>,
    pub creations: Vec<Post>,
    /// Effective edge changes produced by applying the sessions.
    pub graph_deltas: Vec<GraphDelta>,
}

impl RoundLog {
    pub fn active_users(&self) -> impl Iterator<Item = UserId> + '_ {
        self.sessions.iter().map(|s| s.user_id)
    }
}

/// Owns the per-run context: backend, scenario and treatment assignment.
pub struct Engine<'a> {
    pub backend: &'a dyn Backend,
    pub params: EngineParams,
    pub scenario: Scenario,
    pub assignment: TreatmentAssignment,
    threads: rayon::ThreadPool,
}

impl<'a> Engine<'a> {
    pub fn new(
        backend: &'a dyn Backend,
        params: EngineParams,
        scenario: Scenario,
        assignment: TreatmentAssignment,
    ) -> Result<Self, EngineError> {
        let threads = rayon::ThreadPoolBuilder::new()
            .num_threads(params.max_in_flight.max(1))
            .build()
            .map_err(|e| EngineError::Setup(e.to_string()))?;
        Ok(Engine { backend, params, scenario, assignment, threads })
    }

    fn banner_for(&self, state: &SimulationState, snapshot: &BannerSnapshot<'_>, user: UserId) -> Option<Banner> {
        let period = self.params.period_of(state.round)?;
        let kind = self.scenario.kind.banner_kind()?;
        if !self.assignment.is_treated_at(&self.scenario, user, period) {
            return None;
        }
        Some(build_banner(kind, state.graph.followees(user), state.graph.close_friends(user), snapshot))
    }

    fn session(
        &self,
        state: &SimulationState,
        snapshot: &BannerSnapshot<'_>,
        likes_by_author: &BTreeMap<UserId, usize>,
        publics: &[crate::population::PublicProfile],
        user_id: UserId,
    ) -> (SessionRecord, Vec<FeedItem>) {
        let round = state.round;
        let user = state.population.user(user_id);
        let follows = state.graph.followees(user_id);
        let close = state.graph.close_friends(user_id);
        let viewer = Viewer { user_id, interests: &user.interests, follows };
        let feed_seed = rng::mix(self.params.seeds.schedule, &[tag::FEED, user_id, round as u64]);
        let feed = build_feed(
            &viewer,
            &state.pool,
            &state.ledger,
            publics,
            likes_by_author,
            round,
            &self.params.feed,
            feed_seed,
        );
        let banner = self.banner_for(state, snapshot, user_id);
        let prompt = build_session_prompt(
            user,
            close,
            round,
            state.history[user_id as usize].as_ref(),
            &feed,
            self.params.days_to_election(round),
            banner.as_ref().map(|b| b.text.as_str()),
        )
        .render();
        let signal = match &banner {
            None => BannerSignal::None,
            Some(b) if b.kind == BannerKind::Info => BannerSignal::Info,
            Some(b) => BannerSignal::Social { listed: b.listed.len(), close_friends_listed: b.close_friends_listed },
        };
        let last = snapshot.latest[user_id as usize];
        let features = SessionFeatures::new(user, round, last, signal, &feed);
        let outcome = decide_session(self.backend, user.tier, &prompt, &features);
        let perturbation = perturbation(self.params.seeds.schedule, user_id, round, self.params.perturbation_max);
        let record = SessionRecord {
            user_id,
            feed: feed.iter().map(|f| f.post_id).collect(),
            banner,
            next_real_time: next_real_time(round, outcome.decision.next_activity_time, perturbation),
            decision: outcome.decision,
            used_fallback: outcome.used_fallback,
            perturbation,
        };
        (record, feed)
    }

    /// Computes one round against the current state without mutating it.
    pub fn compute_round(&self, state: &SimulationState) -> RoundLog {
        let round = state.round;
        let due = state.due_users();
        let latest = state.latest_likelihoods();
        let snapshot = BannerSnapshot::new(&latest, &state.last_session);
        let likes_by_author = state.pool.likes_by_author();
        let publics: Vec<_> = state.population.users.iter().map(|u| u.public.clone()).collect();

        let results: Vec<(SessionRecord, Vec<FeedItem>)> = self.threads.install(|| {
            due.par_iter().map(|&u| self.session(state, &snapshot, &likes_by_author, &publics, u)).collect()
        });

        let creators = if round == 0 {
            due.clone()
        } else {
            select_content_creators(&due, self.params.creation_fraction, self.params.seeds.creators, round)
        };
        let by_user: BTreeMap<UserId, &(SessionRecord, Vec<FeedItem>)> =
            results.iter().map(|r| (r.0.user_id, r)).collect();
        let generated: Vec<Option<(UserId, String, String)>> = self.threads.install(|| {
            creators
                .par_iter()
                .map(|&u| {
                    let user = state.population.user(u);
                    let (record, feed) = by_user[&u];
                    let features = PostFeatures {
                        user_id: u,
                        round,
                        interests: user.interests.clone(),
                        ideology: user.stance.ideology,
                        likelihood: Some(record.decision.voting_likelihood),
                    };
                    let prompt = render_post_request(user, state.graph.close_friends(u), round, feed);
                    generate_post(self.backend, user.tier, &prompt, &features).map(|p| (u, p.topic, p.text))
                })
                .collect()
        });
        let mut next_id = state.pool.next_id();
        let creations = generated
            .into_iter()
            .flatten()
            .map(|(author_id, topic, text)| {
                let post = Post {
                    post_id: next_id,
                    author_id,
                    text,
                    topic,
                    created_round: round,
                    likes: BTreeSet::new(),
                    replies: Vec::new(),
                    sentiment: 0.0,
                };
                next_id += 1;
                post
            })
            .collect();

        let fallbacks = results.iter().filter(|r| r.0.used_fallback).count();
        debug!(round, active = due.len(), fallbacks, "round computed");
        RoundLog {
            round,
            period: self.params.period_of(round),
            sessions: results.into_iter().map(|r| r.0).collect(),
            creators,
            creations,
            graph_deltas: Vec::new(),
        }
    }

    /// Computes and applies one round.
    pub fn step_round(&self, state: &mut SimulationState) -> Result<RoundLog, EngineError> {
        let mut log = self.compute_round(state);
        log.graph_deltas = apply_round_log(state, &log)?;
        Ok(log)
    }

    /// Runs every remaining pre-election round, handing each log to `sink`.
    pub fn run_rounds(
        &self,
        state: &mut SimulationState,
        mut sink: impl FnMut(&RoundLog, &SimulationState) -> Result<(), EngineError>,
    ) -> Result<(), EngineError> {
        while state.round < self.params.total_rounds() {
            let log = self.step_round(state)?;
            if log.round % 10 == 0 {
                info!(round = log.round, active = log.sessions.len(), posts = state.pool.len(), "round done");
            }
            sink(&log, state)?;
        }
        Ok(())
    }

    /// One binary outcome per eligible voter.
    pub fn run_election_day(&self, state: &SimulationState) -> Vec<TurnoutRecord> {
        let eligible = state.population.eligible_ids();
        self.threads.install(|| {
            eligible
                .par_iter()
                .map(|&u| {
                    let user = state.population.user(u);
                    let likelihood = state.likelihoods[u as usize]
                        .last()
                        .map(|r| r.value)
                        .unwrap_or_else(|| user.stance.turnout.base_likelihood());
                    let prompt = render_election_inquiry(user, state.graph.close_friends(u), likelihood);
                    let outcome = election_inquiry(self.backend, user.tier, &prompt, u, likelihood);
                    TurnoutRecord {
                        user_id: u,
                        arm: self.assignment.arm(u).unwrap_or(Arm::Control),
                        likelihood,
                        vote: outcome.vote,
                        used_fallback: outcome.used_fallback,
                    }
                })
                .collect()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnoutRecord {
    pub user_id: UserId,
    pub arm: Arm,
    pub likelihood: u8,
    pub vote: u8,
    pub used_fallback: bool,
}

fn replay_err(msg: String) -> EngineError {
    EngineError::Replay(msg)
}

/// Applies a round's sessions in ascending user id, then its new posts.
/// Returns the effective edge changes.
pub fn apply_round_log(state: &mut SimulationState, log: &RoundLog) -> Result<Vec<GraphDelta>, EngineError> {
    if log.round != state.round {
        return Err(replay_err(format!("log for round {} applied at round {}", log.round, state.round)));
    }
    let round = log.round;
    let mut sessions: Vec<&SessionRecord> = log.sessions.iter().collect();
    sessions.sort_by_key(|s| s.user_id);

    let start_replies: BTreeMap<PostId, usize> = sessions
        .iter()
        .flat_map(|s| s.feed.iter())
        .filter_map(|&id| state.pool.get(id).map(|p| (id, p.replies.len())))
        .collect();

    let mut deltas = Vec::new();
    for s in sessions {
        let u = s.user_id;
        if state.schedule.get(u as usize) != Some(&round) {
            return Err(replay_err(format!("user {u} was not due in round {round}")));
        }
        if s.decision.engagements.len() != s.feed.len() {
            return Err(replay_err(format!("user {u}: decision covers {} of {} posts", s.decision.engagements.len(), s.feed.len())));
        }
        let mut restored = Vec::new();
        for e in &s.decision.engagements {
            let post_id = *s
                .feed
                .get(e.post_number.wrapping_sub(1))
                .ok_or_else(|| replay_err(format!("user {u}: post_number {} outside feed", e.post_number)))?;
            let post = state.pool.get_mut(post_id).ok_or_else(|| replay_err(format!("unknown post {post_id}")))?;
            let author = post.author_id;
            let mut own_reply = 0;
            match e.engage {
                Engage::Nothing => {}
                Engage::Like => {
                    post.likes.insert(u);
                }
                Engage::Reply => {
                    post.replies.push(Reply { user_id: u, text: e.reply_text.clone(), round });
                    own_reply = 1;
                }
            }
            if e.engage != Engage::Nothing && restored.len() < crate::agent::prompt::MAX_RESTORED_ENGAGEMENTS {
                restored.push((post.text.clone(), e.engage, e.reply_text.clone()));
            }
            state.ledger.record(u, post_id, round, start_replies[&post_id] + own_reply);
            let applied = match e.follow_action {
                FollowAction::NoChange => None,
                FollowAction::Follow => state.graph.follow(u, author).then_some(EdgeChange::Follow),
                FollowAction::Unfollow => state.graph.unfollow(u, author).then_some(EdgeChange::Unfollow),
            };
            if let Some(change) = applied {
                deltas.push(GraphDelta { follower: u, followee: author, change });
            }
        }
        let value = s.decision.voting_likelihood;
        state.likelihoods[u as usize].push(LikelihoodReport { round, value });
        state.last_session[u as usize] = Some(round);
        state.history[u as usize] =
            Some(SessionHistory { last_round: round, last_engagements: restored, last_likelihood: value });
        let expected = next_real_time(round, s.decision.next_activity_time, s.perturbation);
        if s.next_real_time != expected {
            return Err(replay_err(format!("user {u}: next_real_time {} != {expected}", s.next_real_time)));
        }
        state.schedule[u as usize] = s.next_real_time;
    }
    for post in &log.creations {
        state.pool.push(post.clone()).map_err(replay_err)?;
    }
    state.round += 1;
    Ok(deltas)
}

/// Applies recorded logs to an initial state, checking recorded edge
/// changes along the way.
pub fn replay(mut state: SimulationState, logs: &[RoundLog]) -> Result<SimulationState, EngineError> {
    for log in logs {
        let deltas = apply_round_log(&mut state, log)?;
        if deltas != log.graph_deltas {
            return Err(replay_err(format!("round {}: graph deltas differ from the log", log.round)));
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests;
