//! Whole-run driver and the files a run directory contains.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use tracing::info;

use super::{Engine, EngineError, EngineParams, RoundLog, SimulationState, TurnoutRecord};
use crate::agent::Backend;
use crate::config::RunConfig;
use crate::experiment::{assign_arms, Scenario, TreatmentAssignment};
use crate::feed::Round;
use crate::population::{
    load_census_profiles, load_follow_graph, match_profiles_to_nodes, Population, PopulationBuilder, UserId,
};
use crate::rng;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EngineError + '_ {
    move |source| EngineError::Io { path: path.to_path_buf(), source }
}

/// Loads a prebuilt population or builds one from the census and graph
/// files named in the config.
pub fn prepare_population(cfg: &RunConfig, backend: &dyn Backend) -> Result<Population, EngineError> {
    let setup = |e: &dyn std::fmt::Display| EngineError::Setup(e.to_string());
    if let Some(path) = &cfg.population_path {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let population = Population::from_json(&text).map_err(|e| setup(&e))?;
        population.validate().map_err(|e| setup(&e))?;
        return Ok(population);
    }
    let (census, graph) = match (&cfg.census_path, &cfg.graph_path) {
        (Some(c), Some(g)) => (c, g),
        _ => return Err(EngineError::Setup("census_path and graph_path are required".into())),
    };
    let (profiles, warnings) = load_census_profiles(census).map_err(|e| setup(&e))?;
    if !warnings.is_empty() {
        info!(count = warnings.len(), "census rows loaded with warnings");
    }
    let (graph, _) = load_follow_graph(graph).map_err(|e| setup(&e))?;
    let seed = cfg.seeds.population;
    let matched = match_profiles_to_nodes(&profiles, &graph, cfg.population_size, seed).map_err(|e| setup(&e))?;
    let builder = PopulationBuilder {
        backend,
        stance_seed: rng::mix(seed, &[rng::tag::STANCE]),
        bootstrap_seed: rng::mix(seed, &[rng::tag::BOOTSTRAP]),
        candidate_sample: cfg.bootstrap_candidates,
        stance_via_backend: cfg.stance_via_backend,
    };
    builder.build(matched).map_err(|e| setup(&e))
}

/// Per (round, user) intention record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentionRow {
    pub round: Round,
    pub user_id: UserId,
    /// Latest reported likelihood at the end of the round.
    pub likelihood: Option<u8>,
    /// `treated`, `control` or `ineligible`; treatment status in force
    /// during the round.
    pub arm: &'static str,
    /// Whether the user had a session this round.
    pub active: bool,
}

pub fn intention_rows(
    population: &Population,
    params: &EngineParams,
    scenario: &Scenario,
    assignment: &TreatmentAssignment,
    logs: &[RoundLog],
) -> Vec<IntentionRow> {
    let n = population.len();
    let mut latest: Vec<Option<u8>> = vec![None; n];
    let mut rows = Vec::with_capacity(n * logs.len());
    for log in logs {
        let mut active = vec![false; n];
        for s in &log.sessions {
            latest[s.user_id as usize] = Some(s.decision.voting_likelihood);
            active[s.user_id as usize] = true;
        }
        for u in 0..n as UserId {
            let arm = if !population.user(u).eligible_voter {
                "ineligible"
            } else if params.period_of(log.round).is_some_and(|p| assignment.is_treated_at(scenario, u, p)) {
                "treated"
            } else {
                "control"
            };
            rows.push(IntentionRow {
                round: log.round,
                user_id: u,
                likelihood: latest[u as usize],
                arm,
                active: active[u as usize],
            });
        }
    }
    rows
}

pub fn write_intentions_csv(rows: &[IntentionRow], out: impl Write) -> std::io::Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "round,user_id,likelihood,arm,active")?;
    for r in rows {
        let l = r.likelihood.map(|v| v.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{l},{},{}", r.round, r.user_id, r.arm, u8::from(r.active))?;
    }
    w.flush()
}

pub fn turnout_csv(records: &[TurnoutRecord]) -> String {
    let mut out = String::from("user_id,arm,likelihood,vote\n");
    for r in records {
        out.push_str(&format!("{},{},{},{}\n", r.user_id, r.arm.as_str(), r.likelihood, r.vote));
    }
    out
}

/// In-memory result of one run.
pub struct RunOutput {
    pub initial: SimulationState,
    pub state: SimulationState,
    pub assignment: TreatmentAssignment,
    pub logs: Vec<RoundLog>,
    pub turnout: Vec<TurnoutRecord>,
    pub intentions: Vec<IntentionRow>,
}

impl RunOutput {
    pub fn turnout_rate(&self) -> f64 {
        if self.turnout.is_empty() {
            return 0.0;
        }
        self.turnout.iter().map(|t| f64::from(t.vote)).sum::<f64>() / self.turnout.len() as f64
    }
}

fn run_with_sink(
    cfg: &RunConfig,
    population: Population,
    backend: &dyn Backend,
    sink: impl FnMut(&RoundLog, &SimulationState) -> Result<(), EngineError>,
) -> Result<RunOutput, EngineError> {
    let params = EngineParams::from_config(cfg);
    let scenario = cfg.scenario();
    let assignment = assign_arms(&scenario, &population.eligible_ids(), cfg.seeds.treatment);
    let initial = SimulationState::new(population, &params);
    let engine = Engine::new(backend, params, scenario, assignment)?;
    let mut state = initial.clone();
    let mut logs = Vec::new();
    let mut sink = sink;
    engine.run_rounds(&mut state, |log, st| {
        logs.push(log.clone());
        sink(log, st)
    })?;
    let turnout = engine.run_election_day(&state);
    let intentions = intention_rows(&state.population, &engine.params, &engine.scenario, &engine.assignment, &logs);
    Ok(RunOutput { initial, state, assignment: engine.assignment, logs, turnout, intentions })
}

/// Runs warmup, treatment periods and election day without touching disk.
pub fn simulate(cfg: &RunConfig, population: Population, backend: &dyn Backend) -> Result<RunOutput, EngineError> {
    run_with_sink(cfg, population, backend, |_, _| Ok(()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub rounds: u32,
    pub posts: usize,
    pub eligible: usize,
    pub turnout_rate: f64,
    pub final_state_hash: String,
}

/// Runs one scenario end to end and writes the run directory.
pub fn run_simulation(
    cfg: &RunConfig,
    population: Population,
    backend: &dyn Backend,
    out_dir: &Path,
) -> Result<RunSummary, EngineError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let write = |name: &str, body: &[u8]| {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(io_err(&path))
    };
    write("effective_config.json", cfg.to_json().as_bytes())?;
    write("population.json", population.to_json().expect("population serializes").as_bytes())?;

    let rounds_path = out_dir.join("rounds.jsonl");
    let mut rounds = BufWriter::new(File::create(&rounds_path).map_err(io_err(&rounds_path))?);
    let checkpoint_dir = out_dir.join("checkpoints");
    let every = cfg.checkpoint_every;
    let output = run_with_sink(cfg, population, backend, |log, state| {
        let line = serde_json::to_string(log).expect("round logs serialize");
        writeln!(rounds, "{line}").map_err(io_err(&rounds_path))?;
        if every > 0 && state.round % every == 0 {
            fs::create_dir_all(&checkpoint_dir).map_err(io_err(&checkpoint_dir))?;
            let path = checkpoint_dir.join(format!("round_{:03}.json", state.round));
            fs::write(&path, serde_json::to_vec(state).expect("state serializes")).map_err(io_err(&path))?;
        }
        Ok(())
    })?;
    rounds.flush().map_err(io_err(&rounds_path))?;

    write("assignment.csv", output.assignment.to_csv().as_bytes())?;
    write("posts.jsonl", output.state.pool.to_jsonl().as_bytes())?;
    let path = out_dir.join("intentions.csv");
    write_intentions_csv(&output.intentions, File::create(&path).map_err(io_err(&path))?).map_err(io_err(&path))?;
    write("turnout.csv", turnout_csv(&output.turnout).as_bytes())?;

    let summary = RunSummary {
        scenario: cfg.scenario.to_string(),
        rounds: output.state.round,
        posts: output.state.pool.len(),
        eligible: output.turnout.len(),
        turnout_rate: output.turnout_rate(),
        final_state_hash: output.state.hash(),
    };
    write("summary.json", serde_json::to_string_pretty(&summary).expect("summary serializes").as_bytes())?;
    Ok(summary)
}
