//! Treatment-effect estimation over run artifacts.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::experiment::{BannerKind, ScenarioKind};
use crate::feed::Round;
use crate::population::UserId;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("cannot estimate: {0} group is empty")]
    EmptyGroup(&'static str),
    #[error("outcome and treatment vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("likelihood {0} outside [0,4]")]
    OutOfRange(f64),
    #[error("runs are not comparable: {0}")]
    Mismatch(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed {path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub tau_dm: f64,
    /// `None` when either group has fewer than two members.
    pub se: Option<f64>,
    pub n_t: usize,
    pub n_c: usize,
    pub sigma1_sq: Option<f64>,
    pub sigma0_sq: Option<f64>,
}

fn mean_var(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = (values.len() >= 2).then(|| values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0));
    (mean, var)
}

/// Difference in means with the unbiased-variance standard error
/// `sqrt(s1^2 / n_t + s0^2 / n_c)`.
pub fn dm_estimate(y: &[f64], w: &[bool]) -> Result<EffectEstimate, AnalysisError> {
    if y.len() != w.len() {
        return Err(AnalysisError::LengthMismatch(y.len(), w.len()));
    }
    let treated: Vec<f64> = y.iter().zip(w).filter(|(_, &t)| t).map(|(v, _)| *v).collect();
    let control: Vec<f64> = y.iter().zip(w).filter(|(_, &t)| !t).map(|(v, _)| *v).collect();
    if treated.is_empty() {
        return Err(AnalysisError::EmptyGroup("treated"));
    }
    if control.is_empty() {
        return Err(AnalysisError::EmptyGroup("control"));
    }
    let (m1, v1) = mean_var(&treated);
    let (m0, v0) = mean_var(&control);
    let se = match (v1, v0) {
        (Some(a), Some(b)) => Some((a / treated.len() as f64 + b / control.len() as f64).sqrt()),
        _ => None,
    };
    Ok(EffectEstimate { tau_dm: m1 - m0, se, n_t: treated.len(), n_c: control.len(), sigma1_sq: v1, sigma0_sq: v0 })
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Mean outcome under full treatment minus mean outcome under control.
pub fn ground_truth(treated_world: &[f64], control_world: &[f64]) -> Result<f64, AnalysisError> {
    let t = mean(treated_world).ok_or(AnalysisError::EmptyGroup("treated"))?;
    let c = mean(control_world).ok_or(AnalysisError::EmptyGroup("control"))?;
    Ok(t - c)
}

pub fn indirect_effect(ground_truth: f64, dm: &EffectEstimate) -> f64 {
    ground_truth - dm.tau_dm
}

/// Maps the 0-4 likelihood scale onto [0, 1].
pub fn normalize_intentions(values: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    values
        .iter()
        .map(|&v| if (0.0..=4.0).contains(&v) { Ok(v / 4.0) } else { Err(AnalysisError::OutOfRange(v)) })
        .collect()
}

/// `%.12g`-style formatting used for every float in exported tables.
pub fn fmt_g12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if !(-4..12).contains(&exp) {
        let m = trim(mantissa.to_string());
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        trim(format!("{:.*}", (11 - exp).max(0) as usize, x))
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_g12).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct TurnoutRow {
    pub user_id: UserId,
    pub arm: String,
    pub likelihood: u8,
    pub vote: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct IntentionRecord {
    pub round: Round,
    pub user_id: UserId,
    pub likelihood: Option<u8>,
    pub arm: String,
    pub active: u8,
}

/// Artifacts of one run directory needed for analysis.
#[derive(Debug, Clone)]
pub struct RunData {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub turnout: Vec<TurnoutRow>,
    pub intentions: Vec<IntentionRecord>,
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, AnalysisError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| AnalysisError::Format {
        path: path.into(),
        message: e.to_string(),
    })?;
    reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| AnalysisError::Format { path: path.into(), message: e.to_string() })
}

impl RunData {
    pub fn load(dir: &Path) -> Result<Self, AnalysisError> {
        let cfg_path = dir.join("effective_config.json");
        let text = fs::read_to_string(&cfg_path).map_err(|source| AnalysisError::Io { path: cfg_path.clone(), source })?;
        let config = RunConfig::from_json(&text)
            .map_err(|e| AnalysisError::Format { path: cfg_path, message: e.to_string() })?;
        Ok(RunData {
            dir: dir.into(),
            config,
            turnout: read_csv(&dir.join("turnout.csv"))?,
            intentions: read_csv(&dir.join("intentions.csv"))?,
        })
    }

    pub fn scenario(&self) -> ScenarioKind {
        self.config.scenario
    }

    pub fn seed_set(&self) -> &str {
        &self.config.seed_set
    }

    pub fn votes(&self) -> Vec<f64> {
        self.turnout.iter().map(|t| f64::from(t.vote)).collect()
    }

    pub fn turnout_rate(&self) -> f64 {
        mean(&self.votes()).unwrap_or(0.0)
    }

    /// DM on final turnout: ever-treated vs never-treated.
    pub fn turnout_dm(&self) -> Result<EffectEstimate, AnalysisError> {
        let w: Vec<bool> = self.turnout.iter().map(|t| t.arm == "treated").collect();
        dm_estimate(&self.votes(), &w)
    }

    /// Normalized intentions of active eligible users in `round`, with
    /// their treatment status at the time.
    pub fn active_intentions(&self, round: Round) -> (Vec<f64>, Vec<bool>) {
        let mut y = Vec::new();
        let mut w = Vec::new();
        for r in self.intentions.iter().filter(|r| r.round == round && r.active == 1 && r.arm != "ineligible") {
            if let Some(l) = r.likelihood {
                y.push(f64::from(l) / 4.0);
                w.push(r.arm == "treated");
            }
        }
        (y, w)
    }

    pub fn rounds(&self) -> BTreeSet<Round> {
        self.intentions.iter().map(|r| r.round).collect()
    }
}

/// Ground truth on turnout from two identically seeded worlds.
pub fn ground_truth_effect(all_treated: &RunData, all_control: &RunData) -> Result<f64, AnalysisError> {
    check_comparable(all_treated, all_control)?;
    ground_truth(&all_treated.votes(), &all_control.votes())
}

fn check_comparable(a: &RunData, b: &RunData) -> Result<(), AnalysisError> {
    let (sa, sb) = (&a.config.seeds, &b.config.seeds);
    if sa.population != sb.population || sa.schedule != sb.schedule || sa.mock != sb.mock || sa.creators != sb.creators {
        return Err(AnalysisError::Mismatch(format!("{} and {} use different world seeds", a.dir.display(), b.dir.display())));
    }
    let ids = |r: &RunData| r.turnout.iter().map(|t| t.user_id).collect::<BTreeSet<_>>();
    if ids(a) != ids(b) {
        return Err(AnalysisError::Mismatch(format!("{} and {} have different voters", a.dir.display(), b.dir.display())));
    }
    Ok(())
}

/// Per-round trajectory of ground-truth and DM intention effects.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodEffect {
    pub round: Round,
    pub period: i64,
    pub gt: Option<f64>,
    pub dm: Option<EffectEstimate>,
}

/// DM over active users by current treatment status in the staggered run,
/// and ground truth from the full-treatment and control runs. Periods where
/// a group is empty are left missing.
pub fn effect_by_period(
    staggered: Option<&RunData>,
    full: Option<&RunData>,
    control: &RunData,
) -> Result<Vec<PeriodEffect>, AnalysisError> {
    for other in staggered.iter().chain(full.iter()) {
        check_comparable(other, control)?;
    }
    let warmup = i64::from(control.config.warmup_rounds);
    let mut out = Vec::new();
    for round in control.rounds() {
        let period = i64::from(round) - warmup;
        let treatment = period >= 0;
        let gt = full.filter(|_| treatment).and_then(|f| {
            let (yt, _) = f.active_intentions(round);
            let (yc, _) = control.active_intentions(round);
            ground_truth(&yt, &yc).ok()
        });
        let dm = staggered.filter(|_| treatment).and_then(|s| {
            let (y, w) = s.active_intentions(round);
            dm_estimate(&y, &w).ok()
        });
        out.push(PeriodEffect { round, period, gt, dm });
    }
    Ok(out)
}

/// Runs for one seed set, keyed by scenario.
pub type SeedGroup<'a> = BTreeMap<ScenarioKind, &'a RunData>;

pub fn group_runs(runs: &[RunData]) -> Result<BTreeMap<String, SeedGroup<'_>>, AnalysisError> {
    let mut groups: BTreeMap<String, SeedGroup<'_>> = BTreeMap::new();
    for run in runs {
        let slot = groups.entry(run.seed_set().to_string()).or_default();
        if slot.insert(run.scenario(), run).is_some() {
            return Err(AnalysisError::Usage(format!(
                "two {} runs for seed set {}",
                run.scenario(),
                run.seed_set()
            )));
        }
    }
    Ok(groups)
}

fn banner_name(b: BannerKind) -> &'static str {
    match b {
        BannerKind::Info => "info",
        BannerKind::Social => "social",
    }
}

fn full_and_staggered(b: BannerKind) -> (ScenarioKind, ScenarioKind) {
    match b {
        BannerKind::Info => (ScenarioKind::InfoAll, ScenarioKind::InfoStaggered),
        BannerKind::Social => (ScenarioKind::SocialAll, ScenarioKind::SocialStaggered),
    }
}

/// The four exported tables as CSV text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tables {
    pub turnout_summary: String,
    pub effects_turnout: String,
    pub intentions_by_period: String,
    pub effects_by_period: String,
}

pub const TABLE_NAMES: [&str; 4] =
    ["turnout_summary.csv", "effects_turnout.csv", "intentions_by_period.csv", "effects_by_period.csv"];

impl Tables {
    pub fn header_only() -> Self {
        Tables {
            turnout_summary: "seed_set,scenario,n_eligible,turnout,mean_final_likelihood\n".into(),
            effects_turnout: "seed_set,banner,estimator,estimate,se,n_t,n_c,ci_low,ci_high\n".into(),
            intentions_by_period: "seed_set,scenario,round,period,group,n_active,mean_likelihood,normalized\n".into(),
            effects_by_period: "seed_set,banner,round,period,gt,dm,dm_se,dm_n_t,dm_n_c\n".into(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), AnalysisError> {
        fs::create_dir_all(dir).map_err(|source| AnalysisError::Io { path: dir.into(), source })?;
        let bodies = [&self.turnout_summary, &self.effects_turnout, &self.intentions_by_period, &self.effects_by_period];
        for (name, body) in TABLE_NAMES.iter().zip(bodies) {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|source| AnalysisError::Io { path, source })?;
        }
        Ok(())
    }
}

fn effect_row(seed: &str, banner: &str, estimator: &str, estimate: f64, dm: Option<&EffectEstimate>) -> String {
    let se = dm.and_then(|d| d.se);
    let (lo, hi) = match se {
        Some(s) => (Some(estimate - 1.96 * s), Some(estimate + 1.96 * s)),
        None => (None, None),
    };
    format!(
        "{seed},{banner},{estimator},{},{},{},{},{},{}\n",
        fmt_g12(estimate),
        opt(se),
        dm.map(|d| d.n_t.to_string()).unwrap_or_default(),
        dm.map(|d| d.n_c.to_string()).unwrap_or_default(),
        opt(lo),
        opt(hi)
    )
}

/// Requires at least two runs including a control run for every seed set.
pub fn analyze(runs: &[RunData]) -> Result<Tables, AnalysisError> {
    if runs.len() < 2 {
        return Err(AnalysisError::Usage("analysis needs at least two run directories, including a control run".into()));
    }
    let groups = group_runs(runs)?;
    let mut t = Tables::header_only();
    for (seed, group) in &groups {
        let control = group.get(&ScenarioKind::Control).ok_or_else(|| {
            AnalysisError::Usage(format!("seed set {seed} has no control run; analysis requires a control run"))
        })?;
        for (kind, run) in group {
            let finals: Vec<f64> = run.turnout.iter().map(|r| f64::from(r.likelihood)).collect();
            t.turnout_summary.push_str(&format!(
                "{seed},{kind},{},{},{}\n",
                run.turnout.len(),
                fmt_g12(run.turnout_rate()),
                opt(mean(&finals))
            ));
            let warmup = i64::from(run.config.warmup_rounds);
            for round in run.rounds() {
                let rows: Vec<&IntentionRecord> = run
                    .intentions
                    .iter()
                    .filter(|r| r.round == round && r.active == 1 && r.arm != "ineligible")
                    .collect();
                let mut groups_out: Vec<(&str, Vec<f64>)> = vec![("all", Vec::new())];
                if kind.is_staggered() {
                    groups_out.push(("treated", Vec::new()));
                    groups_out.push(("control", Vec::new()));
                }
                for r in &rows {
                    let Some(l) = r.likelihood else { continue };
                    groups_out[0].1.push(f64::from(l));
                    if kind.is_staggered() {
                        let i = if r.arm == "treated" { 1 } else { 2 };
                        groups_out[i].1.push(f64::from(l));
                    }
                }
                for (name, values) in groups_out {
                    let m = mean(&values);
                    t.intentions_by_period.push_str(&format!(
                        "{seed},{kind},{round},{},{name},{},{},{}\n",
                        i64::from(round) - warmup,
                        values.len(),
                        opt(m),
                        opt(m.map(|v| v / 4.0))
                    ));
                }
            }
        }

        for banner in [BannerKind::Info, BannerKind::Social] {
            let (full_kind, stag_kind) = full_and_staggered(banner);
            let full = group.get(&full_kind).copied();
            let stag = group.get(&stag_kind).copied();
            let name = banner_name(banner);
            let gt = full.map(|f| ground_truth_effect(f, control)).transpose()?;
            let dm = stag.map(|s| s.turnout_dm()).transpose()?;
            if let Some(g) = gt {
                t.effects_turnout.push_str(&effect_row(seed, name, "ground_truth", g, None));
            }
            if let Some(d) = &dm {
                t.effects_turnout.push_str(&effect_row(seed, name, "dm", d.tau_dm, Some(d)));
            }
            if let (Some(g), Some(d)) = (gt, &dm) {
                t.effects_turnout.push_str(&effect_row(seed, name, "indirect", indirect_effect(g, d), None));
            }
            if full.is_none() && stag.is_none() {
                continue;
            }
            for pe in effect_by_period(stag, full, control)? {
                t.effects_by_period.push_str(&format!(
                    "{seed},{name},{},{},{},{},{},{},{}\n",
                    pe.round,
                    pe.period,
                    opt(pe.gt),
                    opt(pe.dm.map(|d| d.tau_dm)),
                    opt(pe.dm.and_then(|d| d.se)),
                    pe.dm.map(|d| d.n_t.to_string()).unwrap_or_default(),
                    pe.dm.map(|d| d.n_c.to_string()).unwrap_or_default(),
                ));
            }
        }
    }
    Ok(t)
}
