use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::equilibrium::{DEFAULT_TOLERANCE, NeCertificate, outcome_proximity, reference_outcomes, verify_ne};
use crate::error::{Result, csv_error, invalid, io_error};
use crate::game::{MixedStrategyProfile, Monfg, UtilityFn};

use super::{ExperimentConfig, JointAction, OutcomeDistribution, RunArtifacts};

#[derive(Clone, Debug, Serialize)]
pub struct Certified {
    pub profile: String,
    pub certificate: NeCertificate,
}

#[derive(Clone, Debug, Serialize)]
pub struct Proximity {
    pub reference: String,
    pub total_variation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub game: String,
    pub action_labels: [Vec<String>; 2],
    pub interactions_per_episode: usize,
    pub outcome: OutcomeDistribution,
    pub mean_policies: [Vec<f64>; 2],
    /// Pure equilibria of the game with their certificates.
    pub equilibria: Vec<Certified>,
    /// Certificate for the product of the outcome marginals.
    pub empirical_certificate: NeCertificate,
    pub proximity: Vec<Proximity>,
}

#[derive(Clone, Debug, Serialize)]
struct Meta {
    seed: u64,
    trial_seed_rule: &'static str,
    version: &'static str,
    episodes: usize,
    trials: usize,
    interactions_per_episode: usize,
    threads: usize,
    created_unix_secs: u64,
    elapsed_secs: f64,
}

impl Summary {
    pub fn build(artifacts: &RunArtifacts) -> Result<Self> {
        let game = &artifacts.game;
        let utilities = [UtilityFn::for_agent(0), UtilityFn::for_agent(1)];
        let counts = game.action_counts();
        let label = |a: usize, b: usize| format!("({},{})", game.action_labels(0)[a], game.action_labels(1)[b]);
        let equilibria = crate::equilibrium::enumerate_pure_ne(game, &utilities)?
            .into_iter()
            .map(|(a, b)| {
                let profile = MixedStrategyProfile::pure(&counts, &[a, b])?;
                Ok(Certified {
                    profile: label(a, b),
                    certificate: verify_ne(game, &profile, &utilities, DEFAULT_TOLERANCE)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let marginals = normalised([artifacts.outcome.marginal(0), artifacts.outcome.marginal(1)]);
        let empirical = MixedStrategyProfile::new(marginals.to_vec())?;
        let proximity = reference_outcomes(game, artifacts.config.game.catalogue_id())?
            .into_iter()
            .map(|(name, reference)| {
                Ok(Proximity {
                    reference: name,
                    total_variation: outcome_proximity(&artifacts.outcome, &reference)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Summary {
            config: artifacts.config.clone(),
            game: game.name().to_string(),
            action_labels: [game.action_labels(0).to_vec(), game.action_labels(1).to_vec()],
            interactions_per_episode: artifacts.interactions_per_episode,
            outcome: artifacts.outcome.clone(),
            mean_policies: artifacts.mean_policies.clone(),
            equilibria,
            empirical_certificate: verify_ne(game, &empirical, &utilities, DEFAULT_TOLERANCE)?,
            proximity,
        })
    }
}

fn normalised(mut v: [Vec<f64>; 2]) -> [Vec<f64>; 2] {
    for s in v.iter_mut() {
        let total: f64 = s.iter().sum();
        s.iter_mut().for_each(|p| *p /= total);
    }
    v
}

fn payoff_header(game: &Monfg) -> Vec<String> {
    let c = game.num_objectives();
    if game.is_shared() {
        (1..=c).map(|i| format!("payoff{i}")).collect()
    } else {
        (1..=2)
            .flat_map(|a| (1..=c).map(move |i| format!("agent{a}_payoff{i}")))
            .collect()
    }
}

/// Writes `outcomes.csv`, `traces.csv`, `summary.json` and `meta.json`.
pub fn emit_results(artifacts: &RunArtifacts, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let game = &artifacts.game;
    let labels = [game.action_labels(0), game.action_labels(1)];

    let outcomes = dir.join("outcomes.csv");
    {
        let mut w = csv::Writer::from_path(&outcomes).map_err(csv_error(&outcomes))?;
        let mut header = vec![
            "trial".to_string(),
            "episode".into(),
            "action1".into(),
            "action2".into(),
        ];
        header.extend(payoff_header(game));
        w.write_record(&header).map_err(csv_error(&outcomes))?;
        let agents: &[usize] = if game.is_shared() { &[0] } else { &[0, 1] };
        let mut record = Vec::with_capacity(header.len());
        for (t, trial) in artifacts.trials.iter().enumerate() {
            for (e, episode) in trial.joint_actions.iter().enumerate() {
                for &(a, b) in episode {
                    let (a, b) = (a as usize, b as usize);
                    record.clear();
                    record.extend([t.to_string(), e.to_string(), labels[0][a].clone(), labels[1][b].clone()]);
                    for &agent in agents {
                        record.extend(game.payoff(agent, &[a, b])?.iter().map(f64::to_string));
                    }
                    w.write_record(&record).map_err(csv_error(&outcomes))?;
                }
            }
        }
        w.flush().map_err(io_error(&outcomes))?;
    }

    let traces = dir.join("traces.csv");
    {
        let mut w = csv::Writer::from_path(&traces).map_err(csv_error(&traces))?;
        w.write_record(["trial", "episode", "agent", "action", "probability"])
            .map_err(csv_error(&traces))?;
        for (t, trial) in artifacts.trials.iter().enumerate() {
            for (e, probs) in trial.policies.iter().enumerate() {
                for (agent, p) in probs.iter().enumerate() {
                    for (a, v) in p.iter().enumerate() {
                        w.write_record([
                            t.to_string(),
                            e.to_string(),
                            (agent + 1).to_string(),
                            labels[agent][a].clone(),
                            v.to_string(),
                        ])
                        .map_err(csv_error(&traces))?;
                    }
                }
            }
        }
        w.flush().map_err(io_error(&traces))?;
    }

    let summary = dir.join("summary.json");
    write_json(&summary, &Summary::build(artifacts)?)?;

    let meta = dir.join("meta.json");
    write_json(
        &meta,
        &Meta {
            seed: artifacts.config.seed,
            trial_seed_rule: "seed + trial",
            version: env!("CARGO_PKG_VERSION"),
            episodes: artifacts.config.episodes,
            trials: artifacts.config.trials,
            interactions_per_episode: artifacts.interactions_per_episode,
            threads: rayon::current_num_threads(),
            created_unix_secs: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            elapsed_secs: artifacts.elapsed_secs,
        },
    )?;
    Ok(vec![outcomes, traces, summary, meta])
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(io_error(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(io_error(path))?;
    w.flush().map_err(io_error(path))
}

#[derive(Debug, Deserialize)]
struct OutcomeRow {
    trial: usize,
    episode: usize,
    action1: String,
    action2: String,
}

/// Joint-action logs recovered from `outcomes.csv`, indexed
/// `[trial][episode][interaction]`.
pub fn read_outcomes_csv(path: &Path, game: &Monfg) -> Result<Vec<Vec<Vec<JointAction>>>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error(path))?;
    let mut logs: Vec<Vec<Vec<JointAction>>> = Vec::new();
    for row in r.deserialize::<OutcomeRow>() {
        let row = row.map_err(csv_error(path))?;
        let a = game
            .action_index(0, &row.action1)
            .ok_or_else(|| invalid(format!("unknown action label `{}`", row.action1)))?;
        let b = game
            .action_index(1, &row.action2)
            .ok_or_else(|| invalid(format!("unknown action label `{}`", row.action2)))?;
        if logs.len() <= row.trial {
            logs.resize_with(row.trial + 1, Vec::new);
        }
        let trial = &mut logs[row.trial];
        if trial.len() <= row.episode {
            trial.resize_with(row.episode + 1, Vec::new);
        }
        trial[row.episode].push((a as u16, b as u16));
    }
    Ok(logs)
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct TraceRow {
    pub trial: usize,
    pub episode: usize,
    pub agent: usize,
    pub action: String,
    pub probability: f64,
}

pub fn read_traces_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error(path))?;
    r.deserialize().map(|row| row.map_err(csv_error(path))).collect()
}
