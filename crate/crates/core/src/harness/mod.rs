//! Experiment orchestration: matchups, trials, seeding, metrics and output.

mod outcome;
mod output;
mod sweep;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Monfg, UtilityFn, game_catalogue, read_game_file};
use crate::learners::lola::FullInformation;
use crate::learners::{Algorithm, Experience, LearnerConfig, build_learner, initial_policy, molola_update};
use crate::policy::{PolicyParams, sample_index};

pub use outcome::{JointAction, OutcomeDistribution, outcome_distribution, window_len};
pub use output::{Summary, TraceRow, emit_results, read_outcomes_csv, read_traces_csv};
pub use sweep::{SweepConfig, parse_sweep, read_sweep_file};

pub const DEFAULT_EPISODES: usize = 3000;
pub const DEFAULT_TRIALS: usize = 30;
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.1;

/// Which game to play: a catalogue id or a game file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum GameSpec {
    Catalogue(u32),
    File(PathBuf),
}

impl GameSpec {
    pub fn load(&self) -> Result<Monfg> {
        match self {
            GameSpec::Catalogue(id) => game_catalogue(*id),
            GameSpec::File(path) => read_game_file(path),
        }
    }

    pub fn catalogue_id(&self) -> Option<u32> {
        match self {
            GameSpec::Catalogue(id) => Some(*id),
            GameSpec::File(_) => None,
        }
    }
}

impl fmt::Display for GameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GameSpec::Catalogue(id) => write!(f, "{id}"),
            GameSpec::File(p) => write!(f, "{}", p.display()),
        }
    }
}

impl FromStr for GameSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().parse::<u32>() {
            Ok(id) => GameSpec::Catalogue(id),
            Err(_) => GameSpec::File(PathBuf::from(s.trim())),
        })
    }
}

impl From<GameSpec> for String {
    fn from(g: GameSpec) -> String {
        g.to_string()
    }
}

impl TryFrom<String> for GameSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub game: GameSpec,
    pub agents: [LearnerConfig; 2],
    pub episodes: usize,
    pub trials: usize,
    pub seed: u64,
    pub window_fraction: f64,
}

impl ExperimentConfig {
    /// Default rates for both algorithms, the given lookaheads, and the
    /// paper-scale episode and trial counts.
    pub fn new(game: GameSpec, agents: [Algorithm; 2], lookaheads: [usize; 2]) -> Self {
        ExperimentConfig {
            game,
            agents: [
                LearnerConfig::new(agents[0]).with_lookahead(lookaheads[0]),
                LearnerConfig::new(agents[1]).with_lookahead(lookaheads[1]),
            ],
            episodes: DEFAULT_EPISODES,
            trials: DEFAULT_TRIALS,
            seed: 0,
            window_fraction: DEFAULT_WINDOW_FRACTION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 || self.trials == 0 {
            return Err(Error::InvalidConfig("episodes and trials must be at least 1".into()));
        }
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "window fraction must lie in (0, 1], got {}",
                self.window_fraction
            )));
        }
        for a in &self.agents {
            a.validate()?;
        }
        let full = self.agents.iter().filter(|a| a.algorithm.full_information()).count();
        if full == 1 {
            return Err(Error::InvalidConfig(
                "a full-information learner cannot be paired with a no-information learner".into(),
            ));
        }
        self.interactions_per_episode()?;
        Ok(())
    }

    /// `w` when an opponent-modelling learner takes part, otherwise one.
    pub fn interactions_per_episode(&self) -> Result<usize> {
        let windows: Vec<usize> = self
            .agents
            .iter()
            .filter(|a| a.algorithm.uses_opponent_model())
            .map(|a| a.window)
            .collect();
        match windows.as_slice() {
            [] => Ok(1),
            [w] => Ok(*w),
            [a, b] if a == b => Ok(*a),
            _ => Err(Error::InvalidConfig(
                "opponent-modelling learners in one matchup must share the window length".into(),
            )),
        }
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_add(trial as u64)
    }
}

/// Everything recorded during one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialLog {
    pub seed: u64,
    /// Joint actions of every interaction, grouped by episode.
    pub joint_actions: Vec<Vec<JointAction>>,
    /// The policy each agent followed during each episode.
    pub policies: Vec<[Vec<f64>; 2]>,
    pub final_theta: [Vec<f64>; 2],
}

#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub config: ExperimentConfig,
    pub game: Monfg,
    pub interactions_per_episode: usize,
    pub trials: Vec<TrialLog>,
    pub outcome: OutcomeDistribution,
    /// Mean policy of each agent over the outcome window, across trials.
    pub mean_policies: [Vec<f64>; 2],
    pub elapsed_secs: f64,
}

impl RunArtifacts {
    pub fn joint_action_logs(&self) -> Vec<Vec<Vec<JointAction>>> {
        self.trials.iter().map(|t| t.joint_actions.clone()).collect()
    }
}

/// Runs every trial (in parallel) and aggregates in trial order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let game = config.game.load()?;
    if game.num_agents() != 2 {
        return Err(Error::InvalidConfig("experiments need a two-agent game".into()));
    }
    if game.action_counts().iter().any(|&n| n > u16::MAX as usize) {
        return Err(Error::InvalidConfig("too many actions to log".into()));
    }
    let cadence = config.interactions_per_episode()?;
    let start = Instant::now();
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, &game, cadence, config.trial_seed(t)))
        .collect::<Result<Vec<_>>>()?;
    let logs: Vec<Vec<Vec<JointAction>>> = trials.iter().map(|t| t.joint_actions.clone()).collect();
    let shape = (game.num_actions(0), game.num_actions(1));
    let outcome = outcome_distribution(&logs, shape, config.window_fraction)?;
    let mean_policies = mean_policies(&trials, outcome.window[0], shape);
    Ok(RunArtifacts {
        config: config.clone(),
        game,
        interactions_per_episode: cadence,
        trials,
        outcome,
        mean_policies,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

fn mean_policies(trials: &[TrialLog], from: usize, shape: (usize, usize)) -> [Vec<f64>; 2] {
    let mut out = [vec![0.0; shape.0], vec![0.0; shape.1]];
    let mut n = 0usize;
    for t in trials {
        for ep in &t.policies[from..] {
            for agent in 0..2 {
                for (o, p) in out[agent].iter_mut().zip(&ep[agent]) {
                    *o += p;
                }
            }
            n += 1;
        }
    }
    for v in out.iter_mut().flat_map(|v| v.iter_mut()) {
        *v /= n.max(1) as f64;
    }
    out
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn play(game: &Monfg, probs: &[Vec<f64>; 2], env: &mut ChaCha8Rng) -> (usize, usize) {
    let a = sample_index(&probs[0], env);
    let b = sample_index(&probs[1], env);
    debug_assert!(a < game.num_actions(0) && b < game.num_actions(1));
    (a, b)
}

fn run_trial(config: &ExperimentConfig, game: &Monfg, cadence: usize, seed: u64) -> Result<TrialLog> {
    let mut env = stream(seed, 0);
    let mut agent_rngs = [stream(seed, 1), stream(seed, 2)];
    let utilities = [UtilityFn::for_agent(0), UtilityFn::for_agent(1)];
    let mut joint_actions = Vec::with_capacity(config.episodes);
    let mut policies = Vec::with_capacity(config.episodes);

    if config.agents[0].algorithm.full_information() {
        let mut theta: [PolicyParams; 2] =
            [0, 1].map(|i| initial_policy(config.agents[i].algorithm.policy_kind(), game.num_actions(i)));
        for _ in 0..config.episodes {
            let probs = [theta[0].probabilities(), theta[1].probabilities()];
            let episode: Vec<JointAction> = (0..cadence)
                .map(|_| {
                    let (a, b) = play(game, &probs, &mut env);
                    (a as u16, b as u16)
                })
                .collect();
            joint_actions.push(episode);
            policies.push(probs);
            // Both agents update from the same parameters.
            let mut next = Vec::with_capacity(2);
            for i in 0..2 {
                let info = FullInformation {
                    game,
                    agent: i,
                    own: &theta[i],
                    opponent: &theta[1 - i],
                    own_utility: &utilities[i],
                    opponent_utility: &utilities[1 - i],
                };
                next.push(molola_update(&info, &config.agents[i], &mut agent_rngs[i])?);
            }
            let second = next.pop().expect("two updates");
            let first = next.pop().expect("two updates");
            theta = [first, second];
        }
        return Ok(TrialLog {
            seed,
            joint_actions,
            policies,
            final_theta: [theta[0].theta().to_vec(), theta[1].theta().to_vec()],
        });
    }

    let mut learners = [
        build_learner(&config.agents[0], game, 0, utilities[0].clone())?,
        build_learner(&config.agents[1], game, 1, utilities[1].clone())?,
    ];
    for _ in 0..config.episodes {
        let probs = [
            learners[0].policy().probabilities(),
            learners[1].policy().probabilities(),
        ];
        let mut episode = Vec::with_capacity(cadence);
        for _ in 0..cadence {
            let (a, b) = play(game, &probs, &mut env);
            // Each learner sees only its own view of the interaction.
            learners[0].observe(&Experience {
                own_action: a,
                opponent_action: b,
                payoff: game.payoff_2p(0, a, b).to_vec(),
            })?;
            learners[1].observe(&Experience {
                own_action: b,
                opponent_action: a,
                payoff: game.payoff_2p(1, b, a).to_vec(),
            })?;
            episode.push((a as u16, b as u16));
        }
        joint_actions.push(episode);
        policies.push(probs);
        for (learner, rng) in learners.iter_mut().zip(agent_rngs.iter_mut()) {
            learner.end_episode(rng)?;
        }
    }
    Ok(TrialLog {
        seed,
        joint_actions,
        policies,
        final_theta: [
            learners[0].policy().theta().to_vec(),
            learners[1].policy().theta().to_vec(),
        ],
    })
}
