//! Matchup grids described by a `key = value` file:
//!
//! ```text
//! # comment
//! games = 1, 2, 3
//! matchups = ac:acom, acom:ac, lola:lola
//! lookaheads = 1:1, 2:2
//! episodes = 3000
//! trials = 30
//! seed = 1
//! window = 0.1
//! out = results
//! ```

use std::path::{Path, PathBuf};

use crate::error::{Error, Result, io_error};
use crate::learners::Algorithm;

use super::{DEFAULT_EPISODES, DEFAULT_TRIALS, DEFAULT_WINDOW_FRACTION, ExperimentConfig, GameSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub games: Vec<GameSpec>,
    pub matchups: Vec<[Algorithm; 2]>,
    pub lookaheads: Vec<[usize; 2]>,
    pub episodes: usize,
    pub trials: usize,
    pub seed: u64,
    pub window_fraction: f64,
    pub out: PathBuf,
}

impl SweepConfig {
    /// Every combination, named `game<G>_<a1>-<a2>_L<l1>-<l2>`. Lookaheads
    /// are only varied for matchups where some agent uses them.
    pub fn experiments(&self) -> Vec<(String, ExperimentConfig)> {
        let mut out = Vec::new();
        for game in &self.games {
            let game_name = match game {
                GameSpec::Catalogue(id) => format!("game{id}"),
                GameSpec::File(p) => p
                    .file_stem()
                    .map_or_else(|| "game".into(), |s| s.to_string_lossy().into_owned()),
            };
            for pair in &self.matchups {
                let uses = pair
                    .iter()
                    .any(|a| matches!(a, Algorithm::Acolam | Algorithm::MoLola | Algorithm::Lolam));
                let lookaheads: &[[usize; 2]] = if uses { &self.lookaheads } else { &self.lookaheads[..1] };
                for l in lookaheads {
                    let mut cfg = ExperimentConfig::new(game.clone(), *pair, *l);
                    cfg.episodes = self.episodes;
                    cfg.trials = self.trials;
                    cfg.seed = self.seed;
                    cfg.window_fraction = self.window_fraction;
                    let name = format!("{game_name}_{}-{}_L{}-{}", pair[0], pair[1], l[0], l[1]);
                    out.push((name, cfg));
                }
            }
        }
        out
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn pair<T>(line: usize, s: &str, f: impl Fn(&str) -> Result<T>) -> Result<[T; 2]> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| parse_err(line, format!("expected `first:second`, got `{s}`")))?;
    Ok([f(a.trim())?, f(b.trim())?])
}

pub fn parse_sweep(text: &str) -> Result<SweepConfig> {
    let mut cfg = SweepConfig {
        games: Vec::new(),
        matchups: Vec::new(),
        lookaheads: vec![[1, 1]],
        episodes: DEFAULT_EPISODES,
        trials: DEFAULT_TRIALS,
        seed: 0,
        window_fraction: DEFAULT_WINDOW_FRACTION,
        out: PathBuf::from("results"),
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_err(line, "expected `key = value`"))?;
        let value = value.trim();
        let items = || value.split(',').map(str::trim).filter(|s| !s.is_empty());
        let num = |s: &str| s.parse::<usize>().map_err(|e| parse_err(line, format!("`{s}`: {e}")));
        match key.trim() {
            "games" | "game" => cfg.games = items().map(str::parse).collect::<Result<_>>()?,
            "matchups" => {
                cfg.matchups = items()
                    .map(|s| {
                        pair(line, s, |a| {
                            a.parse::<Algorithm>().map_err(|e| parse_err(line, e.to_string()))
                        })
                    })
                    .collect::<Result<_>>()?
            }
            "lookaheads" => cfg.lookaheads = items().map(|s| pair(line, s, num)).collect::<Result<_>>()?,
            "episodes" => cfg.episodes = num(value)?,
            "trials" => cfg.trials = num(value)?,
            "seed" => cfg.seed = value.parse().map_err(|e| parse_err(line, format!("seed: {e}")))?,
            "window" => cfg.window_fraction = value.parse().map_err(|e| parse_err(line, format!("window: {e}")))?,
            "out" => cfg.out = PathBuf::from(value),
            other => return Err(parse_err(line, format!("unknown key `{other}`"))),
        }
    }
    if cfg.games.is_empty() || cfg.matchups.is_empty() || cfg.lookaheads.is_empty() {
        return Err(parse_err(0, "games, matchups and lookaheads must be nonempty"));
    }
    Ok(cfg)
}

pub fn read_sweep_file(path: &Path) -> Result<SweepConfig> {
    let text = std::fs::read_to_string(path).map_err(io_error(path))?;
    parse_sweep(&text)
}
