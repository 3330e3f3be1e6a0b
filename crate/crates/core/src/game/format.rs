//! Plain-text game definitions.
//!
//! ```text
//! # comments start with '#'
//! name = prisoners
//! objectives = 2
//! actions.1 = L M
//! actions.2 = L M
//! payoff L L = 4, 0        # shared by every agent
//! payoff.2 L M = 1, 3      # overrides the payoff of agent 2 only
//! ```
//!
//! `actions = L M` sets the same labels for every agent (two agents unless
//! `agents = N` is given). Every cell needs a payoff for every agent.

use std::collections::BTreeMap;
use std::path::Path;

use super::Monfg;
use crate::error::{Error, Result};

/// A payoff line: line number, agent (None when shared), action labels, values.
type Cell = (usize, Option<usize>, Vec<String>, Vec<f64>);

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn split_values(s: &str) -> impl Iterator<Item = &str> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
}

pub fn read_game_file(path: impl AsRef<Path>) -> Result<Monfg> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_game(&text)
}

pub fn parse_game(text: &str) -> Result<Monfg> {
    let mut name = None;
    let mut objectives = None;
    let mut agents = None;
    let mut shared_labels: Option<Vec<String>> = None;
    let mut labels: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let mut cells: Vec<Cell> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, "expected `key = value`"))?;
        let key = key.trim();
        let value = value.trim();
        let mut words = key.split_whitespace();
        let head = words.next().unwrap_or("");
        let rest: Vec<String> = words.map(str::to_string).collect();

        let (base, index) = match head.split_once('.') {
            Some((b, idx)) => {
                let idx: usize = idx
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad agent index in `{head}`")))?;
                if idx == 0 {
                    return Err(parse_err(line_no, "agent indices start at 1"));
                }
                (b, Some(idx - 1))
            }
            None => (head, None),
        };

        match (base, index, rest.is_empty()) {
            ("name", None, true) => name = Some(value.to_string()),
            ("objectives", None, true) => {
                objectives = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| parse_err(line_no, format!("`{value}` is not an objective count")))?,
                )
            }
            ("agents", None, true) => {
                agents = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| parse_err(line_no, format!("`{value}` is not an agent count")))?,
                )
            }
            ("actions", idx, true) => {
                let l: Vec<String> = split_values(value).map(str::to_string).collect();
                if l.is_empty() {
                    return Err(parse_err(line_no, "empty action list"));
                }
                match idx {
                    Some(a) => {
                        labels.insert(a, l);
                    }
                    None => shared_labels = Some(l),
                }
            }
            ("payoff", idx, false) => {
                let values = split_values(value)
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| parse_err(line_no, format!("`{t}` is not a number")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                cells.push((line_no, idx, rest, values));
            }
            _ => return Err(parse_err(line_no, format!("unrecognised key `{key}`"))),
        }
    }

    let num_agents = agents.or_else(|| labels.keys().max().map(|m| m + 1)).unwrap_or(2);
    let action_labels = (0..num_agents)
        .map(|a| {
            labels
                .get(&a)
                .cloned()
                .or_else(|| shared_labels.clone())
                .ok_or_else(|| parse_err(0, format!("no actions given for agent {}", a + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let objectives = objectives.ok_or_else(|| parse_err(0, "missing `objectives`"))?;
    let num_cells: usize = action_labels.iter().map(Vec::len).product();

    let mut table: Vec<Vec<Option<Vec<f64>>>> = vec![vec![None; num_cells]; num_agents];
    // Shared entries first so per-agent entries override them.
    cells.sort_by_key(|(_, idx, _, _)| idx.is_some());
    for (line_no, idx, cell_labels, values) in cells {
        if cell_labels.len() != num_agents {
            return Err(parse_err(
                line_no,
                format!("payoff cell names {} actions, expected {num_agents}", cell_labels.len()),
            ));
        }
        let mut joint = 0;
        for (agent, label) in cell_labels.iter().enumerate() {
            let a = action_labels[agent]
                .iter()
                .position(|l| l == label)
                .ok_or_else(|| parse_err(line_no, format!("unknown action `{label}` for agent {}", agent + 1)))?;
            joint = joint * action_labels[agent].len() + a;
        }
        if values.len() != objectives {
            return Err(parse_err(
                line_no,
                format!("payoff has {} components, expected {objectives}", values.len()),
            ));
        }
        match idx {
            Some(agent) if agent >= num_agents => {
                return Err(parse_err(line_no, format!("agent {} does not exist", agent + 1)));
            }
            Some(agent) => table[agent][joint] = Some(values),
            None => {
                for row in table.iter_mut() {
                    row[joint] = Some(values.clone());
                }
            }
        }
    }

    let per_agent = table
        .into_iter()
        .enumerate()
        .map(|(agent, row)| {
            row.into_iter()
                .enumerate()
                .map(|(joint, cell)| {
                    cell.ok_or_else(|| parse_err(0, format!("missing payoff for agent {} in cell {joint}", agent + 1)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Monfg::with_agent_payoffs(
        name.unwrap_or_else(|| "custom".to_string()),
        action_labels,
        objectives,
        per_agent,
    )
}

impl Monfg {
    /// Serialises the game in the text format accepted by [`parse_game`].
    pub fn to_text(&self) -> String {
        let mut out = format!("name = {}\nobjectives = {}\n", self.name(), self.num_objectives());
        if self.num_agents() != 2 {
            out.push_str(&format!("agents = {}\n", self.num_agents()));
        }
        for a in 0..self.num_agents() {
            out.push_str(&format!("actions.{} = {}\n", a + 1, self.action_labels(a).join(" ")));
        }
        let shared = self.is_shared();
        for agent in 0..self.num_agents() {
            if shared && agent > 0 {
                break;
            }
            let key = if shared {
                "payoff".to_string()
            } else {
                format!("payoff.{}", agent + 1)
            };
            for idx in 0..self.num_joint_actions() {
                let names: Vec<&str> = self
                    .joint_action(idx)
                    .iter()
                    .enumerate()
                    .map(|(ag, &a)| self.action_labels(ag)[a].as_str())
                    .collect();
                let values: Vec<String> = self.cell(agent, idx).iter().map(|v| v.to_string()).collect();
                out.push_str(&format!("{key} {} = {}\n", names.join(" "), values.join(", ")));
            }
        }
        out
    }
}
