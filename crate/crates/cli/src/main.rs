use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use monfg::equilibrium::{DEFAULT_TOLERANCE, enumerate_pure_ne, reference_outcomes, verify_ne};
use monfg::game::{MixedStrategyProfile, UtilityFn};
use monfg::harness::{ExperimentConfig, GameSpec, emit_results, read_sweep_file, run_experiment};
use monfg::learners::Algorithm;

#[derive(Parser)]
#[command(
    name = "monfg",
    version,
    about = "Multi-objective normal-form game learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one matchup and write outcomes, traces, summary and metadata.
    Run {
        /// Catalogue game 1-5 or a path to a game file.
        #[arg(long)]
        game: GameSpec,
        #[arg(long)]
        agent1: Algorithm,
        #[arg(long)]
        agent2: Algorithm,
        #[arg(long, default_value_t = 1)]
        lookahead1: usize,
        #[arg(long, default_value_t = 1)]
        lookahead2: usize,
        #[arg(long, default_value_t = monfg::harness::DEFAULT_EPISODES)]
        episodes: usize,
        #[arg(long, default_value_t = monfg::harness::DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Fraction of final episodes used for the outcome distribution.
        #[arg(long, default_value_t = monfg::harness::DEFAULT_WINDOW_FRACTION)]
        window: f64,
        /// Treat the GP-predicted opponent step as a constant in the outer
        /// gradient (ACOLAM, LOLAM).
        #[arg(long)]
        no_shape_through_gp: bool,
    },
    /// Print Nash-equilibrium certificates for every pure profile of a game.
    Verify {
        #[arg(long)]
        game: GameSpec,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every matchup described by a sweep file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let artifacts = run_experiment(config)?;
    emit_results(&artifacts, out).with_context(|| format!("writing results to {}", out.display()))?;
    let labels = [artifacts.game.action_labels(0), artifacts.game.action_labels(1)];
    println!(
        "{} {} vs {} ({} trials x {} episodes, {:.1}s)",
        artifacts.game.name(),
        config.agents[0].algorithm,
        config.agents[1].algorithm,
        config.trials,
        config.episodes,
        artifacts.elapsed_secs
    );
    for (a, row) in artifacts.outcome.matrix.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(b, p)| format!("({},{}) {:.3}", labels[0][a], labels[1][b], p))
            .collect();
        println!("  {}", cells.join("  "));
    }
    Ok(())
}

fn verify(game: &GameSpec, out: Option<&PathBuf>) -> Result<()> {
    let g = game.load()?;
    let utilities = [UtilityFn::for_agent(0), UtilityFn::for_agent(1)];
    let counts = g.action_counts();
    let mut certificates = Vec::new();
    for a in 0..counts[0] {
        for b in 0..counts[1] {
            let profile = MixedStrategyProfile::pure(&counts, &[a, b])?;
            let cert = verify_ne(&g, &profile, &utilities, DEFAULT_TOLERANCE)?;
            let label = format!("({},{})", g.action_labels(0)[a], g.action_labels(1)[b]);
            println!(
                "{label:<10} epsilon={:.6} pure_epsilon={:.6} ne={} pure_deviation_ne={}",
                cert.epsilon, cert.pure_epsilon, cert.is_ne, cert.is_pure_deviation_ne
            );
            certificates.push(serde_json::json!({ "profile": label, "certificate": cert }));
        }
    }
    let pure_ne: Vec<String> = enumerate_pure_ne(&g, &utilities)?
        .into_iter()
        .map(|(a, b)| format!("({},{})", g.action_labels(0)[a], g.action_labels(1)[b]))
        .collect();
    println!("pure NE: {{{}}}", pure_ne.join(", "));
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let references: Vec<String> = reference_outcomes(&g, game.catalogue_id())?
            .into_iter()
            .map(|(name, _)| name)
            .collect();
        let report = serde_json::json!({
            "game": g.name(),
            "pure_ne": pure_ne,
            "certificates": certificates,
            "reference_outcomes": references,
        });
        let path = dir.join("verify.json");
        std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn sweep(path: &Path) -> Result<()> {
    let cfg = read_sweep_file(path)?;
    for (name, experiment) in cfg.experiments() {
        run(&experiment, &cfg.out.join(&name)).with_context(|| format!("sweep entry {name}"))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            game,
            agent1,
            agent2,
            lookahead1,
            lookahead2,
            episodes,
            trials,
            seed,
            out,
            window,
            no_shape_through_gp,
        } => {
            let mut cfg = ExperimentConfig::new(game, [agent1, agent2], [lookahead1, lookahead2]);
            cfg.episodes = episodes;
            cfg.trials = trials;
            cfg.seed = seed;
            cfg.window_fraction = window;
            for agent in &mut cfg.agents {
                agent.shape_through_gp = !no_shape_through_gp;
            }
            run(&cfg, &out)
        }
        Command::Verify { game, out } => verify(&game, out.as_ref()),
        Command::Sweep { config } => sweep(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
