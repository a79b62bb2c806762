//! `herdwatch` command-line interface.
//!
//! Exit codes: 0 success, 1 invalid input, 2 runtime failure.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use herdwatch_core::io::{
    read_actions_csv, write_policy_csv, write_regions_csv, write_replay_csv, write_trajectory_csv,
};
use herdwatch_core::reproduce::SWEEP_ALPHAS;
use herdwatch_core::{
    agent_decision, cvar_discrete, decision_profile, derive_seed, learning_region_sweep,
    monte_carlo, parse_config, private_update, public_update, replay, risk_adjusted_cost,
    run_reproduce, simulate_episode, solve, stopping_set_analysis, validate_model, Action, Belief,
    DiscreteCostDistribution, Error, ExperimentConfig, Result, SolvedPolicy, Target,
};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "herdwatch",
    version,
    about = "Risk-averse social learning and quickest change detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration and report which structural assumptions hold.
    Validate(ConfigArg),
    /// CVaR of a discrete cost distribution.
    Cvar {
        /// Atoms as `cost:prob` pairs separated by commas, e.g. `1:0.5,3:0.5`.
        #[arg(long, allow_hyphen_values = true)]
        atoms: String,
        #[arg(long)]
        alpha: f64,
    },
    /// One private and public filter update.
    Filter {
        #[command(flatten)]
        config: ConfigArg,
        /// Public belief, comma separated; defaults to `sim.pi0`.
        #[arg(long)]
        belief: Option<String>,
        /// Observation (1-based).
        #[arg(long, default_value_t = 1)]
        observation: usize,
    },
    /// Social-learning-region sweep over alpha; writes `regions.csv`.
    Regions {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        grid: Option<usize>,
        /// Comma-separated alphas; defaults to 1.0, 0.9, ..., 0.1.
        #[arg(long)]
        alphas: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the observer's stopping problem; writes `policy.csv` and `stopping_set.json`.
    Solve {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo detection metrics under the solved policy.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the public filter over a `t,action` CSV and apply the solved policy.
    Replay {
        #[command(flatten)]
        config: ConfigArg,
        /// Actions CSV; defaults to `paths.input`.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate a published figure or dataset experiment.
    Reproduce {
        #[arg(long)]
        target: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn load(arg: &ConfigArg) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(&arg.config).map_err(|e| {
        Error::config(
            "--config",
            format!("cannot read {}: {e}", arg.config.display()),
        )
    })?;
    parse_config(&text)
}

fn parse_list(flag: &str, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(flag, format!("`{s}` is not a number")))
        })
        .collect()
}

fn output_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = flag
        .or_else(|| cfg.paths.output.clone())
        .ok_or_else(|| Error::config("--out", "no output directory (use --out or paths.output)"))?;
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn print_json(value: serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(&value).expect("json value")
    );
}

fn with_grid(mut cfg: ExperimentConfig, grid: Option<usize>) -> Result<ExperimentConfig> {
    if let Some(g) = grid {
        if g < 2 {
            return Err(Error::config("--grid", "must be at least 2"));
        }
        cfg.solver.grid_points = g;
    }
    Ok(cfg)
}

fn converged(policy: SolvedPolicy) -> Result<SolvedPolicy> {
    if policy.converged {
        Ok(policy)
    } else {
        Err(Error::NotConverged {
            iterations: policy.iterations,
            residual: policy.residual,
        })
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Validate(arg) => {
            let cfg = load(&arg)?;
            let report = validate_model(&cfg.agent_model()?);
            print_json(json!({
                "config": arg.config,
                "assumptions": report,
                "certified": report.certified(),
            }));
        }
        Command::Cvar { atoms, alpha } => {
            let pairs = atoms
                .split(',')
                .map(|item| {
                    let (v, p) = item.split_once(':').ok_or_else(|| {
                        Error::config("--atoms", format!("`{item}` is not `cost:prob`"))
                    })?;
                    let parse = |s: &str| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::config("--atoms", format!("`{s}` is not a number")))
                    };
                    Ok((parse(v)?, parse(p)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let dist = DiscreteCostDistribution::new(pairs)?;
            let c = cvar_discrete(&dist, alpha)?;
            print_json(json!({"alpha": alpha, "cvar": c.value, "z_star": c.z_star}));
        }
        Command::Filter {
            config,
            belief,
            observation,
        } => {
            let cfg = load(&config)?;
            let model = cfg.agent_model()?;
            let pi = match belief {
                Some(b) => Belief::new(parse_list("--belief", &b)?)?,
                None => cfg.pi0()?,
            };
            if observation == 0 {
                return Err(Error::config(
                    "--observation",
                    "observations are numbered from 1",
                ));
            }
            let y = observation - 1;
            let eta = private_update(&model, &pi, y)?;
            let decision = agent_decision(&model, &pi, y)?;
            let costs: Vec<f64> = Action::ALL
                .iter()
                .map(|&a| risk_adjusted_cost(&model, &pi, y, a))
                .collect::<Result<_>>()?;
            let profile = decision_profile(&model, &pi)?;
            let updates: Vec<serde_json::Value> = Action::ALL
                .iter()
                .map(|&a| match public_update(&model, &pi, a) {
                    Ok(u) => {
                        json!({"action": a.code(), "sigma": u.sigma, "belief": u.belief.as_slice()})
                    }
                    Err(_) => json!({"action": a.code(), "sigma": 0.0, "belief": null}),
                })
                .collect();
            print_json(json!({
                "belief": pi.as_slice(),
                "observation": observation,
                "private_belief": eta.as_slice(),
                "risk_adjusted_costs": costs,
                "decision": decision.code(),
                "profile": profile.actions.iter().map(|a| a.code()).collect::<Vec<_>>(),
                "impossible_observations": profile.impossible,
                "public_updates": updates,
            }));
        }
        Command::Regions {
            config,
            grid,
            alphas,
            out,
        } => {
            let cfg = load(&config)?;
            let model = cfg.agent_model()?;
            let alphas = match alphas {
                Some(a) => parse_list("--alphas", &a)?,
                None => SWEEP_ALPHAS.to_vec(),
            };
            let grid = grid.unwrap_or(herdwatch_core::social::DEFAULT_REGION_GRID);
            let rows = learning_region_sweep(&model, &alphas, grid)?;
            let dir = output_dir(out, &cfg)?;
            let path = dir.join("regions.csv");
            write_regions_csv(create(&path)?, &rows)?;
            for r in &rows {
                println!(
                    "alpha {:<5} width {:.6}{}",
                    r.alpha,
                    r.width,
                    if r.non_monotone {
                        " (multiple crossings)"
                    } else {
                        ""
                    }
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Solve { config, grid, out } => {
            let cfg = with_grid(load(&config)?, grid)?;
            let model = cfg.agent_model()?;
            let obs = cfg.require_observer()?;
            let policy = solve(&model, &obs, &cfg.solver)?;
            let report = stopping_set_analysis(&policy);
            let dir = output_dir(out, &cfg)?;
            write_policy_csv(create(&dir.join("policy.csv"))?, &policy)?;
            let summary = json!({
                "stopping_set": report,
                "upper_threshold": report.upper_threshold(),
                "iterations": policy.iterations,
                "converged": policy.converged,
                "residual": policy.residual,
            });
            fs::write(
                dir.join("stopping_set.json"),
                serde_json::to_string_pretty(&summary)? + "\n",
            )?;
            print_json(summary);
            if !policy.converged {
                return Err(Error::NotConverged {
                    iterations: policy.iterations,
                    residual: policy.residual,
                });
            }
        }
        Command::Simulate {
            config,
            seed,
            grid,
            out,
        } => {
            let cfg = with_grid(load(&config)?, grid)?;
            let model = cfg.agent_model()?;
            let obs = cfg.require_observer()?;
            let pi0 = cfg.pi0()?;
            let seed = seed.unwrap_or(cfg.sim.seed);
            let policy = converged(solve(&model, &obs, &cfg.solver)?)?;
            let metrics = monte_carlo(
                &model,
                &obs,
                &policy,
                &pi0,
                cfg.sim.replicates,
                cfg.sim.horizon,
                seed,
            )?;
            let dir = output_dir(out, &cfg)?;
            let first = simulate_episode(
                &model,
                &obs,
                &policy,
                &pi0,
                cfg.sim.horizon,
                derive_seed(seed, 0),
            )?;
            write_trajectory_csv(create(&dir.join("trajectory.csv"))?, &first)?;
            let summary = json!({"seed": seed, "pi0": pi0.as_slice(), "metrics": metrics});
            fs::write(
                dir.join("metrics.json"),
                serde_json::to_string_pretty(&summary)? + "\n",
            )?;
            print_json(summary);
        }
        Command::Replay {
            config,
            input,
            grid,
            out,
        } => {
            let cfg = with_grid(load(&config)?, grid)?;
            let model = cfg.agent_model()?;
            let obs = cfg.require_observer()?;
            let pi0 = cfg.pi0()?;
            let input = input.or_else(|| cfg.paths.input.clone()).ok_or_else(|| {
                Error::config("--input", "no actions file (use --input or paths.input)")
            })?;
            let file = File::open(&input).map_err(|e| {
                Error::config("--input", format!("cannot read {}: {e}", input.display()))
            })?;
            let actions = read_actions_csv(file)?;
            let policy = converged(solve(&model, &obs, &cfg.solver)?)?;
            let result = replay(&model, &policy, &pi0, &actions)?;
            let dir = output_dir(out, &cfg)?;
            write_replay_csv(create(&dir.join("replay.csv"))?, &actions, &result)?;
            print_json(json!({"pi0": pi0.as_slice(), "steps": actions.len(), "tau": result.tau}));
        }
        Command::Reproduce { target, out } => {
            let target: Target = target.parse()?;
            let summary = run_reproduce(target, &out)?;
            print!("{}", summary.render());
        }
    }
    Ok(())
}
