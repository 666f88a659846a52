//! Command-line runner: single runs, parallel seed sweeps, analysis checks,
//! reward-map generation, and multi-policy comparisons.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use macdt_core::gp::RewardField;
use macdt_core::graph::{build_grid, diameter};
use macdt_core::io::{
    build_environment, generate_field, load_config, write_outputs, GridFieldFile, RewardFamily,
    RunConfig,
};
use macdt_core::policy::{beta_schedule, PolicyKind};
use macdt_core::sim::{regret_series, simulate, RunTrace};
use macdt_core::theory::{
    clean_event_rate, estimate_gamma, matrix_lemma_suite, run_report, TheoremParams, TheoryReport,
};

#[derive(Parser)]
#[command(name = "macdt", version, about = "Multi-agent coverage control simulation suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Path to the run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the configured policy for the first configured seed.
    Run {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Override the seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also store the full trace as JSON (usable by `check --trace`).
        #[arg(long)]
        save_trace: bool,
    },
    /// Execute all configured seeds in parallel and aggregate.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Run the analysis check suite on fresh runs (or a stored trace).
    Check {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Stored trace JSON produced by `run --save-trace`.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Also estimate the information capacity with this sample budget
        /// and evaluate the closed-form regret bound.
        #[arg(long)]
        gamma_budget: Option<usize>,
        /// Trials for the randomized matrix-lemma suite.
        #[arg(long, default_value_t = 200)]
        matrix_trials: usize,
    },
    /// Generate a reward-map file from a reward family and seed.
    GenMap {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        /// One of: gp-sample, normal, uniform, sparse.
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        sparse_count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run several policies on shared seeds and print a regret table.
    Compare {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Policies to compare (e.g. mac-dt mac-opt-sp voronoi).
        #[arg(long, num_args = 1.., required = true)]
        policies: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load(cfg: &ConfigArg) -> anyhow::Result<RunConfig> {
    let mut config = load_config(&cfg.config)?;
    if let Some(dir) = &cfg.output_dir {
        config.run.output_dir = dir.clone();
    }
    Ok(config)
}

fn run_seed(config: &RunConfig, seed: u64) -> anyhow::Result<RunTrace> {
    let env = build_environment(config, seed)?;
    Ok(simulate(&env, &config.gp_model_config(), &config.policy_config())?)
}

fn report_for(
    config: &RunConfig,
    seed: u64,
    trace: &RunTrace,
    clean_rate: Option<f64>,
    gamma_budget: Option<usize>,
) -> anyhow::Result<TheoryReport> {
    let env = build_environment(config, seed)?;
    let kernel = config.model.kernel();
    let gamma = match gamma_budget {
        Some(m) => Some(estimate_gamma(&kernel, &env.graph, config.model.noise_var, m)?),
        None => None,
    };
    let params = gamma.as_ref().map(|g| {
        let beta1 = beta_schedule(1, env.graph.vertex_count(), config.policy.delta);
        let max_var = config.model.signal_variance;
        TheoremParams {
            noise_var: config.model.noise_var,
            gamma_2nt: g.value,
            cap: env.cov.cap,
            vertex_count: env.graph.vertex_count(),
            horizon: config.run.horizon,
            delta: config.policy.delta,
            agent_count: config.agents.count,
            diameter: diameter(&env.graph),
            prior_max_bound: config.model.prior_mean + beta1 * max_var.sqrt(),
            max_prior_var: max_var,
        }
    });
    Ok(run_report(
        trace,
        &kernel,
        &env.graph,
        config.model.noise_var,
        clean_rate,
        gamma,
        params.as_ref(),
    )?)
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run { cfg, seed, save_trace } => {
            let config = load(&cfg)?;
            let seed = seed.unwrap_or(config.run.seeds[0]);
            let trace = run_seed(&config, seed)?;
            let report = report_for(&config, seed, &trace, None, None)?;
            let written = write_outputs(&config, &[(seed, trace.clone())], &[(seed, report)])?;
            if save_trace {
                let path = config.run.output_dir.join(format!("trace_seed{seed}.json"));
                std::fs::write(&path, serde_json::to_string(&trace)?)?;
                println!("wrote {}", path.display());
            }
            for p in written {
                println!("wrote {}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { cfg } => {
            let config = load(&cfg)?;
            let results: Vec<anyhow::Result<(u64, RunTrace)>> = config
                .run
                .seeds
                .par_iter()
                .map(|&seed| Ok((seed, run_seed(&config, seed)?)))
                .collect();
            let mut runs = Vec::new();
            for r in results {
                runs.push(r?);
            }
            let mut reports = Vec::new();
            for (seed, trace) in &runs {
                reports.push((*seed, report_for(&config, *seed, trace, None, None)?));
            }
            let written = write_outputs(&config, &runs, &reports)?;
            for p in written {
                println!("wrote {}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check {
            cfg,
            trace,
            gamma_budget,
            matrix_trials,
        } => {
            let config = load(&cfg)?;
            let runs: Vec<(u64, RunTrace)> = match trace {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)?;
                    vec![(config.run.seeds[0], serde_json::from_str(&text)?)]
                }
                None => {
                    let results: Vec<anyhow::Result<(u64, RunTrace)>> = config
                        .run
                        .seeds
                        .par_iter()
                        .map(|&seed| Ok((seed, run_seed(&config, seed)?)))
                        .collect();
                    results.into_iter().collect::<anyhow::Result<_>>()?
                }
            };
            let clean_rate = if runs.len() >= 20 {
                let traces: Vec<RunTrace> = runs.iter().map(|(_, t)| t.clone()).collect();
                Some(clean_event_rate(&traces)?)
            } else {
                None
            };

            let mut all_ok = true;
            for (seed, t) in &runs {
                let report = report_for(&config, *seed, t, clean_rate, gamma_budget)?;
                let ok = report.episode_bound.holds
                    && report.eigenvalue_all_hold
                    && report.info_gain_holds
                    && report.transit_bound.holds
                    && report.regret_within_bound.unwrap_or(true);
                all_ok &= ok;
                println!(
                    "seed {seed}: episodes={} eigenvalue={} info-gain-residual={:.2e} {}",
                    t.episode_count(),
                    report.eigenvalue_all_hold,
                    report.info_gain_residual,
                    if ok { "PASS" } else { "FAIL" }
                );
            }
            if let Some(rate) = clean_rate {
                let ok = rate >= 1.0 - config.policy.delta - 0.05;
                all_ok &= ok;
                println!("clean event rate: {rate:.3} ({})", if ok { "PASS" } else { "FAIL" });
            }
            let matrices_ok = matrix_lemma_suite(6, matrix_trials, 0)?;
            all_ok &= matrices_ok;
            println!("matrix lemmas: {}", if matrices_ok { "PASS" } else { "FAIL" });
            Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::GenMap {
            rows,
            cols,
            family,
            seed,
            sparse_count,
            out,
        } => {
            let family = match family.as_str() {
                "gp-sample" => RewardFamily::GpSample,
                "normal" => RewardFamily::Normal,
                "uniform" => RewardFamily::Uniform,
                "sparse" => RewardFamily::Sparse,
                other => anyhow::bail!(
                    "unknown family {other:?} (expected gp-sample, normal, uniform, or sparse)"
                ),
            };
            let text = format!(
                "[grid]\nrows = {rows}\ncols = {cols}\n[agents]\ncount = 1\n\
                 [reward]\nfamily = \"placeholder\"\nsparse_count = {sparse_count}\n"
            );
            let mut config: RunConfig =
                toml::from_str(&text.replace("placeholder", "uniform"))?;
            config.reward.family = family;
            let _ = build_grid(rows, cols)?;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let field: RewardField = generate_field(&config, &mut rng)?;
            GridFieldFile {
                rows,
                cols,
                values: field.values,
                name: Some(format!("{family:?}-seed{seed}")),
                units: None,
            }
            .write(&out)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { cfg, policies } => {
            let config = load(&cfg)?;
            let kinds: Vec<PolicyKind> = policies
                .iter()
                .map(|p| {
                    serde_json::from_value(serde_json::Value::String(p.clone()))
                        .map_err(|_| anyhow::anyhow!("unknown policy {p:?}"))
                })
                .collect::<anyhow::Result<_>>()?;
            println!("policy,mean_final_regret,mean_final_alpha_regret");
            for (name, kind) in policies.iter().zip(kinds) {
                let mut variant = config.clone();
                variant.policy.kind = kind;
                let results: Vec<anyhow::Result<(f64, f64)>> = variant
                    .run
                    .seeds
                    .par_iter()
                    .map(|&seed| {
                        let trace = run_seed(&variant, seed)?;
                        let plain = *regret_series(&trace, 1.0).last().unwrap();
                        let alpha = *regret_series(&trace, trace.alpha).last().unwrap();
                        Ok((plain, alpha))
                    })
                    .collect();
                let mut plain_sum = 0.0;
                let mut alpha_sum = 0.0;
                let n = results.len() as f64;
                for r in results {
                    let (p, a) = r?;
                    plain_sum += p;
                    alpha_sum += a;
                }
                println!("{name},{},{}", plain_sum / n, alpha_sum / n);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
