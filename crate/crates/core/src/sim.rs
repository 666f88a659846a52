//! Environment and run loop: noisy observations, timestep advancement,
//! episode orchestration, and regret accounting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gp::{GpState, Kernel, RewardField};
use crate::graph::{coverage_union, k_hop, shortest_path, CoverageModel, GridGraph};
use crate::oracle::{exact_oracle, greedy_oracle, EXACT_ENUMERATION_LIMIT};
use crate::policy::{
    doubling_triggered, plan_episode_mac_dt, plan_episode_safe, select_eval_point,
    voronoi_centroid, voronoi_explore_targets, voronoi_partition, EpisodeState, PolicyConfig,
    PolicyKind,
};

/// The world a run executes in. Immutable for the whole run.
#[derive(Debug, Clone)]
pub struct Environment {
    pub graph: GridGraph,
    pub cov: CoverageModel,
    pub reward: RewardField,
    pub noise_var: f64,
    pub safety_noise_var: f64,
    pub horizon: usize,
    pub seed: u64,
    pub init_positions: Vec<usize>,
    /// Known-safe seed vertices for the safe variants.
    pub safe_seed: Vec<usize>,
}

/// GP model the policies plan with (distinct from the true field).
#[derive(Debug, Clone)]
pub struct GpModelConfig {
    pub kernel: Kernel,
    pub prior_mean: f64,
    pub safety_kernel: Kernel,
    pub safety_prior_mean: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct StepRecord {
    /// 1-based timestep.
    pub t: usize,
    pub episode: usize,
    pub positions: Vec<usize>,
    pub covered: Vec<usize>,
    pub coverage_value: f64,
    pub eval_points: Vec<usize>,
}

/// One GP-update segment: for the episodic policies this is exactly one
/// episode; the Voronoi baseline produces two segments per iteration.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EpisodeRecord {
    pub index: usize,
    pub start_time: usize,
    pub end_time: usize,
    pub beta: f64,
    pub clean_event: bool,
    pub destinations: Vec<usize>,
    pub planned_path_lengths: Vec<usize>,
    /// Observations fed to the GP at the end of this segment, in draw order.
    pub eval_batch: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunTrace {
    pub vertex_count: usize,
    pub agent_count: usize,
    pub horizon: usize,
    pub alpha: f64,
    pub opt_value: f64,
    /// False when the optimal reference fell back to the greedy value.
    pub opt_exact: bool,
    pub steps: Vec<StepRecord>,
    pub episodes: Vec<EpisodeRecord>,
}

impl RunTrace {
    /// All eval observations in order, concatenated across episodes.
    pub fn observations(&self) -> Vec<(usize, f64)> {
        self.episodes
            .iter()
            .flat_map(|e| e.eval_batch.iter().cloned())
            .collect()
    }

    pub fn episode_count(&self) -> usize {
        self.episodes.len()
    }
}

/// `w(s*)`: the best achievable single-step coverage value. Exact when the
/// enumeration fits the budget, otherwise the greedy value (flagged).
pub fn optimal_reference(env: &Environment) -> Result<(f64, bool)> {
    let n = env.graph.vertex_count() as f64;
    let size = n.powi(env.cov.agent_count() as i32);
    if size <= EXACT_ENUMERATION_LIMIT {
        let d = exact_oracle(&env.reward.values, &env.graph, &env.cov)?;
        Ok((d.value, true))
    } else {
        let d = greedy_oracle(&env.reward.values, &env.graph, &env.cov)?;
        Ok((d.value, false))
    }
}

/// One noisy reward reading `w(v) + N(0, sigma^2)`.
pub fn observe<R: Rng>(env: &Environment, v: usize, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    env.reward.values[v] + env.noise_var.sqrt() * z
}

/// Cumulative alpha-approximated regret series:
/// `R^alpha(t) = sum_{tau<=t} (alpha * opt - coverage_value(tau))`.
pub fn regret_series(trace: &RunTrace, alpha: f64) -> Vec<f64> {
    let mut cum = 0.0;
    trace
        .steps
        .iter()
        .map(|s| {
            cum += alpha * trace.opt_value - s.coverage_value;
            cum
        })
        .collect()
}

struct StepLoop<'a> {
    env: &'a Environment,
    rng: ChaCha8Rng,
    counts: Vec<u32>,
    t: usize,
    steps: Vec<StepRecord>,
    episodes: Vec<EpisodeRecord>,
}

type SegmentResult = (Vec<usize>, Vec<(usize, f64)>, Vec<(usize, f64)>);

enum Termination {
    Doubling,
    AllReached,
}

impl<'a> StepLoop<'a> {
    /// Runs one planned segment to termination (or the horizon), collecting
    /// eval samples. Returns (final positions, reward batch, safety batch).
    fn run_segment(
        &mut self,
        episode: &mut EpisodeState,
        frozen_std: &[f64],
        termination: Termination,
        collect_safety: bool,
    ) -> Result<SegmentResult> {
        let env = self.env;
        let mut batch = Vec::new();
        let mut safety_batch = Vec::new();
        let mut positions;
        loop {
            self.t += 1;
            positions = episode.advance();
            let covered = coverage_union(&env.graph, &env.cov, &positions)?;
            let coverage_value: f64 = covered.iter().map(|&v| env.reward.values[v]).sum();

            // Eval point per agent in index order; a vertex selected by two
            // agents in the same step is observed once.
            let mut eval_points: Vec<usize> = Vec::with_capacity(positions.len());
            for (i, &p) in positions.iter().enumerate() {
                let ball = k_hop(&env.graph, p, env.cov.hop_radii[i])?;
                let v = select_eval_point(&ball, frozen_std);
                if !eval_points.contains(&v) {
                    let y = observe(env, v, &mut self.rng);
                    batch.push((v, y));
                    eval_points.push(v);
                    self.counts[v] += 1;
                }
            }

            if collect_safety {
                let g_true = env
                    .reward
                    .safety
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("safe policy without safety field".into()))?;
                for &v in &covered {
                    let z: f64 = StandardNormal.sample(&mut self.rng);
                    safety_batch.push((v, g_true[v] + env.safety_noise_var.sqrt() * z));
                }
            }

            self.steps.push(StepRecord {
                t: self.t,
                episode: episode.index,
                positions: positions.clone(),
                covered,
                coverage_value,
                eval_points,
            });

            let terminated = match termination {
                Termination::Doubling => doubling_triggered(&self.counts, &episode.snapshot),
                Termination::AllReached => episode.all_reached(),
            };
            if terminated || self.t >= env.horizon {
                break;
            }
        }
        Ok((positions, batch, safety_batch))
    }

    fn record_segment(
        &mut self,
        episode: &EpisodeState,
        end_time: usize,
        clean_event: bool,
        eval_batch: Vec<(usize, f64)>,
    ) {
        self.episodes.push(EpisodeRecord {
            index: episode.index,
            start_time: episode.start_time,
            end_time,
            beta: episode.beta,
            clean_event,
            destinations: episode.destinations.clone(),
            planned_path_lengths: episode.paths.iter().map(|p| p.len() - 1).collect(),
            eval_batch,
        });
    }
}

fn clean_event_holds(env: &Environment, gp: &GpState, beta: f64) -> bool {
    (0..env.graph.vertex_count()).all(|v| {
        (env.reward.values[v] - gp.mean[v]).abs() <= beta * gp.std_dev(v) + 1e-12
    })
}

/// Runs one full trace of the configured policy.
pub fn simulate(
    env: &Environment,
    gp_cfg: &GpModelConfig,
    policy: &PolicyConfig,
) -> Result<RunTrace> {
    policy.validate()?;
    if env.horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    if env.init_positions.len() != env.cov.agent_count() {
        return Err(Error::InvalidArgument(
            "one initial position per agent required".into(),
        ));
    }
    let (opt_value, opt_exact) = optimal_reference(env)?;

    // Stream 1 of the seed: stream 0 belongs to environment generation.
    let mut rng = ChaCha8Rng::seed_from_u64(env.seed);
    rng.set_stream(1);

    let mut looper = StepLoop {
        env,
        rng,
        counts: vec![0u32; env.graph.vertex_count()],
        t: 0,
        steps: Vec::with_capacity(env.horizon),
        episodes: Vec::new(),
    };

    match policy.kind {
        PolicyKind::Voronoi => run_voronoi(env, gp_cfg, policy, &mut looper)?,
        _ => run_episodic(env, gp_cfg, policy, &mut looper)?,
    }

    Ok(RunTrace {
        vertex_count: env.graph.vertex_count(),
        agent_count: env.cov.agent_count(),
        horizon: env.horizon,
        alpha: policy.alpha,
        opt_value,
        opt_exact,
        steps: looper.steps,
        episodes: looper.episodes,
    })
}

fn run_episodic(
    env: &Environment,
    gp_cfg: &GpModelConfig,
    policy: &PolicyConfig,
    looper: &mut StepLoop,
) -> Result<()> {
    let safe_variant = policy.kind.is_safe_variant();
    let mut gp = GpState::new(&gp_cfg.kernel, &env.graph, gp_cfg.prior_mean, env.noise_var);
    let mut gp_g = GpState::new(
        &gp_cfg.safety_kernel,
        &env.graph,
        gp_cfg.safety_prior_mean,
        env.safety_noise_var,
    );
    let mut positions = env.init_positions.clone();
    let mut e = 0;
    while looper.t < env.horizon {
        e += 1;
        let mut episode = if safe_variant {
            plan_episode_safe(
                &gp,
                &gp_g,
                &positions,
                policy,
                &env.graph,
                &env.cov,
                &looper.counts,
                e,
                looper.t + 1,
                &env.safe_seed,
            )?
        } else {
            plan_episode_mac_dt(
                &gp,
                &positions,
                policy,
                &env.graph,
                &env.cov,
                &looper.counts,
                e,
                looper.t + 1,
            )?
        };
        let clean = clean_event_holds(env, &gp, episode.beta);
        let frozen_std = gp.std_devs();
        let termination = if policy.kind == PolicyKind::MacOptSp {
            Termination::AllReached
        } else {
            Termination::Doubling
        };
        let (new_positions, batch, safety_batch) =
            looper.run_segment(&mut episode, &frozen_std, termination, safe_variant)?;
        positions = new_positions;
        looper.record_segment(&episode, looper.t, clean, batch.clone());
        gp = gp.posterior_update(&batch)?;
        if safe_variant {
            gp_g = gp_g.posterior_update(&safety_batch)?;
        }
    }
    Ok(())
}

fn run_voronoi(
    env: &Environment,
    gp_cfg: &GpModelConfig,
    policy: &PolicyConfig,
    looper: &mut StepLoop,
) -> Result<()> {
    let mut gp = GpState::new(&gp_cfg.kernel, &env.graph, gp_cfg.prior_mean, env.noise_var);
    let mut positions = env.init_positions.clone();
    let mut segment = 0;
    while looper.t < env.horizon {
        // Exploration phase: imaginary-query targets, travel, sample.
        segment += 1;
        let targets = voronoi_explore_targets(&gp, env.cov.agent_count());
        let mut episode =
            plan_travel_segment(env, policy, &positions, &targets, segment, looper.t + 1)?;
        let clean = clean_event_holds(env, &gp, episode.beta);
        let frozen_std = gp.std_devs();
        let (new_positions, batch, _) =
            looper.run_segment(&mut episode, &frozen_std, Termination::AllReached, false)?;
        positions = new_positions;
        looper.record_segment(&episode, looper.t, clean, batch.clone());
        gp = gp.posterior_update(&batch)?;
        if looper.t >= env.horizon {
            break;
        }

        // Coverage phase: partition on the intermediate posterior mean,
        // travel to the cell centroids, sample along the way.
        segment += 1;
        let owner = voronoi_partition(&env.graph, &positions);
        let mean: Vec<f64> = gp.mean.iter().cloned().collect();
        let centroids = (0..env.cov.agent_count())
            .map(|i| voronoi_centroid(&env.graph, &env.cov, &owner, i, positions[i], &mean))
            .collect::<Result<Vec<_>>>()?;
        let mut episode =
            plan_travel_segment(env, policy, &positions, &centroids, segment, looper.t + 1)?;
        let clean = clean_event_holds(env, &gp, episode.beta);
        let frozen_std = gp.std_devs();
        let (new_positions, batch, _) =
            looper.run_segment(&mut episode, &frozen_std, Termination::AllReached, false)?;
        positions = new_positions;
        looper.record_segment(&episode, looper.t, clean, batch.clone());
        gp = gp.posterior_update(&batch)?;
    }
    Ok(())
}

fn plan_travel_segment(
    env: &Environment,
    policy: &PolicyConfig,
    positions: &[usize],
    destinations: &[usize],
    index: usize,
    start_time: usize,
) -> Result<EpisodeState> {
    let beta = policy
        .beta_override
        .unwrap_or_else(|| crate::policy::beta_schedule(index, env.graph.vertex_count(), policy.delta));
    let paths = positions
        .iter()
        .zip(destinations)
        .map(|(&src, &dst)| shortest_path(&env.graph, src, dst))
        .collect::<Result<Vec<_>>>()?;

    Ok(EpisodeState {
        index,
        start_time,
        beta,
        cursors: vec![0; paths.len()],
        destinations: destinations.to_vec(),
        paths,
        snapshot: vec![0; env.graph.vertex_count()],
    })
}
