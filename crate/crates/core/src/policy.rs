//! Agent-control policies: UCB episode planning with the doubling trick, the
//! shortest-path MacOpt variant, the Voronoi baseline, and the two safe
//! variants. Policies are deterministic state machines driven by the
//! simulator.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gp::GpState;
use crate::graph::{
    k_hop, shortest_path, shortest_path_in, weighted_shortest_path, CoverageModel, GridGraph,
};
use crate::oracle::{exact_oracle, greedy_oracle, safe_greedy_oracle, DestinationSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    MacDt,
    MacOptSp,
    Voronoi,
    MacDtSafe,
    MacDtSafelyExplore,
}

impl PolicyKind {
    pub fn is_safe_variant(self) -> bool {
        matches!(self, PolicyKind::MacDtSafe | PolicyKind::MacDtSafelyExplore)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    Greedy,
    Exact,
}

#[derive(Debug, Clone)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub delta: f64,
    pub alpha: f64,
    pub oracle: OracleKind,
    /// Fixed beta overriding the schedule (diagnostics only).
    pub beta_override: Option<f64>,
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0,1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Confidence scaling for episode `e`:
/// `beta = sqrt(2 log(|V| pi^2 e^2 / (6 delta)))`.
pub fn beta_schedule(episode: usize, vertex_count: usize, delta: f64) -> f64 {
    debug_assert!(episode >= 1);
    let arg = vertex_count as f64 * PI * PI * (episode as f64).powi(2) / (6.0 * delta);
    (2.0 * arg.ln()).sqrt()
}

/// Optimistic reward surrogate `max(mu + beta * sigma, 0)` per vertex. The
/// clamp keeps the map non-negative for the max-coverage oracles.
pub fn ucb_map(mean: &[f64], std_dev: &[f64], beta: f64) -> Vec<f64> {
    mean.iter()
        .zip(std_dev)
        .map(|(&m, &s)| (m + beta * s).max(0.0))
        .collect()
}

/// Most uncertain vertex within a coverage set; ties go to the lowest index.
pub fn select_eval_point(coverage_set: &[usize], std_dev: &[f64]) -> usize {
    debug_assert!(!coverage_set.is_empty());
    let mut best = coverage_set[0];
    for &v in &coverage_set[1..] {
        if std_dev[v] > std_dev[best] {
            best = v;
        }
    }
    best
}

/// Doubling-trick termination: some vertex's cumulative sample count has
/// reached `max(2 * count_at_episode_start, 1)`.
pub fn doubling_triggered(n_now: &[u32], n_snapshot: &[u32]) -> bool {
    n_now
        .iter()
        .zip(n_snapshot)
        .any(|(&now, &snap)| now >= (2 * snap).max(1))
}

/// One planned episode: frozen destinations and paths plus the count
/// snapshot the doubling trick compares against.
#[derive(Debug, Clone)]
pub struct EpisodeState {
    pub index: usize,
    pub start_time: usize,
    pub beta: f64,
    pub destinations: Vec<usize>,
    pub paths: Vec<Vec<usize>>,
    pub cursors: Vec<usize>,
    pub snapshot: Vec<u32>,
}

impl EpisodeState {
    /// Moves every agent one edge along its path (agents at the end of their
    /// paths hold position) and returns the new positions.
    pub fn advance(&mut self) -> Vec<usize> {
        self.paths
            .iter()
            .zip(self.cursors.iter_mut())
            .map(|(path, cursor)| {
                if *cursor + 1 < path.len() {
                    *cursor += 1;
                }
                path[*cursor]
            })
            .collect()
    }

    pub fn positions(&self) -> Vec<usize> {
        self.paths
            .iter()
            .zip(&self.cursors)
            .map(|(p, &c)| p[c])
            .collect()
    }

    pub fn all_reached(&self) -> bool {
        self.paths
            .iter()
            .zip(&self.cursors)
            .all(|(p, &c)| c + 1 == p.len())
    }
}

/// MacOpt-SP terminates an episode once every agent sits at its destination.
pub fn macopt_sp_termination(episode: &EpisodeState) -> bool {
    episode.all_reached()
}

pub fn run_oracle(
    w: &[f64],
    g: &GridGraph,
    cov: &CoverageModel,
    kind: OracleKind,
) -> Result<DestinationSet> {
    match kind {
        OracleKind::Greedy => greedy_oracle(w, g, cov),
        OracleKind::Exact => exact_oracle(w, g, cov),
    }
}

/// Plans one MAC-DT (or MacOpt-SP) episode: beta, UCB map, destinations from
/// the oracle, one shortest path per agent, and the count snapshot.
#[allow(clippy::too_many_arguments)]
pub fn plan_episode_mac_dt(
    gp: &GpState,
    positions: &[usize],
    config: &PolicyConfig,
    g: &GridGraph,
    cov: &CoverageModel,
    counts: &[u32],
    episode_index: usize,
    start_time: usize,
) -> Result<EpisodeState> {
    let beta = config
        .beta_override
        .unwrap_or_else(|| beta_schedule(episode_index, g.vertex_count(), config.delta));
    let mean: Vec<f64> = gp.mean.iter().cloned().collect();
    let std_dev = gp.std_devs();
    let ucb = ucb_map(&mean, &std_dev, beta);
    let dest = run_oracle(&ucb, g, cov, config.oracle)?;
    let paths = positions
        .iter()
        .zip(&dest.destinations)
        .map(|(&src, &dst)| shortest_path(g, src, dst))
        .collect::<Result<Vec<_>>>()?;
    Ok(EpisodeState {
        index: episode_index,
        start_time,
        beta,
        cursors: vec![0; paths.len()],
        destinations: dest.destinations,
        paths,
        snapshot: counts.to_vec(),
    })
}

/// Hop-distance Voronoi partition: each vertex is owned by the nearest agent,
/// ties to the lowest agent index.
pub fn voronoi_partition(g: &GridGraph, positions: &[usize]) -> Vec<usize> {
    let n = g.vertex_count();
    let mut owner = vec![usize::MAX; n];
    let mut best_dist = vec![usize::MAX; n];
    for (i, &p) in positions.iter().enumerate() {
        // BFS distances from this agent.
        let mut dist = vec![usize::MAX; n];
        dist[p] = 0;
        let mut queue = std::collections::VecDeque::from([p]);
        while let Some(u) = queue.pop_front() {
            for &w in g.neighbors(u) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        for v in 0..n {
            if dist[v] < best_dist[v] {
                best_dist[v] = dist[v];
                owner[v] = i;
            }
        }
    }
    owner
}

/// Coverage cost of a partition under a reward estimate.
///
/// The printed distance indicator in the source formulation is inverted (it
/// charges covered vertices); here a vertex costs its reward when it is NOT
/// inside its owner's k-hop coverage, so minimizing the cost maximizes
/// covered mass.
pub fn voronoi_cost(
    g: &GridGraph,
    cov: &CoverageModel,
    positions: &[usize],
    owner: &[usize],
    mean: &[f64],
) -> Result<f64> {
    let mut cost = 0.0;
    for (i, &p) in positions.iter().enumerate() {
        let ball = k_hop(g, p, cov.hop_radii[i])?;
        for v in 0..g.vertex_count() {
            if owner[v] == i && !ball.contains(&v) {
                cost += mean[v];
            }
        }
    }
    Ok(cost)
}

/// Sequential exploration targets by imaginary queries: pick the globally
/// most uncertain vertex, condition the covariance on an imaginary
/// observation there (variance only, no mean change), repeat.
pub fn voronoi_explore_targets(gp: &GpState, agents: usize) -> Vec<usize> {
    let n = gp.vertex_count();
    let mut cov = gp.cov.clone();
    let mut targets = Vec::with_capacity(agents);
    for _ in 0..agents {
        let mut best = 0;
        for v in 1..n {
            if cov[(v, v)] > cov[(best, best)] {
                best = v;
            }
        }
        targets.push(best);
        let denom = cov[(best, best)] + gp.noise_var;
        if denom > 0.0 {
            let col = cov.column(best).clone_owned();
            cov -= &col * col.transpose() / denom;
        }
    }
    targets
}

/// Centroid of a Voronoi cell: the cell vertex whose coverage ball captures
/// the most posterior-mean mass inside the cell.
pub fn voronoi_centroid(
    g: &GridGraph,
    cov: &CoverageModel,
    owner: &[usize],
    agent: usize,
    fallback: usize,
    mean: &[f64],
) -> Result<usize> {
    let mut best_v = usize::MAX;
    let mut best_mass = f64::NEG_INFINITY;
    for v in 0..g.vertex_count() {
        if owner[v] != agent {
            continue;
        }
        let mass: f64 = k_hop(g, v, cov.hop_radii[agent])?
            .iter()
            .filter(|&&u| owner[u] == agent)
            .map(|&u| mean[u])
            .sum();
        if mass > best_mass {
            best_mass = mass;
            best_v = v;
        }
    }
    Ok(if best_v == usize::MAX { fallback } else { best_v })
}

/// Pessimistic safe set: the seeded vertices plus every vertex whose safety
/// LCB `mu_g - beta_g * sigma_g` is non-negative.
pub fn pessimistic_safe_set(gp_g: &GpState, beta_g: f64, seed: &[usize]) -> Vec<bool> {
    let n = gp_g.vertex_count();
    let mut safe: Vec<bool> = (0..n)
        .map(|v| gp_g.mean[v] - beta_g * gp_g.std_dev(v) >= 0.0)
        .collect();
    for &v in seed {
        safe[v] = true;
    }
    safe
}

/// Plans one episode of the safe variants. Destinations come from the
/// safe-restricted greedy oracle; paths stay inside the pessimistic safe set,
/// weighted by `max(mu_g, 0)` for Mac-DT-SafelyExplore or unweighted for the
/// Mac-DT-Safe ablation. An agent whose destination is unreachable holds
/// position for the episode.
#[allow(clippy::too_many_arguments)]
pub fn plan_episode_safe(
    gp_w: &GpState,
    gp_g: &GpState,
    positions: &[usize],
    config: &PolicyConfig,
    g: &GridGraph,
    cov: &CoverageModel,
    counts: &[u32],
    episode_index: usize,
    start_time: usize,
    safe_seed: &[usize],
) -> Result<EpisodeState> {
    let beta = config
        .beta_override
        .unwrap_or_else(|| beta_schedule(episode_index, g.vertex_count(), config.delta));
    let safe = pessimistic_safe_set(gp_g, beta, safe_seed);
    let mean: Vec<f64> = gp_w.mean.iter().cloned().collect();
    let ucb = ucb_map(&mean, &gp_w.std_devs(), beta);
    let dest = safe_greedy_oracle(&ucb, g, cov, &safe)?;
    let weighted = config.kind == PolicyKind::MacDtSafelyExplore;
    let paths = positions
        .iter()
        .zip(&dest.destinations)
        .map(|(&src, &dst)| {
            let planned = if weighted {
                weighted_shortest_path(g, src, dst, &|v| gp_g.mean[v].max(0.0), &safe)
            } else {
                shortest_path_in(g, src, dst, &safe)
            };
            match planned {
                Ok(p) => p,
                // Hold this episode if the destination is unreachable.
                Err(Error::Unreachable { .. }) => vec![src],
                Err(_) => vec![src],
            }
        })
        .collect();
    Ok(EpisodeState {
        index: episode_index,
        start_time,
        beta,
        cursors: vec![0; positions.len()],
        destinations: dest.destinations,
        paths,
        snapshot: counts.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{diagonal_posterior_variance, GpState, Kernel};
    use crate::graph::build_grid;
    use approx::assert_relative_eq;

    #[test]
    fn beta_schedule_reference_value() {
        assert_relative_eq!(beta_schedule(1, 64, 0.1), 3.7307287435096277, epsilon = 1e-9);
    }

    #[test]
    fn beta_monotone_in_episode() {
        for e in 1..200 {
            assert!(beta_schedule(e + 1, 36, 0.1) > beta_schedule(e, 36, 0.1));
        }
    }

    #[test]
    fn beta_log_argument_positive() {
        // |V| pi^2 e^2 / 6 > 1 for |V| >= 1, e >= 1, so the argument of the
        // log exceeds 1 whenever delta < pi^2/6.
        for &n in &[1usize, 2, 64] {
            for e in 1..10 {
                let beta = beta_schedule(e, n, 0.999);
                assert!(beta.is_finite() && beta > 0.0);
            }
        }
    }

    #[test]
    fn ucb_map_arithmetic_and_clamp() {
        assert_eq!(ucb_map(&[0.2], &[0.1], 2.0), vec![0.4]);
        assert_eq!(ucb_map(&[-0.5, 0.3], &[0.0, 0.0], 5.0), vec![0.0, 0.3]);
        assert_eq!(ucb_map(&[-0.5, 0.3], &[1.0, 1.0], 0.0), vec![0.0, 0.3]);
    }

    #[test]
    fn eval_point_selection() {
        let std_dev = vec![0.5; 9];
        assert_eq!(select_eval_point(&[3], &std_dev), 3);
        assert_eq!(select_eval_point(&[2, 5, 7], &std_dev), 2); // tie -> lowest
        let mut varied = std_dev.clone();
        varied[5] = 0.9;
        assert_eq!(select_eval_point(&[2, 5, 7], &varied), 5);
    }

    #[test]
    fn eval_point_prefers_unsampled_under_diagonal_kernel() {
        let g = build_grid(2, 2).unwrap();
        let k = Kernel::Diagonal { signal_variance: 1.0 };
        let gp = GpState::from_observations(&k, &g, 0.0, 0.5, &[(1, 0.4)]).unwrap();
        let chosen = select_eval_point(&[0, 1, 2], &gp.std_devs());
        assert_ne!(chosen, 1);
        assert!((gp.std_dev(1).powi(2) - diagonal_posterior_variance(1.0, 1, 0.5)).abs() < 1e-10);
    }

    #[test]
    fn doubling_trigger_cases() {
        // Unsampled vertex sampled once: max{0, 1} = 1 -> triggered.
        assert!(doubling_triggered(&[1, 0], &[0, 0]));
        // 3 -> 5 needs 6, not triggered.
        assert!(!doubling_triggered(&[5], &[3]));
        // 3 -> 6 triggered.
        assert!(doubling_triggered(&[6], &[3]));
    }

    #[test]
    fn voronoi_single_agent_owns_everything() {
        let g = build_grid(3, 3).unwrap();
        let owner = voronoi_partition(&g, &[4]);
        assert!(owner.iter().all(|&o| o == 0));
    }

    #[test]
    fn voronoi_opposite_corners_split() {
        let g = build_grid(4, 4).unwrap();
        let owner = voronoi_partition(&g, &[0, 15]);
        for (v, &own) in owner.iter().enumerate() {
            let (r, c) = g.coord(v);
            let d0 = r + c;
            let d1 = (3 - r) + (3 - c);
            let expect = if d0 <= d1 { 0 } else { 1 }; // tie -> agent 0
            assert_eq!(own, expect, "vertex {v}");
        }
    }

    #[test]
    fn voronoi_cost_zero_when_everything_covered() {
        let g = build_grid(2, 2).unwrap();
        let cov = CoverageModel::for_graph(&g, vec![1, 1]).unwrap();
        let positions = [0, 3];
        let owner = voronoi_partition(&g, &positions);
        // 1-hop balls from opposite corners of a 2x2 cover all vertices.
        let cost = voronoi_cost(&g, &cov, &positions, &owner, &[1.0; 4]).unwrap();
        assert_eq!(cost, 0.0);
    }

    #[test]
    fn explore_targets_diagonal_kernel_distinct() {
        let g = build_grid(3, 3).unwrap();
        let k = Kernel::Diagonal { signal_variance: 1.0 };
        let gp = GpState::new(&k, &g, 0.0, 0.1);
        let targets = voronoi_explore_targets(&gp, 2);
        assert_eq!(targets.len(), 2);
        assert_ne!(targets[0], targets[1]);
    }

    #[test]
    fn explore_targets_shrink_variance_at_chosen() {
        let g = build_grid(3, 3).unwrap();
        let k = Kernel::SquaredExponential {
            length_scale: 0.5,
            signal_variance: 1.0,
        };
        let gp = GpState::new(&k, &g, 0.0, 0.1);
        let mut cov = gp.cov.clone();
        let first = voronoi_explore_targets(&gp, 1)[0];
        let before = cov[(first, first)];
        let col = cov.column(first).clone_owned();
        cov -= &col * col.transpose() / (before + gp.noise_var);
        assert!(cov[(first, first)] < before);
    }

    #[test]
    fn pessimistic_set_includes_seed_and_lcb() {
        let g = build_grid(2, 2).unwrap();
        let k = Kernel::Diagonal { signal_variance: 1.0 };
        // Noiseless reading g(1) = 2: vertex 1 enters the safe set; the rest
        // stay out (prior mean 0, positive beta), except the seed.
        let gp_g = GpState::from_observations(&k, &g, 0.0, 0.0, &[(1, 2.0)]).unwrap();
        let safe = pessimistic_safe_set(&gp_g, 3.0, &[0]);
        assert_eq!(safe, vec![true, true, false, false]);
    }
}
