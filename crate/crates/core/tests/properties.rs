//! Randomized invariants across the graph, GP, oracle, and policy layers.

use proptest::prelude::*;

use macdt_core::gp::{GpState, Kernel};
use macdt_core::graph::{build_grid, diameter, k_hop, shortest_path, CoverageModel};
use macdt_core::oracle::{exact_oracle, greedy_oracle};
use macdt_core::policy::{beta_schedule, doubling_triggered, ucb_map};

fn se(length_scale: f64) -> Kernel {
    Kernel::SquaredExponential {
        length_scale,
        signal_variance: 1.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shortest_paths_are_valid_and_diameter_bounded(
        rows in 2usize..7,
        cols in 2usize..7,
        a in 0usize..36,
        b in 0usize..36,
    ) {
        let g = build_grid(rows, cols).unwrap();
        let n = g.vertex_count();
        let (src, dst) = (a % n, b % n);
        let path = shortest_path(&g, src, dst).unwrap();
        prop_assert_eq!(path[0], src);
        prop_assert_eq!(*path.last().unwrap(), dst);
        for w in path.windows(2) {
            prop_assert!(g.neighbors(w[0]).contains(&w[1]));
        }
        // Hop count equals Manhattan distance on a grid, and never exceeds
        // the diameter.
        let (r1, c1) = g.coord(src);
        let (r2, c2) = g.coord(dst);
        let manhattan = r1.abs_diff(r2) + c1.abs_diff(c2);
        prop_assert_eq!(path.len() - 1, manhattan);
        prop_assert!(path.len() - 1 <= diameter(&g));
    }

    #[test]
    fn k_hop_membership_is_symmetric(
        rows in 2usize..6,
        cols in 2usize..6,
        k in 0usize..4,
        a in 0usize..25,
        b in 0usize..25,
    ) {
        let g = build_grid(rows, cols).unwrap();
        let n = g.vertex_count();
        let (u, v) = (a % n, b % n);
        let u_ball = k_hop(&g, u, k).unwrap();
        let v_ball = k_hop(&g, v, k).unwrap();
        prop_assert_eq!(u_ball.contains(&v), v_ball.contains(&u));
        prop_assert!(u_ball.contains(&u));
        let mut sorted = u_ball.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted, u_ball);
    }

    #[test]
    fn posterior_variance_shrinks_and_stays_nonnegative(
        seed in 0u64..1000,
        length_scale in 0.1f64..2.0,
        obs_count in 1usize..15,
    ) {
        use rand::{Rng, SeedableRng};
        let g = build_grid(4, 4).unwrap();
        let kernel = se(length_scale);
        let prior = GpState::new(&kernel, &g, 0.0, 0.1);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let obs: Vec<(usize, f64)> = (0..obs_count)
            .map(|_| (rng.random_range(0..16), rng.random_range(-1.0..1.0)))
            .collect();
        let post = prior.posterior_update(&obs).unwrap();
        for v in 0..16 {
            prop_assert!(post.cov[(v, v)] >= -1e-10);
            prop_assert!(post.cov[(v, v)] <= prior.cov[(v, v)] + 1e-9);
        }
        // Conditioning on more data never inflates any variance.
        let more = post.posterior_update(&obs).unwrap();
        for v in 0..16 {
            prop_assert!(more.cov[(v, v)] <= post.cov[(v, v)] + 1e-9);
        }
    }

    #[test]
    fn ucb_is_nonnegative_and_dominates_mean_clamp(
        mean in prop::collection::vec(-2.0f64..2.0, 9),
        std in prop::collection::vec(0.0f64..1.5, 9),
        beta in 0.0f64..5.0,
    ) {
        let ucb = ucb_map(&mean, &std, beta);
        for v in 0..9 {
            prop_assert!(ucb[v] >= 0.0);
            prop_assert!(ucb[v] + 1e-12 >= mean[v].max(0.0));
        }
    }

    #[test]
    fn beta_schedule_is_increasing_in_episode(
        e in 1usize..50,
        n in 2usize..200,
        delta in 0.01f64..0.5,
    ) {
        prop_assert!(beta_schedule(e + 1, n, delta) > beta_schedule(e, n, delta));
        prop_assert!(beta_schedule(e, n, delta) > 0.0);
    }

    #[test]
    fn doubling_condition_matches_definition(
        snapshot in prop::collection::vec(0u32..6, 8),
        extra in prop::collection::vec(0u32..14, 8),
    ) {
        let now: Vec<u32> = snapshot.iter().zip(&extra).map(|(&s, &e)| s + e).collect();
        let expect = now
            .iter()
            .zip(&snapshot)
            .any(|(&n, &s)| n >= (2 * s).max(1));
        prop_assert_eq!(doubling_triggered(&now, &snapshot), expect);
    }

    #[test]
    fn greedy_within_constant_of_exact_small(
        values in prop::collection::vec(0.0f64..1.0, 9),
        n_agents in 1usize..3,
    ) {
        let g = build_grid(3, 3).unwrap();
        let cov = CoverageModel::for_graph(&g, vec![1; n_agents]).unwrap();
        let greedy = greedy_oracle(&values, &g, &cov).unwrap();
        let exact = exact_oracle(&values, &g, &cov).unwrap();
        let alpha = 1.0 - (-1.0f64).exp();
        prop_assert!(greedy.value >= alpha * exact.value - 1e-9);
        prop_assert!(greedy.value <= exact.value + 1e-9);
    }
}
